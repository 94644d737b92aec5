//! Survival: reduce parents ∪ offspring back to the population size.
//!
//! Every method returns indices into the pool it was given.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FewError, Result};
use crate::evolution::variation::{Offspring, Origin};
use crate::fitness::FitnessRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurvivalMethod {
    Tournament,
    Crowding,
    EpsLexicase,
    Random,
}

impl FromStr for SurvivalMethod {
    type Err = FewError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "tournament" => Ok(SurvivalMethod::Tournament),
            "crowding" | "deterministic-crowding" => Ok(SurvivalMethod::Crowding),
            "eps-lexicase" | "lexicase" | "epsilon-lexicase" => Ok(SurvivalMethod::EpsLexicase),
            "random" => Ok(SurvivalMethod::Random),
            other => Err(FewError::InvalidConfig(format!("unknown survival method `{other}`"))),
        }
    }
}

impl fmt::Display for SurvivalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurvivalMethod::Tournament => "tournament",
            SurvivalMethod::Crowding => "crowding",
            SurvivalMethod::EpsLexicase => "eps-lexicase",
            SurvivalMethod::Random => "random",
        })
    }
}

/// The candidate pool and how many members must survive.
#[derive(Clone, Copy, Debug)]
pub struct SurvivalContext<'a> {
    pub pool: &'a [FitnessRecord],
    pub capacity: usize,
}

impl<'a> SurvivalContext<'a> {
    pub fn new(pool: &'a [FitnessRecord], capacity: usize) -> Self {
        SurvivalContext { pool, capacity }
    }
}

/// Median of a non-empty slice; mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    let (_, hi, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let hi = *hi;
    if v.len() % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo + hi) / 2.0
    }
}

/// Median absolute deviation: median(|vᵢ − median(v)|).
pub fn mad(values: &[f64]) -> f64 {
    let m = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    median(&dev)
}

/// `capacity` independent size-2 tournaments drawn with replacement.
pub fn tournament_survival<R: Rng + ?Sized>(ctx: SurvivalContext<'_>, rng: &mut R) -> Vec<usize> {
    let n = ctx.pool.len();
    (0..ctx.capacity)
        .map(|_| {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            let (fa, fb) = (ctx.pool[a].aggregate, ctx.pool[b].aggregate);
            if fa > fb {
                a
            } else if fb > fa {
                b
            } else if rng.gen_bool(0.5) {
                a
            } else {
                b
            }
        })
        .collect()
}

/// `capacity` distinct members drawn uniformly.
pub fn random_survival<R: Rng + ?Sized>(ctx: SurvivalContext<'_>, rng: &mut R) -> Result<Vec<usize>> {
    if ctx.capacity > ctx.pool.len() {
        return Err(FewError::InvalidConfig("survival capacity exceeds pool".into()));
    }
    Ok(rand::seq::index::sample(rng, ctx.pool.len(), ctx.capacity).into_vec())
}

/// ε-lexicase survival.
///
/// For each survivor slot the candidate set starts as the pool minus the
/// survivors chosen so far, ε is the per-case MAD over that candidate set,
/// and cases are visited in a fresh random order. A case keeps members whose
/// error is within ε of the best error on it. Filtering stops when one member
/// is left or the cases run out; the survivor is drawn uniformly from what
/// remains.
///
/// RNG use per slot: one `shuffle` of the case indices, then one `gen_range`
/// over the remaining candidates.
pub fn eps_lexicase_survival<R: Rng + ?Sized>(ctx: SurvivalContext<'_>, rng: &mut R) -> Result<Vec<usize>> {
    let errors: Vec<&[f64]> = ctx
        .pool
        .iter()
        .map(|r| r.per_case_error.as_deref())
        .collect::<Option<_>>()
        .ok_or_else(|| FewError::UnsupportedMetric("pool without per-case errors".into()))?;
    if ctx.capacity > errors.len() {
        return Err(FewError::InvalidConfig("survival capacity exceeds pool".into()));
    }
    let n_cases = errors.first().map_or(0, |e| e.len());

    let mut remaining: Vec<usize> = (0..errors.len()).collect();
    let mut survivors = Vec::with_capacity(ctx.capacity);
    let mut column = Vec::with_capacity(errors.len());
    for _ in 0..ctx.capacity {
        let epsilon: Vec<f64> = (0..n_cases)
            .map(|t| {
                column.clear();
                column.extend(remaining.iter().map(|&i| errors[i][t]));
                mad(&column)
            })
            .collect();

        let mut cases: Vec<usize> = (0..n_cases).collect();
        cases.shuffle(rng);

        let mut pool = remaining.clone();
        for &t in &cases {
            if pool.len() <= 1 {
                break;
            }
            let elite = pool.iter().map(|&i| errors[i][t]).fold(f64::INFINITY, f64::min);
            let bound = elite + epsilon[t];
            pool.retain(|&i| errors[i][t] <= bound);
        }
        let pick = pool[rng.gen_range(0..pool.len())];
        survivors.push(pick);
        remaining.retain(|&i| i != pick);
    }
    Ok(survivors)
}

/// Similarity of a child to a parent: R² of the child output against the
/// parent output taken as the target. A constant parent is similar only to
/// an identical child.
pub fn output_similarity(parent: &[f64], child: &[f64]) -> f64 {
    let mean = parent.iter().sum::<f64>() / parent.len() as f64;
    let ss_tot: f64 = parent.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = parent.iter().zip(child).map(|(p, c)| (p - c).powi(2)).sum();
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    }
}

/// Generational deterministic crowding.
///
/// The pool is laid out as `parents ++ offspring`: indices `0..n_parents`
/// are parents (each owning one slot), the rest are offspring in order.
/// `fitness` and `outputs` are indexed by pool position. Slots beyond
/// `n_parents` (vacated by importance selection) are filled first with
/// uniformly chosen offspring; every other offspring, in random order,
/// challenges the current occupant of its most similar parent's slot and
/// replaces it only on strictly greater fitness.
pub fn crowding_survival<R: Rng + ?Sized>(
    n_parents: usize,
    offspring: &[Offspring],
    fitness: &[f64],
    outputs: &[Vec<f64>],
    capacity: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if n_parents > capacity {
        return Err(FewError::InvalidConfig("more parents than survival slots".into()));
    }
    let vacancies = capacity - n_parents;
    if vacancies > offspring.len() {
        return Err(FewError::InvalidConfig("not enough offspring to fill vacated slots".into()));
    }
    let mut slots: Vec<usize> = (0..n_parents).collect();
    let mut used = vec![false; offspring.len()];
    for j in rand::seq::index::sample(rng, offspring.len(), vacancies).into_vec() {
        used[j] = true;
        slots.push(n_parents + j);
    }

    let mut order: Vec<usize> = (0..offspring.len()).filter(|&j| !used[j]).collect();
    order.shuffle(rng);
    for j in order {
        let child = n_parents + j;
        let off = &offspring[j];
        let slot = match off.origin {
            Origin::Mutation => off.parent_ids[0],
            Origin::Crossover => {
                let mut best = off.parent_ids[0];
                let mut best_sim = output_similarity(&outputs[best], &outputs[child]);
                for &p in &off.parent_ids[1..] {
                    let sim = output_similarity(&outputs[p], &outputs[child]);
                    if sim > best_sim {
                        best = p;
                        best_sim = sim;
                    }
                }
                best
            }
        };
        if slot >= n_parents {
            return Err(FewError::InvalidConfig(format!("offspring parent link {slot} out of range")));
        }
        if fitness[child] > fitness[slots[slot]] {
            slots[slot] = child;
        }
    }
    Ok(slots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::FeatureTree;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rec(aggregate: f64, errors: Option<Vec<f64>>) -> FitnessRecord {
        FitnessRecord { aggregate, per_case_error: errors }
    }

    #[test]
    fn mad_examples() {
        assert_eq!(mad(&[1.0, 1.0, 1.0]), 0.0);
        assert_eq!(mad(&[0.0, 1.0, 1.0]), 0.0);
        assert_eq!(mad(&[1.0, 2.0, 4.0, 7.0]), 1.5);
        assert_eq!(median(&[3.0]), 3.0);
        assert_eq!(median(&[4.0, 1.0]), 2.5);
    }

    #[test]
    fn tournament_two_member_mix() {
        let pool = [rec(0.9, None), rec(0.1, None)];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let picks = tournament_survival(SurvivalContext::new(&pool, 40_000), &mut rng);
        let frac = picks.iter().filter(|&&i| i == 0).count() as f64 / picks.len() as f64;
        assert!((frac - 0.75).abs() < 0.01, "{frac}");
    }

    #[test]
    fn tournament_strict_best_wins_every_entry() {
        let pool = [rec(0.1, None), rec(5.0, None), rec(0.3, None), rec(0.2, None)];
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut replay = rng.clone();
        let picks = tournament_survival(SurvivalContext::new(&pool, 200), &mut rng);
        assert_eq!(picks.len(), 200);
        for &pick in &picks {
            let a = replay.gen_range(0..4);
            let b = replay.gen_range(0..4);
            if a == b {
                replay.gen_bool(0.5);
            }
            if a == 1 || b == 1 {
                assert_eq!(pick, 1);
            } else {
                assert!(pick == a || pick == b);
            }
        }
    }

    #[test]
    fn random_survival_full_pool_and_distinct() {
        let pool: Vec<_> = (0..6).map(|i| rec(i as f64, None)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut all = random_survival(SurvivalContext::new(&pool, 6), &mut rng).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..6).collect::<Vec<_>>());
        let some = random_survival(SurvivalContext::new(&pool, 3), &mut rng).unwrap();
        let mut dedup = some.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), 3);
    }

    #[test]
    fn random_survival_frequency() {
        let pool: Vec<_> = (0..10).map(|i| rec(i as f64, None)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let trials = 5000;
        let mut counts = [0usize; 10];
        for _ in 0..trials {
            for i in random_survival(SurvivalContext::new(&pool, 4), &mut rng).unwrap() {
                counts[i] += 1;
            }
        }
        let p: f64 = 0.4;
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - trials as f64 * p).abs() <= 3.0 * sd, "{c}");
        }
    }

    #[test]
    fn lexicase_hand_simulated_pool() {
        // A=(0,0), B=(1,1), C=(1,0): ε=(0,0); A survives first for either case order
        let pool = [
            rec(0.0, Some(vec![0.0, 0.0])),
            rec(0.0, Some(vec![1.0, 1.0])),
            rec(0.0, Some(vec![1.0, 0.0])),
        ];
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = eps_lexicase_survival(SurvivalContext::new(&pool, 3), &mut rng).unwrap();
            assert_eq!(s[0], 0);
            let mut sorted = s.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, vec![0, 1, 2]);
        }
    }

    #[test]
    fn lexicase_last_member_survives() {
        let pool = [rec(0.0, Some(vec![5.0])), rec(0.0, Some(vec![0.0]))];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = eps_lexicase_survival(SurvivalContext::new(&pool, 2), &mut rng).unwrap();
        assert_eq!(s, vec![1, 0]);
    }

    #[test]
    fn lexicase_requires_case_errors() {
        let pool = [rec(0.0, None), rec(1.0, None)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            eps_lexicase_survival(SurvivalContext::new(&pool, 1), &mut rng),
            Err(FewError::UnsupportedMetric(_))
        ));
    }

    fn mutation_child(parent: usize) -> Offspring {
        Offspring { tree: FeatureTree::var(0), parent_ids: vec![parent], origin: Origin::Mutation }
    }

    #[test]
    fn crowding_similarity_routes_child_to_identical_parent() {
        let outputs = vec![vec![0.0, 1.0, 2.0], vec![5.0, 3.0, 1.0], vec![5.0, 3.0, 1.0]];
        let child = Offspring { tree: FeatureTree::var(0), parent_ids: vec![0, 1], origin: Origin::Crossover };
        assert_eq!(output_similarity(&outputs[1], &outputs[2]), 1.0);
        let fitness = [0.5, 0.1, 0.9];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = crowding_survival(2, &[child], &fitness, &outputs, 2, &mut rng).unwrap();
        assert_eq!(s, vec![0, 2]);
    }

    #[test]
    fn crowding_keeps_occupant_on_equal_fitness() {
        let outputs = vec![vec![0.0, 1.0], vec![0.0, 2.0]];
        let fitness = [0.5, 0.5];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = crowding_survival(1, &[mutation_child(0)], &fitness, &outputs, 1, &mut rng).unwrap();
        assert_eq!(s, vec![0]);
    }

    #[test]
    fn crowding_worse_children_leave_parents() {
        let outputs = vec![vec![0.0, 1.0]; 6];
        let fitness = [0.9, 0.8, 0.7, 0.1, 0.2, 0.3];
        let kids: Vec<_> = (0..3).map(mutation_child).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = crowding_survival(3, &kids, &fitness, &outputs, 3, &mut rng).unwrap();
        assert_eq!(s, vec![0, 1, 2]);
    }

    #[test]
    fn crowding_fills_vacancies_then_competes() {
        let outputs = vec![vec![0.0, 1.0]; 5];
        let fitness = [0.1, 0.9, 0.9, 0.9, 0.9];
        let kids: Vec<_> = (0..4).map(|_| mutation_child(0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = crowding_survival(1, &kids, &fitness, &outputs, 3, &mut rng).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s[0] >= 1, "parent slot taken over by a fitter child");
        let mut d = s.clone();
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), 3);
    }
}
