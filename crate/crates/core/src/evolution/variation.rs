use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FewError, Result};
use crate::expr::{random_leaf, FeatureTree, Node, ValueType, CONST_LEAF_PROB};

/// Attempts at finding a depth-respecting crossover point before giving up.
const CROSSOVER_TRIES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Crossover,
    Mutation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Offspring {
    pub tree: FeatureTree,
    /// Indices into the parent population.
    pub parent_ids: Vec<usize>,
    pub origin: Origin,
}

/// Shared knobs for the variation operators.
#[derive(Clone, Copy, Debug)]
pub struct VariationParams {
    pub max_depth: usize,
    /// Context of the root position (the population's output type).
    pub root_type: ValueType,
    /// Attribute count.
    pub n_vars: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
}

/// Replaces a uniformly chosen subtree of `p1` with a type-compatible,
/// uniformly chosen subtree of `p2`. Falls back to a copy of `p1` when no
/// depth-respecting pair is found in a few tries.
pub fn subtree_crossover<R: Rng + ?Sized>(
    p1: &FeatureTree,
    p2: &FeatureTree,
    max_depth: usize,
    root_type: ValueType,
    rng: &mut R,
) -> FeatureTree {
    let ctx1 = p1.node_contexts(root_type);
    let depth1 = p1.node_depths();
    let height2 = p2.node_heights();
    for _ in 0..CROSSOVER_TRIES {
        let i = rng.gen_range(0..p1.len());
        let candidates: Vec<usize> =
            (0..p2.len()).filter(|&j| p2.nodes()[j].admissible_in(ctx1[i])).collect();
        if candidates.is_empty() {
            continue;
        }
        let j = candidates[rng.gen_range(0..candidates.len())];
        if depth1[i] - 1 + height2[j] > max_depth {
            continue;
        }
        return graft(p1, i, p2, j);
    }
    p1.clone()
}

/// `p1` with the subtree at `at` replaced by the subtree of `p2` at `from`.
pub fn graft(p1: &FeatureTree, at: usize, p2: &FeatureTree, from: usize) -> FeatureTree {
    p1.splice(at, p1.subtree_end(at), &p2.nodes()[from..p2.subtree_end(from)])
}

/// Independently replaces each node with probability `rate` by a node of the
/// same arity and typing. Shape and depth are preserved.
pub fn point_mutation<R: Rng + ?Sized>(
    p: &FeatureTree,
    rate: f64,
    root_type: ValueType,
    n_vars: usize,
    rng: &mut R,
) -> FeatureTree {
    let ctx = p.node_contexts(root_type);
    let nodes: Vec<Node> = p
        .nodes()
        .iter()
        .zip(&ctx)
        .map(|(node, &c)| if rng.gen_bool(rate) { mutate_node(*node, c, n_vars, rng) } else { *node })
        .collect();
    FeatureTree::from_nodes_unchecked(nodes)
}

fn mutate_node<R: Rng + ?Sized>(node: Node, ctx: ValueType, n_vars: usize, rng: &mut R) -> Node {
    match node {
        Node::Op(op) => {
            let fam = op.family();
            if fam.len() == 1 {
                return node;
            }
            let k = rng.gen_range(0..fam.len() - 1);
            let pos = fam.iter().position(|o| *o == op).expect("op in own family");
            Node::Op(fam[if k >= pos { k + 1 } else { k }])
        }
        Node::Var(j) => {
            if ctx == ValueType::Float && (n_vars == 1 || rng.gen_bool(CONST_LEAF_PROB)) {
                return random_const(rng);
            }
            if n_vars == 1 {
                return node;
            }
            let k = rng.gen_range(0..n_vars - 1);
            Node::Var(if k >= j { k + 1 } else { k })
        }
        Node::Const(_) => {
            if rng.gen_bool(CONST_LEAF_PROB) {
                random_const(rng)
            } else {
                random_leaf(ValueType::Bool, n_vars, rng)
            }
        }
    }
}

fn random_const<R: Rng + ?Sized>(rng: &mut R) -> Node {
    Node::Const(rng.gen_range(-1.0..=1.0))
}

/// Produces exactly `count` offspring from `parents`.
pub fn make_offspring<R: Rng + ?Sized>(
    parents: &[FeatureTree],
    count: usize,
    params: &VariationParams,
    rng: &mut R,
) -> Result<Vec<Offspring>> {
    if parents.is_empty() {
        return Err(FewError::Empty("no parents to vary".into()));
    }
    let n = parents.len();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        if rng.gen_bool(params.crossover_rate) {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            let tree = subtree_crossover(&parents[a], &parents[b], params.max_depth, params.root_type, rng);
            out.push(Offspring { tree, parent_ids: vec![a, b], origin: Origin::Crossover });
        } else {
            let a = rng.gen_range(0..n);
            let tree = point_mutation(&parents[a], params.mutation_rate, params.root_type, params.n_vars, rng);
            out.push(Offspring { tree, parent_ids: vec![a], origin: Origin::Mutation });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_tree, random_tree};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(max_depth: usize, root_type: ValueType, xo: f64) -> VariationParams {
        VariationParams { max_depth, root_type, n_vars: 5, crossover_rate: xo, mutation_rate: 0.1 }
    }

    #[test]
    fn self_crossover_at_root_is_identity() {
        let t = parse_tree("(add (sin x0) x1)", 2).unwrap();
        assert_eq!(graft(&t, 0, &t, 0), t);
        assert_eq!(graft(&t, 1, &t, 3).to_text(), "(add x1 x1)");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let single = FeatureTree::var(1);
        assert_eq!(subtree_crossover(&single, &single, 3, ValueType::Float, &mut rng), single);
    }

    #[test]
    fn crossover_respects_depth_and_typing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for i in 0..10_000 {
            let ty = if i % 2 == 0 { ValueType::Bool } else { ValueType::Float };
            let a = random_tree(3, ty, 5, &mut rng);
            let b = random_tree(3, ty, 5, &mut rng);
            let c = subtree_crossover(&a, &b, 3, ty, &mut rng);
            assert!(c.depth() <= 3);
            assert!(c.well_typed(ty), "{c}");
            // every child node comes from one of the parents
            for n in c.nodes() {
                assert!(a.nodes().contains(n) || b.nodes().contains(n));
            }
        }
    }

    #[test]
    fn zero_rate_mutation_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_tree(3, ValueType::Bool, 5, &mut rng);
        assert_eq!(point_mutation(&t, 0.0, ValueType::Bool, 5, &mut rng), t);
    }

    #[test]
    fn full_rate_mutation_on_leaf_stays_leaf() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let m = point_mutation(&FeatureTree::var(0), 1.0, ValueType::Float, 5, &mut rng);
            assert_eq!(m.len(), 1);
            assert!(matches!(m.nodes()[0], Node::Var(_) | Node::Const(_)));
        }
    }

    #[test]
    fn mutation_changes_expected_fraction_of_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // no `not` nodes so every selected node has an alternative
        let t = parse_tree("(add (mul x0 0.5) (sin x2))", 5).unwrap();
        let rate = 0.3;
        let trials = 10_000;
        let mut changed = 0usize;
        for _ in 0..trials {
            let m = point_mutation(&t, rate, ValueType::Float, 5, &mut rng);
            assert_eq!(m.depth(), t.depth());
            assert!(m.well_typed(ValueType::Float));
            changed += m.nodes().iter().zip(t.nodes()).filter(|(a, b)| a != b).count();
        }
        let expected = rate * t.len() as f64 * trials as f64;
        assert!((changed as f64 - expected).abs() <= 0.05 * expected, "{changed} vs {expected}");
    }

    #[test]
    fn offspring_cardinality_and_origins() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let parents: Vec<FeatureTree> = (0..10).map(|_| random_tree(3, ValueType::Float, 5, &mut rng)).collect();
        let off = make_offspring(&parents, 100, &params(3, ValueType::Float, 0.5), &mut rng).unwrap();
        assert_eq!(off.len(), 100);
        for o in &off {
            match o.origin {
                Origin::Crossover => assert_eq!(o.parent_ids.len(), 2),
                Origin::Mutation => assert_eq!(o.parent_ids.len(), 1),
            }
            assert!(o.tree.depth() <= 3);
        }

        let off = make_offspring(&parents, 50, &params(3, ValueType::Float, 0.0), &mut rng).unwrap();
        assert!(off.iter().all(|o| o.origin == Origin::Mutation && o.parent_ids.len() == 1));

        let off = make_offspring(&parents[..1], 20, &params(3, ValueType::Float, 1.0), &mut rng).unwrap();
        assert!(off.iter().all(|o| o.origin == Origin::Crossover && o.parent_ids == vec![0, 0]));

        assert!(make_offspring(&[], 5, &params(3, ValueType::Float, 0.5), &mut rng).is_err());
    }
}
