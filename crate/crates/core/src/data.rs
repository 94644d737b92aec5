//! Datasets, CSV loading, splitting and synthetic problems.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FewError, Result};
use crate::matrix::Matrix;

const MISSING: [&str; 8] = ["", "na", "nan", "n/a", "null", "none", "?", "-"];

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
}

/// Target column selector. A string that names a header column wins over
/// its reading as an index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Name(String),
    Index(usize),
    Last,
}

impl FromStr for Target {
    type Err = FewError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(Target::Name(s.to_string()))
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Name(n) => write!(f, "{n}"),
            Target::Index(i) => write!(f, "{i}"),
            Target::Last => f.write_str("<last>"),
        }
    }
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<usize>, feature_names: Vec<String>, class_names: Vec<String>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(FewError::Shape { expected: x.rows(), got: y.len() });
        }
        if x.cols() != feature_names.len() {
            return Err(FewError::Shape { expected: x.cols(), got: feature_names.len() });
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= class_names.len()) {
            return Err(FewError::InvalidConfig(format!("label {bad} has no class name")));
        }
        Ok(Dataset { x, y, feature_names, class_names })
    }

    pub fn n_samples(&self) -> usize {
        self.x.rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        for &l in &self.y {
            c[l] += 1;
        }
        c
    }
}

fn load_err(path: &Path, message: impl Into<String>) -> FewError {
    FewError::Load { path: path.display().to_string(), message: message.into() }
}

fn is_missing(cell: &str) -> bool {
    MISSING.contains(&cell.to_ascii_lowercase().as_str())
}

/// Parses a numeric cell; `None` means missing.
fn parse_cell(cell: &str) -> std::result::Result<Option<f64>, ()> {
    let cell = cell.trim();
    if is_missing(cell) {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Ok(None),
        Err(_) => match cell.to_ascii_lowercase().as_str() {
            "true" | "yes" => Ok(Some(1.0)),
            "false" | "no" => Ok(Some(0.0)),
            _ => Err(()),
        },
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    if !path.exists() {
        return Err(load_err(path, "file not found"));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| load_err(path, e.to_string()))?;
    let header: Vec<String> =
        rdr.headers().map_err(|e| load_err(path, e.to_string()))?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(load_err(path, "missing header row"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| load_err(path, format!("row {}: {e}", i + 2)))?;
        if rec.len() != header.len() {
            return Err(load_err(path, format!("row {}: expected {} fields, found {}", i + 2, header.len(), rec.len())));
        }
        rows.push(rec);
    }
    if rows.is_empty() {
        return Err(load_err(path, "no data rows"));
    }
    Ok((header, rows))
}

/// Numeric matrix from the given columns with median imputation.
fn numeric_columns(path: &Path, header: &[String], rows: &[csv::StringRecord], cols: &[usize]) -> Result<Matrix> {
    let mut data = vec![vec![f64::NAN; cols.len()]; rows.len()];
    let mut seen: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
    for (i, rec) in rows.iter().enumerate() {
        for (k, &c) in cols.iter().enumerate() {
            match parse_cell(&rec[c]) {
                Ok(Some(v)) => {
                    data[i][k] = v;
                    seen[k].push(v);
                }
                Ok(None) => {}
                Err(()) => {
                    return Err(load_err(
                        path,
                        format!("row {}, column `{}`: cannot parse `{}` as a number", i + 2, header[c], &rec[c]),
                    ))
                }
            }
        }
    }
    let medians: Vec<f64> = seen.iter_mut().map(|v| median(v)).collect();
    for row in &mut data {
        for (v, m) in row.iter_mut().zip(&medians) {
            if v.is_nan() {
                *v = *m;
            }
        }
    }
    Ok(Matrix::from_rows(&data))
}

/// Loads a labelled CSV. Labels are encoded in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, target: &Target) -> Result<Dataset> {
    let path = path.as_ref();
    let (header, rows) = read_records(path)?;
    let t = match target {
        Target::Name(name) => match header.iter().position(|h| h == name) {
            Some(i) => i,
            None => match name.parse::<usize>() {
                Ok(i) if i < header.len() => i,
                _ => return Err(load_err(path, format!("target column `{name}` not found"))),
            },
        },
        Target::Index(i) if *i < header.len() => *i,
        Target::Index(i) => return Err(load_err(path, format!("target column index {i} out of range"))),
        Target::Last => header.len() - 1,
    };
    if header.len() < 2 {
        return Err(load_err(path, "no feature columns besides the target"));
    }
    let mut class_names: Vec<String> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    let mut y = Vec::with_capacity(rows.len());
    for (i, rec) in rows.iter().enumerate() {
        let label = rec[t].trim();
        if label.is_empty() {
            return Err(load_err(path, format!("row {}, column `{}`: missing label", i + 2, header[t])));
        }
        let next = class_names.len();
        let id = *lookup.entry(label.to_string()).or_insert_with(|| {
            class_names.push(label.to_string());
            next
        });
        y.push(id);
    }
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != t).collect();
    let x = numeric_columns(path, &header, &rows, &feature_cols)?;
    let feature_names = feature_cols.iter().map(|&c| header[c].clone()).collect();
    Dataset::new(x, y, feature_names, class_names)
}

/// Loads an unlabelled CSV for prediction, skipping the column named `drop`
/// if present.
pub fn load_features_csv(path: impl AsRef<Path>, drop: Option<&str>) -> Result<(Matrix, Vec<String>)> {
    let path = path.as_ref();
    let (header, rows) = read_records(path)?;
    let cols: Vec<usize> = (0..header.len()).filter(|&c| Some(header[c].as_str()) != drop).collect();
    let x = numeric_columns(path, &header, &rows, &cols)?;
    Ok((x, cols.iter().map(|&c| header[c].clone()).collect()))
}

/// Writes features followed by a `label` column holding class names.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header = ds.feature_names.clone();
    header.push("label".to_string());
    w.write_record(&header)?;
    for i in 0..ds.n_samples() {
        let mut rec: Vec<String> = ds.x.row(i).iter().map(|v| format!("{v}")).collect();
        rec.push(ds.class_names[ds.y[i]].clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn group_by_class(y: &[usize]) -> Vec<Vec<usize>> {
    let k = y.iter().copied().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); k];
    for (i, &c) in y.iter().enumerate() {
        groups[c].push(i);
    }
    groups
}

/// Train and test index sets. Stratification rounds each class's test share;
/// a class with one sample stays in train.
pub fn split_indices<R: Rng + ?Sized>(
    y: &[usize],
    test_fraction: f64,
    stratified: bool,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(FewError::InvalidConfig(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    let groups = if stratified { group_by_class(y) } else { vec![(0..y.len()).collect()] };
    for mut g in groups {
        g.shuffle(rng);
        let n_test = if g.len() < 2 { 0 } else { ((g.len() as f64 * test_fraction).round() as usize).min(g.len() - 1) };
        test.extend_from_slice(&g[..n_test]);
        train.extend_from_slice(&g[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn train_test_split(ds: &Dataset, test_fraction: f64, stratified: bool, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train, test) = split_indices(&ds.y, test_fraction, stratified, &mut rng)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Stratified folds: each class is shuffled and dealt round-robin, the deal
/// continuing where the previous class stopped so fold sizes stay even.
pub fn stratified_fold_indices<R: Rng + ?Sized>(y: &[usize], k_folds: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k_folds.max(1)];
    let mut next = 0;
    for mut g in group_by_class(y) {
        g.shuffle(rng);
        for i in g {
            folds[next].push(i);
            next = (next + 1) % folds.len();
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    folds
}

pub fn stratified_kfold(ds: &Dataset, k_folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k_folds < 2 {
        return Err(FewError::InvalidConfig("k_folds must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(stratified_fold_indices(&ds.y, k_folds, &mut rng))
}

fn default_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

/// Binary features whose label is the XOR of the first `n_relevant`.
///
/// When `n_samples` covers the full truth table, every pattern appears
/// `n_samples / 2^d` times and the remainder is filled with distinct patterns;
/// otherwise distinct patterns are sampled. Rows are shuffled.
pub fn gen_parity(n_samples: usize, n_features: usize, n_relevant: usize, seed: u64) -> Result<Dataset> {
    if n_relevant > n_features {
        return Err(FewError::InvalidConfig("n_relevant exceeds n_features".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut patterns: Vec<u64> = Vec::with_capacity(n_samples);
    if n_features < 63 {
        let space = 1u64 << n_features;
        let copies = n_samples as u64 / space;
        for _ in 0..copies {
            patterns.extend(0..space);
        }
        let rest = n_samples - patterns.len();
        patterns.extend(sample(&mut rng, space as usize, rest).into_iter().map(|v| v as u64));
    } else {
        let mask = if n_features >= 64 { u64::MAX } else { (1u64 << n_features) - 1 };
        patterns.extend((0..n_samples).map(|_| rng.gen::<u64>() & mask));
    }
    patterns.shuffle(&mut rng);
    let mut rows = Vec::with_capacity(n_samples);
    let mut y = Vec::with_capacity(n_samples);
    for p in patterns {
        let row: Vec<f64> = (0..n_features).map(|j| if j < 64 && (p >> j) & 1 == 1 { 1.0 } else { 0.0 }).collect();
        y.push(row[..n_relevant].iter().filter(|&&v| v == 1.0).count() % 2);
        rows.push(row);
    }
    let x = if n_samples == 0 { Matrix::zeros(0, n_features) } else { Matrix::from_rows(&rows) };
    Dataset::new(x, y, default_names(n_features), vec!["0".into(), "1".into()])
}

/// Genotype-like features in {0, 1, 2}; the label is 1 iff exactly one of the
/// last two features is nonzero, then flipped with probability `label_noise`.
///
/// Genotypes are drawn with P(0) = 1/2 and P(1) = P(2) = 1/4, which makes each
/// locus on its own carry no information about the label.
pub fn gen_epistasis_xor(n_samples: usize, n_features: usize, label_noise: f64, seed: u64) -> Result<Dataset> {
    if n_features < 2 {
        return Err(FewError::InvalidConfig("epistasis needs at least two features".into()));
    }
    if !(0.0..0.5).contains(&label_noise) {
        return Err(FewError::InvalidConfig(format!("label noise {label_noise} not in [0, 0.5)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_samples);
    let mut y = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let row: Vec<f64> = (0..n_features)
            .map(|_| match rng.gen_range(0..4) {
                0 | 1 => 0.0,
                2 => 1.0,
                _ => 2.0,
            })
            .collect();
        let a = row[n_features - 2] >= 1.0;
        let b = row[n_features - 1] >= 1.0;
        let mut label = usize::from(a != b);
        if rng.gen_bool(label_noise) {
            label = 1 - label;
        }
        rows.push(row);
        y.push(label);
    }
    let x = if n_samples == 0 { Matrix::zeros(0, n_features) } else { Matrix::from_rows(&rows) };
    Dataset::new(x, y, default_names(n_features), vec!["0".into(), "1".into()])
}
