//! Datasets, constraint mining, feature-space augmentation and annotation noise.
//!
//! Everything here is a pure function of its inputs and seed; datasets are
//! immutable once built and can be shared freely across threads.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split `{other}`"))),
        }
    }
}

/// A matrix of feature rows with optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Option<Vec<usize>>,
    num_classes: usize,
    split: Split,
}

impl Dataset {
    /// Builds a dataset, inferring the class count as `max(label) + 1` and
    /// requiring every class below it to occur.
    pub fn new(features: Array2<f64>, labels: Option<Vec<usize>>, split: Split) -> Result<Self> {
        if features.ncols() == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset features"));
        }
        let num_classes = match &labels {
            None => 0,
            Some(labels) => {
                if labels.len() != features.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: features.nrows(),
                        found: labels.len(),
                    });
                }
                let k = labels.iter().max().map_or(0, |&m| m + 1);
                let mut seen = vec![false; k];
                for &y in labels {
                    seen[y] = true;
                }
                if let Some(missing) = seen.iter().position(|s| !s) {
                    return Err(Error::invalid(format!("class {missing} has no samples")));
                }
                k
            }
        };
        Ok(Self { features, labels, num_classes, split })
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Mean of the per-dimension standard deviations (population form).
    pub fn mean_feature_std(&self) -> f64 {
        if self.len() == 0 {
            return 0.0;
        }
        let stds = self.features.std_axis(Axis(0), 0.0);
        stds.mean().unwrap_or(0.0)
    }

    /// Concatenates datasets that share a feature dimension. Labels survive
    /// only if every part is labeled.
    pub fn concat(parts: &[&Dataset], split: Split) -> Result<Dataset> {
        let first = parts.first().ok_or(Error::Empty("dataset list"))?;
        let d = first.dim();
        for p in parts {
            if p.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
            }
        }
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let features = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::invalid(e.to_string()))?;
        let labels = if parts.iter().all(|p| p.labels.is_some()) {
            Some(parts.iter().flat_map(|p| p.labels.clone().unwrap()).collect())
        } else {
            None
        };
        Dataset::new(features, labels, split)
    }
}

/// A ground-truth pairwise relation: `c == 1` is must-link, `c == 0` cannot-link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstraintPair {
    pub i: usize,
    pub j: usize,
    pub c: u8,
}

impl ConstraintPair {
    pub fn is_must_link(&self) -> bool {
        self.c == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Weak,
    Strong,
}

/// Weak augmentation adds isotropic Gaussian jitter; strong augmentation adds
/// larger jitter followed by per-coordinate dropout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPolicy {
    pub weak_sigma: f64,
    pub strong_sigma: f64,
    pub strong_dropout: f64,
    pub seed: u64,
}

/// Multipliers of the feature scale used to derive an [`AugmentationPolicy`]
/// from a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationScale {
    pub weak: f64,
    pub strong: f64,
    pub dropout: f64,
}

impl Default for AugmentationScale {
    fn default() -> Self {
        Self { weak: 0.05, strong: 0.25, dropout: 0.1 }
    }
}

impl AugmentationPolicy {
    pub fn for_dataset(ds: &Dataset, scale: AugmentationScale, seed: u64) -> Result<Self> {
        let s = ds.mean_feature_std();
        let policy = Self {
            weak_sigma: scale.weak * s,
            strong_sigma: scale.strong * s,
            strong_dropout: scale.dropout,
            seed,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.weak_sigma >= 0.0
            && self.weak_sigma <= self.strong_sigma
            && self.strong_sigma.is_finite()
            && (0.0..=1.0).contains(&self.strong_dropout);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid augmentation policy {self:?}")))
        }
    }

    /// Augments each row of `x` in place using `rng`.
    pub fn apply_rows<R: Rng>(&self, x: &mut Array2<f64>, strength: Strength, rng: &mut R) {
        let (sigma, dropout) = match strength {
            Strength::Weak => (self.weak_sigma, 0.0),
            Strength::Strong => (self.strong_sigma, self.strong_dropout),
        };
        for v in x.iter_mut() {
            if sigma > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                *v += sigma * z;
            }
            if dropout > 0.0 && rng.gen::<f64>() < dropout {
                *v = 0.0;
            }
        }
    }
}

/// Augments a single feature vector; deterministic in `(policy.seed, seed)`.
pub fn augment(
    x: &[f64],
    policy: &AugmentationPolicy,
    strength: Strength,
    seed: u64,
) -> Result<Vec<f64>> {
    policy.validate()?;
    let mut rows = Array2::from_shape_vec((1, x.len()), x.to_vec())
        .map_err(|e| Error::invalid(e.to_string()))?;
    let mut r = rng::stream(policy.seed, &[seed]);
    policy.apply_rows(&mut rows, strength, &mut r);
    Ok(rows.into_raw_vec_and_offset().0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub constraint_flip_fraction: f64,
    /// Probability that an unconstrained prediction gets its top two entries swapped.
    pub pseudo_flip_fraction: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { constraint_flip_fraction: 0.0, pseudo_flip_fraction: 0.0, seed: 0 }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("constraint_flip_fraction", self.constraint_flip_fraction),
            ("pseudo_flip_fraction", self.pseudo_flip_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Generates `k` isotropic Gaussian blobs. Class `c` is centred on
/// `±4·spread·(1 + c / 2d)` along axis `c mod d`, the sign alternating every
/// `d` classes, so neighbouring means are at least `4·spread` apart.
pub fn make_blobs(k: usize, per_class: usize, d: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if k < 2 || per_class < 1 || d < 1 || !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::invalid(format!(
            "make_blobs needs k >= 2, per_class >= 1, d >= 1, spread > 0 (got k={k}, per_class={per_class}, d={d}, spread={spread})"
        )));
    }
    let means = blob_means(k, d, spread);
    let n = k * per_class;
    let mut features = Array2::<f64>::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut r = rng::stream(seed, &[0xB10B]);
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        let class = i % k;
        for (v, &m) in row.iter_mut().zip(means.row(class)) {
            let z: f64 = StandardNormal.sample(&mut r);
            *v = m + spread * z;
        }
        labels.push(class);
    }
    Dataset::new(features, Some(labels), Split::Train)
}

/// The class means used by [`make_blobs`].
pub fn blob_means(k: usize, d: usize, spread: f64) -> Array2<f64> {
    let mut means = Array2::zeros((k, d));
    for c in 0..k {
        let axis = c % d;
        let sign = if (c / d) % 2 == 0 { 1.0 } else { -1.0 };
        let ring = (c / (2 * d)) as f64;
        means[[c, axis]] = sign * 4.0 * spread * (1.0 + ring);
    }
    means
}

/// Mines `n_c` constraints: first members without replacement, each partner
/// drawn uniformly from every other sample.
pub fn sample_constraints(ds: &Dataset, n_c: usize, seed: u64) -> Result<Vec<ConstraintPair>> {
    let labels = ds.labels().ok_or(Error::UnlabeledDataset)?;
    let n = ds.len();
    if n_c > n {
        return Err(Error::TooManyConstraints { requested: n_c, available: n });
    }
    if n_c == 0 {
        return Ok(Vec::new());
    }
    if n < 2 {
        return Err(Error::invalid("constraint mining needs at least two samples"));
    }
    let mut r = rng::stream(seed, &[0xC0]);
    let firsts = index::sample(&mut r, n, n_c).into_vec();
    let pairs: Vec<ConstraintPair> = firsts
        .into_iter()
        .map(|i| {
            let mut j = r.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            ConstraintPair { i, j, c: u8::from(labels[i] == labels[j]) }
        })
        .collect();
    let dups = count_duplicate_pairs(&pairs);
    if dups > 0 {
        log::info!("sampled {n_c} constraints with {dups} duplicate unordered pairs");
    }
    Ok(pairs)
}

pub fn count_duplicate_pairs(pairs: &[ConstraintPair]) -> usize {
    let mut keys: Vec<(usize, usize)> = pairs.iter().map(|p| (p.i.min(p.j), p.i.max(p.j))).collect();
    keys.sort_unstable();
    keys.windows(2).filter(|w| w[0] == w[1]).count()
}

/// The indices of the pairs [`flip_constraints`] inverts.
pub fn flip_indices(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let count = ((fraction * n as f64).round_ties_even() as usize).min(n);
    let mut r = rng::stream(seed, &[0xF11B]);
    let mut idx = index::sample(&mut r, n, count).into_vec();
    idx.sort_unstable();
    idx
}

/// Inverts `round_half_even(fraction * n)` uniformly chosen constraints.
pub fn flip_constraints(pairs: &[ConstraintPair], cfg: &NoiseConfig) -> Result<Vec<ConstraintPair>> {
    if !(0.0..=1.0).contains(&cfg.constraint_flip_fraction) {
        return Err(Error::invalid("constraint_flip_fraction must be in [0, 1]"));
    }
    let mut out = pairs.to_vec();
    for k in flip_indices(pairs.len(), cfg.constraint_flip_fraction, cfg.seed) {
        out[k].c = 1 - out[k].c;
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    if e.is_io_error() {
        if let csv::ErrorKind::Io(source) = e.into_kind() {
            return Error::io("<csv stream>", source);
        }
        unreachable!("is_io_error implies an Io kind");
    }
    Error::Parse { line, message: e.to_string() }
}

fn parse_field<T: FromStr>(field: &str, line: u64, what: &str) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} `{field}`"),
    })
}

/// Reads the dataset CSV format: header `f0,...,f{d-1}[,label]`.
pub fn read_dataset<R: Read>(reader: R, split: Split) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let has_label = header.iter().last() == Some("label");
    let d = header.len() - usize::from(has_label);
    for (k, name) in header.iter().take(d).enumerate() {
        if name != format!("f{k}") {
            return Err(Error::Parse { line: 1, message: format!("unexpected column `{name}`") });
        }
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(Error::DimensionMismatch { expected: header.len(), found: rec.len() });
        }
        for k in 0..d {
            values.push(parse_field::<f64>(&rec[k], line, "feature")?);
        }
        if has_label {
            labels.push(parse_field::<usize>(&rec[d], line, "label")?);
        }
        n += 1;
    }
    let features = Array2::from_shape_vec((n, d), values).map_err(|e| Error::invalid(e.to_string()))?;
    Dataset::new(features, has_label.then_some(labels), split)
}

pub fn load_dataset(path: impl AsRef<Path>, split: Split) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(std::io::BufReader::new(file), split)
}

pub fn write_dataset<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..ds.dim()).map(|k| format!("f{k}")).collect();
    if ds.labels().is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(csv_error)?;
    for (i, row) in ds.features.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(labels) = ds.labels() {
            rec.push(labels[i].to_string());
        }
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))
}

pub fn read_constraints<R: Read>(reader: R) -> Result<Vec<ConstraintPair>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.iter().collect::<Vec<_>>() != ["i", "j", "c"] {
        return Err(Error::Parse { line: 1, message: "constraint header must be `i,j,c`".into() });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let i = parse_field(&rec[0], line, "index")?;
        let j = parse_field(&rec[1], line, "index")?;
        let c: u8 = parse_field(&rec[2], line, "constraint")?;
        if c > 1 || i == j {
            return Err(Error::Parse { line, message: format!("invalid constraint ({i},{j},{c})") });
        }
        out.push(ConstraintPair { i, j, c });
    }
    Ok(out)
}

pub fn write_constraints<W: Write>(pairs: &[ConstraintPair], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["i", "j", "c"]).map_err(csv_error)?;
    for p in pairs {
        w.write_record([p.i.to_string(), p.j.to_string(), p.c.to_string()]).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))
}

/// Checks every constraint index against `ds`.
pub fn validate_constraints(pairs: &[ConstraintPair], ds: &Dataset) -> Result<()> {
    for p in pairs {
        if p.i == p.j || p.i >= ds.len() || p.j >= ds.len() || p.c > 1 {
            return Err(Error::invalid(format!("constraint {p:?} does not fit dataset of size {}", ds.len())));
        }
    }
    Ok(())
}

/// Per-dimension feature means; handy for diagnostics.
pub fn feature_means(ds: &Dataset) -> Array1<f64> {
    ds.features.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(ds.dim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny() -> Dataset {
        let x = Array2::from_shape_vec((3, 2), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        Dataset::new(x, Some(vec![0, 0, 1]), Split::Train).unwrap()
    }

    #[test]
    fn blobs_minimal() {
        let ds = make_blobs(2, 1, 1, 0.1, 0).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels().unwrap(), &[0, 1]);
        assert_eq!(ds.num_classes(), 2);
    }

    #[test]
    fn blobs_deterministic() {
        let a = make_blobs(3, 10, 4, 0.5, 11).unwrap();
        let b = make_blobs(3, 10, 4, 0.5, 11).unwrap();
        let bits = |d: &Dataset| d.features().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = make_blobs(3, 10, 4, 0.5, 12).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn blobs_reject_bad_args() {
        assert!(make_blobs(1, 5, 2, 1.0, 0).is_err());
        assert!(make_blobs(2, 0, 2, 1.0, 0).is_err());
        assert!(make_blobs(2, 5, 0, 1.0, 0).is_err());
        assert!(make_blobs(2, 5, 2, 0.0, 0).is_err());
    }

    #[test]
    fn blob_means_are_separated() {
        for (k, d) in [(4, 2), (20, 10), (7, 2), (5, 1)] {
            let m = blob_means(k, d, 1.0);
            for a in 0..k {
                for b in 0..a {
                    let dist = (&m.row(a) - &m.row(b)).mapv(|v| v * v).sum().sqrt();
                    assert!(dist >= 4.0 - 1e-12, "k={k} d={d} classes {a},{b} at {dist}");
                }
            }
        }
    }

    #[test]
    fn dataset_rejects_missing_class() {
        let x = Array2::zeros((2, 1));
        assert!(Dataset::new(x, Some(vec![0, 2]), Split::Train).is_err());
    }

    #[test]
    fn constraint_relation_follows_labels() {
        let ds = tiny();
        for seed in 0..50 {
            for p in sample_constraints(&ds, 3, seed).unwrap() {
                let y = ds.labels().unwrap();
                assert_eq!(p.c == 1, y[p.i] == y[p.j]);
                if (p.i.min(p.j), p.i.max(p.j)) == (0, 1) {
                    assert_eq!(p.c, 1);
                }
                if (p.i.min(p.j), p.i.max(p.j)) == (0, 2) {
                    assert_eq!(p.c, 0);
                }
            }
        }
    }

    #[test]
    fn constraint_errors() {
        let ds = tiny();
        assert!(matches!(sample_constraints(&ds, 4, 0), Err(Error::TooManyConstraints { .. })));
        let unl = Dataset::new(Array2::zeros((3, 1)), None, Split::Train).unwrap();
        assert!(matches!(sample_constraints(&unl, 1, 0), Err(Error::UnlabeledDataset)));
        assert!(sample_constraints(&ds, 0, 0).unwrap().is_empty());
    }

    #[test]
    fn must_link_fraction_tracks_class_count() {
        // k = 20 balanced classes, n_c = 10000: about 500 must-links.
        let x = Array2::zeros((20_000, 1));
        let labels = (0..20_000).map(|i| i % 20).collect();
        let ds = Dataset::new(x, Some(labels), Split::Train).unwrap();
        let pairs = sample_constraints(&ds, 10_000, 3).unwrap();
        let ml = pairs.iter().filter(|p| p.is_must_link()).count() as f64;
        // Partner excludes the first member: p = 999/19999.
        let p: f64 = 999.0 / 19_999.0;
        let mean = 10_000.0 * p;
        let sd = (10_000.0 * p * (1.0 - p)).sqrt();
        assert!((ml - mean).abs() < 3.0 * sd, "must-links {ml}, expected {mean} ± {sd}");
    }

    #[test]
    fn augment_identities() {
        let x = [1.5, -2.0, 0.25];
        let zero = AugmentationPolicy { weak_sigma: 0.0, strong_sigma: 0.0, strong_dropout: 0.0, seed: 1 };
        assert_eq!(augment(&x, &zero, Strength::Weak, 5).unwrap(), x.to_vec());
        assert_eq!(augment(&x, &zero, Strength::Strong, 5).unwrap(), x.to_vec());
        let drop_all = AugmentationPolicy { weak_sigma: 0.0, strong_sigma: 0.3, strong_dropout: 1.0, seed: 1 };
        assert_eq!(augment(&x, &drop_all, Strength::Strong, 2).unwrap(), vec![0.0; 3]);
        let half = AugmentationPolicy { weak_sigma: 0.0, strong_sigma: 0.0, strong_dropout: 0.5, seed: 9 };
        let out = augment(&[1.0; 4], &half, Strength::Strong, 4).unwrap();
        assert!(out.iter().all(|&v| v == 0.0 || v == 1.0));
        assert_eq!(out.len(), 4);
    }

    #[test]
    fn augment_is_seeded() {
        let p = AugmentationPolicy { weak_sigma: 0.1, strong_sigma: 0.5, strong_dropout: 0.2, seed: 3 };
        let x = [0.0; 8];
        assert_eq!(augment(&x, &p, Strength::Strong, 1).unwrap(), augment(&x, &p, Strength::Strong, 1).unwrap());
        assert_ne!(augment(&x, &p, Strength::Weak, 1).unwrap(), augment(&x, &p, Strength::Weak, 2).unwrap());
    }

    #[test]
    fn invalid_policy_rejected() {
        let p = AugmentationPolicy { weak_sigma: 0.5, strong_sigma: 0.1, strong_dropout: 0.2, seed: 0 };
        assert!(augment(&[0.0], &p, Strength::Weak, 0).is_err());
    }

    #[test]
    fn flip_counts() {
        let pairs: Vec<_> = (0..10).map(|k| ConstraintPair { i: k, j: k + 1, c: (k % 2) as u8 }).collect();
        let cfg = |f| NoiseConfig { constraint_flip_fraction: f, pseudo_flip_fraction: 0.0, seed: 4 };
        assert_eq!(flip_constraints(&pairs, &cfg(0.0)).unwrap(), pairs);
        let all = flip_constraints(&pairs, &cfg(1.0)).unwrap();
        assert!(all.iter().zip(&pairs).all(|(a, b)| a.c == 1 - b.c && a.i == b.i && a.j == b.j));
        let some = flip_constraints(&pairs, &cfg(0.2)).unwrap();
        assert_eq!(some.iter().zip(&pairs).filter(|(a, b)| a.c != b.c).count(), 2);
        // 0.25 * 10 = 2.5 rounds to even.
        let half = flip_constraints(&pairs, &cfg(0.25)).unwrap();
        assert_eq!(half.iter().zip(&pairs).filter(|(a, b)| a.c != b.c).count(), 2);
    }

    #[test]
    fn dataset_csv_examples() {
        let text = "f0,f1,label\n0.5,1,0\n2,3,0\n-1e-3,4,1\n";
        let ds = read_dataset(text.as_bytes(), Split::Train).unwrap();
        assert_eq!((ds.len(), ds.dim(), ds.num_classes()), (3, 2, 2));

        let ragged = "f0,f1,label\n0.5,1,0\n2,0\n";
        assert!(matches!(read_dataset(ragged.as_bytes(), Split::Train), Err(Error::DimensionMismatch { .. })));

        let unlabeled = "f0,f1\n1,2\n3,4\n";
        let ds = read_dataset(unlabeled.as_bytes(), Split::Test).unwrap();
        assert!(ds.labels().is_none());

        let bad = "f0,label\n1,0\nx,1\n";
        match read_dataset(bad.as_bytes(), Split::Train) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn dataset_csv_round_trips(values in proptest::collection::vec(-1e6f64..1e6, 1..40), d in 1usize..4) {
            let n = values.len() / d;
            prop_assume!(n >= 1);
            let x = Array2::from_shape_vec((n, d), values[..n * d].to_vec()).unwrap();
            let labels = (0..n).map(|i| i % 2).collect::<Vec<_>>();
            let labels = if n >= 2 { Some(labels) } else { None };
            let ds = Dataset::new(x, labels, Split::Train).unwrap();
            let mut buf = Vec::new();
            write_dataset(&ds, &mut buf).unwrap();
            let back = read_dataset(buf.as_slice(), Split::Train).unwrap();
            let mut buf2 = Vec::new();
            write_dataset(&back, &mut buf2).unwrap();
            prop_assert_eq!(&back, &ds);
            prop_assert_eq!(buf, buf2);
        }

        #[test]
        fn sampled_constraints_are_well_formed(n in 2usize..60, seed in any::<u64>()) {
            let x = Array2::zeros((n, 1));
            let labels: Vec<usize> = (0..n).map(|i| i % 3.min(n)).collect();
            let ds = Dataset::new(x, Some(labels), Split::Train).unwrap();
            let n_c = n / 2 + 1;
            let pairs = sample_constraints(&ds, n_c, seed).unwrap();
            prop_assert_eq!(pairs.len(), n_c);
            let mut firsts: Vec<_> = pairs.iter().map(|p| p.i).collect();
            firsts.sort_unstable();
            firsts.dedup();
            prop_assert_eq!(firsts.len(), n_c);
            prop_assert!(pairs.iter().all(|p| p.i != p.j && p.j < n));
            prop_assert_eq!(pairs, sample_constraints(&ds, n_c, seed).unwrap());
        }

        #[test]
        fn flipping_twice_restores(n in 0usize..50, frac in 0.0f64..=1.0, seed in any::<u64>()) {
            let pairs: Vec<_> = (0..n).map(|k| ConstraintPair { i: k, j: k + 1, c: (k % 3 == 0) as u8 }).collect();
            let cfg = NoiseConfig { constraint_flip_fraction: frac, pseudo_flip_fraction: 0.0, seed };
            let once = flip_constraints(&pairs, &cfg).unwrap();
            prop_assert_eq!(flip_constraints(&once, &cfg).unwrap(), pairs);
        }

        #[test]
        fn constraint_csv_round_trips(raw in proptest::collection::vec((0usize..1000, 1usize..1000, 0u8..2), 0..30)) {
            let pairs: Vec<_> = raw.into_iter().map(|(i, dj, c)| ConstraintPair { i, j: i + dj, c }).collect();
            let mut buf = Vec::new();
            write_constraints(&pairs, &mut buf).unwrap();
            prop_assert_eq!(read_constraints(buf.as_slice()).unwrap(), pairs);
        }
    }
}
