//! Clustering evaluation: optimal cluster-to-class assignment, ACC, NMI, ARI
//! and fold aggregation.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataspace::Split;
use crate::error::{Error, Result};

/// A minimum-cost assignment: `cols[r]` is the column matched to row `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub cols: Vec<usize>,
    pub cost: f64,
}

/// Solves the square assignment problem exactly. Among all optimal
/// permutations the lexicographically smallest `cols` is returned.
pub fn hungarian(cost: &Array2<f64>) -> Result<Assignment> {
    let n = cost.nrows();
    if n == 0 || cost.ncols() != n {
        return Err(Error::invalid(format!("cost matrix must be square and non-empty, got {:?}", cost.dim())));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cost matrix"));
    }
    let (_, u, v) = shortest_augmenting_paths(cost);
    let scale = cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-9 * (1.0 + scale) * n as f64;
    // Every optimal assignment uses only tight edges of an optimal dual, so the
    // smallest one is the smallest perfect matching of the tight graph.
    let tight = Array2::from_shape_fn((n, n), |(i, j)| cost[[i, j]] - u[i] - v[j] <= tol);
    let cols = smallest_perfect_matching(&tight).expect("optimal duals admit a tight perfect matching");
    let total = cols.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
    Ok(Assignment { cols, cost: total })
}

/// O(n³) shortest augmenting path solver (Jonker–Volgenant style potentials).
/// Returns the row assignment and the dual potentials `u` (rows), `v` (cols).
fn shortest_augmenting_paths(cost: &Array2<f64>) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.nrows();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row matched to column j (1-based, 0 = none); column 0 is virtual.
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![0; n];
    for j in 1..=n {
        rows[p[j] - 1] = j - 1;
    }
    (rows, u[1..].to_vec(), v[1..].to_vec())
}

/// Lexicographically smallest perfect matching of a bipartite graph given as
/// an adjacency matrix, or `None` if there is none.
fn smallest_perfect_matching(adj: &Array2<bool>) -> Option<Vec<usize>> {
    let n = adj.nrows();
    let mut row_of = vec![usize::MAX; n];
    let mut col_of = vec![usize::MAX; n];
    for r in 0..n {
        let mut seen = vec![false; n];
        if !augment(adj, r, &mut seen, &mut row_of, &mut col_of, &[]) {
            return None;
        }
    }
    // Fix rows in order, moving each to its smallest feasible column.
    let mut fixed = vec![false; n];
    for r in 0..n {
        for c in 0..n {
            if !adj[[r, c]] || fixed_col(&fixed, &col_of, c) {
                continue;
            }
            if col_of[r] == c {
                break;
            }
            // Tentatively give c to r; the displaced row must find the column r releases.
            let displaced = row_of[c];
            let released = col_of[r];
            let (saved_rows, saved_cols) = (row_of.clone(), col_of.clone());
            row_of[c] = r;
            col_of[r] = c;
            row_of[released] = usize::MAX;
            col_of[displaced] = usize::MAX;
            fixed[r] = true;
            let mut seen = vec![false; n];
            let locked: Vec<usize> = (0..n).filter(|&k| fixed[k]).collect();
            if augment(adj, displaced, &mut seen, &mut row_of, &mut col_of, &locked) {
                break;
            }
            fixed[r] = false;
            row_of = saved_rows;
            col_of = saved_cols;
        }
        fixed[r] = true;
    }
    Some(col_of)
}

fn fixed_col(fixed: &[bool], col_of: &[usize], c: usize) -> bool {
    fixed.iter().enumerate().any(|(r, &f)| f && col_of[r] == c)
}

/// Kuhn's augmenting path search from `r`, never re-routing rows in `locked`.
fn augment(
    adj: &Array2<bool>,
    r: usize,
    seen: &mut [bool],
    row_of: &mut [usize],
    col_of: &mut [usize],
    locked: &[usize],
) -> bool {
    for c in 0..adj.ncols() {
        if !adj[[r, c]] || seen[c] {
            continue;
        }
        seen[c] = true;
        let owner = row_of[c];
        if owner != usize::MAX && locked.contains(&owner) {
            continue;
        }
        if owner == usize::MAX || augment(adj, owner, seen, row_of, col_of, locked) {
            row_of[c] = r;
            col_of[r] = c;
            return true;
        }
    }
    false
}

/// Class-by-cluster counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Contingency {
    /// `num_classes × n_out`
    pub counts: Array2<u64>,
    pub class_totals: Vec<u64>,
    pub cluster_totals: Vec<u64>,
    pub n: u64,
}

impl Contingency {
    pub fn new(preds: &[usize], labels: &[usize], num_classes: usize, n_out: usize) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), found: preds.len() });
        }
        let mut counts = Array2::zeros((num_classes, n_out));
        for (&p, &y) in preds.iter().zip(labels) {
            if p >= n_out {
                return Err(Error::invalid(format!("prediction {p} outside [0, {n_out})")));
            }
            if y >= num_classes {
                return Err(Error::invalid(format!("label {y} outside [0, {num_classes})")));
            }
            counts[[y, p]] += 1;
        }
        let class_totals = counts.rows().into_iter().map(|r| r.sum()).collect();
        let cluster_totals = counts.columns().into_iter().map(|c| c.sum()).collect();
        Ok(Self { counts, class_totals, cluster_totals, n: preds.len() as u64 })
    }

    fn mutual_information(&self) -> f64 {
        let n = self.n as f64;
        let mut mi = 0.0;
        for ((k, l), &c) in self.counts.indexed_iter() {
            if c > 0 {
                let c = c as f64;
                let a = self.class_totals[k] as f64;
                let b = self.cluster_totals[l] as f64;
                mi += c / n * (c * n / (a * b)).ln();
            }
        }
        mi.max(0.0)
    }

    fn nmi(&self) -> f64 {
        let hy = entropy(&self.class_totals, self.n);
        let hc = entropy(&self.cluster_totals, self.n);
        if hy == 0.0 && hc == 0.0 {
            return 1.0;
        }
        if hy == 0.0 || hc == 0.0 {
            return 0.0;
        }
        // A pure relabeling has I = H(Y) = H(C); report it as exactly 1
        // rather than a rounded ratio.
        let bijective = self.counts.indexed_iter().all(|((k, l), &c)| {
            c == 0 || (c == self.class_totals[k] && c == self.cluster_totals[l])
        });
        if bijective {
            return 1.0;
        }
        (self.mutual_information() / (hy * hc).sqrt()).clamp(0.0, 1.0)
    }

    fn ari(&self) -> f64 {
        let comb2 = |x: u64| (x as f64) * (x as f64 - 1.0) / 2.0;
        let index: f64 = self.counts.iter().map(|&c| comb2(c)).sum();
        let a: f64 = self.class_totals.iter().map(|&c| comb2(c)).sum();
        let b: f64 = self.cluster_totals.iter().map(|&c| comb2(c)).sum();
        let total = comb2(self.n);
        if total == 0.0 {
            return 1.0;
        }
        let expected = a * b / total;
        let max = 0.5 * (a + b);
        if max == expected {
            return 1.0;
        }
        (index - expected) / (max - expected)
    }
}

fn entropy(totals: &[u64], n: u64) -> f64 {
    let n = n as f64;
    -totals.iter().filter(|&&t| t > 0).map(|&t| {
        let p = t as f64 / n;
        p * p.ln()
    }).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    /// `mapping[cluster]` is the class a cluster is credited to, if any.
    pub mapping: Vec<Option<usize>>,
    pub split: Split,
}

/// Scores argmax predictions against labels. When `n_out > num_classes` the
/// contingency is zero-padded so surplus clusters map to no class and count
/// as errors.
pub fn evaluate(preds: &[usize], labels: &[usize], num_classes: usize, n_out: usize, split: Split) -> Result<EvalReport> {
    if n_out < num_classes {
        return Err(Error::invalid(format!("n_out ({n_out}) must be at least the class count ({num_classes})")));
    }
    if preds.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let table = Contingency::new(preds, labels, num_classes, n_out)?;
    // Rows are clusters, columns classes padded with phantom ones.
    let cost = Array2::from_shape_fn((n_out, n_out), |(l, k)| {
        if k < num_classes {
            -(table.counts[[k, l]] as f64)
        } else {
            0.0
        }
    });
    let assignment = hungarian(&cost)?;
    let mapping: Vec<Option<usize>> = assignment.cols.iter().map(|&k| (k < num_classes).then_some(k)).collect();
    let correct: u64 = mapping
        .iter()
        .enumerate()
        .filter_map(|(l, m)| m.map(|k| table.counts[[k, l]]))
        .sum();
    Ok(EvalReport {
        acc: correct as f64 / table.n as f64,
        nmi: table.nmi(),
        ari: table.ari(),
        mapping,
        split,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub acc: MeanStd,
    pub nmi: MeanStd,
    pub ari: MeanStd,
    pub folds: usize,
}

/// Arithmetic mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std }
}

pub fn aggregate_folds(reports: &[EvalReport]) -> Result<FoldSummary> {
    if reports.is_empty() {
        return Err(Error::Empty("fold reports"));
    }
    let col = |f: fn(&EvalReport) -> f64| mean_std(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(FoldSummary { acc: col(|r| r.acc), nmi: col(|r| r.nmi), ari: col(|r| r.ari), folds: reports.len() })
}
