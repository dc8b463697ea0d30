//! Pseudo-label selection and the mapping of selected predictions to soft
//! pairwise pseudo-constraints.

use std::str::FromStr;

use ndarray::ArrayView2;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nethead::{argmax, ProbVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// Keep predictions whose normalized entropy is below τ.
    Informativeness,
    /// Keep predictions whose largest entry exceeds τ.
    Confidence,
}

impl SelectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMode::Informativeness => "informativeness",
            SelectionMode::Confidence => "confidence",
        }
    }
}

impl FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "informativeness" | "entropy" => Ok(Self::Informativeness),
            "confidence" => Ok(Self::Confidence),
            other => Err(Error::invalid(format!("unknown selection mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub mode: SelectionMode,
    pub tau: f64,
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.tau) {
            Ok(())
        } else {
            Err(Error::invalid(format!("tau must be in [0, 1], got {}", self.tau)))
        }
    }

    pub fn accepts(&self, p: &[f64]) -> bool {
        match self.mode {
            SelectionMode::Informativeness => entropy_ratio(p) < self.tau,
            SelectionMode::Confidence => p.iter().copied().fold(f64::NEG_INFINITY, f64::max) > self.tau,
        }
    }
}

/// Soft relation between two rows of a batch, stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoConstraint {
    pub i: usize,
    pub j: usize,
    pub c_tilde: f64,
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

fn entropy_ratio(p: &[f64]) -> f64 {
    let h: f64 = -p.iter().map(|&v| plogp(v)).sum::<f64>();
    (h / (p.len() as f64).ln()).clamp(0.0, 1.0)
}

/// Shannon entropy divided by `ln n_out`, in `[0, 1]`.
pub fn normalized_entropy(y: &ProbVector) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::UndefinedEntropy);
    }
    Ok(entropy_ratio(y.as_slice()))
}

pub fn select(probs: &[ProbVector], cfg: &SelectionConfig) -> Result<Vec<bool>> {
    cfg.validate()?;
    Ok(probs.iter().map(|p| cfg.accepts(p.as_slice())).collect())
}

pub fn select_rows(probs: ArrayView2<'_, f64>, cfg: &SelectionConfig) -> Result<Vec<bool>> {
    cfg.validate()?;
    let probs = probs.as_standard_layout();
    Ok(probs.rows().into_iter().map(|r| cfg.accepts(r.to_slice().expect("standard layout"))).collect())
}

/// Base-2 Jensen–Shannon distance between two slices of equal length.
fn jsd_slices(p: &[f64], q: &[f64]) -> f64 {
    let mut div = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        let term = |x: f64| if x > 0.0 { x * (x / m).ln() } else { 0.0 };
        // Summed per element so that swapping p and q is bit-exact.
        div += term(a) + term(b);
    }
    (0.5 * div / std::f64::consts::LN_2).clamp(0.0, 1.0).sqrt()
}

/// Base-2 Jensen–Shannon distance; lies in `[0, 1]`.
pub fn jsd(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), found: q.len() });
    }
    Ok(jsd_slices(p.as_slice(), q.as_slice()))
}

/// Every unordered pair of selected rows, lexicographic in `(i, j)`, with
/// `c̃ = 1 − JSD`.
pub fn make_pseudo_constraints(probs: &[ProbVector], cfg: &SelectionConfig) -> Result<Vec<PseudoConstraint>> {
    let mask = select(probs, cfg)?;
    let rows: Vec<&[f64]> = probs.iter().map(|p| p.as_slice()).collect();
    Ok(pairs_from_mask::<rand_chacha::ChaCha8Rng>(&rows, &mask, None))
}

/// Pseudo-constraints over the rows of a probability matrix. When the full
/// pair set exceeds `max_pairs`, a uniform subsample (still lexicographic) is
/// drawn with `rng`.
pub fn make_pseudo_constraints_rows<R: Rng>(
    probs: ArrayView2<'_, f64>,
    mask: &[bool],
    max_pairs: usize,
    rng: &mut R,
) -> Vec<PseudoConstraint> {
    let probs = probs.as_standard_layout();
    let rows: Vec<&[f64]> = probs.rows().into_iter().map(|r| r.to_slice().expect("standard layout")).collect();
    pairs_from_mask(&rows, mask, Some((max_pairs, rng)))
}

fn pairs_from_mask<R: Rng>(rows: &[&[f64]], mask: &[bool], cap: Option<(usize, &mut R)>) -> Vec<PseudoConstraint> {
    let selected: Vec<usize> = mask.iter().enumerate().filter(|(_, &m)| m).map(|(k, _)| k).collect();
    let s = selected.len();
    let total = s * s.saturating_sub(1) / 2;
    let pair_at = |a: usize, b: usize| {
        let (i, j) = (selected[a], selected[b]);
        PseudoConstraint { i, j, c_tilde: 1.0 - jsd_slices(rows[i], rows[j]) }
    };
    match cap {
        Some((max_pairs, rng)) if total > max_pairs => {
            let mut picks = index::sample(rng, total, max_pairs).into_vec();
            picks.sort_unstable();
            picks.into_iter().map(|flat| {
                let (a, b) = unrank_pair(flat, s);
                pair_at(a, b)
            }).collect()
        }
        _ => {
            let mut out = Vec::with_capacity(total);
            for a in 0..s {
                for b in a + 1..s {
                    out.push(pair_at(a, b));
                }
            }
            out
        }
    }
}

/// Maps a lexicographic rank over pairs `a < b < s` back to `(a, b)`.
fn unrank_pair(mut flat: usize, s: usize) -> (usize, usize) {
    let mut a = 0;
    loop {
        let row = s - a - 1;
        if flat < row {
            return (a, a + 1 + flat);
        }
        flat -= row;
        a += 1;
    }
}

/// Thresholds soft pseudo-constraints at `mu` (inclusive).
pub fn harden(pcs: &[PseudoConstraint], mu: f64) -> Result<Vec<PseudoConstraint>> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::invalid(format!("mu must be in [0, 1], got {mu}")));
    }
    Ok(pcs
        .iter()
        .map(|p| PseudoConstraint { c_tilde: if p.c_tilde >= mu { 1.0 } else { 0.0 }, ..*p })
        .collect())
}

/// The positions of the largest and second-largest entries, lowest index first on ties.
pub fn top_two(p: &[f64]) -> (usize, usize) {
    let first = argmax(p);
    let mut second = if first == 0 { 1 } else { 0 };
    for (l, &v) in p.iter().enumerate() {
        if l != first && v > p[second] {
            second = l;
        }
    }
    (first, second)
}

/// Swaps the two largest entries.
pub fn mode_flip(y: &ProbVector) -> Result<ProbVector> {
    let mut raw = y.clone().into_inner();
    mode_flip_slice(&mut raw)?;
    Ok(ProbVector::from_raw(raw))
}

pub fn mode_flip_slice(p: &mut [f64]) -> Result<()> {
    if p.len() < 2 {
        return Err(Error::invalid("mode flip needs at least two clusters"));
    }
    let (a, b) = top_two(p);
    p.swap(a, b);
    Ok(())
}

/// Applies [`mode_flip`] with probability `rho`, drawing from a stream
/// seeded by `seed`.
pub fn mode_flip_with_prob(y: &ProbVector, rho: f64, seed: u64) -> Result<ProbVector> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho must be in [0, 1], got {rho}")));
    }
    let mut r = crate::rng::stream(seed, &[0xF1]);
    if r.gen::<f64>() < rho {
        mode_flip(y)
    } else {
        Ok(y.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(p: &[f64]) -> ProbVector {
        ProbVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        for n in 2..9 {
            assert!((normalized_entropy(&ProbVector::uniform(n)).unwrap() - 1.0).abs() < 1e-15);
            assert_eq!(normalized_entropy(&ProbVector::one_hot(n, n - 1)).unwrap(), 0.0);
        }
        assert!((normalized_entropy(&pv(&[0.5, 0.5, 0.0, 0.0])).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(normalized_entropy(&pv(&[1.0])), Err(Error::UndefinedEntropy)));
    }

    #[test]
    fn selection_examples() {
        let info = |tau| SelectionConfig { mode: SelectionMode::Informativeness, tau };
        let conf = |tau| SelectionConfig { mode: SelectionMode::Confidence, tau };
        let bimodal = pv(&[0.5, 0.5, 0.0, 0.0]);
        assert_eq!(select(&[ProbVector::one_hot(4, 2)], &info(0.2)).unwrap(), vec![true]);
        assert_eq!(select(&[ProbVector::uniform(4)], &info(1.0)).unwrap(), vec![false]);
        assert_eq!(select(&[bimodal.clone()], &info(0.2)).unwrap(), vec![false]);
        assert_eq!(select(&[bimodal], &conf(0.45)).unwrap(), vec![true]);
        // Strict inequality: τ = 0 keeps nothing, not even one-hots.
        assert_eq!(select(&[ProbVector::one_hot(3, 0)], &info(0.0)).unwrap(), vec![false]);
        assert!(select(&[], &info(1.5)).is_err());
    }

    #[test]
    fn jsd_examples() {
        let p = pv(&[0.2, 0.3, 0.5]);
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);
        assert!((jsd(&ProbVector::one_hot(3, 0), &ProbVector::one_hot(3, 2)).unwrap() - 1.0).abs() < 1e-15);
        // Independent 40-digit evaluation: 0.557923045284143881195083138050456490344
        let v = jsd(&pv(&[1.0, 0.0]), &pv(&[0.5, 0.5])).unwrap();
        assert!((v - 0.557_923_045_284_143_9).abs() < 1e-12);
        assert!(jsd(&pv(&[1.0, 0.0]), &pv(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn pseudo_constraint_examples() {
        let cfg = SelectionConfig { mode: SelectionMode::Informativeness, tau: 0.2 };
        let same = make_pseudo_constraints(&[ProbVector::one_hot(3, 1), ProbVector::one_hot(3, 1)], &cfg).unwrap();
        assert_eq!(same, vec![PseudoConstraint { i: 0, j: 1, c_tilde: 1.0 }]);
        let diff = make_pseudo_constraints(&[ProbVector::one_hot(3, 1), ProbVector::one_hot(3, 2)], &cfg).unwrap();
        assert_eq!(diff.len(), 1);
        assert!(diff[0].c_tilde.abs() < 1e-15);
        let four: Vec<_> = (0..4).map(|k| ProbVector::one_hot(4, k % 2)).collect();
        assert_eq!(make_pseudo_constraints(&four, &cfg).unwrap().len(), 6);
        assert!(make_pseudo_constraints(&[ProbVector::one_hot(3, 0)], &cfg).unwrap().is_empty());
    }

    #[test]
    fn harden_examples() {
        let pcs = [PseudoConstraint { i: 0, j: 1, c_tilde: 0.7 }, PseudoConstraint { i: 0, j: 2, c_tilde: 0.9999 }];
        assert_eq!(harden(&pcs, 0.7).unwrap()[0].c_tilde, 1.0);
        assert!(harden(&pcs, 0.0).unwrap().iter().all(|p| p.c_tilde == 1.0));
        assert_eq!(harden(&pcs, 1.0).unwrap()[1].c_tilde, 0.0);
        assert_eq!(harden(&pcs, 1.0).unwrap()[1].j, 2);
    }

    #[test]
    fn mode_flip_examples() {
        assert_eq!(mode_flip(&pv(&[0.7, 0.2, 0.1])).unwrap().as_slice(), &[0.2, 0.7, 0.1]);
        let u = ProbVector::uniform(4);
        assert_eq!(mode_flip(&u).unwrap(), u);
        let y = pv(&[0.1, 0.6, 0.3]);
        for seed in 0..20 {
            assert_eq!(mode_flip_with_prob(&y, 0.0, seed).unwrap(), y);
            assert_eq!(mode_flip_with_prob(&y, 1.0, seed).unwrap().as_slice(), &[0.1, 0.3, 0.6]);
        }
    }

    #[test]
    fn unrank_covers_all_pairs() {
        let s = 7;
        let mut k = 0;
        for a in 0..s {
            for b in a + 1..s {
                assert_eq!(unrank_pair(k, s), (a, b));
                k += 1;
            }
        }
    }

    #[test]
    fn capped_pairs_are_subsampled() {
        let probs = ndarray::Array2::from_shape_fn((30, 3), |(r, c)| if r % 3 == c { 1.0 } else { 0.0 });
        let mask = vec![true; 30];
        let mut rng = crate::rng::stream(1, &[]);
        let pcs = make_pseudo_constraints_rows(probs.view(), &mask, 100, &mut rng);
        assert_eq!(pcs.len(), 100);
        assert!(pcs.windows(2).all(|w| (w[0].i, w[0].j) < (w[1].i, w[1].j)));
        assert!(pcs.iter().all(|p| p.c_tilde == if p.i % 3 == p.j % 3 { 1.0 } else { 0.0 }));
        let all = make_pseudo_constraints_rows(probs.view(), &mask, 1000, &mut rng);
        assert_eq!(all.len(), 435);
    }

    fn simplex(n: usize) -> impl Strategy<Value = ProbVector> {
        proptest::collection::vec(0.0f64..1.0, n).prop_filter_map("zero mass", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| ProbVector::from_raw(v.iter().map(|x| x / s).collect()))
        })
    }

    proptest! {
        #[test]
        fn entropy_is_bounded_and_permutation_invariant(p in simplex(5), rot in 0usize..5) {
            let h = normalized_entropy(&p).unwrap();
            prop_assert!((0.0..=1.0).contains(&h));
            let mut r = p.clone().into_inner();
            r.rotate_left(rot);
            prop_assert!((normalized_entropy(&ProbVector::from_raw(r)).unwrap() - h).abs() < 1e-12);
        }

        #[test]
        fn jsd_is_symmetric_and_bounded(p in simplex(4), q in simplex(4)) {
            let a = jsd(&p, &q).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert_eq!(a, jsd(&q, &p).unwrap());
        }

        #[test]
        fn pseudo_pairs_only_touch_selected(ps in proptest::collection::vec(simplex(3), 0..12), tau in 0.0f64..=1.0) {
            let cfg = SelectionConfig { mode: SelectionMode::Informativeness, tau };
            let mask = select(&ps, &cfg).unwrap();
            let pcs = make_pseudo_constraints(&ps, &cfg).unwrap();
            let s = mask.iter().filter(|&&m| m).count();
            prop_assert_eq!(pcs.len(), s * s.saturating_sub(1) / 2);
            for p in &pcs {
                prop_assert!(p.i < p.j && mask[p.i] && mask[p.j]);
                prop_assert!((0.0..=1.0).contains(&p.c_tilde));
            }
        }

        #[test]
        fn harden_is_monotone_in_mu(cs in proptest::collection::vec(0.0f64..=1.0, 0..20), lo in 0.0f64..=1.0, hi in 0.0f64..=1.0) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let pcs: Vec<_> = cs.iter().enumerate().map(|(k, &c)| PseudoConstraint { i: k, j: k + 1, c_tilde: c }).collect();
            let a = harden(&pcs, lo).unwrap();
            let b = harden(&pcs, hi).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(y.c_tilde <= x.c_tilde);
            }
        }

        #[test]
        fn mode_flip_preserves_multiset(p in simplex(6)) {
            let f = mode_flip(&p).unwrap();
            let mut a = p.clone().into_inner();
            let mut b = f.clone().into_inner();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
            prop_assert!(ProbVector::new(f.into_inner()).is_ok());
        }
    }
}
