//! Training loops for the four regimes: ConstraintMatch, constrained-only,
//! naive pseudo-labeling and the fully constrained upper bound.
//!
//! Every random draw comes from a stream keyed by `(seed, purpose, step)`, so
//! the constrained branch consumes identical randomness whether or not the
//! pseudo branch runs. That is what makes `λ = 0` reproduce the constrained
//! regime exactly.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataspace::{AugmentationPolicy, AugmentationScale, ConstraintPair, Dataset, NoiseConfig, Strength};
use crate::error::{Error, Result};
use crate::nethead::{argmax, sgd_step, ClusterHead, OptimizerState};
use crate::pairloss::{mcl_loss_indexed, IndexedPair};
use crate::pseudo::{harden, make_pseudo_constraints_rows, mode_flip_slice, select_rows, SelectionConfig, SelectionMode};
use crate::rng;

const TAG_CBATCH: u64 = 1;
const TAG_WEAK_C: u64 = 2;
const TAG_PERM: u64 = 3;
const TAG_WEAK_U: u64 = 4;
const TAG_STRONG: u64 = 5;
const TAG_NOISE: u64 = 6;
const TAG_CAP: u64 = 7;
const TAG_INIT: u64 = 8;
const TAG_AUG: u64 = 9;

/// Floor on a probability inside the pseudo-label cross-entropy.
pub const CE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    #[serde(rename = "constraintmatch")]
    ConstraintMatch,
    Constrained,
    NaivePl,
    FullyConstrained,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::ConstraintMatch => "constraintmatch",
            Regime::Constrained => "constrained",
            Regime::NaivePl => "naive_pl",
            Regime::FullyConstrained => "fully_constrained",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constraintmatch" => Ok(Regime::ConstraintMatch),
            "constrained" => Ok(Regime::Constrained),
            "naive_pl" => Ok(Regime::NaivePl),
            "fully_constrained" => Ok(Regime::FullyConstrained),
            other => Err(Error::invalid(format!("unknown regime `{other}`"))),
        }
    }
}

/// Training hyperparameters. `noise.constraint_flip_fraction` is not applied
/// here; callers flip constraints before training (see
/// [`crate::dataspace::flip_constraints`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub regime: Regime,
    pub batch_c: usize,
    pub batch_u: usize,
    pub lambda: f64,
    pub selection: SelectionConfig,
    pub soft_pc: bool,
    pub mu: f64,
    pub noise: NoiseConfig,
    pub eta: f64,
    pub total_steps: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub warmup_steps: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    /// Output clusters; defaults to the dataset's class count.
    pub n_out: Option<usize>,
    pub augmentation: AugmentationScale,
    pub max_pseudo_pairs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            regime: Regime::ConstraintMatch,
            batch_c: 64,
            batch_u: 192,
            lambda: 0.5,
            selection: SelectionConfig { mode: SelectionMode::Informativeness, tau: 0.2 },
            soft_pc: true,
            mu: 0.5,
            noise: NoiseConfig::default(),
            eta: 0.3,
            total_steps: 2000,
            momentum: 0.9,
            weight_decay: 1e-4,
            warmup_steps: 200,
            seed: 0,
            hidden: vec![64, 64],
            n_out: None,
            augmentation: AugmentationScale::default(),
            max_pseudo_pairs: 4096,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(m));
        if self.batch_c == 0 || self.batch_u == 0 {
            return fail(format!("batch sizes must be >= 1 (batch_c={}, batch_u={})", self.batch_c, self.batch_u));
        }
        if self.warmup_steps > self.total_steps {
            return fail(format!("warmup_steps {} exceeds total steps {}", self.warmup_steps, self.total_steps));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return fail(format!("mu must be in [0, 1], got {}", self.mu));
        }
        if self.hidden.contains(&0) || self.n_out == Some(0) || self.max_pseudo_pairs == 0 {
            return fail("layer widths, n_out and max_pseudo_pairs must be positive".into());
        }
        self.selection.validate()?;
        self.noise.validate()
    }

    fn pseudo_active(&self, t: usize) -> bool {
        matches!(self.regime, Regime::ConstraintMatch | Regime::NaivePl) && t >= self.warmup_steps
    }
}

/// One optimisation step. `pair_acc` is the agreement of the step's pseudo
/// relations with ground truth (when labels are known); it stays in memory
/// and is not part of the serialized trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub lr: f64,
    pub loss_cons: f64,
    pub loss_pseudo: f64,
    pub sel_frac: f64,
    pub pml_frac: f64,
    #[serde(skip)]
    pub pair_acc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<StepRecord>,
}

impl TrainTrace {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(|e| Error::io("<trace writer>", e))?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        Ok(String::from_utf8(buf).expect("json is utf-8"))
    }

    /// Mean pseudo-relation accuracy over steps that produced one.
    pub fn mean_pair_acc(&self) -> Option<f64> {
        let v: Vec<f64> = self.records.iter().filter_map(|r| r.pair_acc).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ClusterHead,
    pub optimizer: OptimizerState,
    pub trace: TrainTrace,
}

/// Cycles a seeded permutation of a sample pool, reshuffling every epoch.
#[derive(Debug, Clone)]
struct PoolCycler {
    pool: Vec<usize>,
    order: Vec<usize>,
    pos: usize,
    epoch: u64,
    seed: u64,
}

impl PoolCycler {
    fn new(pool: Vec<usize>, seed: u64) -> Self {
        let mut c = Self { order: Vec::new(), pool, pos: 0, epoch: 0, seed };
        c.reshuffle();
        c
    }

    fn reshuffle(&mut self) {
        self.order = self.pool.clone();
        self.order.shuffle(&mut rng::stream(self.seed, &[TAG_PERM, self.epoch]));
        self.pos = 0;
    }

    fn next_batch(&mut self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if self.pos == self.order.len() {
                self.epoch += 1;
                self.reshuffle();
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

fn gather(ds: &Dataset, idx: &[usize]) -> Array2<f64> {
    ds.features().select(Axis(0), idx)
}

/// Trains a cluster head under `cfg.regime`.
pub fn train(ds: &Dataset, constraints: &[ConstraintPair], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    crate::dataspace::validate_constraints(constraints, ds)?;
    if ds.len() < 2 {
        return Err(Error::invalid("training needs at least two samples"));
    }
    let labels = ds.labels();
    if cfg.regime == Regime::FullyConstrained && labels.is_none() {
        return Err(Error::UnlabeledDataset);
    }
    let n_out = match cfg.n_out {
        Some(n) => n,
        None if ds.num_classes() >= 2 => ds.num_classes(),
        None => return Err(Error::invalid("n_out must be set for unlabeled data")),
    };
    if cfg.pseudo_active(cfg.total_steps.saturating_sub(1)) && n_out < 2 {
        return Err(Error::invalid("the pseudo branch needs n_out >= 2"));
    }

    let mut dims = vec![ds.dim()];
    dims.extend(&cfg.hidden);
    dims.push(n_out);
    let mut model = ClusterHead::new(&dims, rng::derive_seed(cfg.seed, &[TAG_INIT]))?;
    let mut opt = OptimizerState::new(&model, cfg.eta, cfg.momentum, cfg.weight_decay, cfg.total_steps)?;
    let policy = AugmentationPolicy::for_dataset(ds, cfg.augmentation, rng::derive_seed(cfg.seed, &[TAG_AUG]))?;

    let pool = unconstrained_pool(ds.len(), constraints);
    let mut cycler = PoolCycler::new(pool, cfg.seed);
    let mut trace = TrainTrace { records: Vec::with_capacity(cfg.total_steps) };

    for t in 0..cfg.total_steps {
        let lr = opt.lr();
        let pairs = draw_constrained(ds, constraints, cfg, t);
        let bc = pairs.len();
        let members: Vec<usize> = pairs.iter().map(|p| p.0).chain(pairs.iter().map(|p| p.1)).collect();
        let mut xc = gather(ds, &members);
        policy.apply_rows(&mut xc, Strength::Weak, &mut rng::stream(cfg.seed, &[TAG_WEAK_C, t as u64]));
        let cache_c = model.forward_cached(xc.view())?;
        let indexed: Vec<IndexedPair> =
            pairs.iter().enumerate().map(|(k, p)| IndexedPair { i: k, j: bc + k, target: p.2 }).collect();
        let (loss_cons, grad_c) = mcl_loss_indexed(cache_c.probs(), &indexed)?;
        let mut grads = model.backward_cached(&cache_c, grad_c.view())?;

        let mut record = StepRecord { t, lr, loss_cons, loss_pseudo: 0.0, sel_frac: 0.0, pml_frac: 0.0, pair_acc: None };
        let mut diag = (0usize, 0usize);
        if cfg.pseudo_active(t) {
            let u_idx = cycler.next_batch(cfg.batch_u);
            let mut xu = gather(ds, &u_idx);
            policy.apply_rows(&mut xu, Strength::Weak, &mut rng::stream(cfg.seed, &[TAG_WEAK_U, t as u64]));
            let mut weak_u = model.forward_batch(xu.view())?;
            apply_pseudo_noise(&mut weak_u, cfg.noise.pseudo_flip_fraction, &mut rng::stream(cfg.seed, &[TAG_NOISE, t as u64]))?;

            let branch = match cfg.regime {
                Regime::ConstraintMatch => {
                    let weak = concatenate(Axis(0), &[cache_c.probs(), weak_u.view()]).expect("same width");
                    let batch_idx: Vec<usize> = members.iter().chain(&u_idx).copied().collect();
                    pseudo_constraint_branch(&model, ds, &policy, cfg, t, weak.view(), &batch_idx)?
                }
                Regime::NaivePl => pseudo_label_branch(&model, ds, &policy, cfg, t, weak_u.view(), &u_idx)?,
                _ => unreachable!("pseudo branch only runs for semi-constrained regimes"),
            };
            record.loss_pseudo = branch.loss;
            record.sel_frac = branch.selected as f64 / branch.batch_size as f64;
            record.pml_frac = branch.must_link_frac;
            record.pair_acc = branch.pair_acc;
            diag = (branch.selected, branch.pairs);
            if cfg.lambda != 0.0 {
                if let Some(g) = branch.grads {
                    grads.add_scaled(&g, cfg.lambda);
                }
            }
        }

        if !record.loss_cons.is_finite() || !record.loss_pseudo.is_finite() {
            return Err(Error::NonFiniteLoss {
                step: t,
                lr,
                loss_cons: record.loss_cons,
                loss_pseudo: record.loss_pseudo,
                selected: diag.0,
                pseudo_pairs: diag.1,
            });
        }
        sgd_step(&mut model, &grads, &mut opt)?;
        trace.records.push(record);
    }
    Ok(TrainOutcome { model, optimizer: opt, trace })
}

/// The naive pseudo-labeling baseline. Requires confidence-based selection.
pub fn train_naive_pl(ds: &Dataset, constraints: &[ConstraintPair], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.selection.mode != SelectionMode::Confidence {
        return Err(Error::invalid("naive pseudo-labeling selects by confidence"));
    }
    let cfg = TrainConfig { regime: Regime::NaivePl, ..cfg.clone() };
    train(ds, constraints, &cfg)
}

/// Samples that appear in no constraint; all samples if every one does.
fn unconstrained_pool(n: usize, constraints: &[ConstraintPair]) -> Vec<usize> {
    let mut used = vec![false; n];
    for p in constraints {
        used[p.i] = true;
        used[p.j] = true;
    }
    let pool: Vec<usize> = (0..n).filter(|&k| !used[k]).collect();
    if pool.is_empty() {
        (0..n).collect()
    } else {
        pool
    }
}

/// `(i, j, c)` triples for this step's constrained batch.
fn draw_constrained(ds: &Dataset, constraints: &[ConstraintPair], cfg: &TrainConfig, t: usize) -> Vec<(usize, usize, f64)> {
    let mut r = rng::stream(cfg.seed, &[TAG_CBATCH, t as u64]);
    match cfg.regime {
        Regime::FullyConstrained => {
            let labels = ds.labels().expect("checked before training");
            let n = ds.len();
            (0..cfg.batch_c)
                .map(|_| {
                    let i = r.gen_range(0..n);
                    let mut j = r.gen_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    (i, j, f64::from(u8::from(labels[i] == labels[j])))
                })
                .collect()
        }
        _ if constraints.is_empty() => Vec::new(),
        _ => (0..cfg.batch_c)
            .map(|_| {
                let p = constraints[r.gen_range(0..constraints.len())];
                (p.i, p.j, f64::from(p.c))
            })
            .collect(),
    }
}

/// Swaps the top two entries of each row independently with probability `rho`.
pub fn apply_pseudo_noise<R: Rng>(weak_probs: &mut Array2<f64>, rho: f64, rng: &mut R) -> Result<usize> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho must be in [0, 1], got {rho}")));
    }
    let mut flipped = 0;
    for mut row in weak_probs.rows_mut() {
        if rng.gen::<f64>() < rho {
            mode_flip_slice(row.as_slice_mut().expect("standard layout"))?;
            flipped += 1;
        }
    }
    Ok(flipped)
}

struct BranchOutput {
    loss: f64,
    grads: Option<crate::nethead::Gradients>,
    selected: usize,
    batch_size: usize,
    pairs: usize,
    must_link_frac: f64,
    pair_acc: Option<f64>,
}

fn pseudo_constraint_branch(
    model: &ClusterHead,
    ds: &Dataset,
    policy: &AugmentationPolicy,
    cfg: &TrainConfig,
    t: usize,
    weak: ArrayView2<'_, f64>,
    batch_idx: &[usize],
) -> Result<BranchOutput> {
    let mask = select_rows(weak, &cfg.selection)?;
    let mut pcs = make_pseudo_constraints_rows(weak, &mask, cfg.max_pseudo_pairs, &mut rng::stream(cfg.seed, &[TAG_CAP, t as u64]));
    if !cfg.soft_pc {
        pcs = harden(&pcs, cfg.mu)?;
    }
    let selected_rows: Vec<usize> = (0..mask.len()).filter(|&k| mask[k]).collect();
    let mut out = BranchOutput {
        loss: 0.0,
        grads: None,
        selected: selected_rows.len(),
        batch_size: batch_idx.len(),
        pairs: pcs.len(),
        must_link_frac: 0.0,
        pair_acc: None,
    };
    if pcs.is_empty() {
        return Ok(out);
    }
    out.must_link_frac = pcs.iter().filter(|p| p.c_tilde >= 0.5).count() as f64 / pcs.len() as f64;
    if let Some(labels) = ds.labels() {
        let agree = pcs
            .iter()
            .filter(|p| (p.c_tilde >= 0.5) == (labels[batch_idx[p.i]] == labels[batch_idx[p.j]]))
            .count();
        out.pair_acc = Some(agree as f64 / pcs.len() as f64);
    }

    // Strong branch only over rows that take part in a pseudo-constraint.
    let mut slot = vec![usize::MAX; mask.len()];
    for (s, &row) in selected_rows.iter().enumerate() {
        slot[row] = s;
    }
    let strong_idx: Vec<usize> = selected_rows.iter().map(|&r| batch_idx[r]).collect();
    let mut xs = gather(ds, &strong_idx);
    policy.apply_rows(&mut xs, Strength::Strong, &mut rng::stream(cfg.seed, &[TAG_STRONG, t as u64]));
    let cache = model.forward_cached(xs.view())?;
    let indexed: Vec<IndexedPair> =
        pcs.iter().map(|p| IndexedPair { i: slot[p.i], j: slot[p.j], target: p.c_tilde }).collect();
    let (loss, grad) = mcl_loss_indexed(cache.probs(), &indexed)?;
    out.loss = loss;
    if cfg.lambda != 0.0 {
        out.grads = Some(model.backward_cached(&cache, grad.view())?);
    }
    Ok(out)
}

fn pseudo_label_branch(
    model: &ClusterHead,
    ds: &Dataset,
    policy: &AugmentationPolicy,
    cfg: &TrainConfig,
    t: usize,
    weak_u: ArrayView2<'_, f64>,
    u_idx: &[usize],
) -> Result<BranchOutput> {
    let mask = select_rows(weak_u, &cfg.selection)?;
    let rows: Vec<usize> = (0..mask.len()).filter(|&k| mask[k]).collect();
    let targets: Vec<usize> = rows.iter().map(|&r| argmax(weak_u.row(r).as_slice().expect("standard layout"))).collect();
    let mut out = BranchOutput {
        loss: 0.0,
        grads: None,
        selected: rows.len(),
        batch_size: u_idx.len(),
        pairs: 0,
        must_link_frac: 0.0,
        pair_acc: None,
    };
    if rows.is_empty() {
        return Ok(out);
    }
    let s = rows.len();
    if s >= 2 {
        let (mut same, mut agree, mut total) = (0usize, 0usize, 0usize);
        let labels = ds.labels();
        for a in 0..s {
            for b in a + 1..s {
                let pseudo_same = targets[a] == targets[b];
                same += usize::from(pseudo_same);
                if let Some(y) = labels {
                    agree += usize::from(pseudo_same == (y[u_idx[rows[a]]] == y[u_idx[rows[b]]]));
                }
                total += 1;
            }
        }
        out.pairs = total;
        out.must_link_frac = same as f64 / total as f64;
        if labels.is_some() {
            out.pair_acc = Some(agree as f64 / total as f64);
        }
    }

    let strong_idx: Vec<usize> = rows.iter().map(|&r| u_idx[r]).collect();
    let mut xs = gather(ds, &strong_idx);
    policy.apply_rows(&mut xs, Strength::Strong, &mut rng::stream(cfg.seed, &[TAG_STRONG, t as u64]));
    let cache = model.forward_cached(xs.view())?;
    let probs = cache.probs();
    let mut grad = Array2::zeros(probs.raw_dim());
    let scale = 1.0 / s as f64;
    let mut loss = 0.0;
    for (k, &target) in targets.iter().enumerate() {
        let p = probs[[k, target]];
        loss -= p.max(CE_EPS).ln();
        if p >= CE_EPS {
            grad[[k, target]] = -scale / p;
        }
    }
    out.loss = loss * scale;
    if cfg.lambda != 0.0 {
        out.grads = Some(model.backward_cached(&cache, grad.view())?);
    }
    Ok(out)
}

/// Mean pairwise loss of `model` on unaugmented constraint pairs; the
/// validation criterion used for grid search.
pub fn constraint_loss(model: &ClusterHead, ds: &Dataset, constraints: &[ConstraintPair]) -> Result<f64> {
    if constraints.is_empty() {
        return Ok(0.0);
    }
    crate::dataspace::validate_constraints(constraints, ds)?;
    let probs = model.forward_batch(ds.features())?;
    let pairs: Vec<IndexedPair> =
        constraints.iter().map(|p| IndexedPair { i: p.i, j: p.j, target: f64::from(p.c) }).collect();
    Ok(mcl_loss_indexed(probs.view(), &pairs)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataspace::{make_blobs, sample_constraints};

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            batch_c: 8,
            batch_u: 16,
            total_steps: 30,
            warmup_steps: 5,
            hidden: vec![8],
            ..TrainConfig::default()
        }
    }

    #[test]
    fn trace_has_one_record_per_step() {
        let ds = make_blobs(3, 20, 2, 1.0, 1).unwrap();
        let c = sample_constraints(&ds, 20, 2).unwrap();
        let out = train(&ds, &c, &small_cfg()).unwrap();
        assert_eq!(out.trace.records.len(), 30);
        assert!(out.trace.records.iter().enumerate().all(|(k, r)| r.t == k));
        assert_eq!(out.optimizer.t, 30);
    }

    #[test]
    fn jsonl_has_fixed_fields() {
        let ds = make_blobs(2, 10, 2, 1.0, 1).unwrap();
        let c = sample_constraints(&ds, 10, 2).unwrap();
        let out = train(&ds, &c, &TrainConfig { total_steps: 3, warmup_steps: 0, ..small_cfg() }).unwrap();
        let text = out.trace.to_jsonl().unwrap();
        assert_eq!(text.lines().count(), 3);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["loss_cons", "loss_pseudo", "lr", "pml_frac", "sel_frac", "t"]);
    }

    #[test]
    fn invalid_configs_rejected() {
        let ds = make_blobs(2, 10, 2, 1.0, 1).unwrap();
        let c = sample_constraints(&ds, 5, 2).unwrap();
        for cfg in [
            TrainConfig { batch_c: 0, ..small_cfg() },
            TrainConfig { warmup_steps: 31, ..small_cfg() },
            TrainConfig { lambda: -1.0, ..small_cfg() },
        ] {
            assert!(train(&ds, &c, &cfg).is_err());
        }
        assert!(train_naive_pl(&ds, &c, &small_cfg()).is_err());
    }

    #[test]
    fn cycler_visits_whole_pool_each_epoch() {
        let mut c = PoolCycler::new((0..10).collect(), 3);
        let mut first = c.next_batch(10);
        first.sort_unstable();
        assert_eq!(first, (0..10).collect::<Vec<_>>());
        let mut second = c.next_batch(10);
        second.sort_unstable();
        assert_eq!(second, first);
    }

    #[test]
    fn pool_excludes_constrained_samples() {
        let c = [ConstraintPair { i: 0, j: 3, c: 1 }];
        assert_eq!(unconstrained_pool(5, &c), vec![1, 2, 4]);
        assert_eq!(unconstrained_pool(2, &[ConstraintPair { i: 0, j: 1, c: 0 }]), vec![0, 1]);
    }

    #[test]
    fn noise_extremes() {
        let mut p = Array2::from_shape_vec((2, 3), vec![0.7, 0.2, 0.1, 0.1, 0.3, 0.6]).unwrap();
        let orig = p.clone();
        let mut r = rng::stream(0, &[]);
        assert_eq!(apply_pseudo_noise(&mut p, 0.0, &mut r).unwrap(), 0);
        assert_eq!(p, orig);
        assert_eq!(apply_pseudo_noise(&mut p, 1.0, &mut r).unwrap(), 2);
        assert_eq!(p.row(0).to_vec(), vec![0.2, 0.7, 0.1]);
        assert_eq!(p.row(1).to_vec(), vec![0.1, 0.6, 0.3]);
    }
}
