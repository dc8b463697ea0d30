//! Experiment runner: fold repetition, sweeps, grid selection and result files.
//!
//! Output layout inside `spec.out`:
//!
//! ```text
//! results.csv              one row per (cell, fold, split)
//! summary.csv              fold mean/std per (cell, split)
//! trace-<run-id>.jsonl     per-step training log
//! spec.json                the resolved spec
//! plot.csv                 suites only: x value, series, metric mean/std
//! ```

mod config;
mod suites;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataspace::{self, ConstraintPair, Dataset, NoiseConfig, Split};
use crate::error::{Error, Result};
use crate::eval::{evaluate, mean_std, EvalReport, MeanStd};
use crate::pseudo::SelectionMode;
use crate::rng;
use crate::trainer::{self, Regime, TrainConfig, TrainOutcome};

pub use config::{ConfigFile, Overrides};
pub use suites::{plot_csv, run_suite, suite_names, suite_spec, PlotAxis, NAIVE_PL_TAU};

const TAG_DATA: u64 = 0xDA7A;
const TAG_FOLD: u64 = 0xF01D;

/// A built-in synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: &'static str,
    pub k: usize,
    pub per_class: usize,
    pub d: usize,
    pub spread: f64,
    pub n_c: usize,
    /// Pseudo-loss weight used unless overridden.
    pub lambda: f64,
    /// Entropy selection threshold used unless overridden.
    pub tau: f64,
}

pub const PRESETS: [Preset; 2] = [
    Preset { name: "blobs4", k: 4, per_class: 500, d: 2, spread: 0.5, n_c: 100, lambda: 0.5, tau: 0.2 },
    Preset { name: "blobs20", k: 20, per_class: 200, d: 10, spread: 1.0, n_c: 200, lambda: 1.0, tau: 0.05 },
];

pub fn preset(name: &str) -> Result<Preset> {
    PRESETS.iter().find(|p| p.name == name).copied().ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

/// Evaluation target. `TrainTest` scores the union of the training and test
/// splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSplit {
    Train,
    Val,
    Test,
    #[serde(rename = "train+test")]
    TrainTest,
}

impl EvalSplit {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalSplit::Train => "train",
            EvalSplit::Val => "val",
            EvalSplit::Test => "test",
            EvalSplit::TrainTest => "train+test",
        }
    }
}

impl std::str::FromStr for EvalSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(EvalSplit::Train),
            "val" => Ok(EvalSplit::Val),
            "test" => Ok(EvalSplit::Test),
            "train+test" => Ok(EvalSplit::TrainTest),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// One point of a sweep. Fields left at `None` fall back to the base
/// [`TrainConfig`] of the spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub regime: Regime,
    pub n_c: usize,
    pub n_out: Option<usize>,
    pub mode: SelectionMode,
    pub tau: f64,
    pub lambda: f64,
    pub soft_pc: bool,
    pub mu: f64,
    pub rho: f64,
    pub flip_frac: f64,
}

impl Cell {
    /// Stable identifier, also used in trace file names.
    pub fn id(&self) -> String {
        let pc = if self.soft_pc { "soft".to_string() } else { format!("hard{}", self.mu) };
        let n_out = self.n_out.map_or("k".to_string(), |n| n.to_string());
        format!(
            "{}_nc{}_out{}_{}{}_lam{}_{}_rho{}_flip{}",
            self.regime,
            self.n_c,
            n_out,
            match self.mode {
                SelectionMode::Informativeness => "ent",
                SelectionMode::Confidence => "conf",
            },
            self.tau,
            self.lambda,
            pc,
            self.rho,
            self.flip_frac
        )
    }

    fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        unit("tau", self.tau)?;
        unit("mu", self.mu)?;
        unit("rho", self.rho)?;
        unit("flip_frac", self.flip_frac)?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.n_c == 0 && self.regime != Regime::FullyConstrained {
            return Err(Error::Config("n_c must be positive".into()));
        }
        if self.n_out == Some(0) {
            return Err(Error::Config("n_out must be positive".into()));
        }
        if self.regime == Regime::NaivePl && self.mode != SelectionMode::Confidence {
            return Err(Error::Config("naive_pl cells must use confidence selection".into()));
        }
        Ok(())
    }

    fn train_config(&self, base: &TrainConfig, seed: u64) -> TrainConfig {
        let mut cfg = base.clone();
        cfg.regime = self.regime;
        cfg.n_out = self.n_out.or(base.n_out);
        cfg.selection.mode = self.mode;
        cfg.selection.tau = self.tau;
        cfg.lambda = self.lambda;
        cfg.soft_pc = self.soft_pc;
        cfg.mu = self.mu;
        cfg.noise = NoiseConfig { constraint_flip_fraction: self.flip_frac, pseudo_flip_fraction: self.rho, seed };
        cfg.seed = seed;
        cfg
    }
}

/// Lists of values crossed into cells. An empty list means "base value only".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Axes {
    pub regime: Vec<Regime>,
    pub tau: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
    pub flip_frac: Vec<f64>,
    pub n_c: Vec<usize>,
    pub n_out: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    /// Preset name or path to a training CSV.
    pub dataset: String,
    pub val_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub n_c: usize,
    /// Constraints mined from the validation split for model selection.
    pub n_c_val: usize,
    pub folds: usize,
    pub seed: u64,
    pub splits: Vec<EvalSplit>,
    pub train: TrainConfig,
    pub axes: Axes,
    /// Explicit cells; when non-empty they replace the cross product of `axes`.
    pub cells: Vec<Cell>,
    pub out: PathBuf,
    pub jobs: usize,
    /// Also write `model-<run-id>.json` checkpoints.
    #[serde(default)]
    pub save_checkpoints: bool,
    /// Free-form notes stored in spec.json, e.g. which axis values are
    /// artifact defaults.
    pub notes: Vec<String>,
}

impl ExperimentSpec {
    /// A single-cell spec on `dataset` with default training settings.
    pub fn new(name: &str, dataset: &str) -> Result<Self> {
        let mut train = TrainConfig::default();
        let n_c = match preset(dataset) {
            Ok(p) => {
                train.lambda = p.lambda;
                train.selection.tau = p.tau;
                p.n_c
            }
            Err(_) => 100,
        };
        Ok(Self {
            name: name.to_string(),
            dataset: dataset.to_string(),
            val_path: None,
            test_path: None,
            n_c,
            n_c_val: 200,
            folds: 5,
            seed: 0,
            splits: vec![EvalSplit::Test],
            train,
            axes: Axes::default(),
            cells: Vec::new(),
            out: PathBuf::from("out").join(name),
            jobs: 1,
            save_checkpoints: false,
            notes: Vec::new(),
        })
    }

    pub fn base_cell(&self) -> Cell {
        Cell {
            regime: self.train.regime,
            n_c: self.n_c,
            n_out: self.train.n_out,
            mode: self.train.selection.mode,
            tau: self.train.selection.tau,
            lambda: self.train.lambda,
            soft_pc: self.train.soft_pc,
            mu: self.train.mu,
            rho: self.train.noise.pseudo_flip_fraction,
            flip_frac: self.train.noise.constraint_flip_fraction,
        }
    }

    /// The cells this spec runs, in a fixed order.
    pub fn expand(&self) -> Vec<Cell> {
        if !self.cells.is_empty() {
            return self.cells.clone();
        }
        let base = self.base_cell();
        let or_base = |v: &Vec<f64>, b: f64| if v.is_empty() { vec![b] } else { v.clone() };
        let regimes = if self.axes.regime.is_empty() { vec![base.regime] } else { self.axes.regime.clone() };
        let n_cs = if self.axes.n_c.is_empty() { vec![base.n_c] } else { self.axes.n_c.clone() };
        let n_outs: Vec<Option<usize>> =
            if self.axes.n_out.is_empty() { vec![base.n_out] } else { self.axes.n_out.iter().map(|&n| Some(n)).collect() };
        let mus = if base.soft_pc { vec![base.mu] } else { or_base(&self.axes.mu, base.mu) };
        let mut cells = Vec::new();
        for &regime in &regimes {
            for &n_c in &n_cs {
                for &n_out in &n_outs {
                    for &tau in &or_base(&self.axes.tau, base.tau) {
                        for &lambda in &or_base(&self.axes.lambda, base.lambda) {
                            for &mu in &mus {
                                for &rho in &or_base(&self.axes.rho, base.rho) {
                                    for &flip_frac in &or_base(&self.axes.flip_frac, base.flip_frac) {
                                        let mode = if regime == Regime::NaivePl { SelectionMode::Confidence } else { base.mode };
                                        cells.push(Cell { regime, n_c, n_out, mode, tau, lambda, mu, rho, flip_frac, ..base.clone() });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        cells
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds == 0 {
            return Err(Error::Config("folds must be >= 1".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        if self.splits.is_empty() {
            return Err(Error::Config("at least one evaluation split is required".into()));
        }
        let has_files = preset(&self.dataset).is_err();
        for s in &self.splits {
            let missing = match s {
                EvalSplit::Val => has_files && self.val_path.is_none(),
                EvalSplit::Test | EvalSplit::TrainTest => has_files && self.test_path.is_none(),
                EvalSplit::Train => false,
            };
            if missing {
                return Err(Error::Config(format!("split `{}` needs a file for dataset `{}`", s.as_str(), self.dataset)));
            }
        }
        let cells = self.expand();
        if cells.is_empty() {
            return Err(Error::Config("spec expands to no cells".into()));
        }
        for cell in &cells {
            cell.validate()?;
            cell.train_config(&self.train, 0).validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Hash of everything that influences results (not `out` or `jobs`).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        canonical.jobs = 1;
        canonical.save_checkpoints = false;
        let json = serde_json::to_string(&canonical).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Train/val/test splits resolved from a spec.
#[derive(Debug, Clone)]
pub struct DataBundle {
    pub train: Dataset,
    pub val: Option<Dataset>,
    pub test: Option<Dataset>,
}

impl DataBundle {
    pub fn load(spec: &ExperimentSpec) -> Result<Self> {
        if let Ok(p) = preset(&spec.dataset) {
            let gen = |tag: u64, per_class: usize, split: Split| {
                dataspace::make_blobs(p.k, per_class, p.d, p.spread, rng::derive_seed(spec.seed, &[TAG_DATA, tag]))
                    .map(|ds| ds.with_split(split))
            };
            return Ok(Self {
                train: gen(0, p.per_class, Split::Train)?,
                val: Some(gen(1, (p.per_class / 4).max(1), Split::Val)?),
                test: Some(gen(2, p.per_class, Split::Test)?),
            });
        }
        let path = Path::new(&spec.dataset);
        if !path.exists() {
            return Err(Error::UnknownPreset(spec.dataset.clone()));
        }
        Ok(Self {
            train: dataspace::load_dataset(path, Split::Train)?,
            val: spec.val_path.as_ref().map(|p| dataspace::load_dataset(p, Split::Val)).transpose()?,
            test: spec.test_path.as_ref().map(|p| dataspace::load_dataset(p, Split::Test)).transpose()?,
        })
    }

    fn split(&self, s: EvalSplit) -> Result<Dataset> {
        let missing = || Error::Config(format!("split `{}` is not available", s.as_str()));
        Ok(match s {
            EvalSplit::Train => self.train.clone(),
            EvalSplit::Val => self.val.clone().ok_or_else(missing)?,
            EvalSplit::Test => self.test.clone().ok_or_else(missing)?,
            EvalSplit::TrainTest => {
                let test = self.test.as_ref().ok_or_else(missing)?;
                Dataset::concat(&[&self.train, test], Split::Train)?
            }
        })
    }
}

/// Seeds shared by every cell of one fold, so cells differ only in their
/// own settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldSeeds {
    pub constraints: u64,
    pub val_constraints: u64,
    pub train: u64,
    pub flip: u64,
}

impl FoldSeeds {
    pub fn new(seed: u64, fold: usize) -> Self {
        let s = |tag: u64| rng::derive_seed(seed, &[TAG_FOLD, fold as u64, tag]);
        Self { constraints: s(1), val_constraints: s(2), train: s(3), flip: s(4) }
    }
}

/// Result of one (cell, fold) training run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub cell_index: usize,
    pub fold: usize,
    pub run_id: String,
    pub reports: Vec<(EvalSplit, EvalReport)>,
    pub val_loss: Option<f64>,
    pub pair_acc: Option<f64>,
    pub trace_jsonl: String,
    pub checkpoint: Option<String>,
    pub error: Option<String>,
}

/// Fold aggregate for one (cell, split).
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: Cell,
    pub split: EvalSplit,
    pub ok_folds: usize,
    pub failed_folds: usize,
    pub acc: MeanStd,
    pub nmi: MeanStd,
    pub ari: MeanStd,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub spec_hash: String,
    pub cells: Vec<Cell>,
    pub runs: Vec<RunResult>,
    pub summaries: Vec<CellSummary>,
}

impl ExperimentOutput {
    /// Per-fold reports of `cell_index` on `split`, in fold order; failed
    /// folds are `None`.
    pub fn fold_reports(&self, cell_index: usize, split: EvalSplit) -> Vec<Option<&EvalReport>> {
        let mut runs: Vec<&RunResult> = self.runs.iter().filter(|r| r.cell_index == cell_index).collect();
        runs.sort_by_key(|r| r.fold);
        runs.iter().map(|r| r.reports.iter().find(|(s, _)| *s == split).map(|(_, rep)| rep)).collect()
    }

    pub fn summary(&self, cell_index: usize, split: EvalSplit) -> Option<&CellSummary> {
        let cell = &self.cells[cell_index];
        self.summaries.iter().find(|s| &s.cell == cell && s.split == split)
    }
}

/// Trains and evaluates a single cell on one fold.
pub fn run_cell(spec: &ExperimentSpec, data: &DataBundle, cell: &Cell, fold: usize) -> Result<(TrainOutcome, RunOutcome)> {
    let seeds = FoldSeeds::new(spec.seed, fold);
    let mut constraints = dataspace::sample_constraints(&data.train, cell.n_c, seeds.constraints)?;
    if cell.flip_frac > 0.0 {
        let noise = NoiseConfig { constraint_flip_fraction: cell.flip_frac, pseudo_flip_fraction: 0.0, seed: seeds.flip };
        constraints = dataspace::flip_constraints(&constraints, &noise)?;
    }
    let cfg = cell.train_config(&spec.train, seeds.train);
    let outcome = if cell.regime == Regime::NaivePl {
        trainer::train_naive_pl(&data.train, &constraints, &cfg)?
    } else {
        trainer::train(&data.train, &constraints, &cfg)?
    };
    let n_out = outcome.model.n_out();
    let mut reports = Vec::new();
    for &split in &spec.splits {
        let ds = data.split(split)?;
        let labels = ds.labels().ok_or(Error::UnlabeledDataset)?;
        let preds = outcome.model.predict(ds.features())?;
        reports.push((split, evaluate(&preds, labels, ds.num_classes(), n_out, ds.split())?));
    }
    let val_loss = match &data.val {
        Some(val) if spec.n_c_val > 0 && val.labels().is_some() => {
            let n = spec.n_c_val.min(val.len());
            let vc = dataspace::sample_constraints(val, n, seeds.val_constraints)?;
            Some(trainer::constraint_loss(&outcome.model, val, &vc)?)
        }
        _ => None,
    };
    Ok((outcome, RunOutcome { reports, val_loss, constraints }))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub reports: Vec<(EvalSplit, EvalReport)>,
    pub val_loss: Option<f64>,
    pub constraints: Vec<ConstraintPair>,
}

/// Runs every (cell, fold) of `spec` in memory, using up to `spec.jobs`
/// threads. Results do not depend on the thread count.
pub fn execute(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let data = DataBundle::load(spec)?;
    let cells = spec.expand();
    let jobs: Vec<(usize, usize)> =
        (0..cells.len()).flat_map(|c| (0..spec.folds).map(move |f| (c, f))).collect();
    let work = |&(ci, fold): &(usize, usize)| {
        let cell = &cells[ci];
        let run_id = format!("{}_f{}", cell.id(), fold);
        log::info!("run {run_id}");
        match run_cell(spec, &data, cell, fold) {
            Ok((outcome, run)) => RunResult {
                cell_index: ci,
                fold,
                run_id,
                reports: run.reports,
                val_loss: run.val_loss,
                pair_acc: outcome.trace.mean_pair_acc(),
                trace_jsonl: outcome.trace.to_jsonl().unwrap_or_default(),
                checkpoint: if spec.save_checkpoints {
                    crate::nethead::checkpoint_to_string(&outcome.model, Some(&outcome.optimizer)).ok()
                } else {
                    None
                },
                error: None,
            },
            Err(e) => {
                log::warn!("run {run_id} failed: {e}");
                RunResult {
                    cell_index: ci,
                    fold,
                    run_id,
                    reports: Vec::new(),
                    val_loss: None,
                    pair_acc: None,
                    trace_jsonl: String::new(),
                    checkpoint: None,
                    error: Some(e.to_string()),
                }
            }
        }
    };
    let runs: Vec<RunResult> = if spec.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(work).collect())
    } else {
        jobs.iter().map(work).collect()
    };
    let summaries = summarize(spec, &cells, &runs);
    Ok(ExperimentOutput { spec_hash: spec.hash(), cells, runs, summaries })
}

fn summarize(spec: &ExperimentSpec, cells: &[Cell], runs: &[RunResult]) -> Vec<CellSummary> {
    let mut out = Vec::new();
    for (ci, cell) in cells.iter().enumerate() {
        let cell_runs: Vec<&RunResult> = runs.iter().filter(|r| r.cell_index == ci).collect();
        let failed = cell_runs.iter().filter(|r| r.error.is_some()).count();
        let val: Vec<f64> = cell_runs.iter().filter_map(|r| r.val_loss).collect();
        let val_loss = (!val.is_empty()).then(|| mean_std(&val).mean);
        for &split in &spec.splits {
            let reps: Vec<&EvalReport> = cell_runs
                .iter()
                .filter_map(|r| r.reports.iter().find(|(s, _)| *s == split).map(|(_, rep)| rep))
                .collect();
            let nan = MeanStd { mean: f64::NAN, std: f64::NAN };
            let col = |f: fn(&EvalReport) -> f64| {
                if reps.is_empty() {
                    nan
                } else {
                    mean_std(&reps.iter().map(|r| f(r)).collect::<Vec<_>>())
                }
            };
            out.push(CellSummary {
                cell: cell.clone(),
                split,
                ok_folds: reps.len(),
                failed_folds: failed,
                acc: col(|r| r.acc),
                nmi: col(|r| r.nmi),
                ari: col(|r| r.ari),
                val_loss,
            });
        }
    }
    out
}

const CELL_COLUMNS: &str = "cell,n_out,mode,tau,lambda,soft,mu,rho,flip_frac";

fn cell_fields(cell: &Cell) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        cell.id(),
        cell.n_out.map_or(String::new(), |n| n.to_string()),
        cell.mode.as_str(),
        cell.tau,
        cell.lambda,
        cell.soft_pc,
        cell.mu,
        cell.rho,
        cell.flip_frac
    )
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Renders results.csv: one row per (cell, fold, split); failed runs get a
/// single row with empty metrics and the error message.
pub fn results_csv(spec: &ExperimentSpec, output: &ExperimentOutput) -> String {
    let mut s = format!(
        "regime,dataset,n_c,fold,split,acc,nmi,ari,{CELL_COLUMNS},val_loss,pair_acc,seed,spec_hash,run_id,status\n"
    );
    for run in &output.runs {
        let cell = &output.cells[run.cell_index];
        let tail = |status: &str| {
            format!(
                "{},{},{},{},{},{}",
                opt(run.val_loss),
                opt(run.pair_acc),
                spec.seed,
                output.spec_hash,
                run.run_id,
                csv_escape(status)
            )
        };
        if let Some(err) = &run.error {
            let _ = writeln!(
                s,
                "{},{},{},{},,,,,{},{}",
                cell.regime,
                spec.dataset,
                cell.n_c,
                run.fold,
                cell_fields(cell),
                tail(&format!("failed: {err}"))
            );
            continue;
        }
        for (split, r) in &run.reports {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                cell.regime,
                spec.dataset,
                cell.n_c,
                run.fold,
                split.as_str(),
                r.acc,
                r.nmi,
                r.ari,
                cell_fields(cell),
                tail("ok")
            );
        }
    }
    s
}

pub fn summary_csv(spec: &ExperimentSpec, output: &ExperimentOutput) -> String {
    let mut s = format!(
        "regime,dataset,n_c,split,folds,failed,acc_mean,acc_std,nmi_mean,nmi_std,ari_mean,ari_std,val_loss,{CELL_COLUMNS},spec_hash\n"
    );
    for m in &output.summaries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            m.cell.regime,
            spec.dataset,
            m.cell.n_c,
            m.split.as_str(),
            m.ok_folds,
            m.failed_folds,
            m.acc.mean,
            m.acc.std,
            m.nmi.mean,
            m.nmi.std,
            m.ari.mean,
            m.ari.std,
            opt(m.val_loss),
            cell_fields(&m.cell),
            output.spec_hash
        );
    }
    s
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes `contents` to `path` via a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Runs `spec` and writes all result files. Returns the in-memory output.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let output = execute(spec)?;
    write_outputs(spec, &output)?;
    Ok(output)
}

pub fn write_outputs(spec: &ExperimentSpec, output: &ExperimentOutput) -> Result<()> {
    fs::create_dir_all(&spec.out).map_err(|e| Error::io(&spec.out, e))?;
    write_atomic(&spec.out.join("spec.json"), serde_json::to_string_pretty(spec)?.as_bytes())?;
    for run in &output.runs {
        if run.error.is_none() {
            write_atomic(&spec.out.join(format!("trace-{}.jsonl", run.run_id)), run.trace_jsonl.as_bytes())?;
        }
        if let Some(ckpt) = &run.checkpoint {
            write_atomic(&spec.out.join(format!("model-{}.json", run.run_id)), ckpt.as_bytes())?;
        }
    }
    write_atomic(&spec.out.join("results.csv"), results_csv(spec, output).as_bytes())?;
    write_atomic(&spec.out.join("summary.csv"), summary_csv(spec, output).as_bytes())
}

/// Model-selection criterion for [`grid_select`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Lowest final pairwise loss on validation constraints.
    ValidationLoss,
}

/// Picks the cell with the lowest criterion value; ties go to the smaller
/// λ, then the smaller τ.
pub fn grid_select<'a>(summaries: &'a [CellSummary], criterion: Criterion) -> Result<&'a CellSummary> {
    let key = |s: &CellSummary| match criterion {
        Criterion::ValidationLoss => s.val_loss.unwrap_or(f64::INFINITY),
    };
    summaries
        .iter()
        .min_by(|a, b| {
            key(a)
                .total_cmp(&key(b))
                .then(a.cell.lambda.total_cmp(&b.cell.lambda))
                .then(a.cell.tau.total_cmp(&b.cell.tau))
        })
        .ok_or(Error::Empty("grid summaries"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(lambda: f64, tau: f64, val: f64) -> CellSummary {
        let spec = ExperimentSpec::new("t", "blobs4").unwrap();
        let ms = MeanStd { mean: 0.0, std: 0.0 };
        CellSummary {
            cell: Cell { lambda, tau, ..spec.base_cell() },
            split: EvalSplit::Test,
            ok_folds: 1,
            failed_folds: 0,
            acc: ms,
            nmi: ms,
            ari: ms,
            val_loss: Some(val),
        }
    }

    #[test]
    fn grid_select_examples() {
        let one = [summary(1.0, 0.2, 0.3)];
        assert_eq!(grid_select(&one, Criterion::ValidationLoss).unwrap(), &one[0]);
        let two = [summary(1.0, 0.2, 0.5), summary(1.0, 0.1, 0.4)];
        assert_eq!(grid_select(&two, Criterion::ValidationLoss).unwrap().val_loss, Some(0.4));
        let tie = [summary(1.0, 0.1, 0.4), summary(0.5, 0.3, 0.4), summary(0.5, 0.2, 0.4)];
        let best = grid_select(&tie, Criterion::ValidationLoss).unwrap();
        assert_eq!((best.cell.lambda, best.cell.tau), (0.5, 0.2));
        assert!(grid_select(&[], Criterion::ValidationLoss).is_err());
    }

    #[test]
    fn tau_axis_expands_to_cells() {
        let mut spec = ExperimentSpec::new("t", "blobs4").unwrap();
        spec.axes.tau = vec![0.05, 0.1, 0.2, 0.3];
        assert_eq!(spec.expand().len(), 4);
        spec.train.soft_pc = false;
        spec.axes.mu = vec![0.3, 0.5];
        spec.axes.regime = vec![Regime::Constrained, Regime::ConstraintMatch];
        assert_eq!(spec.expand().len(), 16);
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ExperimentSpec::new("t", "blobs4").unwrap();
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        b.jobs = 4;
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = ExperimentSpec::new("t", "blobs4").unwrap();
        spec.folds = 0;
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::new("t", "blobs4").unwrap();
        spec.axes.rho = vec![1.5];
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::new("t", "missing.csv").unwrap();
        spec.splits = vec![EvalSplit::Test];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn fold_seeds_are_shared_across_cells() {
        assert_eq!(FoldSeeds::new(3, 1), FoldSeeds::new(3, 1));
        assert_ne!(FoldSeeds::new(3, 1).constraints, FoldSeeds::new(3, 2).constraints);
    }
}
