//! Flat key-value configuration. A TOML file and the command line both
//! produce an [`Overrides`]; command-line values win.
//!
//! Keys that accept lists (`regime`, `tau`, `lambda`, `mu`, `rho`,
//! `flip_frac`, `n_c`, `n_out`) set the base value when given one element and
//! a sweep axis otherwise.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{EvalSplit, ExperimentSpec};
use crate::error::{Error, Result};
use crate::pseudo::SelectionMode;
use crate::trainer::Regime;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Option<Vec<T>>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(Option::<OneOrMany<T>>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub dataset: Option<String>,
    pub val_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub n_c: Option<Vec<usize>>,
    pub n_c_val: Option<usize>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub splits: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub regime: Option<Vec<Regime>>,
    pub selection: Option<SelectionMode>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub tau: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub mu: Option<Vec<f64>>,
    pub soft: Option<bool>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub rho: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub flip_frac: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub n_out: Option<Vec<usize>>,
    pub steps: Option<usize>,
    pub warmup: Option<usize>,
    pub eta: Option<f64>,
    pub momentum: Option<f64>,
    pub weight_decay: Option<f64>,
    pub batch_c: Option<usize>,
    pub batch_u: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub max_pseudo_pairs: Option<usize>,
    pub aug_weak: Option<f64>,
    pub aug_strong: Option<f64>,
    pub aug_dropout: Option<f64>,
}

/// The on-disk form; identical keys to the command line.
pub type ConfigFile = Overrides;

macro_rules! merge_fields {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Overrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// `other`'s values replace ours where set.
    pub fn merge(&mut self, other: &Overrides) {
        merge_fields!(
            self, other, dataset, val_path, test_path, n_c, n_c_val, folds, seed, splits, out, jobs, regime,
            selection, tau, lambda, mu, soft, rho, flip_frac, n_out, steps, warmup, eta, momentum, weight_decay,
            batch_c, batch_u, hidden, max_pseudo_pairs, aug_weak, aug_strong, aug_dropout
        );
    }

    /// Applies the overrides to a spec. Suites (specs with explicit cells)
    /// only accept `lambda` among the per-cell keys; it is applied to every
    /// cell.
    pub fn apply(&self, spec: &mut ExperimentSpec) -> Result<()> {
        if let Some(d) = &self.dataset {
            spec.dataset = d.clone();
            if let Ok(p) = super::preset(d) {
                if self.n_c.is_none() {
                    spec.n_c = p.n_c;
                }
                if self.tau.is_none() && spec.cells.is_empty() {
                    spec.train.selection.tau = p.tau;
                }
                if self.lambda.is_none() {
                    spec.train.lambda = p.lambda;
                    for c in &mut spec.cells {
                        c.lambda = p.lambda;
                    }
                }
            }
        }
        if self.val_path.is_some() {
            spec.val_path = self.val_path.clone();
        }
        if self.test_path.is_some() {
            spec.test_path = self.test_path.clone();
        }
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),*) => {
                $( if let Some(v) = &self.$src { spec.$($dst).+ = v.clone(); } )*
            };
        }
        set!(n_c_val => n_c_val, folds => folds, seed => seed, out => out, jobs => jobs,
             steps => train.total_steps, warmup => train.warmup_steps, eta => train.eta,
             momentum => train.momentum, weight_decay => train.weight_decay, batch_c => train.batch_c,
             batch_u => train.batch_u, hidden => train.hidden, max_pseudo_pairs => train.max_pseudo_pairs,
             aug_weak => train.augmentation.weak, aug_strong => train.augmentation.strong,
             aug_dropout => train.augmentation.dropout);
        if self.steps.is_some() && self.warmup.is_none() {
            spec.train.warmup_steps = spec.train.total_steps / 10;
        }
        if let Some(s) = &self.splits {
            spec.splits = s.iter().map(|x| x.parse::<EvalSplit>()).collect::<Result<_>>()?;
        }

        if !spec.cells.is_empty() {
            let per_cell = [
                ("regime", self.regime.is_some()),
                ("selection", self.selection.is_some()),
                ("tau", self.tau.is_some()),
                ("mu", self.mu.is_some()),
                ("soft", self.soft.is_some()),
                ("rho", self.rho.is_some()),
                ("flip_frac", self.flip_frac.is_some()),
                ("n_c", self.n_c.is_some()),
                ("n_out", self.n_out.is_some()),
            ];
            if let Some((key, _)) = per_cell.iter().find(|(_, set)| *set) {
                return Err(Error::Config(format!("`{key}` is fixed by suite `{}`", spec.name)));
            }
            if let Some(l) = &self.lambda {
                let [lambda] = l.as_slice() else {
                    return Err(Error::Config("suites take a single lambda".into()));
                };
                spec.train.lambda = *lambda;
                for c in &mut spec.cells {
                    c.lambda = *lambda;
                }
            }
            return Ok(());
        }

        if let Some(m) = self.selection {
            spec.train.selection.mode = m;
        }
        if let Some(s) = self.soft {
            spec.train.soft_pc = s;
        }
        fn axis<T: Clone>(values: &Option<Vec<T>>, base: &mut T, axis: &mut Vec<T>) -> Result<()> {
            match values.as_deref() {
                None => {}
                Some([]) => return Err(Error::Config("empty value list".into())),
                Some([v]) => *base = v.clone(),
                Some(vs) => *axis = vs.to_vec(),
            }
            Ok(())
        }
        axis(&self.regime, &mut spec.train.regime, &mut spec.axes.regime)?;
        axis(&self.tau, &mut spec.train.selection.tau, &mut spec.axes.tau)?;
        axis(&self.lambda, &mut spec.train.lambda, &mut spec.axes.lambda)?;
        axis(&self.mu, &mut spec.train.mu, &mut spec.axes.mu)?;
        axis(&self.rho, &mut spec.train.noise.pseudo_flip_fraction, &mut spec.axes.rho)?;
        axis(&self.flip_frac, &mut spec.train.noise.constraint_flip_fraction, &mut spec.axes.flip_frac)?;
        axis(&self.n_c, &mut spec.n_c, &mut spec.axes.n_c)?;
        let mut n_out = spec.train.n_out.unwrap_or(0);
        axis(&self.n_out, &mut n_out, &mut spec.axes.n_out)?;
        if n_out > 0 {
            spec.train.n_out = Some(n_out);
        }
        if spec.train.regime == Regime::NaivePl && self.selection.is_none() {
            spec.train.selection.mode = SelectionMode::Confidence;
            if self.tau.is_none() {
                spec.train.selection.tau = super::suites::NAIVE_PL_TAU;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_scalars_and_lists() {
        let o = Overrides::from_toml("dataset = \"blobs4\"\ntau = 0.1\nlambda = [0.5, 1.0]\nregime = \"constrained\"\n").unwrap();
        assert_eq!(o.tau, Some(vec![0.1]));
        assert_eq!(o.lambda, Some(vec![0.5, 1.0]));
        assert_eq!(o.regime, Some(vec![Regime::Constrained]));
        let mut spec = ExperimentSpec::new("run", "blobs20").unwrap();
        o.apply(&mut spec).unwrap();
        assert_eq!(spec.dataset, "blobs4");
        assert_eq!(spec.n_c, 100);
        assert_eq!(spec.train.selection.tau, 0.1);
        assert_eq!(spec.axes.lambda, vec![0.5, 1.0]);
        assert_eq!(spec.expand().len(), 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(Overrides::from_toml("tua = 0.1"), Err(Error::Config(_))));
    }

    #[test]
    fn later_overrides_win() {
        let mut file = Overrides::from_toml("seed = 1\nfolds = 3").unwrap();
        let cli = Overrides { seed: Some(9), ..Overrides::default() };
        file.merge(&cli);
        assert_eq!((file.seed, file.folds), (Some(9), Some(3)));
    }

    #[test]
    fn suites_fix_cell_keys() {
        let mut spec = super::super::suite_spec("pl_noise").unwrap();
        let o = Overrides { rho: Some(vec![0.2]), ..Overrides::default() };
        assert!(o.apply(&mut spec).is_err());
        let o = Overrides { lambda: Some(vec![0.25]), folds: Some(2), ..Overrides::default() };
        o.apply(&mut spec).unwrap();
        assert!(spec.cells.iter().all(|c| c.lambda == 0.25));
        assert_eq!(spec.folds, 2);
    }
}
