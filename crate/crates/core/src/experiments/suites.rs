//! Named ablation suites. Axis values marked as artifact defaults in the
//! notes are choices of this implementation, not constants from elsewhere.

use std::fmt::Write as _;

use super::{Cell, ExperimentOutput, ExperimentSpec};
use crate::error::{Error, Result};
use crate::pseudo::SelectionMode;
use crate::trainer::Regime;

const SUITES: [&str; 7] =
    ["soft_vs_hard", "info_vs_conf", "tau_sensitivity", "n_c_sweep", "pl_noise", "constraint_noise", "overcluster"];

/// Confidence threshold used by the naive pseudo-labeling cells.
pub const NAIVE_PL_TAU: f64 = 0.9;

pub fn suite_names() -> &'static [&'static str] {
    &SUITES
}

/// The x-axis of a suite's plot-data file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotAxis {
    Mu,
    Tau,
    NC,
    Rho,
    FlipFrac,
    NOut,
}

impl PlotAxis {
    pub fn for_suite(name: &str) -> Result<Self> {
        Ok(match name {
            "soft_vs_hard" => PlotAxis::Mu,
            "info_vs_conf" | "tau_sensitivity" => PlotAxis::Tau,
            "n_c_sweep" => PlotAxis::NC,
            "pl_noise" => PlotAxis::Rho,
            "constraint_noise" => PlotAxis::FlipFrac,
            "overcluster" => PlotAxis::NOut,
            other => return Err(Error::UnknownSuite(other.to_string())),
        })
    }

    fn name(self) -> &'static str {
        match self {
            PlotAxis::Mu => "mu",
            PlotAxis::Tau => "tau",
            PlotAxis::NC => "n_c",
            PlotAxis::Rho => "rho",
            PlotAxis::FlipFrac => "flip_frac",
            PlotAxis::NOut => "n_out",
        }
    }

    fn value(self, cell: &Cell) -> String {
        match self {
            PlotAxis::Mu if cell.soft_pc => "soft".to_string(),
            PlotAxis::Mu => cell.mu.to_string(),
            PlotAxis::Tau => cell.tau.to_string(),
            PlotAxis::NC => cell.n_c.to_string(),
            PlotAxis::Rho => cell.rho.to_string(),
            PlotAxis::FlipFrac => cell.flip_frac.to_string(),
            PlotAxis::NOut => cell.n_out.map_or("k".to_string(), |n| n.to_string()),
        }
    }

    fn series(self, cell: &Cell) -> String {
        match self {
            PlotAxis::Mu => format!("{}-{}", cell.regime, if cell.soft_pc { "soft" } else { "hard" }),
            PlotAxis::Tau => format!("{}-{}", cell.regime, cell.mode.as_str()),
            _ => cell.regime.to_string(),
        }
    }
}

/// Expands a named suite into a spec with its default dataset and axes.
pub fn suite_spec(name: &str) -> Result<ExperimentSpec> {
    PlotAxis::for_suite(name)?;
    let dataset = match name {
        "pl_noise" | "overcluster" => "blobs4",
        _ => "blobs20",
    };
    let mut spec = ExperimentSpec::new(name, dataset)?;
    let base = Cell { regime: Regime::ConstraintMatch, ..spec.base_cell() };
    let with = |f: &dyn Fn(&mut Cell)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    let naive = |c: &mut Cell| {
        c.regime = Regime::NaivePl;
        c.mode = SelectionMode::Confidence;
        c.tau = NAIVE_PL_TAU;
    };
    let mut notes = Vec::new();
    spec.cells = match name {
        "soft_vs_hard" => {
            let mut cells = vec![base.clone()];
            for mu in [0.3, 0.5, 0.7, 0.9] {
                cells.push(with(&|c| {
                    c.soft_pc = false;
                    c.mu = mu;
                }));
            }
            cells
        }
        "info_vs_conf" => {
            let mut cells = vec![with(&|c| c.tau = 0.2)];
            for tau in [0.7, 0.8, 0.9, 0.95, 0.99] {
                cells.push(with(&|c| {
                    c.mode = SelectionMode::Confidence;
                    c.tau = tau;
                }));
            }
            cells
        }
        "tau_sensitivity" => [0.05, 0.1, 0.2, 0.3].iter().map(|&tau| with(&|c| c.tau = tau)).collect(),
        "n_c_sweep" => {
            notes.push("n_c axis {20, 40, 100, 200} is an artifact default scaled to the preset size".into());
            cross(&[Regime::Constrained, Regime::ConstraintMatch], &[20.0, 40.0, 100.0, 200.0], |c, v| c.n_c = v as usize, &base)
        }
        "pl_noise" => {
            notes.push("rho axis {0, 0.1, 0.3, 0.5, 0.7} is an artifact default".into());
            notes.push(format!("naive_pl cells select by confidence > {NAIVE_PL_TAU}"));
            let rhos = [0.0, 0.1, 0.3, 0.5, 0.7];
            let mut cells: Vec<Cell> = rhos.iter().map(|&rho| with(&|c| {
                naive(c);
                c.rho = rho;
            })).collect();
            cells.extend(rhos.iter().map(|&rho| with(&|c| c.rho = rho)));
            cells
        }
        "constraint_noise" => {
            notes.push("flip fraction axis {0, 0.1, 0.2, 0.3} is an artifact default".into());
            cross(&[Regime::Constrained, Regime::ConstraintMatch], &[0.0, 0.1, 0.2, 0.3], |c, v| c.flip_frac = v, &base)
        }
        "overcluster" => {
            let k = super::preset(dataset)?.k;
            notes.push("overcluster uses the smallest n_c of the n_c_sweep axis".into());
            [Regime::Constrained, Regime::ConstraintMatch]
                .iter()
                .map(|&regime| with(&|c| {
                    c.regime = regime;
                    c.n_out = Some(5 * k);
                    c.n_c = 20;
                }))
                .collect()
        }
        _ => unreachable!("checked by PlotAxis::for_suite"),
    };
    spec.notes = notes;
    Ok(spec)
}

fn cross(regimes: &[Regime], values: &[f64], set: impl Fn(&mut Cell, f64), base: &Cell) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &regime in regimes {
        for &v in values {
            let mut c = Cell { regime, ..base.clone() };
            set(&mut c, v);
            cells.push(c);
        }
    }
    cells
}

/// Renders the plot-data CSV for a suite: one row per (cell, split, metric).
pub fn plot_csv(axis: PlotAxis, output: &ExperimentOutput) -> String {
    let mut s = "x_name,x,series,split,metric,mean,std\n".to_string();
    for m in &output.summaries {
        for (metric, ms) in [("acc", m.acc), ("nmi", m.nmi), ("ari", m.ari)] {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                axis.name(),
                axis.value(&m.cell),
                axis.series(&m.cell),
                m.split.as_str(),
                metric,
                ms.mean,
                ms.std
            );
        }
    }
    s
}

/// Runs a suite spec and writes its outputs plus `plot.csv`.
pub fn run_suite(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let axis = PlotAxis::for_suite(&spec.name)?;
    let output = super::run(spec)?;
    super::write_atomic(&spec.out.join("plot.csv"), plot_csv(axis, &output).as_bytes())?;
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_expands() {
        for name in suite_names() {
            let spec = suite_spec(name).unwrap();
            spec.validate().unwrap();
            assert!(!spec.expand().is_empty());
        }
        assert!(matches!(suite_spec("nope"), Err(Error::UnknownSuite(_))));
    }

    #[test]
    fn overcluster_uses_five_times_k() {
        let spec = suite_spec("overcluster").unwrap();
        let cells = spec.expand();
        assert_eq!(cells.len(), 2);
        assert!(cells.iter().all(|c| c.n_out == Some(20)));
        let regimes: Vec<_> = cells.iter().map(|c| c.regime).collect();
        assert_eq!(regimes, [Regime::Constrained, Regime::ConstraintMatch]);
    }

    #[test]
    fn pl_noise_axis() {
        let cells = suite_spec("pl_noise").unwrap().expand();
        assert_eq!(cells.len(), 10);
        let rhos: Vec<f64> = cells.iter().filter(|c| c.regime == Regime::NaivePl).map(|c| c.rho).collect();
        assert_eq!(rhos, [0.0, 0.1, 0.3, 0.5, 0.7]);
    }

    #[test]
    fn soft_vs_hard_cells() {
        let cells = suite_spec("soft_vs_hard").unwrap().expand();
        assert_eq!(cells.iter().filter(|c| c.soft_pc).count(), 1);
        let mus: Vec<f64> = cells.iter().filter(|c| !c.soft_pc).map(|c| c.mu).collect();
        assert_eq!(mus, [0.3, 0.5, 0.7, 0.9]);
    }
}
