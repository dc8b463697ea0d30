use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use constraintmatch::dataspace::{self, Split};
use constraintmatch::error::{Error, Result};
use constraintmatch::eval::evaluate;
use constraintmatch::experiments::{
    self, grid_select, preset, run_suite, suite_names, suite_spec, Criterion, DataBundle, EvalSplit, ExperimentOutput,
    ExperimentSpec, Overrides,
};
use constraintmatch::nethead::load_checkpoint;
use constraintmatch::pseudo::SelectionMode;
use constraintmatch::trainer::Regime;

#[derive(Parser)]
#[command(name = "constraintmatch", version, about = "Semi-constrained clustering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one configuration (or a sweep) over folds.
    Run(Shared),
    /// Run a named ablation suite.
    Suite {
        name: String,
        #[command(flatten)]
        shared: Shared,
    },
    /// Grid search over lambda and tau, selected by validation constraint loss.
    Grid(Shared),
    /// Evaluate a saved model checkpoint.
    Eval {
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[command(flatten)]
        shared: Shared,
    },
    /// Write a preset's splits and sampled constraints as CSV.
    GenData(Shared),
}

#[derive(Args, Default)]
struct Shared {
    /// Flat TOML file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Preset name (blobs4, blobs20) or training CSV path.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long = "n-c", value_delimiter = ',')]
    n_c: Option<Vec<usize>>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    regime: Option<Vec<Regime>>,
    /// informativeness (entropy) or confidence.
    #[arg(long)]
    selection: Option<SelectionMode>,
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    mu: Option<Vec<f64>>,
    #[arg(long, conflicts_with = "hard")]
    soft: bool,
    #[arg(long)]
    hard: bool,
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    #[arg(long = "flip-frac", value_delimiter = ',')]
    flip_frac: Option<Vec<f64>>,
    #[arg(long = "n-out", value_delimiter = ',')]
    n_out: Option<Vec<usize>>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    /// Evaluation splits: train, val, test, train+test.
    #[arg(long, value_delimiter = ',')]
    splits: Option<Vec<String>>,
    /// Write a model checkpoint per run.
    #[arg(long)]
    checkpoints: bool,
}

impl Shared {
    fn overrides(&self) -> Result<Overrides> {
        let mut o = match &self.config {
            Some(path) => Overrides::load(path)?,
            None => Overrides::default(),
        };
        let cli = Overrides {
            dataset: self.dataset.clone(),
            n_c: self.n_c.clone(),
            folds: self.folds,
            seed: self.seed,
            splits: self.splits.clone(),
            out: self.out.clone(),
            jobs: self.jobs,
            regime: self.regime.clone(),
            selection: self.selection,
            tau: self.tau.clone(),
            lambda: self.lambda.clone(),
            mu: self.mu.clone(),
            soft: (self.soft || self.hard).then_some(self.soft),
            rho: self.rho.clone(),
            flip_frac: self.flip_frac.clone(),
            n_out: self.n_out.clone(),
            steps: self.steps,
            eta: self.eta,
            ..Overrides::default()
        };
        o.merge(&cli);
        Ok(o)
    }

    fn spec(&self, mut spec: ExperimentSpec) -> Result<ExperimentSpec> {
        self.overrides()?.apply(&mut spec)?;
        spec.save_checkpoints |= self.checkpoints;
        spec.validate()?;
        Ok(spec)
    }

    fn dataset(&self) -> Result<String> {
        Ok(self.overrides()?.dataset.unwrap_or_else(|| "blobs4".to_string()))
    }
}

fn print_summary(output: &ExperimentOutput) {
    println!("{:<60} {:>6} {:>15} {:>15} {:>15}", "cell", "split", "acc", "nmi", "ari");
    for s in &output.summaries {
        println!(
            "{:<60} {:>6} {:>7.4}±{:<7.4} {:>7.4}±{:<7.4} {:>7.4}±{:<7.4}",
            s.cell.id(),
            s.split.as_str(),
            s.acc.mean,
            s.acc.std,
            s.nmi.mean,
            s.nmi.std,
            s.ari.mean,
            s.ari.std
        );
    }
    let failed = output.runs.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} run(s) failed; see results.csv");
    }
}

fn cmd_run(shared: &Shared) -> Result<()> {
    let spec = shared.spec(ExperimentSpec::new("run", &shared.dataset()?)?)?;
    let output = experiments::run(&spec)?;
    print_summary(&output);
    println!("results in {}", spec.out.display());
    Ok(())
}

fn cmd_suite(name: &str, shared: &Shared) -> Result<()> {
    let spec = shared.spec(suite_spec(name)?)?;
    let output = run_suite(&spec)?;
    print_summary(&output);
    println!("results in {}", spec.out.display());
    Ok(())
}

fn cmd_grid(shared: &Shared) -> Result<()> {
    let mut spec = ExperimentSpec::new("grid", &shared.dataset()?)?;
    spec.folds = 1;
    spec.splits = vec![EvalSplit::Val];
    spec.axes.lambda = vec![1.0, 0.5, 0.1, 0.05];
    spec.axes.tau = vec![0.05, 0.1, 0.2, 0.3];
    let mut spec = shared.spec(spec)?;
    if spec.train.regime == Regime::NaivePl && shared.tau.is_none() {
        spec.axes.tau = vec![0.7, 0.8, 0.9, 0.95, 0.99];
    }
    let output = experiments::run(&spec)?;
    print_summary(&output);
    let best = grid_select(&output.summaries, Criterion::ValidationLoss)?;
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "cell": best.cell,
        "val_loss": best.val_loss,
    }))?;
    experiments::write_atomic(&spec.out.join("best.json"), json.as_bytes())?;
    println!("best: {} (val loss {:?})", best.cell.id(), best.val_loss);
    Ok(())
}

fn cmd_eval(checkpoint: &PathBuf, split: &str, shared: &Shared) -> Result<()> {
    let (model, _) = load_checkpoint(checkpoint)?;
    let spec = shared.spec(ExperimentSpec::new("eval", &shared.dataset()?)?)?;
    let split: EvalSplit = split.parse()?;
    let data = DataBundle::load(&spec)?;
    let ds = match split {
        EvalSplit::Train => data.train,
        EvalSplit::Val => data.val.ok_or_else(|| Error::Config("no validation split".into()))?,
        EvalSplit::Test => data.test.ok_or_else(|| Error::Config("no test split".into()))?,
        EvalSplit::TrainTest => {
            let test = data.test.ok_or_else(|| Error::Config("no test split".into()))?;
            dataspace::Dataset::concat(&[&data.train, &test], Split::Train)?
        }
    };
    let labels = ds.labels().ok_or(Error::UnlabeledDataset)?;
    let preds = model.predict(ds.features())?;
    let report = evaluate(&preds, labels, ds.num_classes(), model.n_out(), ds.split())?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_gen_data(shared: &Shared) -> Result<()> {
    let name = shared.dataset()?;
    preset(&name)?;
    let spec = shared.spec(ExperimentSpec::new("data", &name)?)?;
    let out = shared.out.clone().unwrap_or_else(|| PathBuf::from("data").join(&name));
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let data = DataBundle::load(&spec)?;
    let write = |file: &str, ds: &dataspace::Dataset| -> Result<()> {
        let mut buf = Vec::new();
        dataspace::write_dataset(ds, &mut buf)?;
        experiments::write_atomic(&out.join(file), &buf)
    };
    write("train.csv", &data.train)?;
    if let Some(v) = &data.val {
        write("val.csv", v)?;
    }
    if let Some(t) = &data.test {
        write("test.csv", t)?;
    }
    let seeds = experiments::FoldSeeds::new(spec.seed, 0);
    let constraints = dataspace::sample_constraints(&data.train, spec.n_c, seeds.constraints)?;
    let mut buf = Vec::new();
    dataspace::write_constraints(&constraints, &mut buf)?;
    experiments::write_atomic(&out.join("constraints.csv"), &buf)?;
    println!("wrote {} ({} constraints)", out.display(), constraints.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(s) => cmd_run(s),
        Command::Suite { name, shared } => {
            if !suite_names().contains(&name.as_str()) {
                Err(Error::UnknownSuite(name.clone()))
            } else {
                cmd_suite(name, shared)
            }
        }
        Command::Grid(s) => cmd_grid(s),
        Command::Eval { checkpoint, split, shared } => cmd_eval(checkpoint, split, shared),
        Command::GenData(s) => cmd_gen_data(s),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_invalid_input() { 1 } else { 2 })
        }
    }
}
