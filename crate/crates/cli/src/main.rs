//! `imbal`: split, enhance, train, sweep, evaluate and predict from TOML configs.
//!
//! Exit codes: 0 success, 1 config error, 2 data error, 3 run failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use imbal_core::corpus::load_olid;
use imbal_core::runner::{
    evaluate, label_codes, predict_file, run_experiment, run_grid, write_augmented, write_evaluation, write_split,
    DEFAULT_OUTPUT,
};
use imbal_core::{Error, ErrorCategory, ExperimentConfig, GridSpec, Predictor, RunResult};

#[derive(Parser)]
#[command(name = "imbal", version, about = "Imbalanced offensive-tweet classification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the stratified train/dev split as OLID TSVs.
    Split {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "split")]
        out: PathBuf,
    },
    /// Write the text-level enhanced training set.
    Augment {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "augmented")]
        out: PathBuf,
    },
    /// Train one experiment and score it on dev (and `--test` when given).
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output root; the run lands in `<out>/<fingerprint>/`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Labeled OLID TSV scored after training.
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Run every cell of a grid config, skipping cells already completed.
    Grid {
        /// Grid config (TOML with `[base]` and `[axes]`).
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed of every cell without a seed axis.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a saved model on a labeled OLID TSV.
    Eval {
        /// Model artifact (`model.json`).
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Also write metrics, report and confusion files here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label an `id`/`tweet` TSV with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Rank the completed runs under an output root.
    Report {
        #[arg(long, default_value = DEFAULT_OUTPUT)]
        out: PathBuf,
    },
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Io { path, source } => Error::Config(format!("cannot read {}: {source}", path.display())),
        other => other,
    }
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, Error> {
    let mut c = ExperimentConfig::load(&args.config).map_err(config_error)?;
    if let Some(s) = args.seed {
        c.seed = s;
    }
    Ok(c)
}

fn report(out: &Path) -> Result<(), Error> {
    let entries = std::fs::read_dir(out).map_err(|e| Error::io(out, e))?;
    let mut results = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(out, e))?.path().join("result.json");
        if path.is_file() {
            results.push(RunResult::load(&path)?);
        }
    }
    results.sort_by(|a, b| b.macro_f1.total_cmp(&a.macro_f1).then_with(|| a.fingerprint.cmp(&b.fingerprint)));
    println!("rank,fingerprint,name,task,seed,macro_f1,recall");
    for (i, r) in results.iter().enumerate() {
        let recall: Vec<String> = r.dev.classes.iter().map(|c| format!("{:.5}", c.recall)).collect();
        println!(
            "{},{},{},{},{},{:.5},{}",
            i + 1,
            r.fingerprint,
            r.name,
            r.task,
            r.seed,
            r.macro_f1,
            recall.join(";")
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Split { config, out } => {
            let c = load_config(&config)?;
            let (train, dev) = write_split(&c, &out)?;
            println!("wrote {} and {}", train.display(), dev.display());
        }
        Command::Augment { config, out } => {
            let c = load_config(&config)?;
            let path = write_augmented(&c, &out)?;
            println!("wrote {}", path.display());
        }
        Command::Train { config, out, test } => {
            let mut c = load_config(&config)?;
            if test.is_some() {
                c.data.test = test;
            }
            let r = run_experiment(&c, out.as_deref())?;
            print!("{}", r.dev.render_text(&label_codes(r.task)));
            if let Some(t) = &r.test {
                println!("test macro-F1 {:.5}", t.macro_f1);
            }
            println!("run {} -> {}", r.fingerprint, r.run_dir.display());
        }
        Command::Grid { config, seed, jobs, out } => {
            let mut spec = GridSpec::load(&config).map_err(config_error)?;
            if let Some(s) = seed {
                spec.base.seed = s;
            }
            let out = out
                .or_else(|| spec.base.output.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
            let g = run_grid(&spec, &out, jobs)?;
            println!(
                "{} computed, {} resumed, {} failed -> {}",
                g.computed,
                g.skipped,
                g.failed,
                g.table.display()
            );
            if g.failed > 0 {
                return Err(Error::InvalidInput(format!("{} grid cells failed", g.failed)));
            }
        }
        Command::Eval { model, test, out } => {
            let predictor = Predictor::load(&model)?;
            let task = predictor.task();
            let data = load_olid(&test, task)?;
            let (matrix, r) = evaluate(&predictor, &data)?;
            let labels = label_codes(task);
            print!("{}", r.render_text(&labels));
            for w in r.warnings(&labels) {
                eprintln!("warning: {w}");
            }
            if let Some(dir) = out {
                write_evaluation(&dir, "", task, &matrix, &r)?;
            }
        }
        Command::Predict { model, input, output } => {
            let n = predict_file(&model, &input, &output)?;
            println!("labeled {n} rows -> {}", output.display());
        }
        Command::Report { out } => report(&out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.category() {
                ErrorCategory::Config => 1,
                ErrorCategory::Data => 2,
                ErrorCategory::Run => 3,
            })
        }
    }
}
