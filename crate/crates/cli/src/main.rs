use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use kano_core::adapter::{self, Endpoint};
use kano_core::classifiers::{self, ClassifierKind, ClassifierSpec, TrainingContext};
use kano_core::corpus::{self, InputFormat, Mapping};
use kano_core::experiments::{
    self, emit_report, EvaluationReport, ExperimentConfig, ReportFormat, SourceFormat,
};
use kano_core::TrainedClassifier;

/// Environment variable naming the adapter executable for `adapter` classifiers
/// that do not specify an endpoint.
const ADAPTER_ENV: &str = "KANO_ADAPTER";
/// Directory that replaces the directory part of every configured dataset path.
const DATA_DIR_ENV: &str = "KANO_DATA_DIR";
const CONFIG_DIR_ENV: &str = "KANO_CONFIG_DIR";

#[derive(Parser)]
#[command(
    name = "kano",
    version,
    about = "Classify app reviews into Kano-model factors"
)]
struct Cli {
    /// Increase diagnostic output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a labeled CSV or JSON-lines export into the canonical dataset format.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: Format,
        /// Column mapping (TOML). Defaults to the canonical field names.
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Remove reviews without words, non-English reviews and duplicates.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Print per-rule removal counts.
        #[arg(long)]
        stats: bool,
    },
    /// Train a classifier on a canonical dataset and save it.
    Train {
        #[arg(long)]
        classifier: ClassifierKind,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Inverse regularization strength (logreg).
        #[arg(long = "C", alias = "c")]
        c: Option<f64>,
        #[arg(long)]
        max_iter: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
        /// Start the optimizer from a random point drawn with this seed (logreg).
        #[arg(long)]
        init_seed: Option<u64>,
        /// Adapter endpoint: mock[:majority|:echo|:constant=LABEL], stdio:PROGRAM ARGS, tcp:HOST:PORT.
        #[arg(long)]
        endpoint: Option<String>,
    },
    /// Predict the label of one or more texts with a saved classifier.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, required = true)]
        text: Vec<String>,
    },
    /// Run an evaluation protocol and write report.md, report.csv and runs.json.
    Experiment {
        /// Config file, or the name of a config shipped in configs/.
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: PathBuf,
        /// Base seed; run i uses seed + i. Defaults to the config's base seed (42).
        #[arg(long)]
        seed: Option<u64>,
        /// Number of undersampling runs.
        #[arg(long)]
        runs: Option<usize>,
        /// Override a dataset path: NAME=PATH (`.jsonl` files are read as canonical datasets).
        #[arg(long = "dataset", value_name = "NAME=PATH")]
        datasets: Vec<String>,
        /// Run folds in parallel.
        #[arg(long, conflicts_with = "sequential")]
        parallel: bool,
        /// Run folds one after another.
        #[arg(long)]
        sequential: bool,
    },
    /// Render a finished experiment as a table.
    Report {
        /// Experiment output directory or its runs.json.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "md")]
        format: String,
    },
    /// Serve the mock adapter protocol on stdin/stdout.
    #[command(hide = true)]
    MockAdapter {
        /// majority, echo or constant=LABEL
        #[arg(long, default_value = "majority")]
        behavior: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            input,
            format,
            map,
            out,
        } => {
            let mapping = match map {
                Some(p) => Mapping::load(&p)?,
                None => Mapping::canonical(),
            };
            let format = match format {
                Format::Csv => InputFormat::Csv,
                Format::Jsonl => InputFormat::Jsonl,
            };
            let data = corpus::ingest(&input, format, &mapping)?;
            corpus::write_jsonl(&data, &out)?;
            eprintln!("ingested {} reviews into {}", data.len(), out.display());
        }
        Command::Preprocess { input, out, stats } => {
            let data = corpus::read_jsonl(&input)?;
            let (clean, counts) = corpus::preprocess(&data);
            corpus::write_jsonl(&clean, &out)?;
            if stats {
                println!("{counts}");
            }
        }
        Command::Train {
            classifier,
            data,
            out,
            c,
            max_iter,
            tol,
            init_seed,
            endpoint,
        } => {
            let mut spec = ClassifierSpec::new(classifier);
            if let Some(c) = c {
                spec = spec.with("C", c);
            }
            if let Some(n) = max_iter {
                spec = spec.with("max_iter", n);
            }
            if let Some(t) = tol {
                spec = spec.with("tol", t);
            }
            if let Some(s) = init_seed {
                spec = spec.with("init_seed", s);
            }
            if let Some(e) = endpoint {
                spec = spec.with("endpoint", e);
            }
            fill_adapter_endpoint(&mut spec)?;
            let dataset = corpus::read_jsonl(&data)?;
            let context = TrainingContext::new();
            let trained = classifiers::train(&spec, &dataset, &context)
                .with_context(|| format!("training {}", spec.display_name()))?;
            if let classifiers::FittedState::LogisticRegression(lr) = &trained.state {
                let s = lr.summary();
                eprintln!(
                    "logistic regression: {} iterations, loss {:.6}, converged: {}",
                    s.iterations, s.final_loss, s.converged
                );
            }
            trained.save(&out)?;
            eprintln!("saved {} to {}", trained.name(), out.display());
        }
        Command::Predict { model, text } => {
            let trained = TrainedClassifier::load(&model)?;
            let texts: Vec<&str> = text.iter().map(String::as_str).collect();
            let labels = trained.predict_batch(&texts)?;
            let mut stdout = BufWriter::new(io::stdout().lock());
            for label in labels {
                writeln!(stdout, "{} ({})", label.name(), label.code())?;
            }
        }
        Command::Experiment {
            config,
            out,
            seed,
            runs,
            datasets,
            parallel,
            sequential,
        } => {
            let path = resolve_config(&config)?;
            let mut cfg = ExperimentConfig::load(&path)?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(n) = runs {
                cfg.n_undersample_runs = n;
            }
            if parallel {
                cfg.parallel = true;
            }
            if sequential {
                cfg.parallel = false;
            }
            if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
                for source in cfg.datasets.values_mut() {
                    let file = source
                        .path
                        .file_name()
                        .map(PathBuf::from)
                        .unwrap_or_default();
                    source.path = Path::new(&dir).join(file);
                }
            }
            for assignment in &datasets {
                override_dataset(&mut cfg, assignment)?;
            }
            for spec in &mut cfg.classifiers {
                fill_adapter_endpoint(spec)?;
            }
            eprintln!(
                "experiment {} ({}), seed {}, {} run(s)",
                path.display(),
                cfg.protocol,
                cfg.base_seed,
                cfg.n_undersample_runs
            );
            let report = experiments::run_config(&cfg)?;
            report.write_to_dir(&out)?;
            for c in &report.classifiers {
                eprintln!("{}: accuracy {:.3}", c.name, c.mean.accuracy);
            }
            eprintln!("wrote report to {}", out.display());
        }
        Command::Report { input, format } => {
            let format: ReportFormat = format.parse().map_err(|e: String| anyhow!(e))?;
            let report = EvaluationReport::read(&input)?;
            print!("{}", emit_report(&report, format));
        }
        Command::MockAdapter { behavior } => {
            let endpoint: Endpoint = format!("mock:{behavior}").parse()?;
            let Endpoint::Mock(behavior) = endpoint else {
                unreachable!("mock scheme parses to a mock endpoint")
            };
            adapter::serve_mock(behavior, io::stdin().lock(), io::stdout().lock())?;
        }
    }
    Ok(())
}

/// Accepts a path to a config file or the stem of a config in the shipped
/// configs directory.
fn resolve_config(name: &str) -> Result<PathBuf> {
    let direct = PathBuf::from(name);
    if direct.is_file() {
        return Ok(direct);
    }
    let file = if name.ends_with(".json") {
        name.to_string()
    } else {
        format!("{name}.json")
    };
    let mut dirs = Vec::new();
    if let Ok(dir) = std::env::var(CONFIG_DIR_ENV) {
        dirs.push(PathBuf::from(dir));
    }
    dirs.push(PathBuf::from("configs"));
    dirs.push(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs"));
    dirs.iter()
        .map(|d| d.join(&file))
        .find(|p| p.is_file())
        .ok_or_else(|| anyhow!("no config file `{name}` (looked in {})", describe(&dirs)))
}

fn describe(dirs: &[PathBuf]) -> String {
    dirs.iter()
        .map(|d| d.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn override_dataset(cfg: &mut ExperimentConfig, assignment: &str) -> Result<()> {
    let (name, path) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("--dataset expects NAME=PATH, got `{assignment}`"))?;
    let path = PathBuf::from(path);
    let canonical = path.extension().is_some_and(|e| e == "jsonl");
    let source =
        cfg.datasets
            .entry(name.to_string())
            .or_insert_with(|| experiments::DatasetSource {
                path: path.clone(),
                format: SourceFormat::Canonical,
                mapping: None,
                preprocessed: false,
            });
    source.path = path;
    if canonical {
        source.format = SourceFormat::Canonical;
        source.mapping = None;
    }
    Ok(())
}

fn fill_adapter_endpoint(spec: &mut ClassifierSpec) -> Result<()> {
    if spec.kind != ClassifierKind::Adapter || spec.hyperparameters.contains_key("endpoint") {
        return Ok(());
    }
    match std::env::var(ADAPTER_ENV) {
        Ok(program) if !program.is_empty() => {
            spec.hyperparameters
                .insert("endpoint".into(), format!("stdio:{program}").into());
            Ok(())
        }
        _ => bail!("adapter classifier needs --endpoint or the {ADAPTER_ENV} environment variable"),
    }
}
