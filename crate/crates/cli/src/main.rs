use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use schemadraft_core::config::RunConfig;
use schemadraft_core::metrics::{Aggregation, Direction, RecallConfig};
use schemadraft_core::pipeline::{self, ErrorCategory, GenerateMode, PipelineError};

/// Draft event schemas with a language model and score them against gold schemas.
#[derive(Parser)]
#[command(name = "schemadraft", version)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate schemas for one domain.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        domain: String,
        /// zero, one, union or simple-triplet.
        #[arg(long, default_value = "zero")]
        mode: GenerateMode,
        /// Output directory; defaults to the configured schemas directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predicted schemas against gold schemas.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        gold: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        pred: Vec<PathBuf>,
        #[command(flatten)]
        recall: RecallFlags,
        /// Output directory; defaults to `<reports_dir>/<run_id>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mutual recall between two schemas.
    Overlap {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[command(flatten)]
        recall: RecallFlags,
        /// Write the full overlap report here as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample pairs for annotation, or compute agreement from judgments.
    Agreement {
        /// Directory searched recursively for `*.report.json`.
        #[arg(long, requires = "sample", conflicts_with = "import")]
        reports: Option<PathBuf>,
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Judgments CSV: pair_id, annotator_id, judgment.
        #[arg(long = "import")]
        import: Option<PathBuf>,
        #[arg(long, default_value = "all")]
        condition: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RecallFlags {
    /// any-directional or bidirectional.
    #[arg(long)]
    direction: Option<Direction>,
    /// hard or soft.
    #[arg(long)]
    aggregation: Option<Aggregation>,
    #[arg(long)]
    tau: Option<f64>,
}

impl RecallFlags {
    fn apply(&self, mut cfg: RecallConfig) -> RecallConfig {
        if let Some(d) = self.direction {
            cfg.direction = d;
        }
        if let Some(a) = self.aggregation {
            cfg.aggregation = a;
        }
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        cfg
    }
}

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Other => 1,
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Transport => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.category()))
        }
    }
}

fn load(config: &Path) -> Result<RunConfig, PipelineError> {
    Ok(RunConfig::load(config)?)
}

fn run(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Generate {
            config,
            domain,
            mode,
            out,
        } => {
            let cfg = load(&config)?;
            let client = cfg.generation_client()?;
            let out = out.unwrap_or_else(|| cfg.paths.schemas_dir.clone());
            let outcome = pipeline::generate(&cfg, &client, &domain, mode, &out)?;
            for path in outcome.files.iter().chain(&outcome.merged) {
                println!("{}", path.display());
            }
            for skipped in &outcome.skipped {
                eprintln!("skipped {skipped}");
            }
            info!("{} provider calls", client.provider_calls());
        }
        Command::Evaluate {
            config,
            gold,
            pred,
            recall,
            out,
        } => {
            let cfg = load(&config)?;
            let recall = recall.apply(cfg.evaluation);
            let out = match out {
                Some(dir) => dir,
                None => {
                    let inputs: Vec<PathBuf> = gold.iter().chain(&pred).cloned().collect();
                    let mut digests = pipeline::input_digests(&inputs)?;
                    digests.push(format!("{recall:?}"));
                    let refs: Vec<&str> = digests.iter().map(String::as_str).collect();
                    cfg.reports_dir(&cfg.run_id(&refs))
                }
            };
            let scorer = cfg.entailment_scorer()?;
            let outcome = pipeline::evaluate(&scorer, &gold, &pred, &recall, &out)?;
            for row in &outcome.summaries {
                println!(
                    "{}\t{}\t{}\t{:.4}±{:.4}\tn={}",
                    row.domain, row.system, row.gold_dataset, row.summary.mean, row.summary.std, row.summary.n
                );
            }
            println!("reports: {}", out.display());
        }
        Command::Overlap {
            config,
            a,
            b,
            recall,
            out,
        } => {
            let cfg = load(&config)?;
            let recall = recall.apply(cfg.evaluation);
            let scorer = cfg.entailment_scorer()?;
            let report = pipeline::overlap(&scorer, &a, &b, &recall)?;
            let (ab, ba) = report.recalls();
            println!("a_given_b\t{ab}\nb_given_a\t{ba}");
            if let Some(path) = out {
                let body = serde_json::to_string_pretty(&report).expect("report serializes");
                std::fs::write(&path, body + "\n").map_err(|source| PipelineError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            }
        }
        Command::Agreement {
            reports,
            sample,
            seed,
            import,
            condition,
            out,
        } => match (reports, sample, import) {
            (Some(dir), Some(k), None) => {
                let pairs = pipeline::sample_for_annotation(&dir, k, seed, &out)?;
                println!("{} pairs written to {}", pairs.len(), out.join("pairs.csv").display());
            }
            (None, None, Some(csv)) => {
                let stats = pipeline::import_annotations(&csv, &condition, &out)?;
                println!(
                    "majority_vote\t{}\nat_least_one\t{}\nkrippendorff_alpha\t{}",
                    stats.majority_vote, stats.at_least_one, stats.alpha.alpha
                );
            }
            _ => {
                return Err(PipelineError::Usage(
                    "use either --reports DIR --sample K [--seed N] or --import CSV".into(),
                ))
            }
        },
    }
    Ok(())
}
