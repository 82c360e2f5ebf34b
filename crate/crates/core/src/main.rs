use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use netprice::pipeline;
use netprice::runspec::RunSpec;
use netprice::synth::{self, SynthConfig};
use netprice::Error;

#[derive(Parser)]
#[command(name = "netprice", version, about = "College net-price regression benchmark")]
struct Cli {
    /// Override the run-spec seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Maximum worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, concatenate and label the input files; write a snapshot.
    Ingest {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Tune, fit and evaluate every enabled estimator under each validator.
    Train {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Rank the rows of a training report.
    Compare {
        #[arg(long = "in")]
        input: PathBuf,
        /// Print the aligned text table instead of JSON.
        #[arg(long)]
        text: bool,
    },
    /// Permutation feature importance of a saved model on the test split.
    Importance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        spec: PathBuf,
    },
    /// Write synthetic scorecard CSV files for trying the pipeline out.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5000)]
        rows: usize,
        #[arg(long, value_delimiter = ',', default_value = "2015,2016")]
        years: Vec<i64>,
    },
}

fn load_spec(path: &Path, seed: Option<u64>) -> Result<RunSpec, Error> {
    let mut spec = RunSpec::load(path)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Ingest { spec } => {
            let spec = load_spec(&spec, cli.seed)?;
            let (_, report) = pipeline::cmd_ingest(&spec)?;
            println!(
                "read {} rows from {} files; dropped {} without net price, {} by label policy; kept {}",
                report.rows_read,
                report.sources.len(),
                report.rows_dropped_no_label,
                report.rows_dropped_by_policy,
                report.rows_kept
            );
            for c in &report.columns_dropped_for_missingness {
                println!("dropped column {} ({:.1}% missing)", c.name, 100.0 * c.missing_fraction);
            }
            println!("snapshot: {}", pipeline::snapshot_path(&spec).display());
        }
        Command::Train { spec } => {
            let spec = load_spec(&spec, cli.seed)?;
            let report = pipeline::cmd_train(&spec)?;
            let comparison = netprice::report::compare(&report.rows)?;
            print!("{}", comparison.to_text());
            println!(
                "report: {}",
                spec.output_dir.join(pipeline::REPORT_FILE).display()
            );
        }
        Command::Compare { input, text } => {
            let c = pipeline::cmd_compare(&input)?;
            if text {
                print!("{}", c.to_text());
            } else {
                let json = serde_json::to_string_pretty(&c)
                    .map_err(|e| Error::Json {
                        context: "comparison".into(),
                        source: e,
                    })?;
                println!("{json}");
            }
        }
        Command::Importance { model, spec } => {
            let spec = load_spec(&spec, cli.seed)?;
            let report = pipeline::cmd_importance(&model, &spec)?;
            print!("{}", report.to_text());
        }
        Command::Synth { out, rows, years } => {
            let cfg = SynthConfig {
                rows,
                years,
                seed: cli.seed.unwrap_or(42),
                ..Default::default()
            };
            for f in synth::write_files(&out, &cfg)? {
                println!("{} (year {})", f.path.display(), f.year);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
