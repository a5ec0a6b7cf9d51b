use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qgen::corpus::parse_squad;
use qgen::pipeline::{run_pipeline, BackendConfig, PipelineError, RunConfig, ENV_BACKEND_URL};
use qgen::promptgen::HttpBackendConfig;
use qgen::report::{emit_dataset_figures, emit_figures, read_run};
use qgen::textstats::{
    bundled_stopwords, frequent_words, parse_stopwords, question_length_histogram,
};

#[derive(Parser)]
#[command(
    name = "qgen",
    version,
    about = "Prompt-based question generation evaluation harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Mock,
    Http,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, score and aggregate over sampled contexts.
    Run {
        /// Run configuration (JSON), or a manifest.json from an earlier run.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        backend: Option<BackendKind>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        sample_size: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Question-length histogram and keyword frequencies of a dataset.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Stopword file (one token per line); defaults to the bundled list.
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        top_k: usize,
        #[arg(long, default_value_t = 1)]
        bin_width: u32,
    },
    /// Re-emit figure data from a finished run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
        /// Output directory; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Run {
            config,
            seed,
            backend,
            threshold,
            sample_size,
            out,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(threshold) = threshold {
                cfg.threshold = threshold;
            }
            if let Some(n) = sample_size {
                cfg.sample_size = n;
            }
            if let Some(out) = out {
                cfg.out = Some(out);
            }
            match (backend, &cfg.backend) {
                (Some(BackendKind::Mock), _) => cfg.backend = BackendConfig::Mock,
                (Some(BackendKind::Http), BackendConfig::Mock) => {
                    let url = std::env::var(ENV_BACKEND_URL).unwrap_or_default();
                    cfg.backend = BackendConfig::Http(HttpBackendConfig::new(url));
                }
                _ => {}
            }
            cfg.apply_env_overrides();
            let run = run_pipeline(&cfg)?;
            for s in &run.summaries {
                println!(
                    "prompt {}: n={} mean={:.4} median={:.4} matches={}",
                    s.prompt_id, s.n_questions, s.mean, s.median, s.match_count
                );
            }
            println!("results written to {}", cfg.out_dir().display());
            Ok(())
        }
        Command::Stats {
            dataset,
            out,
            stopwords,
            top_k,
            bin_width,
        } => {
            let data_err = |stage: &'static str| {
                move |e: &dyn std::fmt::Display| PipelineError::Data {
                    stage,
                    message: e.to_string(),
                }
            };
            let file = File::open(&dataset).map_err(|e| {
                PipelineError::Config(format!("cannot open {}: {e}", dataset.display()))
            })?;
            let ds = parse_squad(BufReader::new(file)).map_err(|e| data_err("parse")(&e))?;
            let stop = match stopwords {
                Some(path) => {
                    let file = File::open(&path).map_err(|e| {
                        PipelineError::Config(format!("cannot open {}: {e}", path.display()))
                    })?;
                    parse_stopwords(BufReader::new(file)).map_err(|e| data_err("stopwords")(&e))?
                }
                None => bundled_stopwords(),
            };
            let questions: Vec<&str> = ds.questions().map(|q| q.question.as_str()).collect();
            let histogram = question_length_histogram(&questions, bin_width)
                .map_err(|e| data_err("stats")(&e))?;
            let keywords =
                frequent_words(&questions, &stop, top_k).map_err(|e| data_err("stats")(&e))?;
            for path in emit_dataset_figures(&histogram, &keywords, &out)? {
                println!("wrote {}", path.display());
            }
            println!(
                "{} questions, {} length outliers excluded",
                ds.example_count, histogram.excluded_outliers
            );
            Ok(())
        }
        Command::Report { run, out } => {
            let loaded = read_run(&run)?;
            let out = out.unwrap_or(run);
            std::fs::create_dir_all(&out).map_err(|e| PipelineError::Io {
                path: out.clone(),
                message: e.to_string(),
            })?;
            for path in emit_figures(&loaded, &out)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}
