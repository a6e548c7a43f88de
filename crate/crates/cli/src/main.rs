use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tweetcast::config::{ConfigError, PipelineConfig, TaskSelection};
use tweetcast::features::Task;
use tweetcast::pipeline::{self, EvalReport, PipelineError, PipelineOutcome};
use tweetcast::synth::{generate, write_bulk_corpus, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "tweetcast", version, about = "Tweet-driven price modelling pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Tweet corpus (delimited text)
    #[arg(long, global = true)]
    tweets: Option<PathBuf>,
    /// Daily close prices (date,close)
    #[arg(long, global = true)]
    prices: Option<PathBuf>,
    /// regression, classification or cluster
    #[arg(long, global = true)]
    task: Option<TaskSelection>,
    /// One roster model by name, or "all"
    #[arg(long, global = true)]
    model: Option<String>,
    /// Output directory for every artifact
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sharded ingest, grid cells and ensembles
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Master seed for every stochastic component
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, filter and aggregate the corpus into day and user rows
    Ingest,
    /// Join prices and write the feature store
    Features,
    /// Cluster users (elbow scan, hierarchical, DBSCAN)
    Cluster,
    /// Grid-search and fit the model roster
    Train,
    /// Score saved models on the held-out days
    Evaluate,
    /// Write metric tables and plot data from the evaluation
    Report,
    /// Every stage for the selected task
    Run,
    /// Write a synthetic corpus with a planted price signal
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Directory receiving tweets.csv and prices.csv
    #[arg(long = "dir", default_value = ".")]
    dir: PathBuf,
    #[arg(long, default_value_t = SynthSpec::default().n_tweets)]
    n_tweets: usize,
    #[arg(long, default_value_t = SynthSpec::default().n_days)]
    n_days: usize,
    /// Instead, write an unlabeled bulk corpus of this many rows to bulk.csv
    #[arg(long)]
    bulk_rows: Option<usize>,
}

fn effective_config(c: &Common) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = &c.tweets {
        cfg.paths.tweets = v.clone();
    }
    if let Some(v) = &c.prices {
        cfg.paths.prices = v.clone();
    }
    if let Some(v) = c.task {
        cfg.task = v;
    }
    if let Some(v) = &c.model {
        cfg.model = v.clone();
    }
    if let Some(v) = &c.out {
        cfg.paths.out = v.clone();
    }
    if let Some(v) = c.workers {
        cfg.workers = v;
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn supervised(cfg: &PipelineConfig) -> Result<Task, PipelineError> {
    cfg.task
        .supervised()
        .ok_or_else(|| ConfigError::Invalid("this stage needs --task regression or classification".into()).into())
}

fn print_report(report: &EvalReport) {
    println!("{}", tweetcast::report::metrics_table(report).trim_end());
}

fn execute(cmd: &Command, cfg: &PipelineConfig) -> Result<(), PipelineError> {
    match cmd {
        Command::Ingest => {
            let s = pipeline::run_ingest(cfg)?;
            println!(
                "read {} rows: kept {}, malformed {}, duplicate {}, out of window {}; {} accepted as {}; {} days, {} users",
                s.stats.rows_read,
                s.stats.rows_kept,
                s.stats.rows_malformed,
                s.stats.rows_duplicate,
                s.stats.rows_out_of_window,
                s.languages.accepted,
                cfg.nlp.language,
                s.days,
                s.users
            );
        }
        Command::Features => {
            let n = pipeline::run_features(cfg)?;
            println!("wrote {n} day rows to {}", pipeline::Layout::new(&cfg.paths.out).feature_store().display());
        }
        Command::Cluster => print_cluster(&pipeline::run_cluster(cfg)?),
        Command::Train => {
            for m in pipeline::run_train(cfg, supervised(cfg)?)? {
                println!("{:<14} cv={:.4}  {}", m.name, m.cv_score, tweetcast::mlcore::format_params(&m.best_params));
            }
        }
        Command::Evaluate => print_report(&pipeline::run_evaluate(cfg, supervised(cfg)?)?),
        Command::Report => {
            for p in pipeline::run_report(cfg, supervised(cfg)?)? {
                println!("{}", p.display());
            }
        }
        Command::Run => match pipeline::run_pipeline(cfg)? {
            PipelineOutcome::Supervised(r) => print_report(&r),
            PipelineOutcome::Cluster(s) => print_cluster(&s),
        },
        Command::Synth(_) => unreachable!("handled before config resolution"),
    }
    Ok(())
}

fn print_cluster(s: &pipeline::ClusterSummary) {
    println!("users: {}", s.users);
    println!("k-means knee: k={}{} sizes {:?}", s.elbow_knee, if s.elbow_low_confidence { " (low confidence)" } else { "" }, s.kmeans_sizes);
    println!("hierarchical on {} sampled users: sizes {:?}", s.sample_rows, s.hierarchical_sizes);
    println!("dbscan eps={:.4} min_pts={}: {} clusters, {} noise", s.dbscan_eps, s.dbscan_min_pts, s.dbscan_clusters, s.dbscan_noise);
}

fn synth(args: &SynthArgs, seed: Option<u64>) -> std::io::Result<()> {
    fs::create_dir_all(&args.dir)?;
    let seed = seed.unwrap_or(tweetcast::rng::DEFAULT_SEED);
    if let Some(rows) = args.bulk_rows {
        let path = args.dir.join("bulk.csv");
        write_bulk_corpus(BufWriter::new(fs::File::create(&path)?), rows, seed)?;
        println!("wrote {rows} rows to {}", path.display());
        return Ok(());
    }
    let spec = SynthSpec { n_tweets: args.n_tweets, n_days: args.n_days, seed, ..SynthSpec::default() };
    let corpus = generate(&spec);
    let write = |name: &str, text: String| -> std::io::Result<()> {
        let path: &Path = &args.dir.join(name);
        fs::write(path, text)?;
        println!("wrote {}", path.display());
        Ok(())
    };
    write("tweets.csv", corpus.tweets_csv())?;
    write("prices.csv", corpus.prices_csv())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Synth(args) = &cli.command {
        if args.n_days < 2 || args.n_tweets == 0 {
            eprintln!("error: synth needs at least 2 days and 1 tweet");
            return ExitCode::from(2);
        }
        return match synth(args, cli.common.seed) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(3)
            }
        };
    }
    let result = effective_config(&cli.common).map_err(PipelineError::from).and_then(|cfg| execute(&cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
