use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sentcompare::cli::{self, ExperimentConfig, Scheme};
use sentcompare::combiner::Method;
use sentcompare::encoder::Pooling;

#[derive(Parser)]
#[command(name = "sentcompare", version, about = "Train and evaluate toy sentence encoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split an STS file by source or by Dice quantile
    Partition(Common),
    /// Train one checkpoint per seed
    Train(Common),
    /// Write embedding dumps for a sentences file
    Embed(Common),
    /// STS and probing report for one provider (seed runs are averaged)
    Eval(Common),
    /// Compare two providers with their average and concatenation
    CombineEval(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seed list
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// none, sbert, defsent, s+d, d+s, multi, average, concat
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    pooling: Option<Pooling>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    nli: Option<PathBuf>,
    #[arg(long)]
    definitions: Option<PathBuf>,
    #[arg(long)]
    sts: Option<PathBuf>,
    #[arg(long)]
    partition_dir: Option<PathBuf>,
    #[arg(long)]
    sentences: Option<PathBuf>,
    /// Labeled probe task file (repeatable)
    #[arg(long)]
    probe: Vec<PathBuf>,
    /// Checkpoint or embedding dump (repeatable)
    #[arg(long)]
    provider: Vec<PathBuf>,
    /// Partition scheme: source or dice
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Number of Dice groups
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

impl Common {
    fn resolve(self) -> sentcompare::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(s) = self.seeds {
            cfg.seeds = s;
        }
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(p) = self.pooling {
            cfg.pooling = p;
        }
        if let Some(d) = self.dim {
            cfg.dim = d;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        let d = &mut cfg.data;
        for (flag, slot) in [
            (self.nli, &mut d.nli),
            (self.definitions, &mut d.definitions),
            (self.sts, &mut d.sts),
            (self.partition_dir, &mut d.partition_dir),
            (self.sentences, &mut d.sentences),
        ] {
            if flag.is_some() {
                *slot = flag;
            }
        }
        if !self.probe.is_empty() {
            d.probe = self.probe;
        }
        if !self.provider.is_empty() {
            cfg.providers = self.provider;
        }
        if let Some(s) = self.scheme {
            cfg.partition.scheme = s;
        }
        if let Some(k) = self.k {
            cfg.partition.k = k;
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(lr) = self.lr {
            cfg.train.lr = lr;
        }
        if let Some(b) = self.batch_size {
            cfg.train.batch_size = b;
        }
        Ok(cfg)
    }
}

fn run(command: Command) -> sentcompare::Result<()> {
    match command {
        Command::Partition(c) => {
            let summary = cli::cmd_partition(&c.resolve()?)?;
            print!("{}", summary.to_markdown());
        }
        Command::Train(c) => {
            let out = cli::cmd_train(&c.resolve()?)?;
            for p in out.checkpoints {
                println!("{}", p.display());
            }
        }
        Command::Embed(c) => {
            for p in cli::cmd_embed(&c.resolve()?)? {
                println!("{}", p.display());
            }
        }
        Command::Eval(c) => print!("{}", cli::cmd_eval(&c.resolve()?)?.to_markdown()),
        Command::CombineEval(c) => print!("{}", cli::cmd_combine_eval(&c.resolve()?)?.to_markdown()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
