use std::path::PathBuf;

use anyhow::{Context, Result};
use ccpr::exec::Execution;
use ccpr_cli::commands;
use ccpr_cli::config::{self, RawConfig, RawTraining};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ccpr", version, about = "Coded computation with partial recovery: experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count successful score vectors per cumulative type (small K only).
    Enumerate {
        #[command(flatten)]
        common: Common,
        /// Also list types with no successful score vector.
        #[arg(long)]
        all_types: bool,
    },
    /// Monte Carlo estimate of completion time and message count.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Gradient descent on synthetic linear regression.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Dump the computation assignment as JSON.
    Encode {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run trials on one thread.
    #[arg(long)]
    sequential: bool,

    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long = "k")]
    k: Option<usize>,
    /// Degree vector, comma separated.
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    kbar: Option<usize>,
    /// Number of block groups (generalized RCS).
    #[arg(long = "groups")]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    z: Option<Vec<usize>>,
    /// 1-based circular-shift offsets, comma separated.
    #[arg(long, value_delimiter = ',')]
    offsets: Option<Vec<usize>>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Keep one code construction for all trials.
    #[arg(long)]
    fixed_code: bool,

    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    runs: Option<u64>,
}

impl Common {
    fn flags(&self) -> RawConfig {
        let training = RawTraining {
            dim: self.dim,
            samples: self.samples,
            eta: self.eta,
            iterations: self.iterations,
            noise_std: None,
            runs: self.runs,
        };
        RawConfig {
            scheme: self.scheme.clone(),
            mode: self.mode.clone(),
            k: self.k,
            d: self.d.clone(),
            r: self.r,
            kbar: self.kbar,
            n: self.n,
            z: self.z.clone(),
            offsets: self.offsets.clone(),
            q: self.q,
            mu: self.mu,
            alpha: self.alpha,
            trials: self.trials,
            seed: self.seed,
            redraw: self.fixed_code.then_some(false),
            training: (training != RawTraining::default()).then_some(training),
            ..RawConfig::default()
        }
    }

    fn load(&self) -> Result<config::ExperimentConfig> {
        let text = match &self.config {
            Some(path) => Some(std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?),
            None => None,
        };
        Ok(config::parse_layers(text.as_deref(), self.flags())?)
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Enumerate { common, all_types } => {
            let cfg = common.load()?;
            let out = commands::enumerate(&cfg, all_types)?;
            let path = common.out.join("enumerate.csv");
            commands::write_enumerate(&path, &cfg, &out)?;
            println!("{} cumulative types -> {}", out.rows.len(), path.display());
        }
        Command::Simulate { common } => {
            let cfg = common.load()?;
            let report = commands::simulate(&cfg, common.execution())?;
            commands::write_simulate(&common.out, &cfg, &report)?;
            println!(
                "trials={} mean_time={:.4} mean_messages={:.2} success_rate={:.4} -> {}",
                report.trials,
                report.mean_time,
                report.mean_messages,
                report.success_rate,
                common.out.display()
            );
        }
        Command::Train { common } => {
            let cfg = common.load()?.with_training();
            let out = commands::train(&cfg, common.execution())?;
            let path = common.out.join("train.csv");
            commands::write_train(&path, &cfg, &out.mean)?;
            let last = out.mean.records.last().map_or(out.mean.initial_loss, |r| r.loss);
            println!("runs={} final_loss={last:.6e} -> {}", out.runs.len(), path.display());
        }
        Command::Encode { common } => {
            let cfg = common.load()?;
            let out = commands::encode(&cfg)?;
            let path = common.out.join("encode.json");
            commands::write_encode(&path, &out)?;
            println!("{} workers x {} orders -> {}", out.workers, out.orders, path.display());
        }
    }
    Ok(())
}
