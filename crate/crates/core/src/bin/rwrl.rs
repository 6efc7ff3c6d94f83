use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rwrl::suite::{self, Overrides};

#[derive(Parser)]
#[command(name = "rwrl", version, about = "Seeded batch-RL experiments under real-world challenges")]
struct Cli {
    /// Override the config's master_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use injected latencies for the real-time budget instead of the wall clock.
    #[arg(long, global = true)]
    deterministic_latency: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out the behavior policy and write its dataset.
    GenerateData {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the batch training loop; writes policies, rollouts and a manifest into a directory.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute every metric for a policy file.
    Evaluate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        policy: PathBuf,
        /// Behavior dataset; defaults to the one named in the policy's manifest.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// generate-data, train and evaluate in one output directory.
    Full {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> rwrl::Result<()> {
    let overrides = Overrides {
        seed: cli.seed,
        deterministic_latency: cli.deterministic_latency,
    };
    match cli.command {
        Command::GenerateData { config, out } => {
            let cfg = suite::load_config(&config.config, overrides)?;
            let d = suite::cmd_generate_data(&cfg, &out)?;
            eprintln!("wrote {} transitions to {}", d.transition_count(), out.display());
        }
        Command::Train { config, data, out } => {
            let cfg = suite::load_config(&config.config, overrides)?;
            let m = suite::cmd_train(&cfg, &data, &out)?;
            eprintln!("wrote {} policies to {}; final {}", m.policies.len(), out.display(), m.final_policy);
        }
        Command::Evaluate { config, policy, data, out } => {
            let cfg = suite::load_config(&config.config, overrides)?;
            let r = suite::cmd_evaluate(&cfg, &policy, data.as_deref(), &out)?;
            eprintln!("{}: mean return {:.6}, report in {}", r.policy_id, r.mean_return, out.display());
        }
        Command::Full { config, out } => {
            let cfg = suite::load_config(&config.config, overrides)?;
            let out = out
                .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
                .ok_or_else(|| rwrl::Error::Config("no --out given and no output_dir in the config".into()))?;
            let r = suite::cmd_full(&cfg, &out)?;
            eprintln!("{}: mean return {:.6}, artifacts in {}", r.policy_id, r.mean_return, out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rwrl: {e}");
            ExitCode::from(suite::exit_code(&e) as u8)
        }
    }
}
