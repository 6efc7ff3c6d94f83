//! Run the three experiment phases from a config file, the same way the
//! `rwrl full` command does, and print the headline metrics.
//!
//!     cargo run --release --example full_suite -- configs/gridworld.toml /tmp/rwrl-grid

use std::path::PathBuf;

use rwrl::suite::{cmd_evaluate, cmd_generate_data, cmd_train, load_config, Overrides};

fn main() -> rwrl::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/gridworld.toml"));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("rwrl-full-suite"));

    let cfg = load_config(&config, Overrides { seed: None, deterministic_latency: true })?;
    let data_path = out.join("behavior.rwrl.jsonl");
    let data = cmd_generate_data(&cfg, &data_path)?;
    println!("behavior data: {} transitions in {} episodes", data.transition_count(), data.trajectories.len());

    let manifest = cmd_train(&cfg, &data_path, &out)?;
    println!("policies: {:?}", manifest.policies);

    let report = cmd_evaluate(&cfg, &out.join(&manifest.final_policy), None, &out)?;
    println!("{} mean return {:.4}", report.policy_id, report.mean_return);
    println!("warm start {:.4}, data efficiency {:?}", report.warm_start, report.data_efficiency.value);
    println!("robust {:.4}, worst case {:.4}", report.robust, report.worst_case);
    for (alpha, v) in &report.cvar {
        println!("cvar {alpha}: {v:.4}");
    }
    for est in &report.ope {
        println!("{:?}: {:.4}", est.estimator, est.value);
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
