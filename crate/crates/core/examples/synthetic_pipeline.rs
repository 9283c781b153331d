//! Full pipeline on a seeded synthetic dataset with a known clock rate.
//!
//! cargo run --release --example synthetic_pipeline -- [OUT_DIR] [SEED]

use mutarate::pipeline::{run_pipeline, PipelineConfig};
use mutarate::simulate::SimulationConfig;

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synthetic-out".into());
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(42);

    let sim = SimulationConfig::default();
    let truth = sim.rate_per_day;
    let cfg = PipelineConfig {
        synthetic: Some(sim),
        out_dir: out.into(),
        seed,
        ..PipelineConfig::default()
    };
    let report = run_pipeline(&cfg)?;
    for r in &report.representatives {
        println!("{}  {:<8} score {:>9.3}", r.year, r.label, r.score);
    }
    println!(
        "fitted rate {:.3e}/day ({:.3e}/year), simulated {:.3e}/day",
        report.fit.rate_per_day, report.fit.rate_per_year, truth
    );
    for (stage, secs) in &report.timings {
        println!("{stage:>10} {secs:.3}s");
    }
    Ok(())
}
