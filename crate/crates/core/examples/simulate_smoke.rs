//! Runs a simulation configuration and prints its metrics table.
//!
//! `cargo run --release --example simulate_smoke [config.toml]`
//!
//! Defaults to `examples/configs/smoke.toml`. The full grid lives in
//! `examples/configs/full_grid.toml` and takes days on one core.

use std::path::PathBuf;

use psvar::harness::{run_simulation, write_metrics_csv, SimulationConfig};

fn main() -> psvar::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/smoke.toml"));
    let cfg = SimulationConfig::load(&path)?;
    let seed = cfg.seed.unwrap_or(2024);
    let results = run_simulation(&cfg, seed, |r| {
        eprintln!("scenario {} (n={}, pz={}, py0={}): {} failed reps", r.scenario.id, r.scenario.n, r.scenario.pz, r.scenario.py0, r.rep_failures)
    })?;
    write_metrics_csv(std::io::stdout().lock(), &results)
}
