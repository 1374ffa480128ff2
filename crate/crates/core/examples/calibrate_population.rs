//! Builds a calibrated super-population, reports the calibration and the
//! true estimands, and round-trips it through the binary format.
//!
//! `cargo run --release --example calibrate_population [pz] [py0] [size]`

use psvar::dgp::{
    build_population, load_population, save_population, true_estimands, CalibrationTargets, PopulationMeta, TruthMode,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let arg = |i: usize, default: f64| std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let targets = CalibrationTargets::new(arg(1, 0.3), arg(2, 0.2));
    let size = arg(3, 200_000.0) as usize;
    let seed = 17;

    let (sp, calib) = build_population(size, seed, targets)?;
    println!("{size} subjects, seed {seed}");
    println!(
        "intercepts: treatment model {:.6}, outcome model {:.6}; treatment log-odds ratio {:.6}",
        calib.alpha0_treat, calib.alpha0_outcome, calib.alpha_treat
    );
    println!("achieved Pr(Z=1) {:.6}, Pr(Y(0)=1) {:.6}, risk difference {:.6}", calib.achieved.pz, calib.achieved.py0, calib.achieved.ate);
    println!("realized treated share {:.5}", sp.realized_prevalence());
    for mode in [TruthMode::Realized, TruthMode::Expected] {
        let t = true_estimands(&sp, mode);
        println!("{mode:?} truth: ATE {:.5}, ATO {:.5}", t.ate, t.ato);
    }

    let dir = std::env::temp_dir().join("psvar-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("population.bin");
    save_population(&path, &sp, &PopulationMeta::new(&sp, seed, targets, calib))?;
    let (back, meta) = load_population(&path)?;
    println!("saved to {} and read back: identical {}, format {}", path.display(), back == sp, meta.format);
    Ok(())
}
