use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use psvar::analysis::{AnalysisSettings, Augmentation, MethodSpec, VarianceMethod};
use psvar::ci::CiMethod;
use psvar::data::Dataset;
use psvar::dgp::{
    build_population, export_population_csv, save_population, CalibrationTargets, PopulationMeta, DEFAULT_POPULATION_SIZE,
};
use psvar::estimators::WeightScheme;
use psvar::harness::{run_simulation, write_metrics_csv, write_reps_csv, SimulationConfig};
use psvar::report::{analyze_dataset, write_report_csv, write_report_json, Subgroup};
use psvar::Error;

const EXIT_GROUP_ERRORS: u8 = 4;
const WORKERS_ENV: &str = "PSVAR_WORKERS";

/// Variance estimation for propensity-score weighted treatment effects.
#[derive(Parser)]
#[command(name = "psvar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate treatment effects on a CSV dataset.
    Analyze(AnalyzeArgs),
    /// Run a Monte Carlo study described by a TOML config.
    Simulate(SimulateArgs),
    /// Calibrate a super-population to target prevalences.
    Calibrate(CalibrateArgs),
    /// List variance methods and interval types.
    Methods,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    outcome: String,
    #[arg(long)]
    treatment: String,
    /// Comma-separated covariates; defaults to every other column.
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// ate or ato.
    #[arg(long, default_value = "ate")]
    estimand: String,
    /// Methods as `variance[:ci]`, e.g. `ns`, `boot-std-est:pct`.
    #[arg(long = "method", value_delimiter = ',', default_value = "fs,ns,boot-std-fixed,boot-std-est,boot-std-est:pct")]
    methods: Vec<String>,
    /// Augment every method with an outcome model on these covariates.
    #[arg(long, value_delimiter = ',')]
    augment: Option<Vec<String>>,
    #[arg(long, default_value_t = 1000)]
    bootstrap_reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Outcome model handling inside bootstrap replicates: refit or none.
    #[arg(long, default_value = "refit")]
    outcome_model_mode: String,
    /// Also report each level of this column separately. The column enters
    /// the overall propensity model only if it is among the covariates.
    #[arg(long)]
    subgroup: Option<String>,
    /// CSV report path; a JSON mirror is written next to it.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    pz: f64,
    #[arg(long)]
    py0: f64,
    #[arg(long, default_value_t = -0.02)]
    ate: f64,
    #[arg(long, default_value_t = DEFAULT_POPULATION_SIZE)]
    size: usize,
    #[arg(long)]
    seed: u64,
    /// Save the realized population (binary file plus JSON sidecar).
    #[arg(long)]
    save: Option<PathBuf>,
    /// Export the realized population as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io { path: path.into(), source })
}

fn json_mirror(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn analyze(args: AnalyzeArgs) -> Result<u8, Error> {
    let covariates: Vec<String> = match args.covariates {
        Some(c) => c,
        None => Dataset::csv_headers(&args.data)?
            .into_iter()
            .filter(|h| *h != args.outcome && *h != args.treatment)
            .collect(),
    };
    let mut cov_refs: Vec<&str> = covariates.iter().map(String::as_str).collect();
    let subgroup = args.subgroup.as_deref().map(|column| Subgroup { column, adjust: cov_refs.contains(&column) });
    if let Some(sg) = subgroup.filter(|sg| !sg.adjust) {
        cov_refs.push(sg.column);
    }
    let d = Dataset::load_csv(&args.data, &args.outcome, &args.treatment, &cov_refs)?;
    let scheme: WeightScheme = args.estimand.parse()?;
    let mut methods = args.methods.iter().map(|m| MethodSpec::parse(scheme, m)).collect::<Result<Vec<_>, _>>()?;
    if let Some(aug) = args.augment {
        for m in &mut methods {
            m.augmentation = Augmentation::Custom(aug.clone());
            m.validate()?;
        }
    }
    let mut settings = AnalysisSettings::new(args.bootstrap_reps, args.seed);
    settings.level = args.level;
    settings.outcome_model_mode = args.outcome_model_mode.parse()?;

    let rows = analyze_dataset(&d, subgroup, &methods, &settings)?;
    match &args.output {
        Some(path) => {
            write_report_csv(create(path)?, &rows)?;
            write_report_json(create(&json_mirror(path))?, &rows)?;
        }
        None => write_report_csv(std::io::stdout().lock(), &rows)?,
    }
    Ok(if rows.iter().any(|r| r.is_error()) { EXIT_GROUP_ERRORS } else { 0 })
}

fn simulate(args: SimulateArgs) -> Result<u8, Error> {
    let cfg = SimulationConfig::load(&args.config)?;
    let results = run_simulation(&cfg, args.seed, |r| {
        let s = &r.scenario;
        let ratios: Vec<String> = r
            .metrics
            .iter()
            .map(|m| format!("{}/{}={}", m.method.scheme, m.method.label(), m.se_ratio.map_or("-".into(), |v| format!("{v:.3}"))))
            .collect();
        eprintln!(
            "scenario {} n={} pz={} py0={} reps_ok={} failed={} se_ratio: {}",
            s.id,
            s.n,
            s.pz,
            s.py0,
            s.reps - r.rep_failures,
            r.rep_failures,
            ratios.join(" ")
        );
    })?;
    write_metrics_csv(create(&cfg.output.metrics)?, &results)?;
    if let Some(path) = &cfg.output.reps {
        write_reps_csv(create(path)?, &results)?;
    }
    Ok(0)
}

fn calibrate(args: CalibrateArgs) -> Result<u8, Error> {
    let targets = CalibrationTargets { pz: args.pz, py0: args.py0, ate: args.ate };
    let (sp, calib) = build_population(args.size, args.seed, targets)?;
    let meta = PopulationMeta::new(&sp, args.seed, targets, calib);
    if let Some(path) = &args.save {
        save_population(path, &sp, &meta)?;
    }
    if let Some(path) = &args.csv {
        export_population_csv(&sp, create(path)?)?;
    }
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &meta)?;
    writeln!(out).map_err(|source| Error::Io { path: "<stdout>".into(), source })?;
    Ok(0)
}

fn methods() -> Result<u8, Error> {
    println!("variance methods:");
    for v in VarianceMethod::ALL {
        println!("  {:<17} {}", v.name(), v.description());
    }
    println!("intervals:");
    for (c, desc) in [
        (CiMethod::Wald, "normal approximation with the method's SE"),
        (CiMethod::Percentile, "bootstrap percentile (bootstrap methods only)"),
        (CiMethod::Basic, "bootstrap basic, reflected percentile (bootstrap methods only)"),
        (CiMethod::Bca, "bias-corrected and accelerated (bootstrap methods only)"),
    ] {
        println!("  {:<17} {}", c.name(), desc);
    }
    println!("augmentation prefixes: aipw- (all covariates), aipw_mis- (x1,x2,x3,x6,x10)");
    Ok(0)
}

fn configure_workers() -> Result<(), Error> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let workers: usize = raw
        .parse()
        .ok()
        .filter(|&w| w > 0)
        .ok_or_else(|| Error::Config { key: WORKERS_ENV.into(), message: format!("expected a positive integer, got `{raw}`") })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| Error::Config { key: WORKERS_ENV.into(), message: e.to_string() })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_workers().and_then(|()| match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Simulate(a) => simulate(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Methods => methods(),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
