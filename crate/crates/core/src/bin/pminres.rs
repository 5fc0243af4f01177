use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pminres::config::{ProblemConfig, Strategy, WarmStart};
use pminres::driver::{run_study, write_records_csv, StudyOutcome};
use pminres::estimate::{fit_rate, Quantity, StudyRecord};
use pminres::telemetry::Telemetry;

const THREADS_ENV: &str = "PMINRES_THREADS";

/// Residual-minimization solver for the p-Laplacian: convergence studies
/// and mesh snapshots.
#[derive(Parser, Debug)]
#[command(name = "pminres", version, about)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the study described by a config file (plus overrides).
    Run(StudyArgs),
    /// Smooth benchmark, x0 = (-1, -1): uniform studies for p = 1.5 and 3.
    Case1(StudyArgs),
    /// Singular load at the corner x0 = (0, 0) with p = 1.5.
    Case2(StudyArgs),
    /// Fit convergence rates from a records CSV.
    Rates(RatesArgs),
    /// Write SVG/VTK meshes of an (adaptive by default) study at given steps.
    ExportMesh(ExportArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    /// TOML config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target exponent p (> 1).
    #[arg(long)]
    p: Option<f64>,
    /// Load exponent sigma in f = |x - x0|^(-sigma) [default: 0.97].
    #[arg(long)]
    sigma: Option<f64>,
    /// Singular point as "x,y".
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    x0: Option<[f64; 2]>,
    /// Dörfler fraction in (0, 1] [default: 0.5].
    #[arg(long)]
    theta: Option<f64>,
    /// Number of levels (refinement steps + 1).
    #[arg(long)]
    levels: Option<usize>,
    /// uniform | pre_adapted | adaptive.
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Warm start from the previous level: off | restart | at_target.
    #[arg(long, value_parser = parse_warm_start)]
    warm_start: Option<WarmStart>,
    /// Reproducible output: timing columns are written as 0.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args, Debug)]
struct StudyArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write JSON-lines solver telemetry.
    #[arg(long)]
    telemetry: bool,
}

#[derive(Args, Debug)]
struct RatesArgs {
    /// Records CSV written by a study.
    csv: PathBuf,
    /// Number of trailing levels in the fit.
    #[arg(long, default_value_t = 3)]
    window: usize,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Steps to export, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0usize, 2, 6])]
    steps: Vec<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected \"x,y\", got `{s}`"));
    }
    let x = parts[0].parse::<f64>().map_err(|e| format!("x: {e}"))?;
    let y = parts[1].parse::<f64>().map_err(|e| format!("y: {e}"))?;
    Ok([x, y])
}

fn parse_warm_start(s: &str) -> Result<WarmStart, String> {
    match s {
        "off" => Ok(WarmStart::Off),
        "restart" => Ok(WarmStart::Restart),
        "at_target" => Ok(WarmStart::AtTarget),
        _ => Err(format!("unknown warm start `{s}` (expected off, restart or at_target)")),
    }
}

impl Overrides {
    fn apply(&self, mut cfg: ProblemConfig) -> anyhow::Result<ProblemConfig> {
        if let Some(path) = &self.config {
            cfg = ProblemConfig::from_file(path)?;
        }
        if let Some(v) = self.p {
            cfg.p_target = v;
        }
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = self.x0 {
            cfg.x0 = v;
        }
        if let Some(v) = self.theta {
            cfg.theta = v;
        }
        if let Some(v) = self.levels {
            cfg.max_levels = v;
        }
        if let Some(v) = self.strategy {
            cfg.strategy = v;
        }
        if let Some(v) = self.warm_start {
            cfg.warm_start = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct RatesSummary {
    window: usize,
    levels: usize,
    slope_error: Option<f64>,
    slope_eta: Option<f64>,
    slope_difference: Option<f64>,
    reference: f64,
}

fn summarize(records: &[StudyRecord], window: usize) -> RatesSummary {
    let w = window.min(records.len());
    let se = fit_rate(records, Quantity::Error, w).ok();
    let sn = fit_rate(records, Quantity::Estimator, w).ok();
    RatesSummary {
        window: w,
        levels: records.len(),
        slope_error: se,
        slope_eta: sn,
        slope_difference: se.zip(sn).map(|(a, b)| (a - b).abs()),
        reference: -0.5,
    }
}

fn print_table(records: &[StudyRecord]) {
    println!(
        "{:>5} {:>9} {:>11} {:>11} {:>9} {:>9} {:>8}",
        "level", "n_total", "error", "eta", "eta/err", "newton", "damped"
    );
    for r in records {
        println!(
            "{:>5} {:>9} {:>11.4e} {:>11.4e} {:>9.4} {:>9} {:>8}",
            r.level, r.n_total, r.error, r.eta, r.eta_over_error, r.newton_total, r.damping_events
        );
    }
}

fn print_summary(label: &str, s: &RatesSummary) {
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "{label}: slope(error) = {}, slope(eta) = {}, |difference| = {} over the last {} levels (reference {})",
        fmt(s.slope_error),
        fmt(s.slope_eta),
        fmt(s.slope_difference),
        s.window,
        s.reference
    );
}

/// Runs one study into `dir`; returns whether every level converged.
fn study(mut cfg: ProblemConfig, dir: &Path, telemetry: bool, deterministic: bool, label: &str) -> anyhow::Result<bool> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    cfg.output.dir = Some(dir.to_path_buf());
    std::fs::write(dir.join("config.toml"), cfg.to_toml_string())?;
    let mut tel = if telemetry {
        let path = dir.join(cfg.output.telemetry_name.clone().unwrap_or_else(|| "telemetry.jsonl".into()));
        Telemetry::to_writer(BufWriter::new(File::create(&path)?))
    } else {
        Telemetry::disabled()
    };
    let (outcome, ok) = match run_study(&cfg, &mut tel) {
        Ok(o) => (o, true),
        Err(e) => {
            eprintln!("{label}: {e}");
            (e.partial, false)
        }
    };
    finish(&cfg, dir, &outcome, deterministic, label)?;
    Ok(ok)
}

fn finish(cfg: &ProblemConfig, dir: &Path, outcome: &StudyOutcome, deterministic: bool, label: &str) -> anyhow::Result<()> {
    let mut records = outcome.records();
    if deterministic {
        records.iter_mut().for_each(|r| r.wall_ms = 0.0);
    }
    write_records_csv(&dir.join(&cfg.output.csv_name), &records)?;
    print_table(&records);
    let summary = summarize(&records, 3);
    print_summary(label, &summary);
    std::fs::write(dir.join("rates.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV}={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run(a) => {
            if a.overrides.config.is_none() {
                bail!("`run` needs --config (use case1/case2 for the built-in studies)");
            }
            let cfg = a.overrides.apply(ProblemConfig::default())?;
            study(cfg, &a.out, a.telemetry, a.overrides.deterministic, "run")
        }
        Command::Case1(a) => {
            let ps: Vec<f64> = match a.overrides.p {
                Some(p) => vec![p],
                None => vec![1.5, 3.0],
            };
            let mut ok = true;
            for p in ps {
                let cfg = a.overrides.apply(ProblemConfig::case1(p))?;
                let cfg = ProblemConfig { p_target: p, ..cfg };
                let dir = a.out.join(format!("case1_p{p}"));
                ok &= study(cfg, &dir, a.telemetry, a.overrides.deterministic, &format!("case1 p={p}"))?;
            }
            Ok(ok)
        }
        Command::Case2(a) => {
            let strategy = a.overrides.strategy.unwrap_or(Strategy::Adaptive);
            let mut cfg = a.overrides.apply(ProblemConfig::case2(strategy))?;
            if strategy == Strategy::Adaptive {
                cfg.output.snapshot_levels = vec![0, 2, 6];
            }
            let name = match strategy {
                Strategy::Uniform => "uniform",
                Strategy::PreAdaptedThenUniform => "pre_adapted",
                Strategy::Adaptive => "adaptive",
            };
            let dir = a.out.join(format!("case2_{name}"));
            study(cfg, &dir, a.telemetry, a.overrides.deterministic, &format!("case2 {name}"))
        }
        Command::Rates(a) => {
            let mut rd = csv::Reader::from_path(&a.csv).with_context(|| format!("reading {}", a.csv.display()))?;
            let records: Vec<StudyRecord> = rd.deserialize().collect::<Result<_, _>>()?;
            print_table(&records);
            let summary = summarize(&records, a.window);
            print_summary(&a.csv.display().to_string(), &summary);
            Ok(true)
        }
        Command::ExportMesh(a) => {
            let strategy = a.overrides.strategy.unwrap_or(Strategy::Adaptive);
            let mut cfg = a.overrides.apply(ProblemConfig::case2(strategy))?;
            cfg.max_levels = a.steps.iter().max().map_or(1, |m| m + 1);
            cfg.output.snapshot_levels = a.steps.clone();
            cfg.output.dir = Some(a.out.clone());
            let outcome = run_study(&cfg, &mut Telemetry::disabled()).map_err(|e| anyhow::anyhow!(e))?;
            for path in &outcome.artifacts {
                println!("{}", path.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
