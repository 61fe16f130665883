//! Command-line surface: batch analysis and report generation.
//!
//! Three subcommands cover the pipeline: `tau` (closed-form dependence
//! reports for given parameters), `simulate` (Monte Carlo validation
//! summary), `calibrate` (spreads -> intensities -> yearly taus -> fitted
//! parameters -> riskiness report).
//!
//! Every command is deterministic given its flags; stochastic commands take
//! a seed (a fixed default seed is used when absent). Flag values may also
//! come from a flat JSON config file; precedence is CLI > config > default.
//! Exit codes: 0 success, 2 validation, 3 data, 4 numerical failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::archimedean::{ArchimedeanGenerator, Family};
use crate::calibration::{calibrate, riskiness_report, CalibrationFamily, OptimizerSettings};
use crate::dependence::{tau_pair_report, tau_systemic, SystemicMode, DEFAULT_KENDALL_GRID};
use crate::error::{Error, Result};
use crate::market_data::{extract_intensities, load_spreads, yearly_empirical_taus, TauBasis};
use crate::montecarlo::{
    empirical_simultaneous, empirical_tau, sample_model, tau_standard_error, SimulationConfig,
};
use crate::shock_model::ModelParams;

/// Seed applied when no `--seed` is given, so every run is reproducible by
/// default.
pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Parser, Debug)]
#[command(
    name = "sysrisk",
    version,
    about = "Common-shock lifetime model: dependence reports, simulation and CDS calibration"
)]
struct Cli {
    /// Flat JSON config file supplying defaults for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed for stochastic commands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for CSV outputs.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Worker threads for simulation and calibration restarts.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pairwise Kendall taus with decomposition and per-entity systemic
    /// measures; writes taus.csv and kendall_fn_<i>_<k>.csv grids.
    Tau(TauArgs),
    /// Simulate the model and compare empirical statistics with closed
    /// forms; writes simulate_summary.csv.
    Simulate(SimulateArgs),
    /// Calibrate to a CDS spread panel for one year and write
    /// riskiness_<year>.csv.
    Calibrate(CalibrateArgs),
}

#[derive(Args, Debug, Clone)]
struct TauArgs {
    /// Copula family: clayton, gumbel or independence.
    #[arg(long)]
    family: Option<String>,
    /// Comma-separated alpha_1..alpha_d in (0, 1].
    #[arg(long)]
    alpha: Option<String>,
    /// Comma-separated theta_0..theta_d summing to 1.
    #[arg(long)]
    theta: Option<String>,
    /// Comma-separated beta_1..beta_d (ignored for independence).
    #[arg(long)]
    beta: Option<String>,
    /// Kendall-function grid size.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct SimulateArgs {
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Number of samples (at least 1000).
    #[arg(long)]
    n: Option<usize>,
    /// Horizon for the simultaneous-default probability.
    #[arg(long)]
    t: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct CalibrateArgs {
    /// CSV file of CDS spreads (bp): header date,<entity>,...
    #[arg(long)]
    spreads: Option<PathBuf>,
    /// Calendar year to estimate on.
    #[arg(long)]
    year: Option<i32>,
    /// Copula family: clayton or gumbel.
    #[arg(long)]
    family: Option<String>,
    /// Loss given default in (0, 1].
    #[arg(long)]
    lgd: Option<f64>,
    /// Flat interest rate (metadata only under the flat-hazard extraction).
    #[arg(long)]
    rate: Option<f64>,
    /// Nelder-Mead restarts.
    #[arg(long)]
    restarts: Option<usize>,
    /// Iteration cap per restart.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Simplex-diameter convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Series the empirical taus are computed on: levels or diffs.
    #[arg(long)]
    tau_on: Option<String>,
}

/// Entry point for the binary.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version with success
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    dispatch(cli)
}

/// Entry point for tests: parses the given argv (program name included).
pub fn run_from<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    dispatch(cli)
}

fn dispatch(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Validation(_) | Error::Usage(_) => 2,
        Error::Parse { .. } | Error::InsufficientData(_) | Error::Io(_) => 3,
        Error::Numerical(_) => 4,
    }
}

/// Values from the flat JSON config file, stringified.
#[derive(Debug, Default, Clone)]
struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        let parsed: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: format!("config file {}: {e}", path.display()),
        })?;
        let obj = parsed.as_object().ok_or_else(|| Error::Parse {
            line: 1,
            msg: "config file must be a flat JSON object".into(),
        })?;
        let mut values = BTreeMap::new();
        for (k, v) in obj {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                other => {
                    return Err(Error::Parse {
                        line: 1,
                        msg: format!("config key '{k}' must be scalar, got {other}"),
                    })
                }
            };
            values.insert(k.clone(), s);
        }
        Ok(Self { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Validation(format!("config key '{key}': cannot parse '{s}'"))),
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    let seed = match cli.seed {
        Some(s) => s,
        None => cfg.parse::<u64>("seed")?.unwrap_or(DEFAULT_SEED),
    };
    let out_dir = cli
        .out_dir
        .or_else(|| cfg.get("out-dir").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let workers = match cli.workers {
        Some(w) => w,
        None => cfg.parse::<usize>("workers")?.unwrap_or(0),
    };
    std::fs::create_dir_all(&out_dir)?;
    match cli.command {
        Command::Tau(args) => cmd_tau(&args, &cfg, &out_dir),
        Command::Simulate(args) => cmd_simulate(&args, &cfg, &out_dir, seed, workers),
        Command::Calibrate(args) => cmd_calibrate(&args, &cfg, &out_dir, seed, workers),
    }
}

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Error::Validation(format!("{what}: cannot parse '{tok}'")))
        })
        .collect()
}

fn parse_family(text: &str) -> Result<Family> {
    match text.to_ascii_lowercase().as_str() {
        "clayton" => Ok(Family::Clayton),
        "gumbel" => Ok(Family::Gumbel),
        "independence" | "independent" => Ok(Family::Independence),
        other => Err(Error::Validation(format!(
            "family must be clayton, gumbel or independence, got '{other}'"
        ))),
    }
}

/// Builds [`ModelParams`] from the shared `--family/--alpha/--theta/--beta`
/// flags (config fallback per key). `lambda0` is pinned to 1.
fn params_from_flags(
    family: &Option<String>,
    alpha: &Option<String>,
    theta: &Option<String>,
    beta: &Option<String>,
    cfg: &ConfigFile,
) -> Result<ModelParams> {
    let family_text = family
        .as_deref()
        .or_else(|| cfg.get("family"))
        .unwrap_or("clayton");
    let family = parse_family(family_text)?;
    let alpha_text = alpha
        .as_deref()
        .or_else(|| cfg.get("alpha"))
        .ok_or_else(|| Error::Validation("missing --alpha".into()))?;
    let theta_text = theta
        .as_deref()
        .or_else(|| cfg.get("theta"))
        .ok_or_else(|| Error::Validation("missing --theta".into()))?;
    let alpha = parse_f64_list(alpha_text, "--alpha")?;
    let theta = parse_f64_list(theta_text, "--theta")?;
    let d = alpha.len();
    let gens = match family {
        Family::Independence => vec![ArchimedeanGenerator::independence(); d],
        _ => {
            let beta_text = beta
                .as_deref()
                .or_else(|| cfg.get("beta"))
                .ok_or_else(|| Error::Validation("missing --beta".into()))?;
            let betas = parse_f64_list(beta_text, "--beta")?;
            if betas.len() != d {
                return Err(Error::Validation(format!(
                    "--beta needs {d} entries, got {}",
                    betas.len()
                )));
            }
            betas
                .iter()
                .map(|&b| ArchimedeanGenerator::from_family(family, b))
                .collect::<Result<Vec<_>>>()?
        }
    };
    ModelParams::new(1.0, alpha, theta, gens)
}

/// Fixed-point formatting with 6 significant digits; deterministic and
/// round-trippable at that precision.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0.000000".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}

fn cmd_tau(args: &TauArgs, cfg: &ConfigFile, out_dir: &Path) -> Result<()> {
    let params = params_from_flags(&args.family, &args.alpha, &args.theta, &args.beta, cfg)?;
    let grid = match args.grid {
        Some(g) => g,
        None => cfg.parse::<usize>("grid")?.unwrap_or(DEFAULT_KENDALL_GRID),
    };
    let d = params.d();

    let mut taus_csv = String::from("i,k,label_i,label_k,tau,tau_mo,tau_bar_i,tau_bar_k\n");
    println!("pairwise Kendall taus (d = {d})");
    println!(
        "{:<10} {:>10} {:>10} {:>10} {:>10}",
        "pair", "tau", "tau_mo", "tau_bar_i", "tau_bar_k"
    );
    for i in 1..=d {
        for k in (i + 1)..=d {
            let report = tau_pair_report(&params, i, k, grid)?;
            let (mo, bi, bk) = report
                .decomposition
                .map(|dec| {
                    (
                        format_sig(dec.tau_mo),
                        format_sig(dec.tau_bar_i),
                        format_sig(dec.tau_bar_k),
                    )
                })
                .unwrap_or_default();
            println!(
                "{:<10} {:>10} {:>10} {:>10} {:>10}",
                format!("T{i},T{k}"),
                format_sig(report.tau),
                mo,
                bi,
                bk
            );
            let _ = writeln!(
                taus_csv,
                "{i},{k},E{i},E{k},{},{mo},{bi},{bk}",
                format_sig(report.tau)
            );
            let mut grid_csv = String::from("t,k\n");
            for (t, kt) in &report.kendall_fn {
                let _ = writeln!(grid_csv, "{},{}", format_sig(*t), format_sig(*kt));
            }
            write_file(&out_dir.join(format!("kendall_fn_{i}_{k}.csv")), &grid_csv)?;
        }
    }
    write_file(&out_dir.join("taus.csv"), &taus_csv)?;

    println!("\nper-entity systemic measures");
    println!("{:<8} {:>12} {:>12}", "entity", "tau_x0_x", "tau_x0_t");
    for j in 1..=d {
        let x = tau_systemic(&params, j, SystemicMode::VsIdiosyncratic)?;
        let t = tau_systemic(&params, j, SystemicMode::VsLifetime)?;
        println!(
            "{:<8} {:>12} {:>12}",
            format!("E{j}"),
            format_sig(x),
            format_sig(t)
        );
    }
    Ok(())
}

fn cmd_simulate(
    args: &SimulateArgs,
    cfg: &ConfigFile,
    out_dir: &Path,
    seed: u64,
    workers: usize,
) -> Result<()> {
    let params = params_from_flags(&args.family, &args.alpha, &args.theta, &args.beta, cfg)?;
    let n = match args.n {
        Some(n) => n,
        None => cfg.parse::<usize>("n")?.unwrap_or(100_000),
    };
    if n < 1000 {
        return Err(Error::Validation(format!(
            "--n must be at least 1000, got {n}"
        )));
    }
    let horizon = match args.t {
        Some(t) => t,
        None => cfg.parse::<f64>("t")?.unwrap_or(0.0),
    };
    if horizon < 0.0 {
        return Err(Error::Validation(format!(
            "--t must be nonnegative, got {horizon}"
        )));
    }

    let batch = sample_model(
        &params,
        &SimulationConfig::new(n, seed).with_workers(workers),
    )?;
    let mut csv = String::from("statistic,empirical,theoretical,std_error,z_score\n");
    println!("simulation summary (n = {n}, seed = {seed})");
    println!(
        "{:<22} {:>12} {:>12} {:>12} {:>8}",
        "statistic", "empirical", "theoretical", "std_error", "z"
    );
    let mut emit = |name: String, emp: f64, theo: f64, se: f64| {
        let z = if se > 0.0 { (emp - theo) / se } else { 0.0 };
        println!(
            "{:<22} {:>12} {:>12} {:>12} {:>8.2}",
            name,
            format_sig(emp),
            format_sig(theo),
            format_sig(se),
            z
        );
        let _ = writeln!(
            csv,
            "{name},{},{},{},{}",
            format_sig(emp),
            format_sig(theo),
            format_sig(se),
            format_sig(z)
        );
    };

    let d = params.d();
    let se_tau = tau_standard_error(n);
    for i in 1..=d {
        for k in (i + 1)..=d {
            let emp = empirical_tau(&batch.lifetime_column(i), &batch.lifetime_column(k))?;
            let theo = crate::dependence::tau_pair(&params, i, k)?;
            emit(format!("tau_T{i}_T{k}"), emp, theo, se_tau);
        }
    }
    let theo_sim = params.simultaneous_default_prob(horizon);
    let emp_sim = empirical_simultaneous(&batch, horizon);
    let se_sim = (theo_sim * (1.0 - theo_sim) / n as f64).sqrt();
    emit(
        format!("simultaneous_gt_{horizon}"),
        emp_sim,
        theo_sim,
        se_sim,
    );

    write_file(&out_dir.join("simulate_summary.csv"), &csv)?;
    Ok(())
}

fn cmd_calibrate(
    args: &CalibrateArgs,
    cfg: &ConfigFile,
    out_dir: &Path,
    seed: u64,
    workers: usize,
) -> Result<()> {
    let spreads_path = args
        .spreads
        .clone()
        .or_else(|| cfg.get("spreads").map(PathBuf::from))
        .ok_or_else(|| Error::Validation("missing --spreads".into()))?;
    let year = match args.year {
        Some(y) => y,
        None => cfg
            .parse::<i32>("year")?
            .ok_or_else(|| Error::Validation("missing --year".into()))?,
    };
    let family_text = args
        .family
        .as_deref()
        .or_else(|| cfg.get("family"))
        .unwrap_or("clayton");
    let family = match parse_family(family_text)? {
        Family::Clayton => CalibrationFamily::Clayton,
        Family::Gumbel => CalibrationFamily::Gumbel,
        Family::Independence => {
            return Err(Error::Validation(
                "calibration requires clayton or gumbel".into(),
            ))
        }
    };
    let lgd = match args.lgd {
        Some(v) => v,
        None => cfg.parse::<f64>("lgd")?.unwrap_or(0.6),
    };
    let rate = match args.rate {
        Some(v) => v,
        None => cfg.parse::<f64>("rate")?.unwrap_or(0.0),
    };
    let restarts = match args.restarts {
        Some(v) => v,
        None => cfg.parse::<usize>("restarts")?.unwrap_or(20),
    };
    let max_iters = match args.max_iters {
        Some(v) => v,
        None => cfg.parse::<usize>("max-iters")?.unwrap_or(5000),
    };
    let xtol = match args.tol {
        Some(v) => v,
        None => cfg.parse::<f64>("tol")?.unwrap_or(1e-8),
    };
    let basis: TauBasis = match args.tau_on.as_deref().or_else(|| cfg.get("tau-on")) {
        Some(text) => text.parse()?,
        None => TauBasis::Levels,
    };

    let (panel, report) = load_spreads(&spreads_path)?;
    println!("loaded {}: {}", spreads_path.display(), report.summary());
    let intensities = extract_intensities(&panel, lgd, rate)?;
    let target = yearly_empirical_taus(&intensities, year, basis)?;

    let opts = OptimizerSettings {
        max_iters,
        restarts,
        seed,
        xtol,
        ftol: 1e-12,
    };
    // restart-level parallelism is deterministic regardless of pool size
    let fit = if workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
        pool.install(|| calibrate(&target, family, &opts))?
    } else {
        calibrate(&target, family, &opts)?
    };
    println!(
        "year {year}: objective {} after {} restarts, converged = {}",
        format_sig(fit.objective),
        fit.n_restarts_used,
        fit.converged
    );
    if !fit.boundary.is_empty() {
        println!("boundary parameters: {}", fit.boundary.join(", "));
    }
    println!(
        "{:<24} {:>10} {:>10} {:>10}",
        "pair", "target", "fitted", "residual"
    );
    for (i, k, t) in target.pairs() {
        let f = fit.fitted_taus.get(i, k);
        println!(
            "{:<24} {:>10} {:>10} {:>10}",
            format!("{},{}", target.labels()[i - 1], target.labels()[k - 1]),
            format_sig(t),
            format_sig(f),
            format_sig(f - t)
        );
    }

    let risk = riskiness_report(&fit)?;
    let mut csv = String::from("entity,tau_x0_x,tau_x0_t\n");
    println!("\n{:<24} {:>12} {:>12}", "entity", "tau_x0_x", "tau_x0_t");
    for r in &risk {
        println!(
            "{:<24} {:>12} {:>12}",
            r.entity,
            format_sig(r.tau_x0_x),
            format_sig(r.tau_x0_t)
        );
        let _ = writeln!(
            csv,
            "{},{},{}",
            r.entity,
            format_sig(r.tau_x0_x),
            format_sig(r.tau_x0_t)
        );
    }
    write_file(&out_dir.join(format!("riskiness_{year}.csv")), &csv)?;
    Ok(())
}
