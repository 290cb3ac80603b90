mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};
use strip_radius_core::analytic::{analytic_profile, radius_from_spectrum};
use strip_radius_core::evolution::{self, SolveOptions};
use strip_radius_core::oracles::{self, CaseId, CaseOutcome};
use strip_radius_core::system::{self, CheckStatus, SystemError};

use config::RunConfig;
use error::CliError;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "strip-radius", version, about = "Measure radii of analyticity and compare them with the lower bound")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the Hermitian structure of a case's system
    Validate(Common),
    /// Integrate a case and report norm paths
    Solve(Common),
    /// Measure radii at the requested times
    Radius(Common),
    /// Compute the lower bound and budget curves
    Bounds(Common),
    /// Tabulate measured radius against the bound as CSV
    Compare(Common),
    /// Full JSON report for one or more cases
    Report(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Case name; `report` accepts a comma-separated list
    #[arg(long)]
    case: Option<String>,
    /// Comma-separated sample times
    #[arg(long)]
    times: Option<String>,
    /// Main output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report next to the CSV (compare)
    #[arg(long)]
    json: Option<PathBuf>,
    /// SVG chart (compare)
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage { message: message.into() }
}

fn parse_case(name: &str) -> Result<CaseId, CliError> {
    CaseId::parse(name.trim()).ok_or_else(|| {
        let known: Vec<&str> = CaseId::ALL.iter().map(|c| c.as_str()).collect();
        usage(format!("unknown case `{name}` (known: {})", known.join(", ")))
    })
}

fn parse_times(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| usage(format!("bad time `{s}` in --times"))))
        .collect()
}

/// Effective configs, one per selected case.
fn configs(common: &Common, many: bool) -> Result<Vec<RunConfig>, CliError> {
    let mut base = match &common.config {
        Some(p) => config::load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(t) = &common.times {
        base.times = Some(parse_times(t)?);
    }
    let cases: Vec<CaseId> = match &common.case {
        Some(list) => list.split(',').map(parse_case).collect::<Result<_, _>>()?,
        None => base.case.into_iter().collect(),
    };
    if cases.is_empty() {
        return Err(usage("no case selected: pass --case or set `case` in the config"));
    }
    if cases.len() > 1 && !many {
        return Err(usage("this subcommand takes a single case"));
    }
    cases
        .into_iter()
        .map(|c| {
            let mut cfg = base.clone();
            cfg.case = Some(c);
            cfg.resolve()
        })
        .collect()
}

fn single(common: &Common) -> Result<RunConfig, CliError> {
    Ok(configs(common, false)?.remove(0))
}

fn envelope(cfg: &RunConfig, body: Value) -> Value {
    let mut v = json!({ "version": VERSION, "config": cfg });
    if let (Value::Object(out), Value::Object(extra)) = (&mut v, body) {
        out.extend(extra);
    }
    v
}

fn emit_json(path: Option<&Path>, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    emit_text(path, &text)
}

fn emit_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => output::write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_path<'a>(common: &'a Common, cfg: &'a RunConfig) -> Option<&'a Path> {
    common.out.as_deref().or(cfg.output.json.as_deref())
}

fn validation(cfg: &RunConfig) -> Result<Value, CliError> {
    let spec = config::case_system(cfg)?;
    let setup = cfg.setup()?;
    let samples = system::default_samples(&setup.grid);
    let mut report = system::validate_symmetric(&spec, &samples)?;
    let hyper = match system::strict_hyperbolicity_check(&spec, &samples) {
        Ok(h) => {
            report.strict_hyperbolic = if h.pass { CheckStatus::Pass } else { CheckStatus::Fail };
            Some(h)
        }
        Err(SystemError::NotApplicable(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(json!({ "validation": report, "hyperbolicity": hyper }))
}

fn cmd_validate(common: &Common) -> Result<(), CliError> {
    let cfg = single(common)?;
    let body = validation(&cfg)?;
    emit_json(json_path(common, &cfg), &envelope(&cfg, body))
}

fn cmd_solve(common: &Common) -> Result<(), CliError> {
    let cfg = single(common)?;
    let setup = cfg.setup()?;
    let (spec, u0) = match setup.id {
        CaseId::Example1 => {
            return Err(usage(
                "example1 has a non-periodic coefficient and is evaluated in closed form; use transport_sinx for a solver run",
            ))
        }
        CaseId::Example2 => (config::case_system(&cfg)?, oracles::example2(setup.p, 0.0, setup.grid)?.field),
        _ => (setup.spec.clone().expect("solver case"), setup.u0.clone().expect("solver case")),
    };
    let t_end = *setup.times.last().unwrap();
    let opts = SolveOptions {
        stride: cfg.solver.stride.unwrap(),
        s: setup.s,
        oversample: setup.oversample,
    };
    let res = evolution::solve(&spec, &u0, t_end, setup.dt, &opts)?;
    let energy = evolution::energy_monitor(&res, &spec, setup.s)?;
    let p = spec.degree();
    let body = json!({
        "solve": {
            "times": res.times,
            "linf": res.linf_path,
            "hs": res.hs_path,
            "forcing": res.forcing_path,
            "integral_conservative": res.i_path,
            "integral_example": evolution::accumulate_integral(&res, p, evolution::IntegralVariant::Example),
            "snapshot_times": res.snapshots.iter().map(|s| s.0).collect::<Vec<_>>(),
            "dt": res.dt,
            "s": res.s,
            "degree": p,
            "blow_up": res.blow_up,
            "diagnostics": res.diagnostics,
            "energy": energy,
        }
    });
    emit_json(json_path(common, &cfg), &envelope(&cfg, body))?;
    match res.blow_up {
        Some(b) => Err(CliError::Numerical(format!(
            "blow-up detected at t = {} (last stable time {})",
            b.time, b.last_stable_time
        ))),
        None => Ok(()),
    }
}

fn cmd_radius(common: &Common) -> Result<(), CliError> {
    let cfg = single(common)?;
    let setup = cfg.setup()?;
    let fields = oracles::case_fields(&setup)?;
    let radii: Vec<Value> = fields
        .par_iter()
        .map(|(t, f)| {
            let estimate = radius_from_spectrum(f, &setup.fit);
            let profile = analytic_profile(f, setup.eps0, setup.n_max, setup.s).ok();
            json!({
                "t": t,
                "estimate": estimate,
                "exact": oracles::case_exact_radius(&setup, *t),
                "profile": profile.map(|p| json!({
                    "epsilon": p.epsilon,
                    "sup_value": p.sup_value,
                    "argmax": p.argmax,
                    "converged": p.converged,
                })),
            })
        })
        .collect();
    emit_json(json_path(common, &cfg), &envelope(&cfg, json!({ "radii": radii })))
}

fn cmd_bounds(common: &Common) -> Result<(), CliError> {
    let cfg = single(common)?;
    let outcome = oracles::run_case(&cfg.setup()?)?;
    emit_json(json_path(common, &cfg), &envelope(&cfg, json!({ "bounds": outcome.trace })))
}

fn case_report(cfg: &RunConfig, outcome: &CaseOutcome) -> Value {
    envelope(
        cfg,
        json!({
            "all_pass": outcome.all_pass(),
            "outcome": outcome,
        }),
    )
}

fn cmd_compare(common: &Common) -> Result<(), CliError> {
    let cfg = single(common)?;
    let outcome = oracles::run_case(&cfg.setup()?)?;
    let csv = output::rows_csv(&outcome.rows);
    emit_text(common.out.as_deref().or(cfg.output.csv.as_deref()), &csv)?;
    if let Some(p) = common.json.as_deref().or(cfg.output.json.as_deref()) {
        emit_json(Some(p), &case_report(&cfg, &outcome))?;
    }
    if let Some(p) = common.svg.as_deref().or(cfg.output.svg.as_deref()) {
        let title = format!("{}: measured vs bound", outcome.case.as_str());
        output::write_atomic(p, output::rows_svg(&title, &outcome.rows).as_bytes())?;
    }
    Ok(())
}

fn cmd_report(common: &Common) -> Result<(), CliError> {
    let cfgs = configs(common, true)?;
    let reports: Vec<Value> = cfgs
        .par_iter()
        .map(|cfg| -> Result<Value, CliError> {
            let outcome = oracles::run_case(&cfg.setup()?)?;
            let mut v = case_report(cfg, &outcome);
            if let (Value::Object(out), Value::Object(extra)) = (&mut v, validation(cfg)?) {
                out.extend(extra);
            }
            Ok(v)
        })
        .collect::<Result<_, _>>()?;
    let value = if reports.len() == 1 {
        reports.into_iter().next().unwrap()
    } else {
        json!({ "version": VERSION, "reports": reports })
    };
    emit_json(common.out.as_deref().or(cfgs[0].output.json.as_deref()), &value)
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("STRIP_RADIUS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| usage(format!("STRIP_RADIUS_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| usage(format!("cannot configure worker pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match &cli.command {
        Command::Validate(c) => cmd_validate(c),
        Command::Solve(c) => cmd_solve(c),
        Command::Radius(c) => cmd_radius(c),
        Command::Bounds(c) => cmd_bounds(c),
        Command::Compare(c) => cmd_compare(c),
        Command::Report(c) => cmd_report(c),
    }
}

fn fail(err: CliError) -> ExitCode {
    eprintln!("{}", err.to_json());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(usage(e.to_string().trim().to_string())),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
