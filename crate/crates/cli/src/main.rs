use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use dronecell::config::{boundaries, load_config};
use dronecell::experiments::{
    evaluate, feasibility_curve, linspace, optimal_height, run_sweep, Engine, EngineSettings, SweepAxis,
    SweepSpec,
};
use dronecell::report::{self, ResultRow, RunMetadata};
use dronecell::{Error, Scenario, ScenarioConfig, SimSettings};

/// Environment variable overriding the worker thread count.
const THREADS_ENV: &str = "DRONECELL_THREADS";

#[derive(Parser, Debug)]
#[command(name = "dronecell", version, about = "Uplink coverage of a TBS and an underlay drone cell over a stadium")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate both coverages at one configuration.
    Eval(EvalArgs),
    /// Sweep one parameter over a grid.
    Sweep(SweepArgs),
    /// ABS altitude maximizing its coverage.
    OptHeight(OptHeightArgs),
    /// Best ABS coverage versus stadium offset under a TBS coverage floor.
    Feasibility(FeasibilityArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario file (flat `key = value`); baseline values when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one parameter, e.g. `--set h=350`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Monte Carlo runs per point.
    #[arg(long, default_value_t = 1_000_000)]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Quadrature absolute tolerance.
    #[arg(long, default_value_t = 1e-8)]
    abs_tol: f64,
    /// Quadrature relative tolerance.
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
}

#[derive(Args, Debug, Clone)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated engines: analytic, mc_powerlaw, mc_atg.
    #[arg(long, default_value = "analytic")]
    engines: String,
    /// Also write the result rows (format from `--format`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    output: Output,
    /// gamma_t, gamma_a, gamma (both thresholds), h, d or p_max.
    #[arg(long)]
    axis: String,
    #[arg(long, allow_hyphen_values = true)]
    from: f64,
    #[arg(long, allow_hyphen_values = true)]
    to: f64,
    #[arg(long)]
    points: usize,
    #[arg(long, default_value = "analytic")]
    engines: String,
}

#[derive(Args, Debug)]
struct OptHeightArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    output: Output,
    #[arg(long, default_value_t = 0.0)]
    h_from: f64,
    #[arg(long, default_value_t = 1000.0)]
    h_to: f64,
    #[arg(long, default_value = "analytic")]
    engine: String,
    /// Optional parameter to vary; one optimization per grid value.
    #[arg(long, requires_all = ["from", "to", "points"])]
    axis: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    to: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args, Debug)]
struct FeasibilityArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    output: Output,
    #[arg(long)]
    d_from: f64,
    #[arg(long)]
    d_to: f64,
    #[arg(long)]
    points: usize,
    /// TBS coverage floor; comma-separated for several curves.
    #[arg(long, default_value = "0.9")]
    floor: String,
    #[arg(long, default_value_t = 0.0)]
    h_from: f64,
    #[arg(long, default_value_t = 1000.0)]
    h_to: f64,
}

fn threads_override() -> Result<Option<usize>, Error> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

fn load(common: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => ScenarioConfig::baseline(),
    };
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn settings(common: &Common) -> Result<EngineSettings, Error> {
    let quad = dronecell::QuadratureSettings::new(common.abs_tol, common.rel_tol, 200)?;
    let sim = SimSettings::default()
        .with_runs(common.runs)
        .with_seed(common.seed)
        .with_threads(threads_override()?);
    sim.validate()?;
    Ok(EngineSettings {
        quad,
        sim,
        ..Default::default()
    })
}

fn parse_engines(list: &str) -> Result<Vec<Engine>, Error> {
    let engines: Vec<Engine> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Engine::parse)
        .collect::<Result<_, _>>()?;
    if engines.is_empty() {
        return Err(Error::InvalidArgument("no engines selected".into()));
    }
    Ok(engines)
}

fn parse_list(list: &str) -> Result<Vec<f64>, Error> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("`{s}` is not a number")))
        })
        .collect()
}

fn grid(from: f64, to: f64, points: usize) -> Result<Vec<f64>, Error> {
    if points == 0 {
        return Err(Error::InvalidArgument("--points must be at least 1".into()));
    }
    if points > 1 && !(to > from) {
        return Err(Error::InvalidArgument(format!("--to ({to}) must exceed --from ({from})")));
    }
    Ok(linspace(from, to, points))
}

fn render(format: Format, meta: &RunMetadata, rows: &[ResultRow]) -> Result<String, Error> {
    match format {
        Format::Csv => report::to_csv(meta, rows),
        Format::Json => report::to_json(meta, rows),
    }
}

fn emit(output: &Output, meta: &RunMetadata, rows: &[ResultRow]) -> Result<(), Error> {
    let text = render(output.format, meta, rows)?;
    match &output.out {
        Some(path) => {
            fs::write(path, text).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            info!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Error> {
    let cfg = load(&args.common)?;
    let settings = settings(&args.common)?;
    let engines = parse_engines(&args.engines)?;
    let b = boundaries(&cfg);
    let scn = Scenario::new(cfg.clone())?;
    println!("seed: {}", args.common.seed);
    println!("regime: {:?} (h = {} m, z_cap = {:.3} m, h_low = {:.3} m)", b.regime, cfg.h, b.z_cap, b.h_low);
    let mut rows = vec![];
    for &engine in &engines {
        let [t, a] = evaluate(&scn, engine, &settings);
        for r in [&t, &a] {
            let station = report::station_code(r.station);
            match &r.error {
                None => println!(
                    "{:<12} P_c^{station} = {:.6}  (err {:.2e})",
                    engine.name(),
                    r.coverage,
                    r.err_est
                ),
                Some(msg) => println!("{:<12} P_c^{station} failed: {msg}", engine.name()),
            }
        }
        if let Some(msg) = t.error.as_ref().or(a.error.as_ref()) {
            return Err(Error::InvalidArgument(format!("{} engine failed: {msg}", engine.name())));
        }
        rows.push((engine, t, a));
    }
    let analytic = rows.iter().find(|r| r.0 == Engine::Analytic);
    for sim in rows.iter().filter(|r| r.0 != Engine::Analytic) {
        if let Some(an) = analytic {
            for (x, y) in [(&an.1, &sim.1), (&an.2, &sim.2)] {
                let gap = (x.coverage - y.coverage).abs();
                let allowed = 3.0 * y.err_est + 0.002;
                println!(
                    "agreement {} vs {} at {}: |Δ| = {gap:.5} {} {allowed:.5}",
                    Engine::Analytic.name(),
                    sim.0.name(),
                    report::station_code(x.station),
                    if gap <= allowed { "<=" } else { ">" }
                );
            }
        }
    }
    if let Some(path) = &args.out {
        let result = dronecell::experiments::SweepResult {
            axis: SweepAxis::H,
            points: vec![dronecell::experiments::SweepPoint {
                axis_value: cfg.h,
                results: rows.into_iter().flat_map(|(_, t, a)| [t, a]).collect(),
            }],
        };
        let meta = RunMetadata::new("eval", args.common.seed, cfg);
        emit(
            &Output {
                format: args.format,
                out: Some(path.clone()),
            },
            &meta,
            &report::sweep_rows(&result),
        )?;
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Error> {
    let cfg = load(&args.common)?;
    let settings = settings(&args.common)?;
    let spec = SweepSpec {
        axis: SweepAxis::parse(&args.axis)?,
        grid: grid(args.from, args.to, args.points)?,
        engines: parse_engines(&args.engines)?,
        base: cfg.clone(),
    };
    let result = run_sweep(&spec, &settings)?;
    let meta = RunMetadata::new("sweep", args.common.seed, cfg);
    emit(&args.output, &meta, &report::sweep_rows(&result))
}

fn cmd_opt_height(args: &OptHeightArgs) -> Result<(), Error> {
    let cfg = load(&args.common)?;
    let settings = settings(&args.common)?;
    let engine = Engine::parse(&args.engine)?;
    let (axis, values) = match &args.axis {
        Some(name) => {
            let axis = SweepAxis::parse(name)?;
            (axis, grid(args.from.unwrap(), args.to.unwrap(), args.points.unwrap())?)
        }
        None => (SweepAxis::PMax, vec![cfg.p_max_dbm]),
    };
    let mut points = vec![];
    for v in values {
        let scn = Scenario::new(axis.apply(&cfg, v))?;
        points.push((v, optimal_height(&scn, (args.h_from, args.h_to), engine, &settings)?));
    }
    let tol = if engine == Engine::Analytic {
        settings.quad.abs_tol
    } else {
        settings.sim.runs as f64
    };
    let rows = report::optimal_height_rows(axis.name(), &points, engine.name(), tol);
    let meta = RunMetadata::new("opt-height", args.common.seed, cfg);
    emit(&args.output, &meta, &rows)
}

fn cmd_feasibility(args: &FeasibilityArgs) -> Result<(), Error> {
    let cfg = load(&args.common)?;
    let settings = settings(&args.common)?;
    let d_grid = grid(args.d_from, args.d_to, args.points)?;
    let mut rows = vec![];
    for floor in parse_list(&args.floor)? {
        let curve = feasibility_curve(&cfg, &d_grid, floor, (args.h_from, args.h_to), &settings)?;
        rows.extend(report::feasibility_rows(&curve, settings.quad.abs_tol));
    }
    let meta = RunMetadata::new("feasibility", args.common.seed, cfg);
    emit(&args.output, &meta, &rows)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } | Error::Parse(_) | Error::Validation(_) | Error::InvalidArgument(_) => 2,
        Error::Domain(_) | Error::NonConvergence { .. } => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Ok(Some(n)) = threads_override() {
        // the global pool serves sweep grid points and analytic work
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match &cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::OptHeight(a) => cmd_opt_height(a),
        Command::Feasibility(a) => cmd_feasibility(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
