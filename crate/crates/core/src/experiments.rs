//! Parameter sweeps, optimal ABS altitude, and the TBS-constrained
//! feasibility curve.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{coverage_abs, coverage_tbs};
use crate::channel::AtgParams;
use crate::config::{Scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::montecarlo::{simulate_coverage, AerialModel, SimSettings, Station};
use crate::quadrature::QuadratureSettings;

/// Default altitude search range, meters.
pub const DEFAULT_H_RANGE: (f64, f64) = (0.0, 1000.0);

/// Points of the coarse scan that seeds the golden-section refinement.
pub const COARSE_SCAN_POINTS: usize = 25;

/// Final bracket half-width of the altitude search, meters.
pub const HEIGHT_RESOLUTION: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Analytic,
    McPowerlaw,
    McAtg,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::McPowerlaw => "mc_powerlaw",
            Engine::McAtg => "mc_atg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "analytic" => Ok(Engine::Analytic),
            "mc_powerlaw" => Ok(Engine::McPowerlaw),
            "mc_atg" => Ok(Engine::McAtg),
            other => Err(Error::InvalidArgument(format!(
                "unknown engine `{other}` (expected analytic, mc_powerlaw or mc_atg)"
            ))),
        }
    }
}

/// Parameter swept along a sweep axis. `Gamma` moves both SINR thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    GammaT,
    GammaA,
    Gamma,
    H,
    D,
    PMax,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::GammaT => "gamma_t",
            SweepAxis::GammaA => "gamma_a",
            SweepAxis::Gamma => "gamma",
            SweepAxis::H => "h",
            SweepAxis::D => "d",
            SweepAxis::PMax => "p_max",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "gamma_t" => Ok(SweepAxis::GammaT),
            "gamma_a" => Ok(SweepAxis::GammaA),
            "gamma" => Ok(SweepAxis::Gamma),
            "h" => Ok(SweepAxis::H),
            "d" => Ok(SweepAxis::D),
            "p_max" => Ok(SweepAxis::PMax),
            other => Err(Error::InvalidArgument(format!("unknown sweep axis `{other}`"))),
        }
    }

    /// Copy of `base` with this axis set to `value`.
    pub fn apply(&self, base: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut cfg = base.clone();
        match self {
            SweepAxis::GammaT => cfg.gamma_t_db = value,
            SweepAxis::GammaA => cfg.gamma_a_db = value,
            SweepAxis::Gamma => {
                cfg.gamma_t_db = value;
                cfg.gamma_a_db = value;
            }
            SweepAxis::H => cfg.h = value,
            SweepAxis::D => cfg.d = value,
            SweepAxis::PMax => cfg.p_max_dbm = value,
        }
        cfg
    }
}

/// Engine settings shared by every experiment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EngineSettings {
    pub quad: QuadratureSettings,
    pub sim: SimSettings,
    pub atg: AtgParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageResult {
    pub station: Station,
    pub engine: Engine,
    pub coverage: f64,
    /// Quadrature error estimate or Monte Carlo standard error.
    pub err_est: f64,
    /// Simulation runs, or the quadrature absolute tolerance.
    pub runs_or_tol: f64,
    pub error: Option<String>,
}

impl CoverageResult {
    fn failed(station: Station, engine: Engine, runs_or_tol: f64, err: &Error) -> Self {
        Self {
            station,
            engine,
            coverage: f64::NAN,
            err_est: f64::NAN,
            runs_or_tol,
            error: Some(err.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Evaluates both stations with one engine. Failures are recorded in the
/// returned results rather than propagated.
pub fn evaluate(scn: &Scenario, engine: Engine, settings: &EngineSettings) -> [CoverageResult; 2] {
    match engine {
        Engine::Analytic => {
            let tol = settings.quad.abs_tol;
            let one = |station, r: Result<crate::quadrature::Estimate>| match r {
                Ok(e) => CoverageResult {
                    station,
                    engine,
                    coverage: e.value,
                    err_est: e.abs_err,
                    runs_or_tol: tol,
                    error: None,
                },
                Err(err) => CoverageResult::failed(station, engine, tol, &err),
            };
            [
                one(Station::Tbs, coverage_tbs(scn, &settings.quad)),
                one(Station::Abs, coverage_abs(scn, &settings.quad)),
            ]
        }
        Engine::McPowerlaw | Engine::McAtg => {
            let model = if engine == Engine::McAtg {
                AerialModel::Atg(settings.atg)
            } else {
                AerialModel::PowerLaw
            };
            let sim = settings.sim.with_model(model);
            let runs = sim.runs as f64;
            match simulate_coverage(scn, &sim) {
                Ok((t, a)) => [
                    CoverageResult {
                        station: Station::Tbs,
                        engine,
                        coverage: t.p_hat,
                        err_est: t.std_err,
                        runs_or_tol: runs,
                        error: None,
                    },
                    CoverageResult {
                        station: Station::Abs,
                        engine,
                        coverage: a.p_hat,
                        err_est: a.std_err,
                        runs_or_tol: runs,
                        error: None,
                    },
                ],
                Err(err) => [
                    CoverageResult::failed(Station::Tbs, engine, runs, &err),
                    CoverageResult::failed(Station::Abs, engine, runs, &err),
                ],
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub engines: Vec<Engine>,
    pub base: ScenarioConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("sweep grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("sweep grid must be strictly increasing".into()));
        }
        if self.engines.is_empty() {
            return Err(Error::InvalidArgument("no engines selected".into()));
        }
        self.base.validate()
    }
}

/// Evenly spaced grid including both ends.
pub fn linspace(from: f64, to: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![from],
        n => (0..n)
            .map(|i| from + (to - from) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub results: Vec<CoverageResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Coverage series for one station and engine, in grid order.
    pub fn series(&self, station: Station, engine: Engine) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| {
                p.results
                    .iter()
                    .find(|r| r.station == station && r.engine == engine)
                    .map(|r| (p.axis_value, r.coverage))
            })
            .collect()
    }
}

/// Runs every engine at every grid point. Points are evaluated in parallel;
/// output order follows the grid.
pub fn run_sweep(spec: &SweepSpec, settings: &EngineSettings) -> Result<SweepResult> {
    spec.validate()?;
    let points = spec
        .grid
        .par_iter()
        .map(|&v| {
            let cfg = spec.axis.apply(&spec.base, v);
            let results = match Scenario::new(cfg) {
                Ok(scn) => spec
                    .engines
                    .iter()
                    .flat_map(|&e| evaluate(&scn, e, settings))
                    .collect(),
                Err(err) => spec
                    .engines
                    .iter()
                    .flat_map(|&e| {
                        [
                            CoverageResult::failed(Station::Tbs, e, f64::NAN, &err),
                            CoverageResult::failed(Station::Abs, e, f64::NAN, &err),
                        ]
                    })
                    .collect(),
            };
            SweepPoint {
                axis_value: v,
                results,
            }
        })
        .collect();
    Ok(SweepResult {
        axis: spec.axis,
        points,
    })
}

/// ABS coverage as a function of altitude for one engine.
fn abs_coverage_at(base: &Scenario, h: f64, engine: Engine, settings: &EngineSettings) -> Result<f64> {
    let scn = base.with_h(h)?;
    match engine {
        Engine::Analytic => Ok(coverage_abs(&scn, &settings.quad)?.value),
        _ => {
            let [_, abs] = evaluate(&scn, engine, settings);
            match abs.error {
                None => Ok(abs.coverage),
                Some(msg) => Err(Error::InvalidArgument(msg)),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalHeight {
    pub h_star: f64,
    pub coverage: f64,
    /// Maximizer sits at an end of the search range.
    pub at_lower_edge: bool,
    pub at_upper_edge: bool,
}

impl OptimalHeight {
    pub fn boundary_maximum(&self) -> bool {
        self.at_lower_edge || self.at_upper_edge
    }
}

/// Maximizes a scalar function on `[lo, hi]`: coarse scan, then golden
/// section inside the bracket around the best scan point.
pub fn maximize_scalar<F>(mut f: F, lo: f64, hi: f64, scan_points: usize, resolution: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(hi >= lo) {
        return Err(Error::InvalidArgument(format!("empty search range [{lo}, {hi}]")));
    }
    if hi - lo <= 2.0 * resolution {
        let mid = 0.5 * (lo + hi);
        let cands = [lo, mid, hi];
        let mut best = (lo, f64::NEG_INFINITY);
        for x in cands {
            let v = f(x)?;
            if v > best.1 {
                best = (x, v);
            }
        }
        return Ok(best);
    }
    let grid = linspace(lo, hi, scan_points.max(3));
    let mut values = Vec::with_capacity(grid.len());
    for &x in &grid {
        values.push(f(x)?);
    }
    let (best_i, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let mut a = grid[best_i.saturating_sub(1)];
    let mut b = grid[(best_i + 1).min(grid.len() - 1)];
    let mut best = (grid[best_i], values[best_i]);

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > 2.0 * resolution {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

/// Altitude in `h_range` maximizing the ABS coverage.
pub fn optimal_height(
    base: &Scenario,
    h_range: (f64, f64),
    engine: Engine,
    settings: &EngineSettings,
) -> Result<OptimalHeight> {
    let (lo, hi) = h_range;
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("invalid altitude range [{lo}, {hi}]")));
    }
    let (h_star, coverage) = maximize_scalar(
        |h| abs_coverage_at(base, h, engine, settings),
        lo,
        hi,
        COARSE_SCAN_POINTS,
        HEIGHT_RESOLUTION,
    )?;
    Ok(OptimalHeight {
        h_star,
        coverage,
        at_lower_edge: h_star - lo <= HEIGHT_RESOLUTION,
        at_upper_edge: hi - h_star <= HEIGHT_RESOLUTION,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityPoint {
    pub d: f64,
    pub tbs_floor: f64,
    pub h_star: f64,
    pub abs_coverage_at_h_star: f64,
    pub tbs_coverage_at_h_star: f64,
    /// Largest altitude meeting the TBS floor (top of range on the plateau).
    pub h_max: f64,
    /// The TBS floor, not the unconstrained optimum, limits `h_star`.
    pub constrained: bool,
    /// TBS coverage never drops below the floor within the range.
    pub plateau: bool,
    /// No altitude meets the floor; the coverage fields are NaN.
    pub infeasible: bool,
    pub error: Option<String>,
}

/// Largest `h` in `[lo, hi]` with `P_T(h) >= floor`, exploiting that the TBS
/// coverage is non-increasing in `h`. Returns `(h_max, plateau)`, or `None`
/// when even `lo` misses the floor.
pub fn max_admissible_height(
    base: &Scenario,
    floor: f64,
    h_range: (f64, f64),
    quad: &QuadratureSettings,
) -> Result<Option<(f64, bool)>> {
    let (lo, hi) = h_range;
    let tbs = |h: f64| -> Result<f64> { Ok(coverage_tbs(&base.with_h(h)?, quad)?.value) };
    if tbs(hi)? >= floor {
        return Ok(Some((hi, true)));
    }
    if tbs(lo)? < floor {
        return Ok(None);
    }
    let (mut ok, mut bad) = (lo, hi);
    while bad - ok > 1e-3 {
        let mid = 0.5 * (ok + bad);
        if tbs(mid)? >= floor {
            ok = mid;
        } else {
            bad = mid;
        }
    }
    Ok(Some((ok, false)))
}

fn feasibility_point(
    base_cfg: &ScenarioConfig,
    d: f64,
    floor: f64,
    h_range: (f64, f64),
    settings: &EngineSettings,
) -> Result<FeasibilityPoint> {
    let mut cfg = base_cfg.clone();
    cfg.d = d;
    let scn = Scenario::new(cfg)?;
    let Some((h_max, plateau)) = max_admissible_height(&scn, floor, h_range, &settings.quad)? else {
        return Ok(FeasibilityPoint {
            d,
            tbs_floor: floor,
            h_star: f64::NAN,
            abs_coverage_at_h_star: f64::NAN,
            tbs_coverage_at_h_star: f64::NAN,
            h_max: f64::NAN,
            constrained: true,
            plateau: false,
            infeasible: true,
            error: None,
        });
    };
    let opt = if h_max - h_range.0 > 2.0 * HEIGHT_RESOLUTION {
        optimal_height(&scn, (h_range.0, h_max), Engine::Analytic, settings)?
    } else {
        let c = coverage_abs(&scn.with_h(h_max)?, &settings.quad)?.value;
        OptimalHeight {
            h_star: h_max,
            coverage: c,
            at_lower_edge: true,
            at_upper_edge: true,
        }
    };
    let tbs_at = coverage_tbs(&scn.with_h(opt.h_star)?, &settings.quad)?.value;
    Ok(FeasibilityPoint {
        d,
        tbs_floor: floor,
        h_star: opt.h_star,
        abs_coverage_at_h_star: opt.coverage,
        tbs_coverage_at_h_star: tbs_at,
        h_max,
        constrained: !plateau && opt.at_upper_edge,
        plateau,
        infeasible: false,
        error: None,
    })
}

/// Maximum ABS coverage per stadium offset `d` subject to a TBS coverage
/// floor. Per-point failures are recorded, not propagated.
pub fn feasibility_curve(
    base: &ScenarioConfig,
    d_grid: &[f64],
    tbs_floor: f64,
    h_range: (f64, f64),
    settings: &EngineSettings,
) -> Result<Vec<FeasibilityPoint>> {
    if !(0.0..=1.0).contains(&tbs_floor) {
        return Err(Error::InvalidArgument(format!("TBS floor must be in [0, 1], got {tbs_floor}")));
    }
    if !(h_range.0 >= 0.0 && h_range.1 > h_range.0) {
        return Err(Error::InvalidArgument(format!("invalid altitude range {h_range:?}")));
    }
    Ok(d_grid
        .par_iter()
        .map(|&d| {
            feasibility_point(base, d, tbs_floor, h_range, settings).unwrap_or_else(|err| FeasibilityPoint {
                d,
                tbs_floor,
                h_star: f64::NAN,
                abs_coverage_at_h_star: f64::NAN,
                tbs_coverage_at_h_star: f64::NAN,
                h_max: f64::NAN,
                constrained: false,
                plateau: false,
                infeasible: false,
                error: Some(err.to_string()),
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing_and_application() {
        let base = ScenarioConfig::baseline();
        let cfg = SweepAxis::parse("gamma").unwrap().apply(&base, -5.0);
        assert_eq!((cfg.gamma_t_db, cfg.gamma_a_db), (-5.0, -5.0));
        assert_eq!(SweepAxis::PMax.apply(&base, 10.0).p_max_dbm, 10.0);
        assert!(SweepAxis::parse("x").is_err());
        assert_eq!(Engine::parse("mc_atg").unwrap(), Engine::McAtg);
        assert!(Engine::parse("mc").is_err());
    }

    #[test]
    fn grid_validation() {
        let mut spec = SweepSpec {
            axis: SweepAxis::H,
            grid: vec![],
            engines: vec![Engine::Analytic],
            base: ScenarioConfig::baseline(),
        };
        assert!(spec.validate().is_err());
        spec.grid = vec![1.0, 1.0];
        assert!(spec.validate().is_err());
        spec.grid = vec![1.0, 2.0];
        spec.validate().unwrap();
    }

    #[test]
    fn linspace_ends() {
        assert_eq!(linspace(50.0, 1000.0, 50).len(), 50);
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(linspace(4.0, 9.0, 1), vec![4.0]);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let mut calls = 0;
        let (x, v) = maximize_scalar(
            |x| {
                calls += 1;
                Ok(-(x - 342.3) * (x - 342.3))
            },
            0.0,
            1000.0,
            25,
            1.0,
        )
        .unwrap();
        assert!((x - 342.3).abs() <= 1.0, "{x}");
        assert!(v <= 0.0);
        assert!(calls < 45, "{calls} evaluations");
    }

    #[test]
    fn golden_section_handles_plateau_then_decay() {
        let f = |x: f64| Ok(if x < 600.0 { x / 600.0 } else { 1.0 - (x - 600.0) / 2000.0 });
        let (x, _) = maximize_scalar(f, 0.0, 1000.0, 25, 1.0).unwrap();
        assert!((x - 600.0).abs() <= 1.0, "{x}");
        // maximum at the range edge
        let (x, _) = maximize_scalar(Ok, 0.0, 100.0, 25, 1.0).unwrap();
        assert!(100.0 - x <= 1.0);
    }

    #[test]
    fn sweep_records_invalid_points() {
        let spec = SweepSpec {
            axis: SweepAxis::D,
            grid: vec![200.0, 450.0],
            engines: vec![Engine::McPowerlaw],
            base: ScenarioConfig::baseline(),
        };
        let settings = EngineSettings {
            sim: SimSettings::default().with_runs(2000),
            ..Default::default()
        };
        let res = run_sweep(&spec, &settings).unwrap();
        assert_eq!(res.points.len(), 2);
        assert!(res.points[0].results.iter().all(CoverageResult::is_ok));
        assert!(res.points[1].results.iter().all(|r| !r.is_ok()));
    }

    #[test]
    fn bad_floor_rejected() {
        let base = ScenarioConfig::baseline();
        assert!(feasibility_curve(&base, &[300.0], 1.5, DEFAULT_H_RANGE, &EngineSettings::default()).is_err());
    }
}
