use dronecell::analytic::coverage_tbs;
use dronecell::experiments::*;
use dronecell::montecarlo::Station;
use dronecell::{Scenario, ScenarioConfig, SimSettings};

fn defaults() -> ScenarioConfig {
    ScenarioConfig::baseline()
}

#[test]
fn zero_floor_is_unconstrained_optimum() {
    let settings = EngineSettings::default();
    let d_grid = [150.0, 300.0];
    let curve = feasibility_curve(&defaults(), &d_grid, 0.0, DEFAULT_H_RANGE, &settings).unwrap();
    for p in &curve {
        let mut cfg = defaults();
        cfg.d = p.d;
        let opt = optimal_height(&Scenario::new(cfg).unwrap(), DEFAULT_H_RANGE, Engine::Analytic, &settings).unwrap();
        assert!(p.plateau && !p.constrained);
        assert!((p.h_star - opt.h_star).abs() < 1e-9, "{} vs {}", p.h_star, opt.h_star);
        assert!((p.abs_coverage_at_h_star - opt.coverage).abs() < 1e-12);
    }
}

#[test]
fn floors_order_the_curves_and_hold() {
    let settings = EngineSettings::default();
    let d_grid = linspace(150.0, 400.0, 6);
    let curves: Vec<_> = [0.80, 0.90, 0.99]
        .iter()
        .map(|&f| feasibility_curve(&defaults(), &d_grid, f, DEFAULT_H_RANGE, &settings).unwrap())
        .collect();
    for i in 0..d_grid.len() {
        // an infeasible point ranks below every feasible one
        let c: Vec<f64> = curves
            .iter()
            .map(|c| if c[i].infeasible { -1.0 } else { c[i].abs_coverage_at_h_star })
            .collect();
        assert!(c[0] >= c[1] - 1e-9 && c[1] >= c[2] - 1e-9, "d = {}: {c:?}", d_grid[i]);
    }
    assert!(curves[1].iter().all(|p| !p.infeasible));
    for p in curves.iter().flatten().filter(|p| !p.infeasible) {
        assert!(p.error.is_none());
        let mut cfg = defaults();
        cfg.d = p.d;
        cfg.h = p.h_star;
        let check = coverage_tbs(&Scenario::new(cfg).unwrap(), &settings.quad).unwrap().value;
        assert!(check >= p.tbs_floor - 1e-6, "d = {}: {check} < {}", p.d, p.tbs_floor);
    }
}

#[test]
fn far_stadium_reaches_its_optimal_height() {
    let settings = EngineSettings::default();
    let mut cfg = defaults();
    cfg.r1 = 1000.0;
    let curve = feasibility_curve(&cfg, &[150.0, 800.0], 0.90, DEFAULT_H_RANGE, &settings).unwrap();
    assert!(curve[0].constrained);
    assert!(!curve[1].constrained, "{:?}", curve[1]);
    assert!(curve[1].abs_coverage_at_h_star > curve[0].abs_coverage_at_h_star);
}

#[test]
fn infeasible_floor_is_recorded() {
    let settings = EngineSettings::default();
    let mut cfg = defaults();
    cfg.gamma_t_db = 20.0;
    let curve = feasibility_curve(&cfg, &[200.0], 0.999, DEFAULT_H_RANGE, &settings).unwrap();
    assert!(curve[0].infeasible);
    assert!(curve[0].h_star.is_nan());
}

#[test]
fn sweep_is_deterministic_and_ordered() {
    let spec = SweepSpec {
        axis: SweepAxis::H,
        grid: linspace(100.0, 700.0, 4),
        engines: vec![Engine::Analytic, Engine::McPowerlaw],
        base: defaults(),
    };
    let settings = EngineSettings {
        sim: SimSettings::default().with_runs(20_000).with_seed(42),
        ..Default::default()
    };
    let a = run_sweep(&spec, &settings).unwrap();
    let b = run_sweep(&spec, &settings).unwrap();
    assert_eq!(a, b);
    let hs: Vec<f64> = a.points.iter().map(|p| p.axis_value).collect();
    assert_eq!(hs, spec.grid);
    assert_eq!(a.series(Station::Abs, Engine::McPowerlaw).len(), 4);
    for p in &a.points {
        assert_eq!(p.results.len(), 4);
    }
}
