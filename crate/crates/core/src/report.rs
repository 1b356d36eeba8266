//! Tabular result rows and their CSV / JSON serializations.
//!
//! CSV layout: `# key: value` metadata lines, then the fixed header
//! [`CSV_HEADER`], then one row per (grid point, station, engine). Empty
//! cells mean "not applicable". JSON layout: `{"metadata": {...}, "rows": [...]}`
//! with the same row objects.

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::experiments::{FeasibilityPoint, OptimalHeight, SweepResult};
use crate::montecarlo::Station;

pub const CSV_HEADER: [&str; 14] = [
    "axis_name",
    "axis_value",
    "station",
    "engine",
    "coverage",
    "err_est",
    "runs_or_tol",
    "status",
    "h_star",
    "h_max",
    "tbs_floor",
    "tbs_coverage",
    "constrained",
    "plateau",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub axis_name: String,
    pub axis_value: f64,
    /// `T` or `A`.
    pub station: String,
    pub engine: String,
    pub coverage: f64,
    pub err_est: f64,
    pub runs_or_tol: f64,
    /// `ok`, `infeasible`, or `error: <message>`.
    pub status: String,
    pub h_star: Option<f64>,
    pub h_max: Option<f64>,
    pub tbs_floor: Option<f64>,
    pub tbs_coverage: Option<f64>,
    pub constrained: Option<bool>,
    pub plateau: Option<bool>,
}

impl ResultRow {
    fn base(axis_name: &str, axis_value: f64, station: Station, engine: &str) -> Self {
        Self {
            axis_name: axis_name.to_string(),
            axis_value,
            station: station_code(station).to_string(),
            engine: engine.to_string(),
            coverage: f64::NAN,
            err_est: f64::NAN,
            runs_or_tol: f64::NAN,
            status: "ok".into(),
            h_star: None,
            h_max: None,
            tbs_floor: None,
            tbs_coverage: None,
            constrained: None,
            plateau: None,
        }
    }

    fn csv_record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_sig10).unwrap_or_default();
        let flag = |v: Option<bool>| v.map(|b| b.to_string()).unwrap_or_default();
        vec![
            self.axis_name.clone(),
            fmt_sig10(self.axis_value),
            self.station.clone(),
            self.engine.clone(),
            fmt_sig10(self.coverage),
            fmt_sig10(self.err_est),
            fmt_sig10(self.runs_or_tol),
            self.status.clone(),
            opt(self.h_star),
            opt(self.h_max),
            opt(self.tbs_floor),
            opt(self.tbs_coverage),
            flag(self.constrained),
            flag(self.plateau),
        ]
    }
}

pub fn station_code(s: Station) -> &'static str {
    match s {
        Station::Tbs => "T",
        Station::Abs => "A",
    }
}

fn status_of(error: &Option<String>) -> String {
    match error {
        None => "ok".into(),
        Some(msg) => format!("error: {msg}"),
    }
}

pub fn sweep_rows(res: &SweepResult) -> Vec<ResultRow> {
    let axis = res.axis.name();
    res.points
        .iter()
        .flat_map(|p| {
            p.results.iter().map(move |r| ResultRow {
                coverage: r.coverage,
                err_est: r.err_est,
                runs_or_tol: r.runs_or_tol,
                status: status_of(&r.error),
                ..ResultRow::base(axis, p.axis_value, r.station, r.engine.name())
            })
        })
        .collect()
}

/// One ABS row per scenario; `axis` names the parameter that varies.
/// `err_est` is not estimated for optimizer output and stays NaN.
pub fn optimal_height_rows(axis: &str, points: &[(f64, OptimalHeight)], engine: &str, tol: f64) -> Vec<ResultRow> {
    points
        .iter()
        .map(|(v, o)| ResultRow {
            coverage: o.coverage,
            runs_or_tol: tol,
            status: if o.boundary_maximum() {
                "ok: maximum at range edge".into()
            } else {
                "ok".into()
            },
            h_star: Some(o.h_star),
            ..ResultRow::base(axis, *v, Station::Abs, engine)
        })
        .collect()
}

/// One ABS row per offset `d`.
pub fn feasibility_rows(points: &[FeasibilityPoint], tol: f64) -> Vec<ResultRow> {
    points
        .iter()
        .map(|p| ResultRow {
            coverage: p.abs_coverage_at_h_star,
            runs_or_tol: tol,
            status: if p.infeasible {
                "infeasible".into()
            } else {
                status_of(&p.error)
            },
            h_star: Some(p.h_star),
            h_max: Some(p.h_max),
            tbs_floor: Some(p.tbs_floor),
            tbs_coverage: Some(p.tbs_coverage_at_h_star),
            constrained: Some(p.constrained),
            plateau: Some(p.plateau),
            ..ResultRow::base("d", p.d, Station::Abs, "analytic")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: ScenarioConfig,
}

impl RunMetadata {
    pub fn new(command: &str, seed: u64, config: ScenarioConfig) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
        }
    }
}

/// Formats like C's `%.10g`.
pub fn fmt_sig10(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.9e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-5..10).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn to_csv(meta: &RunMetadata, rows: &[ResultRow]) -> Result<String> {
    let mut out = String::new();
    out.push_str(&format!("# command: {}\n", meta.command));
    out.push_str(&format!("# version: {}\n", meta.version));
    out.push_str(&format!("# seed: {}\n", meta.seed));
    for key in ScenarioConfig::KEYS {
        let v = meta.config.get(key).expect("known key");
        out.push_str(&format!("# {key}: {}\n", fmt_sig10(v)));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Parse(format!("CSV serialization failed: {e}"));
    w.write_record(CSV_HEADER).map_err(ser)?;
    for row in rows {
        w.write_record(row.csv_record()).map_err(ser)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).expect("utf-8 csv"));
    Ok(out)
}

#[derive(Serialize)]
struct JsonDoc<'a> {
    metadata: &'a RunMetadata,
    rows: Vec<serde_json::Value>,
}

/// Non-finite numbers become `null`; other numbers carry 10 significant digits.
fn json_number(x: f64) -> serde_json::Value {
    if !x.is_finite() {
        return serde_json::Value::Null;
    }
    let rounded: f64 = fmt_sig10(x).parse().expect("round trip");
    serde_json::json!(rounded)
}

pub fn to_json(meta: &RunMetadata, rows: &[ResultRow]) -> Result<String> {
    let rows = rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "axis_name": r.axis_name,
                "axis_value": json_number(r.axis_value),
                "station": r.station,
                "engine": r.engine,
                "coverage": json_number(r.coverage),
                "err_est": json_number(r.err_est),
                "runs_or_tol": json_number(r.runs_or_tol),
                "status": r.status,
                "h_star": r.h_star.map(json_number),
                "h_max": r.h_max.map(json_number),
                "tbs_floor": r.tbs_floor.map(json_number),
                "tbs_coverage": r.tbs_coverage.map(json_number),
                "constrained": r.constrained,
                "plateau": r.plateau,
            })
        })
        .collect();
    let doc = JsonDoc { metadata: meta, rows };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig10_formatting() {
        assert_eq!(fmt_sig10(342.0), "342");
        assert_eq!(fmt_sig10(0.123456789012345), "0.123456789");
        assert_eq!(fmt_sig10(1e6), "1000000");
        assert_eq!(fmt_sig10(1e-8), "1e-08");
        assert_eq!(fmt_sig10(-2.5e12), "-2.5e+12");
        assert_eq!(fmt_sig10(1.0 / 3.0), "0.3333333333");
        assert_eq!(fmt_sig10(f64::NAN), "NaN");
        assert_eq!(fmt_sig10(0.0), "0");
    }

    #[test]
    fn csv_has_metadata_then_header() {
        let meta = RunMetadata::new("sweep", 0, ScenarioConfig::baseline());
        let mut row = ResultRow::base("h", 200.0, Station::Tbs, "analytic");
        row.coverage = 0.5;
        row.status = "error: bad, really".into();
        let text = to_csv(&meta, &[row]).unwrap();
        assert!(text.contains("# seed: 0\n"));
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body[0], CSV_HEADER.join(","));
        assert!(body[1].starts_with("h,200,T,analytic,0.5,NaN,NaN,\"error: bad, really\""));
        assert_eq!(body.len(), 2);
    }

    #[test]
    fn json_mirrors_rows() {
        let meta = RunMetadata::new("eval", 7, ScenarioConfig::baseline());
        let mut row = ResultRow::base("h", 200.0, Station::Abs, "mc_powerlaw");
        row.coverage = 0.25;
        let text = to_json(&meta, &[row]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["metadata"]["seed"], 7);
        assert_eq!(v["metadata"]["config"]["r1"], 500.0);
        assert_eq!(v["rows"][0]["station"], "A");
        assert_eq!(v["rows"][0]["coverage"], 0.25);
        assert!(v["rows"][0]["err_est"].is_null());
    }
}
