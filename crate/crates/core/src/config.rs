//! Scenario parameters.
//!
//! [`ScenarioConfig`] is the user-facing parameter set (meters, dBm, dB) as it
//! appears in config files. [`Scenario`] is the validated, immutable form that
//! every engine consumes; it carries the linear-unit values and the
//! power-control case boundaries so that they are computed once.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts a dB value to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// dBm to milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    linear_to_db(mw)
}

/// Every scenario parameter, in the units users write them in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Network disk radius, meters.
    pub r1: f64,
    /// Stadium disk radius, meters.
    pub r2: f64,
    /// Ground distance from the TBS to the stadium center, meters.
    pub d: f64,
    /// ABS altitude above the stadium center, meters.
    pub h: f64,
    /// AsUE maximum transmit power, dBm.
    pub p_max_dbm: f64,
    /// TBS power-control receive threshold, dBm.
    pub rho_b_dbm: f64,
    /// ABS power-control receive threshold, dBm.
    pub rho_d_dbm: f64,
    /// Terrestrial path-loss exponent.
    pub alpha_b: f64,
    /// TsUE to ABS path-loss exponent.
    pub alpha_cd: f64,
    /// AsUE to ABS path-loss exponent.
    pub alpha_dd: f64,
    /// Nakagami order of the AsUE to ABS link.
    pub m_dd: u32,
    /// Nakagami order of the TsUE to ABS link.
    pub m_cd: u32,
    /// Noise power, dBm.
    pub sigma2_dbm: f64,
    /// TBS SINR threshold, dB.
    pub gamma_t_db: f64,
    /// ABS SINR threshold, dB.
    pub gamma_a_db: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::baseline()
    }
}

impl ScenarioConfig {
    /// The reference parameter set used throughout the evaluation.
    pub fn baseline() -> Self {
        Self {
            r1: 500.0,
            r2: 100.0,
            d: 200.0,
            h: 200.0,
            p_max_dbm: 20.0,
            rho_b_dbm: -75.0,
            rho_d_dbm: -50.0,
            alpha_b: 4.0,
            alpha_cd: 3.0,
            alpha_dd: 2.5,
            m_dd: 5,
            m_cd: 3,
            sigma2_dbm: -100.0,
            gamma_t_db: 0.0,
            gamma_a_db: 0.0,
        }
    }

    pub const KEYS: [&'static str; 15] = [
        "r1",
        "r2",
        "d",
        "h",
        "p_max_dbm",
        "rho_b_dbm",
        "rho_d_dbm",
        "alpha_b",
        "alpha_cd",
        "alpha_dd",
        "m_dd",
        "m_cd",
        "sigma2_dbm",
        "gamma_t_db",
        "gamma_a_db",
    ];

    /// Parses the flat `key = value` format. Keys that are absent keep their
    /// default value; unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let mut cfg = Self::baseline();
        for (key, value) in &table {
            let number = match value {
                toml::Value::Float(x) => *x,
                toml::Value::Integer(i) => *i as f64,
                other => {
                    return Err(Error::Parse(format!(
                        "key `{key}` must be numeric, found {}",
                        other.type_str()
                    )))
                }
            };
            cfg.set(key, number)?;
        }
        Ok(cfg)
    }

    /// Assigns a field by name. Nakagami orders must be whole numbers.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "r1" => &mut self.r1,
            "r2" => &mut self.r2,
            "d" => &mut self.d,
            "h" => &mut self.h,
            "p_max_dbm" => &mut self.p_max_dbm,
            "rho_b_dbm" => &mut self.rho_b_dbm,
            "rho_d_dbm" => &mut self.rho_d_dbm,
            "alpha_b" => &mut self.alpha_b,
            "alpha_cd" => &mut self.alpha_cd,
            "alpha_dd" => &mut self.alpha_dd,
            "sigma2_dbm" => &mut self.sigma2_dbm,
            "gamma_t_db" => &mut self.gamma_t_db,
            "gamma_a_db" => &mut self.gamma_a_db,
            "m_dd" => {
                self.m_dd = nakagami_order("m_dd", value)?;
                return Ok(());
            }
            "m_cd" => {
                self.m_cd = nakagami_order("m_cd", value)?;
                return Ok(());
            }
            other => return Err(Error::Parse(format!("unknown config key `{other}`"))),
        };
        *slot = value;
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "r1" => self.r1,
            "r2" => self.r2,
            "d" => self.d,
            "h" => self.h,
            "p_max_dbm" => self.p_max_dbm,
            "rho_b_dbm" => self.rho_b_dbm,
            "rho_d_dbm" => self.rho_d_dbm,
            "alpha_b" => self.alpha_b,
            "alpha_cd" => self.alpha_cd,
            "alpha_dd" => self.alpha_dd,
            "m_dd" => self.m_dd as f64,
            "m_cd" => self.m_cd as f64,
            "sigma2_dbm" => self.sigma2_dbm,
            "gamma_t_db" => self.gamma_t_db,
            "gamma_a_db" => self.gamma_a_db,
            _ => return None,
        })
    }

    /// Applies a `key=value` override as passed to `--set`.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("override `{assignment}` is not of the form key=value")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("override `{assignment}` has a non-numeric value")))?;
        self.set(key.trim(), value)
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let v = self.get(key).expect("known key");
            if key.starts_with("m_") {
                out.push_str(&format!("{key} = {}\n", v as u32));
            } else {
                out.push_str(&format!("{key} = {v:?}\n"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for key in Self::KEYS {
            let v = self.get(key).expect("known key");
            if !v.is_finite() {
                return Err(Error::Validation(format!("{key} must be finite, got {v}")));
            }
        }
        if self.r1 <= 0.0 {
            return Err(Error::Validation(format!("r1 must be > 0, got {}", self.r1)));
        }
        if self.r2 <= 0.0 {
            return Err(Error::Validation(format!("r2 must be > 0, got {}", self.r2)));
        }
        if self.h < 0.0 {
            return Err(Error::Validation(format!("h must be >= 0, got {}", self.h)));
        }
        if self.d < 0.0 {
            return Err(Error::Validation(format!("d must be >= 0, got {}", self.d)));
        }
        if self.d + self.r2 > self.r1 {
            return Err(Error::Validation(format!(
                "stadium must lie inside the network region: d + r2 = {} > r1 = {}",
                self.d + self.r2,
                self.r1
            )));
        }
        for (name, alpha) in [
            ("alpha_b", self.alpha_b),
            ("alpha_cd", self.alpha_cd),
            ("alpha_dd", self.alpha_dd),
        ] {
            if alpha <= 0.0 {
                return Err(Error::Validation(format!("{name} must be > 0, got {alpha}")));
            }
        }
        if self.m_dd < 1 || self.m_cd < 1 {
            return Err(Error::Validation(format!(
                "Nakagami orders must be >= 1, got m_dd = {}, m_cd = {}",
                self.m_dd, self.m_cd
            )));
        }
        Ok(())
    }
}

fn nakagami_order(key: &str, value: f64) -> Result<u32> {
    if !value.is_finite() || value.fract() != 0.0 || value < 1.0 || value > u32::MAX as f64 {
        return Err(Error::Validation(format!(
            "{key} must be a positive integer, got {value}"
        )));
    }
    Ok(value as u32)
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg = ScenarioConfig::from_toml_str(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Which branch of the AsUE power-control law applies at a given altitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Every AsUE transmits at `P_max`.
    AlwaysMax,
    /// AsUEs closer than `z_cap` invert their path loss, the rest saturate.
    Mixed,
    /// Every AsUE fully inverts its path loss.
    AlwaysInversion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerControlBoundaries {
    /// Distance at which channel inversion reaches `P_max`, meters.
    pub z_cap: f64,
    /// Largest altitude at which every AsUE can invert; 0 when `z_cap < r2`.
    pub h_low: f64,
    pub regime: Regime,
}

impl PowerControlBoundaries {
    /// Classifies an arbitrary altitude against the same thresholds.
    pub fn regime_at(&self, h: f64, r2: f64) -> Regime {
        if h >= self.z_cap {
            Regime::AlwaysMax
        } else if self.z_cap >= r2 && h <= self.h_low {
            Regime::AlwaysInversion
        } else {
            Regime::Mixed
        }
    }
}

/// Computes the power-control thresholds for `cfg`.
pub fn boundaries(cfg: &ScenarioConfig) -> PowerControlBoundaries {
    let ratio = dbm_to_mw(cfg.p_max_dbm) / dbm_to_mw(cfg.rho_d_dbm);
    let z_cap = ratio.powf(1.0 / cfg.alpha_dd);
    let h_low = if z_cap >= cfg.r2 {
        (z_cap * z_cap - cfg.r2 * cfg.r2).sqrt()
    } else {
        0.0
    };
    let mut b = PowerControlBoundaries {
        z_cap,
        h_low,
        regime: Regime::Mixed,
    };
    b.regime = b.regime_at(cfg.h, cfg.r2);
    b
}

/// A validated scenario with all powers converted to milliwatts.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    cfg: ScenarioConfig,
    pub p_max: f64,
    pub rho_b: f64,
    pub rho_d: f64,
    pub sigma2: f64,
    pub gamma_t: f64,
    pub gamma_a: f64,
    pub bounds: PowerControlBoundaries,
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.d < cfg.r2 {
            log::warn!(
                "d = {} < r2 = {}: the TBS sits inside the stadium footprint",
                cfg.d,
                cfg.r2
            );
        }
        Ok(Self {
            p_max: dbm_to_mw(cfg.p_max_dbm),
            rho_b: dbm_to_mw(cfg.rho_b_dbm),
            rho_d: dbm_to_mw(cfg.rho_d_dbm),
            sigma2: dbm_to_mw(cfg.sigma2_dbm),
            gamma_t: db_to_linear(cfg.gamma_t_db),
            gamma_a: db_to_linear(cfg.gamma_a_db),
            bounds: boundaries(&cfg),
            cfg,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    /// Same scenario with one parameter replaced.
    pub fn with(&self, key: &str, value: f64) -> Result<Self> {
        let mut cfg = self.cfg.clone();
        cfg.set(key, value)?;
        Self::new(cfg)
    }

    pub fn with_h(&self, h: f64) -> Result<Self> {
        self.with("h", h)
    }

    pub fn r1(&self) -> f64 {
        self.cfg.r1
    }
    pub fn r2(&self) -> f64 {
        self.cfg.r2
    }
    pub fn d(&self) -> f64 {
        self.cfg.d
    }
    pub fn h(&self) -> f64 {
        self.cfg.h
    }
    pub fn alpha_b(&self) -> f64 {
        self.cfg.alpha_b
    }
    pub fn alpha_cd(&self) -> f64 {
        self.cfg.alpha_cd
    }
    pub fn alpha_dd(&self) -> f64 {
        self.cfg.alpha_dd
    }
    pub fn m_dd(&self) -> u32 {
        self.cfg.m_dd
    }
    pub fn m_cd(&self) -> u32 {
        self.cfg.m_cd
    }
    pub fn regime(&self) -> Regime {
        self.bounds.regime
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn baseline_is_valid() {
        let text = "\
# reference setup
r1 = 500
r2 = 100
d = 200
h = 200
p_max_dbm = 20
rho_b_dbm = -75
rho_d_dbm = -50
alpha_dd = 2.5
alpha_cd = 3
alpha_b = 4
m_dd = 5
m_cd = 3
sigma2_dbm = -100
gamma_t_db = 0
gamma_a_db = 0
";
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg, ScenarioConfig::baseline());
    }

    #[test]
    fn stadium_outside_network_is_rejected() {
        let mut cfg = ScenarioConfig::baseline();
        cfg.d = 450.0;
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("d + r2")), "{err}");
    }

    #[test]
    fn fractional_nakagami_order_is_rejected() {
        let err = ScenarioConfig::from_toml_str("m_dd = 2.5").unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("m_dd")), "{err}");
        let mut cfg = ScenarioConfig::baseline();
        assert!(cfg.apply_override("m_cd=0").is_err());
    }

    #[test]
    fn malformed_and_unknown_keys() {
        assert!(matches!(
            ScenarioConfig::from_toml_str("r1 = = 3"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_toml_str("radius = 3"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_toml_str("r1 = \"big\""),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn overrides() {
        let mut cfg = ScenarioConfig::baseline();
        cfg.apply_override("h=700").unwrap();
        cfg.apply_override(" p_max_dbm = 10 ").unwrap();
        assert_eq!(cfg.h, 700.0);
        assert_eq!(cfg.p_max_dbm, 10.0);
        assert!(cfg.apply_override("h").is_err());
        assert!(cfg.apply_override("h=abc").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ScenarioConfig::baseline();
        cfg.h = 342.5;
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn default_boundaries() {
        let b = boundaries(&ScenarioConfig::baseline());
        // (P_max / rho_D) = 10^7
        let z_cap = 1e7f64.powf(1.0 / 2.5);
        assert_relative_eq!(b.z_cap, z_cap, max_relative = 1e-12);
        assert_relative_eq!(b.z_cap, 630.957, max_relative = 1e-6);
        assert_relative_eq!(b.h_low, (z_cap * z_cap - 100.0 * 100.0).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(b.h_low, 622.98, epsilon = 0.01);
        assert_eq!(b.regime, Regime::AlwaysInversion);

        let mut cfg = ScenarioConfig::baseline();
        cfg.h = 700.0;
        assert_eq!(boundaries(&cfg).regime, Regime::AlwaysMax);
        cfg.h = 625.0;
        assert_eq!(boundaries(&cfg).regime, Regime::Mixed);
    }

    #[test]
    fn boundary_ties() {
        let cfg = ScenarioConfig::baseline();
        let b = boundaries(&cfg);
        assert_eq!(b.regime_at(b.z_cap, cfg.r2), Regime::AlwaysMax);
        assert_eq!(b.regime_at(b.h_low, cfg.r2), Regime::AlwaysInversion);
    }

    #[test]
    fn saturated_stadium_has_no_inversion_regime() {
        let mut cfg = ScenarioConfig::baseline();
        // z_cap = 10^(2/2.5) ~ 6.3 m < r2
        cfg.p_max_dbm = -30.0;
        cfg.h = 0.0;
        let b = boundaries(&cfg);
        assert_eq!(b.h_low, 0.0);
        assert_eq!(b.regime, Regime::Mixed);
    }

    #[test]
    fn scenario_linear_units() {
        let s = Scenario::new(ScenarioConfig::baseline()).unwrap();
        assert_relative_eq!(s.p_max, 100.0, max_relative = 1e-15);
        assert_relative_eq!(s.rho_d, 1e-5, max_relative = 1e-15);
        assert_relative_eq!(s.sigma2, 1e-10, max_relative = 1e-15);
        assert_eq!(s.gamma_t, 1.0);
    }

    proptest! {
        #[test]
        fn dbm_round_trip(x in -200.0f64..200.0) {
            let back = mw_to_dbm(dbm_to_mw(x));
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
        }

        #[test]
        fn regimes_partition_heights(h in 0.0f64..2000.0, p in -20.0f64..40.0) {
            let mut cfg = ScenarioConfig::baseline();
            cfg.h = h;
            cfg.p_max_dbm = p;
            let b = boundaries(&cfg);
            let is_max = h >= b.z_cap;
            let is_inv = b.z_cap >= cfg.r2 && h <= b.h_low;
            prop_assert!(!(is_max && is_inv));
            match b.regime {
                Regime::AlwaysMax => prop_assert!(is_max),
                Regime::AlwaysInversion => prop_assert!(is_inv),
                Regime::Mixed => {
                    prop_assert!(!is_max && !is_inv);
                    prop_assert!(h < b.z_cap && b.z_cap < (h * h + cfg.r2 * cfg.r2).sqrt());
                }
            }
        }

        #[test]
        fn more_power_never_saturates_earlier(h in 0.0f64..1500.0, p in -10.0f64..30.0, dp in 0.0f64..10.0) {
            let rank = |r: Regime| match r {
                Regime::AlwaysInversion => 0,
                Regime::Mixed => 1,
                Regime::AlwaysMax => 2,
            };
            let mut cfg = ScenarioConfig::baseline();
            cfg.h = h;
            cfg.p_max_dbm = p;
            let lo = boundaries(&cfg).regime;
            cfg.p_max_dbm = p + dp;
            let hi = boundaries(&cfg).regime;
            prop_assert!(rank(hi) <= rank(lo));
        }
    }
}
