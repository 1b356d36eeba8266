//! Path loss, small-scale fading, AsUE power control, and the air-to-ground
//! LOS/NLOS channel used by the simulator.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::config::{db_to_linear, Regime, Scenario};
use crate::error::{Error, Result};

/// `ell^(−alpha)`.
#[inline]
pub fn path_loss(ell: f64, alpha: f64) -> f64 {
    ell.powf(-alpha)
}

/// Instantaneous AsUE transmit power (mW) at 3-D distance `z` from the ABS.
///
/// Follows the case split on the configured altitude: saturated at `P_max`
/// when the ABS is above `z_cap`, full inversion `ρ_D z^α_DD` when every AsUE
/// can afford it, and per-UE in between. Numerically this is
/// `min(ρ_D z^α_DD, P_max)`.
pub fn asue_tx_power(z: f64, scn: &Scenario) -> f64 {
    match scn.regime() {
        Regime::AlwaysMax => scn.p_max,
        Regime::AlwaysInversion => scn.rho_d * z.powf(scn.alpha_dd()),
        Regime::Mixed => {
            if z >= scn.bounds.z_cap {
                scn.p_max
            } else {
                scn.rho_d * z.powf(scn.alpha_dd())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FadingKind {
    /// Unit-mean exponential power gain.
    RayleighExp,
    /// Gamma power gain with shape `m` and scale `1/m`.
    NakagamiGamma(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingDraw {
    pub gain: f64,
    pub kind: FadingKind,
}

/// Reusable sampler for one fading law.
#[derive(Debug, Clone, Copy)]
pub struct Fading {
    kind: FadingKind,
    gamma: Option<Gamma<f64>>,
}

impl Fading {
    pub fn new(kind: FadingKind) -> Result<Self> {
        let gamma = match kind {
            FadingKind::RayleighExp => None,
            FadingKind::NakagamiGamma(m) => {
                if m == 0 {
                    return Err(Error::InvalidArgument("Nakagami order must be >= 1".into()));
                }
                let m = m as f64;
                Some(Gamma::new(m, 1.0 / m).map_err(|e| Error::InvalidArgument(e.to_string()))?)
            }
        };
        Ok(Self { kind, gamma })
    }

    pub fn kind(&self) -> FadingKind {
        self.kind
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.gamma {
            None => Exp1.sample(rng),
            Some(g) => g.sample(rng),
        }
    }
}

pub fn draw_fading<R: Rng + ?Sized>(rng: &mut R, kind: FadingKind) -> Result<FadingDraw> {
    Ok(FadingDraw {
        gain: Fading::new(kind)?.sample(rng),
        kind,
    })
}

/// Parameters of the sigmoid-LOS air-to-ground channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtgParams {
    pub c_const: f64,
    pub b_const: f64,
    /// Extra NLOS attenuation, dB (negative means loss).
    pub eta_db: f64,
}

impl Default for AtgParams {
    fn default() -> Self {
        Self {
            c_const: 4.88,
            b_const: 0.43,
            eta_db: -20.0,
        }
    }
}

impl AtgParams {
    pub fn new(c_const: f64, b_const: f64, eta_db: f64) -> Result<Self> {
        if !(c_const > 0.0 && b_const > 0.0) || !eta_db.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "ATG constants must be positive, got C = {c_const}, B = {b_const}"
            )));
        }
        Ok(Self {
            c_const,
            b_const,
            eta_db,
        })
    }

    /// LOS probability at elevation angle `theta_deg` (degrees).
    pub fn los_probability(&self, theta_deg: f64) -> f64 {
        1.0 / (1.0 + self.c_const * (-self.b_const * (theta_deg - self.c_const)).exp())
    }

    pub fn eta_linear(&self) -> f64 {
        db_to_linear(self.eta_db)
    }
}

/// Elevation of an aerial node seen from the ground, degrees.
pub fn elevation_deg(horizontal: f64, height: f64) -> f64 {
    height.atan2(horizontal).to_degrees()
}

/// Attenuation for a fixed LOS state.
#[inline]
pub fn atg_loss_given_state(los: bool, ell: f64, alpha: f64, params: &AtgParams) -> f64 {
    let base = path_loss(ell, alpha);
    if los {
        base
    } else {
        params.eta_linear() * base
    }
}

/// Random air-to-ground attenuation: a Bernoulli LOS draw at the link's
/// elevation angle, then `ℓ^(−α)` scaled by `η` when NLOS.
pub fn atg_loss<R: Rng + ?Sized>(
    rng: &mut R,
    horizontal: f64,
    height: f64,
    alpha: f64,
    params: &AtgParams,
) -> f64 {
    let p_los = params.los_probability(elevation_deg(horizontal, height));
    let los = rng.random::<f64>() < p_los;
    atg_loss_given_state(los, horizontal.hypot(height), alpha, params)
}
