//! Closed-form coverage machinery evaluated by adaptive quadrature.
//!
//! * TBS side: the Laplace transform of the AsUE interference at the TBS is
//!   a double integral over the AsUE→ABS distance `z` and the AsUE bearing
//!   `θ`; the TBS coverage is that transform times a noise factor.
//! * ABS side: the Laplace transform of the TsUE interference at the ABS,
//!   and its `s`-derivatives, integrate a Gamma kernel over the TsUE→ABS
//!   distance and bearing (near and far regions). The ABS coverage averages
//!   a finite Gamma-tail series of those derivatives over the AsUE distance.
//!
//! All bearing integrals exploit the `θ ↦ −θ` symmetry and run over `[0, π]`
//! (or `[0, ω̂]`).

use std::f64::consts::PI;

use serde::Serialize;

use crate::channel::asue_tx_power;
use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::geometry::{asue_z_support, omega_hat, pdf_z_asue, tsue_z_knot, tsue_z_support};
use crate::quadrature::{self, integrate_vec, Estimate, QuadratureSettings};
use crate::stats::CompensatedSum;

/// Inner integrals run with tolerances this much tighter than the outer one.
const INNER_TIGHTEN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceEval {
    pub s: f64,
    pub value: f64,
    pub abs_err_est: f64,
}

/// Squared ground distance between a point at radius `r` (bearing `angle`)
/// around the stadium center and the TBS, by the law of cosines.
#[inline]
fn ground_dist_sq_to_tbs(r_sq: f64, r: f64, d: f64, angle_cos: f64) -> f64 {
    (r_sq + d * d - 2.0 * r * d * angle_cos).max(0.0)
}

#[inline]
fn pow_half(x_sq: f64, alpha: f64) -> f64 {
    if alpha == 4.0 {
        x_sq * x_sq
    } else if alpha == 2.0 {
        x_sq
    } else {
        x_sq.powf(0.5 * alpha)
    }
}

/// Rayleigh-fading conditional Laplace kernel at the TBS for an AsUE at
/// 3-D distance `z` and bearing `theta`, transmitting with power `p`.
pub fn tbs_kernel(s: f64, p: f64, theta: f64, z: f64, scn: &Scenario) -> f64 {
    let h = scn.h();
    let r_sq = (z * z - h * h).max(0.0);
    let dist_sq = ground_dist_sq_to_tbs(r_sq, r_sq.sqrt(), scn.d(), theta.cos());
    let path = pow_half(dist_sq, scn.alpha_b());
    if path == 0.0 {
        return 0.0;
    }
    1.0 / (1.0 + s * p / path)
}

/// Laplace transform of the AsUE interference power at the TBS.
pub fn laplace_tbs_interference(s: f64, scn: &Scenario, quad: &QuadratureSettings) -> Result<LaplaceEval> {
    check_s(s)?;
    quad.validate()?;
    if s == 0.0 {
        return Ok(LaplaceEval {
            s,
            value: 1.0,
            abs_err_est: 0.0,
        });
    }
    let inner = quad.tightened(INNER_TIGHTEN);
    let (lo, hi) = asue_z_support(scn);
    let mut inner_err: f64 = 0.0;
    let outer = quadrature::try_integrate(
        |z| {
            let p = asue_tx_power(z, scn);
            let avg = quadrature::integrate(|t| tbs_kernel(s, p, t, z, scn), 0.0, PI, &[], &inner)?;
            inner_err = inner_err.max(avg.abs_err / PI);
            Ok(avg.value / PI * pdf_z_asue(z, scn))
        },
        lo,
        hi,
        &[scn.bounds.z_cap],
        quad,
    )?;
    Ok(LaplaceEval {
        s,
        value: outer.value.clamp(0.0, 1.0),
        abs_err_est: outer.abs_err + inner_err,
    })
}

/// TBS uplink coverage: `exp(−sσ²)·L(s)` with `s = γ_T/ρ_B`.
pub fn coverage_tbs(scn: &Scenario, quad: &QuadratureSettings) -> Result<Estimate> {
    let s = scn.gamma_t / scn.rho_b;
    let lap = laplace_tbs_interference(s, scn, quad)?;
    let noise = (-s * scn.sigma2).exp();
    Ok(Estimate::new(
        (noise * lap.value).clamp(0.0, 1.0),
        noise * lap.abs_err_est,
    ))
}

/// Interference scale `c = ρ_B z^(−α_CD) d_T^(α_B)` for a TsUE at 3-D distance
/// `z` from the ABS and bearing `omega`; the interference is `c·G_T`.
pub fn abs_interference_scale(omega: f64, z: f64, scn: &Scenario) -> f64 {
    let h = scn.h();
    let r_sq = (z * z - h * h).max(0.0);
    let dt_sq = ground_dist_sq_to_tbs(r_sq, r_sq.sqrt(), scn.d(), omega.cos());
    scn.rho_b * z.powf(-scn.alpha_cd()) * pow_half(dt_sq, scn.alpha_b())
}

/// Nakagami-`m` conditional Laplace kernel at the ABS,
/// `m^m (m + s c)^(−m)`.
pub fn abs_kernel(s: f64, omega: f64, z: f64, scn: &Scenario) -> f64 {
    let m = scn.m_cd() as f64;
    let c = abs_interference_scale(omega, z, scn);
    (1.0 + s * c / m).powf(-m)
}

/// Fills `out[k]` with `u^k · d^k/ds^k [m^m (m + s c)^(−m)]` for
/// `k = 0..out.len()`. Scaling by `u` keeps every order O(1).
#[inline]
fn gamma_kernel_derivatives(s: f64, u: f64, c: f64, m: f64, out: &mut [f64]) {
    let x = 1.0 + s * c / m;
    let mut coeff = 1.0;
    let mut base = x.powf(-m);
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 {
            let kf = (k - 1) as f64;
            // (−u c)·(m + k − 1)/m per order, one more power of 1/x
            coeff *= -u * c * (m + kf) / m;
            base /= x;
        }
        *slot = coeff * base;
    }
}

/// The TsUE interference integrals at the ABS for a fixed scenario.
struct AbsInterference<'a> {
    scn: &'a Scenario,
    quad: QuadratureSettings,
}

impl<'a> AbsInterference<'a> {
    fn new(scn: &'a Scenario, quad: &QuadratureSettings) -> Self {
        Self { scn, quad: *quad }
    }

    /// `u^k L^(k)(s)` for `k = 0..orders`, plus the worst inner error seen.
    fn scaled_derivatives(&self, s: f64, u: f64, orders: usize) -> Result<Vec<Estimate>> {
        let scn = self.scn;
        let m = scn.m_cd() as f64;
        let (lo, hi) = tsue_z_support(scn);
        let knot = tsue_z_knot(scn);
        let area = scn.r1() * scn.r1() - scn.r2() * scn.r2();
        let inner = self.quad.tightened(INNER_TIGHTEN);
        let mut inner_err: f64 = 0.0;

        let mut bearing_integral = |z: f64, upper: f64, out: &mut [f64]| -> Result<()> {
            let mut buf = vec![0.0; orders];
            let est = integrate_vec(
                |w, o: &mut [f64]| {
                    let c = abs_interference_scale(w, z, scn);
                    gamma_kernel_derivatives(s, u, c, m, &mut buf);
                    o.copy_from_slice(&buf);
                    Ok(())
                },
                0.0,
                upper,
                &[],
                orders,
                &inner,
            )?;
            for (o, e) in out.iter_mut().zip(&est) {
                *o = e.value;
                inner_err = inner_err.max(e.abs_err);
            }
            Ok(())
        };

        // near region: bearing uniform over the full circle
        let near = if knot > lo {
            integrate_vec(
                |z, out: &mut [f64]| {
                    bearing_integral(z, PI, out)?;
                    // f_Z(z) · 1/(2π) · 2 (symmetry)
                    let w = 2.0 * z / area / PI;
                    out.iter_mut().for_each(|v| *v *= w);
                    Ok(())
                },
                lo,
                knot,
                &[],
                orders,
                &self.quad,
            )?
        } else {
            vec![Estimate::default(); orders]
        };

        // far region: bearing limited to ±ω̂(z); f_Ω·f_Z = z / (π A).
        // z = knot + (hi − knot)(1 − cos πt)/2 absorbs the square-root
        // behaviour of ω̂ at both ends of the interval.
        let far = if hi > knot && scn.d() > 0.0 {
            let span = hi - knot;
            let h = scn.h();
            integrate_vec(
                |t, out: &mut [f64]| {
                    let z = knot + 0.5 * span * (1.0 - (PI * t).cos());
                    let jac = 0.5 * span * PI * (PI * t).sin();
                    let r = (z * z - h * h).max(0.0).sqrt();
                    let w_hat = omega_hat(r, scn)?;
                    bearing_integral(z, w_hat, out)?;
                    let w = 2.0 * z / (PI * area) * jac;
                    out.iter_mut().for_each(|v| *v *= w);
                    Ok(())
                },
                0.0,
                1.0,
                &[],
                orders,
                &self.quad,
            )?
        } else {
            vec![Estimate::default(); orders]
        };

        Ok(near
            .into_iter()
            .zip(far)
            .map(|(a, b)| {
                let sum = a + b;
                Estimate::new(sum.value, sum.abs_err + inner_err)
            })
            .collect())
    }

    /// Reference interference scale used to normalise derivatives at `s = 0`.
    fn reference_scale(&self) -> f64 {
        let scn = self.scn;
        let (lo, _) = tsue_z_support(scn);
        abs_interference_scale(0.0, lo, scn).max(f64::MIN_POSITIVE)
    }
}

/// Laplace transform of the TsUE interference power at the ABS.
pub fn laplace_abs_interference(s: f64, scn: &Scenario, quad: &QuadratureSettings) -> Result<LaplaceEval> {
    check_s(s)?;
    quad.validate()?;
    if s == 0.0 {
        return Ok(LaplaceEval {
            s,
            value: 1.0,
            abs_err_est: 0.0,
        });
    }
    let est = AbsInterference::new(scn, quad).scaled_derivatives(s, 1.0, 1)?;
    Ok(LaplaceEval {
        s,
        value: est[0].value.clamp(0.0, 1.0),
        abs_err_est: est[0].abs_err,
    })
}

/// `k`-th derivative in `s` of the ABS interference Laplace transform,
/// differentiating the Gamma kernel in closed form under the integral.
pub fn laplace_abs_derivative(s: f64, k: u32, scn: &Scenario, quad: &QuadratureSettings) -> Result<Estimate> {
    check_s(s)?;
    quad.validate()?;
    if k >= scn.m_dd() {
        return Err(Error::InvalidArgument(format!(
            "derivative order {k} exceeds m_dd - 1 = {}",
            scn.m_dd() - 1
        )));
    }
    let ai = AbsInterference::new(scn, quad);
    if k == 0 {
        let l = laplace_abs_interference(s, scn, quad)?;
        return Ok(Estimate::new(l.value, l.abs_err_est));
    }
    // integrate u^k L^(k) with u ~ 1/I so the integrand is O(1)
    let u = if s > 0.0 { s } else { 1.0 / ai.reference_scale() };
    let est = ai.scaled_derivatives(s, u, k as usize + 1)?;
    let scale = u.powi(k as i32);
    let e = est[k as usize];
    Ok(Estimate::new(e.value / scale, e.abs_err / scale))
}

/// Conditional ABS coverage given the AsUE sits at distance `z` and
/// transmits with power `p`: the Gamma-tail series in the interference
/// Laplace derivatives.
pub fn coverage_abs_given(p: f64, z: f64, scn: &Scenario, quad: &QuadratureSettings) -> Result<Estimate> {
    let m = scn.m_dd() as usize;
    let s = scn.m_dd() as f64 * scn.gamma_a * z.powf(scn.alpha_dd()) / p;
    let x = s * scn.sigma2;
    // T_k = (−s)^k L^(k)(s) >= 0
    let t = if s > 0.0 {
        let mut v = AbsInterference::new(scn, quad).scaled_derivatives(s, s, m)?;
        for e in v.iter_mut().skip(1).step_by(2) {
            e.value = -e.value;
        }
        v
    } else {
        let mut v = vec![Estimate::default(); m];
        v[0] = Estimate::new(1.0, 0.0);
        v
    };
    let ln_x = x.ln();
    let mut total = CompensatedSum::default();
    let mut err = 0.0;
    let mut ln_fact = 0.0;
    for n in 0..m {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        // (−s)^n (−σ²)^(n−k) L^(k) / n! = (sσ²)^(n−k) T_k / n!
        let mut binom = 1.0;
        for (k, tk) in t.iter().enumerate().take(n + 1) {
            if k > 0 {
                binom = binom * (n + 1 - k) as f64 / k as f64;
            }
            let j = (n - k) as f64;
            let weight = if j == 0.0 {
                (-x - ln_fact).exp()
            } else if x == 0.0 {
                0.0
            } else {
                (-x + j * ln_x - ln_fact).exp()
            };
            total.add(binom * weight * tk.value);
            err += binom * weight * tk.abs_err;
            debug_assert!((-10.0..=10.0).contains(&total.value()));
        }
    }
    Ok(Estimate::new(total.value(), err))
}

/// ABS uplink coverage averaged over the AsUE distance law.
pub fn coverage_abs(scn: &Scenario, quad: &QuadratureSettings) -> Result<Estimate> {
    quad.validate()?;
    let (lo, hi) = asue_z_support(scn);
    let inner = quad.tightened(INNER_TIGHTEN);
    let mut inner_err: f64 = 0.0;
    let est = quadrature::try_integrate(
        |z| {
            let p = asue_tx_power(z, scn);
            let c = coverage_abs_given(p, z, scn, &inner)?;
            inner_err = inner_err.max(c.abs_err);
            Ok(c.value * pdf_z_asue(z, scn))
        },
        lo,
        hi,
        &[scn.bounds.z_cap],
        quad,
    )?;
    Ok(Estimate::new(est.value.clamp(0.0, 1.0), est.abs_err + inner_err))
}

fn check_s(s: f64) -> Result<()> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("Laplace argument must be finite and >= 0, got {s}")));
    }
    Ok(())
}

/// Both stations at once.
pub fn coverage_both(scn: &Scenario, quad: &QuadratureSettings) -> Result<(Estimate, Estimate)> {
    Ok((coverage_tbs(scn, quad)?, coverage_abs(scn, quad)?))
}
