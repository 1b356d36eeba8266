//! Globally adaptive 21-point Gauss–Kronrod quadrature.
//!
//! The interval list is refined by bisecting the panel with the largest error
//! estimate until the summed error meets `max(abs_tol, rel_tol * |I|)`. A
//! vector-valued variant integrates several integrands that share their
//! expensive setup (the Laplace-transform derivatives of every order) over
//! one set of panels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            rel_tol: 1e-6,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureSettings {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let s = Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "quadrature tolerances must be > 0, got abs {} rel {}",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::InvalidArgument("max_subdivisions must be >= 1".into()));
        }
        Ok(())
    }

    /// Settings scaled down for an inner integral of a nested scheme.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            max_subdivisions: self.max_subdivisions,
        }
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
}

impl Estimate {
    pub fn new(value: f64, abs_err: f64) -> Self {
        Self { value, abs_err }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate::new(self.value + rhs.value, self.abs_err + rhs.abs_err)
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// QUADPACK-style error rescaling of the raw Gauss/Kronrod difference.
fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// One GK21 panel for a `dim`-valued integrand. Results go to `value`/`err`.
fn gk21_vec<F>(f: &mut F, a: f64, b: f64, dim: usize, value: &mut [f64], err: &mut [f64]) -> Result<()>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    // fvals[node][component], nodes ordered as [center, (-x_j, +x_j) for j in 0..10]
    let mut fvals = vec![0.0; 21 * dim];
    f(center, &mut fvals[..dim])?;
    for j in 0..10 {
        let x = half * XGK[j];
        let base = (1 + 2 * j) * dim;
        f(center - x, &mut fvals[base..base + dim])?;
        f(center + x, &mut fvals[base + dim..base + 2 * dim])?;
    }
    for c in 0..dim {
        let fc = fvals[c];
        let mut kron = WGK[10] * fc;
        let mut res_abs = (WGK[10] * fc).abs();
        let mut gauss = 0.0;
        for j in 0..10 {
            let lo = fvals[(1 + 2 * j) * dim + c];
            let hi = fvals[(2 + 2 * j) * dim + c];
            kron += WGK[j] * (lo + hi);
            res_abs += WGK[j] * (lo.abs() + hi.abs());
            // Gauss-10 nodes are the odd Kronrod indices
            if j % 2 == 1 {
                gauss += WG[j / 2] * (lo + hi);
            }
        }
        let mean = 0.5 * kron;
        let mut res_asc = WGK[10] * (fc - mean).abs();
        for j in 0..10 {
            let lo = fvals[(1 + 2 * j) * dim + c];
            let hi = fvals[(2 + 2 * j) * dim + c];
            res_asc += WGK[j] * ((lo - mean).abs() + (hi - mean).abs());
        }
        let raw_err = (kron - gauss) * half;
        let abs_half = half.abs();
        value[c] = kron * half;
        err[c] = rescale_error(raw_err, res_abs * abs_half, res_asc * abs_half);
        if !value[c].is_finite() {
            return Err(Error::InvalidArgument(format!(
                "integrand is not finite on [{a}, {b}]"
            )));
        }
    }
    Ok(())
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    err: Vec<f64>,
    priority: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            // deterministic tie-break: leftmost panel first
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Integrates a `dim`-valued function over `[a, b]` split at `breaks`.
///
/// Convergence requires every component to meet its own tolerance. On
/// failure the best estimates are returned inside
/// [`Error::NonConvergence`] for the worst component.
pub fn integrate_vec<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    dim: usize,
    settings: &QuadratureSettings,
) -> Result<Vec<Estimate>>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    match integrate_vec_lenient(&mut f, a, b, breaks, dim, settings)? {
        (est, true) => Ok(est),
        (est, false) => {
            let worst = est
                .iter()
                .max_by(|x, y| {
                    (x.abs_err / settings.tolerance(x.value))
                        .total_cmp(&(y.abs_err / settings.tolerance(y.value)))
                })
                .copied()
                .unwrap_or_default();
            Err(Error::NonConvergence {
                value: worst.value,
                abs_err: worst.abs_err,
                tolerance: settings.tolerance(worst.value),
            })
        }
    }
}

/// Like [`integrate_vec`] but never fails on the error budget; the flag says
/// whether the tolerance was met. Integrand errors still abort.
pub fn integrate_vec_lenient<F>(
    f: &mut F,
    a: f64,
    b: f64,
    breaks: &[f64],
    dim: usize,
    settings: &QuadratureSettings,
) -> Result<(Vec<Estimate>, bool)>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    if dim == 0 || a == b {
        return Ok((vec![Estimate::default(); dim], true));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut knots = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    knots.extend(inner);
    knots.push(hi);

    let mut heap = BinaryHeap::new();
    let mut total = vec![0.0; dim];
    let mut total_err = vec![0.0; dim];
    for w in knots.windows(2) {
        let panel = eval_panel(f, w[0], w[1], dim)?;
        for c in 0..dim {
            total[c] += panel.value[c];
            total_err[c] += panel.err[c];
        }
        heap.push(panel);
    }

    let converged = |total: &[f64], total_err: &[f64]| {
        total
            .iter()
            .zip(total_err)
            .all(|(v, e)| *e <= settings.tolerance(*v))
    };

    let mut ok = converged(&total, &total_err);
    let mut splits = 0;
    while !ok && splits < settings.max_subdivisions {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel at floating-point resolution, cannot refine further
            heap.push(worst);
            break;
        }
        let left = eval_panel(f, worst.a, mid, dim)?;
        let right = eval_panel(f, mid, worst.b, dim)?;
        for c in 0..dim {
            total[c] += left.value[c] + right.value[c] - worst.value[c];
            total_err[c] += left.err[c] + right.err[c] - worst.err[c];
        }
        heap.push(left);
        heap.push(right);
        splits += 1;
        ok = converged(&total, &total_err);
    }

    // Re-sum from the panels in interval order so the result does not depend
    // on the incremental update history.
    let mut panels = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut out = vec![Estimate::default(); dim];
    for p in &panels {
        for c in 0..dim {
            out[c].value += p.value[c];
            out[c].abs_err += p.err[c];
        }
    }
    for e in &mut out {
        e.value *= sign;
    }
    let ok = out.iter().all(|e| e.abs_err <= settings.tolerance(e.value));
    Ok((out, ok))
}

fn eval_panel<F>(f: &mut F, a: f64, b: f64, dim: usize) -> Result<Panel>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let mut value = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    gk21_vec(f, a, b, dim, &mut value, &mut err)?;
    let priority = err.iter().copied().fold(0.0, f64::max);
    Ok(Panel {
        a,
        b,
        value,
        err,
        priority,
    })
}

/// Scalar adaptive integration over `[a, b]` with optional interior knots.
pub fn integrate<F>(mut f: F, a: f64, b: f64, breaks: &[f64], settings: &QuadratureSettings) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    let est = integrate_vec(
        |x, out: &mut [f64]| {
            out[0] = f(x);
            Ok(())
        },
        a,
        b,
        breaks,
        1,
        settings,
    )?;
    Ok(est[0])
}

/// Scalar integration with a fallible integrand.
pub fn try_integrate<F>(mut f: F, a: f64, b: f64, breaks: &[f64], settings: &QuadratureSettings) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    let est = integrate_vec(
        |x, out: &mut [f64]| {
            out[0] = f(x)?;
            Ok(())
        },
        a,
        b,
        breaks,
        1,
        settings,
    )?;
    Ok(est[0])
}
