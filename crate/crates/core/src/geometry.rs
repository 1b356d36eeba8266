//! Network layout, distance/angle densities, and uniform user drops.
//!
//! Ground coordinates put the TBS at the origin and the stadium center at
//! `(d, 0)`; the ABS hovers at `(d, 0, h)`. The network region `S1` is the
//! disk of radius `r1` around the TBS and the stadium `S2` the disk of radius
//! `r2` around `(d, 0)`.
//!
//! For a TsUE at ground distance `r` from the stadium center, the angle `ω`
//! to the center→TBS axis is unrestricted while `r ≤ r1 − d` (near region).
//! Beyond that (far region) the network boundary limits it to `|ω| ≤ ω̂(r)`
//! with `cos ω̂ = (d² + r² − r1²) / (2dr)`.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureSettings};

const ARCSEC_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// 3-D distance of a ground UE to the ABS and its bearing around the stadium
/// center, measured from the center→TBS direction, in `(−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AerialDistance {
    pub z: f64,
    pub omega: f64,
}

pub fn stadium_center(scn: &Scenario) -> Point2 {
    Point2::new(scn.d(), 0.0)
}

pub fn abs_position(scn: &Scenario) -> Point3 {
    Point3 {
        x: scn.d(),
        y: 0.0,
        z: scn.h(),
    }
}

pub fn aerial_distance(p: Point2, scn: &Scenario) -> AerialDistance {
    let dx = p.x - scn.d();
    let h = scn.h();
    AerialDistance {
        z: (dx * dx + p.y * p.y + h * h).sqrt(),
        omega: (-p.y).atan2(-dx),
    }
}

/// Support `[h, sqrt(h² + r2²)]` of the AsUE→ABS distance.
pub fn asue_z_support(scn: &Scenario) -> (f64, f64) {
    let h = scn.h();
    (h, h.hypot(scn.r2()))
}

/// Support of the TsUE→ABS distance.
pub fn tsue_z_support(scn: &Scenario) -> (f64, f64) {
    let h = scn.h();
    (h.hypot(scn.r2()), h.hypot(scn.r1() + scn.d()))
}

/// Distance separating the near and far regions of the TsUE law; equals the
/// upper support end when `d = 0`.
pub fn tsue_z_knot(scn: &Scenario) -> f64 {
    scn.h().hypot(scn.r1() - scn.d())
}

/// Half-width `ω̂` of the admissible bearing at ground radius `r` around the
/// stadium center, for `r` in the far region `[r1 − d, r1 + d]`.
///
/// Principal branch `arccos(1/x)` of the arcsec with
/// `x = 2dr / (d² + r² − r1²)`, so that `ω̂` runs from `π` at `r1 − d` down to
/// `0` at `r1 + d`.
pub fn omega_hat(r: f64, scn: &Scenario) -> Result<f64> {
    let (d, r1) = (scn.d(), scn.r1());
    if d == 0.0 || r == 0.0 {
        return Err(Error::Domain(format!(
            "far-region bearing undefined for d = {d}, r = {r}"
        )));
    }
    let inv = (d * d + r * r - r1 * r1) / (2.0 * d * r);
    if inv.abs() > 1.0 + ARCSEC_SLACK {
        return Err(Error::Domain(format!(
            "arcsec argument magnitude {} < 1 at r = {r}",
            1.0 / inv.abs()
        )));
    }
    Ok(inv.clamp(-1.0, 1.0).acos())
}

/// Density of the AsUE→ABS distance: `2z / r2²` on its support.
pub fn pdf_z_asue(z: f64, scn: &Scenario) -> f64 {
    let (lo, hi) = asue_z_support(scn);
    if z < lo || z > hi {
        return 0.0;
    }
    2.0 * z / (scn.r2() * scn.r2())
}

pub fn cdf_z_asue(z: f64, scn: &Scenario) -> f64 {
    let (lo, hi) = asue_z_support(scn);
    if z <= lo {
        0.0
    } else if z >= hi {
        1.0
    } else {
        let h = scn.h();
        (z * z - h * h) / (scn.r2() * scn.r2())
    }
}

fn annulus_area(scn: &Scenario) -> f64 {
    let (r1, r2) = (scn.r1(), scn.r2());
    r1 * r1 - r2 * r2
}

/// Density of the ground distance from a TsUE to the stadium center.
pub fn pdf_r_tsue_ground(r: f64, scn: &Scenario) -> Result<f64> {
    let (r1, r2, d) = (scn.r1(), scn.r2(), scn.d());
    if r < r2 || r > r1 + d {
        return Ok(0.0);
    }
    if r <= r1 - d {
        return Ok(2.0 * r / annulus_area(scn));
    }
    Ok(2.0 * r * omega_hat(r, scn)? / (PI * annulus_area(scn)))
}

/// Density of the TsUE→ABS distance, written directly in `z`.
pub fn pdf_z_tsue(z: f64, scn: &Scenario) -> Result<f64> {
    let (lo, hi) = tsue_z_support(scn);
    if z < lo || z > hi {
        return Ok(0.0);
    }
    if z <= tsue_z_knot(scn) {
        return Ok(2.0 * z / annulus_area(scn));
    }
    let h = scn.h();
    let r = (z * z - h * h).max(0.0).sqrt();
    Ok(2.0 * z * omega_hat(r, scn)? / (PI * annulus_area(scn)))
}

/// Conditional density of the TsUE bearing given its distance to the ABS.
pub fn pdf_omega_given_z(omega: f64, z: f64, scn: &Scenario) -> Result<f64> {
    let (lo, hi) = tsue_z_support(scn);
    if z < lo || z > hi {
        return Ok(0.0);
    }
    if z <= tsue_z_knot(scn) {
        return Ok(1.0 / (2.0 * PI));
    }
    let h = scn.h();
    let w_hat = omega_hat((z * z - h * h).max(0.0).sqrt(), scn)?;
    // fold to (−π, π]
    let w = (omega + PI).rem_euclid(2.0 * PI) - PI;
    if w.abs() <= w_hat && w_hat > 0.0 {
        Ok(1.0 / (2.0 * w_hat))
    } else {
        Ok(0.0)
    }
}

/// CDF of the TsUE ground radius; the far part is integrated numerically.
pub fn cdf_r_tsue_ground(r: f64, scn: &Scenario, quad: &QuadratureSettings) -> Result<f64> {
    let (r1, r2, d) = (scn.r1(), scn.r2(), scn.d());
    if r <= r2 {
        return Ok(0.0);
    }
    if r >= r1 + d {
        return Ok(1.0);
    }
    let near_top = (r1 - d).min(r);
    let near = (near_top * near_top - r2 * r2) / annulus_area(scn);
    if r <= r1 - d {
        return Ok(near);
    }
    let far = quadrature::try_integrate(|x| pdf_r_tsue_ground(x, scn), r1 - d, r, &[], quad)?;
    Ok((near + far.value).min(1.0))
}

/// Uniform point in the stadium disk.
pub fn sample_asue<R: Rng + ?Sized>(rng: &mut R, scn: &Scenario) -> Point2 {
    let radius = scn.r2() * rng.random::<f64>().sqrt();
    let angle = 2.0 * PI * rng.random::<f64>();
    Point2::new(scn.d() + radius * angle.cos(), radius * angle.sin())
}

/// Uniform point in `S1 \ S2`, drawn by rejection from uniform-in-`S1`.
pub fn sample_tsue<R: Rng + ?Sized>(rng: &mut R, scn: &Scenario) -> Point2 {
    sample_tsue_counted(rng, scn).0
}

/// As [`sample_tsue`], also returning the number of proposals consumed.
pub fn sample_tsue_counted<R: Rng + ?Sized>(rng: &mut R, scn: &Scenario) -> (Point2, u32) {
    let (r1, r2) = (scn.r1(), scn.r2());
    let center = stadium_center(scn);
    let mut proposals = 0;
    loop {
        proposals += 1;
        let radius = r1 * rng.random::<f64>().sqrt();
        let angle = 2.0 * PI * rng.random::<f64>();
        let p = Point2::new(radius * angle.cos(), radius * angle.sin());
        if p.distance(&center) >= r2 {
            return (p, proposals);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::stats::ks_statistic;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenario(h: f64) -> Scenario {
        Scenario::new(ScenarioConfig::baseline())
            .unwrap()
            .with_h(h)
            .unwrap()
    }

    fn tight() -> QuadratureSettings {
        QuadratureSettings::new(1e-11, 1e-11, 1000).unwrap()
    }

    #[test]
    fn asue_pdf_endpoint_and_normalization() {
        let scn = scenario(200.0);
        let (lo, hi) = asue_z_support(&scn);
        assert_relative_eq!(pdf_z_asue(hi, &scn), 2.0 * hi / 1e4, max_relative = 1e-15);
        assert_eq!(pdf_z_asue(lo - 1e-9, &scn), 0.0);
        let mass = quadrature::integrate(|z| pdf_z_asue(z, &scn), lo, hi, &[], &tight()).unwrap();
        assert!((mass.value - 1.0).abs() < 1e-10, "{mass:?}");
    }

    #[test]
    fn tsue_pdfs_normalize() {
        for h in [0.0, 200.0, 500.0] {
            let scn = scenario(h);
            let (lo, hi) = tsue_z_support(&scn);
            let knot = tsue_z_knot(&scn);
            let mass = quadrature::try_integrate(|z| pdf_z_tsue(z, &scn), lo, hi, &[knot], &tight()).unwrap();
            assert!((mass.value - 1.0).abs() < 1e-8, "h={h}: {mass:?}");

            let ground = quadrature::try_integrate(
                |r| pdf_r_tsue_ground(r, &scn),
                scn.r2(),
                scn.r1() + scn.d(),
                &[scn.r1() - scn.d()],
                &tight(),
            )
            .unwrap();
            assert!((ground.value - 1.0).abs() < 1e-8, "h={h}: {ground:?}");
        }
    }

    #[test]
    fn centered_stadium_has_no_far_region() {
        let scn = scenario(150.0).with("d", 0.0).unwrap();
        let (lo, hi) = tsue_z_support(&scn);
        assert_eq!(tsue_z_knot(&scn), hi);
        for i in 0..=20 {
            let z = lo + (hi - lo) * i as f64 / 20.0;
            assert_relative_eq!(
                pdf_z_tsue(z, &scn).unwrap(),
                2.0 * z / (500.0f64.powi(2) - 100.0f64.powi(2)),
                max_relative = 1e-15
            );
            assert_eq!(pdf_omega_given_z(1.0, z, &scn).unwrap(), 1.0 / (2.0 * PI));
        }
    }

    #[test]
    fn omega_hat_branch_endpoints() {
        let scn = scenario(200.0);
        assert_relative_eq!(omega_hat(300.0, &scn).unwrap(), PI, epsilon = 1e-7);
        assert!(omega_hat(700.0, &scn).unwrap() < 1e-6);
        // negative arcsec argument part of the far region lands in (π/2, π]
        let r = 400.0; // d² + r² − r1² < 0
        let w = omega_hat(r, &scn).unwrap();
        assert!(w > PI / 2.0 && w <= PI);
        assert!(matches!(omega_hat(100.0, &scn), Err(Error::Domain(_))));
    }

    #[test]
    fn change_of_variables_matches() {
        let scn = scenario(200.0);
        let (lo, hi) = tsue_z_support(&scn);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let z = lo + (hi - lo) * rng.random::<f64>();
            let r = (z * z - 200.0 * 200.0).sqrt();
            let lhs = pdf_z_tsue(z, &scn).unwrap();
            let rhs = z / r * pdf_r_tsue_ground(r, &scn).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-300), "z={z}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn omega_pdf_normalizes() {
        let scn = scenario(200.0);
        let (lo, hi) = tsue_z_support(&scn);
        for z in [lo + 1.0, 350.0, tsue_z_knot(&scn) + 0.5, 600.0, 700.0, hi - 1e-3] {
            let knot = tsue_z_knot(&scn);
            let mass = if z <= knot {
                2.0 * PI * pdf_omega_given_z(0.3, z, &scn).unwrap()
            } else {
                let r = (z * z - 200.0 * 200.0).sqrt();
                let w = omega_hat(r, &scn).unwrap();
                2.0 * w * pdf_omega_given_z(0.0, z, &scn).unwrap()
            };
            assert!((mass - 1.0).abs() < 1e-12, "z={z}: {mass}");
        }
        // outside ±ω̂ the density vanishes
        let z = 700.0;
        let w = omega_hat((z * z - 4e4f64).sqrt(), &scn).unwrap();
        assert_eq!(pdf_omega_given_z(w + 0.01, z, &scn).unwrap(), 0.0);
        assert_eq!(pdf_omega_given_z(-w - 0.01, z, &scn).unwrap(), 0.0);
    }

    #[test]
    fn asue_samples_are_uniform_in_stadium() {
        let scn = scenario(200.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let center = stadium_center(&scn);
        let n = 100_000;
        let mut sum = 0.0;
        let mut zs = Vec::with_capacity(n);
        for _ in 0..n {
            let p = sample_asue(&mut rng, &scn);
            let r = p.distance(&center);
            assert!(r <= 100.0 + 1e-9);
            sum += r;
            zs.push(aerial_distance(p, &scn).z);
        }
        let mean = sum / n as f64;
        assert!((mean / (2.0 / 3.0 * 100.0) - 1.0).abs() < 0.01, "{mean}");
        let ks = ks_statistic(&mut zs, |z| cdf_z_asue(z, &scn));
        assert!(ks < 0.01, "KS = {ks}");
    }

    #[test]
    fn tsue_rejection_rate_and_support() {
        let scn = scenario(200.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut proposals = 0u64;
        let mut accepted = 0u64;
        while proposals < 1_000_000 {
            let (p, k) = sample_tsue_counted(&mut rng, &scn);
            proposals += k as u64;
            accepted += 1;
            assert!(p.norm() <= 500.0 + 1e-9);
            assert!(p.distance(&stadium_center(&scn)) >= 100.0);
        }
        let rate = accepted as f64 / proposals as f64;
        assert!((rate - 0.96).abs() < 0.001, "acceptance {rate}");
    }

    #[test]
    fn aerial_distance_bearing() {
        let scn = scenario(100.0);
        // directly between stadium center and TBS: bearing 0
        let a = aerial_distance(Point2::new(150.0, 0.0), &scn);
        assert!(a.omega.abs() < 1e-15);
        assert_relative_eq!(a.z, 50.0f64.hypot(100.0));
        let b = aerial_distance(Point2::new(300.0, 0.0), &scn);
        assert_relative_eq!(b.omega.abs(), PI);
    }

    #[test]
    fn tsue_radius_matches_cdf() {
        let scn = scenario(200.0);
        let quad = QuadratureSettings::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let center = stadium_center(&scn);
        let mut rs: Vec<f64> = (0..100_000)
            .map(|_| sample_tsue(&mut rng, &scn).distance(&center))
            .collect();
        let ks = ks_statistic(&mut rs, |r| cdf_r_tsue_ground(r, &scn, &quad).unwrap());
        assert!(ks < 0.01, "KS = {ks}");
    }

    #[test]
    fn bearing_given_distance_is_uniform() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let scn = scenario(200.0);
        let knot = tsue_z_knot(&scn);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        const BINS: usize = 20;
        let (mut near, mut far) = ([0u64; BINS], [0u64; BINS]);
        for _ in 0..100_000 {
            let a = aerial_distance(sample_tsue(&mut rng, &scn), &scn);
            // position within the conditional support, mapped to [0, 1)
            let (u, hist) = if a.z <= knot {
                ((a.omega + PI) / (2.0 * PI), &mut near)
            } else {
                let r = (a.z * a.z - scn.h() * scn.h()).sqrt();
                let w_hat = omega_hat(r, &scn).unwrap();
                assert!(a.omega.abs() <= w_hat + 1e-9);
                ((a.omega + w_hat) / (2.0 * w_hat), &mut far)
            };
            hist[((u * BINS as f64) as usize).min(BINS - 1)] += 1;
        }
        let critical = ChiSquared::new((BINS - 1) as f64).unwrap().inverse_cdf(0.999);
        for hist in [near, far] {
            let n: u64 = hist.iter().sum();
            let e = n as f64 / BINS as f64;
            let chi2: f64 = hist.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
            assert!(chi2 < critical, "chi2 = {chi2} over {n} samples");
        }
    }
}
