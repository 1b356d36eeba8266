//! Monte Carlo simulation of the uplink SINRs.
//!
//! Each run drops one TsUE and one AsUE, draws all fading gains (and the
//! LOS states under the ATG model), and records whether each station's SINR
//! clears its threshold. Runs are grouped in batches; batch `b` draws from
//! ChaCha8 stream `b` keyed by the seed, so estimates do not depend on the
//! thread count or the order in which batches finish.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{asue_tx_power, atg_loss, path_loss, AtgParams, Fading, FadingKind};
use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::geometry::{aerial_distance, sample_asue, sample_tsue, stadium_center, Point2};
use crate::stats::binomial_std_err;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AerialModel {
    /// Deterministic `ℓ^(−α)` on the aerial links.
    PowerLaw,
    /// Sigmoid-LOS air-to-ground model on the aerial links.
    Atg(AtgParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub runs: u64,
    pub seed: u64,
    pub aerial_model: AerialModel,
    pub batch_size: u64,
    /// Worker threads; `Some(1)` runs inline on the caller's thread and
    /// `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            runs: 1_000_000,
            seed: 0,
            aerial_model: AerialModel::PowerLaw,
            batch_size: 16_384,
            threads: None,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidArgument("runs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("threads must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_runs(mut self, runs: u64) -> Self {
        self.runs = runs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_model(mut self, model: AerialModel) -> Self {
        self.aerial_model = model;
        self
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub runs: u64,
}

impl SimEstimate {
    fn from_count(hits: u64, runs: u64) -> Self {
        let p_hat = hits as f64 / runs as f64;
        Self {
            p_hat,
            std_err: binomial_std_err(p_hat, runs),
            runs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Station {
    Tbs,
    Abs,
}

/// Everything drawn in one simulation run.
#[derive(Debug, Clone, Copy)]
pub struct RunSample {
    pub tsue: Point2,
    pub asue: Point2,
    /// TsUE→TBS and AsUE→TBS ground distances.
    pub d_t: f64,
    pub d_a: f64,
    /// AsUE→ABS and TsUE→ABS 3-D distances.
    pub z_d: f64,
    pub z_c: f64,
    pub p_t: f64,
    pub p_a: f64,
    pub h_t: f64,
    pub h_a: f64,
    pub g_a: f64,
    pub g_t: f64,
    /// Aerial attenuations for the AsUE and TsUE links.
    pub loss_d: f64,
    pub loss_c: f64,
}

impl RunSample {
    /// Interference power at the TBS (from the AsUE).
    pub fn interference_tbs(&self, scn: &Scenario) -> f64 {
        self.p_a * self.h_a * path_loss(self.d_a, scn.alpha_b())
    }

    /// Interference power at the ABS (from the TsUE).
    pub fn interference_abs(&self) -> f64 {
        self.p_t * self.g_t * self.loss_c
    }

    pub fn sinr_tbs(&self, scn: &Scenario) -> f64 {
        scn.rho_b * self.h_t / (self.interference_tbs(scn) + scn.sigma2)
    }

    pub fn sinr_abs(&self, scn: &Scenario) -> f64 {
        self.p_a * self.g_a * self.loss_d / (self.interference_abs() + scn.sigma2)
    }
}

/// Fading samplers built once per simulation.
#[derive(Debug, Clone, Copy)]
pub struct RunSampler {
    rayleigh: Fading,
    g_a: Fading,
    g_t: Fading,
    model: AerialModel,
}

impl RunSampler {
    pub fn new(scn: &Scenario, model: AerialModel) -> Result<Self> {
        Ok(Self {
            rayleigh: Fading::new(FadingKind::RayleighExp)?,
            g_a: Fading::new(FadingKind::NakagamiGamma(scn.m_dd()))?,
            g_t: Fading::new(FadingKind::NakagamiGamma(scn.m_cd()))?,
            model,
        })
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R, scn: &Scenario) -> RunSample {
        let tsue = sample_tsue(rng, scn);
        let asue = sample_asue(rng, scn);
        let d_t = tsue.norm();
        let d_a = asue.norm();
        let z_d = aerial_distance(asue, scn).z;
        let z_c = aerial_distance(tsue, scn).z;
        let p_t = scn.rho_b * d_t.powf(scn.alpha_b());
        let p_a = asue_tx_power(z_d, scn);
        let h_t = self.rayleigh.sample(rng);
        let h_a = self.rayleigh.sample(rng);
        let g_a = self.g_a.sample(rng);
        let g_t = self.g_t.sample(rng);
        let (loss_d, loss_c) = match &self.model {
            AerialModel::PowerLaw => (path_loss(z_d, scn.alpha_dd()), path_loss(z_c, scn.alpha_cd())),
            AerialModel::Atg(params) => {
                let center = stadium_center(scn);
                let h = scn.h();
                (
                    atg_loss(rng, asue.distance(&center), h, scn.alpha_dd(), params),
                    atg_loss(rng, tsue.distance(&center), h, scn.alpha_cd(), params),
                )
            }
        };
        RunSample {
            tsue,
            asue,
            d_t,
            d_a,
            z_d,
            z_c,
            p_t,
            p_a,
            h_t,
            h_a,
            g_a,
            g_t,
            loss_d,
            loss_c,
        }
    }
}

/// RNG for batch `index` of a simulation seeded with `seed`.
pub fn batch_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `per_batch` on every batch and returns the results in batch order.
fn run_batches<T, F>(sim: &SimSettings, per_batch: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    sim.validate()?;
    let n_batches = sim.runs.div_ceil(sim.batch_size);
    let job = |b: u64| {
        let len = sim.batch_size.min(sim.runs - b * sim.batch_size);
        let mut rng = batch_rng(sim.seed, b);
        per_batch(&mut rng, len)
    };
    match sim.threads {
        Some(1) => Ok((0..n_batches).map(job).collect()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(|| (0..n_batches).into_par_iter().map(job).collect()))
        }
        None => Ok((0..n_batches).into_par_iter().map(job).collect()),
    }
}

/// Estimates the TBS and ABS coverage probabilities.
pub fn simulate_coverage(scn: &Scenario, sim: &SimSettings) -> Result<(SimEstimate, SimEstimate)> {
    let sampler = RunSampler::new(scn, sim.aerial_model)?;
    let tallies = run_batches(sim, |rng, len| {
        let mut hits = (0u64, 0u64);
        for _ in 0..len {
            let run = sampler.sample(rng, scn);
            if run.sinr_tbs(scn) > scn.gamma_t {
                hits.0 += 1;
            }
            if run.sinr_abs(scn) > scn.gamma_a {
                hits.1 += 1;
            }
        }
        hits
    })?;
    let (t, a) = tallies
        .iter()
        .fold((0, 0), |acc, h| (acc.0 + h.0, acc.1 + h.1));
    Ok((
        SimEstimate::from_count(t, sim.runs),
        SimEstimate::from_count(a, sim.runs),
    ))
}

/// Empirical `E[exp(−s I)]` for the interference at `station`.
pub fn simulate_interference_laplace(
    scn: &Scenario,
    sim: &SimSettings,
    station: Station,
    s: f64,
) -> Result<SimEstimate> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("s must be finite and >= 0, got {s}")));
    }
    let sampler = RunSampler::new(scn, sim.aerial_model)?;
    let sums = run_batches(sim, |rng, len| {
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..len {
            let run = sampler.sample(rng, scn);
            let i = match station {
                Station::Tbs => run.interference_tbs(scn),
                Station::Abs => run.interference_abs(),
            };
            let v = (-s * i).exp();
            sum += v;
            sum_sq += v * v;
        }
        (sum, sum_sq)
    })?;
    let (sum, sum_sq) = sums
        .iter()
        .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let n = sim.runs as f64;
    let mean = sum / n;
    let var = if sim.runs > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(SimEstimate {
        p_hat: mean,
        std_err: (var / n).sqrt(),
        runs: sim.runs,
    })
}
