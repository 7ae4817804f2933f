//! Classical reference dynamics: Langevin (Ornstein-Uhlenbeck) ensembles and a
//! one-dimensional collision-gas Monte Carlo, plus estimators that read the
//! friction and momentum-diffusion coefficients back out of trajectories.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::collide_1d;
use crate::error::{invalid, Error, Result};

/// Algorithm identifier recorded next to every seed.
pub const RNG_ID: &str = "chacha20";

/// Random stream for one ensemble member. Streams are disjoint, so results
/// do not depend on how members are scheduled across threads.
pub fn member_rng(seed: u64, member: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(member);
    rng
}

/// Samples of an ensemble at shared checkpoint times, stored member-major:
/// `p[member][checkpoint]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub times: Vec<f64>,
    pub x: Option<Vec<Vec<f64>>>,
    pub p: Vec<Vec<f64>>,
    pub seed: u64,
    pub rng: String,
}

impl TrajectoryEnsemble {
    pub fn members(&self) -> usize {
        self.p.len()
    }

    pub fn checkpoints(&self) -> usize {
        self.times.len()
    }

    pub fn records(&self) -> usize {
        self.members() * self.checkpoints()
    }

    /// Momenta of every member at one checkpoint.
    pub fn p_at(&self, checkpoint: usize) -> Vec<f64> {
        self.p.iter().map(|row| row[checkpoint]).collect()
    }

    pub fn x_at(&self, checkpoint: usize) -> Option<Vec<f64>> {
        self.x.as_ref().map(|x| x.iter().map(|row| row[checkpoint]).collect())
    }

    /// Momentum series on a uniform time grid with the given step, holding
    /// the last recorded value between records. Exact for jump processes.
    pub fn resample_uniform(&self, step: f64) -> Result<Vec<Vec<f64>>> {
        if !(step > 0.0) || self.times.is_empty() {
            return Err(invalid("resampling needs a positive step and a non-empty record"));
        }
        let t0 = self.times[0];
        let span = self.times[self.times.len() - 1] - t0;
        let count = (span / step).floor() as usize + 1;
        Ok(self
            .p
            .iter()
            .map(|row| {
                let mut idx = 0;
                (0..count)
                    .map(|j| {
                        let t = t0 + j as f64 * step;
                        while idx + 1 < self.times.len() && self.times[idx + 1] <= t {
                            idx += 1;
                        }
                        row[idx]
                    })
                    .collect()
            })
            .collect())
    }
}

/// Euler-Maruyama integration of `dx = p/M dt`, `dp = -ηp dt + √(2 D_p) dW`.
///
/// Checkpoints are taken at `t = 0`, every `record_every` steps, and at
/// `t_end`. The last step is shortened to land on `t_end`.
#[allow(clippy::too_many_arguments)]
pub fn langevin_simulate(
    mass: f64,
    eta: f64,
    d_p: f64,
    ensemble0: &[(f64, f64)],
    dt: f64,
    t_end: f64,
    record_every: usize,
    seed: u64,
) -> Result<TrajectoryEnsemble> {
    if !(mass > 0.0) {
        return Err(invalid("M > 0 violated"));
    }
    if !(eta >= 0.0 && d_p >= 0.0) {
        return Err(invalid("η and D_p must be non-negative"));
    }
    if ensemble0.is_empty() {
        return Err(invalid("ensemble size must be at least 1"));
    }
    if !(dt > 0.0) || !(t_end >= 0.0) || record_every == 0 {
        return Err(invalid("dt > 0, t_end ≥ 0 and record_every ≥ 1 required"));
    }
    if eta > 0.0 && dt > 0.01 / eta * (1.0 + 1e-12) {
        return Err(invalid(format!("dt = {dt} exceeds 0.01/η = {}", 0.01 / eta)));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let step_len = |s: usize| if s + 1 == steps { t_end - s as f64 * dt } else { dt };
    let mut times = vec![0.0];
    for s in 0..steps {
        if (s + 1) % record_every == 0 || s + 1 == steps {
            times.push(if s + 1 == steps { t_end } else { (s + 1) as f64 * dt });
        }
    }

    let paths: Vec<(Vec<f64>, Vec<f64>)> = ensemble0
        .par_iter()
        .enumerate()
        .map(|(member, &(x0, p0))| {
            let mut rng = member_rng(seed, member as u64);
            let (mut x, mut p) = (x0, p0);
            let mut xs = Vec::with_capacity(times.len());
            let mut ps = Vec::with_capacity(times.len());
            xs.push(x);
            ps.push(p);
            for s in 0..steps {
                let h = step_len(s);
                let xi: f64 = rng.sample(StandardNormal);
                x += p / mass * h;
                p += -eta * p * h + (2.0 * d_p * h).sqrt() * xi;
                if (s + 1) % record_every == 0 || s + 1 == steps {
                    xs.push(x);
                    ps.push(p);
                }
            }
            (xs, ps)
        })
        .collect();
    let (x, p) = paths.into_iter().unzip();
    Ok(TrajectoryEnsemble {
        times,
        x: Some(x),
        p,
        seed,
        rng: RNG_ID.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum RateModel {
    /// Poisson collisions with mean intercollision time `tau`, molecule
    /// momenta drawn from the thermal distribution.
    FixedRate { tau: f64 },
    /// Collisions with molecules of linear density `density`, weighted by
    /// the relative speed.
    FluxWeighted { density: f64 },
}

impl RateModel {
    pub fn name(&self) -> &'static str {
        match self {
            RateModel::FixedRate { .. } => "fixed-rate",
            RateModel::FluxWeighted { .. } => "flux-weighted",
        }
    }
}

/// One-dimensional ideal gas seen by the dust. Molecule momenta follow the
/// Maxwell-Boltzmann law with variance `m k_B T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasModel {
    pub molecule_mass: f64,
    pub temperature: f64,
    pub k_b: f64,
    pub rate: RateModel,
}

impl GasModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.molecule_mass > 0.0) {
            return Err(invalid("m > 0 violated"));
        }
        if !(self.temperature >= 0.0 && self.k_b > 0.0) {
            return Err(invalid("T ≥ 0 and k_B > 0 required"));
        }
        match self.rate {
            RateModel::FixedRate { tau } if !(tau > 0.0) => Err(invalid("τ > 0 violated")),
            RateModel::FluxWeighted { density } if !(density > 0.0) => Err(invalid("n > 0 violated")),
            _ => Ok(()),
        }
    }

    fn thermal_velocity_std(&self) -> f64 {
        (self.k_b * self.temperature / self.molecule_mass).sqrt()
    }

    /// Collision rate seen by a dust particle with momentum `p`.
    pub fn collision_rate(&self, dust_mass: f64, p: f64) -> f64 {
        match self.rate {
            RateModel::FixedRate { tau } => 1.0 / tau,
            RateModel::FluxWeighted { density } => {
                density * mean_abs_normal(-p / dust_mass, self.thermal_velocity_std())
            }
        }
    }

    /// Draws the next (waiting time, molecule momentum) pair.
    fn sample_collision(&self, dust_mass: f64, p: f64, rng: &mut ChaCha20Rng) -> Option<(f64, f64)> {
        let m = self.molecule_mass;
        let rate = self.collision_rate(dust_mass, p);
        if !(rate > 0.0) {
            return None;
        }
        let wait = -(1.0 - rng.random::<f64>()).ln() / rate;
        let k = match self.rate {
            RateModel::FixedRate { .. } => {
                let xi: f64 = rng.sample(StandardNormal);
                (m * self.k_b * self.temperature).sqrt() * xi
            }
            RateModel::FluxWeighted { .. } => {
                let z = sample_flux_weighted(-p / dust_mass, self.thermal_velocity_std(), rng);
                m * (z + p / dust_mass)
            }
        };
        Some((wait, k))
    }
}

/// `E|Z|` for `Z ~ N(mu, s²)`.
fn mean_abs_normal(mu: f64, s: f64) -> f64 {
    if s == 0.0 {
        return mu.abs();
    }
    s * (2.0 / std::f64::consts::PI).sqrt() * (-mu * mu / (2.0 * s * s)).exp()
        + mu * libm::erf(mu / (s * std::f64::consts::SQRT_2))
}

/// Samples `z` with density `∝ |z| φ((z - mu)/s)` by rejection from the
/// envelope `(|mu| + |z - mu|) φ((z - mu)/s)`.
fn sample_flux_weighted(mu: f64, s: f64, rng: &mut ChaCha20Rng) -> f64 {
    if s == 0.0 {
        return mu;
    }
    let normal_weight = mu.abs();
    let rayleigh_weight = s * (2.0 / std::f64::consts::PI).sqrt();
    loop {
        let y = if rng.random::<f64>() * (normal_weight + rayleigh_weight) < normal_weight {
            s * rng.sample::<f64, _>(StandardNormal)
        } else {
            let r = s * (-2.0 * (1.0 - rng.random::<f64>()).ln()).sqrt();
            if rng.random::<bool>() {
                r
            } else {
                -r
            }
        };
        let z = mu + y;
        if rng.random::<f64>() * (mu.abs() + y.abs()) <= z.abs() {
            return z;
        }
    }
}

/// Dust momentum record of a collision-gas run together with the molecule
/// momentum sampled for each collision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasRun {
    pub ensemble: TrajectoryEnsemble,
    pub molecule_momenta: Vec<f64>,
}

/// Single-trajectory collision gas. The record holds the initial momentum at
/// `t = 0` and the dust momentum right after each collision. The run stops
/// early if the collision rate vanishes (dust at rest in a gas at `T = 0`).
pub fn collision_gas_run(dust_mass: f64, p0: f64, gas: &GasModel, n_collisions: usize, seed: u64) -> Result<GasRun> {
    gas.validate()?;
    if !(dust_mass > 0.0) {
        return Err(invalid("M > 0 violated"));
    }
    let mut rng = member_rng(seed, 0);
    let mut times = Vec::with_capacity(n_collisions + 1);
    let mut ps = Vec::with_capacity(n_collisions + 1);
    let mut ks = Vec::with_capacity(n_collisions);
    let (mut t, mut p) = (0.0, p0);
    times.push(t);
    ps.push(p);
    for _ in 0..n_collisions {
        let Some((wait, k)) = gas.sample_collision(dust_mass, p, &mut rng) else {
            break;
        };
        t += wait;
        p = collide_1d(p, k, dust_mass, gas.molecule_mass)?.p_f;
        times.push(t);
        ps.push(p);
        ks.push(k);
    }
    Ok(GasRun {
        ensemble: TrajectoryEnsemble {
            times,
            x: None,
            p: vec![ps],
            seed,
            rng: RNG_ID.to_string(),
        },
        molecule_momenta: ks,
    })
}

pub fn collision_gas_simulate(
    dust_mass: f64,
    p0: f64,
    gas: &GasModel,
    n_collisions: usize,
    seed: u64,
) -> Result<TrajectoryEnsemble> {
    collision_gas_run(dust_mass, p0, gas, n_collisions, seed).map(|run| run.ensemble)
}

/// Friction and momentum-diffusion estimates with bootstrap standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionDiffusionFit {
    pub eta: f64,
    pub eta_se: f64,
    pub d_p: f64,
    pub d_p_se: f64,
    /// Largest autocorrelation lag (in time units) used by the `η` fit.
    pub max_lag: f64,
}

pub const MIN_RECORDS: usize = 1000;
const ACF_CUTOFF: f64 = 0.22;
const BLOCKS: usize = 50;
const BOOTSTRAP_RESAMPLES: usize = 200;

/// Additive sufficient statistics of one block of data.
#[derive(Debug, Clone, Default)]
struct BlockStats {
    count: f64,
    sum: f64,
    lag_products: Vec<f64>,
    lag_counts: Vec<f64>,
    sq_increments: f64,
    elapsed: f64,
}

impl BlockStats {
    fn add(&mut self, other: &BlockStats) {
        self.count += other.count;
        self.sum += other.sum;
        if self.lag_products.len() < other.lag_products.len() {
            self.lag_products.resize(other.lag_products.len(), 0.0);
            self.lag_counts.resize(other.lag_counts.len(), 0.0);
        }
        for (a, b) in self.lag_products.iter_mut().zip(&other.lag_products) {
            *a += b;
        }
        for (a, b) in self.lag_counts.iter_mut().zip(&other.lag_counts) {
            *a += b;
        }
        self.sq_increments += other.sq_increments;
        self.elapsed += other.elapsed;
    }

    fn autocovariance(&self) -> Vec<f64> {
        let mean = self.sum / self.count;
        self.lag_products
            .iter()
            .zip(&self.lag_counts)
            .map(|(s, n)| s / n - mean * mean)
            .collect()
    }

    fn d_p(&self) -> f64 {
        self.sq_increments / (2.0 * self.elapsed)
    }
}

/// Slope-based rate of `ln C(ℓ)` against lag time, or `None` if any lag has
/// non-positive covariance.
fn fit_decay(acov: &[f64], step: f64) -> Option<f64> {
    if acov.iter().any(|c| !(*c > 0.0)) {
        return None;
    }
    let n = acov.len() as f64;
    let ts: Vec<f64> = (0..acov.len()).map(|l| l as f64 * step).collect();
    let ys: Vec<f64> = acov.iter().map(|c| c.ln()).collect();
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    Some(-sxy / sxx)
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Estimates `η` from an exponential fit of the momentum autocorrelation and
/// `D_p` from the mean squared momentum increment per unit time.
///
/// Records with non-uniform timestamps are resampled onto a uniform grid
/// (step = mean record spacing) for the autocorrelation; `D_p` always uses
/// the raw increments. The fit uses lags up to the last one with
/// `C(ℓ)/C(0) ≥ 0.22`. Standard errors come from a block bootstrap over
/// members, or over contiguous time blocks for a single long trajectory.
pub fn fit_friction_diffusion(traj: &TrajectoryEnsemble) -> Result<FrictionDiffusionFit> {
    if traj.records() < MIN_RECORDS || traj.checkpoints() < 3 {
        return Err(Error::FitFailure(format!(
            "{} momentum records, at least {MIN_RECORDS} required",
            traj.records()
        )));
    }
    if traj.p.iter().flatten().any(|v| !v.is_finite()) || traj.times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::FitFailure("non-finite records or non-increasing timestamps".into()));
    }
    let steps: Vec<f64> = traj.times.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_step = (traj.times[traj.times.len() - 1] - traj.times[0]) / steps.len() as f64;
    let uniform = steps.iter().all(|s| (s - mean_step).abs() <= 1e-9 * mean_step);
    let series = if uniform {
        traj.p.clone()
    } else {
        traj.resample_uniform(mean_step)?
    };
    let len = series[0].len();

    // Each bootstrap block is a set of (member, start, end) origin ranges.
    let members = series.len();
    let blocks: Vec<Vec<(usize, usize, usize)>> = if members >= BLOCKS {
        (0..BLOCKS)
            .map(|b| (b * members / BLOCKS..(b + 1) * members / BLOCKS).map(|m| (m, 0, len)).collect())
            .collect()
    } else {
        let chunks = BLOCKS.div_ceil(members);
        (0..members)
            .flat_map(|m| (0..chunks).map(move |c| vec![(m, c * len / chunks, (c + 1) * len / chunks)]))
            .filter(|segs| segs[0].2 > segs[0].1)
            .collect()
    };
    // Origins on the resampled grid map proportionally onto raw records.
    let raw_len = traj.checkpoints();
    let raw_range = |start: usize, end: usize| -> (usize, usize) { (start * raw_len / len, end * raw_len / len) };

    let block_stats = |max_lag: usize| -> Vec<BlockStats> {
        blocks
            .par_iter()
            .map(|segments| {
                let mut st = BlockStats {
                    lag_products: vec![0.0; max_lag + 1],
                    lag_counts: vec![0.0; max_lag + 1],
                    ..Default::default()
                };
                for &(m, start, end) in segments {
                    let s = &series[m];
                    for i in start..end {
                        st.count += 1.0;
                        st.sum += s[i];
                        for l in 0..=max_lag.min(len - 1 - i) {
                            st.lag_products[l] += s[i] * s[i + l];
                            st.lag_counts[l] += 1.0;
                        }
                    }
                    let (ra, rb) = raw_range(start, end);
                    let raw = &traj.p[m];
                    for i in ra.max(1)..rb {
                        st.sq_increments += (raw[i] - raw[i - 1]).powi(2);
                        st.elapsed += traj.times[i] - traj.times[i - 1];
                    }
                }
                st
            })
            .collect()
    };

    let combine = |stats: &[BlockStats], pick: &mut dyn Iterator<Item = usize>| -> BlockStats {
        let mut total = BlockStats::default();
        for i in pick {
            total.add(&stats[i]);
        }
        total
    };

    // Pilot pass at lag 1 to size the lag window.
    let pilot = block_stats(1);
    let pilot_total = combine(&pilot, &mut (0..pilot.len()));
    let pilot_acov = pilot_total.autocovariance();
    if !(pilot_acov[0] > 0.0) {
        return Err(Error::FitFailure("momentum record has zero variance".into()));
    }
    let rho1 = pilot_acov[1] / pilot_acov[0];
    if !(rho1 > ACF_CUTOFF && rho1 < 1.0) {
        return Err(Error::FitFailure(format!(
            "lag-one autocorrelation {rho1:.3} leaves no resolvable exponential decay"
        )));
    }
    let window = ((ACF_CUTOFF.ln() / rho1.ln()) * 1.5).ceil() as usize + 2;
    let max_lag = window.min(len / 2).max(1);

    let stats = block_stats(max_lag);
    let total = combine(&stats, &mut (0..stats.len()));
    let acov = total.autocovariance();
    let cut = acov
        .iter()
        .position(|c| !(*c >= ACF_CUTOFF * acov[0]))
        .unwrap_or(acov.len());
    if cut < 2 {
        return Err(Error::FitFailure("autocorrelation drops below cutoff at the first lag".into()));
    }
    let eta = fit_decay(&acov[..cut], mean_step)
        .ok_or_else(|| Error::FitFailure("non-positive autocovariance in fit window".into()))?;
    let d_p = total.d_p();
    if !(eta.is_finite() && d_p.is_finite()) {
        return Err(Error::FitFailure("non-finite estimate".into()));
    }

    let mut rng = member_rng(traj.seed ^ 0x9e37_79b9_7f4a_7c15, u64::MAX);
    let mut etas = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut dps = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let draw: Vec<usize> = (0..stats.len()).map(|_| rng.random_range(0..stats.len())).collect();
        let sample = combine(&stats, &mut draw.into_iter());
        if let Some(e) = fit_decay(&sample.autocovariance()[..cut], mean_step) {
            etas.push(e);
        }
        dps.push(sample.d_p());
    }
    let eta_se = if etas.len() >= 2 { mean_and_se(&etas).1 } else { f64::NAN };
    Ok(FrictionDiffusionFit {
        eta,
        eta_se,
        d_p,
        d_p_se: mean_and_se(&dps).1,
        max_lag: (cut - 1) as f64 * mean_step,
    })
}

/// Piecewise-linear cumulative distribution of a lattice probability mass
/// function, with each mass spread uniformly over its cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCdf {
    edges: Vec<f64>,
    cumulative: Vec<f64>,
}

impl GridCdf {
    /// `points` must be uniformly spaced; `masses` are renormalized.
    pub fn new(points: &[f64], masses: &[f64]) -> Result<Self> {
        if points.len() < 2 || points.len() != masses.len() {
            return Err(invalid("grid CDF needs matching points and masses"));
        }
        let h = points[1] - points[0];
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || masses.iter().any(|m| *m < -1e-12) {
            return Err(invalid("grid masses must be non-negative with positive total"));
        }
        let mut edges = Vec::with_capacity(points.len() + 1);
        let mut cumulative = Vec::with_capacity(points.len() + 1);
        edges.push(points[0] - 0.5 * h);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for (x, m) in points.iter().zip(masses) {
            acc += m.max(0.0) / total;
            edges.push(x + 0.5 * h);
            cumulative.push(acc);
        }
        Ok(GridCdf { edges, cumulative })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let last = self.edges.len() - 1;
        if x <= self.edges[0] {
            return 0.0;
        }
        if x >= self.edges[last] {
            return 1.0;
        }
        let h = self.edges[1] - self.edges[0];
        let i = (((x - self.edges[0]) / h).floor() as usize).min(last - 1);
        let w = (x - self.edges[i]) / h;
        self.cumulative[i] + w * (self.cumulative[i + 1] - self.cumulative[i])
    }
}

/// Kolmogorov-Smirnov distance between an empirical sample and a continuous
/// CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
