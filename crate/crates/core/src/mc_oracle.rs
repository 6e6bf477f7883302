//! Brute-force Monte Carlo check of the hedging error: exact Lévy increments
//! on a uniform grid, discrete rebalancing, squared terminal shortfall.
//!
//! Every path draws from its own ChaCha stream (`set_stream(path)`), and
//! paths are processed in fixed-size chunks whose results are summed in
//! order, so estimates do not depend on the number of threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, InverseGaussian, StandardNormal};
use rayon::prelude::*;

use crate::black_scholes::call_delta;
use crate::error::{Error, Result};
use crate::models::{LevyModel, ModelKind};
use crate::payoff::{invert_payoff, PayoffKind, PayoffTransform};
use crate::quadrature::QuadConfig;
use crate::strategies::{hedge_ratio, DeltaStrategy, StrategyLabel};

const CHUNK: usize = 512;

/// Log-spot nodes of the hedge-ratio table.
pub const TABLE_NODES: usize = 401;
/// Random probes used to validate the table, and the tolerance they must meet.
pub const TABLE_PROBES: usize = 100;
pub const TABLE_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathConfig {
    pub n_paths: usize,
    /// Rebalancing dates on a uniform grid over `[0, T]`.
    pub n_steps: usize,
    pub seed: u64,
    /// Pair each path with its mirror image; `n_paths` counts both.
    pub antithetic: bool,
}

impl PathConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self {
            n_paths,
            n_steps,
            seed,
            antithetic: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 || self.n_steps < 1 {
            return Err(Error::InvalidSimulation(format!(
                "n_paths and n_steps must be >= 1, got {} and {}",
                self.n_paths, self.n_steps
            )));
        }
        if self.antithetic && self.n_paths < 2 {
            return Err(Error::InvalidSimulation("antithetic sampling needs n_paths >= 2".into()));
        }
        Ok(())
    }

    /// Independent samples entering the estimator.
    fn samples(&self) -> usize {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub mse_hat: f64,
    /// Standard error of `mse_hat`, from the sample variance of the
    /// per-sample squared errors.
    pub std_error: f64,
    /// Paths simulated.
    pub n_paths: usize,
    /// Mean of the signed terminal error `H - c - gains`.
    pub mean_error: f64,
    /// Sample variance of the signed terminal error.
    pub error_variance: f64,
}

/// Exact sampler of `X_{t+dt} - X_t`.
#[derive(Debug, Clone, Copy)]
pub struct IncrementSampler {
    kind: SamplerKind,
}

#[derive(Debug, Clone, Copy)]
enum SamplerKind {
    Gaussian { mean: f64, sd: f64 },
    Nig { drift: f64, beta: f64, subordinator: InverseGaussian<f64> },
}

impl IncrementSampler {
    pub fn new(model: &LevyModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidSimulation(format!("dt must be > 0, got {dt}")));
        }
        let kind = match *model.kind() {
            ModelKind::BlackScholes { sigma } => SamplerKind::Gaussian {
                mean: -0.5 * sigma * sigma * dt,
                sd: sigma * dt.sqrt(),
            },
            ModelKind::Nig { alpha, beta, delta, mu } => {
                let gamma = (alpha * alpha - beta * beta).sqrt();
                let subordinator = InverseGaussian::new(delta * dt / gamma, (delta * dt).powi(2))
                    .map_err(|e| Error::InvalidSimulation(format!("inverse Gaussian: {e}")))?;
                SamplerKind::Nig {
                    drift: mu * dt,
                    beta,
                    subordinator,
                }
            }
            ModelKind::Cgmye { .. } => return Err(Error::UnsupportedModel("CGMYe")),
        };
        Ok(Self { kind })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_pair(rng).0
    }

    /// An increment and its antithetic partner, which reuses everything but
    /// flips the sign of the Gaussian draw.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match self.kind {
            SamplerKind::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                (mean + sd * z, mean - sd * z)
            }
            SamplerKind::Nig {
                drift,
                beta,
                subordinator,
            } => {
                let w = subordinator.sample(rng);
                let z: f64 = rng.sample(StandardNormal);
                let base = drift + beta * w;
                let spread = w.sqrt() * z;
                (base + spread, base - spread)
            }
        }
    }
}

/// One exact increment of the driving process over `dt`.
pub fn sample_increment<R: Rng + ?Sized>(model: &LevyModel, dt: f64, rng: &mut R) -> Result<f64> {
    Ok(IncrementSampler::new(model, dt)?.sample(rng))
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Hedge ratios on a `(t_j, log s)` lattice with cubic interpolation in `log s`.
struct DeltaTable {
    log_lo: f64,
    step: f64,
    rows: Vec<[f64; TABLE_NODES]>,
}

impl DeltaTable {
    fn build(
        strategy: &DeltaStrategy,
        pt: &PayoffTransform,
        log_range: (f64, f64),
        times: &[f64],
        cfg: &QuadConfig,
    ) -> Result<Self> {
        let (log_lo, log_hi) = log_range;
        let step = (log_hi - log_lo) / (TABLE_NODES - 1) as f64;
        let rows = times
            .par_iter()
            .map(|&t| {
                let mut row = [0.0; TABLE_NODES];
                for (i, slot) in row.iter_mut().enumerate() {
                    *slot = hedge_ratio(strategy, pt, (log_lo + i as f64 * step).exp(), t, cfg)?;
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { log_lo, step, rows })
    }

    fn ratio(&self, j: usize, log_s: f64) -> f64 {
        let row = &self.rows[j];
        let u = ((log_s - self.log_lo) / self.step).clamp(0.0, (TABLE_NODES - 1) as f64);
        let i = (u.floor() as usize).clamp(1, TABLE_NODES - 3);
        let x = u - i as f64;
        let (p0, p1, p2, p3) = (row[i - 1], row[i], row[i + 1], row[i + 2]);
        // Lagrange cubic through nodes -1, 0, 1, 2.
        -x * (x - 1.0) * (x - 2.0) / 6.0 * p0 + (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0 * p1
            - (x + 1.0) * x * (x - 2.0) / 2.0 * p2
            + (x + 1.0) * x * (x - 1.0) / 6.0 * p3
    }

    fn validate(
        &self,
        strategy: &DeltaStrategy,
        pt: &PayoffTransform,
        times: &[f64],
        seed: u64,
        cfg: &QuadConfig,
    ) -> Result<()> {
        let mut rng = path_rng(seed, u64::MAX);
        let log_hi = self.log_lo + self.step * (TABLE_NODES - 1) as f64;
        let mut max_error: f64 = 0.0;
        for _ in 0..TABLE_PROBES {
            let j = rng.random_range(0..times.len());
            let log_s = rng.random_range(self.log_lo..log_hi);
            let direct = hedge_ratio(strategy, pt, log_s.exp(), times[j], cfg)?;
            max_error = max_error.max((self.ratio(j, log_s) - direct).abs());
        }
        if max_error > TABLE_TOL {
            return Err(Error::TableAccuracy {
                max_error,
                tolerance: TABLE_TOL,
            });
        }
        Ok(())
    }
}

enum HedgeSource {
    BsDelta { strike: f64, sigma: f64, maturity: f64 },
    Table(DeltaTable),
}

impl HedgeSource {
    fn ratio(&self, j: usize, t: f64, s: f64) -> f64 {
        match self {
            HedgeSource::BsDelta { strike, sigma, maturity } => call_delta(s, *strike, *sigma, maturity - t),
            HedgeSource::Table(table) => table.ratio(j, s.ln()),
        }
    }
}

/// Estimates `E[(H - c - φ•S_T)²]` by simulating the discretely rebalanced hedge.
#[allow(clippy::too_many_arguments)]
pub fn simulate_hedge(
    model: &LevyModel,
    pt: &PayoffTransform,
    strategy: &DeltaStrategy,
    spot: f64,
    capital: f64,
    maturity: f64,
    path_cfg: &PathConfig,
    quad_cfg: &QuadConfig,
) -> Result<MCEstimate> {
    let levels = [path_cfg.n_steps];
    let mut out = simulate_hedge_ladder(model, pt, strategy, spot, capital, maturity, path_cfg, &levels, quad_cfg)?;
    Ok(out.remove(0))
}

/// Like [`simulate_hedge`], but rebalances the same paths on several grids.
/// Every entry of `levels` must divide `path_cfg.n_steps`; coarse grids see
/// sums of the fine increments, so the estimates share their randomness and
/// differences between them isolate the discretization effect.
#[allow(clippy::too_many_arguments)]
pub fn simulate_hedge_ladder(
    model: &LevyModel,
    pt: &PayoffTransform,
    strategy: &DeltaStrategy,
    spot: f64,
    capital: f64,
    maturity: f64,
    path_cfg: &PathConfig,
    levels: &[usize],
    quad_cfg: &QuadConfig,
) -> Result<Vec<MCEstimate>> {
    path_cfg.validate()?;
    quad_cfg.validate()?;
    if !(spot > 0.0 && maturity > 0.0 && capital.is_finite()) {
        return Err(Error::InvalidSimulation(format!(
            "need spot > 0, maturity > 0 and finite capital, got {spot}, {maturity}, {capital}"
        )));
    }
    if (strategy.maturity() - maturity).abs() > 1e-12 * maturity {
        return Err(Error::InvalidSimulation(format!(
            "strategy maturity {} differs from {maturity}",
            strategy.maturity()
        )));
    }
    let n_steps = path_cfg.n_steps;
    if levels.is_empty() || levels.iter().any(|&l| l == 0 || !n_steps.is_multiple_of(l)) {
        return Err(Error::InvalidSimulation(format!(
            "rebalancing levels {levels:?} must be nonempty divisors of n_steps = {n_steps}"
        )));
    }
    let sampler = IncrementSampler::new(model, maturity / n_steps as f64)?;

    let grids: Vec<Grid> = levels
        .iter()
        .map(|&l| {
            let dt = maturity / l as f64;
            let times: Vec<f64> = (0..l).map(|j| j as f64 * dt).collect();
            let hedge = hedge_source(model, pt, strategy, spot, maturity, &times, path_cfg.seed, quad_cfg)?;
            Ok(Grid {
                block: n_steps / l,
                times,
                hedge,
            })
        })
        .collect::<Result<_>>()?;
    let payoff = |s: f64| -> Result<f64> {
        match pt.payoff(s) {
            Some(v) => Ok(v),
            None => invert_payoff(pt, s, quad_cfg),
        }
    };

    // Terminal (squared error, error) per level for one sample, averaged
    // with the mirror path when antithetic.
    let run = |sample: usize| -> Result<Vec<(f64, f64)>> {
        let mut rng = path_rng(path_cfg.seed, sample as u64);
        let mut walks: Vec<[Walk; 2]> = vec![[Walk::new(spot), Walk::new(spot)]; grids.len()];
        for k in 0..n_steps {
            let (x, x_anti) = sampler.sample_pair(&mut rng);
            for (grid, walk) in grids.iter().zip(walks.iter_mut()) {
                walk[0].pending += x;
                walk[1].pending += x_anti;
                if (k + 1) % grid.block == 0 {
                    let j = k / grid.block;
                    let t = grid.times[j];
                    walk[0].rebalance(|s| grid.hedge.ratio(j, t, s));
                    if path_cfg.antithetic {
                        walk[1].rebalance(|s| grid.hedge.ratio(j, t, s));
                    }
                }
            }
        }
        walks
            .iter()
            .map(|walk| {
                let err = payoff(walk[0].spot)? - capital - walk[0].gains;
                if path_cfg.antithetic {
                    let err_anti = payoff(walk[1].spot)? - capital - walk[1].gains;
                    Ok((0.5 * (err * err + err_anti * err_anti), 0.5 * (err + err_anti)))
                } else {
                    Ok((err * err, err))
                }
            })
            .collect()
    };

    let n = path_cfg.samples();
    let chunks: Vec<Vec<Vec<(f64, f64)>>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|k| (k * CHUNK..((k + 1) * CHUNK).min(n)).map(run).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;

    Ok((0..levels.len())
        .map(|level| summarize(chunks.iter().flatten().map(|per_level| per_level[level]), n, path_cfg.antithetic))
        .collect())
}

struct Grid {
    /// Fine steps per rebalancing interval.
    block: usize,
    times: Vec<f64>,
    hedge: HedgeSource,
}

#[derive(Debug, Clone, Copy)]
struct Walk {
    spot: f64,
    gains: f64,
    /// Log increment accumulated since the last rebalancing date.
    pending: f64,
}

impl Walk {
    fn new(spot: f64) -> Self {
        Self {
            spot,
            gains: 0.0,
            pending: 0.0,
        }
    }

    fn rebalance(&mut self, ratio: impl Fn(f64) -> f64) {
        let next = self.spot * self.pending.exp();
        self.gains += ratio(self.spot) * (next - self.spot);
        self.spot = next;
        self.pending = 0.0;
    }
}

#[allow(clippy::too_many_arguments)]
fn hedge_source(
    model: &LevyModel,
    pt: &PayoffTransform,
    strategy: &DeltaStrategy,
    spot: f64,
    maturity: f64,
    times: &[f64],
    seed: u64,
    quad_cfg: &QuadConfig,
) -> Result<HedgeSource> {
    Ok(match (strategy.label(), pt.kind()) {
        (StrategyLabel::BlackScholes { sigma }, PayoffKind::Call { strike }) => HedgeSource::BsDelta {
            strike,
            sigma,
            maturity,
        },
        _ => {
            let sd = (model.moments(maturity)?.variance).sqrt();
            let half_width = (10.0 * sd).max(0.5);
            let range = (spot.ln() - half_width, spot.ln() + half_width);
            let table = DeltaTable::build(strategy, pt, range, times, quad_cfg)?;
            table.validate(strategy, pt, times, seed, quad_cfg)?;
            HedgeSource::Table(table)
        }
    })
}

/// Mean and standard error of the per-sample squared errors, summed in order.
fn summarize(samples: impl Iterator<Item = (f64, f64)>, n: usize, antithetic: bool) -> MCEstimate {
    let (mut sq, mut sq2, mut e, mut e2) = (
        Compensated::default(),
        Compensated::default(),
        Compensated::default(),
        Compensated::default(),
    );
    for (q, err) in samples {
        sq.add(q);
        sq2.add(q * q);
        e.add(err);
        e2.add(err * err);
    }
    let nf = n as f64;
    let mse_hat = sq.value() / nf;
    let mean_error = e.value() / nf;
    let (var_q, error_variance) = if n > 1 {
        (
            ((sq2.value() - nf * mse_hat * mse_hat) / (nf - 1.0)).max(0.0),
            ((e2.value() - nf * mean_error * mean_error) / (nf - 1.0)).max(0.0),
        )
    } else {
        (0.0, 0.0)
    };
    MCEstimate {
        mse_hat,
        std_error: (var_q / nf).sqrt(),
        n_paths: if antithetic { 2 * n } else { n },
        mean_error,
        error_variance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub u: f64,
    pub horizon: f64,
    /// Sample mean of `(S_t / S_0)^u`.
    pub sample_mean: f64,
    pub std_error: f64,
    /// `e^{t κ(u)}`.
    pub expected: f64,
    pub z_score: f64,
    /// `|z_score| <= 4`.
    pub passed: bool,
}

/// Checks `E[S_t^u] = S_0^u e^{t κ(u)}` by direct sampling.
pub fn moment_check(model: &LevyModel, u: f64, t: f64, n_paths: usize, seed: u64) -> Result<MomentCheck> {
    if n_paths < 2 {
        return Err(Error::InvalidSimulation("moment check needs n_paths >= 2".into()));
    }
    let expected = (t * model.kappa(Complex64::new(u, 0.0))?.re).exp();
    let sampler = IncrementSampler::new(model, t)?;
    let chunks: Vec<Vec<f64>> = (0..n_paths.div_ceil(CHUNK))
        .into_par_iter()
        .map(|k| {
            (k * CHUNK..((k + 1) * CHUNK).min(n_paths))
                .map(|i| (u * sampler.sample(&mut path_rng(seed, i as u64))).exp())
                .collect()
        })
        .collect();
    let (mut s, mut s2) = (Compensated::default(), Compensated::default());
    for &v in chunks.iter().flatten() {
        s.add(v);
        s2.add(v * v);
    }
    let nf = n_paths as f64;
    let sample_mean = s.value() / nf;
    let var = ((s2.value() - nf * sample_mean * sample_mean) / (nf - 1.0)).max(0.0);
    let std_error = (var / nf).sqrt();
    let gap = sample_mean - expected;
    let z_score = if std_error > 0.0 {
        gap / std_error
    } else if gap.abs() <= 1e-12 * expected {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(MomentCheck {
        u,
        horizon: t,
        sample_mean,
        std_error,
        expected,
        z_score,
        passed: z_score.abs() <= 4.0,
    })
}
