//! Mean squared hedging error of a Δ-strategy.
//!
//! For endowment `c` and strategy `g` the error is
//! `(w - c)² + ∬ J(y, z) p(y) p(z) dy dz`, where
//!
//! * `α(z, ·)` solves `α' + κ(z) α - κ(1) g(z, ·) = 0` with `α(z, T) = 1`,
//! * `w = ∫ S_0^z α(z, 0) p(z) dz`,
//! * `J(y, z)` combines four time integrals of products of `α` and `g`
//!   against `S_0^{y+z} e^{κ(y+z) s}`.
//!
//! Every time integral is taken in closed form through [`ExpPolyMix`].

use std::time::Instant;

use num_complex::Complex64;

use crate::black_scholes;
use crate::error::{Error, Result};
use crate::mix::{psi, ExpPolyMix, MixTerm};
use crate::models::LevyModel;
use crate::payoff::{line_point, real_part, PayoffTransform};
use crate::quadrature::{integrate_line, integrate_nested, QuadConfig};
use crate::strategies::{DeltaStrategy, MARTINGALE_TOL};

pub use crate::mix::phi_m;

/// Below this `|κ(z) - γ| T` the correction term of `α` uses its resonant limit.
const RESONANCE_TOL: f64 = 1e-6;

/// A model, payoff, strategy, spot, endowment and maturity.
#[derive(Debug, Clone)]
pub struct HedgingProblem {
    model: LevyModel,
    transform: PayoffTransform,
    strategy: DeltaStrategy,
    spot: f64,
    capital: f64,
    maturity: f64,
}

impl HedgingProblem {
    pub fn new(
        model: LevyModel,
        transform: PayoffTransform,
        strategy: DeltaStrategy,
        spot: f64,
        capital: f64,
        maturity: f64,
    ) -> Result<Self> {
        if !(spot > 0.0 && spot.is_finite()) {
            return Err(Error::InvalidProblem(format!("spot must be > 0, got {spot}")));
        }
        if !capital.is_finite() {
            return Err(Error::InvalidProblem(format!("capital must be finite, got {capital}")));
        }
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(Error::InvalidProblem(format!("maturity must be > 0, got {maturity}")));
        }
        if (strategy.maturity() - maturity).abs() > 1e-12 * maturity {
            return Err(Error::InvalidProblem(format!(
                "strategy maturity {} differs from problem maturity {maturity}",
                strategy.maturity()
            )));
        }
        let r = transform.abscissa();
        for re in [r, r + 1.0, 2.0 * r, 2.0] {
            model.kappa(Complex64::new(re, 0.0)).map_err(|e| {
                Error::InvalidProblem(format!("model must be evaluable at Re z = {re} for abscissa {r}: {e}"))
            })?;
        }
        strategy.validate_line(r)?;
        strategy.check_integrability(&transform)?;
        Ok(Self {
            model,
            transform,
            strategy,
            spot,
            capital,
            maturity,
        })
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn transform(&self) -> &PayoffTransform {
        &self.transform
    }

    pub fn strategy(&self) -> &DeltaStrategy {
        &self.strategy
    }

    pub fn spot(&self) -> f64 {
        self.spot
    }

    pub fn capital(&self) -> f64 {
        self.capital
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn with_capital(mut self, capital: f64) -> Self {
        self.capital = capital;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgingErrorReport {
    /// Optimal endowment for the strategy.
    pub w: f64,
    /// The double-integral part of the error, independent of the endowment.
    pub covariation_term: f64,
    pub capital: f64,
    pub mse: f64,
    /// `√mse / c`, defined for `c > 0`.
    pub relative_error: Option<f64>,
    /// Absolute quadrature error estimate of `mse`.
    pub quad_error: f64,
    /// Largest imaginary part discarded from integrals that should be real.
    pub imag_residual: f64,
    pub evaluations: usize,
    /// Wall time in seconds.
    pub wall_time: f64,
}

impl HedgingErrorReport {
    /// Error of the same strategy under another endowment.
    pub fn mse_with_capital(&self, capital: f64) -> f64 {
        (self.w - capital).powi(2) + self.covariation_term
    }
}

/// A real line integral with its error estimate and discarded imaginary part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineValue {
    pub value: f64,
    pub error: f64,
    pub imag_residual: f64,
}

/// `α(z, ·)` as a mixture in time to maturity.
pub fn alpha(problem: &HedgingProblem, z: Complex64) -> ExpPolyMix {
    let kz = problem.model.kappa_unchecked(z);
    let g = problem.strategy.g(z);
    alpha_mix(kz, problem.model.drift_rate(), &g, problem.maturity)
}

fn alpha_mix(kz: Complex64, drift: f64, g: &ExpPolyMix, maturity: f64) -> ExpPolyMix {
    let one = Complex64::new(1.0, 0.0);
    let mut out = ExpPolyMix::new(vec![MixTerm::new(one, 0, kz)]);
    if drift == 0.0 {
        return out;
    }
    for &MixTerm { coef, degree, rate } in g.terms() {
        let d = rate - kz;
        let resonant = d.norm() * maturity <= RESONANCE_TOL;
        // -κ(1) c e^{κτ} ∫_0^τ u^m e^{d u} du, split into mixture terms.
        let k = -drift * coef;
        match (degree, resonant) {
            (0, false) => {
                out.push(MixTerm::new(k / d, 0, rate));
                out.push(MixTerm::new(-k / d, 0, kz));
            }
            (0, true) => out.push(MixTerm::new(k, 1, kz)),
            (1, false) => {
                out.push(MixTerm::new(k / d, 1, rate));
                out.push(MixTerm::new(-k / (d * d), 0, rate));
                out.push(MixTerm::new(k / (d * d), 0, kz));
            }
            (1, true) => out.push(MixTerm::new(k * 0.5, 2, kz)),
            _ => unreachable!("strategy degree validated to be <= 1"),
        }
    }
    out
}

/// Terms of a mixture with `e^{λT}` cached.
#[derive(Debug, Clone, Copy)]
struct CachedTerm {
    coef: Complex64,
    degree: u32,
    rate: Complex64,
    grown: Complex64,
}

fn cache(mix: &ExpPolyMix, maturity: f64) -> Vec<CachedTerm> {
    mix.terms()
        .iter()
        .map(|t| CachedTerm {
            coef: t.coef,
            degree: t.degree,
            rate: t.rate,
            grown: (t.rate * maturity).exp(),
        })
        .collect()
}

/// Everything `J` needs about one point of the integration line.
struct LinePoint {
    z: Complex64,
    kappa: Complex64,
    /// `κ(z+1) - κ(z) - κ(1)`.
    cross: Complex64,
    alpha: Vec<CachedTerm>,
    g: Vec<CachedTerm>,
    /// `S_0^z p(z) dz/dx`.
    weight: Complex64,
}

struct Context<'a> {
    problem: &'a HedgingProblem,
    drift: f64,
    spread: f64,
    log_spot: f64,
}

impl<'a> Context<'a> {
    fn new(problem: &'a HedgingProblem) -> Self {
        Self {
            problem,
            drift: problem.model.drift_rate(),
            spread: problem.model.variance_rate_spread(),
            log_spot: problem.spot.ln(),
        }
    }

    fn point(&self, z: Complex64) -> LinePoint {
        let p = self.problem;
        let kappa = p.model.kappa_unchecked(z);
        let cross = p.model.kappa_unchecked(z + 1.0) - kappa - self.drift;
        let g = p.strategy.g(z);
        let alpha = alpha_mix(kappa, self.drift, &g, p.maturity);
        let weight = p.transform.weighted_power(self.log_spot, z, Complex64::new(0.0, 0.0)) * Complex64::i();
        LinePoint {
            z,
            kappa,
            cross,
            alpha: cache(&alpha, p.maturity),
            g: cache(&g, p.maturity),
            weight,
        }
    }

    /// `J(y, z) / S_0^{y+z}`.
    fn kernel(&self, y: &LinePoint, z: &LinePoint) -> Complex64 {
        self.kernel_terms(y, z).iter().sum()
    }

    /// The four covariation contributions to `J(y, z) / S_0^{y+z}`.
    fn kernel_terms(&self, y: &LinePoint, z: &LinePoint) -> [Complex64; 4] {
        let maturity = self.problem.maturity;
        let ks = self.problem.model.kappa_unchecked(y.z + z.z);
        let anchor = (ks * maturity).exp();
        let pair = |a: &[CachedTerm], b: &[CachedTerm]| -> Complex64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for s in a {
                for t in b {
                    acc += s.coef
                        * t.coef
                        * psi(s.degree + t.degree, s.rate + t.rate, ks, s.grown * t.grown, anchor, maturity);
                }
            }
            acc
        };
        [
            (ks - y.kappa - z.kappa) * pair(&y.alpha, &z.alpha),
            -y.cross * pair(&y.alpha, &z.g),
            -z.cross * pair(&z.alpha, &y.g),
            self.spread * pair(&y.g, &z.g),
        ]
    }
}

/// `J(y, z)` for `y, z` on the integration line.
pub fn kernel_j(problem: &HedgingProblem, y: Complex64, z: Complex64) -> Complex64 {
    let ctx = Context::new(problem);
    let (py, pz) = (ctx.point(y), ctx.point(z));
    ctx.kernel(&py, &pz) * ((y + z) * ctx.log_spot).exp()
}

/// Sum of the magnitudes of the four contributions to `J(y, z)`; the scale
/// against which a cancelling kernel is judged.
pub fn kernel_scale(problem: &HedgingProblem, y: Complex64, z: Complex64) -> f64 {
    let ctx = Context::new(problem);
    let (py, pz) = (ctx.point(y), ctx.point(z));
    let factor = ((y + z) * ctx.log_spot).exp().norm();
    ctx.kernel_terms(&py, &pz).iter().map(|t| t.norm()).sum::<f64>() * factor
}

/// `w = ∫ S_0^z α(z, 0) p(z) dz`.
pub fn mean_value_w(problem: &HedgingProblem, cfg: &QuadConfig) -> Result<LineValue> {
    let ctx = Context::new(problem);
    let r = problem.transform.abscissa();
    let maturity = problem.maturity;
    let res = integrate_line(
        |x| {
            let z = line_point(r, x);
            let kz = problem.model.kappa_unchecked(z);
            let g = problem.strategy.g(z);
            let alpha = alpha_mix(kz, ctx.drift, &g, maturity);
            let value: Complex64 = alpha
                .terms()
                .iter()
                .map(|t| {
                    t.coef
                        * maturity.powi(t.degree as i32)
                        * problem.transform.weighted_power(ctx.log_spot, z, t.rate * maturity)
                })
                .sum();
            value * Complex64::i()
        },
        cfg,
    )?;
    Ok(LineValue {
        value: real_part(res.value)?,
        error: res.error_estimate,
        imag_residual: res.value.im.abs(),
    })
}

/// Price `∫ S_0^z e^{κ(z) T} p(z) dz` of the claim under a martingale model.
pub fn model_price(model: &LevyModel, pt: &PayoffTransform, spot: f64, maturity: f64, cfg: &QuadConfig) -> Result<LineValue> {
    let drift = model.drift_rate();
    if drift.abs() > MARTINGALE_TOL {
        return Err(Error::NotMartingale(drift));
    }
    if !(spot > 0.0) {
        return Err(Error::InvalidProblem(format!("spot must be > 0, got {spot}")));
    }
    let r = pt.abscissa();
    model.kappa(Complex64::new(r, 0.0))?;
    let log_spot = spot.ln();
    let res = integrate_line(
        |x| {
            let z = line_point(r, x);
            pt.weighted_power(log_spot, z, model.kappa_unchecked(z) * maturity) * Complex64::i()
        },
        cfg,
    )?;
    Ok(LineValue {
        value: real_part(res.value)?,
        error: res.error_estimate,
        imag_residual: res.value.im.abs(),
    })
}

/// Mean squared hedging error of the problem's endowment/strategy pair.
pub fn hedging_error(problem: &HedgingProblem, cfg: &QuadConfig) -> Result<HedgingErrorReport> {
    let started = Instant::now();
    let w = mean_value_w(problem, cfg)?;

    let ctx = Context::new(problem);
    let r = problem.transform.abscissa();
    let double = integrate_nested(
        |y| ctx.point(line_point(r, y)),
        // e^{κ(y+z)(T-s)} is least damped where y + z is real
        |y| Some(-y),
        |py, x| {
            let pz = ctx.point(line_point(r, x));
            ctx.kernel(py, &pz) * py.weight * pz.weight
        },
        cfg,
    )?;

    let covariation_term = double.value.re;
    let gap = w.value - problem.capital;
    let mse = gap * gap + covariation_term;
    let quad_error = double.error_estimate + 2.0 * gap.abs() * w.error + w.error * w.error;
    if mse < -quad_error {
        return Err(Error::NegativeMse { mse, quad_error });
    }
    let relative_error = (problem.capital > 0.0).then(|| mse.max(0.0).sqrt() / problem.capital);
    Ok(HedgingErrorReport {
        w: w.value,
        covariation_term,
        capital: problem.capital,
        mse,
        relative_error,
        quad_error,
        imag_residual: w.imag_residual.max(double.value.im.abs()),
        evaluations: double.evaluations,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Black-Scholes volatility reproducing the martingale model's call price.
pub fn implied_bs_sigma(model: &LevyModel, pt: &PayoffTransform, spot: f64, maturity: f64, cfg: &QuadConfig) -> Result<f64> {
    let strike = pt
        .strike()
        .ok_or_else(|| Error::InvalidProblem("implied volatility needs a call payoff".into()))?;
    let target = model_price(model, pt, spot, maturity, cfg)?.value;
    implied_volatility(target, spot, strike, maturity)
}

/// Bisection on `σ ∈ [1e-4, 3]` for a Black-Scholes call price.
pub fn implied_volatility(target: f64, spot: f64, strike: f64, maturity: f64) -> Result<f64> {
    let (mut lo, mut hi) = (1e-4, 3.0);
    let price = |s: f64| black_scholes::call_price(spot, strike, s, maturity);
    if !(price(lo) <= target && target <= price(hi)) {
        return Err(Error::NoBracket { lo, hi, target });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let diff = price(mid) - target;
        if diff.abs() <= 1e-10 || hi - lo <= 1e-15 {
            return Ok(mid);
        }
        if diff > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
