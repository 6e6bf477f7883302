//! Δ-strategies: hedge ratios of the form
//! `φ_t = ∫ S_{t-}^{z-1} g(z, t) p(z) dz` along the payoff's integration line,
//! with `g(z, ·)` an [`ExpPolyMix`] for every `z`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mix::{ExpPolyMix, MixTerm};
use crate::models::LevyModel;
use crate::payoff::{line_point, real_part, PayoffTransform};
use crate::quadrature::{integrate_line, QuadConfig};

/// Tolerance on `|κ(1)|` for a pricing model to count as a martingale.
pub const MARTINGALE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategyLabel {
    BlackScholes { sigma: f64 },
    ModelDelta,
    MvoMartingale,
    Custom,
}

impl fmt::Display for StrategyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyLabel::BlackScholes { .. } => f.write_str("bs"),
            StrategyLabel::ModelDelta => f.write_str("model_delta"),
            StrategyLabel::MvoMartingale => f.write_str("mvo"),
            StrategyLabel::Custom => f.write_str("custom"),
        }
    }
}

pub type CoefficientFn = dyn Fn(Complex64) -> ExpPolyMix + Send + Sync;

/// A family `z ↦ g(z, ·)` defining a Δ-strategy.
#[derive(Clone)]
pub struct DeltaStrategy {
    label: StrategyLabel,
    pricing_model: Option<LevyModel>,
    maturity: f64,
    integrability_waived: bool,
    coefficients: Arc<CoefficientFn>,
}

impl fmt::Debug for DeltaStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeltaStrategy")
            .field("label", &self.label)
            .field("pricing_model", &self.pricing_model)
            .field("maturity", &self.maturity)
            .field("integrability_waived", &self.integrability_waived)
            .finish()
    }
}

fn check_maturity(maturity: f64) -> Result<()> {
    if maturity > 0.0 && maturity.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidStrategy(format!("maturity must be > 0, got {maturity}")))
    }
}

impl DeltaStrategy {
    /// Strategy from user coefficients. `g` must satisfy
    /// `g(conj z) = conj g(z)` and use degrees 0 or 1 only.
    pub fn custom<F>(maturity: f64, g: F) -> Result<Self>
    where
        F: Fn(Complex64) -> ExpPolyMix + Send + Sync + 'static,
    {
        check_maturity(maturity)?;
        Ok(Self {
            label: StrategyLabel::Custom,
            pricing_model: None,
            maturity,
            integrability_waived: false,
            coefficients: Arc::new(g),
        })
    }

    /// Holds no stock at all, `g ≡ 0`.
    pub fn zero(maturity: f64) -> Result<Self> {
        Self::custom(maturity, |_| ExpPolyMix::zero())
    }

    pub fn label(&self) -> StrategyLabel {
        self.label
    }

    pub fn pricing_model(&self) -> Option<&LevyModel> {
        self.pricing_model.as_ref()
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn integrability_waived(&self) -> bool {
        self.integrability_waived
    }

    /// Skip the numerical tail check of `∫_0^T |g(z,s)|² ds`.
    pub fn waive_integrability(mut self) -> Self {
        self.integrability_waived = true;
        self
    }

    /// `g(z, ·)` as a mixture in time to maturity.
    pub fn g(&self, z: Complex64) -> ExpPolyMix {
        (self.coefficients)(z)
    }

    /// `g(z, t)`.
    pub fn g_at(&self, z: Complex64, t: f64) -> Complex64 {
        self.g(z).eval(t, self.maturity)
    }

    /// `g'(z, ·) = g(z, ·) (1 + ε(z))`, relabelled as a custom strategy.
    pub fn perturbed<E>(&self, epsilon: E) -> Self
    where
        E: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        let base = Arc::clone(&self.coefficients);
        Self {
            label: StrategyLabel::Custom,
            pricing_model: self.pricing_model,
            maturity: self.maturity,
            integrability_waived: self.integrability_waived,
            coefficients: Arc::new(move |z| base(z).scale(1.0 + epsilon(z))),
        }
    }

    /// `∫_0^T |g(z, s)|² ds` in closed form.
    pub fn squared_norm(&self, z: Complex64) -> f64 {
        let g = self.g(z);
        (&g * &g.conj()).integral(self.maturity).re
    }

    /// Checks that the coefficients can be evaluated on `R + iℝ`.
    pub fn validate_line(&self, abscissa: f64) -> Result<()> {
        if let Some(model) = &self.pricing_model {
            for re in [abscissa, abscissa + 1.0] {
                model.kappa(Complex64::new(re, 0.0)).map_err(|e| {
                    Error::InvalidStrategy(format!("pricing model cannot be evaluated at Re z = {re}: {e}"))
                })?;
            }
        }
        if let Some(bad) = self.g(line_point(abscissa, 1.0)).terms().iter().find(|t| t.degree > 1) {
            return Err(Error::InvalidStrategy(format!(
                "coefficient terms must have degree 0 or 1, found {}",
                bad.degree
            )));
        }
        Ok(())
    }

    /// Numerical tail check that `z ↦ ∫_0^T |g(z,s)|² ds` is `p`-integrable:
    /// `N(x) |p(R+ix)| |x|^{1.2}` must not grow between `|x| = 10³` and `10⁴`.
    pub fn check_integrability(&self, pt: &PayoffTransform) -> Result<()> {
        if self.integrability_waived {
            return Ok(());
        }
        let r = pt.abscissa();
        let profile = |x: f64| {
            let z = line_point(r, x);
            self.squared_norm(z) * pt.weight(z).norm() * x.abs().powf(1.2)
        };
        for x in [1e3, -1e3] {
            let (near, far) = (profile(x), profile(10.0 * x));
            if !(near.is_finite() && far.is_finite()) {
                return Err(Error::InvalidStrategy(format!(
                    "{} strategy coefficients are not finite on the integration line",
                    self.label
                )));
            }
            if far > near * (1.0 + 1e-9) + 1e-300 {
                return Err(Error::InvalidStrategy(format!(
                    "{} strategy is not p-integrable: tail profile grows from {near:e} to {far:e}",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

/// The Black-Scholes delta with volatility `sigma`:
/// `g(z, t) = z exp(σ² z (z-1) (T-t) / 2)`.
pub fn bs_strategy(sigma: f64, maturity: f64) -> Result<DeltaStrategy> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameters(format!("sigma must be > 0, got {sigma}")));
    }
    check_maturity(maturity)?;
    let half_var = 0.5 * sigma * sigma;
    Ok(DeltaStrategy {
        label: StrategyLabel::BlackScholes { sigma },
        pricing_model: Some(LevyModel::black_scholes(sigma)?),
        maturity,
        integrability_waived: false,
        coefficients: Arc::new(move |z| ExpPolyMix::single(z, half_var * z * (z - 1.0))),
    })
}

/// Delta of the claim's price in a martingale pricing model with cumulant
/// function `κ̃`: `g(z, t) = z exp(κ̃(z) (T-t))`.
///
/// Existence is guaranteed when the pricing driver has a Brownian part;
/// otherwise `waive_integrability` must be set explicitly.
pub fn model_delta_strategy(pricing_model: &LevyModel, maturity: f64, waive_integrability: bool) -> Result<DeltaStrategy> {
    check_maturity(maturity)?;
    let drift = pricing_model.drift_rate();
    if drift.abs() > MARTINGALE_TOL {
        return Err(Error::NotMartingale(drift));
    }
    if !pricing_model.has_brownian_component() && !waive_integrability {
        return Err(Error::NoBrownianComponent);
    }
    let model = *pricing_model;
    Ok(DeltaStrategy {
        label: StrategyLabel::ModelDelta,
        pricing_model: Some(model),
        maturity,
        integrability_waived: waive_integrability,
        coefficients: Arc::new(move |z| ExpPolyMix::single(z, model.kappa_unchecked(z))),
    })
}

/// Variance-optimal hedge of a martingale model:
/// `g(z, t) = exp(κ(z) (T-t)) (κ(z+1) - κ(z) - κ(1)) / (κ(2) - 2κ(1))`.
pub fn mvo_martingale_strategy(model: &LevyModel, maturity: f64) -> Result<DeltaStrategy> {
    let drift = model.drift_rate();
    if drift.abs() > MARTINGALE_TOL {
        return Err(Error::NotMartingale(drift));
    }
    mvo_formula(model, maturity)
}

/// The martingale variance-optimal formula applied to a model with drift.
/// Not variance-optimal there (the optimal hedge then has a feedback term);
/// used as a stand-in when comparing hedges across drifts.
pub fn mvo_martingale_proxy(model: &LevyModel, maturity: f64) -> Result<DeltaStrategy> {
    mvo_formula(model, maturity)
}

fn mvo_formula(model: &LevyModel, maturity: f64) -> Result<DeltaStrategy> {
    check_maturity(maturity)?;
    let drift = model.drift_rate();
    let spread = model.variance_rate_spread();
    if spread.abs() <= 1e-14 {
        return Err(Error::DegenerateModel(spread));
    }
    let model = *model;
    Ok(DeltaStrategy {
        label: StrategyLabel::MvoMartingale,
        pricing_model: Some(model),
        maturity,
        integrability_waived: false,
        coefficients: Arc::new(move |z| {
            let kz = model.kappa_unchecked(z);
            let ratio = (model.kappa_unchecked(z + 1.0) - kz - drift) / spread;
            ExpPolyMix::single(ratio, kz)
        }),
    })
}

/// `φ(s, t) = ∫ s^{z-1} g(z, t) p(z) dz` for `t < T`.
pub fn hedge_ratio(strategy: &DeltaStrategy, pt: &PayoffTransform, s: f64, t: f64, cfg: &QuadConfig) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameters(format!("spot must be > 0, got {s}")));
    }
    let tau = strategy.maturity - t;
    if !(tau > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "hedge ratio needs t < T (t = {t}, T = {})",
            strategy.maturity
        )));
    }
    let r = pt.abscissa();
    strategy.validate_line(r)?;
    let log_s = s.ln();
    let res = integrate_line(
        |x| {
            let z = line_point(r, x);
            let g = strategy.g(z);
            let value: Complex64 = g
                .terms()
                .iter()
                .map(|&MixTerm { coef, degree, rate }| {
                    coef * tau.powi(degree as i32) * pt.weighted_power(log_s, z, rate * tau - log_s)
                })
                .sum();
            value * Complex64::i()
        },
        cfg,
    )?;
    real_part(res.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::black_scholes::call_delta;

    fn nig_reference() -> LevyModel {
        LevyModel::nig(75.49, -4.089, 3.024, -0.04).unwrap()
    }

    fn cgmye_reference() -> LevyModel {
        LevyModel::martingale_adjust_cgmye(9.61, 9.97, 16.51, 0.1430, 0.0458).unwrap()
    }

    #[test]
    fn bs_coefficients() {
        let s = bs_strategy(0.2, 0.25).unwrap();
        for t in [0.0, 0.1, 0.25] {
            assert!((s.g_at(Complex64::new(1.0, 0.0), t) - 1.0).norm() < 1e-15);
        }
        let z = Complex64::new(1.1, 5.0);
        let direct = z * (0.02 * z * (z - 1.0) * 0.25).exp();
        assert!((s.g_at(z, 0.0) - direct).norm() < 1e-14);
        assert!(s.g_at(z, 0.0).norm() < z.norm() * (-0.02 * 25.0 * 0.25f64).exp() * 1.1);
        assert_eq!(s.g_at(z, 0.25), z);
        assert!(bs_strategy(0.0, 0.25).is_err());
    }

    #[test]
    fn model_delta_under_bs_is_bs_hedge() {
        let bs = LevyModel::black_scholes(0.2).unwrap();
        let md = model_delta_strategy(&bs, 0.25, false).unwrap();
        let reference = bs_strategy(0.2, 0.25).unwrap();
        for x in [-3.0, 0.0, 2.5, 40.0] {
            let z = line_point(1.1, x);
            assert_eq!(md.g(z).terms(), reference.g(z).terms());
        }
    }

    #[test]
    fn model_delta_preconditions() {
        assert!(model_delta_strategy(&cgmye_reference(), 0.25, false).is_ok());
        let nig_mart = nig_reference().nig_with_drift(0.0).unwrap();
        assert!(matches!(
            model_delta_strategy(&nig_mart, 0.25, false),
            Err(Error::NoBrownianComponent)
        ));
        assert!(model_delta_strategy(&nig_mart, 0.25, true).is_ok());
        assert!(matches!(
            model_delta_strategy(&nig_reference(), 0.25, true),
            Err(Error::NotMartingale(_))
        ));
    }

    #[test]
    fn mvo_under_bs_is_bs_hedge() {
        let bs = LevyModel::black_scholes(0.2).unwrap();
        let mvo = mvo_martingale_strategy(&bs, 0.25).unwrap();
        let reference = bs_strategy(0.2, 0.25).unwrap();
        for x in [-3.0, 0.0, 2.5, 40.0] {
            let z = line_point(1.1, x);
            let (a, b) = (mvo.g(z), reference.g(z));
            assert!((a.terms()[0].coef - b.terms()[0].coef).norm() < 1e-12 * z.norm());
            assert!((a.terms()[0].rate - b.terms()[0].rate).norm() < 1e-12 * z.norm_sqr());
        }
        assert!(matches!(
            mvo_martingale_strategy(&nig_reference(), 0.25),
            Err(Error::NotMartingale(_))
        ));
    }

    #[test]
    fn hedge_ratio_matches_closed_form_delta() {
        let s = bs_strategy(0.2, 0.25).unwrap();
        let pt = PayoffTransform::call(99.0, 1.1).unwrap();
        let cfg = QuadConfig::default();
        let got = hedge_ratio(&s, &pt, 99.0, 0.0, &cfg).unwrap();
        assert!((got - call_delta(99.0, 99.0, 0.2, 0.25)).abs() < 1e-6, "{got}");
        assert!(hedge_ratio(&s, &pt, 10.0, 0.0, &cfg).unwrap().abs() < 1e-4);
        assert!((hedge_ratio(&s, &pt, 1000.0, 0.0, &cfg).unwrap() - 1.0).abs() < 1e-4);
        assert!(hedge_ratio(&s, &pt, 99.0, 0.25, &cfg).is_err());
    }

    #[test]
    fn hedge_ratio_monotone_in_spot() {
        let s = bs_strategy(0.2, 0.25).unwrap();
        let pt = PayoffTransform::call(99.0, 1.1).unwrap();
        let cfg = QuadConfig::default();
        let mut last = -1.0;
        for k in 0..25 {
            let spot = 70.0 + 2.5 * k as f64;
            let v = hedge_ratio(&s, &pt, spot, 0.1, &cfg).unwrap();
            assert!(v >= last - 1e-6, "spot {spot}");
            last = v;
        }
    }

    #[test]
    fn squared_norm_bounded_on_the_line() {
        let pt = PayoffTransform::call(99.0, 1.1).unwrap();
        let bs = bs_strategy(0.2, 0.25).unwrap();
        let md = model_delta_strategy(&cgmye_reference(), 0.25, false).unwrap();
        for strat in [&bs, &md] {
            let sup = (0..=1000)
                .map(|k| strat.squared_norm(line_point(1.1, k as f64)))
                .fold(0.0, f64::max);
            assert!(sup.is_finite() && sup < 1e3, "{sup}");
            strat.check_integrability(&pt).unwrap();
        }
        let nig_mart = nig_reference().nig_with_drift(0.0).unwrap();
        let md_nig = model_delta_strategy(&nig_mart, 0.25, true).unwrap();
        md_nig.check_integrability(&pt).unwrap(); // waived
        let unwaived = DeltaStrategy {
            integrability_waived: false,
            ..md_nig
        };
        assert!(unwaived.check_integrability(&pt).is_err());
        mvo_martingale_strategy(&nig_mart, 0.25).unwrap().check_integrability(&pt).unwrap();
    }

    #[test]
    fn custom_degree_limit() {
        let s = DeltaStrategy::custom(0.25, |z| ExpPolyMix::new(vec![MixTerm::new(z, 2, z)])).unwrap();
        assert!(s.validate_line(1.1).is_err());
        assert!(DeltaStrategy::zero(0.25).unwrap().validate_line(1.1).is_ok());
        assert!(DeltaStrategy::zero(0.0).is_err());
    }
}
