//! Exponential Lévy models described by their cumulant generating function
//! `κ`, with `E[exp(z X_t)] = exp(t κ(z))` on a vertical strip of the complex
//! plane.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Margin by which evaluation points must stay inside an open strip.
pub const STRIP_MARGIN: f64 = 1e-9;

/// Smallest `|κ(2) - 2κ(1)|` accepted as a non-degenerate model.
const DEGENERACY_TOL: f64 = 1e-14;

/// Open interval of admissible real parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strip {
    pub lo: f64,
    pub hi: f64,
}

impl Strip {
    pub fn contains(&self, re: f64) -> bool {
        re > self.lo + STRIP_MARGIN && re < self.hi - STRIP_MARGIN
    }

    fn check(&self, re: f64) -> Result<()> {
        if self.contains(re) {
            Ok(())
        } else {
            Err(Error::OutOfStrip {
                re,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    /// Distance from `re` to the nearer strip boundary.
    pub fn distance(&self, re: f64) -> f64 {
        (re - self.lo).min(self.hi - re)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// Driftless geometric Brownian motion, `κ(z) = σ² z (z - 1) / 2`.
    BlackScholes { sigma: f64 },
    /// Normal inverse Gaussian.
    Nig { alpha: f64, beta: f64, delta: f64, mu: f64 },
    /// CGMY tempered stable process plus an independent Brownian part with
    /// volatility `eta`; `omega` is the drift coefficient.
    Cgmye {
        c: f64,
        g: f64,
        m: f64,
        y: f64,
        eta: f64,
        omega: f64,
    },
}

/// Constants precomputed at construction for hot-loop evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Cache {
    None,
    /// `sqrt(α² - β²)` and `α²`.
    Nig { gamma: f64, alpha_sq: f64 },
    /// `C Γ(-Y)`, `M^Y`, `G^Y`.
    Cgmy { scale: f64, m_pow: f64, g_pow: f64 },
}

/// An exponential Lévy model `S_t = S_0 exp(X_t)`. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyModel {
    kind: ModelKind,
    strip: Strip,
    cache: Cache,
}

/// Variance, skewness and excess kurtosis of `X_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub horizon: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl LevyModel {
    pub fn black_scholes(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameters(format!("sigma must be > 0, got {sigma}")));
        }
        Self::finish(
            ModelKind::BlackScholes { sigma },
            Strip {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            },
            Cache::None,
        )
    }

    pub fn nig(alpha: f64, beta: f64, delta: f64, mu: f64) -> Result<Self> {
        if ![alpha, beta, delta, mu].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameters("NIG parameters must be finite".into()));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidParameters(format!("NIG delta must be > 0, got {delta}")));
        }
        if !(beta.abs() < alpha) {
            return Err(Error::InvalidParameters(format!(
                "NIG requires |beta| < alpha, got alpha={alpha}, beta={beta}"
            )));
        }
        Self::finish(
            ModelKind::Nig { alpha, beta, delta, mu },
            Strip {
                lo: -alpha - beta,
                hi: alpha - beta,
            },
            Cache::Nig {
                gamma: (alpha * alpha - beta * beta).sqrt(),
                alpha_sq: alpha * alpha,
            },
        )
    }

    pub fn cgmye(c: f64, g: f64, m: f64, y: f64, eta: f64, omega: f64) -> Result<Self> {
        if ![c, g, m, y, eta, omega].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameters("CGMYe parameters must be finite".into()));
        }
        if !(c > 0.0 && g > 0.0 && m >= 0.0 && y < 2.0 && eta > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "CGMYe requires C>0, G>0, M>=0, Y<2, eta>0; got C={c}, G={g}, M={m}, Y={y}, eta={eta}"
            )));
        }
        let scale = c * real_gamma(-y)?;
        Self::finish(
            ModelKind::Cgmye { c, g, m, y, eta, omega },
            Strip { lo: -g, hi: m },
            Cache::Cgmy {
                scale,
                m_pow: m.powf(y),
                g_pow: g.powf(y),
            },
        )
    }

    /// CGMYe model whose drift `ω` makes `exp(X)` a martingale, `κ(1) = 0`.
    pub fn martingale_adjust_cgmye(c: f64, g: f64, m: f64, y: f64, eta: f64) -> Result<Self> {
        let unadjusted = Self::cgmye(c, g, m, y, eta, 0.0)?;
        let omega = -unadjusted.kappa_real(1.0)?;
        Self::cgmye(c, g, m, y, eta, omega)
    }

    fn finish(kind: ModelKind, strip: Strip, cache: Cache) -> Result<Self> {
        let model = LevyModel { kind, strip, cache };
        if !strip.contains(2.0) || !strip.contains(0.0) {
            return Err(Error::InvalidParameters(format!(
                "0 and 2 must lie inside the strip ({}, {}) for a square-integrable price",
                strip.lo, strip.hi
            )));
        }
        let spread = model.variance_rate_spread();
        if !(spread.abs() > DEGENERACY_TOL) {
            return Err(Error::DegenerateModel(spread));
        }
        Ok(model)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn strip(&self) -> Strip {
        self.strip
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::BlackScholes { .. } => "Black-Scholes",
            ModelKind::Nig { .. } => "NIG",
            ModelKind::Cgmye { .. } => "CGMYe",
        }
    }

    /// True when the driving process has a non-zero Gaussian part.
    pub fn has_brownian_component(&self) -> bool {
        match self.kind {
            ModelKind::BlackScholes { .. } => true,
            ModelKind::Nig { .. } => false,
            ModelKind::Cgmye { eta, .. } => eta > 0.0,
        }
    }

    /// `κ(z)`; `Re z` must lie strictly inside the strip.
    pub fn kappa(&self, z: Complex64) -> Result<Complex64> {
        self.strip.check(z.re)?;
        let k = self.kappa_unchecked(z);
        if !(k.re.is_finite() && k.im.is_finite()) {
            return Err(Error::BranchFailure(self.name()));
        }
        Ok(k)
    }

    /// `κ(x)` for real `x`.
    pub fn kappa_real(&self, x: f64) -> Result<f64> {
        Ok(self.kappa(Complex64::new(x, 0.0))?.re)
    }

    /// `κ(z)` without the strip check. Callers validate the vertical line once.
    pub(crate) fn kappa_unchecked(&self, z: Complex64) -> Complex64 {
        match (self.kind, self.cache) {
            (ModelKind::BlackScholes { sigma }, _) => 0.5 * sigma * sigma * z * (z - 1.0),
            (ModelKind::Nig { beta, delta, mu, .. }, Cache::Nig { gamma, alpha_sq }) => {
                // sqrt(α²-β²) - sqrt(α²-(β+z)²) rewritten as z(2β+z)/(sum of roots)
                // to avoid cancellation near z = 0. On an admissible line the
                // radicand has Re = α² - (β+Re z)² + (Im z)² > 0, so the
                // principal root is continuous there.
                let bz = z + beta;
                let root = (alpha_sq - bz * bz).sqrt();
                mu * z + delta * z * (2.0 * beta + z) / (gamma + root)
            }
            (ModelKind::Cgmye { m, g, y, eta, omega, .. }, Cache::Cgmy { scale, m_pow, g_pow }) => {
                let jumps = (m - z).powf(y) - m_pow + (g + z).powf(y) - g_pow;
                omega * z + 0.5 * eta * eta * z * (z - 1.0) + scale * jumps
            }
            _ => unreachable!("model cache mismatch"),
        }
    }

    /// `κ(2) - 2κ(1)`, the variance rate of the martingale part of `S` per unit `S²`.
    pub fn variance_rate_spread(&self) -> f64 {
        let k = |x: f64| self.kappa_unchecked(Complex64::new(x, 0.0)).re;
        k(2.0) - 2.0 * k(1.0)
    }

    /// `κ(1)`, the drift rate of `S`.
    pub fn drift_rate(&self) -> f64 {
        self.kappa_unchecked(Complex64::new(1.0, 0.0)).re
    }

    pub fn is_martingale(&self, tol: f64) -> bool {
        self.drift_rate().abs() <= tol
    }

    /// Same NIG model with the location parameter chosen so that `κ(1) = drift`.
    pub fn nig_with_drift(&self, drift: f64) -> Result<Self> {
        match self.kind {
            ModelKind::Nig { alpha, beta, delta, mu } => {
                let jump_part = self.drift_rate() - mu;
                Self::nig(alpha, beta, delta, drift - jump_part)
            }
            _ => Err(Error::InvalidParameters(format!(
                "drift reparametrisation needs an NIG model, got {}",
                self.name()
            ))),
        }
    }

    /// The first four cumulant rates `κ^{(n)}(0)`, `n = 1..=4`.
    pub fn cumulant_rates(&self) -> Result<[f64; 4]> {
        cumulant_rates(self)
    }

    /// Variance, skewness and excess kurtosis of `X_t`.
    pub fn moments(&self, t: f64) -> Result<MomentSet> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameters(format!("horizon must be > 0, got {t}")));
        }
        let [_, k2, k3, k4] = self.cumulant_rates()?;
        let variance = t * k2;
        Ok(MomentSet {
            horizon: t,
            variance,
            skewness: t * k3 / variance.powf(1.5),
            excess_kurtosis: t * k4 / (variance * variance),
        })
    }

    /// Volatility of the Black-Scholes model with the same log-return variance per unit time.
    pub fn match_bs_variance(&self) -> Result<f64> {
        if let ModelKind::BlackScholes { sigma } = self.kind {
            return Ok(sigma);
        }
        let [_, k2, _, _] = self.cumulant_rates()?;
        Ok(k2.sqrt())
    }
}

/// Richardson-extrapolated central differences of `κ` at the origin.
///
/// The step is tied to the distance from 0 to the strip boundary so that the
/// stencil stays well inside the domain of analyticity; a fixed tiny step
/// loses the fourth derivative to roundoff.
fn cumulant_rates(model: &LevyModel) -> Result<[f64; 4]> {
    let reach = model.strip.distance(0.0);
    if !(reach > 0.0) {
        return Err(Error::OutOfStrip {
            re: 0.0,
            lo: model.strip.lo,
            hi: model.strip.hi,
        });
    }
    let h = 0.05 * reach.min(20.0);
    let k = |x: f64| model.kappa_unchecked(Complex64::new(x, 0.0)).re;

    let stencil = |h: f64| -> [f64; 4] {
        let (m2, m1, p1, p2) = (k(-2.0 * h), k(-h), k(h), k(2.0 * h));
        let c0 = k(0.0);
        [
            (p1 - m1) / (2.0 * h),
            (p1 - 2.0 * c0 + m1) / (h * h),
            (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h * h * h),
            (p2 - 4.0 * p1 + 6.0 * c0 - 4.0 * m1 + m2) / (h * h * h * h),
        ]
    };

    let d = [stencil(h), stencil(h / 2.0), stencil(h / 4.0)];
    let mut out = [0.0; 4];
    for n in 0..4 {
        let r1 = (4.0 * d[1][n] - d[0][n]) / 3.0;
        let r1_fine = (4.0 * d[2][n] - d[1][n]) / 3.0;
        let r2 = (16.0 * r1_fine - r1) / 15.0;
        let scale = r2.abs().max(1e-10);
        if (r2 - r1_fine).abs() > 1e-4 * scale {
            return Err(Error::NumericalInstability(format!(
                "derivative {} of kappa: Richardson levels {r1_fine:e} and {r2:e} disagree",
                n + 1
            )));
        }
        out[n] = r2;
    }
    Ok(out)
}

/// `Γ(x)` for real `x` that is not a non-positive integer.
pub fn real_gamma(x: f64) -> Result<f64> {
    if x <= 0.0 && x == x.round() {
        return Err(Error::PoleError(x));
    }
    Ok(statrs::function::gamma::gamma(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn nig_reference() -> LevyModel {
        LevyModel::nig(75.49, -4.089, 3.024, -0.04).unwrap()
    }

    fn cgmye_reference() -> LevyModel {
        LevyModel::martingale_adjust_cgmye(9.61, 9.97, 16.51, 0.1430, 0.0458).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn kappa_vanishes_at_zero() {
        for model in [LevyModel::black_scholes(0.2).unwrap(), nig_reference(), cgmye_reference()] {
            assert_eq!(model.kappa(Complex64::new(0.0, 0.0)).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn black_scholes_is_martingale() {
        let bs = LevyModel::black_scholes(0.2).unwrap();
        assert_eq!(bs.kappa_real(1.0).unwrap(), 0.0);
        assert!((bs.kappa_real(2.0).unwrap() - 0.04).abs() < 1e-17);
    }

    #[test]
    fn nig_kappa_at_one_matches_high_precision() {
        // 50-digit evaluation of μ + δ(√(α²-β²) - √(α²-(β+1)²)).
        let expected = -0.183_935_116_950_466_44;
        let got = nig_reference().kappa_real(1.0).unwrap();
        assert!((got - expected).abs() < 1e-14 * expected.abs(), "{got}");
    }

    #[test]
    fn gamma_values() {
        assert!((real_gamma(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((real_gamma(0.5).unwrap() - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        assert!((real_gamma(5.0).unwrap() - 24.0).abs() < 1e-12);
        // mpmath reference
        let reference = -7.733_565_442_212_066_98;
        assert!(close(real_gamma(-0.1430).unwrap(), reference, 1e-12));
        assert!(matches!(real_gamma(0.0), Err(Error::PoleError(_))));
        assert!(matches!(real_gamma(-3.0), Err(Error::PoleError(_))));
    }

    #[test]
    fn cgmye_martingale_adjustment() {
        let model = cgmye_reference();
        assert!(model.kappa_real(1.0).unwrap().abs() < 1e-14);
        assert!(model.variance_rate_spread().abs() > 1e-3);

        // Independent route: bisection on ω for κ_ω(1) = 0.
        let at = |omega: f64| {
            LevyModel::cgmye(9.61, 9.97, 16.51, 0.1430, 0.0458, omega)
                .unwrap()
                .kappa_real(1.0)
                .unwrap()
        };
        let (mut lo, mut hi) = (-10.0, 10.0);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if at(mid) > 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        let ModelKind::Cgmye { omega, .. } = *model.kind() else { unreachable!() };
        assert!((omega - 0.5 * (lo + hi)).abs() < 1e-12);
    }

    #[test]
    fn strip_violations() {
        let nig = nig_reference();
        assert!(matches!(
            nig.kappa(Complex64::new(80.0, 0.0)),
            Err(Error::OutOfStrip { .. })
        ));
        let cg = cgmye_reference();
        assert!(cg.kappa(Complex64::new(16.6, 1.0)).is_err());
        assert!(cg.kappa(Complex64::new(2.2, 1.0)).is_ok());
    }

    #[test]
    fn parameter_validation() {
        assert!(LevyModel::black_scholes(0.0).is_err());
        assert!(LevyModel::nig(1.0, 1.5, 1.0, 0.0).is_err());
        assert!(LevyModel::nig(1.0, 0.0, -1.0, 0.0).is_err());
        // 2 outside the strip: |β + 2| ≥ α
        assert!(LevyModel::nig(2.0, 0.5, 1.0, 0.0).is_err());
        assert!(LevyModel::cgmye(1.0, 1.0, 1.5, 0.5, 0.1, 0.0).is_err());
        assert!(LevyModel::cgmye(1.0, 1.0, 5.0, 2.5, 0.1, 0.0).is_err());
        assert!(matches!(
            LevyModel::cgmye(1.0, 1.0, 5.0, 0.0, 0.1, 0.0),
            Err(Error::PoleError(_))
        ));
    }

    #[test]
    fn nig_moments_reproduce_published_values() {
        let daily = nig_reference().moments(1.0 / 252.0).unwrap();
        assert!(close(daily.skewness, -0.1709, 5e-3), "{daily:?}");
        assert!(close(daily.excess_kurtosis, 3.356, 5e-3), "{daily:?}");
        let yearly = nig_reference().moments(1.0).unwrap();
        assert!((yearly.skewness + 0.0108).abs() < 5e-4);
        assert!((yearly.excess_kurtosis - 0.0133).abs() < 5e-4);
    }

    #[test]
    fn cumulants_match_closed_forms() {
        // NIG: κ'' = δα²/γ³, κ''' = 3δα²β/γ⁵, κ'''' = 3δα²(α²+4β²)/γ⁷
        let (a, b, d) = (75.49_f64, -4.089_f64, 3.024_f64);
        let g = (a * a - b * b).sqrt();
        let [_, k2, k3, k4] = nig_reference().cumulant_rates().unwrap();
        assert!(close(k2, d * a * a / g.powi(3), 1e-9));
        assert!(close(k3, 3.0 * d * a * a * b / g.powi(5), 1e-7));
        assert!(close(k4, 3.0 * d * a * a * (a * a + 4.0 * b * b) / g.powi(7), 1e-6));

        // CGMYe: κ^(n)(0) = CΓ(n-Y)(M^{Y-n} + (-1)^n G^{Y-n}) (+ η² for n = 2)
        let (c, gg, m, y, eta) = (9.61_f64, 9.97_f64, 16.51_f64, 0.1430_f64, 0.0458_f64);
        let gm = |n: i32| c * real_gamma(n as f64 - y).unwrap();
        let [_, k2, k3, k4] = cgmye_reference().cumulant_rates().unwrap();
        assert!(close(k2, eta * eta + gm(2) * (m.powf(y - 2.0) + gg.powf(y - 2.0)), 1e-8));
        assert!(close(k3, gm(3) * (m.powf(y - 3.0) - gg.powf(y - 3.0)), 1e-7));
        assert!(close(k4, gm(4) * (m.powf(y - 4.0) + gg.powf(y - 4.0)), 1e-6));
    }

    #[test]
    fn variance_matching() {
        assert!(close(nig_reference().match_bs_variance().unwrap(), 0.2, 1e-2));
        assert_eq!(LevyModel::black_scholes(0.3).unwrap().match_bs_variance().unwrap(), 0.3);
    }

    #[test]
    fn drift_reparametrisation() {
        let nig = nig_reference();
        let flat = nig.nig_with_drift(0.0).unwrap();
        assert!(flat.drift_rate().abs() < 1e-12);
        let up = nig.nig_with_drift(0.15).unwrap();
        assert!((up.drift_rate() - 0.15).abs() < 1e-12);
        assert!(LevyModel::black_scholes(0.2).unwrap().nig_with_drift(0.1).is_err());
    }
}
