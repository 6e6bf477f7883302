//! Exponential-polynomial mixtures in time to maturity,
//! `τ ↦ Σ c τ^m e^{λ τ}` with `τ = T - t`, and their closed-form integrals.

use std::ops::Mul;

use num_complex::Complex64;

/// Below this `|a| T` the time integrals switch from the recursive closed
/// form to their power series.
const SERIES_SWITCH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixTerm {
    pub coef: Complex64,
    pub degree: u32,
    pub rate: Complex64,
}

impl MixTerm {
    pub fn new(coef: Complex64, degree: u32, rate: Complex64) -> Self {
        Self { coef, degree, rate }
    }

    pub fn eval_tau(&self, tau: f64) -> Complex64 {
        self.coef * tau.powi(self.degree as i32) * (self.rate * tau).exp()
    }
}

/// `t ↦ Σ_k c_k (T - t)^{m_k} exp(λ_k (T - t))`, stored in the `τ = T - t` variable.
///
/// Strategy coefficients use degrees 0..=2; products of two mixtures may
/// carry up to degree 4.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpPolyMix {
    terms: Vec<MixTerm>,
}

impl ExpPolyMix {
    pub fn new(terms: Vec<MixTerm>) -> Self {
        Self { terms }
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    /// `c exp(λ τ)`.
    pub fn single(coef: Complex64, rate: Complex64) -> Self {
        Self {
            terms: vec![MixTerm::new(coef, 0, rate)],
        }
    }

    pub fn terms(&self) -> &[MixTerm] {
        &self.terms
    }

    pub fn push(&mut self, term: MixTerm) {
        self.terms.push(term);
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.iter().map(|t| t.degree).max().unwrap_or(0)
    }

    /// Value at time to maturity `tau`.
    pub fn eval_tau(&self, tau: f64) -> Complex64 {
        self.terms.iter().map(|t| t.eval_tau(tau)).sum()
    }

    /// Value at calendar time `t` for maturity `maturity`.
    pub fn eval(&self, t: f64, maturity: f64) -> Complex64 {
        self.eval_tau(maturity - t)
    }

    /// Value at `t = T`: only degree-0 coefficients survive.
    pub fn terminal_value(&self) -> Complex64 {
        self.terms.iter().filter(|t| t.degree == 0).map(|t| t.coef).sum()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| MixTerm::new(t.coef * factor, t.degree, t.rate))
                .collect(),
        }
    }

    /// Complex conjugate of the function, term by term.
    pub fn conj(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| MixTerm::new(t.coef.conj(), t.degree, t.rate.conj()))
                .collect(),
        }
    }

    pub fn product(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(MixTerm::new(a.coef * b.coef, a.degree + b.degree, a.rate + b.rate));
            }
        }
        Self { terms }
    }

    /// Derivative in calendar time `t`, itself a mixture.
    pub fn time_derivative(&self) -> Self {
        let mut terms = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            // d/dt = -d/dτ
            terms.push(MixTerm::new(-t.coef * t.rate, t.degree, t.rate));
            if t.degree > 0 {
                terms.push(MixTerm::new(-t.coef * f64::from(t.degree), t.degree - 1, t.rate));
            }
        }
        Self { terms }
    }

    /// `∫_0^T e^{κ s} M(T - s) ds` for this mixture `M`.
    pub fn weighted_integral(&self, kappa: Complex64, maturity: f64) -> Complex64 {
        let anchor = (kappa * maturity).exp();
        self.terms
            .iter()
            .map(|t| {
                let grown = (t.rate * maturity).exp();
                t.coef * psi(t.degree, t.rate, kappa, grown, anchor, maturity)
            })
            .sum()
    }

    /// `∫_0^T M(T - s) ds`.
    pub fn integral(&self, maturity: f64) -> Complex64 {
        self.weighted_integral(Complex64::new(0.0, 0.0), maturity)
    }
}

impl Mul for &ExpPolyMix {
    type Output = ExpPolyMix;
    fn mul(self, rhs: Self) -> ExpPolyMix {
        self.product(rhs)
    }
}

/// `φ_m(a, T) = ∫_0^T s^m e^{a s} ds`.
pub fn phi_m(a: Complex64, maturity: f64, m: u32) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    psi(m, a, Complex64::new(0.0, 0.0), (a * maturity).exp(), one, maturity)
}

/// `ψ_m = ∫_0^T r^m e^{λ r} e^{κ (T - r)} dr = e^{κT} φ_m(λ - κ, T)`, given
/// `grown = e^{λT}` and `anchor = e^{κT}`.
///
/// The recursion `ψ_m = (T^m e^{λT} - m ψ_{m-1}) / (λ - κ)` never forms
/// `e^{(λ-κ)T}` on its own, so it cannot overflow when `e^{κT}` underflows.
#[inline]
pub(crate) fn psi(m: u32, rate: Complex64, kappa: Complex64, grown: Complex64, anchor: Complex64, maturity: f64) -> Complex64 {
    let a = rate - kappa;
    if a.norm() * maturity < SERIES_SWITCH {
        return anchor * phi_series(a, maturity, m);
    }
    let mut acc = (grown - anchor) / a;
    let mut t_pow = 1.0;
    for k in 1..=m {
        t_pow *= maturity;
        acc = (grown * t_pow - acc * k as f64) / a;
    }
    acc
}

/// `Σ_k a^k T^{m+k+1} / (k! (m+k+1))`, summed until the terms stop mattering.
fn phi_series(a: Complex64, maturity: f64, m: u32) -> Complex64 {
    let at = a * maturity;
    let mut power = Complex64::new(maturity.powi(m as i32 + 1), 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..40u32 {
        let term = power / f64::from(m + k + 1);
        sum += term;
        if term.norm() <= 1e-18 * sum.norm() {
            break;
        }
        power = power * at / f64::from(k + 1);
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_finite, QuadConfig};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phi_at_zero_rate() {
        let t = 0.25;
        assert_eq!(phi_m(c(0.0, 0.0), t, 0), c(t, 0.0));
        assert!((phi_m(c(0.0, 0.0), t, 1) - c(t * t / 2.0, 0.0)).norm() < 1e-17);
        assert!((phi_m(c(0.0, 0.0), t, 2) - c(t * t * t / 3.0, 0.0)).norm() < 1e-17);
    }

    #[test]
    fn phi_matches_numerical_quadrature() {
        let cfg = QuadConfig {
            rel_tol: 1e-12,
            inner_rel_tol: 1e-12,
            abs_tol: 1e-16,
            ..QuadConfig::default()
        };
        for a in [c(1.0, 2.0), c(-40.0, 300.0), c(0.3, -0.1), c(1e-5, 0.0)] {
            for m in 0..=4 {
                let oracle = integrate_finite(|s| s.powi(m as i32) * (a * s).exp(), 0.0, 0.25, &cfg)
                    .unwrap()
                    .value;
                let got = phi_m(a, 0.25, m);
                assert!((got - oracle).norm() <= 1e-12 * oracle.norm().max(1e-3), "a={a} m={m}: {got} vs {oracle}");
            }
        }
    }

    #[test]
    fn series_and_closed_form_agree_at_the_switch() {
        let t = 0.25;
        for m in 0..=4 {
            for dir in [c(1.0, 0.0), c(0.0, 1.0), c(-0.6, 0.8)] {
                let below = dir * (SERIES_SWITCH * (1.0 - 1e-13) / t);
                let above = dir * (SERIES_SWITCH * (1.0 + 1e-13) / t);
                let one = c(1.0, 0.0);
                let series = psi(m, below, c(0.0, 0.0), (below * t).exp(), one, t);
                let closed = psi(m, above, c(0.0, 0.0), (above * t).exp(), one, t);
                assert!((series - closed).norm() <= 1e-10 * closed.norm(), "m={m}");
            }
        }
    }

    #[test]
    fn weighted_integral_survives_underflow() {
        // e^{κT} underflows but the integrand near r = T is O(1).
        let mix = ExpPolyMix::single(c(1.0, 0.0), c(-1.0, 0.0));
        let kappa = c(-4000.0, 10.0);
        let v = mix.weighted_integral(kappa, 0.25);
        assert!(v.re.is_finite() && v.im.is_finite());
        let approx = c(1.0, 0.0) / (c(-1.0, 0.0) - kappa) * (-0.25f64).exp();
        assert!((v - approx).norm() < 1e-12);
    }

    #[test]
    fn evaluation_and_algebra() {
        let a = ExpPolyMix::new(vec![
            MixTerm::new(c(2.0, 0.0), 0, c(0.5, 1.0)),
            MixTerm::new(c(1.0, -1.0), 1, c(-0.3, 0.0)),
        ]);
        assert_eq!(a.terminal_value(), c(2.0, 0.0));
        assert_eq!(a.eval(0.25, 0.25), c(2.0, 0.0));
        let tau = 0.1;
        let direct = c(2.0, 0.0) * (c(0.5, 1.0) * tau).exp() + c(1.0, -1.0) * tau * (-0.3 * tau).exp();
        assert!((a.eval_tau(tau) - direct).norm() < 1e-15);
        let sq = &a * &a.conj();
        assert!((sq.eval_tau(tau) - c(a.eval_tau(tau).norm_sqr(), 0.0)).norm() < 1e-14);
        assert_eq!(sq.max_degree(), 2);
        assert!((a.scale(c(0.0, 1.0)).eval_tau(tau) - a.eval_tau(tau) * c(0.0, 1.0)).norm() < 1e-15);
        let h = 1e-5;
        let fd = (a.eval(0.1 + h, 0.25) - a.eval(0.1 - h, 0.25)) / (2.0 * h);
        assert!((a.time_derivative().eval(0.1, 0.25) - fd).norm() < 1e-8);
    }
}
