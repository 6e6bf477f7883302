//! Bromwich representations `f(s) = ∫_{R-i∞}^{R+i∞} s^z p(z) dz` of payoffs.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_line, integrate_line_oscillatory, QuadConfig};

pub type WeightFn = dyn Fn(Complex64) -> Complex64 + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PayoffKind {
    Call { strike: f64 },
    Custom,
}

#[derive(Clone)]
enum Weight {
    /// `K^{1-z} / (2πi z (z-1))`, the 1/(2πi) folded in.
    Call { log_strike: f64 },
    Custom(Arc<WeightFn>),
}

/// Abscissa `R` plus weight `p` of a payoff's Bromwich integral.
#[derive(Clone)]
pub struct PayoffTransform {
    abscissa: f64,
    kind: PayoffKind,
    weight: Weight,
}

impl fmt::Debug for PayoffTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PayoffTransform")
            .field("abscissa", &self.abscissa)
            .field("kind", &self.kind)
            .finish()
    }
}

/// The point `R + ix` of the integration line.
#[inline]
pub fn line_point(abscissa: f64, x: f64) -> Complex64 {
    Complex64::new(abscissa, x)
}

impl PayoffTransform {
    /// European call `(s - K)^+`, valid for any `R > 1`.
    pub fn call(strike: f64, abscissa: f64) -> Result<Self> {
        if !(strike > 0.0 && strike.is_finite()) {
            return Err(Error::InvalidParameters(format!("strike must be > 0, got {strike}")));
        }
        if !(abscissa > 1.0 && abscissa.is_finite()) {
            return Err(Error::InvalidAbscissa(abscissa));
        }
        Ok(Self {
            abscissa,
            kind: PayoffKind::Call { strike },
            weight: Weight::Call {
                log_strike: strike.ln(),
            },
        })
    }

    /// User-supplied weight. `x ↦ p(R + ix)` must be integrable; a real payoff
    /// needs `p(conj z) = -conj p(z)` (the 1/(2πi) sits inside `p`).
    pub fn custom<F>(abscissa: f64, weight: F) -> Result<Self>
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        if !abscissa.is_finite() {
            return Err(Error::InvalidAbscissa(abscissa));
        }
        Ok(Self {
            abscissa,
            kind: PayoffKind::Custom,
            weight: Weight::Custom(Arc::new(weight)),
        })
    }

    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }

    pub fn kind(&self) -> PayoffKind {
        self.kind
    }

    pub fn strike(&self) -> Option<f64> {
        match self.kind {
            PayoffKind::Call { strike } => Some(strike),
            PayoffKind::Custom => None,
        }
    }

    /// Same payoff on another abscissa.
    pub fn with_abscissa(&self, abscissa: f64) -> Result<Self> {
        match (&self.weight, self.kind) {
            (Weight::Call { .. }, PayoffKind::Call { strike }) => Self::call(strike, abscissa),
            (Weight::Custom(w), _) => {
                let mut out = self.clone();
                out.abscissa = abscissa;
                out.weight = Weight::Custom(Arc::clone(w));
                Ok(out)
            }
            _ => unreachable!(),
        }
    }

    /// `p(z)`.
    pub fn weight(&self, z: Complex64) -> Complex64 {
        self.weighted_power(0.0, z, Complex64::new(0.0, 0.0))
    }

    /// `exp(z ln s + extra) p(z)`, combined in a single exponential so that
    /// large powers and small weights never meet as separate factors.
    #[inline]
    pub fn weighted_power(&self, log_s: f64, z: Complex64, extra: Complex64) -> Complex64 {
        match &self.weight {
            Weight::Call { log_strike } => {
                let exponent = z * log_s + (1.0 - z) * *log_strike + extra;
                exponent.exp() / (Complex64::new(0.0, 2.0 * PI) * z * (z - 1.0))
            }
            Weight::Custom(w) => (z * log_s + extra).exp() * w(z),
        }
    }

    /// Closed-form payoff where one is known.
    pub fn payoff(&self, s: f64) -> Option<f64> {
        match self.kind {
            PayoffKind::Call { strike } => Some((s - strike).max(0.0)),
            PayoffKind::Custom => None,
        }
    }

    /// Recovers `f(s)` from the Bromwich integral.
    pub fn invert(&self, s: f64, cfg: &QuadConfig) -> Result<f64> {
        invert_payoff(self, s, cfg)
    }
}

/// `f(s) = ∫ s^z p(z) dz` along `R + iℝ`, as a real number.
pub fn invert_payoff(pt: &PayoffTransform, s: f64, cfg: &QuadConfig) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameters(format!("spot must be > 0, got {s}")));
    }
    let log_s = s.ln();
    let r = pt.abscissa;
    let zero = Complex64::new(0.0, 0.0);
    let f = |x| pt.weighted_power(log_s, line_point(r, x), zero) * Complex64::i();
    let res = match pt.kind {
        // the call integrand oscillates like e^{ix ln(s/K)} with 1/x² decay
        PayoffKind::Call { strike } => integrate_line_oscillatory(f, (s / strike).ln(), cfg)?,
        PayoffKind::Custom => integrate_line(f, cfg)?,
    };
    real_part(res.value)
}

/// Real part of an integral that should be real, or `NonRealResult`.
pub(crate) fn real_part(v: Complex64) -> Result<f64> {
    if v.im.abs() > 1e-6 * (1.0 + v.re.abs()) {
        Err(Error::NonRealResult { re: v.re, im: v.im })
    } else {
        Ok(v.re)
    }
}
