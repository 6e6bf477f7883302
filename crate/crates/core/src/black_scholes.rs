//! Closed-form Black-Scholes call quantities with zero rate (discounted terms).

use std::f64::consts::SQRT_2;

use statrs::function::erf::erfc;

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

fn d1(spot: f64, strike: f64, sigma: f64, tau: f64) -> f64 {
    ((spot / strike).ln() + 0.5 * sigma * sigma * tau) / (sigma * tau.sqrt())
}

pub fn call_price(spot: f64, strike: f64, sigma: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return (spot - strike).max(0.0);
    }
    let d1 = d1(spot, strike, sigma, tau);
    let d2 = d1 - sigma * tau.sqrt();
    spot * norm_cdf(d1) - strike * norm_cdf(d2)
}

/// `∂C/∂S = Φ(d₁)`.
pub fn call_delta(spot: f64, strike: f64, sigma: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return if spot > strike { 1.0 } else { 0.0 };
    }
    norm_cdf(d1(spot, strike, sigma, tau))
}
