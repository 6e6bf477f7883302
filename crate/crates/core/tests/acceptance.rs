//! Acceptance suite. Each test prints exactly one `[PASS]` or `[FAIL]` line
//! and then asserts the same condition. The line goes straight to the stdout
//! handle, past the harness's capture, so every `cargo test` log holds the
//! full report.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use levy_hedge::black_scholes::call_price;
use levy_hedge::error_engine::{
    alpha, hedging_error, implied_bs_sigma, kernel_j, kernel_scale, model_price, phi_m, HedgingErrorReport,
    HedgingProblem,
};
use levy_hedge::mc_oracle::{simulate_hedge, PathConfig};
use levy_hedge::payoff::line_point;
use levy_hedge::quadrature::{integrate_finite, integrate_line};
use levy_hedge::strategies::{bs_strategy, model_delta_strategy, mvo_martingale_proxy, mvo_martingale_strategy};
use levy_hedge::{DeltaStrategy, Error, LevyModel, PayoffTransform, QuadConfig};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STRIKE: f64 = 99.0;
const MATURITY: f64 = 0.25;
const ATM: f64 = 99.0;

fn verdict(criterion: u32, pass: bool, detail: String) {
    let tag = if pass { "[PASS]" } else { "[FAIL]" };
    writeln!(std::io::stdout().lock(), "{tag} criterion {criterion}: {detail}").unwrap();
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

fn nig() -> LevyModel {
    LevyModel::nig(75.49, -4.089, 3.024, -0.04).unwrap()
}

fn cgmye() -> LevyModel {
    LevyModel::martingale_adjust_cgmye(9.61, 9.97, 16.51, 0.1430, 0.0458).unwrap()
}

fn call(r: f64) -> PayoffTransform {
    PayoffTransform::call(STRIKE, r).unwrap()
}

fn run(model: LevyModel, pt: PayoffTransform, strategy: DeltaStrategy, spot: f64, capital: f64) -> HedgingErrorReport {
    let problem = HedgingProblem::new(model, pt, strategy, spot, capital, MATURITY).unwrap();
    hedging_error(&problem, &QuadConfig::default()).unwrap()
}

/// MVO, Black-Scholes at the implied volatility and model delta, all with
/// the model price as capital.
fn cgmye_triple(spot: f64, r: f64, capital: Option<f64>) -> ([HedgingErrorReport; 3], f64) {
    let cfg = QuadConfig::default();
    let model = cgmye();
    let pt = call(r);
    let price = capital.unwrap_or_else(|| model_price(&model, &pt, spot, MATURITY, &cfg).unwrap().value);
    let sigma = implied_bs_sigma(&model, &call(1.1), spot, MATURITY, &cfg).unwrap();
    let strategies = [
        mvo_martingale_strategy(&model, MATURITY).unwrap(),
        bs_strategy(sigma, MATURITY).unwrap(),
        model_delta_strategy(&model, MATURITY, false).unwrap(),
    ];
    (strategies.map(|s| run(model, pt.clone(), s, spot, price)), price)
}

fn nig_bs_relative_error(spot: f64) -> f64 {
    let capital = call_price(spot, STRIKE, 0.2, MATURITY);
    let report = run(nig(), call(1.1), bs_strategy(0.2, MATURITY).unwrap(), spot, capital);
    report.relative_error.unwrap()
}

#[test]
fn criterion_1_cgmye_atm_reproduction() {
    let started = Instant::now();
    let (reports, price) = cgmye_triple(ATM, 1.1, None);
    let targets = [12.57, 14.68, 16.41];
    let errs: Vec<f64> = reports.iter().zip(targets).map(|(r, t)| rel(r.mse, t)).collect();
    let pass = errs.iter().all(|&e| e <= 0.01);
    verdict(
        1,
        pass,
        format!(
            "S0={ATM} c={price:.5} mse(MVO, BS, delta) = ({:.4}, {:.4}, {:.4}) vs (12.57, 14.68, 16.41), \
             rel dev ({:.4}, {:.4}, {:.4}), tol 0.01, {:.1}s",
            reports[0].mse,
            reports[1].mse,
            reports[2].mse,
            errs[0],
            errs[1],
            errs[2],
            started.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_nig_bs_hedge_reproduction() {
    let got = nig_bs_relative_error(ATM);
    verdict(
        2,
        rel(got, 0.118) <= 0.01,
        format!("S0={ATM} relative error {got:.5} vs 0.118, rel dev {:.4}, tol 0.01", rel(got, 0.118)),
    );
}

#[test]
fn criterion_3_moments() {
    let nig = nig();
    let cg = cgmye();
    let day = 1.0 / 252.0;
    let mut failures = Vec::new();
    let mut check = |label: &str, got: f64, want: f64, ok: bool| {
        if !ok {
            failures.push(format!("{label} {got:.5} vs {want}"));
        }
    };
    let nd = nig.moments(day).unwrap();
    let ny = nig.moments(1.0).unwrap();
    let cd = cg.moments(day).unwrap();
    let cy = cg.moments(1.0).unwrap();
    check("NIG daily skew", nd.skewness, -0.1709, rel(nd.skewness, -0.1709) <= 0.005);
    check("NIG daily kurt", nd.excess_kurtosis, 3.356, rel(nd.excess_kurtosis, 3.356) <= 0.005);
    check("NIG yearly skew", ny.skewness, -0.0108, (ny.skewness + 0.0108).abs() <= 5e-4);
    check("NIG yearly kurt", ny.excess_kurtosis, 0.0133, (ny.excess_kurtosis - 0.0133).abs() <= 5e-4);
    check("CGMYe daily skew", cd.skewness, -3.852, rel(cd.skewness, -3.852) <= 0.01);
    check("CGMYe daily kurt", cd.excess_kurtosis, 62.32, rel(cd.excess_kurtosis, 62.32) <= 0.01);
    check("CGMYe yearly skew", cy.skewness, -0.2384, rel(cy.skewness, -0.2384) <= 0.01);
    check("CGMYe yearly kurt", cy.excess_kurtosis, 0.2416, rel(cy.excess_kurtosis, 0.2416) <= 0.01);
    let detail = format!(
        "NIG daily ({:.4}, {:.4}) yearly ({:.5}, {:.5}); CGMYe daily ({:.4}, {:.3}) yearly ({:.4}, {:.4}){}",
        nd.skewness,
        nd.excess_kurtosis,
        ny.skewness,
        ny.excess_kurtosis,
        cd.skewness,
        cd.excess_kurtosis,
        cy.skewness,
        cy.excess_kurtosis,
        if failures.is_empty() {
            String::new()
        } else {
            format!("; out of tolerance: {}", failures.join(", "))
        }
    );
    verdict(3, failures.is_empty(), detail);
}

#[test]
fn criterion_4_perfect_replication() {
    let model = LevyModel::black_scholes(0.2).unwrap();
    let capital = call_price(ATM, STRIKE, 0.2, MATURITY);
    let problem = HedgingProblem::new(model, call(1.1), bs_strategy(0.2, MATURITY).unwrap(), ATM, capital, MATURITY)
        .unwrap();
    let report = hedging_error(&problem, &QuadConfig::default()).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut subnormal = 0;
    for _ in 0..1000 {
        // log-uniform magnitudes cover the bulk and the tails up to where
        // e^{κ(y+z)T} leaves the normal floating-point range
        let mut coord = || {
            let x = 10f64.powf(rng.random_range(-2.0..2.6));
            if rng.random::<bool>() {
                x
            } else {
                -x
            }
        };
        let (y, z) = (line_point(1.1, coord()), line_point(1.1, coord()));
        let j = kernel_j(&problem, y, z).norm();
        let scale = kernel_scale(&problem, y, z);
        if scale < f64::MIN_POSITIVE {
            // no relative precision left in subnormals
            subnormal += 1;
            continue;
        }
        worst = worst.max(j / scale);
    }
    let pass = report.mse.abs() <= 1e-10 && worst <= 1e-12;
    verdict(
        4,
        pass,
        format!(
            "mse {:.3e} (tol 1e-10), max |J|/scale {worst:.3e} (tol 1e-12) over {} points ({subnormal} subnormal skipped)",
            report.mse,
            1000 - subnormal
        ),
    );
}

#[test]
fn criterion_5_mvo_optimality() {
    let started = Instant::now();
    let mut violations = Vec::new();
    for spot in (80..=120).map(f64::from) {
        let ([mvo, bs, delta], _) = cgmye_triple(spot, 1.1, None);
        let slack = mvo.quad_error;
        if mvo.mse > bs.mse + slack + bs.quad_error || mvo.mse > delta.mse + slack + delta.quad_error {
            violations.push(format!("S0={spot}: {:.5} vs ({:.5}, {:.5})", mvo.mse, bs.mse, delta.mse));
        }
    }

    let cfg = QuadConfig::default();
    let model = cgmye();
    let pt = call(1.1);
    let price = model_price(&model, &pt, ATM, MATURITY, &cfg).unwrap().value;
    let mvo = mvo_martingale_strategy(&model, MATURITY).unwrap();
    let base = run(model, pt.clone(), mvo.clone(), ATM, price);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut smallest_gain = f64::INFINITY;
    for k in 0..20 {
        // real coefficients keep g'(conj z) = conj g'(z)
        let (a, b, c) = (
            rng.random_range(-0.05..0.05),
            rng.random_range(-0.05..0.05),
            rng.random_range(-0.05..0.05),
        );
        let perturbed = mvo.perturbed(move |z: Complex64| a + b / z + c / (z * z));
        let other = run(model, pt.clone(), perturbed, ATM, price);
        smallest_gain = smallest_gain.min(other.mse - base.mse);
        if base.mse > other.mse + base.quad_error + other.quad_error {
            violations.push(format!("perturbation {k}: {:.6} < {:.6}", other.mse, base.mse));
        }
    }
    verdict(
        5,
        violations.is_empty(),
        format!(
            "41 spots in 80..=120 and 20 perturbations at S0={ATM}; smallest perturbation excess {smallest_gain:.3e}; \
             {} violations{} ({:.0}s)",
            violations.len(),
            if violations.is_empty() {
                String::new()
            } else {
                format!(": {}", violations.join("; "))
            },
            started.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_6_monte_carlo_cross_validation() {
    let started = Instant::now();
    let quad = QuadConfig::default();
    let pt = call(1.1);
    let sigma = 0.2;
    let capital = call_price(ATM, STRIKE, sigma, MATURITY);
    let strategy = bs_strategy(sigma, MATURITY).unwrap();

    let engine = run(nig(), pt.clone(), strategy.clone(), ATM, capital).mse;
    let mc = simulate_hedge(
        &nig(),
        &pt,
        &strategy,
        ATM,
        capital,
        MATURITY,
        &PathConfig::new(100_000, 2000, 6),
        &quad,
    )
    .unwrap();
    let nig_ok = (engine - mc.mse_hat).abs() <= 3.0 * mc.std_error + 0.02 * engine;

    // Discretization trend of the complete-market control: fit mse(n) = a/n
    // on {500, 1000, 2000} by least squares and compare the finest run
    // against twice the fitted value there.
    let bs = LevyModel::black_scholes(sigma).unwrap();
    let steps = [500usize, 1000, 2000];
    let control: Vec<f64> = steps
        .iter()
        .map(|&n| {
            simulate_hedge(&bs, &pt, &strategy, ATM, capital, MATURITY, &PathConfig::new(100_000, n, 60), &quad)
                .unwrap()
                .mse_hat
        })
        .collect();
    let inv: Vec<f64> = steps.iter().map(|&n| 1.0 / n as f64).collect();
    let a = control.iter().zip(&inv).map(|(m, i)| m * i).sum::<f64>() / inv.iter().map(|i| i * i).sum::<f64>();
    let trend = a / 2000.0;
    let bs_ok = control[2] <= 2.0 * trend && control[0] > control[1] && control[1] > control[2];

    verdict(
        6,
        nig_ok && bs_ok,
        format!(
            "NIG engine {engine:.5} vs MC {:.5} +- {:.5} (allowance {:.5}); BS control mse at n=500/1000/2000 = \
             {:.2e}/{:.2e}/{:.2e}, trend a/n at 2000 = {trend:.2e} ({:.0}s)",
            mc.mse_hat,
            mc.std_error,
            3.0 * mc.std_error + 0.02 * engine,
            control[0],
            control[1],
            control[2],
            started.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_7_drift_sweep_shape() {
    let spot = 100.0;
    let strike = 100.0;
    let pt = PayoffTransform::call(strike, 1.1).unwrap();
    let capital = call_price(spot, strike, 0.2, MATURITY);
    let grid: Vec<f64> = (-4..=4).map(|k| 0.05 * f64::from(k)).collect();
    let gaps: Vec<f64> = grid
        .iter()
        .map(|&drift| {
            let model = nig().nig_with_drift(drift).unwrap();
            let bs = run(model, pt.clone(), bs_strategy(0.2, MATURITY).unwrap(), spot, capital).mse;
            let proxy = mvo_martingale_proxy(&model, MATURITY).unwrap();
            let mvo = run(model, pt.clone(), proxy, spot, capital).mse;
            assert!(bs.is_finite() && mvo.is_finite());
            (bs - mvo).abs()
        })
        .collect();
    let argmin = (0..grid.len()).min_by(|&i, &j| gaps[i].total_cmp(&gaps[j])).unwrap();
    let listing: Vec<String> = grid.iter().zip(&gaps).map(|(d, g)| format!("{d:+.2}:{g:.5}")).collect();
    verdict(
        7,
        argmin == 4,
        format!(
            "gap minimum at kappa(1) = {:+.2}; gaps {}",
            grid[argmin],
            listing.join(" ")
        ),
    );
}

#[test]
fn criterion_8_abscissa_robustness() {
    let (at_11, price) = cgmye_triple(ATM, 1.1, None);
    let (at_13, _) = cgmye_triple(ATM, 1.3, Some(price));
    let mut worst = 0.0f64;
    let mut pass = true;
    let mut parts = Vec::new();
    for (a, b) in at_11.iter().zip(&at_13) {
        let diff = (a.mse - b.mse).abs();
        let allowed = 10.0 * (a.quad_error + b.quad_error);
        pass &= diff <= allowed;
        worst = worst.max(diff / allowed);
        parts.push(format!("{:.8} vs {:.8} (diff {diff:.1e}, allowed {allowed:.1e})", a.mse, b.mse));
    }
    verdict(8, pass, format!("R=1.1 vs R=1.3: {}", parts.join("; ")));
}

#[test]
fn criterion_9_oracle_micro_suite() {
    let tight = QuadConfig {
        rel_tol: 1e-13,
        inner_rel_tol: 1e-13,
        abs_tol: 1e-16,
        ..QuadConfig::default()
    };

    let mut phi_dev = 0.0f64;
    for a in [Complex64::new(1.0, 2.0), Complex64::new(-40.0, 300.0), Complex64::new(0.3, -0.1)] {
        for m in 0..=2 {
            let oracle = integrate_finite(|s| s.powi(m as i32) * (a * s).exp(), 0.0, MATURITY, &tight)
                .unwrap()
                .value;
            phi_dev = phi_dev.max((phi_m(a, MATURITY, m) - oracle).norm() / oracle.norm());
        }
    }

    let problem = HedgingProblem::new(nig(), call(1.1), bs_strategy(0.2, MATURITY).unwrap(), ATM, 4.0, MATURITY)
        .unwrap();
    let drift = problem.model().drift_rate();
    let mut alpha_dev = 0.0f64;
    let mut ode_dev = 0.0f64;
    for (x, t) in [(3.0, 0.1), (-12.0, 0.0), (40.0, 0.2)] {
        let z = line_point(1.1, x);
        let kz = problem.model().kappa(z).unwrap();
        let a = alpha(&problem, z);
        let integral = integrate_finite(
            |s| (kz * (s - MATURITY)).exp() * problem.strategy().g_at(z, s),
            t,
            MATURITY,
            &tight,
        )
        .unwrap()
        .value;
        let oracle = (1.0 - drift * integral) * (kz * (MATURITY - t)).exp();
        alpha_dev = alpha_dev.max((a.eval(t, MATURITY) - oracle).norm() / oracle.norm());
        let residual = a.time_derivative().eval(t, MATURITY) + kz * a.eval(t, MATURITY)
            - drift * problem.strategy().g_at(z, t);
        ode_dev = ode_dev.max(residual.norm() / (1.0 + a.eval(t, MATURITY).norm()));
    }

    // The call weight decays like 1/x² with an oscillating phase, so the
    // estimate stalls above the default tolerance away from s = K; the
    // criterion is about the value, certified or not.
    let pt = call(1.1);
    let mut inversion_dev = 0.0f64;
    let mut uncertified = 0;
    for s in (50..=150).map(f64::from) {
        let value = match pt.invert(s, &QuadConfig::default()) {
            Ok(v) => v,
            Err(Error::NonConvergence { value_re, .. }) => {
                uncertified += 1;
                value_re
            }
            Err(e) => panic!("inversion at s={s}: {e}"),
        };
        inversion_dev = inversion_dev.max((value - (s - STRIKE).max(0.0)).abs());
    }

    let gauss = integrate_line(|x| Complex64::new((-x * x).exp(), 0.0), &QuadConfig::default()).unwrap();
    let gauss_dev = (gauss.value.re - PI.sqrt()).abs();

    let pass = phi_dev <= 1e-12
        && alpha_dev <= 1e-10
        && ode_dev <= 1e-8
        && inversion_dev <= 1e-6 * STRIKE
        && gauss_dev <= 1e-10;
    verdict(
        9,
        pass,
        format!(
            "phi {phi_dev:.1e} (1e-12), alpha {alpha_dev:.1e} (1e-10), ODE {ode_dev:.1e} (1e-8), inversion \
             {inversion_dev:.1e} ({:.1e}; {uncertified}/101 values uncertified), sqrt(pi) {gauss_dev:.1e} (1e-10)",
            1e-6 * STRIKE
        ),
    );
}

/// The published figures are met when "at the money" is read as S0 = 100.
#[test]
fn published_values_at_spot_100() {
    let ([mvo, bs, delta], _) = cgmye_triple(100.0, 1.1, None);
    let nig_rel = nig_bs_relative_error(100.0);
    println!(
        "S0=100: CGMYe mse ({:.4}, {:.4}, {:.4}), NIG/BS relative error {nig_rel:.5}",
        mvo.mse, bs.mse, delta.mse
    );
    for (got, want) in [(mvo.mse, 12.57), (bs.mse, 14.68), (delta.mse, 16.41), (nig_rel, 0.118)] {
        assert!(rel(got, want) <= 0.01, "{got} vs {want}");
    }
}

/// The published daily CGMYe moments are reproduced by the CGMY part alone.
/// η must stay positive, so a negligible one stands in for none.
#[test]
fn published_cgmye_daily_moments_omit_brownian_part() {
    let pure = LevyModel::martingale_adjust_cgmye(9.61, 9.97, 16.51, 0.1430, 1e-12).unwrap();
    let m = pure.moments(1.0 / 252.0).unwrap();
    println!("CGMY (eta -> 0) daily skewness {:.4}, excess kurtosis {:.3}", m.skewness, m.excess_kurtosis);
    assert!(rel(m.skewness, -3.852) <= 0.01);
    assert!(rel(m.excess_kurtosis, 62.32) <= 0.01);
}
