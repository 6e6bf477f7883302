//! The four subcommands. Sweeps and the Monte Carlo check return a [`Table`];
//! a failed grid point becomes a row with an error status instead of
//! aborting the run.

use levy_hedge::black_scholes::call_price;
use levy_hedge::error_engine::{implied_bs_sigma, mean_value_w, model_price};
use levy_hedge::mc_oracle::{simulate_hedge, IncrementSampler};
use levy_hedge::models::ModelKind;
use levy_hedge::strategies::{bs_strategy, model_delta_strategy, mvo_martingale_proxy, mvo_martingale_strategy};
use levy_hedge::{
    hedging_error, DeltaStrategy, HedgingErrorReport, HedgingProblem, LevyModel, PayoffTransform, QuadConfig,
};
use rayon::prelude::*;

use crate::config::{
    config_error, CapitalPolicy, CapitalRule, ExperimentConfig, GridSpec, McSpec, PayoffSpec, StrategySpec,
    Volatility,
};

/// Trading days per year behind the daily horizon.
pub const TRADING_DAYS: f64 = 252.0;

const DRIFT_TOL: f64 = 1e-12;

/// Rows of formatted cells under a header, plus whether every row succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub failures: usize,
}

impl Table {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest representation that round-trips, so output is byte-stable.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn status(e: &impl std::fmt::Display) -> String {
    format!("error: {e}")
}

/// Everything a grid point needs, resolved once from the config.
struct Setup {
    model: LevyModel,
    payoff: PayoffSpec,
    transform: PayoffTransform,
    strategies: Vec<StrategySpec>,
    names: Vec<String>,
    capital: CapitalPolicy,
    quad: QuadConfig,
}

impl Setup {
    fn new(cfg: &ExperimentConfig, quad: QuadConfig) -> anyhow::Result<Self> {
        let model = cfg.model.build()?;
        let payoff = cfg.payoff.ok_or_else(|| config_error("config needs a payoff"))?;
        let transform = payoff.build()?;
        if !(payoff.maturity() > 0.0 && payoff.maturity().is_finite()) {
            return Err(config_error(format!("maturity must be > 0, got {}", payoff.maturity())));
        }
        if cfg.strategies.is_empty() {
            return Err(config_error("config needs at least one strategy"));
        }
        let capital = cfg.capital.ok_or_else(|| config_error("config needs a capital policy"))?;
        match capital {
            CapitalPolicy::Value(v) if !v.is_finite() => {
                return Err(config_error(format!("capital must be finite, got {v}")))
            }
            CapitalPolicy::Rule(CapitalRule::BsPrice)
                if !cfg.strategies.iter().any(|s| matches!(s, StrategySpec::Bs { .. })) =>
            {
                return Err(config_error("capital \"bs_price\" needs a bs strategy to take sigma from"))
            }
            _ => {}
        }
        for s in &cfg.strategies {
            match s {
                StrategySpec::Bs {
                    sigma: Volatility::Fixed(sigma),
                } if !(*sigma > 0.0 && sigma.is_finite()) => {
                    return Err(config_error(format!("bs sigma must be > 0, got {sigma}")))
                }
                StrategySpec::ModelDelta {
                    pricing_model: Some(m), ..
                } => {
                    m.build()?;
                }
                _ => {}
            }
        }
        Ok(Self {
            model,
            payoff,
            transform,
            names: column_names(&cfg.strategies),
            strategies: cfg.strategies.clone(),
            capital,
            quad,
        })
    }

    fn maturity(&self) -> f64 {
        self.payoff.maturity()
    }

    /// The strategy objects at one grid point; implied volatilities depend on the spot.
    fn strategies_at(&self, model: &LevyModel, spot: f64) -> levy_hedge::Result<Vec<(DeltaStrategy, Option<f64>)>> {
        let t = self.maturity();
        self.strategies
            .iter()
            .map(|s| match *s {
                StrategySpec::Bs { sigma } => {
                    let sigma = match sigma {
                        Volatility::Fixed(v) => v,
                        Volatility::Named(_) => implied_bs_sigma(model, &self.transform, spot, t, &self.quad)?,
                    };
                    Ok((bs_strategy(sigma, t)?, Some(sigma)))
                }
                StrategySpec::ModelDelta {
                    pricing_model,
                    waive_integrability,
                } => {
                    let pricing = match pricing_model {
                        Some(m) => m.build()?,
                        None => *model,
                    };
                    Ok((model_delta_strategy(&pricing, t, waive_integrability)?, None))
                }
                StrategySpec::Mvo => Ok((mvo_martingale_strategy(model, t)?, None)),
                StrategySpec::MvoProxy => Ok((mvo_martingale_proxy(model, t)?, None)),
            })
            .collect()
    }

    /// Capital shared by all strategies, or `None` when each uses its own `w`.
    fn shared_capital(
        &self,
        model: &LevyModel,
        spot: f64,
        strategies: &[(DeltaStrategy, Option<f64>)],
    ) -> levy_hedge::Result<Option<f64>> {
        match self.capital {
            CapitalPolicy::Value(v) => Ok(Some(v)),
            CapitalPolicy::Rule(CapitalRule::W) => Ok(None),
            CapitalPolicy::Rule(CapitalRule::BsPrice) => {
                let sigma = strategies.iter().find_map(|(_, s)| *s).expect("checked in Setup::new");
                Ok(Some(call_price(spot, self.payoff.strike(), sigma, self.maturity())))
            }
            CapitalPolicy::Rule(CapitalRule::ModelPrice) => {
                Ok(Some(model_price(model, &self.transform, spot, self.maturity(), &self.quad)?.value))
            }
        }
    }

    fn report(
        &self,
        model: &LevyModel,
        strategy: &DeltaStrategy,
        spot: f64,
        capital: Option<f64>,
    ) -> levy_hedge::Result<HedgingErrorReport> {
        let problem =
            HedgingProblem::new(*model, self.transform.clone(), strategy.clone(), spot, 0.0, self.maturity())?;
        let capital = match capital {
            Some(c) => c,
            None => mean_value_w(&problem, &self.quad)?.value,
        };
        hedging_error(&problem.with_capital(capital), &self.quad)
    }

    /// Per-strategy cells for one grid point.
    fn strategy_cells(&self, model: &LevyModel, spot: f64) -> (Vec<String>, usize) {
        let n = self.strategies.len();
        let failed = |e: &dyn std::fmt::Display| {
            let mut cells = Vec::with_capacity(STRATEGY_COLUMNS.len() * n);
            for _ in 0..n {
                cells.extend(std::iter::repeat_n(String::new(), STRATEGY_COLUMNS.len() - 1));
                cells.push(status(&e));
            }
            (cells, n)
        };
        let strategies = match self.strategies_at(model, spot) {
            Ok(s) => s,
            Err(e) => return failed(&e),
        };
        let capital = match self.shared_capital(model, spot, &strategies) {
            Ok(c) => c,
            Err(e) => return failed(&e),
        };
        let mut cells = Vec::with_capacity(STRATEGY_COLUMNS.len() * n);
        let mut failures = 0;
        for (strategy, _) in &strategies {
            match self.report(model, strategy, spot, capital) {
                Ok(r) => cells.extend([
                    num(r.capital),
                    num(r.w),
                    num(r.mse),
                    r.relative_error.map(num).unwrap_or_default(),
                    num(r.quad_error),
                    "ok".to_string(),
                ]),
                Err(e) => {
                    failures += 1;
                    cells.extend(std::iter::repeat_n(String::new(), STRATEGY_COLUMNS.len() - 1));
                    cells.push(status(&e));
                }
            }
        }
        (cells, failures)
    }

    fn strategy_header(&self) -> Vec<String> {
        self.names
            .iter()
            .flat_map(|name| STRATEGY_COLUMNS.iter().map(move |c| format!("{name}_{c}")))
            .collect()
    }
}

/// Suffixes of the per-strategy columns, in order.
pub const STRATEGY_COLUMNS: [&str; 6] = ["capital", "w", "mse", "relative_error", "quad_error", "status"];

/// Column prefixes: the strategy kind, numbered when a kind repeats.
pub fn column_names(strategies: &[StrategySpec]) -> Vec<String> {
    strategies
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let base = s.column();
            let total = strategies.iter().filter(|o| o.column() == base).count();
            if total == 1 {
                base.to_string()
            } else {
                let nth = strategies[..=i].iter().filter(|o| o.column() == base).count();
                format!("{base}{nth}")
            }
        })
        .collect()
}

fn spot_grid(cfg: &ExperimentConfig) -> anyhow::Result<Vec<f64>> {
    match cfg.grid {
        Some(GridSpec::Spot(range)) => {
            let points = range.points()?;
            if let Some(bad) = points.iter().find(|s| !(**s > 0.0)) {
                return Err(config_error(format!("spot grid must be positive, got {bad}")));
            }
            Ok(points)
        }
        Some(GridSpec::Drift { .. }) => Err(config_error("this command needs a spot grid, the config has a drift grid")),
        None => Err(config_error("config needs a grid")),
    }
}

/// Hedging error of every strategy at each spot of the grid.
pub fn run_error_sweep(cfg: &ExperimentConfig, quad: QuadConfig) -> anyhow::Result<Table> {
    let setup = Setup::new(cfg, quad)?;
    let spots = spot_grid(cfg)?;
    let rows: Vec<(Vec<String>, usize)> = spots
        .par_iter()
        .map(|&spot| {
            let (cells, failures) = setup.strategy_cells(&setup.model, spot);
            (std::iter::once(num(spot)).chain(cells).collect(), failures)
        })
        .collect();
    let mut header = vec!["s0".to_string()];
    header.extend(setup.strategy_header());
    Ok(collect_table(header, rows))
}

/// Hedging error over a grid of drift rates `κ(1)`, reached by moving the NIG
/// location parameter.
pub fn run_drift_sweep(cfg: &ExperimentConfig, quad: QuadConfig) -> anyhow::Result<Table> {
    let setup = Setup::new(cfg, quad)?;
    let Some(GridSpec::Drift { spot, kappa1 }) = cfg.grid else {
        return Err(config_error("drift-sweep needs a drift grid"));
    };
    if !(spot > 0.0 && spot.is_finite()) {
        return Err(config_error(format!("spot must be > 0, got {spot}")));
    }
    if !matches!(setup.model.kind(), ModelKind::Nig { .. }) {
        return Err(config_error(format!(
            "drift-sweep moves the NIG location parameter; got a {} model",
            setup.model.name()
        )));
    }
    if matches!(setup.capital, CapitalPolicy::Rule(CapitalRule::ModelPrice)) {
        return Err(config_error("capital \"model_price\" needs a martingale model; use \"bs_price\", \"w\" or a value"));
    }
    for s in &cfg.strategies {
        match s {
            StrategySpec::Mvo => {
                return Err(config_error(
                    "strategy \"mvo\" needs a martingale model; use \"mvo_proxy\" in a drift sweep",
                ))
            }
            StrategySpec::ModelDelta { pricing_model: None, .. } => {
                return Err(config_error("model_delta in a drift sweep needs an explicit martingale pricing_model"))
            }
            _ => {}
        }
    }
    let drifts = kappa1.points()?;
    let rows: Vec<(Vec<String>, usize)> = drifts
        .par_iter()
        .map(|&target| {
            let model = match drifted(&setup.model, target) {
                Ok(m) => m,
                Err(e) => {
                    let n = setup.strategies.len() * STRATEGY_COLUMNS.len();
                    let mut row = vec![num(target), String::new()];
                    row.extend((0..n).map(|i| {
                        if (i + 1) % STRATEGY_COLUMNS.len() == 0 {
                            status(&e)
                        } else {
                            String::new()
                        }
                    }));
                    return (row, setup.strategies.len());
                }
            };
            let ModelKind::Nig { mu, .. } = *model.kind() else { unreachable!() };
            let (cells, failures) = setup.strategy_cells(&model, spot);
            ([num(target), num(mu)].into_iter().chain(cells).collect(), failures)
        })
        .collect();
    let mut header = vec!["kappa1".to_string(), "mu".to_string()];
    header.extend(setup.strategy_header());
    Ok(collect_table(header, rows))
}

fn drifted(model: &LevyModel, target: f64) -> levy_hedge::Result<LevyModel> {
    let m = model.nig_with_drift(target)?;
    let achieved = m.drift_rate();
    if (achieved - target).abs() >= DRIFT_TOL {
        return Err(levy_hedge::Error::NumericalInstability(format!(
            "location shift reached kappa(1) = {achieved:e} instead of {target:e}"
        )));
    }
    Ok(m)
}

fn collect_table(header: Vec<String>, rows: Vec<(Vec<String>, usize)>) -> Table {
    let failures = rows.iter().map(|(_, f)| f).sum();
    Table {
        header,
        rows: rows.into_iter().map(|(r, _)| r).collect(),
        failures,
    }
}

/// Largest adjusted z-score tolerated by `mc-check`.
pub const MC_Z_LIMIT: f64 = 4.0;

/// Engine against Monte Carlo at each spot and strategy. A row fails when
/// `max(0, |engine - mc| - allowance) / se` exceeds [`MC_Z_LIMIT`].
pub fn run_mc_check(cfg: &ExperimentConfig, quad: QuadConfig, seed: Option<u64>) -> anyhow::Result<Table> {
    let setup = Setup::new(cfg, quad)?;
    let mc: McSpec = cfg
        .monte_carlo
        .ok_or_else(|| config_error("mc-check needs a monte_carlo section"))?;
    if !(mc.relative_allowance >= 0.0 && mc.absolute_allowance >= 0.0) {
        return Err(config_error("discretization allowances must be >= 0"));
    }
    let paths = mc.path_config(seed);
    paths.validate()?;
    let spots = spot_grid(cfg)?;
    let t = setup.maturity();
    // reject models without an exact sampler before any quadrature runs
    IncrementSampler::new(&setup.model, t / paths.n_steps as f64)?;
    let mut rows = Vec::new();
    let mut failures = 0;
    // points run one after another; the simulation itself is parallel
    for spot in spots {
        let strategies = setup.strategies_at(&setup.model, spot)?;
        let capital = setup.shared_capital(&setup.model, spot, &strategies)?;
        for ((strategy, _), name) in strategies.iter().zip(&setup.names) {
            let engine = setup.report(&setup.model, strategy, spot, capital)?;
            let est = simulate_hedge(
                &setup.model,
                &setup.transform,
                strategy,
                spot,
                engine.capital,
                t,
                &paths,
                &setup.quad,
            )?;
            let diff = engine.mse - est.mse_hat;
            let allowance = mc.absolute_allowance + mc.relative_allowance * engine.mse.abs();
            let z = if est.std_error > 0.0 { diff / est.std_error } else { 0.0 };
            let excess = (diff.abs() - allowance).max(0.0);
            let adjusted = if excess == 0.0 {
                0.0
            } else if est.std_error > 0.0 {
                excess / est.std_error
            } else {
                f64::INFINITY
            };
            let ok = adjusted <= MC_Z_LIMIT;
            if !ok {
                failures += 1;
            }
            rows.push(vec![
                num(spot),
                name.clone(),
                num(engine.capital),
                num(engine.mse),
                num(engine.quad_error),
                num(est.mse_hat),
                num(est.std_error),
                num(z),
                num(allowance),
                num(adjusted),
                if ok { "pass" } else { "fail" }.to_string(),
            ]);
        }
    }
    Ok(Table {
        header: MC_COLUMNS.iter().map(|c| c.to_string()).collect(),
        rows,
        failures,
    })
}

pub const MC_COLUMNS: [&str; 11] = [
    "s0",
    "strategy",
    "capital",
    "engine_mse",
    "engine_quad_error",
    "mc_mse",
    "mc_std_error",
    "z",
    "allowance",
    "adjusted_z",
    "status",
];

pub const MOMENT_COLUMNS: [&str; 5] = ["horizon", "t", "variance", "skewness", "excess_kurtosis"];

/// Log-return moments over one trading day and one year.
pub fn run_moments(cfg: &ExperimentConfig) -> anyhow::Result<Table> {
    let model = cfg.model.build()?;
    let rows = [("daily", 1.0 / TRADING_DAYS), ("yearly", 1.0)]
        .into_iter()
        .map(|(label, t)| {
            let m = model.moments(t)?;
            Ok(vec![
                label.to_string(),
                num(t),
                num(m.variance),
                num(m.skewness),
                num(m.excess_kurtosis),
            ])
        })
        .collect::<levy_hedge::Result<Vec<_>>>()?;
    Ok(Table {
        header: MOMENT_COLUMNS.iter().map(|c| c.to_string()).collect(),
        rows,
        failures: 0,
    })
}
