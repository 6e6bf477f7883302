//! Experiment configuration: a JSON object naming the model, payoff,
//! strategies, capital policy and grid of one run.

use std::fmt;
use std::path::PathBuf;

use levy_hedge::mc_oracle::PathConfig;
use levy_hedge::{LevyModel, PayoffTransform, QuadConfig};
use serde::{Deserialize, Serialize};

/// A configuration problem; the CLI exits with code 2 on these.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub payoff: Option<PayoffSpec>,
    #[serde(default)]
    pub strategies: Vec<StrategySpec>,
    #[serde(default)]
    pub capital: Option<CapitalPolicy>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub quadrature: QuadOverrides,
    #[serde(default)]
    pub monte_carlo: Option<McSpec>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Bs {
        sigma: f64,
    },
    Nig {
        alpha: f64,
        beta: f64,
        delta: f64,
        mu: f64,
    },
    /// `omega` omitted means martingale-adjusted.
    Cgmye {
        c: f64,
        g: f64,
        m: f64,
        y: f64,
        eta: f64,
        #[serde(default)]
        omega: Option<f64>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> levy_hedge::Result<LevyModel> {
        match *self {
            ModelSpec::Bs { sigma } => LevyModel::black_scholes(sigma),
            ModelSpec::Nig { alpha, beta, delta, mu } => LevyModel::nig(alpha, beta, delta, mu),
            ModelSpec::Cgmye {
                c,
                g,
                m,
                y,
                eta,
                omega: None,
            } => LevyModel::martingale_adjust_cgmye(c, g, m, y, eta),
            ModelSpec::Cgmye {
                c,
                g,
                m,
                y,
                eta,
                omega: Some(omega),
            } => LevyModel::cgmye(c, g, m, y, eta, omega),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffSpec {
    Call { strike: f64, maturity: f64, abscissa: f64 },
}

impl PayoffSpec {
    pub fn maturity(&self) -> f64 {
        match *self {
            PayoffSpec::Call { maturity, .. } => maturity,
        }
    }

    pub fn strike(&self) -> f64 {
        match *self {
            PayoffSpec::Call { strike, .. } => strike,
        }
    }

    pub fn build(&self) -> levy_hedge::Result<PayoffTransform> {
        match *self {
            PayoffSpec::Call { strike, abscissa, .. } => PayoffTransform::call(strike, abscissa),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Volatility {
    Fixed(f64),
    /// `"implied"`: the Black-Scholes volatility matching the model price at
    /// each grid point.
    Named(VolatilityRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolatilityRule {
    Implied,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    Bs {
        sigma: Volatility,
    },
    /// Delta hedge computed in `pricing_model`, or in the model itself.
    ModelDelta {
        #[serde(default)]
        pricing_model: Option<ModelSpec>,
        #[serde(default)]
        waive_integrability: bool,
    },
    Mvo,
    /// The martingale variance-optimal formula evaluated in a model with drift.
    MvoProxy,
}

impl StrategySpec {
    pub fn column(&self) -> &'static str {
        match self {
            StrategySpec::Bs { .. } => "bs",
            StrategySpec::ModelDelta { .. } => "delta",
            StrategySpec::Mvo => "mvo",
            StrategySpec::MvoProxy => "mvo_proxy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CapitalPolicy {
    Value(f64),
    Rule(CapitalRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapitalRule {
    /// Each strategy's own `w`, the capital minimizing its error.
    W,
    /// Black-Scholes price at the volatility of the first `bs` strategy.
    BsPrice,
    /// Price of the claim in the (martingale) model.
    ModelPrice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl Range {
    pub fn points(&self) -> anyhow::Result<Vec<f64>> {
        let Range { from, to, step } = *self;
        if !(from.is_finite() && to.is_finite() && step.is_finite()) {
            return Err(config_error("grid bounds and step must be finite"));
        }
        if from == to {
            return Ok(vec![from]);
        }
        if !(step > 0.0) || to < from {
            return Err(config_error(format!(
                "grid needs from <= to and step > 0, got from={from}, to={to}, step={step}"
            )));
        }
        let n = ((to - from) / step + 1e-9).floor() as usize;
        if n > 100_000 {
            return Err(config_error(format!("grid of {} points is too large", n + 1)));
        }
        // snapped to 12 decimals so that -0.2 + 1 * 0.05 reads back as -0.15
        // and the midpoint of a symmetric grid is exactly 0
        Ok((0..=n).map(|i| snap(from + i as f64 * step)).collect())
    }
}

fn snap(x: f64) -> f64 {
    format!("{x:.12}").parse::<f64>().expect("formatted float parses") + 0.0
}

/// Exactly one grid axis per run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Spot(Range),
    /// Sweep over `κ(1)` at a fixed spot.
    Drift { spot: f64, kappa1: Range },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadOverrides {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub inner_rel_tol: Option<f64>,
    pub max_subdivisions: Option<usize>,
}

impl QuadOverrides {
    pub fn resolve(&self, tol: Option<f64>) -> anyhow::Result<QuadConfig> {
        let mut cfg = QuadConfig::default();
        if let Some(rel) = self.rel_tol {
            cfg = cfg.with_rel_tol(rel);
        }
        if let Some(inner) = self.inner_rel_tol {
            cfg.inner_rel_tol = inner;
        }
        if let Some(abs) = self.abs_tol {
            cfg.abs_tol = abs;
        }
        if let Some(limit) = self.max_subdivisions {
            cfg.max_subdivisions = limit;
        }
        if let Some(rel) = tol {
            cfg = cfg.with_rel_tol(rel);
        }
        cfg.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    pub n_paths: usize,
    pub n_steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
    /// Discretization allowance as a fraction of the engine value.
    #[serde(default = "default_relative_allowance")]
    pub relative_allowance: f64,
    /// Absolute discretization allowance, for cases whose exact value is 0.
    #[serde(default)]
    pub absolute_allowance: f64,
}

fn default_relative_allowance() -> f64 {
    0.02
}

impl McSpec {
    pub fn path_config(&self, seed: Option<u64>) -> PathConfig {
        PathConfig {
            n_paths: self.n_paths,
            n_steps: self.n_steps,
            seed: seed.unwrap_or(self.seed),
            antithetic: self.antithetic,
        }
    }
}

pub const PRESETS: [(&str, &str); 7] = [
    ("fig-nig", include_str!("../presets/fig-nig.json")),
    ("fig-cgmye", include_str!("../presets/fig-cgmye.json")),
    ("fig-drift", include_str!("../presets/fig-drift.json")),
    ("mc-nig", include_str!("../presets/mc-nig.json")),
    ("mc-bs", include_str!("../presets/mc-bs.json")),
    ("moments-nig", include_str!("../presets/moments-nig.json")),
    ("moments-cgmye", include_str!("../presets/moments-cgmye.json")),
];

pub fn preset(name: &str) -> anyhow::Result<ExperimentConfig> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        config_error(format!("unknown preset {name:?}; available: {}", names.join(", ")))
    })?;
    parse(text).map_err(|e| config_error(format!("preset {name}: {e}")))
}

pub fn parse(text: &str) -> anyhow::Result<ExperimentConfig> {
    serde_json::from_str(text).map_err(|e| config_error(format!("invalid config: {e}")))
}

pub fn load(path: &std::path::Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}
