use crate::datagen::SizeRule;
use crate::error::{Error, Result};
use crate::estimators::{Estimator, SpacingConfig, StoreyConfig};
use crate::seed::SeedPolicy;
use std::collections::BTreeMap;
use std::fmt;

/// Environment variable consulted for the base seed when none is given.
pub const SEED_ENV: &str = "DISTBH_SEED";
pub const DEFAULT_SEED: u64 = 20_200_101;

/// The quantity swept along an experiment's x-axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridParam {
    /// Base node size `n`.
    N,
    /// Center of the alternative mean interval.
    MuBase,
    /// Correlation of the within-node noise.
    Rho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Covariance {
    /// `rho^{|i-j|}`
    #[default]
    Ar1,
    /// `rho` within consecutive blocks.
    Block,
}

/// Local level used by the no-communication baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LocalLevel {
    /// `alpha * m_i / m`.
    #[default]
    Proportional,
    /// `alpha / N`.
    EqualSplit,
}

/// How the per-node alternative fractions `r1_i` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum R1Rule {
    /// `r1_i = r1_max * i / N`.
    #[default]
    Fixed,
    /// `r1_i ~ Unif[0, r1_max]`, drawn once per experiment from the seed.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: u8,
    pub alpha: f64,
    pub nodes: usize,
    pub trials: usize,
    pub estimator: Estimator,
    pub grid_param: GridParam,
    pub grid: Vec<f64>,
    /// Base node size when `n` is not the swept parameter.
    pub n: usize,
    /// Alternative mean center when it is not swept.
    pub mu_base: f64,
    pub size_rule: SizeRule,
    /// Node `i` uses `mu_base_i = 2 + i / N` instead of `mu_base`.
    pub heterogeneous_mu: bool,
    pub covariance: Covariance,
    pub block_size: usize,
    pub r1_rule: R1Rule,
    pub r1_max: f64,
    pub local_level: LocalLevel,
    pub seed: SeedPolicy,
}

fn powers_of_ten(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|e| 10f64.powi(e)).collect()
}

pub fn default_seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

impl ExperimentConfig {
    /// Defaults for experiments 1-5: alpha 0.2, 50 nodes, 200 trials,
    /// Storey(0.5), `r1_i = 0.3 i / N`.
    pub fn preset(experiment: u8) -> Result<Self> {
        let base = Self {
            experiment,
            alpha: 0.2,
            nodes: 50,
            trials: 200,
            estimator: Estimator::Storey(StoreyConfig::default()),
            grid_param: GridParam::N,
            grid: Vec::new(),
            n: 10_000,
            mu_base: 3.0,
            size_rule: SizeRule::Power,
            heterogeneous_mu: false,
            covariance: Covariance::Ar1,
            block_size: 20,
            r1_rule: R1Rule::Fixed,
            r1_max: 0.3,
            local_level: LocalLevel::Proportional,
            seed: SeedPolicy::new(default_seed()),
        };
        let cfg = match experiment {
            1 => Self {
                grid: powers_of_ten(2, 5),
                size_rule: SizeRule::Uniform,
                ..base
            },
            2 => Self {
                grid: powers_of_ten(2, 6),
                ..base
            },
            3 => Self {
                grid_param: GridParam::MuBase,
                grid: vec![2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0],
                ..base
            },
            4 => Self {
                grid: powers_of_ten(3, 6),
                heterogeneous_mu: true,
                ..base
            },
            5 => Self {
                grid_param: GridParam::Rho,
                grid: vec![0.0, 0.2, 0.4, 0.6, 0.8],
                n: 1000,
                ..base
            },
            other => return Err(Error::config(format!("experiment must be 1-5, got {other}"))),
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.experiment) {
            return Err(Error::config(format!("experiment must be 1-5, got {}", self.experiment)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.nodes == 0 || self.nodes > u32::MAX as usize - 1 {
            return Err(Error::config("need at least one node"));
        }
        if self.trials == 0 {
            return Err(Error::config("need at least one trial"));
        }
        if self.grid.is_empty() {
            return Err(Error::config("grid is empty"));
        }
        match self.estimator {
            Estimator::Storey(c) => {
                StoreyConfig::new(c.lambda)?;
            }
            Estimator::Spacing(c) => {
                SpacingConfig::new(c.l)?;
            }
        }
        if !(0.0..=1.0).contains(&self.r1_max) {
            return Err(Error::config(format!("r1_max must lie in [0, 1], got {}", self.r1_max)));
        }
        if self.block_size == 0 {
            return Err(Error::config("block size must be positive"));
        }
        for &v in &self.grid {
            match self.grid_param {
                GridParam::N => {
                    if !(v >= 1.0 && v.fract() == 0.0 && v <= 1e9) {
                        return Err(Error::config(format!("node size grid value {v} is not a positive integer")));
                    }
                }
                GridParam::MuBase => check_mu(v)?,
                GridParam::Rho => {
                    if !(0.0..1.0).contains(&v) {
                        return Err(Error::config(format!("rho grid value {v} outside [0, 1)")));
                    }
                }
            }
        }
        if self.grid_param != GridParam::N && self.n == 0 {
            return Err(Error::config("n must be positive"));
        }
        if self.grid_param != GridParam::MuBase && !self.heterogeneous_mu {
            check_mu(self.mu_base)?;
        }
        Ok(())
    }

    /// Applies `key = value` settings; keys match the CLI long flags with
    /// dashes or underscores.
    pub fn apply_settings(&mut self, settings: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in settings {
            self.apply(key, value)?;
        }
        Ok(())
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let bad = |e: &dyn fmt::Display| Error::config(format!("bad value `{value}` for `{key}`: {e}"));
        match key.as_str() {
            "experiment" => {} // consumed by the caller to pick the preset
            "alpha" => self.alpha = value.parse().map_err(|e| bad(&e))?,
            "nodes" => self.nodes = value.parse().map_err(|e| bad(&e))?,
            "trials" => self.trials = value.parse().map_err(|e| bad(&e))?,
            "seed" => self.seed = SeedPolicy::new(value.parse().map_err(|e| bad(&e))?),
            "estimator" => {
                self.estimator = match value {
                    "storey" => Estimator::Storey(StoreyConfig::default()),
                    "spacing" => Estimator::Spacing(SpacingConfig::default()),
                    _ => return Err(bad(&"expected `storey` or `spacing`")),
                }
            }
            "lambda" => {
                let lambda = value.parse().map_err(|e| bad(&e))?;
                match &mut self.estimator {
                    Estimator::Storey(c) => c.lambda = lambda,
                    Estimator::Spacing(_) => return Err(Error::config("`lambda` applies to the storey estimator")),
                }
            }
            "l" => {
                let l = value.parse().map_err(|e| bad(&e))?;
                match &mut self.estimator {
                    Estimator::Spacing(c) => c.l = l,
                    Estimator::Storey(_) => return Err(Error::config("`l` applies to the spacing estimator")),
                }
            }
            "n" => self.n = value.parse().map_err(|e| bad(&e))?,
            "mu_base" => self.mu_base = value.parse().map_err(|e| bad(&e))?,
            "n_grid" => self.set_grid(GridParam::N, value)?,
            "mu_grid" => self.set_grid(GridParam::MuBase, value)?,
            "rho_grid" => self.set_grid(GridParam::Rho, value)?,
            "covariance" => {
                self.covariance = match value {
                    "ar1" => Covariance::Ar1,
                    "block" => Covariance::Block,
                    _ => return Err(bad(&"expected `ar1` or `block`")),
                }
            }
            "block_size" => self.block_size = value.parse().map_err(|e| bad(&e))?,
            "size_rule" => {
                self.size_rule = match value {
                    "uniform" => SizeRule::Uniform,
                    "power" => SizeRule::Power,
                    _ => return Err(bad(&"expected `uniform` or `power`")),
                }
            }
            "r1_rule" => {
                self.r1_rule = match value {
                    "fixed" => R1Rule::Fixed,
                    "random" => R1Rule::Random,
                    _ => return Err(bad(&"expected `fixed` or `random`")),
                }
            }
            "r1_max" => self.r1_max = value.parse().map_err(|e| bad(&e))?,
            "local_level" => {
                self.local_level = match value {
                    "proportional" => LocalLevel::Proportional,
                    "equal" => LocalLevel::EqualSplit,
                    _ => return Err(bad(&"expected `proportional` or `equal`")),
                }
            }
            _ => return Err(Error::config(format!("unknown setting `{key}`"))),
        }
        Ok(())
    }

    fn set_grid(&mut self, param: GridParam, list: &str) -> Result<()> {
        let values = parse_list(list)?;
        if param != self.grid_param {
            return Err(Error::config(format!(
                "experiment {} sweeps {}, not {}",
                self.experiment,
                grid_param_name(self.grid_param, self.covariance),
                grid_param_name(param, self.covariance)
            )));
        }
        self.grid = values;
        Ok(())
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.5 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("mu_base must exceed the half width 0.5, got {mu}")))
    }
}

pub fn parse_list(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| Error::config(format!("bad grid value `{s}`: {e}")))
        })
        .collect()
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are ignored.
pub fn parse_settings(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected `key = value`", lineno + 1)))?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}

/// Column label for the swept parameter. Experiment 5 tags the covariance
/// structure so the two variants stay distinguishable in one CSV.
pub fn grid_param_name(param: GridParam, covariance: Covariance) -> &'static str {
    match (param, covariance) {
        (GridParam::N, _) => "n",
        (GridParam::MuBase, _) => "mu_base",
        (GridParam::Rho, Covariance::Ar1) => "rho_ar1",
        (GridParam::Rho, Covariance::Block) => "rho_block",
    }
}
