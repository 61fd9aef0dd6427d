use super::config::{grid_param_name, Covariance, ExperimentConfig, GridParam, LocalLevel, R1Rule};
use crate::datagen::{alternative_count, gen_node_batch, node_sizes, AlternativeModel, Dependence, NodeGenSpec};
use crate::error::{Error, Result};
use crate::protocol::{run_round, CenterState, DeliveryOrder, InProcessTransport, NodeState};
use crate::testing::{bh_procedure, BhResult, PValueBatch, TrialMetrics};
use rand::Rng;
use rayon::prelude::*;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Distributed,
    Central,
    LocalOnly,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Distributed, Method::Central, Method::LocalOnly];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Distributed => "distributed",
            Method::Central => "central",
            Method::LocalOnly => "local_only",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Spread of the calibrated local levels over all nodes and trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub experiment: u8,
    pub method: Method,
    pub grid_param: &'static str,
    pub grid_value: f64,
    pub fdr: f64,
    pub fdr_se: f64,
    pub power: f64,
    pub power_se: f64,
    pub mean_rejections: f64,
    pub trials: usize,
    pub seed: u64,
    /// Per-node levels; `None` for the central method.
    pub alpha_summary: Option<AlphaSummary>,
}

/// Everything measured in one trial at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub distributed: TrialMetrics,
    pub central: TrialMetrics,
    pub local_only: TrialMetrics,
    /// Calibrated level of each node, in node order.
    pub alpha_i: Vec<f64>,
    /// Null-proportion estimate of each node, in node order.
    pub r0_hat: Vec<f64>,
    /// Pooled BH rejection set (indices into the node-order concatenation).
    pub central_rejected: Vec<usize>,
    /// Union of the per-node distributed rejection sets, same indexing.
    pub distributed_rejected: Vec<usize>,
}

impl TrialOutcome {
    pub fn metrics(&self, method: Method) -> &TrialMetrics {
        match method {
            Method::Distributed => &self.distributed,
            Method::Central => &self.central,
            Method::LocalOnly => &self.local_only,
        }
    }
}

/// Per-node `r1_i`, either the fixed ramp or one seeded uniform draw per node.
pub fn r1_values(cfg: &ExperimentConfig) -> Vec<f64> {
    let n = cfg.nodes as f64;
    match cfg.r1_rule {
        R1Rule::Fixed => (1..=cfg.nodes).map(|i| cfg.r1_max * i as f64 / n).collect(),
        R1Rule::Random => {
            let mut rng = cfg.seed.stream(u32::MAX - 1, 0, 0);
            (0..cfg.nodes).map(|_| rng.gen::<f64>() * cfg.r1_max).collect()
        }
    }
}

/// Per-node generation specs at one grid value.
pub fn node_specs(cfg: &ExperimentConfig, grid_value: f64) -> Result<Vec<NodeGenSpec>> {
    let n = match cfg.grid_param {
        GridParam::N => grid_value as usize,
        _ => cfg.n,
    };
    let dependence = match (cfg.grid_param, cfg.covariance) {
        (GridParam::Rho, Covariance::Ar1) => Dependence::Ar1 { rho: grid_value },
        (GridParam::Rho, Covariance::Block) => Dependence::Block {
            rho: grid_value,
            block: cfg.block_size,
        },
        _ => Dependence::Independent,
    };
    let sizes = node_sizes(n, cfg.nodes, cfg.size_rule);
    let r1 = r1_values(cfg);
    sizes
        .iter()
        .zip(&r1)
        .enumerate()
        .map(|(i, (&m, &r1))| {
            let mu = if cfg.heterogeneous_mu {
                2.0 + (i + 1) as f64 / cfg.nodes as f64
            } else if cfg.grid_param == GridParam::MuBase {
                grid_value
            } else {
                cfg.mu_base
            };
            Ok(NodeGenSpec {
                m,
                m1: alternative_count(r1, m),
                alt: AlternativeModel::symmetric(mu)?,
                dependence,
            })
        })
        .collect()
}

fn count_false(batch: &PValueBatch, rejected: &[usize]) -> usize {
    let null = batch.is_null();
    rejected.iter().filter(|&&j| null[j]).count()
}

/// Runs one trial of all three methods on the same generated data.
pub fn run_trial(cfg: &ExperimentConfig, grid_index: usize, trial: usize) -> Result<TrialOutcome> {
    let grid_value = *cfg
        .grid
        .get(grid_index)
        .ok_or_else(|| Error::config(format!("grid index {grid_index} out of range")))?;
    let specs = node_specs(cfg, grid_value)?;
    let (g, t) = (grid_index as u32, trial as u32);

    let mut nodes = specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let id = i as u32 + 1;
            let batch = gen_node_batch(spec, &mut cfg.seed.stream(g, t, id))?;
            NodeState::new(id, batch, cfg.estimator)
        })
        .collect::<Result<Vec<_>>>()?;
    let m: usize = nodes.iter().map(|n| n.batch().len()).sum();
    let m1: usize = nodes.iter().map(|n| n.batch().m1()).sum();
    let offsets: Vec<usize> = nodes
        .iter()
        .scan(0, |acc, n| {
            let start = *acc;
            *acc += n.batch().len();
            Some(start)
        })
        .collect();

    let mut center = CenterState::new(cfg.nodes, cfg.alpha)?;
    let mut transport = InProcessTransport::new(DeliveryOrder::Fifo);
    let results = run_round(&mut nodes, &mut center, &mut transport)?;
    let mut distributed_rejected = Vec::new();
    let mut v = 0;
    for ((node, res), &off) in nodes.iter().zip(&results).zip(&offsets) {
        v += count_false(node.batch(), &res.rejected);
        distributed_rejected.extend(res.rejected.iter().map(|j| j + off));
    }
    let distributed = TrialMetrics::from_counts(distributed_rejected.len(), v, m1);

    let mut pooled = Vec::with_capacity(m);
    let mut pooled_null = Vec::with_capacity(m);
    for node in &nodes {
        pooled.extend_from_slice(node.batch().pvalues());
        pooled_null.extend_from_slice(node.batch().is_null());
    }
    let central_res = bh_procedure(&pooled, cfg.alpha)?;
    drop(pooled);
    let v = central_res.rejected.iter().filter(|&&j| pooled_null[j]).count();
    let central = TrialMetrics::from_counts(central_res.rejected.len(), v, m1);

    let (mut r, mut v) = (0, 0);
    for node in &nodes {
        let batch = node.batch();
        if batch.is_empty() {
            continue;
        }
        let level = match cfg.local_level {
            LocalLevel::Proportional => cfg.alpha * batch.len() as f64 / m as f64,
            LocalLevel::EqualSplit => cfg.alpha / cfg.nodes as f64,
        };
        let res: BhResult = bh_procedure(batch.pvalues(), level)?;
        r += res.rejected.len();
        v += count_false(batch, &res.rejected);
    }
    let local_only = TrialMetrics::from_counts(r, v, m1);

    Ok(TrialOutcome {
        distributed,
        central,
        local_only,
        alpha_i: nodes.iter().map(|n| n.alpha_i().unwrap_or(0.0)).collect(),
        r0_hat: nodes.iter().map(|n| n.r0_hat().unwrap_or(1.0)).collect(),
        central_rejected: central_res.rejected,
        distributed_rejected,
    })
}

/// All trials at one grid point, in trial order.
pub fn run_grid_point(cfg: &ExperimentConfig, grid_index: usize) -> Result<Vec<TrialOutcome>> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, grid_index, t))
        .collect()
}

fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Reduces trial outcomes (in trial order) into one row per method.
pub fn summarize(cfg: &ExperimentConfig, grid_value: f64, outcomes: &[TrialOutcome]) -> Result<Vec<MethodResult>> {
    if outcomes.is_empty() {
        return Err(Error::config("no trials to summarize"));
    }
    let grid_param = grid_param_name(cfg.grid_param, cfg.covariance);
    Ok(Method::ALL
        .iter()
        .map(|&method| {
            let metrics = || outcomes.iter().map(move |o| o.metrics(method));
            let (fdr, fdr_se) = mean_se(metrics().map(|m| m.fdp));
            let (power, power_se) = mean_se(metrics().map(|m| m.tdp));
            let mean_rejections = metrics().map(|m| m.rejections as f64).sum::<f64>() / outcomes.len() as f64;
            let alpha_summary = match method {
                Method::Central => None,
                Method::Distributed => alpha_stats(outcomes.iter().flat_map(|o| o.alpha_i.iter().copied())),
                Method::LocalOnly => alpha_stats(local_levels(cfg, grid_value).into_iter()),
            };
            MethodResult {
                experiment: cfg.experiment,
                method,
                grid_param,
                grid_value,
                fdr,
                fdr_se,
                power,
                power_se,
                mean_rejections,
                trials: outcomes.len(),
                seed: cfg.seed.base_seed,
                alpha_summary,
            }
        })
        .collect())
}

fn local_levels(cfg: &ExperimentConfig, grid_value: f64) -> Vec<f64> {
    let Ok(specs) = node_specs(cfg, grid_value) else {
        return Vec::new();
    };
    let m: usize = specs.iter().map(|s| s.m).sum();
    specs
        .iter()
        .map(|s| match cfg.local_level {
            LocalLevel::Proportional => cfg.alpha * s.m as f64 / m.max(1) as f64,
            LocalLevel::EqualSplit => cfg.alpha / cfg.nodes as f64,
        })
        .collect()
}

fn alpha_stats(values: impl Iterator<Item = f64>) -> Option<AlphaSummary> {
    let (mut min, mut max, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for a in values {
        min = min.min(a);
        max = max.max(a);
        sum += a;
        n += 1;
    }
    (n > 0).then(|| AlphaSummary {
        min,
        mean: sum / n as f64,
        max,
    })
}

/// Runs every grid point and returns rows ordered by method, then grid value.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MethodResult>> {
    run_experiment_with(cfg, |_, _| {})
}

/// Like [`run_experiment`], calling `progress(grid_index, grid_value)` after
/// each grid point.
pub fn run_experiment_with<P: FnMut(usize, f64)>(cfg: &ExperimentConfig, mut progress: P) -> Result<Vec<MethodResult>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(3 * cfg.grid.len());
    for (g, &value) in cfg.grid.iter().enumerate() {
        let outcomes = run_grid_point(cfg, g)?;
        rows.extend(summarize(cfg, value, &outcomes)?);
        progress(g, value);
    }
    rows.sort_by(|a, b| a.method.cmp(&b.method).then(a.grid_value.total_cmp(&b.grid_value)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::SizeRule;

    fn small(experiment: u8) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset(experiment).unwrap();
        cfg.trials = 4;
        cfg.nodes = 5;
        cfg
    }

    #[test]
    fn exp1_echo() {
        let cfg = ExperimentConfig::preset(1).unwrap();
        let specs = node_specs(&cfg, 100.0).unwrap();
        assert_eq!(specs.len(), 50);
        assert!(specs.iter().all(|s| s.m == 100 && s.alt.mu_base == 3.0));
        assert_eq!(specs[49].m1, 30);
        assert_eq!(specs[0].m1, 0);
        assert_eq!(r1_values(&cfg)[24], 0.15);
    }

    #[test]
    fn heterogeneous_mu_and_dependence() {
        let cfg = ExperimentConfig::preset(4).unwrap();
        let specs = node_specs(&cfg, 1000.0).unwrap();
        assert!((specs[0].alt.mu_base - 2.02).abs() < 1e-12);
        assert_eq!(specs[49].alt.mu_base, 3.0);
        let mut cfg = ExperimentConfig::preset(5).unwrap();
        assert_eq!(node_specs(&cfg, 0.4).unwrap()[0].dependence, Dependence::Ar1 { rho: 0.4 });
        cfg.covariance = Covariance::Block;
        assert_eq!(
            node_specs(&cfg, 0.4).unwrap()[0].dependence,
            Dependence::Block { rho: 0.4, block: 20 }
        );
    }

    #[test]
    fn random_r1_is_seeded_and_bounded() {
        let mut cfg = ExperimentConfig::preset(1).unwrap();
        cfg.r1_rule = R1Rule::Random;
        let a = r1_values(&cfg);
        assert_eq!(a, r1_values(&cfg));
        assert!(a.iter().all(|&r| (0.0..0.3).contains(&r)));
    }

    #[test]
    fn single_node_distributed_equals_central() {
        let mut cfg = small(1);
        cfg.nodes = 1;
        cfg.trials = 1;
        cfg.grid = vec![500.0];
        cfg.r1_max = 0.2;
        let o = run_trial(&cfg, 0, 0).unwrap();
        assert_eq!(o.distributed, o.central);
        assert_eq!(o.distributed_rejected, o.central_rejected);
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(
            (rows[0].fdr, rows[0].power),
            (rows[1].fdr, rows[1].power)
        );
    }

    #[test]
    fn all_null_has_zero_power() {
        let mut cfg = small(1);
        cfg.r1_max = 0.0;
        cfg.grid = vec![200.0];
        for row in run_experiment(&cfg).unwrap() {
            assert_eq!(row.power, 0.0, "{:?}", row.method);
            assert!((0.0..=1.0).contains(&row.fdr));
        }
    }

    #[test]
    fn rows_ordered_and_deterministic() {
        let mut cfg = small(2);
        cfg.grid = vec![1000.0, 100.0];
        let rows = run_experiment(&cfg).unwrap();
        let keys: Vec<(Method, f64)> = rows.iter().map(|r| (r.method, r.grid_value)).collect();
        assert_eq!(
            keys,
            vec![
                (Method::Distributed, 100.0),
                (Method::Distributed, 1000.0),
                (Method::Central, 100.0),
                (Method::Central, 1000.0),
                (Method::LocalOnly, 100.0),
                (Method::LocalOnly, 1000.0),
            ]
        );
        assert_eq!(rows, run_experiment(&cfg).unwrap());
        let d = rows[0].alpha_summary.unwrap();
        assert!(d.min <= d.mean && d.mean <= d.max && d.max <= 1.0);
        assert!(rows[2].alpha_summary.is_none());
    }

    #[test]
    fn fdr_is_mean_fdp_of_union() {
        let mut cfg = small(1);
        cfg.grid = vec![300.0];
        let outcomes = run_grid_point(&cfg, 0).unwrap();
        let rows = summarize(&cfg, 300.0, &outcomes).unwrap();
        let mean = outcomes.iter().map(|o| o.distributed.fdp).sum::<f64>() / outcomes.len() as f64;
        assert_eq!(rows[0].fdr, mean);
        for o in &outcomes {
            assert_eq!(o.distributed.rejections, o.distributed_rejected.len());
        }
    }

    #[test]
    fn local_levels_sum_to_alpha() {
        let mut cfg = small(2);
        cfg.size_rule = SizeRule::Power;
        let total: f64 = local_levels(&cfg, 1000.0).iter().sum();
        assert!((total - cfg.alpha).abs() < 1e-12);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = small(1);
        cfg.trials = 0;
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    }
}
