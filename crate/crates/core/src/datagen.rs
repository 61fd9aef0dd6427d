//! Seeded generation of Gaussian test statistics and two-sided p-values.
//!
//! Under the null a statistic is N(0, 1); under the alternative it is
//! N(mu, 1) with `mu` drawn afresh for every alternative hypothesis from an
//! [`AlternativeModel`]. Dependence, when requested, is imposed on the noise
//! vector of a single node; nodes are independent of each other.

use crate::error::{Error, Result};
use crate::normal;
use crate::testing::PValueBatch;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

/// Distribution of the alternative mean: uniform on
/// `[mu_base - w, mu_base + w]`, mirrored to the negative axis when
/// `symmetric` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternativeModel {
    pub mu_base: f64,
    pub half_width: f64,
    pub symmetric: bool,
}

impl AlternativeModel {
    pub fn new(mu_base: f64, half_width: f64, symmetric: bool) -> Result<Self> {
        let alt = Self {
            mu_base,
            half_width,
            symmetric,
        };
        alt.validate()?;
        Ok(alt)
    }

    /// The symmetric two-interval model with half width 0.5.
    pub fn symmetric(mu_base: f64) -> Result<Self> {
        Self::new(mu_base, 0.5, true)
    }

    /// A point mass at `mu`.
    pub fn fixed(mu: f64) -> Result<Self> {
        Self::new(mu, 0.0, false)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width >= 0.0 && self.mu_base > self.half_width && self.mu_base.is_finite()) {
            return Err(Error::config(format!(
                "alternative model needs mu_base > half_width >= 0, got mu_base={} half_width={}",
                self.mu_base, self.half_width
            )));
        }
        Ok(())
    }

    /// Support intervals, each carrying equal probability.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let pos = (self.mu_base - self.half_width, self.mu_base + self.half_width);
        if self.symmetric {
            vec![(-pos.1, -pos.0), pos]
        } else {
            vec![pos]
        }
    }

    pub fn sample_mu<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let mu = self.mu_base + self.half_width * (2.0 * u - 1.0);
        if self.symmetric && rng.gen::<bool>() {
            -mu
        } else {
            mu
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dependence {
    Independent,
    /// Covariance `rho^{|i-j|}`.
    Ar1 { rho: f64 },
    /// Covariance `rho` inside consecutive blocks of `block` indices, 0 across.
    Block { rho: f64, block: usize },
}

impl Dependence {
    fn validate(&self) -> Result<()> {
        match *self {
            Dependence::Independent => Ok(()),
            Dependence::Ar1 { rho } => check_rho(rho),
            Dependence::Block { rho, block } => {
                check_rho(rho)?;
                if block == 0 {
                    return Err(Error::input("block size must be at least 1"));
                }
                Ok(())
            }
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::input(format!("correlation must lie in [0, 1), got {rho}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeGenSpec {
    pub m: usize,
    pub m1: usize,
    pub alt: AlternativeModel,
    pub dependence: Dependence,
}

impl NodeGenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m1 > self.m {
            return Err(Error::config(format!(
                "{} alternatives requested in a node of {}",
                self.m1, self.m
            )));
        }
        self.alt.validate()?;
        self.dependence.validate()
    }
}

/// Number of alternatives `floor(r1 * m)`.
pub fn alternative_count(r1: f64, m: usize) -> usize {
    ((r1 * m as f64).floor() as usize).min(m)
}

/// Generates one node's labelled p-values.
///
/// Stream consumption order is fixed: noise vector, label shuffle, then one
/// `mu` per alternative in index order.
pub fn gen_node_batch<R: RngCore + ?Sized>(spec: &NodeGenSpec, rng: &mut R) -> Result<PValueBatch> {
    spec.validate()?;
    let mut x = match spec.dependence {
        Dependence::Independent => (0..spec.m).map(|_| normal::sample(rng)).collect(),
        Dependence::Ar1 { rho } => gen_ar1(spec.m, rho, rng)?,
        Dependence::Block { rho, block } => gen_block(spec.m, rho, block, rng)?,
    };

    let mut is_null = vec![true; spec.m];
    is_null[..spec.m1].iter_mut().for_each(|n| *n = false);
    is_null.shuffle(rng);

    for (xi, _) in x.iter_mut().zip(&is_null).filter(|(_, &null)| !null) {
        *xi += spec.alt.sample_mu(rng);
    }
    let pvalues = x.into_iter().map(normal::two_sided_pvalue).collect();
    PValueBatch::new(pvalues, is_null)
}

/// Stationary AR(1) noise: `x_1 = z_1`, `x_k = rho x_{k-1} + sqrt(1 - rho^2) z_k`.
pub fn gen_ar1<R: RngCore + ?Sized>(m: usize, rho: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_rho(rho)?;
    let innovation = (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(m);
    let mut prev = 0.0;
    for k in 0..m {
        let z = normal::sample(rng);
        let x = if k == 0 { z } else { rho * prev + innovation * z };
        out.push(x);
        prev = x;
    }
    Ok(out)
}

/// Equicorrelated blocks: `x_k = sqrt(rho) w_b + sqrt(1 - rho) z_k` with one
/// shared `w_b` per block. All `z` are drawn before the block factors.
pub fn gen_block<R: RngCore + ?Sized>(m: usize, rho: f64, block: usize, rng: &mut R) -> Result<Vec<f64>> {
    check_rho(rho)?;
    if block == 0 {
        return Err(Error::input("block size must be at least 1"));
    }
    let mut x: Vec<f64> = (0..m).map(|_| normal::sample(rng)).collect();
    let (shared, own) = (rho.sqrt(), (1.0 - rho).sqrt());
    for chunk in x.chunks_mut(block) {
        let w = normal::sample(rng);
        for xi in chunk {
            *xi = shared * w + own * *xi;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeRule {
    /// Every node holds `n` p-values.
    Uniform,
    /// Node `i` holds `round(n^{0.2 + 0.8 i / N})`.
    Power,
}

pub fn node_sizes(n: usize, nodes: usize, rule: SizeRule) -> Vec<usize> {
    match rule {
        SizeRule::Uniform => vec![n; nodes],
        SizeRule::Power => (1..=nodes)
            .map(|i| {
                let exponent = 0.2 + 0.8 * (i as f64 / nodes as f64);
                (n as f64).powf(exponent).round() as usize
            })
            .collect(),
    }
}

/// `m` i.i.d. draws from the two-group mixture `r0 U + (1 - r0) F`.
pub fn sample_mixture<R: RngCore + ?Sized>(
    m: usize,
    r0: f64,
    alt: &AlternativeModel,
    rng: &mut R,
) -> Result<PValueBatch> {
    if !(0.0..=1.0).contains(&r0) {
        return Err(Error::input(format!("null proportion must lie in [0, 1], got {r0}")));
    }
    alt.validate()?;
    let mut pvalues = Vec::with_capacity(m);
    let mut is_null = Vec::with_capacity(m);
    for _ in 0..m {
        let null = normal::open_unit(rng) < r0;
        let mut x = normal::sample(rng);
        if !null {
            x += alt.sample_mu(rng);
        }
        pvalues.push(normal::two_sided_pvalue(x));
        is_null.push(null);
    }
    PValueBatch::new(pvalues, is_null)
}

/// Assigns `m` items to nodes independently with probabilities `q` and
/// returns the per-node counts.
pub fn assign_multinomial<R: RngCore + ?Sized>(m: usize, q: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    let total: f64 = q.iter().sum();
    if q.is_empty() || q.iter().any(|&w| w < 0.0) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::input("node probabilities must be nonnegative and sum to 1"));
    }
    let cumulative: Vec<f64> = q
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let mut counts = vec![0usize; q.len()];
    for _ in 0..m {
        let u: f64 = rng.gen::<f64>() * total;
        let node = cumulative.partition_point(|&c| c <= u).min(q.len() - 1);
        counts[node] += 1;
    }
    Ok(counts)
}
