use super::messages::{CenterBroadcast, NodeReport};
use crate::error::{Error, Result};
use crate::testing::validate_alpha;
use std::collections::BTreeMap;

/// Pools node reports into the broadcast slope.
///
/// `r0* = sum_i r0_i m_i / m` and `beta* = (1/alpha - r0*) / (1 - r0*)`.
/// Reports are summed in node-id order so the result does not depend on the
/// order they arrived in. `r0* = 1` yields the reject-nothing sentinel.
pub fn aggregate(reports: &[NodeReport], alpha: f64, round_id: u32) -> Result<CenterBroadcast> {
    validate_alpha(alpha)?;
    let mut sorted: Vec<&NodeReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.node_id);
    if let Some(w) = sorted.windows(2).find(|w| w[0].node_id == w[1].node_id) {
        return Err(Error::protocol(format!("duplicate report from node {}", w[0].node_id)));
    }
    if let Some(r) = sorted.iter().find(|r| !(0.0..=1.0).contains(&r.r0_hat)) {
        return Err(Error::protocol(format!("node {} reported r0_hat = {}", r.node_id, r.r0_hat)));
    }
    let m: u64 = sorted.iter().map(|r| r.m).sum();
    if m == 0 {
        return Err(Error::protocol("no p-values anywhere in the network"));
    }
    let total = m as f64;
    // Weights m_i/m make a lone node's estimate pass through unchanged.
    let r0_star: f64 = sorted.iter().map(|r| r.r0_hat * (r.m as f64 / total)).sum();
    if r0_star >= 1.0 {
        return Ok(CenterBroadcast::reject_nothing(round_id));
    }
    let beta_star = ((1.0 / alpha - r0_star) / (1.0 - r0_star)).max(1.0);
    Ok(CenterBroadcast { round_id, beta_star })
}

/// The hub of the star. Collects exactly `expected_nodes` distinct reports
/// before it will aggregate.
#[derive(Debug, Clone)]
pub struct CenterState {
    expected_nodes: usize,
    alpha: f64,
    round_id: u32,
    received: BTreeMap<u32, NodeReport>,
}

impl CenterState {
    pub fn new(expected_nodes: usize, alpha: f64) -> Result<Self> {
        validate_alpha(alpha)?;
        if expected_nodes == 0 {
            return Err(Error::config("a star network needs at least one leaf"));
        }
        Ok(Self {
            expected_nodes,
            alpha,
            round_id: 1,
            received: BTreeMap::new(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn expected_nodes(&self) -> usize {
        self.expected_nodes
    }

    pub fn round_id(&self) -> u32 {
        self.round_id
    }

    pub fn received(&self) -> impl Iterator<Item = &NodeReport> {
        self.received.values()
    }

    pub fn receive(&mut self, report: NodeReport) -> Result<()> {
        if self.received.contains_key(&report.node_id) {
            return Err(Error::protocol(format!("duplicate report from node {}", report.node_id)));
        }
        if self.received.len() == self.expected_nodes {
            return Err(Error::protocol(format!(
                "unexpected report from node {}: all {} reports already in",
                report.node_id, self.expected_nodes
            )));
        }
        self.received.insert(report.node_id, report);
        Ok(())
    }

    pub fn ready(&self) -> bool {
        self.received.len() == self.expected_nodes
    }

    /// Aggregates once every report is in.
    pub fn broadcast(&self) -> Result<CenterBroadcast> {
        if !self.ready() {
            return Err(Error::protocol(format!(
                "timed out with {} of {} reports",
                self.received.len(),
                self.expected_nodes
            )));
        }
        let reports: Vec<NodeReport> = self.received.values().copied().collect();
        aggregate(&reports, self.alpha, self.round_id)
    }

    /// Clears received reports and advances the round counter.
    pub fn next_round(&mut self) {
        self.received.clear();
        self.round_id = self.round_id.wrapping_add(1);
    }
}
