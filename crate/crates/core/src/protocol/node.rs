use super::messages::{CenterBroadcast, NodeReport};
use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::testing::{bh_procedure, BhResult, PValueBatch};

/// Local test size from the broadcast slope:
/// `alpha_i = 1 / ((1 - r0_hat_i) beta_star + r0_hat_i)`.
///
/// The reject-nothing sentinel maps to 0.
pub fn calibrate(broadcast: &CenterBroadcast, r0_hat_i: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r0_hat_i) {
        return Err(Error::input(format!("r0_hat must lie in [0, 1], got {r0_hat_i}")));
    }
    if broadcast.rejects_nothing() {
        return Ok(0.0);
    }
    let beta = broadcast.beta_star;
    if beta.is_nan() || beta < 1.0 {
        return Err(Error::input(format!("beta_star must be >= 1, got {beta}")));
    }
    Ok((1.0 / ((1.0 - r0_hat_i) * beta + r0_hat_i)).min(1.0))
}

/// One leaf of the star network.
#[derive(Debug, Clone)]
pub struct NodeState {
    node_id: u32,
    batch: PValueBatch,
    estimator: Estimator,
    r0_hat: Option<f64>,
    alpha_i: Option<f64>,
    result: Option<BhResult>,
}

impl NodeState {
    pub fn new(node_id: u32, batch: PValueBatch, estimator: Estimator) -> Result<Self> {
        if node_id == 0 {
            return Err(Error::input("node ids start at 1"));
        }
        Ok(Self {
            node_id,
            batch,
            estimator,
            r0_hat: None,
            alpha_i: None,
            result: None,
        })
    }

    pub fn node_id(&self) -> u32 {
        self.node_id
    }

    pub fn batch(&self) -> &PValueBatch {
        &self.batch
    }

    pub fn r0_hat(&self) -> Option<f64> {
        self.r0_hat
    }

    pub fn alpha_i(&self) -> Option<f64> {
        self.alpha_i
    }

    pub fn result(&self) -> Option<&BhResult> {
        self.result.as_ref()
    }

    /// Step 1: estimate the local null share and summarize it for the
    /// center. An empty node reports `r0_hat = 1` with zero weight.
    pub fn make_report(&mut self) -> Result<NodeReport> {
        let r0_hat = if self.batch.is_empty() {
            1.0
        } else {
            self.estimator.estimate(self.batch.pvalues())?
        };
        self.r0_hat = Some(r0_hat);
        Ok(NodeReport {
            node_id: self.node_id,
            m: self.batch.len() as u64,
            r0_hat,
        })
    }

    /// Step 3: calibrate the local level and run BH on the local p-values.
    pub fn apply_broadcast(&mut self, broadcast: &CenterBroadcast) -> Result<&BhResult> {
        let r0_hat = self
            .r0_hat
            .ok_or_else(|| Error::protocol(format!("node {} received a broadcast before reporting", self.node_id)))?;
        let alpha_i = calibrate(broadcast, r0_hat)?;
        self.alpha_i = Some(alpha_i);
        let result = if alpha_i > 0.0 {
            bh_procedure(self.batch.pvalues(), alpha_i)?
        } else {
            BhResult::empty()
        };
        Ok(self.result.insert(result))
    }
}
