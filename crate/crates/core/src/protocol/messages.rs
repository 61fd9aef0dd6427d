/// Uplink message: local p-value count and null-proportion estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeReport {
    pub node_id: u32,
    pub m: u64,
    pub r0_hat: f64,
}

/// Downlink message: the global slope. `+inf` tells every node to reject
/// nothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterBroadcast {
    pub round_id: u32,
    pub beta_star: f64,
}

impl CenterBroadcast {
    pub fn reject_nothing(round_id: u32) -> Self {
        Self {
            round_id,
            beta_star: f64::INFINITY,
        }
    }

    pub fn rejects_nothing(&self) -> bool {
        self.beta_star == f64::INFINITY
    }
}
