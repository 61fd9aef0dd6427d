//! The one-shot distributed BH protocol over a star network.
//!
//! 1. Every node estimates `r0_hat_i` and sends `(m_i, r0_hat_i)` up.
//! 2. The center waits for all `N` reports, pools them into `beta_star`, and
//!    broadcasts it.
//! 3. Every node sets `alpha_i = 1 / ((1 - r0_hat_i) beta_star + r0_hat_i)`
//!    and runs BH locally.
//!
//! One frame crosses each edge in each direction per round, whatever the
//! number of p-values.

pub mod center;
pub mod codec;
pub mod messages;
pub mod node;
pub mod transport;

pub use center::{aggregate, CenterState};
pub use codec::{decode_broadcast, decode_report, encode_broadcast, encode_report};
pub use messages::{CenterBroadcast, NodeReport};
pub use node::{calibrate, NodeState};
pub use transport::{DeliveryOrder, InProcessTransport, Transport, TransportStats};

use crate::error::{Error, Result};
use crate::testing::BhResult;
use rayon::prelude::*;

/// Runs one full round and returns each node's BH result in node order.
///
/// Local estimation and local BH run in parallel across nodes; the center is
/// a barrier between them.
pub fn run_round(
    nodes: &mut [NodeState],
    center: &mut CenterState,
    transport: &mut dyn Transport,
) -> Result<Vec<BhResult>> {
    if nodes.len() != center.expected_nodes() {
        return Err(Error::protocol(format!(
            "center expects {} nodes, network has {}",
            center.expected_nodes(),
            nodes.len()
        )));
    }

    let reports: Vec<NodeReport> = nodes
        .par_iter_mut()
        .map(NodeState::make_report)
        .collect::<Result<_>>()?;
    for report in &reports {
        transport.send_to_center(report.node_id, encode_report(report))?;
    }

    for frame in transport.drain_center() {
        center.receive(decode_report(&frame)?)?;
    }
    if !center.ready() {
        let have: Vec<u32> = center.received().map(|r| r.node_id).collect();
        let missing: Vec<u32> = nodes
            .iter()
            .map(NodeState::node_id)
            .filter(|id| !have.contains(id))
            .collect();
        return Err(Error::protocol(format!("timed out waiting for reports from nodes {missing:?}")));
    }

    let frame = encode_broadcast(&center.broadcast()?);
    for node in nodes.iter() {
        transport.send_to_node(node.node_id(), frame.clone())?;
    }

    let broadcasts: Vec<CenterBroadcast> = nodes
        .iter()
        .map(|node| {
            let frame = transport
                .recv_at_node(node.node_id())
                .ok_or_else(|| Error::protocol(format!("no broadcast delivered to node {}", node.node_id())))?;
            decode_broadcast(&frame)
        })
        .collect::<Result<_>>()?;

    let results = nodes
        .par_iter_mut()
        .zip(broadcasts.par_iter())
        .map(|(node, b)| node.apply_broadcast(b).cloned())
        .collect::<Result<Vec<_>>>()?;
    center.next_round();
    Ok(results)
}
