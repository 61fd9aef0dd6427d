//! In-process message transport for the star network.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, VecDeque};

/// Counts of frames and bytes that crossed the star edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransportStats {
    pub messages_up: u64,
    pub messages_down: u64,
    pub bytes_up: u64,
    pub bytes_down: u64,
}

impl TransportStats {
    pub fn messages(&self) -> u64 {
        self.messages_up + self.messages_down
    }

    pub fn bytes(&self) -> u64 {
        self.bytes_up + self.bytes_down
    }
}

/// Moves encoded frames between the leaves and the center.
pub trait Transport {
    fn send_to_center(&mut self, from: u32, frame: Vec<u8>) -> Result<()>;

    /// Hands every queued uplink frame to the center.
    fn drain_center(&mut self) -> Vec<Vec<u8>>;

    fn send_to_node(&mut self, to: u32, frame: Vec<u8>) -> Result<()>;

    fn recv_at_node(&mut self, node: u32) -> Option<Vec<u8>>;

    fn stats(&self) -> TransportStats;
}

/// Order in which queued reports reach the center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeliveryOrder {
    #[default]
    Fifo,
    Reverse,
    /// Seeded permutation, reproducible for a given seed.
    Shuffled(u64),
}

/// Reliable, deterministic in-memory transport with traffic counters.
///
/// `drop_reports_from` discards uplink frames from one node; it exists to
/// exercise the center's timeout path.
#[derive(Debug, Default)]
pub struct InProcessTransport {
    order: DeliveryOrder,
    drop_reports_from: Option<u32>,
    uplink: Vec<(u32, Vec<u8>)>,
    downlink: BTreeMap<u32, VecDeque<Vec<u8>>>,
    stats: TransportStats,
}

impl InProcessTransport {
    pub fn new(order: DeliveryOrder) -> Self {
        Self {
            order,
            ..Self::default()
        }
    }

    pub fn lossy(order: DeliveryOrder, drop_reports_from: u32) -> Self {
        Self {
            order,
            drop_reports_from: Some(drop_reports_from),
            ..Self::default()
        }
    }

    pub fn reset_stats(&mut self) {
        self.stats = TransportStats::default();
    }
}

impl Transport for InProcessTransport {
    fn send_to_center(&mut self, from: u32, frame: Vec<u8>) -> Result<()> {
        self.stats.messages_up += 1;
        self.stats.bytes_up += frame.len() as u64;
        if self.drop_reports_from != Some(from) {
            self.uplink.push((from, frame));
        }
        Ok(())
    }

    fn drain_center(&mut self) -> Vec<Vec<u8>> {
        let mut queued = std::mem::take(&mut self.uplink);
        match self.order {
            DeliveryOrder::Fifo => {}
            DeliveryOrder::Reverse => queued.reverse(),
            DeliveryOrder::Shuffled(seed) => queued.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
        }
        queued.into_iter().map(|(_, f)| f).collect()
    }

    fn send_to_node(&mut self, to: u32, frame: Vec<u8>) -> Result<()> {
        if to == 0 {
            return Err(Error::protocol("node ids start at 1"));
        }
        self.stats.messages_down += 1;
        self.stats.bytes_down += frame.len() as u64;
        self.downlink.entry(to).or_default().push_back(frame);
        Ok(())
    }

    fn recv_at_node(&mut self, node: u32) -> Option<Vec<u8>> {
        self.downlink.get_mut(&node)?.pop_front()
    }

    fn stats(&self) -> TransportStats {
        self.stats
    }
}
