use distbh_core::datagen::{gen_node_batch, AlternativeModel, Dependence, NodeGenSpec};
use distbh_core::estimators::{Estimator, SpacingConfig, StoreyConfig};
use distbh_core::protocol::codec::{BROADCAST_FRAME_LEN, REPORT_FRAME_LEN};
use distbh_core::protocol::{
    aggregate, calibrate, run_round, CenterState, DeliveryOrder, InProcessTransport, NodeState, Transport,
};
use distbh_core::seed::SeedPolicy;
use distbh_core::testing::{bh_procedure, PValueBatch};

fn network(sizes: &[usize], est: Estimator, seed: u64) -> Vec<NodeState> {
    let alt = AlternativeModel::symmetric(3.0).unwrap();
    let seeds = SeedPolicy::new(seed);
    sizes
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let spec = NodeGenSpec {
                m,
                m1: m * (i + 1) / (4 * sizes.len()),
                alt,
                dependence: Dependence::Independent,
            };
            let id = i as u32 + 1;
            NodeState::new(id, gen_node_batch(&spec, &mut seeds.stream(0, 0, id)).unwrap(), est).unwrap()
        })
        .collect()
}

fn round(nodes: &mut [NodeState], order: DeliveryOrder) -> (Vec<Vec<usize>>, u64, u64) {
    let mut center = CenterState::new(nodes.len(), 0.2).unwrap();
    let mut t = InProcessTransport::new(order);
    let res = run_round(nodes, &mut center, &mut t).unwrap();
    let s = t.stats();
    (res.into_iter().map(|r| r.rejected).collect(), s.messages(), s.bytes())
}

#[test]
fn delivery_order_does_not_matter() {
    let sizes = [300, 50, 1200, 7, 0, 640];
    let est = Estimator::Storey(StoreyConfig::default());
    let base = round(&mut network(&sizes, est, 3), DeliveryOrder::Fifo);
    for order in [DeliveryOrder::Reverse, DeliveryOrder::Shuffled(1), DeliveryOrder::Shuffled(99)] {
        assert_eq!(round(&mut network(&sizes, est, 3), order), base);
    }
}

#[test]
fn nodes_run_bh_at_their_calibrated_level() {
    let sizes = [500, 2000, 800];
    let est = Estimator::Spacing(SpacingConfig::default());
    let mut nodes = network(&sizes, est, 8);
    let (rejected, _, _) = round(&mut nodes, DeliveryOrder::Fifo);
    let reports: Vec<_> = nodes
        .iter()
        .map(|n| distbh_core::protocol::NodeReport {
            node_id: n.node_id(),
            m: n.batch().len() as u64,
            r0_hat: n.r0_hat().unwrap(),
        })
        .collect();
    let b = aggregate(&reports, 0.2, 1).unwrap();
    for (node, rej) in nodes.iter().zip(&rejected) {
        let a = calibrate(&b, node.r0_hat().unwrap()).unwrap();
        assert_eq!(node.alpha_i(), Some(a));
        assert_eq!(&bh_procedure(node.batch().pvalues(), a).unwrap().rejected, rej);
    }
}

#[test]
fn traffic_is_two_frames_per_node() {
    for n in [1usize, 2, 7, 50] {
        for per in [0usize, 1, 100, 5000] {
            let sizes: Vec<usize> = (0..n).map(|i| if i == 0 { per.max(1) } else { per }).collect();
            let (_, msgs, bytes) = round(
                &mut network(&sizes, Estimator::default(), 1),
                DeliveryOrder::Shuffled(n as u64),
            );
            assert_eq!(msgs, 2 * n as u64);
            assert_eq!(bytes, (n * (REPORT_FRAME_LEN + BROADCAST_FRAME_LEN)) as u64);
        }
    }
}

#[test]
fn consecutive_rounds_advance_round_id() {
    let mut center = CenterState::new(1, 0.1).unwrap();
    let mut t = InProcessTransport::default();
    for expected in 1..=3u32 {
        assert_eq!(center.round_id(), expected);
        let mut nodes = vec![NodeState::new(1, PValueBatch::all_null(vec![0.01, 0.5]).unwrap(), Estimator::default()).unwrap()];
        run_round(&mut nodes, &mut center, &mut t).unwrap();
    }
    assert_eq!(t.stats().messages(), 6);
}
