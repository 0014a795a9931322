mod common;

use std::path::Path;
use std::time::Duration;

use common::{bits, instance, pred_diff, support};
use pgpr::runtime::{
    run_icf_factor, run_picf, run_ppic, run_ppitc, Cluster, Collective, Command, MessageKind, PartitionMode, Reply,
    RuntimeError, ThreadTransport, Transport,
};
use pgpr_core::icf::{
    icf_factor_distributed, icf_factor_serial, icf_global_summary, icf_local_summary, icf_predictive_component,
    picf_predict, stack_factor_blocks,
};
use pgpr_core::partition::{partition_clustered, partition_even};
use pgpr_core::pitc::{centralized_pic, global_summary, local_summary, ppic_predict_block, ppitc_predict_block};
use pgpr_core::{fgp_predict, PredictiveDistribution};

fn exe() -> &'static Path {
    Path::new(env!("CARGO_BIN_EXE_pgpr"))
}

#[test]
fn ppitc_is_bitwise_sequential() {
    let inst = instance(1, 2, 200, 40);
    let s = support(1, 2, 24);
    for m in [1, 3, 4] {
        let out = run_ppitc(&mut Cluster::threads(m).unwrap(), &inst.train, &inst.query, &s, &inst.h, &PartitionMode::Even, false).unwrap();

        let part = partition_even(&inst.train, &inst.query, m).unwrap();
        let locals: Vec<_> = part.blocks().iter().map(|b| local_summary(b, &s, &inst.h).unwrap()).collect();
        let global = global_summary(&locals, &s, &inst.h).unwrap();
        let parts: Vec<_> = part
            .query_blocks()
            .iter()
            .map(|q| ppitc_predict_block(q, &s, &global, 0.3, &inst.h, false).unwrap())
            .collect();
        let want = if m == 1 {
            parts[0].clone()
        } else {
            PredictiveDistribution::assemble(&parts, part.query_index(), inst.query.len()).unwrap()
        };
        assert_eq!(bits(&out.prediction), bits(&want), "M={m}");
    }
}

#[test]
fn ppic_is_bitwise_sequential_with_clustering() {
    let inst = instance(2, 2, 180, 30);
    let s = support(2, 2, 16);
    let m = 4;
    let mode = PartitionMode::Clustered { seed: 5 };
    let out = run_ppic(&mut Cluster::threads(m).unwrap(), &inst.train, &inst.query, &s, &inst.h, &mode, false).unwrap();

    let part = partition_clustered(&inst.train, &inst.query, m, 5).unwrap();
    assert_eq!(out.partition, part);
    let locals: Vec<_> = part.blocks().iter().map(|b| local_summary(b, &s, &inst.h).unwrap()).collect();
    let global = global_summary(&locals, &s, &inst.h).unwrap();
    let parts: Vec<_> = part
        .blocks()
        .iter()
        .zip(part.query_blocks())
        .zip(&locals)
        .map(|((b, q), l)| ppic_predict_block(b, q, &s, l, &global, &inst.h, false).unwrap())
        .collect();
    let want = PredictiveDistribution::assemble(&parts, part.query_index(), inst.query.len()).unwrap();
    assert_eq!(bits(&out.prediction), bits(&want));

    let central = centralized_pic(&inst.train, &part, &inst.query, &s, &inst.h, false).unwrap();
    assert!(pred_diff(&out.prediction, &central) <= 1e-8);
}

#[test]
fn picf_is_bitwise_sequential() {
    let inst = instance(3, 2, 150, 25);
    let (m, r) = (4, 30);
    let out = run_picf(&mut Cluster::threads(m).unwrap(), &inst.train, &inst.query, r, &inst.h, &PartitionMode::Even, false, false).unwrap();

    let part = partition_even(&inst.train, &inst.query, m).unwrap();
    let factor = icf_factor_distributed(&part, r, &inst.h).unwrap();
    let locals: Vec<_> = part
        .blocks()
        .iter()
        .zip(&factor.blocks)
        .map(|(b, f)| icf_local_summary(b, f, &inst.query, &inst.h).unwrap())
        .collect();
    let global = icf_global_summary(&locals, &inst.h).unwrap();
    let comps: Vec<_> = part
        .blocks()
        .iter()
        .zip(&locals)
        .map(|(b, l)| icf_predictive_component(b, l, &global, &inst.query, &inst.h, false).unwrap())
        .collect();
    let want = picf_predict(&comps, &inst.query, 0.3, &inst.h, false).unwrap();
    assert_eq!(bits(&out.prediction), bits(&want));
}

#[test]
fn single_machine_ppic_is_fgp() {
    let inst = instance(4, 2, 128, 32);
    let s = support(4, 2, 16);
    let out = run_ppic(&mut Cluster::threads(1).unwrap(), &inst.train, &inst.query, &s, &inst.h, &PartitionMode::Even, false).unwrap();
    let exact = fgp_predict(&inst.train, &inst.query, &inst.h, false).unwrap();
    assert!(pred_diff(&out.prediction, &exact) <= 1e-8);
    assert_eq!(out.ledger.collectives(Collective::Gather, MessageKind::PitcLocalSummary), 1);
    assert_eq!(out.ledger.collectives(Collective::Broadcast, MessageKind::GlobalSummaryBroadcast), 1);
}

#[test]
fn ledger_tuple_sizes() {
    let inst = instance(5, 2, 160, 20);
    let k = 12;
    let s = support(5, 2, k);
    let out = run_ppitc(&mut Cluster::threads(4).unwrap(), &inst.train, &inst.query, &s, &inst.h, &PartitionMode::Even, false).unwrap();
    let l = &out.ledger;
    assert_eq!(l.messages(MessageKind::PitcLocalSummary), 4);
    assert!(l.every_message_carries(MessageKind::PitcLocalSummary, k + k * k));
    assert!(l.every_message_carries(MessageKind::GlobalSummaryBroadcast, k + k * k));
    assert_eq!(l.scalars(MessageKind::PredictiveComponent), 2 * inst.query.len());

    let r = 20;
    let out = run_picf(&mut Cluster::threads(4).unwrap(), &inst.train, &inst.query, r, &inst.h, &PartitionMode::Even, false, false).unwrap();
    let l = &out.ledger;
    let u = inst.query.len();
    assert!(l.every_message_carries(MessageKind::IcfLocalSummary, r + r * u + r * r));
    assert_eq!(l.total_collectives(Collective::Reduction), r);
    assert_eq!(l.collectives(Collective::Broadcast, MessageKind::IcfPivotRow), r);
    // Step t ships the d coordinates, t factor entries and the pivot.
    let rows = l.tally(MessageKind::IcfPivotRow);
    assert_eq!((rows.min_scalars, rows.max_scalars), (2 + 1, 2 + (r - 1) + 1));
    assert_eq!(rows.scalars, r * 3 + r * (r - 1) / 2);
    assert!(l.every_message_carries(MessageKind::PredictiveComponent, 2 * u));
}

#[test]
fn clustering_exchange_is_counted() {
    let (d, m) = (3, 5);
    let inst = instance(6, d, 150, 30);
    let s = support(6, d, 10);
    let out = run_ppic(&mut Cluster::threads(m).unwrap(), &inst.train, &inst.query, &s, &inst.h, &PartitionMode::Clustered { seed: 1 }, false).unwrap();
    let l = &out.ledger;
    assert_eq!(l.messages(MessageKind::ClusterCenter), m);
    assert!(l.every_message_carries(MessageKind::ClusterCenter, d));
    assert!(l.every_message_carries(MessageKind::ClusterCenters, m * d));

    let even = partition_even(&inst.train, &inst.query, m).unwrap();
    let owner = |index: &[Vec<usize>], n: usize| {
        let mut o = vec![0; n];
        for (b, idx) in index.iter().enumerate() {
            for &i in idx {
                o[i] = b;
            }
        }
        o
    };
    let moved = |a: Vec<usize>, b: Vec<usize>| a.iter().zip(&b).filter(|(x, y)| x != y).count();
    let train_moved = moved(owner(even.train_index(), 150), owner(out.partition.train_index(), 150));
    let query_moved = moved(owner(even.query_index(), 30), owner(out.partition.query_index(), 30));
    assert_eq!(l.messages(MessageKind::ReassignedPoint), train_moved + query_moved);
    assert_eq!(l.scalars(MessageKind::ReassignedPoint), train_moved * (d + 1) + query_moved * d);
}

#[test]
fn completion_order_does_not_matter() {
    let inst = instance(7, 2, 120, 24);
    let s = support(7, 2, 12);
    let delays = |v: [u64; 4]| Cluster::from_transport(Box::new(ThreadTransport::with_delays(v.iter().map(|&ms| Duration::from_millis(ms)).collect())));
    let mode = PartitionMode::Clustered { seed: 3 };
    let a = run_ppic(&mut delays([0, 0, 0, 0]), &inst.train, &inst.query, &s, &inst.h, &mode, false).unwrap();
    let b = run_ppic(&mut delays([6, 3, 0, 1]), &inst.train, &inst.query, &s, &inst.h, &mode, false).unwrap();
    assert_eq!(bits(&a.prediction), bits(&b.prediction));
    assert_eq!(a.ledger, b.ledger);

    let a = run_picf(&mut delays([0, 2, 0, 1]), &inst.train, &inst.query, 16, &inst.h, &PartitionMode::Even, true, false).unwrap();
    let b = run_picf(&mut delays([1, 0, 2, 0]), &inst.train, &inst.query, 16, &inst.h, &PartitionMode::Even, true, false).unwrap();
    assert_eq!(bits(&a.prediction), bits(&b.prediction));
    assert_eq!(a.ledger, b.ledger);
}

#[test]
fn process_transport_matches_threads() {
    let inst = instance(8, 2, 100, 20);
    let s = support(8, 2, 10);
    let m = 3;
    let mode = PartitionMode::Clustered { seed: 2 };
    let t = run_ppic(&mut Cluster::threads(m).unwrap(), &inst.train, &inst.query, &s, &inst.h, &mode, false).unwrap();
    let p = run_ppic(&mut Cluster::processes(m, exe()).unwrap(), &inst.train, &inst.query, &s, &inst.h, &mode, false).unwrap();
    assert_eq!(bits(&t.prediction), bits(&p.prediction));
    assert_eq!(t.ledger, p.ledger);

    let t = run_picf(&mut Cluster::threads(m).unwrap(), &inst.train, &inst.query, 12, &inst.h, &mode, true, false).unwrap();
    let p = run_picf(&mut Cluster::processes(m, exe()).unwrap(), &inst.train, &inst.query, 12, &inst.h, &mode, true, false).unwrap();
    assert_eq!(bits(&t.prediction), bits(&p.prediction));
    assert_eq!(t.ledger, p.ledger);
}

#[test]
fn repeated_runs_are_identical() {
    let inst = instance(9, 2, 90, 15);
    let s = support(9, 2, 8);
    let mode = PartitionMode::Clustered { seed: 9 };
    let mut c = Cluster::threads(3).unwrap();
    let a = run_ppic(&mut c, &inst.train, &inst.query, &s, &inst.h, &mode, true).unwrap();
    let b = run_ppic(&mut c, &inst.train, &inst.query, &s, &inst.h, &mode, true).unwrap();
    assert_eq!(bits(&a.prediction), bits(&b.prediction));
    assert_eq!(a.ledger, b.ledger);
}

#[test]
fn partitioned_query_path_matches() {
    let inst = instance(10, 2, 140, 37);
    for m in [1, 2, 5] {
        let mut c = Cluster::threads(m).unwrap();
        let a = run_picf(&mut c, &inst.train, &inst.query, 24, &inst.h, &PartitionMode::Even, false, false).unwrap();
        let b = run_picf(&mut c, &inst.train, &inst.query, 24, &inst.h, &PartitionMode::Even, true, false).unwrap();
        assert!(pred_diff(&a.prediction, &b.prediction) <= 1e-12);
        assert_eq!(b.ledger.messages(MessageKind::IcfSummarySlice), m * m);
        assert_eq!(b.ledger.messages(MessageKind::IcfLocalSummary), 0);
    }
}

#[test]
fn runtime_factor_matches_serial() {
    let inst = instance(11, 2, 96, 0);
    for m in [1, 2, 4, 8] {
        let (blocks, part, ledger) = run_icf_factor(&mut Cluster::threads(m).unwrap(), &inst.train, 40, &inst.h, &PartitionMode::Even).unwrap();
        let stacked = stack_factor_blocks(&blocks, &part).unwrap();
        let serial = icf_factor_serial(inst.train.inputs(), 40, &inst.h).unwrap();
        assert_eq!(stacked.entries, serial.entries, "M={m}");
        assert_eq!(stacked.pivot_ids, serial.pivot_ids);
        assert_eq!(ledger.total_collectives(Collective::Reduction), 40);
    }
}

#[test]
fn full_covariance_is_returned_for_one_machine() {
    let inst = instance(12, 1, 40, 6);
    let s = support(12, 1, 5);
    let out = run_ppic(&mut Cluster::threads(1).unwrap(), &inst.train, &inst.query, &s, &inst.h, &PartitionMode::Even, true).unwrap();
    let cov = out.prediction.covariance.expect("full covariance requested");
    assert_eq!(cov.shape(), (6, 6));
    assert_eq!(cov.diagonal(), out.prediction.variances);
}

/// Forwards to threads but reports machine 2 as failed on the summary step.
struct Faulty(ThreadTransport);

impl Transport for Faulty {
    fn machines(&self) -> usize {
        self.0.machines()
    }

    fn name(&self) -> &'static str {
        "faulty"
    }

    fn exchange(&mut self, cmds: Vec<Option<Command>>) -> Result<Vec<Option<Reply>>, RuntimeError> {
        let summary = cmds.iter().any(|c| matches!(c, Some(Command::PitcSummary)));
        let replies = self.0.exchange(cmds)?;
        if summary {
            return Err(RuntimeError::WorkerFailed {
                index: 2,
                message: "injected".into(),
            });
        }
        Ok(replies)
    }
}

#[test]
fn worker_failure_aborts_with_index() {
    let inst = instance(13, 2, 60, 10);
    let s = support(13, 2, 6);
    let mut c = Cluster::from_transport(Box::new(Faulty(ThreadTransport::new(4))));
    let err = run_ppitc(&mut c, &inst.train, &inst.query, &s, &inst.h, &PartitionMode::Even, false).unwrap_err();
    assert!(matches!(err, RuntimeError::WorkerFailed { index: 2, .. }), "{err}");
}

#[test]
fn zero_machines_rejected() {
    assert!(Cluster::threads(0).is_err());
}
