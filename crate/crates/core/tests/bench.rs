use jacette::bench::{
    bench_config_sweep, bench_fast_edge, fetch_counter_sweep, synthetic_actions, Mix, RequestKind, WorkloadSpec,
};
use jacette::jsorc::{ComponentConfig, JsorcError};

fn walk_chain(days: usize, fanout: usize, requests: u64) -> WorkloadSpec {
    WorkloadSpec {
        mix: Mix::only(RequestKind::Walk),
        clients: 1,
        graph_size: days,
        chain_fanout: fanout,
        requests_per_client: Some(requests),
        ..WorkloadSpec::default()
    }
}

#[test]
fn fused_walk_fetches_only_nodes() {
    let r = bench_fast_edge(&walk_chain(1000, 0, 2), &[64], 10_000).unwrap();
    let off = r.row(0, RequestKind::Walk).unwrap();
    let on = r.row(64, RequestKind::Walk).unwrap();
    // unfused: every node and every edge; fused: nodes only
    assert_eq!(off.objects_fetched, 2 * (1000 + 999));
    assert_eq!(on.objects_fetched, 2 * 1000);
}

#[test]
fn leaves_count_in_the_analytic_total() {
    let (days, fanout) = (30, 3);
    let r = bench_fast_edge(&walk_chain(days, fanout, 1), &[64], 10_000).unwrap();
    let nodes = days * (1 + fanout);
    let edges = (days - 1) + days * fanout;
    assert_eq!(r.row(0, RequestKind::Walk).unwrap().objects_fetched as usize, nodes + edges);
    assert_eq!(r.row(64, RequestKind::Walk).unwrap().objects_fetched as usize, nodes);
}

#[test]
fn creates_write_fewer_records_when_fused() {
    let spec = WorkloadSpec {
        mix: Mix::only(RequestKind::Create),
        clients: 2,
        graph_size: 3,
        chain_fanout: 2,
        requests_per_client: Some(5),
        ..WorkloadSpec::default()
    };
    let r = bench_fast_edge(&spec, &[64], 10_000).unwrap();
    let off = r.row(0, RequestKind::Create).unwrap();
    let on = r.row(64, RequestKind::Create).unwrap();
    assert_eq!(off.requests, 10);
    assert!(on.store_writes < off.store_writes, "{} vs {}", on.store_writes, off.store_writes);
}

#[test]
fn seeded_mixed_runs_reproduce_counters() {
    let spec = WorkloadSpec {
        clients: 3,
        graph_size: 20,
        requests_per_client: Some(15),
        ..WorkloadSpec::default()
    };
    let a = bench_fast_edge(&spec, &[0], 64).unwrap();
    let b = bench_fast_edge(&spec, &[0], 64).unwrap();
    let counts = |r: &jacette::bench::FastEdgeResult| -> Vec<(String, u64, u64)> {
        r.rows.iter().map(|x| (x.kind.clone(), x.requests as u64, x.objects_fetched)).collect()
    };
    assert_eq!(counts(&a), counts(&b));
    assert_eq!(spec.request_plan(1, 15), spec.request_plan(1, 15));
}

#[test]
fn counter_sweep_parallel_matches_sequential() {
    let cases: Vec<(WorkloadSpec, usize)> = [0, 64]
        .iter()
        .flat_map(|t| [10, 40].map(|n| (walk_chain(n, 1, 1), *t)))
        .collect();
    let par = fetch_counter_sweep(cases.clone(), true).unwrap();
    let seq = fetch_counter_sweep(cases, false).unwrap();
    assert_eq!(par, seq);
    assert_eq!(seq, vec![10 * 2 + 9 + 10, 40 * 2 + 39 + 40, 20, 80]);
}

#[test]
fn sweep_covers_every_mask_and_groups_combinatorially() {
    let spec = WorkloadSpec {
        mix: Mix::only(RequestKind::ActionHeavy),
        clients: 1,
        graph_size: 1,
        chain_fanout: 0,
        requests_per_client: Some(2),
        ..WorkloadSpec::default()
    };
    let actions = synthetic_actions(0.0, &[0.0, 0.0, 0.0], 10);
    let r = bench_config_sweep(&spec, &actions, None).unwrap();
    assert_eq!(r.rows.len(), 8);
    let sizes: Vec<usize> = r.groups.iter().map(|g| g.configs).collect();
    assert_eq!(sizes, vec![1, 3, 3, 1]);
    assert_eq!(r.row(ComponentConfig(0b101)).unwrap().local_count, Some(2));
    assert!(matches!(
        bench_config_sweep(&spec, &actions, Some(15)),
        Err(jacette::bench::BenchError::Jsorc(JsorcError::NoFeasibleConfig(15)))
    ));
}
