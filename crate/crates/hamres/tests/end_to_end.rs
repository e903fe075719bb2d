use hamres::digraph::verify_hamilton;
use hamres::oracle::{decide, Decision};
use hamres::par::{map_indexed, map_indexed_seq, with_jobs};
use hamres::pipeline::hamiltonize;
use hamres::process::{run_to_hitting_time, sample_gnp, ProcessSnapshot};
use hamres::profile::ParameterProfile;
use hamres::resilience::{
    audit_alpha_bound, audit_attack, bipartition_attack, remove_proportional, resilience_experiment, ResilienceConfig,
};
use hamres::Digraph;

#[test]
fn pipeline_cycle_verifies_on_dense_random_digraph() {
    let d = sample_gnp(120, 0.7, 11);
    let profile = ParameterProfile::for_digraph(&d, 0.1);
    let report = hamiltonize(&d, &profile, 5).unwrap();
    let cycle = report.cycle().expect("dense digraph should succeed within the retry cap");
    assert!(verify_hamilton(&d, cycle));
}

#[test]
fn pipeline_cycle_after_removal_verifies() {
    let d = sample_gnp(80, 0.8, 2);
    let h = remove_proportional(&d, 0.2, 2).unwrap();
    assert!(audit_alpha_bound(&d, &h, 0.2).unwrap().is_none());
    let dh = d.without_edges(&h);
    let report = hamiltonize(&dh, &ParameterProfile::for_digraph(&dh, 0.1), 0).unwrap();
    if let Some(c) = report.cycle() {
        assert!(verify_hamilton(&dh, c));
    }
}

#[test]
fn oracle_decisions_match_complete_and_empty() {
    assert_eq!(decide(&Digraph::complete(12), 1_000_000).decision, Decision::Ham);
    let empty = Digraph::from_edges(12, &[]).unwrap();
    assert_eq!(decide(&empty, 1_000_000).decision, Decision::NonHam);
}

#[test]
fn trial_results_do_not_depend_on_jobs() {
    let f = |i: usize| {
        let (_, m) = run_to_hitting_time(40, i as u64, 1);
        m
    };
    let seq = map_indexed_seq(12, f);
    assert_eq!(with_jobs(1, || map_indexed(12, f)), seq);
    assert_eq!(with_jobs(0, || map_indexed(12, f)), seq);
}

#[test]
fn resilience_experiment_is_reproducible() {
    let cfg = ResilienceConfig::new(12, 0.25, 6, 9);
    let a = with_jobs(1, || resilience_experiment(&cfg)).unwrap();
    let b = with_jobs(0, || resilience_experiment(&cfg)).unwrap();
    let rows = |r: &hamres::resilience::ResilienceReport| r.rows.iter().map(|x| x.csv()).collect::<Vec<_>>();
    assert_eq!(rows(&a), rows(&b));
    assert_eq!(a.rows.len(), 6);
    for row in &a.rows {
        assert!(row.pipeline != "ok" || row.pipeline_verified);
    }
}

#[test]
fn attack_at_hitting_time_passes_audit_when_reported() {
    let (trace, m) = run_to_hitting_time(60, 3, 1);
    let snap = ProcessSnapshot::new(&trace, m);
    if let Ok(attack) = bipartition_attack(&snap.digraph, 0.15, snap.low_threshold(), 3) {
        assert!(audit_attack(&snap.digraph, &attack, 0.15).unwrap());
    }
}
