//! Quick invariant suite behind `hamres selftest`.

use hamres::digraph::{merge, verify_hamilton};
use hamres::division::{divide, verify_f1_with, DivisionMode, DivisionSpec};
use hamres::matching::{hall_matching, BipartiteView};
use hamres::oracle::{backtrack, held_karp, Decision};
use hamres::pipeline::hamiltonize;
use hamres::process::{run_to_hitting_time, sample_gnp};
use hamres::profile::ParameterProfile;
use hamres::resilience::{audit_alpha_bound, audit_attack, bipartition_attack, remove_proportional};
use hamres::{Digraph, Sign};

type Check = fn() -> Result<(), String>;

fn oracles_agree() -> Result<(), String> {
    for seed in 0..60 {
        let d = sample_gnp(9, 0.3, seed);
        let a = held_karp(&d).map_err(|e| e.to_string())?;
        let b = backtrack(&d, 10_000_000);
        if b.decision != Decision::Timeout && a.decision != b.decision {
            return Err(format!("seed {seed}: {:?} vs {:?}", a.decision, b.decision));
        }
        for c in [&a.cycle, &b.cycle].into_iter().flatten() {
            if !verify_hamilton(&d, c) {
                return Err(format!("seed {seed}: returned cycle fails verification"));
            }
        }
    }
    Ok(())
}

fn merge_degrees() -> Result<(), String> {
    for seed in 0..20 {
        let d = sample_gnp(10, 0.5, seed);
        let c = merge(&d, 0, 1).map_err(|e| e.to_string())?;
        let z = c.digraph.n() - 1;
        let want_in = d.in_nbrs(0).iter().filter(|&&w| w != 1).count();
        let want_out = d.out_nbrs(1).iter().filter(|&&w| w != 0).count();
        if c.digraph.degree(z, Sign::In) != want_in || c.digraph.degree(z, Sign::Out) != want_out {
            return Err(format!("seed {seed}: merged degrees differ"));
        }
    }
    Ok(())
}

fn division_f1() -> Result<(), String> {
    for seed in 0..10 {
        let d = sample_gnp(40, 0.6, 100 + seed);
        let spec = DivisionSpec::fitted(&d, (0..40).collect(), vec![9; 4], 2, 0.1);
        let div = divide(&d, &spec, DivisionMode::Desk, seed, 10_000).map_err(|e| e.to_string())?;
        if let Some(bad) = verify_f1_with(&d, &spec, &div.parts, DivisionMode::Desk) {
            return Err(format!("seed {seed}: {bad:?}"));
        }
    }
    Ok(())
}

fn hall_on_complete() -> Result<(), String> {
    let d = Digraph::complete(8);
    let m = hall_matching(&BipartiteView::forward(&d, &[0, 1, 2, 3], &[4, 5, 6, 7])).map_err(|h| format!("{h:?}"))?;
    if m.len() == 4 {
        Ok(())
    } else {
        Err(format!("matching of size {}", m.len()))
    }
}

fn pipeline_complete() -> Result<(), String> {
    let d = Digraph::complete(60);
    let report = hamiltonize(&d, &ParameterProfile::for_digraph(&d, 0.1), 0).map_err(|e| e.to_string())?;
    match report.cycle() {
        Some(c) if verify_hamilton(&d, c) => Ok(()),
        Some(_) => Err("cycle fails verification".into()),
        None => Err(format!("no success: {:?}", report.failures)),
    }
}

fn removal_bound() -> Result<(), String> {
    let d = sample_gnp(60, 0.5, 3);
    let h = remove_proportional(&d, 0.3, 3).map_err(|e| e.to_string())?;
    match audit_alpha_bound(&d, &h, 0.3).map_err(|e| e.to_string())? {
        None => Ok(()),
        Some(v) => Err(format!("{v:?}")),
    }
}

fn attack_complete() -> Result<(), String> {
    let d = Digraph::complete(20);
    let a = bipartition_attack(&d, 0.2, 0.0, 1).map_err(|e| e.to_string())?;
    if audit_attack(&d, &a, 0.2).map_err(|e| e.to_string())? {
        Ok(())
    } else {
        Err("audit rejected the split".into())
    }
}

fn hitting_time_minimal() -> Result<(), String> {
    for seed in 0..20 {
        let (trace, m) = run_to_hitting_time(30, seed, 1);
        if trace.digraph_at(m).min_semidegree() < 1 || trace.digraph_at(m - 1).min_semidegree() >= 1 {
            return Err(format!("seed {seed}: M* = {m} is not the hitting time"));
        }
    }
    Ok(())
}

const CHECKS: [(&str, Check); 8] = [
    ("oracle-agreement", oracles_agree),
    ("merge-degrees", merge_degrees),
    ("division-f1", division_f1),
    ("hall-complete", hall_on_complete),
    ("pipeline-complete-60", pipeline_complete),
    ("removal-bound", removal_bound),
    ("attack-complete-20", attack_complete),
    ("hitting-time-minimal", hitting_time_minimal),
];

/// Report text and number of failed checks.
pub fn run() -> (String, usize) {
    let mut text = String::new();
    let mut failed = 0;
    for (name, check) in CHECKS {
        match check() {
            Ok(()) => text.push_str(&format!("PASS {name}\n")),
            Err(e) => {
                failed += 1;
                text.push_str(&format!("FAIL {name}: {e}\n"));
            }
        }
    }
    (text, failed)
}
