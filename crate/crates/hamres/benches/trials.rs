use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hamres::oracle::held_karp;
use hamres::par::{map_indexed, map_indexed_seq};
use hamres::process::{run_to_hitting_time, sample_gnp, ProcessSnapshot};
use hamres::resilience::bipartition_attack;
use hamres::rng::derive;

fn oracle_trial(i: usize) -> bool {
    let d = sample_gnp(13, 0.3, derive(1, i as u64));
    held_karp(&d).map(|r| r.cycle.is_some()).unwrap_or(false)
}

fn attack_trial(i: usize) -> bool {
    let (trace, m) = run_to_hitting_time(100, derive(2, i as u64), 1);
    let snap = ProcessSnapshot::new(&trace, m);
    bipartition_attack(&snap.digraph, 0.15, snap.low_threshold(), i as u64).is_ok()
}

type Job = (&'static str, fn(usize) -> bool, usize);

fn trials(c: &mut Criterion) {
    let mut g = c.benchmark_group("trials");
    g.sample_size(10);
    let jobs: [Job; 2] = [("oracle-n13", oracle_trial, 64), ("attack-n100", attack_trial, 16)];
    for (name, f, count) in jobs {
        g.bench_with_input(BenchmarkId::new("parallel", name), &count, |b, &k| b.iter(|| black_box(map_indexed(k, f))));
        g.bench_with_input(BenchmarkId::new("sequential", name), &count, |b, &k| b.iter(|| black_box(map_indexed_seq(k, f))));
    }
    g.finish();
}

criterion_group!(benches, trials);
criterion_main!(benches);
