//! The random digraph process, D(n,p) and D_{n,M}.

use std::collections::HashMap;

use rand::Rng as _;

use crate::digraph::{Digraph, Sign, Vertex};
use crate::profile::iterated_log;
use crate::rng;

/// Pair arrays are materialized up to this many vertices.
pub const DENSE_LIMIT: usize = 2000;

/// Stream index reserved for process shuffles.
const PROCESS_STREAM: u64 = 0x5052_4f43;
const GNP_STREAM: u64 = 0x474e_5000;

fn decode(n: usize, idx: usize) -> (Vertex, Vertex) {
    let u = idx / (n - 1);
    let r = idx % (n - 1);
    (u, if r < u { r } else { r + 1 })
}

enum Pool {
    Dense(Vec<u32>),
    Sparse(HashMap<usize, usize>),
}

/// Lazily shuffled sequence of all ordered pairs (forward Fisher–Yates).
/// Dense and sparse storage produce the same sequence for the same seed.
pub struct PairStream {
    n: usize,
    total: usize,
    next: usize,
    pool: Pool,
    rng: rng::Rng,
}

impl PairStream {
    pub fn new(n: usize, seed: u64) -> Self {
        Self::with_storage(n, seed, n <= DENSE_LIMIT)
    }

    fn with_storage(n: usize, seed: u64, dense: bool) -> Self {
        let total = n * n.saturating_sub(1);
        let pool = if dense {
            Pool::Dense((0..total as u32).collect())
        } else {
            Pool::Sparse(HashMap::new())
        };
        PairStream {
            n,
            total,
            next: 0,
            pool,
            rng: rng::stream(seed, PROCESS_STREAM),
        }
    }
}

impl Iterator for PairStream {
    type Item = (Vertex, Vertex);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.total {
            return None;
        }
        let i = self.next;
        let j = self.rng.gen_range(i..self.total);
        let picked = match &mut self.pool {
            Pool::Dense(a) => {
                a.swap(i, j);
                a[i] as usize
            }
            Pool::Sparse(m) => {
                let at_j = m.get(&j).copied().unwrap_or(j);
                let at_i = m.remove(&i).unwrap_or(i);
                if j != i {
                    m.insert(j, at_i);
                }
                at_j
            }
        };
        self.next += 1;
        Some(decode(self.n, picked))
    }
}

/// A seeded run of the process; `edges[..M]` is D_M.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessTrace {
    pub n: usize,
    pub seed: u64,
    pub edges: Vec<(Vertex, Vertex)>,
}

impl ProcessTrace {
    pub fn digraph_at(&self, m: usize) -> Digraph {
        Digraph::from_edges(self.n, &self.edges[..m.min(self.edges.len())])
            .expect("process edges are distinct pairs")
    }

    pub fn total_pairs(&self) -> usize {
        self.n * (self.n - 1)
    }
}

/// Full ordering of all n(n−1) pairs.
pub fn sample_process(n: usize, seed: u64) -> ProcessTrace {
    assert!(n >= 2, "process needs n >= 2");
    ProcessTrace {
        n,
        seed,
        edges: PairStream::new(n, seed).collect(),
    }
}

/// First `len` edges of the process, without materializing the rest.
pub fn sample_process_prefix(n: usize, seed: u64, len: usize) -> ProcessTrace {
    assert!(n >= 2, "process needs n >= 2");
    ProcessTrace {
        n,
        seed,
        edges: PairStream::new(n, seed).take(len).collect(),
    }
}

/// Smallest M with δ⁺(D_M) ≥ k and δ⁻(D_M) ≥ k (n(n−1) if never).
pub fn hitting_time_min_degree(trace: &ProcessTrace, k: usize) -> usize {
    hitting_time_in(trace.n, trace.edges.iter().copied(), k).unwrap_or(trace.total_pairs())
}

fn hitting_time_in(
    n: usize,
    edges: impl Iterator<Item = (Vertex, Vertex)>,
    k: usize,
) -> Option<usize> {
    assert!(k >= 1);
    let mut outd = vec![0usize; n];
    let mut ind = vec![0usize; n];
    let mut short = 2 * n;
    for (i, (u, v)) in edges.enumerate() {
        outd[u] += 1;
        if outd[u] == k {
            short -= 1;
        }
        ind[v] += 1;
        if ind[v] == k {
            short -= 1;
        }
        if short == 0 {
            return Some(i + 1);
        }
    }
    None
}

/// Run the process only until the hitting time; returns the trace prefix.
pub fn run_to_hitting_time(n: usize, seed: u64, k: usize) -> (ProcessTrace, usize) {
    let mut edges = Vec::new();
    let mut stream = PairStream::new(n, seed);
    let mut outd = vec![0usize; n];
    let mut ind = vec![0usize; n];
    let mut short = 2 * n;
    for (u, v) in stream.by_ref() {
        edges.push((u, v));
        outd[u] += 1;
        ind[v] += 1;
        if outd[u] == k {
            short -= 1;
        }
        if ind[v] == k {
            short -= 1;
        }
        if short == 0 {
            break;
        }
    }
    let m = edges.len();
    (ProcessTrace { n, seed, edges }, m)
}

/// D(n,p): each ordered pair independently with probability p.
pub fn sample_gnp(n: usize, p: f64, seed: u64) -> Digraph {
    let p = p.clamp(0.0, 1.0);
    let mut r = rng::stream(seed, GNP_STREAM);
    let out = (0..n)
        .map(|u| {
            (0..n)
                .filter(|&v| v != u && r.gen_bool(p))
                .collect::<Vec<_>>()
        })
        .collect();
    Digraph::from_sorted_out(out)
}

/// D_{n,M}: the first M edges of a seeded process.
pub fn sample_dnm(n: usize, m: usize, seed: u64) -> Digraph {
    sample_process_prefix(n, seed, m).digraph_at(m)
}

/// D_M together with the scalars derived from M.
#[derive(Clone, Debug)]
pub struct ProcessSnapshot {
    pub m: usize,
    pub digraph: Digraph,
}

impl ProcessSnapshot {
    pub fn new(trace: &ProcessTrace, m: usize) -> Self {
        ProcessSnapshot {
            m,
            digraph: trace.digraph_at(m),
        }
    }

    pub fn from_digraph(digraph: Digraph) -> Self {
        ProcessSnapshot {
            m: digraph.edge_count(),
            digraph,
        }
    }

    pub fn n(&self) -> usize {
        self.digraph.n()
    }

    /// d_M = M / (2·10³ n log n).
    pub fn d_m(&self) -> f64 {
        let n = self.n() as f64;
        self.m as f64 / (2e3 * n * n.ln())
    }

    /// p_M = M / n(n−1).
    pub fn p_m(&self) -> f64 {
        let n = self.n() as f64;
        self.m as f64 / (n * (n - 1.0))
    }

    /// m_M = n log^[3] n / (d_M log n), with the iterated log clamped below at 1.
    pub fn m_m(&self) -> f64 {
        let n = self.n() as f64;
        n * iterated_log(n, 3) / (self.d_m() * n.ln())
    }

    /// 2 d_M log n, the low-degree threshold.
    pub fn low_threshold(&self) -> f64 {
        2.0 * self.d_m() * (self.n() as f64).ln()
    }

    /// S_M = {v : d⁺(v) or d⁻(v) below 2 d_M log n}.
    pub fn s_m(&self) -> Vec<Vertex> {
        low_degree_set(&self.digraph, self.low_threshold())
    }
}

/// Vertices with some semidegree strictly below `threshold`.
pub fn low_degree_set(d: &Digraph, threshold: f64) -> Vec<Vertex> {
    (0..d.n())
        .filter(|&v| Sign::BOTH.iter().any(|&s| (d.degree(v, s) as f64) < threshold))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n2_traces() {
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..40 {
            let t = sample_process(2, seed);
            assert_eq!(t.edges.len(), 2);
            seen.insert(t.edges.clone());
            assert_eq!(hitting_time_min_degree(&t, 1), 2);
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn first_edge_uniform_n3() {
        let mut counts = [0usize; 6];
        let trials = 6000;
        for seed in 0..trials {
            let (u, v) = PairStream::new(3, seed).next().unwrap();
            counts[u * 2 + if v > u { v - 1 } else { v }] += 1;
        }
        let expect = trials as f64 / 6.0;
        let sd = (trials as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for c in counts {
            assert!((c as f64 - expect).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn determinism_and_storage_equivalence() {
        assert_eq!(sample_process(7, 11), sample_process(7, 11));
        assert_ne!(sample_process(7, 11), sample_process(7, 12));
        let dense: Vec<_> = PairStream::with_storage(9, 5, true).collect();
        let sparse: Vec<_> = PairStream::with_storage(9, 5, false).collect();
        assert_eq!(dense, sparse);
        let mut sorted = dense.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 72);
        assert_eq!(sample_process_prefix(9, 5, 10).edges, dense[..10]);
    }

    #[test]
    fn hitting_time_band_and_minimality() {
        let n = 40;
        let ln = (n as f64).ln();
        let mut total = 0usize;
        for seed in 0..200 {
            let t = sample_process(n, seed);
            let m = hitting_time_min_degree(&t, 1);
            total += m;
            assert!(t.digraph_at(m).min_semidegree() >= 1);
            assert!(t.digraph_at(m - 1).min_semidegree() < 1);
            let (pre, m2) = run_to_hitting_time(n, seed, 1);
            assert_eq!(m, m2);
            assert_eq!(pre.edges[..], t.edges[..m]);
        }
        let mean = total as f64 / 200.0;
        let lo = n as f64 * (ln - 3.0);
        let hi = n as f64 * (ln + 3.0);
        assert!(lo <= mean && mean <= hi, "mean {mean} outside [{lo}, {hi}]");
    }

    #[test]
    fn gnp_extremes_and_mean() {
        assert_eq!(sample_gnp(10, 0.0, 1).edge_count(), 0);
        assert_eq!(sample_gnp(10, 1.0, 1).edge_count(), 90);
        let n = 30;
        let pairs = (n * (n - 1)) as f64;
        let trials = 500;
        let sum: usize = (0..trials).map(|s| sample_gnp(n, 0.3, s).edge_count()).sum();
        let mean = sum as f64 / trials as f64;
        let sd_mean = (pairs * 0.3 * 0.7).sqrt() / (trials as f64).sqrt();
        assert!((mean - 0.3 * pairs).abs() < 3.0 * sd_mean, "mean {mean}");
    }

    #[test]
    fn prefix_monotone() {
        let t = sample_process(12, 3);
        let a = t.digraph_at(30);
        let b = t.digraph_at(70);
        assert!(a.edges().all(|(u, v)| b.has_edge(u, v)));
        assert_eq!(sample_dnm(12, 30, 3), a);
    }

    #[test]
    fn process_prefix_matches_dnm_degree_statistics() {
        // Degree histograms of D_M from traces vs independent D_{n,M} draws.
        let (n, m, trials) = (20usize, 60usize, 1000u64);
        let hist = |offset: u64| {
            let mut h = vec![0f64; 2 * n];
            for t in 0..trials {
                let d = sample_process_prefix(n, offset + t, m).digraph_at(m);
                for v in 0..n {
                    h[d.degree(v, Sign::Out) + d.degree(v, Sign::In)] += 1.0;
                }
            }
            let total: f64 = h.iter().sum();
            let mut acc = 0.0;
            h.iter()
                .map(|x| {
                    acc += x / total;
                    acc
                })
                .collect::<Vec<_>>()
        };
        let a = hist(0);
        let b = hist(1_000_000);
        let ks = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        // samples are n·trials degrees each; 1.95·sqrt(2/N) is the 0.1% KS level
        let crit = 1.95 * (2.0 / (n as f64 * trials as f64)).sqrt();
        assert!(ks < crit, "ks {ks} >= {crit}");
    }

    #[test]
    fn snapshot_scalars() {
        let d = Digraph::complete(10);
        let s = ProcessSnapshot::from_digraph(d);
        assert_eq!(s.m, 90);
        assert!((s.p_m() - 1.0).abs() < 1e-12);
        let want = 90.0 / (2e3 * 10.0 * 10f64.ln());
        assert!((s.d_m() - want).abs() < 1e-15);
        assert!(s.s_m().is_empty());
        let sparse = ProcessSnapshot::from_digraph(Digraph::empty(10));
        assert_eq!(sparse.s_m().len(), 0, "threshold 0 admits nothing below it");
    }
}
