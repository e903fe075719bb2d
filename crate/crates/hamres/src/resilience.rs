//! Edge-removal adversaries, low-degree boosting by merging, and the
//! bipartition attack.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::Serialize;

use crate::cert::find_s_structure;
use crate::digraph::{contract, expand_merged_cycle, verify_hamilton, Contraction, Digraph, HamiltonCycle, Sign, Vertex};
use crate::error::{Error, Result, Stage};
use crate::oracle::{decide, Decision};
use crate::pipeline::hamiltonize;
use crate::process::{run_to_hitting_time, ProcessSnapshot};
use crate::profile::ParameterProfile;
use crate::{par, rng};

pub type Edge = (Vertex, Vertex);

/// First vertex/sign where H removes more than `alpha·d_D`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundViolation {
    pub vertex: Vertex,
    pub sign: Sign,
    pub removed: usize,
    pub degree: usize,
}

/// Audit d_H^j(v) ≤ α·d_D^j(v) for every vertex and sign. Edges of H must lie in D.
pub fn audit_alpha_bound(d: &Digraph, h: &[Edge], alpha: f64) -> Result<Option<BoundViolation>> {
    let n = d.n();
    let mut out = vec![0usize; n];
    let mut inn = vec![0usize; n];
    let mut seen = std::collections::HashSet::with_capacity(h.len());
    for &(u, v) in h {
        if u >= n || v >= n || !d.has_edge(u, v) {
            return Err(Error::input(format!("removed edge {u} -> {v} is not in the digraph")));
        }
        if !seen.insert((u, v)) {
            return Err(Error::input(format!("removed edge {u} -> {v} listed twice")));
        }
        out[u] += 1;
        inn[v] += 1;
    }
    for v in 0..n {
        for (sign, removed) in [(Sign::Out, out[v]), (Sign::In, inn[v])] {
            let degree = d.degree(v, sign);
            if removed as f64 > alpha * degree as f64 + 1e-9 {
                return Ok(Some(BoundViolation { vertex: v, sign, removed, degree }));
            }
        }
    }
    Ok(None)
}

/// Random-priority removal with per-endpoint quotas ⌊α·d⌋: an edge u→v is
/// taken when both the out-quota of u and the in-quota of v have room.
pub fn remove_proportional(d: &Digraph, alpha: f64, seed: u64) -> Result<Vec<Edge>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::input(format!("alpha = {alpha} outside [0, 1]")));
    }
    let n = d.n();
    let quota = |v: Vertex, s: Sign| (alpha * d.degree(v, s) as f64 + 1e-9).floor() as usize;
    let mut out_left: Vec<usize> = (0..n).map(|v| quota(v, Sign::Out)).collect();
    let mut in_left: Vec<usize> = (0..n).map(|v| quota(v, Sign::In)).collect();
    let mut edges: Vec<Edge> = d.edges().collect();
    edges.shuffle(&mut rng::stream(seed, 0));
    let mut h = Vec::new();
    for (u, v) in edges {
        if out_left[u] > 0 && in_left[v] > 0 {
            out_left[u] -= 1;
            in_left[v] -= 1;
            h.push((u, v));
        }
    }
    h.sort_unstable();
    if let Some(bad) = audit_alpha_bound(d, &h, alpha)? {
        return Err(Error::consistency(format!("removal exceeds quota at {bad:?}")));
    }
    Ok(h)
}

/// Greedy subset of `candidates` (in id order) with no S-path or S-cycle in `d`.
pub fn structure_free_subset(d: &Digraph, candidates: &[Vertex]) -> Vec<Vertex> {
    let mut s: Vec<Vertex> = Vec::new();
    for &v in candidates {
        s.push(v);
        if find_s_structure(d, &s).is_some() {
            s.pop();
        }
    }
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct BoostAssignment {
    pub v: Vertex,
    pub x: Vertex,
    pub y: Vertex,
}

pub struct BoostResult {
    /// Reduced digraph with merge records; each z expands to x, v, y.
    pub contraction: Contraction,
    pub assignment: Vec<BoostAssignment>,
}

impl BoostResult {
    pub fn reduced(&self) -> &Digraph {
        &self.contraction.digraph
    }

    pub fn expand(&self, c: &HamiltonCycle) -> Result<HamiltonCycle> {
        expand_merged_cycle(c, &self.contraction)
    }
}

/// For each v ∈ S take the lowest in-neighbour x_v and out-neighbour y_v in
/// `dh`, delete v and merge x_v into y_v.
pub fn boost_min_degree(dh: &Digraph, s: &[Vertex], d: &Digraph) -> Result<BoostResult> {
    if dh.n() != d.n() {
        return Err(Error::input("D − H and D must share the vertex set"));
    }
    let mut s = s.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.iter().any(|&v| v >= d.n()) {
        return Err(Error::input("low-degree vertex out of range"));
    }
    if let Some(w) = find_s_structure(d, &s) {
        return Err(Error::input(format!("low-degree set has a short path or cycle: {w:?}")));
    }
    let mut assignment = Vec::with_capacity(s.len());
    for &v in &s {
        let x = dh.in_nbrs(v).first().copied();
        let y = dh.out_nbrs(v).first().copied();
        let (Some(x), Some(y)) = (x, y) else {
            return Err(Error::failed(Stage::Boost, format!("vertex {v} has no in- or out-neighbour left")));
        };
        assignment.push(BoostAssignment { v, x, y });
    }
    let mut all: Vec<Vertex> = assignment.iter().flat_map(|a| [a.v, a.x, a.y]).collect();
    all.sort_unstable();
    if all.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::consistency("boost triples are not vertex-disjoint"));
    }
    let pairs: Vec<Edge> = assignment.iter().map(|a| (a.x, a.y)).collect();
    let interiors = assignment.iter().map(|a| vec![a.v]).collect();
    let contraction = contract(dh, &pairs, &s, interiors)?;
    Ok(BoostResult { contraction, assignment })
}

/// Outcome of [`boosted_hamiltonize`].
#[derive(Clone, Debug, Serialize)]
pub struct BoostedRun {
    pub low_degree: usize,
    pub reduced_n: usize,
    /// "ok", a failing stage, or "not-applicable" when the sizes do not fit.
    pub outcome: String,
    pub cycle: Option<HamiltonCycle>,
}

/// Boost, run the pipeline on the reduced digraph, expand and verify on `dh`.
pub fn boosted_hamiltonize(dh: &Digraph, s: &[Vertex], d: &Digraph, eps: f64, seed: u64) -> Result<BoostedRun> {
    let boost = match boost_min_degree(dh, s, d) {
        Ok(b) => b,
        Err(Error::Failed { stage, .. }) => {
            return Ok(BoostedRun { low_degree: s.len(), reduced_n: dh.n(), outcome: stage.to_string(), cycle: None })
        }
        Err(e) => return Err(e),
    };
    let reduced = boost.reduced();
    let mut run = BoostedRun { low_degree: s.len(), reduced_n: reduced.n(), outcome: String::new(), cycle: None };
    let profile = ParameterProfile::for_digraph(reduced, eps);
    match hamiltonize(reduced, &profile, seed) {
        Ok(report) => match report.cycle() {
            Some(c) => {
                let full = boost.expand(c)?;
                if !verify_hamilton(dh, &full) {
                    return Err(Error::consistency("expanded cycle fails verification on D − H"));
                }
                run.outcome = "ok".into();
                run.cycle = Some(full);
            }
            None => {
                run.outcome = report.attempts.last().map_or_else(|| "failed".into(), |a| a.outcome.clone());
            }
        },
        Err(Error::Input(_)) => run.outcome = "not-applicable".into(),
        Err(e) => return Err(e),
    }
    Ok(run)
}

/// Semidegree `deg` admits a split with ≥ (1/2−ε)·deg on each side.
fn splittable(deg: usize, eps: f64) -> bool {
    let need = ((0.5 - eps) * deg as f64 - 1e-9).ceil().max(0.0) as usize;
    deg > 0 && 2 * need <= deg
}

#[derive(Clone, Debug, Serialize)]
pub struct Attack {
    pub side_a: Vec<Vertex>,
    pub side_b: Vec<Vertex>,
    /// All edges between the sides.
    pub h: Vec<Edge>,
    pub low_degree: Vec<Vertex>,
    /// Some low-degree vertex had no sign clearing the bound; sided by majority.
    pub flagged: bool,
    pub rounds: usize,
}

const ATTACK_STEPS: usize = 400_000;
const ATTACK_NOISE: f64 = 0.2;

/// Per-vertex counts of same-side neighbours, kept current under flips.
struct SplitState<'a> {
    d: &'a Digraph,
    need: Vec<[usize; 2]>,
    own: Vec<[usize; 2]>,
    side: Vec<bool>,
    sizes: [usize; 2],
}

impl<'a> SplitState<'a> {
    fn new(d: &'a Digraph, eps: f64, side: Vec<bool>) -> Self {
        let n = d.n();
        let need = (0..n)
            .map(|v| Sign::BOTH.map(|s| ((0.5 - eps) * d.degree(v, s) as f64 - 1e-9).ceil().max(0.0) as usize))
            .collect();
        let own = (0..n)
            .map(|v| Sign::BOTH.map(|s| d.nbrs(v, s).iter().filter(|&&w| side[w] == side[v]).count()))
            .collect();
        let b = side.iter().filter(|&&x| x).count();
        SplitState { d, need, own, side, sizes: [n - b, b] }
    }

    fn deficit(&self, v: Vertex) -> usize {
        (0..2).map(|j| self.need[v][j].saturating_sub(self.own[v][j])).sum()
    }

    fn flip(&mut self, w: Vertex) {
        let was = self.side[w];
        for (j, s) in Sign::BOTH.into_iter().enumerate() {
            self.own[w][j] = self.d.degree(w, s) - self.own[w][j];
            // w is a neighbour of x with the opposite sign
            for &x in self.d.nbrs(w, s) {
                if self.side[x] == was {
                    self.own[x][1 - j] -= 1;
                } else {
                    self.own[x][1 - j] += 1;
                }
            }
        }
        self.side[w] = !was;
        self.sizes[usize::from(was)] -= 1;
        self.sizes[usize::from(!was)] += 1;
    }

    fn neighbourhood(&self, v: Vertex) -> Vec<Vertex> {
        let mut c: Vec<Vertex> = self.d.out_nbrs(v).iter().chain(self.d.in_nbrs(v)).copied().collect();
        c.push(v);
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Change of the total deficit if `w` flips.
    fn delta(&mut self, w: Vertex) -> i64 {
        let area = self.neighbourhood(w);
        let before: usize = area.iter().map(|&x| self.deficit(x)).sum();
        self.flip(w);
        let after: usize = area.iter().map(|&x| self.deficit(x)).sum();
        self.flip(w);
        after as i64 - before as i64
    }
}

/// Split V so that every vertex keeps ≥ (1/2−ε) of each semidegree on its own
/// side, then remove all cross edges. Start from fair coins (low-degree
/// vertices follow their minority-sign neighbours), then repair by a focused
/// walk: pick a violated vertex, flip the best vertex of its closed
/// neighbourhood, with occasional random flips. `low` is the low-degree
/// threshold; a vertex is also low when a semidegree cannot be split fairly.
pub fn bipartition_attack(d: &Digraph, eps: f64, low: f64, seed: u64) -> Result<Attack> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::input(format!("eps = {eps} outside (0, 1/2]")));
    }
    let n = d.n();
    if n < 2 {
        return Err(Error::input("attack needs at least two vertices"));
    }
    let low_sign = |v: Vertex, s: Sign| (d.degree(v, s) as f64) < low || !splittable(d.degree(v, s), eps);
    let low_set: Vec<Vertex> = (0..n).filter(|&v| Sign::BOTH.iter().any(|&s| low_sign(v, s))).collect();
    let mut flagged = false;

    let mut r = rng::stream(seed, 0);
    let mut side: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
    for &v in &low_set {
        let on_b = |s: Sign| d.nbrs(v, s).iter().filter(|&&w| side[w]).count();
        let (dout, din) = (d.degree(v, Sign::Out), d.degree(v, Sign::In));
        side[v] = if low_sign(v, Sign::Out) && low_sign(v, Sign::In) {
            flagged = true;
            2 * (on_b(Sign::Out) + on_b(Sign::In)) >= dout + din
        } else {
            let minority = if low_sign(v, Sign::Out) { Sign::Out } else { Sign::In };
            2 * on_b(minority) >= d.degree(v, minority)
        };
    }
    let mut st = SplitState::new(d, eps, side);
    for step in 1..=ATTACK_STEPS {
        let violated: Vec<Vertex> = (0..n).filter(|&v| st.deficit(v) > 0).collect();
        if violated.is_empty() {
            if st.sizes.contains(&0) {
                return Err(Error::failed(Stage::Attack, "one side is empty"));
            }
            let side = &st.side;
            let side_a: Vec<Vertex> = (0..n).filter(|&v| !side[v]).collect();
            let side_b: Vec<Vertex> = (0..n).filter(|&v| side[v]).collect();
            let h: Vec<Edge> = d.edges().filter(|&(u, w)| side[u] != side[w]).collect();
            return Ok(Attack { side_a, side_b, h, low_degree: low_set, flagged, rounds: step - 1 });
        }
        let v = violated[r.gen_range(0..violated.len())];
        let cand: Vec<Vertex> = st.neighbourhood(v).into_iter().filter(|&w| st.sizes[usize::from(st.side[w])] > 1).collect();
        if cand.is_empty() {
            continue;
        }
        let w = if r.gen_bool(ATTACK_NOISE) {
            cand[r.gen_range(0..cand.len())]
        } else {
            let scored: Vec<(i64, Vertex)> = cand.iter().map(|&w| (st.delta(w), w)).collect();
            let best = scored.iter().map(|s| s.0).min().expect("nonempty");
            let ties: Vec<Vertex> = scored.iter().filter(|s| s.0 == best).map(|s| s.1).collect();
            ties[r.gen_range(0..ties.len())]
        };
        st.flip(w);
    }
    Err(Error::failed(Stage::Attack, format!("no fair split within {ATTACK_STEPS} repair steps")))
}

/// Both attack properties: the (1/2+ε) removal bound and no edge of D − H
/// between the two nonempty sides.
pub fn audit_attack(d: &Digraph, attack: &Attack, eps: f64) -> Result<bool> {
    if attack.side_a.is_empty() || attack.side_b.is_empty() {
        return Ok(false);
    }
    if audit_alpha_bound(d, &attack.h, 0.5 + eps)?.is_some() {
        return Ok(false);
    }
    let rest = d.without_edges(&attack.h);
    let mut in_a = vec![false; d.n()];
    for &v in &attack.side_a {
        in_a[v] = true;
    }
    let split = rest.edges().all(|(u, v)| in_a[u] == in_a[v]);
    Ok(split && rest.weak_components().len() >= 2)
}

#[derive(Clone, Debug, Serialize)]
pub struct ResilienceConfig {
    pub n: usize,
    pub eps: f64,
    /// Removal fraction for the positive direction; 1/2 − ε unless overridden.
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    pub oracle_budget: u64,
}

impl ResilienceConfig {
    pub fn new(n: usize, eps: f64, trials: usize, seed: u64) -> Self {
        ResilienceConfig { n, eps, alpha: 0.5 - eps, trials, seed, oracle_budget: 20_000_000 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResilienceRow {
    pub n: usize,
    pub seed: u64,
    pub m_star: usize,
    pub attack_ok: bool,
    pub attack_flagged: bool,
    pub alpha: f64,
    pub removed: usize,
    /// 1 when D − H is Hamiltonian according to the oracle.
    pub survival_alpha: u8,
    pub oracle_verdict: Decision,
    pub low_degree: usize,
    pub pipeline: String,
    pub pipeline_verified: bool,
}

impl ResilienceRow {
    pub const HEADER: &'static str =
        "n,seed,M_star,attack_ok,attack_flagged,alpha,removed,survival_alpha,oracle_verdict,low_degree,pipeline,pipeline_verified";

    pub fn csv(&self) -> String {
        let verdict = match self.oracle_verdict {
            Decision::Ham => "HAM",
            Decision::NonHam => "NON-HAM",
            Decision::Timeout => "TIMEOUT",
        };
        format!(
            "{},{},{},{},{},{:.6},{},{},{},{},{},{}",
            self.n,
            self.seed,
            self.m_star,
            u8::from(self.attack_ok),
            u8::from(self.attack_flagged),
            self.alpha,
            self.removed,
            self.survival_alpha,
            verdict,
            self.low_degree,
            self.pipeline,
            u8::from(self.pipeline_verified)
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResilienceReport {
    pub config: ResilienceConfig,
    pub rows: Vec<ResilienceRow>,
    pub attack_rate: f64,
    pub survival_rate: f64,
    pub pipeline_successes: usize,
}

/// Desk threshold for low degree: vertices with a semidegree of at most one
/// in D − H, or below the process threshold if that is larger.
fn desk_low_threshold(snap: &ProcessSnapshot) -> f64 {
    snap.low_threshold().max(2.0)
}

/// One seeded trial: hitting-time digraph, attack, proportional removal,
/// oracle truth and the boosted pipeline.
pub fn resilience_trial(cfg: &ResilienceConfig, trial: usize) -> Result<ResilienceRow> {
    let seed = rng::derive(cfg.seed, trial as u64);
    let (trace, m_star) = run_to_hitting_time(cfg.n, seed, 1);
    let snap = ProcessSnapshot::new(&trace, m_star);
    let d = &snap.digraph;
    let (attack_ok, attack_flagged) = match bipartition_attack(d, cfg.eps, snap.low_threshold(), rng::derive(seed, 1)) {
        Ok(a) => (audit_attack(d, &a, cfg.eps)?, a.flagged),
        Err(Error::Failed { .. }) => (false, false),
        Err(e) => return Err(e),
    };
    let h = remove_proportional(d, cfg.alpha, rng::derive(seed, 2))?;
    let dh = d.without_edges(&h);
    let truth = decide(&dh, cfg.oracle_budget);
    let low = crate::process::low_degree_set(&dh, desk_low_threshold(&snap));
    let s = structure_free_subset(d, &low);
    let run = boosted_hamiltonize(&dh, &s, d, cfg.eps, rng::derive(seed, 3))?;
    Ok(ResilienceRow {
        n: cfg.n,
        seed,
        m_star,
        attack_ok,
        attack_flagged,
        alpha: cfg.alpha,
        removed: h.len(),
        survival_alpha: u8::from(truth.decision == Decision::Ham),
        oracle_verdict: truth.decision,
        low_degree: s.len(),
        pipeline_verified: run.cycle.is_some(),
        pipeline: run.outcome,
    })
}

pub fn resilience_experiment(cfg: &ResilienceConfig) -> Result<ResilienceReport> {
    if cfg.n < 2 {
        return Err(Error::input("n must be at least 2"));
    }
    let rows = par::map_indexed(cfg.trials, |t| resilience_trial(cfg, t)).into_iter().collect::<Result<Vec<_>>>()?;
    let t = rows.len().max(1) as f64;
    Ok(ResilienceReport {
        attack_rate: rows.iter().filter(|r| r.attack_ok).count() as f64 / t,
        survival_rate: rows.iter().map(|r| r.survival_alpha as f64).sum::<f64>() / t,
        pipeline_successes: rows.iter().filter(|r| r.pipeline_verified).count(),
        config: cfg.clone(),
        rows,
    })
}
