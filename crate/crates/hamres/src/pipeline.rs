//! Good partition, reservoir contraction and Hamilton cycle assembly.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::cert::{check_a1, Verdict};
use crate::connector::{strong_connect, weak_connect};
use crate::digraph::{contract, verify_hamilton, Contraction, Digraph, HamiltonCycle, Vertex};
use crate::division::divide_induced;
use crate::error::{Error, Result, Stage};
use crate::matching::{final_path_cover, hall_matching, BipartiteView};
use crate::profile::ParameterProfile;
use crate::rng;

/// One reservoir quadruple: u → x, u → v and y → v are edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Quad {
    pub u: Vertex,
    pub x: Vertex,
    pub v: Vertex,
    pub y: Vertex,
}

#[derive(Clone, Debug, Serialize)]
pub struct GoodPartition {
    pub a: Vec<Vertex>,
    pub b1: Vec<Vertex>,
    pub b2: Vec<Vertex>,
    /// R₁ (x), R₂ (u), R₃ (v), R₄ (y).
    pub r_sets: [Vec<Vertex>; 4],
    pub ell: usize,
    pub r: usize,
    pub k: usize,
    /// Ordered by u.
    pub quads: Vec<Quad>,
}

impl GoodPartition {
    /// Pairs (x, f(x)).
    pub fn pairing(&self) -> Vec<(Vertex, Vertex)> {
        self.quads.iter().map(|q| (q.x, q.y)).collect()
    }

    /// Parts partition V(D), sizes match, the three matchings are edges.
    pub fn check(&self, d: &Digraph) -> Result<()> {
        let mut all: Vec<Vertex> = self.a.iter().chain(&self.b1).chain(&self.b2).copied().collect();
        for r in &self.r_sets {
            if r.len() != self.r {
                return Err(Error::consistency("reservoir part has the wrong size"));
            }
            all.extend_from_slice(r);
        }
        all.sort_unstable();
        if all != (0..d.n()).collect::<Vec<_>>() {
            return Err(Error::consistency("good partition does not partition the vertex set"));
        }
        if self.b2.len() != self.k * self.ell {
            return Err(Error::consistency("|B2| differs from kℓ"));
        }
        for q in &self.quads {
            if !(d.has_edge(q.u, q.x) && d.has_edge(q.u, q.v) && d.has_edge(q.y, q.v)) {
                return Err(Error::consistency(format!("quad {q:?} is missing an edge")));
            }
        }
        Ok(())
    }
}

fn matching_map(d: &Digraph, left: &[Vertex], right: &[Vertex], stage: Stage) -> Result<Vec<(Vertex, Vertex)>> {
    hall_matching(&BipartiteView::forward(d, left, right)).map_err(|h| {
        Error::failed(stage, format!("Hall violator {:?} has {} out-neighbours", h.set, h.neighbourhood.len()))
    })
}

/// Two rounds of division (A | B₁ | B₂' | B₃', then R₁..R₄ inside
/// D[B₂' ∪ B₃']) and the three reservoir matchings.
pub fn build_good_partition(d: &Digraph, profile: &ParameterProfile, seed: u64) -> Result<GoodPartition> {
    let n = d.n();
    let (k, ell, r, a) = (profile.k, profile.ell, profile.r, profile.a_size);
    let spare = ((profile.eps * (k * ell) as f64) / 5.0).ceil() as usize;
    let fixed = a + k * ell + 4 * r;
    if fixed > n || spare > k * ell {
        return Err(Error::input(format!("sizes a={a}, kℓ={}, 4r={} do not fit n={n}", k * ell, 4 * r)));
    }
    let all: Vec<Vertex> = (0..n).collect();
    let sizes = [a, n - fixed, k * ell - spare, spare + 4 * r];
    let live: Vec<usize> = (0..4).filter(|&j| sizes[j] > 0).collect();
    let div = divide_induced(
        d,
        &all,
        &all,
        live.iter().map(|&j| sizes[j]).collect(),
        profile.m,
        profile.eps,
        rng::derive(seed, 11),
        profile.max_rounds,
    )
    .map_err(|e| e.within(Stage::Division1))?;
    let mut parts: [Vec<Vertex>; 4] = Default::default();
    for (p, &j) in div.parts.into_iter().zip(&live) {
        parts[j] = p;
    }
    let [pa, pb1, pb2, pb3] = parts;
    let mut host: Vec<Vertex> = pb2.iter().chain(&pb3).copied().collect();
    host.sort_unstable();
    let round2 = divide_induced(d, &host, &pb3, vec![r; 4], profile.m, profile.eps, rng::derive(seed, 12), profile.max_rounds)
        .map_err(|e| e.within(Stage::Division2))?;
    let mut b2 = pb2;
    b2.extend_from_slice(&round2.residual);
    b2.sort_unstable();
    let [r1, r2, r3, r4]: [Vec<Vertex>; 4] = round2.parts.try_into().map_err(|_| Error::consistency("expected four parts"))?;

    let m1 = matching_map(d, &r2, &r1, Stage::MatchingM1)?;
    let m2 = matching_map(d, &r2, &r3, Stage::MatchingM2)?;
    let m3 = matching_map(d, &r4, &r3, Stage::MatchingM3)?;
    let mut y_of_v = vec![usize::MAX; n];
    for &(y, v) in &m3 {
        y_of_v[v] = y;
    }
    let quads = m1
        .iter()
        .zip(&m2)
        .map(|(&(u, x), &(u2, v))| {
            debug_assert_eq!(u, u2);
            Quad { u, x, v, y: y_of_v[v] }
        })
        .collect();
    let gp = GoodPartition { a: pa, b1: pb1, b2, r_sets: [r1, r2, r3, r4], ell, r, k, quads };
    gp.check(d)?;
    Ok(gp)
}

/// The digraph with every x merged into f(x).
pub struct Reservoir {
    pub contraction: Contraction,
    /// Merged vertices, in quad order.
    pub merged: Vec<Vertex>,
}

pub fn contract_reservoir(d: &Digraph, gp: &GoodPartition) -> Result<Reservoir> {
    let pairs = gp.pairing();
    let contraction = contract(d, &pairs, &[], vec![Vec::new(); pairs.len()])?;
    let merged = contraction.records.iter().map(|r| r.z).collect();
    Ok(Reservoir { contraction, merged })
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakBudget {
    pub realized: usize,
    pub budget: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Assembly {
    pub cycle: HamiltonCycle,
    pub spine_len: usize,
    pub cover_paths: usize,
    pub cycles_broken: usize,
    pub reservoir_used: usize,
    pub weak: WeakBudget,
}

/// Spine through the reservoir, final cover of the rest, reservoir
/// absorption of the cover paths, then splice.
pub fn assemble_hamilton(d: &Digraph, gp: &GoodPartition, profile: &ParameterProfile, seed: u64) -> Result<Assembly> {
    let n = d.n();
    let r = gp.r;
    let qd = &gp.quads;
    let edges: Vec<(Vertex, Vertex)> = qd.iter().flat_map(|q| [(q.u, q.x), (q.y, q.v)]).collect();
    let spine = strong_connect(d, &gp.a, &edges, profile, rng::derive(seed, 21))?;
    // connector 2i joins x_i to y_i, connector 2i+1 joins v_i to u_{i+1}
    let p_int: Vec<Vec<Vertex>> = (0..r).map(|i| spine.connectors[2 * i].clone()).collect();
    let q_int: Vec<Vec<Vertex>> = (0..r - 1).map(|i| spine.connectors[2 * i + 1].clone()).collect();
    let mut on_spine = vec![false; n];
    for q in qd {
        for v in [q.u, q.x, q.v, q.y] {
            on_spine[v] = true;
        }
    }
    for v in p_int.iter().chain(&q_int).flatten() {
        on_spine[*v] = true;
    }
    let a_rest: Vec<Vertex> = gp.a.iter().copied().filter(|&v| !on_spine[v]).collect();
    let (u1, vr) = (qd[0].u, qd[r - 1].v);
    let cover = final_path_cover(d, &a_rest, &gp.b1, &gp.b2, u1, vr, gp.k, profile, rng::derive(seed, 22))?;
    let paths: Vec<&Vec<Vertex>> = cover.system.paths.iter().map(|p| &p.vertices).collect();

    // D'[R' ∪ V(E')]: keep path ends, merge x_i P_i y_i into z_i, drop the rest
    let ends: Vec<(Vertex, Vertex)> = paths.iter().map(|p| (p[0], *p.last().expect("nonempty"))).collect();
    let mut keep = vec![false; n];
    for &(s, t) in &ends {
        keep[s] = true;
        keep[t] = true;
    }
    for q in qd {
        keep[q.x] = true;
        keep[q.y] = true;
    }
    let deleted: Vec<Vertex> = (0..n).filter(|&v| !keep[v]).collect();
    let pairs: Vec<(Vertex, Vertex)> = qd.iter().map(|q| (q.x, q.y)).collect();
    let con = contract(d, &pairs, &deleted, p_int.clone())?;
    let lab = |v: Vertex| con.label[v].expect("kept vertex");
    let e_prime: Vec<(Vertex, Vertex)> = ends.iter().map(|&(s, t)| (lab(s), lab(t))).collect();
    let merged: Vec<Vertex> = con.records.iter().map(|rec| rec.z).collect();
    let weak = weak_connect(&con.digraph, &merged, &e_prime, profile, rng::derive(seed, 23))?;

    // C₁ = v_r S₁'' t₁ T₁ S_f(2) … T_m s₁ S₁' u₁
    let s1 = paths[0];
    let cut = s1.windows(2).position(|w| w == [u1, vr]).ok_or_else(|| Error::consistency("virtual edge not on first path"))?;
    let mut c1: Vec<Vertex> = s1[cut + 1..].to_vec();
    let mut used = vec![false; r];
    let m = weak.order.len();
    for kk in 0..m {
        for &z in &weak.connectors[kk] {
            if let Some(rec) = con.record_of(z) {
                used[rec.z - merged[0]] = true;
            }
        }
        c1.extend(con.expand(&weak.connectors[kk])?);
        if kk + 1 < m {
            c1.extend_from_slice(paths[weak.order[kk + 1]]);
        }
    }
    c1.extend_from_slice(&s1[..=cut]);

    // C₂ = u₁ Z₁ v₁ Q₁ u₂ … u_r Z_r v_r, skipping segments already used
    let mut cycle = c1;
    for (i, q) in qd.iter().enumerate() {
        if i > 0 {
            cycle.push(q.u);
        }
        if !used[i] {
            cycle.push(q.x);
            cycle.extend_from_slice(&p_int[i]);
            cycle.push(q.y);
        }
        if i + 1 < r {
            cycle.push(q.v);
            cycle.extend_from_slice(&q_int[i]);
        }
    }
    let cycle = HamiltonCycle { vertices: cycle };
    if !verify_hamilton(d, &cycle) {
        return Err(Error::consistency("assembled cycle fails verification"));
    }
    Ok(Assembly {
        cycle,
        spine_len: spine.cycle.len(),
        cover_paths: paths.len(),
        cycles_broken: cover.cycles_broken,
        reservoir_used: used.iter().filter(|&&b| b).count(),
        weak: WeakBudget { realized: weak.realized_length, budget: weak.budget },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Attempt {
    pub seed: u64,
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub n: usize,
    pub edges: usize,
    pub k: usize,
    pub ell: usize,
    pub r: usize,
    pub a_size: usize,
    pub a1_verdict: Verdict,
    pub attempts: Vec<Attempt>,
    pub failures: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assembly: Option<Assembly>,
}

impl RunReport {
    pub fn succeeded(&self) -> bool {
        self.assembly.is_some()
    }

    pub fn cycle(&self) -> Option<&HamiltonCycle> {
        self.assembly.as_ref().map(|a| &a.cycle)
    }
}

/// Up to 1 + retry_cap attempts with derived seeds. Stage-tagged failures
/// are tallied; input and consistency errors abort.
pub fn hamiltonize(d: &Digraph, profile: &ParameterProfile, seed: u64) -> Result<RunReport> {
    if d.n() < profile.min_n {
        return Err(Error::input(format!("n = {} is below the configured minimum {}", d.n(), profile.min_n)));
    }
    let mut report = RunReport {
        n: d.n(),
        edges: d.edge_count(),
        k: profile.k,
        ell: profile.ell,
        r: profile.r,
        a_size: profile.a_size,
        a1_verdict: check_a1(d, profile).verdict,
        attempts: Vec::new(),
        failures: BTreeMap::new(),
        assembly: None,
    };
    for attempt in 0..=profile.retry_cap {
        let s = rng::derive(seed, attempt as u64);
        match build_good_partition(d, profile, s).and_then(|gp| assemble_hamilton(d, &gp, profile, s)) {
            Ok(asm) => {
                report.attempts.push(Attempt { seed: s, outcome: "ok".into(), reason: None });
                report.assembly = Some(asm);
                break;
            }
            Err(Error::Failed { stage, reason }) => {
                *report.failures.entry(stage.to_string()).or_default() += 1;
                report.attempts.push(Attempt { seed: s, outcome: stage.to_string(), reason: Some(reason) });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}
