//! Certificates for the pseudorandomness conditions and the process property bundle.
//!
//! Set-quantified properties are enumerated exhaustively up to
//! `exhaustive_cap` vertices; above that a budgeted adversarial search can
//! only refute or give up.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::Serialize;

use crate::digraph::{Digraph, Sign, Vertex};
use crate::error::{Error, Result};
use crate::process::ProcessSnapshot;
use crate::profile::{iterated_log, ExpansionRule, ParameterProfile};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Certified,
    Refuted,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Vertex { v: Vertex, sign: Sign, degree: usize },
    DegreeSum { v: Vertex, sum: usize },
    Sets { sign: Sign, a: Vec<Vertex>, b: Vec<Vertex> },
    Set { sign: Sign, a: Vec<Vertex>, neighborhood: usize },
    Path { vertices: Vec<Vertex> },
    Size { size: usize, bound: f64 },
    Note { text: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub property: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub effort: u64,
    pub thresholds: BTreeMap<String, f64>,
}

impl Certificate {
    pub(crate) fn new(property: &str, thresholds: &[(&str, f64)]) -> Self {
        Certificate {
            property: property.to_string(),
            verdict: Verdict::Certified,
            witness: None,
            effort: 0,
            thresholds: thresholds.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub(crate) fn refute(mut self, w: Witness) -> Self {
        self.verdict = Verdict::Refuted;
        self.witness = Some(w);
        self
    }

    pub(crate) fn unknown(mut self) -> Self {
        self.verdict = Verdict::Unknown;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("certificates serialize")
    }
}

/// How set-quantified checks search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    /// Exhaustive when n ≤ exhaustive_cap, sampled otherwise.
    Auto,
    Sampled,
}

struct Masks {
    n: usize,
    nb: [Vec<u32>; 2],
}

fn sign_index(s: Sign) -> usize {
    match s {
        Sign::Out => 0,
        Sign::In => 1,
    }
}

impl Masks {
    fn new(d: &Digraph) -> Self {
        assert!(d.n() <= 31);
        let mk = |s: Sign| {
            (0..d.n())
                .map(|v| d.nbrs(v, s).iter().fold(0u32, |m, &w| m | (1 << w)))
                .collect()
        };
        Masks {
            n: d.n(),
            nb: [mk(Sign::Out), mk(Sign::In)],
        }
    }
}

fn bits(mask: u32) -> Vec<Vertex> {
    (0..32).filter(|i| mask >> i & 1 == 1).collect()
}

fn need_count(threshold: f64) -> usize {
    if threshold <= 0.0 {
        0
    } else {
        threshold.ceil() as usize
    }
}

pub(crate) fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// A1: δ± ≥ d log n and Δ± ≤ 10⁶ d log n.
pub fn check_a1(d: &Digraph, profile: &ParameterProfile) -> Certificate {
    let t = &profile.thresholds;
    degree_bounds(d, "A1", t.a1_min, t.a1_max)
}

fn degree_bounds(d: &Digraph, name: &str, lo: f64, hi: f64) -> Certificate {
    let mut c = Certificate::new(name, &[("min_degree", lo), ("max_degree", hi)]);
    for v in 0..d.n() {
        for s in Sign::BOTH {
            c.effort += 1;
            let deg = d.degree(v, s);
            if (deg as f64) < lo || (deg as f64) > hi {
                return c.refute(Witness::Vertex { v, sign: s, degree: deg });
            }
        }
    }
    c
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpansionVariant {
    A2,
    A3,
}

/// A2 or A3 with the profile's thresholds.
pub fn check_expansion_a2a3(d: &Digraph, profile: &ParameterProfile, variant: ExpansionVariant) -> Certificate {
    let (name, rule) = match variant {
        ExpansionVariant::A2 => ("A2", profile.thresholds.a2),
        ExpansionVariant::A3 => ("A3", profile.thresholds.a3),
    };
    check_expansion_rule(d, name, &rule, profile.exhaustive_cap, profile.search_budget, SearchMode::Auto)
}

/// Generic expansion rule check over disjoint (A, B), both signs.
pub fn check_expansion_rule(
    d: &Digraph,
    name: &str,
    rule: &ExpansionRule,
    cap: usize,
    budget: usize,
    mode: SearchMode,
) -> Certificate {
    let c = Certificate::new(
        name,
        &[
            ("degree", rule.degree),
            ("ratio", rule.ratio),
            ("set_cap", rule.set_cap as f64),
        ],
    );
    if mode == SearchMode::Auto && d.n() <= cap {
        expansion_exhaustive(d, rule, c)
    } else {
        expansion_search(d, rule, budget, c)
    }
}

fn expansion_exhaustive(d: &Digraph, rule: &ExpansionRule, mut c: Certificate) -> Certificate {
    let masks = Masks::new(d);
    let n = masks.n;
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let need = need_count(rule.degree) as u32;
    let cap = rule.set_cap.min(n);
    let mut analytic: u128 = 0;
    for a in 1..=cap {
        analytic += binom(n, a) << (n - a);
    }
    for s in Sign::BOTH {
        let nb = &masks.nb[sign_index(s)];
        for a_mask in 1..=full {
            let a_size = a_mask.count_ones() as usize;
            if a_size > cap {
                continue;
            }
            let a_list = bits(a_mask);
            let limit = rule.ratio * a_size as f64;
            let rest = full & !a_mask;
            let mut b = rest;
            loop {
                c.effort += 1;
                if (b.count_ones() as f64) < limit
                    && a_list.iter().all(|&v| (nb[v] & b).count_ones() >= need)
                {
                    return c.refute(Witness::Sets { sign: s, a: a_list, b: bits(b) });
                }
                if b == 0 {
                    break;
                }
                b = (b - 1) & rest;
            }
        }
    }
    if c.effort as u128 != 2 * analytic {
        return c.unknown();
    }
    c
}

/// Smallest B (greedy) giving every vertex of A at least `need` j-neighbours in B.
fn greedy_cover(d: &Digraph, a: &[Vertex], s: Sign, need: usize) -> Option<Vec<Vertex>> {
    let n = d.n();
    let mut in_a = vec![false; n];
    for &v in a {
        in_a[v] = true;
    }
    let mut deficit: Vec<usize> = vec![need; a.len()];
    let mut chosen = vec![false; n];
    let mut b = Vec::new();
    // who[w] = indices of A-vertices that have w as a j-neighbour
    let mut who: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &v) in a.iter().enumerate() {
        for &w in d.nbrs(v, s) {
            if !in_a[w] {
                who[w].push(i);
            }
        }
    }
    while deficit.iter().any(|&x| x > 0) {
        let best = (0..n)
            .filter(|&w| !chosen[w] && !in_a[w])
            .map(|w| (who[w].iter().filter(|&&i| deficit[i] > 0).count(), w))
            .filter(|&(gain, _)| gain > 0)
            .max_by(|x, y| x.0.cmp(&y.0).then(y.1.cmp(&x.1)))?;
        let w = best.1;
        chosen[w] = true;
        b.push(w);
        for &i in &who[w] {
            deficit[i] = deficit[i].saturating_sub(1);
        }
    }
    b.sort_unstable();
    Some(b)
}

fn expansion_search(d: &Digraph, rule: &ExpansionRule, budget: usize, mut c: Certificate) -> Certificate {
    let n = d.n();
    if n == 0 || rule.set_cap == 0 {
        return c;
    }
    let need = need_count(rule.degree);
    let cap = rule.set_cap.min(n);
    let mut r = rng::stream(n as u64, 0xE7A5);
    let test = |a: Vec<Vertex>, s: Sign, c: &mut Certificate| -> Option<Witness> {
        c.effort += 1;
        let b = greedy_cover(d, &a, s, need)?;
        ((b.len() as f64) < rule.ratio * a.len() as f64).then_some(Witness::Sets { sign: s, a, b })
    };
    for s in Sign::BOTH {
        // singletons around the lowest degrees first
        let mut order: Vec<Vertex> = (0..n).collect();
        order.sort_by_key(|&v| (d.degree(v, s), v));
        for &v in &order {
            if let Some(w) = test(vec![v], s, &mut c) {
                return c.refute(w);
            }
        }
        for _ in 0..budget / 2 {
            let v = order[r.gen_range(0..n.min(order.len()))];
            let size = r.gen_range(1..=cap);
            // cluster: v plus vertices sharing j-neighbours with v
            let mut share = vec![0usize; n];
            for &w in d.nbrs(v, s) {
                for &u in d.nbrs(w, s.flip()) {
                    share[u] += 1;
                }
            }
            let mut cand: Vec<Vertex> = (0..n).filter(|&u| u != v).collect();
            cand.shuffle(&mut r);
            cand.sort_by_key(|&u| std::cmp::Reverse(share[u]));
            let mut a = vec![v];
            a.extend(cand.into_iter().take(size - 1));
            a.sort_unstable();
            if let Some(w) = test(a, s, &mut c) {
                return c.refute(w);
            }
        }
    }
    c.unknown()
}

/// A4: every |A| = m has |N±(A)| ≥ (1/2+ε)n.
pub fn check_a4(d: &Digraph, profile: &ParameterProfile) -> Result<Certificate> {
    check_a4_with(d, profile, SearchMode::Auto)
}

pub fn check_a4_with(d: &Digraph, profile: &ParameterProfile, mode: SearchMode) -> Result<Certificate> {
    let m = profile.thresholds.a4_size;
    let target = profile.thresholds.a4_target;
    let n = d.n();
    if m > n {
        return Err(Error::input(format!("A4 set size m={m} exceeds n={n}")));
    }
    let mut c = Certificate::new("A4", &[("set_size", m as f64), ("target", target)]);
    if mode == SearchMode::Auto && n <= profile.exhaustive_cap {
        let masks = Masks::new(d);
        if m == 0 {
            return Ok(c);
        }
        for s in Sign::BOTH {
            let nb = &masks.nb[sign_index(s)];
            let mut a: u32 = (1u32 << m) - 1;
            while a < (1u32 << n) {
                c.effort += 1;
                let hood = bits(a).iter().fold(0u32, |acc, &v| acc | nb[v]) & !a;
                if (hood.count_ones() as f64) < target {
                    return Ok(c.refute(Witness::Set {
                        sign: s,
                        a: bits(a),
                        neighborhood: hood.count_ones() as usize,
                    }));
                }
                // next subset of the same size (Gosper)
                let lo = a & a.wrapping_neg();
                let hi = a + lo;
                a = (((hi ^ a) >> 2) / lo) | hi;
            }
        }
        if c.effort as u128 != 2 * binom(n, m) {
            return Ok(c.unknown());
        }
        return Ok(c);
    }
    let mut r = rng::stream(n as u64, 0xA4);
    let size_of = |a: &[Vertex], s: Sign| d.neighborhood(a, s).map(|h| h.len()).unwrap_or(0);
    for s in Sign::BOTH {
        let mut candidates: Vec<Vec<Vertex>> = Vec::new();
        let mut by_deg: Vec<Vertex> = (0..n).collect();
        by_deg.sort_by_key(|&v| (d.degree(v, s), v));
        candidates.push(by_deg[..m].to_vec());
        // greedy: grow A by the vertex adding fewest new neighbours
        if m > 0 {
            let mut a = vec![by_deg[0]];
            while a.len() < m {
                let best = (0..n)
                    .filter(|v| !a.contains(v))
                    .min_by_key(|&v| {
                        let mut t = a.clone();
                        t.push(v);
                        (size_of(&t, s), v)
                    })
                    .expect("m <= n");
                a.push(best);
            }
            candidates.push(a);
        }
        let mut all: Vec<Vertex> = (0..n).collect();
        for _ in 0..profile.search_budget / 2 {
            all.shuffle(&mut r);
            candidates.push(all[..m].to_vec());
        }
        for mut a in candidates {
            c.effort += 1;
            a.sort_unstable();
            let h = size_of(&a, s);
            if (h as f64) < target {
                return Ok(c.refute(Witness::Set { sign: s, a, neighborhood: h }));
            }
        }
    }
    Ok(c.unknown())
}

/// Thresholds of the process bundle at a snapshot.
#[derive(Clone, Debug, Serialize)]
pub struct BundleThresholds {
    pub r1_max_degree: f64,
    pub r2_degree_sum: f64,
    pub r3_low_degree: f64,
    pub r3_max_low: f64,
    pub r4_min_a: f64,
    pub r4_min_b: f64,
    pub r4_slack: f64,
    pub r5: ExpansionRule,
    pub r6: ExpansionRule,
}

impl BundleThresholds {
    pub fn at(snap: &ProcessSnapshot, eps: f64) -> Self {
        let n = snap.n();
        let nf = n.max(2) as f64;
        let ln = nf.ln();
        let m = snap.m as f64;
        let dm = snap.d_m();
        let mm = snap.m_m();
        let cap = if (4.0 * mm).is_finite() {
            ((4.0 * mm).floor() as usize).min(n)
        } else {
            n
        };
        BundleThresholds {
            r1_max_degree: 100.0 * m / nf,
            r2_degree_sum: 2.0 * m / (1e3 * nf),
            r3_low_degree: snap.low_threshold(),
            r3_max_low: nf.sqrt(),
            r4_min_a: mm / 2.0,
            r4_min_b: nf / 2.0,
            r4_slack: eps / 100.0,
            r5: ExpansionRule {
                degree: dm * iterated_log(nf, 2) / (4.0 * iterated_log(nf, 4)),
                ratio: 10.0,
                set_cap: cap,
            },
            r6: ExpansionRule {
                degree: dm * ln.powf(2.0 / 3.0) / 4.0,
                ratio: ln.cbrt(),
                set_cap: cap,
            },
        }
    }
}

/// R1–R6 at a process snapshot.
pub fn check_bundle_r(snap: &ProcessSnapshot, eps: f64) -> Vec<Certificate> {
    check_bundle_r_with(snap, eps, 14, 4000)
}

pub fn check_bundle_r_with(snap: &ProcessSnapshot, eps: f64, cap: usize, budget: usize) -> Vec<Certificate> {
    let t = BundleThresholds::at(snap, eps);
    let d = &snap.digraph;
    crate::par::map_indexed(6, |i| match i {
        0 => degree_bounds(d, "R1", f64::NEG_INFINITY, t.r1_max_degree),
        1 => check_r2(d, t.r2_degree_sum),
        2 => check_r3(d, t.r3_low_degree, t.r3_max_low),
        3 => check_r4(d, &t, snap.p_m(), cap, budget),
        4 => check_expansion_rule(d, "R5", &t.r5, cap, budget, SearchMode::Auto),
        _ => check_expansion_rule(d, "R6", &t.r6, cap, budget, SearchMode::Auto),
    })
}

fn check_r2(d: &Digraph, bound: f64) -> Certificate {
    let mut c = Certificate::new("R2", &[("degree_sum", bound)]);
    for v in 0..d.n() {
        c.effort += 1;
        let sum = d.degree(v, Sign::Out) + d.degree(v, Sign::In);
        if (sum as f64) < bound {
            return c.refute(Witness::DegreeSum { v, sum });
        }
    }
    c
}

/// Undirected simple neighbourhoods.
fn underlying(d: &Digraph) -> Vec<Vec<Vertex>> {
    (0..d.n())
        .map(|v| {
            let mut l: Vec<Vertex> = d.out_nbrs(v).iter().chain(d.in_nbrs(v)).copied().collect();
            l.sort_unstable();
            l.dedup();
            l
        })
        .collect()
}

/// A path of length ≤ 4 between two distinct S-vertices, or a cycle of
/// length ≤ 4 through an S-vertex, ignoring orientation.
pub fn find_s_structure(d: &Digraph, s_set: &[Vertex]) -> Option<Vec<Vertex>> {
    let n = d.n();
    let und = underlying(d);
    let mut in_s = vec![false; n];
    for &v in s_set {
        in_s[v] = true;
    }
    for &s in s_set {
        // 2-cycle of two distinct edges
        if let Some(&u) = d.out_nbrs(s).iter().find(|&&u| d.has_edge(u, s)) {
            return Some(vec![s, u, s]);
        }
        // 3- and 4-cycles through s
        let nb = &und[s];
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if und[a].binary_search(&b).is_ok() {
                    return Some(vec![s, a, b, s]);
                }
                if let Some(&c) = und[a]
                    .iter()
                    .find(|&&c| c != s && und[b].binary_search(&c).is_ok())
                {
                    return Some(vec![s, a, c, b, s]);
                }
            }
        }
        // S-path: BFS to depth 4
        let mut parent = vec![usize::MAX; n];
        parent[s] = s;
        let mut frontier = vec![s];
        for _ in 0..4 {
            let mut next = Vec::new();
            for &v in &frontier {
                for &w in &und[v] {
                    if parent[w] != usize::MAX {
                        continue;
                    }
                    parent[w] = v;
                    if in_s[w] {
                        let mut path = vec![w];
                        let mut x = w;
                        while x != s {
                            x = parent[x];
                            path.push(x);
                        }
                        path.reverse();
                        return Some(path);
                    }
                    next.push(w);
                }
            }
            frontier = next;
        }
    }
    None
}

fn check_r3(d: &Digraph, low: f64, max_low: f64) -> Certificate {
    let mut c = Certificate::new("R3", &[("low_degree", low), ("max_low", max_low)]);
    let s = crate::process::low_degree_set(d, low);
    c.effort = s.len() as u64;
    if (s.len() as f64) > max_low {
        return c.refute(Witness::Size { size: s.len(), bound: max_low });
    }
    match find_s_structure(d, &s) {
        Some(p) => c.refute(Witness::Path { vertices: p }),
        None => c,
    }
}

fn edges_between(d: &Digraph, a: &[Vertex], b_mask: &[bool], s: Sign) -> usize {
    a.iter().map(|&v| d.degree_into(v, b_mask, s)).sum()
}

fn check_r4(d: &Digraph, t: &BundleThresholds, p: f64, cap: usize, budget: usize) -> Certificate {
    let mut c = Certificate::new(
        "R4",
        &[
            ("min_a", t.r4_min_a),
            ("min_b", t.r4_min_b),
            ("slack", t.r4_slack),
            ("p", p),
        ],
    );
    let n = d.n();
    let amin = (t.r4_min_a.ceil().max(1.0)) as usize;
    let bmin = (t.r4_min_b.ceil().max(1.0)) as usize;
    if amin + bmin > n {
        return c;
    }
    let bad = |a: &[Vertex], b: &[Vertex], s: Sign| {
        let mask = d.mask(b);
        let e = edges_between(d, a, &mask, s) as f64;
        let base = p * a.len() as f64 * b.len() as f64;
        e < (1.0 - t.r4_slack) * base || e > (1.0 + t.r4_slack) * base
    };
    if n <= cap {
        let full: u32 = (1u32 << n) - 1;
        let mut analytic: u128 = 0;
        for s in Sign::BOTH {
            for a_mask in 1..=full {
                let asz = a_mask.count_ones() as usize;
                if asz < amin {
                    continue;
                }
                let a = bits(a_mask);
                let rest = full & !a_mask;
                let mut b = rest;
                loop {
                    if b.count_ones() as usize >= bmin {
                        c.effort += 1;
                        let bl = bits(b);
                        if bad(&a, &bl, s) {
                            return c.refute(Witness::Sets { sign: s, a, b: bl });
                        }
                    }
                    if b == 0 {
                        break;
                    }
                    b = (b - 1) & rest;
                }
            }
        }
        for asz in amin..=n {
            for bsz in bmin..=n - asz {
                analytic += binom(n, asz) * binom(n - asz, bsz);
            }
        }
        if c.effort as u128 != 2 * analytic {
            return c.unknown();
        }
        return c;
    }
    let mut r = rng::stream(n as u64, 0xB4);
    for s in Sign::BOTH {
        let mut order: Vec<Vertex> = (0..n).collect();
        let mut tries: Vec<(Vec<Vertex>, Vec<Vertex>)> = Vec::new();
        for low in [true, false] {
            order.sort_by_key(|&v| {
                let k = d.degree(v, s) as i64;
                (if low { k } else { -k }, v)
            });
            let a = order[..amin].to_vec();
            let mut rest: Vec<Vertex> = order[amin..].to_vec();
            rest.sort_by_key(|&v| {
                let k = d.degree(v, s.flip()) as i64;
                (if low { k } else { -k }, v)
            });
            tries.push((a, rest[..bmin].to_vec()));
        }
        for _ in 0..budget / 2 {
            order.shuffle(&mut r);
            let asz = r.gen_range(amin..=n - bmin);
            let bsz = r.gen_range(bmin..=n - asz);
            tries.push((order[..asz].to_vec(), order[asz..asz + bsz].to_vec()));
        }
        for (mut a, mut b) in tries {
            c.effort += 1;
            if bad(&a, &b, s) {
                a.sort_unstable();
                b.sort_unstable();
                return c.refute(Witness::Sets { sign: s, a, b });
            }
        }
    }
    c.unknown()
}
