//! Division of a vertex set into prescribed-size parts that keep
//! proportional degrees, by resampling the variables of violated events.

use rand::Rng as _;
use serde::Serialize;

use crate::cert::{Certificate, Verdict, Witness};
use crate::digraph::{Digraph, Sign, Vertex};
use crate::error::{Error, Result, Stage};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivisionSpec {
    pub set: Vec<Vertex>,
    pub sizes: Vec<usize>,
    pub delta: f64,
    pub big_delta: f64,
    pub m: usize,
    pub eps: f64,
}

impl DivisionSpec {
    /// Spec whose degree window is read off `d`: δ is the least degree into
    /// `set`, Δ the largest semidegree.
    pub fn fitted(d: &Digraph, set: Vec<Vertex>, sizes: Vec<usize>, m: usize, eps: f64) -> Self {
        let mask = d.mask(&set);
        let delta = (0..d.n())
            .flat_map(|v| Sign::BOTH.map(|s| d.degree_into(v, &mask, s)))
            .min()
            .unwrap_or(0) as f64;
        DivisionSpec { set, sizes, delta, big_delta: d.max_semidegree() as f64, m, eps }
    }
}

/// Desk-mode division of `set` inside `d[host]`; parts come back in host ids.
#[allow(clippy::too_many_arguments)]
pub fn divide_induced(
    d: &Digraph,
    host: &[Vertex],
    set: &[Vertex],
    sizes: Vec<usize>,
    m: usize,
    eps: f64,
    seed: u64,
    max_rounds: usize,
) -> Result<Division> {
    let sub = d.induced(host)?;
    let mut local = vec![usize::MAX; d.n()];
    for (i, &v) in host.iter().enumerate() {
        local[v] = i;
    }
    let mut lset = Vec::with_capacity(set.len());
    for &v in set {
        if local[v] == usize::MAX {
            return Err(Error::input(format!("vertex {v} of the divided set is outside the host")));
        }
        lset.push(local[v]);
    }
    let spec = DivisionSpec::fitted(&sub.digraph, lset, sizes, m, eps);
    let mut div = divide(&sub.digraph, &spec, DivisionMode::Desk, seed, max_rounds)?;
    let back = |vs: &mut Vec<Vertex>| {
        for v in vs.iter_mut() {
            *v = sub.original[*v];
        }
        vs.sort_unstable();
    };
    div.parts.iter_mut().for_each(back);
    back(&mut div.residual);
    Ok(div)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DivisionMode {
    /// Sample with the original probabilities and check the sampled-set
    /// events; also spot-check m-set expansion into every part.
    Strict,
    /// Wider sampling margin; events are read off the final parts.
    Desk,
}

#[derive(Clone, Debug, Serialize)]
pub struct Division {
    pub parts: Vec<Vec<Vertex>>,
    pub residual: Vec<Vertex>,
    pub rounds: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f2: Option<Certificate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionValue {
    pub condition: &'static str,
    pub part: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FeasibilityReport {
    pub values: Vec<ConditionValue>,
}

impl FeasibilityReport {
    pub fn holds(&self, condition: &str) -> bool {
        self.values.iter().filter(|v| v.condition == condition).all(|v| v.holds)
    }

    pub fn all_hold(&self) -> bool {
        self.values.iter().all(|v| v.holds)
    }
}

/// Evaluates the four size conditions for every part. Sides involving
/// exp(·) are compared in log space, so overflowing values still decide.
pub fn check_feasibility(spec: &DivisionSpec, n: usize) -> FeasibilityReport {
    let a = spec.set.len() as f64;
    let l = spec.sizes.len() as f64;
    let nf = n as f64;
    let e2 = spec.eps * spec.eps;
    let mf = spec.m.max(1) as f64;
    let mut values = Vec::new();
    for (i, &ai) in spec.sizes.iter().enumerate() {
        let ai = ai as f64;
        let base = if a > 0.0 { e2 * ai * ai / a } else { 0.0 };
        let x = if a > 0.0 { ai * spec.delta / (24.0 * a) } else { 0.0 };
        let c1_rhs = 1e3 * l.powi(3);
        values.push(ConditionValue { condition: "C1", part: i, lhs: base, rhs: c1_rhs, holds: base >= c1_rhs });
        let c2_rhs = 1e5 * l.powi(3) * nf;
        let c2_holds = base > 0.0 && base.ln() + x >= c2_rhs.ln();
        values.push(ConditionValue { condition: "C2", part: i, lhs: base * x.exp(), rhs: c2_rhs, holds: c2_holds });
        let c3_rhs = 320.0 * l * spec.big_delta * spec.big_delta;
        values.push(ConditionValue { condition: "C3", part: i, lhs: x.exp(), rhs: c3_rhs, holds: x >= c3_rhs.ln() });
        let c4_lhs = e2 * ai / 1e3;
        let c4_rhs = mf * (std::f64::consts::E * nf / mf).ln();
        values.push(ConditionValue { condition: "C4", part: i, lhs: c4_lhs, rhs: c4_rhs, holds: c4_lhs >= c4_rhs });
    }
    FeasibilityReport { values }
}

const NONE: usize = usize::MAX;

struct Sampler {
    /// cumulative thresholds for labels 1..=ℓ then 0 (B₀)
    cumulative: Vec<(f64, usize)>,
}

impl Sampler {
    fn new(sizes: &[usize], a: usize, eps: f64, mode: DivisionMode) -> Self {
        let af = a as f64;
        let l = sizes.len();
        let a_min = *sizes.iter().min().expect("at least one part") as f64;
        let a_max = *sizes.iter().max().expect("at least one part") as f64;
        let mut p = eps * a_min / (10.0 * l as f64 * af);
        if mode == DivisionMode::Desk {
            p = p.max(2.0 * a_max.sqrt() / af).min(a_min / (2.0 * af));
        }
        let pi: Vec<f64> = sizes.iter().map(|&s| (s as f64 / af - p).max(0.0)).collect();
        let total: f64 = pi.iter().sum();
        let p0 = (1.0 - total).min((l as f64 + 1.0) * p).max(0.0);
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(l + 1);
        for (i, &x) in pi.iter().enumerate() {
            acc += x;
            cumulative.push((acc, i + 1));
        }
        acc += p0;
        cumulative.push((acc, 0));
        Sampler { cumulative }
    }

    fn draw(&self, r: &mut rng::Rng) -> usize {
        let x: f64 = r.gen();
        self.cumulative.iter().find(|(c, _)| x < *c).map_or(NONE, |&(_, l)| l)
    }
}

fn validate(d: &Digraph, spec: &DivisionSpec) -> Result<Vec<bool>> {
    let n = d.n();
    if spec.sizes.is_empty() {
        return Err(Error::input("division needs at least one part"));
    }
    if spec.delta > spec.big_delta {
        return Err(Error::input("division needs delta <= Delta"));
    }
    let in_a = d.mask(&spec.set);
    if in_a.iter().filter(|&&b| b).count() != spec.set.len() || spec.set.iter().any(|&v| v >= n) {
        return Err(Error::input("division set has repeated or out-of-range vertices"));
    }
    if spec.sizes.iter().sum::<usize>() > spec.set.len() {
        return Err(Error::input("part sizes exceed |A|"));
    }
    for v in 0..n {
        for s in Sign::BOTH {
            let into = d.degree_into(v, &in_a, s) as f64;
            if into < spec.delta || d.degree(v, s) as f64 > spec.big_delta {
                return Err(Error::input(format!(
                    "vertex {v} has d{}(v,A)={into}, d{}(v)={} outside [{}, {}]",
                    s.symbol(),
                    s.symbol(),
                    d.degree(v, s),
                    spec.delta,
                    spec.big_delta
                )));
            }
        }
    }
    Ok(in_a)
}

/// Per-vertex degree counts into every label (index 0 = B₀, i = part i).
fn counts(d: &Digraph, set: &[Vertex], label: &[usize], parts: usize) -> [Vec<Vec<u32>>; 2] {
    let n = d.n();
    let mut out = vec![vec![0u32; parts + 1]; n];
    let mut inn = vec![vec![0u32; parts + 1]; n];
    for &u in set {
        let l = label[u];
        if l == NONE {
            continue;
        }
        for &v in d.in_nbrs(u) {
            out[v][l] += 1;
        }
        for &v in d.out_nbrs(u) {
            inn[v][l] += 1;
        }
    }
    [out, inn]
}

/// Final parts from labels: overflow moves to B₀ (highest ids first), then
/// parts are topped up from B₀ in id order. `None` if B₀ runs short.
fn finalize(set_sorted: &[Vertex], label: &[usize], sizes: &[usize]) -> Option<Vec<usize>> {
    let mut fin = label.to_vec();
    let l = sizes.len();
    let mut members: Vec<Vec<Vertex>> = vec![Vec::new(); l + 1];
    for &v in set_sorted {
        if fin[v] != NONE {
            members[fin[v]].push(v);
        }
    }
    for i in 1..=l {
        while members[i].len() > sizes[i - 1] {
            let v = members[i].pop().expect("nonempty");
            fin[v] = 0;
            members[0].push(v);
        }
    }
    members[0].sort_unstable();
    let mut pool = members[0].iter();
    for i in 1..=l {
        for _ in members[i].len()..sizes[i - 1] {
            let &v = pool.next()?;
            fin[v] = i;
        }
    }
    for &v in pool {
        fin[v] = NONE;
    }
    Some(fin)
}

/// First vertex whose counts violate `[lo_i, hi_i]` for some part (and, if
/// given, the B₀ ceiling).
fn first_bad_vertex(
    n: usize,
    cnt: &[Vec<Vec<u32>>; 2],
    lo: &[f64],
    hi: &[f64],
    b0_max: Option<f64>,
) -> Option<(Vertex, Sign, usize, u32)> {
    for v in 0..n {
        for (s, side) in Sign::BOTH.into_iter().zip(cnt) {
            let c = &side[v];
            for i in 1..c.len() {
                let x = c[i] as f64;
                if x < lo[i - 1] || x > hi[i - 1] {
                    return Some((v, s, i, c[i]));
                }
            }
            if let Some(mx) = b0_max {
                if c[0] as f64 > mx {
                    return Some((v, s, 0, c[0]));
                }
            }
        }
    }
    None
}

/// Verify F1 on final parts for every vertex of `d`: aᵢδ/4a ≤ d±(v, Aᵢ) ≤ 4aᵢΔ/a.
pub fn verify_f1(d: &Digraph, spec: &DivisionSpec, parts: &[Vec<Vertex>]) -> Option<(Vertex, Sign, usize, usize)> {
    verify_f1_with(d, spec, parts, DivisionMode::Strict)
}

/// Lower end of the F1 window; desk mode rounds it down to an integer.
fn f1_low(ai: f64, spec: &DivisionSpec, mode: DivisionMode) -> f64 {
    let lo = ai * spec.delta / (4.0 * spec.set.len() as f64);
    match mode {
        DivisionMode::Strict => lo,
        DivisionMode::Desk => lo.floor(),
    }
}

/// F1 with the window of `mode`.
pub fn verify_f1_with(
    d: &Digraph,
    spec: &DivisionSpec,
    parts: &[Vec<Vertex>],
    mode: DivisionMode,
) -> Option<(Vertex, Sign, usize, usize)> {
    let a = spec.set.len() as f64;
    for (i, part) in parts.iter().enumerate() {
        let ai = spec.sizes[i] as f64;
        let (lo, hi) = (f1_low(ai, spec, mode), 4.0 * ai * spec.big_delta / a);
        let mask = d.mask(part);
        for v in 0..d.n() {
            for s in Sign::BOTH {
                let k = d.degree_into(v, &mask, s);
                if (k as f64) < lo || (k as f64) > hi {
                    return Some((v, s, i, k));
                }
            }
        }
    }
    None
}

pub fn divide(d: &Digraph, spec: &DivisionSpec, mode: DivisionMode, seed: u64, max_rounds: usize) -> Result<Division> {
    let in_a = validate(d, spec)?;
    let n = d.n();
    let l = spec.sizes.len();
    let a = spec.set.len();
    let af = a as f64;
    let mut set = spec.set.clone();
    set.sort_unstable();
    let sampler = Sampler::new(&spec.sizes, a, spec.eps, mode);
    let mut r = rng::stream(seed, 0xD1);
    let mut label = vec![NONE; n];
    for &v in &set {
        label[v] = sampler.draw(&mut r);
    }
    let a_min = *spec.sizes.iter().min().expect("validated") as f64;
    let lo: Vec<f64> = spec.sizes.iter().map(|&s| f1_low(s as f64, spec, mode)).collect();
    let hi_factor = if mode == DivisionMode::Strict { 2.0 } else { 4.0 };
    let hi: Vec<f64> = spec.sizes.iter().map(|&s| hi_factor * s as f64 * spec.big_delta / af).collect();
    let b0_max = (mode == DivisionMode::Strict).then_some(2.0 * a_min * spec.big_delta / af);
    let needed: usize = spec.sizes.iter().sum();
    let mut last = String::from("no round ran");
    let mut restarts_left = 3usize;
    for round in 0..max_rounds.max(1) {
        let resample_all = |label: &mut Vec<usize>, r: &mut rng::Rng| {
            for &v in &set {
                label[v] = sampler.draw(r);
            }
        };
        let (fin, event) = match mode {
            DivisionMode::Strict => {
                let mut sz = vec![0usize; l + 1];
                let mut assigned = 0;
                for &v in &set {
                    if label[v] != NONE {
                        sz[label[v]] += 1;
                        assigned += 1;
                    }
                }
                if (1..=l).any(|i| sz[i] > spec.sizes[i - 1]) || assigned < needed {
                    last = format!("size event: part sizes {:?}, assigned {assigned} < {needed} or overflow", &sz[1..]);
                    resample_all(&mut label, &mut r);
                    continue;
                }
                let cnt = counts(d, &set, &label, l);
                (finalize(&set, &label, &spec.sizes), first_bad_vertex(n, &cnt, &lo, &hi, b0_max))
            }
            DivisionMode::Desk => match finalize(&set, &label, &spec.sizes) {
                None => {
                    last = "size event: reserve too small to fill parts".into();
                    resample_all(&mut label, &mut r);
                    continue;
                }
                Some(fin) => {
                    let cnt = counts(d, &set, &fin, l);
                    let ev = first_bad_vertex(n, &cnt, &lo, &hi, None);
                    (Some(fin), ev)
                }
            },
        };
        if let Some((v, s, i, c)) = event {
            last = format!("vertex {v}: d{}(v, part {i}) = {c}", s.symbol());
            let support: Vec<Vertex> = d
                .out_nbrs(v)
                .iter()
                .chain(d.in_nbrs(v))
                .copied()
                .filter(|&w| in_a[w])
                .collect();
            for w in support {
                label[w] = sampler.draw(&mut r);
            }
            continue;
        }
        let fin = fin.ok_or_else(|| Error::consistency("top-up failed after size check"))?;
        let mut parts: Vec<Vec<Vertex>> = vec![Vec::new(); l];
        let mut residual = Vec::new();
        for &v in &set {
            match fin[v] {
                NONE | 0 => residual.push(v),
                i => parts[i - 1].push(v),
            }
        }
        if let Some((v, s, i, k)) = verify_f1_with(d, spec, &parts, mode) {
            return Err(Error::consistency(format!(
                "F1 re-verification failed at vertex {v}, sign {}, part {i}, degree {k}",
                s.symbol()
            )));
        }
        let mut division = Division { parts, residual, rounds: round + 1, f2: None };
        if mode == DivisionMode::Strict {
            let cert = certify_f2(d, spec, &division, 14, 400, seed);
            if cert.verdict == Verdict::Refuted && restarts_left > 0 {
                restarts_left -= 1;
                last = "F2 refuted on a sampled set".into();
                resample_all(&mut label, &mut r);
                continue;
            }
            division.f2 = Some(cert);
        }
        return Ok(division);
    }
    Err(Error::failed(Stage::Division, format!("max_rounds={max_rounds} exhausted; last event: {last}")))
}

/// F2 on a division: every |U| = m has |N±(U, Aᵢ)| ≥ (1/2+ε/2)aᵢ.
/// Exhaustive for n ≤ `cap`, sampled otherwise.
pub fn certify_f2(d: &Digraph, spec: &DivisionSpec, division: &Division, cap: usize, budget: usize, seed: u64) -> Certificate {
    let n = d.n();
    let m = spec.m.min(n);
    let mut cert = Certificate {
        property: "F2".into(),
        verdict: Verdict::Certified,
        witness: None,
        effort: 0,
        thresholds: [("set_size".to_string(), m as f64), ("fraction".to_string(), 0.5 + spec.eps / 2.0)]
            .into_iter()
            .collect(),
    };
    if m == 0 {
        return cert;
    }
    let masks: Vec<Vec<bool>> = division.parts.iter().map(|p| d.mask(p)).collect();
    let check = |u: &[Vertex], cert: &mut Certificate| -> bool {
        for s in Sign::BOTH {
            let hood = d.neighborhood(u, s).expect("valid set");
            for (i, mask) in masks.iter().enumerate() {
                cert.effort += 1;
                let k = hood.iter().filter(|&&w| mask[w]).count();
                if (k as f64) < (0.5 + spec.eps / 2.0) * spec.sizes[i] as f64 {
                    cert.verdict = Verdict::Refuted;
                    cert.witness = Some(Witness::Set { sign: s, a: u.to_vec(), neighborhood: k });
                    return false;
                }
            }
        }
        true
    };
    if n <= cap {
        let mut u: u32 = (1u32 << m) - 1;
        while u < (1u32 << n) {
            let set: Vec<Vertex> = (0..n).filter(|i| u >> i & 1 == 1).collect();
            if !check(&set, &mut cert) {
                return cert;
            }
            let lo = u & u.wrapping_neg();
            let hi = u + lo;
            u = (((hi ^ u) >> 2) / lo) | hi;
        }
        return cert;
    }
    let mut r = rng::stream(seed, 0xF2);
    let mut all: Vec<Vertex> = (0..n).collect();
    for _ in 0..budget {
        for i in 0..m {
            let j = r.gen_range(i..n);
            all.swap(i, j);
        }
        let mut u = all[..m].to_vec();
        u.sort_unstable();
        if !check(&u, &mut cert) {
            return cert;
        }
    }
    cert.verdict = Verdict::Unknown;
    cert
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::sample_gnp;

    fn spec_for(d: &Digraph, set: Vec<Vertex>, sizes: Vec<usize>, eps: f64) -> DivisionSpec {
        let mask = d.mask(&set);
        let delta = (0..d.n())
            .flat_map(|v| Sign::BOTH.map(|s| d.degree_into(v, &mask, s)))
            .min()
            .unwrap() as f64;
        let big = d.max_semidegree() as f64;
        DivisionSpec { set, sizes, delta, big_delta: big, m: 2, eps }
    }

    fn independent_f1(d: &Digraph, spec: &DivisionSpec, div: &Division, mode: DivisionMode) -> bool {
        let a = spec.set.len() as f64;
        div.parts.iter().enumerate().all(|(i, part)| {
            let ai = spec.sizes[i] as f64;
            (0..d.n()).all(|v| {
                let out = part.iter().filter(|&&w| d.has_edge(v, w)).count() as f64;
                let inn = part.iter().filter(|&&w| d.has_edge(w, v)).count() as f64;
                let lo = ai * spec.delta / (4.0 * a);
                let lo = if mode == DivisionMode::Desk { lo.floor() } else { lo };
                [out, inn].iter().all(|&k| lo <= k && k <= 4.0 * ai * spec.big_delta / a)
            })
        })
    }

    fn assert_shape(spec: &DivisionSpec, div: &Division) {
        let mut seen = vec![0; spec.set.iter().max().map_or(0, |m| m + 1)];
        for (i, p) in div.parts.iter().enumerate() {
            assert_eq!(p.len(), spec.sizes[i]);
            for &v in p {
                seen[v] += 1;
            }
        }
        for &v in &div.residual {
            seen[v] += 1;
        }
        for &v in &spec.set {
            assert_eq!(seen[v], 1);
        }
        assert_eq!(seen.iter().sum::<usize>(), spec.set.len());
    }

    #[test]
    fn feasibility_by_hand() {
        let spec = DivisionSpec { set: (0..50).collect(), sizes: vec![50], delta: 50.0, big_delta: 50.0, m: 1, eps: 1.0 };
        let rep = check_feasibility(&spec, 50);
        let get = |c: &str| rep.values.iter().find(|v| v.condition == c).unwrap().clone();
        // C1: 50 >= 1000
        assert_eq!((get("C1").lhs, get("C1").rhs, get("C1").holds), (50.0, 1000.0, false));
        // C2: 50·e^{50/24} >= 10^5·50
        assert!((get("C2").lhs - 50.0 * (50.0f64 / 24.0).exp()).abs() < 1e-9);
        assert!(!get("C2").holds);
        // C3: e^{50/24} ≈ 8.03 >= 320·2500
        assert!(!get("C3").holds);
        // C4: 0.05 >= ln(50e) ≈ 4.91
        assert!((get("C4").rhs - (50.0 * std::f64::consts::E).ln()).abs() < 1e-12);
        assert!(!get("C4").holds);

        let zero = DivisionSpec { sizes: vec![0], ..spec };
        assert!(!check_feasibility(&zero, 50).holds("C1"));
    }

    #[test]
    fn feasibility_at_large_n() {
        let n = 1_000_000;
        let spec = DivisionSpec {
            set: (0..n).collect(),
            sizes: vec![400_000, 400_000],
            delta: 5e4,
            big_delta: 6e4,
            m: 5,
            eps: 0.5,
        };
        let rep = check_feasibility(&spec, n);
        assert_eq!(rep.values.len(), 8);
        // C1: 0.25·1.6e11/1e6 = 40000 >= 8000; C4: 100 >= 5 ln(2e5 e) ≈ 66
        let c1 = rep.values.iter().find(|v| v.condition == "C1").unwrap();
        assert!((c1.lhs - 40_000.0).abs() < 1e-6);
        assert!(rep.all_hold());
        let tight = DivisionSpec { m: 10, ..spec };
        let rep = check_feasibility(&tight, n);
        assert!(rep.holds("C1") && rep.holds("C2") && rep.holds("C3") && !rep.holds("C4"));
    }

    #[test]
    fn complete_twenty_two_parts() {
        let d = Digraph::complete(20);
        let spec = DivisionSpec { set: (0..20).collect(), sizes: vec![8, 8], delta: 19.0, big_delta: 19.0, m: 2, eps: 0.2 };
        for mode in [DivisionMode::Desk, DivisionMode::Strict] {
            let div = divide(&d, &spec, mode, 1, 10_000).unwrap();
            assert_shape(&spec, &div);
            assert!(independent_f1(&d, &spec, &div, mode));
        }
    }

    #[test]
    fn single_part_is_whole_set() {
        let d = sample_gnp(30, 0.5, 2);
        let spec = spec_for(&d, (0..30).collect(), vec![30], 0.1);
        let div = divide(&d, &spec, DivisionMode::Desk, 0, 100).unwrap();
        assert_eq!(div.parts[0], (0..30).collect::<Vec<_>>());
        assert!(div.residual.is_empty());
    }

    #[test]
    fn random_forty_four_parts() {
        let mut ok = 0;
        for seed in 0..50 {
            let d = sample_gnp(40, 0.6, 100 + seed);
            let spec = spec_for(&d, (0..40).collect(), vec![9; 4], 0.1);
            let div = divide(&d, &spec, DivisionMode::Desk, seed, 10_000).unwrap();
            assert_shape(&spec, &div);
            assert!(independent_f1(&d, &spec, &div, DivisionMode::Desk));
            ok += 1;
        }
        assert_eq!(ok, 50);
    }

    #[test]
    fn deterministic_and_validated() {
        let d = sample_gnp(40, 0.6, 5);
        let spec = spec_for(&d, (0..40).collect(), vec![9; 4], 0.1);
        let x = divide(&d, &spec, DivisionMode::Desk, 9, 10_000).unwrap();
        let y = divide(&d, &spec, DivisionMode::Desk, 9, 10_000).unwrap();
        assert_eq!(x.parts, y.parts);
        let bad = DivisionSpec { delta: 1e9, big_delta: 1e9, ..spec.clone() };
        assert!(matches!(divide(&d, &bad, DivisionMode::Desk, 0, 10), Err(Error::Input(_))));
        let over = DivisionSpec { sizes: vec![30, 30], ..spec };
        assert!(divide(&d, &over, DivisionMode::Desk, 0, 10).is_err());
    }

    #[test]
    fn two_round_division_stays_disjoint() {
        let d = sample_gnp(60, 0.7, 11);
        let spec = spec_for(&d, (0..60).collect(), vec![28, 28], 0.1);
        let outer = divide(&d, &spec, DivisionMode::Desk, 3, 10_000).unwrap();
        let mut used = [false; 60];
        for (k, part) in outer.parts.iter().enumerate() {
            let sub = d.induced(part).unwrap();
            let inner_spec = spec_for(&sub.digraph, (0..part.len()).collect(), vec![9, 9, 9], 0.1);
            let inner = divide(&sub.digraph, &inner_spec, DivisionMode::Desk, 40 + k as u64, 10_000).unwrap();
            for p in &inner.parts {
                for &v in p {
                    let g = sub.original[v];
                    assert!(part.contains(&g));
                    assert!(!used[g]);
                    used[g] = true;
                }
            }
        }
        assert_eq!(used.iter().filter(|&&b| b).count(), 54);
    }

    #[test]
    fn f2_exhaustive_small() {
        let d = Digraph::complete(12);
        let spec = DivisionSpec { set: (0..12).collect(), sizes: vec![6, 6], delta: 11.0, big_delta: 11.0, m: 2, eps: 0.5 };
        let div = divide(&d, &spec, DivisionMode::Desk, 0, 100).unwrap();
        let c = certify_f2(&d, &spec, &div, 14, 10, 0);
        // N(U) misses U itself, so a part can drop to 4 of its 6 vertices: 4 < 0.75·6
        assert_eq!(c.verdict, Verdict::Refuted);
        if let Some(Witness::Set { sign, a, neighborhood }) = &c.witness {
            let hood = d.neighborhood(a, *sign).unwrap();
            assert!(div.parts.iter().any(|p| hood.iter().filter(|w| p.contains(w)).count() == *neighborhood));
        }
        let loose = DivisionSpec { m: 1, ..spec };
        assert_eq!(certify_f2(&d, &loose, &div, 14, 10, 0).verdict, Verdict::Certified);
    }
}
