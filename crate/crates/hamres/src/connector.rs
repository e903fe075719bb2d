//! Extendable forests over bipartite pairs and the connection primitives
//! that join prescribed edges into one directed cycle.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::Serialize;

use crate::cert::{binom, Certificate, Verdict, Witness};
use crate::digraph::{all_distinct, Digraph, Sign, Vertex};
use crate::division::divide_induced;
use crate::error::{Error, Result, Stage};
use crate::profile::ParameterProfile;
use crate::rng;

/// Which digraph edges become H₁ and H₂.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// H₁ = A₁→A₂, H₂ = A₂→A₁: root-to-leaf walks are directed.
    Outward,
    /// H₁ = A₂→A₁, H₂ = A₁→A₂: leaf-to-root walks are directed.
    Inward,
}

/// Two classes and two bipartite graphs between them. `h[i][v]` lists the
/// H_{i+1}-neighbours of `v`, sorted.
#[derive(Clone, Debug)]
pub struct BipartitePair {
    pub classes: [Vec<Vertex>; 2],
    side: Vec<u8>,
    h: [Vec<Vec<Vertex>>; 2],
}

const NO_SIDE: u8 = u8::MAX;

impl BipartitePair {
    pub fn from_digraph(d: &Digraph, a1: &[Vertex], a2: &[Vertex], orientation: Orientation) -> Result<Self> {
        let (mut h1, mut h2) = (Vec::new(), Vec::new());
        for &a in a1 {
            for &b in a2 {
                let (fwd, back) = (d.has_edge(a, b), d.has_edge(b, a));
                let (e1, e2) = match orientation {
                    Orientation::Outward => (fwd, back),
                    Orientation::Inward => (back, fwd),
                };
                if e1 {
                    h1.push((a, b));
                }
                if e2 {
                    h2.push((a, b));
                }
            }
        }
        Self::from_edges(d.n(), a1, a2, &h1, &h2)
    }

    /// Edges are `(A₁ vertex, A₂ vertex)` pairs.
    pub fn from_edges(
        n: usize,
        a1: &[Vertex],
        a2: &[Vertex],
        h1: &[(Vertex, Vertex)],
        h2: &[(Vertex, Vertex)],
    ) -> Result<Self> {
        let mut side = vec![NO_SIDE; n];
        for (s, class) in [a1, a2].into_iter().enumerate() {
            for &v in class {
                if v >= n || side[v] != NO_SIDE {
                    return Err(Error::input(format!("vertex {v} repeated or out of range in bipartite pair")));
                }
                side[v] = s as u8;
            }
        }
        let mut h = [vec![Vec::new(); n], vec![Vec::new(); n]];
        for (i, edges) in [h1, h2].into_iter().enumerate() {
            for &(a, b) in edges {
                if a >= n || b >= n || side[a] != 0 || side[b] != 1 {
                    return Err(Error::input(format!("H{} edge ({a},{b}) does not cross the pair", i + 1)));
                }
                h[i][a].push(b);
                h[i][b].push(a);
            }
            for l in &mut h[i] {
                l.sort_unstable();
                l.dedup();
            }
        }
        let mut classes = [a1.to_vec(), a2.to_vec()];
        classes.iter_mut().for_each(|c| c.sort_unstable());
        Ok(BipartitePair { classes, side, h })
    }

    /// Class index (0 or 1) of `v`.
    pub fn side(&self, v: Vertex) -> Option<usize> {
        self.side.get(v).filter(|&&s| s != NO_SIDE).map(|&s| s as usize)
    }

    /// Neighbours of `v` in H_{i+1}.
    pub fn nbrs(&self, i: usize, v: Vertex) -> &[Vertex] {
        &self.h[i][v]
    }
}

/// A rooted forest; edge `(p, c)` lies in S₁ when `p` has even depth.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Forest {
    pub d: usize,
    pub m: usize,
    roots: Vec<Vertex>,
    in_s: Vec<bool>,
    parent: Vec<Option<Vertex>>,
    children: Vec<Vec<Vertex>>,
    depth: Vec<usize>,
    size: usize,
}

impl Forest {
    /// Isolated roots.
    pub fn new(n: usize, roots: &[Vertex], d: usize, m: usize) -> Result<Self> {
        let mut in_s = vec![false; n];
        for &x in roots {
            if x >= n || in_s[x] {
                return Err(Error::input(format!("root {x} repeated or out of range")));
            }
            in_s[x] = true;
        }
        Ok(Forest {
            d,
            m,
            roots: roots.to_vec(),
            in_s,
            parent: vec![None; n],
            children: vec![Vec::new(); n],
            depth: vec![0; n],
            size: roots.len(),
        })
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.in_s.get(v).copied().unwrap_or(false)
    }

    pub fn is_root(&self, v: Vertex) -> bool {
        self.contains(v) && self.parent[v].is_none()
    }

    pub fn roots(&self) -> &[Vertex] {
        &self.roots
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.children[v].len() + usize::from(self.parent[v].is_some())
    }

    pub fn children(&self, v: Vertex) -> &[Vertex] {
        &self.children[v]
    }

    pub fn depth(&self, v: Vertex) -> usize {
        self.depth[v]
    }

    /// Number of vertices.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        (0..self.in_s.len()).filter_map(|c| self.parent[c].map(|p| (p, c)))
    }

    /// Root-to-`v` vertex sequence.
    pub fn path_from_root(&self, v: Vertex) -> Vec<Vertex> {
        let mut out = vec![v];
        let mut cur = v;
        while let Some(p) = self.parent[cur] {
            out.push(p);
            cur = p;
        }
        out.reverse();
        out
    }

    fn attach(&mut self, x: Vertex, y: Vertex) {
        self.in_s[y] = true;
        self.parent[y] = Some(x);
        self.children[x].push(y);
        self.depth[y] = self.depth[x] + 1;
        self.size += 1;
    }

    /// S-edges at `u` whose class index is `i`.
    fn class_edges_at(&self, u: Vertex, i: usize) -> usize {
        let own = if self.depth[u] % 2 == i { self.children[u].len() } else { 0 };
        let up = self.parent[u].map_or(0, |p| usize::from(self.depth[p] % 2 == i));
        own + up
    }

    /// Lemma-style size ceiling min(|A₁|,|A₂|)/2 − 2dm − 2.
    pub fn size_bound(&self, pair: &BipartitePair) -> f64 {
        let min = pair.classes[0].len().min(pair.classes[1].len()) as f64;
        min / 2.0 - 2.0 * (self.d * self.m) as f64 - 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMode {
    /// Enumerate every set, whatever the cost.
    Exhaustive,
    /// Enumerate when the number of sets is within `budget`, else search.
    Auto { budget: u64 },
}

/// Per-class bitsets for the B3/B4 set conditions.
struct ClassView {
    members: Vec<Vertex>,
    nbr_bits: Vec<Vec<u64>>,
    free_bits: Vec<u64>,
    need: Vec<i64>,
    other_len: usize,
}

fn class_view(f: &Forest, pair: &BipartitePair, i: usize) -> ClassView {
    let other = &pair.classes[1 - i];
    let words = other.len().div_ceil(64).max(1);
    let mut local = std::collections::HashMap::with_capacity(other.len());
    for (k, &v) in other.iter().enumerate() {
        local.insert(v, k);
    }
    let mut free_bits = vec![0u64; words];
    for (k, &v) in other.iter().enumerate() {
        if !f.contains(v) {
            free_bits[k / 64] |= 1 << (k % 64);
        }
    }
    let members = pair.classes[i].clone();
    let nbr_bits = members
        .iter()
        .map(|&u| {
            let mut b = vec![0u64; words];
            for w in pair.nbrs(i, u) {
                let k = local[w];
                b[k / 64] |= 1 << (k % 64);
            }
            b
        })
        .collect();
    let need = members
        .iter()
        .map(|&u| f.d as i64 - if f.contains(u) { f.class_edges_at(u, i) as i64 } else { 0 })
        .collect();
    ClassView { members, nbr_bits, free_bits, need, other_len: other.len() }
}

impl ClassView {
    fn union(&self, set: &[usize]) -> Vec<u64> {
        let mut u = vec![0u64; self.free_bits.len()];
        for &k in set {
            for (a, b) in u.iter_mut().zip(&self.nbr_bits[k]) {
                *a |= b;
            }
        }
        u
    }

    /// B3 slack |N(U) \ V(S)| − (d|U| − e_S(U)).
    fn b3_slack(&self, set: &[usize]) -> i64 {
        let free: u32 = self.union(set).iter().zip(&self.free_bits).map(|(a, b)| (a & b).count_ones()).sum();
        free as i64 - set.iter().map(|&k| self.need[k]).sum::<i64>()
    }

    /// B4 slack |N(U)| − |A_{3−i}|/2, doubled to stay integral.
    fn b4_slack(&self, set: &[usize]) -> i64 {
        let all: u32 = self.union(set).iter().map(|a| a.count_ones()).sum();
        2 * all as i64 - self.other_len as i64
    }

    fn vertices(&self, set: &[usize]) -> Vec<Vertex> {
        set.iter().map(|&k| self.members[k]).collect()
    }
}

/// Visit every subset of `0..n` with size in `lo..=hi`; stop when `f` is false.
fn for_subsets(n: usize, lo: usize, hi: usize, f: &mut impl FnMut(&[usize]) -> bool) -> bool {
    fn go(n: usize, start: usize, lo: usize, hi: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize]) -> bool) -> bool {
        if cur.len() >= lo && !cur.is_empty() && !f(cur) {
            return false;
        }
        if cur.len() == hi {
            return true;
        }
        for k in start..n {
            cur.push(k);
            let go_on = go(n, k + 1, lo, hi, cur, f);
            cur.pop();
            if !go_on {
                return false;
            }
        }
        true
    }
    go(n, 0, lo, hi, &mut Vec::new(), f)
}

fn subsets_up_to(n: usize, hi: usize) -> u128 {
    (1..=hi.min(n)).map(|s| binom(n, s)).sum()
}

/// Greedy: grow from each start vertex, adding whatever lowers the slack most.
fn greedy_sets(n: usize, size: usize, slack: impl Fn(&[usize]) -> i64, mut visit: impl FnMut(&[usize]) -> bool) -> bool {
    for s in 0..n {
        let mut cur = vec![s];
        if !visit(&cur) {
            return false;
        }
        while cur.len() < size {
            let mut trial = cur.clone();
            let best = (0..n).filter(|k| !cur.contains(k)).min_by_key(|&k| {
                trial.push(k);
                let v = slack(&trial);
                trial.pop();
                v
            });
            let Some(k) = best else { break };
            cur.push(k);
            if !visit(&cur) {
                return false;
            }
        }
    }
    true
}

/// Conditions B1–B4 for `(f, roots)` in `pair`.
pub fn is_extendable(f: &Forest, pair: &BipartitePair, mode: CheckMode, seed: u64) -> Certificate {
    let cert = Certificate::new("extendable", &[("d", f.d as f64), ("m", f.m as f64)]);
    let mut effort = 0u64;
    for v in 0..f.in_s.len() {
        if f.contains(v) && f.degree(v) > f.d {
            let mut c = cert.refute(Witness::Note { text: format!("B1: vertex {v} has degree {}", f.degree(v)) });
            c.effort = effort;
            return c;
        }
    }
    for &x in &f.roots {
        if pair.side(x) != Some(0) {
            return cert.refute(Witness::Note { text: format!("root {x} is not in the first class") });
        }
    }
    for (p, c) in f.edges() {
        effort += 1;
        let i = f.depth[p] % 2;
        if !pair.nbrs(i, p).contains(&c) {
            let mut out = cert.refute(Witness::Note { text: format!("B2: edge {p}-{c} is not in H{}", i + 1) });
            out.effort = effort;
            return out;
        }
    }
    let mut sampled = false;
    let mut r = rng::stream(seed, 0xE8);
    for i in 0..2 {
        let view = class_view(f, pair, i);
        let n = view.members.len();
        let cap = (2 * f.m).min(n);
        let mut bad: Option<Witness> = None;
        let mut check3 = |set: &[usize]| {
            effort += 1;
            if view.b3_slack(set) < 0 {
                bad = Some(Witness::Set { sign: Sign::Out, a: view.vertices(set), neighborhood: i + 1 });
                false
            } else {
                true
            }
        };
        let full = match mode {
            CheckMode::Exhaustive => true,
            CheckMode::Auto { budget } => subsets_up_to(n, cap) <= budget as u128,
        };
        if full {
            for_subsets(n, 1, cap, &mut check3);
        } else {
            sampled = true;
            let in_s: Vec<usize> = (0..n).filter(|&k| f.contains(view.members[k])).take(12).collect();
            let mut idx: Vec<usize> = (0..n).collect();
            let _ = for_subsets(n, 1, 1, &mut check3)
                && greedy_sets(n, cap, |s| view.b3_slack(s), &mut check3)
                && for_subsets(in_s.len(), 1, cap.min(3), &mut |s: &[usize]| {
                    let real: Vec<usize> = s.iter().map(|&k| in_s[k]).collect();
                    check3(&real)
                })
                && (0..200).all(|_| {
                    idx.shuffle(&mut r);
                    let s = r.gen_range(1..=cap.max(1));
                    check3(&idx[..s])
                });
        }
        if let Some(w) = bad {
            let mut c = cert.refute(w);
            c.effort = effort;
            return c;
        }
        if f.m <= n {
            let mut bad4: Option<Witness> = None;
            let mut check4 = |set: &[usize]| {
                effort += 1;
                if view.b4_slack(set) < 0 {
                    bad4 = Some(Witness::Set { sign: Sign::In, a: view.vertices(set), neighborhood: i + 1 });
                    false
                } else {
                    true
                }
            };
            let full4 = match mode {
                CheckMode::Exhaustive => true,
                CheckMode::Auto { budget } => binom(n, f.m) <= budget as u128,
            };
            if full4 {
                for_subsets(n, f.m, f.m, &mut check4);
            } else {
                sampled = true;
                greedy_sets(n, f.m, |s| view.b4_slack(s), |s| s.len() < f.m || check4(s));
            }
            if let Some(w) = bad4 {
                let mut c = cert.refute(w);
                c.effort = effort;
                return c;
            }
        }
    }
    let mut c = if sampled { cert.unknown() } else { cert };
    c.effort = effort;
    c
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeafCheck {
    /// Accept a candidate only if the exhaustive check certifies the result.
    Exhaustive,
    /// Accept unless the candidate creates a new singleton B3 violation.
    Local,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildPolicy {
    pub check: LeafCheck,
    pub enforce_size_bound: bool,
}

impl BuildPolicy {
    pub const DESK: BuildPolicy = BuildPolicy { check: LeafCheck::Local, enforce_size_bound: false };
    pub const EXHAUSTIVE: BuildPolicy = BuildPolicy { check: LeafCheck::Exhaustive, enforce_size_bound: false };
}

fn local_ok(f: &Forest, pair: &BipartitePair, x: Vertex, y: Vertex, i: usize) -> bool {
    pair.nbrs(i, y).iter().filter(|&&w| w != x).all(|&w| {
        let free = pair.nbrs(i, w).iter().filter(|&&t| !f.contains(t)).count() as i64;
        let need = f.d as i64 - if f.contains(w) { f.class_edges_at(w, i) as i64 } else { 0 };
        free != need
    })
}

/// Add a new leaf below `x`: the first candidate in id order that the policy accepts.
pub fn extend_leaf(f: &mut Forest, pair: &BipartitePair, x: Vertex, policy: BuildPolicy) -> Result<Vertex> {
    if !f.contains(x) {
        return Err(Error::input(format!("vertex {x} is not in the forest")));
    }
    if f.degree(x) >= f.d {
        return Err(Error::input(format!("vertex {x} already has degree {}", f.degree(x))));
    }
    if policy.enforce_size_bound && f.size() as f64 > f.size_bound(pair) {
        return Err(Error::input(format!("forest size {} exceeds {}", f.size(), f.size_bound(pair))));
    }
    let i = pair.side(x).ok_or_else(|| Error::input(format!("vertex {x} is outside the pair")))?;
    for &y in pair.nbrs(i, x) {
        if f.contains(y) {
            continue;
        }
        let accept = match policy.check {
            LeafCheck::Local => local_ok(f, pair, x, y, i),
            LeafCheck::Exhaustive => {
                let mut g = f.clone();
                g.attach(x, y);
                is_extendable(&g, pair, CheckMode::Exhaustive, 0).verdict == Verdict::Certified
            }
        };
        if accept {
            f.attach(x, y);
            return Ok(y);
        }
    }
    Err(Error::failed(Stage::ExtendLeaf, format!("no admissible leaf below {x}")))
}

/// Remove leaf `y` (not a root).
pub fn remove_leaf(f: &mut Forest, y: Vertex) -> Result<()> {
    if !f.contains(y) || f.parent[y].is_none() || !f.children[y].is_empty() {
        return Err(Error::input(format!("vertex {y} is not a non-root leaf")));
    }
    let p = f.parent[y].take().expect("checked");
    f.children[p].retain(|&c| c != y);
    f.in_s[y] = false;
    f.depth[y] = 0;
    f.size -= 1;
    Ok(())
}

/// Embed a (d−1)-ary tree of depth `depth` at each root, level by level.
/// Rolls back everything on failure.
pub fn extend_tree(
    f: &mut Forest,
    pair: &BipartitePair,
    roots: &[Vertex],
    depth: usize,
    policy: BuildPolicy,
) -> Result<Vec<Vertex>> {
    for &x in roots {
        if !f.contains(x) || f.degree(x) != 0 {
            return Err(Error::input(format!("tree root {x} must be an isolated forest vertex")));
        }
    }
    let mut added = Vec::new();
    let mut frontier = roots.to_vec();
    for _ in 0..depth {
        let mut next = Vec::new();
        for &v in &frontier {
            for _ in 0..f.d.saturating_sub(1) {
                match extend_leaf(f, pair, v, policy) {
                    Ok(y) => {
                        added.push(y);
                        next.push(y);
                    }
                    Err(e) => {
                        for &y in added.iter().rev() {
                            remove_leaf(f, y).expect("added vertices are leaves in reverse order");
                        }
                        return Err(e);
                    }
                }
            }
        }
        frontier = next;
    }
    Ok(added)
}

/// One connection x … x₀ → z → y₀ … y.
#[derive(Clone, Debug, Serialize)]
pub struct Link {
    pub x: Vertex,
    pub y: Vertex,
    pub x0: Vertex,
    pub y0: Vertex,
    pub z: Vertex,
    /// x to x₀ in the first forest.
    pub p: Vec<Vertex>,
    /// y to y₀ in the second forest (walked backwards in the cycle).
    pub q: Vec<Vertex>,
    pub depth: usize,
}

impl Link {
    /// Directed walk x … x₀ z y₀ … y.
    pub fn walk(&self) -> Vec<Vertex> {
        let mut w = self.p.clone();
        w.push(self.z);
        w.extend(self.q.iter().rev());
        w
    }

    /// Vertices strictly between x and y.
    pub fn interior(&self) -> Vec<Vertex> {
        let w = self.walk();
        w[1..w.len() - 1].to_vec()
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConnectStats {
    pub links: usize,
    pub deepest: usize,
    pub largest_forest: usize,
    pub size_bound: f64,
}

/// Both forests, both pairs and the pool of contact vertices.
pub struct Connector<'a> {
    d: &'a Digraph,
    pub gp: BipartitePair,
    pub hp: BipartitePair,
    pub s: Forest,
    pub t: Forest,
    z: Vec<Vertex>,
    z_free: Vec<bool>,
    policy: BuildPolicy,
    pub stats: ConnectStats,
}

impl<'a> Connector<'a> {
    /// `s_classes` hold the heads side (roots `xs` must lie in the first class),
    /// `t_classes` the tails side (roots `ys` in its first class).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: &'a Digraph,
        s_classes: [&[Vertex]; 2],
        t_classes: [&[Vertex]; 2],
        z: &[Vertex],
        xs: &[Vertex],
        ys: &[Vertex],
        branching: usize,
        m: usize,
        policy: BuildPolicy,
    ) -> Result<Self> {
        let gp = BipartitePair::from_digraph(d, s_classes[0], s_classes[1], Orientation::Outward)?;
        let hp = BipartitePair::from_digraph(d, t_classes[0], t_classes[1], Orientation::Inward)?;
        let s = Forest::new(d.n(), xs, branching, m)?;
        let t = Forest::new(d.n(), ys, branching, m)?;
        let mut z_free = vec![false; d.n()];
        let mut zs = z.to_vec();
        zs.sort_unstable();
        for &v in &zs {
            if gp.side(v).is_some() || hp.side(v).is_some() {
                return Err(Error::input(format!("contact vertex {v} also lies in a forest class")));
            }
            z_free[v] = true;
        }
        let size_bound = s.size_bound(&gp).min(t.size_bound(&hp));
        Ok(Connector { d, gp, hp, s, t, z: zs, z_free, policy, stats: ConnectStats { size_bound, ..Default::default() } })
    }

    pub fn free_contacts(&self) -> usize {
        self.z.iter().filter(|&&v| self.z_free[v]).count()
    }

    fn grow_level(f: &mut Forest, pair: &BipartitePair, frontier: &[Vertex], policy: BuildPolicy, added: &mut Vec<Vertex>) -> Vec<Vertex> {
        let mut next = Vec::new();
        for &v in frontier {
            for _ in 0..f.d.saturating_sub(1) {
                if f.degree(v) >= f.d {
                    break;
                }
                match extend_leaf(f, pair, v, policy) {
                    Ok(y) => {
                        added.push(y);
                        next.push(y);
                    }
                    Err(_) => break,
                }
            }
        }
        next
    }

    fn contact(&self, a: Vertex, b: Vertex) -> Option<Vertex> {
        self.d.out_nbrs(a).iter().copied().find(|&z| self.z_free[z] && self.d.has_edge(z, b))
    }

    /// Grow trees from `xs` and `ys` one level at a time (up to `max_depth`)
    /// until some tree vertex pair has a free common contact; keep only the
    /// two root-to-contact paths.
    pub fn connect_pair(&mut self, xs: &[Vertex], ys: &[Vertex], max_depth: usize) -> Result<Link> {
        for &x in xs {
            if !self.s.is_root(x) || self.s.degree(x) != 0 {
                return Err(Error::input(format!("{x} is not an isolated root of the first forest")));
            }
        }
        for &y in ys {
            if !self.t.is_root(y) || self.t.degree(y) != 0 {
                return Err(Error::input(format!("{y} is not an isolated root of the second forest")));
            }
        }
        let (mut s_list, mut t_list) = (xs.to_vec(), ys.to_vec());
        let (mut s_front, mut t_front) = (xs.to_vec(), ys.to_vec());
        let (mut s_added, mut t_added) = (Vec::new(), Vec::new());
        let mut scanned = (0usize, 0usize);
        let mut found = None;
        for level in 0..=max_depth {
            if level > 0 {
                s_front = Self::grow_level(&mut self.s, &self.gp, &s_front, self.policy, &mut s_added);
                t_front = Self::grow_level(&mut self.t, &self.hp, &t_front, self.policy, &mut t_added);
                s_list.extend_from_slice(&s_front);
                t_list.extend_from_slice(&t_front);
            }
            self.stats.largest_forest = self.stats.largest_forest.max(self.s.size()).max(self.t.size());
            'scan: for (ia, &a) in s_list.iter().enumerate() {
                for (ib, &b) in t_list.iter().enumerate() {
                    if ia < scanned.0 && ib < scanned.1 {
                        continue;
                    }
                    if let Some(z) = self.contact(a, b) {
                        found = Some((a, b, z, level));
                        break 'scan;
                    }
                }
            }
            if found.is_some() || (s_front.is_empty() && t_front.is_empty()) {
                break;
            }
            scanned = (s_list.len(), t_list.len());
        }
        let keep = |f: &Forest, v: Option<Vertex>| -> Vec<bool> {
            let mut k = vec![false; f.in_s.len()];
            if let Some(v) = v {
                for w in f.path_from_root(v) {
                    k[w] = true;
                }
            }
            k
        };
        let keep_s = keep(&self.s, found.map(|t| t.0));
        let keep_t = keep(&self.t, found.map(|t| t.1));
        for &v in s_added.iter().rev() {
            if !keep_s[v] {
                remove_leaf(&mut self.s, v)?;
            }
        }
        for &v in t_added.iter().rev() {
            if !keep_t[v] {
                remove_leaf(&mut self.t, v)?;
            }
        }
        let Some((a, b, z, level)) = found else {
            let reason = if self.free_contacts() == 0 { "contact pool exhausted" } else { "no contact pair" };
            return Err(Error::failed(Stage::Connect, format!("{reason} within depth {max_depth}")));
        };
        self.z_free[z] = false;
        let p = self.s.path_from_root(a);
        let q = self.t.path_from_root(b);
        let link = Link { x: p[0], y: q[0], x0: a, y0: b, z, p, q, depth: level };
        let walk = link.walk();
        if !walk.windows(2).all(|w| self.d.has_edge(w[0], w[1])) {
            return Err(Error::consistency(format!("connection {walk:?} is not a directed walk")));
        }
        self.stats.links += 1;
        self.stats.deepest = self.stats.deepest.max(level);
        Ok(link)
    }
}

/// Check `edges` are vertex-disjoint, avoid `a`, and are nonempty.
fn validate_edges(d: &Digraph, a: &[Vertex], edges: &[(Vertex, Vertex)]) -> Result<()> {
    if edges.is_empty() {
        return Err(Error::input("no edges to connect"));
    }
    let mut all: Vec<Vertex> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    all.extend_from_slice(a);
    if !all_distinct(&all, d.n()) {
        return Err(Error::input("edges must be vertex-disjoint and avoid the connecting set"));
    }
    Ok(())
}

/// Split `a` into A₁', A₂, B₁', B₂, Z. Z is sized for `links` contacts;
/// the rest is shared evenly by the four forest classes.
pub fn five_way_split(
    d: &Digraph,
    a: &[Vertex],
    edge_vertices: &[Vertex],
    links: usize,
    profile: &ParameterProfile,
    seed: u64,
) -> Result<[Vec<Vertex>; 5]> {
    let n = a.len();
    let p = profile.density();
    let want = links + (links as f64 * (1.0 - p) / 2.0).ceil() as usize;
    let z = n.min(want.max(n.div_ceil(5)));
    let rest = n - z;
    let mut sizes = [0usize; 5];
    for (j, s) in sizes.iter_mut().take(4).enumerate() {
        *s = rest / 4 + usize::from(j < rest % 4);
    }
    sizes[4] = z;
    let live: Vec<usize> = (0..5).filter(|&j| sizes[j] > 0).collect();
    let mut out: [Vec<Vertex>; 5] = Default::default();
    if live.len() == 1 {
        out[live[0]] = a.to_vec();
        return Ok(out);
    }
    let mut host: Vec<Vertex> = a.iter().chain(edge_vertices).copied().collect();
    host.sort_unstable();
    let div = divide_induced(
        d,
        &host,
        a,
        live.iter().map(|&j| sizes[j]).collect(),
        profile.m,
        profile.eps,
        seed,
        profile.max_rounds,
    )?;
    for (part, &j) in div.parts.into_iter().zip(&live) {
        out[j] = part;
    }
    Ok(out)
}

fn log_ratio(x: f64, d0: usize) -> i64 {
    (x.ln() / ((d0 as f64 - 1.0).max(1.0 + 1e-9)).ln()).ceil() as i64
}

/// Depth ⌈log m / log(d₀−1)⌉, at least 1.
pub fn strong_depth(m: usize, d0: usize) -> usize {
    log_ratio(m.max(1) as f64, d0).max(1) as usize
}

/// g(i) = Σ_{j ≤ i} ⌈log(4m/(ℓ+1−j)) / log(d₀−1)⌉.
pub fn g_budget(i: usize, ell: usize, m: usize, d0: usize) -> i64 {
    (1..=i.min(ell)).map(|j| log_ratio(4.0 * m as f64 / (ell + 1 - j) as f64, d0)).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongOutcome {
    /// tail₀ head₀ connector₀ tail₁ head₁ connector₁ …
    pub cycle: Vec<Vertex>,
    /// Vertices strictly between head_i and tail_{i+1}.
    pub connectors: Vec<Vec<Vertex>>,
    pub stats: ConnectStats,
}

/// Cycle through `edges` in the given cyclic order, using vertices of `a`.
pub fn strong_connect(
    d: &Digraph,
    a: &[Vertex],
    edges: &[(Vertex, Vertex)],
    profile: &ParameterProfile,
    seed: u64,
) -> Result<StrongOutcome> {
    validate_edges(d, a, edges)?;
    let ell = edges.len();
    let tails: Vec<Vertex> = edges.iter().map(|e| e.0).collect();
    let heads: Vec<Vertex> = edges.iter().map(|e| e.1).collect();
    let ev: Vec<Vertex> = tails.iter().chain(&heads).copied().collect();
    let [a1, a2, b1, b2, z] = five_way_split(d, a, &ev, ell, profile, rng::derive(seed, 5)).map_err(|e| e.within(Stage::Spine))?;
    let s1: Vec<Vertex> = a1.iter().chain(&heads).copied().collect();
    let t1: Vec<Vertex> = b1.iter().chain(&tails).copied().collect();
    let d0 = profile.strong_d0;
    let mut con = Connector::new(d, [&s1, &a2], [&t1, &b2], &z, &heads, &tails, d0, profile.m, BuildPolicy::DESK)?;
    let depth = strong_depth(profile.m, d0);
    let mut connectors = Vec::with_capacity(ell);
    for i in 0..ell {
        let link = con
            .connect_pair(&[heads[i]], &[tails[(i + 1) % ell]], depth)
            .map_err(|e| e.within(Stage::Spine))?;
        connectors.push(link.interior());
    }
    let mut cycle = Vec::new();
    for i in 0..ell {
        cycle.push(tails[i]);
        cycle.push(heads[i]);
        cycle.extend_from_slice(&connectors[i]);
    }
    verify_cycle_through(d, &cycle, edges)?;
    Ok(StrongOutcome { cycle, connectors, stats: con.stats })
}

fn verify_cycle_through(d: &Digraph, cycle: &[Vertex], edges: &[(Vertex, Vertex)]) -> Result<()> {
    if !all_distinct(cycle, d.n()) {
        return Err(Error::consistency("connected cycle repeats a vertex"));
    }
    let k = cycle.len();
    for i in 0..k {
        let (u, v) = (cycle[i], cycle[(i + 1) % k]);
        if !d.has_edge(u, v) && !edges.contains(&(u, v)) {
            return Err(Error::consistency(format!("connected cycle uses non-edge {u} -> {v}")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakStep {
    pub paths: usize,
    pub depth_cap: i64,
    pub depth_used: usize,
    pub edges_added: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakOutcome {
    /// Edge indices in cycle order, starting at 0.
    pub order: Vec<usize>,
    /// `connectors[i]` runs from the head of `order[i]` to the tail of `order[i+1]`.
    pub connectors: Vec<Vec<Vertex>>,
    /// head of edge 0 … tail of edge 0.
    pub path: Vec<Vertex>,
    /// Edges on the cycle, prescribed ones included.
    pub realized_length: usize,
    /// ℓ + 4g(ℓ).
    pub budget: i64,
    pub steps: Vec<WeakStep>,
    pub stats: ConnectStats,
}

/// Cycle through all of `edges` in some order, cut at `edges[0]`.
pub fn weak_connect(
    d: &Digraph,
    a: &[Vertex],
    edges: &[(Vertex, Vertex)],
    profile: &ParameterProfile,
    seed: u64,
) -> Result<WeakOutcome> {
    validate_edges(d, a, edges)?;
    let ell = edges.len();
    let tails: Vec<Vertex> = edges.iter().map(|e| e.0).collect();
    let heads: Vec<Vertex> = edges.iter().map(|e| e.1).collect();
    let ev: Vec<Vertex> = tails.iter().chain(&heads).copied().collect();
    let [a1, a2, b1, b2, z] =
        five_way_split(d, a, &ev, ell, profile, rng::derive(seed, 9)).map_err(|e| e.within(Stage::ReservoirConnect))?;
    let s1: Vec<Vertex> = a1.iter().chain(&heads).copied().collect();
    let t1: Vec<Vertex> = b1.iter().chain(&tails).copied().collect();
    let d0 = profile.weak_d0;
    let m = profile.m;
    let mut con = Connector::new(d, [&s1, &a2], [&t1, &b2], &z, &heads, &tails, d0, m, BuildPolicy::DESK)?;

    // each path: edge indices, with the connector following each edge
    let mut paths: Vec<(Vec<usize>, Vec<Vec<Vertex>>)> = (0..ell).map(|i| (vec![i], vec![Vec::new()])).collect();
    let mut steps = Vec::new();
    while paths.len() > 1 {
        let r = paths.len();
        let half = r / 2;
        let cap = log_ratio(4.0 * m as f64 / r as f64, d0);
        let depth = cap.max(0) as usize;
        let xs: Vec<Vertex> = paths[..half].iter().map(|p| heads[*p.0.last().expect("nonempty")]).collect();
        let ys: Vec<Vertex> = paths[half..2 * half].iter().map(|p| tails[p.0[0]]).collect();
        let link = con.connect_pair(&xs, &ys, depth).map_err(|e| e.within(Stage::ReservoirConnect))?;
        let ia = paths.iter().position(|p| heads[*p.0.last().expect("nonempty")] == link.x).expect("x is a path end");
        let ib = paths.iter().position(|p| tails[p.0[0]] == link.y).expect("y is a path start");
        steps.push(WeakStep { paths: r, depth_cap: cap, depth_used: link.depth, edges_added: link.walk().len() - 1 });
        let (hi, lo) = (ia.max(ib), ia.min(ib));
        let second = paths.remove(hi);
        let first = paths.remove(lo);
        let (mut pa, pb) = if ia < ib { (first, second) } else { (second, first) };
        *pa.1.last_mut().expect("nonempty") = link.interior();
        pa.0.extend(pb.0);
        pa.1.extend(pb.1);
        paths.push(pa);
    }
    let (order, mut conns) = paths.pop().expect("one path left");
    let close_depth = log_ratio(2.0 * m as f64, d0).max(0) as usize;
    let last = *order.last().expect("nonempty");
    let link = con
        .connect_pair(&[heads[last]], &[tails[order[0]]], close_depth)
        .map_err(|e| e.within(Stage::ReservoirConnect))?;
    steps.push(WeakStep {
        paths: 1,
        depth_cap: log_ratio(4.0 * m as f64, d0),
        depth_used: link.depth,
        edges_added: link.walk().len() - 1,
    });
    *conns.last_mut().expect("nonempty") = link.interior();

    let start = order.iter().position(|&e| e == 0).expect("edge 0 present");
    let order: Vec<usize> = order[start..].iter().chain(&order[..start]).copied().collect();
    let connectors: Vec<Vec<Vertex>> = conns[start..].iter().chain(&conns[..start]).cloned().collect();
    let mut cycle = Vec::new();
    for (k, &e) in order.iter().enumerate() {
        cycle.push(tails[e]);
        cycle.push(heads[e]);
        cycle.extend_from_slice(&connectors[k]);
    }
    verify_cycle_through(d, &cycle, edges)?;
    let mut path = cycle[1..].to_vec();
    path.push(cycle[0]);
    let realized_length = cycle.len();
    let budget = ell as i64 + 4 * g_budget(ell, ell, m, d0);
    Ok(WeakOutcome { order, connectors, path, realized_length, budget, steps, stats: con.stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::sample_gnp;

    fn random_pair(n1: usize, n2: usize, p: f64, seed: u64) -> BipartitePair {
        let mut r = rng::stream(seed, 1);
        let a1: Vec<_> = (0..n1).collect();
        let a2: Vec<_> = (n1..n1 + n2).collect();
        let mut h = [Vec::new(), Vec::new()];
        for &a in &a1 {
            for &b in &a2 {
                for hi in h.iter_mut() {
                    if r.gen_bool(p) {
                        hi.push((a, b));
                    }
                }
            }
        }
        BipartitePair::from_edges(n1 + n2, &a1, &a2, &h[0], &h[1]).unwrap()
    }

    fn complete_pair(n_side: usize) -> BipartitePair {
        random_pair(n_side, n_side, 1.0, 0)
    }

    #[test]
    fn empty_forest_on_complete_pair_is_certified() {
        let pair = random_pair(9, 8, 1.0, 0);
        let f = Forest::new(17, &[0], 2, 2).unwrap();
        let c = is_extendable(&f, &pair, CheckMode::Exhaustive, 0);
        assert_eq!(c.verdict, Verdict::Certified);
        assert_eq!(c.effort, (9 + 36 + 84 + 126) + 36 + (8 + 28 + 56 + 70) + 28);
        // one root fewer free vertex than a 4-set of the second class needs
        let pair = complete_pair(8);
        let f = Forest::new(16, &[0], 2, 2).unwrap();
        assert_eq!(is_extendable(&f, &pair, CheckMode::Exhaustive, 0).verdict, Verdict::Refuted);
    }

    #[test]
    fn overfull_vertex_is_refuted() {
        let pair = complete_pair(8);
        let mut f = Forest::new(16, &[0], 2, 2).unwrap();
        for y in [8, 9, 10] {
            f.attach(0, y);
        }
        let c = is_extendable(&f, &pair, CheckMode::Exhaustive, 0);
        assert_eq!(c.verdict, Verdict::Refuted);
        assert!(matches!(c.witness, Some(Witness::Note { ref text }) if text.starts_with("B1")));
    }

    #[test]
    fn wrong_parity_edge_is_refuted() {
        let a1 = [0, 1];
        let a2 = [2, 3];
        let pair = BipartitePair::from_edges(4, &a1, &a2, &[(0, 2)], &[(1, 3)]).unwrap();
        let mut f = Forest::new(4, &[1], 3, 1).unwrap();
        f.attach(1, 3);
        let c = is_extendable(&f, &pair, CheckMode::Exhaustive, 0);
        assert!(matches!(c.witness, Some(Witness::Note { ref text }) if text.starts_with("B2")));
    }

    #[test]
    fn extend_leaf_takes_lowest_candidate_and_inverts() {
        let pair = complete_pair(6);
        let mut f = Forest::new(12, &[0], 2, 1).unwrap();
        let orig = f.clone();
        let y = extend_leaf(&mut f, &pair, 0, BuildPolicy::DESK).unwrap();
        assert_eq!(y, 6);
        remove_leaf(&mut f, y).unwrap();
        assert_eq!(f, orig);
        f.attach(0, 6);
        f.attach(0, 7);
        assert!(matches!(extend_leaf(&mut f, &pair, 0, BuildPolicy::DESK), Err(Error::Input(_))));
        assert!(matches!(remove_leaf(&mut f, 0), Err(Error::Input(_))));
        let z = extend_leaf(&mut f, &pair, 6, BuildPolicy::DESK).unwrap();
        assert!(matches!(remove_leaf(&mut f, 6), Err(Error::Input(_))));
        remove_leaf(&mut f, z).unwrap();
    }

    #[test]
    fn extend_tree_shapes() {
        let pair = complete_pair(10);
        let mut f = Forest::new(20, &[0, 1, 2], 2, 1).unwrap();
        let before = f.clone();
        assert!(extend_tree(&mut f, &pair, &[0, 1, 2], 0, BuildPolicy::DESK).unwrap().is_empty());
        assert_eq!(f, before);
        let added = extend_tree(&mut f, &pair, &[0, 1, 2], 1, BuildPolicy::DESK).unwrap();
        assert_eq!(added, vec![10, 11, 12]);

        let pair = random_pair(20, 20, 0.8, 3);
        let mut f = Forest::new(40, &[0, 1], 3, 1).unwrap();
        let added = extend_tree(&mut f, &pair, &[0, 1], 2, BuildPolicy::DESK).unwrap();
        assert_eq!(added.len(), 2 * (2 + 4));
        let mut vs = added.clone();
        vs.extend([0, 1]);
        assert!(all_distinct(&vs, 40));
        assert!(vs.iter().all(|&v| f.degree(v) <= 3));
        assert!(is_extendable(&f, &pair, CheckMode::Auto { budget: 0 }, 1).verdict != Verdict::Refuted
            || f.size() > 0);
    }

    #[test]
    fn extend_tree_rolls_back() {
        // root 0 has a single H1 neighbour, so a binary tree cannot be embedded
        let pair = BipartitePair::from_edges(4, &[0, 1], &[2, 3], &[(0, 2)], &[]).unwrap();
        let mut f = Forest::new(4, &[0], 3, 1).unwrap();
        let before = f.clone();
        let e = extend_tree(&mut f, &pair, &[0], 1, BuildPolicy::DESK).unwrap_err();
        assert_eq!(e.stage(), Some(&Stage::ExtendLeaf));
        assert_eq!(f, before);
    }

    /// Grow leaves under the exhaustive policy and shrink again, replaying
    /// the exhaustive check after every step.
    fn replay(pair: &BipartitePair, roots: &[Vertex], d: usize, m: usize, seed: u64) -> (usize, usize) {
        let mut r = rng::stream(seed, 2);
        let mut f = Forest::new(pair.classes[0].len() + pair.classes[1].len(), roots, d, m).unwrap();
        let ok = |f: &Forest| is_extendable(f, pair, CheckMode::Exhaustive, 0).verdict == Verdict::Certified;
        if !ok(&f) {
            return (0, 0);
        }
        let mut steps = 0;
        let mut added = Vec::new();
        for _ in 0..10 {
            let open: Vec<Vertex> = (0..f.in_s.len()).filter(|&v| f.contains(v) && f.degree(v) < d).collect();
            let x = open[r.gen_range(0..open.len())];
            if let Ok(y) = extend_leaf(&mut f, pair, x, BuildPolicy::EXHAUSTIVE) {
                assert!(ok(&f), "extend_leaf broke extendability");
                added.push(y);
                steps += 1;
            }
        }
        let mut violations = 0;
        while let Some(y) = added.pop() {
            let leaf = added.iter().chain(std::iter::once(&y)).copied().find(|&v| f.children(v).is_empty()).unwrap();
            added.retain(|&v| v != leaf);
            if leaf != y {
                added.push(y);
            }
            remove_leaf(&mut f, leaf).unwrap();
            steps += 1;
            if !ok(&f) {
                violations += 1;
            }
        }
        (steps, violations)
    }

    #[test]
    fn exhaustive_replay_on_dense_pairs() {
        let mut total = 0;
        for seed in 0..10 {
            let pair = random_pair(20, 20, 0.8, seed);
            let (steps, violations) = replay(&pair, &[0, 1], 2, 2, seed);
            assert_eq!(violations, 0);
            total += steps;
        }
        assert!(total >= 50, "{total} steps");
    }

    #[test]
    fn depth_zero_needs_direct_contact() {
        let d = Digraph::complete(12);
        let mut con = Connector::new(&d, [&[0, 1], &[2, 3]], [&[4, 5], &[6, 7]], &[8, 9], &[0], &[4], 3, 1, BuildPolicy::DESK).unwrap();
        let l = con.connect_pair(&[0], &[4], 0).unwrap();
        assert_eq!(l.walk(), vec![0, 8, 4]);
        let d = Digraph::from_edges(12, &[(0, 2), (2, 8), (8, 4)]).unwrap();
        let mut con = Connector::new(&d, [&[0, 1], &[2, 3]], [&[4, 5], &[6, 7]], &[8, 9], &[0], &[4], 3, 1, BuildPolicy::DESK).unwrap();
        assert_eq!(con.connect_pair(&[0], &[4], 0).unwrap_err().stage(), Some(&Stage::Connect));
        let l = con.connect_pair(&[0], &[4], 1).unwrap();
        assert_eq!(l.walk(), vec![0, 2, 8, 4]);
        assert_eq!(con.s.size(), 2);
    }

    #[test]
    fn connection_walks_are_directed_in_dense_hosts() {
        let d = sample_gnp(60, 0.7, 5);
        let prof = ParameterProfile::for_digraph(&d, 0.1);
        let v: Vec<_> = (0..60).collect();
        let (s1, s2, t1, t2, z) = (&v[0..10], &v[10..20], &v[20..30], &v[30..40], &v[40..60]);
        let mut con = Connector::new(&d, [s1, s2], [t1, t2], z, &[0, 1, 2], &[20, 21, 22], prof.strong_d0, prof.m, BuildPolicy::DESK).unwrap();
        for i in 0..3 {
            let l = con.connect_pair(&[i], &[20 + i], 2).unwrap();
            assert!(l.walk().windows(2).all(|w| d.has_edge(w[0], w[1])));
            assert!(l.p.len() <= 3 && l.q.len() <= 3);
        }
    }

    #[test]
    fn strong_connect_keeps_order() {
        let d = Digraph::complete(30);
        let prof = ParameterProfile::for_digraph(&d, 0.1);
        let edges = [(0, 1), (2, 3), (4, 5)];
        let a: Vec<_> = (6..30).collect();
        let out = strong_connect(&d, &a, &edges, &prof, 1).unwrap();
        let pos: Vec<usize> = edges.iter().map(|e| out.cycle.iter().position(|&v| v == e.0).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        let single = strong_connect(&d, &a, &[(0, 1)], &prof, 1).unwrap();
        assert_eq!(&single.cycle[..2], &[0, 1]);
    }

    #[test]
    fn strong_connect_on_random_digraphs() {
        let mut ok = 0;
        for seed in 0..20 {
            let d = sample_gnp(150, 0.5, seed);
            let prof = ParameterProfile::for_digraph(&d, 0.1);
            let edges: Vec<_> = (0..4).map(|i| (2 * i, 2 * i + 1)).collect();
            let a: Vec<_> = (8..60).collect();
            if strong_connect(&d, &a, &edges, &prof, seed).is_ok() {
                ok += 1;
            }
        }
        assert!(ok >= 15, "{ok}/20");
    }

    #[test]
    fn g_budget_matches_direct_sum() {
        let l9 = 9f64.ln();
        let g1 = (16f64.ln() / l9).ceil() as i64;
        let g2 = g1 + ((64.0f64 / 3.0).ln() / l9).ceil() as i64;
        assert_eq!(g_budget(1, 4, 16, 10), g1);
        assert_eq!(g_budget(2, 4, 16, 10), g2);
        let direct: i64 = (1..=4).map(|j| ((64.0 / (5 - j) as f64).ln() / l9).ceil() as i64).sum();
        assert_eq!(g_budget(4, 4, 16, 10), direct);
    }

    #[test]
    fn weak_connect_small_cases() {
        let d = Digraph::complete(20);
        let prof = ParameterProfile::for_digraph(&d, 0.1);
        let a: Vec<_> = (4..20).collect();
        let out = weak_connect(&d, &a, &[(0, 1), (2, 3)], &prof, 0).unwrap();
        assert_eq!(out.order[0], 0);
        assert_eq!(out.path[0], 1);
        assert_eq!(*out.path.last().unwrap(), 0);
        assert!(out.path.contains(&2) && out.path.contains(&3));
    }

    #[test]
    fn weak_connect_budget_on_random_digraphs() {
        let mut ok = 0;
        for seed in 0..20 {
            let d = sample_gnp(150, 0.5, 100 + seed);
            let prof = ParameterProfile::for_digraph(&d, 0.1);
            let edges: Vec<_> = (0..6).map(|i| (2 * i, 2 * i + 1)).collect();
            let a: Vec<_> = (12..70).collect();
            if let Ok(out) = weak_connect(&d, &a, &edges, &prof, seed) {
                assert!(out.realized_length as i64 <= out.budget, "{} > {}", out.realized_length, out.budget);
                ok += 1;
            }
        }
        assert!(ok >= 15, "{ok}/20");
    }
}
