//! Directed graphs, neighbourhood algebra, merging and cycle verification.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vertex = usize;

/// Direction of adjacency: `Out` is N⁺, `In` is N⁻.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Out,
    In,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Out, Sign::In];

    pub fn flip(self) -> Sign {
        match self {
            Sign::Out => Sign::In,
            Sign::In => Sign::Out,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Out => '+',
            Sign::In => '-',
        }
    }
}

/// Simple digraph on `0..n` with sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    out_adj: Vec<Vec<Vertex>>,
    in_adj: Vec<Vertex>,
    in_start: Vec<usize>,
    edge_count: usize,
}

impl Digraph {
    pub fn empty(n: usize) -> Self {
        Self::from_sorted_out(vec![Vec::new(); n])
    }

    pub fn complete(n: usize) -> Self {
        let out = (0..n)
            .map(|u| (0..n).filter(|&v| v != u).collect())
            .collect();
        Self::from_sorted_out(out)
    }

    pub fn directed_cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges).expect("cycle edges are valid for n >= 2")
    }

    pub fn directed_path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("path edges are valid")
    }

    /// Build from an edge list, rejecting self-loops, duplicates and bad ids.
    pub fn from_edges(n: usize, edges: &[(Vertex, Vertex)]) -> Result<Self> {
        let mut out = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::input(format!("edge {u}->{v} out of range for n={n}")));
            }
            if u == v {
                return Err(Error::input(format!("self-loop at {u}")));
            }
            out[u].push(v);
        }
        for (u, list) in out.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::input(format!("duplicate edge {u}->{}", w[0])));
            }
        }
        Ok(Self::from_sorted_out(out))
    }

    /// Caller guarantees lists are sorted, loop-free and duplicate-free.
    pub(crate) fn from_sorted_out(out_adj: Vec<Vec<Vertex>>) -> Self {
        let n = out_adj.len();
        let mut indeg = vec![0usize; n + 1];
        for list in &out_adj {
            for &v in list {
                indeg[v + 1] += 1;
            }
        }
        for i in 0..n {
            indeg[i + 1] += indeg[i];
        }
        let in_start = indeg.clone();
        let mut fill = indeg;
        let edge_count = in_start[n];
        let mut in_adj = vec![0; edge_count];
        // Scanning tails in increasing order leaves every in-list sorted.
        for (u, list) in out_adj.iter().enumerate() {
            for &v in list {
                in_adj[fill[v]] = u;
                fill[v] += 1;
            }
        }
        Digraph {
            n,
            out_adj,
            in_adj,
            in_start,
            edge_count,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn out_nbrs(&self, v: Vertex) -> &[Vertex] {
        &self.out_adj[v]
    }

    pub fn in_nbrs(&self, v: Vertex) -> &[Vertex] {
        &self.in_adj[self.in_start[v]..self.in_start[v + 1]]
    }

    pub fn nbrs(&self, v: Vertex, sign: Sign) -> &[Vertex] {
        match sign {
            Sign::Out => self.out_nbrs(v),
            Sign::In => self.in_nbrs(v),
        }
    }

    pub fn degree(&self, v: Vertex, sign: Sign) -> usize {
        self.nbrs(v, sign).len()
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        u < self.n && self.out_adj[u].binary_search(&v).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(u, l)| l.iter().map(move |&v| (u, v)))
    }

    pub fn min_degree(&self, sign: Sign) -> usize {
        (0..self.n).map(|v| self.degree(v, sign)).min().unwrap_or(0)
    }

    pub fn max_degree(&self, sign: Sign) -> usize {
        (0..self.n).map(|v| self.degree(v, sign)).max().unwrap_or(0)
    }

    /// min over both signs.
    pub fn min_semidegree(&self) -> usize {
        self.min_degree(Sign::Out).min(self.min_degree(Sign::In))
    }

    pub fn max_semidegree(&self) -> usize {
        self.max_degree(Sign::Out).max(self.max_degree(Sign::In))
    }

    /// Number of `sign`-neighbours of `v` inside the set marked by `mask`.
    pub fn degree_into(&self, v: Vertex, mask: &[bool], sign: Sign) -> usize {
        self.nbrs(v, sign).iter().filter(|&&w| mask[w]).count()
    }

    pub fn mask(&self, set: &[Vertex]) -> Vec<bool> {
        let mut m = vec![false; self.n];
        for &v in set {
            m[v] = true;
        }
        m
    }

    fn check_ids(&self, set: &[Vertex]) -> Result<()> {
        match set.iter().find(|&&v| v >= self.n) {
            Some(v) => Err(Error::input(format!("vertex {v} out of range for n={}", self.n))),
            None => Ok(()),
        }
    }

    /// N^sign(A): vertices outside A adjacent from (or to) some vertex of A, sorted.
    pub fn neighborhood(&self, set: &[Vertex], sign: Sign) -> Result<Vec<Vertex>> {
        self.check_ids(set)?;
        let inside = self.mask(set);
        let mut hit = vec![false; self.n];
        for &u in set {
            for &w in self.nbrs(u, sign) {
                if !inside[w] {
                    hit[w] = true;
                }
            }
        }
        Ok((0..self.n).filter(|&v| hit[v]).collect())
    }

    /// Subgraph induced on `set`; vertex `i` of the result is `set[i]`.
    pub fn induced(&self, set: &[Vertex]) -> Result<Induced> {
        self.check_ids(set)?;
        let mut label = vec![usize::MAX; self.n];
        for (i, &v) in set.iter().enumerate() {
            if label[v] != usize::MAX {
                return Err(Error::input(format!("vertex {v} repeated in induced set")));
            }
            label[v] = i;
        }
        let out = set
            .iter()
            .map(|&u| {
                let mut l: Vec<_> = self.out_adj[u]
                    .iter()
                    .filter(|&&w| label[w] != usize::MAX)
                    .map(|&w| label[w])
                    .collect();
                l.sort_unstable();
                l
            })
            .collect();
        Ok(Induced {
            digraph: Self::from_sorted_out(out),
            original: set.to_vec(),
        })
    }

    /// Copy with the given edges deleted (edges not present are ignored).
    pub fn without_edges(&self, removed: &[(Vertex, Vertex)]) -> Digraph {
        let mut out = self.out_adj.clone();
        for &(u, v) in removed {
            if let Some(list) = out.get_mut(u) {
                if let Ok(i) = list.binary_search(&v) {
                    list.remove(i);
                }
            }
        }
        Self::from_sorted_out(out)
    }

    /// Full rescan of the out/in mirror invariant.
    pub fn is_consistent(&self) -> bool {
        let mut count = 0;
        for u in 0..self.n {
            let l = &self.out_adj[u];
            if l.windows(2).any(|w| w[0] >= w[1]) || l.contains(&u) {
                return false;
            }
            for &v in l {
                if self.in_nbrs(v).binary_search(&u).is_err() {
                    return false;
                }
            }
            count += l.len();
        }
        let in_total: usize = (0..self.n).map(|v| self.in_nbrs(v).len()).sum();
        count == self.edge_count && in_total == self.edge_count
    }

    /// Weakly connected components, each sorted, ordered by smallest vertex.
    pub fn weak_components(&self) -> Vec<Vec<Vertex>> {
        let mut comp = vec![usize::MAX; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut stack = vec![s];
            let mut members = Vec::new();
            comp[s] = id;
            while let Some(v) = stack.pop() {
                members.push(v);
                for &w in self.out_nbrs(v).iter().chain(self.in_nbrs(v)) {
                    if comp[w] == usize::MAX {
                        comp[w] = id;
                        stack.push(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Serialize in the `n <count>` / `u v` edge-list format.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n {}", self.n);
        for (u, v) in self.edges() {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }

    pub fn parse_edge_list(text: &str) -> Result<Digraph> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::input("empty edge list"))?;
        let mut h = header.split_whitespace();
        let n = match (h.next(), h.next(), h.next()) {
            (Some("n"), Some(c), None) => c
                .parse::<usize>()
                .map_err(|_| Error::input(format!("bad vertex count {c:?}")))?,
            _ => return Err(Error::input(format!("bad header line {header:?}"))),
        };
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let parse = |t: Option<&str>| -> Result<usize> {
                t.and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::input(format!("bad edge line {line:?}")))
            };
            let u = parse(it.next())?;
            let v = parse(it.next())?;
            if it.next().is_some() {
                return Err(Error::input(format!("bad edge line {line:?}")));
            }
            edges.push((u, v));
        }
        Digraph::from_edges(n, &edges)
    }
}

/// Induced subgraph with its label map back to the host.
#[derive(Clone, Debug)]
pub struct Induced {
    pub digraph: Digraph,
    pub original: Vec<Vertex>,
}

/// A directed path (single vertices allowed). Consecutive repeats are collapsed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectedPath {
    pub vertices: Vec<Vertex>,
}

impl DirectedPath {
    pub fn new(mut vertices: Vec<Vertex>) -> Self {
        vertices.dedup();
        DirectedPath { vertices }
    }

    pub fn single(v: Vertex) -> Self {
        DirectedPath { vertices: vec![v] }
    }

    pub fn len_edges(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn first(&self) -> Vertex {
        self.vertices[0]
    }

    pub fn last(&self) -> Vertex {
        *self.vertices.last().expect("paths are nonempty")
    }

    /// Distinct vertices and every consecutive pair an edge of `d`.
    pub fn is_valid_in(&self, d: &Digraph) -> bool {
        !self.vertices.is_empty()
            && all_distinct(&self.vertices, d.n())
            && self.vertices.windows(2).all(|w| d.has_edge(w[0], w[1]))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HamiltonCycle {
    pub vertices: Vec<Vertex>,
}

pub(crate) fn all_distinct(vs: &[Vertex], n: usize) -> bool {
    let mut seen = vec![false; n];
    for &v in vs {
        if v >= n || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    true
}

/// True iff `c` visits every vertex of `d` exactly once along directed edges.
pub fn verify_hamilton(d: &Digraph, c: &HamiltonCycle) -> bool {
    let k = c.vertices.len();
    k == d.n()
        && k >= 2
        && all_distinct(&c.vertices, d.n())
        && (0..k).all(|i| d.has_edge(c.vertices[i], c.vertices[(i + 1) % k]))
}

/// Record of one merge. `source_x`, `source_y` and `interior` are ids in the
/// pre-merge digraph; expanding `z` yields `source_x, interior.., source_y`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub z: Vertex,
    pub source_x: Vertex,
    pub source_y: Vertex,
    pub interior: Vec<Vertex>,
}

/// Result of merging disjoint pairs (and deleting some vertices) at once.
#[derive(Clone, Debug)]
pub struct Contraction {
    pub digraph: Digraph,
    pub records: Vec<MergeRecord>,
    /// New id to old id; `None` for merged vertices.
    pub origin: Vec<Option<Vertex>>,
    /// Old id to new id; `None` for deleted or merged-away vertices.
    pub label: Vec<Option<Vertex>>,
}

impl Contraction {
    pub fn record_of(&self, z: Vertex) -> Option<&MergeRecord> {
        let plain = self.origin.len() - self.records.len();
        z.checked_sub(plain).and_then(|i| self.records.get(i))
    }

    /// Replace every merged vertex of `seq` by its stored segment.
    pub fn expand(&self, seq: &[Vertex]) -> Result<Vec<Vertex>> {
        let mut out = Vec::with_capacity(seq.len() + 2 * self.records.len());
        for &v in seq {
            match self.origin.get(v) {
                Some(Some(o)) => out.push(*o),
                Some(None) => {
                    let r = self
                        .record_of(v)
                        .ok_or_else(|| Error::consistency(format!("no record for merged {v}")))?;
                    out.push(r.source_x);
                    out.extend_from_slice(&r.interior);
                    out.push(r.source_y);
                }
                None => return Err(Error::consistency(format!("vertex {v} not in contraction"))),
            }
        }
        Ok(out)
    }
}

/// Merge each `x` into its `y` (Definition-style: z takes N⁻(x)\{y} and
/// N⁺(y)\{x}), delete `deleted`, and compact. Plain vertices keep their
/// relative order; merged vertices follow in `pairs` order. `interiors[i]`
/// is stored in record `i` for later expansion.
pub fn contract(
    d: &Digraph,
    pairs: &[(Vertex, Vertex)],
    deleted: &[Vertex],
    interiors: Vec<Vec<Vertex>>,
) -> Result<Contraction> {
    const PLAIN: u8 = 0;
    const X: u8 = 1;
    const Y: u8 = 2;
    const GONE: u8 = 3;
    let n = d.n();
    let mut role = vec![PLAIN; n];
    let mut pair_of = vec![usize::MAX; n];
    for (i, &(x, y)) in pairs.iter().enumerate() {
        if x >= n || y >= n {
            return Err(Error::input(format!("merge pair ({x},{y}) out of range")));
        }
        if x == y {
            return Err(Error::input(format!("cannot merge {x} with itself")));
        }
        for (v, r) in [(x, X), (y, Y)] {
            if role[v] != PLAIN {
                return Err(Error::input(format!("vertex {v} used by two merges")));
            }
            role[v] = r;
            pair_of[v] = i;
        }
    }
    for &v in deleted {
        if v >= n || role[v] != PLAIN {
            return Err(Error::input(format!("cannot delete vertex {v}")));
        }
        role[v] = GONE;
    }
    if interiors.len() != pairs.len() {
        return Err(Error::input("one interior per merge pair required"));
    }
    let mut label = vec![None; n];
    let mut origin = Vec::new();
    for v in 0..n {
        if role[v] == PLAIN {
            label[v] = Some(origin.len());
            origin.push(Some(v));
        }
    }
    let plain = origin.len();
    origin.extend(std::iter::repeat_n(None, pairs.len()));
    let new_n = origin.len();
    let tail = |u: Vertex| match role[u] {
        PLAIN => label[u],
        Y => Some(plain + pair_of[u]),
        _ => None,
    };
    let head = |w: Vertex| match role[w] {
        PLAIN => label[w],
        X => Some(plain + pair_of[w]),
        _ => None,
    };
    let mut out = vec![Vec::new(); new_n];
    for (u, w) in d.edges() {
        if let (Some(a), Some(b)) = (tail(u), head(w)) {
            if a != b {
                out[a].push(b);
            }
        }
    }
    for l in &mut out {
        l.sort_unstable();
    }
    let records = pairs
        .iter()
        .zip(interiors)
        .enumerate()
        .map(|(i, (&(x, y), interior))| MergeRecord {
            z: plain + i,
            source_x: x,
            source_y: y,
            interior,
        })
        .collect();
    Ok(Contraction {
        digraph: Digraph::from_sorted_out(out),
        records,
        origin,
        label,
    })
}

/// Merge `x` into `y`; the new vertex is the last id of the result.
pub fn merge(d: &Digraph, x: Vertex, y: Vertex) -> Result<Contraction> {
    contract(d, &[(x, y)], &[], vec![Vec::new()])
}

/// Replace each merged vertex on `c` by its stored segment.
pub fn expand_merged_cycle(c: &HamiltonCycle, contraction: &Contraction) -> Result<HamiltonCycle> {
    Ok(HamiltonCycle {
        vertices: contraction.expand(&c.vertices)?,
    })
}
