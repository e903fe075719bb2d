//! Exact Hamiltonicity: subset DP for small n, budgeted backtracking otherwise.

use serde::Serialize;

use crate::digraph::{verify_hamilton, Digraph, HamiltonCycle, Vertex};
use crate::error::{Error, Result};

pub const HELD_KARP_MAX_N: usize = 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Decision {
    Ham,
    NonHam,
    /// Budget exhausted; never read as NonHam.
    Timeout,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleResult {
    pub decision: Decision,
    pub cycle: Option<HamiltonCycle>,
    pub nodes_explored: u64,
}

impl OracleResult {
    fn non_ham(nodes: u64) -> Self {
        OracleResult { decision: Decision::NonHam, cycle: None, nodes_explored: nodes }
    }

    fn ham(d: &Digraph, vertices: Vec<Vertex>, nodes: u64) -> Self {
        let cycle = HamiltonCycle { vertices };
        debug_assert!(verify_hamilton(d, &cycle));
        OracleResult { decision: Decision::Ham, cycle: Some(cycle), nodes_explored: nodes }
    }
}

/// Subset DP anchored at vertex 0. `reach[mask]` holds the endpoints v such
/// that some path 0 → v visits exactly `mask`.
pub fn held_karp(d: &Digraph) -> Result<OracleResult> {
    let n = d.n();
    if n > HELD_KARP_MAX_N {
        return Err(Error::input(format!("held_karp supports n <= {HELD_KARP_MAX_N}, got {n}")));
    }
    if n < 2 {
        return Ok(OracleResult::non_ham(0));
    }
    let out: Vec<u32> = (0..n)
        .map(|v| d.out_nbrs(v).iter().fold(0u32, |m, &w| m | (1 << w)))
        .collect();
    let full = (1usize << n) - 1;
    let mut reach = vec![0u32; 1 << n];
    reach[1] = 1;
    let mut nodes = 0u64;
    for mask in (1..=full).step_by(2) {
        let ends = reach[mask];
        if ends == 0 {
            continue;
        }
        nodes += ends.count_ones() as u64;
        let mut e = ends;
        while e != 0 {
            let v = e.trailing_zeros() as usize;
            e &= e - 1;
            let mut next = out[v] & !(mask as u32);
            while next != 0 {
                let w = next.trailing_zeros() as usize;
                next &= next - 1;
                reach[mask | 1 << w] |= 1 << w;
            }
        }
    }
    let closing = reach[full] & d.in_nbrs(0).iter().fold(0u32, |m, &w| m | (1 << w));
    if closing == 0 {
        return Ok(OracleResult::non_ham(nodes));
    }
    let mut rev = Vec::with_capacity(n);
    let mut mask = full;
    let mut v = closing.trailing_zeros() as usize;
    loop {
        rev.push(v);
        if v == 0 {
            break;
        }
        mask &= !(1 << v);
        let preds = reach[mask] & d.in_nbrs(v).iter().fold(0u32, |m, &w| m | (1 << w));
        v = preds.trailing_zeros() as usize;
    }
    rev.reverse();
    Ok(OracleResult::ham(d, rev, nodes))
}

struct Search<'a> {
    d: &'a Digraph,
    start: Vertex,
    visited: Vec<bool>,
    path: Vec<Vertex>,
    nodes: u64,
    budget: u64,
}

enum Step {
    Found,
    Dead,
    Timeout,
}

impl Search<'_> {
    fn avail_in(&self, w: Vertex, end: Vertex) -> usize {
        self.d
            .in_nbrs(w)
            .iter()
            .filter(|&&u| !self.visited[u] || u == end)
            .count()
    }

    fn avail_out(&self, w: Vertex) -> usize {
        self.d
            .out_nbrs(w)
            .iter()
            .filter(|&&u| !self.visited[u] || u == self.start)
            .count()
    }

    /// Every unvisited vertex reachable from `end` through unvisited vertices.
    fn reachable(&self, end: Vertex, remaining: usize) -> bool {
        let n = self.d.n();
        let mut seen = vec![false; n];
        let mut stack = vec![end];
        let mut count = 0;
        while let Some(v) = stack.pop() {
            for &w in self.d.out_nbrs(v) {
                if !self.visited[w] && !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == remaining
    }

    fn dfs(&mut self) -> Step {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Step::Timeout;
        }
        let n = self.d.n();
        let end = *self.path.last().expect("path starts at the anchor");
        let remaining = n - self.path.len();
        if remaining == 0 {
            return if self.d.has_edge(end, self.start) { Step::Found } else { Step::Dead };
        }
        // the anchor must still be enterable from something unvisited or from end
        if !self.d.in_nbrs(self.start).iter().any(|&u| !self.visited[u] || u == end) {
            return Step::Dead;
        }
        let mut forced = None;
        for w in 0..n {
            if self.visited[w] {
                continue;
            }
            let ins = self.avail_in(w, end);
            if ins == 0 || self.avail_out(w) == 0 {
                return Step::Dead;
            }
            if ins == 1 && self.d.has_edge(end, w) {
                if forced.is_some_and(|f| f != w) {
                    return Step::Dead;
                }
                forced = Some(w);
            }
        }
        if !self.reachable(end, remaining) {
            return Step::Dead;
        }
        let mut cand: Vec<Vertex> = match forced {
            Some(w) => vec![w],
            None => self.d.out_nbrs(end).iter().copied().filter(|&w| !self.visited[w]).collect(),
        };
        cand.sort_by_key(|&w| (self.avail_out(w), w));
        for w in cand {
            self.visited[w] = true;
            self.path.push(w);
            match self.dfs() {
                Step::Dead => {}
                other => return other,
            }
            self.path.pop();
            self.visited[w] = false;
        }
        Step::Dead
    }
}

/// DFS with degree-1 forcing, reachability pruning and fewest-exits-first
/// branching. `budget` bounds the number of search nodes.
pub fn backtrack(d: &Digraph, budget: u64) -> OracleResult {
    let n = d.n();
    if n < 2 {
        return OracleResult::non_ham(0);
    }
    if (0..n).any(|v| d.out_nbrs(v).is_empty() || d.in_nbrs(v).is_empty()) {
        return OracleResult::non_ham(0);
    }
    let start = (0..n)
        .min_by_key(|&v| (d.out_nbrs(v).len(), v))
        .expect("n >= 2");
    let mut visited = vec![false; n];
    visited[start] = true;
    let mut s = Search { d, start, visited, path: vec![start], nodes: 0, budget };
    match s.dfs() {
        Step::Found => {
            let nodes = s.nodes;
            OracleResult::ham(d, s.path, nodes)
        }
        Step::Dead => OracleResult::non_ham(s.nodes),
        Step::Timeout => OracleResult { decision: Decision::Timeout, cycle: None, nodes_explored: s.nodes },
    }
}

/// Held–Karp when n fits, else backtracking.
pub fn decide(d: &Digraph, budget: u64) -> OracleResult {
    if d.n() <= HELD_KARP_MAX_N.min(16) {
        held_karp(d).expect("n within cap")
    } else {
        backtrack(d, budget)
    }
}
