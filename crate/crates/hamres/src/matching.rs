//! Bipartite matchings and the path covers built from chained matchings.

use serde::Serialize;

use crate::digraph::{all_distinct, Digraph, DirectedPath, Vertex};
use crate::division::divide_induced;
use crate::error::{Error, Result, Stage};
use crate::profile::ParameterProfile;
use crate::rng;

/// Left and right vertex lists with left-to-right adjacency by index.
#[derive(Clone, Debug)]
pub struct BipartiteView {
    pub left: Vec<Vertex>,
    pub right: Vec<Vertex>,
    adj: Vec<Vec<usize>>,
}

impl BipartiteView {
    /// `l ~ r` iff `l → r` in `d`.
    pub fn forward(d: &Digraph, left: &[Vertex], right: &[Vertex]) -> Self {
        Self::build(left, right, |l, r| d.has_edge(l, r))
    }

    /// `l ~ r` iff `r → l` in `d`.
    pub fn backward(d: &Digraph, left: &[Vertex], right: &[Vertex]) -> Self {
        Self::build(left, right, |l, r| d.has_edge(r, l))
    }

    fn build(left: &[Vertex], right: &[Vertex], mut adjacent: impl FnMut(Vertex, Vertex) -> bool) -> Self {
        let adj = left
            .iter()
            .map(|&l| (0..right.len()).filter(|&j| adjacent(l, right[j])).collect())
            .collect();
        BipartiteView { left: left.to_vec(), right: right.to_vec(), adj }
    }

    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = Vertex> + '_ {
        self.adj[i].iter().map(|&j| self.right[j])
    }
}

/// A left set with fewer neighbours than members.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HallViolation {
    pub set: Vec<Vertex>,
    pub neighbourhood: Vec<Vertex>,
}

impl HallViolation {
    fn into_error(self, stage: Stage) -> Error {
        Error::failed(
            stage,
            format!(
                "Hall violator of size {} with {} neighbours: {:?}",
                self.set.len(),
                self.neighbourhood.len(),
                self.set
            ),
        )
    }
}

struct Kuhn<'a> {
    view: &'a BipartiteView,
    match_right: Vec<Option<usize>>,
    seen_left: Vec<bool>,
    seen_right: Vec<bool>,
}

impl Kuhn<'_> {
    fn augment(&mut self, i: usize) -> bool {
        self.seen_left[i] = true;
        for &j in &self.view.adj[i] {
            if self.match_right[j].is_none() {
                self.seen_right[j] = true;
                self.match_right[j] = Some(i);
                return true;
            }
        }
        for &j in &self.view.adj[i] {
            if self.seen_right[j] {
                continue;
            }
            self.seen_right[j] = true;
            let owner = self.match_right[j].expect("free vertices taken above");
            if self.augment(owner) {
                self.match_right[j] = Some(i);
                return true;
            }
        }
        false
    }
}

/// Matching saturating the left side, as `(left, right)` pairs in left
/// order. Deterministic: free neighbours are preferred, in right order.
pub fn hall_matching(view: &BipartiteView) -> std::result::Result<Vec<(Vertex, Vertex)>, HallViolation> {
    let (nl, nr) = (view.left.len(), view.right.len());
    let mut k = Kuhn { view, match_right: vec![None; nr], seen_left: vec![false; nl], seen_right: vec![false; nr] };
    for i in 0..nl {
        k.seen_left.iter_mut().for_each(|b| *b = false);
        k.seen_right.iter_mut().for_each(|b| *b = false);
        if !k.augment(i) {
            let mut set: Vec<Vertex> = (0..nl).filter(|&a| k.seen_left[a]).map(|a| view.left[a]).collect();
            let mut neighbourhood: Vec<Vertex> = (0..nr).filter(|&b| k.seen_right[b]).map(|b| view.right[b]).collect();
            set.sort_unstable();
            neighbourhood.sort_unstable();
            return Err(HallViolation { set, neighbourhood });
        }
    }
    let mut pairs: Vec<(usize, usize)> = k.match_right.iter().enumerate().filter_map(|(j, m)| m.map(|i| (i, j))).collect();
    pairs.sort_unstable();
    Ok(pairs.into_iter().map(|(i, j)| (view.left[i], view.right[j])).collect())
}

/// Perfect matchings `C_i → C_{i+1}` strung into `|C_1|` paths, one per
/// vertex of `classes[0]`, in that order.
pub fn chain_matchings(d: &Digraph, classes: &[Vec<Vertex>]) -> Result<Vec<DirectedPath>> {
    let Some(first) = classes.first() else {
        return Ok(Vec::new());
    };
    if classes.iter().any(|c| c.len() != first.len()) {
        return Err(Error::input("chained classes must have equal sizes"));
    }
    let mut paths: Vec<Vec<Vertex>> = first.iter().map(|&v| vec![v]).collect();
    for (i, pair) in classes.windows(2).enumerate() {
        let ends: Vec<Vertex> = paths.iter().map(|p| *p.last().expect("nonempty")).collect();
        let m = hall_matching(&BipartiteView::forward(d, &ends, &pair[1])).map_err(|h| h.into_error(Stage::Link(i + 1)))?;
        for (p, (_, next)) in paths.iter_mut().zip(m) {
            p.push(next);
        }
    }
    Ok(paths.into_iter().map(DirectedPath::new).collect())
}

/// Like [`chain_matchings`], but the classes may be visited in any order.
/// Depth-first over orders, at most `budget` matching calls; returns the
/// paths and the class order used.
pub fn chain_any_order(d: &Digraph, classes: &[Vec<Vertex>], budget: usize) -> Result<(Vec<DirectedPath>, Vec<usize>)> {
    let Some(first) = classes.first() else {
        return Ok((Vec::new(), Vec::new()));
    };
    if classes.iter().any(|c| c.len() != first.len()) {
        return Err(Error::input("chained classes must have equal sizes"));
    }
    struct Search<'a> {
        d: &'a Digraph,
        classes: &'a [Vec<Vertex>],
        used: Vec<bool>,
        order: Vec<usize>,
        calls: usize,
        budget: usize,
        deepest: usize,
        violation: Option<HallViolation>,
    }
    impl Search<'_> {
        fn go(&mut self, paths: &mut Vec<Vec<Vertex>>) -> bool {
            if self.order.len() == self.classes.len() {
                return true;
            }
            let ends: Vec<Vertex> = paths.iter().map(|p| *p.last().expect("nonempty")).collect();
            for j in 0..self.classes.len() {
                if self.used[j] || self.calls >= self.budget {
                    continue;
                }
                self.calls += 1;
                match hall_matching(&BipartiteView::forward(self.d, &ends, &self.classes[j])) {
                    Ok(m) => {
                        for (p, &(_, next)) in paths.iter_mut().zip(&m) {
                            p.push(next);
                        }
                        self.used[j] = true;
                        self.order.push(j);
                        if self.go(paths) {
                            return true;
                        }
                        self.order.pop();
                        self.used[j] = false;
                        for p in paths.iter_mut() {
                            p.pop();
                        }
                    }
                    Err(h) => {
                        if self.order.len() >= self.deepest {
                            self.deepest = self.order.len();
                            self.violation = Some(h);
                        }
                    }
                }
            }
            false
        }
    }
    let mut search = Search {
        d,
        classes,
        used: vec![false; classes.len()],
        order: Vec::with_capacity(classes.len()),
        calls: 0,
        budget,
        deepest: 0,
        violation: None,
    };
    for (start, class) in classes.iter().enumerate() {
        search.used[start] = true;
        search.order.push(start);
        let mut paths: Vec<Vec<Vertex>> = class.iter().map(|&v| vec![v]).collect();
        if search.go(&mut paths) {
            return Ok((paths.into_iter().map(DirectedPath::new).collect(), search.order));
        }
        search.order.pop();
        search.used[start] = false;
        if search.calls >= budget {
            break;
        }
    }
    let link = Stage::Link(search.deepest);
    Err(match search.violation {
        Some(h) => h.into_error(link),
        None => Error::failed(link, format!("no class order within {budget} matchings")),
    })
}

/// Vertex-disjoint paths, optionally using one edge that is not in the digraph.
#[derive(Clone, Debug, Serialize)]
pub struct PathSystem {
    pub paths: Vec<DirectedPath>,
    pub virtual_edge: Option<(Vertex, Vertex)>,
}

impl PathSystem {
    pub fn vertex_count(&self) -> usize {
        self.paths.iter().map(|p| p.vertices.len()).sum()
    }

    pub fn starts(&self) -> Vec<Vertex> {
        self.paths.iter().map(DirectedPath::first).collect()
    }

    pub fn ends(&self) -> Vec<Vertex> {
        self.paths.iter().map(DirectedPath::last).collect()
    }
}

/// Independent check: paths are disjoint, cover exactly `cover`, and every
/// step is an edge of `d` or the declared virtual edge (used at most once).
pub fn verify_path_system(d: &Digraph, system: &PathSystem, cover: &[Vertex]) -> std::result::Result<(), String> {
    let n = d.n();
    let all: Vec<Vertex> = system.paths.iter().flat_map(|p| p.vertices.iter().copied()).collect();
    if system.paths.iter().any(|p| p.vertices.is_empty()) {
        return Err("empty path".into());
    }
    if !all_distinct(&all, n) {
        return Err("paths are not vertex-disjoint".into());
    }
    let mut want = cover.to_vec();
    want.sort_unstable();
    let mut got = all;
    got.sort_unstable();
    if want != got {
        return Err(format!("covers {} vertices, expected {}", got.len(), want.len()));
    }
    let mut virtual_uses = 0;
    for p in &system.paths {
        for w in p.vertices.windows(2) {
            if Some((w[0], w[1])) == system.virtual_edge {
                virtual_uses += 1;
            } else if !d.has_edge(w[0], w[1]) {
                return Err(format!("{} -> {} is not an edge", w[0], w[1]));
            }
        }
    }
    if virtual_uses > 1 {
        return Err("virtual edge used twice".into());
    }
    Ok(())
}

/// Class count and class size for covering `b` vertices with at most
/// `max_paths` paths, preferring the fewest (largest) classes.
fn class_shape(b: usize, max_paths: usize) -> (usize, usize) {
    let max_paths = max_paths.max(1);
    for k in 1..=b {
        if b / k + b % k <= max_paths {
            return (k, b / k);
        }
    }
    (b, 1)
}

/// Cover `set` by at most `max_paths` vertex-disjoint paths of `d[set]`.
///
/// Two rounds of division (groups of `profile.k` classes, then classes inside
/// each group with its neighbouring groups as host), then the classes are
/// chained by matchings. Vertices left out of the classes stay singletons.
pub fn initial_path_cover(
    d: &Digraph,
    set: &[Vertex],
    max_paths: usize,
    profile: &ParameterProfile,
    seed: u64,
) -> Result<PathSystem> {
    let b = set.len();
    if b == 0 {
        return Ok(PathSystem { paths: Vec::new(), virtual_edge: None });
    }
    let (classes_total, c) = class_shape(b, max_paths);
    let per_group = profile.k.max(1);
    let mut group_classes = Vec::new();
    let mut left = classes_total;
    while left > 0 {
        let g = per_group.min(left);
        group_classes.push(g);
        left -= g;
    }
    let sizes: Vec<usize> = group_classes.iter().map(|g| g * c).collect();
    let round1 = divide_induced(d, set, set, sizes, profile.m, profile.eps, rng::derive(seed, 1), profile.max_rounds)
        .map_err(|e| e.within(Stage::Division1))?;
    let groups = &round1.parts;
    let round2 = crate::par::map_indexed(groups.len(), |i| {
        let mut host = groups[i].clone();
        if i > 0 {
            host.extend_from_slice(&groups[i - 1]);
        }
        if i + 1 < groups.len() {
            host.extend_from_slice(&groups[i + 1]);
        }
        divide_induced(
            d,
            &host,
            &groups[i],
            vec![c; group_classes[i]],
            profile.m,
            profile.eps,
            rng::derive(seed, 100 + i as u64),
            profile.max_rounds,
        )
        .map_err(|e| e.within(Stage::Division2))
    });
    let mut classes = Vec::with_capacity(classes_total);
    for r in round2 {
        classes.extend(r?.parts);
    }
    let (mut paths, _) = chain_any_order(d, &classes, 4 * classes.len() * classes.len())?;
    paths.extend(round1.residual.iter().map(|&v| DirectedPath::single(v)));
    let system = PathSystem { paths, virtual_edge: None };
    verify_path_system(d, &system, set).map_err(|e| Error::consistency(format!("initial cover: {e}")))?;
    Ok(system)
}

#[derive(Clone, Debug, Serialize)]
pub struct FinalCover {
    /// The path through the virtual edge comes first.
    pub system: PathSystem,
    pub initial_paths: usize,
    pub cycles_broken: usize,
}

/// Cover `v_set ∪ b1 ∪ b2 ∪ {u, v}` by paths with both ends in `b2`, where
/// `u → v` is a virtual edge. `b2` is divided into `k` classes of `|b2|/k`;
/// the number of paths is at most `|b2|/k`.
#[allow(clippy::too_many_arguments)]
pub fn final_path_cover(
    d: &Digraph,
    v_set: &[Vertex],
    b1: &[Vertex],
    b2: &[Vertex],
    u: Vertex,
    v: Vertex,
    k: usize,
    profile: &ParameterProfile,
    seed: u64,
) -> Result<FinalCover> {
    if k == 0 || b2.is_empty() || !b2.len().is_multiple_of(k) {
        return Err(Error::input(format!("|B2| = {} is not a positive multiple of k = {k}", b2.len())));
    }
    let ell = b2.len() / k;
    let mut base: Vec<Vertex> = v_set.iter().chain(b1).copied().filter(|&w| w != u && w != v).collect();
    base.sort_unstable();
    let mut cover: Vec<Vertex> = base.iter().chain(b2).copied().chain([u, v]).collect();
    cover.sort_unstable();
    if !all_distinct(&cover, d.n()) || u == v {
        return Err(Error::input("final cover sets overlap"));
    }

    let initial = initial_path_cover(d, &base, ell.saturating_sub(2), profile, rng::derive(seed, 2))?;
    let initial_paths = initial.paths.len();
    let mut ps: Vec<Vec<Vertex>> = initial.paths.into_iter().map(|p| p.vertices).collect();
    ps.push(vec![u, v]);
    let xs: Vec<Vertex> = ps.iter().map(|p| p[0]).collect();
    let ys: Vec<Vertex> = ps.iter().map(|p| *p.last().expect("nonempty")).collect();
    if ps.len() > ell {
        return Err(Error::failed(Stage::Cover, format!("{} paths to attach but classes of {ell}", ps.len())));
    }

    let mut host: Vec<Vertex> = b2.iter().chain(&xs).chain(&ys).copied().collect();
    host.sort_unstable();
    host.dedup();
    let parts = divide_induced(d, &host, b2, vec![ell; k], profile.m, profile.eps, rng::derive(seed, 3), profile.max_rounds)
        .map_err(|e| e.within(Stage::Cover))?
        .parts;
    let (chains, order) = chain_any_order(d, &parts, 4 * k * k)?;
    let classes: Vec<&Vec<Vertex>> = order.iter().map(|&j| &parts[j]).collect();
    let qs: Vec<Vec<Vertex>> = chains.into_iter().map(|p| p.vertices).collect();

    let into_first = hall_matching(&BipartiteView::forward(d, &ys, classes[0])).map_err(|h| h.into_error(Stage::Attach))?;
    let from_last = hall_matching(&BipartiteView::backward(d, &xs, classes[k - 1])).map_err(|h| h.into_error(Stage::Attach))?;

    // successor links: Q_j → P_i when last(Q_j) → x_i, P_i → Q_j when y_i → first(Q_j)
    let n = d.n();
    let mut q_by_first = vec![usize::MAX; n];
    let mut q_by_last = vec![usize::MAX; n];
    for (j, q) in qs.iter().enumerate() {
        q_by_first[q[0]] = j;
        q_by_last[*q.last().expect("nonempty")] = j;
    }
    let mut p_after_q = vec![usize::MAX; qs.len()];
    let mut q_after_p = vec![usize::MAX; ps.len()];
    let mut has_pred = vec![false; qs.len()];
    for (i, &(_, c)) in into_first.iter().enumerate() {
        q_after_p[i] = q_by_first[c];
        has_pred[q_by_first[c]] = true;
    }
    for (i, &(_, c)) in from_last.iter().enumerate() {
        p_after_q[q_by_last[c]] = i;
    }

    let mut used = vec![false; qs.len()];
    let walk = |start: usize, used: &mut Vec<bool>| -> Vec<usize> {
        let mut order = Vec::new();
        let mut j = start;
        while j != usize::MAX && !used[j] {
            used[j] = true;
            order.push(j);
            let i = p_after_q[j];
            j = if i == usize::MAX { usize::MAX } else { q_after_p[i] };
        }
        order
    };
    let splice = |order: &[usize], rotate_first: bool| -> Vec<Vertex> {
        let mut out = Vec::new();
        for (pos, &j) in order.iter().enumerate() {
            let q = &qs[j];
            if pos == 0 && rotate_first {
                out.extend_from_slice(&q[1..]);
            } else {
                out.extend_from_slice(q);
            }
            let i = p_after_q[j];
            if i != usize::MAX && (pos + 1 < order.len() || rotate_first) {
                out.extend_from_slice(&ps[i]);
            }
        }
        if rotate_first {
            out.push(qs[order[0]][0]);
        }
        out
    };
    let mut paths = Vec::new();
    for (j, &pred) in has_pred.iter().enumerate() {
        if !pred {
            let order = walk(j, &mut used);
            paths.push(splice(&order, false));
        }
    }
    let mut cycles_broken = 0;
    for j in 0..qs.len() {
        if !used[j] {
            if k < 2 {
                return Err(Error::failed(Stage::Cover, "cycle through single-vertex chains cannot be broken"));
            }
            let order = walk(j, &mut used);
            paths.push(splice(&order, true));
            cycles_broken += 1;
        }
    }
    if let Some(pos) = paths.iter().position(|p| p.windows(2).any(|w| w == [u, v])) {
        paths.swap(0, pos);
    }
    let system = PathSystem { paths: paths.into_iter().map(DirectedPath::new).collect(), virtual_edge: Some((u, v)) };
    verify_path_system(d, &system, &cover).map_err(|e| Error::consistency(format!("final cover: {e}")))?;
    let in_b2 = d.mask(b2);
    if system.paths.iter().any(|p| !in_b2[p.first()] || !in_b2[p.last()]) {
        return Err(Error::consistency("final cover path ends outside B2"));
    }
    if system.paths.len() > ell {
        return Err(Error::consistency(format!("{} paths exceed ℓ = {ell}", system.paths.len())));
    }
    Ok(FinalCover { system, initial_paths, cycles_broken })
}
