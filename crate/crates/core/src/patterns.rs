//! Subgraph patterns `H`, the bounded-degree spanning-subgraph search used in
//! the clique analysis, and the Cauchy–Schwarz / Hölder slack oracles.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::graphs::StepGraphon;

/// A finite simple graph on vertices `0..k`, edges stored as sorted `(u, v)`
/// pairs with `u < v`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPattern", into = "RawPattern")]
pub struct SubgraphPattern {
    k: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct RawPattern {
    k: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<RawPattern> for SubgraphPattern {
    type Error = Error;
    fn try_from(raw: RawPattern) -> Result<Self> {
        SubgraphPattern::new(raw.k, raw.edges)
    }
}

impl From<SubgraphPattern> for RawPattern {
    fn from(p: SubgraphPattern) -> Self {
        RawPattern { k: p.k, edges: p.edges }
    }
}

impl SubgraphPattern {
    /// Builds a pattern, rejecting loops, out-of-range endpoints and
    /// duplicate edges. Edge orientation is normalized.
    pub fn new(k: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if k > 64 {
            return Err(domain!("patterns are limited to 64 vertices, got {k}"));
        }
        let mut list = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(domain!("loop at vertex {u}"));
            }
            if u >= k || v >= k {
                return Err(domain!("edge ({u},{v}) out of range for k = {k}"));
            }
            list.push((u.min(v), u.max(v)));
        }
        list.sort_unstable();
        let before = list.len();
        list.dedup();
        if list.len() != before {
            return Err(domain!("duplicate edge in pattern"));
        }
        Ok(SubgraphPattern { k, edges: list })
    }

    pub fn edge() -> Self {
        SubgraphPattern { k: 2, edges: vec![(0, 1)] }
    }

    pub fn triangle() -> Self {
        Self::clique(3).expect("K3 is valid")
    }

    /// `K_k`.
    pub fn clique(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(domain!("clique needs at least 2 vertices"));
        }
        let edges = (0..k).flat_map(|u| (u + 1..k).map(move |v| (u, v)));
        Self::new(k, edges)
    }

    /// `K_{1,k-1}` with center 0.
    pub fn star(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(domain!("star needs at least 2 vertices"));
        }
        Self::new(k, (1..k).map(|v| (0, v)))
    }

    /// `C_l` on vertices `0..l` in cyclic order.
    pub fn cycle(l: usize) -> Result<Self> {
        if l < 3 {
            return Err(domain!("cycle needs at least 3 vertices, got {l}"));
        }
        Self::new(l, (0..l).map(|i| (i, (i + 1) % l)))
    }

    /// Path on `l` vertices (`l - 1` edges).
    pub fn path(l: usize) -> Result<Self> {
        if l < 2 {
            return Err(domain!("path needs at least 2 vertices, got {l}"));
        }
        Self::new(l, (1..l).map(|i| (i - 1, i)))
    }

    pub fn vertex_count(&self) -> usize {
        self.k
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.k];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// `Δ(H)`.
    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.k * self.k.saturating_sub(1) / 2
    }

    /// True when `H` is isomorphic to `K_{1,k-1}`.
    pub fn is_spanning_star(&self) -> bool {
        self.k >= 2
            && self.edges.len() == self.k - 1
            && self.degrees().iter().any(|&d| d == self.k - 1)
    }

    /// True when every edge of `other` is an edge of `self` (same vertex set).
    pub fn contains(&self, other: &SubgraphPattern) -> bool {
        other.k == self.k && other.edges.iter().all(|e| self.edges.binary_search(e).is_ok())
    }

    /// Neighbourhood bitmask of each vertex.
    pub fn adjacency_masks(&self) -> Vec<u64> {
        let mut adj = vec![0u64; self.k];
        for &(u, v) in &self.edges {
            adj[u] |= 1 << v;
            adj[v] |= 1 << u;
        }
        adj
    }
}

impl fmt::Display for SubgraphPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H(k={}, edges=[", self.k)?;
        for (i, (u, v)) in self.edges.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{u}{v}")?;
        }
        write!(f, "])")
    }
}

/// Named patterns: `clique:k`, `star:k`, `cycle:l`, `path:l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternName {
    Clique(usize),
    Star(usize),
    Cycle(usize),
    Path(usize),
}

impl FromStr for PatternName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "triangle" => return Ok(PatternName::Clique(3)),
            "edge" => return Ok(PatternName::Clique(2)),
            "cherry" => return Ok(PatternName::Star(3)),
            _ => {}
        }
        let (name, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected name:size, got `{s}`")))?;
        let size: usize = arg
            .parse()
            .map_err(|_| Error::Parse(format!("bad pattern size `{arg}`")))?;
        match name {
            "clique" | "k" => Ok(PatternName::Clique(size)),
            "star" => Ok(PatternName::Star(size)),
            "cycle" | "c" => Ok(PatternName::Cycle(size)),
            "path" | "p" => Ok(PatternName::Path(size)),
            _ => Err(Error::Parse(format!("unknown pattern `{name}`"))),
        }
    }
}

/// Returns the named pattern with canonical labeling.
pub fn pattern_catalog(name: PatternName) -> Result<SubgraphPattern> {
    match name {
        PatternName::Clique(k) => SubgraphPattern::clique(k),
        PatternName::Star(k) => SubgraphPattern::star(k),
        PatternName::Cycle(l) => SubgraphPattern::cycle(l),
        PatternName::Path(l) => SubgraphPattern::path(l),
    }
}

/// Largest `k` handled by the exhaustive fallback of [`spanning_bounded_degree`].
pub const EXHAUSTIVE_MAX_K: usize = 8;

/// How a bounded-degree spanning subgraph was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanningMethod {
    Constructive,
    Exhaustive,
}

/// Finds a spanning subgraph `H'` of `H` with `Δ(H') <= 2` and
/// `e(H') > 2 e(H) / (k - 1)`.
///
/// Requires `k >= 4`, at least one edge, and `H` not `K_k` or `K_{1,k-1}`.
pub fn spanning_bounded_degree(h: &SubgraphPattern) -> Result<SubgraphPattern> {
    spanning_bounded_degree_with_method(h).map(|(p, _)| p)
}

/// As [`spanning_bounded_degree`], also reporting which path produced the result.
pub fn spanning_bounded_degree_with_method(
    h: &SubgraphPattern,
) -> Result<(SubgraphPattern, SpanningMethod)> {
    let k = h.k;
    if k < 4 {
        return Err(Error::Precondition(format!("need k >= 4, got {k}")));
    }
    if h.edges.is_empty() {
        return Err(Error::Precondition("pattern has no edges".into()));
    }
    if h.is_complete() {
        return Err(Error::Precondition("pattern is the complete graph K_k".into()));
    }
    if h.is_spanning_star() {
        return Err(Error::Precondition("pattern is the star K_{1,k-1}".into()));
    }
    let qualifies = |sub: &[(usize, usize)]| {
        (sub.len() as f64) * ((k - 1) as f64) > 2.0 * h.edges.len() as f64
    };
    if let Some(mut sub) = constructive(k, &h.edges) {
        augment(k, &h.edges, &mut sub);
        if qualifies(&sub) {
            let out = SubgraphPattern::new(k, sub)?;
            return Ok((out, SpanningMethod::Constructive));
        }
    }
    if k > EXHAUSTIVE_MAX_K {
        return Err(Error::Resource(format!(
            "constructive search exhausted for k = {k} > {EXHAUSTIVE_MAX_K}"
        )));
    }
    let best = max_degree_two_subgraph(k, &h.edges);
    if !qualifies(&best) {
        return Err(Error::Infeasible(format!(
            "no spanning subgraph with max degree 2 beats the threshold for {h}"
        )));
    }
    Ok((SubgraphPattern::new(k, best)?, SpanningMethod::Exhaustive))
}

fn degrees_of(k: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut deg = vec![0; k];
    for &(u, v) in edges {
        deg[u] += 1;
        deg[v] += 1;
    }
    deg
}

fn is_acyclic(k: usize, edges: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(u, v) in edges {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a == b {
            return false;
        }
        parent[a] = b;
    }
    true
}

/// Longest cycle as a vertex sequence; the first one found in DFS order
/// from the smallest start vertex.
fn longest_cycle(k: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut adj = vec![0u64; k];
    for &(u, v) in edges {
        adj[u] |= 1 << v;
        adj[v] |= 1 << u;
    }
    let mut best: Option<Vec<usize>> = None;
    let mut path = Vec::with_capacity(k);
    for s in 0..k {
        path.clear();
        path.push(s);
        extend_cycle(&adj, s, 1u64 << s, &mut path, &mut best);
        if best.as_ref().is_some_and(|c| c.len() == k) {
            break;
        }
    }
    best
}

fn extend_cycle(
    adj: &[u64],
    start: usize,
    visited: u64,
    path: &mut Vec<usize>,
    best: &mut Option<Vec<usize>>,
) {
    let last = *path.last().expect("path is never empty");
    if path.len() >= 3 && adj[last] & (1 << start) != 0 {
        if best.as_ref().map_or(true, |b| path.len() > b.len()) {
            *best = Some(path.clone());
        }
    }
    // only vertices above `start`, so each cycle is rooted at its minimum
    let mut next = adj[last] & !visited & !((1u64 << start << 1).wrapping_sub(1));
    while next != 0 {
        let v = next.trailing_zeros() as usize;
        next &= next - 1;
        path.push(v);
        extend_cycle(adj, start, visited | (1 << v), path, best);
        path.pop();
    }
}

/// Recursive recipe: bounded-degree graphs are returned as is, forests are
/// handled with two edges at a max-degree vertex plus extensions, otherwise a
/// longest cycle is kept and the recipe recurses on the edges not touching it.
fn constructive(k: usize, edges: &[(usize, usize)]) -> Option<Vec<(usize, usize)>> {
    if edges.is_empty() {
        return Some(Vec::new());
    }
    let threshold = 2.0 * edges.len() as f64 / (k - 1) as f64;
    let beats = |n: usize| n as f64 > threshold;
    let deg = degrees_of(k, edges);
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    if max_deg <= 2 {
        return Some(edges.to_vec());
    }
    if is_acyclic(k, edges) {
        let v = deg.iter().position(|&d| d == max_deg)?;
        let mut chosen: Vec<(usize, usize)> =
            edges.iter().copied().filter(|&(a, b)| a == v || b == v).take(2).collect();
        let mut cur = degrees_of(k, &chosen);
        for &(a, b) in edges {
            if beats(chosen.len()) {
                break;
            }
            if chosen.contains(&(a, b)) || cur[a] >= 2 || cur[b] >= 2 {
                continue;
            }
            cur[a] += 1;
            cur[b] += 1;
            chosen.push((a, b));
        }
        chosen.sort_unstable();
        return beats(chosen.len()).then_some(chosen);
    }
    let cycle = longest_cycle(k, edges)?;
    let l = cycle.len();
    let mut cycle_edges: Vec<(usize, usize)> = (0..l)
        .map(|i| {
            let (a, b) = (cycle[i], cycle[(i + 1) % l]);
            (a.min(b), a.max(b))
        })
        .collect();
    cycle_edges.sort_unstable();
    if beats(l) {
        return Some(cycle_edges);
    }
    let mut on_cycle = 0u64;
    for &v in &cycle {
        on_cycle |= 1 << v;
    }
    let rest: Vec<(usize, usize)> = edges
        .iter()
        .copied()
        .filter(|&(a, b)| on_cycle & (1 << a) == 0 && on_cycle & (1 << b) == 0)
        .collect();
    if rest.is_empty() {
        return None;
    }
    let mut sub = constructive(k, &rest)?;
    sub.extend(cycle_edges);
    sub.sort_unstable();
    beats(sub.len()).then_some(sub)
}

/// Adds edges of `edges` in lexicographic order while the degree bound allows.
fn augment(k: usize, edges: &[(usize, usize)], sub: &mut Vec<(usize, usize)>) {
    let mut deg = degrees_of(k, sub);
    for &(a, b) in edges {
        if deg[a] < 2 && deg[b] < 2 && sub.binary_search(&(a, b)).is_err() {
            deg[a] += 1;
            deg[b] += 1;
            let pos = sub.binary_search(&(a, b)).unwrap_err();
            sub.insert(pos, (a, b));
        }
    }
}

/// Maximum-size spanning subgraph with `Δ <= 2`; ties broken by the
/// lexicographically smallest sorted edge list.
pub(crate) fn max_degree_two_subgraph(k: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    struct Search<'a> {
        edges: &'a [(usize, usize)],
        deg: Vec<u8>,
        current: Vec<(usize, usize)>,
        best: Vec<(usize, usize)>,
        cap: usize,
    }
    impl Search<'_> {
        fn run(&mut self, i: usize) {
            if self.current.len() > self.best.len() {
                self.best = self.current.clone();
            }
            if i == self.edges.len()
                || self.best.len() == self.cap
                || self.current.len() + (self.edges.len() - i) <= self.best.len()
            {
                return;
            }
            let (a, b) = self.edges[i];
            if self.deg[a] < 2 && self.deg[b] < 2 {
                self.deg[a] += 1;
                self.deg[b] += 1;
                self.current.push((a, b));
                self.run(i + 1);
                self.current.pop();
                self.deg[a] -= 1;
                self.deg[b] -= 1;
            }
            self.run(i + 1);
        }
    }
    let mut search = Search {
        edges,
        deg: vec![0; k],
        current: Vec::new(),
        best: Vec::new(),
        cap: k.min(edges.len()),
    };
    search.run(0);
    search.best
}

/// `(E U^2)^{3/2} - t(U)`, nonnegative by Cauchy–Schwarz.
pub fn cauchy_schwarz_slack(u: &StepGraphon) -> f64 {
    u.moment(2).powf(1.5) - u.triangle_density()
}

/// `E[U^d]^{e(F)/d} - t(F, U)`, nonnegative by the generalized Hölder
/// inequality whenever `Δ(F) <= d`.
pub fn holder_slack(f: &SubgraphPattern, u: &StepGraphon, d: u32) -> Result<f64> {
    if d == 0 {
        return Err(domain!("d must be positive"));
    }
    if f.max_degree() > d as usize {
        return Err(Error::Precondition(format!(
            "max degree {} exceeds d = {d}",
            f.max_degree()
        )));
    }
    let t = u.hom_density(f)?;
    Ok(u.moment(d).powf(f.edge_count() as f64 / d as f64) - t)
}
