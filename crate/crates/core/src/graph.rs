//! Undirected weighted graphs over coefficient indices, supports, and the
//! weighted graph model `(G, s, g, C)`.
//!
//! A support belongs to the model when it has at most `s` vertices, induces
//! at most `g` connected components, and the minimum spanning forest of the
//! induced subgraph weighs at most `C`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Immutable undirected graph with CSR adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_vertices: usize,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    // (neighbor, edge index), sorted by neighbor within each vertex
    adjacency: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(num_vertices: usize, edges: Vec<Edge>) -> Result<Self> {
        if num_vertices == 0 {
            return Err(Error::invalid("graph must have at least one vertex"));
        }
        let mut degree = vec![0usize; num_vertices];
        for (i, e) in edges.iter().enumerate() {
            if e.u >= num_vertices || e.v >= num_vertices {
                return Err(Error::invalid(format!(
                    "edge {i} ({}, {}) out of range for {num_vertices} vertices",
                    e.u, e.v
                )));
            }
            if e.u == e.v {
                return Err(Error::invalid(format!("edge {i} is a self loop on {}", e.u)));
            }
            if !(e.w >= 0.0) || !e.w.is_finite() {
                return Err(Error::invalid(format!("edge {i} has invalid weight {}", e.w)));
            }
            degree[e.u] += 1;
            degree[e.v] += 1;
        }
        let mut offsets = Vec::with_capacity(num_vertices + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..num_vertices].to_vec();
        let mut adjacency = vec![(0usize, 0usize); offsets[num_vertices]];
        for (i, e) in edges.iter().enumerate() {
            adjacency[fill[e.u]] = (e.v, i);
            fill[e.u] += 1;
            adjacency[fill[e.v]] = (e.u, i);
            fill[e.v] += 1;
        }
        for v in 0..num_vertices {
            let slot = &mut adjacency[offsets[v]..offsets[v + 1]];
            slot.sort_unstable();
            if let Some(pair) = slot.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::invalid(format!(
                    "duplicate edge between {v} and {}",
                    pair[0].0
                )));
            }
        }
        Ok(Graph {
            num_vertices,
            edges,
            offsets,
            adjacency,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, index: usize) -> &Edge {
        &self.edges[index]
    }

    /// Neighbors of `v` as `(neighbor, edge index)` pairs, ascending by neighbor.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        let nbrs = self.neighbors(u);
        nbrs.binary_search_by_key(&v, |&(n, _)| n)
            .ok()
            .map(|pos| nbrs[pos].1)
    }

    pub fn is_adjacent(&self, u: usize, v: usize) -> bool {
        self.edge_between(u, v).is_some()
    }

    pub fn max_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).fold(0.0, f64::max)
    }

    /// Parses the edge-list text format:
    ///
    /// ```text
    /// p <num_vertices> <num_edges>
    /// e <u> <v> <w>
    /// ```
    pub fn parse_edge_list(text: &str, origin: &Path) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["p", nv, ne] if header.is_none() => {
                    let nv = nv
                        .parse()
                        .map_err(|_| Error::parse(origin, lineno, "bad vertex count"))?;
                    let ne = ne
                        .parse()
                        .map_err(|_| Error::parse(origin, lineno, "bad edge count"))?;
                    header = Some((nv, ne));
                }
                ["e", u, v, w] if header.is_some() => {
                    let u = u
                        .parse()
                        .map_err(|_| Error::parse(origin, lineno, "bad edge endpoint"))?;
                    let v = v
                        .parse()
                        .map_err(|_| Error::parse(origin, lineno, "bad edge endpoint"))?;
                    let w = w
                        .parse()
                        .map_err(|_| Error::parse(origin, lineno, "bad edge weight"))?;
                    edges.push(Edge { u, v, w });
                }
                _ => {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        format!("unexpected line `{line}`"),
                    ))
                }
            }
        }
        let (nv, ne) = header.ok_or_else(|| Error::parse(origin, 1, "missing `p` header"))?;
        if ne != edges.len() {
            return Err(Error::parse(
                origin,
                0,
                format!("header declares {ne} edges but {} were listed", edges.len()),
            ));
        }
        Graph::new(nv, edges).map_err(|e| Error::parse(origin, 0, e.to_string()))
    }

    pub fn load_edge_list(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(&text, path)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("p {} {}\n", self.num_vertices, self.edges.len());
        for e in &self.edges {
            let _ = writeln!(out, "e {} {} {}", e.u, e.v, e.w);
        }
        out
    }
}

/// Sorted set of vertex indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Support {
    indices: Vec<usize>,
}

impl Support {
    pub fn empty() -> Self {
        Support::default()
    }

    /// Builds a support from arbitrary indices; duplicates are rejected.
    pub fn new(mut indices: Vec<usize>, num_vertices: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate support index {}", w[0])));
        }
        if let Some(&last) = indices.last() {
            if last >= num_vertices {
                return Err(Error::invalid(format!(
                    "support index {last} out of range for {num_vertices} vertices"
                )));
            }
        }
        Ok(Support { indices })
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Support { indices }
    }

    /// Indices of the nonzero entries of `x`.
    pub fn of_vector(x: &[f64]) -> Self {
        Support {
            indices: (0..x.len()).filter(|&i| x[i] != 0.0).collect(),
        }
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        Support {
            indices: (0..mask.len()).filter(|&i| mask[i]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, v: usize) -> bool {
        self.indices.binary_search(&v).is_ok()
    }

    pub fn is_superset_of(&self, other: &Support) -> bool {
        other.indices.iter().all(|&v| self.contains(v))
    }

    pub fn union(&self, other: &Support) -> Support {
        let mut merged: Vec<usize> = self.indices.iter().chain(&other.indices).copied().collect();
        merged.sort_unstable();
        merged.dedup();
        Support { indices: merged }
    }

    pub fn mask(&self, num_vertices: usize) -> Vec<bool> {
        let mut mask = vec![false; num_vertices];
        for &v in &self.indices {
            mask[v] = true;
        }
        mask
    }

    fn check_range(&self, graph: &Graph) -> Result<()> {
        match self.indices.last() {
            Some(&v) if v >= graph.num_vertices() => Err(Error::invalid(format!(
                "support index {v} out of range for {} vertices",
                graph.num_vertices()
            ))),
            _ => Ok(()),
        }
    }
}

/// Parameters of the weighted graph model plus the projection sparsity slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WgmModel {
    pub s: usize,
    pub g: usize,
    pub cost_budget: f64,
    /// Projections may return up to `ceil(sparsity_slack * s)` vertices.
    pub sparsity_slack: f64,
}

impl WgmModel {
    pub fn new(s: usize, g: usize, cost_budget: f64, sparsity_slack: f64) -> Result<Self> {
        if g == 0 || g > s {
            return Err(Error::invalid(format!("need 1 <= g <= s, got s={s}, g={g}")));
        }
        if !(cost_budget >= 0.0) {
            return Err(Error::invalid(format!("cost budget must be >= 0, got {cost_budget}")));
        }
        if !(sparsity_slack >= 1.0) || !sparsity_slack.is_finite() {
            return Err(Error::invalid(format!(
                "sparsity slack must be >= 1, got {sparsity_slack}"
            )));
        }
        Ok(WgmModel {
            s,
            g,
            cost_budget,
            sparsity_slack,
        })
    }

    /// Model for unit-weight graphs with budget `C = s - g`, which admits
    /// every `s`-vertex support with `g` components.
    pub fn unit(s: usize, g: usize) -> Result<Self> {
        if g > s {
            return Err(Error::invalid(format!("need g <= s, got s={s}, g={g}")));
        }
        Self::new(s, g, (s - g) as f64, 1.0)
    }

    pub fn with_slack(mut self, sparsity_slack: f64) -> Self {
        self.sparsity_slack = sparsity_slack;
        self
    }

    pub fn check_against(&self, graph: &Graph) -> Result<()> {
        if self.s > graph.num_vertices() {
            return Err(Error::invalid(format!(
                "sparsity {} exceeds vertex count {}",
                self.s,
                graph.num_vertices()
            )));
        }
        Ok(())
    }

    /// `ceil(slack * s)`, never below `s`.
    pub fn max_sparsity(&self) -> usize {
        ((self.sparsity_slack * self.s as f64 - 1e-9).ceil() as usize).max(self.s)
    }

    /// The model enlarged to the projection's declared slack: sparsity
    /// `ceil(slack * s)` and one extra max-weight edge per extra vertex.
    pub fn relaxed(&self, graph: &Graph) -> WgmModel {
        let s = self.max_sparsity();
        WgmModel {
            s,
            g: self.g,
            cost_budget: self.cost_budget + (s - self.s) as f64 * graph.max_weight(),
            sparsity_slack: 1.0,
        }
    }
}

/// 4-connected `rows x cols` lattice with unit weights, row-major vertex order.
pub fn grid_graph(rows: usize, cols: usize) -> Result<Graph> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!("grid dimensions must be positive, got {rows}x{cols}")));
    }
    let mut edges = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push(Edge { u: v, v: v + 1, w: 1.0 });
            }
            if r + 1 < rows {
                edges.push(Edge { u: v, v: v + cols, w: 1.0 });
            }
        }
    }
    Graph::new(rows * cols, edges)
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Vertex sets of the components of the subgraph induced by `support`,
/// each sorted, ordered by smallest vertex.
pub fn components(graph: &Graph, support: &Support) -> Result<Vec<Vec<usize>>> {
    support.check_range(graph)?;
    let mask = support.mask(graph.num_vertices());
    let mut seen = vec![false; graph.num_vertices()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for &start in support.indices() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Vec::new();
        while let Some(v) = stack.pop() {
            comp.push(v);
            for &(u, _) in graph.neighbors(v) {
                if mask[u] && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    Ok(out)
}

pub fn connected_components(graph: &Graph, support: &Support) -> Result<usize> {
    support.check_range(graph)?;
    let mask = support.mask(graph.num_vertices());
    Ok(count_components_masked(graph, support.indices(), &mask))
}

pub(crate) fn count_components_masked(graph: &Graph, vertices: &[usize], mask: &[bool]) -> usize {
    let mut uf = UnionFind::new(graph.num_vertices());
    let mut count = vertices.len();
    for &v in vertices {
        for &(u, _) in graph.neighbors(v) {
            if u > v && mask[u] && uf.union(u, v) {
                count -= 1;
            }
        }
    }
    count
}

/// Total weight of a minimum spanning forest of the induced subgraph
/// (Kruskal, ties broken by edge index).
pub fn spanning_forest_weight(graph: &Graph, support: &Support) -> Result<f64> {
    support.check_range(graph)?;
    let mask = support.mask(graph.num_vertices());
    let mut induced: Vec<usize> = (0..graph.num_edges())
        .filter(|&i| {
            let e = graph.edge(i);
            mask[e.u] && mask[e.v]
        })
        .collect();
    induced.sort_by(|&a, &b| graph.edge(a).w.total_cmp(&graph.edge(b).w).then(a.cmp(&b)));
    let mut uf = UnionFind::new(graph.num_vertices());
    let mut total = 0.0;
    for i in induced {
        let e = graph.edge(i);
        if uf.union(e.u, e.v) {
            total += e.w;
        }
    }
    Ok(total)
}

pub fn is_in_model(graph: &Graph, support: &Support, model: &WgmModel) -> Result<bool> {
    support.check_range(graph)?;
    if support.len() > model.s {
        return Ok(false);
    }
    if connected_components(graph, support)? > model.g {
        return Ok(false);
    }
    Ok(spanning_forest_weight(graph, support)? <= model.cost_budget + 1e-12)
}

const SUPPORT_ATTEMPTS: usize = 100;

/// Draws `s` vertices forming exactly `g` connected components, one random
/// walk per component. Components are kept non-adjacent so they stay apart.
pub fn random_connected_support<R: Rng + ?Sized>(
    graph: &Graph,
    s: usize,
    g: usize,
    rng: &mut R,
) -> Result<Support> {
    if g == 0 || s < g {
        return Err(Error::invalid(format!("need 1 <= g <= s, got s={s}, g={g}")));
    }
    let p = graph.num_vertices();
    if s > p {
        return Err(Error::GenerationFailure {
            attempts: 0,
            reason: format!("sparsity {s} exceeds vertex count {p}"),
        });
    }
    let sizes: Vec<usize> = (0..g).map(|i| s / g + usize::from(i < s % g)).collect();
    'attempt: for _ in 0..SUPPORT_ATTEMPTS {
        let mut taken = vec![false; p];
        // taken or adjacent to a taken vertex
        let mut blocked = vec![false; p];
        for &size in &sizes {
            let free: Vec<usize> = (0..p).filter(|&v| !blocked[v]).collect();
            if free.is_empty() {
                continue 'attempt;
            }
            let start = free[rng.random_range(0..free.len())];
            let mut comp = vec![start];
            taken[start] = true;
            let mut current = start;
            let mut budget = 50 * size + 100;
            while comp.len() < size && budget > 0 {
                budget -= 1;
                let nbrs = graph.neighbors(current);
                if nbrs.is_empty() {
                    break;
                }
                let (next, _) = nbrs[rng.random_range(0..nbrs.len())];
                if blocked[next] {
                    continue;
                }
                current = next;
                if !taken[next] {
                    taken[next] = true;
                    comp.push(next);
                }
            }
            if comp.len() < size {
                continue 'attempt;
            }
            for &v in &comp {
                blocked[v] = true;
                for &(u, _) in graph.neighbors(v) {
                    blocked[u] = true;
                }
            }
        }
        let support = Support::from_mask(&taken);
        debug_assert_eq!(support.len(), s);
        if connected_components(graph, &support)? == g {
            return Ok(support);
        }
    }
    Err(Error::GenerationFailure {
        attempts: SUPPORT_ATTEMPTS,
        reason: format!("could not place {g} separated components totalling {s} vertices"),
    })
}
