//! Prize-collecting Steiner forest via Goemans-Williamson moat growing.
//!
//! The growth phase is unrooted: every cluster with positive prize potential
//! grows until either its potential is spent or one of its boundary edges
//! becomes tight, in which case the two clusters merge. Each resulting tree is
//! then strongly pruned (the root maximizing the pruned net worth is chosen by
//! a rerooting pass). The `g` output slots are then filled greedily: each
//! slot either takes the next most valuable tree or cuts one edge of a kept
//! tree (re-pruning both halves), whichever raises the net worth more.
//!
//! Ties are broken by lowest edge index for growth events and lowest vertex
//! index for roots and tree ranking, so the output is deterministic.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::graph::{Graph, Support, UnionFind};

#[derive(Debug, Clone)]
pub struct PcsfInstance<'g> {
    pub graph: &'g Graph,
    pub prizes: Vec<f64>,
    pub costs: Vec<f64>,
    pub target_components: usize,
}

impl<'g> PcsfInstance<'g> {
    pub fn new(
        graph: &'g Graph,
        prizes: Vec<f64>,
        costs: Vec<f64>,
        target_components: usize,
    ) -> Result<Self> {
        if prizes.len() != graph.num_vertices() {
            return Err(Error::invalid(format!(
                "expected {} prizes, got {}",
                graph.num_vertices(),
                prizes.len()
            )));
        }
        if costs.len() != graph.num_edges() {
            return Err(Error::invalid(format!(
                "expected {} edge costs, got {}",
                graph.num_edges(),
                costs.len()
            )));
        }
        if let Some(i) = prizes.iter().position(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::invalid(format!("prize {i} is {}", prizes[i])));
        }
        if let Some(i) = costs.iter().position(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::invalid(format!("cost {i} is {}", costs[i])));
        }
        if target_components == 0 {
            return Err(Error::invalid("target component count must be positive"));
        }
        Ok(PcsfInstance {
            graph,
            prizes,
            costs,
            target_components,
        })
    }

    /// Costs equal to the graph's edge weights.
    pub fn with_edge_weights(graph: &'g Graph, prizes: Vec<f64>, g: usize) -> Result<Self> {
        let costs = graph.edges().iter().map(|e| e.w).collect();
        Self::new(graph, prizes, costs, g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub vertices: Support,
    /// Sorted edge indices into the instance graph.
    pub edges: Vec<usize>,
    pub num_trees: usize,
}

impl Forest {
    pub fn empty() -> Self {
        Forest {
            vertices: Support::empty(),
            edges: Vec::new(),
            num_trees: 0,
        }
    }
}

/// Forfeited prize plus paid edge cost.
pub fn forest_objective(instance: &PcsfInstance, forest: &Forest) -> f64 {
    let forfeited: f64 = (0..instance.graph.num_vertices())
        .filter(|&v| !forest.vertices.contains(v))
        .map(|v| instance.prizes[v])
        .sum();
    let paid: f64 = forest.edges.iter().map(|&e| instance.costs[e]).sum();
    forfeited + paid
}

#[derive(Clone, Copy, Debug)]
struct Time(f64);

impl PartialEq for Time {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for Time {}
impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Time {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

const EDGE_EVENT: u8 = 0;
const CLUSTER_EVENT: u8 = 1;

// (time, kind, index, stamp); min-heap via Reverse
type Event = Reverse<(Time, u8, usize, u32)>;

struct Cluster {
    active: bool,
    // moat grown by this lineage up to `since`
    growth: f64,
    // prize potential left at `since`
    potential: f64,
    since: f64,
    size: usize,
    // last member of the linked member list starting at the cluster id
    tail: usize,
    // boundary edge candidates; `None` until first needed, meaning the
    // neighbors of the lone starting vertex
    edges: Option<Vec<usize>>,
    version: u32,
}

impl Cluster {
    fn growth_at(&self, now: f64) -> f64 {
        if self.active {
            self.growth + (now - self.since)
        } else {
            self.growth
        }
    }

    fn potential_at(&self, now: f64) -> f64 {
        if self.active {
            self.potential - (now - self.since)
        } else {
            self.potential
        }
    }
}

struct Growth<'a> {
    inst: &'a PcsfInstance<'a>,
    clusters: Vec<Cluster>,
    cluster_of: Vec<usize>,
    next_member: Vec<usize>,
    // d(u) = base[u] + growth of u's current cluster
    base: Vec<f64>,
    edge_stamp: Vec<u32>,
    heap: BinaryHeap<Event>,
    now: f64,
    tight: Vec<usize>,
}

impl<'a> Growth<'a> {
    fn new(inst: &'a PcsfInstance<'a>) -> Self {
        let graph = inst.graph;
        let p = graph.num_vertices();
        let clusters = (0..p)
            .map(|v| Cluster {
                active: inst.prizes[v] > 0.0,
                growth: 0.0,
                potential: inst.prizes[v],
                since: 0.0,
                size: 1,
                tail: v,
                edges: None,
                version: 0,
            })
            .collect();
        let mut g = Growth {
            inst,
            clusters,
            cluster_of: (0..p).collect(),
            next_member: vec![usize::MAX; p],
            base: vec![0.0; p],
            edge_stamp: vec![0; graph.num_edges()],
            heap: BinaryHeap::with_capacity(2 * (p + graph.num_edges())),
            now: 0.0,
            tight: Vec::new(),
        };
        for v in 0..p {
            if g.clusters[v].active {
                g.push_cluster(v);
            }
        }
        for e in 0..graph.num_edges() {
            g.push_edge(e);
        }
        g
    }

    fn push_cluster(&mut self, c: usize) {
        let cl = &self.clusters[c];
        let t = cl.since + cl.potential.max(0.0);
        self.heap
            .push(Reverse((Time(t), CLUSTER_EVENT, c, cl.version)));
    }

    fn push_edge(&mut self, e: usize) {
        let edge = self.inst.graph.edge(e);
        let (cu, cv) = (self.cluster_of[edge.u], self.cluster_of[edge.v]);
        if cu == cv {
            return;
        }
        let (a, b) = (&self.clusters[cu], &self.clusters[cv]);
        let rate = u8::from(a.active) + u8::from(b.active);
        self.edge_stamp[e] = self.edge_stamp[e].wrapping_add(1);
        if rate == 0 {
            return;
        }
        let load = self.base[edge.u] + a.growth_at(self.now) + self.base[edge.v] + b.growth_at(self.now);
        let slack = (self.inst.costs[e] - load).max(0.0);
        let t = self.now + slack / f64::from(rate);
        self.heap
            .push(Reverse((Time(t), EDGE_EVENT, e, self.edge_stamp[e])));
    }

    fn take_edges(&mut self, c: usize) -> Vec<usize> {
        match self.clusters[c].edges.take() {
            Some(edges) => edges,
            None => self.inst.graph.neighbors(c).iter().map(|&(_, e)| e).collect(),
        }
    }

    // Re-predict every boundary edge of `c`, discarding internal ones.
    fn refresh_edges(&mut self, c: usize) {
        let mut edges = self.take_edges(c);
        edges.retain(|&e| {
            let edge = self.inst.graph.edge(e);
            self.cluster_of[edge.u] != self.cluster_of[edge.v]
        });
        for &e in &edges {
            self.push_edge(e);
        }
        self.clusters[c].edges = Some(edges);
    }

    fn run(mut self) -> Vec<usize> {
        while let Some(Reverse((Time(t), kind, idx, stamp))) = self.heap.pop() {
            if kind == EDGE_EVENT {
                if stamp != self.edge_stamp[idx] {
                    continue;
                }
                let edge = self.inst.graph.edge(idx);
                let (cu, cv) = (self.cluster_of[edge.u], self.cluster_of[edge.v]);
                if cu == cv {
                    continue;
                }
                self.now = self.now.max(t);
                self.tight.push(idx);
                self.merge(cu, cv);
            } else {
                let cl = &self.clusters[idx];
                if stamp != cl.version || !cl.active {
                    continue;
                }
                self.now = self.now.max(t);
                let now = self.now;
                let cl = &mut self.clusters[idx];
                cl.growth = cl.growth_at(now);
                cl.potential = 0.0;
                cl.active = false;
                cl.since = now;
                cl.version += 1;
                self.refresh_edges(idx);
            }
        }
        self.tight
    }

    fn merge(&mut self, a: usize, b: usize) {
        let now = self.now;
        // keep the larger cluster's id
        let (keep, gone) = if self.clusters[a].size >= self.clusters[b].size {
            (a, b)
        } else {
            (b, a)
        };
        let keep_growth = self.clusters[keep].growth_at(now);
        let gone_growth = self.clusters[gone].growth_at(now);
        let potential =
            self.clusters[keep].potential_at(now).max(0.0) + self.clusters[gone].potential_at(now).max(0.0);
        let was_active = self.clusters[keep].active;
        let gone_edges = self.take_edges(gone);
        let mut keep_edges = self.take_edges(keep);
        self.clusters[gone].active = false;
        self.clusters[gone].version += 1;
        let shift = gone_growth - keep_growth;
        let mut u = gone;
        while u != usize::MAX {
            self.base[u] += shift;
            self.cluster_of[u] = keep;
            u = self.next_member[u];
        }
        let (keep_tail, gone_tail, gone_size) = (self.clusters[keep].tail, self.clusters[gone].tail, self.clusters[gone].size);
        self.next_member[keep_tail] = gone;
        let cl = &mut self.clusters[keep];
        cl.tail = gone_tail;
        cl.size += gone_size;
        cl.growth = keep_growth;
        cl.potential = potential;
        cl.since = now;
        cl.active = potential > 0.0;
        cl.version += 1;
        let status_changed = cl.active != was_active;
        if status_changed {
            keep_edges.extend_from_slice(&gone_edges);
            self.clusters[keep].edges = Some(keep_edges);
            self.refresh_edges(keep);
        } else {
            // boundary edges of `keep` keep their predictions
            let mut fresh = gone_edges;
            fresh.retain(|&e| {
                let edge = self.inst.graph.edge(e);
                self.cluster_of[edge.u] != self.cluster_of[edge.v]
            });
            for &e in &fresh {
                self.push_edge(e);
            }
            keep_edges.extend_from_slice(&fresh);
            self.clusters[keep].edges = Some(keep_edges);
        }
        if self.clusters[keep].active {
            self.push_cluster(keep);
        }
    }
}

struct PrunedTree {
    value: f64,
    prize: f64,
    vertices: Vec<usize>,
    edges: Vec<usize>,
}

/// Strong pruning of one tree: picks the root with the largest pruned net
/// worth, then keeps every child subtree whose net worth covers its edge.
fn prune_tree(
    inst: &PcsfInstance,
    vertices: &[usize],
    adj: &[Vec<(usize, usize)>],
    scratch: &mut PruneScratch,
) -> PrunedTree {
    let root0 = vertices[0];
    let order = scratch.bfs(root0, adj);
    let prizes = &inst.prizes;
    let cost = |e: usize| inst.costs[e];

    // down[v]: net worth of the best pruned subtree rooted at v (below it)
    for &v in order.iter().rev() {
        let mut worth = prizes[v];
        for &(c, e) in &adj[v] {
            if scratch.alive[c] && scratch.parent[c] == Some((v, e)) {
                worth += (scratch.down[c] - cost(e)).max(0.0);
            }
        }
        scratch.down[v] = worth;
    }
    // full[v]: net worth when the tree is rerooted at v
    let mut best = (root0, scratch.down[root0]);
    scratch.up[root0] = 0.0;
    for &v in &order {
        if let Some((p, e)) = scratch.parent[v] {
            let contrib = (scratch.down[v] - cost(e)).max(0.0);
            let outside = scratch.down[p] - contrib + scratch.up[p];
            scratch.up[v] = (outside - cost(e)).max(0.0);
            let full = scratch.down[v] + scratch.up[v];
            let tol = 1e-12 * full.abs().max(best.1.abs()).max(1.0);
            if full > best.1 + tol || ((full - best.1).abs() <= tol && v < best.0) {
                best = (v, full);
            }
        }
    }

    let root = best.0;
    scratch.order = order;
    let order = scratch.bfs(root, adj);
    for &v in order.iter().rev() {
        let mut worth = prizes[v];
        for &(c, e) in &adj[v] {
            if scratch.alive[c] && scratch.parent[c] == Some((v, e)) {
                worth += (scratch.down[c] - cost(e)).max(0.0);
            }
        }
        scratch.down[v] = worth;
    }
    scratch.order = order;
    let mut kept_vertices = vec![root];
    let mut kept_edges = Vec::new();
    let mut stack = vec![root];
    let mut prize = prizes[root];
    while let Some(v) = stack.pop() {
        for &(c, e) in &adj[v] {
            if scratch.alive[c] && scratch.parent[c] == Some((v, e)) && scratch.down[c] - cost(e) >= 0.0 {
                kept_vertices.push(c);
                kept_edges.push(e);
                prize += prizes[c];
                stack.push(c);
            }
        }
    }
    kept_vertices.sort_unstable();
    PrunedTree {
        value: scratch.down[root],
        prize,
        vertices: kept_vertices,
        edges: kept_edges,
    }
}

/// Prunes a tree, then keeps pruning whatever the kept subtree left behind,
/// so every pruned-off part with positive worth becomes a candidate tree.
fn prune_all(
    inst: &PcsfInstance,
    group: Vec<usize>,
    adj: &[Vec<(usize, usize)>],
    scratch: &mut PruneScratch,
    out: &mut Vec<PrunedTree>,
) {
    let all = group.clone();
    let mut pending = vec![group];
    while let Some(piece) = pending.pop() {
        if !piece.iter().any(|&v| inst.prizes[v] > 0.0) {
            continue;
        }
        let tree = prune_tree(inst, &piece, adj, scratch);
        for &v in &tree.vertices {
            scratch.alive[v] = false;
        }
        for &v in &piece {
            if scratch.alive[v] && !scratch.seen[v] {
                let mut comp = scratch.bfs(v, adj);
                for &u in &comp {
                    scratch.seen[u] = true;
                }
                comp.sort_unstable();
                pending.push(comp);
            }
        }
        for &v in &piece {
            scratch.seen[v] = false;
        }
        if tree.prize > 0.0 {
            out.push(tree);
        }
    }
    for &v in &all {
        scratch.alive[v] = true;
    }
}

struct PruneScratch {
    alive: Vec<bool>,
    seen: Vec<bool>,
    parent: Vec<Option<(usize, usize)>>,
    down: Vec<f64>,
    up: Vec<f64>,
    order: Vec<usize>,
}

impl PruneScratch {
    fn new(p: usize) -> Self {
        PruneScratch {
            alive: vec![true; p],
            seen: vec![false; p],
            parent: vec![None; p],
            down: vec![0.0; p],
            up: vec![0.0; p],
            order: Vec::new(),
        }
    }

    fn bfs(&mut self, root: usize, adj: &[Vec<(usize, usize)>]) -> Vec<usize> {
        self.order.clear();
        self.parent[root] = None;
        self.order.push(root);
        let mut head = 0;
        while head < self.order.len() {
            let v = self.order[head];
            head += 1;
            for &(c, e) in &adj[v] {
                if self.alive[c] && self.parent[v].map(|(p, _)| p) != Some(c) {
                    self.parent[c] = Some((v, e));
                    self.order.push(c);
                }
            }
        }
        std::mem::take(&mut self.order)
    }
}

/// Solves the instance and returns at most `target_components` trees.
pub fn solve_pcsf(instance: &PcsfInstance) -> Forest {
    let graph = instance.graph;
    let p = graph.num_vertices();
    if instance.prizes.iter().all(|&x| x == 0.0) {
        return Forest::empty();
    }
    let tight = Growth::new(instance).run();

    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); p];
    let mut uf = UnionFind::new(p);
    for &e in &tight {
        let edge = graph.edge(e);
        adj[edge.u].push((edge.v, e));
        adj[edge.v].push((edge.u, e));
        uf.union(edge.u, edge.v);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    // group vertices by tree; each group is ascending so its first vertex is the smallest
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of = vec![usize::MAX; p];
    for v in 0..p {
        let r = uf.find(v);
        if group_of[r] == usize::MAX {
            group_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[group_of[r]].push(v);
    }

    let mut scratch = PruneScratch::new(p);
    let mut trees: Vec<PrunedTree> = Vec::new();
    for group in groups {
        if let [v] = group[..] {
            let prize = instance.prizes[v];
            if prize > 0.0 {
                trees.push(PrunedTree {
                    value: prize,
                    prize,
                    vertices: group,
                    edges: Vec::new(),
                });
            }
            continue;
        }
        prune_all(instance, group, &adj, &mut scratch, &mut trees);
    }
    trees.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then(a.vertices[0].cmp(&b.vertices[0]))
    });

    // Fill the tree slots greedily: each slot either adds the next tree (gain:
    // its net worth) or makes the best single cut of a kept edge (gain: the
    // change in net worth after both pieces are pruned again).
    let net = |vs: &[usize], es: &[usize]| {
        vs.iter().map(|&v| instance.prizes[v]).sum::<f64>() - es.iter().map(|&e| instance.costs[e]).sum::<f64>()
    };
    let mut vertices: Vec<usize> = Vec::new();
    let mut edges: Vec<usize> = Vec::new();
    let mut count = 0;
    let mut next = 0;
    while count < instance.target_components {
        let add = trees.get(next).map(|t| t.value);
        let current = net(&vertices, &edges);
        let mut cut: Option<(f64, Vec<usize>, Vec<usize>)> = None;
        for i in 0..edges.len() {
            let mut rest = edges.clone();
            rest.remove(i);
            let (vs, es, _) = reprune(instance, vertices.clone(), rest, &mut scratch);
            let gain = net(&vs, &es) - current;
            if cut.as_ref().map_or(true, |(best, _, _)| gain > *best) {
                cut = Some((gain, vs, es));
            }
        }
        match (add, cut) {
            (Some(v), c) if c.as_ref().map_or(true, |(gain, _, _)| v >= *gain) => {
                vertices.extend_from_slice(&trees[next].vertices);
                edges.extend_from_slice(&trees[next].edges);
                next += 1;
            }
            (_, Some((gain, vs, es))) if gain > 0.0 => {
                vertices = vs;
                edges = es;
            }
            _ => break,
        }
        count += 1;
    }
    let (vertices, edges, num_trees) = reprune(instance, vertices, edges, &mut scratch);
    Forest {
        vertices: Support::from_sorted_unchecked(vertices),
        edges,
        num_trees,
    }
}

// Re-prunes every piece of the forest after edge cuts.
fn reprune(
    inst: &PcsfInstance,
    vertices: Vec<usize>,
    edges: Vec<usize>,
    scratch: &mut PruneScratch,
) -> (Vec<usize>, Vec<usize>, usize) {
    let p = inst.graph.num_vertices();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); p];
    let mut uf = UnionFind::new(p);
    for &e in &edges {
        let edge = inst.graph.edge(e);
        adj[edge.u].push((edge.v, e));
        adj[edge.v].push((edge.u, e));
        uf.union(edge.u, edge.v);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of = vec![usize::MAX; p];
    for &v in &vertices {
        let r = uf.find(v);
        if group_of[r] == usize::MAX {
            group_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[group_of[r]].push(v);
    }
    let (mut kept_v, mut kept_e, mut count) = (Vec::new(), Vec::new(), 0);
    for group in &groups {
        let tree = prune_tree(inst, group, &adj, scratch);
        if tree.prize > 0.0 {
            kept_v.extend(tree.vertices);
            kept_e.extend(tree.edges);
            count += 1;
        }
    }
    kept_v.sort_unstable();
    kept_e.sort_unstable();
    (kept_v, kept_e, count)
}
