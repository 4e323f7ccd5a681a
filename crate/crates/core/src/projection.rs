//! Projections onto the weighted graph model.
//!
//! Head and tail projections both run the PCSF solver with prizes `x_i^2`
//! (normalized by the largest one) and edge costs `lambda * w_e / w_max`,
//! bisecting `lambda` geometrically until the forest size lands in
//! `[s, ceil(nu * s)]`. The tail projection then trims the forest back to at
//! most `s` vertices by repeatedly dropping the smallest-magnitude leaf.


use crate::error::{Error, Result};
use crate::graph::{count_components_masked, spanning_forest_weight, Graph, Support, WgmModel};
use crate::pcsf::{solve_pcsf, Forest, PcsfInstance};

/// Default sparsity slack of the head projection.
pub const HEAD_SLACK: f64 = 2.5;
/// Default sparsity slack of the tail projection before trimming.
pub const TAIL_SLACK: f64 = 1.5;
pub const MAX_SEARCH_ITERATIONS: usize = 30;
/// The search also stops once the multiplier bracket is this tight (relative).
pub const SEARCH_TOLERANCE: f64 = 1e-4;
/// Largest graph the brute-force projection accepts.
pub const EXACT_MAX_VERTICES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOutcome {
    pub support: Support,
    /// The input restricted to `support`.
    pub vector: Vec<f64>,
    pub iterations_used: usize,
    pub achieved_sparsity: usize,
}

impl ProjectionOutcome {
    fn restrict(x: &[f64], support: Support, iterations_used: usize) -> Self {
        let mut vector = vec![0.0; x.len()];
        for &i in support.indices() {
            vector[i] = x[i];
        }
        ProjectionOutcome {
            achieved_sparsity: support.len(),
            support,
            vector,
            iterations_used,
        }
    }
}

fn check_input(x: &[f64], graph: &Graph) -> Result<()> {
    if x.len() != graph.num_vertices() {
        return Err(Error::invalid(format!(
            "vector has length {}, graph has {} vertices",
            x.len(),
            graph.num_vertices()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("vector has non-finite entries"));
    }
    Ok(())
}

struct SearchResult {
    forest: Forest,
    iterations: usize,
}

/// Bisects the cost multiplier until the PCSF forest size is in
/// `[min_size, max_size]`. When the size jumps over that window, or after
/// [`MAX_SEARCH_ITERATIONS`] probes, returns the feasible forest
/// (size <= `max_size`) that captured the most prize.
fn search_forest(x: &[f64], graph: &Graph, g: usize, min_size: usize, max_size: usize) -> SearchResult {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return SearchResult {
            forest: Forest::empty(),
            iterations: 0,
        };
    }
    let prizes: Vec<f64> = x.iter().map(|v| (v / scale).powi(2)).collect();
    let total: f64 = prizes.iter().sum();
    let w_max = graph.max_weight();
    let unit_costs: Vec<f64> = graph
        .edges()
        .iter()
        .map(|e| if w_max > 0.0 { e.w / w_max } else { 0.0 })
        .collect();

    let solve = |lambda: f64| {
        let costs = unit_costs.iter().map(|c| c * lambda).collect();
        let inst = PcsfInstance {
            graph,
            prizes: prizes.clone(),
            costs,
            target_components: g,
        };
        solve_pcsf(&inst)
    };
    let captured = |f: &Forest| f.vertices.indices().iter().map(|&v| prizes[v]).sum::<f64>();

    let mut lo = total * 1e-9;
    let mut hi = total;
    let mut best: Option<(f64, Forest)> = None;
    let mut iterations = MAX_SEARCH_ITERATIONS;
    for it in 1..=MAX_SEARCH_ITERATIONS {
        let lambda = (lo * hi).sqrt();
        let forest = solve(lambda);
        let size = forest.vertices.len();
        if size > max_size {
            lo = lambda;
            if hi <= lo * (1.0 + SEARCH_TOLERANCE) {
                iterations = it;
                break;
            }
            continue;
        }
        let mass = captured(&forest);
        let done = size >= min_size || mass >= total * (1.0 - 1e-12);
        if best.as_ref().map_or(true, |(m, _)| mass > *m) {
            best = Some((mass, forest));
        }
        if done {
            return SearchResult {
                forest: best.unwrap().1,
                iterations: it,
            };
        }
        hi = lambda;
        if hi <= lo * (1.0 + SEARCH_TOLERANCE) {
            iterations = it;
            break;
        }
    }
    let forest = match best {
        Some((_, f)) => f,
        // every probe overshot; a multiplier this large only keeps singletons
        None => solve(2.0 * total + 1.0),
    };
    SearchResult { forest, iterations }
}

/// Approximate head projection: a support of at most `ceil(nu * s)`
/// vertices in at most `g` components capturing a large share of `||x||`.
pub fn head_project(x: &[f64], graph: &Graph, model: &WgmModel) -> Result<ProjectionOutcome> {
    check_input(x, graph)?;
    model.check_against(graph)?;
    let res = search_forest(x, graph, model.g, model.s, model.max_sparsity());
    Ok(ProjectionOutcome::restrict(x, res.forest.vertices, res.iterations))
}

/// Approximate tail projection: a support of at most `s` vertices in at most
/// `g` components whose restriction stays close to `x`.
pub fn tail_project(x: &[f64], graph: &Graph, model: &WgmModel) -> Result<ProjectionOutcome> {
    check_input(x, graph)?;
    model.check_against(graph)?;
    let res = search_forest(x, graph, model.g, model.s, model.max_sparsity());
    let support = trim_leaves(x, graph, &res.forest, model);
    Ok(ProjectionOutcome::restrict(x, support, res.iterations))
}

/// Drops smallest-magnitude leaves (ties to the lower index) until at most
/// `model.s` vertices remain and the induced forest weight fits
/// `model.cost_budget`. A leaf here is any vertex whose removal does not
/// split its component of the induced subgraph, i.e. a leaf of some
/// spanning tree of it.
fn trim_leaves(x: &[f64], graph: &Graph, forest: &Forest, model: &WgmModel) -> Support {
    let p = graph.num_vertices();
    let mut keep = forest.vertices.mask(p);
    let mut order = forest.vertices.indices().to_vec();
    order.sort_by(|&a, &b| OrdF64(x[a].abs()).cmp(&OrdF64(x[b].abs())).then(a.cmp(&b)));
    let mut comps = count_components_masked(graph, &order, &keep);
    let drop_leaf = |keep: &mut Vec<bool>, order: &mut Vec<usize>, comps: &mut usize, isolated_ok: bool| -> bool {
        for i in 0..order.len() {
            let v = order[i];
            let isolated = graph.neighbors(v).iter().all(|&(u, _)| !keep[u]);
            if isolated && !isolated_ok {
                continue;
            }
            keep[v] = false;
            let rest: Vec<usize> = order.iter().copied().filter(|&u| u != v).collect();
            let after = count_components_masked(graph, &rest, keep);
            if after <= *comps {
                *comps = after;
                *order = rest;
                return true;
            }
            keep[v] = true;
        }
        false
    };
    while order.len() > model.s {
        if !drop_leaf(&mut keep, &mut order, &mut comps, true) {
            break;
        }
    }
    loop {
        let support = Support::from_mask(&keep);
        let weight = spanning_forest_weight(graph, &support).unwrap_or(0.0);
        // singletons carry no weight, so only leaves with a neighbor help
        if weight <= model.cost_budget + 1e-12 || !drop_leaf(&mut keep, &mut order, &mut comps, false) {
            return support;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);
impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Brute-force projection: the support in the model maximizing `||x_S||`,
/// found by enumerating every vertex subset. Only for `p <= 16`.
pub fn exact_project(x: &[f64], graph: &Graph, model: &WgmModel) -> Result<ProjectionOutcome> {
    check_input(x, graph)?;
    let p = graph.num_vertices();
    if p > EXACT_MAX_VERTICES {
        return Err(Error::OracleScope(format!(
            "exact projection enumerates subsets; {p} vertices exceeds {EXACT_MAX_VERTICES}"
        )));
    }
    let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    let mut best_mask = 0u32;
    let mut best_mass = 0.0;
    let mut mask_buf = vec![false; p];
    let mut members = Vec::with_capacity(p);
    for mask in 1u32..(1u32 << p) {
        if mask.count_ones() as usize > model.s {
            continue;
        }
        let mass: f64 = (0..p).filter(|&i| mask >> i & 1 == 1).map(|i| sq[i]).sum();
        if mass <= best_mass {
            continue;
        }
        members.clear();
        for i in 0..p {
            mask_buf[i] = mask >> i & 1 == 1;
            if mask_buf[i] {
                members.push(i);
            }
        }
        if count_components_masked(graph, &members, &mask_buf) > model.g {
            continue;
        }
        let support = Support::from_sorted_unchecked(members.clone());
        if spanning_forest_weight(graph, &support)? > model.cost_budget + 1e-12 {
            continue;
        }
        best_mask = mask;
        best_mass = mass;
    }
    let support = Support::from_sorted_unchecked((0..p).filter(|&i| best_mask >> i & 1 == 1).collect());
    Ok(ProjectionOutcome::restrict(x, support, 0))
}

/// Keeps the `s` largest-magnitude entries, ties to the lower index.
pub fn top_k(x: &[f64], s: usize) -> ProjectionOutcome {
    let s = s.min(x.len());
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = order[..s].to_vec();
    chosen.sort_unstable();
    ProjectionOutcome::restrict(x, Support::from_sorted_unchecked(chosen), 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{connected_components, grid_graph, is_in_model};
    use crate::objective::norm;

    #[test]
    fn top_k_examples() {
        let out = top_k(&[3.0, -5.0, 1.0], 2);
        assert_eq!(out.support.indices(), &[0, 1]);
        assert_eq!(out.vector, vec![3.0, -5.0, 0.0]);
        assert_eq!(top_k(&[3.0, -5.0, 1.0], 0).vector, vec![0.0; 3]);
        assert_eq!(top_k(&[3.0, -5.0, 1.0], 3).vector, vec![3.0, -5.0, 1.0]);
        // ties go to the lower index
        assert_eq!(top_k(&[1.0, -1.0, 1.0], 2).support.indices(), &[0, 1]);
    }

    #[test]
    fn zero_vector_projects_to_empty() {
        let g = grid_graph(4, 4).unwrap();
        let m = WgmModel::unit(3, 1).unwrap().with_slack(HEAD_SLACK);
        let z = vec![0.0; 16];
        assert!(head_project(&z, &g, &m).unwrap().support.is_empty());
        let t = tail_project(&z, &g, &m).unwrap();
        assert!(t.support.is_empty());
        assert_eq!(t.vector, z);
    }

    #[test]
    fn in_model_vector_is_kept() {
        let g = grid_graph(5, 5).unwrap();
        let mut x = vec![0.0; 25];
        for (i, v) in [(6, 1.5), (7, -0.3), (12, 2.0), (17, 0.7)] {
            x[i] = v;
        }
        let m = WgmModel::unit(4, 1).unwrap();
        let head = head_project(&x, &g, &m.with_slack(HEAD_SLACK)).unwrap();
        assert!(head.support.is_superset_of(&Support::of_vector(&x)));
        assert!((norm(&head.vector) - norm(&x)).abs() < 1e-15);
        let tail = tail_project(&x, &g, &m.with_slack(TAIL_SLACK)).unwrap();
        assert_eq!(tail.vector, x);
    }

    #[test]
    fn outputs_respect_component_and_size_limits() {
        let g = grid_graph(8, 8).unwrap();
        let x: Vec<f64> = (0..64).map(|i| ((i * 37 % 17) as f64 - 8.0) / 3.0).collect();
        for gc in 1..=3 {
            let m = WgmModel::unit(6, gc).unwrap();
            let head = head_project(&x, &g, &m.with_slack(HEAD_SLACK)).unwrap();
            assert!(head.achieved_sparsity <= 15);
            assert!(connected_components(&g, &head.support).unwrap() <= gc);
            let tail = tail_project(&x, &g, &m.with_slack(TAIL_SLACK)).unwrap();
            assert!(tail.achieved_sparsity <= 6);
            assert!(is_in_model(&g, &tail.support, &m).unwrap());
        }
    }

    #[test]
    fn exact_projection_examples() {
        let g = grid_graph(3, 3).unwrap();
        let mut x = vec![0.1; 9];
        x[4] = 5.0;
        let m1 = WgmModel::unit(1, 1).unwrap();
        assert_eq!(exact_project(&x, &g, &m1).unwrap().support.indices(), &[4]);
        let mut pair = vec![0.0; 9];
        pair[3] = 1.0;
        pair[4] = 1.0;
        let m2 = WgmModel::unit(2, 1).unwrap();
        assert_eq!(exact_project(&pair, &g, &m2).unwrap().support.indices(), &[3, 4]);
        let big = grid_graph(5, 5).unwrap();
        assert!(matches!(
            exact_project(&vec![1.0; 25], &big, &m2),
            Err(Error::OracleScope(_))
        ));
    }

    #[test]
    fn trimming_keeps_trees_connected() {
        let g = grid_graph(1, 6).unwrap();
        let forest = Forest {
            vertices: Support::new(vec![0, 1, 2, 3, 4, 5], 6).unwrap(),
            edges: vec![0, 1, 2, 3, 4],
            num_trees: 1,
        };
        let x = [0.1, 5.0, 0.05, 4.0, 3.0, 0.2];
        let kept = trim_leaves(&x, &g, &forest, &WgmModel::unit(3, 1).unwrap());
        // interior 0.05 cannot go before the leaves around it
        assert_eq!(kept.indices(), &[1, 2, 3]);
        assert_eq!(connected_components(&g, &kept).unwrap(), 1);
        // four vertices on one tree weigh 3 > s - g = 2
        let two = WgmModel::unit(4, 2).unwrap();
        let kept = trim_leaves(&x, &g, &forest, &two);
        assert_eq!(kept.indices(), &[1, 2, 3]);
        assert!(is_in_model(&g, &kept, &two).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = grid_graph(3, 3).unwrap();
        let m = WgmModel::unit(2, 1).unwrap();
        assert!(head_project(&[1.0; 4], &g, &m).is_err());
        assert!(tail_project(&[1.0; 4], &g, &m).is_err());
    }
}
