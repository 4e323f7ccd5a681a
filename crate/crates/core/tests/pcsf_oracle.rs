//! Goemans-Williamson forests against exhaustive enumeration.

use gsvrg::graph::{Edge, Graph};
use gsvrg::pcsf::{forest_objective, solve_pcsf, PcsfInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Best objective over every vertex set: forfeited prize plus the minimum
/// spanning forest of the induced subgraph, with the `g - c` dearest edges
/// dropped when the set has `c < g` components.
fn brute_force(graph: &Graph, prizes: &[f64], costs: &[f64], g: usize) -> f64 {
    let p = graph.num_vertices();
    let mut order: Vec<usize> = (0..graph.num_edges()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
    let mut best = f64::INFINITY;
    for mask in 0u32..1 << p {
        let inside = |v: usize| mask >> v & 1 == 1;
        let forfeited: f64 = (0..p).filter(|&v| !inside(v)).map(|v| prizes[v]).sum();
        let mut parent: Vec<usize> = (0..p).collect();
        let mut chosen = Vec::new();
        for &e in &order {
            let Edge { u, v, .. } = graph.edges()[e];
            if inside(u) && inside(v) {
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                if ru != rv {
                    parent[ru] = rv;
                    chosen.push(costs[e]);
                }
            }
        }
        let size = mask.count_ones() as usize;
        let comps = size - chosen.len();
        if comps > g {
            continue;
        }
        let drop = (g - comps).min(chosen.len());
        chosen.sort_by(f64::total_cmp);
        let paid: f64 = chosen[..chosen.len() - drop].iter().sum();
        best = best.min(forfeited + paid);
    }
    best
}

fn random_connected_graph(rng: &mut ChaCha8Rng, p: usize) -> Graph {
    let mut edges = Vec::new();
    for v in 1..p {
        let u = rng.random_range(0..v);
        edges.push(Edge { u, v, w: 1.0 });
    }
    for _ in 0..p {
        let u = rng.random_range(0..p);
        let v = rng.random_range(0..p);
        if u != v && !edges.iter().any(|e| (e.u, e.v) == (u.min(v), u.max(v)) || (e.u, e.v) == (u.max(v), u.min(v))) {
            edges.push(Edge { u: u.min(v), v: u.max(v), w: 1.0 });
        }
    }
    Graph::new(p, edges).unwrap()
}

#[test]
fn within_twice_the_optimum_on_small_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let p = rng.random_range(3..=9);
        let graph = random_connected_graph(&mut rng, p);
        let prizes: Vec<f64> = (0..p)
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..3.0) })
            .collect();
        let costs: Vec<f64> = (0..graph.num_edges()).map(|_| rng.random_range(0.1..2.0)).collect();
        let g = rng.random_range(1..=2);
        let inst = PcsfInstance::new(&graph, prizes.clone(), costs.clone(), g).unwrap();
        let forest = solve_pcsf(&inst);
        assert!(forest.num_trees <= g, "trial {trial}");
        assert_eq!(forest.edges.len() + forest.num_trees, forest.vertices.len(), "trial {trial}: not a forest");
        let got = forest_objective(&inst, &forest);
        let opt = brute_force(&graph, &prizes, &costs, g);
        assert!(got >= opt - 1e-9, "trial {trial}: below optimum {got} < {opt}");
        if got > 2.0 * opt + 1e-9 {
            eprintln!("edges {:?}\nprizes {:?}\ncosts {:?}\ng {g}\nforest {:?}", graph.edges(), prizes, costs, forest);
        }
        assert!(got <= 2.0 * opt + 1e-9, "trial {trial}: {got} > 2 * {opt}");
        if opt > 0.0 {
            worst = worst.max(got / opt);
        }
    }
    println!("worst ratio {worst:.4}");
}
