//! Fixture-driven checks of the Good-Bad-Grid machinery, plus structural
//! theorems (T-Good implies A-Good, propagation uniqueness, exactness on a
//! fully T-Good instance).

use std::collections::HashSet;

use geograph::eval::overlap;
use geograph::gbg::{
    classify_from_count, count_common_neighbors, default_grid, is_a_good, is_t_good,
    pairwise_classify, pairwise_threshold, run_gbg, run_gbg_configured,
};
use geograph::geom::{cell_of, CellIndex, GridSpec, Metric};
use geograph::model::{
    sample_coupled, sample_coupled_with_planted, ConnectionFunction, MarkedPointSet, ModelParams,
    Planted, Regime, SpatialGraph,
};
use geograph::rng::sub_seed;

fn hard_params(lambda: f64, n: f64) -> ModelParams {
    ModelParams::new(
        lambda,
        2,
        n,
        ConnectionFunction::indicator(1.0, 1.0),
        ConnectionFunction::indicator(0.0, 1.0),
        Regime::SparseEuclidean,
    )
    .unwrap()
}

fn build_graph(points: Vec<(Vec<f64>, i8)>, edges: &[(usize, usize)]) -> SpatialGraph {
    let d = points[0].0.len();
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for (loc, label) in &points {
        coords.extend_from_slice(loc);
        labels.push(*label);
    }
    let mut adjacency = vec![Vec::new(); points.len()];
    for &(i, j) in edges {
        adjacency[i].push(j as u32);
        adjacency[j].push(i as u32);
    }
    for list in adjacency.iter_mut() {
        list.sort_unstable();
    }
    SpatialGraph {
        points: MarkedPointSet::new(d, coords, labels).unwrap(),
        metric: Metric::Euclidean,
        adjacency,
        info_adjacency: None,
    }
}

#[test]
fn common_neighbor_fixtures() {
    // path i - k - j with k within R of both
    let g = build_graph(
        vec![(vec![-0.4, 0.0], 1), (vec![0.4, 0.0], 1), (vec![0.0, 0.3], 1)],
        &[(0, 2), (1, 2)],
    );
    assert_eq!(count_common_neighbors(&g, 0, 1, 1.0).unwrap(), 1);

    // edgeless graph
    let g0 = build_graph(vec![(vec![0.0, 0.0], 1), (vec![0.5, 0.0], 1)], &[]);
    assert_eq!(count_common_neighbors(&g0, 0, 1, 1.0).unwrap(), 0);

    // common neighbor at distance > R from i is excluded by the filter
    let far = build_graph(
        vec![
            (vec![0.0, 0.0], 1),
            (vec![1.3, 0.0], 1),
            (vec![1.2, 0.5], 1), // dist to node 0 = 1.3, to node 1 = 0.51
        ],
        &[(0, 2), (1, 2)],
    );
    assert_eq!(count_common_neighbors(&far, 0, 1, 2.0).unwrap(), 1);
    assert_eq!(count_common_neighbors(&far, 0, 1, 1.25).unwrap(), 0);

    assert!(count_common_neighbors(&g0, 0, 9, 1.0).is_err());
    assert!(count_common_neighbors(&g0, 1, 1, 1.0).is_err());
}

#[test]
fn classifier_boundary_is_strict() {
    assert_eq!(classify_from_count(6, 5.0), 1);
    // exactly at the threshold goes to -1 (strict inequality)
    assert_eq!(classify_from_count(5, 5.0), -1);
    assert_eq!(classify_from_count(0, 0.0), -1);
}

/// Empirical misclassification of the pairwise classifier decays in lambda
/// (two-point version of the full sweep in the acceptance suite).
#[test]
fn pairwise_error_decays_with_intensity() {
    let dist = 0.5;
    let trials = 1200;
    let mut rates = Vec::new();
    for (k, lambda) in [2.0, 8.0].into_iter().enumerate() {
        let params = hard_params(lambda, 16.0);
        let planted = vec![
            Planted::labeled(vec![-dist / 2.0, 0.0], 1),
            Planted::labeled(vec![dist / 2.0, 0.0], 1),
        ];
        let grid = default_grid(&params).unwrap();
        let mut errors = 0usize;
        for t in 0..trials {
            let (graph, ids) = sample_coupled_with_planted(
                &params,
                sub_seed(71, "decay", &[k as u64, t as u64]),
                &planted,
            );
            if pairwise_classify(&graph, ids[0], ids[1], &params, &grid).unwrap() != 1 {
                errors += 1;
            }
        }
        rates.push(errors as f64 / trials as f64);
    }
    assert!(rates[1] < rates[0] - 0.1, "error rate did not decay: {rates:?}");
}

/// Balanced fixture: two tight same-label clusters in one cell. All pairwise
/// signs derive from the genuine assignment, so the cell is A-Good; with the
/// true labels it is also T-Good.
fn balanced_fixture() -> (SpatialGraph, ModelParams) {
    let params = hard_params(4.0, 9.0);
    let mut points = Vec::new();
    for k in 0..6 {
        let jit = k as f64 * 0.008;
        points.push((vec![-0.05 - jit, 0.01 * k as f64], 1i8));
    }
    for k in 0..6 {
        let jit = k as f64 * 0.008;
        points.push((vec![0.05 + jit, 0.01 * k as f64], -1i8));
    }
    let mut edges = Vec::new();
    for i in 0..6 {
        for j in (i + 1)..6 {
            edges.push((i, j));
            edges.push((i + 6, j + 6));
        }
    }
    (build_graph(points, &edges), params)
}

#[test]
fn is_a_good_fixtures() {
    let (graph, params) = balanced_fixture();
    let grid = default_grid(&params).unwrap();
    let home = CellIndex(vec![0, 0]);
    assert!(is_a_good(&graph, &grid, &home, &params, 0.1).unwrap());

    // empty cell fails the count condition
    let empty = CellIndex(vec![40, 40]);
    assert!(!is_a_good(&graph, &grid, &empty, &params, 0.1).unwrap());
}

/// Inconsistent fixture: three nearby nodes whose pairwise signs form a
/// negative triangle (+, +, -). The clouds inducing the counts live in
/// faraway cells, so the thickening of the home cell contains exactly the
/// three nodes.
#[test]
fn negative_triangle_makes_cell_a_bad() {
    let params = hard_params(4.0, 9.0);
    let grid = default_grid(&params).unwrap();
    let mut points = vec![
        (vec![-0.06, 0.0], 1i8), // x = node 0
        (vec![0.06, 0.0], 1),    // y = node 1
        (vec![0.02, 0.15], 1),   // z = node 2
    ];
    let mut edges = Vec::new();
    // cloud adjacent to x and y only
    for k in 0..6 {
        let idx = points.len();
        points.push((vec![-0.02 + 0.008 * k as f64, -0.93], 1));
        edges.push((0, idx));
        edges.push((1, idx));
    }
    // cloud adjacent to x and z only
    for k in 0..6 {
        let idx = points.len();
        points.push((vec![-0.95, 0.05 + 0.008 * k as f64], 1));
        edges.push((0, idx));
        edges.push((2, idx));
    }
    let graph = build_graph(points, &edges);
    let home = cell_of(&grid, &[0.0, 0.0]);

    // verify the intended signs
    assert_eq!(pairwise_classify(&graph, 0, 1, &params, &grid).unwrap(), 1);
    assert_eq!(pairwise_classify(&graph, 0, 2, &params, &grid).unwrap(), 1);
    assert_eq!(pairwise_classify(&graph, 1, 2, &params, &grid).unwrap(), -1);

    assert!(!is_a_good(&graph, &grid, &home, &params, 0.1).unwrap());
}

#[test]
fn is_t_good_fixtures() {
    let (graph, params) = balanced_fixture();
    let grid = default_grid(&params).unwrap();
    let home = CellIndex(vec![0, 0]);
    let truth: Vec<i8> = graph.points.labels().to_vec();
    assert!(is_t_good(&graph, &truth, &grid, &home, &params, 0.1).unwrap());

    // one node's truth flipped: some pairwise output now disagrees
    let mut wrong = truth.clone();
    wrong[0] = -wrong[0];
    assert!(!is_t_good(&graph, &wrong, &grid, &home, &params, 0.1).unwrap());
}

/// "T-Good implies A-Good" checked on sampled instances (zero violations
/// across every occupied cell), and every connected T-Good component is
/// labeled consistently with the ground truth up to one global flip.
#[test]
fn t_good_implies_a_good_on_samples() {
    let params = ModelParams::new(
        8.0,
        2,
        36.0,
        ConnectionFunction::indicator(0.9, 1.0),
        ConnectionFunction::indicator(0.2, 1.0),
        Regime::SparseEuclidean,
    )
    .unwrap();
    let grid = default_grid(&params).unwrap();
    let mut t_components_checked = 0usize;
    for t in 0..5u64 {
        let graph = sample_coupled(&params, sub_seed(73, "tga", &[t]));
        let truth = graph.points.labels().to_vec();
        let result = run_gbg_configured(&graph, &params, 0.1, &grid, Some(&truth), 0).unwrap();
        for verdict in &result.cell_verdicts {
            if verdict.t_good == Some(true) {
                assert!(verdict.a_good, "T-Good cell {:?} not A-Good", verdict.cell);
            }
        }

        // connected components of T-Good cells, sup-norm adjacency
        let t_cells: Vec<usize> = result
            .cell_verdicts
            .iter()
            .enumerate()
            .filter(|(_, v)| v.t_good == Some(true))
            .map(|(k, _)| k)
            .collect();
        let mut assigned = vec![false; result.cell_verdicts.len()];
        for &start in &t_cells {
            if assigned[start] {
                continue;
            }
            let mut stack = vec![start];
            assigned[start] = true;
            let mut nodes: Vec<usize> = Vec::new();
            while let Some(k) = stack.pop() {
                nodes.extend(result.cell_verdicts[k].local_nodes.iter().map(|&n| n as usize));
                for &other in &t_cells {
                    if !assigned[other]
                        && result.cell_verdicts[k]
                            .cell
                            .0
                            .iter()
                            .zip(&result.cell_verdicts[other].cell.0)
                            .all(|(a, b)| (a - b).abs() <= 1)
                    {
                        assigned[other] = true;
                        stack.push(other);
                    }
                }
            }
            // one flip covers the whole component
            let flips: HashSet<i8> =
                nodes.iter().map(|&i| result.estimates[i] * truth[i]).collect();
            assert_eq!(flips.len(), 1, "T-Good component mixes flips");
            t_components_checked += 1;
        }
    }
    assert!(t_components_checked > 20, "too few T-Good components sampled");
}

#[test]
fn empty_graph_gives_overlap_one() {
    let params = hard_params(1.0, 4.0);
    let graph = build_graph_empty();
    let result = run_gbg(&graph, &params, 0.1).unwrap();
    assert!(result.estimates.is_empty());
    assert_eq!(overlap(&result.estimates, graph.points.labels()).unwrap(), 1.0);
}

fn build_graph_empty() -> SpatialGraph {
    SpatialGraph {
        points: MarkedPointSet::new(2, Vec::new(), Vec::new()).unwrap(),
        metric: Metric::Euclidean,
        adjacency: Vec::new(),
        info_adjacency: None,
    }
}

/// Deterministic lattice instance for the hard-indicator model (a=1, b=0):
/// the graph is a deterministic function of positions and labels, every
/// occupied cell is T-Good (verified), they form one component, and the
/// output partition matches the truth exactly.
#[test]
fn fully_t_good_instance_recovers_exactly() {
    let params = hard_params(20.0, 16.0);
    let grid = default_grid(&params).unwrap();
    let s = grid.cell_side();
    let offsets = [(-0.3, -0.3), (0.35, -0.1), (0.0, 0.3)];
    let mut points = Vec::new();
    for cx in -3i64..3 {
        for cy in -3i64..3 {
            for (k, (ox, oy)) in offsets.iter().enumerate() {
                let label = if (cx + cy + k as i64).rem_euclid(2) == 0 { 1i8 } else { -1 };
                points.push((vec![cx as f64 * s + ox * s, cy as f64 * s + oy * s], label));
            }
        }
    }
    // hard-indicator edges: same label and distance <= 1
    let mut edges = Vec::new();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let same = points[i].1 == points[j].1;
            let dx = points[i].0[0] - points[j].0[0];
            let dy = points[i].0[1] - points[j].0[1];
            if same && (dx * dx + dy * dy).sqrt() <= 1.0 {
                edges.push((i, j));
            }
        }
    }
    let graph = build_graph(points, &edges);
    let truth = graph.points.labels().to_vec();
    let result = run_gbg_configured(&graph, &params, 0.1, &grid, Some(&truth), 0).unwrap();

    // every occupied cell is T-Good and there is one A-Good component
    for verdict in &result.cell_verdicts {
        assert_eq!(verdict.t_good, Some(true), "cell {:?} not T-Good", verdict.cell);
    }
    assert_eq!(result.stats.components, 1);
    assert_eq!(result.stats.a_good_cells, result.stats.occupied_cells);
    assert_eq!(overlap(&result.estimates, &truth).unwrap(), 1.0);
}

/// Propagation uniqueness: rerunning with shuffled traversal orders gives
/// the same partition up to a global flip on each component.
#[test]
fn traversal_order_invariance() {
    let params = ModelParams::new(
        30.0,
        2,
        16.0,
        ConnectionFunction::indicator(0.9, 1.0),
        ConnectionFunction::indicator(0.2, 1.0),
        Regime::SparseEuclidean,
    )
    .unwrap();
    let grid = default_grid(&params).unwrap();
    let graph = sample_coupled(&params, 79);
    let base = run_gbg_configured(&graph, &params, 0.1, &grid, None, 0).unwrap();
    for seed in 1..=3u64 {
        let other = run_gbg_configured(&graph, &params, 0.1, &grid, None, seed).unwrap();
        assert_eq!(base.component_of, other.component_of);
        let comps: HashSet<u32> = base.component_of.iter().flatten().copied().collect();
        for comp in comps {
            let members: Vec<usize> =
                (0..graph.n_nodes()).filter(|&i| base.component_of[i] == Some(comp)).collect();
            let flips: HashSet<i8> =
                members.iter().map(|&i| base.estimates[i] * other.estimates[i]).collect();
            assert_eq!(flips.len(), 1, "component {comp} not flip-equivalent");
        }
    }
}

/// Three-dimensional smoke check: sampling, coupling and the grid pipeline
/// all work off the d=2 happy path.
#[test]
fn three_dimensional_pipeline() {
    let params = ModelParams::new(
        6.0,
        3,
        216.0,
        ConnectionFunction::indicator(1.0, 1.0),
        ConnectionFunction::indicator(0.3, 1.0),
        Regime::SparseEuclidean,
    )
    .unwrap();
    let graph = sample_coupled(&params, 131);
    assert!(graph.n_nodes() > 800, "expected around lambda*n points");
    let info = graph.info_adjacency.as_ref().unwrap();
    for i in 0..graph.n_nodes() {
        for &j in &info[i] {
            let same = graph.points.label(i) == graph.points.label(j as usize);
            assert_eq!(graph.has_edge(i, j as usize), same);
        }
    }
    let result = run_gbg(&graph, &params, 0.1).unwrap();
    assert_eq!(result.estimates.len(), graph.n_nodes());
    assert!(result.stats.occupied_cells > 0);
    assert!(result.estimates.iter().all(|&e| e == 1 || e == -1));
}

#[test]
fn grid_spec_for_log_regime() {
    let n = 2000.0f64;
    let radius = n.ln().sqrt();
    let params = ModelParams::new(
        1.0,
        2,
        n,
        ConnectionFunction::indicator(0.9, radius),
        ConnectionFunction::indicator(0.1, radius),
        Regime::LogTorus,
    )
    .unwrap();
    let grid = default_grid(&params).unwrap();
    assert!((grid.r - radius).abs() < 1e-12);
    let alt = GridSpec::new(radius / (2.0 * 2.0), 2).unwrap();
    assert!(alt.cell_side() < grid.cell_side());
}

#[test]
fn pairwise_threshold_is_mean_midpoint() {
    let params = hard_params(8.0, 16.0);
    let thr = pairwise_threshold(&params, 1.0, 0.5);
    let (mu_s, mu_d) = geograph::moments::common_neighbor_means(&params, 0.5);
    assert!((thr - 0.5 * (mu_s + mu_d)).abs() < 1e-12);
}
