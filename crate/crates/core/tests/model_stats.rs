//! Distributional and structural checks of the samplers.

use geograph::eval::overlap;
use geograph::geom::Metric;
use geograph::model::{
    read_graph, sample_coupled, sample_null, sample_points, thin, write_graph, ConnectionFunction,
    ModelParams, Regime,
};
use geograph::rng::sub_seed;

fn sparse_params(lambda: f64, n: f64, a: f64, r_in: f64, b: f64, r_out: f64) -> ModelParams {
    ModelParams::new(
        lambda,
        2,
        n,
        ConnectionFunction::indicator(a, r_in),
        ConnectionFunction::indicator(b, r_out),
        Regime::SparseEuclidean,
    )
    .unwrap()
}

#[test]
fn zero_intensity_gives_zero_points() {
    let params = sparse_params(0.0, 100.0, 1.0, 1.0, 0.0, 1.0);
    assert_eq!(sample_points(&params, 7).count(), 0);
}

#[test]
fn poisson_count_mean_matches() {
    let params = sparse_params(2.0, 100.0, 1.0, 1.0, 0.0, 1.0);
    let trials = 500;
    let mut total = 0usize;
    for t in 0..trials {
        total += sample_points(&params, sub_seed(11, "count", &[t])).count();
    }
    let mean = total as f64 / trials as f64;
    // Var(count) = 200, so SE of the mean over 500 trials is sqrt(200/500)
    let se = (200.0f64 / trials as f64).sqrt();
    assert!(
        (mean - 200.0).abs() <= 3.0 * se,
        "sample mean {mean} deviates from 200 by more than {}",
        3.0 * se
    );
}

#[test]
fn half_window_counts_are_uncorrelated() {
    let params = sparse_params(2.0, 100.0, 1.0, 1.0, 0.0, 1.0);
    let trials = 400;
    let mut left = Vec::with_capacity(trials);
    let mut right = Vec::with_capacity(trials);
    for t in 0..trials {
        let pts = sample_points(&params, sub_seed(13, "halves", &[t as u64]));
        let mut l = 0.0;
        let mut r = 0.0;
        for i in 0..pts.count() {
            if pts.point(i)[0] < 0.0 {
                l += 1.0;
            } else {
                r += 1.0;
            }
        }
        left.push(l);
        right.push(r);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ml, mr) = (mean(&left), mean(&right));
    let mut cov = 0.0;
    let mut var_l = 0.0;
    let mut var_r = 0.0;
    for k in 0..trials {
        cov += (left[k] - ml) * (right[k] - mr);
        var_l += (left[k] - ml).powi(2);
        var_r += (right[k] - mr).powi(2);
    }
    let corr = cov / (var_l * var_r).sqrt();
    assert!(corr.abs() <= 3.0 / (trials as f64).sqrt(), "half-window correlation {corr} too large");
}

/// Structural coupling facts, checked exhaustively on sampled instances:
/// an I-edge with a G-edge forces equal labels, an I-edge without one forces
/// opposite labels.
#[test]
fn coupling_rules_have_zero_violations() {
    for (k, (a, b)) in [(1.0, 0.0), (0.9, 0.4), (0.7, 0.7)].into_iter().enumerate() {
        let params = sparse_params(3.0, 225.0, a, 1.0, b, 1.0);
        let graph = sample_coupled(&params, sub_seed(17, "coupling", &[k as u64]));
        let info = graph.info_adjacency.as_ref().unwrap();
        for i in 0..graph.n_nodes() {
            for &j in &info[i] {
                let j = j as usize;
                let same = graph.points.label(i) == graph.points.label(j);
                if graph.has_edge(i, j) {
                    assert!(same, "I-edge with G-edge but opposite labels");
                } else {
                    assert!(!same, "I-edge without G-edge but equal labels");
                }
            }
        }
    }
}

#[test]
fn equal_connection_functions_empty_information_graph() {
    let params = sparse_params(4.0, 100.0, 0.6, 1.0, 0.6, 1.0);
    let graph = sample_coupled(&params, 23);
    let info = graph.info_adjacency.as_ref().unwrap();
    assert!(info.iter().all(Vec::is_empty));
}

/// On every I-component, propagating a seed label through the coupled rules
/// reconstructs the ground truth or its complement exactly.
#[test]
fn two_labelings_per_information_component() {
    let params = sparse_params(1.2, 400.0, 0.9, 1.0, 0.45, 1.0);
    let mut components_checked = 0usize;
    for t in 0..20u64 {
        let graph = sample_coupled(&params, sub_seed(29, "twolab", &[t]));
        let info = graph.info_adjacency.as_ref().unwrap();
        let n = graph.n_nodes();
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] || info[start].is_empty() {
                continue;
            }
            let mut rec: Vec<Option<i8>> = vec![None; n];
            rec[start] = Some(graph.points.label(start));
            let mut queue = std::collections::VecDeque::from([start]);
            let mut members = vec![start];
            seen[start] = true;
            while let Some(u) = queue.pop_front() {
                for &v in &info[u] {
                    let v = v as usize;
                    if rec[v].is_some() {
                        continue;
                    }
                    let rel = if graph.has_edge(u, v) { 1 } else { -1 };
                    rec[v] = Some(rel * rec[u].unwrap());
                    seen[v] = true;
                    members.push(v);
                    queue.push_back(v);
                }
            }
            // seeded with the true label, the reconstruction must be exact
            for &m in &members {
                assert_eq!(rec[m].unwrap(), graph.points.label(m), "propagation mismatch");
            }
            components_checked += 1;
        }
    }
    assert!(components_checked >= 500, "only {components_checked} components sampled");
}

#[test]
fn null_model_edge_cases() {
    let params = sparse_params(3.0, 64.0, 1.0, 1.0, 0.0, 1.0);
    let points = sample_points(&params, 31);
    let zero = ConnectionFunction::indicator(0.0, 1.0);
    let g0 = sample_null(points.clone(), &zero, Metric::Euclidean, 8.0, 1).unwrap();
    assert_eq!(g0.edge_count(), 0);

    let hard = ConnectionFunction::indicator(1.0, 1.0);
    let g1 = sample_null(points.clone(), &hard, Metric::Euclidean, 8.0, 1).unwrap();
    for i in 0..points.count() {
        for j in (i + 1)..points.count() {
            let within = Metric::Euclidean.dist(points.point(i), points.point(j)) <= 1.0;
            assert_eq!(g1.has_edge(i, j), within, "indicator null edge rule violated");
        }
    }
}

/// Campbell check: interior mean degree of the null model within 3 sigma of
/// lambda int g.
#[test]
fn null_mean_degree_matches_campbell() {
    let lambda = 3.0;
    let g = ConnectionFunction::indicator(0.5, 1.0);
    let expected = lambda * g.integral(2);
    let side = 20.0f64;
    let params = sparse_params(lambda, side * side, 1.0, 1.0, 0.0, 1.0);
    let mut degrees = Vec::new();
    for t in 0..40u64 {
        let points = sample_points(&params, sub_seed(37, "campbell", &[t]));
        let graph =
            sample_null(points, &g, Metric::Euclidean, side, sub_seed(37, "ce", &[t])).unwrap();
        for i in 0..graph.n_nodes() {
            let p = graph.points.point(i);
            if p.iter().all(|c| c.abs() <= side / 2.0 - 1.0) {
                degrees.push(graph.adjacency[i].len() as f64);
            }
        }
    }
    let mean = degrees.iter().sum::<f64>() / degrees.len() as f64;
    // degree variance is close to its (Poisson) mean; trials are correlated
    // within a graph, so scale the error by graphs rather than nodes
    let se = (expected / 40.0).sqrt();
    assert!(
        (mean - expected).abs() <= 3.0 * se,
        "interior mean degree {mean} vs Campbell {expected}"
    );
}

/// Mean planted-graph degree within 3 sigma of (lambda/2) int (f_in + f_out).
#[test]
fn planted_mean_degree_matches() {
    let lambda = 4.0;
    let side = 20.0f64;
    let params = sparse_params(lambda, side * side, 0.8, 1.0, 0.3, 0.8);
    let expected = lambda / 2.0 * (params.f_in.integral(2) + params.f_out.integral(2));
    let mut degrees = Vec::new();
    for t in 0..40u64 {
        let graph = sample_coupled(&params, sub_seed(41, "gdeg", &[t]));
        for i in 0..graph.n_nodes() {
            let p = graph.points.point(i);
            if p.iter().all(|c| c.abs() <= side / 2.0 - 1.0) {
                degrees.push(graph.adjacency[i].len() as f64);
            }
        }
    }
    let mean = degrees.iter().sum::<f64>() / degrees.len() as f64;
    let se = (expected / 40.0).sqrt();
    assert!(
        (mean - expected).abs() <= 3.0 * se,
        "planted interior mean degree {mean} vs {expected}"
    );
}

/// Per-distance I-edge frequency matches f_in - f_out within 3 sigma: the
/// information graph alone is a random connection model with the gap kernel.
#[test]
fn information_graph_distribution() {
    let params = sparse_params(2.0, 900.0, 1.0, 1.0, 0.3, 1.0);
    let bins = 5usize;
    let mut attempts = vec![0u64; bins];
    let mut hits = vec![0u64; bins];
    for t in 0..10u64 {
        let graph = sample_coupled(&params, sub_seed(43, "idist", &[t]));
        let info = graph.info_adjacency.as_ref().unwrap();
        let n = graph.n_nodes();
        for i in 0..n {
            for j in (i + 1)..n {
                let dist = graph.dist(i, j);
                if dist >= 1.0 {
                    continue;
                }
                let bin = (dist * bins as f64).floor() as usize;
                attempts[bin] += 1;
                if info[i].binary_search(&(j as u32)).is_ok() {
                    hits[bin] += 1;
                }
            }
        }
    }
    for bin in 0..bins {
        let p_hat = hits[bin] as f64 / attempts[bin] as f64;
        let p = 0.7;
        let se = (p * (1.0 - p) / attempts[bin] as f64).sqrt();
        assert!(
            (p_hat - p).abs() <= 3.0 * se,
            "bin {bin}: I-edge frequency {p_hat} vs gap 0.7 (se {se})"
        );
    }
}

#[test]
fn thinning_behaviour() {
    let params = sparse_params(3.0, 400.0, 1.0, 1.0, 0.5, 1.0);
    let graph = sample_coupled(&params, 47);
    let full = thin(&graph, 1.0, 5).unwrap();
    assert_eq!(full, graph);
    let empty = thin(&graph, 0.0, 5).unwrap();
    assert_eq!(empty.n_nodes(), 0);

    // retained count within 3 sigma of p N over repeated seeds
    let p = 0.6;
    let n = graph.n_nodes() as f64;
    let trials = 200u64;
    let mut total = 0usize;
    for s in 0..trials {
        total += thin(&graph, p, s).unwrap().n_nodes();
    }
    let mean = total as f64 / trials as f64;
    let se = (n * p * (1.0 - p) / trials as f64).sqrt();
    assert!((mean - p * n).abs() <= 3.0 * se, "thinned mean {mean} vs {}", p * n);

    // same seed, growing p: kept sets are nested, so counts are monotone
    let mut prev = 0usize;
    for k in 0..=10 {
        let kept = thin(&graph, k as f64 / 10.0, 99).unwrap().n_nodes();
        assert!(kept >= prev);
        prev = kept;
    }
}

#[test]
fn node_ids_sorted_by_sup_norm_and_inside_window() {
    let params = sparse_params(3.0, 400.0, 1.0, 1.0, 0.5, 1.0);
    let pts = sample_points(&params, 53);
    let half = params.window_side() / 2.0;
    let mut prev = 0.0f64;
    for i in 0..pts.count() {
        let norm = pts.point(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(norm <= half, "location outside the window");
        assert!(norm >= prev - 1e-12);
        prev = norm;
    }
}

#[test]
fn graph_format_round_trip() {
    let params = sparse_params(2.0, 100.0, 0.9, 1.0, 0.4, 1.0);
    let graph = sample_coupled(&params, 59);
    let mut bytes = Vec::new();
    write_graph(&graph, params.n, &mut bytes).unwrap();
    let (parsed, n) = read_graph(bytes.as_slice()).unwrap();
    assert_eq!(n, params.n);
    let mut again = Vec::new();
    write_graph(&parsed, n, &mut again).unwrap();
    assert_eq!(bytes, again, "format round trip must be byte-exact");
    assert_eq!(parsed.adjacency, graph.adjacency);
    assert_eq!(parsed.points, graph.points);
}

/// Brute-force oracle for the spatial-hash pair generation: rebuild edges by
/// scanning all pairs with the same edge uniforms. Exercises the wrapping
/// corner case of exactly two buckets per axis on the torus.
#[test]
fn adjacency_matches_all_pairs_oracle() {
    let torus_radius = 12.0f64.ln().sqrt();
    let cases = vec![
        ModelParams::new(
            3.0,
            2,
            64.0,
            ConnectionFunction::indicator(0.9, 1.0),
            ConnectionFunction::indicator(0.4, 0.7),
            Regime::SparseEuclidean,
        )
        .unwrap(),
        // n = 12 gives floor(side / radius) = 2 buckets per axis
        ModelParams::new(
            1.5,
            2,
            12.0,
            ConnectionFunction::indicator(0.9, torus_radius),
            ConnectionFunction::indicator(0.2, torus_radius),
            Regime::LogTorus,
        )
        .unwrap(),
    ];
    for (case, params) in cases.into_iter().enumerate() {
        for t in 0..20u64 {
            let seed = sub_seed(71, "hash-oracle", &[case as u64, t]);
            let graph = sample_coupled(&params, seed);
            let metric = params.metric();
            let edge_seed = sub_seed(seed, "edges", &[]);
            let n = graph.n_nodes();
            let mut expected = vec![Vec::<u32>::new(); n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let dist = metric.dist(graph.points.point(i), graph.points.point(j));
                    if dist > params.interaction_range() {
                        continue;
                    }
                    let u = geograph::rng::edge_uniform(edge_seed, i, j).unwrap();
                    let same = graph.points.label(i) == graph.points.label(j);
                    let p = if same { params.f_in.value(dist) } else { params.f_out.value(dist) };
                    if u <= p {
                        expected[i].push(j as u32);
                        expected[j].push(i as u32);
                    }
                }
            }
            assert_eq!(graph.adjacency, expected, "case {case} trial {t}");
        }
    }
}

#[test]
fn determinism_same_seed_same_graph() {
    let params = sparse_params(2.0, 400.0, 1.0, 1.0, 0.5, 0.7);
    let g1 = sample_coupled(&params, 61);
    let g2 = sample_coupled(&params, 61);
    assert_eq!(g1, g2);
    let g3 = sample_coupled(&params, 62);
    assert_ne!(g1, g3);
}

#[test]
fn overlap_of_sampled_labels_near_zero() {
    // sanity: labels are balanced, so the all-ones estimator has tiny overlap
    let params = sparse_params(5.0, 400.0, 1.0, 1.0, 0.5, 1.0);
    let graph = sample_coupled(&params, 67);
    let ones = vec![1i8; graph.n_nodes()];
    let o = overlap(&ones, graph.points.labels()).unwrap();
    assert!(o < 0.1, "all-ones overlap {o} unexpectedly large");
}
