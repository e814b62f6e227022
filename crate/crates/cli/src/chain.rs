//! Relation chaining over certain pairs, the linear-time estimator for hard
//! indicator pairs (`f_in = 1{r <= R_in}`, `f_out = 1{r <= R_out}`).
//!
//! At distances where `f_in = 1` and `f_out = 0`, the presence of an edge
//! reveals the pair relation exactly; chaining those certain relations
//! through connected components labels each component up to one flip, and a
//! giant component drives the overlap.

use geograph::model::{ModelParams, SpatialGraph};

/// Whether a distance certifies the relation: same-community pairs connect
/// surely, opposite pairs never.
fn informative(params: &ModelParams, dist: f64) -> bool {
    params.f_in.value(dist) >= 1.0 && params.f_out.value(dist) <= 0.0
}

/// Label estimates from chaining certain relations; `+1` for nodes in no
/// informative pair.
pub fn chain_classify(graph: &SpatialGraph, params: &ModelParams) -> Vec<i8> {
    let n = graph.n_nodes();
    let range = params.interaction_range();
    let mut estimates = vec![0i8; n];
    if n == 0 {
        return estimates;
    }
    // informative pairs live within the interaction range; gather them from
    // a coarse grid over the window
    let side = params.window_side();
    let per_axis = ((side / range.max(1e-9)).floor() as usize).max(1);
    let bucket = side / per_axis as f64;
    let d = params.d;
    let key_of = |x: &[f64]| -> Vec<usize> {
        x.iter()
            .map(|&xi| {
                let k = ((xi + side / 2.0) / bucket).floor() as isize;
                k.clamp(0, per_axis as isize - 1) as usize
            })
            .collect()
    };
    let mut buckets: std::collections::HashMap<Vec<usize>, Vec<u32>> =
        std::collections::HashMap::new();
    for i in 0..n {
        buckets.entry(key_of(graph.points.point(i))).or_default().push(i as u32);
    }
    let wrap = matches!(graph.metric, geograph::geom::Metric::Toroidal { .. });
    let mut offsets: Vec<Vec<isize>> = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::new();
        for base in &offsets {
            for delta in -1isize..=1 {
                let mut b = base.clone();
                b.push(delta);
                next.push(b);
            }
        }
        offsets = next;
    }
    let mut t_edges: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (key, home) in &buckets {
        for off in &offsets {
            let mut nk = Vec::with_capacity(d);
            let mut ok = true;
            for (axis, &o) in off.iter().enumerate() {
                let raw = key[axis] as isize + o;
                let k = per_axis as isize;
                let wrapped = if wrap {
                    ((raw % k) + k) % k
                } else if raw < 0 || raw >= k {
                    ok = false;
                    break;
                } else {
                    raw
                };
                nk.push(wrapped as usize);
            }
            if !ok {
                continue;
            }
            if let Some(other) = buckets.get(&nk) {
                for &i in home {
                    for &j in other {
                        if i >= j {
                            continue;
                        }
                        let dist = graph.dist(i as usize, j as usize);
                        if dist <= range && informative(params, dist) {
                            t_edges[i as usize].push(j);
                            t_edges[j as usize].push(i);
                        }
                    }
                }
            }
        }
    }
    for list in t_edges.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    // propagate within each T-component from its smallest id
    for root_candidate in 0..n {
        if estimates[root_candidate] != 0 {
            continue;
        }
        estimates[root_candidate] = 1;
        let mut queue = std::collections::VecDeque::from([root_candidate]);
        while let Some(u) = queue.pop_front() {
            for &v in &t_edges[u] {
                let v = v as usize;
                if estimates[v] != 0 {
                    continue;
                }
                let rel = if graph.has_edge(u, v) { 1 } else { -1 };
                estimates[v] = rel * estimates[u];
                queue.push_back(v);
            }
        }
    }
    estimates
}
