//! Cluster analysis of random connection models and the finite-window
//! percolation probability estimate.

use crate::geom::Metric;
use crate::model::{
    sample_points_with_planted, thin_keeping, ConnectionFunction, ModelParams, Planted, Regime,
    SpatialGraph,
};
use crate::rng::sub_seed;
use crate::{Error, Result};

/// A disjoint-set (union-find) structure over node ids.
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(len: usize) -> Self {
        UnionFind { parent: (0..len as u32).collect(), size: vec![1; len] }
    }

    pub fn find(&mut self, id: usize) -> usize {
        let mut root = id as u32;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = id as u32;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root as usize
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[small] = big as u32;
        self.size[big] += self.size[small];
    }

    pub fn size_of(&mut self, id: usize) -> usize {
        let root = self.find(id);
        self.size[root] as usize
    }
}

/// Cluster statistics of one sampled graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    /// Sorted multiset of cluster sizes.
    pub cluster_sizes: Vec<usize>,
    pub largest_fraction: f64,
    /// Whether the center point's cluster reaches within `boundary_shell` of
    /// the window edge.
    pub origin_spans: bool,
}

/// Union-find cluster analysis with the spanning proxy for the planted
/// center node (id 0 under the sup-norm ordering).
pub fn cluster_analysis(
    graph: &SpatialGraph,
    window_side: f64,
    boundary_shell: f64,
) -> Result<ClusterStats> {
    let n = graph.n_nodes();
    if n == 0 {
        return Ok(ClusterStats {
            cluster_sizes: Vec::new(),
            largest_fraction: 0.0,
            origin_spans: false,
        });
    }
    if matches!(graph.metric, Metric::Toroidal { .. }) {
        return Err(Error::InvalidParams("spanning proxy requires a Euclidean window".into()));
    }
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for &j in &graph.adjacency[i] {
            if (i as u32) < j {
                uf.union(i, j as usize);
            }
        }
    }
    let mut sizes: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for i in 0..n {
        *sizes.entry(uf.find(i)).or_insert(0) += 1;
    }
    let origin_root = uf.find(0);
    let threshold = window_side / 2.0 - boundary_shell;
    let mut origin_spans = false;
    for i in 0..n {
        if uf.find(i) == origin_root {
            let reach = graph.points.point(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if reach >= threshold {
                origin_spans = true;
                break;
            }
        }
    }
    let mut cluster_sizes: Vec<usize> = sizes.values().copied().collect();
    cluster_sizes.sort_unstable();
    let largest = *cluster_sizes.last().unwrap_or(&0);
    Ok(ClusterStats { cluster_sizes, largest_fraction: largest as f64 / n as f64, origin_spans })
}

/// Finite-window estimate of the percolation probability
/// `theta(H_{lambda, g, d})`: the fraction of trials in which the planted
/// center's cluster reaches within `boundary_shell` of the window edge.
pub fn theta_estimate(
    lambda: f64,
    g: &ConnectionFunction,
    d: usize,
    window_side: f64,
    boundary_shell: f64,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::InvalidParams("need at least one trial".into()));
    }
    let support = g.support();
    if support == 0.0 {
        return Ok((0.0, 0.0));
    }
    let hits: usize = (0..trials)
        .map(|t| -> Result<usize> {
            let graph = sample_h_with_center(
                lambda,
                g,
                d,
                window_side,
                sub_seed(seed, "theta", &[t as u64]),
            )?;
            let stats = cluster_analysis(&graph, window_side, boundary_shell)?;
            Ok(stats.origin_spans as usize)
        })
        .sum::<Result<usize>>()?;
    let p = hits as f64 / trials as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    Ok((p, se))
}

/// Sample `H_{lambda, g, d}` on a centered window with a planted point at the
/// origin (Palm convention). Labels are drawn but ignored by the null rule.
pub fn sample_h_with_center(
    lambda: f64,
    g: &ConnectionFunction,
    d: usize,
    window_side: f64,
    seed: u64,
) -> Result<SpatialGraph> {
    let params = ModelParams::new(
        lambda,
        d,
        window_side.powi(d as i32),
        g.clone(),
        g.clone(),
        Regime::SparseEuclidean,
    )?;
    let (points, _) = sample_points_with_planted(&params, seed, &[Planted::at(vec![0.0; d])]);
    crate::model::sample_null(
        points,
        g,
        Metric::Euclidean,
        window_side,
        sub_seed(seed, "h-edges", &[]),
    )
}

/// Coupled theta estimates across an ascending intensity grid: one sample at
/// the top intensity per trial, thinned down with shared node uniforms, so
/// the spanning indicator is monotone per trial by construction.
pub fn theta_sweep_coupled(
    lambdas: &[f64],
    g: &ConnectionFunction,
    d: usize,
    window_side: f64,
    boundary_shell: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if lambdas.is_empty() {
        return Err(Error::InvalidParams("empty intensity grid".into()));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let top = *sorted.last().unwrap();
    if !(top > 0.0) {
        return Err(Error::InvalidParams("intensities must be positive".into()));
    }
    let mut hits = vec![0usize; lambdas.len()];
    for t in 0..trials {
        let trial_seed = sub_seed(seed, "theta-sweep", &[t as u64]);
        let graph = sample_h_with_center(top, g, d, window_side, trial_seed)?;
        for (k, &lam) in lambdas.iter().enumerate() {
            let kept = thin_keeping(&graph, lam / top, sub_seed(trial_seed, "thin", &[]), &[0])?;
            let stats = cluster_analysis(&kept, window_side, boundary_shell)?;
            hits[k] += stats.origin_spans as usize;
        }
    }
    Ok(lambdas
        .iter()
        .zip(&hits)
        .map(|(_, &h)| {
            let p = h as f64 / trials as f64;
            (p, (p * (1.0 - p) / trials as f64).sqrt())
        })
        .collect())
}
