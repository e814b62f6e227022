//! Outcome metrics and statistical tests: overlap, likelihood / Flip-Bad
//! analysis, the triangle-profile distinguishability statistic, and the
//! information-flow-from-infinity experiment.

use crate::geom::Metric;
use crate::model::{sample_coupled_with_planted, ModelParams, Planted, SpatialGraph};
use crate::moments::HSpec;
use crate::percolation::theta_estimate;
use crate::rng::{node_uniform, sub_seed};
use crate::{Error, Result};

/// `|sum tau_i Z_i| / N`, the absolute normalized agreement; `1` for empty
/// sequences.
pub fn overlap(estimates: &[i8], truth: &[i8]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::LengthMismatch { left: estimates.len(), right: truth.len() });
    }
    if estimates.is_empty() {
        return Ok(1.0);
    }
    let dot: i64 = estimates.iter().zip(truth).map(|(&a, &b)| a as i64 * b as i64).sum();
    Ok(dot.unsigned_abs() as f64 / estimates.len() as f64)
}

/// Log-likelihood evaluation state for one labeled graph.
///
/// `pair_terms[i]` holds node `i`'s interacting pairs `(j, dist, edge)`; the
/// label-independent Poisson/location prefix is cached separately. Each
/// pair's log factor is attributed to both endpoints, so the full value is
/// `prefix + sum_i cache_i / 2`.
pub struct LikelihoodContext<'a> {
    pub graph: &'a SpatialGraph,
    pub labels: Vec<i8>,
    pub params: &'a ModelParams,
    prefix: f64,
    pairs: Vec<Vec<(u32, f64, bool)>>,
}

impl<'a> LikelihoodContext<'a> {
    pub fn new(graph: &'a SpatialGraph, labels: Vec<i8>, params: &'a ModelParams) -> Result<Self> {
        if labels.len() != graph.n_nodes() {
            return Err(Error::LengthMismatch { left: labels.len(), right: graph.n_nodes() });
        }
        let n_count = graph.n_nodes();
        let mean = params.lambda * params.n;
        // log of e^{-lambda n} (lambda n)^N / N! * (1/(2n))^N
        let mut prefix = -mean;
        if n_count > 0 {
            if mean <= 0.0 {
                return Err(Error::CorruptInput("points present at zero intensity".into()));
            }
            let mut log_fact = 0.0;
            for k in 1..=n_count {
                log_fact += (k as f64).ln();
            }
            prefix += n_count as f64 * mean.ln() - log_fact
                + n_count as f64 * (1.0 / (2.0 * params.n)).ln();
        }
        // gather interacting pairs once via the graph's own adjacency plus a
        // fresh distance scan for non-edges within the support
        let range = params.interaction_range();
        let mut pairs: Vec<Vec<(u32, f64, bool)>> = vec![Vec::new(); n_count];
        if range > 0.0 && n_count > 1 {
            let cell = range;
            let side = params.window_side();
            let wrap = matches!(graph.metric, Metric::Toroidal { .. });
            let per_axis = ((side / cell).floor() as usize).max(1);
            let bucket = side / per_axis as f64;
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
            for i in 0..n_count {
                buckets.entry(key_of(graph.points.point(i))).or_default().push(i as u32);
            }
            let d = params.d;
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
            for (key, home) in &buckets {
                for off in &offsets {
                    let mut nk = Vec::with_capacity(d);
                    let mut ok = true;
                    for (a, &o) in off.iter().enumerate() {
                        let raw = key[a] as isize + o;
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
                                if dist > range {
                                    continue;
                                }
                                let edge = graph.has_edge(i as usize, j as usize);
                                pairs[i as usize].push((j, dist, edge));
                                pairs[j as usize].push((i, dist, edge));
                            }
                        }
                    }
                }
            }
            for list in pairs.iter_mut() {
                list.sort_unstable_by_key(|e| e.0);
                list.dedup_by_key(|e| e.0);
            }
        }
        Ok(LikelihoodContext { graph, labels, params, prefix, pairs })
    }

    /// Log factor of one pair under relation `same`, with `-inf` for
    /// impossible configurations.
    fn pair_term(&self, dist: f64, edge: bool, same: bool) -> f64 {
        let p = if same { self.params.f_in.value(dist) } else { self.params.f_out.value(dist) };
        let p = if edge { p } else { 1.0 - p };
        if p > 0.0 {
            p.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Sum of node `i`'s pair terms under the current labels, with node `i`'s
    /// own label optionally negated.
    fn node_sum(&self, i: usize, flipped: bool) -> f64 {
        let zi = if flipped { -self.labels[i] } else { self.labels[i] };
        let mut s = 0.0;
        for &(j, dist, edge) in &self.pairs[i] {
            s += self.pair_term(dist, edge, zi == self.labels[j as usize]);
        }
        s
    }

    /// Per-node cached contributions; pair terms appear in both endpoints.
    pub fn node_contributions(&self) -> Vec<f64> {
        (0..self.graph.n_nodes()).map(|i| self.node_sum(i, false)).collect()
    }
}

/// Full log-likelihood of the labeled data.
///
/// An edge at a distance where both connection values vanish is impossible
/// under every labeling and signals corrupt input.
pub fn log_likelihood(ctx: &LikelihoodContext) -> Result<f64> {
    let mut total = ctx.prefix;
    let mut pair_sum = 0.0;
    for i in 0..ctx.graph.n_nodes() {
        for &(j, dist, edge) in &ctx.pairs[i] {
            if (j as usize) < i {
                continue;
            }
            if edge && ctx.params.f_in.value(dist) <= 0.0 && ctx.params.f_out.value(dist) <= 0.0 {
                return Err(Error::CorruptInput(format!(
                    "edge ({i}, {j}) at distance {dist} has zero probability under both relations"
                )));
            }
            pair_sum += ctx.pair_term(dist, edge, ctx.labels[i] == ctx.labels[j as usize]);
        }
        // edges beyond the interaction range are impossible by construction
        for &j in &ctx.graph.adjacency[i] {
            if (j as usize) > i {
                let dist = ctx.graph.dist(i, j as usize);
                if dist > ctx.params.interaction_range() {
                    return Err(Error::CorruptInput(format!(
                        "edge ({i}, {j}) lies beyond the connection support"
                    )));
                }
            }
        }
    }
    total += pair_sum;
    Ok(total)
}

/// Whether flipping node `i`'s label leaves the likelihood at least as high
/// (ties count as Flip-Bad; ambiguity is failure for exact recovery).
/// Evaluated
/// incrementally from node `i`'s pair terms only.
pub fn is_flip_bad(ctx: &LikelihoodContext, i: usize) -> Result<bool> {
    if i >= ctx.graph.n_nodes() {
        return Err(Error::UnknownNode(i));
    }
    let current = ctx.node_sum(i, false);
    let flipped = ctx.node_sum(i, true);
    Ok(flipped >= current)
}

/// Number of Flip-Bad nodes; any positive count certifies that maximum
/// likelihood cannot exactly recover the labels.
pub fn flip_bad_count(ctx: &LikelihoodContext) -> Result<usize> {
    let mut count = 0;
    for i in 0..ctx.graph.n_nodes() {
        if is_flip_bad(ctx, i)? {
            count += 1;
        }
    }
    Ok(count)
}

/// Outcome of the triangle-profile test on one graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistinguishReport {
    /// The windowed statistic `Delta^(L)`.
    pub statistic: f64,
    pub delta_g_ref: f64,
    pub delta_h_ref: f64,
    /// `true` = planted, `false` = null.
    pub planted: bool,
}

/// The Detect-Partitions statistic: the `h`-weighted ordered-triangle count
/// averaged over nodes within Euclidean distance `L` of the window center,
/// decided by the nearer of the two reference profiles.
pub fn detect_partitions(
    graph: &SpatialGraph,
    l_radius: f64,
    h_spec: HSpec,
    params: &ModelParams,
    delta_g_ref: f64,
    delta_h_ref: f64,
) -> Result<DistinguishReport> {
    let r = params.f_in.support();
    let mut inside = 0usize;
    let mut total = 0.0f64;
    for i in 0..graph.n_nodes() {
        let norm = graph.points.point(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > l_radius {
            continue;
        }
        inside += 1;
        let neigh = &graph.adjacency[i];
        for (a, &j) in neigh.iter().enumerate() {
            for &k in &neigh[a + 1..] {
                if !graph.has_edge(j as usize, k as usize) {
                    continue;
                }
                let leg_j = graph.dist(i, j as usize);
                let leg_k = graph.dist(i, k as usize);
                let leg_jk = graph.dist(j as usize, k as usize);
                // ordered pairs (j,k) and (k,j)
                total += h_spec.eval(&params.f_in, &params.f_out, r, leg_j, leg_k, leg_jk);
                total += h_spec.eval(&params.f_in, &params.f_out, r, leg_k, leg_j, leg_jk);
            }
        }
    }
    if inside == 0 {
        return Err(Error::InsufficientData("no nodes within the statistic window".into()));
    }
    let statistic = total / inside as f64;
    Ok(DistinguishReport {
        statistic,
        delta_g_ref,
        delta_h_ref,
        planted: (statistic - delta_g_ref).abs() < (statistic - delta_h_ref).abs(),
    })
}

/// Result of the information-flow experiment at one intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoFlowReport {
    /// Empirical probability of guessing the center label correctly.
    pub success: f64,
    pub success_se: f64,
    /// Empirical probability that the center's `I`-component reaches the
    /// revealed region.
    pub reach: f64,
    /// Percolation estimate used in the bound check.
    pub theta_hat: f64,
    pub theta_se: f64,
    /// Whether `success <= (1 + theta_hat)/2 + 3 sigma`.
    pub bound_ok: bool,
    pub trials: usize,
}

/// The information-flow-from-infinity experiment.
///
/// Per trial: plant a node at the origin, reveal true labels only at
/// Euclidean distance `>= r`, propagate labels along the coupled information
/// graph from the revealed region into the center's `I`-component (each
/// `I`-edge certifies equality when a `G`-edge is present, inequality when
/// absent), and fall back to a fair coin when the component stays inside.
pub fn info_flow_experiment(
    params: &ModelParams,
    r: f64,
    trials: usize,
    seed: u64,
) -> Result<InfoFlowReport> {
    if trials == 0 {
        return Err(Error::InvalidParams("need at least one trial".into()));
    }
    let support = params.interaction_range();
    let window_side = 2.0 * (r + support);
    let mut local = params.clone();
    local.n = window_side.powi(params.d as i32);
    local.validate()?;

    let mut successes = 0usize;
    let mut reached = 0usize;
    for t in 0..trials {
        let trial_seed = sub_seed(seed, "infoflow", &[t as u64]);
        let (graph, ids) =
            sample_coupled_with_planted(&local, trial_seed, &[Planted::at(vec![0.0; params.d])]);
        let center = ids[0];
        let info = graph.info_adjacency.as_ref().expect("coupled sample carries I");
        // BFS through I from the center until a revealed node is found.
        let n = graph.n_nodes();
        let mut sign_to_center = vec![0i8; n];
        sign_to_center[center] = 1;
        let mut queue = std::collections::VecDeque::from([center]);
        let mut guess: Option<i8> = None;
        'bfs: while let Some(u) = queue.pop_front() {
            for &v in &info[u] {
                let v = v as usize;
                if sign_to_center[v] != 0 {
                    continue;
                }
                let rel = if graph.has_edge(u, v) { 1 } else { -1 };
                sign_to_center[v] = rel * sign_to_center[u];
                let norm = graph.points.point(v).iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm >= r {
                    guess = Some(sign_to_center[v] * graph.points.label(v));
                    break 'bfs;
                }
                queue.push_back(v);
            }
        }
        let est = match guess {
            Some(g) => {
                reached += 1;
                g
            }
            None => {
                if node_uniform(sub_seed(trial_seed, "coin", &[]), 0) < 0.5 {
                    1
                } else {
                    -1
                }
            }
        };
        if est == graph.points.label(center) {
            successes += 1;
        }
    }
    let success = successes as f64 / trials as f64;
    let success_se = (success * (1.0 - success) / trials as f64).sqrt();
    let reach = reached as f64 / trials as f64;

    // Percolation estimate of the same connection-gap model, spanning
    // criterion aligned with the reveal radius.
    let gap = gap_function(params)?;
    let (theta_hat, theta_se) = theta_estimate(
        params.lambda,
        &gap,
        params.d,
        window_side,
        window_side / 2.0 - r,
        trials,
        sub_seed(seed, "infoflow-theta", &[]),
    )?;
    let sigma = (success_se * success_se + 0.25 * theta_se * theta_se).sqrt();
    let bound_ok = success <= 0.5 * (1.0 + theta_hat) + 3.0 * sigma;
    Ok(InfoFlowReport { success, success_se, reach, theta_hat, theta_se, bound_ok, trials })
}

/// The connection function `f_in - f_out` of the information graph.
///
/// Exact for indicator pairs and piecewise tables (the difference of
/// piecewise-constant radials is again piecewise constant).
pub fn gap_function(params: &ModelParams) -> Result<crate::model::ConnectionFunction> {
    use crate::model::ConnectionFunction as CF;
    let mut edges: Vec<f64> = Vec::new();
    for f in [&params.f_in, &params.f_out] {
        match f {
            CF::ScaledIndicator { radius, .. } => edges.push(*radius),
            CF::RadialTable { breakpoints, .. } => edges.extend_from_slice(breakpoints),
        }
    }
    edges.retain(|&e| e > 0.0);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    if edges.is_empty() {
        return Ok(CF::indicator(0.0, 0.0));
    }
    let mut values = Vec::with_capacity(edges.len());
    let mut prev = 0.0;
    for &e in &edges {
        let mid = 0.5 * (prev + e);
        values.push((params.f_in.value(mid) - params.f_out.value(mid)).clamp(0.0, 1.0));
        prev = e;
    }
    let table = CF::RadialTable { breakpoints: edges, values };
    table.validate()?;
    Ok(table)
}
