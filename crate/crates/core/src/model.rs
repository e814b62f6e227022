//! The planted-partition random connection model.
//!
//! A marked Poisson point process on the window `B_n = [-n^{1/d}/2, n^{1/d}/2]^d`
//! carries i.i.d. `{-1,+1}` community labels. Conditional on labels, nodes
//! `i, j` are adjacent in the planted graph `G` iff
//! `U_ij <= f_in(dist) 1{Z_i = Z_j} + f_out(dist) 1{Z_i != Z_j}`,
//! with the symmetric pair uniform `U_ij` coming from a counter-based hash.
//! The coupled information graph `I` uses the same uniforms: `i ~_I j` iff
//! `f_out(dist) < U_ij <= f_in(dist)`.
//!
//! The half-open interval (a closed lower end would differ on a null set
//! only) makes the coupling facts exact rather than almost-sure: an `I`-edge plus a
//! `G`-edge forces equal labels, an `I`-edge without a `G`-edge forces
//! opposite labels, and `f_in == f_out` yields an edgeless `I`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};

use crate::geom::Metric;
use crate::rng::{edge_uniform_unchecked, node_uniform, sub_seed};
use crate::{Error, Result};

/// Radial edge-probability profile with a declared support radius.
#[derive(Debug, Clone, PartialEq)]
pub enum ConnectionFunction {
    /// `level * 1{r <= radius}`.
    ScaledIndicator { level: f64, radius: f64 },
    /// Piecewise-constant, right-continuous: `values[i]` on
    /// `[breakpoints[i-1], breakpoints[i])` with `breakpoints[-1] = 0`,
    /// and `0` beyond the last breakpoint.
    RadialTable { breakpoints: Vec<f64>, values: Vec<f64> },
}

impl ConnectionFunction {
    pub fn indicator(level: f64, radius: f64) -> Self {
        ConnectionFunction::ScaledIndicator { level, radius }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConnectionFunction::ScaledIndicator { level, radius } => {
                if !(0.0..=1.0).contains(level) {
                    return Err(Error::InvalidParams(format!(
                        "indicator level {level} outside [0,1]"
                    )));
                }
                if !(radius >= &0.0) {
                    return Err(Error::InvalidParams(format!(
                        "indicator radius {radius} negative"
                    )));
                }
            }
            ConnectionFunction::RadialTable { breakpoints, values } => {
                if breakpoints.len() != values.len() {
                    return Err(Error::LengthMismatch {
                        left: breakpoints.len(),
                        right: values.len(),
                    });
                }
                if breakpoints.is_empty() {
                    return Err(Error::InvalidParams(
                        "radial table must have at least one piece".into(),
                    ));
                }
                let mut prev = 0.0;
                for &b in breakpoints {
                    if !(b > prev) {
                        return Err(Error::InvalidParams(format!(
                            "breakpoints must be positive and increasing, got {b} after {prev}"
                        )));
                    }
                    prev = b;
                }
                for &v in values {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::InvalidParams(format!("table value {v} outside [0,1]")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Probability value at radial distance `r`.
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        match self {
            ConnectionFunction::ScaledIndicator { level, radius } => {
                if r <= *radius {
                    *level
                } else {
                    0.0
                }
            }
            ConnectionFunction::RadialTable { breakpoints, values } => {
                for (b, v) in breakpoints.iter().zip(values) {
                    if r < *b {
                        return *v;
                    }
                }
                0.0
            }
        }
    }

    /// Radius beyond which the function is identically zero.
    pub fn support(&self) -> f64 {
        match self {
            ConnectionFunction::ScaledIndicator { level, radius } => {
                if *level > 0.0 {
                    *radius
                } else {
                    0.0
                }
            }
            ConnectionFunction::RadialTable { breakpoints, values } => {
                let mut sup = 0.0;
                for (b, v) in breakpoints.iter().zip(values) {
                    if *v > 0.0 {
                        sup = *b;
                    }
                }
                sup
            }
        }
    }

    /// Decompose into indicator pieces `(level, radius)` such that
    /// `f(r) = sum_k level_k 1{r <= radius_k}` almost everywhere.
    ///
    /// Exact for both variants; the basis of the closed-form shell and lens
    /// integrals.
    pub(crate) fn indicator_pieces(&self) -> Vec<(f64, f64)> {
        match self {
            ConnectionFunction::ScaledIndicator { level, radius } => vec![(*level, *radius)],
            ConnectionFunction::RadialTable { breakpoints, values } => {
                // f = sum over pieces of (v_i - v_{i+1}) 1{r <= b_i}
                let mut pieces = Vec::with_capacity(values.len());
                for i in 0..values.len() {
                    let next = if i + 1 < values.len() { values[i + 1] } else { 0.0 };
                    let step = values[i] - next;
                    if step != 0.0 {
                        pieces.push((step, breakpoints[i]));
                    }
                }
                pieces
            }
        }
    }

    /// `int_{R^d} f(|x|) dx` via exact shell volumes.
    pub fn integral(&self, d: usize) -> f64 {
        self.indicator_pieces()
            .iter()
            .map(|(lvl, rad)| lvl * crate::geom::ball_volume(d, *rad))
            .sum()
    }
}

/// Which asymptotic regime the parameters describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Connection functions independent of `n`; Euclidean metric on `B_n`.
    SparseEuclidean,
    /// Scaled indicators of radius `log(n)^{1/d}`; toroidal metric on `B_n`.
    LogTorus,
}

/// Full parameter set for sampling one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub lambda: f64,
    pub d: usize,
    pub n: f64,
    pub f_in: ConnectionFunction,
    pub f_out: ConnectionFunction,
    pub regime: Regime,
}

impl ModelParams {
    pub fn new(
        lambda: f64,
        d: usize,
        n: f64,
        f_in: ConnectionFunction,
        f_out: ConnectionFunction,
        regime: Regime,
    ) -> Result<Self> {
        let p = ModelParams { lambda, d, n, f_in, f_out, regime };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParams(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.d == 0 {
            return Err(Error::InvalidParams("dimension must be >= 1".into()));
        }
        if !(self.n > 0.0) {
            return Err(Error::InvalidParams(format!(
                "window volume must be positive, got {}",
                self.n
            )));
        }
        self.f_in.validate()?;
        self.f_out.validate()?;
        // f_in >= f_out checked on a grid over the joint support
        let sup = self.f_in.support().max(self.f_out.support());
        for k in 0..=1000 {
            let r = sup * k as f64 / 1000.0;
            if self.f_in.value(r) < self.f_out.value(r) - 1e-12 {
                return Err(Error::InvalidParams(format!(
                    "f_in(r) < f_out(r) at r = {r}: {} < {}",
                    self.f_in.value(r),
                    self.f_out.value(r)
                )));
            }
        }
        if self.regime == Regime::LogTorus {
            let want = self.n.ln().powf(1.0 / self.d as f64);
            for (name, f) in [("f_in", &self.f_in), ("f_out", &self.f_out)] {
                match f {
                    ConnectionFunction::ScaledIndicator { radius, .. } => {
                        if (radius - want).abs() > 1e-9 * want.max(1.0) {
                            return Err(Error::InvalidParams(format!(
                                "log_torus requires {name} radius log(n)^(1/d) = {want}, got {radius}"
                            )));
                        }
                    }
                    _ => {
                        return Err(Error::InvalidParams(format!(
                            "log_torus requires {name} to be a scaled indicator"
                        )))
                    }
                }
            }
            if 2.0 * want > self.window_side() {
                return Err(Error::InvalidParams(
                    "torus side must exceed twice the connection radius".into(),
                ));
            }
        }
        Ok(())
    }

    /// Edge length of the window, `n^{1/d}`.
    pub fn window_side(&self) -> f64 {
        self.n.powf(1.0 / self.d as f64)
    }

    pub fn metric(&self) -> Metric {
        match self.regime {
            Regime::SparseEuclidean => Metric::Euclidean,
            Regime::LogTorus => Metric::Toroidal { side: self.window_side() },
        }
    }

    /// Pairs farther apart than this can never interact.
    pub fn interaction_range(&self) -> f64 {
        self.f_in.support().max(self.f_out.support())
    }
}

/// Node locations in `B_n` plus their `{-1,+1}` community labels.
///
/// Coordinates are stored flat with stride `d`. Ids are assigned in order of
/// increasing sup-norm distance from the window center.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedPointSet {
    pub d: usize,
    coords: Vec<f64>,
    labels: Vec<i8>,
}

impl MarkedPointSet {
    pub fn new(d: usize, coords: Vec<f64>, labels: Vec<i8>) -> Result<Self> {
        if coords.len() != labels.len() * d {
            return Err(Error::LengthMismatch { left: coords.len(), right: labels.len() * d });
        }
        if labels.iter().any(|&z| z != 1 && z != -1) {
            return Err(Error::InvalidParams("labels must be +1 or -1".into()));
        }
        Ok(MarkedPointSet { d, coords, labels })
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    #[inline(always)]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    #[inline(always)]
    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }
}

/// A sampled spatial graph: points, sorted adjacency, metric, and optionally
/// the coupled information graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGraph {
    pub points: MarkedPointSet,
    pub metric: Metric,
    pub adjacency: Vec<Vec<u32>>,
    pub info_adjacency: Option<Vec<Vec<u32>>>,
}

impl SpatialGraph {
    pub fn n_nodes(&self) -> usize {
        self.points.count()
    }

    /// Edge test by binary search in the sorted neighbor list.
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&(j as u32)).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    #[inline(always)]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.metric.dist(self.points.point(i), self.points.point(j))
    }
}

/// A location to plant before sampling (Palm conditioning), with an optional
/// forced label; `None` draws the label uniformly.
#[derive(Debug, Clone)]
pub struct Planted {
    pub location: Vec<f64>,
    pub label: Option<i8>,
}

impl Planted {
    pub fn at(location: Vec<f64>) -> Self {
        Planted { location, label: None }
    }

    pub fn labeled(location: Vec<f64>, label: i8) -> Self {
        Planted { location, label: Some(label) }
    }
}

/// Sample the marked point set: `Poisson(lambda n)` points uniform on `B_n`
/// with i.i.d. uniform labels, plus any planted points.
///
/// Returns the point set and the ids the planted points received after the
/// sup-norm ordering.
pub fn sample_points_with_planted(
    params: &ModelParams,
    seed: u64,
    planted: &[Planted],
) -> (MarkedPointSet, Vec<usize>) {
    let d = params.d;
    let side = params.window_side();
    let mut rng = ChaCha12Rng::seed_from_u64(sub_seed(seed, "points", &[]));
    let mean = params.lambda * params.n;
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("valid Poisson mean").sample(&mut rng) as usize
    } else {
        0
    };

    let total = count + planted.len();
    let mut entries: Vec<(Vec<f64>, i8, Option<usize>)> = Vec::with_capacity(total);
    for p in planted.iter().enumerate() {
        let (k, p) = p;
        let label = p.label.unwrap_or_else(|| if rng.random::<bool>() { 1 } else { -1 });
        entries.push((p.location.clone(), label, Some(k)));
    }
    for _ in 0..count {
        let loc: Vec<f64> = (0..d).map(|_| (rng.random::<f64>() - 0.5) * side).collect();
        let label = if rng.random::<bool>() { 1 } else { -1 };
        entries.push((loc, label, None));
    }

    // ids in order of increasing sup-norm distance from the window center
    entries.sort_by(|a, b| {
        let ka = sup_norm(&a.0);
        let kb = sup_norm(&b.0);
        ka.partial_cmp(&kb).unwrap().then_with(|| a.0.partial_cmp(&b.0).unwrap())
    });

    let mut coords = Vec::with_capacity(total * d);
    let mut labels = Vec::with_capacity(total);
    let mut planted_ids = vec![usize::MAX; planted.len()];
    for (id, (loc, label, origin)) in entries.into_iter().enumerate() {
        coords.extend_from_slice(&loc);
        labels.push(label);
        if let Some(k) = origin {
            planted_ids[k] = id;
        }
    }
    (MarkedPointSet { d, coords, labels }, planted_ids)
}

/// Sample the marked point set without planted points.
pub fn sample_points(params: &ModelParams, seed: u64) -> MarkedPointSet {
    sample_points_with_planted(params, seed, &[]).0
}

fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Uniform-grid spatial hash over the window for fixed-radius pair
/// generation. Bucket side is at least the query radius, so all pairs within
/// the radius live in adjacent buckets (with wraparound on the torus).
struct SpatialHash {
    per_axis: Vec<usize>,
    bucket_side: Vec<f64>,
    origin: f64,
    buckets: HashMap<Vec<usize>, Vec<u32>>,
    d: usize,
    wrap: bool,
}

impl SpatialHash {
    fn build(points: &MarkedPointSet, side: f64, radius: f64, wrap: bool) -> Self {
        let d = points.d;
        let mut per_axis = Vec::with_capacity(d);
        let mut bucket_side = Vec::with_capacity(d);
        for _ in 0..d {
            let k = (side / radius).floor().max(1.0) as usize;
            per_axis.push(k);
            bucket_side.push(side / k as f64);
        }
        let mut buckets: HashMap<Vec<usize>, Vec<u32>> = HashMap::new();
        for i in 0..points.count() {
            let key = Self::key_of(points.point(i), -side / 2.0, &bucket_side, &per_axis);
            buckets.entry(key).or_default().push(i as u32);
        }
        SpatialHash { per_axis, bucket_side, origin: -side / 2.0, buckets, d, wrap }
    }

    fn key_of(x: &[f64], origin: f64, bucket_side: &[f64], per_axis: &[usize]) -> Vec<usize> {
        x.iter()
            .enumerate()
            .map(|(a, &xi)| {
                let k = ((xi - origin) / bucket_side[a]).floor() as isize;
                k.clamp(0, per_axis[a] as isize - 1) as usize
            })
            .collect()
    }

    /// Visit every unordered candidate pair `(i, j)`, `i < j`, lying in the
    /// same or adjacent buckets. Pairs farther than the bucket side apart per
    /// axis are never produced; callers still filter by true distance.
    fn for_each_candidate_pair(&self, mut visit: impl FnMut(u32, u32)) {
        let neighbor_offsets = {
            let mut offs: Vec<Vec<isize>> = vec![vec![]];
            for _ in 0..self.d {
                let mut next = Vec::new();
                for base in &offs {
                    for delta in -1isize..=1 {
                        let mut b = base.clone();
                        b.push(delta);
                        next.push(b);
                    }
                }
                offs = next;
            }
            offs
        };
        let mut keys: Vec<&Vec<usize>> = self.buckets.keys().collect();
        keys.sort();
        for key in keys {
            let home = &self.buckets[key];
            // pairs within the home bucket
            for (a, &i) in home.iter().enumerate() {
                for &j in &home[a + 1..] {
                    if i < j {
                        visit(i, j);
                    } else {
                        visit(j, i);
                    }
                }
            }
            // pairs to strictly "greater" neighbor buckets, so each unordered
            // bucket pair is visited once; wrapping can alias two offsets to
            // the same bucket (two buckets per axis), hence the dedup set
            let mut neighbor_keys: std::collections::BTreeSet<Vec<usize>> =
                std::collections::BTreeSet::new();
            for off in &neighbor_offsets {
                if off.iter().all(|&o| o == 0) {
                    continue;
                }
                let mut nk = Vec::with_capacity(self.d);
                let mut ok = true;
                for (a, &o) in off.iter().enumerate() {
                    let raw = key[a] as isize + o;
                    let k = self.per_axis[a] as isize;
                    let wrapped = if self.wrap {
                        ((raw % k) + k) % k
                    } else if raw < 0 || raw >= k {
                        ok = false;
                        break;
                    } else {
                        raw
                    };
                    nk.push(wrapped as usize);
                }
                if ok && nk.as_slice() > key.as_slice() {
                    neighbor_keys.insert(nk);
                }
            }
            for nk in &neighbor_keys {
                if let Some(other) = self.buckets.get(nk) {
                    for &i in home {
                        for &j in other {
                            if i < j {
                                visit(i, j);
                            } else if j < i {
                                visit(j, i);
                            }
                        }
                    }
                }
            }
        }
        let _ = &self.origin;
        let _ = &self.bucket_side;
    }
}

/// Sample the planted graph `G` together with the coupled information graph
/// `I` from shared edge uniforms.
pub fn sample_coupled(params: &ModelParams, seed: u64) -> SpatialGraph {
    sample_coupled_with_planted(params, seed, &[]).0
}

/// Palm version of [`sample_coupled`]: plants extra points before drawing the
/// graph and reports their node ids.
pub fn sample_coupled_with_planted(
    params: &ModelParams,
    seed: u64,
    planted: &[Planted],
) -> (SpatialGraph, Vec<usize>) {
    let (points, planted_ids) = sample_points_with_planted(params, seed, planted);
    let metric = params.metric();
    let edge_seed = sub_seed(seed, "edges", &[]);
    let range = params.interaction_range();
    let n = points.count();
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut info_adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    if range > 0.0 && n > 1 {
        let wrap = matches!(metric, Metric::Toroidal { .. });
        let hash = SpatialHash::build(&points, params.window_side(), range, wrap);
        hash.for_each_candidate_pair(|i, j| {
            let (iu, ju) = (i as usize, j as usize);
            let dist = metric.dist(points.point(iu), points.point(ju));
            if dist > range {
                return;
            }
            let fi = params.f_in.value(dist);
            let fo = params.f_out.value(dist);
            let u = edge_uniform_unchecked(edge_seed, iu, ju);
            let same = points.label(iu) == points.label(ju);
            let g_edge = if same { u <= fi } else { u <= fo };
            if g_edge {
                adjacency[iu].push(j);
                adjacency[ju].push(i);
            }
            if fo < u && u <= fi {
                info_adjacency[iu].push(j);
                info_adjacency[ju].push(i);
            }
        });
    }
    for list in adjacency.iter_mut().chain(info_adjacency.iter_mut()) {
        list.sort_unstable();
    }
    (SpatialGraph { points, metric, adjacency, info_adjacency: Some(info_adjacency) }, planted_ids)
}

/// Sample a plain random connection model `H_{lambda, g, d}` on an existing
/// point set: edges independent with probability `g(dist)`, labels ignored.
pub fn sample_null(
    points: MarkedPointSet,
    g: &ConnectionFunction,
    metric: Metric,
    window_side: f64,
    seed: u64,
) -> Result<SpatialGraph> {
    g.validate()?;
    let range = g.support();
    let n = points.count();
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    if range > 0.0 && n > 1 {
        let wrap = matches!(metric, Metric::Toroidal { .. });
        let hash = SpatialHash::build(&points, window_side, range, wrap);
        let edge_seed = sub_seed(seed, "null-edges", &[]);
        hash.for_each_candidate_pair(|i, j| {
            let (iu, ju) = (i as usize, j as usize);
            let dist = metric.dist(points.point(iu), points.point(ju));
            if dist > range {
                return;
            }
            let u = edge_uniform_unchecked(edge_seed, iu, ju);
            if u <= g.value(dist) {
                adjacency[iu].push(j);
                adjacency[ju].push(i);
            }
        });
    }
    for list in adjacency.iter_mut() {
        list.sort_unstable();
    }
    Ok(SpatialGraph { points, metric, adjacency, info_adjacency: None })
}

/// Keep each node independently with probability `p` and return the induced
/// subgraph (ids renumbered, sup-norm order preserved).
///
/// The retention uniforms are counter-hashed from `(seed, id)`, so thinning
/// the same graph at `p1 <= p2` with one seed yields nested node sets; that
/// monotone coupling drives the percolation sweeps.
pub fn thin(graph: &SpatialGraph, p: f64, seed: u64) -> Result<SpatialGraph> {
    thin_keeping(graph, p, seed, &[])
}

/// [`thin`] with a set of node ids that are always retained (e.g. a planted
/// origin under the Palm convention).
pub fn thin_keeping(
    graph: &SpatialGraph,
    p: f64,
    seed: u64,
    always_keep: &[usize],
) -> Result<SpatialGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParams(format!("retention probability {p} outside [0,1]")));
    }
    let n = graph.n_nodes();
    let mut keep = vec![false; n];
    for i in 0..n {
        keep[i] = node_uniform(seed, i) < p;
    }
    for &i in always_keep {
        if i >= n {
            return Err(Error::UnknownNode(i));
        }
        keep[i] = true;
    }
    let mut new_id = vec![u32::MAX; n];
    let mut m = 0u32;
    for i in 0..n {
        if keep[i] {
            new_id[i] = m;
            m += 1;
        }
    }
    let d = graph.points.d;
    let mut coords = Vec::with_capacity(m as usize * d);
    let mut labels = Vec::with_capacity(m as usize);
    for i in 0..n {
        if keep[i] {
            coords.extend_from_slice(graph.points.point(i));
            labels.push(graph.points.label(i));
        }
    }
    let remap = |adj: &Vec<Vec<u32>>| -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); m as usize];
        for i in 0..n {
            if !keep[i] {
                continue;
            }
            let list: Vec<u32> =
                adj[i].iter().filter(|&&j| keep[j as usize]).map(|&j| new_id[j as usize]).collect();
            out[new_id[i] as usize] = list;
        }
        out
    };
    Ok(SpatialGraph {
        points: MarkedPointSet { d, coords, labels },
        metric: graph.metric,
        adjacency: remap(&graph.adjacency),
        info_adjacency: graph.info_adjacency.as_ref().map(remap),
    })
}

/// Write a graph in the `geograph v1` text format.
///
/// Header `geograph v1 d=<d> n=<n> metric=<euclidean|toroidal>`, then node
/// lines `N <id> <x1..xd> <label>`, edge lines `E <i> <j>` and info-edge
/// lines `I <i> <j>`, ids ascending and edges lexicographic.
pub fn write_graph<W: Write>(graph: &SpatialGraph, n: f64, mut w: W) -> Result<()> {
    let metric_name = match graph.metric {
        Metric::Euclidean => "euclidean",
        Metric::Toroidal { .. } => "toroidal",
    };
    writeln!(w, "geograph v1 d={} n={} metric={}", graph.points.d, n, metric_name)?;
    for i in 0..graph.n_nodes() {
        write!(w, "N {}", i)?;
        for c in graph.points.point(i) {
            write!(w, " {}", c)?;
        }
        writeln!(w, " {}", graph.points.label(i))?;
    }
    for i in 0..graph.n_nodes() {
        for &j in &graph.adjacency[i] {
            if (i as u32) < j {
                writeln!(w, "E {} {}", i, j)?;
            }
        }
    }
    if let Some(info) = &graph.info_adjacency {
        for (i, list) in info.iter().enumerate() {
            for &j in list {
                if (i as u32) < j {
                    writeln!(w, "I {} {}", i, j)?;
                }
            }
        }
    }
    Ok(())
}

/// Read a graph in the `geograph v1` text format; returns the graph and the
/// window volume `n` from the header.
pub fn read_graph<R: Read>(r: R) -> Result<(SpatialGraph, f64)> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty file".into()))??;
    let mut d = None;
    let mut n = None;
    let mut metric_name = None;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("geograph") || fields.next() != Some("v1") {
        return Err(Error::Format("expected `geograph v1` header".into()));
    }
    for field in fields {
        if let Some(v) = field.strip_prefix("d=") {
            d = Some(v.parse::<usize>().map_err(|e| Error::Format(format!("bad d: {e}")))?);
        } else if let Some(v) = field.strip_prefix("n=") {
            n = Some(v.parse::<f64>().map_err(|e| Error::Format(format!("bad n: {e}")))?);
        } else if let Some(v) = field.strip_prefix("metric=") {
            metric_name = Some(v.to_string());
        }
    }
    let d = d.ok_or_else(|| Error::Format("header missing d=".into()))?;
    let n = n.ok_or_else(|| Error::Format("header missing n=".into()))?;
    let side = n.powf(1.0 / d as f64);
    let metric = match metric_name.as_deref() {
        Some("euclidean") => Metric::Euclidean,
        Some("toroidal") => Metric::Toroidal { side },
        other => return Err(Error::Format(format!("unknown metric {other:?}"))),
    };

    let mut coords: Vec<f64> = Vec::new();
    let mut labels: Vec<i8> = Vec::new();
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut info_edges: Vec<(u32, u32)> = Vec::new();
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("N") => {
                let id: usize = parse_field(parts.next(), "node id")?;
                if id != labels.len() {
                    return Err(Error::Format(format!("node ids must be ascending, got {id}")));
                }
                for _ in 0..d {
                    let c: f64 = parse_field(parts.next(), "coordinate")?;
                    coords.push(c);
                }
                let label: i8 = parse_field(parts.next(), "label")?;
                if label != 1 && label != -1 {
                    return Err(Error::Format(format!("label must be +-1, got {label}")));
                }
                labels.push(label);
            }
            Some("E") => {
                let i: u32 = parse_field(parts.next(), "edge endpoint")?;
                let j: u32 = parse_field(parts.next(), "edge endpoint")?;
                edges.push((i, j));
            }
            Some("I") => {
                let i: u32 = parse_field(parts.next(), "info endpoint")?;
                let j: u32 = parse_field(parts.next(), "info endpoint")?;
                info_edges.push((i, j));
            }
            other => return Err(Error::Format(format!("unknown record {other:?}"))),
        }
    }
    let count = labels.len();
    let points = MarkedPointSet::new(d, coords, labels)?;
    let build = |pairs: &[(u32, u32)]| -> Result<Vec<Vec<u32>>> {
        let mut adj = vec![Vec::new(); count];
        for &(i, j) in pairs {
            if i as usize >= count || j as usize >= count || i == j {
                return Err(Error::Format(format!("bad edge ({i}, {j})")));
            }
            adj[i as usize].push(j);
            adj[j as usize].push(i);
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
        }
        Ok(adj)
    };
    let adjacency = build(&edges)?;
    // A file with no `I` lines is indistinguishable from one written without
    // an information graph; round-trips are exact at the byte level.
    let info_adjacency = if info_edges.is_empty() { None } else { Some(build(&info_edges)?) };
    Ok((SpatialGraph { points, metric, adjacency, info_adjacency }, n))
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    field
        .ok_or_else(|| Error::Format(format!("missing {what}")))?
        .parse::<T>()
        .map_err(|e| Error::Format(format!("bad {what}: {e}")))
}
