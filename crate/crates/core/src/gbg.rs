//! The Good-Bad-Grid clustering algorithm.
//!
//! Space is tessellated into cubes of side `R/(4 d^{1/d})`. Each occupied
//! cell is tested for internal consistency of the pairwise classifier on its
//! 1-thickening (A-Good); labels are then propagated through `Z^d`-connected
//! A-Good components, and nodes in A-Bad cells default to `+1`.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::geom::{cell_of, CellIndex, GridSpec};
use crate::model::{ModelParams, Regime, SpatialGraph};
use crate::moments::eval_m;
use crate::rng::{mix, splitmix64};
use crate::{Error, Result};

/// Verdict for one occupied cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellVerdict {
    pub cell: CellIndex,
    pub a_good: bool,
    /// Only populated in analysis mode, when ground truth is supplied.
    pub t_good: Option<bool>,
    pub local_nodes: Vec<u32>,
}

/// Aggregate counters from one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GbgStats {
    pub occupied_cells: usize,
    pub a_good_cells: usize,
    pub components: usize,
    pub largest_component_cells: usize,
    pub largest_component_nodes: usize,
}

/// Output of the main routine.
#[derive(Debug, Clone, PartialEq)]
pub struct GbgResult {
    /// One `{-1,+1}` estimate per node; nodes in A-Bad cells carry `+1`.
    pub estimates: Vec<i8>,
    /// A-Good component id per node, `None` for nodes in A-Bad cells.
    pub component_of: Vec<Option<u32>>,
    pub cell_verdicts: Vec<CellVerdict>,
    pub stats: GbgStats,
}

/// The tessellation scale for the given parameters: the connection support in
/// the sparse regime, `log(n)^{1/d}` (the support again) in the log regime.
pub fn default_grid(params: &ModelParams) -> Result<GridSpec> {
    let r = match params.regime {
        Regime::SparseEuclidean => params.f_in.support(),
        Regime::LogTorus => params.n.ln().powf(1.0 / params.d as f64),
    };
    GridSpec::new(r, params.d)
}

/// Number of common graph neighbors of `i` and `j` lying strictly within
/// distance `r` of both, by sorted-list intersection plus distance filter.
pub fn count_common_neighbors(graph: &SpatialGraph, i: usize, j: usize, r: f64) -> Result<usize> {
    let n = graph.n_nodes();
    if i >= n || j >= n {
        return Err(Error::UnknownNode(i.max(j)));
    }
    if i == j {
        return Err(Error::InvalidParams("common neighbors need i != j".into()));
    }
    let (a, b) = (&graph.adjacency[i], &graph.adjacency[j]);
    let (mut p, mut q) = (0usize, 0usize);
    let mut count = 0usize;
    while p < a.len() && q < b.len() {
        match a[p].cmp(&b[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                let k = a[p] as usize;
                if graph.dist(i, k) < r && graph.dist(j, k) < r {
                    count += 1;
                }
                p += 1;
                q += 1;
            }
        }
    }
    Ok(count)
}

/// The common-neighbor threshold `(lambda/4)(M_in + M_out)` at distance
/// `dist`; the midpoint of the two true Palm means `(lambda/2) M_in` and
/// `(lambda/2) M_out`.
pub fn pairwise_threshold(params: &ModelParams, r: f64, dist: f64) -> f64 {
    let m = eval_m(&params.f_in, &params.f_out, params.d, r, dist);
    params.lambda / 4.0 * (m.m_in + m.m_out)
}

/// Decision rule shared by all classifier call sites: strictly more common
/// neighbors than the threshold means "same community".
#[inline]
pub fn classify_from_count(count: usize, threshold: f64) -> i8 {
    if count as f64 > threshold {
        1
    } else {
        -1
    }
}

/// The pairwise classifier: `+1` iff the common-neighbor count within the
/// tessellation radius strictly exceeds the threshold.
pub fn pairwise_classify(
    graph: &SpatialGraph,
    i: usize,
    j: usize,
    params: &ModelParams,
    grid: &GridSpec,
) -> Result<i8> {
    let count = count_common_neighbors(graph, i, j, grid.r)?;
    let dist = graph.dist(i, j);
    Ok(classify_from_count(count, pairwise_threshold(params, grid.r, dist)))
}

/// Node-count condition shared by the A-Good and T-Good definitions:
/// at least `max(lambda (R/4)^d (1/d) (1 - eps), 1)` nodes in the cell.
fn count_condition(params: &ModelParams, grid: &GridSpec, epsilon: f64, node_count: usize) -> bool {
    let needed = (params.lambda * grid.cell_volume() * (1.0 - epsilon)).max(1.0);
    (node_count as f64) >= needed
}

/// Index of nodes by occupied cell, sorted for deterministic iteration.
fn occupied_cells(graph: &SpatialGraph, grid: &GridSpec) -> Vec<(CellIndex, Vec<u32>)> {
    let mut map: HashMap<CellIndex, Vec<u32>> = HashMap::new();
    for i in 0..graph.n_nodes() {
        map.entry(cell_of(grid, graph.points.point(i))).or_default().push(i as u32);
    }
    let mut cells: Vec<(CellIndex, Vec<u32>)> = map.into_iter().collect();
    cells.sort_by(|a, b| a.0.cmp(&b.0));
    cells
}

/// Nodes of the 1-thickening of `cell`, gathered from the cell index.
fn thickening_nodes(cell: &CellIndex, index: &HashMap<&CellIndex, &[u32]>, d: usize) -> Vec<u32> {
    let mut nodes = Vec::new();
    let mut offset = vec![-1i64; d];
    loop {
        let shifted = CellIndex(cell.0.iter().zip(&offset).map(|(c, o)| c + o).collect());
        if let Some(list) = index.get(&shifted) {
            nodes.extend_from_slice(list);
        }
        let mut axis = 0;
        while axis < d {
            offset[axis] += 1;
            if offset[axis] <= 1 {
                break;
            }
            offset[axis] = -1;
            axis += 1;
        }
        if axis == d {
            break;
        }
    }
    nodes.sort_unstable();
    nodes
}

/// A-Good test for one cell: the count condition plus balance of the complete
/// signed graph of pairwise classifications over the 1-thickening.
///
/// Balance is checked by fixing a reference node, deriving a two-coloring
/// from its pairwise signs and verifying every remaining pair agrees; on a
/// complete signed graph this is equivalent to the absence of a negative
/// cycle.
pub fn is_a_good(
    graph: &SpatialGraph,
    grid: &GridSpec,
    cell: &CellIndex,
    params: &ModelParams,
    epsilon: f64,
) -> Result<bool> {
    let cells = occupied_cells(graph, grid);
    let index: HashMap<&CellIndex, &[u32]> = cells.iter().map(|(c, v)| (c, v.as_slice())).collect();
    let in_cell = index.get(&cell).map_or(0, |v| v.len());
    if !count_condition(params, grid, epsilon, in_cell) {
        return Ok(false);
    }
    let nodes = thickening_nodes(cell, &index, params.d);
    signed_consistent(graph, &nodes, params, grid)
}

fn signed_consistent(
    graph: &SpatialGraph,
    nodes: &[u32],
    params: &ModelParams,
    grid: &GridSpec,
) -> Result<bool> {
    if nodes.len() < 2 {
        return Ok(true);
    }
    let reference = nodes[0] as usize;
    let mut color = HashMap::with_capacity(nodes.len());
    color.insert(reference as u32, 1i8);
    for &x in &nodes[1..] {
        color.insert(x, pairwise_classify(graph, reference, x as usize, params, grid)?);
    }
    for (a_pos, &x) in nodes[1..].iter().enumerate() {
        for &y in &nodes[a_pos + 2..] {
            let sign = pairwise_classify(graph, x as usize, y as usize, params, grid)?;
            if sign != color[&x] * color[&y] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// T-Good test (analysis mode): the count condition plus every pairwise
/// classification over the 1-thickening matching the ground truth.
pub fn is_t_good(
    graph: &SpatialGraph,
    truth: &[i8],
    grid: &GridSpec,
    cell: &CellIndex,
    params: &ModelParams,
    epsilon: f64,
) -> Result<bool> {
    if truth.len() != graph.n_nodes() {
        return Err(Error::LengthMismatch { left: truth.len(), right: graph.n_nodes() });
    }
    let cells = occupied_cells(graph, grid);
    let index: HashMap<&CellIndex, &[u32]> = cells.iter().map(|(c, v)| (c, v.as_slice())).collect();
    let in_cell = index.get(&cell).map_or(0, |v| v.len());
    if !count_condition(params, grid, epsilon, in_cell) {
        return Ok(false);
    }
    let nodes = thickening_nodes(cell, &index, params.d);
    pairs_match_truth(graph, truth, &nodes, params, grid)
}

fn pairs_match_truth(
    graph: &SpatialGraph,
    truth: &[i8],
    nodes: &[u32],
    params: &ModelParams,
    grid: &GridSpec,
) -> Result<bool> {
    for (a_pos, &x) in nodes.iter().enumerate() {
        for &y in &nodes[a_pos + 1..] {
            let want = truth[x as usize] * truth[y as usize];
            if pairwise_classify(graph, x as usize, y as usize, params, grid)? != want {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Run the full algorithm with the default tessellation and traversal.
pub fn run_gbg(graph: &SpatialGraph, params: &ModelParams, epsilon: f64) -> Result<GbgResult> {
    let grid = default_grid(params)?;
    run_gbg_configured(graph, params, epsilon, &grid, None, 0)
}

/// Full algorithm with explicit grid, optional ground truth (fills
/// `t_good`), and a traversal seed that shuffles the within-component cell
/// order (the output partition is invariant to it up to a global flip).
pub fn run_gbg_configured(
    graph: &SpatialGraph,
    params: &ModelParams,
    epsilon: f64,
    grid: &GridSpec,
    truth: Option<&[i8]>,
    traversal_seed: u64,
) -> Result<GbgResult> {
    let n = graph.n_nodes();
    let cells = occupied_cells(graph, grid);
    let index: HashMap<&CellIndex, &[u32]> = cells.iter().map(|(c, v)| (c, v.as_slice())).collect();

    // Per-cell verdicts are independent and parallelize cleanly.
    let verdicts: Vec<CellVerdict> = cells
        .par_iter()
        .map(|(cell, local)| -> Result<CellVerdict> {
            let mut a_good = count_condition(params, grid, epsilon, local.len());
            let mut nodes_cache: Option<Vec<u32>> = None;
            if a_good {
                let nodes = thickening_nodes(cell, &index, params.d);
                a_good = signed_consistent(graph, &nodes, params, grid)?;
                nodes_cache = Some(nodes);
            }
            let t_good = match truth {
                None => None,
                Some(t) => {
                    let mut good = count_condition(params, grid, epsilon, local.len());
                    if good {
                        let nodes = match &nodes_cache {
                            Some(nodes) => nodes.clone(),
                            None => thickening_nodes(cell, &index, params.d),
                        };
                        good = pairs_match_truth(graph, t, &nodes, params, grid)?;
                    }
                    Some(good)
                }
            };
            Ok(CellVerdict { cell: cell.clone(), a_good, t_good, local_nodes: local.clone() })
        })
        .collect::<Result<Vec<_>>>()?;

    // Z^d-connected components of A-Good cells (sup-norm adjacency).
    let good_cells: Vec<usize> =
        verdicts.iter().enumerate().filter(|(_, v)| v.a_good).map(|(k, _)| k).collect();
    let cell_pos: HashMap<&CellIndex, usize> =
        verdicts.iter().enumerate().map(|(k, v)| (&v.cell, k)).collect();
    let mut component = vec![u32::MAX; verdicts.len()];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for &start in &good_cells {
        if component[start] != u32::MAX {
            continue;
        }
        let comp_id = components.len() as u32;
        let mut stack = vec![start];
        component[start] = comp_id;
        let mut members = Vec::new();
        while let Some(k) = stack.pop() {
            members.push(k);
            let cell = &verdicts[k].cell;
            let d = params.d;
            let mut offset = vec![-1i64; d];
            loop {
                if offset.iter().any(|&o| o != 0) {
                    let neighbor =
                        CellIndex(cell.0.iter().zip(&offset).map(|(c, o)| c + o).collect());
                    if let Some(&pos) = cell_pos.get(&neighbor) {
                        if verdicts[pos].a_good && component[pos] == u32::MAX {
                            component[pos] = comp_id;
                            stack.push(pos);
                        }
                    }
                }
                let mut axis = 0;
                while axis < d {
                    offset[axis] += 1;
                    if offset[axis] <= 1 {
                        break;
                    }
                    offset[axis] = -1;
                    axis += 1;
                }
                if axis == d {
                    break;
                }
            }
        }
        components.push(members);
    }

    // Label propagation: breadth-first over each component's cells. The
    // first cell's anchor gets +1; every other cell's anchor is classified
    // against its BFS-parent's anchor, remaining nodes against their own
    // cell's anchor. This realizes one maximal "nearby" enumeration of the
    // component's nodes.
    let mut estimates = vec![0i8; n];
    let mut component_of: Vec<Option<u32>> = vec![None; n];
    let mut visited = vec![false; verdicts.len()];
    let mut anchor_est = vec![0i8; verdicts.len()];
    for (comp_id, members) in components.iter().enumerate() {
        // Deterministic root and neighbor order; a nonzero traversal seed
        // shuffles both (the partition must be invariant up to a flip).
        let root = if traversal_seed == 0 {
            *members.iter().min_by_key(|&&k| &verdicts[k].cell).unwrap()
        } else {
            let state = mix(splitmix64(traversal_seed), comp_id as u64);
            members[(state % members.len() as u64) as usize]
        };
        let d = params.d;
        let mut offsets: Vec<Vec<i64>> = Vec::new();
        let mut offset = vec![-1i64; d];
        loop {
            if offset.iter().any(|&o| o != 0) {
                offsets.push(offset.clone());
            }
            let mut axis = 0;
            while axis < d {
                offset[axis] += 1;
                if offset[axis] <= 1 {
                    break;
                }
                offset[axis] = -1;
                axis += 1;
            }
            if axis == d {
                break;
            }
        }
        if traversal_seed != 0 {
            let mut state = mix(splitmix64(traversal_seed), 0x6f66_6673);
            for k in (1..offsets.len()).rev() {
                state = mix(state, k as u64);
                offsets.swap(k, (state % (k as u64 + 1)) as usize);
            }
        }
        let mut queue = std::collections::VecDeque::new();
        visited[root] = true;
        queue.push_back((root, None::<usize>));
        while let Some((k, parent)) = queue.pop_front() {
            let anchor = verdicts[k].local_nodes[0] as usize;
            let est = match parent {
                None => 1i8,
                Some(pk) => {
                    let parent_anchor = verdicts[pk].local_nodes[0] as usize;
                    let sign = pairwise_classify(graph, parent_anchor, anchor, params, grid)?;
                    sign * anchor_est[pk]
                }
            };
            anchor_est[k] = est;
            estimates[anchor] = est;
            for &node in &verdicts[k].local_nodes {
                let node = node as usize;
                component_of[node] = Some(comp_id as u32);
                if node != anchor {
                    let sign = pairwise_classify(graph, anchor, node, params, grid)?;
                    estimates[node] = sign * est;
                }
            }
            for off in &offsets {
                let neighbor =
                    CellIndex(verdicts[k].cell.0.iter().zip(off).map(|(c, o)| c + o).collect());
                if let Some(&pos) = cell_pos.get(&neighbor) {
                    if verdicts[pos].a_good && component[pos] == comp_id as u32 && !visited[pos] {
                        visited[pos] = true;
                        queue.push_back((pos, Some(k)));
                    }
                }
            }
        }
    }
    // Nodes in A-Bad cells default to +1.
    for est in estimates.iter_mut() {
        if *est == 0 {
            *est = 1;
        }
    }

    let largest = components.iter().max_by_key(|c| c.len());
    let stats = GbgStats {
        occupied_cells: verdicts.len(),
        a_good_cells: good_cells.len(),
        components: components.len(),
        largest_component_cells: largest.map_or(0, |c| c.len()),
        largest_component_nodes: largest
            .map_or(0, |c| c.iter().map(|&k| verdicts[k].local_nodes.len()).sum()),
    };
    Ok(GbgResult { estimates, component_of, cell_verdicts: verdicts, stats })
}
