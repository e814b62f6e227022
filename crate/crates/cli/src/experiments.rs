//! Experiment drivers: Cartesian sweeps with per-trial sub-seeds, ordered
//! reduction, and CSV/plot-data emission.
//!
//! Every metric is a pure function of `(config, seed)`; wall times go to the
//! run log, never into the CSV, so reruns are byte-identical.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use geograph::eval::{
    detect_partitions, flip_bad_count, gap_function, info_flow_experiment, is_flip_bad, overlap,
    LikelihoodContext,
};
use geograph::gbg::{default_grid, run_gbg_configured};
use geograph::geom::GridSpec;
use geograph::model::{
    sample_coupled, sample_coupled_with_planted, sample_null, sample_points, Planted, Regime,
};
use geograph::moments::{
    exact_recovery_threshold, lambda_lower, lambda_upper_bound, triangle_deltas, HSpec,
};
use geograph::percolation::theta_sweep_coupled;
use geograph::rng::sub_seed;

use crate::chain::chain_classify;
use crate::config::{Experiment, ExperimentConfig};

/// One measured outcome at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: &'static str,
    pub metric: String,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub d: usize,
    pub n: f64,
    pub regime: &'static str,
    pub epsilon: f64,
    pub point: usize,
    pub value: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
    /// Logged to stderr only; excluded from the CSV so reruns are
    /// byte-identical.
    pub wall_ms: u128,
}

pub const CSV_HEADER: &str =
    "experiment,metric,lambda,a,b,r_in,r_out,d,n,regime,epsilon,point,value,stderr,trials,seed";

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.metric,
            r.lambda,
            r.a,
            r.b,
            r.r_in,
            r.r_out,
            r.d,
            r.n,
            r.regime,
            r.epsilon,
            r.point,
            r.value,
            r.stderr,
            r.trials,
            r.seed
        );
    }
    out
}

/// Companion plot data: `metric x y yerr` with the intensity as x-axis.
pub fn rows_to_plot_data(rows: &[ResultRow]) -> String {
    let mut out = String::from("# metric x(lambda) y yerr\n");
    for r in rows {
        let _ = writeln!(out, "{} {} {} {}", r.metric, r.lambda, r.value, r.stderr);
    }
    out
}

struct PointSummary {
    metric: &'static str,
    value: f64,
    stderr: f64,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn regime_name(regime: Regime) -> &'static str {
    match regime {
        Regime::SparseEuclidean => "sparse_euclidean",
        Regime::LogTorus => "log_torus",
    }
}

/// Run the configured experiment and return its rows (also the CSV payload).
///
/// Sweep points run sequentially; trials within a point run on the rayon
/// pool with per-trial sub-seeds and an ordered reduction, so worker count
/// never changes the output.
pub fn run_experiment(config: &ExperimentConfig) -> geograph::Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    let experiment = config.experiment;
    let mut point = 0usize;
    for (n_idx, &n) in config.n.iter().enumerate() {
        if experiment == Experiment::PercolationSweep {
            let start = Instant::now();
            rows.extend(percolation_point(config, n, n_idx)?);
            log_wall(config, point, start);
            point += 1;
            continue;
        }
        for (l_idx, &lambda) in config.lambda.iter().enumerate() {
            let start = Instant::now();
            let summaries: Vec<PointSummary> = match experiment {
                Experiment::WeakRecoverySweep => weak_recovery_point(config, lambda, n, point)?,
                Experiment::ExactRecoverySweep => {
                    exact_recovery_point(config, lambda, n, point, true)?
                }
                Experiment::FlipBad => exact_recovery_point(config, lambda, n, point, false)?,
                Experiment::Distinguish => distinguish_point(config, lambda, n, point)?,
                Experiment::InfoFlow => infoflow_point(config, lambda, n, point)?,
                Experiment::Thresholds => thresholds_point(config, lambda, n)?,
                Experiment::PercolationSweep => unreachable!(),
            };
            let wall = start.elapsed().as_millis();
            for s in summaries {
                rows.push(ResultRow {
                    experiment: experiment.name(),
                    metric: s.metric.to_string(),
                    lambda,
                    a: config.a,
                    b: config.b,
                    r_in: config.r_in,
                    r_out: config.r_out,
                    d: config.d,
                    n,
                    regime: regime_name(config.regime),
                    epsilon: config.epsilon,
                    point,
                    value: s.value,
                    stderr: s.stderr,
                    trials: config.trials,
                    seed: config.seed,
                    wall_ms: wall,
                });
            }
            log_wall(config, point, start);
            let _ = l_idx;
            point += 1;
        }
    }
    Ok(rows)
}

fn log_wall(config: &ExperimentConfig, point: usize, start: Instant) {
    eprintln!(
        "[{}] point {} done in {} ms",
        config.experiment.name(),
        point,
        start.elapsed().as_millis()
    );
}

/// GBG plus the certain-pair chaining baseline on coupled samples.
fn weak_recovery_point(
    config: &ExperimentConfig,
    lambda: f64,
    n: f64,
    point: usize,
) -> geograph::Result<Vec<PointSummary>> {
    let params = config.model_params(lambda, n)?;
    let grid = grid_for(config, &params)?;
    let per_trial: Vec<(f64, f64, f64)> = (0..config.trials)
        .into_par_iter()
        .map(|t| -> geograph::Result<(f64, f64, f64)> {
            let seed = sub_seed(config.seed, "weak_recovery_sweep", &[point as u64, t as u64]);
            let graph = sample_coupled(&params, seed);
            let truth = graph.points.labels().to_vec();
            let result = run_gbg_configured(&graph, &params, config.epsilon, &grid, None, 0)?;
            let gbg_overlap = overlap(&result.estimates, &truth)?;
            let chain = chain_classify(&graph, &params);
            let chain_overlap = overlap(&chain, &truth)?;
            let a_good_fraction = if result.stats.occupied_cells == 0 {
                0.0
            } else {
                result.stats.a_good_cells as f64 / result.stats.occupied_cells as f64
            };
            Ok((gbg_overlap, chain_overlap, a_good_fraction))
        })
        .collect::<geograph::Result<_>>()?;
    let gbg: Vec<f64> = per_trial.iter().map(|r| r.0).collect();
    let chain: Vec<f64> = per_trial.iter().map(|r| r.1).collect();
    let agood: Vec<f64> = per_trial.iter().map(|r| r.2).collect();
    let (g_mean, g_se) = mean_se(&gbg);
    let (c_mean, c_se) = mean_se(&chain);
    let (a_mean, a_se) = mean_se(&agood);
    Ok(vec![
        PointSummary { metric: "gbg_overlap", value: g_mean, stderr: g_se },
        PointSummary { metric: "chain_overlap", value: c_mean, stderr: c_se },
        PointSummary { metric: "a_good_fraction", value: a_mean, stderr: a_se },
    ])
}

/// Log-regime sweep: GBG exactness, the single-flip ML certificate, Flip-Bad
/// counts and their Campbell estimate.
fn exact_recovery_point(
    config: &ExperimentConfig,
    lambda: f64,
    n: f64,
    point: usize,
    with_gbg: bool,
) -> geograph::Result<Vec<PointSummary>> {
    let params = config.model_params(lambda, n)?;
    let grid = grid_for(config, &params)?;
    let per_trial: Vec<(f64, f64, f64, f64)> = (0..config.trials)
        .into_par_iter()
        .map(|t| -> geograph::Result<(f64, f64, f64, f64)> {
            let seed = sub_seed(config.seed, "exact_recovery_sweep", &[point as u64, t as u64]);
            let graph = sample_coupled(&params, seed);
            let truth = graph.points.labels().to_vec();
            let ctx = LikelihoodContext::new(&graph, truth.clone(), &params)?;
            let flip_bad = flip_bad_count(&ctx)? as f64;
            let cert = if flip_bad == 0.0 { 1.0 } else { 0.0 };
            let (gbg_overlap, gbg_exact) = if with_gbg {
                let result = run_gbg_configured(&graph, &params, config.epsilon, &grid, None, 0)?;
                let ov = overlap(&result.estimates, &truth)?;
                (ov, if ov == 1.0 { 1.0 } else { 0.0 })
            } else {
                (0.0, 0.0)
            };
            Ok((flip_bad, cert, gbg_overlap, gbg_exact))
        })
        .collect::<geograph::Result<_>>()?;
    let flips: Vec<f64> = per_trial.iter().map(|r| r.0).collect();
    let certs: Vec<f64> = per_trial.iter().map(|r| r.1).collect();
    let (f_mean, f_se) = mean_se(&flips);
    let (cert_mean, cert_se) = mean_se(&certs);

    // Campbell estimate lambda n P(center Flip-Bad) from local Palm samples.
    let palm_trials = 20_000usize;
    let hits: usize = (0..palm_trials)
        .into_par_iter()
        .map(|t| -> geograph::Result<usize> {
            let seed = sub_seed(config.seed, "campbell", &[point as u64, t as u64]);
            Ok(palm_center_flip_bad(&params, seed)? as usize)
        })
        .sum::<geograph::Result<usize>>()?;
    let p_hat = hits as f64 / palm_trials as f64;
    let campbell = lambda * n * p_hat;
    let campbell_se = lambda * n * (p_hat * (1.0 - p_hat) / palm_trials as f64).sqrt();

    let bracket = exact_recovery_threshold(lambda, config.a, config.b, config.d)?;
    let mut out = vec![
        PointSummary { metric: "flip_bad_mean", value: f_mean, stderr: f_se },
        PointSummary { metric: "ml_cert_fraction", value: cert_mean, stderr: cert_se },
        PointSummary { metric: "campbell_flip_bad", value: campbell, stderr: campbell_se },
        PointSummary { metric: "er_bracket", value: bracket, stderr: 0.0 },
    ];
    if with_gbg {
        let overlaps: Vec<f64> = per_trial.iter().map(|r| r.2).collect();
        let exacts: Vec<f64> = per_trial.iter().map(|r| r.3).collect();
        let (o_mean, o_se) = mean_se(&overlaps);
        let (e_mean, e_se) = mean_se(&exacts);
        out.push(PointSummary { metric: "gbg_overlap", value: o_mean, stderr: o_se });
        out.push(PointSummary { metric: "gbg_exact_fraction", value: e_mean, stderr: e_se });
    }
    Ok(out)
}

/// Whether the planted center of a fresh Palm sample is Flip-Bad. Only the
/// ball of one connection radius around the center matters, so the sample is
/// restricted to a window of twice that radius (the torus side exceeds it).
fn palm_center_flip_bad(
    params: &geograph::model::ModelParams,
    seed: u64,
) -> geograph::Result<bool> {
    let support = params.interaction_range();
    let mut local = params.clone();
    local.regime = Regime::SparseEuclidean;
    local.n = (2.0 * support + 0.1).powi(params.d as i32);
    local.validate()?;
    let (graph, ids) =
        sample_coupled_with_planted(&local, seed, &[Planted::at(vec![0.0; params.d])]);
    let ctx = LikelihoodContext::new(&graph, graph.points.labels().to_vec(), &local)?;
    is_flip_bad(&ctx, ids[0])
}

fn percolation_point(
    config: &ExperimentConfig,
    n: f64,
    n_idx: usize,
) -> geograph::Result<Vec<ResultRow>> {
    let params = config.model_params(config.lambda[0], n)?;
    let gap = gap_function(&params)?;
    let support = gap.support();
    let window_side = config.window * support.max(1e-9);
    let results = theta_sweep_coupled(
        &config.lambda,
        &gap,
        config.d,
        window_side,
        support,
        config.trials,
        sub_seed(config.seed, "percolation_sweep", &[n_idx as u64]),
    )?;
    Ok(config
        .lambda
        .iter()
        .zip(results)
        .enumerate()
        .map(|(k, (&lambda, (theta, se)))| ResultRow {
            experiment: "percolation_sweep",
            metric: "theta".into(),
            lambda,
            a: config.a,
            b: config.b,
            r_in: config.r_in,
            r_out: config.r_out,
            d: config.d,
            n: window_side.powi(config.d as i32),
            regime: regime_name(config.regime),
            epsilon: config.epsilon,
            point: k,
            value: theta,
            stderr: se,
            trials: config.trials,
            seed: config.seed,
            wall_ms: 0,
        })
        .collect())
}

/// Planted-vs-null labeled trials decided by the triangle statistic.
fn distinguish_point(
    config: &ExperimentConfig,
    lambda: f64,
    n: f64,
    point: usize,
) -> geograph::Result<Vec<PointSummary>> {
    let params = config.model_params(lambda, n)?;
    let (dg, dh) = triangle_deltas(&params.f_in, &params.f_out, lambda, config.d, HSpec::Default);
    let l_radius = config.l_radius.unwrap_or(params.window_side() / 2.0);
    let half = |level: f64| level / 2.0;
    let null_g = geograph::model::ConnectionFunction::RadialTable {
        breakpoints: merged_breakpoints(&params),
        values: merged_breakpoints(&params)
            .iter()
            .scan(0.0, |prev, &e| {
                let mid = 0.5 * (*prev + e);
                *prev = e;
                Some(half(params.f_in.value(mid) + params.f_out.value(mid)))
            })
            .collect(),
    };
    let per_trial: Vec<(f64, f64)> = (0..config.trials)
        .into_par_iter()
        .map(|t| -> geograph::Result<(f64, f64)> {
            let seed = sub_seed(config.seed, "distinguish", &[point as u64, t as u64]);
            // even trials planted, odd trials null
            let planted_truth = t % 2 == 0;
            let graph = if planted_truth {
                sample_coupled(&params, seed)
            } else {
                let pts = sample_points(&params, seed);
                sample_null(
                    pts,
                    &null_g,
                    params.metric(),
                    params.window_side(),
                    sub_seed(seed, "null", &[]),
                )?
            };
            let report = match detect_partitions(&graph, l_radius, HSpec::Default, &params, dg, dh)
            {
                Ok(r) => r,
                Err(geograph::Error::InsufficientData(_)) => {
                    return Ok((0.0, f64::NAN));
                }
                Err(e) => return Err(e),
            };
            let correct = report.planted == planted_truth;
            Ok((if correct { 1.0 } else { 0.0 }, report.statistic))
        })
        .collect::<geograph::Result<_>>()?;
    let correct: Vec<f64> = per_trial.iter().map(|r| r.0).collect();
    let (acc, acc_se) = mean_se(&correct);
    let planted_stats: Vec<f64> =
        per_trial.iter().enumerate().filter(|(t, _)| t % 2 == 0).map(|(_, r)| r.1).collect();
    let null_stats: Vec<f64> =
        per_trial.iter().enumerate().filter(|(t, _)| t % 2 == 1).map(|(_, r)| r.1).collect();
    let (ps, ps_se) = mean_se(&planted_stats);
    let (ns, ns_se) = mean_se(&null_stats);
    Ok(vec![
        PointSummary { metric: "accuracy", value: acc, stderr: acc_se },
        PointSummary { metric: "stat_planted", value: ps, stderr: ps_se },
        PointSummary { metric: "stat_null", value: ns, stderr: ns_se },
        PointSummary { metric: "delta_g_ref", value: dg, stderr: 0.0 },
        PointSummary { metric: "delta_h_ref", value: dh, stderr: 0.0 },
    ])
}

fn merged_breakpoints(params: &geograph::model::ModelParams) -> Vec<f64> {
    use geograph::model::ConnectionFunction as CF;
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
    edges
}

fn infoflow_point(
    config: &ExperimentConfig,
    lambda: f64,
    n: f64,
    point: usize,
) -> geograph::Result<Vec<PointSummary>> {
    let params = config.model_params(lambda, n)?;
    let report = info_flow_experiment(
        &params,
        config.reveal_r,
        config.trials,
        sub_seed(config.seed, "infoflow", &[point as u64]),
    )?;
    Ok(vec![
        PointSummary { metric: "success", value: report.success, stderr: report.success_se },
        PointSummary { metric: "reach", value: report.reach, stderr: 0.0 },
        PointSummary { metric: "theta_hat", value: report.theta_hat, stderr: report.theta_se },
        PointSummary {
            metric: "bound_ok",
            value: if report.bound_ok { 1.0 } else { 0.0 },
            stderr: 0.0,
        },
    ])
}

fn thresholds_point(
    config: &ExperimentConfig,
    lambda: f64,
    n: f64,
) -> geograph::Result<Vec<PointSummary>> {
    let params = config.model_params(lambda, n)?;
    let report =
        lambda_upper_bound(&params.f_in, &params.f_out, config.d, config.epsilon, config.eta)?;
    let mut out = vec![
        PointSummary {
            metric: "lambda_lower",
            value: lambda_lower(&params.f_in, &params.f_out, config.d),
            stderr: 0.0,
        },
        PointSummary { metric: "lambda_upper", value: report.lambda_upper, stderr: 0.0 },
        PointSummary {
            metric: "peierls_lhs_at_upper",
            value: report.peierls_lhs_at_upper,
            stderr: 0.0,
        },
        PointSummary { metric: "chernoff_c", value: report.chernoff_c, stderr: 0.0 },
    ];
    if config.b < config.a {
        out.push(PointSummary {
            metric: "er_bracket",
            value: exact_recovery_threshold(lambda, config.a, config.b, config.d)?,
            stderr: 0.0,
        });
    }
    Ok(out)
}

fn grid_for(
    config: &ExperimentConfig,
    params: &geograph::model::ModelParams,
) -> geograph::Result<GridSpec> {
    match config.grid_r {
        Some(r) => GridSpec::new(r, config.d),
        None => default_grid(params),
    }
}

/// Key=value rendering of threshold rows (the `thresholds` subcommand's
/// default output).
pub fn thresholds_to_text(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    for row in rows {
        let _ = writeln!(out, "{}={}", row.metric, row.value);
    }
    out
}

/// Render one sampled graph to the text format (the `generate` subcommand).
pub fn generate_graph(config: &ExperimentConfig) -> geograph::Result<(String, f64)> {
    let params = config.model_params(config.lambda[0], config.n[0])?;
    let graph = sample_coupled(&params, sub_seed(config.seed, "generate", &[]));
    let mut bytes = Vec::new();
    geograph::model::write_graph(&graph, params.n, &mut bytes)?;
    Ok((String::from_utf8(bytes).expect("ascii format"), params.n))
}

/// Run GBG on a graph file (or a fresh sample) and render per-node estimates
/// plus a stats footer (the `gbg` subcommand).
pub fn run_gbg_to_text(
    config: &ExperimentConfig,
    graph_file: Option<&std::path::Path>,
) -> geograph::Result<String> {
    let params = config.model_params(config.lambda[0], config.n[0])?;
    let graph = match graph_file {
        Some(path) => {
            let file = std::fs::File::open(path)?;
            let (graph, n) = geograph::model::read_graph(file)?;
            if (n - params.n).abs() > 1e-9 * params.n.max(1.0) {
                return Err(geograph::Error::InvalidParams(format!(
                    "graph file has n = {n}, config says {}",
                    params.n
                )));
            }
            if graph.metric != params.metric() {
                return Err(geograph::Error::InvalidParams(
                    "graph file metric disagrees with the configured regime".into(),
                ));
            }
            graph
        }
        None => sample_coupled(&params, sub_seed(config.seed, "gbg", &[])),
    };
    let grid = grid_for(config, &params)?;
    let truth = graph.points.labels().to_vec();
    let result = run_gbg_configured(&graph, &params, config.epsilon, &grid, Some(&truth), 0)?;
    let mut out = String::new();
    for (i, est) in result.estimates.iter().enumerate() {
        let _ = writeln!(out, "{} {}", i, est);
    }
    let ov = overlap(&result.estimates, &truth)?;
    let _ = writeln!(
        out,
        "# stats occupied_cells={} a_good_cells={} components={} largest_component_cells={} largest_component_nodes={} overlap={}",
        result.stats.occupied_cells,
        result.stats.a_good_cells,
        result.stats.components,
        result.stats.largest_component_cells,
        result.stats.largest_component_nodes,
        ov
    );
    Ok(out)
}
