//! Analytic quantities of the model: common-neighbor moments, recovery
//! thresholds, Chernoff/Peierls bounds, and triangle profiles.

use crate::geom::{ball_volume, lens_volume_two, unit_ball_volume};
use crate::model::{ConnectionFunction, ModelParams};
use crate::rng::{hash_str, mix, splitmix64, to_unit};
use crate::{Error, Result};

/// The pair `(M_in, M_out)` of lens integrals at a given center distance.
///
/// `M_in = int_{S_R} (f_in f_in + f_out f_out)`,
/// `M_out = int_{S_R} (f_in f_out + f_out f_in)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPair {
    pub m_in: f64,
    pub m_out: f64,
}

/// Summary emitted by the `thresholds` calculators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdReport {
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub peierls_lhs_at_upper: f64,
    pub chernoff_c: f64,
}

/// `h(t) = (1 + t) log(1 + t) - t`, the Poisson Chernoff exponent.
pub fn h_poisson(t: f64) -> f64 {
    (1.0 + t) * (1.0 + t).ln() - t
}

/// Evaluate `M_in`/`M_out` at center distance `dist` with lens radius `r`.
///
/// Both connection functions decompose exactly into indicator pieces, so the
/// integrals reduce to sums of two-ball lens volumes (pieces are capped at
/// the lens radius, where the distance filter of the common-neighbor count
/// truncates them anyway).
pub fn eval_m(
    f_in: &ConnectionFunction,
    f_out: &ConnectionFunction,
    d: usize,
    r: f64,
    dist: f64,
) -> MomentPair {
    if dist >= 2.0 * r {
        return MomentPair { m_in: 0.0, m_out: 0.0 };
    }
    let cross = |f: &ConnectionFunction, g: &ConnectionFunction| -> f64 {
        let mut total = 0.0;
        for (lf, rf) in f.indicator_pieces() {
            for (lg, rg) in g.indicator_pieces() {
                total += lf * lg * lens_volume_two(d, rf.min(r), rg.min(r), dist);
            }
        }
        total
    };
    MomentPair { m_in: cross(f_in, f_in) + cross(f_out, f_out), m_out: 2.0 * cross(f_in, f_out) }
}

/// True Palm means of the common-neighbor count for a same-label and an
/// opposite-label pair at distance `dist`: `(lambda/2) M_in` and
/// `(lambda/2) M_out`.
///
/// The factor `lambda/2` (not `lambda`) reflects that a surrounding point
/// matches each fixed label with probability one half; the simulation
/// oracles in the test suite pin this down.
pub fn common_neighbor_means(params: &ModelParams, dist: f64) -> (f64, f64) {
    let r = params.f_in.support();
    let m = eval_m(&params.f_in, &params.f_out, params.d, r, dist);
    (params.lambda / 2.0 * m.m_in, params.lambda / 2.0 * m.m_out)
}

/// The weak-recovery lower bound `(int (f_in - f_out))^{-1}`; `+inf` when
/// the functions agree almost everywhere.
pub fn lambda_lower(f_in: &ConnectionFunction, f_out: &ConnectionFunction, d: usize) -> f64 {
    let gap = f_in.integral(d) - f_out.integral(d);
    if gap <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / gap
    }
}

/// CH-divergence between nonnegative vectors under the uniform two-hypothesis
/// prior: `max_{t in [0,1]} (1/2) sum_x (t mu + (1-t) nu - mu^t nu^(1-t))`.
///
/// For the symmetric vectors `(a, b, 1-a, 1-b)` vs `(b, a, 1-b, 1-a)` this
/// evaluates to `1 - sqrt(ab) - sqrt((1-a)(1-b))`, the bracket in the
/// exact-recovery threshold. The maximizer is found by golden-section search
/// on the concave objective to `1e-12` in `t`.
pub fn ch_divergence(mu: &[f64], nu: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::LengthMismatch { left: mu.len(), right: nu.len() });
    }
    if mu.iter().chain(nu).any(|&v| v < 0.0) {
        return Err(Error::InvalidParams("CH-divergence needs nonnegative components".into()));
    }
    let objective = |t: f64| -> f64 {
        let mut s = 0.0;
        for (&m, &v) in mu.iter().zip(nu) {
            let geo = if m == 0.0 || v == 0.0 { 0.0 } else { m.powf(t) * v.powf(1.0 - t) };
            s += t * m + (1.0 - t) * v - geo;
        }
        0.5 * s
    };
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    while hi - lo > 1e-12 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = objective(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = objective(x1);
        }
    }
    Ok(objective(0.5 * (lo + hi)).max(0.0))
}

/// The exact-recovery bracket `lambda nu_d (1 - sqrt(ab) - sqrt((1-a)(1-b)))`.
/// Exact recovery is unsolvable when this is below 1.
pub fn exact_recovery_threshold(lambda: f64, a: f64, b: f64, d: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || b > a {
        return Err(Error::InvalidParams(format!("need 0 <= b <= a <= 1, got a={a}, b={b}")));
    }
    let scale = lambda * unit_ball_volume(d);
    let mu = [a, b, 1.0 - a, 1.0 - b];
    let nu = [b, a, 1.0 - b, 1.0 - a];
    Ok(scale * ch_divergence(&mu, &nu)?)
}

/// Closed-form tail of the Peierls series: `(1/3) sum_{n >= M} n (3 q^{1/M})^n`.
/// Returns `+inf` once `3 q^{1/M} >= 1`.
pub fn peierls_lhs(q: f64, m: u32) -> f64 {
    assert!(m >= 1, "Peierls dependence range must be >= 1");
    assert!((0.0..=1.0).contains(&q), "q must be a probability");
    if q == 0.0 {
        return 0.0;
    }
    let x = 3.0 * q.powf(1.0 / m as f64);
    if x >= 1.0 {
        return f64::INFINITY;
    }
    let mf = m as f64;
    x.powi(m as i32) * (mf - (mf - 1.0) * x) / (3.0 * (1.0 - x) * (1.0 - x))
}

/// The T-Good failure probability bound at intensity `lambda`:
/// `exp(-lambda (R/4)^d (1/d) h(eps)) + lambda^2 (3R/4)^d (1/d) exp(-c lambda)`.
pub fn t_bad_probability_bound(lambda: f64, d: usize, r: f64, epsilon: f64, c: f64) -> f64 {
    let cell_vol = (r / 4.0).powi(d as i32) / d as f64;
    let thick_vol = (3.0 * r / 4.0).powi(d as i32) / d as f64;
    (-lambda * cell_vol * h_poisson(epsilon)).exp()
        + lambda * lambda * thick_vol * (-c * lambda).exp()
}

/// The pairwise-misclassification Chernoff constant: numeric infimum over 64
/// equally spaced distances in `[0, 3R/4]` of
/// `(M_out 1{M_out > 0} + M_in 1{M_out = 0}) h((M_in - M_out) / (2 M_in))`.
pub fn chernoff_c(f_in: &ConnectionFunction, f_out: &ConnectionFunction, d: usize, r: f64) -> f64 {
    let mut inf = f64::INFINITY;
    for k in 0..64 {
        let dist = 0.75 * r * k as f64 / 63.0;
        let m = eval_m(f_in, f_out, d, r, dist);
        if m.m_in <= 0.0 {
            continue;
        }
        let base = if m.m_out > 0.0 { m.m_out } else { m.m_in };
        let val = base * h_poisson((m.m_in - m.m_out) / (2.0 * m.m_in));
        inf = inf.min(val);
    }
    if inf.is_finite() {
        inf
    } else {
        0.0
    }
}

/// Smallest intensity on a geometric grid (factor 1.01) at which the Peierls
/// left-hand side drops to `1/2 - eta`; `+inf` if none below the cap.
///
/// `M = ceil(12 d^{1/d})` is the dependence range of the T-Good field.
pub fn lambda_upper_bound(
    f_in: &ConnectionFunction,
    f_out: &ConnectionFunction,
    d: usize,
    epsilon: f64,
    eta: f64,
) -> Result<ThresholdReport> {
    if !(0.0 < epsilon && epsilon < 0.5) || !(0.0 < eta && eta < 0.5) {
        return Err(Error::InvalidParams("epsilon and eta must lie in (0, 1/2)".into()));
    }
    let r = f_in.support();
    if r <= 0.0 {
        return Err(Error::InvalidParams("f_in must have positive support".into()));
    }
    let c = chernoff_c(f_in, f_out, d, r);
    let m = (12.0 * (d as f64).powf(1.0 / d as f64)).ceil() as u32;
    let target = 0.5 - eta;
    let cap = 1e9;
    let mut lambda = 0.01;
    let mut report = ThresholdReport {
        lambda_lower: lambda_lower(f_in, f_out, d),
        lambda_upper: f64::INFINITY,
        peierls_lhs_at_upper: f64::INFINITY,
        chernoff_c: c,
    };
    if c <= 0.0 {
        return Ok(report);
    }
    while lambda < cap {
        let q = t_bad_probability_bound(lambda, d, r, epsilon, c).min(1.0);
        let lhs = peierls_lhs(q, m);
        if lhs <= target {
            report.lambda_upper = lambda;
            report.peierls_lhs_at_upper = lhs;
            return Ok(report);
        }
        lambda *= 1.01;
    }
    Ok(report)
}

/// Specification of the triangle test function `h(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HSpec {
    /// `1{|x| <= R} 1{|y| <= R}` restricted to triangles whose three legs all
    /// lie where `f_in > f_out`.
    Default,
    /// `1{|x| <= r1} 1{|y| <= r2} 1{|x - y| <= r3}`.
    RadialProduct { r1: f64, r2: f64, r3: f64 },
}

impl HSpec {
    /// Evaluate `h` for legs of lengths `|x|`, `|y|`, `|x-y|`.
    pub fn eval(
        &self,
        f_in: &ConnectionFunction,
        f_out: &ConnectionFunction,
        r: f64,
        leg_x: f64,
        leg_y: f64,
        leg_xy: f64,
    ) -> f64 {
        match *self {
            HSpec::Default => {
                let gap = |t: f64| f_in.value(t) > f_out.value(t);
                if leg_x <= r && leg_y <= r && gap(leg_x) && gap(leg_y) && gap(leg_xy) {
                    1.0
                } else {
                    0.0
                }
            }
            HSpec::RadialProduct { r1, r2, r3 } => {
                if leg_x <= r1 && leg_y <= r2 && leg_xy <= r3 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Expected `h`-weighted triangle profiles `(Delta_G, Delta_H)` at a typical
/// node, for the planted model and the equal-degree null
/// `g = (f_in + f_out)/2`. Monte Carlo with 2e6 deterministic samples.
///
/// The sum runs over ordered neighbor pairs, matching the estimator in the
/// distinguishability test.
pub fn triangle_deltas(
    f_in: &ConnectionFunction,
    f_out: &ConnectionFunction,
    lambda: f64,
    d: usize,
    h_spec: HSpec,
) -> (f64, f64) {
    let r = f_in.support();
    let samples = 2_000_000u64;
    let mut seed = splitmix64(hash_str("triangle_deltas"));
    for bits in [lambda.to_bits(), r.to_bits(), d as u64] {
        seed = mix(seed, bits);
    }
    // Integration domain: x, y uniform in the ball of radius `cap` around the
    // origin; h vanishes outside.
    let cap = match h_spec {
        HSpec::Default => r,
        HSpec::RadialProduct { r1, r2, .. } => r1.max(r2),
    };
    let vol = ball_volume(d, cap);
    let mut sum_g = 0.0;
    let mut sum_h = 0.0;
    let mut x = vec![0.0f64; d];
    let mut y = vec![0.0f64; d];
    let mut state = seed;
    for _ in 0..samples {
        // rejection-sample two points in the ball
        for point in [&mut x, &mut y] {
            loop {
                let mut norm2 = 0.0;
                for c in point.iter_mut() {
                    state = splitmix64(state);
                    *c = (to_unit(state) * 2.0 - 1.0) * cap;
                    norm2 += *c * *c;
                }
                if norm2 <= cap * cap {
                    break;
                }
            }
        }
        let leg_x = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let leg_y = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let leg_xy = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let h = h_spec.eval(f_in, f_out, r, leg_x, leg_y, leg_xy);
        if h == 0.0 {
            continue;
        }
        let fi_x = f_in.value(leg_x);
        let fo_x = f_out.value(leg_x);
        let fi_y = f_in.value(leg_y);
        let fo_y = f_out.value(leg_y);
        let fi_xy = f_in.value(leg_xy);
        let fo_xy = f_out.value(leg_xy);
        sum_g += h
            * (fi_xy * (fi_x * fi_y + fo_x * fo_y) / 4.0
                + fo_xy * (fi_x * fo_y + fo_x * fi_y) / 4.0);
        sum_h += h * ((fi_x + fo_x) / 2.0) * ((fi_y + fo_y) / 2.0) * ((fi_xy + fo_xy) / 2.0);
    }
    let scale = lambda * lambda * vol * vol / samples as f64;
    (scale * sum_g, scale * sum_h)
}
