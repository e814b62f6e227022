//! Metrics, the `Z^d` grid tessellation, and volume primitives.

use std::collections::HashSet;

use crate::rng::{mix, splitmix64, to_unit};
use crate::{Error, Result};

/// Distance convention for a window `B_n`.
///
/// The sparse regime uses plain Euclidean distance; the logarithmic regime
/// wraps `B_n` into a torus of edge length `side = n^{1/d}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Euclidean,
    Toroidal { side: f64 },
}

impl Metric {
    /// Checked distance between two points of equal dimension.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        Ok(self.dist(x, y))
    }

    /// Unchecked fast path used by samplers and classifiers.
    #[inline(always)]
    pub fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        match *self {
            Metric::Euclidean => {
                for (a, b) in x.iter().zip(y) {
                    let d = a - b;
                    s += d * d;
                }
            }
            Metric::Toroidal { side } => {
                for (a, b) in x.iter().zip(y) {
                    let d = (a - b).abs();
                    let d = d.min(side - d);
                    s += d * d;
                }
            }
        }
        s.sqrt()
    }
}

/// The tessellation of `R^d` into cubes of side `R / (4 d^{1/d})`.
///
/// Cell `z` is centered at `z * cell_side`; the side is always derived from
/// `r` so the two can never drift apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub r: f64,
    pub d: usize,
}

impl GridSpec {
    pub fn new(r: f64, d: usize) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidParams(format!(
                "tessellation scale must be positive, got {r}"
            )));
        }
        if d == 0 {
            return Err(Error::InvalidParams("dimension must be >= 1".into()));
        }
        Ok(GridSpec { r, d })
    }

    #[inline]
    pub fn cell_side(&self) -> f64 {
        self.r / (4.0 * (self.d as f64).powf(1.0 / self.d as f64))
    }

    /// Volume of one cell, `(R/4)^d / d`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.cell_side().powi(self.d as i32)
    }
}

/// Integer coordinates of a tessellation cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex(pub Vec<i64>);

/// Project a point to the cell whose center is nearest in sup-norm.
///
/// Ties go to the lexicographically smallest index, which per coordinate is
/// the lower of the two tied integers.
pub fn cell_of(grid: &GridSpec, x: &[f64]) -> CellIndex {
    let s = grid.cell_side();
    CellIndex(x.iter().map(|&xi| (xi / s - 0.5).ceil() as i64).collect())
}

/// All cells within sup-norm distance `k` of any input cell.
pub fn thickening(cells: &HashSet<CellIndex>, k: i64) -> HashSet<CellIndex> {
    assert!(k >= 0);
    let mut out = HashSet::new();
    for cell in cells {
        let d = cell.0.len();
        let mut offset = vec![-k; d];
        loop {
            let shifted: Vec<i64> = cell.0.iter().zip(&offset).map(|(c, o)| c + o).collect();
            out.insert(CellIndex(shifted));
            // odometer increment over {-k..k}^d
            let mut axis = 0;
            loop {
                if axis == d {
                    break;
                }
                offset[axis] += 1;
                if offset[axis] <= k {
                    break;
                }
                offset[axis] = -k;
                axis += 1;
            }
            if axis == d {
                break;
            }
        }
    }
    out
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    // nu_0 = 1, nu_1 = 2, nu_d = nu_{d-2} * 2 pi / d
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

/// Volume of a radius-`r` ball in `d` dimensions.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    unit_ball_volume(d) * r.powi(d as i32)
}

/// Volume of the intersection of two balls of radius `r` at center
/// distance `dist` (the lens `S_r`).
///
/// Closed form for `d <= 3`, Monte Carlo fallback otherwise.
pub fn lens_volume(d: usize, r: f64, dist: f64) -> f64 {
    lens_volume_two(d, r, r, dist)
}

/// Volume of the intersection of balls of radii `r1` and `r2` at center
/// distance `dist`. Needed for cross terms of connection functions whose
/// indicator radii differ.
pub fn lens_volume_two(d: usize, r1: f64, r2: f64, dist: f64) -> f64 {
    assert!(r1 >= 0.0 && r2 >= 0.0 && dist >= 0.0);
    if dist >= r1 + r2 {
        return 0.0;
    }
    let (rmin, rmax) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    if dist <= rmax - rmin {
        return ball_volume(d, rmin);
    }
    match d {
        1 => {
            // interval overlap
            (r1 + r2 - dist).min(2.0 * rmin)
        }
        2 => {
            let d1 = (dist * dist + r1 * r1 - r2 * r2) / (2.0 * dist);
            let d2 = dist - d1;
            let seg = |r: f64, h: f64| {
                r * r * (h / r).clamp(-1.0, 1.0).acos() - h * (r * r - h * h).max(0.0).sqrt()
            };
            seg(r1, d1) + seg(r2, d2)
        }
        3 => {
            // sum of two spherical caps
            let d1 = (dist * dist + r1 * r1 - r2 * r2) / (2.0 * dist);
            let d2 = dist - d1;
            let cap = |r: f64, h: f64| {
                // cap of height (r - h) cut at plane distance h from center
                let height = r - h;
                std::f64::consts::PI * height * height * (3.0 * r - height) / 3.0
            };
            cap(r1, d1) + cap(r2, d2)
        }
        _ => lens_volume_mc(d, r1, r2, dist),
    }
}

/// Monte Carlo lens volume: 1e5 uniform draws in the bounding box of the
/// smaller ball, sub-seed derived from the inputs.
fn lens_volume_mc(d: usize, r1: f64, r2: f64, dist: f64) -> f64 {
    // Smaller ball at the origin, larger at (dist, 0, ..); sample the
    // bounding box of the smaller ball.
    let (rmin, rmax) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    let samples = 100_000u64;
    let mut seed = splitmix64(d as u64);
    for bits in [r1.to_bits(), r2.to_bits(), dist.to_bits()] {
        seed = mix(seed, bits);
    }
    let mut hits = 0u64;
    let mut x = vec![0.0f64; d];
    for k in 0..samples {
        let mut h = mix(seed, k);
        for xi in x.iter_mut() {
            h = splitmix64(h);
            *xi = (to_unit(h) * 2.0 - 1.0) * rmin;
        }
        let mut s_near = 0.0;
        let mut s_far = 0.0;
        for (axis, &xi) in x.iter().enumerate() {
            s_near += xi * xi;
            let other = if axis == 0 { xi - dist } else { xi };
            s_far += other * other;
        }
        if s_near <= rmin * rmin && s_far <= rmax * rmax {
            hits += 1;
        }
    }
    (2.0 * rmin).powi(d as i32) * hits as f64 / samples as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn euclidean_3_4_5() {
        let m = Metric::Euclidean;
        assert!((m.distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn toroidal_wraparound() {
        let m = Metric::Toroidal { side: 10.0 };
        assert!((m.distance(&[4.5, 0.0], &[-4.5, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        let both = m.distance(&[4.5, 4.5], &[-4.5, -4.5]).unwrap();
        assert!((both - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn distance_dimension_mismatch_errors() {
        assert!(Metric::Euclidean.distance(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn cell_of_examples() {
        let grid = GridSpec::new(1.0, 2).unwrap();
        let s = grid.cell_side();
        assert_eq!(cell_of(&grid, &[0.0, 0.0]), CellIndex(vec![0, 0]));
        assert_eq!(cell_of(&grid, &[3.0 * s, 0.0]), CellIndex(vec![3, 0]));
        // boundary point equidistant to cells (0,0) and (1,0): lexicographically smallest wins
        assert_eq!(cell_of(&grid, &[s / 2.0, 0.0]), CellIndex(vec![0, 0]));
        // negative-side tie goes to the lower index as well
        assert_eq!(cell_of(&grid, &[-s / 2.0, 0.0]), CellIndex(vec![-1, 0]));
    }

    #[test]
    fn grid_cell_side_matches_r() {
        for d in 1..=3usize {
            let grid = GridSpec::new(2.5, d).unwrap();
            let back = grid.cell_side() * 4.0 * (d as f64).powf(1.0 / d as f64);
            assert!((back - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn thickening_sizes() {
        for d in 1..=3usize {
            let z = CellIndex(vec![2; d]);
            let mut set = HashSet::new();
            set.insert(z.clone());
            for k in 0..=2i64 {
                let t = thickening(&set, k);
                assert_eq!(t.len(), ((2 * k + 1) as usize).pow(d as u32));
                assert!(t.contains(&z));
            }
        }
    }

    #[test]
    fn lens_examples_d2() {
        assert!((lens_volume(2, 1.0, 0.0) - PI).abs() < 1e-12);
        assert_eq!(lens_volume(2, 1.0, 2.0), 0.0);
        assert_eq!(lens_volume(2, 1.0, 3.0), 0.0);
        let expected = 2.0 * PI / 3.0 - 3.0f64.sqrt() / 2.0;
        assert!((lens_volume(2, 1.0, 1.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-12);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    /// Monte Carlo cross-check of the closed-form lens volumes, including
    /// unequal radii.
    #[test]
    fn lens_closed_form_matches_monte_carlo() {
        let cases = [
            (1usize, 1.0, 1.0, 0.7),
            (2, 1.0, 1.0, 1.0),
            (2, 1.0, 0.5, 0.75),
            (2, 1.0, 0.5, 1.2),
            (3, 1.0, 1.0, 0.9),
            (3, 0.8, 0.5, 0.6),
        ];
        for (d, r1, r2, dist) in cases {
            let exact = lens_volume_two(d, r1, r2, dist);
            let mc = super::lens_volume_mc(d, r1, r2, dist);
            let scale = ball_volume(d, r1.min(r2));
            assert!(
                (exact - mc).abs() < 0.02 * scale,
                "d={d} r1={r1} r2={r2} dist={dist}: exact {exact} vs mc {mc}"
            );
        }
    }

    /// Above dimension three the public entry point falls back to Monte
    /// Carlo; the full-overlap and disjoint anchors stay exact.
    #[test]
    fn lens_monte_carlo_fallback_in_dimension_four() {
        let full = lens_volume(4, 1.0, 0.0);
        assert!((full - unit_ball_volume(4)).abs() < 0.02 * unit_ball_volume(4));
        assert_eq!(lens_volume(4, 1.0, 2.5), 0.0);
        let half = lens_volume(4, 1.0, 1.0);
        assert!(half > 0.0 && half < full);
    }

    proptest! {
        #[test]
        fn lens_monotone_in_distance(d in 1usize..=3, r in 0.2f64..3.0, steps in 2usize..20) {
            let mut prev = f64::INFINITY;
            for k in 0..steps {
                let dist = 2.0 * r * k as f64 / (steps - 1) as f64;
                let v = lens_volume(d, r, dist);
                prop_assert!(v <= prev + 1e-12);
                prev = v;
            }
            prop_assert!((lens_volume(d, r, 0.0) - ball_volume(d, r)).abs() < 1e-9);
            prop_assert!(lens_volume(d, r, 2.0 * r) == 0.0);
        }

        #[test]
        fn cell_round_trip(d in 1usize..=3, r in 0.3f64..4.0, coords in proptest::collection::vec(-50i64..50, 1..=3)) {
            let grid = GridSpec::new(r, d).unwrap();
            let z: Vec<i64> = coords.into_iter().take(d).chain(std::iter::repeat(0)).take(d).collect();
            let center: Vec<f64> = z.iter().map(|&c| c as f64 * grid.cell_side()).collect();
            prop_assert_eq!(cell_of(&grid, &center), CellIndex(z));
        }

        #[test]
        fn triangle_inequality(
            x in proptest::collection::vec(-4.9f64..4.9, 2),
            y in proptest::collection::vec(-4.9f64..4.9, 2),
            z in proptest::collection::vec(-4.9f64..4.9, 2),
        ) {
            for m in [Metric::Euclidean, Metric::Toroidal { side: 10.0 }] {
                let xy = m.dist(&x, &y);
                let yz = m.dist(&y, &z);
                let xz = m.dist(&x, &z);
                prop_assert!(xz <= xy + yz + 1e-9);
                prop_assert!(m.dist(&x, &x) == 0.0);
                prop_assert!((xy - m.dist(&y, &x)).abs() < 1e-12);
            }
        }
    }
}
