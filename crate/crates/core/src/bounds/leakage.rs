//! The leakage norm g_p(θ) = ‖α − θβ‖_p and its minimisation over θ.

use serde::{Deserialize, Serialize};

use super::NormOrder;
use crate::covariance::RegressionVectors;
use crate::error::{Error, Result};

/// Minimiser set of g_p: a point for strictly convex norms, possibly an
/// interval for p ∈ {1, ∞}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageMinimum {
    pub theta_check: [f64; 2],
    pub tau_check: f64,
}

/// ‖α − θβ‖_p.
pub fn leakage_norm(theta: f64, vectors: &RegressionVectors, p: NormOrder) -> f64 {
    let residuals = vectors.alpha.iter().zip(vectors.beta.iter()).map(|(&a, &b)| a - theta * b);
    lp_norm(residuals, p)
}

pub(crate) fn lp_norm(values: impl Iterator<Item = f64> + Clone, p: NormOrder) -> f64 {
    match p {
        NormOrder::Infinity => values.fold(0.0_f64, |m, v| m.max(v.abs())),
        NormOrder::Finite(1.0) => values.map(f64::abs).sum(),
        NormOrder::Finite(2.0) => {
            let scale = values.clone().fold(0.0_f64, |m, v: f64| m.max(v.abs()));
            if scale == 0.0 {
                return 0.0;
            }
            scale * values.map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
        }
        NormOrder::Finite(q) => {
            let scale = values.clone().fold(0.0_f64, |m, v: f64| m.max(v.abs()));
            if scale == 0.0 {
                return 0.0;
            }
            scale * values.map(|v| (v.abs() / scale).powf(q)).sum::<f64>().powf(1.0 / q)
        }
    }
}

/// The θ values minimising g_p and the minimum leakage τ̌_p.
pub fn min_leakage(vectors: &RegressionVectors, p: NormOrder) -> Result<LeakageMinimum> {
    let beta_max = vectors.beta.amax();
    if !(beta_max > 0.0) {
        return Err(Error::Irrelevance { norm: vectors.beta.norm() });
    }
    let theta_check = match p {
        NormOrder::Finite(2.0) => {
            let t = vectors.beta.dot(&vectors.alpha) / vectors.beta.dot(&vectors.beta);
            [t, t]
        }
        NormOrder::Finite(1.0) => weighted_median_interval(vectors),
        NormOrder::Infinity => chebyshev_interval(vectors),
        NormOrder::Finite(q) => {
            let t = strictly_convex_minimiser(vectors, q);
            [t, t]
        }
    };
    let tau_check = leakage_norm(theta_check[0], vectors, p).min(leakage_norm(theta_check[1], vectors, p));
    Ok(LeakageMinimum { theta_check, tau_check })
}

/// Ratios α_j/β_j and weights |β_j| for the coordinates with β_j ≠ 0.
fn breakpoints(vectors: &RegressionVectors) -> Vec<(f64, f64)> {
    vectors
        .alpha
        .iter()
        .zip(vectors.beta.iter())
        .filter(|(_, &b)| b != 0.0)
        .map(|(&a, &b)| (a / b, b.abs()))
        .collect()
}

/// g_1 is piecewise linear with slope changes at α_j/β_j; its minimisers are
/// the |β|-weighted medians of those breakpoints.
fn weighted_median_interval(vectors: &RegressionVectors) -> [f64; 2] {
    let mut pts = breakpoints(vectors);
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pts.iter().map(|p| p.1).sum();
    let tol = 1e-12 * total;
    let mut cum = 0.0;
    for (k, &(r, w)) in pts.iter().enumerate() {
        cum += w;
        // Slope of g_1 just to the right of this breakpoint.
        let slope = 2.0 * cum - total;
        if slope.abs() <= tol {
            let next = pts.get(k + 1).map_or(r, |p| p.0);
            return [r, next];
        }
        if slope > 0.0 {
            return [r, r];
        }
    }
    let last = pts.last().expect("at least one nonzero beta").0;
    [last, last]
}

/// g_∞ minimisers. The line set {|α_j − θβ_j|} has Chebyshev value
/// max over pairs of (r_j − r_k)/(1/|β_j| + 1/|β_k|); coordinates with β_j = 0
/// contribute a constant floor that can widen the minimiser into an interval.
fn chebyshev_interval(vectors: &RegressionVectors) -> [f64; 2] {
    let pts = breakpoints(vectors);
    let floor = vectors
        .alpha
        .iter()
        .zip(vectors.beta.iter())
        .filter(|(_, &b)| b == 0.0)
        .fold(0.0_f64, |m, (&a, _)| m.max(a.abs()));

    let mut level: f64 = 0.0;
    for (i, &(ri, wi)) in pts.iter().enumerate() {
        for &(rj, wj) in &pts[i + 1..] {
            let t = (ri - rj).abs() / (1.0 / wi + 1.0 / wj);
            level = level.max(t);
        }
    }
    let level = level.max(floor);
    let lo = pts.iter().map(|&(r, w)| r - level / w).fold(f64::NEG_INFINITY, f64::max);
    let hi = pts.iter().map(|&(r, w)| r + level / w).fold(f64::INFINITY, f64::min);
    if lo <= hi && level > floor {
        // Unique Chebyshev point; lo and hi differ only by rounding.
        let mid = 0.5 * (lo + hi);
        [mid, mid]
    } else if lo <= hi {
        [lo, hi]
    } else {
        let mid = 0.5 * (lo + hi);
        [mid, mid]
    }
}

/// Unique minimiser for p ∈ (1, ∞): golden-section search to narrow the
/// bracket, then bisection on the sign of the derivative.
fn strictly_convex_minimiser(vectors: &RegressionVectors, q: f64) -> f64 {
    let pts = breakpoints(vectors);
    let mut lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mut hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return lo;
    }
    let p = NormOrder::Finite(q);
    let g = |t: f64| leakage_norm(t, vectors, p);

    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut gc, mut gd) = (g(c), g(d));
    while hi - lo > 1e-6 * (1.0 + lo.abs().max(hi.abs())) {
        if gc <= gd {
            hi = d;
            d = c;
            gd = gc;
            c = hi - INV_PHI * (hi - lo);
            gc = g(c);
        } else {
            lo = c;
            c = d;
            gc = gd;
            d = lo + INV_PHI * (hi - lo);
            gd = g(d);
        }
    }
    // Golden-section keeps the minimiser inside [lo, hi] only up to rounding
    // in g; widen slightly before the derivative bisection.
    let pad = 1e-6 * (1.0 + lo.abs().max(hi.abs()));
    lo -= pad;
    hi += pad;

    // Sign of d/dθ Σ|α_j − θβ_j|^q, up to a positive factor.
    let slope = |t: f64| -> f64 {
        let scale = vectors
            .alpha
            .iter()
            .zip(vectors.beta.iter())
            .fold(0.0, |m: f64, (&a, &b)| m.max((a - t * b).abs()));
        if scale == 0.0 {
            return 0.0;
        }
        vectors
            .alpha
            .iter()
            .zip(vectors.beta.iter())
            .map(|(&a, &b)| {
                let r = (a - t * b) / scale;
                -b * r.signum() * r.abs().powf(q - 1.0)
            })
            .sum()
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = slope(mid);
        if s > 0.0 {
            hi = mid;
        } else if s < 0.0 {
            lo = mid;
        } else {
            return mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(alpha: &[f64], beta: &[f64]) -> RegressionVectors {
        RegressionVectors::new(alpha.to_vec(), beta.to_vec()).unwrap()
    }

    /// Brute-force grid scan for the minimum value and the set of near-minimisers.
    fn grid_scan(vectors: &RegressionVectors, p: NormOrder, lo: f64, hi: f64, step: f64) -> (f64, f64, f64) {
        let n = ((hi - lo) / step).round() as usize;
        let vals: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let t = lo + i as f64 * step;
                (t, leakage_norm(t, vectors, p))
            })
            .collect();
        let min = vals.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let near: Vec<f64> = vals.iter().filter(|x| x.1 <= min + 1e-9).map(|x| x.0).collect();
        (min, near[0], *near.last().unwrap())
    }

    #[test]
    fn norm_values() {
        let vecs = v(&[1.0, 0.0], &[1.0, 1.0]);
        assert_abs_diff_eq!(leakage_norm(0.0, &vecs, NormOrder::Finite(2.0)), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(leakage_norm(0.5, &vecs, NormOrder::Finite(2.0)), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(leakage_norm(0.5, &vecs, NormOrder::Finite(1.0)), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(leakage_norm(0.5, &vecs, NormOrder::Infinity), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            leakage_norm(2.0, &vecs, NormOrder::Finite(3.0)),
            (1.0f64 + 8.0).powf(1.0 / 3.0),
            epsilon = 1e-14
        );
    }

    #[test]
    fn l2_minimum_closed_form() {
        let m = min_leakage(&v(&[1.0, 0.0], &[1.0, 1.0]), NormOrder::Finite(2.0)).unwrap();
        assert_eq!(m.theta_check, [0.5, 0.5]);
        assert_abs_diff_eq!(m.tau_check, 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn parallel_vectors_have_zero_leakage_for_every_p() {
        let vecs = v(&[0.6, -1.2, 1.8], &[0.2, -0.4, 0.6]);
        for p in [NormOrder::Finite(1.0), NormOrder::Finite(1.5), NormOrder::Finite(2.0), NormOrder::Finite(4.0), NormOrder::Infinity] {
            let m = min_leakage(&vecs, p).unwrap();
            assert_abs_diff_eq!(m.tau_check, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(m.theta_check[0], 3.0, epsilon = 1e-9);
            assert_abs_diff_eq!(m.theta_check[1], 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn l1_plateau_matches_grid() {
        let vecs = v(&[1.0, 0.0], &[1.0, 1.0]);
        let m = min_leakage(&vecs, NormOrder::Finite(1.0)).unwrap();
        assert_eq!(m.theta_check, [0.0, 1.0]);
        let (min, lo, hi) = grid_scan(&vecs, NormOrder::Finite(1.0), -1.0, 2.0, 1e-5);
        assert_abs_diff_eq!(m.tau_check, min, epsilon = 1e-9);
        assert_abs_diff_eq!(lo, 0.0, epsilon = 2e-5);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 2e-5);
    }

    #[test]
    fn chebyshev_with_floor_gives_interval() {
        // Coordinate with beta = 0 puts a floor of 2 under g_inf.
        let vecs = v(&[1.0, 2.0, -0.5], &[1.0, 0.0, 0.5]);
        let m = min_leakage(&vecs, NormOrder::Infinity).unwrap();
        let (min, lo, hi) = grid_scan(&vecs, NormOrder::Infinity, -10.0, 10.0, 1e-4);
        assert_abs_diff_eq!(m.tau_check, min, epsilon = 1e-9);
        assert_abs_diff_eq!(m.theta_check[0], lo, epsilon = 2e-4);
        assert_abs_diff_eq!(m.theta_check[1], hi, epsilon = 2e-4);
        assert!(m.theta_check[1] - m.theta_check[0] > 1.0);
    }

    #[test]
    fn general_p_matches_grid() {
        let vecs = v(&[0.3, -1.1, 0.8, 2.0], &[0.5, 0.2, -0.9, 1.3]);
        for q in [1.2, 1.5, 3.0, 7.0] {
            let p = NormOrder::Finite(q);
            let m = min_leakage(&vecs, p).unwrap();
            let (min, _, _) = grid_scan(&vecs, p, -5.0, 5.0, 1e-4);
            assert!(m.tau_check <= min + 1e-12, "p={q}: {} > {}", m.tau_check, min);
            // Stationarity: neighbours are no better.
            let t = m.theta_check[0];
            assert!(leakage_norm(t + 1e-7, &vecs, p) >= m.tau_check - 1e-14);
            assert!(leakage_norm(t - 1e-7, &vecs, p) >= m.tau_check - 1e-14);
        }
    }

    #[test]
    fn zero_beta_is_irrelevant() {
        assert!(matches!(min_leakage(&v(&[1.0, 2.0], &[0.0, 0.0]), NormOrder::Finite(2.0)), Err(Error::Irrelevance { .. })));
    }
}
