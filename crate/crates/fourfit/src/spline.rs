//! Uniform B-spline bases on [0,1]^d and spline models built on them.
//!
//! The order-`k` B-spline `B` has knots `{-kd, ..., -d, 0}`; basis function
//! `i` (1-based) is the shift `B(x - i·d)` with support `[(i-k)d, i·d)`.
//! Evaluation at knots is right-continuous. With `1/d` an integer there are
//! `N_d = 1/d + k - 1` basis functions per axis whose supports meet [0,1].

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform B-spline space descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplineSpace {
    k: usize,
    inv_d: u32,
    axes: usize,
}

impl SplineSpace {
    pub fn new(k: usize, inv_d: u32, axes: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidSpace(format!("order k must be >= 1, got {k}")));
        }
        if inv_d == 0 {
            return Err(Error::InvalidSpace("1/d must be a positive integer".into()));
        }
        if !(1..=3).contains(&axes) {
            return Err(Error::InvalidSpace(format!("axis count must be 1..=3, got {axes}")));
        }
        Ok(Self { k, inv_d, axes })
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn inv_d(&self) -> u32 {
        self.inv_d
    }

    pub fn d(&self) -> f64 {
        1.0 / self.inv_d as f64
    }

    pub fn axes(&self) -> usize {
        self.axes
    }

    /// Number of basis functions per axis, `N_d = 1/d + k - 1`.
    pub fn per_axis(&self) -> usize {
        self.inv_d as usize + self.k - 1
    }

    /// Total tensor dimension `N_d^axes`.
    pub fn dim(&self) -> usize {
        self.per_axis().pow(self.axes as u32)
    }

    /// Support of basis `i` (1-based): `[(i-k)d, i·d)`.
    pub fn support(&self, i: usize) -> (f64, f64) {
        let d = self.d();
        ((i as f64 - self.k as f64) * d, i as f64 * d)
    }

    /// 1-based inclusive index range of bases whose support contains `x`.
    pub fn active_range(&self, x: f64) -> (usize, usize) {
        let tau = x * self.inv_d as f64;
        let lo = tau.floor() as i64 + 1;
        let hi = tau.floor() as i64 + self.k as i64;
        let n = self.per_axis() as i64;
        ((lo.max(1)) as usize, (hi.min(n).max(1)) as usize)
    }

    /// Value of basis `i` at `x`, i.e. `B(x - i·d)`.
    pub fn basis_value(&self, i: usize, x: f64) -> f64 {
        let t = x * self.inv_d as f64 + self.k as f64 - i as f64;
        cardinal_value(self.k, t)
    }
}

/// The cardinal B-spline `N_k` with integer knots `0..=k`, evaluated by the
/// Cox–de Boor recursion. Right-continuous: `N_1 = 1` on `[0,1)`.
pub fn cardinal_value(k: usize, t: f64) -> f64 {
    if !(0.0..k as f64).contains(&t) {
        return 0.0;
    }
    let m = t.floor() as i64; // 0..k-1
    let mut vals = vec![0.0; k];
    vals[0] = 1.0; // N_{m,1}
    for r in 2..=k {
        let mut next = vec![0.0; k];
        for idx in (0..r).rev() {
            let j = m - r as i64 + 1 + idx as i64;
            let n1 = if idx >= 1 { vals[idx - 1] } else { 0.0 }; // N_{j, r-1}
            let n2 = if idx < r - 1 { vals[idx] } else { 0.0 }; // N_{j+1, r-1}
            let a = (t - j as f64) / (r as f64 - 1.0);
            let b = (j as f64 + r as f64 - t) / (r as f64 - 1.0);
            next[idx] = a * n1 + b * n2;
        }
        vals = next;
    }
    let idx = k as i64 - 1 - m;
    vals[idx as usize]
}

/// Monomial coefficients of the polynomial pieces of `N_k`.
///
/// `pieces[j][p]` is the coefficient of `u^p` on the knot interval
/// `[j, j+1]` with local coordinate `u = t - j`.
pub fn cardinal_pieces(k: usize) -> Vec<Vec<f64>> {
    let mut pieces = vec![vec![1.0]];
    for r in 2..=k {
        let prev = pieces;
        let mut next = Vec::with_capacity(r);
        for j in 0..r {
            let mut poly = vec![0.0; r];
            // (u + j) * prev[j]
            if j < r - 1 {
                for (p, &c) in prev[j].iter().enumerate() {
                    poly[p + 1] += c;
                    poly[p] += j as f64 * c;
                }
            }
            // (r - j - u) * prev[j-1]
            if j >= 1 {
                for (p, &c) in prev[j - 1].iter().enumerate() {
                    poly[p] += (r - j) as f64 * c;
                    poly[p + 1] -= c;
                }
            }
            for c in poly.iter_mut() {
                *c /= (r - 1) as f64;
            }
            next.push(poly);
        }
        pieces = next;
    }
    pieces
}

/// Value of `B`, the order-`k` B-spline with knots `{-kd,...,0}`, at `x`.
pub fn bspline_eval(k: usize, d: f64, x: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidSpace(format!("order k must be >= 1, got {k}")));
    }
    if d <= 0.0 {
        return Err(Error::InvalidSpace(format!("knot spacing must be > 0, got {d}")));
    }
    Ok(cardinal_value(k, x / d + k as f64))
}

/// A tensor-product spline with real coefficients on `[0,1]^axes`.
///
/// Coefficients are indexed by 1-based per-axis indices, flattened row-major
/// with the last axis fastest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplineModel {
    space: SplineSpace,
    coefficients: Vec<f64>,
}

impl SplineModel {
    pub fn new(space: SplineSpace, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != space.dim() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} coefficients for space, got {}",
                space.dim(),
                coefficients.len()
            )));
        }
        Ok(Self { space, coefficients })
    }

    pub fn space(&self) -> &SplineSpace {
        &self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    /// Flat index of the coefficient with 1-based per-axis indices.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let n = self.space.per_axis();
        let mut flat = 0;
        for &i in idx {
            flat = flat * n + (i - 1);
        }
        flat
    }

    /// `Σ a_I Π_axis B(x_axis − I_axis d)`.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        let axes = self.space.axes();
        if point.len() != axes {
            return Err(Error::ShapeMismatch(format!(
                "expected a {axes}-vector, got {} components",
                point.len()
            )));
        }
        let mut ranges = [(0usize, 0usize); 3];
        let mut vals: Vec<Vec<f64>> = Vec::with_capacity(axes);
        for a in 0..axes {
            let (lo, hi) = self.space.active_range(point[a]);
            ranges[a] = (lo, hi);
            vals.push((lo..=hi).map(|i| self.space.basis_value(i, point[a])).collect());
        }
        let n = self.space.per_axis();
        let mut sum = 0.0;
        match axes {
            1 => {
                for (off, v) in vals[0].iter().enumerate() {
                    sum += self.coefficients[ranges[0].0 - 1 + off] * v;
                }
            }
            2 => {
                for (o1, v1) in vals[0].iter().enumerate() {
                    let row = (ranges[0].0 - 1 + o1) * n;
                    for (o2, v2) in vals[1].iter().enumerate() {
                        sum += self.coefficients[row + ranges[1].0 - 1 + o2] * v1 * v2;
                    }
                }
            }
            _ => {
                for (o1, v1) in vals[0].iter().enumerate() {
                    for (o2, v2) in vals[1].iter().enumerate() {
                        let row = ((ranges[0].0 - 1 + o1) * n + ranges[1].0 - 1 + o2) * n;
                        for (o3, v3) in vals[2].iter().enumerate() {
                            sum += self.coefficients[row + ranges[2].0 - 1 + o3] * v1 * v2 * v3;
                        }
                    }
                }
            }
        }
        Ok(sum)
    }
}

/// A bivariate spline whose zero level set models a singularity curve.
///
/// The sign of the value classifies a point: `>= 0` is piece 1, `< 0` is
/// piece 2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelSetSpline {
    model: SplineModel,
}

impl LevelSetSpline {
    pub fn new(model: SplineModel) -> Result<Self> {
        if model.space().axes() != 2 {
            return Err(Error::InvalidSpace(
                "level-set spline must be bivariate".into(),
            ));
        }
        Ok(Self { model })
    }

    pub fn model(&self) -> &SplineModel {
        &self.model
    }

    pub fn space(&self) -> &SplineSpace {
        self.model.space()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.model.eval(&[x, y]).expect("level-set spline is bivariate")
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.model
            .coefficients()
            .iter()
            .fold(0.0f64, |m, &c| m.max(c.abs()))
    }

    /// Points on the zero level set from sign-change scanning on a
    /// `resolution x resolution` grid with root polishing along grid edges.
    ///
    /// Returned points satisfy `|eval| <= 1e-12 * max|coeff|`. The list is
    /// ordered by nearest-neighbour chaining; it is empty when no sign
    /// change is found.
    pub fn zero_level_polyline(&self, resolution: usize) -> Result<Vec<[f64; 2]>> {
        if resolution < 2 {
            return Err(Error::Validation(format!(
                "resolution must be >= 2, got {resolution}"
            )));
        }
        let n = resolution;
        let coord = |a: usize| a as f64 / (n - 1) as f64;
        let mut values = vec![0.0; n * n];
        for ix in 0..n {
            for iy in 0..n {
                values[ix * n + iy] = self.eval(coord(ix), coord(iy));
            }
        }
        let tol = 1e-12 * self.max_abs_coeff().max(1e-300);
        let mut pts: Vec<[f64; 2]> = Vec::new();
        let mut push_root = |p: [f64; 2]| {
            pts.push(p);
        };
        for ix in 0..n {
            for iy in 0..n {
                let v0 = values[ix * n + iy];
                // Edge to the right (varying x).
                if ix + 1 < n {
                    let v1 = values[(ix + 1) * n + iy];
                    if sign_change(v0, v1) {
                        let y = coord(iy);
                        let x = polish_root(|x| self.eval(x, y), coord(ix), coord(ix + 1), tol);
                        push_root([x, y]);
                    }
                }
                // Edge upward (varying y).
                if iy + 1 < n {
                    let v1 = values[ix * n + iy + 1];
                    if sign_change(v0, v1) {
                        let x = coord(ix);
                        let y = polish_root(|y| self.eval(x, y), coord(iy), coord(iy + 1), tol);
                        push_root([x, y]);
                    }
                }
            }
        }
        Ok(chain_points(pts))
    }
}

/// 1-D coefficients that reproduce the affine function `a + b·x` exactly
/// for `k >= 2` (Greville abscissae of the uniform knots).
pub fn affine_coeffs_1d(space: &SplineSpace, a: f64, b: f64) -> Vec<f64> {
    let k = space.order() as f64;
    let d = space.d();
    (1..=space.per_axis())
        .map(|i| a + b * (i as f64 - k / 2.0) * d)
        .collect()
}

/// 1-D coefficients that reproduce `a + b·x + c·x²` exactly for `k >= 3`
/// (elementary symmetric means of each basis function's interior knots).
pub fn quadratic_coeffs_1d(space: &SplineSpace, a: f64, b: f64, c: f64) -> Vec<f64> {
    let k = space.order();
    assert!(k >= 3, "quadratic reproduction needs order >= 3");
    let d = space.d();
    (1..=space.per_axis())
        .map(|i| {
            let knots: Vec<f64> = (1..k)
                .map(|j| (i as f64 - k as f64 + j as f64) * d)
                .collect();
            let e1 = knots.iter().sum::<f64>() / (k - 1) as f64;
            let mut e2 = 0.0;
            for p in 0..knots.len() {
                for q in p + 1..knots.len() {
                    e2 += knots[p] * knots[q];
                }
            }
            let pairs = ((k - 1) * (k - 2) / 2) as f64;
            a + b * e1 + c * e2 / pairs
        })
        .collect()
}

fn sign_change(a: f64, b: f64) -> bool {
    (a >= 0.0) != (b >= 0.0)
}

/// Bisection followed by secant polishing of a bracketed root.
pub(crate) fn polish_root<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    debug_assert!((fa >= 0.0) != (fb >= 0.0));
    for _ in 0..40 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm.abs() <= tol {
            return m;
        }
        if (fm >= 0.0) == (fa >= 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    // Secant polish inside the remaining bracket.
    let mut x0 = a;
    let mut x1 = b;
    let mut f0 = f(x0);
    let mut f1 = f(x1);
    for _ in 0..8 {
        if (f1 - f0).abs() < 1e-300 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !x2.is_finite() {
            break;
        }
        x0 = x1;
        f0 = f1;
        x1 = x2.clamp(a.min(b), a.max(b));
        f1 = f(x1);
        if f1.abs() <= tol {
            break;
        }
    }
    x1
}

/// Orders a point cloud along a curve by nearest-neighbour chaining.
fn chain_points(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    if pts.len() <= 2 {
        return pts;
    }
    // Start from an extreme point (max x+y is a deterministic choice).
    let mut start = 0;
    for (i, p) in pts.iter().enumerate() {
        if p[0] + p[1] > pts[start][0] + pts[start][1] {
            start = i;
        }
    }
    let mut ordered = Vec::with_capacity(pts.len());
    let mut current = pts.swap_remove(start);
    ordered.push(current);
    while !pts.is_empty() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in pts.iter().enumerate() {
            let d = (p[0] - current[0]).powi(2) + (p[1] - current[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        current = pts.swap_remove(best);
        ordered.push(current);
    }
    ordered
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order1_is_indicator() {
        assert_eq!(bspline_eval(1, 0.1, -0.05).unwrap(), 1.0);
        assert_eq!(bspline_eval(1, 0.1, 0.01).unwrap(), 0.0);
        assert_eq!(bspline_eval(1, 0.1, -0.11).unwrap(), 0.0);
        // right-continuity at the knots
        assert_eq!(bspline_eval(1, 0.1, -0.1).unwrap(), 1.0);
        assert_eq!(bspline_eval(1, 0.1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn order2_hat_peak() {
        assert!((bspline_eval(2, 0.1, -0.1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn order4_midpoint_value() {
        // N_4(2) = 2/3 by direct integration of the 4-fold box convolution.
        assert!((bspline_eval(4, 0.1, -0.2).unwrap() - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_space_rejected() {
        assert!(bspline_eval(0, 0.1, 0.0).is_err());
        assert!(bspline_eval(3, 0.0, 0.0).is_err());
        assert!(bspline_eval(3, -1.0, 0.0).is_err());
    }

    #[test]
    fn partition_of_unity() {
        for k in 1..=12usize {
            for inv_d in [2u32, 5, 10, 20] {
                let space = SplineSpace::new(k, inv_d, 1).unwrap();
                for s in 0..101 {
                    let x = s as f64 / 101.0;
                    let (lo, hi) = space.active_range(x);
                    let sum: f64 = (lo..=hi).map(|i| space.basis_value(i, x)).sum();
                    assert!(
                        (sum - 1.0).abs() < 1e-13,
                        "k={k} 1/d={inv_d} x={x}: sum={sum}"
                    );
                }
            }
        }
    }

    #[test]
    fn nonnegative_and_supported() {
        for k in 1..=12usize {
            let d = 0.125;
            for s in -200..50 {
                let x = s as f64 / 100.0;
                let v = bspline_eval(k, d, x).unwrap();
                assert!(v >= 0.0);
                if !(-(k as f64) * d..0.0).contains(&x) {
                    assert_eq!(v, 0.0, "k={k} x={x}");
                }
            }
        }
    }

    #[test]
    fn pieces_match_de_boor() {
        for k in 1..=12usize {
            let pieces = cardinal_pieces(k);
            assert_eq!(pieces.len(), k);
            for j in 0..k {
                for s in 0..10 {
                    let u = s as f64 / 10.0;
                    let mut p = 0.0;
                    for &c in pieces[j].iter().rev() {
                        p = p * u + c;
                    }
                    let t = j as f64 + u;
                    assert!(
                        (p - cardinal_value(k, t)).abs() < 1e-12,
                        "k={k} j={j} u={u}"
                    );
                }
            }
        }
    }

    #[test]
    fn smoothness_order_at_interior_knots() {
        // The (k-2)-th derivative of N_k is continuous across interior knots;
        // check with one-sided finite differences of that divided difference.
        for k in 2..=8usize {
            let pieces = cardinal_pieces(k);
            let order = k - 2;
            let deriv = |j: usize, u: f64| {
                // d^order/du^order of piece j at u
                let mut c = pieces[j].clone();
                for _ in 0..order {
                    c = c
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(p, &v)| p as f64 * v)
                        .collect();
                }
                let mut val = 0.0;
                for &cc in c.iter().rev() {
                    val = val * u + cc;
                }
                val
            };
            for j in 1..k {
                let left = deriv(j - 1, 1.0);
                let right = deriv(j, 0.0);
                assert!(
                    (left - right).abs() < 1e-9,
                    "k={k} knot {j}: {left} vs {right}"
                );
            }
        }
    }

    #[test]
    fn spline_eval_constant_one() {
        for axes in 1..=3usize {
            let space = SplineSpace::new(4, 4, axes).unwrap();
            let model = SplineModel::new(space, vec![1.0; space.dim()]).unwrap();
            for s in 0..7 {
                let x = s as f64 / 6.0;
                let p = vec![x; axes];
                assert!((model.eval(&p).unwrap() - 1.0).abs() < 1e-13, "axes={axes} x={x}");
            }
        }
    }

    #[test]
    fn spline_eval_matches_basis_sum() {
        let space = SplineSpace::new(4, 4, 1).unwrap();
        let coeffs: Vec<f64> = (0..space.dim()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let model = SplineModel::new(space, coeffs.clone()).unwrap();
        let x = 0.35;
        let mut direct = 0.0;
        for i in 1..=space.per_axis() {
            direct += coeffs[i - 1] * bspline_eval(4, 0.25, x - i as f64 * 0.25).unwrap();
        }
        assert!((model.eval(&[x]).unwrap() - direct).abs() < 1e-13);
    }

    #[test]
    fn spline_eval_linear_in_coefficients() {
        let space = SplineSpace::new(5, 8, 2).unwrap();
        let a: Vec<f64> = (0..space.dim()).map(|i| (i % 17) as f64 * 0.3 - 1.0).collect();
        let c: Vec<f64> = (0..space.dim()).map(|i| ((i * 31) % 11) as f64 * 0.2 - 0.7).collect();
        let (alpha, beta) = (1.7, -0.4);
        let combo: Vec<f64> = a.iter().zip(&c).map(|(&x, &y)| alpha * x + beta * y).collect();
        let ma = SplineModel::new(space, a).unwrap();
        let mc = SplineModel::new(space, c).unwrap();
        let mx = SplineModel::new(space, combo).unwrap();
        for p in [[0.1, 0.9], [0.5, 0.5], [0.33, 0.77]] {
            let lhs = mx.eval(&p).unwrap();
            let rhs = alpha * ma.eval(&p).unwrap() + beta * mc.eval(&p).unwrap();
            assert!((lhs - rhs).abs() < 1e-13);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let space = SplineSpace::new(3, 5, 1).unwrap();
        assert!(SplineModel::new(space, vec![0.0; 3]).is_err());
        let model = SplineModel::new(space, vec![0.0; space.dim()]).unwrap();
        assert!(model.eval(&[0.1, 0.2]).is_err());
    }

    fn plane_levelset(a: f64, b: f64, c: f64) -> LevelSetSpline {
        // a*x + b*y + c with a tensor spline (order >= 2 reproduces affine)
        let space = SplineSpace::new(4, 5, 2).unwrap();
        let space1 = SplineSpace::new(4, 5, 1).unwrap();
        let gx = affine_coeffs_1d(&space1, 0.0, 1.0);
        let gy = affine_coeffs_1d(&space1, 0.0, 1.0);
        let n = space.per_axis();
        let mut coeffs = vec![0.0; space.dim()];
        for i in 0..n {
            for j in 0..n {
                coeffs[i * n + j] = a * gx[i] + b * gy[j] + c;
            }
        }
        LevelSetSpline::new(SplineModel::new(space, coeffs).unwrap()).unwrap()
    }

    #[test]
    fn quadratic_reproduction() {
        for k in [3usize, 4, 6, 10] {
            let space = SplineSpace::new(k, 5, 1).unwrap();
            let coeffs = quadratic_coeffs_1d(&space, 0.7, -1.3, 2.4);
            let model = SplineModel::new(space, coeffs).unwrap();
            for s in 0..21 {
                let x = s as f64 / 20.0 * 0.999;
                let want = 0.7 - 1.3 * x + 2.4 * x * x;
                assert!(
                    (model.eval(&[x]).unwrap() - want).abs() < 1e-12,
                    "k={k} x={x}"
                );
            }
        }
    }

    #[test]
    fn levelset_plane_through_center() {
        let ls = plane_levelset(1.0, 1.0, -1.0); // x + y - 1
        assert!(ls.eval(0.5, 0.5).abs() < 1e-13);
        assert!(ls.eval(0.9, 0.9) > 0.0);
        assert!(ls.eval(0.1, 0.1) < 0.0);
    }

    #[test]
    fn levelset_constant_partition_of_unity() {
        let space = SplineSpace::new(6, 10, 2).unwrap();
        let c = -0.37;
        let ls = LevelSetSpline::new(SplineModel::new(space, vec![c; space.dim()]).unwrap()).unwrap();
        for p in [[0.0, 0.0], [0.25, 0.75], [1.0, 1.0]] {
            assert!((ls.eval(p[0], p[1]) - c).abs() < 1e-13);
        }
    }

    #[test]
    fn polyline_of_vertical_plane() {
        let ls = plane_levelset(1.0, 0.0, -0.5); // x - 0.5
        let pts = ls.zero_level_polyline(40).unwrap();
        assert!(!pts.is_empty());
        for p in &pts {
            assert!((p[0] - 0.5).abs() < 1e-12, "point {:?}", p);
            assert!(ls.eval(p[0], p[1]).abs() <= 1e-12 * ls.max_abs_coeff());
        }
    }

    #[test]
    fn polyline_empty_for_positive_levelset() {
        let space = SplineSpace::new(4, 5, 2).unwrap();
        let ls = LevelSetSpline::new(SplineModel::new(space, vec![2.0; space.dim()]).unwrap()).unwrap();
        assert!(ls.zero_level_polyline(30).unwrap().is_empty());
    }

    #[test]
    fn polyline_resolution_validated() {
        let ls = plane_levelset(1.0, 0.0, -0.5);
        assert!(ls.zero_level_polyline(1).is_err());
    }
}
