//! Normal equations for complex coefficient matching, Moore–Penrose
//! solving, and iterative refinement.
//!
//! Matching `Σ_n |f̂_n − Σ_i a_i B̂_{i,n}|²` over real coefficients `a` is a
//! real least-squares problem in the stacked real and imaginary parts, so
//! `A = G·Gᵀ` with `G = [Re B̂ | Im B̂]` and `b = G·[Re f̂; Im f̂]`. These
//! Gram systems reach condition numbers far beyond 1/ε, which is why
//! refinement computes residuals with compensated (twice-working-precision)
//! summation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FourierTable, Index};
use crate::transforms::BasisCoeffMatrix;

/// The assembled real normal equations `A x = b`.
#[derive(Debug, Clone)]
pub struct NormalSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    freqs: Vec<Index>,
    /// `Σ_n |f̂_n|²`, kept so the quadratic objective can be expanded as
    /// `c − 2bᵀx + xᵀAx` without revisiting the data.
    data_energy: f64,
}

impl NormalSystem {
    pub fn from_parts(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() != b.len() {
            return Err(Error::ShapeMismatch(format!(
                "normal matrix {}x{} incompatible with rhs length {}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        Ok(Self { a, b, freqs: Vec::new(), data_energy: f64::NAN })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn freqs(&self) -> &[Index] {
        &self.freqs
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn data_energy(&self) -> f64 {
        self.data_energy
    }

    /// `Σ_n |f̂_n − Ŝ_n(x)|² = c − 2bᵀx + xᵀAx`, the matching objective of a
    /// coefficient vector.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let ax = &self.a * x;
        (self.data_energy - 2.0 * self.b.dot(x) + x.dot(&ax)).max(0.0)
    }
}

/// Diagnostics of a pseudoinverse solve and any refinement on top of it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    /// `σ_max / σ_min` over the singular values retained by the cutoff.
    pub condition: f64,
    /// Relative singular-value cutoff used.
    pub cutoff: f64,
    /// Number of retained singular values.
    pub rank: usize,
    /// Refinement iterations actually performed (0 for a plain solve).
    pub iterations: usize,
    /// Best-so-far relative residuals, one entry per refinement step
    /// (non-increasing by construction).
    pub residual_history: Vec<f64>,
    /// Relative residual of the returned solution.
    pub final_relative_residual: f64,
    /// Residual grew on two consecutive steps; best iterate returned.
    pub diverged: bool,
}

/// Builds the normal equations from basis transforms and a data table.
///
/// `A_{ij} = Σ_n [Re B̂_{i,n} Re B̂_{j,n} + Im B̂_{i,n} Im B̂_{j,n}]` and
/// `b_i` likewise against `f̂_n`, summed over the basis matrix's frequency
/// set.
pub fn assemble_normal(basis: &BasisCoeffMatrix, data: &FourierTable) -> Result<NormalSystem> {
    let n_basis = basis.n_rows();
    let n_freq = basis.n_cols();
    let mut coeffs = Vec::with_capacity(n_freq);
    for f in basis.freqs() {
        let v = data
            .get(*f)
            .ok_or_else(|| Error::IncompleteData(f[..data.axes()].to_vec()))?;
        coeffs.push(v);
    }
    // G stacks [Re | Im] column-blocks; A = G Gᵀ, b = G [Re f̂; Im f̂].
    let mut g = DMatrix::zeros(n_basis, 2 * n_freq);
    for r in 0..n_basis {
        let row = basis.row(r);
        for c in 0..n_freq {
            g[(r, c)] = row[c].re;
            g[(r, n_freq + c)] = row[c].im;
        }
    }
    let mut fvec = DVector::zeros(2 * n_freq);
    for (c, v) in coeffs.iter().enumerate() {
        fvec[c] = v.re;
        fvec[n_freq + c] = v.im;
    }
    let a = &g * g.transpose();
    let b = &g * fvec;
    let data_energy: f64 = coeffs.iter().map(Complex64::norm_sqr).sum();
    Ok(NormalSystem {
        a,
        b,
        freqs: basis.freqs().to_vec(),
        data_energy,
    })
}

/// Reusable SVD factors of a normal matrix, truncated at a relative cutoff.
pub struct PinvFactors {
    u: DMatrix<f64>,
    v_t: DMatrix<f64>,
    inv_singular: DVector<f64>,
    condition: f64,
    rank: usize,
    cutoff: f64,
}

impl PinvFactors {
    pub fn new(a: &DMatrix<f64>, cutoff: f64) -> Result<Self> {
        if !(0.0 < cutoff && cutoff < 1.0) {
            return Err(Error::Validation(format!(
                "pinv cutoff must lie in (0,1), got {cutoff}"
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite entry in normal matrix".into()));
        }
        let svd = a.clone().svd(true, true);
        let u = svd.u.ok_or_else(|| Error::Numeric("SVD did not produce U".into()))?;
        let v_t = svd.v_t.ok_or_else(|| Error::Numeric("SVD did not produce Vᵀ".into()))?;
        let sigma = svd.singular_values;
        let sigma_max = sigma.iter().fold(0.0f64, |m, &s| m.max(s));
        let threshold = cutoff * sigma_max;
        let mut inv = DVector::zeros(sigma.len());
        let mut sigma_min = f64::INFINITY;
        let mut rank = 0;
        for (i, &s) in sigma.iter().enumerate() {
            if s > threshold {
                inv[i] = 1.0 / s;
                sigma_min = sigma_min.min(s);
                rank += 1;
            }
        }
        let condition = if rank == 0 { 0.0 } else { sigma_max / sigma_min };
        Ok(Self { u, v_t, inv_singular: inv, condition, rank, cutoff })
    }

    /// Applies the pseudoinverse: `x = V Σ⁺ Uᵀ r`.
    pub fn apply(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut y = self.u.transpose() * r;
        for (i, v) in y.iter_mut().enumerate() {
            *v *= self.inv_singular[i];
        }
        self.v_t.transpose() * y
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    fn base_report(&self) -> SolveReport {
        SolveReport {
            condition: self.condition,
            cutoff: self.cutoff,
            rank: self.rank,
            iterations: 0,
            residual_history: Vec::new(),
            final_relative_residual: f64::NAN,
            diverged: false,
        }
    }
}

/// Minimum-norm least-squares solution via truncated SVD.
pub fn solve_pinv(system: &NormalSystem, cutoff: f64) -> Result<(DVector<f64>, SolveReport)> {
    let factors = PinvFactors::new(&system.a, cutoff)?;
    let x = factors.apply(&system.b);
    let mut report = factors.base_report();
    let r = residual_compensated(&system.a, &x, &system.b);
    report.final_relative_residual = relative_residual(&r, &system.b);
    Ok((x, report))
}

/// `b − A·x` with compensated products and sums, accurate to roughly twice
/// working precision before the final rounding.
pub fn residual_compensated(a: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    let mut r = DVector::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        let mut comp = 0.0;
        for j in 0..x.len() {
            let aij = -a[(i, j)];
            let p = aij * x[j];
            let p_err = aij.mul_add(x[j], -p);
            let t = sum + p;
            let s_err = if sum.abs() >= p.abs() {
                (sum - t) + p
            } else {
                (p - t) + sum
            };
            sum = t;
            comp += s_err + p_err;
        }
        r[i] = sum + comp;
    }
    r
}

fn relative_residual(r: &DVector<f64>, b: &DVector<f64>) -> f64 {
    r.norm() / b.norm().max(1e-300)
}

/// Iterative refinement `x ← x + A⁺(b − Ax)` with compensated residuals.
///
/// Stops at the target relative residual or the iteration cap; if the raw
/// residual grows on two consecutive steps the best iterate is returned
/// with the divergence flag set. The recorded history is the best-so-far
/// relative residual and is therefore non-increasing.
pub fn iterative_refine(
    system: &NormalSystem,
    initial: &DVector<f64>,
    cutoff: f64,
    max_iterations: usize,
    target_relative_residual: f64,
) -> Result<(DVector<f64>, SolveReport)> {
    let factors = PinvFactors::new(&system.a, cutoff)?;
    refine_with(system, initial, &factors, max_iterations, target_relative_residual, |f, r| {
        f.apply(r)
    })
}

/// Refinement loop with a pluggable correction step (tests substitute a
/// deliberately bad corrector to exercise the divergence path).
pub(crate) fn refine_with<F>(
    system: &NormalSystem,
    initial: &DVector<f64>,
    factors: &PinvFactors,
    max_iterations: usize,
    target: f64,
    correct: F,
) -> Result<(DVector<f64>, SolveReport)>
where
    F: Fn(&PinvFactors, &DVector<f64>) -> DVector<f64>,
{
    if max_iterations < 1 {
        return Err(Error::Validation("max iterations must be >= 1".into()));
    }
    let mut report = factors.base_report();
    let mut x = initial.clone();
    let mut r = residual_compensated(&system.a, &x, &system.b);
    let mut rel = relative_residual(&r, &system.b);
    let mut best_x = x.clone();
    let mut best_rel = rel;
    let mut prev_rel = rel;
    let mut growth_streak = 0usize;
    report.residual_history.push(best_rel);
    for iter in 0..max_iterations {
        if best_rel <= target {
            break;
        }
        let dx = correct(factors, &r);
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite refinement update".into()));
        }
        x += dx;
        r = residual_compensated(&system.a, &x, &system.b);
        rel = relative_residual(&r, &system.b);
        report.iterations = iter + 1;
        if rel < best_rel {
            best_rel = rel;
            best_x = x.clone();
        }
        report.residual_history.push(best_rel);
        if rel > prev_rel {
            growth_streak += 1;
            if growth_streak >= 2 {
                report.diverged = true;
                break;
            }
        } else {
            growth_streak = 0;
        }
        prev_rel = rel;
    }
    report.final_relative_residual = best_rel;
    Ok((best_x, report))
}
