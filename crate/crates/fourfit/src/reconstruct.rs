//! End-to-end reconstruction: smooth least-squares spline fits in one to
//! three axes, piecewise 1-D fits with jump refinement, and piecewise 2-D
//! fits with level-set refinement.
//!
//! Every fit matches the Fourier coefficients of a (piecewise) spline model
//! to given data in the least-squares sense. The linear coefficients are
//! always obtained from the normal equations with a pseudoinverse and
//! iterative refinement; the nonlinear unknowns (the 1-D cut point `s`, the
//! 2-D level-set coefficients `b̄`) are improved by quasi-Newton outer
//! iterations on the reduced objective `φ(cut) = min over linear
//! coefficients of the matching error`.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FourierTable, Index, Singularity, TestFunction};
use crate::metrics::sup_and_rms;
use crate::solver::{assemble_normal, iterative_refine, solve_pinv, NormalSystem, SolveReport};
use crate::spline::{LevelSetSpline, SplineModel, SplineSpace};
use crate::transforms::{
    full_box, full_tensor_matrix, half_range, piecewise_matrix_1d, piecewise_matrix_2d,
    BasisCoeffMatrix,
};

/// Relative singular-value cutoff used by all fits.
pub const PINV_CUTOFF: f64 = 1e-13;
/// Refinement iteration cap and target relative residual.
pub const REFINE_MAX_ITERATIONS: usize = 20;
pub const REFINE_TARGET: f64 = 1e-12;

/// Outer-loop controls for the piecewise fits.
pub const MAX_OUTER_1D: usize = 30;
pub const S_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_OUTER_2D: usize = 4;
/// Relative objective decrease below which the 2-D outer loop stops.
pub const OUTER_2D_RELATIVE_DECREASE: f64 = 1e-6;
/// Central-difference step for the 2-D level-set gradient.
pub const LEVELSET_FD_STEP: f64 = 1e-6;
/// Maximum halvings in the 2-D backtracking line search.
pub const MAX_BACKTRACKS: usize = 8;
/// Secant history length for the 2-D quasi-Newton direction.
pub const SECANT_HISTORY: usize = 5;

/// A 1-D model with two spline pieces meeting at the cut point `s`:
/// `a1` applies on `[0, s]` (piece 1), `a2` on `(s, 1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PiecewiseModel1D {
    pub space: SplineSpace,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub s: f64,
}

impl PiecewiseModel1D {
    /// Piecewise evaluation; `x == s` belongs to piece 1.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Validation(format!("point {x} outside [0,1]")));
        }
        let coeffs = if x <= self.s { &self.a1 } else { &self.a2 };
        Ok(eval_1d(&self.space, coeffs, x))
    }

    pub fn eval_many(&self, points: &[f64]) -> Result<Vec<f64>> {
        points.iter().map(|&x| self.eval(x)).collect()
    }
}

/// A 2-D model with two tensor-spline pieces separated by the zero curve of
/// a level-set spline: `a1` applies where `D(x,y) >= 0` (piece 1), `a2`
/// where `D(x,y) < 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelSetModel2D {
    pub space: SplineSpace,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub levelset_space: SplineSpace,
    pub b: Vec<f64>,
}

impl LevelSetModel2D {
    pub fn levelset(&self) -> Result<LevelSetSpline> {
        LevelSetSpline::new(SplineModel::new(self.levelset_space, self.b.clone())?)
    }

    /// Piecewise evaluation; the curve itself (`D == 0`) belongs to piece 1.
    pub fn eval(&self, levelset: &LevelSetSpline, x: f64, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::Validation(format!("point ({x}, {y}) outside the square")));
        }
        let coeffs = if levelset.eval(x, y) >= 0.0 { &self.a1 } else { &self.a2 };
        let n = self.space.per_axis();
        let (lox, hix) = self.space.active_range(x);
        let (loy, hiy) = self.space.active_range(y);
        let mut acc = 0.0;
        for i in lox..=hix {
            let bx = self.space.basis_value(i, x);
            for j in loy..=hiy {
                acc += coeffs[(i - 1) * n + (j - 1)] * bx * self.space.basis_value(j, y);
            }
        }
        Ok(acc)
    }

    pub fn eval_many(&self, points: &[[f64; 2]]) -> Result<Vec<f64>> {
        let ls = self.levelset()?;
        points.iter().map(|p| self.eval(&ls, p[0], p[1])).collect()
    }
}

fn eval_1d(space: &SplineSpace, coeffs: &[f64], x: f64) -> f64 {
    let (lo, hi) = space.active_range(x);
    (lo..=hi).map(|i| coeffs[i - 1] * space.basis_value(i, x)).sum()
}

/// Sup/RMS error summary over a grid, away from a declared singularity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub sup: f64,
    pub rms: f64,
    pub grid: usize,
    pub exclusion_radius: f64,
    pub points_used: usize,
    pub points_excluded: usize,
}

/// Everything a fit reports besides the model itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionReport {
    /// `Σ_n |f̂_n − Ŝ_n|²` over the fit set at the returned coefficients.
    pub objective: f64,
    /// `|f̂_n − Ŝ_n|` per fit index.
    pub residuals: Vec<(Index, f64)>,
    pub solve: SolveReport,
    /// `log10(max |f̂_n| / max |f̂_n − Ŝ_n|)` over the fit set.
    pub reduction_orders: f64,
    /// Best objective after each outer iteration (single entry for linear
    /// fits); non-increasing.
    pub objective_history: Vec<f64>,
    /// Final cut point (1-D piecewise fits only).
    pub s: Option<f64>,
    /// The outer loop stopped on non-decreasing objective.
    pub stagnated: bool,
    /// An `s` iterate had to be clamped away from the boundary.
    pub clamped: bool,
    pub warnings: Vec<String>,
    pub error_grid: Option<ErrorSummary>,
}

/// `Σ_n |f̂_n − Ŝ_n|²` computed directly from the transforms, without the
/// normal-equation expansion.
pub fn coefficient_objective(
    basis: &BasisCoeffMatrix,
    coefficients: &[f64],
    table: &FourierTable,
) -> Result<f64> {
    Ok(residual_values(basis, coefficients, table)?
        .iter()
        .map(|(_, r)| r.norm_sqr())
        .sum())
}

fn residual_values(
    basis: &BasisCoeffMatrix,
    coefficients: &[f64],
    table: &FourierTable,
) -> Result<Vec<(Index, Complex64)>> {
    if coefficients.len() != basis.n_rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} coefficients against {} basis rows",
            coefficients.len(),
            basis.n_rows()
        )));
    }
    let mut out = Vec::with_capacity(basis.n_cols());
    for (j, f) in basis.freqs().iter().enumerate() {
        let data = table
            .get(*f)
            .ok_or_else(|| Error::IncompleteData(f[..table.axes()].to_vec()))?;
        let mut model = Complex64::new(0.0, 0.0);
        for (r, &c) in coefficients.iter().enumerate() {
            model += c * basis.value(r, j);
        }
        out.push((*f, data - model));
    }
    Ok(out)
}

fn build_report(
    basis: &BasisCoeffMatrix,
    coefficients: &[f64],
    table: &FourierTable,
    solve: SolveReport,
    history: Vec<f64>,
    warnings: Vec<String>,
) -> Result<ReconstructionReport> {
    let residuals = residual_values(basis, coefficients, table)?;
    let objective: f64 = residuals.iter().map(|(_, r)| r.norm_sqr()).sum();
    let max_data = basis
        .freqs()
        .iter()
        .filter_map(|f| table.get(*f))
        .fold(0.0f64, |m, v| m.max(v.norm()));
    let max_resid = residuals.iter().fold(0.0f64, |m, (_, r)| m.max(r.norm()));
    let reduction_orders = if max_resid > 0.0 && max_data > 0.0 {
        (max_data / max_resid).log10()
    } else {
        f64::INFINITY
    };
    Ok(ReconstructionReport {
        objective,
        residuals: residuals.into_iter().map(|(f, r)| (f, r.norm())).collect(),
        solve,
        reduction_orders,
        objective_history: history,
        s: None,
        stagnated: false,
        clamped: false,
        warnings,
        error_grid: None,
    })
}

/// The fit frequency set for a table: `0..=m` for 1-D half tables, the full
/// symmetric box otherwise.
pub fn fit_freqs(table: &FourierTable, m: i64) -> Result<Vec<Index>> {
    if m < 0 || m > table.m() {
        return Err(Error::Validation(format!(
            "fit range {m} exceeds the table range {}",
            table.m()
        )));
    }
    Ok(if table.axes() == 1 && table.half_table() {
        half_range(m)
    } else {
        full_box(table.axes(), m)
    })
}

fn solve_system(system: &NormalSystem) -> Result<(DVector<f64>, SolveReport)> {
    let (x0, _) = solve_pinv(system, PINV_CUTOFF)?;
    iterative_refine(system, &x0, PINV_CUTOFF, REFINE_MAX_ITERATIONS, REFINE_TARGET)
}

/// Least-squares smooth fit: one tensor spline matching the table's
/// coefficients over the fit set.
pub fn fit_smooth(
    table: &FourierTable,
    space: SplineSpace,
    m: i64,
) -> Result<(SplineModel, ReconstructionReport)> {
    if space.axes() != table.axes() {
        return Err(Error::ShapeMismatch(format!(
            "{}-axis space against {}-axis table",
            space.axes(),
            table.axes()
        )));
    }
    let freqs = fit_freqs(table, m)?;
    let mut warnings = Vec::new();
    if freqs.len() < 2 * space.dim() {
        warnings.push(format!(
            "{} fit coefficients for {} unknowns: fewer than twice the model \
             dimension, the system leans on the pseudoinverse",
            freqs.len(),
            space.dim()
        ));
    }
    let basis = full_tensor_matrix(&space, &freqs)?;
    let system = assemble_normal(&basis, table)?;
    let (x, solve) = solve_system(&system)?;
    let coefficients: Vec<f64> = x.iter().copied().collect();
    let objective = system.objective(&x);
    let report = build_report(&basis, &coefficients, table, solve, vec![objective], warnings)?;
    Ok((SplineModel::new(space, coefficients)?, report))
}

/// One linear piecewise-1-D solve at a fixed cut point. Returns the
/// stacked coefficients `[a1, a2]`, the solver report, and the objective.
fn solve_piecewise_1d(
    table: &FourierTable,
    space: &SplineSpace,
    freqs: &[Index],
    s: f64,
) -> Result<(DVector<f64>, SolveReport, f64)> {
    let basis = piecewise_matrix_1d(space, freqs, s)?;
    let system = assemble_normal(&basis, table)?;
    let (x, solve) = solve_system(&system)?;
    let objective = system.objective(&x);
    Ok((x, solve, objective))
}

/// The reduced objective `φ(s)`: matching error minimized over the linear
/// coefficients at cut point `s`.
pub fn phi_1d(table: &FourierTable, space: &SplineSpace, m: i64, s: f64) -> Result<f64> {
    let freqs = fit_freqs(table, m)?;
    let basis = piecewise_matrix_1d(space, freqs.as_slice(), s)?;
    let system = assemble_normal(&basis, table)?;
    let (x, _) = solve_pinv(&system, PINV_CUTOFF)?;
    Ok(system.objective(&x))
}

/// One quasi-Newton update of the cut point: a secant step on the
/// central-difference slope of `φ`. `previous` carries the last `(s, slope)`
/// pair; the returned pair feeds the next call. `fd_step` overrides the
/// default difference step `1e-6 · min(s, 1-s)`.
///
/// The step is clamped to a quarter of the distance to the nearer domain
/// boundary. Without history (first call) the step is a quarter of that
/// distance, taken downhill.
pub fn refine_s(
    table: &FourierTable,
    space: &SplineSpace,
    m: i64,
    s: f64,
    previous: Option<(f64, f64)>,
    fd_step: Option<f64>,
) -> Result<(f64, f64)> {
    let phi = |t: f64| phi_1d(table, space, m, t);
    secant_step(&phi, s, previous, fd_step)
}

fn secant_step<F>(phi: &F, s: f64, previous: Option<(f64, f64)>, fd_step: Option<f64>) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(0.0 < s && s < 1.0) {
        return Err(Error::Validation(format!("cut point {s} outside (0,1)")));
    }
    let boundary = s.min(1.0 - s);
    let h = fd_step.unwrap_or(LEVELSET_FD_STEP * boundary);
    if !(h > 0.0 && h < boundary) {
        return Err(Error::Validation(format!("difference step {h} unusable at s = {s}")));
    }
    let fd_slope = |t: f64| -> Result<f64> { Ok((phi(t + h)? - phi(t - h)?) / (2.0 * h)) };
    let slope = fd_slope(s)?;
    let usable = |other: f64| (slope - other).abs() > 1e-8 * (slope.abs() + other.abs());
    let pair = match previous {
        Some((s_prev, slope_prev)) if usable(slope_prev) && s != s_prev => {
            Some((s_prev, slope_prev))
        }
        _ => {
            // No usable history (first call, or the previous slope matched
            // because both points sat on the same flank of the minimum):
            // probe downhill at expanding distances until the slope
            // changes, which brackets or at least localizes the minimum.
            let mut probe = None;
            let mut delta = 4.0 * h;
            while delta < 0.5 * boundary {
                let t = s - slope.signum() * delta;
                if t <= h || t >= 1.0 - h {
                    break;
                }
                let g = fd_slope(t)?;
                if usable(g) {
                    probe = Some((t, g));
                    break;
                }
                delta *= 4.0;
            }
            probe
        }
    };
    let mut step = match pair {
        Some((s_other, slope_other)) => -slope * (s - s_other) / (slope - slope_other),
        // Slope constant over the whole reachable range: walk downhill.
        None => -slope.signum() * 0.25 * boundary,
    };
    let clamp = 0.25 * boundary;
    if step.abs() > clamp {
        step = step.signum() * clamp;
    }
    Ok((s + step, slope))
}

/// Piecewise 1-D fit: alternates the linear coefficient solve at fixed `s`
/// with secant updates of `s`, up to [`MAX_OUTER_1D`] iterations or until
/// `|Δs|` drops below [`S_TOLERANCE`]; returns the best-objective iterate.
pub fn fit_piecewise_1d(
    table: &FourierTable,
    space: SplineSpace,
    m: i64,
    s0: f64,
) -> Result<(PiecewiseModel1D, ReconstructionReport)> {
    if space.axes() != 1 || table.axes() != 1 {
        return Err(Error::Validation("piecewise cut-point fitting is 1-D".into()));
    }
    if !(0.0 < s0 && s0 < 1.0) {
        return Err(Error::Validation(format!("initial cut {s0} outside (0,1)")));
    }
    let freqs = fit_freqs(table, m)?;
    let n = space.per_axis();

    // Truncated matching gives φ ripple minima spaced about 1/(2M) apart;
    // a seed that misses the global basin would strand the secant in one of
    // them. A coarse scan around the seed at that spacing picks the best
    // basin first.
    let mut s = s0;
    if m > 0 {
        let delta = 1.0 / (2.0 * (m as f64 + 1.0));
        let mut best_probe = (f64::INFINITY, s0);
        for j in -3i32..=3 {
            let t = s0 + j as f64 * delta;
            if !(0.0 < t && t < 1.0) {
                continue;
            }
            let value = phi_1d(table, &space, m, t)?;
            if value < best_probe.0 {
                best_probe = (value, t);
            }
        }
        s = best_probe.1;
    }
    let mut previous: Option<(f64, f64)> = None;
    let mut best: Option<(f64, f64, DVector<f64>, SolveReport)> = None;
    let mut history = Vec::new();
    let mut growth_streak = 0usize;
    let mut prev_objective = f64::INFINITY;
    let mut stagnated = false;
    let mut clamped = false;

    for _outer in 0..MAX_OUTER_1D {
        let (x, solve, objective) = solve_piecewise_1d(table, &space, &freqs, s)?;
        if best.as_ref().map_or(true, |(o, ..)| objective < *o) {
            best = Some((objective, s, x, solve));
        }
        history.push(best.as_ref().unwrap().0);
        if objective >= prev_objective {
            growth_streak += 1;
            if growth_streak >= 2 {
                stagnated = true;
                break;
            }
        } else {
            growth_streak = 0;
        }
        prev_objective = objective;

        let (mut s_next, slope) = refine_s(table, &space, m, s, previous, None)?;
        previous = Some((s, slope));
        if !(0.0 < s_next && s_next < 1.0) {
            s_next = s_next.clamp(0.25 * s, 1.0 - 0.25 * (1.0 - s));
            clamped = true;
        }
        let converged = (s_next - s).abs() <= S_TOLERANCE;
        s = s_next;
        if converged {
            break;
        }
    }

    let (objective, s_best, x, solve) = best.unwrap();
    // Re-derive the report at the best iterate.
    let basis = piecewise_matrix_1d(&space, &freqs, s_best)?;
    let coefficients: Vec<f64> = x.iter().copied().collect();
    let mut report = build_report(&basis, &coefficients, table, solve, history, Vec::new())?;
    report.s = Some(s_best);
    report.stagnated = stagnated;
    report.clamped = clamped;
    debug_assert!((report.objective - objective).abs() <= 1e-9 * (1.0 + objective));
    let model = PiecewiseModel1D {
        space,
        a1: coefficients[..n].to_vec(),
        a2: coefficients[n..].to_vec(),
        s: s_best,
    };
    Ok((model, report))
}

/// One linear piecewise-2-D solve at fixed level-set coefficients.
fn solve_piecewise_2d(
    table: &FourierTable,
    space: &SplineSpace,
    freqs: &[Index],
    levelset: &LevelSetSpline,
    refine: bool,
) -> Result<(DVector<f64>, SolveReport, f64)> {
    let basis = piecewise_matrix_2d(space, freqs, levelset)?;
    let system = assemble_normal(&basis, table)?;
    let (x, solve) = if refine {
        solve_system(&system)?
    } else {
        solve_pinv(&system, PINV_CUTOFF)?
    };
    let objective = system.objective(&x);
    Ok((x, solve, objective))
}

/// The reduced 2-D objective `Φ(b̄)` (plain pseudoinverse solve, no
/// refinement: used inside finite differences and line searches).
fn phi_2d(
    table: &FourierTable,
    space: &SplineSpace,
    freqs: &[Index],
    ls_space: SplineSpace,
    b: &[f64],
) -> Result<f64> {
    let levelset = LevelSetSpline::new(SplineModel::new(ls_space, b.to_vec())?)?;
    let (_, _, objective) = solve_piecewise_2d(table, space, freqs, &levelset, false)?;
    Ok(objective)
}

/// Central-difference gradient of `Φ` over the level-set coefficients,
/// components in parallel.
fn levelset_gradient(
    table: &FourierTable,
    space: &SplineSpace,
    freqs: &[Index],
    ls_space: SplineSpace,
    b: &[f64],
) -> Result<Vec<f64>> {
    (0..b.len())
        .into_par_iter()
        .map(|j| {
            let mut plus = b.to_vec();
            plus[j] += LEVELSET_FD_STEP;
            let mut minus = b.to_vec();
            minus[j] -= LEVELSET_FD_STEP;
            Ok((phi_2d(table, space, freqs, ls_space, &plus)?
                - phi_2d(table, space, freqs, ls_space, &minus)?)
                / (2.0 * LEVELSET_FD_STEP))
        })
        .collect()
}

/// Limited-memory secant direction (two-loop recursion over the last
/// [`SECANT_HISTORY`] coefficient/gradient difference pairs).
fn secant_direction(history: &[(Vec<f64>, Vec<f64>)], gradient: &[f64]) -> Vec<f64> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut q = gradient.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y) in history.iter().rev() {
        let sy = dot(s, y);
        if sy <= 1e-300 {
            alphas.push((0.0, false));
            continue;
        }
        let alpha = dot(s, &q) / sy;
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= alpha * yi;
        }
        alphas.push((alpha, true));
    }
    if let Some((s, y)) = history.last() {
        let sy = dot(s, y);
        let yy = dot(y, y);
        if sy > 1e-300 && yy > 1e-300 {
            let gamma = sy / yy;
            for qi in q.iter_mut() {
                *qi *= gamma;
            }
        }
    }
    for ((s, y), &(alpha, used)) in history.iter().zip(alphas.iter().rev()) {
        if !used {
            continue;
        }
        let sy = dot(s, y);
        let beta = dot(y, &q) / sy;
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alpha - beta) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Piecewise 2-D fit: outer loop of linear solves at the current level set
/// and limited-memory quasi-Newton updates of the level-set coefficients,
/// with a backtracking line search; returns the best-objective iterate.
pub fn fit_piecewise_2d(
    table: &FourierTable,
    space: SplineSpace,
    m: i64,
    seed_space: SplineSpace,
    seed_coefficients: &[f64],
    max_outer: usize,
) -> Result<(LevelSetModel2D, ReconstructionReport)> {
    if space.axes() != 2 || table.axes() != 2 || seed_space.axes() != 2 {
        return Err(Error::Validation("level-set piecewise fitting is 2-D".into()));
    }
    if seed_coefficients.len() != seed_space.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{} level-set coefficients for a {}-dimensional space",
            seed_coefficients.len(),
            seed_space.dim()
        )));
    }
    let max_outer = if max_outer == 0 { DEFAULT_OUTER_2D } else { max_outer };
    let freqs = fit_freqs(table, m)?;
    let dim = space.dim();

    let mut b = seed_coefficients.to_vec();
    let mut history: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut best: Option<(f64, Vec<f64>, DVector<f64>, SolveReport)> = None;
    let mut objective_history = Vec::new();
    let mut warnings = Vec::new();
    let mut stagnated = false;

    for outer in 0..max_outer {
        let levelset = LevelSetSpline::new(SplineModel::new(seed_space, b.clone())?)?;
        let (x, solve, objective) = solve_piecewise_2d(table, &space, &freqs, &levelset, true)?;
        let improved = best.as_ref().map_or(true, |(o, ..)| objective < *o);
        if improved {
            best = Some((objective, b.clone(), x, solve));
        }
        objective_history.push(best.as_ref().unwrap().0);
        if let Some(&prev) = objective_history.get(objective_history.len().wrapping_sub(2)) {
            if prev - objective_history[objective_history.len() - 1]
                <= OUTER_2D_RELATIVE_DECREASE * prev
            {
                break;
            }
        }
        if outer + 1 == max_outer {
            break;
        }

        let gradient = levelset_gradient(table, &space, &freqs, seed_space, &b)?;
        let direction = if history.is_empty() {
            // Scale the raw gradient so the first trial step moves the
            // level set by a modest amount.
            let gmax = gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            let scale = if gmax > 0.0 { 0.01 / gmax } else { 0.0 };
            gradient.iter().map(|g| -g * scale).collect::<Vec<f64>>()
        } else {
            secant_direction(&history, &gradient)
        };
        if direction.iter().all(|d| d.abs() == 0.0) {
            break;
        }

        // Backtracking on Φ along the quasi-Newton direction.
        let mut t = 1.0;
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        for _ in 0..=MAX_BACKTRACKS {
            let trial: Vec<f64> = b.iter().zip(&direction).map(|(bi, di)| bi + t * di).collect();
            let value = phi_2d(table, &space, &freqs, seed_space, &trial)?;
            if value < objective {
                accepted = Some((trial, value));
                break;
            }
            t *= 0.5;
        }
        let Some((b_next, _)) = accepted else {
            stagnated = true;
            warnings.push(format!(
                "line search exhausted after {MAX_BACKTRACKS} halvings at outer iteration {outer}"
            ));
            break;
        };
        let grad_next = levelset_gradient(table, &space, &freqs, seed_space, &b_next)?;
        let s_vec: Vec<f64> = b_next.iter().zip(&b).map(|(n, o)| n - o).collect();
        let y_vec: Vec<f64> = grad_next.iter().zip(&gradient).map(|(n, o)| n - o).collect();
        let sy: f64 = s_vec.iter().zip(&y_vec).map(|(s, y)| s * y).sum();
        if sy > 0.0 {
            history.push((s_vec, y_vec));
            if history.len() > SECANT_HISTORY {
                history.remove(0);
            }
        }
        b = b_next;
    }

    let (objective, b_best, x, solve) = best.unwrap();
    let levelset = LevelSetSpline::new(SplineModel::new(seed_space, b_best.clone())?)?;
    let basis = piecewise_matrix_2d(&space, &freqs, &levelset)?;
    let coefficients: Vec<f64> = x.iter().copied().collect();
    let mut report = build_report(&basis, &coefficients, table, solve, objective_history, warnings)?;
    report.stagnated = stagnated;
    debug_assert!((report.objective - objective).abs() <= 1e-9 * (1.0 + objective));
    let model = LevelSetModel2D {
        space,
        a1: coefficients[..dim].to_vec(),
        a2: coefficients[dim..].to_vec(),
        levelset_space: seed_space,
        b: b_best,
    };
    Ok((model, report))
}

/// Sup and RMS error of a fitted model against a registry truth function,
/// over a uniform grid with points closer than `exclusion_radius` to the
/// declared singularity left out.
pub fn error_report<F>(
    eval: F,
    truth: &TestFunction,
    grid: usize,
    exclusion_radius: f64,
) -> Result<(ErrorSummary, Vec<String>)>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if grid < 2 {
        return Err(Error::Validation("error grid needs at least 2 points per axis".into()));
    }
    if exclusion_radius < 0.0 {
        return Err(Error::Validation("exclusion radius must be nonnegative".into()));
    }
    let mut warnings = Vec::new();
    let mut radius = exclusion_radius;
    if matches!(truth.singularity, Singularity::None) && exclusion_radius > 0.0 {
        warnings.push("truth declares no singularity; exclusion radius ignored".into());
        radius = 0.0;
    }
    let distance = |p: &[f64]| -> f64 {
        match truth.singularity {
            Singularity::None => f64::INFINITY,
            Singularity::Point(s) => (p[0] - s).abs(),
            Singularity::Curve { distance, .. } => distance(p[0], p[1]),
        }
    };
    let axes = truth.axes;
    let coords: Vec<f64> = (0..grid).map(|i| (i as f64 + 0.5) / grid as f64).collect();
    let mut errors = Vec::new();
    let mut excluded = 0usize;
    let mut visit = |p: &[f64]| -> Result<()> {
        if distance(p) <= radius {
            excluded += 1;
            return Ok(());
        }
        errors.push(eval(p)? - (truth.eval)(p));
        Ok(())
    };
    match axes {
        1 => {
            for &x in &coords {
                visit(&[x])?;
            }
        }
        2 => {
            for &x in &coords {
                for &y in &coords {
                    visit(&[x, y])?;
                }
            }
        }
        _ => {
            for &x in &coords {
                for &y in &coords {
                    for &z in &coords {
                        visit(&[x, y, z])?;
                    }
                }
            }
        }
    }
    let (sup, rms) = sup_and_rms(&errors);
    Ok((
        ErrorSummary {
            sup,
            rms,
            grid,
            exclusion_radius: radius,
            points_used: errors.len(),
            points_excluded: excluded,
        },
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{coeffs_from_function, lookup};
    use crate::spline::quadratic_coeffs_1d;
    use crate::transforms::tensor_bspline_fourier;

    /// Half-range table of a representable 1-D spline: exact transforms of
    /// the model itself.
    fn spline_table_1d(space: &SplineSpace, coeffs: &[f64], m: i64) -> FourierTable {
        let mut t = FourierTable::new(1, m, true, true).unwrap();
        for n in 0..=m {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &c) in coeffs.iter().enumerate() {
                acc += c * tensor_bspline_fourier(space, &[i + 1], &[n]).unwrap();
            }
            t.insert([n, 0, 0], acc).unwrap();
        }
        t
    }

    fn piecewise_table_1d(space: &SplineSpace, a1: &[f64], a2: &[f64], s: f64, m: i64) -> FourierTable {
        let freqs = half_range(m);
        let basis = piecewise_matrix_1d(space, &freqs, s).unwrap();
        let n = space.per_axis();
        let mut t = FourierTable::new(1, m, true, true).unwrap();
        for (j, f) in freqs.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                acc += a1[i] * basis.value(i, j) + a2[i] * basis.value(n + i, j);
            }
            t.insert(*f, acc).unwrap();
        }
        t
    }

    fn circle_coeffs(space1: &SplineSpace) -> Vec<f64> {
        // x² + y² − 0.5 as a tensor spline (exact for order >= 3).
        let cx = quadratic_coeffs_1d(space1, -0.25, 0.0, 1.0);
        let n = space1.per_axis();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = cx[i] + cx[j];
            }
        }
        out
    }

    #[test]
    fn smooth_representable_is_recovered_exactly() {
        let space = SplineSpace::new(3, 3, 1).unwrap();
        let a = [0.3, -1.2, 0.7, 0.4, -0.2];
        let table = spline_table_1d(&space, &a, 12);
        let (model, report) = fit_smooth(&table, space, 12).unwrap();
        assert!(report.objective <= 1e-20, "objective {}", report.objective);
        for (got, want) in model.coefficients().iter().zip(&a) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn smooth1d_fit_reduces_residuals_six_orders() {
        let table = coeffs_from_function(lookup("smooth1d").unwrap(), 19, 160).unwrap();
        let space = SplineSpace::new(10, 10, 1).unwrap();
        let (_, report) = fit_smooth(&table, space, 19).unwrap();
        assert_eq!(report.residuals.len(), 20);
        assert!(
            report.reduction_orders >= 6.0,
            "only {} orders",
            report.reduction_orders
        );
    }

    #[test]
    fn zero_model_objective_is_data_energy() {
        let space = SplineSpace::new(3, 3, 1).unwrap();
        let a = [0.3, -1.2, 0.7, 0.4, -0.2];
        let table = spline_table_1d(&space, &a, 12);
        let freqs = half_range(12);
        let basis = full_tensor_matrix(&space, &freqs).unwrap();
        let zeros = vec![0.0; space.dim()];
        let energy: f64 = freqs.iter().map(|f| table.get(*f).unwrap().norm_sqr()).sum();
        let obj = coefficient_objective(&basis, &zeros, &table).unwrap();
        assert!((obj - energy).abs() <= 1e-14 * energy);
    }

    #[test]
    fn fitted_solution_is_linearly_optimal() {
        // Non-representable data, so the minimum is interior and nonzero.
        let table = coeffs_from_function(lookup("smooth1d").unwrap(), 12, 100).unwrap();
        let space = SplineSpace::new(3, 4, 1).unwrap();
        let (model, report) = fit_smooth(&table, space, 12).unwrap();
        let freqs = half_range(12);
        let basis = full_tensor_matrix(&space, &freqs).unwrap();
        for i in 0..space.dim() {
            for delta in [1e-3, -1e-3] {
                let mut c = model.coefficients().to_vec();
                c[i] += delta;
                let perturbed = coefficient_objective(&basis, &c, &table).unwrap();
                assert!(
                    perturbed >= report.objective - 1e-12,
                    "perturbing coefficient {i} by {delta} helped: {perturbed} < {}",
                    report.objective
                );
            }
        }
    }

    #[test]
    fn piecewise_1d_recovers_the_cut_and_the_pieces() {
        let space = SplineSpace::new(4, 5, 1).unwrap();
        let a1 = [0.5, 0.8, -0.3, 1.1, 0.2, -0.7, 0.4, 0.9];
        let a2 = [-0.6, 0.1, 0.9, -0.4, 0.7, 0.3, -1.0, 0.5];
        let table = piecewise_table_1d(&space, &a1, &a2, 0.37, 30);
        let (model, report) = fit_piecewise_1d(&table, space, 30, 0.35).unwrap();
        assert!(
            (model.s - 0.37).abs() <= 1e-8,
            "s = {} (history {:?})",
            model.s,
            report.objective_history
        );
        assert!(report.objective <= 1e-18, "objective {}", report.objective);
    }

    #[test]
    fn continuous_input_makes_the_pieces_agree() {
        let space = SplineSpace::new(3, 3, 1).unwrap();
        let a = [0.3, -1.2, 0.7, 0.4, -0.2];
        let table = spline_table_1d(&space, &a, 12);
        let (model, _report) = fit_piecewise_1d(&table, space, 12, 0.6).unwrap();
        let space1 = SplineSpace::new(3, 3, 1).unwrap();
        for i in 0..=40 {
            let x = model.s - 0.05 + 0.1 * i as f64 / 40.0;
            if !(0.0..=1.0).contains(&x) {
                continue;
            }
            let s1 = eval_1d(&space1, &model.a1, x);
            let s2 = eval_1d(&space1, &model.a2, x);
            assert!((s1 - s2).abs() <= 1e-6, "pieces differ by {} at {x}", s1 - s2);
        }
    }

    #[test]
    fn objective_at_true_cut_shrinks_with_the_mesh() {
        let table = coeffs_from_function(lookup("pw1d").unwrap(), 60, 480).unwrap();
        let coarse = SplineSpace::new(3, 5, 1).unwrap();
        let fine = SplineSpace::new(3, 10, 1).unwrap();
        let phi_coarse = phi_1d(&table, &coarse, 60, 0.5).unwrap();
        let phi_fine = phi_1d(&table, &fine, 60, 0.5).unwrap();
        assert!(
            phi_fine < phi_coarse,
            "fine {phi_fine} not below coarse {phi_coarse}"
        );
    }

    #[test]
    fn secant_is_exact_for_a_v_shape() {
        let phi = |s: f64| -> Result<f64> { Ok((s - 0.5).abs()) };
        // Step control wide enough that the difference straddles the
        // vertex, which makes the difference slope linear in s there and
        // the secant step exact.
        let h = Some(0.05);
        let mut s = 0.48;
        let mut prev = None;
        for _ in 0..3 {
            let (s_next, slope) = secant_step(&phi, s, prev, h).unwrap();
            prev = Some((s, slope));
            s = s_next;
        }
        assert!((s - 0.5).abs() <= 1e-10, "s = {s}");
    }

    #[test]
    fn refine_s_converges_from_a_1e3_offset() {
        let space = SplineSpace::new(4, 5, 1).unwrap();
        let a1 = [0.5, 0.8, -0.3, 1.1, 0.2, -0.7, 0.4, 0.9];
        let a2 = [-0.6, 0.1, 0.9, -0.4, 0.7, 0.3, -1.0, 0.5];
        let table = piecewise_table_1d(&space, &a1, &a2, 0.37, 30);
        let mut s = 0.371;
        let mut prev = None;
        let mut best = f64::INFINITY;
        for _ in 0..10 {
            let (s_next, slope) = refine_s(&table, &space, 30, s, prev, None).unwrap();
            prev = Some((s, slope));
            s = s_next.clamp(1e-3, 1.0 - 1e-3);
            best = best.min((s - 0.37).abs());
        }
        assert!(best <= 1e-6, "closest approach {best}");
    }

    #[test]
    fn piecewise_2d_representable_recovery() {
        let space = SplineSpace::new(3, 3, 2).unwrap();
        let space1 = SplineSpace::new(3, 3, 1).unwrap();
        let ls_space = SplineSpace::new(3, 3, 2).unwrap();
        let b = circle_coeffs(&space1);
        let n = space.per_axis();
        let mut a1 = vec![0.0; n * n];
        let mut a2 = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a1[i * n + j] = 0.2 + 0.1 * i as f64 - 0.05 * j as f64;
                a2[i * n + j] = -0.4 + 0.07 * j as f64 + 0.02 * (i * j) as f64;
            }
        }
        // Synthesize the exact Fourier data of the two-piece model.
        let freqs = full_box(2, 6);
        let levelset = LevelSetSpline::new(SplineModel::new(ls_space, b.clone()).unwrap()).unwrap();
        let basis = piecewise_matrix_2d(&space, &freqs, &levelset).unwrap();
        let mut table = FourierTable::new(2, 6, false, false).unwrap();
        for (j, f) in freqs.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n * n {
                acc += a1[i] * basis.value(i, j) + a2[i] * basis.value(n * n + i, j);
            }
            table.insert(*f, acc).unwrap();
        }
        let (model, report) =
            fit_piecewise_2d(&table, space, 6, ls_space, &b, 2).unwrap();
        assert!(report.objective <= 1e-14, "objective {}", report.objective);
        // The fitted level-set zero curve stays on x² + y² = 0.5.
        let ls = model.levelset().unwrap();
        let zero = ls.zero_level_polyline(150).unwrap();
        assert!(!zero.is_empty());
        for p in &zero {
            let d = (p[0] * p[0] + p[1] * p[1] - 0.5).abs() / (2.0 * 0.5f64.sqrt());
            assert!(d <= 1e-6, "zero point {p:?} at distance {d}");
        }
        // The outer loop never lets the best objective grow.
        for w in report.objective_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn zero_jump_2d_pieces_agree_across_the_curve() {
        let space = SplineSpace::new(3, 3, 2).unwrap();
        let space1 = SplineSpace::new(3, 3, 1).unwrap();
        let ls_space = SplineSpace::new(3, 3, 2).unwrap();
        let n = space.per_axis();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = 0.6 - 0.08 * i as f64 + 0.05 * j as f64;
            }
        }
        let freqs = full_box(2, 8);
        let basis = full_tensor_matrix(&space, &freqs).unwrap();
        let mut table = FourierTable::new(2, 8, false, false).unwrap();
        for (j, f) in freqs.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n * n {
                acc += a[i] * basis.value(i, j);
            }
            table.insert(*f, acc).unwrap();
        }
        let b = circle_coeffs(&space1);
        let (model, _report) = fit_piecewise_2d(&table, space, 8, ls_space, &b, 1).unwrap();
        let r = 0.5f64.sqrt();
        let ls = model.levelset().unwrap();
        for i in 1..40 {
            let th = std::f64::consts::FRAC_PI_2 * i as f64 / 40.0;
            let (x, y) = (r * th.cos(), r * th.sin());
            let on_piece1 = model.eval(&ls, x, y).unwrap();
            // Force the other piece by evaluating its spline directly.
            let mut other = 0.0;
            let (lox, hix) = model.space.active_range(x);
            let (loy, hiy) = model.space.active_range(y);
            for bi in lox..=hix {
                for bj in loy..=hiy {
                    other += model.a2[(bi - 1) * n + (bj - 1)]
                        * model.space.basis_value(bi, x)
                        * model.space.basis_value(bj, y);
                }
            }
            assert!(
                (on_piece1 - other).abs() <= 1e-6,
                "pieces differ by {} at angle {th}",
                on_piece1 - other
            );
        }
    }

    #[test]
    fn piece_selection_follows_the_cut() {
        let space = SplineSpace::new(3, 3, 1).unwrap();
        let model = PiecewiseModel1D {
            space,
            a1: vec![1.0; space.dim()],
            a2: vec![-1.0; space.dim()],
            s: 0.5,
        };
        // Partition of unity makes each piece constant.
        assert_eq!(model.eval(0.5).unwrap(), 1.0); // exactly on the cut: piece 1
        assert!(model.eval(0.499).unwrap() > 0.0);
        assert!(model.eval(0.501).unwrap() < 0.0);
        assert!(model.eval(1.5).is_err());
    }

    #[test]
    fn levelset_piece_selection_matches_the_sign() {
        let space = SplineSpace::new(3, 3, 2).unwrap();
        let space1 = SplineSpace::new(3, 3, 1).unwrap();
        let model = LevelSetModel2D {
            space,
            a1: vec![1.0; space.dim()],
            a2: vec![-1.0; space.dim()],
            levelset_space: space,
            b: circle_coeffs(&space1),
        };
        let ls = model.levelset().unwrap();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rand01 = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10_000 {
            let (x, y) = (rand01(), rand01());
            let v = model.eval(&ls, x, y).unwrap();
            let expect = if ls.eval(x, y) >= 0.0 { 1.0 } else { -1.0 };
            assert_eq!(v.signum(), expect, "at ({x}, {y})");
        }
    }

    #[test]
    fn error_report_modes() {
        // Representable fit against a constant truth: errors at rounding level.
        let truth = lookup("const1").unwrap();
        let table = coeffs_from_function(truth, 6, 48).unwrap();
        let space = SplineSpace::new(3, 3, 1).unwrap();
        let (model, _) = fit_smooth(&table, space, 6).unwrap();
        let (summary, warnings) =
            error_report(|p| model.eval(p), truth, 64, 0.1).unwrap();
        assert!(summary.sup <= 1e-10, "sup {}", summary.sup);
        assert_eq!(summary.points_excluded, 0);
        assert_eq!(warnings.len(), 1); // radius on a singularity-free truth

        // Discontinuous, non-representable truth: the error next to the
        // jump is O(1) without an exclusion strip and small with one.
        let truth = lookup("pw1d").unwrap();
        let table = coeffs_from_function(truth, 40, 320).unwrap();
        let space = SplineSpace::new(4, 10, 1).unwrap();
        let (model, _) = fit_piecewise_1d(&table, space, 40, 0.51).unwrap();
        let (with_strip, _) = error_report(|p| model.eval(p[0]), truth, 400, 0.05).unwrap();
        assert!(with_strip.points_excluded > 0);
        assert!(with_strip.sup < 0.05, "sup off the strip {}", with_strip.sup);
        // A model whose cut is slightly misplaced evaluates the wrong piece
        // next to the jump: O(1) error there, caught only without a strip.
        let mut shifted = model.clone();
        shifted.s += 0.005;
        let (without, _) = error_report(|p| shifted.eval(p[0]), truth, 400, 0.0).unwrap();
        assert!(without.sup > 0.2, "sup with no strip {}", without.sup);
        let (strip_again, _) = error_report(|p| shifted.eval(p[0]), truth, 400, 0.05).unwrap();
        assert!(strip_again.sup < 0.05);
    }

    #[test]
    fn preconditions_are_validated() {
        let space = SplineSpace::new(3, 3, 1).unwrap();
        let a = [0.3, -1.2, 0.7, 0.4, -0.2];
        let table = spline_table_1d(&space, &a, 12);
        assert!(fit_smooth(&table, space, 13).is_err()); // beyond the table
        assert!(fit_piecewise_1d(&table, space, 12, 0.0).is_err());
        assert!(fit_piecewise_1d(&table, space, 12, 1.0).is_err());
        let space2 = SplineSpace::new(3, 3, 2).unwrap();
        assert!(fit_smooth(&table, space2, 12).is_err()); // axis mismatch
        assert!(error_report(|_| Ok(0.0), lookup("const1").unwrap(), 1, 0.0).is_err());
        assert!(error_report(|_| Ok(0.0), lookup("const1").unwrap(), 8, -0.1).is_err());
    }
}
