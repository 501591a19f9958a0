//! Singularity detection from truncated Fourier data.
//!
//! A jump makes the truncated Fourier partial sum oscillate (the Gibbs
//! phenomenon), and the largest first-order difference of the partial sum on
//! a fine grid sits within a grid cell of the jump. 1-D jumps are located
//! directly; 2-D singularity curves are seeded by scanning horizontal and
//! vertical lines for such maxima (the point set `P0`), building a signed
//! distance net (`Q0`), and least-squares fitting a level-set spline to
//! `P0 ∪ Q0`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{partial_sum_grid, FourierTable};
use crate::solver::{solve_pinv, NormalSystem};
use crate::spline::{LevelSetSpline, SplineModel, SplineSpace};

/// Location and strength of a detected 1-D jump.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct JumpEstimate {
    /// Estimated jump location, strictly inside (0,1).
    pub s0: f64,
    /// Magnitude of the winning first-order difference.
    pub peak_magnitude: f64,
    /// Grid spacing at which the partial sum was sampled.
    pub grid_spacing: f64,
}

/// Acceptance threshold for a difference maximum, as a multiple of the
/// median difference magnitude on the same line. Below it the line is
/// considered smooth.
pub const PEAK_OVER_MEDIAN: f64 = 3.0;

/// Width of the boundary zone (in units of 1/terms) excluded from the
/// search, where the non-periodicity Gibbs spike lives.
const BOUNDARY_EXCLUSION: f64 = 2.0;

/// Scan lines collapse a square truncation to one axis, which both smears
/// genuine jumps hit at shallow incidence and strengthens the boundary
/// ringing relative to the per-line median. The line scans therefore use a
/// wider exclusion zone, a difference window of about half a Gibbs
/// wavelength, and a stricter peak-over-median test than the 1-D detector;
/// lines that hit the curve at shallow incidence simply contribute no point
/// (the perpendicular family covers those curve segments).
const SCANLINE_EXCLUSION: f64 = 6.0;
const SCANLINE_PEAK_OVER_MEDIAN: f64 = 5.0;

fn truncated(table: &FourierTable, terms: i64) -> Result<FourierTable> {
    if terms < 1 || terms > table.m() {
        return Err(Error::Validation(format!(
            "terms {terms} outside 1..={}",
            table.m()
        )));
    }
    let mut out = FourierTable::new(table.axes(), terms, table.half_table(), table.real_source())?;
    for idx in out.expected_indices() {
        let v = table
            .get(idx)
            .ok_or_else(|| Error::IncompleteData(idx[..table.axes()].to_vec()))?;
        out.insert(idx, v)?;
    }
    Ok(out)
}

/// Interior argmax of |difference over `window` grid steps| with boundary
/// exclusion and a median-based acceptance test. Returns the window
/// midpoint location.
fn scan_windowed(
    values: &[f64],
    window: usize,
    zone: f64,
    threshold: f64,
    dominance: f64,
) -> Option<(f64, f64)> {
    let p = values.len();
    if window == 0 || window >= p {
        return None;
    }
    let mut best: Option<(usize, f64)> = None;
    let mut global = 0.0f64;
    // The median is taken over the whole line, exclusion zone included:
    // the zone only hides the boundary spike from the argmax, while its
    // ordinary-sized differences still inform the noise level.
    let mut all: Vec<f64> = Vec::with_capacity(p - window);
    for j in 0..p - window {
        let d = (values[j + window] - values[j]).abs();
        all.push(d);
        global = global.max(d);
        let loc = (j as f64 + window as f64 / 2.0) / p as f64;
        if loc < zone || loc > 1.0 - zone {
            continue;
        }
        if best.map_or(true, |(_, bd)| d > bd) {
            best = Some((j, d));
        }
    }
    let (j, peak) = best?;
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = all[all.len() / 2];
    if peak < threshold * median.max(1e-300) || peak == 0.0 {
        return None;
    }
    // A non-periodic smooth input rings at the boundary; the ringing lobes
    // leak past any fixed exclusion zone and their first differences still
    // beat the line median, but they stay a small fraction of the boundary
    // spike itself, while a genuine interior jump is comparable to it.
    if peak < dominance * global {
        return None;
    }
    Some(((j as f64 + window as f64 / 2.0) / p as f64, peak))
}

/// An interior peak must carry at least this fraction of the largest
/// difference anywhere on the line (boundary spike included) to count as a
/// jump; boundary-ringing lobes measure well below it.
const BOUNDARY_DOMINANCE: f64 = 0.25;

fn scan_differences(values: &[f64], terms: i64) -> Option<(f64, f64)> {
    scan_windowed(
        values,
        1,
        BOUNDARY_EXCLUSION / terms as f64,
        PEAK_OVER_MEDIAN,
        BOUNDARY_DOMINANCE,
    )
}

/// Locates a jump of a 1-D function from its truncated Fourier data.
///
/// Evaluates the `terms`-term partial sum on a uniform grid and returns the
/// interior location of the maximal first-order difference; `None` when no
/// difference stands out against the line's median (smooth input), or when
/// all candidates fall in the boundary-spike exclusion zone.
pub fn detect_jump_1d(
    table: &FourierTable,
    terms: i64,
    grid_points: usize,
) -> Result<Option<JumpEstimate>> {
    if table.axes() != 1 {
        return Err(Error::Validation("jump detection is 1-D".into()));
    }
    if (grid_points as i64) < 10 * terms {
        return Err(Error::Validation(format!(
            "grid of {grid_points} points too coarse for {terms} terms (need ≥ {})",
            10 * terms
        )));
    }
    let trunc = truncated(table, terms)?;
    let values = partial_sum_grid(&trunc, grid_points)?;
    Ok(scan_differences(&values, terms).map(|(s0, peak)| JumpEstimate {
        s0,
        peak_magnitude: peak,
        grid_spacing: 1.0 / grid_points as f64,
    }))
}

/// Scan-line extraction of near-curve points (`P0`) from 2-D data.
///
/// `lines` horizontal lines at `y = (l+0.5)/lines` are scanned for the
/// maximal x-difference of the partial sum, and likewise vertical lines;
/// lines whose maximum does not stand out against their median contribute
/// no point.
pub fn scanline_points_2d(
    table: &FourierTable,
    lines: usize,
    points_per_line: usize,
) -> Result<Vec<[f64; 2]>> {
    if table.axes() != 2 || table.half_table() {
        return Err(Error::Validation("scan lines need a full-range 2-D table".into()));
    }
    table.validate_complete()?;
    let m = table.m();
    if (points_per_line as i64) <= 2 * m {
        return Err(Error::Validation(format!(
            "lines of {points_per_line} points cannot resolve frequencies up to {m}"
        )));
    }
    if lines < 1 {
        return Err(Error::Validation("need at least one line per direction".into()));
    }
    let entries: Vec<_> = table.iter().collect();
    let scan_one = |horizontal: bool, l: usize| -> Result<Option<[f64; 2]>> {
        let fixed = (l as f64 + 0.5) / lines as f64;
        // Collapse to a 1-D table along the scanned axis.
        let mut line = FourierTable::new(1, m, false, false)?;
        let mut acc = std::collections::BTreeMap::<i64, num_complex::Complex64>::new();
        for (idx, v) in &entries {
            let (scan_n, fixed_n) = if horizontal { (idx[0], idx[1]) } else { (idx[1], idx[0]) };
            let phase = num_complex::Complex64::new(
                0.0,
                crate::fourier::TAU * fixed_n as f64 * fixed,
            )
            .exp();
            *acc.entry(scan_n).or_insert(num_complex::Complex64::new(0.0, 0.0)) += v * phase;
        }
        for (n, v) in acc {
            line.insert([n, 0, 0], v)?;
        }
        let values = partial_sum_grid(&line, points_per_line)?;
        let window = (points_per_line as i64 / (2 * m)).max(1) as usize;
        let zone = SCANLINE_EXCLUSION / m as f64;
        // No dominance test here: a shallow-incidence jump smears to a
        // fraction of the boundary spike, and the stricter window/zone/
        // threshold combination already suppresses the boundary lobes.
        Ok(scan_windowed(&values, window, zone, SCANLINE_PEAK_OVER_MEDIAN, 0.0).map(|(loc, _)| {
            if horizontal {
                [loc, fixed]
            } else {
                [fixed, loc]
            }
        }))
    };
    let jobs: Vec<(bool, usize)> = (0..lines)
        .map(|l| (true, l))
        .chain((0..lines).map(|l| (false, l)))
        .collect();
    let found: Result<Vec<Option<[f64; 2]>>> = jobs
        .par_iter()
        .map(|&(horizontal, l)| scan_one(horizontal, l))
        .collect();
    Ok(found?.into_iter().flatten().collect())
}

/// How grid points are assigned a side (sign) relative to the point cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrientationRule {
    /// Positive when the point lies right of / above its nearest curve
    /// point (dot product with (1,1)); adequate for monotone-ish curves.
    RightOrAbove,
    /// Parity of crossings of the segment to the corner (1,1) with the
    /// chained point cloud; even parity is positive. Works for any simple
    /// curve separating the square.
    RayParity,
}

/// Seed data for the level-set fit: near-curve points, the signed net, and
/// the fitted initial coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveSeed {
    pub p0: Vec<[f64; 2]>,
    pub q0: Vec<([f64; 2], f64)>,
    pub coefficients: Vec<f64>,
    pub space: SplineSpace,
    /// All seed values were zero; the fitted spline is identically flat.
    pub flat: bool,
}

impl CurveSeed {
    pub fn levelset(&self) -> Result<LevelSetSpline> {
        LevelSetSpline::new(SplineModel::new(self.space, self.coefficients.clone())?)
    }
}

fn chain(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    // Nearest-neighbour ordering. Starting in the middle of an open curve
    // would leave a gap there (the walk covers one side, then jumps to the
    // other), so start from the point farthest from the centroid, which for
    // an open curve is near one of its ends; for a closed loop any start
    // works.
    let mut pts = points.to_vec();
    if pts.len() <= 2 {
        return pts;
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let mut start = 0;
    let mut start_d = -1.0;
    for (i, p) in pts.iter().enumerate() {
        let d = (p[0] - cx).powi(2) + (p[1] - cy).powi(2);
        if d > start_d {
            start_d = d;
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

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

fn min_distance(p: [f64; 2], cloud: &[[f64; 2]]) -> f64 {
    cloud
        .iter()
        .map(|q| (p[0] - q[0]).hypot(p[1] - q[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Builds the signed net `Q0`: a uniform grid over `[0,1]²` carrying the
/// signed distance to the point cloud, plus the cloud itself with value 0.
///
/// Grid points too close to the cloud to classify reliably (within one net
/// cell) are dropped.
pub fn signed_net(
    p0: &[[f64; 2]],
    net_size: usize,
    rule: OrientationRule,
) -> Result<Vec<([f64; 2], f64)>> {
    if p0.is_empty() {
        return Err(Error::Validation("empty point cloud".into()));
    }
    if net_size < 3 {
        return Err(Error::Validation(format!(
            "net size must be >= 3, got {net_size}"
        )));
    }
    let chained = chain(p0);
    // Skip abnormally long chain segments (jumps between curve ends) when
    // counting crossings.
    let seg_lens: Vec<f64> = chained
        .windows(2)
        .map(|w| (w[0][0] - w[1][0]).hypot(w[0][1] - w[1][1]))
        .collect();
    let mut sorted = seg_lens.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_len = sorted.get(sorted.len() / 2).copied().unwrap_or(0.0);
    let max_len = (5.0 * median_len).max(1e-6);

    let cell = 1.0 / (net_size - 1) as f64;
    let mut out: Vec<([f64; 2], f64)> = Vec::new();
    for gx in 0..net_size {
        for gy in 0..net_size {
            let p = [gx as f64 * cell, gy as f64 * cell];
            let dist = min_distance(p, p0);
            if dist < cell {
                // Too close to the curve to classify; the cloud itself
                // carries the zero values here.
                continue;
            }
            let positive = match rule {
                OrientationRule::RightOrAbove => {
                    let nearest = p0
                        .iter()
                        .min_by(|a, b| {
                            let da = (p[0] - a[0]).hypot(p[1] - a[1]);
                            let db = (p[0] - b[0]).hypot(p[1] - b[1]);
                            da.partial_cmp(&db).unwrap()
                        })
                        .unwrap();
                    (p[0] - nearest[0]) + (p[1] - nearest[1]) >= 0.0
                }
                OrientationRule::RayParity => {
                    // Three slightly different targets past the (1,1)
                    // corner; majority vote makes rays through chain
                    // vertices (which miss both adjacent segments under
                    // the strict crossing test) harmless.
                    let targets = [[1.0101, 1.0043], [1.0029, 1.0097], [1.0071, 1.0013]];
                    let mut even_votes = 0usize;
                    for target in targets {
                        let mut crossings = 0usize;
                        for (w, &len) in chained.windows(2).zip(&seg_lens) {
                            if len > max_len {
                                continue;
                            }
                            if segments_cross(p, target, w[0], w[1]) {
                                crossings += 1;
                            }
                        }
                        if crossings % 2 == 0 {
                            even_votes += 1;
                        }
                    }
                    even_votes >= 2
                }
            };
            out.push((p, if positive { dist } else { -dist }));
        }
    }
    for &p in p0 {
        out.push((p, 0.0));
    }
    Ok(out)
}

/// Least-squares fit of a tensor spline to scattered `(point, value)` data,
/// returning the seed with its fitted coefficients.
pub fn fit_initial_levelset(
    p0: &[[f64; 2]],
    q0: &[([f64; 2], f64)],
    space: SplineSpace,
) -> Result<CurveSeed> {
    if space.axes() != 2 {
        return Err(Error::InvalidSpace("level-set space must be bivariate".into()));
    }
    if q0.is_empty() {
        return Err(Error::Validation("no seed values to fit".into()));
    }
    let dim = space.dim();
    let n = space.per_axis();
    let npts = q0.len();
    // Collocation matrix: C[p, basis] = B_i(x) B_j(y).
    let mut c = DMatrix::zeros(npts, dim);
    let mut v = DVector::zeros(npts);
    for (row, (p, val)) in q0.iter().enumerate() {
        v[row] = *val;
        let (lox, hix) = space.active_range(p[0]);
        let (loy, hiy) = space.active_range(p[1]);
        for i in lox..=hix {
            let bx = space.basis_value(i, p[0]);
            for j in loy..=hiy {
                c[(row, (i - 1) * n + (j - 1))] = bx * space.basis_value(j, p[1]);
            }
        }
    }
    let a = c.transpose() * &c;
    let b = c.transpose() * &v;
    let sys = NormalSystem::from_parts(a, b)?;
    let (x, _report) = solve_pinv(&sys, 1e-13)?;
    let flat = v.iter().all(|&t| t == 0.0);
    Ok(CurveSeed {
        p0: p0.to_vec(),
        q0: q0.to_vec(),
        coefficients: x.iter().copied().collect(),
        space,
        flat,
    })
}
