//! Column decompositions of rectangular cells cut by an implicit curve.
//!
//! A cell is either uniform (the implicit function has one sign on it) or
//! cut. Cut cells are decomposed into Gauss columns along the axis on which
//! the curve is closer to a graph; each column records the crossing
//! ordinates of the curve along the other axis, found by scanning and
//! root polishing. Cells with ambiguous crossing structure are split into
//! four and recursed.
//!
//! Consumers integrate per column over the inner segments between
//! crossings, so quadrature panels never straddle the curve and the
//! decomposition varies smoothly with the implicit function — which is what
//! makes finite-difference gradients over level-set coefficients usable.

use crate::osc::gauss_on_interval;

#[derive(Debug, Clone, Copy)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }
    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterAxis {
    X,
    Y,
}

/// One Gauss column of a cut-cell decomposition.
///
/// When `axis == X` the column sits at `x = outer` and spans
/// `y ∈ [inner_lo, inner_hi]` with curve crossings at `cuts`.
#[derive(Debug, Clone)]
pub struct Column {
    pub axis: OuterAxis,
    pub outer: f64,
    pub weight: f64,
    pub inner_lo: f64,
    pub inner_hi: f64,
    pub cuts: Vec<f64>,
}

impl Column {
    /// Inner segments `[lo, hi]` between consecutive crossings.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        let mut bounds = Vec::with_capacity(self.cuts.len() + 2);
        bounds.push(self.inner_lo);
        bounds.extend(self.cuts.iter().copied());
        bounds.push(self.inner_hi);
        bounds
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[0], w[1]))
            .collect()
    }

    /// Point at the midpoint of a segment, in (x, y) order.
    pub fn segment_midpoint(&self, seg: (f64, f64)) -> (f64, f64) {
        let mid = 0.5 * (seg.0 + seg.1);
        match self.axis {
            OuterAxis::X => (self.outer, mid),
            OuterAxis::Y => (mid, self.outer),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CutConfig {
    /// Gauss order along the outer axis of a cut cell.
    pub outer_order: usize,
    /// Gauss order suggestion for consumers integrating inner segments.
    pub inner_order: usize,
    /// Sample intervals per edge when locating edge crossings.
    pub edge_scan: usize,
    /// Sample intervals per column when locating inner crossings.
    pub inner_scan: usize,
    /// Maximum quad-split recursion for ambiguous cells.
    pub max_depth: usize,
}

impl Default for CutConfig {
    fn default() -> Self {
        Self {
            outer_order: 24,
            inner_order: 24,
            edge_scan: 32,
            inner_scan: 8,
            max_depth: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    /// All sampled values are `>= 0` (true) or `< 0` (false).
    Uniform(bool),
    Cut,
}

/// Classifies a cell by signs on edges and an interior grid.
pub fn classify<F: Fn(f64, f64) -> f64>(rect: Rect, phi: &F, cfg: &CutConfig) -> CellClass {
    let mut pos = false;
    let mut neg = false;
    let n = cfg.edge_scan;
    for ix in 0..=n {
        let x = rect.x0 + rect.width() * ix as f64 / n as f64;
        for iy in 0..=n {
            let y = rect.y0 + rect.height() * iy as f64 / n as f64;
            // Interior coarse grid plus full-resolution edges.
            let interior = ix > 0 && ix < n && iy > 0 && iy < n;
            if interior && (ix % 4 != 0 || iy % 4 != 0) {
                continue;
            }
            if phi(x, y) >= 0.0 {
                pos = true;
            } else {
                neg = true;
            }
            if pos && neg {
                return CellClass::Cut;
            }
        }
    }
    CellClass::Uniform(pos)
}

/// Decomposes a cell (cut or not) into Gauss columns.
pub fn decompose<F: Fn(f64, f64) -> f64>(rect: Rect, phi: &F, cfg: &CutConfig) -> Vec<Column> {
    let mut out = Vec::new();
    decompose_rec(rect, phi, cfg, 0, &mut out);
    out
}

fn decompose_rec<F: Fn(f64, f64) -> f64>(
    rect: Rect,
    phi: &F,
    cfg: &CutConfig,
    depth: usize,
    out: &mut Vec<Column>,
) {
    let crossings = edge_crossings(rect, phi, cfg);
    if crossings.is_empty() {
        if interior_mixed(rect, phi) && depth < cfg.max_depth {
            quad_split(rect, phi, cfg, depth, out);
        } else {
            emit_columns(rect, OuterAxis::X, &[], phi, cfg, out);
        }
        return;
    }
    if crossings.len() == 2 {
        // If the curve turns too much inside the cell, no single graph
        // direction is accurate; split first.
        let scale = rect.width().min(rect.height());
        let gap = tangent_gap(crossings[0], crossings[1], phi, scale);
        if gap > std::f64::consts::PI / 6.0 && depth < cfg.max_depth {
            quad_split(rect, phi, cfg, depth, out);
            return;
        }
        let dx = (crossings[0].0 - crossings[1].0).abs();
        let dy = (crossings[0].1 - crossings[1].1).abs();
        let axis = if dx >= dy { OuterAxis::X } else { OuterAxis::Y };
        let breaks: Vec<f64> = crossings
            .iter()
            .map(|c| match axis {
                OuterAxis::X => c.0,
                OuterAxis::Y => c.1,
            })
            .collect();
        emit_columns(rect, axis, &breaks, phi, cfg, out);
        return;
    }
    if depth < cfg.max_depth {
        quad_split(rect, phi, cfg, depth, out);
    } else {
        // Give up on structure; per-column scanning still resolves the cuts.
        emit_columns(rect, OuterAxis::X, &[], phi, cfg, out);
    }
}

/// Angle in `[0, π/2]` between the curve tangents at two points, orientation
/// ignored. Gradients by central finite differences.
fn tangent_gap<F: Fn(f64, f64) -> f64>(
    p: (f64, f64),
    q: (f64, f64),
    phi: &F,
    scale: f64,
) -> f64 {
    let h = 1e-6 * scale.max(1e-9);
    let grad = |x: f64, y: f64| {
        (
            (phi(x + h, y) - phi(x - h, y)) / (2.0 * h),
            (phi(x, y + h) - phi(x, y - h)) / (2.0 * h),
        )
    };
    let (gx1, gy1) = grad(p.0, p.1);
    let (gx2, gy2) = grad(q.0, q.1);
    let n1 = (gx1 * gx1 + gy1 * gy1).sqrt();
    let n2 = (gx2 * gx2 + gy2 * gy2).sqrt();
    if n1 < 1e-300 || n2 < 1e-300 {
        return std::f64::consts::FRAC_PI_2;
    }
    let dot = ((gx1 * gx2 + gy1 * gy2) / (n1 * n2)).abs().min(1.0);
    dot.acos()
}

fn quad_split<F: Fn(f64, f64) -> f64>(
    rect: Rect,
    phi: &F,
    cfg: &CutConfig,
    depth: usize,
    out: &mut Vec<Column>,
) {
    let xm = 0.5 * (rect.x0 + rect.x1);
    let ym = 0.5 * (rect.y0 + rect.y1);
    for (x0, x1) in [(rect.x0, xm), (xm, rect.x1)] {
        for (y0, y1) in [(rect.y0, ym), (ym, rect.y1)] {
            decompose_rec(Rect { x0, x1, y0, y1 }, phi, cfg, depth + 1, out);
        }
    }
}

fn interior_mixed<F: Fn(f64, f64) -> f64>(rect: Rect, phi: &F) -> bool {
    let mut pos = false;
    let mut neg = false;
    for ix in 0..7 {
        for iy in 0..7 {
            let x = rect.x0 + rect.width() * (ix as f64 + 0.5) / 7.0;
            let y = rect.y0 + rect.height() * (iy as f64 + 0.5) / 7.0;
            if phi(x, y) >= 0.0 {
                pos = true;
            } else {
                neg = true;
            }
            if pos && neg {
                return true;
            }
        }
    }
    false
}

/// Crossing points of the zero set with the four cell edges.
fn edge_crossings<F: Fn(f64, f64) -> f64>(rect: Rect, phi: &F, cfg: &CutConfig) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut scan = |fixed_is_y: bool, fixed: f64, lo: f64, hi: f64| {
        let n = cfg.edge_scan;
        let f = |t: f64| {
            if fixed_is_y {
                phi(t, fixed)
            } else {
                phi(fixed, t)
            }
        };
        let mut prev_t = lo;
        let mut prev_v = f(lo);
        for i in 1..=n {
            let t = lo + (hi - lo) * i as f64 / n as f64;
            let v = f(t);
            if (prev_v >= 0.0) != (v >= 0.0) {
                let root = crate::spline::polish_root(&mut |u| f(u), prev_t, t, 0.0);
                let p = if fixed_is_y { (root, fixed) } else { (fixed, root) };
                pts.push(p);
            }
            prev_t = t;
            prev_v = v;
        }
    };
    scan(true, rect.y0, rect.x0, rect.x1);
    scan(true, rect.y1, rect.x0, rect.x1);
    scan(false, rect.x0, rect.y0, rect.y1);
    scan(false, rect.x1, rect.y0, rect.y1);
    // Merge near-duplicates (curve through a corner hits two edges).
    let tol = 1e-9 * (rect.width() + rect.height());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        if !merged
            .iter()
            .any(|q| (q.0 - p.0).abs() < tol && (q.1 - p.1).abs() < tol)
        {
            merged.push(p);
        }
    }
    merged
}

fn emit_columns<F: Fn(f64, f64) -> f64>(
    rect: Rect,
    axis: OuterAxis,
    interior_breaks: &[f64],
    phi: &F,
    cfg: &CutConfig,
    out: &mut Vec<Column>,
) {
    let (outer_lo, outer_hi, inner_lo, inner_hi) = match axis {
        OuterAxis::X => (rect.x0, rect.x1, rect.y0, rect.y1),
        OuterAxis::Y => (rect.y0, rect.y1, rect.x0, rect.x1),
    };
    let mut breaks: Vec<f64> = vec![outer_lo];
    for &b in interior_breaks {
        if b > outer_lo + 1e-14 && b < outer_hi - 1e-14 {
            breaks.push(b);
        }
    }
    breaks.push(outer_hi);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in breaks.windows(2) {
        if w[1] - w[0] < 1e-14 {
            continue;
        }
        let (nodes, weights) = gauss_on_interval(cfg.outer_order, w[0], w[1]);
        for (&t, &wt) in nodes.iter().zip(&weights) {
            let cuts = column_cuts(axis, t, inner_lo, inner_hi, phi, cfg);
            out.push(Column {
                axis,
                outer: t,
                weight: wt,
                inner_lo,
                inner_hi,
                cuts,
            });
        }
    }
}

fn column_cuts<F: Fn(f64, f64) -> f64>(
    axis: OuterAxis,
    outer: f64,
    lo: f64,
    hi: f64,
    phi: &F,
    cfg: &CutConfig,
) -> Vec<f64> {
    let f = |t: f64| match axis {
        OuterAxis::X => phi(outer, t),
        OuterAxis::Y => phi(t, outer),
    };
    let n = cfg.inner_scan;
    let mut cuts = Vec::new();
    let mut prev_t = lo;
    let mut prev_v = f(lo);
    for i in 1..=n {
        let t = lo + (hi - lo) * i as f64 / n as f64;
        let v = f(t);
        if (prev_v >= 0.0) != (v >= 0.0) {
            cuts.push(crate::spline::polish_root(&mut |u| f(u), prev_t, t, 0.0));
        }
        prev_t = t;
        prev_v = v;
    }
    cuts
}
