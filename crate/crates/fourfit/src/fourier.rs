//! Fourier coefficient tables: synthesis from test functions, partial-sum
//! evaluation, symmetry handling, and file I/O.
//!
//! Convention: `f(x) = Σ_n f̂_n e^{2πi n·x}` on `[0,1]^axes` with
//! `f̂_n = ∫ f(x) e^{−2πi n·x} dx`. Real 1-D sources store the half table
//! `n = 0..=M`; 2-D/3-D sources store the full symmetric box.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::cutcell::{self, CellClass, CutConfig, Rect};
use crate::error::{Error, Result};
use crate::osc::gauss_on_interval;

pub const TAU: f64 = std::f64::consts::TAU;

/// Multi-index with unused trailing axes fixed at zero.
pub type Index = [i64; 3];

/// A table of complex Fourier coefficients on `[0,1]^axes`.
#[derive(Debug, Clone)]
pub struct FourierTable {
    axes: usize,
    m: i64,
    half_table: bool,
    real_source: bool,
    entries: BTreeMap<Index, Complex64>,
}

impl FourierTable {
    pub fn new(axes: usize, m: i64, half_table: bool, real_source: bool) -> Result<Self> {
        if !(1..=3).contains(&axes) {
            return Err(Error::Validation(format!("axis count must be 1..=3, got {axes}")));
        }
        if m < 0 {
            return Err(Error::Validation(format!("index bound must be >= 0, got {m}")));
        }
        if half_table && axes != 1 {
            return Err(Error::Validation("half-table mode is 1-D only".into()));
        }
        Ok(Self {
            axes,
            m,
            half_table,
            real_source,
            entries: BTreeMap::new(),
        })
    }

    pub fn axes(&self) -> usize {
        self.axes
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    pub fn half_table(&self) -> bool {
        self.half_table
    }

    pub fn real_source(&self) -> bool {
        self.real_source
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn check_bounds(&self, idx: Index) -> Result<()> {
        for (a, &n) in idx.iter().enumerate() {
            if a < self.axes {
                let lo = if self.half_table { 0 } else { -self.m };
                if n < lo || n > self.m {
                    return Err(Error::IndexOutOfRange(format!(
                        "index {idx:?} outside declared bound {}",
                        self.m
                    )));
                }
            } else if n != 0 {
                return Err(Error::IndexOutOfRange(format!(
                    "index {idx:?} has nonzero component beyond axis count {}",
                    self.axes
                )));
            }
        }
        Ok(())
    }

    pub fn insert(&mut self, idx: Index, value: Complex64) -> Result<()> {
        self.check_bounds(idx)?;
        if self.entries.insert(idx, value).is_some() {
            return Err(Error::Validation(format!("duplicate index {idx:?}")));
        }
        Ok(())
    }

    pub fn get(&self, idx: Index) -> Option<Complex64> {
        self.entries.get(&idx).copied()
    }

    /// Coefficient at an arbitrary signed index, using Hermitian symmetry
    /// for half tables.
    pub fn get_full(&self, idx: Index) -> Option<Complex64> {
        if let Some(v) = self.entries.get(&idx) {
            return Some(*v);
        }
        if self.half_table {
            let neg = [-idx[0], -idx[1], -idx[2]];
            return self.entries.get(&neg).map(|v| v.conj());
        }
        None
    }

    /// Stored indices in deterministic (sorted) order.
    pub fn indices(&self) -> impl Iterator<Item = Index> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Index, Complex64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    /// Every index inside the declared bound.
    pub fn expected_indices(&self) -> Vec<Index> {
        let range: Vec<i64> = if self.half_table {
            (0..=self.m).collect()
        } else {
            (-self.m..=self.m).collect()
        };
        let mut out = Vec::new();
        match self.axes {
            1 => {
                for &n in &range {
                    out.push([n, 0, 0]);
                }
            }
            2 => {
                for &n1 in &range {
                    for &n2 in &range {
                        out.push([n1, n2, 0]);
                    }
                }
            }
            _ => {
                for &n1 in &range {
                    for &n2 in &range {
                        for &n3 in &range {
                            out.push([n1, n2, n3]);
                        }
                    }
                }
            }
        }
        out
    }

    /// Errors if any index inside the declared bound is missing.
    pub fn validate_complete(&self) -> Result<()> {
        for idx in self.expected_indices() {
            if !self.entries.contains_key(&idx) {
                return Err(Error::IncompleteData(idx[..self.axes].to_vec()));
            }
        }
        Ok(())
    }

    /// Checks Hermitian symmetry for full-range tables of real sources.
    pub fn validate_symmetry(&self) -> Result<()> {
        if !self.real_source || self.half_table {
            return Ok(());
        }
        let scale = self
            .entries
            .values()
            .fold(0.0f64, |acc, v| acc.max(v.norm()))
            .max(1e-300);
        for (idx, v) in &self.entries {
            let neg = [-idx[0], -idx[1], -idx[2]];
            if let Some(w) = self.entries.get(&neg) {
                if (v - w.conj()).norm() > 1e-13 * scale {
                    return Err(Error::SymmetryViolation(format!(
                        "entry {idx:?} is not the conjugate of its mirror"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Multiplies every entry by a real scalar.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in out.entries.values_mut() {
            *v *= factor;
        }
        out
    }

    /// `Σ |f̂_n|^2` over the stored entries.
    pub fn energy(&self) -> f64 {
        self.entries.values().map(|v| v.norm_sqr()).sum()
    }
}

/// Declared singularity structure of a test function.
#[derive(Debug, Clone, Copy)]
pub enum Singularity {
    None,
    /// Jump location in (0,1).
    Point(f64),
    /// Implicit curve `implicit(x,y) = 0`; `distance` is the distance of a
    /// point to the curve.
    Curve {
        implicit: fn(f64, f64) -> f64,
        distance: fn(f64, f64) -> f64,
    },
}

/// A closed-form test function on `[0,1]^axes` with optional known
/// singularity descriptor.
#[derive(Debug, Clone, Copy)]
pub struct TestFunction {
    pub id: &'static str,
    pub axes: usize,
    pub eval: fn(&[f64]) -> f64,
    /// Imaginary part, for complex-valued sources. `None` means real.
    pub eval_im: Option<fn(&[f64]) -> f64>,
    pub singularity: Singularity,
}

impl TestFunction {
    pub fn real_source(&self) -> bool {
        self.eval_im.is_none()
    }

    pub fn eval_complex(&self, p: &[f64]) -> Complex64 {
        let re = (self.eval)(p);
        let im = self.eval_im.map(|f| f(p)).unwrap_or(0.0);
        Complex64::new(re, im)
    }
}

fn f_const1(_: &[f64]) -> f64 {
    1.0
}
fn f_mode1_re(p: &[f64]) -> f64 {
    (TAU * p[0]).cos()
}
fn f_mode1_im(p: &[f64]) -> f64 {
    (TAU * p[0]).sin()
}
fn f_smooth1d(p: &[f64]) -> f64 {
    let x = p[0];
    x * x.exp() + (8.0 * x).sin()
}
fn f_pw1d(p: &[f64]) -> f64 {
    let x = p[0];
    if x >= 0.5 {
        (5.0 * x).sin()
    } else {
        1.0 / ((x - 0.5).powi(2) + 0.5)
    }
}
fn f_step03(p: &[f64]) -> f64 {
    if p[0] >= 0.3 {
        1.0
    } else {
        0.0
    }
}
fn f_smooth2d(p: &[f64]) -> f64 {
    let (x, y) = (p[0], p[1]);
    10.0 / (1.0 + 10.0 * (x * x + (y - 1.0) * (y - 1.0))) + (10.0 * (x - y)).sin()
}
fn f_pw2d(p: &[f64]) -> f64 {
    let (x, y) = (p[0], p[1]);
    let r = x * x + y * y - 0.5;
    let base = r * (10.0 * (x + y)).sin();
    if r >= 0.0 {
        base
    } else {
        base + 2.0 * x
    }
}
fn pw2d_implicit(x: f64, y: f64) -> f64 {
    x * x + y * y - 0.5
}
fn pw2d_distance(x: f64, y: f64) -> f64 {
    ((x * x + y * y).sqrt() - 0.5f64.sqrt()).abs()
}
fn f_smooth3d(p: &[f64]) -> f64 {
    let (x, y, z) = (p[0], p[1], p[2]);
    (x * x + y * y + z * z - 0.5) * (4.0 * (x + y - z)).sin()
}

/// Registry of the built-in test functions.
pub const REGISTRY: &[TestFunction] = &[
    TestFunction {
        id: "const1",
        axes: 1,
        eval: f_const1,
        eval_im: None,
        singularity: Singularity::None,
    },
    TestFunction {
        id: "mode1",
        axes: 1,
        eval: f_mode1_re,
        eval_im: Some(f_mode1_im),
        singularity: Singularity::None,
    },
    TestFunction {
        id: "smooth1d",
        axes: 1,
        eval: f_smooth1d,
        eval_im: None,
        singularity: Singularity::None,
    },
    TestFunction {
        id: "pw1d",
        axes: 1,
        eval: f_pw1d,
        eval_im: None,
        singularity: Singularity::Point(0.5),
    },
    TestFunction {
        id: "step03",
        axes: 1,
        eval: f_step03,
        eval_im: None,
        singularity: Singularity::Point(0.3),
    },
    TestFunction {
        id: "smooth2d",
        axes: 2,
        eval: f_smooth2d,
        eval_im: None,
        singularity: Singularity::None,
    },
    TestFunction {
        id: "pw2d",
        axes: 2,
        eval: f_pw2d,
        eval_im: None,
        singularity: Singularity::Curve {
            implicit: pw2d_implicit,
            distance: pw2d_distance,
        },
    },
    TestFunction {
        id: "smooth3d",
        axes: 3,
        eval: f_smooth3d,
        eval_im: None,
        singularity: Singularity::None,
    },
];

pub fn lookup(id: &str) -> Option<&'static TestFunction> {
    REGISTRY.iter().find(|f| f.id == id)
}

// ---------------------------------------------------------------------------
// Synthesis: piecewise interpolatory (Filon-type) quadrature + FFT.
// ---------------------------------------------------------------------------

const NODES_PER_CELL: usize = 11;

/// Chebyshev nodes (first kind) in (0,1).
fn cell_nodes(q: usize) -> Vec<f64> {
    (0..q)
        .map(|t| 0.5 * (1.0 - (std::f64::consts::PI * (2.0 * t as f64 + 1.0) / (2.0 * q as f64)).cos()))
        .collect()
}

/// Per-node oscillatory weights `W_t(n) = (1/C) ∫_0^1 L_t(v) e^{-2πi n v / C} dv`
/// for all frequencies in `freqs`, where `L_t` are the Lagrange cardinal
/// polynomials on `nodes`.
///
/// Evaluated by Gauss–Legendre with `L_t` in barycentric form: the phase per
/// cell is at most `2π·q/8` radians (the resolution floor guarantees at
/// least 8 samples per retained frequency), so order 24 is exact to machine
/// precision, and barycentric evaluation avoids the catastrophic
/// cancellation of monomial Lagrange coefficients at this degree.
fn filon_weights(cells: usize, freqs: &[i64], nodes: &[f64]) -> Vec<Vec<Complex64>> {
    let q = nodes.len();
    let (gx, gw) = gauss_on_interval(24, 0.0, 1.0);
    let mut bary = vec![1.0; q];
    for t in 0..q {
        for s in 0..q {
            if s != t {
                bary[t] /= nodes[t] - nodes[s];
            }
        }
    }
    // lvals[t][g] = L_t(gx[g])
    let mut lvals = vec![vec![0.0; gx.len()]; q];
    for (g, &x) in gx.iter().enumerate() {
        let terms: Vec<f64> = (0..q).map(|t| bary[t] / (x - nodes[t])).collect();
        let denom: f64 = terms.iter().sum();
        for t in 0..q {
            lvals[t][g] = terms[t] / denom;
        }
    }
    let c = cells as f64;
    (0..q)
        .map(|t| {
            freqs
                .iter()
                .map(|&n| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (g, &x) in gx.iter().enumerate() {
                        acc += gw[g]
                            * lvals[t][g]
                            * Complex64::new(0.0, -TAU * n as f64 * x / c).exp();
                    }
                    acc / c
                })
                .collect()
        })
        .collect()
}

/// Synthesizes the Fourier table of a test function.
///
/// `resolution` is the per-axis sample budget; it must be at least `8·M`.
/// Smooth regions use piecewise Chebyshev interpolation integrated exactly
/// against the exponentials, with the cell sums accelerated by an FFT.
/// Cells straddling a declared singularity are corrected by quadrature that
/// splits exactly at the singularity.
pub fn coeffs_from_function(f: &TestFunction, m: i64, resolution: usize) -> Result<FourierTable> {
    if m < 0 {
        return Err(Error::Validation("index bound must be >= 0".into()));
    }
    let min_res = 8 * m.max(1) as usize;
    if resolution < min_res {
        return Err(Error::Validation(format!(
            "resolution {resolution} too low; need at least {min_res} (8 per retained frequency)"
        )));
    }
    let q = NODES_PER_CELL;
    let cells = resolution.div_ceil(q).max(4);
    match f.axes {
        1 => synth_1d(f, m, cells),
        2 => synth_2d(f, m, cells),
        _ => synth_3d(f, m, cells),
    }
}

fn synth_1d(f: &TestFunction, m: i64, cells: usize) -> Result<FourierTable> {
    let real = f.real_source();
    let half = real;
    let freqs: Vec<i64> = if half { (0..=m).collect() } else { (-m..=m).collect() };
    let nodes = cell_nodes(NODES_PER_CELL);
    let weights = filon_weights(cells, &freqs, &nodes);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(cells);
    // Per-node DFT over the cells.
    let mut spectra: Vec<Vec<Complex64>> = Vec::with_capacity(NODES_PER_CELL);
    for &tau in &nodes {
        let mut buf: Vec<Complex64> = (0..cells)
            .map(|c| f.eval_complex(&[(c as f64 + tau) / cells as f64]))
            .collect();
        fft.process(&mut buf);
        spectra.push(buf);
    }
    let mut table = FourierTable::new(1, m, half, real)?;
    for (fi, &n) in freqs.iter().enumerate() {
        let bin = n.rem_euclid(cells as i64) as usize;
        let mut acc = Complex64::new(0.0, 0.0);
        for t in 0..NODES_PER_CELL {
            acc += weights[t][fi] * spectra[t][bin];
        }
        table.insert([n, 0, 0], acc)?;
    }

    if let Singularity::Point(s) = f.singularity {
        correct_point_cells(f, s, cells, &nodes, &freqs, &weights, &mut table)?;
    }
    Ok(table)
}

fn correct_point_cells(
    f: &TestFunction,
    s: f64,
    cells: usize,
    nodes: &[f64],
    freqs: &[i64],
    weights: &[Vec<Complex64>],
    table: &mut FourierTable,
) -> Result<()> {
    let c = (s * cells as f64).floor() as usize;
    if c >= cells {
        return Ok(());
    }
    let (lo, hi) = (c as f64 / cells as f64, (c + 1) as f64 / cells as f64);
    if s <= lo || s >= hi {
        return Ok(()); // singularity sits on a cell boundary
    }
    // Subtract the interpolant's contribution on the straddling cell.
    let samples: Vec<Complex64> = nodes
        .iter()
        .map(|&tau| f.eval_complex(&[(c as f64 + tau) / cells as f64]))
        .collect();
    let (gl_lo, gw_lo) = gauss_on_interval(24, lo, s);
    let (gl_hi, gw_hi) = gauss_on_interval(24, s, hi);
    for (fi, &n) in freqs.iter().enumerate() {
        let phase = Complex64::new(0.0, -TAU * n as f64 * c as f64 / cells as f64).exp();
        let mut bad = Complex64::new(0.0, 0.0);
        for t in 0..nodes.len() {
            bad += weights[t][fi] * samples[t];
        }
        bad *= phase;
        let mut good = Complex64::new(0.0, 0.0);
        for (&x, &w) in gl_lo.iter().zip(&gw_lo).chain(gl_hi.iter().zip(&gw_hi)) {
            good += w * f.eval_complex(&[x]) * Complex64::new(0.0, -TAU * n as f64 * x).exp();
        }
        let idx = [n, 0, 0];
        let old = table.get(idx).unwrap();
        table.entries.insert(idx, old - bad + good);
    }
    Ok(())
}

fn synth_2d(f: &TestFunction, m: i64, cells: usize) -> Result<FourierTable> {
    let freqs: Vec<i64> = (-m..=m).collect();
    let nf = freqs.len();
    let q = NODES_PER_CELL;
    let nodes = cell_nodes(q);
    let weights = filon_weights(cells, &freqs, &nodes);

    // Samples g[t1][t2][c1][c2] and their 2-D DFT over (c1, c2).
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(cells);
    let mut spectra: Vec<Vec<Complex64>> = Vec::with_capacity(q * q);
    for &t1 in &nodes {
        for &t2 in &nodes {
            let mut grid = vec![Complex64::new(0.0, 0.0); cells * cells];
            for c1 in 0..cells {
                let x = (c1 as f64 + t1) / cells as f64;
                for c2 in 0..cells {
                    let y = (c2 as f64 + t2) / cells as f64;
                    grid[c1 * cells + c2] = f.eval_complex(&[x, y]);
                }
            }
            fft_2d(&mut grid, cells, fft.as_ref());
            spectra.push(grid);
        }
    }

    let mut table = FourierTable::new(2, m, false, f.real_source())?;
    for (fi, &n1) in freqs.iter().enumerate() {
        let b1 = n1.rem_euclid(cells as i64) as usize;
        for (fj, &n2) in freqs.iter().enumerate() {
            let b2 = n2.rem_euclid(cells as i64) as usize;
            let mut acc = Complex64::new(0.0, 0.0);
            for t1 in 0..q {
                let w1 = weights[t1][fi];
                for t2 in 0..q {
                    acc += w1 * weights[t2][fj] * spectra[t1 * q + t2][b1 * cells + b2];
                }
            }
            table.insert([n1, n2, 0], acc)?;
        }
    }
    let _ = nf;

    if let Singularity::Curve { implicit, .. } = f.singularity {
        correct_curve_cells(f, implicit, cells, &nodes, &freqs, &weights, &mut table)?;
    }
    Ok(table)
}

fn fft_2d(grid: &mut [Complex64], n: usize, fft: &dyn rustfft::Fft<f64>) {
    // Rows (contiguous), then columns via transpose.
    for row in grid.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = grid[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            grid[i * n + j] = col[i];
        }
    }
}

fn correct_curve_cells(
    f: &TestFunction,
    implicit: fn(f64, f64) -> f64,
    cells: usize,
    nodes: &[f64],
    freqs: &[i64],
    weights: &[Vec<Complex64>],
    table: &mut FourierTable,
) -> Result<()> {
    let q = nodes.len();
    let nf = freqs.len();
    let cfg = CutConfig::default();
    let phi = |x: f64, y: f64| implicit(x, y);
    for c1 in 0..cells {
        let x0 = c1 as f64 / cells as f64;
        let x1 = (c1 + 1) as f64 / cells as f64;
        for c2 in 0..cells {
            let y0 = c2 as f64 / cells as f64;
            let y1 = (c2 + 1) as f64 / cells as f64;
            let rect = Rect { x0, x1, y0, y1 };
            if classify_rect(rect, &phi, &cfg) != CellClass::Cut {
                continue;
            }
            // Interpolant contribution to subtract.
            let samples: Vec<Complex64> = nodes
                .iter()
                .flat_map(|&t1| {
                    nodes
                        .iter()
                        .map(move |&t2| ((c1 as f64 + t1) / cells as f64, (c2 as f64 + t2) / cells as f64))
                })
                .map(|(x, y)| f.eval_complex(&[x, y]))
                .collect();
            // Accurate cut integral over the cell.
            let columns = cutcell::decompose(rect, &phi, &cfg);
            let mut good = vec![Complex64::new(0.0, 0.0); nf * nf];
            for col in &columns {
                // Inner 1-D transforms for every inner frequency.
                let mut inner = vec![Complex64::new(0.0, 0.0); nf];
                for seg in col.segments() {
                    let (gx, gw) = gauss_on_interval(cfg.inner_order, seg.0, seg.1);
                    for (&t, &w) in gx.iter().zip(&gw) {
                        let (x, y) = match col.axis {
                            cutcell::OuterAxis::X => (col.outer, t),
                            cutcell::OuterAxis::Y => (t, col.outer),
                        };
                        let v = w * f.eval_complex(&[x, y]);
                        let inner_freq_coord = t;
                        for (fi, &n) in freqs.iter().enumerate() {
                            inner[fi] += v
                                * Complex64::new(0.0, -TAU * n as f64 * inner_freq_coord).exp();
                        }
                    }
                }
                for (fo, &no) in freqs.iter().enumerate() {
                    let phase = col.weight
                        * Complex64::new(0.0, -TAU * no as f64 * col.outer).exp();
                    match col.axis {
                        cutcell::OuterAxis::X => {
                            // outer is x → outer frequency is the first index
                            for fi in 0..nf {
                                good[fo * nf + fi] += phase * inner[fi];
                            }
                        }
                        cutcell::OuterAxis::Y => {
                            for fi in 0..nf {
                                good[fi * nf + fo] += phase * inner[fi];
                            }
                        }
                    }
                }
            }
            for (fi, &n1) in freqs.iter().enumerate() {
                let p1 = Complex64::new(0.0, -TAU * n1 as f64 * c1 as f64 / cells as f64).exp();
                for (fj, &n2) in freqs.iter().enumerate() {
                    let p2 =
                        Complex64::new(0.0, -TAU * n2 as f64 * c2 as f64 / cells as f64).exp();
                    let mut bad = Complex64::new(0.0, 0.0);
                    for t1 in 0..q {
                        let w1 = weights[t1][fi];
                        for t2 in 0..q {
                            bad += w1 * weights[t2][fj] * samples[t1 * q + t2];
                        }
                    }
                    bad *= p1 * p2;
                    let idx = [n1, n2, 0];
                    let old = table.get(idx).unwrap();
                    table.entries.insert(idx, old - bad + good[fi * nf + fj]);
                }
            }
        }
    }
    Ok(())
}

fn classify_rect<F: Fn(f64, f64) -> f64>(rect: Rect, phi: &F, cfg: &CutConfig) -> CellClass {
    cutcell::classify(rect, phi, cfg)
}

fn synth_3d(f: &TestFunction, m: i64, cells: usize) -> Result<FourierTable> {
    if !matches!(f.singularity, Singularity::None) {
        return Err(Error::Validation(
            "3-D synthesis supports smooth functions only".into(),
        ));
    }
    let freqs: Vec<i64> = (-m..=m).collect();
    let nf = freqs.len();
    let q = NODES_PER_CELL;
    let nodes = cell_nodes(q);
    let weights = filon_weights(cells, &freqs, &nodes);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(cells);
    // spectra[t1][t2][t3] → 3-D DFT grid
    let mut spectra: Vec<Vec<Complex64>> = Vec::with_capacity(q * q * q);
    for &t1 in &nodes {
        for &t2 in &nodes {
            for &t3 in &nodes {
                let mut grid = vec![Complex64::new(0.0, 0.0); cells * cells * cells];
                for c1 in 0..cells {
                    let x = (c1 as f64 + t1) / cells as f64;
                    for c2 in 0..cells {
                        let y = (c2 as f64 + t2) / cells as f64;
                        for c3 in 0..cells {
                            let z = (c3 as f64 + t3) / cells as f64;
                            grid[(c1 * cells + c2) * cells + c3] = f.eval_complex(&[x, y, z]);
                        }
                    }
                }
                fft_3d(&mut grid, cells, fft.as_ref());
                spectra.push(grid);
            }
        }
    }

    let mut table = FourierTable::new(3, m, false, f.real_source())?;
    for (fi, &n1) in freqs.iter().enumerate() {
        let b1 = n1.rem_euclid(cells as i64) as usize;
        for (fj, &n2) in freqs.iter().enumerate() {
            let b2 = n2.rem_euclid(cells as i64) as usize;
            for (fk, &n3) in freqs.iter().enumerate() {
                let b3 = n3.rem_euclid(cells as i64) as usize;
                let mut acc = Complex64::new(0.0, 0.0);
                for t1 in 0..q {
                    let w1 = weights[t1][fi];
                    for t2 in 0..q {
                        let w12 = w1 * weights[t2][fj];
                        for t3 in 0..q {
                            acc += w12
                                * weights[t3][fk]
                                * spectra[(t1 * q + t2) * q + t3][(b1 * cells + b2) * cells + b3];
                        }
                    }
                }
                table.insert([n1, n2, n3], acc)?;
            }
        }
    }
    let _ = nf;
    Ok(table)
}

fn fft_3d(grid: &mut [Complex64], n: usize, fft: &dyn rustfft::Fft<f64>) {
    // Last axis is contiguous.
    for row in grid.chunks_mut(n) {
        fft.process(row);
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    // Middle axis.
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                buf[j] = grid[(i * n + j) * n + k];
            }
            fft.process(&mut buf);
            for j in 0..n {
                grid[(i * n + j) * n + k] = buf[j];
            }
        }
    }
    // First axis.
    for j in 0..n {
        for k in 0..n {
            for i in 0..n {
                buf[i] = grid[(i * n + j) * n + k];
            }
            fft.process(&mut buf);
            for i in 0..n {
                grid[(i * n + j) * n + k] = buf[i];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Partial sums
// ---------------------------------------------------------------------------

/// Partial sum at an arbitrary point (direct summation).
pub fn partial_sum_at(table: &FourierTable, point: &[f64]) -> Result<Complex64> {
    if point.len() != table.axes {
        return Err(Error::ShapeMismatch(format!(
            "expected a {}-vector",
            table.axes
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (idx, v) in table.iter() {
        let mut phase = 0.0;
        for (a, &x) in point.iter().enumerate() {
            phase += idx[a] as f64 * x;
        }
        acc += v * Complex64::new(0.0, TAU * phase).exp();
        if table.half_table && idx[0] > 0 {
            acc += v.conj() * Complex64::new(0.0, -TAU * phase).exp();
        }
    }
    Ok(acc)
}

/// Partial sum on the uniform grid `x_j = j/P` (row-major over axes),
/// evaluated with an FFT. Returns the real part for real sources; errors if
/// their imaginary part exceeds 1e-10 anywhere (symmetry violation).
pub fn partial_sum_grid(table: &FourierTable, points_per_axis: usize) -> Result<Vec<f64>> {
    table.validate_complete()?;
    let p = points_per_axis;
    if p <= 2 * table.m as usize {
        return Err(Error::Validation(format!(
            "grid of {p} points cannot resolve frequencies up to {}",
            table.m
        )));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(p);
    let values: Vec<Complex64> = match table.axes {
        1 => {
            let mut buf = vec![Complex64::new(0.0, 0.0); p];
            for (idx, v) in table.iter() {
                let bin = idx[0].rem_euclid(p as i64) as usize;
                buf[bin] += v;
                if table.half_table && idx[0] > 0 {
                    let nbin = (-idx[0]).rem_euclid(p as i64) as usize;
                    buf[nbin] += v.conj();
                }
            }
            fft.process(&mut buf);
            buf
        }
        2 => {
            let mut buf = vec![Complex64::new(0.0, 0.0); p * p];
            for (idx, v) in table.iter() {
                let b1 = idx[0].rem_euclid(p as i64) as usize;
                let b2 = idx[1].rem_euclid(p as i64) as usize;
                buf[b1 * p + b2] += v;
            }
            for row in buf.chunks_mut(p) {
                fft.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); p];
            for j in 0..p {
                for i in 0..p {
                    col[i] = buf[i * p + j];
                }
                fft.process(&mut col);
                for i in 0..p {
                    buf[i * p + j] = col[i];
                }
            }
            buf
        }
        _ => {
            return Err(Error::Validation(
                "grid partial sums support 1 or 2 axes".into(),
            ))
        }
    };
    if table.real_source {
        for (i, v) in values.iter().enumerate() {
            if v.im.abs() > 1e-10 {
                return Err(Error::SymmetryViolation(format!(
                    "imaginary part {} at grid point {i} of a real source",
                    v.im
                )));
            }
        }
    }
    Ok(values.iter().map(|v| v.re).collect())
}

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, location: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        location: location.to_string(),
        message: format!("bad float {s:?}: {e}"),
    })
}

/// Saves a table as JSON (`.json`) or CSV (any other extension).
///
/// Values are written as decimal strings with 17 significant digits, which
/// round-trip `f64` exactly.
pub fn save_table(table: &FourierTable, path: &Path) -> Result<()> {
    table.validate_complete()?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    if path.extension().is_some_and(|e| e == "json") {
        writeln!(out, "{{")?;
        writeln!(
            out,
            "  \"header\": {{\"axes\": {}, \"m\": {}, \"half_table\": {}, \"real_source\": {}}},",
            table.axes, table.m, table.half_table, table.real_source
        )?;
        writeln!(out, "  \"entries\": [")?;
        let n = table.entries.len();
        for (i, (idx, v)) in table.iter().enumerate() {
            let mut rec: Vec<String> = idx[..table.axes].iter().map(|n| n.to_string()).collect();
            rec.push(format!("\"{}\"", fmt17(v.re)));
            rec.push(format!("\"{}\"", fmt17(v.im)));
            let sep = if i + 1 < n { "," } else { "" };
            writeln!(out, "    [{}]{}", rec.join(", "), sep)?;
        }
        writeln!(out, "  ]")?;
        writeln!(out, "}}")?;
    } else {
        writeln!(
            out,
            "axes={},m={},half_table={},real_source={}",
            table.axes, table.m, table.half_table, table.real_source
        )?;
        for (idx, v) in table.iter() {
            let mut rec: Vec<String> = idx[..table.axes].iter().map(|n| n.to_string()).collect();
            rec.push(fmt17(v.re));
            rec.push(fmt17(v.im));
            writeln!(out, "{}", rec.join(","))?;
        }
    }
    Ok(())
}

/// Loads a table saved by [`save_table`], validating completeness and
/// symmetry flags.
pub fn load_table(path: &Path) -> Result<FourierTable> {
    let table = if path.extension().is_some_and(|e| e == "json") {
        load_json(path)?
    } else {
        load_csv(path)?
    };
    table.validate_complete()?;
    table.validate_symmetry().map_err(|e| {
        Error::Validation(format!("symmetry flag inconsistent with entries: {e}"))
    })?;
    Ok(table)
}

fn load_json(path: &Path) -> Result<FourierTable> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: format!("{}:{}", path.display(), e.line()),
        message: e.to_string(),
    })?;
    let header = value.get("header").ok_or_else(|| Error::Parse {
        location: path.display().to_string(),
        message: "missing header".into(),
    })?;
    let get_u = |k: &str| -> Result<i64> {
        header
            .get(k)
            .and_then(|v| v.as_i64())
            .ok_or_else(|| Error::Parse {
                location: path.display().to_string(),
                message: format!("missing header field {k}"),
            })
    };
    let get_b = |k: &str| -> Result<bool> {
        header
            .get(k)
            .and_then(|v| v.as_bool())
            .ok_or_else(|| Error::Parse {
                location: path.display().to_string(),
                message: format!("missing header field {k}"),
            })
    };
    let axes = get_u("axes")? as usize;
    let mut table = FourierTable::new(axes, get_u("m")?, get_b("half_table")?, get_b("real_source")?)?;
    let entries = value
        .get("entries")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::Parse {
            location: path.display().to_string(),
            message: "missing entries array".into(),
        })?;
    for (i, rec) in entries.iter().enumerate() {
        let loc = format!("{} entry {}", path.display(), i);
        let arr = rec.as_array().ok_or_else(|| Error::Parse {
            location: loc.clone(),
            message: "entry is not an array".into(),
        })?;
        if arr.len() != axes + 2 {
            return Err(Error::Parse {
                location: loc,
                message: format!("expected {} fields, got {}", axes + 2, arr.len()),
            });
        }
        let mut idx = [0i64; 3];
        for a in 0..axes {
            idx[a] = arr[a].as_i64().ok_or_else(|| Error::Parse {
                location: loc.clone(),
                message: "index is not an integer".into(),
            })?;
        }
        let re = parse_f64(
            arr[axes].as_str().ok_or_else(|| Error::Parse {
                location: loc.clone(),
                message: "re is not a string".into(),
            })?,
            &loc,
        )?;
        let im = parse_f64(
            arr[axes + 1].as_str().ok_or_else(|| Error::Parse {
                location: loc.clone(),
                message: "im is not a string".into(),
            })?,
            &loc,
        )?;
        table.insert(idx, Complex64::new(re, im))?;
    }
    Ok(table)
}

fn load_csv(path: &Path) -> Result<FourierTable> {
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        location: format!("{}:1", path.display()),
        message: "empty file".into(),
    })??;
    let mut axes = None;
    let mut m = None;
    let mut half = None;
    let mut real = None;
    for field in header.split(',') {
        let (k, v) = field.split_once('=').ok_or_else(|| Error::Parse {
            location: format!("{}:1", path.display()),
            message: format!("bad header field {field:?}"),
        })?;
        match k.trim() {
            "axes" => axes = v.trim().parse::<usize>().ok(),
            "m" => m = v.trim().parse::<i64>().ok(),
            "half_table" => half = v.trim().parse::<bool>().ok(),
            "real_source" => real = v.trim().parse::<bool>().ok(),
            other => {
                return Err(Error::Parse {
                    location: format!("{}:1", path.display()),
                    message: format!("unknown header key {other:?}"),
                })
            }
        }
    }
    let (axes, m, half, real) = match (axes, m, half, real) {
        (Some(a), Some(m), Some(h), Some(r)) => (a, m, h, r),
        _ => {
            return Err(Error::Parse {
                location: format!("{}:1", path.display()),
                message: "incomplete header".into(),
            })
        }
    };
    let mut table = FourierTable::new(axes, m, half, real)?;
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let loc = format!("{}:{}", path.display(), lineno + 2);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != axes + 2 {
            return Err(Error::Parse {
                location: loc,
                message: format!("expected {} fields, got {}", axes + 2, fields.len()),
            });
        }
        let mut idx = [0i64; 3];
        for a in 0..axes {
            idx[a] = fields[a].trim().parse::<i64>().map_err(|e| Error::Parse {
                location: loc.clone(),
                message: format!("bad index {:?}: {e}", fields[a]),
            })?;
        }
        let re = parse_f64(fields[axes], &loc)?;
        let im = parse_f64(fields[axes + 1], &loc)?;
        table.insert(idx, Complex64::new(re, im))?;
    }
    Ok(table)
}
