//! Fourier coefficients of (restricted) B-spline basis functions.
//!
//! 1-D transforms are analytic: each polynomial piece of the basis is
//! integrated exactly against the exponential. Restrictions to `[0,s]` /
//! `(s,1]` just clip the integration bounds, so left + right equals the
//! whole transform to machine precision. 2-D level-set restrictions use
//! exact 1-D integrals on uniform knot cells and Gauss column quadrature on
//! cells cut by the zero level set.

use std::collections::HashMap;
use std::io::{Read as _, Write as _};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cutcell::{self, CellClass, CutConfig, OuterAxis, Rect};
use crate::error::{Error, Result};
use crate::fourier::{FourierTable, Index, TAU};
use crate::osc::poly_osc_integral;
use crate::spline::{cardinal_pieces, LevelSetSpline, SplineSpace};

/// Side of a 1-D cut point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `[0, s]`
    Left,
    /// `(s, 1]`
    Right,
}

/// Side of a level-set curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionSide {
    /// `{ D(x,y) >= 0 }`
    NonNegative,
    /// `{ D(x,y) < 0 }`
    Negative,
}

fn check_index(space: &SplineSpace, i: usize) -> Result<()> {
    if i < 1 || i > space.per_axis() {
        return Err(Error::IndexOutOfRange(format!(
            "basis index {i} outside 1..={}",
            space.per_axis()
        )));
    }
    Ok(())
}

/// `∫_a^b B(x − i·d) e^{−2πi n x} dx`, exact.
///
/// The basis pieces are polynomials on knot intervals; each is clipped to
/// `[a, b] ∩ [0, 1]` and integrated in closed form.
pub fn basis_fourier_on(
    space: &SplineSpace,
    i: usize,
    n: i64,
    a: f64,
    b: f64,
) -> Result<Complex64> {
    check_index(space, i)?;
    let k = space.order();
    let d = space.d();
    let pieces = cardinal_pieces(k);
    let lo = a.max(0.0);
    let hi = b.min(1.0);
    let w = Complex64::new(0.0, -TAU * n as f64 * d);
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, poly) in pieces.iter().enumerate() {
        // Piece j lives on x ∈ [(i−k+j)d, (i−k+j+1)d], local u = x/d − (i−k+j).
        let base = i as f64 - k as f64 + j as f64;
        let x0 = (base * d).max(lo);
        let x1 = ((base + 1.0) * d).min(hi);
        if x1 <= x0 {
            continue;
        }
        let ua = x0 / d - base;
        let ub = x1 / d - base;
        let phase = Complex64::new(0.0, -TAU * n as f64 * d * base).exp();
        acc += d * phase * poly_osc_integral(poly, ua, ub, w);
    }
    Ok(acc)
}

/// `∫_0^1 B(x − i·d) e^{−2πi n x} dx`.
pub fn bspline_fourier_1d(space: &SplineSpace, i: usize, n: i64) -> Result<Complex64> {
    basis_fourier_on(space, i, n, 0.0, 1.0)
}

/// The transform of the basis restricted to one side of the cut `s`.
pub fn restricted_bspline_fourier_1d(
    space: &SplineSpace,
    i: usize,
    n: i64,
    s: f64,
    side: Side,
) -> Result<Complex64> {
    if !(0.0 < s && s < 1.0) {
        return Err(Error::Validation(format!("cut point {s} outside (0,1)")));
    }
    match side {
        Side::Left => basis_fourier_on(space, i, n, 0.0, s),
        Side::Right => basis_fourier_on(space, i, n, s, 1.0),
    }
}

/// Tensor-product transform on the full square/cube: the product of the
/// per-axis 1-D transforms.
pub fn tensor_bspline_fourier(
    space: &SplineSpace,
    idx: &[usize],
    freq: &[i64],
) -> Result<Complex64> {
    if idx.len() != space.axes() || freq.len() != space.axes() {
        return Err(Error::ShapeMismatch(format!(
            "expected {}-component index and frequency",
            space.axes()
        )));
    }
    let mut acc = Complex64::new(1.0, 0.0);
    for a in 0..space.axes() {
        acc *= bspline_fourier_1d(space, idx[a], freq[a])?;
    }
    Ok(acc)
}

fn side_matches(value: f64, side: RegionSide) -> bool {
    (value >= 0.0) == (side == RegionSide::NonNegative)
}

/// Transform of a tensor basis restricted to one side of a level-set curve.
///
/// Knot cells fully on one side use the exact separable 1-D integrals; cells
/// cut by the zero level set are decomposed into Gauss columns whose inner
/// segments never straddle the curve, with the inner basis integral exact.
pub fn restricted_tensor_fourier(
    space: &SplineSpace,
    idx: &[usize],
    freq: &[i64],
    levelset: &LevelSetSpline,
    side: RegionSide,
) -> Result<Complex64> {
    if space.axes() != 2 {
        return Err(Error::InvalidSpace(
            "level-set restriction is 2-D only".into(),
        ));
    }
    if idx.len() != 2 || freq.len() != 2 {
        return Err(Error::ShapeMismatch("expected 2-component index and frequency".into()));
    }
    for &i in idx {
        check_index(space, i)?;
    }
    let k = space.order() as i64;
    let cells = space.inv_d() as i64;
    let dd = space.d();
    let cfg = CutConfig::default();
    let phi = |x: f64, y: f64| levelset.eval(x, y);
    let (i, j) = (idx[0], idx[1]);
    let (n1, n2) = (freq[0], freq[1]);
    let cx_lo = (i as i64 - k).max(0);
    let cx_hi = (i as i64 - 1).min(cells - 1);
    let cy_lo = (j as i64 - k).max(0);
    let cy_hi = (j as i64 - 1).min(cells - 1);
    let mut acc = Complex64::new(0.0, 0.0);
    for cx in cx_lo..=cx_hi {
        let (x0, x1) = (cx as f64 * dd, (cx + 1) as f64 * dd);
        for cy in cy_lo..=cy_hi {
            let (y0, y1) = (cy as f64 * dd, (cy + 1) as f64 * dd);
            let rect = Rect { x0, x1, y0, y1 };
            match cutcell::classify(rect, &phi, &cfg) {
                CellClass::Uniform(pos) => {
                    if pos == (side == RegionSide::NonNegative) {
                        acc += basis_fourier_on(space, i, n1, x0, x1)?
                            * basis_fourier_on(space, j, n2, y0, y1)?;
                    }
                }
                CellClass::Cut => {
                    for col in cutcell::decompose(rect, &phi, &cfg) {
                        let (outer_idx, outer_n, inner_idx, inner_n) = match col.axis {
                            OuterAxis::X => (i, n1, j, n2),
                            OuterAxis::Y => (j, n2, i, n1),
                        };
                        let bv = space.basis_value(outer_idx, col.outer);
                        if bv == 0.0 {
                            continue;
                        }
                        let outer_factor = col.weight
                            * bv
                            * Complex64::new(0.0, -TAU * outer_n as f64 * col.outer).exp();
                        for seg in col.segments() {
                            let (mx, my) = col.segment_midpoint(seg);
                            if !side_matches(phi(mx, my), side) {
                                continue;
                            }
                            acc += outer_factor
                                * basis_fourier_on(space, inner_idx, inner_n, seg.0, seg.1)?;
                        }
                    }
                }
            }
        }
    }
    Ok(acc)
}

/// Entrywise multiply by `i·n_axis`, the transform that turns coefficients
/// of `f` into coefficients proportional to those of `∂f/∂x_axis`. The
/// constant factor is immaterial for jump localization, so no 2π is applied.
pub fn derivative_table(table: &FourierTable, axis: usize) -> Result<FourierTable> {
    if table.half_table() {
        return Err(Error::Validation(
            "derivative transform needs a full-range table (both index signs)".into(),
        ));
    }
    if axis >= table.axes() {
        return Err(Error::IndexOutOfRange(format!(
            "axis {axis} outside 0..{}",
            table.axes()
        )));
    }
    let mut out = FourierTable::new(table.axes(), table.m(), false, false)?;
    for (idx, v) in table.iter() {
        out.insert(idx, v * Complex64::new(0.0, idx[axis] as f64))?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Batched matrices
// ---------------------------------------------------------------------------

/// Fourier coefficients of a family of basis functions, rows = bases (the
/// two restricted families concatenated when piecewise), columns = the fit
/// frequency set.
#[derive(Debug, Clone)]
pub struct BasisCoeffMatrix {
    freqs: Vec<Index>,
    rows: Vec<Vec<Complex64>>,
}

impl BasisCoeffMatrix {
    pub fn new(freqs: Vec<Index>, rows: Vec<Vec<Complex64>>) -> Result<Self> {
        for row in &rows {
            if row.len() != freqs.len() {
                return Err(Error::ShapeMismatch(format!(
                    "row has {} entries, expected {}",
                    row.len(),
                    freqs.len()
                )));
            }
            if row.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::Numeric("non-finite transform entry".into()));
            }
        }
        Ok(Self { freqs, rows })
    }

    pub fn freqs(&self) -> &[Index] {
        &self.freqs
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.freqs.len()
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.rows[r]
    }

    pub fn value(&self, r: usize, c: usize) -> Complex64 {
        self.rows[r][c]
    }

    /// Writes the matrix as a small binary cache: magic, dimensions, the
    /// frequency set, then row-major complex doubles (little endian).
    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(b"FFBC\x01\x00\x00\x00")?;
        out.write_all(&(self.rows.len() as u64).to_le_bytes())?;
        out.write_all(&(self.freqs.len() as u64).to_le_bytes())?;
        for f in &self.freqs {
            for &c in f {
                out.write_all(&c.to_le_bytes())?;
            }
        }
        for row in &self.rows {
            for v in row {
                out.write_all(&v.re.to_le_bytes())?;
                out.write_all(&v.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load_binary(path: &Path) -> Result<Self> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic)?;
        if &magic != b"FFBC\x01\x00\x00\x00" {
            return Err(Error::Parse {
                location: path.display().to_string(),
                message: "bad magic or unsupported cache version".into(),
            });
        }
        let mut b8 = [0u8; 8];
        file.read_exact(&mut b8)?;
        let n_rows = u64::from_le_bytes(b8) as usize;
        file.read_exact(&mut b8)?;
        let n_cols = u64::from_le_bytes(b8) as usize;
        if n_rows.saturating_mul(n_cols) > 1 << 28 {
            return Err(Error::Parse {
                location: path.display().to_string(),
                message: format!("implausible dimensions {n_rows}x{n_cols}"),
            });
        }
        let mut freqs = Vec::with_capacity(n_cols);
        for _ in 0..n_cols {
            let mut f = [0i64; 3];
            for c in f.iter_mut() {
                file.read_exact(&mut b8)?;
                *c = i64::from_le_bytes(b8);
            }
            freqs.push(f);
        }
        let mut rows = Vec::with_capacity(n_rows);
        for _ in 0..n_rows {
            let mut row = Vec::with_capacity(n_cols);
            for _ in 0..n_cols {
                file.read_exact(&mut b8)?;
                let re = f64::from_le_bytes(b8);
                file.read_exact(&mut b8)?;
                let im = f64::from_le_bytes(b8);
                row.push(Complex64::new(re, im));
            }
            rows.push(row);
        }
        Self::new(freqs, rows)
    }
}

fn axis_freqs(freqs: &[Index], axis: usize) -> Vec<i64> {
    let mut v: Vec<i64> = freqs.iter().map(|f| f[axis]).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Transform matrix of the full (unrestricted) tensor basis.
///
/// Rows follow the `SplineModel` coefficient layout (1-based per-axis
/// indices, last axis fastest).
pub fn full_tensor_matrix(space: &SplineSpace, freqs: &[Index]) -> Result<BasisCoeffMatrix> {
    let axes = space.axes();
    let n = space.per_axis();
    // Per-axis transform lookup: values[axis][(i-1)][freq value]
    let mut values: Vec<HashMap<i64, Vec<Complex64>>> = Vec::with_capacity(axes);
    for a in 0..axes {
        let uniq = axis_freqs(freqs, a);
        let mut map = HashMap::new();
        for &nf in &uniq {
            let col: Result<Vec<Complex64>> =
                (1..=n).map(|i| bspline_fourier_1d(space, i, nf)).collect();
            map.insert(nf, col?);
        }
        values.push(map);
    }
    let dim = space.dim();
    let rows: Vec<Vec<Complex64>> = (0..dim)
        .map(|flat| {
            // Decode flat index, last axis fastest.
            let mut idx = [0usize; 3];
            let mut rem = flat;
            for a in (0..axes).rev() {
                idx[a] = rem % n;
                rem /= n;
            }
            freqs
                .iter()
                .map(|f| {
                    let mut acc = Complex64::new(1.0, 0.0);
                    for a in 0..axes {
                        acc *= values[a][&f[a]][idx[a]];
                    }
                    acc
                })
                .collect()
        })
        .collect();
    BasisCoeffMatrix::new(freqs.to_vec(), rows)
}

/// Transform matrix for the 1-D piecewise model: rows `0..N` are the bases
/// restricted to `[0,s]`, rows `N..2N` restricted to `(s,1]`.
pub fn piecewise_matrix_1d(
    space: &SplineSpace,
    freqs: &[Index],
    s: f64,
) -> Result<BasisCoeffMatrix> {
    if space.axes() != 1 {
        return Err(Error::InvalidSpace("piecewise 1-D matrix needs a 1-axis space".into()));
    }
    let n = space.per_axis();
    let mut rows = Vec::with_capacity(2 * n);
    for side in [Side::Left, Side::Right] {
        for i in 1..=n {
            let row: Result<Vec<Complex64>> = freqs
                .iter()
                .map(|f| restricted_bspline_fourier_1d(space, i, f[0], s, side))
                .collect();
            rows.push(row?);
        }
    }
    BasisCoeffMatrix::new(freqs.to_vec(), rows)
}

/// Batched transforms of every tensor basis restricted to one side of a
/// level-set curve, over every frequency in `freqs`.
///
/// Equivalent to calling [`restricted_tensor_fourier`] entrywise but shares
/// the cell classification, the column decomposition, and the per-axis
/// exact integrals across all bases and frequencies. Cells are processed in
/// parallel.
pub fn restricted_tensor_matrix(
    space: &SplineSpace,
    freqs: &[Index],
    levelset: &LevelSetSpline,
    side: RegionSide,
) -> Result<BasisCoeffMatrix> {
    if space.axes() != 2 {
        return Err(Error::InvalidSpace("level-set restriction is 2-D only".into()));
    }
    let n = space.per_axis();
    let k = space.order();
    let cells = space.inv_d() as usize;
    let dd = space.d();
    let u1 = axis_freqs(freqs, 0);
    let u2 = axis_freqs(freqs, 1);
    let cfg = CutConfig::default();
    let phi = |x: f64, y: f64| levelset.eval(x, y);

    // 1-based basis indices active on knot cell c: c+1 ..= min(c+k, n).
    let cell_bases = |c: usize| -> std::ops::RangeInclusive<usize> { (c + 1)..=(c + k).min(n) };

    let cell_list: Vec<(usize, usize)> = (0..cells)
        .flat_map(|cx| (0..cells).map(move |cy| (cx, cy)))
        .collect();

    // Accumulator per cell: dense (i_loc, u1) x (j_loc, u2) block plus the
    // basis offsets, merged at the end.
    struct Block {
        i0: usize,
        j0: usize,
        ni: usize,
        nj: usize,
        // data[(i_loc * n_u1 + f1) * nj * n_u2 + (j_loc * n_u2 + f2)]
        data: Vec<Complex64>,
    }

    let blocks: Vec<Result<Block>> = cell_list
        .par_iter()
        .map(|&(cx, cy)| -> Result<Block> {
            let (x0, x1) = (cx as f64 * dd, (cx + 1) as f64 * dd);
            let (y0, y1) = (cy as f64 * dd, (cy + 1) as f64 * dd);
            let rect = Rect { x0, x1, y0, y1 };
            let bi = cell_bases(cx);
            let bj = cell_bases(cy);
            let (i0, j0) = (*bi.start(), *bj.start());
            let (ni, nj) = (bi.end() - i0 + 1, bj.end() - j0 + 1);
            let (nu1, nu2) = (u1.len(), u2.len());
            let mut data = vec![Complex64::new(0.0, 0.0); ni * nu1 * nj * nu2];
            match cutcell::classify(rect, &phi, &cfg) {
                CellClass::Uniform(pos) => {
                    if pos == (side == RegionSide::NonNegative) {
                        let ex: Vec<Complex64> = bi
                            .clone()
                            .flat_map(|i| u1.iter().map(move |&f| (i, f)))
                            .map(|(i, f)| basis_fourier_on(space, i, f, x0, x1))
                            .collect::<Result<_>>()?;
                        let ey: Vec<Complex64> = bj
                            .clone()
                            .flat_map(|j| u2.iter().map(move |&f| (j, f)))
                            .map(|(j, f)| basis_fourier_on(space, j, f, y0, y1))
                            .collect::<Result<_>>()?;
                        for (a, &vx) in ex.iter().enumerate() {
                            let base = a * nj * nu2;
                            for (b, &vy) in ey.iter().enumerate() {
                                data[base + b] += vx * vy;
                            }
                        }
                    }
                }
                CellClass::Cut => {
                    for col in cutcell::decompose(rect, &phi, &cfg) {
                        // Outer vector over (basis, outer-axis frequency) and
                        // inner vector over (basis, inner-axis frequency);
                        // the column contributes their outer product.
                        let (ob, onu, ofreqs, ib, inu, ifreqs) = match col.axis {
                            OuterAxis::X => (bi.clone(), nu1, &u1, bj.clone(), nu2, &u2),
                            OuterAxis::Y => (bj.clone(), nu2, &u2, bi.clone(), nu1, &u1),
                        };
                        let nob = ob.end() - ob.start() + 1;
                        let nib = ib.end() - ib.start() + 1;
                        let mut outer = vec![Complex64::new(0.0, 0.0); nob * onu];
                        let mut any = false;
                        for (a, i) in ob.clone().enumerate() {
                            let bv = space.basis_value(i, col.outer);
                            if bv == 0.0 {
                                continue;
                            }
                            any = true;
                            for (fa, &f) in ofreqs.iter().enumerate() {
                                outer[a * onu + fa] = col.weight
                                    * bv
                                    * Complex64::new(0.0, -TAU * f as f64 * col.outer).exp();
                            }
                        }
                        if !any {
                            continue;
                        }
                        let mut inner = vec![Complex64::new(0.0, 0.0); nib * inu];
                        let mut has_seg = false;
                        for seg in col.segments() {
                            let (mx, my) = col.segment_midpoint(seg);
                            if !side_matches(phi(mx, my), side) {
                                continue;
                            }
                            has_seg = true;
                            for (b, j) in ib.clone().enumerate() {
                                for (fb, &f) in ifreqs.iter().enumerate() {
                                    inner[b * inu + fb] +=
                                        basis_fourier_on(space, j, f, seg.0, seg.1)?;
                                }
                            }
                        }
                        if !has_seg {
                            continue;
                        }
                        match col.axis {
                            OuterAxis::X => {
                                for r in 0..nob * onu {
                                    let o = outer[r];
                                    if o == Complex64::new(0.0, 0.0) {
                                        continue;
                                    }
                                    let base = r * nib * inu;
                                    for (c, &v) in inner.iter().enumerate() {
                                        data[base + c] += o * v;
                                    }
                                }
                            }
                            OuterAxis::Y => {
                                // outer indexes (j, u2); inner indexes (i, u1)
                                for (b, o) in outer.iter().enumerate() {
                                    if *o == Complex64::new(0.0, 0.0) {
                                        continue;
                                    }
                                    for (r, &v) in inner.iter().enumerate() {
                                        data[r * nj * nu2 + b] += *o * v;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Ok(Block { i0, j0, ni, nj, data })
        })
        .collect();

    let mut rows = vec![vec![Complex64::new(0.0, 0.0); freqs.len()]; n * n];
    // Column lookup: freq -> position in `freqs`.
    let col_of: HashMap<(i64, i64), usize> = freqs
        .iter()
        .enumerate()
        .map(|(c, f)| ((f[0], f[1]), c))
        .collect();
    let (nu1, nu2) = (u1.len(), u2.len());
    for block in blocks {
        let block = block?;
        for a in 0..block.ni {
            let i = block.i0 + a;
            for fa in 0..nu1 {
                for b in 0..block.nj {
                    let j = block.j0 + b;
                    let base = (a * nu1 + fa) * block.nj * nu2 + b * nu2;
                    let row = (i - 1) * n + (j - 1);
                    for fb in 0..nu2 {
                        let v = block.data[base + fb];
                        if v != Complex64::new(0.0, 0.0) {
                            if let Some(&c) = col_of.get(&(u1[fa], u2[fb])) {
                                rows[row][c] += v;
                            }
                        }
                    }
                }
            }
        }
    }
    BasisCoeffMatrix::new(freqs.to_vec(), rows)
}

/// Transform matrix for the 2-D piecewise model: rows `0..N²` restricted to
/// the nonnegative side of the level set, rows `N²..2N²` to the negative
/// side (obtained by subtracting from the full tensor transforms, which is
/// exact by additivity).
pub fn piecewise_matrix_2d(
    space: &SplineSpace,
    freqs: &[Index],
    levelset: &LevelSetSpline,
) -> Result<BasisCoeffMatrix> {
    let positive = restricted_tensor_matrix(space, freqs, levelset, RegionSide::NonNegative)?;
    let full = full_tensor_matrix(space, freqs)?;
    let dim = space.dim();
    let mut rows = Vec::with_capacity(2 * dim);
    for r in 0..dim {
        rows.push(positive.row(r).to_vec());
    }
    for r in 0..dim {
        let neg: Vec<Complex64> = full
            .row(r)
            .iter()
            .zip(positive.row(r))
            .map(|(f, p)| f - p)
            .collect();
        rows.push(neg);
    }
    BasisCoeffMatrix::new(freqs.to_vec(), rows)
}

/// The full symmetric frequency box `{-m..=m}^axes` in row-major order.
pub fn full_box(axes: usize, m: i64) -> Vec<Index> {
    let range: Vec<i64> = (-m..=m).collect();
    let mut out = Vec::new();
    match axes {
        1 => {
            for &a in &range {
                out.push([a, 0, 0]);
            }
        }
        2 => {
            for &a in &range {
                for &b in &range {
                    out.push([a, b, 0]);
                }
            }
        }
        _ => {
            for &a in &range {
                for &b in &range {
                    for &c in &range {
                        out.push([a, b, c]);
                    }
                }
            }
        }
    }
    out
}

/// The half-range frequency set `{0..=m}` used with 1-D real sources.
pub fn half_range(m: i64) -> Vec<Index> {
    (0..=m).map(|n| [n, 0, 0]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osc::gauss_on_interval;
    use crate::spline::{quadratic_coeffs_1d, SplineModel};

    fn quad_basis_fourier(space: &SplineSpace, i: usize, n: i64, a: f64, b: f64) -> Complex64 {
        // Composite Gauss per knot interval, clipped to [a, b].
        let k = space.order();
        let d = space.d();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..k {
            let x0 = ((i as f64 - k as f64 + j as f64) * d).max(a).max(0.0);
            let x1 = ((i as f64 - k as f64 + j as f64 + 1.0) * d).min(b).min(1.0);
            if x1 <= x0 {
                continue;
            }
            let (xs, ws) = gauss_on_interval(40, x0, x1);
            for (&x, &w) in xs.iter().zip(&ws) {
                acc += w
                    * space.basis_value(i, x)
                    * Complex64::new(0.0, -TAU * n as f64 * x).exp();
            }
        }
        acc
    }

    fn circle_levelset(k: usize, inv_d: u32) -> LevelSetSpline {
        // x² + y² − 0.5 as a tensor spline (exact for k >= 3).
        let space2 = SplineSpace::new(k, inv_d, 2).unwrap();
        let space1 = SplineSpace::new(k, inv_d, 1).unwrap();
        let cx = quadratic_coeffs_1d(&space1, 0.0, 0.0, 1.0);
        let n = space2.per_axis();
        let mut coeffs = vec![0.0; space2.dim()];
        for i in 0..n {
            for j in 0..n {
                coeffs[i * n + j] = cx[i] + cx[j] - 0.5;
            }
        }
        LevelSetSpline::new(SplineModel::new(space2, coeffs).unwrap()).unwrap()
    }

    #[test]
    fn interior_basis_mean_is_d() {
        let space = SplineSpace::new(4, 10, 1).unwrap();
        // Basis fully inside [0,1]: support [(i-4)d, i d] ⊆ [0,1] → i in 4..=10.
        for i in 4..=10 {
            let v = bspline_fourier_1d(&space, i, 0).unwrap();
            assert!((v.re - 0.1).abs() < 1e-15 && v.im.abs() < 1e-16, "i={i}");
        }
    }

    #[test]
    fn mean_sums_to_one_over_all_bases() {
        for (k, inv_d) in [(3usize, 5u32), (10, 10)] {
            let space = SplineSpace::new(k, inv_d, 1).unwrap();
            let sum: Complex64 = (1..=space.per_axis())
                .map(|i| bspline_fourier_1d(&space, i, 0).unwrap())
                .sum();
            assert!((sum.re - 1.0).abs() < 1e-14, "k={k}: {}", sum.re);
            assert!(sum.im.abs() < 1e-15);
        }
    }

    #[test]
    fn analytic_matches_quadrature() {
        let space = SplineSpace::new(10, 10, 1).unwrap();
        for (i, n) in [(1usize, 0i64), (5, 7), (12, -19), (19, 3), (9, 50)] {
            let got = bspline_fourier_1d(&space, i, n).unwrap();
            let want = quad_basis_fourier(&space, i, n, 0.0, 1.0);
            assert!((got - want).norm() < 1e-12, "i={i} n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn restriction_sides_sum_to_whole() {
        let space = SplineSpace::new(7, 8, 1).unwrap();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for case in 0..100 {
            let i = 1 + (next() * space.per_axis() as f64) as usize;
            let n = (next() * 41.0) as i64 - 20;
            let s = 0.02 + 0.96 * next();
            let whole = bspline_fourier_1d(&space, i, n).unwrap();
            let left = restricted_bspline_fourier_1d(&space, i, n, s, Side::Left).unwrap();
            let right = restricted_bspline_fourier_1d(&space, i, n, s, Side::Right).unwrap();
            assert!(
                (left + right - whole).norm() < 1e-14,
                "case {case}: i={i} n={n} s={s}"
            );
        }
    }

    #[test]
    fn restriction_matches_quadrature() {
        let space = SplineSpace::new(10, 10, 1).unwrap();
        let got = restricted_bspline_fourier_1d(&space, 5, 7, 0.5, Side::Left).unwrap();
        let want = quad_basis_fourier(&space, 5, 7, 0.0, 0.5);
        assert!((got - want).norm() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn support_left_of_cut_vanishes_on_right() {
        let space = SplineSpace::new(3, 10, 1).unwrap();
        // Basis 2: support [-0.1, 0.2); entirely left of s = 0.5.
        let v = restricted_bspline_fourier_1d(&space, 2, 4, 0.5, Side::Right).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn conjugate_symmetry_in_frequency() {
        let space = SplineSpace::new(6, 5, 1).unwrap();
        for i in [1usize, 4, 9] {
            for n in [1i64, 3, 17] {
                let pos = bspline_fourier_1d(&space, i, n).unwrap();
                let neg = bspline_fourier_1d(&space, i, -n).unwrap();
                assert!((pos - neg.conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn cut_point_validated() {
        let space = SplineSpace::new(3, 5, 1).unwrap();
        assert!(restricted_bspline_fourier_1d(&space, 1, 0, 0.0, Side::Left).is_err());
        assert!(restricted_bspline_fourier_1d(&space, 1, 0, 1.0, Side::Left).is_err());
        assert!(bspline_fourier_1d(&space, 0, 0).is_err());
        assert!(bspline_fourier_1d(&space, 8, 0).is_err());
    }

    #[test]
    fn tensor_transform_is_separable() {
        let space = SplineSpace::new(4, 5, 2).unwrap();
        // Interior basis: i in 4..=5 for inv_d=5, k=4.
        let v = tensor_bspline_fourier(&space, &[4, 4], &[0, 0]).unwrap();
        assert!((v.re - 0.04).abs() < 1e-15 && v.im.abs() < 1e-16);
        let v = tensor_bspline_fourier(&space, &[3, 6], &[2, -5]).unwrap();
        let w = bspline_fourier_1d(&space, 3, 2).unwrap() * bspline_fourier_1d(&space, 6, -5).unwrap();
        assert!((v - w).norm() < 1e-16);
    }

    #[test]
    fn restricted_tensor_sides_sum_to_whole() {
        let space = SplineSpace::new(4, 5, 2).unwrap();
        let ls = circle_levelset(4, 5);
        for (idx, freq) in [
            ([3usize, 3usize], [0i64, 0i64]),
            ([5, 4], [2, -1]),
            ([8, 2], [-3, 3]),
        ] {
            let pos =
                restricted_tensor_fourier(&space, &idx, &freq, &ls, RegionSide::NonNegative)
                    .unwrap();
            let neg =
                restricted_tensor_fourier(&space, &idx, &freq, &ls, RegionSide::Negative).unwrap();
            let whole = tensor_bspline_fourier(&space, &idx, &freq).unwrap();
            assert!(
                (pos + neg - whole).norm() < 1e-10,
                "idx={idx:?} freq={freq:?}: {} ",
                (pos + neg - whole).norm()
            );
        }
    }

    #[test]
    fn basis_inside_positive_region_has_zero_negative_part() {
        let space = SplineSpace::new(3, 10, 2).unwrap();
        let ls = circle_levelset(3, 10);
        // Basis (12,12): support [0.9,1.2)² clipped → x,y ≥ 0.9, where
        // x²+y² − 0.5 > 0 throughout.
        let v = restricted_tensor_fourier(&space, &[12, 12], &[1, 2], &ls, RegionSide::Negative)
            .unwrap();
        assert!(v.norm() < 1e-14, "{v}");
    }

    #[test]
    fn restricted_tensor_matches_direct_cut_quadrature() {
        let space = SplineSpace::new(4, 5, 2).unwrap();
        let ls = circle_levelset(4, 5);
        let phi = |x: f64, y: f64| ls.eval(x, y);
        let cfg = CutConfig::default();
        // Basis straddling the curve.
        let (idx, freq) = ([4usize, 4usize], [1i64, -2i64]);
        let got = restricted_tensor_fourier(&space, &idx, &freq, &ls, RegionSide::NonNegative)
            .unwrap();
        // Oracle: decompose the whole support into columns over a fine grid.
        let mut want = Complex64::new(0.0, 0.0);
        let fine = 40usize;
        for cx in 0..fine {
            for cy in 0..fine {
                let rect = Rect {
                    x0: cx as f64 / fine as f64,
                    x1: (cx + 1) as f64 / fine as f64,
                    y0: cy as f64 / fine as f64,
                    y1: (cy + 1) as f64 / fine as f64,
                };
                for col in cutcell::decompose(rect, &phi, &cfg) {
                    for seg in col.segments() {
                        let (mx, my) = col.segment_midpoint(seg);
                        if phi(mx, my) < 0.0 {
                            continue;
                        }
                        let (gx, gw) = gauss_on_interval(16, seg.0, seg.1);
                        for (&t, &w) in gx.iter().zip(&gw) {
                            let (x, y) = match col.axis {
                                OuterAxis::X => (col.outer, t),
                                OuterAxis::Y => (t, col.outer),
                            };
                            want += col.weight
                                * w
                                * space.basis_value(idx[0], x)
                                * space.basis_value(idx[1], y)
                                * Complex64::new(
                                    0.0,
                                    -TAU * (freq[0] as f64 * x + freq[1] as f64 * y),
                                )
                                .exp();
                        }
                    }
                }
            }
        }
        let rel = (got - want).norm() / want.norm().max(1e-300);
        assert!(rel < 1e-8, "got {got} want {want} rel {rel}");
    }

    #[test]
    fn batched_matrix_matches_single_values() {
        let space = SplineSpace::new(4, 5, 2).unwrap();
        let ls = circle_levelset(4, 5);
        let freqs = full_box(2, 2);
        let mat = restricted_tensor_matrix(&space, &freqs, &ls, RegionSide::NonNegative).unwrap();
        assert_eq!(mat.n_rows(), space.dim());
        assert_eq!(mat.n_cols(), freqs.len());
        let n = space.per_axis();
        for (i, j) in [(1usize, 1usize), (4, 4), (7, 3), (8, 8)] {
            for (c, f) in freqs.iter().enumerate() {
                if c % 7 != 0 {
                    continue;
                }
                let single = restricted_tensor_fourier(
                    &space,
                    &[i, j],
                    &[f[0], f[1]],
                    &ls,
                    RegionSide::NonNegative,
                )
                .unwrap();
                let batched = mat.value((i - 1) * n + (j - 1), c);
                assert!(
                    (single - batched).norm() < 1e-12,
                    "i={i} j={j} f={f:?}: {single} vs {batched}"
                );
            }
        }
    }

    #[test]
    fn piecewise_2d_rows_sum_to_full() {
        let space = SplineSpace::new(3, 4, 2).unwrap();
        let ls = circle_levelset(3, 4);
        let freqs = full_box(2, 1);
        let pw = piecewise_matrix_2d(&space, &freqs, &ls).unwrap();
        let full = full_tensor_matrix(&space, &freqs).unwrap();
        let dim = space.dim();
        assert_eq!(pw.n_rows(), 2 * dim);
        for r in 0..dim {
            for c in 0..freqs.len() {
                let s = pw.value(r, c) + pw.value(dim + r, c);
                assert!((s - full.value(r, c)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn piecewise_1d_matrix_layout() {
        let space = SplineSpace::new(4, 5, 1).unwrap();
        let freqs = half_range(3);
        let mat = piecewise_matrix_1d(&space, &freqs, 0.4).unwrap();
        assert_eq!(mat.n_rows(), 2 * space.per_axis());
        let left = restricted_bspline_fourier_1d(&space, 3, 2, 0.4, Side::Left).unwrap();
        let right = restricted_bspline_fourier_1d(&space, 3, 2, 0.4, Side::Right).unwrap();
        assert_eq!(mat.value(2, 2), left);
        assert_eq!(mat.value(space.per_axis() + 2, 2), right);
    }

    #[test]
    fn derivative_table_of_single_mode() {
        let f = crate::fourier::lookup("mode1").unwrap();
        let t = crate::fourier::coeffs_from_function(f, 2, 64).unwrap();
        let g = derivative_table(&t, 0).unwrap();
        assert!(!g.real_source());
        let v = g.get([1, 0, 0]).unwrap();
        assert!((v - Complex64::new(0.0, 1.0)).norm() < 1e-12, "{v}");
        assert!(g.get([0, 0, 0]).unwrap().norm() < 1e-14);
        assert!(g.get([-1, 0, 0]).unwrap().norm() < 1e-12);
    }

    #[test]
    fn derivative_table_refuses_half_tables() {
        let f = crate::fourier::lookup("smooth1d").unwrap();
        let t = crate::fourier::coeffs_from_function(f, 4, 64).unwrap();
        assert!(t.half_table());
        assert!(derivative_table(&t, 0).is_err());
        // And the axis must exist.
        let f2 = crate::fourier::lookup("mode1").unwrap();
        let t2 = crate::fourier::coeffs_from_function(f2, 2, 64).unwrap();
        assert!(derivative_table(&t2, 1).is_err());
    }

    #[test]
    fn binary_cache_round_trips() {
        let space = SplineSpace::new(3, 4, 2).unwrap();
        let freqs = full_box(2, 2);
        let mat = full_tensor_matrix(&space, &freqs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.bin");
        mat.save_binary(&path).unwrap();
        let back = BasisCoeffMatrix::load_binary(&path).unwrap();
        assert_eq!(back.n_rows(), mat.n_rows());
        assert_eq!(back.freqs(), mat.freqs());
        for r in 0..mat.n_rows() {
            for c in 0..mat.n_cols() {
                let (a, b) = (mat.value(r, c), back.value(r, c));
                assert_eq!(a.re.to_bits(), b.re.to_bits());
                assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
        // Corrupt magic is refused.
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(BasisCoeffMatrix::load_binary(&path).is_err());
    }
}
