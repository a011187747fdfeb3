//! Uniform tensor-product grids in 1D and 2D, and grid-sampled scalar fields.
//!
//! Nodes on each axis sit exactly at `a + i*h` with `h = (b-a)/(n-1)`; the
//! node set is ordered lexicographically with the first axis major. All L^p
//! quantities use the product node weight `w = prod(h_k)`.

use crate::error::{invalid, Result};

/// One grid axis: closed interval `[a, b]` sampled at `n >= 2` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.a + i as f64 * self.spacing()
    }
}

/// Uniform grid in dimension 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    /// Build a grid from per-axis intervals and point counts.
    pub fn new(boxes: &[(f64, f64)], points: &[usize]) -> Result<Self> {
        if boxes.is_empty() || boxes.len() > 2 {
            return Err(invalid("grid dimension must be 1 or 2"));
        }
        if boxes.len() != points.len() {
            return Err(invalid("boxes and point counts must have equal length"));
        }
        let mut axes = Vec::with_capacity(boxes.len());
        for (&(a, b), &n) in boxes.iter().zip(points) {
            if !(a.is_finite() && b.is_finite()) || b <= a {
                return Err(invalid(format!("degenerate interval [{a}, {b}]")));
            }
            if n < 2 {
                return Err(invalid("each axis needs at least 2 points"));
            }
            axes.push(Axis { a, b, n });
        }
        Ok(Grid { axes })
    }

    pub fn line(a: f64, b: f64, n: usize) -> Result<Self> {
        Grid::new(&[(a, b)], &[n])
    }

    pub fn rect(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        Grid::new(&[x, y], &[nx, ny])
    }

    /// Grid whose node set `{a + i*h}` tiles the line with period `len`
    /// (`n` nodes, spacing `len/n`, last node one spacing short of `a+len`).
    pub fn periodic_line(a: f64, len: f64, n: usize) -> Result<Self> {
        if !(len > 0.0) || n < 2 {
            return Err(invalid("periodic grid needs len > 0 and n >= 2"));
        }
        let h = len / n as f64;
        Grid::line(a, a + len - h, n)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> Axis {
        self.axes[k]
    }

    pub fn num_nodes(&self) -> usize {
        self.axes.iter().map(|ax| ax.n).product()
    }

    /// Product node weight used by every discrete L^p norm and inner product.
    pub fn node_weight(&self) -> f64 {
        self.axes.iter().map(|ax| ax.spacing()).product()
    }

    /// Lexicographic index of the multi-index (first axis major).
    pub fn index_of(&self, multi: &[usize]) -> usize {
        match self.dim() {
            1 => multi[0],
            2 => multi[0] * self.axes[1].n + multi[1],
            _ => unreachable!(),
        }
    }

    pub fn multi_of(&self, idx: usize) -> [usize; 2] {
        match self.dim() {
            1 => [idx, 0],
            2 => [idx / self.axes[1].n, idx % self.axes[1].n],
            _ => unreachable!(),
        }
    }

    /// Coordinates of node `idx`; the second component is 0 in 1D.
    pub fn coord(&self, idx: usize) -> [f64; 2] {
        let m = self.multi_of(idx);
        match self.dim() {
            1 => [self.axes[0].coord(m[0]), 0.0],
            2 => [self.axes[0].coord(m[0]), self.axes[1].coord(m[1])],
            _ => unreachable!(),
        }
    }

    /// Squared distance between two nodes.
    pub fn dist2(&self, i: usize, j: usize) -> f64 {
        let a = self.coord(i);
        let b = self.coord(j);
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        dx * dx + dy * dy
    }
}

/// A grid-sampled real function with a domain mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        let n = grid.num_nodes();
        if values.len() != n || mask.len() != n {
            return Err(invalid("values/mask length must equal node count"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field values must be finite"));
        }
        Ok(ScalarField { grid, values, mask })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.num_nodes();
        ScalarField {
            grid,
            values: vec![0.0; n],
            mask: vec![true; n],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        let n = grid.num_nodes();
        ScalarField {
            grid,
            values: vec![c; n],
            mask: vec![true; n],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.num_nodes();
        let values = (0..n)
            .map(|i| {
                let c = grid.coord(i);
                f(c[0], c[1])
            })
            .collect();
        ScalarField {
            grid,
            values,
            mask: vec![true; n],
        }
    }

    /// Zero the values at nodes outside the mask (the zero-extension
    /// convention for a field meant to represent `chi_Omega * f`).
    pub fn enforce_mask(&mut self) {
        for (v, &m) in self.values.iter_mut().zip(&self.mask) {
            if !m {
                *v = 0.0;
            }
        }
    }

    pub fn is_zero_off_mask(&self, tol: f64) -> bool {
        self.values
            .iter()
            .zip(&self.mask)
            .all(|(v, &m)| m || v.abs() <= tol)
    }

    /// Weighted L^p norm over the whole grid.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let w = self.grid.node_weight();
        lp_from_values(self.values.iter().copied(), w, p)
    }

    /// Weighted L^p norm restricted to masked nodes.
    pub fn lp_norm_masked(&self, p: f64) -> f64 {
        let w = self.grid.node_weight();
        lp_from_values(
            self.values
                .iter()
                .zip(&self.mask)
                .filter(|(_, &m)| m)
                .map(|(v, _)| *v),
            w,
            p,
        )
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Weighted inner product over the whole grid.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let w = self.grid.node_weight();
        w * self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
    }

    /// Evaluate at an arbitrary point by multilinear interpolation;
    /// points outside the box read 0.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        match self.grid.dim() {
            1 => {
                let ax = self.grid.axis(0);
                let t = (x - ax.a) / ax.spacing();
                if t < 0.0 || t > (ax.n - 1) as f64 {
                    return 0.0;
                }
                let i0 = (t.floor() as usize).min(ax.n - 2);
                let s = t - i0 as f64;
                (1.0 - s) * self.values[i0] + s * self.values[i0 + 1]
            }
            2 => {
                let ax = self.grid.axis(0);
                let ay = self.grid.axis(1);
                let tx = (x - ax.a) / ax.spacing();
                let ty = (y - ay.a) / ay.spacing();
                if tx < 0.0 || tx > (ax.n - 1) as f64 || ty < 0.0 || ty > (ay.n - 1) as f64 {
                    return 0.0;
                }
                let i0 = (tx.floor() as usize).min(ax.n - 2);
                let j0 = (ty.floor() as usize).min(ay.n - 2);
                let sx = tx - i0 as f64;
                let sy = ty - j0 as f64;
                let v = |i: usize, j: usize| self.values[self.grid.index_of(&[i, j])];
                (1.0 - sx) * ((1.0 - sy) * v(i0, j0) + sy * v(i0, j0 + 1))
                    + sx * ((1.0 - sy) * v(i0 + 1, j0) + sy * v(i0 + 1, j0 + 1))
            }
            _ => unreachable!(),
        }
    }
}

fn lp_from_values(values: impl Iterator<Item = f64>, w: f64, p: f64) -> f64 {
    assert!(p >= 1.0, "L^p norm needs p >= 1");
    let sum: f64 = values.map(|v| v.abs().powf(p)).sum();
    (w * sum).powf(1.0 / p)
}

/// Extend a field by zero onto a larger, node-aligned grid. Values are copied
/// at masked source nodes; the target mask marks exactly those nodes.
pub fn extend_by_zero(f: &ScalarField, target: &Grid) -> Result<ScalarField> {
    if f.grid.dim() != target.dim() {
        return Err(invalid("dimension mismatch in zero extension"));
    }
    let mut offsets = [0usize; 2];
    for k in 0..f.grid.dim() {
        let src = f.grid.axis(k);
        let tgt = target.axis(k);
        let hs = src.spacing();
        let ht = tgt.spacing();
        if ((hs - ht) / hs).abs() > 1e-12 {
            return Err(invalid("grids have incompatible spacing"));
        }
        let off = (src.a - tgt.a) / ht;
        if off < -1e-9 || (off - off.round()).abs() > 1e-9 {
            return Err(invalid("source nodes are not aligned with the target grid"));
        }
        let off = off.round() as usize;
        if off + src.n > tgt.n {
            return Err(invalid("target grid does not cover the source box"));
        }
        offsets[k] = off;
    }
    let mut out = ScalarField::zeros(target.clone());
    out.mask.iter_mut().for_each(|m| *m = false);
    for i in 0..f.grid.num_nodes() {
        let m = f.grid.multi_of(i);
        let tm = [m[0] + offsets[0], m[1] + offsets[1]];
        let ti = target.index_of(&tm[..target.dim()]);
        if f.mask[i] {
            out.values[ti] = f.values[i];
            out.mask[ti] = true;
        }
    }
    Ok(out)
}

/// Dilate a field: `f_rho(x) = f(x / rho)`, evaluated by multilinear
/// interpolation on the source grid; points mapping outside the box read 0.
pub fn scale_field(f: &ScalarField, rho: f64) -> Result<ScalarField> {
    if !(rho > 0.0) {
        return Err(invalid("scale factor must be positive"));
    }
    let grid = f.grid.clone();
    let n = grid.num_nodes();
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let c = grid.coord(i);
        values.push(f.interpolate(c[0] / rho, c[1] / rho));
    }
    ScalarField::new(grid, values, vec![true; n])
}
