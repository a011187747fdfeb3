//! Riesz-form fractional calculus: the potential I^alpha, the fractional
//! Laplacian |D|^alpha, the fractional gradient D^alpha = grad I^{1-alpha},
//! and the fractional divergence Div_alpha.
//!
//! Two backends: a spectral one (Fourier multipliers on a periodic or
//! zero-padded lattice) and a singular-kernel quadrature with an analytic
//! far-field tail. The `Adjoint` divergence backend realizes Div_alpha as the
//! exact negative transpose of the discrete gradient under the product node
//! weights, which is what every duality-sensitive consumer uses.

use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::grid::{Grid, ScalarField};
use crate::special::{gamma, gl_integrate};
use rustfft::num_complex::Complex;

/// Grid-sampled vector field with one component per grid dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RieszVectorField {
    pub grid: Grid,
    pub comps: Vec<Vec<f64>>,
}

impl RieszVectorField {
    pub fn new(grid: Grid, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != grid.dim() {
            return Err(invalid("component count must equal grid dimension"));
        }
        let n = grid.num_nodes();
        if comps.iter().any(|c| c.len() != n) {
            return Err(invalid("component length must equal node count"));
        }
        if comps.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("vector field values must be finite"));
        }
        Ok(RieszVectorField { grid, comps })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.num_nodes();
        let comps = vec![vec![0.0; n]; grid.dim()];
        RieszVectorField { grid, comps }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> Vec<f64>) -> Self {
        let n = grid.num_nodes();
        let dim = grid.dim();
        let mut comps = vec![vec![0.0; n]; dim];
        for i in 0..n {
            let c = grid.coord(i);
            let v = f(c[0], c[1]);
            for k in 0..dim {
                comps[k][i] = v[k];
            }
        }
        RieszVectorField { grid, comps }
    }

    /// Euclidean length of the field at one node.
    pub fn node_norm(&self, i: usize) -> f64 {
        self.comps
            .iter()
            .map(|c| c[i] * c[i])
            .sum::<f64>()
            .sqrt()
    }

    pub fn sup_node_norm(&self) -> f64 {
        (0..self.grid.num_nodes()).fold(0.0, |m, i| m.max(self.node_norm(i)))
    }

    /// Weighted L^q norm of the pointwise Euclidean length.
    pub fn lq_norm(&self, q: f64) -> f64 {
        let w = self.grid.node_weight();
        let sum: f64 = (0..self.grid.num_nodes())
            .map(|i| self.node_norm(i).powf(q))
            .sum();
        (w * sum).powf(1.0 / q)
    }

    /// Weighted inner product of two vector fields.
    pub fn inner(&self, other: &RieszVectorField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let w = self.grid.node_weight();
        w * self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum::<f64>()
    }

    pub fn axpy(&mut self, a: f64, other: &RieszVectorField) {
        for (c, oc) in self.comps.iter_mut().zip(&other.comps) {
            for (v, ov) in c.iter_mut().zip(oc) {
                *v += a * ov;
            }
        }
    }
}

/// How the spectral backend extends a field beyond its box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralDomain {
    /// Treat node values as one period (period = n*h on each axis).
    Periodic,
    /// Zero-pad each axis to `factor * n` nodes before transforming.
    Padded { factor: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    pub domain: SpectralDomain,
}

impl SpectralConfig {
    pub fn periodic() -> Self {
        SpectralConfig {
            domain: SpectralDomain::Periodic,
        }
    }

    pub fn padded(factor: usize) -> Result<Self> {
        if factor < 2 {
            return Err(invalid("padding factor must be at least 2"));
        }
        Ok(SpectralConfig {
            domain: SpectralDomain::Padded { factor },
        })
    }
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig::padded(4).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Spectral,
    Quadrature,
    /// Divergence as the exact negative transpose of the discrete gradient.
    /// Numerically this is the spectral divergence pipeline; the enum value
    /// exists so call sites state the discrete-duality contract they rely on.
    Adjoint,
}

/// Kernel normalization constants of the integral forms of |D|^alpha,
/// D^alpha, and Div_alpha. The gradient and divergence share one constant so
/// that the pair stays mutually adjoint.
#[derive(Debug, Clone, Copy)]
pub struct KernelConstants {
    pub dim: usize,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Relative L2 mismatch of the quadrature Laplacian against the spectral
    /// reference on the Gaussian validation problem (populated by
    /// [`calibrate_constants`]).
    pub validation_residual: Option<f64>,
    /// True when the closed forms failed validation and c1 was least-squares
    /// fitted against the spectral reference instead.
    pub fitted: bool,
}

/// Closed-form constants:
/// c1 = 2^(a-1) a Gamma((n+a)/2) / (pi^(n/2) Gamma(1 - a/2)),
/// c2 = c3 = 2^a Gamma((n+a+1)/2) / (pi^(n/2) Gamma((1-a)/2)).
pub fn kernel_constants(dim: usize, alpha: f64) -> Result<KernelConstants> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(invalid("kernel constants need alpha in (0,1)"));
    }
    if dim == 0 || dim > 2 {
        return Err(invalid("dimension must be 1 or 2"));
    }
    let n = dim as f64;
    let pi_n2 = std::f64::consts::PI.powf(n / 2.0);
    let c1 = 2.0f64.powf(alpha - 1.0) * alpha * gamma((n + alpha) / 2.0)
        / (pi_n2 * gamma(1.0 - alpha / 2.0));
    let c2 =
        2.0f64.powf(alpha) * gamma((n + alpha + 1.0) / 2.0) / (pi_n2 * gamma((1.0 - alpha) / 2.0));
    Ok(KernelConstants {
        dim,
        alpha,
        c1,
        c2,
        c3: c2,
        validation_residual: None,
        fitted: false,
    })
}

// ---------------------------------------------------------------------------
// Spectral backend
// ---------------------------------------------------------------------------

fn lattice_of(grid: &Grid) -> ([usize; 2], [f64; 2]) {
    match grid.dim() {
        1 => ([grid.axis(0).n, 1], [grid.axis(0).spacing(), 1.0]),
        2 => (
            [grid.axis(0).n, grid.axis(1).n],
            [grid.axis(0).spacing(), grid.axis(1).spacing()],
        ),
        _ => unreachable!(),
    }
}

/// Apply a scalar Fourier multiplier under the configured extension.
fn spectral_scalar(
    f: &ScalarField,
    cfg: &SpectralConfig,
    mult: impl FnMut(f64, f64, bool) -> Complex<f64>,
) -> Vec<f64> {
    let (sizes, spacings) = lattice_of(&f.grid);
    match cfg.domain {
        SpectralDomain::Periodic => fft::apply_multiplier(&f.values, sizes, spacings, mult),
        SpectralDomain::Padded { factor } => {
            let outer = [
                sizes[0] * factor,
                if sizes[1] == 1 { 1 } else { sizes[1] * factor },
            ];
            let (padded, off) = fft::pad_centered(&f.values, sizes, outer);
            let result = fft::apply_multiplier(&padded, outer, spacings, mult);
            fft::unpad(&result, sizes, outer, off)
        }
    }
}

fn spectral_vector_to_scalar(
    field: &RieszVectorField,
    cfg: &SpectralConfig,
    mut mult_k: impl FnMut(usize, f64, f64, bool) -> Complex<f64>,
) -> Vec<f64> {
    let (sizes, spacings) = lattice_of(&field.grid);
    let mut acc = vec![0.0; field.grid.num_nodes()];
    for (k, comp) in field.comps.iter().enumerate() {
        let part = match cfg.domain {
            SpectralDomain::Periodic => {
                fft::apply_multiplier(comp, sizes, spacings, |fx, fy, ny| mult_k(k, fx, fy, ny))
            }
            SpectralDomain::Padded { factor } => {
                let outer = [
                    sizes[0] * factor,
                    if sizes[1] == 1 { 1 } else { sizes[1] * factor },
                ];
                let (padded, off) = fft::pad_centered(comp, sizes, outer);
                let res = fft::apply_multiplier(&padded, outer, spacings, |fx, fy, ny| {
                    mult_k(k, fx, fy, ny)
                });
                fft::unpad(&res, sizes, outer, off)
            }
        };
        for (a, p) in acc.iter_mut().zip(&part) {
            *a += p;
        }
    }
    acc
}

fn grad_symbol(k: usize, alpha: f64, fx: f64, fy: f64, at_nyquist: bool) -> Complex<f64> {
    let r = (fx * fx + fy * fy).sqrt();
    // the odd symbol has no real-signal representation on the unpaired
    // Nyquist bin; it vanishes there along with the zero mode
    if r == 0.0 || at_nyquist {
        return Complex::new(0.0, 0.0);
    }
    let xi_k = if k == 0 { fx } else { fy };
    Complex::new(0.0, xi_k * r.powf(alpha - 1.0))
}

/// Riesz potential I^alpha: multiplier |xi|^{-alpha}, zero frequency mapped
/// to 0. Valid for alpha in (0, n).
pub fn riesz_potential(f: &ScalarField, alpha: f64, cfg: &SpectralConfig) -> Result<ScalarField> {
    let n = f.grid.dim() as f64;
    if !(0.0 < alpha && alpha < n) {
        return Err(invalid("riesz potential needs alpha in (0, n)"));
    }
    let vals = spectral_scalar(f, cfg, |fx, fy, _| {
        let r = (fx * fx + fy * fy).sqrt();
        if r == 0.0 {
            Complex::new(0.0, 0.0)
        } else {
            Complex::new(r.powf(-alpha), 0.0)
        }
    });
    ScalarField::new(f.grid.clone(), vals, f.mask.clone())
}

/// Fractional Laplacian |D|^alpha for alpha in (0, 1].
pub fn frac_laplacian(
    f: &ScalarField,
    alpha: f64,
    backend: Backend,
    cfg: &SpectralConfig,
) -> Result<ScalarField> {
    if !(0.0 < alpha && alpha <= 1.0) {
        return Err(invalid("fractional laplacian needs alpha in (0, 1]"));
    }
    match backend {
        Backend::Spectral | Backend::Adjoint => {
            let vals = spectral_scalar(f, cfg, |fx, fy, _| {
                Complex::new((fx * fx + fy * fy).sqrt().powf(alpha), 0.0)
            });
            ScalarField::new(f.grid.clone(), vals, f.mask.clone())
        }
        Backend::Quadrature => {
            if alpha >= 1.0 {
                return Err(Error::Unsupported(
                    "quadrature laplacian at alpha = 1 needs a principal value".into(),
                ));
            }
            let consts = kernel_constants(f.grid.dim(), alpha)?;
            Ok(quad_laplacian(f, &consts))
        }
    }
}

/// Fractional gradient D^alpha for alpha in (0, 1]. At alpha = 1 this is the
/// classical centered-difference gradient (one-sided at box edges, wrapped on
/// periodic lattices).
pub fn riesz_gradient(
    f: &ScalarField,
    alpha: f64,
    backend: Backend,
    cfg: &SpectralConfig,
) -> Result<RieszVectorField> {
    if !(0.0 < alpha && alpha <= 1.0) {
        return Err(invalid("fractional gradient needs alpha in (0, 1]"));
    }
    if alpha == 1.0 {
        return Ok(classical_gradient(f, cfg));
    }
    match backend {
        Backend::Spectral | Backend::Adjoint => {
            let dim = f.grid.dim();
            let mut comps = Vec::with_capacity(dim);
            for k in 0..dim {
                comps.push(spectral_scalar(f, cfg, |fx, fy, ny| {
                    grad_symbol(k, alpha, fx, fy, ny)
                }));
            }
            RieszVectorField::new(f.grid.clone(), comps)
        }
        Backend::Quadrature => {
            let consts = kernel_constants(f.grid.dim(), alpha)?;
            Ok(quad_gradient(f, &consts))
        }
    }
}

/// Fractional divergence Div_alpha. With `Backend::Adjoint` the discrete
/// integration-by-parts identity <F, D^alpha g> = -<Div_alpha F, g> holds to
/// rounding for every pair of grid fields.
pub fn riesz_divergence(
    field: &RieszVectorField,
    alpha: f64,
    backend: Backend,
    cfg: &SpectralConfig,
) -> Result<ScalarField> {
    if !(0.0 < alpha && alpha <= 1.0) {
        return Err(invalid("fractional divergence needs alpha in (0, 1]"));
    }
    if alpha == 1.0 {
        return match backend {
            Backend::Quadrature => Err(Error::Unsupported(
                "quadrature divergence at alpha = 1 needs a principal value".into(),
            )),
            _ => Ok(classical_divergence_adjoint(field, cfg)),
        };
    }
    match backend {
        Backend::Spectral | Backend::Adjoint => {
            let vals = spectral_vector_to_scalar(field, cfg, |k, fx, fy, ny| {
                grad_symbol(k, alpha, fx, fy, ny)
            });
            let n = field.grid.num_nodes();
            ScalarField::new(field.grid.clone(), vals, vec![true; n])
        }
        Backend::Quadrature => {
            let consts = kernel_constants(field.grid.dim(), alpha)?;
            Ok(quad_divergence(field, &consts))
        }
    }
}

// ---------------------------------------------------------------------------
// alpha = 1: classical centered differences and their exact negative transpose
// ---------------------------------------------------------------------------

fn diff_axis(
    values: &[f64],
    grid: &Grid,
    axis: usize,
    periodic: bool,
    transpose: bool,
) -> Vec<f64> {
    let n = grid.num_nodes();
    let (n0, n1) = match grid.dim() {
        1 => (grid.axis(0).n, 1),
        2 => (grid.axis(0).n, grid.axis(1).n),
        _ => unreachable!(),
    };
    let h = grid.axis(axis).spacing();
    let len = if axis == 0 { n0 } else { n1 };
    let mut out = vec![0.0; n];
    let idx = |major: usize, minor: usize| -> usize {
        if axis == 0 {
            major * n1 + minor
        } else {
            minor * n1 + major
        }
    };
    // stencil of row i as (column, coefficient) pairs; the transpose is the
    // scatter of the same pairs, so the two can never drift apart
    let row = |i: usize| -> [(usize, f64); 2] {
        if periodic {
            [
                ((i + len - 1) % len, -0.5 / h),
                ((i + 1) % len, 0.5 / h),
            ]
        } else if i == 0 {
            [(0, -1.0 / h), (1, 1.0 / h)]
        } else if i == len - 1 {
            [(len - 2, -1.0 / h), (len - 1, 1.0 / h)]
        } else {
            [(i - 1, -0.5 / h), (i + 1, 0.5 / h)]
        }
    };
    let lanes = if axis == 0 { n1 } else { n0 };
    for lane in 0..lanes {
        for i in 0..len {
            for (j, c) in row(i) {
                if transpose {
                    out[idx(j, lane)] += c * values[idx(i, lane)];
                } else {
                    out[idx(i, lane)] += c * values[idx(j, lane)];
                }
            }
        }
    }
    out
}

fn classical_gradient(f: &ScalarField, cfg: &SpectralConfig) -> RieszVectorField {
    let periodic = cfg.domain == SpectralDomain::Periodic;
    let comps = (0..f.grid.dim())
        .map(|k| diff_axis(&f.values, &f.grid, k, periodic, false))
        .collect();
    RieszVectorField {
        grid: f.grid.clone(),
        comps,
    }
}

fn classical_divergence_adjoint(field: &RieszVectorField, cfg: &SpectralConfig) -> ScalarField {
    let periodic = cfg.domain == SpectralDomain::Periodic;
    let n = field.grid.num_nodes();
    let mut acc = vec![0.0; n];
    for (k, comp) in field.comps.iter().enumerate() {
        let t = diff_axis(comp, &field.grid, k, periodic, true);
        for (a, v) in acc.iter_mut().zip(&t) {
            *a -= v; // Div = -(grad)^T
        }
    }
    ScalarField {
        grid: field.grid.clone(),
        values: acc,
        mask: vec![true; n],
    }
}

// ---------------------------------------------------------------------------
// Quadrature backend
// ---------------------------------------------------------------------------

struct KernelTables {
    /// |x_i - x_j|^{-(n+alpha)} by per-axis index offset.
    lap: Vec<f64>,
    /// |x_i - x_j|^{-(n+alpha+1)} by offset; multiplied by the coordinate
    /// difference vector this gives the gradient kernel (x-y)/|x-y|^{n+alpha+1}.
    grad: Vec<f64>,
    n1: usize,
}

fn kernel_tables(grid: &Grid, alpha: f64) -> KernelTables {
    let n = grid.dim() as f64;
    match grid.dim() {
        1 => {
            let h = grid.axis(0).spacing();
            let len = grid.axis(0).n;
            let mut lap = vec![0.0; len];
            let mut grad = vec![0.0; len];
            for k in 1..len {
                let r = k as f64 * h;
                lap[k] = r.powf(-(n + alpha));
                grad[k] = r.powf(-(n + alpha + 1.0));
            }
            KernelTables { lap, grad, n1: 1 }
        }
        2 => {
            let hx = grid.axis(0).spacing();
            let hy = grid.axis(1).spacing();
            let (nx, ny) = (grid.axis(0).n, grid.axis(1).n);
            let mut lap = vec![0.0; nx * ny];
            let mut grad = vec![0.0; nx * ny];
            for i in 0..nx {
                for j in 0..ny {
                    if i == 0 && j == 0 {
                        continue;
                    }
                    let r = ((i as f64 * hx).powi(2) + (j as f64 * hy).powi(2)).sqrt();
                    lap[i * ny + j] = r.powf(-(n + alpha));
                    grad[i * ny + j] = r.powf(-(n + alpha + 1.0));
                }
            }
            KernelTables { lap, grad, n1: ny }
        }
        _ => unreachable!(),
    }
}

/// Analytic integral of |z|^{-(n+alpha)} over the region outside the
/// cell-covered box, seen from each node. The covered box extends half a
/// cell beyond the node range on every side. In 2D the outside region is
/// split into four edge wedges; along each wedge the boundary radius is
/// d/cos(phi), so the angular factor is an integral of cos^alpha.
pub(crate) fn far_field_integrals(grid: &Grid, alpha: f64) -> Vec<f64> {
    let n_nodes = grid.num_nodes();
    let mut lap = vec![0.0; n_nodes];
    match grid.dim() {
        1 => {
            let ax = grid.axis(0);
            let h = ax.spacing();
            for (i, l) in lap.iter_mut().enumerate() {
                let x = grid.coord(i)[0];
                let dl = x - ax.a + 0.5 * h;
                let dr = ax.b - x + 0.5 * h;
                *l = (dl.powf(-alpha) + dr.powf(-alpha)) / alpha;
            }
        }
        2 => {
            let ax = grid.axis(0);
            let ay = grid.axis(1);
            let (hx, hy) = (ax.spacing(), ay.spacing());
            for (i, l) in lap.iter_mut().enumerate() {
                let p = grid.coord(i);
                // perpendicular distance to each extended face and the
                // tangential extents of that face around the foot point
                let faces = [
                    (
                        ax.b - p[0] + 0.5 * hx,
                        -(p[1] - ay.a + 0.5 * hy),
                        ay.b - p[1] + 0.5 * hy,
                    ),
                    (
                        p[0] - ax.a + 0.5 * hx,
                        -(ay.b - p[1] + 0.5 * hy),
                        p[1] - ay.a + 0.5 * hy,
                    ),
                    (
                        ay.b - p[1] + 0.5 * hy,
                        -(ax.b - p[0] + 0.5 * hx),
                        p[0] - ax.a + 0.5 * hx,
                    ),
                    (
                        p[1] - ay.a + 0.5 * hy,
                        -(p[0] - ax.a + 0.5 * hx),
                        ax.b - p[0] + 0.5 * hx,
                    ),
                ];
                let mut acc = 0.0;
                for (dist, t0, t1) in faces {
                    let phi0 = (t0 / dist).atan();
                    let phi1 = (t1 / dist).atan();
                    let ic = gl_integrate(|phi| phi.cos().powf(alpha), phi0, phi1, 32);
                    acc += dist.powf(-alpha) / alpha * ic;
                }
                *l = acc;
            }
        }
        _ => unreachable!(),
    }
    lap
}

fn quad_laplacian(f: &ScalarField, consts: &KernelConstants) -> ScalarField {
    let grid = &f.grid;
    let n = grid.num_nodes();
    let w = grid.node_weight();
    let tables = kernel_tables(grid, consts.alpha);
    let far = far_field_integrals(grid, consts.alpha);
    let mut out = vec![0.0; n];
    let n1 = tables.n1;
    for i in 0..n {
        let mi = grid.multi_of(i);
        let fi = f.values[i];
        let mut acc = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let mj = grid.multi_of(j);
            let di = mi[0].abs_diff(mj[0]);
            let dj = mi[1].abs_diff(mj[1]);
            acc += (fi - f.values[j]) * tables.lap[di * n1 + dj];
        }
        out[i] = consts.c1 * (w * acc + fi * far[i]);
    }
    ScalarField {
        grid: grid.clone(),
        values: out,
        mask: f.mask.clone(),
    }
}

fn quad_gradient(f: &ScalarField, consts: &KernelConstants) -> RieszVectorField {
    let grid = &f.grid;
    let n = grid.num_nodes();
    let dim = grid.dim();
    let w = grid.node_weight();
    let tables = kernel_tables(grid, consts.alpha);
    let mut comps = vec![vec![0.0; n]; dim];
    let n1 = tables.n1;
    for i in 0..n {
        let mi = grid.multi_of(i);
        let pi = grid.coord(i);
        let fi = f.values[i];
        let mut acc = [0.0, 0.0];
        for j in 0..n {
            if i == j {
                continue;
            }
            let mj = grid.multi_of(j);
            let pj = grid.coord(j);
            let di = mi[0].abs_diff(mj[0]);
            let dj = mi[1].abs_diff(mj[1]);
            let k = tables.grad[di * n1 + dj];
            let df = fi - f.values[j];
            acc[0] += df * (pi[0] - pj[0]) * k;
            acc[1] += df * (pi[1] - pj[1]) * k;
        }
        for (kc, comp) in comps.iter_mut().enumerate() {
            comp[i] = consts.c2 * w * acc[kc];
        }
    }
    RieszVectorField {
        grid: grid.clone(),
        comps,
    }
}

fn quad_divergence(field: &RieszVectorField, consts: &KernelConstants) -> ScalarField {
    let grid = &field.grid;
    let n = grid.num_nodes();
    let dim = grid.dim();
    let w = grid.node_weight();
    let tables = kernel_tables(grid, consts.alpha);
    let mut out = vec![0.0; n];
    let n1 = tables.n1;
    for i in 0..n {
        let mi = grid.multi_of(i);
        let pi = grid.coord(i);
        let mut acc = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let mj = grid.multi_of(j);
            let pj = grid.coord(j);
            let di = mi[0].abs_diff(mj[0]);
            let dj = mi[1].abs_diff(mj[1]);
            let k = tables.grad[di * n1 + dj];
            for c in 0..dim {
                acc += (field.comps[c][i] - field.comps[c][j]) * (pi[c] - pj[c]) * k;
            }
        }
        out[i] = consts.c3 * w * acc;
    }
    ScalarField {
        grid: grid.clone(),
        values: out,
        mask: vec![true; n],
    }
}

// ---------------------------------------------------------------------------
// Constant calibration
// ---------------------------------------------------------------------------

/// Validate the closed-form kernel constants against the spectral backend on
/// a 1D Gaussian. If the closed form misses the 1e-3 target, c1 is refitted
/// by least squares; a residual still above 1e-2 is an error.
pub fn calibrate_constants(alpha: f64) -> Result<KernelConstants> {
    let mut consts = kernel_constants(1, alpha)?;
    let grid = Grid::line(-16.0, 16.0, 2048)?;
    let f = ScalarField::from_fn(grid, |x, _| (-0.5 * x * x).exp());
    let spectral = frac_laplacian(&f, alpha, Backend::Spectral, &SpectralConfig::padded(128)?)?;
    let quad = quad_laplacian(&f, &consts);
    let norm: f64 = spectral.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let err: f64 = spectral
        .values
        .iter()
        .zip(&quad.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let mut residual = err / norm;
    if residual > 1e-3 {
        // least-squares scalar fit of the quadrature sum against the oracle
        let raw: Vec<f64> = quad.values.iter().map(|v| v / consts.c1).collect();
        let num: f64 = raw.iter().zip(&spectral.values).map(|(a, b)| a * b).sum();
        let den: f64 = raw.iter().map(|a| a * a).sum();
        let c1 = num / den;
        consts.c1 = c1;
        consts.fitted = true;
        let err: f64 = raw
            .iter()
            .zip(&spectral.values)
            .map(|(a, b)| (c1 * a - b) * (c1 * a - b))
            .sum::<f64>()
            .sqrt();
        residual = err / norm;
        if residual > 1e-2 {
            return Err(Error::CalibrationFailure {
                residual,
                limit: 1e-2,
            });
        }
    }
    consts.validation_residual = Some(residual);
    Ok(consts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic_cos(n: usize) -> ScalarField {
        let grid = Grid::periodic_line(0.0, 2.0 * std::f64::consts::PI, n).unwrap();
        ScalarField::from_fn(grid, |x, _| x.cos())
    }

    #[test]
    fn laplacian_fixes_unit_frequency_cosine() {
        let f = periodic_cos(256);
        for alpha in [0.3, 0.5, 0.9, 1.0] {
            let out = frac_laplacian(&f, alpha, Backend::Spectral, &SpectralConfig::periodic())
                .unwrap();
            for (a, b) in out.values.iter().zip(&f.values) {
                assert!((a - b).abs() < 1e-10, "alpha={alpha}");
            }
        }
    }

    #[test]
    fn laplacian_kills_constants() {
        let grid = Grid::periodic_line(0.0, 4.0, 64).unwrap();
        let f = ScalarField::constant(grid, 3.2);
        let out =
            frac_laplacian(&f, 0.5, Backend::Spectral, &SpectralConfig::periodic()).unwrap();
        assert!(out.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn potential_is_identity_on_unit_frequency() {
        let f = periodic_cos(128);
        let out = riesz_potential(&f, 0.5, &SpectralConfig::periodic()).unwrap();
        for (a, b) in out.values.iter().zip(&f.values) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn potential_rejects_bad_alpha() {
        let f = periodic_cos(32);
        assert!(riesz_potential(&f, 0.0, &SpectralConfig::periodic()).is_err());
        assert!(riesz_potential(&f, 1.0, &SpectralConfig::periodic()).is_err());
        let zero = ScalarField::zeros(f.grid.clone());
        let out = riesz_potential(&zero, 0.5, &SpectralConfig::periodic()).unwrap();
        assert!(out.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn inverse_pair_periodic() {
        // |D|^alpha I^alpha = identity off the zero mode
        let grid = Grid::periodic_line(0.0, 2.0 * std::f64::consts::PI, 128).unwrap();
        let f = ScalarField::from_fn(grid, |x, _| x.cos() + 0.25 * (3.0 * x).sin());
        let cfg = SpectralConfig::periodic();
        let pot = riesz_potential(&f, 0.6, &cfg).unwrap();
        let back = frac_laplacian(&pot, 0.6, Backend::Spectral, &cfg).unwrap();
        for (a, b) in back.values.iter().zip(&f.values) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn inverse_pair_padded_bump() {
        // mean-zero bump embedded once into a 4x periodic lattice; the
        // composition recovers it to near machine precision on the interior
        let n = 512;
        let grid = Grid::line(-16.0, 16.0, n).unwrap();
        let h = grid.axis(0).spacing();
        let bump = ScalarField::from_fn(grid.clone(), |x, _| x * (-0.5 * x * x).exp());
        let big = Grid::periodic_line(-64.0, 4.0 * (32.0 + h), 4 * n).unwrap();
        // align: embed by interpolation-free zero extension
        let mut vals = vec![0.0; big.num_nodes()];
        for i in 0..big.num_nodes() {
            let x = big.coord(i)[0];
            let t = (x - grid.axis(0).a) / h;
            if t > -0.25 && t < (n - 1) as f64 + 0.25 {
                let k = t.round() as usize;
                if (t - k as f64).abs() < 1e-9 {
                    vals[i] = bump.values[k];
                }
            }
        }
        let embedded = ScalarField::new(big, vals, vec![true; 4 * n]).unwrap();
        let cfg = SpectralConfig::periodic();
        let pot = riesz_potential(&embedded, 0.5, &cfg).unwrap();
        let back = frac_laplacian(&pot, 0.5, Backend::Spectral, &cfg).unwrap();
        let max_err = back
            .values
            .iter()
            .zip(&embedded.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1e-6, "max interior error {max_err}");
    }

    #[test]
    fn gradient_of_sine_is_cosine() {
        let grid = Grid::periodic_line(0.0, 2.0 * std::f64::consts::PI, 256).unwrap();
        let f = ScalarField::from_fn(grid, |x, _| x.sin());
        for alpha in [0.4, 0.8, 1.0] {
            let g = riesz_gradient(&f, alpha, Backend::Spectral, &SpectralConfig::periodic())
                .unwrap();
            let tol = if alpha == 1.0 { 1e-3 } else { 1e-10 };
            for (i, v) in g.comps[0].iter().enumerate() {
                let x = f.grid.coord(i)[0];
                assert!((v - x.cos()).abs() < tol, "alpha={alpha} node {i}");
            }
        }
    }

    #[test]
    fn gradient_constant_is_zero() {
        let grid = Grid::periodic_line(0.0, 1.0, 32).unwrap();
        let f = ScalarField::constant(grid, 7.0);
        let g =
            riesz_gradient(&f, 0.5, Backend::Spectral, &SpectralConfig::periodic()).unwrap();
        assert!(g.comps[0].iter().all(|v| v.abs() < 1e-12));
        let gq = riesz_gradient(&f, 0.5, Backend::Quadrature, &SpectralConfig::periodic())
            .unwrap();
        assert!(gq.comps[0].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gradient_parity() {
        // odd f on a symmetric grid has an even fractional derivative
        let grid = Grid::line(-8.0, 8.0, 257).unwrap();
        let f = ScalarField::from_fn(grid, |x, _| x * (-x * x).exp());
        let g = riesz_gradient(&f, 0.5, Backend::Quadrature, &SpectralConfig::default())
            .unwrap();
        let n = f.grid.num_nodes();
        for i in 0..n {
            let j = n - 1 - i;
            assert!(
                (g.comps[0][i] - g.comps[0][j]).abs() < 1e-10,
                "parity at {i}"
            );
        }
    }

    #[test]
    fn adjoint_identity_random_fields() {
        use rand::prelude::*;
        use rand::rngs::StdRng;
        let mut rng = StdRng::seed_from_u64(7);
        for (boxes, pts) in [
            (vec![(0.0f64, 1.0f64)], vec![32usize]),
            (vec![(-1.0, 1.0), (0.0, 2.0)], vec![12, 9]),
        ] {
            let grid = Grid::new(&boxes, &pts).unwrap();
            let n = grid.num_nodes();
            for _ in 0..20 {
                let g = ScalarField::new(
                    grid.clone(),
                    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    vec![true; n],
                )
                .unwrap();
                let comps = (0..grid.dim())
                    .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                let ff = RieszVectorField::new(grid.clone(), comps).unwrap();
                for alpha in [0.3, 0.7, 1.0] {
                    let cfg = SpectralConfig::padded(2).unwrap();
                    let grad = riesz_gradient(&g, alpha, Backend::Adjoint, &cfg).unwrap();
                    let div = riesz_divergence(&ff, alpha, Backend::Adjoint, &cfg).unwrap();
                    let lhs = ff.inner(&grad);
                    let rhs = div.inner(&g);
                    let scale = ff.lq_norm(2.0) * grad.lq_norm(2.0)
                        + div.lp_norm(2.0) * g.lp_norm(2.0)
                        + 1e-300;
                    assert!(
                        (lhs + rhs).abs() / scale < 1e-12,
                        "alpha={alpha}: {} vs {}",
                        lhs,
                        rhs
                    );
                }
            }
        }
    }

    #[test]
    fn spectral_composition_is_minus_laplacian() {
        // Div_alpha D^alpha = -|D|^(2alpha) on periodic grids
        let grid = Grid::periodic_line(0.0, 2.0 * std::f64::consts::PI, 128).unwrap();
        use rand::prelude::*;
        use rand::rngs::StdRng;
        let mut rng = StdRng::seed_from_u64(11);
        let n = grid.num_nodes();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        // band-limit the probe: the odd gradient symbol vanishes on the
        // unpaired Nyquist bin, so the identity holds below it
        let smoothed = crate::fft::apply_multiplier(
            &raw,
            [n, 1],
            [grid.axis(0).spacing(), 1.0],
            |_, _, ny| Complex::new(if ny { 0.0 } else { 1.0 }, 0.0),
        );
        let f = ScalarField::new(grid.clone(), smoothed, vec![true; n]).unwrap();
        let cfg = SpectralConfig::periodic();
        let alpha = 0.45;
        let grad = riesz_gradient(&f, alpha, Backend::Spectral, &cfg).unwrap();
        let comp = riesz_divergence(&grad, alpha, Backend::Spectral, &cfg).unwrap();
        let lap = frac_laplacian(&f, 2.0 * alpha, Backend::Spectral, &cfg).unwrap();
        let scale = lap.lp_norm(2.0);
        let diff: f64 = comp
            .values
            .iter()
            .zip(&lap.values)
            .map(|(a, b)| (a + b) * (a + b))
            .sum::<f64>()
            .sqrt()
            * comp.grid.node_weight().sqrt();
        assert!(diff / scale < 1e-10, "{diff} vs {scale}");
    }

    #[test]
    fn quadrature_matches_spectral_on_gaussian() {
        let grid = Grid::line(-10.0, 10.0, 1024).unwrap();
        let f = ScalarField::from_fn(grid, |x, _| (-0.5 * x * x).exp());
        for alpha in [0.3, 0.5, 0.7] {
            let s = frac_laplacian(
                &f,
                alpha,
                Backend::Spectral,
                &SpectralConfig::padded(128).unwrap(),
            )
            .unwrap();
            let q = frac_laplacian(&f, alpha, Backend::Quadrature, &SpectralConfig::default())
                .unwrap();
            let norm: f64 = s.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            let err: f64 = s
                .values
                .iter()
                .zip(&q.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(err / norm <= 1e-3, "alpha={alpha}: rel error {}", err / norm);
        }
    }

    #[test]
    fn quadrature_alpha_one_unsupported() {
        let grid = Grid::line(-1.0, 1.0, 32).unwrap();
        let f = ScalarField::zeros(grid);
        assert!(matches!(
            frac_laplacian(&f, 1.0, Backend::Quadrature, &SpectralConfig::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn calibration_residual_small() {
        let consts = calibrate_constants(0.5).unwrap();
        assert!(!consts.fitted, "closed forms should validate directly");
        assert!(consts.validation_residual.unwrap() <= 1e-3);
        assert_eq!(consts.c2, consts.c3);
        // known 1D value: c1(1, a) -> 1/pi as a -> 1
        let near_one = kernel_constants(1, 0.999).unwrap();
        assert!((near_one.c1 - 1.0 / std::f64::consts::PI).abs() < 5e-3);
    }

    #[test]
    fn spectral_gradient_approaches_classical() {
        // D^alpha -> D as alpha -> 1: on a multi-frequency field the spectral
        // gradient converges to the exact classical derivative
        let grid = Grid::periodic_line(0.0, 2.0 * std::f64::consts::PI, 512).unwrap();
        let f = ScalarField::from_fn(grid.clone(), |x, _| x.sin() + 0.3 * (3.0 * x).sin());
        let exact = ScalarField::from_fn(grid, |x, _| x.cos() + 0.9 * (3.0 * x).cos());
        let mut last = f64::INFINITY;
        for alpha in [0.7, 0.8, 0.9, 0.99] {
            let g = riesz_gradient(&f, alpha, Backend::Spectral, &SpectralConfig::periodic())
                .unwrap();
            let err: f64 = g.comps[0]
                .iter()
                .zip(&exact.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(err < last, "alpha={alpha}: {err} !< {last}");
            last = err;
        }
        assert!(last < 2e-1);
    }

    #[test]
    fn quadrature_gradient_refines_toward_spectral() {
        // at fixed alpha the quadrature gradient converges to the spectral
        // one under grid refinement (no diagonal-cell correction, so the
        // constant-in-h error fraction shrinks like h^{1-alpha})
        let alpha = 0.7;
        let mut last = f64::INFINITY;
        for n in [256usize, 512, 1024] {
            let grid = Grid::periodic_line(0.0, 2.0 * std::f64::consts::PI, n).unwrap();
            let f = ScalarField::from_fn(grid, |x, _| x.sin());
            let g = riesz_gradient(&f, alpha, Backend::Quadrature, &SpectralConfig::default())
                .unwrap();
            let s = riesz_gradient(&f, alpha, Backend::Spectral, &SpectralConfig::periodic())
                .unwrap();
            let err: f64 = g.comps[0]
                .iter()
                .zip(&s.comps[0])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let norm: f64 = s.comps[0].iter().map(|v| v * v).sum::<f64>().sqrt();
            let rel = err / norm;
            assert!(rel < last, "n={n}: {rel} !< {last}");
            last = rel;
        }
    }

    #[test]
    fn quad_divergence_bounded_under_box_growth() {
        // sup and L1 norms of the quadrature Div of a fixed bump stay bounded
        // as the box grows at fixed h
        let h = 1.0f64 / 16.0;
        let phi = |x: f64| {
            if x.abs() < 1.0 {
                (1.0 - x * x).powi(3)
            } else {
                0.0
            }
        };
        let mut norms = Vec::new();
        for half in [4.0, 8.0, 16.0, 32.0] {
            let n = (2.0 * half / h).round() as usize + 1;
            let grid = Grid::line(-half, half, n).unwrap();
            let field = RieszVectorField::from_fn(grid, |x, _| vec![phi(x)]);
            let div = riesz_divergence(
                &field,
                0.5,
                Backend::Quadrature,
                &SpectralConfig::default(),
            )
            .unwrap();
            norms.push((div.linf_norm(), div.lp_norm(1.0)));
        }
        // sup norm settles; L1 increments decay geometrically (the tail of
        // |x|^{-(1+alpha)} beyond the box), so the norms stay uniformly
        // bounded by a geometric-series extrapolation
        for k in 1..norms.len() {
            assert!(norms[k].0 <= norms[0].0 * 1.02, "sup grew: {norms:?}");
        }
        let d1 = norms[1].1 - norms[0].1;
        let d2 = norms[2].1 - norms[1].1;
        let d3 = norms[3].1 - norms[2].1;
        assert!(d1 > d2 && d2 > d3, "increments not decaying: {norms:?}");
        let ratio = d3 / d2;
        assert!(ratio < 0.8, "tail not geometric: {ratio}");
        let bound = norms[3].1 + d3 * ratio / (1.0 - ratio);
        for (_, l1) in &norms {
            assert!(*l1 <= bound);
        }
    }
}
