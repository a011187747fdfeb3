//! FFT-based Fourier-multiplier application on periodic lattices (1D/2D),
//! with zero-padding helpers for compactly supported fields.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

type PlanCache = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(HashMap::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry((len, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// Angular frequency of FFT bin `k` on a periodic axis of `size` nodes with
/// node spacing `h` (period `size * h`).
pub fn frequency(size: usize, h: f64, k: usize) -> f64 {
    let m = size as i64;
    let k = k as i64;
    let signed = if 2 * k <= m { k } else { k - m };
    2.0 * std::f64::consts::PI * signed as f64 / (m as f64 * h)
}

fn fft_axis0(buf: &mut [Complex<f64>], n0: usize, n1: usize, inverse: bool) {
    // axis 0 is the major (strided) axis; transpose, run rows, transpose back
    if n0 == 1 {
        return;
    }
    if n1 == 1 {
        plan(n0, inverse).process(buf);
        return;
    }
    let mut tmp = vec![Complex::default(); buf.len()];
    for i in 0..n0 {
        for j in 0..n1 {
            tmp[j * n0 + i] = buf[i * n1 + j];
        }
    }
    let fft = plan(n0, inverse);
    for row in tmp.chunks_exact_mut(n0) {
        fft.process(row);
    }
    for i in 0..n0 {
        for j in 0..n1 {
            buf[i * n1 + j] = tmp[j * n0 + i];
        }
    }
}

fn fft_axis1(buf: &mut [Complex<f64>], _n0: usize, n1: usize, inverse: bool) {
    if n1 == 1 {
        return;
    }
    let fft = plan(n1, inverse);
    for row in buf.chunks_exact_mut(n1) {
        fft.process(row);
    }
}

/// Apply the Fourier multiplier `mult(xi_x, xi_y, at_nyquist)` to real
/// samples on a periodic lattice of `sizes` nodes (lexicographic, first axis
/// major) with the given spacings. Returns the real part of the inverse
/// transform. `at_nyquist` is true on the unpaired highest-frequency bin of
/// an even-sized axis, where odd (imaginary) symbols cannot act on real data
/// and should vanish.
pub fn apply_multiplier(
    values: &[f64],
    sizes: [usize; 2],
    spacings: [f64; 2],
    mut mult: impl FnMut(f64, f64, bool) -> Complex<f64>,
) -> Vec<f64> {
    let (n0, n1) = (sizes[0], sizes[1]);
    assert_eq!(values.len(), n0 * n1);
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_axis1(&mut buf, n0, n1, false);
    fft_axis0(&mut buf, n0, n1, false);
    for k0 in 0..n0 {
        let f0 = frequency(n0, spacings[0], k0);
        let ny0 = n0 % 2 == 0 && k0 == n0 / 2;
        for k1 in 0..n1 {
            let f1 = if n1 == 1 {
                0.0
            } else {
                frequency(n1, spacings[1], k1)
            };
            let ny1 = n1 > 1 && n1 % 2 == 0 && k1 == n1 / 2;
            buf[k0 * n1 + k1] *= mult(f0, f1, ny0 || ny1);
        }
    }
    fft_axis0(&mut buf, n0, n1, true);
    fft_axis1(&mut buf, n0, n1, true);
    let scale = 1.0 / (n0 * n1) as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Zero-embed `values` (sizes `inner`) into a lattice of sizes `outer` at
/// centered offsets. Returns (padded, offsets).
pub fn pad_centered(
    values: &[f64],
    inner: [usize; 2],
    outer: [usize; 2],
) -> (Vec<f64>, [usize; 2]) {
    assert!(outer[0] >= inner[0] && outer[1] >= inner[1]);
    let off = [(outer[0] - inner[0]) / 2, (outer[1] - inner[1]) / 2];
    let mut out = vec![0.0; outer[0] * outer[1]];
    for i in 0..inner[0] {
        for j in 0..inner[1] {
            out[(i + off[0]) * outer[1] + (j + off[1])] = values[i * inner[1] + j];
        }
    }
    (out, off)
}

/// Extract the inner window placed by [`pad_centered`].
pub fn unpad(padded: &[f64], inner: [usize; 2], outer: [usize; 2], off: [usize; 2]) -> Vec<f64> {
    let mut out = vec![0.0; inner[0] * inner[1]];
    for i in 0..inner[0] {
        for j in 0..inner[1] {
            out[i * inner[1] + j] = padded[(i + off[0]) * outer[1] + (j + off[1])];
        }
    }
    out
}
