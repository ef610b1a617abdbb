//! Exact-spectrum linear operators on the torus grid.
//!
//! All transforms use the grid's natural band (-n/2, n/2]. The mode with
//! integer frequency k is an exact eigenfunction of the Laplacian with
//! eigenvalue -4 pi^2 |k|^2. The Nyquist modes (k1 or k2 = n/2) are retained
//! for the Laplacian and zeroed in the gradient Parseval sums so that the
//! Dirichlet pairing stays symmetric.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Point, ScalarField, TorusGrid};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction))
}

fn fft2_inplace(buf: &mut [Complex64], n: usize, direction: FftDirection) {
    let fft = plan(n, direction);
    for row in buf.chunks_exact_mut(n) {
        fft.process(row);
    }
    transpose(buf, n);
    for row in buf.chunks_exact_mut(n) {
        fft.process(row);
    }
    transpose(buf, n);
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Forward transform, normalized so `values[j] = sum_q coeff[q] e^{2 pi i q.j/n}`.
pub fn forward(field: &ScalarField) -> Vec<Complex64> {
    let n = field.grid().n();
    let mut buf: Vec<Complex64> = field
        .values()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft2_inplace(&mut buf, n, FftDirection::Forward);
    let norm = 1.0 / (n * n) as f64;
    for c in &mut buf {
        *c *= norm;
    }
    buf
}

/// Unnormalized inverse of [`forward`]; returns the real part.
pub fn inverse(grid: TorusGrid, mut coeffs: Vec<Complex64>) -> ScalarField {
    let n = grid.n();
    fft2_inplace(&mut coeffs, n, FftDirection::Inverse);
    let values = coeffs.iter().map(|c| c.re).collect();
    ScalarField::from_values(grid, values).expect("length preserved by fft")
}

fn check_grids(u: &ScalarField, v: &ScalarField) -> Result<()> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch(u.grid().n(), v.grid().n()));
    }
    Ok(())
}

/// Spectral Laplacian: mode k is multiplied by -4 pi^2 |k|^2. Zero mean.
pub fn laplacian(u: &ScalarField) -> ScalarField {
    let grid = u.grid();
    let n = grid.n();
    let mut coeffs = forward(u);
    for q1 in 0..n {
        let k1 = grid.frequency(q1) as f64;
        for q2 in 0..n {
            let k2 = grid.frequency(q2) as f64;
            coeffs[q1 * n + q2] *= -4.0 * PI * PI * (k1 * k1 + k2 * k2);
        }
    }
    inverse(grid, coeffs)
}

/// Solves -Delta u = f - mean(f) with mean(u) = 0.
pub fn inv_laplacian_zero_mean(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let n = grid.n();
    let mut coeffs = forward(f);
    coeffs[0] = Complex64::new(0.0, 0.0);
    for q1 in 0..n {
        let k1 = grid.frequency(q1) as f64;
        for q2 in 0..n {
            if q1 == 0 && q2 == 0 {
                continue;
            }
            let k2 = grid.frequency(q2) as f64;
            coeffs[q1 * n + q2] /= 4.0 * PI * PI * (k1 * k1 + k2 * k2);
        }
    }
    inverse(grid, coeffs)
}

/// Dirichlet pairing `int grad(u) . grad(v)` via the Parseval sum.
pub fn dirichlet_inner(u: &ScalarField, v: &ScalarField) -> Result<f64> {
    check_grids(u, v)?;
    let grid = u.grid();
    let n = grid.n();
    let nyq = (n / 2) as i64;
    let cu = forward(u);
    let cv = forward(v);
    let mut acc = 0.0;
    for q1 in 0..n {
        let k1 = grid.frequency(q1);
        for q2 in 0..n {
            let k2 = grid.frequency(q2);
            if k1 == nyq || k2 == nyq {
                continue;
            }
            let w = 4.0 * PI * PI * (k1 * k1 + k2 * k2) as f64;
            acc += w * (cu[q1 * n + q2] * cv[q1 * n + q2].conj()).re;
        }
    }
    Ok(acc)
}

/// Squared H^{-1} seminorm of a (mean-free) field: sum over k != 0 of
/// |u_k|^2 / (4 pi^2 |k|^2). Equals `dirichlet_inner(w, w)` for
/// `w = inv_laplacian_zero_mean(u)` up to the Nyquist convention.
pub fn h_minus_1_sq(u: &ScalarField) -> f64 {
    let grid = u.grid();
    let n = grid.n();
    let cu = forward(u);
    let mut acc = 0.0;
    for q1 in 0..n {
        let k1 = grid.frequency(q1) as f64;
        for q2 in 0..n {
            if q1 == 0 && q2 == 0 {
                continue;
            }
            let k2 = grid.frequency(q2) as f64;
            acc += cu[q1 * n + q2].norm_sqr() / (4.0 * PI * PI * (k1 * k1 + k2 * k2));
        }
    }
    acc
}

/// Green function of -Delta centered at `p`, by the truncated Fourier series
/// over the grid's band. The band-limited delta at an arbitrary (non-node)
/// point is exact in frequency space. Zero mean.
pub fn green_function(grid: TorusGrid, p: Point) -> ScalarField {
    let n = grid.n();
    let h = grid.spacing();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n * n];
    for q1 in 0..n {
        let k1 = grid.frequency(q1) as f64;
        for q2 in 0..n {
            if q1 == 0 && q2 == 0 {
                continue;
            }
            let k2 = grid.frequency(q2) as f64;
            // phase shift of half a cell: values are sampled at cell centers
            let phase = 2.0 * PI * (k1 * (0.5 * h - p.x) + k2 * (0.5 * h - p.y));
            let amp = 1.0 / (4.0 * PI * PI * (k1 * k1 + k2 * k2));
            coeffs[q1 * n + q2] = Complex64::from_polar(amp, phase);
        }
    }
    inverse(grid, coeffs)
}
