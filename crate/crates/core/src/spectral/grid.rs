use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Periodic box `[0, L)^d` sampled with `N` points per axis, together with
/// its truncated wavenumber lattice `xi = 2 pi k / L`, `k in {-N/2, .., N/2-1}^d`.
///
/// Modes are stored in row-major order (axis 0 slowest) using the usual FFT
/// index order: index `j` on an axis carries `k = j` for `j < N/2` and
/// `k = j - N` otherwise. Negation of the lattice is taken modulo `N`, so the
/// Nyquist index `-N/2` is its own negative.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

struct GridInner {
    dim: usize,
    n: usize,
    box_length: f64,
    xi: Vec<[f64; 3]>,
    xi_mag: Vec<f64>,
    neg: Vec<usize>,
    dealiased: Vec<bool>,
    nyquist: Vec<bool>,
    live: Vec<usize>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Grid {
    pub fn new(dim: usize, n: usize, box_length: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("points per axis must be a positive even integer, got {n}")));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length must be positive, got {box_length}")));
        }
        let n_modes = n.pow(dim as u32);
        let scale = 2.0 * std::f64::consts::PI / box_length;
        let mut xi = Vec::with_capacity(n_modes);
        let mut xi_mag = Vec::with_capacity(n_modes);
        for idx in 0..n_modes {
            let k = mode_k(idx, dim, n);
            let v = [k[0] as f64 * scale, k[1] as f64 * scale, k[2] as f64 * scale];
            xi_mag.push((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt());
            xi.push(v);
        }
        let half = (n / 2) as i64;
        let mut neg = Vec::with_capacity(n_modes);
        let mut dealiased = Vec::with_capacity(n_modes);
        let mut nyquist = Vec::with_capacity(n_modes);
        for idx in 0..n_modes {
            let k = mode_k(idx, dim, n);
            let mut m = 0;
            for ka in k.iter().take(dim) {
                m = m * n + (-ka).rem_euclid(n as i64) as usize;
            }
            neg.push(m);
            dealiased.push(k.iter().all(|&ka| 3 * ka.abs() < n as i64));
            nyquist.push(k.iter().take(dim).any(|&ka| ka == -half));
        }
        let live = (0..n_modes).filter(|&i| dealiased[i]).collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner { dim, n, box_length, xi, xi_mag, neg, dealiased, nyquist, live, forward, inverse }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn box_length(&self) -> f64 {
        self.inner.box_length
    }

    /// Number of lattice modes (equivalently, physical grid points), `N^d`.
    pub fn n_modes(&self) -> usize {
        self.inner.xi.len()
    }

    pub fn dx(&self) -> f64 {
        self.inner.box_length / self.inner.n as f64
    }

    /// Box measure `L^d`.
    pub fn volume(&self) -> f64 {
        self.inner.box_length.powi(self.inner.dim as i32)
    }

    /// Parseval weight: `||f||^2_{L^2} = weight * sum_k |c_k|^2` for the
    /// unnormalized forward coefficients `c_k`, i.e. `L^d / N^(2d)`.
    pub fn parseval_weight(&self) -> f64 {
        self.volume() / (self.n_modes() as f64).powi(2)
    }

    /// Quadrature weight of one physical grid point, `L^d / N^d`.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.n_modes() as f64
    }

    /// Smallest nonzero wavenumber magnitude, `2 pi / L`.
    pub fn min_xi(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.inner.box_length
    }

    pub fn k(&self, idx: usize) -> [i64; 3] {
        mode_k(idx, self.inner.dim, self.inner.n)
    }

    pub fn xi(&self, idx: usize) -> [f64; 3] {
        self.inner.xi[idx]
    }

    pub fn xi_mag(&self, idx: usize) -> f64 {
        self.inner.xi_mag[idx]
    }

    pub fn xis(&self) -> &[[f64; 3]] {
        &self.inner.xi
    }

    pub fn xi_mags(&self) -> &[f64] {
        &self.inner.xi_mag
    }

    /// Index of the mode `-k` (componentwise modulo `N`).
    #[inline]
    pub fn neg_index(&self, idx: usize) -> usize {
        self.inner.neg[idx]
    }

    /// Index of the lattice mode `k`, if it is representable on this grid.
    pub fn index_of(&self, k: [i64; 3]) -> Option<usize> {
        let n = self.inner.n as i64;
        let mut idx = 0usize;
        for &ka in k.iter().take(self.inner.dim) {
            if ka < -n / 2 || ka >= n / 2 {
                return None;
            }
            idx = idx * n as usize + ka.rem_euclid(n) as usize;
        }
        if self.inner.dim == 2 && k[2] != 0 {
            return None;
        }
        Some(idx)
    }

    /// Two-thirds rule: a mode survives when every `3 |k_i| < N`, which
    /// keeps quadratic products of surviving modes free of aliasing.
    #[inline]
    pub fn is_dealiased(&self, idx: usize) -> bool {
        self.inner.dealiased[idx]
    }

    /// Indices of the modes kept by the two-thirds rule.
    pub fn dealiased_modes(&self) -> &[usize] {
        &self.inner.live
    }

    /// Whether the mode touches the Nyquist index `-N/2` on some axis.
    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        self.inner.nyquist[idx]
    }

    /// Physical coordinates of grid point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let n = self.inner.n;
        let dx = self.dx();
        let mut p = [0.0; 3];
        let mut rem = idx;
        let mut stride = self.n_modes();
        for axis in 0..self.inner.dim {
            stride /= n;
            p[axis] = (rem / stride) as f64 * dx;
            rem %= stride;
        }
        p
    }

    /// Unnormalized forward DFT of one component, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.forward);
    }

    /// Inverse DFT of one component, in place, including the `1/N^d` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.inverse);
        let s = 1.0 / self.n_modes() as f64;
        for c in data.iter_mut() {
            *c *= s;
        }
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.inner.n;
        let total = self.n_modes();
        assert_eq!(data.len(), total, "component length does not match the grid");
        // last axis: contiguous lines
        let mut fft_scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut fft_scratch);
        let mut lines = vec![Complex64::new(0.0, 0.0); total];
        let mut stride = 1;
        for _ in 1..self.inner.dim {
            stride *= n;
            let block = stride * n;
            // each block is an n x stride matrix whose columns are the lines
            // of this axis; transpose it so they become contiguous
            for outer in (0..total).step_by(block) {
                transpose(&data[outer..outer + block], &mut lines[outer..outer + block], n, stride);
            }
            fft.process_with_scratch(&mut lines, &mut fft_scratch);
            for outer in (0..total).step_by(block) {
                transpose(&lines[outer..outer + block], &mut data[outer..outer + block], stride, n);
            }
        }
    }
}

/// Tiled out-of-place transpose of a `rows x cols` row-major matrix.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const T: usize = 16;
    for r0 in (0..rows).step_by(T) {
        for c0 in (0..cols).step_by(T) {
            for r in r0..(r0 + T).min(rows) {
                for c in c0..(c0 + T).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

fn mode_k(idx: usize, dim: usize, n: usize) -> [i64; 3] {
    let mut k = [0i64; 3];
    let mut rem = idx;
    let mut stride = n.pow(dim as u32);
    for ka in k.iter_mut().take(dim) {
        stride /= n;
        let j = rem / stride;
        rem %= stride;
        *ka = if j < n / 2 { j as i64 } else { j as i64 - n as i64 };
    }
    k
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dim == other.inner.dim
                && self.inner.n == other.inner.n
                && self.inner.box_length == other.inner.box_length)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.inner.dim)
            .field("n", &self.inner.n)
            .field("box_length", &self.inner.box_length)
            .finish()
    }
}
