use num_complex::Complex64;
use rayon::prelude::*;

use super::Grid;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Tensorial rank of a field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rank {
    Scalar,
    Vector,
    Tensor,
}

impl Rank {
    pub fn components(self, dim: usize) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => dim,
            Rank::Tensor => dim * dim,
        }
    }

    pub fn as_u32(self) -> u32 {
        match self {
            Rank::Scalar => 0,
            Rank::Vector => 1,
            Rank::Tensor => 2,
        }
    }

    pub fn from_u32(r: u32) -> Option<Self> {
        match r {
            0 => Some(Rank::Scalar),
            1 => Some(Rank::Vector),
            2 => Some(Rank::Tensor),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rank::Scalar => "scalar",
            Rank::Vector => "vector",
            Rank::Tensor => "tensor",
        }
    }
}

/// Scalar, vector or tensor field held as Fourier coefficients.
///
/// Coefficients are component-major: component `c` occupies
/// `coeffs[c * n_modes .. (c + 1) * n_modes]`. Tensor component `(i, j)` is
/// `c = i * d + j`. Coefficients are the unnormalized forward DFT of the grid
/// samples, so a continuum Fourier amplitude `a_k` corresponds to
/// `c_k = N^d a_k`.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    rank: Rank,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &Grid, rank: Rank) -> Self {
        let len = rank.components(grid.dim()) * grid.n_modes();
        Self { grid: grid.clone(), rank, coeffs: vec![ZERO; len] }
    }

    pub fn from_coeffs(grid: &Grid, rank: Rank, coeffs: Vec<Complex64>) -> Result<Self> {
        let len = rank.components(grid.dim()) * grid.n_modes();
        if coeffs.len() != len {
            return Err(Error::InvalidParameter(format!(
                "{} field on this grid needs {len} coefficients, got {}",
                rank.name(),
                coeffs.len()
            )));
        }
        Ok(Self { grid: grid.clone(), rank, coeffs })
    }

    /// Transforms component-major physical samples.
    pub fn from_physical(grid: &Grid, rank: Rank, values: &[f64]) -> Result<Self> {
        let n_modes = grid.n_modes();
        let len = rank.components(grid.dim()) * n_modes;
        if values.len() != len {
            return Err(Error::InvalidParameter(format!(
                "{} field on this grid needs {len} samples, got {}",
                rank.name(),
                values.len()
            )));
        }
        let mut coeffs: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        coeffs.par_chunks_mut(n_modes).for_each(|c| grid.forward(c));
        Ok(Self { grid: grid.clone(), rank, coeffs })
    }

    /// Samples `f(x, component)` on the grid and transforms.
    pub fn from_fn(grid: &Grid, rank: Rank, f: impl Fn([f64; 3], usize) -> f64) -> Self {
        let n_modes = grid.n_modes();
        let nc = rank.components(grid.dim());
        let mut values = Vec::with_capacity(nc * n_modes);
        for c in 0..nc {
            for idx in 0..n_modes {
                values.push(f(grid.point(idx), c));
            }
        }
        Self::from_physical(grid, rank, &values).expect("sized by construction")
    }

    /// Real part of the physical samples, component-major.
    pub fn to_physical(&self) -> Vec<f64> {
        let n_modes = self.grid.n_modes();
        let mut data = self.coeffs.clone();
        data.par_chunks_mut(n_modes).for_each(|c| self.grid.inverse(c));
        data.into_iter().map(|c| c.re).collect()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn n_components(&self) -> usize {
        self.rank.components(self.grid.dim())
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.n_modes();
        &self.coeffs[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.grid.n_modes();
        &mut self.coeffs[c * n..(c + 1) * n]
    }

    /// Coefficient of component `c` at mode `idx`.
    #[inline]
    pub fn at(&self, c: usize, idx: usize) -> Complex64 {
        self.coeffs[c * self.grid.n_modes() + idx]
    }

    #[inline]
    pub fn set(&mut self, c: usize, idx: usize, v: Complex64) {
        let n = self.grid.n_modes();
        self.coeffs[c * n + idx] = v;
    }

    pub fn require_rank(&self, rank: Rank) -> Result<()> {
        if self.rank == rank {
            Ok(())
        } else {
            Err(Error::RankMismatch { expected: rank.name(), found: self.rank.name() })
        }
    }

    pub fn require_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn require_compatible(&self, other: &Self) -> Result<()> {
        self.require_same_grid(other)?;
        other.require_rank(self.rank)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.coeffs {
            *c *= a;
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) -> Result<()> {
        self.require_compatible(other)?;
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// Real `L^2` inner product over the box (Parseval).
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.require_compatible(other)?;
        let s: f64 = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a.conj() * b).re).sum();
        Ok(s * self.grid.parseval_weight())
    }

    pub fn norm_l2(&self) -> f64 {
        self.weighted_norm(|_| 1.0)
    }

    /// `sqrt(weight * sum_k w(|xi_k|) |c_k|^2)` over all components.
    pub fn weighted_norm(&self, w: impl Fn(f64) -> f64) -> f64 {
        let mags = self.grid.xi_mags();
        let n = mags.len();
        let mut s = 0.0;
        for comp in self.coeffs.chunks(n) {
            for (c, &r) in comp.iter().zip(mags) {
                s += w(r) * c.norm_sqr();
            }
        }
        (s * self.grid.parseval_weight()).sqrt()
    }

    /// `||f||^2 + ||grad f||^2`.
    pub fn norm_h1(&self) -> f64 {
        self.weighted_norm(|r| 1.0 + r * r)
    }

    /// `||f||^2 + ||grad f||^2 + ||lap f||^2`.
    pub fn norm_h2(&self) -> f64 {
        self.weighted_norm(|r| {
            let r2 = r * r;
            1.0 + r2 + r2 * r2
        })
    }

    /// `||grad f||`.
    pub fn norm_grad(&self) -> f64 {
        self.weighted_norm(|r| r * r)
    }

    /// `||lap f||`.
    pub fn norm_lap(&self) -> f64 {
        self.weighted_norm(|r| r.powi(4))
    }

    /// Largest coefficient modulus.
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest deviation from `c(-k) = conj(c(k))` over all modes and components.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n_modes();
        let mut worst: f64 = 0.0;
        for comp in self.coeffs.chunks(n) {
            for idx in 0..n {
                let m = self.grid.neg_index(idx);
                worst = worst.max((comp[idx] - comp[m].conj()).norm());
            }
        }
        worst
    }

    /// Replaces each coefficient by the Hermitian average, making the
    /// physical field exactly real.
    pub fn enforce_hermitian(&mut self) {
        let grid = self.grid.clone();
        let n = grid.n_modes();
        for comp in self.coeffs.chunks_mut(n) {
            for idx in 0..n {
                let m = grid.neg_index(idx);
                if m < idx {
                    continue;
                }
                if m == idx {
                    comp[idx].im = 0.0;
                } else {
                    let avg = 0.5 * (comp[idx] + comp[m].conj());
                    comp[idx] = avg;
                    comp[m] = avg.conj();
                }
            }
        }
    }

    /// Two-thirds rule truncation.
    pub fn dealias(&mut self) {
        let grid = self.grid.clone();
        let n = grid.n_modes();
        for comp in self.coeffs.chunks_mut(n) {
            for (idx, c) in comp.iter_mut().enumerate() {
                if !grid.is_dealiased(idx) {
                    *c = ZERO;
                }
            }
        }
    }

    pub fn dealiased(&self) -> Self {
        let mut out = self.clone();
        out.dealias();
        out
    }

    pub fn zero_nyquist(&mut self) {
        let grid = self.grid.clone();
        let n = grid.n_modes();
        for comp in self.coeffs.chunks_mut(n) {
            for (idx, c) in comp.iter_mut().enumerate() {
                if grid.is_nyquist(idx) {
                    *c = ZERO;
                }
            }
        }
    }

    /// Whether every coefficient is finite.
    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Maps the field onto another grid of the same dimension and box,
    /// keeping the modes both lattices share (Nyquist modes dropped).
    pub fn resample(&self, target: &Grid) -> Result<Self> {
        if target.dim() != self.grid.dim() || target.box_length() != self.grid.box_length() {
            return Err(Error::GridMismatch);
        }
        let mut out = Self::zeros(target, self.rank);
        let ratio = (target.n_modes() as f64) / (self.grid.n_modes() as f64);
        let nc = self.n_components();
        for idx in 0..self.grid.n_modes() {
            if self.grid.is_nyquist(idx) {
                continue;
            }
            if let Some(t) = target.index_of(self.grid.k(idx)) {
                if target.is_nyquist(t) {
                    continue;
                }
                for c in 0..nc {
                    out.set(c, t, self.at(c, idx) * ratio);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::random_field;
    use std::f64::consts::PI;

    #[test]
    fn parseval_matches_physical_quadrature() {
        let g = Grid::new(3, 12, 1.7).unwrap();
        let f = random_field(&g, Rank::Vector, 5, 7);
        let phys = f.to_physical();
        let direct: f64 = phys.iter().map(|v| v * v).sum::<f64>() * g.cell_volume();
        let spectral = f.norm_l2().powi(2);
        assert!((direct - spectral).abs() <= 1e-12 * spectral);
    }

    #[test]
    fn physical_round_trip() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let f = random_field(&g, Rank::Tensor, 6, 1);
        let back = SpectralField::from_physical(&g, Rank::Tensor, &f.to_physical()).unwrap();
        let err = back.sub(&f).unwrap().norm_l2();
        assert!(err <= 1e-13 * f.norm_l2());
    }

    #[test]
    fn random_fields_are_hermitian() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        let f = random_field(&g, Rank::Scalar, 3, 3);
        assert!(f.hermitian_defect() < 1e-14 * f.max_abs_coeff());
    }

    #[test]
    fn enforce_hermitian_is_a_projection() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let coeffs = (0..g.n_modes()).map(|i| Complex64::new(i as f64, (i * i) as f64 * 0.1)).collect();
        let mut f = SpectralField::from_coeffs(&g, Rank::Scalar, coeffs).unwrap();
        f.enforce_hermitian();
        assert!(f.hermitian_defect() == 0.0);
        let before = f.clone();
        f.enforce_hermitian();
        assert_eq!(before.coeffs(), f.coeffs());
    }

    #[test]
    fn resample_preserves_band_limited_norm() {
        let g = Grid::new(2, 16, 3.0).unwrap();
        let fine = Grid::new(2, 32, 3.0).unwrap();
        let f = random_field(&g, Rank::Vector, 4, 2);
        let up = f.resample(&fine).unwrap();
        assert!((up.norm_l2() - f.norm_l2()).abs() <= 1e-13 * f.norm_l2());
        let down = up.resample(&g).unwrap();
        assert!(down.sub(&f).unwrap().norm_l2() <= 1e-14 * f.norm_l2());
    }

    #[test]
    fn mismatched_operands_are_rejected() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let h = Grid::new(2, 10, 1.0).unwrap();
        let a = SpectralField::zeros(&g, Rank::Vector);
        assert!(matches!(a.inner(&SpectralField::zeros(&h, Rank::Vector)), Err(Error::GridMismatch)));
        assert!(matches!(
            a.inner(&SpectralField::zeros(&g, Rank::Scalar)),
            Err(Error::RankMismatch { .. })
        ));
    }
}
