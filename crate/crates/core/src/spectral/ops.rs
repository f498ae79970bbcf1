//! Fourier multipliers. Index conventions are fixed project-wide:
//! `(grad u)_ij = d_j u_i` and `(div E)_i = d_j E_ij`.
//!
//! Odd-order derivatives vanish on Nyquist modes, which keeps derivatives
//! of real fields real.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{Grid, Rank, SpectralField};
use crate::error::Result;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Multiplier of `d/dx_axis` at mode `idx`.
#[inline]
pub fn ik(grid: &Grid, idx: usize, axis: usize) -> Complex64 {
    if grid.is_nyquist(idx) {
        ZERO
    } else {
        Complex64::new(0.0, grid.xi(idx)[axis])
    }
}

/// Multiplies every coefficient by `|xi|^s`; the zero mode is sent to zero
/// for `s != 0` and left alone for `s == 0`.
pub fn lambda_power(f: &SpectralField, s: f64) -> SpectralField {
    if s == 0.0 {
        return f.clone();
    }
    let grid = f.grid().clone();
    let mags = grid.xi_mags();
    let mut out = f.clone();
    let n = grid.n_modes();
    for comp in out.coeffs_mut().chunks_mut(n) {
        for (c, &r) in comp.iter_mut().zip(mags) {
            *c = if r == 0.0 { ZERO } else { *c * r.powf(s) };
        }
    }
    out
}

/// `(I - xi xi^T / |xi|^2) v` per mode; the zero mode is kept.
pub fn leray_project(v: &SpectralField) -> Result<SpectralField> {
    v.require_rank(Rank::Vector)?;
    let grid = v.grid().clone();
    let d = grid.dim();
    let mut out = v.clone();
    for idx in 1..grid.n_modes() {
        let xi = grid.xi(idx);
        let r2 = grid.xi_mag(idx).powi(2);
        let mut dot = ZERO;
        for a in 0..d {
            dot += v.at(a, idx) * xi[a];
        }
        let dot = dot / r2;
        for a in 0..d {
            out.set(a, idx, v.at(a, idx) - dot * xi[a]);
        }
    }
    Ok(out)
}

/// Splits a tensor into a part with curl-free rows and a part with
/// divergence-free rows. The zero mode goes entirely to the first part.
pub fn hodge_decompose(e: &SpectralField) -> Result<(SpectralField, SpectralField)> {
    e.require_rank(Rank::Tensor)?;
    let grid = e.grid().clone();
    let d = grid.dim();
    let mut div_part = SpectralField::zeros(&grid, Rank::Tensor);
    let mut curl_part = SpectralField::zeros(&grid, Rank::Tensor);
    for c in 0..d * d {
        div_part.set(c, 0, e.at(c, 0));
    }
    for idx in 1..grid.n_modes() {
        let xi = grid.xi(idx);
        let r2 = grid.xi_mag(idx).powi(2);
        for i in 0..d {
            let mut row_dot = ZERO;
            for k in 0..d {
                row_dot += e.at(i * d + k, idx) * xi[k];
            }
            for j in 0..d {
                let p = row_dot * (xi[j] / r2);
                div_part.set(i * d + j, idx, p);
                curl_part.set(i * d + j, idx, e.at(i * d + j, idx) - p);
            }
        }
    }
    Ok((div_part, curl_part))
}

/// Gradient of a scalar (vector result) or of a vector (tensor result,
/// `(grad u)_ij = d_j u_i`).
pub fn grad(f: &SpectralField) -> Result<SpectralField> {
    match f.rank() {
        Rank::Scalar => {
            let grid = f.grid().clone();
            let mut out = SpectralField::zeros(&grid, Rank::Vector);
            for a in 0..grid.dim() {
                for idx in 0..grid.n_modes() {
                    out.set(a, idx, ik(&grid, idx, a) * f.at(0, idx));
                }
            }
            Ok(out)
        }
        Rank::Vector => tensor_grad(f),
        Rank::Tensor => Err(crate::Error::RankMismatch { expected: "scalar or vector", found: "tensor" }),
    }
}

/// `(grad u)_ij = d_j u_i`.
pub fn tensor_grad(u: &SpectralField) -> Result<SpectralField> {
    u.require_rank(Rank::Vector)?;
    let grid = u.grid().clone();
    let d = grid.dim();
    let mut out = SpectralField::zeros(&grid, Rank::Tensor);
    for i in 0..d {
        for j in 0..d {
            for idx in 0..grid.n_modes() {
                out.set(i * d + j, idx, ik(&grid, idx, j) * u.at(i, idx));
            }
        }
    }
    Ok(out)
}

/// Divergence of a vector, or row divergence `d_j E_ij` of a tensor.
pub fn div(f: &SpectralField) -> Result<SpectralField> {
    let grid = f.grid().clone();
    let d = grid.dim();
    match f.rank() {
        Rank::Vector => {
            let mut out = SpectralField::zeros(&grid, Rank::Scalar);
            for idx in 0..grid.n_modes() {
                let mut s = ZERO;
                for a in 0..d {
                    s += ik(&grid, idx, a) * f.at(a, idx);
                }
                out.set(0, idx, s);
            }
            Ok(out)
        }
        Rank::Tensor => {
            let mut out = SpectralField::zeros(&grid, Rank::Vector);
            for i in 0..d {
                for idx in 0..grid.n_modes() {
                    let mut s = ZERO;
                    for j in 0..d {
                        s += ik(&grid, idx, j) * f.at(i * d + j, idx);
                    }
                    out.set(i, idx, s);
                }
            }
            Ok(out)
        }
        Rank::Scalar => Err(crate::Error::RankMismatch { expected: "vector or tensor", found: "scalar" }),
    }
}

/// Curl of every row of a tensor. In 2D row `i` gives the scalar
/// `d_0 E_i1 - d_1 E_i0` (vector result); in 3D it gives
/// `C_ij = eps_jkl d_k E_il` (tensor result).
pub fn curl_rows(e: &SpectralField) -> Result<SpectralField> {
    e.require_rank(Rank::Tensor)?;
    let grid = e.grid().clone();
    let d = grid.dim();
    if d == 2 {
        let mut out = SpectralField::zeros(&grid, Rank::Vector);
        for i in 0..2 {
            for idx in 0..grid.n_modes() {
                let v = ik(&grid, idx, 0) * e.at(i * 2 + 1, idx) - ik(&grid, idx, 1) * e.at(i * 2, idx);
                out.set(i, idx, v);
            }
        }
        Ok(out)
    } else {
        let mut out = SpectralField::zeros(&grid, Rank::Tensor);
        for i in 0..3 {
            for j in 0..3 {
                let (k, l) = ((j + 1) % 3, (j + 2) % 3);
                for idx in 0..grid.n_modes() {
                    let v = ik(&grid, idx, k) * e.at(i * 3 + l, idx) - ik(&grid, idx, l) * e.at(i * 3 + k, idx);
                    out.set(i * 3 + j, idx, v);
                }
            }
        }
        Ok(out)
    }
}

pub fn laplacian(f: &SpectralField) -> SpectralField {
    let grid = f.grid().clone();
    let mags = grid.xi_mags();
    let mut out = f.clone();
    for comp in out.coeffs_mut().chunks_mut(grid.n_modes()) {
        for (c, &r) in comp.iter_mut().zip(mags) {
            *c *= -r * r;
        }
    }
    out
}

pub fn transpose(e: &SpectralField) -> Result<SpectralField> {
    e.require_rank(Rank::Tensor)?;
    let d = e.grid().dim();
    let mut out = e.clone();
    for i in 0..d {
        for j in 0..d {
            out.component_mut(j * d + i).copy_from_slice(e.component(i * d + j));
        }
    }
    Ok(out)
}

/// Physical values of `d_l f_c`, laid out as `(c * d + l) * N^d + point`.
pub fn physical_gradient(f: &SpectralField) -> Vec<f64> {
    let grid = f.grid().clone();
    let d = grid.dim();
    let n = grid.n_modes();
    let nc = f.n_components();
    let mut buf = vec![ZERO; nc * d * n];
    for c in 0..nc {
        for l in 0..d {
            let dst = &mut buf[(c * d + l) * n..(c * d + l + 1) * n];
            for (idx, v) in dst.iter_mut().enumerate() {
                *v = ik(&grid, idx, l) * f.at(c, idx);
            }
        }
    }
    buf.par_chunks_mut(n).for_each(|c| grid.inverse(c));
    buf.into_iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::random_field;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
        a.sub(b).unwrap().norm_l2() / b.norm_l2().max(1e-300)
    }

    #[test]
    fn lambda_two_is_minus_laplacian() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        // sin(3 x), |xi| = 3
        let f = SpectralField::from_fn(&g, Rank::Scalar, |x, _| (3.0 * x[0]).sin());
        let l2 = lambda_power(&f, 2.0);
        assert!(rel(&l2, &f.scaled(9.0)) < 1e-13);
        assert!(rel(&l2, &laplacian(&f).scaled(-1.0)) < 1e-13);
        assert_eq!(lambda_power(&f, 0.0).coeffs(), f.coeffs());
    }

    #[test]
    fn gradients_are_annihilated_by_leray() {
        let g = Grid::new(3, 12, 1.0).unwrap();
        let phi = random_field(&g, Rank::Scalar, 4, 1);
        let p = leray_project(&grad(&phi).unwrap()).unwrap();
        assert!(p.norm_l2() < 1e-13 * grad(&phi).unwrap().norm_l2());
    }

    #[test]
    fn leray_output_is_divergence_free() {
        let g = Grid::new(3, 12, 1.0).unwrap();
        let v = random_field(&g, Rank::Vector, 5, 2);
        let p = leray_project(&v).unwrap();
        let mut worst: f64 = 0.0;
        for idx in 0..g.n_modes() {
            let xi = g.xi(idx);
            let dot: Complex64 = (0..3).map(|a| p.at(a, idx) * xi[a]).sum();
            worst = worst.max(dot.norm());
        }
        assert!(worst <= 1e-12 * v.norm_l2());
    }

    #[test]
    fn single_mode_gradient() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let f = SpectralField::from_fn(&g, Rank::Scalar, |x, _| (2.0 * x[0] + x[1]).sin());
        let expect =
            SpectralField::from_fn(&g, Rank::Vector, |x, c| [2.0, 1.0][c] * (2.0 * x[0] + x[1]).cos());
        assert!(rel(&grad(&f).unwrap(), &expect) < 1e-13);
    }

    #[test]
    fn div_of_gradient_is_laplacian() {
        let g = Grid::new(3, 10, 1.3).unwrap();
        let u = random_field(&g, Rank::Vector, 3, 5);
        let lhs = div(&tensor_grad(&u).unwrap()).unwrap();
        assert!(rel(&lhs, &laplacian(&u)) < 1e-12);
    }

    #[test]
    fn curl_of_gradient_rows_vanishes() {
        for dim in [2, 3] {
            let g = Grid::new(dim, 10, 1.0).unwrap();
            let u = random_field(&g, Rank::Vector, 3, 6);
            let c = curl_rows(&tensor_grad(&u).unwrap()).unwrap();
            assert!(c.norm_l2() < 1e-12 * u.norm_h1());
        }
    }

    #[test]
    fn hodge_of_constant_antisymmetric_tensor() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let e = SpectralField::from_fn(&g, Rank::Tensor, |_, c| [0.0, 0.3, -0.3, 0.0][c]);
        let (dp, cp) = hodge_decompose(&e).unwrap();
        assert!(rel(&dp, &e) < 1e-15);
        assert_eq!(cp.norm_l2(), 0.0);
    }

    #[test]
    fn hodge_of_gradient_rows_has_no_curl_part() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        let u = random_field(&g, Rank::Vector, 3, 8);
        let (_, cp) = hodge_decompose(&tensor_grad(&u).unwrap()).unwrap();
        assert!(cp.norm_l2() < 1e-13 * u.norm_h1());
    }

    #[test]
    fn rank_errors() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let s = SpectralField::zeros(&g, Rank::Scalar);
        assert!(leray_project(&s).is_err());
        assert!(div(&s).is_err());
        assert!(curl_rows(&s).is_err());
        assert!(grad(&SpectralField::zeros(&g, Rank::Tensor)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn leray_is_idempotent(seed in any::<u64>(), dim in 2usize..=3) {
            let g = Grid::new(dim, 8, 1.0).unwrap();
            let v = random_field(&g, Rank::Vector, 3, seed);
            let p = leray_project(&v).unwrap();
            let pp = leray_project(&p).unwrap();
            prop_assert!(pp.sub(&p).unwrap().norm_l2() <= 1e-13 * v.norm_l2());
        }

        #[test]
        fn lambda_powers_compose(seed in any::<u64>(), s in -2.0f64..2.0, t in -2.0f64..2.0) {
            let g = Grid::new(2, 16, 2.0).unwrap();
            let f = random_field(&g, Rank::Scalar, 5, seed);
            let lhs = lambda_power(&lambda_power(&f, t), s);
            let rhs = lambda_power(&f, s + t);
            prop_assert!(lhs.sub(&rhs).unwrap().norm_l2() <= 1e-12 * rhs.norm_l2().max(f.norm_l2()));
        }

        #[test]
        fn hodge_parts_reassemble_and_are_orthogonal(seed in any::<u64>(), dim in 2usize..=3) {
            let g = Grid::new(dim, 8, 1.0).unwrap();
            let e = random_field(&g, Rank::Tensor, 3, seed);
            let (dp, cp) = hodge_decompose(&e).unwrap();
            let norm2 = e.norm_l2().powi(2);
            prop_assert!(dp.add(&cp).unwrap().sub(&e).unwrap().norm_l2() <= 1e-12 * e.norm_l2());
            prop_assert!(dp.inner(&cp).unwrap().abs() <= 1e-12 * norm2);
            prop_assert!(curl_rows(&dp).unwrap().norm_l2() <= 1e-12 * e.norm_h1());
            prop_assert!(div(&cp).unwrap().norm_l2() <= 1e-12 * e.norm_h1());
        }

        #[test]
        fn inverse_lambda_round_trip(seed in any::<u64>()) {
            let g = Grid::new(3, 8, 1.0).unwrap();
            let f = random_field(&g, Rank::Vector, 3, seed);
            let back = lambda_power(&lambda_power(&f, -1.0), 1.0);
            prop_assert!(back.sub(&f).unwrap().norm_l2() <= 1e-12 * f.norm_l2());
        }
    }
}
