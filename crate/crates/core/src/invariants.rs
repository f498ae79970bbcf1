//! Structural quantities of the strain field and the energy-type
//! functionals monitored along runs.
//!
//! For a deformation gradient `F = I + E` of a volume-preserving flow map,
//! `det F = 1`, `d_i F_ij = 0` and the compatibility identity
//!
//! ```text
//! d_m E_ij - d_j E_im = E_lj d_l E_im - E_lm d_l E_ij
//! ```
//!
//! hold exactly; on the grid they hold up to construction and time-stepping
//! error, which is what these monitors measure.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::rng::random_field;
use crate::solver::{decompose, Monitor, State};
use crate::spectral::ops::ik;
use crate::spectral::{div, lambda_power, laplacian, leray_project, physical_gradient, transpose, Grid, Rank, SpectralField};

/// `max_x |det(I + E(x)) - 1|` over grid points.
pub fn det_deviation(e: &SpectralField) -> Result<f64> {
    e.require_rank(Rank::Tensor)?;
    let d = e.grid().dim();
    let n = e.grid().n_modes();
    let p = e.to_physical();
    let f = |i: usize, j: usize, x: usize| p[(i * d + j) * n + x] + if i == j { 1.0 } else { 0.0 };
    let mut worst: f64 = 0.0;
    for x in 0..n {
        let det = if d == 2 {
            f(0, 0, x) * f(1, 1, x) - f(0, 1, x) * f(1, 0, x)
        } else {
            f(0, 0, x) * (f(1, 1, x) * f(2, 2, x) - f(1, 2, x) * f(2, 1, x))
                - f(0, 1, x) * (f(1, 0, x) * f(2, 2, x) - f(1, 2, x) * f(2, 0, x))
                + f(0, 2, x) * (f(1, 0, x) * f(2, 1, x) - f(1, 1, x) * f(2, 0, x))
        };
        worst = worst.max((det - 1.0).abs());
    }
    Ok(worst)
}

/// `||d_i E_ij||_{L^2}`, the divergence of `E^T`.
pub fn div_ft_norm(e: &SpectralField) -> Result<f64> {
    Ok(div(&transpose(e)?)?.norm_l2())
}

/// L^2 norm over `(i, j, m)` of
/// `d_m E_ij - d_j E_im - E_lj d_l E_im + E_lm d_l E_ij`, with the quadratic
/// part dealiased.
pub fn piola_residual(e: &SpectralField) -> Result<f64> {
    e.require_rank(Rank::Tensor)?;
    let grid = e.grid().clone();
    let d = grid.dim();
    let n = grid.n_modes();
    let ed = e.dealiased();
    let p = ed.to_physical();
    let dp = physical_gradient(&ed);
    // component (i, j, m) -> (i * d + j) * d + m
    let mut quad = vec![0.0; d * d * d * n];
    for i in 0..d {
        for j in 0..d {
            for m in 0..d {
                let out = &mut quad[((i * d + j) * d + m) * n..((i * d + j) * d + m + 1) * n];
                for (x, v) in out.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for l in 0..d {
                        s += p[(l * d + m) * n + x] * dp[((i * d + j) * d + l) * n + x]
                            - p[(l * d + j) * n + x] * dp[((i * d + m) * d + l) * n + x];
                    }
                    *v = s;
                }
            }
        }
    }
    let mut total = 0.0;
    let w = grid.parseval_weight();
    let mut comp = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..d {
        for j in 0..d {
            for m in 0..d {
                let q = &quad[((i * d + j) * d + m) * n..((i * d + j) * d + m + 1) * n];
                for (c, &v) in comp.iter_mut().zip(q) {
                    *c = v.into();
                }
                grid.forward(&mut comp);
                for (idx, c) in comp.iter().enumerate() {
                    let q = if grid.is_dealiased(idx) { *c } else { Complex64::new(0.0, 0.0) };
                    let lin = ik(&grid, idx, m) * e.at(i * d + j, idx)
                        - ik(&grid, idx, j) * e.at(i * d + m, idx);
                    total += (lin + q).norm_sqr();
                }
            }
        }
    }
    Ok((total * w).sqrt())
}

/// `(Lambda Omega, lap Ebb)` with `Lambda Omega = grad u - grad u^T`.
pub fn coupling_term(s: &State) -> f64 {
    let dec = decompose(s);
    let lam_omega = lambda_power(&dec.omega, 1.0);
    lam_omega.inner(&laplacian(&dec.ebb)).expect("same grid")
}

/// `G = (||u||^2 + ||E||^2 + ||lap u||^2 + ||lap E||^2) / 2 + kappa (Lambda Omega, lap Ebb)`.
pub fn lyapunov_g(s: &State, kappa: f64) -> f64 {
    let low = s.u.norm_l2().powi(2) + s.e.norm_l2().powi(2);
    functional_h(s, kappa) + 0.5 * low
}

/// `H = (||lap u||^2 + ||lap E||^2) / 2 + kappa (Lambda Omega, lap Ebb)`.
pub fn functional_h(s: &State, kappa: f64) -> f64 {
    let high = s.u.norm_lap().powi(2) + s.e.norm_lap().powi(2);
    let cross = if kappa == 0.0 { 0.0 } else { kappa * coupling_term(s) };
    0.5 * high + cross
}

/// `||u||_{H^2}^2 + ||E||_{H^2}^2`.
pub fn h2_energy(s: &State) -> f64 {
    s.u.norm_h2().powi(2) + s.e.norm_h2().powi(2)
}

/// Whether `h2 / 4 <= G <= h2` holds at this `kappa`.
pub fn sandwich_holds(s: &State, kappa: f64) -> bool {
    let g = lyapunov_g(s, kappa);
    let h2 = h2_energy(s);
    0.25 * h2 <= g && g <= h2
}

/// Random states used to pick `kappa`.
pub fn probe_states(grid: &Grid, count: usize, band: usize, seed: u64) -> Vec<State> {
    (0..count as u64)
        .map(|k| {
            let u = leray_project(&random_field(grid, Rank::Vector, band, seed + 2 * k)).expect("vector");
            let e = random_field(grid, Rank::Tensor, band, seed + 2 * k + 1);
            State { u, e, t: 0.0, mu: 1.0 }
        })
        .collect()
}

/// Largest `kappa <= kappa_max` (bisection to `1e-12` relative) for which the
/// sandwich holds on every probe.
pub fn select_kappa(probes: &[State], kappa_max: f64) -> f64 {
    let ok = |k: f64| probes.iter().all(|s| sandwich_holds(s, k));
    if ok(kappa_max) {
        return kappa_max;
    }
    let (mut lo, mut hi) = (0.0, kappa_max);
    while hi - lo > 1e-12 * kappa_max {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// One row of the monitor series.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InvariantReport {
    pub t: f64,
    pub det_dev: f64,
    #[serde(rename = "divFT")]
    pub div_ft: f64,
    pub piola: f64,
    pub energy: f64,
    pub dissipation: f64,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub kappa: f64,
    /// `||u||_{H^2} + ||E||_{H^2}`.
    #[serde(skip)]
    pub h2_sum: f64,
    #[serde(skip)]
    pub sandwich: bool,
}

impl InvariantReport {
    pub fn of(s: &State, kappa: f64) -> Self {
        let e = &s.e;
        let h = functional_h(s, kappa);
        let g = h + 0.5 * (s.u.norm_l2().powi(2) + e.norm_l2().powi(2));
        let h2 = h2_energy(s);
        Self {
            t: s.t,
            det_dev: det_deviation(e).expect("tensor"),
            div_ft: div_ft_norm(e).expect("tensor"),
            piola: piola_residual(e).expect("tensor"),
            energy: s.energy(),
            dissipation: s.dissipation(),
            g,
            h,
            kappa,
            h2_sum: s.h2_sum(),
            sandwich: 0.25 * h2 <= g && g <= h2,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.det_dev, self.div_ft, self.piola, self.energy, self.dissipation, self.g, self.h].iter().all(|v| v.is_finite())
    }
}

/// Collects an [`InvariantReport`] at every observation.
#[derive(Clone, Debug, Default)]
pub struct InvariantMonitor {
    pub kappa: f64,
    pub reports: Vec<InvariantReport>,
}

impl InvariantMonitor {
    pub fn new(kappa: f64) -> Self {
        Self { kappa, reports: Vec::new() }
    }
}

impl Monitor for InvariantMonitor {
    fn observe(&mut self, s: &State) -> Result<()> {
        self.reports.push(InvariantReport::of(s, self.kappa));
        Ok(())
    }
}

/// Centered-difference residual `dE/dt + D` at interior samples, as `(t, r)`.
pub fn energy_law_residual(times: &[f64], energy: &[f64], dissipation: &[f64]) -> Vec<(f64, f64)> {
    (1..times.len().saturating_sub(1))
        .map(|k| {
            let de = (energy[k + 1] - energy[k - 1]) / (times[k + 1] - times[k - 1]);
            (times[k], de + dissipation[k])
        })
        .collect()
}

/// Per-interval residual `E_{k+1} - E_k + (t_{k+1} - t_k)(D_k + D_{k+1})/2`.
pub fn energy_step_residuals(times: &[f64], energy: &[f64], dissipation: &[f64]) -> Vec<f64> {
    (0..times.len().saturating_sub(1))
        .map(|k| energy[k + 1] - energy[k] + 0.5 * (times[k + 1] - times[k]) * (dissipation[k] + dissipation[k + 1]))
        .collect()
}

/// `E(t_k) + trapz_0^{t_k} D - E(0)` at every sample.
pub fn energy_balance(times: &[f64], energy: &[f64], dissipation: &[f64]) -> Vec<f64> {
    let steps = energy_step_residuals(times, energy, dissipation);
    let mut acc = 0.0;
    std::iter::once(0.0)
        .chain(steps.iter().map(|r| {
            acc += r;
            acc
        }))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HodgeCheck {
    /// Ratios `||E||/||n||`, `||grad E||/||grad n||` and
    /// `||lap E||/||lap Ebb||`, with `||E||_{H^2}` for scale.
    Checked { e_over_n: f64, grad_e_over_grad_n: f64, lap_e_over_lap_ebb: f64, e_h2: f64 },
    /// `E` carries no divergence; the comparison needs the compatibility
    /// constraints, which this field does not satisfy.
    Degenerate { e_l2: f64 },
    Skipped { reason: String },
}

impl HodgeCheck {
    /// `|E/n - 1| <= tol` and `|grad E/grad n - 1| <= tol`.
    pub fn within(&self, tol: f64) -> bool {
        match self {
            Self::Checked { e_over_n, grad_e_over_grad_n, .. } => {
                (e_over_n - 1.0).abs() <= tol && (grad_e_over_grad_n - 1.0).abs() <= tol
            }
            _ => false,
        }
    }
}

/// Compares `E` with `n = Lambda^{-1} div E` and `Ebb = E^T - E` on states
/// with `||E||_{H^2} <= smallness`.
pub fn hodge_equivalence_check(s: &State, smallness: f64) -> HodgeCheck {
    let e_h2 = s.e.norm_h2();
    if e_h2 > smallness {
        return HodgeCheck::Skipped { reason: format!("||E||_H2 = {e_h2:e} exceeds the smallness bound {smallness:e}") };
    }
    if e_h2 == 0.0 {
        return HodgeCheck::Checked { e_over_n: 1.0, grad_e_over_grad_n: 1.0, lap_e_over_lap_ebb: 1.0, e_h2 };
    }
    let dec = decompose(s);
    let n_l2 = dec.n.norm_l2();
    let e_l2 = s.e.norm_l2();
    if n_l2 <= 1e-12 * e_l2 {
        return HodgeCheck::Degenerate { e_l2 };
    }
    HodgeCheck::Checked {
        e_over_n: e_l2 / n_l2,
        grad_e_over_grad_n: s.e.norm_grad() / dec.n.norm_grad(),
        lap_e_over_lap_ebb: s.e.norm_lap() / dec.ebb.norm_lap(),
        e_h2,
    }
}
