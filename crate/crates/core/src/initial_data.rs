//! Admissible initial data: divergence-free velocities and strains that are
//! deformation gradients of volume-preserving maps, plus low-frequency
//! profiles for the decay quadrature.
//!
//! The strain is built from a steady divergence-free field `psi` and its
//! time-`T` flow map `phi`. At each Eulerian grid point `x` the backward
//! trajectory `Y' = -psi(Y)` gives `phi^{-1}(x)` and, through the variational
//! equation `G' = -grad psi(Y) G`, the Jacobian `G = grad phi^{-1}(x)`. Then
//! `F(x) = G^{-1}` is the push-forward of `grad phi` with no interpolation,
//! and `E = F - I`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decay::SpectralProfile;
use crate::error::{Error, Result};
use crate::invariants::{det_deviation, div_ft_norm, piola_residual};
use crate::ode::dopri5;
use crate::rng::random_field;
use crate::solver::State;
use crate::spectral::{leray_project, Grid, Rank, SpectralField};

/// Seed offset separating the strain generator from the velocity.
const PSI_STREAM: u64 = 0x5851_f42d_4c95_7f2d;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipeKind {
    ZeroStrain,
    LagrangianMap,
    SpectralProfile,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Gaussian,
    FlatTop,
    HighPass,
}

/// Everything needed to regenerate a data set bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataRecipe {
    pub kind: RecipeKind,
    pub delta: f64,
    pub seed: u64,
    /// Largest `|k_i|` of the random fields.
    pub modes: usize,
    /// Low-frequency floor; defaults to `delta^zeta`.
    pub c0: Option<f64>,
    pub zeta: f64,
    pub xi_floor: f64,
    pub profile: ProfileKind,
    pub flow_time: f64,
    pub ode_tol: f64,
    /// Largest accepted construction residual.
    pub residual_limit: f64,
}

impl Default for DataRecipe {
    fn default() -> Self {
        Self {
            kind: RecipeKind::LagrangianMap,
            delta: 1e-2,
            seed: 0,
            modes: 3,
            c0: None,
            zeta: 0.5,
            xi_floor: 0.1,
            profile: ProfileKind::FlatTop,
            flow_time: 1.0,
            ode_tol: 1e-12,
            residual_limit: 1e-6,
        }
    }
}

/// Residuals of a constructed state.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub det_dev: f64,
    #[serde(rename = "divFT")]
    pub div_ft: f64,
    pub piola: f64,
    pub u_h2: f64,
    pub e_h2: f64,
    /// Smallest `det F` seen before the final check.
    pub min_det: f64,
    /// Amplitude of `psi` in `H^2` after calibration.
    pub psi_h2: f64,
}

impl ConstructionReport {
    pub fn of(s: &State) -> Self {
        Self {
            det_dev: det_deviation(&s.e).expect("tensor"),
            div_ft: div_ft_norm(&s.e).expect("tensor"),
            piola: piola_residual(&s.e).expect("tensor"),
            u_h2: s.u.norm_h2(),
            e_h2: s.e.norm_h2(),
            min_det: 1.0,
            psi_h2: 0.0,
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("amplitude must be positive, got {delta}")))
    }
}

/// Highest band that survives dealiasing on this grid.
fn clamp_band(grid: &Grid, modes: usize) -> usize {
    modes.min((grid.n() - 1) / 3).max(1)
}

/// Leray-projected random field in the band with `||u||_{H^2} = amp`.
pub fn random_velocity(grid: &Grid, amp: f64, modes: usize, seed: u64) -> SpectralField {
    let mut u = leray_project(&random_field(grid, Rank::Vector, clamp_band(grid, modes), seed)).expect("vector");
    u.scale(amp / u.norm_h2());
    u
}

/// `u0` with `||u0||_{H^2} = delta`, `E0 = 0`.
pub fn make_zero_strain(delta: f64, seed: u64, grid: &Grid, modes: usize, mu: f64) -> Result<State> {
    check_delta(delta)?;
    let u = random_velocity(grid, delta, modes, seed);
    State::new(u, SpectralField::zeros(grid, Rank::Tensor), 0.0, mu)
}

/// Band-limited field evaluated anywhere by direct summation.
struct ModeSum {
    dim: usize,
    xi: Vec<[f64; 3]>,
    // per mode, per component: coefficient / N^d
    coeffs: Vec<[num_complex::Complex64; 3]>,
}

impl ModeSum {
    fn new(f: &SpectralField) -> Self {
        let g = f.grid();
        let d = g.dim();
        let scale = 1.0 / g.n_modes() as f64;
        let mut xi = Vec::new();
        let mut coeffs = Vec::new();
        for idx in 0..g.n_modes() {
            let c: Vec<_> = (0..d).map(|a| f.at(a, idx) * scale).collect();
            if c.iter().any(|z| z.norm() > 0.0) {
                xi.push(g.xi(idx));
                let mut row = [num_complex::Complex64::new(0.0, 0.0); 3];
                row[..d].copy_from_slice(&c);
                coeffs.push(row);
            }
        }
        Self { dim: d, xi, coeffs }
    }

    /// Value and gradient `(grad psi)_ij = d_j psi_i` at `x`, scaled by `amp`.
    fn eval(&self, x: &[f64], amp: f64, val: &mut [f64; 3], grad: &mut [[f64; 3]; 3]) {
        let d = self.dim;
        *val = [0.0; 3];
        *grad = [[0.0; 3]; 3];
        for (xi, c) in self.xi.iter().zip(&self.coeffs) {
            let phase = (0..d).map(|a| xi[a] * x[a]).sum::<f64>();
            let (s, co) = phase.sin_cos();
            for i in 0..d {
                // Re(c e^{i phase}) and its derivative
                let re = c[i].re * co - c[i].im * s;
                let dre = -c[i].re * s - c[i].im * co;
                val[i] += amp * re;
                for j in 0..d {
                    grad[i][j] += amp * dre * xi[j];
                }
            }
        }
    }
}

fn invert(d: usize, g: &[f64]) -> ([[f64; 3]; 3], f64) {
    let mut out = [[0.0; 3]; 3];
    if d == 2 {
        let det = g[0] * g[3] - g[1] * g[2];
        out[0][0] = g[3] / det;
        out[0][1] = -g[1] / det;
        out[1][0] = -g[2] / det;
        out[1][1] = g[0] / det;
        (out, 1.0 / det)
    } else {
        let m = |i: usize, j: usize| g[i * 3 + j];
        let det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        for i in 0..3 {
            for j in 0..3 {
                // cofactor transpose
                let (a, b) = ((j + 1) % 3, (j + 2) % 3);
                let (c, e) = ((i + 1) % 3, (i + 2) % 3);
                out[i][j] = (m(a, c) * m(b, e) - m(a, e) * m(b, c)) / det;
            }
        }
        (out, 1.0 / det)
    }
}

/// Eulerian strain of the time-`flow_time` map of `amp * psi`, and the
/// smallest `det F` over the grid.
fn strain_of_flow(grid: &Grid, psi: &ModeSum, amp: f64, flow_time: f64, ode_tol: f64) -> Result<(SpectralField, f64)> {
    let d = grid.dim();
    let n = grid.n_modes();
    let rows: Vec<Result<([f64; 9], f64)>> = (0..n)
        .into_par_iter()
        .map(|p| {
            let x = grid.point(p);
            let mut y0 = vec![0.0; d + d * d];
            y0[..d].copy_from_slice(&x[..d]);
            for i in 0..d {
                y0[d + i * d + i] = 1.0;
            }
            let rhs = |y: &[f64], dy: &mut [f64]| {
                let (mut v, mut gr) = ([0.0; 3], [[0.0; 3]; 3]);
                psi.eval(&y[..d], amp, &mut v, &mut gr);
                for i in 0..d {
                    dy[i] = -v[i];
                    for j in 0..d {
                        dy[d + i * d + j] = -(0..d).map(|k| gr[i][k] * y[d + k * d + j]).sum::<f64>();
                    }
                }
            };
            let y = dopri5(rhs, &y0, flow_time, ode_tol)?;
            let (f, det_f) = invert(d, &y[d..]);
            let mut e = [0.0; 9];
            for i in 0..d {
                for j in 0..d {
                    e[i * d + j] = f[i][j] - if i == j { 1.0 } else { 0.0 };
                }
            }
            Ok((e, det_f))
        })
        .collect();
    let mut phys = vec![0.0; d * d * n];
    let mut min_det = f64::INFINITY;
    for (p, r) in rows.into_iter().enumerate() {
        let (e, det_f) = r?;
        min_det = min_det.min(det_f);
        for c in 0..d * d {
            phys[c * n + p] = e[c];
        }
    }
    let mut e = SpectralField::from_physical(grid, Rank::Tensor, &phys)?;
    e.dealias();
    e.enforce_hermitian();
    Ok((e, min_det))
}

/// `u0` random with `||u0||_{H^2} = delta/2`; `E0 = F - I` for the flow map
/// of a random steady divergence-free field, calibrated so that
/// `||E0||_{H^2} = delta/2` to `1e-3` relative.
pub fn make_lagrangian_strain(
    delta: f64,
    seed: u64,
    grid: &Grid,
    flow_time: f64,
    ode_tol: f64,
    modes: usize,
    residual_limit: f64,
    mu: f64,
) -> Result<(State, ConstructionReport)> {
    check_delta(delta)?;
    if !(flow_time >= 0.0) || !(ode_tol > 0.0) {
        return Err(Error::InvalidParameter("flow time must be non-negative and ODE tolerance positive".into()));
    }
    let u = random_velocity(grid, 0.5 * delta, modes, seed);
    if flow_time == 0.0 {
        let s = State::new(u, SpectralField::zeros(grid, Rank::Tensor), 0.0, mu)?;
        return Ok((s.clone(), ConstructionReport::of(&s)));
    }
    let psi = random_velocity(grid, 1.0, modes, seed ^ PSI_STREAM);
    let sum = ModeSum::new(&psi);
    let target = 0.5 * delta;
    // linear guess: E ~ flow_time grad psi
    let mut amp = target / (flow_time * crate::spectral::tensor_grad(&psi)?.norm_h2());
    let mut built = None;
    for _ in 0..8 {
        let (e, min_det) = strain_of_flow(grid, &sum, amp, flow_time, ode_tol)?;
        if !(min_det > 0.5) {
            return Err(Error::Construction(format!("flow map is not a diffeomorphism: min det F = {min_det}")));
        }
        let got = e.norm_h2();
        let done = (got / target - 1.0).abs() < 1e-3;
        built = Some((e, min_det));
        if done {
            break;
        }
        amp *= target / got;
    }
    let (e, min_det) = built.expect("at least one pass");
    let s = State::new(u, e, 0.0, mu)?;
    let mut report = ConstructionReport::of(&s);
    report.min_det = min_det;
    report.psi_h2 = amp;
    let worst = report.det_dev.max(report.div_ft).max(report.piola);
    if worst > residual_limit {
        return Err(Error::Construction(format!(
            "residuals above {residual_limit:e}: det {:e}, divFT {:e}, piola {:e}",
            report.det_dev, report.div_ft, report.piola
        )));
    }
    Ok((s, report))
}

/// Radial profile with floor `c0` (default `delta^zeta`).
///
/// A Gaussian peaked at `c0` cannot stay above `c0` on an interval, so the
/// floor-carrying default is the flat-topped Gaussian; the plain Gaussian
/// certifies its floor at the origin only.
pub fn make_profile(delta: f64, c0: Option<f64>, zeta: f64, kind: ProfileKind, xi_floor: f64) -> Result<SpectralProfile> {
    check_delta(delta)?;
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::InvalidParameter(format!("zeta must lie in (0, 1], got {zeta}")));
    }
    let budget = delta.powf(zeta);
    let c0 = c0.unwrap_or(budget);
    if c0 > budget * (1.0 + 1e-9) {
        return Err(Error::Infeasible(format!("c0 = {c0} exceeds delta^zeta = {budget}")));
    }
    let p = match kind {
        ProfileKind::FlatTop => SpectralProfile::flat_top(c0, xi_floor),
        ProfileKind::Gaussian => {
            let mut p = SpectralProfile::gaussian(c0);
            p.c0 = c0;
            p.xi_floor = 0.0;
            p
        }
        ProfileKind::HighPass => {
            if c0 > 0.0 {
                return Err(Error::Infeasible("a high-pass profile has no low-frequency floor".into()));
            }
            SpectralProfile::high_pass(1.0, xi_floor.max(1e-3))
        }
    };
    if c0 > 0.0 && !p.floor_holds(3) {
        return Err(Error::Infeasible(format!("floor {c0} not certified on [0, {}]", p.xi_floor)));
    }
    Ok(p)
}

/// Builds the state for a recipe (profile recipes have no state).
pub fn build_state(recipe: &DataRecipe, grid: &Grid, mu: f64) -> Result<(State, ConstructionReport)> {
    match recipe.kind {
        RecipeKind::ZeroStrain => {
            let s = make_zero_strain(recipe.delta, recipe.seed, grid, recipe.modes, mu)?;
            Ok((s.clone(), ConstructionReport::of(&s)))
        }
        RecipeKind::LagrangianMap => make_lagrangian_strain(
            recipe.delta,
            recipe.seed,
            grid,
            recipe.flow_time,
            recipe.ode_tol,
            recipe.modes,
            recipe.residual_limit,
            mu,
        ),
        RecipeKind::SpectralProfile => {
            Err(Error::InvalidParameter("a spectral-profile recipe describes quadrature data, not a state".into()))
        }
    }
}
