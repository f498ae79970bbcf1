//! Relative-energy bookkeeping between a regular ("strong") trajectory
//! `(u, E)` and a second ("weak") trajectory `(u^, E^)` on the same snapshot
//! times, with `U = u^ - u` and `EE = E^ - E`.
//!
//! Spatial integrals are grid sums of dealiased fields, which are exact for
//! products of up to three factors, so integration by parts holds to
//! rounding. Time integrals use the trapezoid rule on the shared cadence.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::State;
use crate::spectral::{physical_gradient, SpectralField};

/// Physical values of a dealiased state and its gradients.
struct Phys {
    d: usize,
    n: usize,
    u: Vec<f64>,
    gu: Vec<f64>,
    e: Vec<f64>,
    ge: Vec<f64>,
}

impl Phys {
    fn of(u: &SpectralField, e: &SpectralField) -> Self {
        let (u, e) = (u.dealiased(), e.dealiased());
        let g = u.grid();
        Self {
            d: g.dim(),
            n: g.n_modes(),
            gu: physical_gradient(&u),
            ge: physical_gradient(&e),
            u: u.to_physical(),
            e: e.to_physical(),
        }
    }

    #[inline]
    fn u(&self, i: usize, x: usize) -> f64 {
        self.u[i * self.n + x]
    }
    /// `d_k u_i`
    #[inline]
    fn gu(&self, i: usize, k: usize, x: usize) -> f64 {
        self.gu[(i * self.d + k) * self.n + x]
    }
    #[inline]
    fn e(&self, i: usize, j: usize, x: usize) -> f64 {
        self.e[(i * self.d + j) * self.n + x]
    }
    /// `d_k E_ij`
    #[inline]
    fn ge(&self, i: usize, j: usize, k: usize, x: usize) -> f64 {
        self.ge[((i * self.d + j) * self.d + k) * self.n + x]
    }
}

/// Spatial integrals of the remainder integrands at one time.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Remainders {
    /// `-int (U.grad u).U`
    pub r1: f64,
    /// `int (u.grad u).u^ - (u^ (x) u^):grad u`
    pub r1_raw: f64,
    /// `-int (U.grad)E_j.EE_j + (EE_j.grad u).EE_j - (E_j (x) EE_j):grad U`
    pub r2: f64,
    /// Sum of the six unreduced terms.
    pub r2_raw: f64,
    /// `-int (d_k EE_kj) E_ij u^_i`: the part of `r2_raw - r2` that vanishes
    /// when both strains have divergence-free transposes.
    pub constraint: f64,
}

/// Remainder integrands of the relative-energy inequality at one time;
/// columns `E_j` have entries `E_ij`.
pub fn remainders(strong: &State, weak: &State) -> Result<Remainders> {
    strong.u.require_same_grid(&weak.u)?;
    let s = Phys::of(&strong.u, &strong.e);
    let w = Phys::of(&weak.u, &weak.e);
    let (d, n) = (s.d, s.n);
    let vol = strong.grid().cell_volume();
    let sums = (0..n)
        .into_par_iter()
        .map(|x| {
            let du = |i: usize| w.u(i, x) - s.u(i, x);
            let dgu = |i: usize, k: usize| w.gu(i, k, x) - s.gu(i, k, x);
            let de = |i: usize, j: usize| w.e(i, j, x) - s.e(i, j, x);
            let dge = |i: usize, j: usize, k: usize| w.ge(i, j, k, x) - s.ge(i, j, k, x);
            let mut r = [0.0; 5];
            for i in 0..d {
                for k in 0..d {
                    let guik = s.gu(i, k, x);
                    r[0] -= du(k) * guik * du(i);
                    r[1] += s.u(k, x) * guik * w.u(i, x) - w.u(i, x) * w.u(k, x) * guik;
                    for j in 0..d {
                        let geijk = s.ge(i, j, k, x);
                        r[2] += -du(k) * geijk * de(i, j) + de(k, j) * guik * de(i, j) - s.e(i, j, x) * de(k, j) * dgu(i, k);
                        // six unreduced terms
                        r[3] += -s.e(k, j, x) * geijk * w.u(i, x) + s.u(k, x) * geijk * w.e(i, j, x)
                            - s.e(k, j, x) * guik * w.e(i, j, x)
                            + w.e(i, j, x) * w.e(k, j, x) * guik
                            - w.u(k, x) * geijk * w.e(i, j, x)
                            + w.e(k, j, x) * geijk * w.u(i, x);
                        r[4] -= dge(k, j, k) * s.e(i, j, x) * w.u(i, x);
                    }
                }
            }
            r
        })
        .reduce(|| [0.0; 5], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3], a[4] + b[4]]);
    Ok(Remainders {
        r1: sums[0] * vol,
        r1_raw: sums[1] * vol,
        r2: sums[2] * vol,
        r2_raw: sums[3] * vol,
        constraint: sums[4] * vol,
    })
}

/// `||grad u||_inf + ||grad E||_inf + ||E||_inf^2`, pointwise Frobenius norms
/// maximized over grid points of the dealiased fields.
pub fn h_coefficient(s: &State) -> f64 {
    let p = Phys::of(&s.u, &s.e);
    let (d, n) = (p.d, p.n);
    let (mut a, mut b, mut c) = (0.0f64, 0.0f64, 0.0f64);
    for x in 0..n {
        let mut gu = 0.0;
        let mut ge = 0.0;
        let mut e = 0.0;
        for i in 0..d {
            for j in 0..d {
                gu += p.gu(i, j, x).powi(2);
                e += p.e(i, j, x).powi(2);
                for k in 0..d {
                    ge += p.ge(i, j, k, x).powi(2);
                }
            }
        }
        a = a.max(gu.sqrt());
        b = b.max(ge.sqrt());
        c = c.max(e);
    }
    a + b + c
}

fn trapezoid_cumulative(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(t.len());
    for k in 0..t.len() {
        if k > 0 {
            acc += 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
        }
        out.push(acc);
    }
    out
}

/// Energy inequality `E(t) + mu int_0^t ||grad u||^2 <= E(0) (1 + tol)` on a
/// snapshot sequence. The dissipation integral uses `min(D_k, D_{k+1})` per
/// interval, a lower estimate whenever `D` is monotone between snapshots, so
/// coarse cadences do not reject genuine solutions.
pub fn check_admissible(traj: &[State], tol: f64) -> Result<()> {
    let Some(first) = traj.first() else {
        return Err(Error::Misaligned("empty trajectory".into()));
    };
    let e0 = first.energy();
    let mut diss_int = 0.0;
    let mut prev = (first.t, first.dissipation());
    for s in traj {
        let d = s.dissipation();
        diss_int += (s.t - prev.0) * d.min(prev.1);
        prev = (s.t, d);
        let excess = s.energy() + diss_int - e0 * (1.0 + tol);
        if excess > 0.0 {
            return Err(Error::NotAdmissible { t: s.t, excess });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GronwallConfig {
    /// Relative slack of the energy-inequality gate.
    pub tol_energy: f64,
    /// Relative slack allowed above the envelope.
    pub slack_rel: f64,
    /// Absolute slack allowed above the envelope (discretization floor for
    /// same-data pairs).
    pub slack_abs: f64,
    /// Snapshot times must agree to this absolute tolerance.
    pub time_tol: f64,
}

impl Default for GronwallConfig {
    fn default() -> Self {
        Self { tol_energy: 1e-6, slack_rel: 0.1, slack_abs: 0.0, time_tol: 1e-12 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RelativeEnergyReport {
    pub times: Vec<f64>,
    /// `(||U||^2 + ||EE||^2) / 2`
    pub rel_energy: Vec<f64>,
    /// `mu int_0^t ||grad U||^2`
    pub grad_diff: Vec<f64>,
    /// Remainder integrands per snapshot.
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    /// Largest `|r2_raw - r2 - constraint|` over snapshots.
    pub r2_identity_gap: f64,
    pub h: Vec<f64>,
    /// `rel_energy(0) exp(C int_0^t h)`
    pub envelope: Vec<f64>,
    /// Smallest `C` making the integral inequality hold at every snapshot.
    pub c_fit: f64,
    pub pass: bool,
    pub config: GronwallConfig,
}

impl RelativeEnergyReport {
    pub fn final_rel_energy(&self) -> f64 {
        *self.rel_energy.last().expect("non-empty report")
    }
}

/// Builds the relative-energy series for two aligned trajectories, fits the
/// constant of the integral inequality
/// `X(t) + mu int ||grad U||^2 <= X(0) + C int h X`, `X = ||U||^2 + ||EE||^2`,
/// and checks `rel(t) <= envelope(t) (1 + slack_rel) + slack_abs`.
pub fn gronwall_certificate(strong: &[State], weak: &[State], cfg: &GronwallConfig) -> Result<RelativeEnergyReport> {
    if strong.len() != weak.len() || strong.is_empty() {
        return Err(Error::Misaligned(format!("{} strong vs {} weak snapshots", strong.len(), weak.len())));
    }
    for (a, b) in strong.iter().zip(weak) {
        if (a.t - b.t).abs() > cfg.time_tol {
            return Err(Error::Misaligned(format!("snapshot times {} and {} differ", a.t, b.t)));
        }
        if a.grid() != b.grid() {
            return Err(Error::GridMismatch);
        }
    }
    check_admissible(strong, cfg.tol_energy)?;
    check_admissible(weak, cfg.tol_energy)?;

    let times: Vec<f64> = strong.iter().map(|s| s.t).collect();
    let rows: Vec<Result<(f64, f64, Remainders, f64)>> = strong
        .par_iter()
        .zip(weak)
        .map(|(s, w)| {
            let du = w.u.sub(&s.u)?;
            let de = w.e.sub(&s.e)?;
            let rel = 0.5 * (du.norm_l2().powi(2) + de.norm_l2().powi(2));
            let gd = s.mu * du.norm_grad().powi(2);
            Ok((rel, gd, remainders(s, w)?, h_coefficient(s)))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let rel: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let grad_diff = trapezoid_cumulative(&times, &rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let h: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let int_h = trapezoid_cumulative(&times, &h);
    let hx: Vec<f64> = h.iter().zip(&rel).map(|(h, r)| h * 2.0 * r).collect();
    let int_hx = trapezoid_cumulative(&times, &hx);

    let mut c_fit: f64 = 0.0;
    for k in 1..times.len() {
        let excess = 2.0 * rel[k] + grad_diff[k] - 2.0 * rel[0];
        if excess > 0.0 {
            c_fit = c_fit.max(if int_hx[k] > 0.0 { excess / int_hx[k] } else { f64::INFINITY });
        }
    }
    let envelope: Vec<f64> = int_h.iter().map(|ih| rel[0] * (c_fit * ih).exp()).collect();
    let pass = c_fit.is_finite()
        && rel.iter().zip(&envelope).all(|(r, e)| *r <= e * (1.0 + cfg.slack_rel) + cfg.slack_abs);
    let r2_identity_gap = rows.iter().map(|r| (r.2.r2_raw - r.2.r2 - r.2.constraint).abs()).fold(0.0, f64::max);

    Ok(RelativeEnergyReport {
        times,
        rel_energy: rel,
        grad_diff,
        r1: rows.iter().map(|r| r.2.r1).collect(),
        r2: rows.iter().map(|r| r.2.r2).collect(),
        r2_identity_gap,
        h,
        envelope,
        c_fit,
        pass,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::random_field;
    use crate::spectral::{leray_project, Grid, Rank};
    use std::f64::consts::PI;

    fn random_state(g: &Grid, seed: u64, amp: f64) -> State {
        let mut u = leray_project(&random_field(g, Rank::Vector, 3, seed)).unwrap();
        let mut e = random_field(g, Rank::Tensor, 3, seed + 1);
        u.scale(amp / u.norm_l2());
        e.scale(amp / e.norm_l2());
        State::new(u, e, 0.0, 1.0).unwrap()
    }

    #[test]
    fn identical_states_have_no_remainders() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let s = random_state(&g, 1, 1.0);
        let r = remainders(&s, &s).unwrap();
        assert!(r.r1.abs() < 1e-14 && r.r2.abs() < 1e-14 && r.r2_raw.abs() < 1e-13);
    }

    #[test]
    fn rest_strong_state_gives_no_remainders() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let w = random_state(&g, 3, 1.0);
        let r = remainders(&State::zeros(&g, 1.0), &w).unwrap();
        assert_eq!((r.r1, r.r2, r.r2_raw, r.r1_raw), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn raw_and_reduced_forms_agree_up_to_the_constraint_term() {
        let g = Grid::new(3, 12, 2.0 * PI).unwrap();
        let s = random_state(&g, 5, 1.0);
        let w = random_state(&g, 9, 1.0);
        let r = remainders(&s, &w).unwrap();
        assert!((r.r1 - r.r1_raw).abs() <= 1e-10 * r.r1.abs().max(1.0), "{r:?}");
        assert!((r.r2_raw - r.r2 - r.constraint).abs() <= 1e-10 * r.r2_raw.abs().max(1.0), "{r:?}");
        assert!(r.constraint.abs() > 1e-6);
    }

    #[test]
    fn h_of_a_shear_mode() {
        // u = (a sin(2 y), 0): |grad u| = 2a |cos 2y|
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let a = 0.3;
        let u = SpectralField::from_fn(&g, Rank::Vector, |x, c| if c == 0 { a * (2.0 * x[1]).sin() } else { 0.0 });
        let s = State::new(u, SpectralField::zeros(&g, Rank::Tensor), 0.0, 1.0).unwrap();
        assert!((h_coefficient(&s) - 2.0 * a).abs() < 1e-13);
        assert_eq!(h_coefficient(&State::zeros(&g, 1.0)), 0.0);
    }

    #[test]
    fn strain_term_is_quadratic() {
        // constant E has no gradient, so h = ||E||_inf^2
        let g = Grid::new(2, 8, 2.0 * PI).unwrap();
        let e = SpectralField::from_fn(&g, Rank::Tensor, |_, c| if c == 1 { 0.2 } else { 0.0 });
        let s = State::new(SpectralField::zeros(&g, Rank::Vector), e.clone(), 0.0, 1.0).unwrap();
        let s2 = State::new(SpectralField::zeros(&g, Rank::Vector), e.scaled(2.0), 0.0, 1.0).unwrap();
        assert!((h_coefficient(&s2) - 4.0 * h_coefficient(&s)).abs() < 1e-15);
    }

    #[test]
    fn identical_trajectories_certify() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let s0 = random_state(&g, 2, 0.1);
        let mut st = crate::solver::Stepper::new(&g, 1.0, crate::solver::StepperConfig::new(0.01)).unwrap();
        let traj = crate::solver::run(&s0, &mut st, &crate::solver::RunOptions::in_memory(0.2, 2), &mut []).unwrap().snapshots;
        let rep = gronwall_certificate(&traj, &traj, &GronwallConfig::default()).unwrap();
        assert!(rep.pass && rep.rel_energy.iter().all(|&r| r == 0.0));
        assert_eq!(rep.envelope[0], rep.rel_energy[0]);
    }

    #[test]
    fn energy_gain_is_rejected_and_misalignment_detected() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let mut a = random_state(&g, 2, 1.0);
        let mut b = a.clone();
        b.t = 1.0;
        b.u.scale(1.01);
        b.e.scale(1.01);
        assert!(matches!(check_admissible(&[a.clone(), b.clone()], 1e-6), Err(Error::NotAdmissible { .. })));
        a.t = 0.0;
        let mut c = a.clone();
        c.t = 0.5;
        c.u.scale(0.5);
        c.e.scale(0.5);
        let err = gronwall_certificate(&[a.clone(), c], &[a.clone(), b], &GronwallConfig::default());
        assert!(matches!(err, Err(Error::Misaligned(_))));
    }
}
