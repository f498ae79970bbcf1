//! Time integration of
//!
//! ```text
//! u_t - mu lap u - div E = g,   g = -P(u.grad u) + P div(E E^T)
//! E_t - grad u           = h,   h = -u.grad E + grad u E
//! ```
//!
//! The linear part is propagated exactly per mode: with
//! `n = Lambda^{-1} div E` and `m = P n`, the pair `(u_hat, m_hat)` evolves
//! by the Green's matrix and `E_hat` receives `i xi_j int u_hat_i`, so the
//! longitudinal part of `n` stays fixed. Nonlinear terms are added with the
//! integrating-factor Heun rule
//!
//! ```text
//! a = S w_n,  b = S N(w_n),  w* = a + dt b,  w_{n+1} = a + dt/2 (b + N(w*))
//! ```
//!
//! where `S` is the exact linear flow over one step.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::semigroup::{greens_function, greens_integral, SemigroupParams};
use crate::spectral::ops::ik;
use crate::spectral::snapshot::{read_fields, write_fields};
use crate::spectral::{div, leray_project, transpose, Grid, Rank, SpectralField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Velocity, strain, time and viscosity.
#[derive(Clone, Debug)]
pub struct State {
    pub u: SpectralField,
    pub e: SpectralField,
    pub t: f64,
    pub mu: f64,
}

impl State {
    pub fn new(u: SpectralField, e: SpectralField, t: f64, mu: f64) -> Result<Self> {
        u.require_rank(Rank::Vector)?;
        e.require_rank(Rank::Tensor)?;
        u.require_same_grid(&e)?;
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!("viscosity must be positive, got {mu}")));
        }
        Ok(Self { u, e, t, mu })
    }

    pub fn zeros(grid: &Grid, mu: f64) -> Self {
        Self {
            u: SpectralField::zeros(grid, Rank::Vector),
            e: SpectralField::zeros(grid, Rank::Tensor),
            t: 0.0,
            mu,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    /// `(||u||^2 + ||E||^2) / 2`.
    pub fn energy(&self) -> f64 {
        0.5 * (self.u.norm_l2().powi(2) + self.e.norm_l2().powi(2))
    }

    /// `mu ||grad u||^2`.
    pub fn dissipation(&self) -> f64 {
        self.mu * self.u.norm_grad().powi(2)
    }

    /// `||u||_{H^2} + ||E||_{H^2}`.
    pub fn h2_sum(&self) -> f64 {
        self.u.norm_h2() + self.e.norm_h2()
    }

    /// `max_k |xi . u_hat(k)|` relative to `||u||` (coefficient scale).
    pub fn divergence_defect(&self) -> f64 {
        let g = self.grid();
        let d = g.dim();
        let mut worst: f64 = 0.0;
        let mut size: f64 = 0.0;
        for idx in 0..g.n_modes() {
            let xi = g.xi(idx);
            let dot: Complex64 = (0..d).map(|a| self.u.at(a, idx) * xi[a]).sum();
            worst = worst.max(dot.norm());
            for a in 0..d {
                size = size.max(self.u.at(a, idx).norm());
            }
        }
        if size == 0.0 {
            0.0
        } else {
            worst / size
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.e.is_finite()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_fields(path, self.t, &[&self.u, &self.e])
    }

    /// Reads a snapshot written by [`State::write`].
    pub fn read(path: &Path, mu: f64, grid: Option<&Grid>) -> Result<Self> {
        let (t, mut fields) = read_fields(path, grid)?;
        if fields.len() != 2 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        let e = fields.pop().expect("two fields");
        let u = fields.pop().expect("two fields");
        Self::new(u, e, t, mu)
    }
}

/// `n = Lambda^{-1} div E`, `Omega = Lambda^{-1}(grad u - grad u^T)`,
/// `Ebb = E^T - E`.
#[derive(Clone, Debug)]
pub struct DecomposedState {
    pub n: SpectralField,
    pub omega: SpectralField,
    pub ebb: SpectralField,
}

pub fn decompose(s: &State) -> DecomposedState {
    let g = s.grid().clone();
    let d = g.dim();
    let mut n = SpectralField::zeros(&g, Rank::Vector);
    let mut omega = SpectralField::zeros(&g, Rank::Tensor);
    for idx in 1..g.n_modes() {
        let r = g.xi_mag(idx);
        for i in 0..d {
            let mut acc = ZERO;
            for j in 0..d {
                acc += ik(&g, idx, j) * s.e.at(i * d + j, idx);
            }
            n.set(i, idx, acc / r);
            for j in 0..d {
                let w = ik(&g, idx, j) * s.u.at(i, idx) - ik(&g, idx, i) * s.u.at(j, idx);
                omega.set(i * d + j, idx, w / r);
            }
        }
    }
    let ebb = transpose(&s.e).expect("strain is a tensor").sub(&s.e).expect("same grid");
    DecomposedState { n, omega, ebb }
}

/// Physical-space quantities gathered during one nonlinear evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NonlinearStats {
    /// `max_x |u(x)|`.
    pub u_max: f64,
}

/// `(g, h)` with 2/3-rule dealiasing of inputs and outputs and `g`
/// Leray-projected.
pub fn compute_nonlinearities(s: &State) -> (SpectralField, SpectralField) {
    let (g, h, _) = nonlinear_terms(&s.u, &s.e);
    (g, h)
}

/// As [`compute_nonlinearities`], on bare fields, with statistics.
pub fn nonlinear_terms(u: &SpectralField, e: &SpectralField) -> (SpectralField, SpectralField, NonlinearStats) {
    // the unpacking already yields exactly conjugate-symmetric coefficients,
    // and the projector is even in xi, so no symmetrization is needed here
    let (raw, h, stats) = products(u, e);
    let g = leray_project(&raw).expect("vector field");
    (g, h, stats)
}

/// Dealiased `-u.grad u + div(E E^T)` (unprojected) and `h`.
///
/// Real fields travel through the FFT two at a time, packed as `a + i b`.
fn products(u: &SpectralField, e: &SpectralField) -> (SpectralField, SpectralField, NonlinearStats) {
    let grid = u.grid().clone();
    let d = grid.dim();
    let n = grid.n_modes();
    // physical inputs: u (d), grad u (d^2), E (d^2), grad E (d^3)
    let (o_gu, o_e, o_ge) = (d, d + d * d, d + 2 * d * d);
    let n_in = d + 2 * d * d + d * d * d;
    let mut buf = vec![ZERO; n_in.div_ceil(2) * n];
    let mut vals = [ZERO; 48];
    for &idx in grid.dealiased_modes() {
        let xi = grid.xi(idx);
        let dk = [Complex64::new(0.0, xi[0]), Complex64::new(0.0, xi[1]), Complex64::new(0.0, xi[2])];
        for i in 0..d {
            let ui = u.at(i, idx);
            vals[i] = ui;
            for k in 0..d {
                vals[o_gu + i * d + k] = dk[k] * ui;
            }
            for j in 0..d {
                let eij = e.at(i * d + j, idx);
                vals[o_e + i * d + j] = eij;
                for k in 0..d {
                    vals[o_ge + (i * d + j) * d + k] = dk[k] * eij;
                }
            }
        }
        for c in (0..n_in).step_by(2) {
            let b = if c + 1 < n_in { vals[c + 1] } else { ZERO };
            buf[(c / 2) * n + idx] = vals[c] + Complex64::i() * b;
        }
    }
    buf.par_chunks_mut(n).for_each(|c| grid.inverse(c));
    let mut phys = vec![0.0; n_in * n];
    for (pair, chunk) in buf.chunks(n).enumerate() {
        for (p, z) in chunk.iter().enumerate() {
            phys[p * n_in + 2 * pair] = z.re;
            if 2 * pair + 1 < n_in {
                phys[p * n_in + 2 * pair + 1] = z.im;
            }
        }
    }
    drop(buf);
    // point-major so the product loop reads contiguously

    // physical outputs: momentum products (d), h (d^2)
    let n_out = d + d * d;
    let mut out = vec![ZERO; n_out.div_ceil(2) * n];
    let mut res = [0.0; 12];
    let mut u_max: f64 = 0.0;
    for (p, v) in phys.chunks_exact(n_in).enumerate() {
        let at = |c: usize, _: usize| v[c];
        u_max = u_max.max((0..d).map(|k| at(k, p).powi(2)).sum::<f64>().sqrt());
        for i in 0..d {
            let mut f = 0.0;
            for k in 0..d {
                f -= at(k, p) * at(o_gu + i * d + k, p);
                for j in 0..d {
                    // d_k(E_ij E_kj)
                    f += at(o_ge + (i * d + j) * d + k, p) * at(o_e + k * d + j, p)
                        + at(o_e + i * d + j, p) * at(o_ge + (k * d + j) * d + k, p);
                }
            }
            res[i] = f;
            for j in 0..d {
                let mut hij = 0.0;
                for k in 0..d {
                    hij += at(o_gu + i * d + k, p) * at(o_e + k * d + j, p) - at(k, p) * at(o_ge + (i * d + j) * d + k, p);
                }
                res[d + i * d + j] = hij;
            }
        }
        for c in (0..n_out).step_by(2) {
            let b = if c + 1 < n_out { res[c + 1] } else { 0.0 };
            out[(c / 2) * n + p] = Complex64::new(res[c], b);
        }
    }
    out.par_chunks_mut(n).for_each(|c| grid.forward(c));
    let mut coeffs = vec![ZERO; n_out * n];
    for &idx in grid.dealiased_modes() {
        let m = grid.neg_index(idx);
        for c in (0..n_out).step_by(2) {
            let z = out[(c / 2) * n + idx];
            let zm = out[(c / 2) * n + m].conj();
            coeffs[c * n + idx] = 0.5 * (z + zm);
            if c + 1 < n_out {
                coeffs[(c + 1) * n + idx] = Complex64::new(0.0, -0.5) * (z - zm);
            }
        }
    }
    let h = SpectralField::from_coeffs(&grid, Rank::Tensor, coeffs.split_off(d * n)).expect("sized");
    let f = SpectralField::from_coeffs(&grid, Rank::Vector, coeffs).expect("sized");
    (f, h, NonlinearStats { u_max })
}

/// Zero-mean pressure solving `lap p = div f` with
/// `f = -u.grad u + div E + div(E E^T)`.
pub fn recover_pressure(s: &State) -> SpectralField {
    let grid = s.grid().clone();
    let f = momentum_forcing(s);
    let d = grid.dim();
    let mut p = SpectralField::zeros(&grid, Rank::Scalar);
    for idx in 1..grid.n_modes() {
        let dv: Complex64 = (0..d).map(|a| ik(&grid, idx, a) * f.at(a, idx)).sum();
        p.set(0, idx, -dv / grid.xi_mag(idx).powi(2));
    }
    p
}

/// Unprojected forcing `-u.grad u + div E + div(E E^T)`, products dealiased.
pub fn momentum_forcing(s: &State) -> SpectralField {
    let (mut f, _, _) = products(&s.u, &s.e);
    f.axpy(1.0, &div(&s.e).expect("tensor")).expect("same grid");
    f
}

/// Per-mode coefficients of the exact linear flow over one step:
/// `(G11, G12, I11, I12)`.
#[derive(Clone, Debug)]
pub struct LinearPropagator {
    dt: f64,
    mu: f64,
    coeffs: Vec<[f64; 4]>,
}

impl LinearPropagator {
    pub fn new(grid: &Grid, mu: f64, dt: f64) -> Self {
        let coeffs = grid
            .xi_mags()
            .par_iter()
            .map(|&r| {
                let p = SemigroupParams { mu, xi_mag: r };
                let g = greens_function(dt, &p);
                let i = greens_integral(dt, &p);
                [g.g11, g.g12, i.g11, i.g12]
            })
            .collect();
        Self { dt, mu, coeffs }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Applies the linear flow in place. `u` must be divergence-free.
    pub fn apply(&self, u: &mut SpectralField, e: &mut SpectralField) {
        let grid = u.grid().clone();
        let d = grid.dim();
        let n = grid.n_modes();
        let uc = u.coeffs_mut();
        let ec = e.coeffs_mut();
        for idx in 1..n {
            let inv_r = 1.0 / grid.xi_mag(idx);
            let [g11, g12, i11, i12] = self.coeffs[idx];
            let xi = grid.xi(idx);
            let dk = [ik(&grid, idx, 0), ik(&grid, idx, 1), if d == 3 { ik(&grid, idx, 2) } else { ZERO }];
            let mut nv = [ZERO; 3];
            let mut along = ZERO;
            for i in 0..d {
                let mut acc = ZERO;
                for j in 0..d {
                    acc += dk[j] * ec[(i * d + j) * n + idx];
                }
                nv[i] = acc * inv_r;
                along += nv[i] * xi[i];
            }
            along *= inv_r * inv_r;
            for i in 0..d {
                let m = nv[i] - along * xi[i];
                let ui = uc[i * n + idx];
                uc[i * n + idx] = ui * g11 + m * g12;
                let int_u = ui * i11 + m * i12;
                for j in 0..d {
                    ec[(i * d + j) * n + idx] += dk[j] * int_u;
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepperConfig {
    pub dt: f64,
    /// When false only the exact linear flow is applied.
    pub nonlinear: bool,
    pub c_cfl: f64,
    /// Velocity floor in the CFL bound.
    pub eps_u: f64,
    /// Abort when `||u||_{H^2} + ||E||_{H^2}` exceeds this multiple of its
    /// initial value.
    pub blowup_factor: f64,
}

impl StepperConfig {
    pub fn new(dt: f64) -> Self {
        Self { dt, nonlinear: true, c_cfl: 0.5, eps_u: 1e-6, blowup_factor: 10.0 }
    }

    pub fn linear(dt: f64) -> Self {
        Self { nonlinear: false, ..Self::new(dt) }
    }
}

/// Advances states by fixed steps; owns the per-mode propagator for its
/// `dt`.
#[derive(Clone, Debug)]
pub struct Stepper {
    cfg: StepperConfig,
    prop: LinearPropagator,
    dx: f64,
    reference_h2: Option<f64>,
}

impl Stepper {
    pub fn new(grid: &Grid, mu: f64, cfg: StepperConfig) -> Result<Self> {
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {}", cfg.dt)));
        }
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!("viscosity must be positive, got {mu}")));
        }
        Ok(Self { cfg, prop: LinearPropagator::new(grid, mu, cfg.dt), dx: grid.dx(), reference_h2: None })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn dt(&self) -> f64 {
        self.cfg.dt
    }

    /// Sets the blow-up reference `||u||_{H^2} + ||E||_{H^2}`.
    pub fn set_reference(&mut self, s: &State) {
        self.reference_h2 = Some(s.h2_sum());
    }

    /// Largest admissible step for a peak speed `u_max`.
    pub fn max_dt(&self, u_max: f64) -> f64 {
        self.cfg.c_cfl * self.dx / u_max.max(self.cfg.eps_u)
    }

    /// One step from `s`; the result carries `t + dt`.
    pub fn step(&mut self, s: &State) -> Result<State> {
        self.step_to(s, s.t + self.cfg.dt)
    }

    /// One step from `s`, stamping the result with `t_new`.
    pub fn step_to(&mut self, s: &State, t_new: f64) -> Result<State> {
        if s.mu != self.prop.mu() {
            return Err(Error::InvalidParameter("state viscosity differs from the stepper's".into()));
        }
        if self.reference_h2.is_none() {
            self.set_reference(s);
        }
        let dt = self.cfg.dt;
        let (mut u, mut e) = (s.u.clone(), s.e.clone());
        self.prop.apply(&mut u, &mut e);
        if self.cfg.nonlinear {
            let (g0, h0, stats) = nonlinear_terms(&s.u, &s.e);
            let max_dt = self.max_dt(stats.u_max);
            if dt > max_dt {
                return Err(Error::Cfl { dt, max_dt });
            }
            let (mut bg, mut bh) = (g0, h0);
            self.prop.apply(&mut bg, &mut bh);
            // predictor
            let mut up = u.clone();
            let mut ep = e.clone();
            up.axpy(dt, &bg)?;
            ep.axpy(dt, &bh)?;
            let (g1, h1, _) = nonlinear_terms(&up, &ep);
            u.axpy(0.5 * dt, &bg)?;
            u.axpy(0.5 * dt, &g1)?;
            e.axpy(0.5 * dt, &bh)?;
            e.axpy(0.5 * dt, &h1)?;
            u = leray_project(&u)?;
            u.dealias();
            e.dealias();
            u.enforce_hermitian();
            e.enforce_hermitian();
        }
        let out = State { u, e, t: t_new, mu: s.mu };
        if !out.is_finite() {
            return Err(Error::BlowUp { t: t_new, reason: "non-finite coefficients".into() });
        }
        if let Some(r) = self.reference_h2 {
            let now = out.h2_sum();
            if r > 0.0 && now > self.cfg.blowup_factor * r {
                return Err(Error::BlowUp {
                    t: t_new,
                    reason: format!("H2 size {now:e} exceeds {} x initial {r:e}", self.cfg.blowup_factor),
                });
            }
        }
        Ok(out)
    }
}

/// One step with a fresh stepper.
pub fn step(s: &State, dt: f64) -> Result<State> {
    Stepper::new(s.grid(), s.mu, StepperConfig::new(dt))?.step(s)
}

/// Read-only observer called on the initial state, every
/// `monitor_every` steps and on the final state.
pub trait Monitor {
    fn observe(&mut self, s: &State) -> Result<()>;
}

impl<F: FnMut(&State) -> Result<()>> Monitor for F {
    fn observe(&mut self, s: &State) -> Result<()> {
        self(s)
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub t_end: f64,
    /// Snapshot cadence in steps (0 = initial and final only).
    pub snapshot_every: usize,
    /// Monitor cadence in steps (0 = initial and final only).
    pub monitor_every: usize,
    pub keep_in_memory: bool,
    pub out_dir: Option<PathBuf>,
}

impl RunOptions {
    pub fn in_memory(t_end: f64, snapshot_every: usize) -> Self {
        Self { t_end, snapshot_every, monitor_every: snapshot_every, keep_in_memory: true, out_dir: None }
    }
}

/// Snapshots of a run (kept in memory and/or on disk).
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<State>,
    pub files: Vec<PathBuf>,
    pub steps: usize,
    pub final_state: State,
}

impl Trajectory {
    /// Loads `snap_*.bin` files from a directory in name order.
    pub fn load(dir: &Path, mu: f64) -> Result<Self> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("snap_") && n.ends_with(".bin"))
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Misaligned(format!("no snapshots in {}", dir.display())));
        }
        let mut snapshots: Vec<State> = Vec::with_capacity(files.len());
        for f in &files {
            let grid = snapshots.first().map(|s| s.grid().clone());
            snapshots.push(State::read(f, mu, grid.as_ref())?);
        }
        let final_state = snapshots.last().expect("non-empty").clone();
        Ok(Self { times: snapshots.iter().map(|s| s.t).collect(), snapshots, files, steps: 0, final_state })
    }
}

pub fn snapshot_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("snap_{index:06}.bin"))
}

/// Steps `s0` to `t_end`. `t_end` must be a whole number of steps.
pub fn run(s0: &State, stepper: &mut Stepper, opts: &RunOptions, monitors: &mut [&mut dyn Monitor]) -> Result<Trajectory> {
    let dt = stepper.dt();
    let span = opts.t_end - s0.t;
    let n_steps = (span / dt).round();
    if span < 0.0 || (n_steps * dt - span).abs() > 1e-9 * dt.max(span.abs()) {
        return Err(Error::InvalidParameter(format!("run length {span} is not a whole number of steps of {dt}")));
    }
    let n_steps = n_steps as usize;
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    stepper.set_reference(s0);
    let mut traj =
        Trajectory { times: Vec::new(), snapshots: Vec::new(), files: Vec::new(), steps: n_steps, final_state: s0.clone() };
    let record = |s: &State, traj: &mut Trajectory| -> Result<()> {
        traj.times.push(s.t);
        if let Some(dir) = &opts.out_dir {
            let path = snapshot_path(dir, traj.files.len());
            s.write(&path)?;
            traj.files.push(path);
        }
        if opts.keep_in_memory {
            traj.snapshots.push(s.clone());
        }
        Ok(())
    };
    record(s0, &mut traj)?;
    for m in monitors.iter_mut() {
        m.observe(s0)?;
    }
    let mut s = s0.clone();
    for k in 1..=n_steps {
        s = stepper.step_to(&s, s0.t + k as f64 * dt)?;
        let last = k == n_steps;
        if last || (opts.snapshot_every > 0 && k % opts.snapshot_every == 0) {
            record(&s, &mut traj)?;
        }
        if last || (opts.monitor_every > 0 && k % opts.monitor_every == 0) {
            for m in monitors.iter_mut() {
                m.observe(&s)?;
            }
        }
    }
    traj.final_state = s;
    Ok(traj)
}
