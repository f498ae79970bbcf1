//! Whole-space norms of linear solutions by radial quadrature in Fourier
//! space, decay-rate fits and the lower-bound certificate.
//!
//! For one `(u_i, n_i)` pair with data `w0(xi)`,
//!
//! ```text
//! ||d^alpha (u, n)(t)||^2 = int S_d r^(d-1+2 alpha) |G(t, r) w0(r)|^2 dr
//! ```
//!
//! with `S_d = 2 pi` (d = 2) or `4 pi` (d = 3). Non-radial data enter through
//! the angular average `M(r) = <w0 w0^T>` and `|G w0|^2 -> tr(G^T G M)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate_panels};
use crate::semigroup::{eigenvalues, greens_function, GreensMatrix, SemigroupParams};
use crate::spectral::{Grid, Rank, SpectralField};

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type AngularFn = Arc<dyn Fn([f64; 3]) -> [f64; 2] + Send + Sync>;

#[derive(Clone)]
pub enum ProfileShape {
    /// `(u0(|xi|), n0(|xi|))`.
    Radial { u: RadialFn, n: RadialFn },
    /// `(u0(xi), n0(xi))` for an arbitrary wavevector (third entry zero in 2D).
    Angular(AngularFn),
}

/// Fourier-side initial data of one linear pair.
#[derive(Clone)]
pub struct SpectralProfile {
    pub shape: ProfileShape,
    /// Asserted lower bound of `|u0|` and `|n0|` on `[0, xi_floor]`.
    pub c0: f64,
    pub xi_floor: f64,
    pub label: String,
}

impl fmt::Debug for SpectralProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralProfile")
            .field("label", &self.label)
            .field("c0", &self.c0)
            .field("xi_floor", &self.xi_floor)
            .finish_non_exhaustive()
    }
}

impl SpectralProfile {
    pub fn radial(label: &str, u: RadialFn, n: RadialFn) -> Self {
        Self { shape: ProfileShape::Radial { u, n }, c0: 0.0, xi_floor: 0.0, label: label.into() }
    }

    pub fn angular(label: &str, f: AngularFn) -> Self {
        Self { shape: ProfileShape::Angular(f), c0: 0.0, xi_floor: 0.0, label: label.into() }
    }

    /// `(amp e^{-r^2}, amp e^{-r^2})`.
    pub fn gaussian(amp: f64) -> Self {
        let f: RadialFn = Arc::new(move |r: f64| amp * (-r * r).exp());
        Self::radial("gaussian", f.clone(), f)
    }

    /// Gaussian with a flat top: `c0 exp(-max(r - xi_floor, 0)^2)`, so that
    /// both components equal `c0` on `[0, xi_floor]`.
    pub fn flat_top(c0: f64, xi_floor: f64) -> Self {
        let f: RadialFn = Arc::new(move |r: f64| {
            let x = (r - xi_floor).max(0.0);
            c0 * (-x * x).exp()
        });
        Self { c0, xi_floor, ..Self::radial("flat-top-gaussian", f.clone(), f) }
    }

    /// `amp e^{-r^2} chi(r)` with a smooth cutoff `chi` vanishing on
    /// `[0, cutoff]` and reaching one at `2 cutoff`.
    pub fn high_pass(amp: f64, cutoff: f64) -> Self {
        let f: RadialFn = Arc::new(move |r: f64| amp * (-r * r).exp() * smooth_step((r - cutoff) / cutoff));
        Self::radial("high-pass-gaussian", f.clone(), f)
    }

    /// `(u0, n0)` at wavevector `xi`.
    pub fn eval(&self, xi: [f64; 3]) -> [f64; 2] {
        match &self.shape {
            ProfileShape::Radial { u, n } => {
                let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
                [u(r), n(r)]
            }
            ProfileShape::Angular(f) => f(xi),
        }
    }

    /// Checks `|u0|, |n0| >= c0` on `[0, xi_floor]` along a fixed set of
    /// directions (`2 * 64` radii per direction).
    pub fn floor_holds(&self, dim: usize) -> bool {
        if self.c0 <= 0.0 {
            return false;
        }
        let dirs = sphere_directions(dim, 8);
        (0..=128).all(|i| {
            let r = self.xi_floor * i as f64 / 128.0;
            dirs.iter().all(|(d, _)| {
                let w = self.eval([r * d[0], r * d[1], r * d[2]]);
                w[0].abs() >= self.c0 * (1.0 - 1e-12) && w[1].abs() >= self.c0 * (1.0 - 1e-12)
            })
        })
    }

    /// Samples the profile onto a periodic lattice so that the box norm
    /// approximates the whole-space norm (Riemann sum over the lattice):
    /// continuum amplitude `a_k = w0(xi_k) (2 pi)^(d/2) / L^d`. Returns the
    /// `(u, n)` components as scalar fields.
    pub fn sample_on_grid(&self, grid: &Grid) -> (SpectralField, SpectralField) {
        let d = grid.dim() as i32;
        let scale = (2.0 * PI).powf(d as f64 / 2.0) / grid.box_length().powi(d) * grid.n_modes() as f64;
        let mut u = SpectralField::zeros(grid, Rank::Scalar);
        let mut n = SpectralField::zeros(grid, Rank::Scalar);
        for idx in 0..grid.n_modes() {
            if grid.is_nyquist(idx) {
                continue;
            }
            let w = self.eval(grid.xi(idx));
            u.set(0, idx, Complex64::new(w[0] * scale, 0.0));
            n.set(0, idx, Complex64::new(w[1] * scale, 0.0));
        }
        (u, n)
    }
}

/// `C^infinity` step: 0 for `x <= 0`, 1 for `x >= 1`.
fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// Unit directions with weights summing to one: trapezoid in the angle
/// (2D, `4 n` nodes) or Gauss-Legendre in `cos theta` times trapezoid in
/// `phi` (3D, `n x 2n` nodes).
pub fn sphere_directions(dim: usize, n: usize) -> Vec<([f64; 3], f64)> {
    if dim == 2 {
        let m = 4 * n;
        (0..m)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / m as f64;
                ([th.cos(), th.sin(), 0.0], 1.0 / m as f64)
            })
            .collect()
    } else {
        let (x, w) = gauss_legendre(n);
        let m = 2 * n;
        let mut out = Vec::with_capacity(n * m);
        for (ct, wt) in x.iter().zip(&w) {
            let st = (1.0 - ct * ct).sqrt();
            for j in 0..m {
                let ph = 2.0 * PI * j as f64 / m as f64;
                out.push(([st * ph.cos(), st * ph.sin(), *ct], 0.5 * wt / m as f64));
            }
        }
        out
    }
}

/// Quadrature settings.
#[derive(Clone, Copy, Debug)]
pub struct DecayConfig {
    pub dim: usize,
    pub mu: f64,
    /// Target relative accuracy of each radial integral.
    pub rel_tol: f64,
    /// Multiplies the number of base panels.
    pub resolution: f64,
    /// The cutoff radius `R` is the smallest power of two whose tail bound
    /// is below `tail_tol` times the profile's weighted norm.
    pub tail_tol: f64,
    /// Angular order for non-radial profiles.
    pub angular_order: usize,
    pub max_panels: usize,
}

impl DecayConfig {
    pub fn new(dim: usize, mu: f64) -> Self {
        Self { dim, mu, rel_tol: 1e-10, resolution: 1.0, tail_tol: 1e-12, angular_order: 16, max_panels: 400_000 }
    }

    fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {}", self.dim)));
        }
        if !(self.mu > 0.0) || !(self.resolution > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("mu, resolution and rel_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn surface(&self) -> f64 {
        if self.dim == 2 {
            2.0 * PI
        } else {
            4.0 * PI
        }
    }
}

/// Which part of the pair enters the norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Both,
    U,
    N,
}

/// Angular second moment `<w0 w0^T>` at radius `r` (upper triangle).
fn moment(profile: &SpectralProfile, r: f64, dirs: &[([f64; 3], f64)]) -> [f64; 3] {
    match &profile.shape {
        ProfileShape::Radial { u, n } => {
            let (a, b) = (u(r), n(r));
            [a * a, a * b, b * b]
        }
        ProfileShape::Angular(f) => {
            let mut m = [0.0; 3];
            for (d, w) in dirs {
                let v = f([r * d[0], r * d[1], r * d[2]]);
                m[0] += w * v[0] * v[0];
                m[1] += w * v[0] * v[1];
                m[2] += w * v[1] * v[1];
            }
            m
        }
    }
}

/// `|(G w)_comp|^2` averaged with the moment matrix.
fn propagated_square(g: &GreensMatrix, m: &[f64; 3], comp: Component) -> f64 {
    let row = |a: f64, b: f64| a * a * m[0] + 2.0 * a * b * m[1] + b * b * m[2];
    match comp {
        Component::U => row(g.g11, g.g12),
        Component::N => row(g.g21, g.g22),
        Component::Both => row(g.g11, g.g12) + row(g.g21, g.g22),
    }
}

/// Cutoff radius and the bound on the discarded tail, from the profile alone
/// (`G` is a contraction, so the `t = 0` tail bounds every later tail).
pub fn tail_radius(profile: &SpectralProfile, alpha: u32, cfg: &DecayConfig) -> Result<(f64, f64)> {
    let c = cutoff(profile, alpha, cfg)?;
    Ok((c.radius, c.tail))
}

/// Cutoff radius, tail bound and the full weighted norm squared at `t = 0`.
struct Cutoff {
    radius: f64,
    tail: f64,
    total: f64,
}

impl Cutoff {
    /// Absolute accuracy floor for radial integrals: values this far below
    /// the initial norm are not resolved further.
    fn abs_tol(&self) -> f64 {
        1e-24 * self.total
    }
}

fn cutoff(profile: &SpectralProfile, alpha: u32, cfg: &DecayConfig) -> Result<Cutoff> {
    cfg.validate()?;
    let dirs = sphere_directions(cfg.dim, cfg.angular_order);
    let power = (cfg.dim - 1) as i32 + 2 * alpha as i32;
    let s_d = cfg.surface();
    let weight = |r: f64| {
        let m = moment(profile, r, &dirs);
        s_d * r.powi(power) * (m[0] + m[2])
    };
    // dyadic blocks [0, 1], [1, 2], [2, 4], ...; block k spans edges[k..=k+1]
    const BLOCKS: usize = 64;
    let edges: Vec<f64> = std::iter::once(0.0).chain((0..=BLOCKS as i32).map(|k| 2f64.powi(k))).collect();
    let blocks: Vec<f64> = edges
        .windows(2)
        .map(|w| {
            let sub: Vec<f64> = (0..=16).map(|i| w[0] + (w[1] - w[0]) * i as f64 / 16.0).collect();
            integrate_panels(&weight, &sub, 1e-8, 0.0, 2000).value.abs()
        })
        .collect();
    let total: f64 = blocks.iter().sum();
    if !total.is_finite() {
        return Err(Error::NonIntegrable { radius: 0.0, tail: f64::INFINITY });
    }
    if total == 0.0 {
        return Ok(Cutoff { radius: 1.0, tail: 0.0, total });
    }
    // geometric extrapolation beyond the last block
    let (last, prev) = (blocks[BLOCKS], blocks[BLOCKS - 1]);
    let mut tail = 0.0;
    if last > 0.0 {
        let q = last / prev.max(f64::MIN_POSITIVE);
        if q >= 0.99 {
            return Err(Error::NonIntegrable { radius: edges[BLOCKS + 1], tail: f64::INFINITY });
        }
        tail = last * q / (1.0 - q);
    }
    if tail > cfg.tail_tol * total {
        return Err(Error::NonIntegrable { radius: edges[BLOCKS + 1], tail: tail / total });
    }
    // walk inwards while the tail beyond edges[k] stays below tolerance
    let mut k = BLOCKS + 1;
    while k > 1 && tail + blocks[k - 1] <= cfg.tail_tol * total {
        tail += blocks[k - 1];
        k -= 1;
    }
    Ok(Cutoff { radius: edges[k], tail, total })
}

/// Base panel edges on `[0, R]`: width at most `pi / (4t)` within the core
/// radius `10 / sqrt(mu t)`, coarser beyond it; both scaled by
/// `1 / resolution`.
fn base_edges(t: f64, radius: f64, cfg: &DecayConfig) -> Vec<f64> {
    let res = cfg.resolution;
    let (core, h) = if t > 0.0 {
        ((10.0 / (cfg.mu * t).sqrt()).min(radius), PI / (4.0 * t) / res)
    } else {
        (radius, radius / 64.0 / res)
    };
    let n_core = ((core / h).ceil() as usize).max((16.0 * res).ceil() as usize);
    let mut edges: Vec<f64> = (0..=n_core).map(|i| core * i as f64 / n_core as f64).collect();
    if radius > core {
        let n_out = (16.0 * res).ceil() as usize;
        edges.extend((1..=n_out).map(|i| core + (radius - core) * i as f64 / n_out as f64));
    }
    edges
}

/// `||d^alpha (u, n)(t)||_{L^2}` for one pair (or a single component).
pub fn component_l2_norm(
    profile: &SpectralProfile,
    t: f64,
    alpha: u32,
    comp: Component,
    cfg: &DecayConfig,
) -> Result<f64> {
    let c = cutoff(profile, alpha, cfg)?;
    Ok(integrate_weighted(profile, t, alpha, comp, &c, cfg).sqrt())
}

fn integrate_weighted(
    profile: &SpectralProfile,
    t: f64,
    alpha: u32,
    comp: Component,
    c: &Cutoff,
    cfg: &DecayConfig,
) -> f64 {
    let dirs = sphere_directions(cfg.dim, cfg.angular_order);
    let power = (cfg.dim - 1) as i32 + 2 * alpha as i32;
    let s_d = cfg.surface();
    let mu = cfg.mu;
    let f = |r: f64| {
        let g = greens_function(t, &SemigroupParams { mu, xi_mag: r });
        s_d * r.powi(power) * propagated_square(&g, &moment(profile, r, &dirs), comp)
    };
    let edges = base_edges(t, c.radius, cfg);
    integrate_panels(&f, &edges, cfg.rel_tol, c.abs_tol(), cfg.max_panels).value.max(0.0)
}

/// `||d^alpha (u, n)(t)||_{L^2}`.
pub fn linear_l2_norm(profile: &SpectralProfile, t: f64, alpha: u32, cfg: &DecayConfig) -> Result<f64> {
    component_l2_norm(profile, t, alpha, Component::Both, cfg)
}

/// Norms on a time set.
#[derive(Clone, Debug)]
pub struct DecaySeries {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub alpha: u32,
    pub dim: usize,
    pub mu: f64,
}

pub fn decay_series(profile: &SpectralProfile, times: &[f64], alpha: u32, cfg: &DecayConfig) -> Result<DecaySeries> {
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::InvalidParameter("times must be non-negative and strictly increasing".into()));
    }
    let c = cutoff(profile, alpha, cfg)?;
    let norms = times
        .par_iter()
        .map(|&t| integrate_weighted(profile, t, alpha, Component::Both, &c, cfg).sqrt())
        .collect();
    Ok(DecaySeries { times: times.to_vec(), norms, alpha, dim: cfg.dim, mu: cfg.mu })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub samples: usize,
}

/// Least squares of `log norm` against `log(1 + t)` over samples in
/// `[window.0, window.1]`. Needs at least 8 samples.
pub fn fit_decay_exponent(series: &DecaySeries, window: (f64, f64)) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.norms)
        .filter(|(&t, _)| t >= window.0 && t <= window.1)
        .map(|(&t, &n)| ((1.0 + t).ln(), n.ln()))
        .collect();
    if pts.len() < 8 {
        return Err(Error::DegenerateWindow(format!("{} samples in [{}, {}], need 8", pts.len(), window.0, window.1)));
    }
    if pts.iter().any(|(_, y)| !y.is_finite()) {
        return Err(Error::DegenerateWindow("non-positive norm in window".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateWindow("all samples at one time".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, stderr, intercept, samples: pts.len() })
}

/// Interpolated `L^p` rate from the `alpha = 0` and `alpha = 1` rates:
/// `||f||_p <= C ||f||^(1 - theta) ||grad f||^theta` with
/// `theta = d (1/2 - 1/p)`, so the exponent is
/// `(1 - theta) slope0 + theta slope1`.
pub fn lp_proxy_slope(slope0: f64, slope1: f64, p: f64, dim: usize) -> Result<f64> {
    let theta = dim as f64 * (0.5 - 1.0 / p);
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("p = {p} is outside the interpolation range in {dim}D")));
    }
    Ok((1.0 - theta) * slope0 + theta * slope1)
}

#[derive(Clone, Copy, Debug)]
pub struct CertificateConfig {
    pub rho: f64,
    pub t0: f64,
    /// Split below which the `cos^2` mechanism integral is taken.
    pub eta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertificateSample {
    pub t: f64,
    /// `(1 + t)^(d/4) ||(u, n)(t)||`.
    pub m: f64,
    /// `||u||^2 / ||(u, n)||^2`.
    pub u_share: f64,
    /// `int_{r < eta} S_d r^(d-1) e^{-mu r^2 t} cos^2(b t) |u0|^2 dr`.
    pub cos2_integral: f64,
}

#[derive(Clone, Debug)]
pub struct LowerBoundReport {
    pub rho: f64,
    pub t0: f64,
    pub t_end: f64,
    pub min_m: f64,
    pub max_m: f64,
    pub pass: bool,
    /// Whether the profile's asserted floor was verified.
    pub floor_ok: bool,
    /// Smallest sample time from which the certificate holds to the end.
    pub earliest_t0: Option<f64>,
    /// `(t, min_m - rho max_m)` at the minimizing time when failing.
    pub violation: Option<(f64, f64)>,
    pub samples: Vec<CertificateSample>,
}

/// Certifies `min m >= rho max m` over the sample times in `[t0, T]`, where
/// `m(t) = (1 + t)^(d/4) ||(u, n)(t)||`.
pub fn lower_bound_certificate(
    profile: &SpectralProfile,
    times: &[f64],
    cert: &CertificateConfig,
    cfg: &DecayConfig,
) -> Result<LowerBoundReport> {
    if !(cert.rho > 0.0 && cert.rho <= 1.0) {
        return Err(Error::InvalidParameter(format!("rho must lie in (0, 1], got {}", cert.rho)));
    }
    let times: Vec<f64> = times.iter().copied().filter(|&t| t >= cert.t0).collect();
    if times.is_empty() {
        return Err(Error::DegenerateWindow(format!("no sample time at or after t0 = {}", cert.t0)));
    }
    let c = cutoff(profile, 0, cfg)?;
    let expo = cfg.dim as f64 / 4.0;
    let mu = cfg.mu;
    let s_d = cfg.surface();
    let dirs = sphere_directions(cfg.dim, cfg.angular_order);
    let samples: Vec<CertificateSample> = times
        .par_iter()
        .map(|&t| {
            let both = integrate_weighted(profile, t, 0, Component::Both, &c, cfg);
            let u = integrate_weighted(profile, t, 0, Component::U, &c, cfg);
            let f = |r: f64| {
                let b = eigenvalues(&SemigroupParams { mu, xi_mag: r }).0.im;
                s_d * r.powi(cfg.dim as i32 - 1) * (-mu * r * r * t).exp() * (b * t).cos().powi(2)
                    * moment(profile, r, &dirs)[0]
            };
            let edges = base_edges(t, cert.eta.min(c.radius), cfg);
            let cos2 = integrate_panels(&f, &edges, cfg.rel_tol, c.abs_tol(), cfg.max_panels).value;
            CertificateSample {
                t,
                m: (1.0 + t).powf(expo) * both.sqrt(),
                u_share: if both > 0.0 { u / both } else { 0.0 },
                cos2_integral: cos2,
            }
        })
        .collect();
    let min_m = samples.iter().map(|s| s.m).fold(f64::INFINITY, f64::min);
    let max_m = samples.iter().map(|s| s.m).fold(0.0, f64::max);
    let pass = max_m > 0.0 && min_m >= cert.rho * max_m;
    let violation = if pass {
        None
    } else {
        let worst = samples.iter().min_by(|a, b| a.m.total_cmp(&b.m)).expect("non-empty");
        Some((worst.t, min_m - cert.rho * max_m))
    };
    // suffix extremes give the earliest start that still certifies
    let mut earliest = None;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for s in samples.iter().rev() {
        lo = lo.min(s.m);
        hi = hi.max(s.m);
        if hi > 0.0 && lo >= cert.rho * hi {
            earliest = Some(s.t);
        } else {
            break;
        }
    }
    Ok(LowerBoundReport {
        rho: cert.rho,
        t0: cert.t0,
        t_end: *times.last().expect("non-empty"),
        min_m,
        max_m,
        pass,
        floor_ok: profile.floor_holds(cfg.dim),
        earliest_t0: earliest,
        violation,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        crate::semigroup::logspace(a, b, n)
    }

    #[test]
    fn gaussian_at_time_zero_matches_closed_form() {
        let cfg = DecayConfig::new(3, 1.0);
        // int_0^inf 4 pi r^2 2 e^{-2 r^2} dr = 8 pi * sqrt(pi/2) / 8
        let exact = (PI * (PI / 2.0).sqrt()).sqrt();
        let got = linear_l2_norm(&SpectralProfile::gaussian(1.0), 0.0, 0, &cfg).unwrap();
        assert!((got - exact).abs() <= 1e-8 * exact, "{got} vs {exact}");
    }

    #[test]
    fn fit_recovers_exact_power_laws() {
        let times = geomspace(100.0, 1e4, 20);
        for (amp, rate) in [(1.0, -0.75), (5.0, -1.25)] {
            let norms = times.iter().map(|t| amp * (1.0f64 + t).powf(rate)).collect();
            let s = DecaySeries { times: times.clone(), norms, alpha: 0, dim: 3, mu: 1.0 };
            let fit = fit_decay_exponent(&s, (100.0, 1e4)).unwrap();
            assert!((fit.slope - rate).abs() < 1e-12);
            assert!(fit.stderr <= 1e-12);
        }
    }

    #[test]
    fn fit_rejects_sparse_windows() {
        let s = DecaySeries { times: vec![1.0, 2.0, 3.0], norms: vec![1.0; 3], alpha: 0, dim: 3, mu: 1.0 };
        assert!(matches!(fit_decay_exponent(&s, (0.0, 10.0)), Err(Error::DegenerateWindow(_))));
    }

    #[test]
    fn non_integrable_profile_is_reported() {
        let f: RadialFn = Arc::new(|r: f64| 1.0 / (1.0 + r));
        let p = SpectralProfile::radial("slow", f.clone(), f);
        let err = linear_l2_norm(&p, 1.0, 0, &DecayConfig::new(3, 1.0)).unwrap_err();
        assert!(matches!(err, Error::NonIntegrable { .. }));
    }

    #[test]
    fn single_time_certificate_is_trivial() {
        let cfg = DecayConfig::new(3, 1.0);
        let cert = CertificateConfig { rho: 1.0, t0: 0.0, eta: 1.0 };
        let r = lower_bound_certificate(&SpectralProfile::flat_top(0.5, 0.1), &[50.0], &cert, &cfg).unwrap();
        assert!(r.pass && r.floor_ok);
        assert_eq!(r.earliest_t0, Some(50.0));
    }

    #[test]
    fn high_pass_has_no_floor() {
        let p = SpectralProfile::high_pass(1.0, 0.5);
        assert!(!p.floor_holds(3));
        assert_eq!((p.eval([0.3, 0.0, 0.0])), [0.0, 0.0]);
    }

    #[test]
    fn angular_average_of_a_radial_profile_agrees() {
        for dim in [2, 3] {
            let cfg = DecayConfig::new(dim, 1.0);
            let radial = SpectralProfile::gaussian(1.0);
            let ang = SpectralProfile::angular(
                "gaussian",
                Arc::new(|x: [f64; 3]| {
                    let v = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp();
                    [v, v]
                }),
            );
            let a = linear_l2_norm(&radial, 3.0, 1, &cfg).unwrap();
            let b = linear_l2_norm(&ang, 3.0, 1, &cfg).unwrap();
            assert!((a - b).abs() <= 1e-10 * a);
        }
    }

    #[test]
    fn anisotropic_profile_uses_the_angular_mean() {
        // u0 = e^{-r^2} (1 + x_1 / r): the mean of (1 + cos)^2 over the circle is 3/2
        let cfg = DecayConfig::new(2, 1.0);
        let ang = SpectralProfile::angular(
            "tilted",
            Arc::new(|x: [f64; 3]| {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let g = (-r * r).exp();
                [g * (1.0 + if r > 0.0 { x[0] / r } else { 0.0 }), 0.0]
            }),
        );
        let got = linear_l2_norm(&ang, 0.0, 0, &cfg).unwrap().powi(2);
        // 2 pi int r e^{-2 r^2} dr * 3/2
        let exact = 2.0 * PI * 0.25 * 1.5;
        assert!((got - exact).abs() <= 1e-9 * exact);
    }

    #[test]
    fn grid_sampling_matches_quadrature() {
        let p = SpectralProfile::gaussian(1.0);
        let g = Grid::new(2, 64, 24.0).unwrap();
        let (u, n) = p.sample_on_grid(&g);
        let grid_norm = (u.norm_l2().powi(2) + n.norm_l2().powi(2)).sqrt();
        let quad = linear_l2_norm(&p, 0.0, 0, &DecayConfig::new(2, 1.0)).unwrap();
        assert!((grid_norm - quad).abs() <= 1e-6 * quad, "{grid_norm} vs {quad}");
    }

    #[test]
    fn lp_proxy_interpolates() {
        assert_eq!(lp_proxy_slope(-0.75, -1.25, 6.0, 3).unwrap(), -1.25);
        assert_eq!(lp_proxy_slope(-0.75, -1.25, 2.0, 3).unwrap(), -0.75);
        assert!(lp_proxy_slope(-0.75, -1.25, 8.0, 3).is_err());
    }
}
