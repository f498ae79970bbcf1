//! Exact propagator of the per-mode linear block
//!
//! ```text
//! d/dt (a, b) = A (a, b),   A = [[-mu r^2, r], [-r, 0]],   r = |xi|,
//! ```
//!
//! which governs both the `(u_i, n_i)` and the `(Omega_ij, Ebb_ij)` pairs.
//! With `lambda_pm = m +- s`, `m = -mu r^2 / 2`, `s^2 = (mu^2 r^4 - 4 r^2) / 4`:
//!
//! ```text
//! G(t) = e^{mt} [cosh(st) I + (A - m I) sinh(st)/s]
//! ```
//!
//! Every entry is real. Writing `w = s^2 t^2` (negative on the oscillatory
//! branch), entries are evaluated by power series in `w` when `|w| < 1`,
//! by `cos`/`sin` when `w <= -1` and through `e^{lambda_pm t}` when `w >= 1`.
//! The series branch covers the double eigenvalue at `r = 2/mu` without
//! any 0/0 quotient.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Relative discriminant threshold below which the eigenvalues are reported
/// as a double root and the spectral projections are withheld.
pub const EPS_DISC: f64 = 1e-8;

/// Terms kept in the `|w| < 1` series; the remainder is below `1/40!`.
const SERIES_TERMS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemigroupParams {
    pub mu: f64,
    pub xi_mag: f64,
}

impl SemigroupParams {
    pub fn new(mu: f64, xi_mag: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!("viscosity must be positive, got {mu}")));
        }
        if !(xi_mag.is_finite() && xi_mag >= 0.0) {
            return Err(Error::InvalidParameter(format!("|xi| must be non-negative, got {xi_mag}")));
        }
        Ok(Self { mu, xi_mag })
    }

    /// Symbol `A(xi)`.
    pub fn symbol(&self) -> [[f64; 2]; 2] {
        let r = self.xi_mag;
        [[-self.mu * r * r, r], [-r, 0.0]]
    }

    /// Whether `|mu^2 r^4 - 4 r^2| < EPS_DISC * max(1, mu^2 r^4)`.
    pub fn is_degenerate(&self) -> bool {
        let r = self.xi_mag;
        let a = self.mu * self.mu * r.powi(4);
        (a - 4.0 * r * r).abs() < EPS_DISC * a.max(1.0)
    }
}

pub type Mat2 = [[Complex64; 2]; 2];

/// Eigen-structure of `A(xi)`.
#[derive(Clone, Copy, Debug)]
pub struct SemigroupEval {
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    /// `(A - lambda_minus I) / (lambda_plus - lambda_minus)`; `None` when
    /// degenerate.
    pub p_plus: Option<Mat2>,
    pub p_minus: Option<Mat2>,
    pub degenerate: bool,
}

/// Roots of `lambda^2 + mu r^2 lambda + r^2 = 0`; `lambda_plus` carries the
/// `+` sign. On the real branch the small root is taken from Vieta's product
/// to avoid cancellation.
pub fn eigenvalues(p: &SemigroupParams) -> (Complex64, Complex64) {
    let (mu, r) = (p.mu, p.xi_mag);
    let m = -0.5 * mu * r * r;
    let h = 0.5 * mu * r;
    if h < 1.0 {
        let b = r * ((1.0 - h) * (1.0 + h)).sqrt();
        (Complex64::new(m, b), Complex64::new(m, -b))
    } else {
        let s = r * ((h - 1.0) * (h + 1.0)).sqrt();
        let minus = m - s;
        let plus = if minus == 0.0 { 0.0 } else { r * r / minus };
        (Complex64::new(plus, 0.0), Complex64::new(minus, 0.0))
    }
}

pub fn evaluate(p: &SemigroupParams) -> SemigroupEval {
    let (lp, lm) = eigenvalues(p);
    let degenerate = p.is_degenerate() || p.xi_mag == 0.0;
    let (p_plus, p_minus) = if degenerate {
        (None, None)
    } else {
        let a = p.symbol();
        let proj = |num: Complex64, den: Complex64| -> Mat2 {
            let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    let diag = if i == j { num } else { Complex64::new(0.0, 0.0) };
                    out[i][j] = (Complex64::new(a[i][j], 0.0) - diag) / den;
                }
            }
            out
        };
        (Some(proj(lm, lp - lm)), Some(proj(lp, lm - lp)))
    };
    SemigroupEval { lambda_plus: lp, lambda_minus: lm, p_plus, p_minus, degenerate }
}

/// Real 2x2 matrix `[[g11, g12], [g21, g22]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreensMatrix {
    pub g11: f64,
    pub g12: f64,
    pub g21: f64,
    pub g22: f64,
}

impl GreensMatrix {
    pub const IDENTITY: Self = Self { g11: 1.0, g12: 0.0, g21: 0.0, g22: 1.0 };

    pub fn entries(&self) -> [f64; 4] {
        [self.g11, self.g12, self.g21, self.g22]
    }

    pub fn det(&self) -> f64 {
        self.g11 * self.g22 - self.g12 * self.g21
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            g11: self.g11 * o.g11 + self.g12 * o.g21,
            g12: self.g11 * o.g12 + self.g12 * o.g22,
            g21: self.g21 * o.g11 + self.g22 * o.g21,
            g22: self.g21 * o.g12 + self.g22 * o.g22,
        }
    }

    pub fn apply(&self, w: [Complex64; 2]) -> [Complex64; 2] {
        [w[0] * self.g11 + w[1] * self.g12, w[0] * self.g21 + w[1] * self.g22]
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        self.entries().iter().zip(o.entries()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Spectral norm.
    pub fn norm2(&self) -> f64 {
        let [a, b, c, d] = self.entries();
        0.5 * ((a + d).hypot(b - c) + (a - d).hypot(b + c))
    }
}

/// The scalar building blocks `e^{mt} cosh(st) - 1` and
/// `phi = (e^{lambda_+ t} - e^{lambda_- t}) / (lambda_+ - lambda_-)`.
struct Kernel {
    m: f64,
    /// `e^{mt} cosh(st) - 1`
    c_minus_one: f64,
    phi: f64,
}

fn kernel(t: f64, p: &SemigroupParams) -> Kernel {
    let (mu, r) = (p.mu, p.xi_mag);
    let m = -0.5 * mu * r * r;
    let h = 0.5 * mu * r;
    // s^2 t^2 = r^2 t^2 (h - 1)(h + 1)
    let w = (r * t).powi(2) * ((h - 1.0) * (h + 1.0));
    if w.abs() < 1.0 {
        let (mut cosh_m1, mut sinhc) = (0.0, 1.0);
        let mut term = 1.0;
        for k in 1..=SERIES_TERMS {
            term *= w / ((2 * k - 1) * (2 * k)) as f64;
            cosh_m1 += term;
            sinhc += term / (2 * k + 1) as f64;
        }
        let e = (m * t).exp();
        Kernel { m, c_minus_one: (m * t).exp_m1() + e * cosh_m1, phi: e * t * sinhc }
    } else if w < 0.0 {
        let b = r * ((1.0 - h) * (1.0 + h)).sqrt();
        let e = (m * t).exp();
        let (sn, cs) = (b * t).sin_cos();
        Kernel { m, c_minus_one: e * cs - 1.0, phi: e * sn / b }
    } else {
        let (lp, lm) = eigenvalues(p);
        let (lp, lm) = (lp.re, lm.re);
        let (ep, em) = ((lp * t).exp(), (lm * t).exp());
        let delta = lp - lm;
        Kernel { m, c_minus_one: 0.5 * (ep + em) - 1.0, phi: (ep - em) / delta }
    }
}

/// `G(t, xi) = exp(t A(xi))`.
pub fn greens_function(t: f64, p: &SemigroupParams) -> GreensMatrix {
    if t == 0.0 {
        return GreensMatrix::IDENTITY;
    }
    let r = p.xi_mag;
    let k = kernel(t, p);
    let c = 1.0 + k.c_minus_one;
    let mphi = k.m * k.phi;
    GreensMatrix { g11: c + mphi, g12: r * k.phi, g21: -r * k.phi, g22: c - mphi }
}

/// `int_0^t G(tau) d tau = A^{-1} (G(t) - I)`, with the `r = 0` limit `t I`.
pub fn greens_integral(t: f64, p: &SemigroupParams) -> GreensMatrix {
    let (mu, r) = (p.mu, p.xi_mag);
    if r == 0.0 {
        return GreensMatrix { g11: t, g12: 0.0, g21: 0.0, g22: t };
    }
    if t == 0.0 {
        return GreensMatrix { g11: 0.0, g12: 0.0, g21: 0.0, g22: 0.0 };
    }
    let k = kernel(t, p);
    let mphi = k.m * k.phi;
    // G11 - 1 = x + y, G22 - 1 = x - y
    let (x, y) = (k.c_minus_one, mphi);
    GreensMatrix {
        g11: k.phi,
        g12: -(x - y) / r,
        g21: (x + y) / r + mu * r * k.phi,
        g22: k.phi - mu * (x - y),
    }
}

/// `G(t, xi) w0`.
pub fn propagate_pair(w0: [Complex64; 2], t: f64, p: &SemigroupParams) -> [Complex64; 2] {
    greens_function(t, p).apply(w0)
}

/// Data-parallel evaluation over many `|xi|`.
pub fn greens_batch(t: f64, mu: f64, xi_mags: &[f64]) -> Vec<GreensMatrix> {
    xi_mags.par_iter().map(|&r| greens_function(t, &SemigroupParams { mu, xi_mag: r })).collect()
}

/// How the low-frequency approximant obtains `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrequencyModel {
    /// `b = sqrt(4 r^2 - mu^2 r^4) / 2`.
    Exact,
    /// Leading-order `b = r`.
    Leading,
}

/// Validation-only approximants of `G` with their constants.
#[derive(Clone, Copy, Debug)]
pub struct AsymptoticConfig {
    pub mu: f64,
    /// Low/high split, in `(0, 2/mu)`.
    pub eta: f64,
    pub gamma: f64,
    /// `|phi| <= c_phi r^-2 e^{-gamma t}` for `r >= eta`.
    pub c_phi: f64,
    /// `|psi| <= c_psi e^{-gamma t}` for `r >= eta`.
    pub c_psi: f64,
    pub frequency: FrequencyModel,
}

/// Headroom applied to fitted envelope constants, covering points between
/// the fit samples.
pub const ENVELOPE_HEADROOM: f64 = 1.1;

impl AsymptoticConfig {
    /// Fits `gamma` and the envelope constants for the split `eta`
    /// (default `1/mu` when `None`).
    ///
    /// `gamma` is the smallest decay rate `-Re lambda_+` over log-spaced
    /// `r in [eta, 1e4/mu]`; the constants are the largest scaled entries over
    /// that `r` set and `t in [0, t_fit]`, times `ENVELOPE_HEADROOM`.
    pub fn fit(mu: f64, eta: Option<f64>, t_fit: f64) -> Result<Self> {
        let eta = eta.unwrap_or(1.0 / mu);
        if !(eta > 0.0 && eta < 2.0 / mu) {
            return Err(Error::InvalidParameter(format!("eta must lie in (0, 2/mu), got {eta}")));
        }
        let rs = logspace(eta, 1e4 / mu, 600);
        let gamma = rs
            .iter()
            .map(|&r| -eigenvalues(&SemigroupParams { mu, xi_mag: r }).0.re)
            .fold(f64::INFINITY, f64::min);
        let (mut c_phi, mut c_psi) = (0.0f64, 0.0f64);
        let n_t = 600;
        for &r in &rs {
            let p = SemigroupParams { mu, xi_mag: r };
            for i in 0..=n_t {
                let t = t_fit * i as f64 / n_t as f64;
                let g = greens_function(t, &p);
                let scale = (gamma * t).exp();
                let phi = g.g12 / r;
                c_phi = c_phi.max(phi.abs() * r * r * scale);
                c_psi = c_psi.max(g.g22.abs() * scale);
            }
        }
        Ok(Self {
            mu,
            eta,
            gamma,
            c_phi: c_phi * ENVELOPE_HEADROOM,
            c_psi: c_psi * ENVELOPE_HEADROOM,
            frequency: FrequencyModel::Exact,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Low,
    High,
}

#[derive(Clone, Copy, Debug)]
pub struct AsymptoticGreens {
    pub branch: Branch,
    /// Low branch: the approximant itself. High branch: entrywise
    /// non-negative bounds on `|G_ij|`.
    pub matrix: GreensMatrix,
}

/// Approximants of `G` for validation.
///
/// Low branch (`r < eta`), with `phi ~ e^{-mu r^2 t/2} sin(bt)/b` and
/// `psi ~ e^{-mu r^2 t/2}(-cos bt - (mu r^2 / 2b) sin bt)`:
/// `G ~ [[-mu r^2 phi - psi, r phi], [-r phi, -psi]]`; `sin(bt)/b -> t` as
/// `b -> 0`. High branch: envelopes `|phi| <= c_phi r^-2 e^{-gamma t}`,
/// `|psi| <= c_psi e^{-gamma t}` propagated to the entries.
pub fn asymptotic_greens(t: f64, p: &SemigroupParams, cfg: &AsymptoticConfig) -> AsymptoticGreens {
    let (mu, r) = (p.mu, p.xi_mag);
    if r < cfg.eta {
        let b = match cfg.frequency {
            FrequencyModel::Exact => eigenvalues(p).0.im,
            FrequencyModel::Leading => r,
        };
        let damp = (-0.5 * mu * r * r * t).exp();
        let sinc_t = if b * t == 0.0 { t } else { (b * t).sin() / b };
        let phi = damp * sinc_t;
        let psi = damp * (-(b * t).cos() - 0.5 * mu * r * r * sinc_t);
        AsymptoticGreens {
            branch: Branch::Low,
            matrix: GreensMatrix { g11: -mu * r * r * phi - psi, g12: r * phi, g21: -r * phi, g22: -psi },
        }
    } else {
        let env = (-cfg.gamma * t).exp();
        let phi = cfg.c_phi * env / (r * r);
        let psi = cfg.c_psi * env;
        AsymptoticGreens {
            branch: Branch::High,
            matrix: GreensMatrix { g11: mu * r * r * phi + psi, g12: r * phi, g21: r * phi, g22: psi },
        }
    }
}

/// `n` log-spaced points from `a` to `b` inclusive.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                (la + (lb - la) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}
