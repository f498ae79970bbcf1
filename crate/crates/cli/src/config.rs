//! Run configuration: TOML on disk, strictly checked.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use visco_core::initial_data::DataRecipe;

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub physics: Physics,
    pub recipe: DataRecipe,
    pub stepping: Stepping,
    pub decay: DecaySection,
    pub invariants: InvariantsSection,
    pub weak_strong: WeakStrongSection,
    pub greens: GreensSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub box_length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { dim: 2, n: 64, box_length: 2.0 * PI }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub mu: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self { mu: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stepping {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between stored snapshots (the final state is always stored).
    pub snapshot_every: usize,
    /// Steps between monitor rows.
    pub monitor_every: usize,
    pub nonlinear: bool,
    pub c_cfl: f64,
    pub blowup_factor: f64,
}

impl Default for Stepping {
    fn default() -> Self {
        Self { dt: 0.01, t_end: 1.0, snapshot_every: 10, monitor_every: 1, nonlinear: true, c_cfl: 0.5, blowup_factor: 10.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileChoice {
    Gaussian,
    FlatTop,
    HighPass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSpec {
    pub kind: ProfileChoice,
    /// Gaussian and high-pass amplitude.
    pub amp: f64,
    /// Flat-top floor.
    pub c0: f64,
    pub xi_floor: f64,
    /// High-pass cutoff.
    pub cutoff: f64,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self { kind: ProfileChoice::Gaussian, amp: 1.0, c0: 0.5, xi_floor: 0.1, cutoff: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeExpectation {
    pub alpha: u32,
    pub slope: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertificateSection {
    pub rho: f64,
    pub t0: f64,
    pub eta: f64,
}

impl Default for CertificateSection {
    fn default() -> Self {
        Self { rho: 0.2, t0: 100.0, eta: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecaySection {
    pub dim: usize,
    pub mu: f64,
    pub profile: ProfileSpec,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub alphas: Vec<u32>,
    pub rel_tol: f64,
    /// `L^p` exponent for the interpolated rate; needs alphas 0 and 1.
    pub lp_exponent: Option<f64>,
    pub certificate: Option<CertificateSection>,
    pub expect: Vec<SlopeExpectation>,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self {
            dim: 3,
            mu: 1.0,
            profile: ProfileSpec::default(),
            t_start: 1e2,
            t_end: 1e4,
            samples: 16,
            alphas: vec![0, 1],
            rel_tol: 1e-10,
            lp_exponent: None,
            certificate: None,
            expect: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvariantsSection {
    /// Fixed `kappa`; selected from probe states when absent.
    pub kappa: Option<f64>,
    pub kappa_max: f64,
    pub probes: usize,
    pub probe_band: usize,
    pub probe_seed: u64,
    /// Fail when a structural residual exceeds this multiple of its initial
    /// value.
    pub residual_growth: Option<f64>,
    /// Fail when `||u||_{H^2} + ||E||_{H^2}` exceeds this multiple of `delta`.
    pub h2_bound_factor: Option<f64>,
}

impl Default for InvariantsSection {
    fn default() -> Self {
        Self {
            kappa: None,
            kappa_max: 0.1,
            probes: 8,
            probe_band: 3,
            probe_seed: 99,
            residual_growth: None,
            h2_bound_factor: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairMode {
    /// Same data at `dt`, `dt/2`, `dt/4`; checks the gap halving ratio.
    Refinement,
    /// Strong run against a run from perturbed strain data.
    Perturbed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakStrongSection {
    pub mode: PairMode,
    /// L2 size of the strain perturbation.
    pub perturbation: f64,
    pub perturb_seed: u64,
    pub perturb_band: usize,
    /// Time between compared snapshots.
    pub cadence: f64,
    pub tol_energy: f64,
    pub slack_rel: f64,
    pub slack_abs: f64,
    pub ratio_range: [f64; 2],
}

impl Default for WeakStrongSection {
    fn default() -> Self {
        Self {
            mode: PairMode::Refinement,
            perturbation: 1e-5,
            perturb_seed: 7,
            perturb_band: 2,
            cadence: 0.25,
            tol_energy: 1e-6,
            slack_rel: 0.1,
            slack_abs: 0.0,
            ratio_range: [12.0, 20.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreensSection {
    pub mus: Vec<f64>,
    pub ts: Vec<f64>,
    pub xi_min: f64,
    pub xi_max: f64,
    pub xi_count: usize,
    /// Adds `|xi| = 2/mu` for every `mu`.
    pub include_degenerate: bool,
    /// Run the semigroup and asymptotic checks besides dumping.
    pub check: bool,
    pub semigroup_tol: f64,
    /// Low band is `|xi| <= low_band / mu`.
    pub low_band: f64,
    pub low_t_max: f64,
    pub low_tol: f64,
    /// High band is `|xi| >= high_band / mu`.
    pub high_band: f64,
    pub high_t: [f64; 2],
}

impl Default for GreensSection {
    fn default() -> Self {
        Self {
            mus: vec![0.5, 1.0, 2.0],
            ts: vec![0.1, 1.0, 10.0],
            xi_min: 1e-3,
            xi_max: 1e3,
            xi_count: 50,
            include_degenerate: true,
            check: false,
            semigroup_tol: 1e-10,
            low_band: 0.05,
            low_t_max: 50.0,
            low_tol: 5e-3,
            high_band: 10.0,
            high_t: [0.5, 5.0],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if !(self.physics.mu > 0.0) {
            return bad("physics.mu must be positive");
        }
        let s = &self.stepping;
        if !(s.dt > 0.0) || !(s.t_end >= 0.0) || !(s.c_cfl > 0.0) || !(s.blowup_factor > 1.0) {
            return bad("stepping needs dt > 0, t_end >= 0, c_cfl > 0 and blowup_factor > 1");
        }
        let d = &self.decay;
        if !(d.t_start > 0.0 && d.t_end > d.t_start) || d.samples < 8 || d.alphas.is_empty() {
            return bad("decay needs 0 < t_start < t_end, at least 8 samples and one alpha");
        }
        if d.lp_exponent.is_some() && !(d.alphas.contains(&0) && d.alphas.contains(&1)) {
            return bad("decay.lp_exponent needs alphas 0 and 1");
        }
        if d.expect.iter().any(|e| !d.alphas.contains(&e.alpha)) {
            return bad("decay.expect refers to an alpha that is not computed");
        }
        let w = &self.weak_strong;
        if !(w.cadence > 0.0) || !(w.ratio_range[0] < w.ratio_range[1]) {
            return bad("weak_strong needs cadence > 0 and an increasing ratio_range");
        }
        let g = &self.greens;
        if g.mus.iter().any(|&m| !(m > 0.0)) || g.ts.iter().any(|&t| !(t >= 0.0)) {
            return bad("greens needs positive mus and non-negative ts");
        }
        if !(g.xi_min > 0.0 && g.xi_max >= g.xi_min) || g.xi_count == 0 {
            return bad("greens needs 0 < xi_min <= xi_max and xi_count >= 1");
        }
        Ok(())
    }
}
