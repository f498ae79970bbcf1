//! One function per subcommand. Each writes its artifacts and a manifest
//! before reporting success or the failure class.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use visco_core::decay::{
    decay_series, fit_decay_exponent, lower_bound_certificate, lp_proxy_slope, CertificateConfig, DecayConfig,
    SpectralProfile,
};
use visco_core::initial_data::build_state;
use visco_core::invariants::{energy_balance, energy_step_residuals, probe_states, select_kappa, InvariantReport};
use visco_core::rng::random_field;
use visco_core::semigroup::{
    asymptotic_greens, greens_function, logspace, AsymptoticConfig, Branch, FrequencyModel, SemigroupParams,
};
use visco_core::solver::{run, RunOptions, State, Stepper, StepperConfig, Trajectory};
use visco_core::weak_strong::{gronwall_certificate, GronwallConfig, RelativeEnergyReport};
use visco_core::{Grid, Rank};

use crate::config::{PairMode, ProfileChoice, RunConfig};
use crate::output::Artifacts;
use crate::{CliError, CliResult};

fn grid_of(cfg: &RunConfig) -> CliResult<Grid> {
    Ok(Grid::new(cfg.grid.dim, cfg.grid.n, cfg.grid.box_length)?)
}

fn stepper_of(cfg: &RunConfig, grid: &Grid, dt: f64) -> CliResult<Stepper> {
    let s = &cfg.stepping;
    let sc = StepperConfig {
        dt,
        nonlinear: s.nonlinear,
        c_cfl: s.c_cfl,
        blowup_factor: s.blowup_factor,
        ..StepperConfig::new(dt)
    };
    Ok(Stepper::new(grid, cfg.physics.mu, sc)?)
}

/// Finishes a command: manifest first, then the verdict.
fn finish(art: &mut Artifacts, command: &str, cfg: &RunConfig, result: CliResult<()>) -> CliResult<()> {
    let outcome = match &result {
        Ok(()) => "ok",
        Err(CliError::Certificate(_)) => "check-failed",
        Err(CliError::BlowUp(_)) => "blow-up",
        Err(_) => "error",
    };
    art.manifest(command, cfg, outcome)?;
    result
}

// ---------------------------------------------------------------- decay

#[derive(Serialize)]
struct SeriesRow {
    t: f64,
    alpha: u32,
    norm: f64,
}

#[derive(Serialize)]
struct FitRow {
    alpha: u32,
    slope: f64,
    stderr: f64,
    intercept: f64,
    samples: usize,
    expected: Option<f64>,
    tol: Option<f64>,
    pass: bool,
}

#[derive(Serialize)]
struct CertificateRow {
    t: f64,
    m: f64,
    u_share: f64,
    cos2_integral: f64,
}

fn profile_of(cfg: &RunConfig) -> SpectralProfile {
    let p = &cfg.decay.profile;
    match p.kind {
        ProfileChoice::Gaussian => SpectralProfile::gaussian(p.amp),
        ProfileChoice::FlatTop => SpectralProfile::flat_top(p.c0, p.xi_floor),
        ProfileChoice::HighPass => SpectralProfile::high_pass(p.amp, p.cutoff),
    }
}

pub fn linear_decay(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let mut art = Artifacts::create(out)?;
    let result = linear_decay_into(cfg, &mut art);
    finish(&mut art, "linear-decay", cfg, result)
}

fn linear_decay_into(cfg: &RunConfig, art: &mut Artifacts) -> CliResult<()> {
    let d = &cfg.decay;
    let qcfg = DecayConfig { rel_tol: d.rel_tol, ..DecayConfig::new(d.dim, d.mu) };
    let profile = profile_of(cfg);
    let times = logspace(d.t_start, d.t_end, d.samples);
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for &alpha in &d.alphas {
        let series = decay_series(&profile, &times, alpha, &qcfg)?;
        let fit = fit_decay_exponent(&series, (d.t_start, d.t_end))?;
        rows.extend(series.times.iter().zip(&series.norms).map(|(&t, &norm)| SeriesRow { t, alpha, norm }));
        let expect = d.expect.iter().find(|e| e.alpha == alpha);
        let pass = expect.map_or(true, |e| (fit.slope - e.slope).abs() <= e.tol);
        if !pass {
            failures.push(format!("alpha={alpha} slope {} outside {} +- {}", fit.slope, expect.unwrap().slope, expect.unwrap().tol));
        }
        fits.push(FitRow {
            alpha,
            slope: fit.slope,
            stderr: fit.stderr,
            intercept: fit.intercept,
            samples: fit.samples,
            expected: expect.map(|e| e.slope),
            tol: expect.map(|e| e.tol),
            pass,
        });
    }
    art.csv("series.csv", &rows)?;

    let lp_proxy = match d.lp_exponent {
        Some(p) => {
            let s0 = fits.iter().find(|f| f.alpha == 0).expect("validated").slope;
            let s1 = fits.iter().find(|f| f.alpha == 1).expect("validated").slope;
            Some((p, lp_proxy_slope(s0, s1, p, d.dim)?))
        }
        None => None,
    };
    #[derive(Serialize)]
    struct FitDoc<'a> {
        profile: &'a str,
        dim: usize,
        mu: f64,
        window: [f64; 2],
        fits: &'a [FitRow],
        lp_exponent: Option<f64>,
        lp_proxy_slope: Option<f64>,
    }
    art.json(
        "fit.json",
        &FitDoc {
            profile: &profile.label,
            dim: d.dim,
            mu: d.mu,
            window: [d.t_start, d.t_end],
            fits: &fits,
            lp_exponent: lp_proxy.map(|p| p.0),
            lp_proxy_slope: lp_proxy.map(|p| p.1),
        },
    )?;

    if let Some(c) = &d.certificate {
        let cert = CertificateConfig { rho: c.rho, t0: c.t0, eta: c.eta };
        let rep = lower_bound_certificate(&profile, &times, &cert, &qcfg)?;
        let samples: Vec<CertificateRow> = rep
            .samples
            .iter()
            .map(|s| CertificateRow { t: s.t, m: s.m, u_share: s.u_share, cos2_integral: s.cos2_integral })
            .collect();
        art.csv("certificate.csv", &samples)?;
        #[derive(Serialize)]
        struct CertDoc {
            rho: f64,
            t0: f64,
            t_end: f64,
            min_m: f64,
            max_m: f64,
            ratio: f64,
            pass: bool,
            floor_ok: bool,
            earliest_t0: Option<f64>,
            violation: Option<(f64, f64)>,
        }
        art.json(
            "certificate.json",
            &CertDoc {
                rho: rep.rho,
                t0: rep.t0,
                t_end: rep.t_end,
                min_m: rep.min_m,
                max_m: rep.max_m,
                ratio: rep.min_m / rep.max_m,
                pass: rep.pass,
                floor_ok: rep.floor_ok,
                earliest_t0: rep.earliest_t0,
                violation: rep.violation,
            },
        )?;
        if !rep.pass {
            failures.push(format!("lower-bound certificate fails: min/max = {:.4} < {}", rep.min_m / rep.max_m, rep.rho));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Certificate(failures.join("; ")))
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Serialize)]
struct MonitorRow {
    t: f64,
    energy: f64,
    dissipation: f64,
    h2_sum: f64,
    divergence: f64,
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let mut art = Artifacts::create(out)?;
    let result = simulate_into(cfg, &mut art).map(|_| ());
    finish(&mut art, "simulate", cfg, result)
}

/// Runs the configured simulation, storing snapshots under `snapshots/`.
/// Returns the snapshot directory.
fn simulate_into(cfg: &RunConfig, art: &mut Artifacts) -> CliResult<PathBuf> {
    let grid = grid_of(cfg)?;
    let (s0, report) = build_state(&cfg.recipe, &grid, cfg.physics.mu)?;
    art.json("initial.json", &report)?;
    let mut stepper = stepper_of(cfg, &grid, cfg.stepping.dt)?;
    let snap_dir = art.path("snapshots");
    let opts = RunOptions {
        t_end: cfg.stepping.t_end,
        snapshot_every: cfg.stepping.snapshot_every,
        monitor_every: cfg.stepping.monitor_every,
        keep_in_memory: false,
        out_dir: Some(snap_dir.clone()),
    };
    let mut rows = Vec::new();
    let mut monitor = |s: &State| -> visco_core::Result<()> {
        rows.push(MonitorRow {
            t: s.t,
            energy: s.energy(),
            dissipation: s.dissipation(),
            h2_sum: s.h2_sum(),
            divergence: s.divergence_defect(),
        });
        Ok(())
    };
    let outcome = run(&s0, &mut stepper, &opts, &mut [&mut monitor]);
    art.csv("monitor.csv", &rows)?;
    let traj = outcome?;
    for f in &traj.files {
        if let Ok(rel) = f.strip_prefix(art.dir()) {
            art.note(rel.display().to_string());
        }
    }
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let energy: Vec<f64> = rows.iter().map(|r| r.energy).collect();
    let diss: Vec<f64> = rows.iter().map(|r| r.dissipation).collect();
    let steps = energy_step_residuals(&times, &energy, &diss);
    #[derive(Serialize)]
    struct EnergyDoc {
        steps: usize,
        monitor_rows: usize,
        residual_total: f64,
        residual_max: f64,
        balance_final: f64,
        energy_initial: f64,
        energy_final: f64,
    }
    art.json(
        "energy.json",
        &EnergyDoc {
            steps: traj.steps,
            monitor_rows: rows.len(),
            residual_total: steps.iter().map(|r| r.abs()).sum(),
            residual_max: steps.iter().map(|r| r.abs()).fold(0.0, f64::max),
            balance_final: energy_balance(&times, &energy, &diss).last().copied().unwrap_or(0.0),
            energy_initial: energy.first().copied().unwrap_or(0.0),
            energy_final: energy.last().copied().unwrap_or(0.0),
        },
    )?;
    Ok(snap_dir)
}

// ---------------------------------------------------------------- invariants

#[derive(Serialize)]
struct InvariantRow {
    t: f64,
    det_dev: f64,
    #[serde(rename = "divFT")]
    div_ft: f64,
    piola: f64,
    energy: f64,
    dissipation: f64,
    #[serde(rename = "G")]
    g: f64,
    #[serde(rename = "H")]
    h: f64,
    kappa: f64,
    h2_sum: f64,
    sandwich: bool,
}

impl From<&InvariantReport> for InvariantRow {
    fn from(r: &InvariantReport) -> Self {
        Self {
            t: r.t,
            det_dev: r.det_dev,
            div_ft: r.div_ft,
            piola: r.piola,
            energy: r.energy,
            dissipation: r.dissipation,
            g: r.g,
            h: r.h,
            kappa: r.kappa,
            h2_sum: r.h2_sum,
            sandwich: r.sandwich,
        }
    }
}

/// Evaluates the invariants on a stored trajectory, or on a fresh
/// simulation when none is given.
pub fn invariants(cfg: &RunConfig, out: &Path, trajectory: Option<&Path>) -> CliResult<()> {
    let mut art = Artifacts::create(out)?;
    let result = invariants_into(cfg, &mut art, trajectory);
    finish(&mut art, "invariants", cfg, result)
}

fn invariants_into(cfg: &RunConfig, art: &mut Artifacts, trajectory: Option<&Path>) -> CliResult<()> {
    let dir = match trajectory {
        Some(p) if p.join("snapshots").is_dir() => p.join("snapshots"),
        Some(p) => p.to_path_buf(),
        None => simulate_into(cfg, art)?,
    };
    let traj = Trajectory::load(&dir, cfg.physics.mu)?;
    let inv = &cfg.invariants;
    let kappa = match inv.kappa {
        Some(k) => k,
        None => {
            let grid = traj.snapshots[0].grid();
            select_kappa(&probe_states(grid, inv.probes, inv.probe_band, inv.probe_seed), inv.kappa_max)
        }
    };
    let reports: Vec<InvariantReport> = traj.snapshots.par_iter().map(|s| InvariantReport::of(s, kappa)).collect();
    let rows: Vec<InvariantRow> = reports.iter().map(InvariantRow::from).collect();
    art.csv("invariants.csv", &rows)?;

    let first = &reports[0];
    let max_of = |f: fn(&InvariantReport) -> f64| reports.iter().map(f).fold(0.0, f64::max);
    let dt = cfg.stepping.dt;
    let g_monotone = reports.windows(2).all(|w| w[1].g <= w[0].g + dt * dt * w[1].t);
    let sandwich = reports.iter().all(|r| r.sandwich);
    let sup_h2 = max_of(|r| r.h2_sum);
    let mut failures = Vec::new();
    if let Some(k) = inv.residual_growth {
        for (name, init, max) in [
            ("det_dev", first.det_dev, max_of(|r| r.det_dev)),
            ("divFT", first.div_ft, max_of(|r| r.div_ft)),
            ("piola", first.piola, max_of(|r| r.piola)),
        ] {
            if max > k * init {
                failures.push(format!("{name} grew to {max:e}, more than {k} x {init:e}"));
            }
        }
    }
    if let Some(f) = inv.h2_bound_factor {
        if sup_h2 > f * cfg.recipe.delta {
            failures.push(format!("H2 size {sup_h2:e} exceeds {f} x delta"));
        }
    }
    if inv.residual_growth.is_some() || inv.h2_bound_factor.is_some() {
        if !g_monotone {
            failures.push("G increased beyond the dt^2 t slack".into());
        }
        if !sandwich {
            failures.push(format!("the G/H2 sandwich fails for kappa = {kappa}"));
        }
    }
    #[derive(Serialize)]
    struct Summary {
        snapshots: usize,
        kappa: f64,
        initial: InvariantRow,
        max_det_dev: f64,
        max_div_ft: f64,
        max_piola: f64,
        sup_h2: f64,
        g_non_increasing: bool,
        sandwich_everywhere: bool,
        failures: Vec<String>,
    }
    art.json(
        "invariants.json",
        &Summary {
            snapshots: reports.len(),
            kappa,
            initial: first.into(),
            max_det_dev: max_of(|r| r.det_dev),
            max_div_ft: max_of(|r| r.div_ft),
            max_piola: max_of(|r| r.piola),
            sup_h2,
            g_non_increasing: g_monotone,
            sandwich_everywhere: sandwich,
            failures: failures.clone(),
        },
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Certificate(failures.join("; ")))
    }
}

// ---------------------------------------------------------------- weak-strong

#[derive(Serialize)]
struct RelativeRow {
    t: f64,
    rel_energy: f64,
    grad_diff: f64,
    #[serde(rename = "R1")]
    r1: f64,
    #[serde(rename = "R2")]
    r2: f64,
    h: f64,
    envelope: f64,
}

fn relative_rows(r: &RelativeEnergyReport) -> Vec<RelativeRow> {
    (0..r.times.len())
        .map(|k| RelativeRow {
            t: r.times[k],
            rel_energy: r.rel_energy[k],
            grad_diff: r.grad_diff[k],
            r1: r.r1[k],
            r2: r.r2[k],
            h: r.h[k],
            envelope: r.envelope[k],
        })
        .collect()
}

pub fn weak_strong(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let mut art = Artifacts::create(out)?;
    let result = weak_strong_into(cfg, &mut art);
    finish(&mut art, "weak-strong", cfg, result)
}

fn weak_strong_into(cfg: &RunConfig, art: &mut Artifacts) -> CliResult<()> {
    let w = &cfg.weak_strong;
    let grid = grid_of(cfg)?;
    let (s0, report) = build_state(&cfg.recipe, &grid, cfg.physics.mu)?;
    art.json("initial.json", &report)?;
    let dt = cfg.stepping.dt;
    let per_snapshot = w.cadence / dt;
    if (per_snapshot - per_snapshot.round()).abs() > 1e-9 || per_snapshot < 1.0 {
        return Err(CliError::Config(format!("cadence {} is not a whole number of steps of {dt}", w.cadence)));
    }
    let per_snapshot = per_snapshot.round() as usize;
    let trajectory = |s: &State, level: u32| -> CliResult<Vec<State>> {
        let refine = 1usize << level;
        let mut stepper = stepper_of(cfg, &grid, dt / refine as f64)?;
        let opts = RunOptions::in_memory(cfg.stepping.t_end, per_snapshot * refine);
        Ok(run(s, &mut stepper, &opts, &mut [])?.snapshots)
    };
    let gcfg = GronwallConfig { tol_energy: w.tol_energy, slack_rel: w.slack_rel, slack_abs: w.slack_abs, ..Default::default() };

    #[derive(Serialize)]
    struct Summary {
        mode: PairMode,
        pass: bool,
        c_fit: f64,
        r2_identity_gap: f64,
        final_rel_energy: f64,
        coarse_gap: Option<f64>,
        ratio: Option<f64>,
        ratio_range: Option<[f64; 2]>,
        perturbation: Option<f64>,
    }
    let (rep, summary) = match w.mode {
        PairMode::Refinement => {
            let runs = [trajectory(&s0, 0)?, trajectory(&s0, 1)?, trajectory(&s0, 2)?];
            let coarse = gronwall_certificate(&runs[1], &runs[0], &gcfg)?;
            let fine = gronwall_certificate(&runs[2], &runs[1], &gcfg)?;
            let ratio = coarse.final_rel_energy() / fine.final_rel_energy();
            let pass = ratio >= w.ratio_range[0] && ratio <= w.ratio_range[1];
            let summary = Summary {
                mode: w.mode,
                pass,
                c_fit: fine.c_fit,
                r2_identity_gap: fine.r2_identity_gap,
                final_rel_energy: fine.final_rel_energy(),
                coarse_gap: Some(coarse.final_rel_energy()),
                ratio: Some(ratio),
                ratio_range: Some(w.ratio_range),
                perturbation: None,
            };
            (fine, summary)
        }
        PairMode::Perturbed => {
            let strong = trajectory(&s0, 0)?;
            let mut perturbed = s0.clone();
            let noise = random_field(&grid, Rank::Tensor, w.perturb_band, w.perturb_seed);
            perturbed.e.axpy(w.perturbation / noise.norm_l2(), &noise)?;
            let weak = trajectory(&perturbed, 0)?;
            let rep = gronwall_certificate(&strong, &weak, &gcfg)?;
            let summary = Summary {
                mode: w.mode,
                pass: rep.pass,
                c_fit: rep.c_fit,
                r2_identity_gap: rep.r2_identity_gap,
                final_rel_energy: rep.final_rel_energy(),
                coarse_gap: None,
                ratio: None,
                ratio_range: None,
                perturbation: Some(w.perturbation),
            };
            (rep, summary)
        }
    };
    art.csv("relative_energy.csv", &relative_rows(&rep))?;
    art.json("weak_strong.json", &summary)?;
    if summary.pass {
        Ok(())
    } else {
        Err(CliError::Certificate(match summary.ratio {
            Some(r) => format!("halving ratio {r:.3} outside {:?}", w.ratio_range),
            None => "relative energy leaves the Gronwall envelope".into(),
        }))
    }
}

// ---------------------------------------------------------------- greens-dump

#[derive(Serialize)]
struct GreensRow {
    t: f64,
    xi_mag: f64,
    mu: f64,
    re_g11: f64,
    im_g11: f64,
    re_g12: f64,
    im_g12: f64,
    re_g21: f64,
    im_g21: f64,
    re_g22: f64,
    im_g22: f64,
}

pub fn greens_dump(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let mut art = Artifacts::create(out)?;
    let result = greens_dump_into(cfg, &mut art);
    finish(&mut art, "greens-dump", cfg, result)
}

fn greens_dump_into(cfg: &RunConfig, art: &mut Artifacts) -> CliResult<()> {
    let g = &cfg.greens;
    let xis_for = |mu: f64| {
        let mut xs = logspace(g.xi_min, g.xi_max, g.xi_count);
        if g.include_degenerate {
            xs.push(2.0 / mu);
            xs.sort_by(f64::total_cmp);
        }
        xs
    };
    let mut rows = Vec::new();
    for &mu in &g.mus {
        for &t in &g.ts {
            for r in xis_for(mu) {
                let m = greens_function(t, &SemigroupParams::new(mu, r)?);
                rows.push(GreensRow {
                    t,
                    xi_mag: r,
                    mu,
                    re_g11: m.g11,
                    im_g11: 0.0,
                    re_g12: m.g12,
                    im_g12: 0.0,
                    re_g21: m.g21,
                    im_g21: 0.0,
                    re_g22: m.g22,
                    im_g22: 0.0,
                });
            }
        }
    }
    art.csv("greens.csv", &rows)?;
    if !g.check {
        return Ok(());
    }

    let mut semigroup = 0.0f64;
    let mut low_dev = 0.0f64;
    let mut high_ratio = 0.0f64;
    for &mu in &g.mus {
        for r in xis_for(mu) {
            let p = SemigroupParams::new(mu, r)?;
            for &t in &g.ts {
                for &s in &g.ts {
                    let prod = greens_function(t, &p).mul(&greens_function(s, &p));
                    semigroup = semigroup.max(greens_function(t + s, &p).max_abs_diff(&prod));
                }
            }
        }
        let fitted = AsymptoticConfig::fit(mu, None, g.high_t[1])?;
        let band = g.low_band / mu;
        let mut rs = logspace(1e-4 * band, band, 40);
        rs.insert(0, 0.0);
        for frequency in [FrequencyModel::Exact, FrequencyModel::Leading] {
            let acfg = AsymptoticConfig { frequency, ..fitted };
            for &r in &rs {
                let p = SemigroupParams::new(mu, r)?;
                for i in 0..=200 {
                    let t = g.low_t_max * i as f64 / 200.0;
                    let exact = greens_function(t, &p);
                    let approx = asymptotic_greens(t, &p, &acfg);
                    if approx.branch != Branch::Low {
                        return Err(CliError::Config(format!("low_band {} reaches past eta", g.low_band)));
                    }
                    let scale = exact.entries().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    low_dev = low_dev.max(approx.matrix.max_abs_diff(&exact) / scale);
                }
            }
        }
        for &r in &logspace(g.high_band / mu, 1e4 / mu, 80) {
            let p = SemigroupParams::new(mu, r)?;
            for i in 0..=90 {
                let t = g.high_t[0] + (g.high_t[1] - g.high_t[0]) * i as f64 / 90.0;
                let env = asymptotic_greens(t, &p, &fitted);
                for (e, b) in greens_function(t, &p).entries().iter().zip(env.matrix.entries()) {
                    high_ratio = high_ratio.max(e.abs() / b);
                }
            }
        }
    }
    let pass = semigroup <= g.semigroup_tol && low_dev <= g.low_tol && high_ratio <= 1.0;
    #[derive(Serialize)]
    struct CheckDoc {
        semigroup_residual: f64,
        semigroup_tol: f64,
        low_max_relative_deviation: f64,
        low_tol: f64,
        high_max_entry_over_envelope: f64,
        pass: bool,
    }
    art.json(
        "greens_check.json",
        &CheckDoc {
            semigroup_residual: semigroup,
            semigroup_tol: g.semigroup_tol,
            low_max_relative_deviation: low_dev,
            low_tol: g.low_tol,
            high_max_entry_over_envelope: high_ratio,
            pass,
        },
    )?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Certificate(format!(
            "semigroup {semigroup:e}, low-band deviation {low_dev:e}, high-band envelope ratio {high_ratio}"
        )))
    }
}
