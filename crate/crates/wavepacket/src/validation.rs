//! ε-sweeps: direct solve and asymptotic pipeline side by side, corrector norms at checkpoints,
//! observables, invariants and log–log slope fits.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wavepacket_core::bands::{BandOracle, BlochBandModel};
use wavepacket_core::direct::{
    assemble_asymptotic, assemble_initial_data, check_commensurate, corrector_norm, propagate, resolution_report,
    WaveField,
};
use wavepacket_core::envelope::EnvelopeGrid;
use wavepacket_core::lattice::PeriodicPotential;
use wavepacket_core::observables::{observables_from_ansatz, position_from_field};
use wavepacket_core::particle_field::{AnsatzState, Dynamics, EnvelopeState, LeadingState, ParticleFieldState};
use wavepacket_core::potential::ExternalPotential;

use crate::cache::CachedBand;
use crate::config::{ExperimentConfig, SlopeStatistic};
use crate::fit::{fit_loglog, fit_semilog, LineFit};
use crate::Result;

/// One row of the trajectory table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub big_q: Vec<f64>,
    pub big_p: Vec<f64>,
    pub qs: Vec<f64>,
    pub action: f64,
    pub phi_b: f64,
    pub h_eps: f64,
    pub gap: f64,
    pub symplectic_residual: f64,
}

/// Observables and corrector norms at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub t: f64,
    pub q_ansatz: Vec<f64>,
    pub p_ansatz: Vec<f64>,
    pub q_field: Option<Vec<f64>>,
    pub norm: f64,
    /// `𝒬^ε, 𝒫^ε` from the ansatz minus the integrated corrected system (largest component).
    pub expansion_residual: f64,
    pub momentum_residual: f64,
    /// `position_from_field − 𝒬^ε` (largest component).
    pub field_residual: Option<f64>,
    pub corrector: Option<f64>,
    pub corrector_leading: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemberSummary {
    pub corrector_final: Option<f64>,
    pub corrector_sup: Option<f64>,
    pub leading_final: Option<f64>,
    pub leading_sup: Option<f64>,
    pub expansion_final: Option<f64>,
    pub expansion_sup: Option<f64>,
    pub field_final: Option<f64>,
    pub field_sup: Option<f64>,
    pub hamiltonian_drift: Option<f64>,
    pub symplectic_residual: Option<f64>,
    /// `max_t |𝒩^ε(t) − 𝒩^ε(0)|`.
    pub norm_drift: Option<f64>,
    pub initial_norm_sq: Option<f64>,
    /// Points per scaled period, box in envelope widths, frequency over Nyquist.
    pub resolution: Option<[f64; 3]>,
    /// Fit of `log‖η(t)‖` against `t`.
    pub growth: Option<LineFit>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Runtimes {
    pub direct_seconds: f64,
    pub asymptotic_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct MemberResult {
    pub epsilon: f64,
    pub trajectory: Vec<TrajectoryRow>,
    pub checkpoints: Vec<CheckpointRow>,
    pub snapshots: Vec<EnvelopeGrid>,
    pub summary: MemberSummary,
    pub runtimes: Runtimes,
    /// Direct and asymptotic fields at the horizon.
    pub fields: Option<(WaveField, WaveField)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepFits {
    pub corrected_final: Option<LineFit>,
    pub corrected_sup: Option<LineFit>,
    pub leading_final: Option<LineFit>,
    pub leading_sup: Option<LineFit>,
    pub expansion_final: Option<LineFit>,
    pub expansion_sup: Option<LineFit>,
    pub field_final: Option<LineFit>,
    pub field_sup: Option<LineFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: Option<f64>,
    pub requirement: String,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    /// Sorted by increasing ε.
    pub members: Vec<MemberResult>,
    pub fits: SweepFits,
    pub checks: Vec<CheckOutcome>,
}

impl SweepResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.epsilon).collect()
    }
}

struct Setup {
    model: BlochBandModel,
    v: PeriodicPotential,
    w: ExternalPotential,
}

/// Runs every configured ε on a bounded worker pool and fits the rates.
pub fn run_validation(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let setup = Setup { model: config.band_model()?, v: config.periodic_potential()?, w: config.external()? };
    let cache = CachedBand::new(setup.model.clone());
    let workers = if config.workers == 0 { std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1) } else { config.workers };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.min(config.epsilons.len().max(1)))
        .build()
        .map_err(|e| crate::HarnessError::Config(e.to_string()))?;
    let mut members: Vec<MemberResult> =
        pool.install(|| config.epsilons.par_iter().map(|&eps| run_member(config, &setup, &cache, eps)).collect());
    members.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    let fits = fit_sweep(&members);
    let checks = evaluate_checks(config, &members, &fits);
    Ok(SweepResult { config: config.clone(), members, fits, checks })
}

fn run_member(config: &ExperimentConfig, setup: &Setup, cache: &CachedBand<BlochBandModel>, eps: f64) -> MemberResult {
    let mut out = MemberResult {
        epsilon: eps,
        trajectory: Vec::new(),
        checkpoints: Vec::new(),
        snapshots: Vec::new(),
        summary: MemberSummary::default(),
        runtimes: Runtimes::default(),
        fields: None,
        error: None,
    };
    if let Err(e) = member_body(config, setup, cache, eps, &mut out) {
        out.error = Some(e.to_string());
    }
    out.summary.growth = {
        let (t, y): (Vec<f64>, Vec<f64>) = out.checkpoints.iter().filter_map(|r| r.corrector.map(|c| (r.t, c))).unzip();
        fit_semilog(&t, &y)
    };
    out
}

fn trajectory_row<B: BandOracle>(d: &Dynamics<B>, s: &ParticleFieldState) -> Result<TrajectoryRow> {
    let h = d.hamiltonian_value(s)?.value;
    let gap = d.band.first_order(s.big_p.as_slice())?.gap;
    let symplectic_residual = match &s.env {
        EnvelopeState::Gaussian(g) => {
            let (r1, r2) = g.residuals();
            r1.max(r2)
        }
        EnvelopeState::Grid(_) => 0.0,
    };
    Ok(TrajectoryRow {
        t: s.t(),
        q: s.leading.q.iter().copied().collect(),
        p: s.leading.p.iter().copied().collect(),
        big_q: s.big_q.iter().copied().collect(),
        big_p: s.big_p.iter().copied().collect(),
        qs: s.qs.iter().copied().collect(),
        action: s.leading.action,
        phi_b: s.leading.phi_b,
        h_eps: h,
        gap,
        symplectic_residual,
    })
}

fn max_abs_diff(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
    a.zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn member_body(
    config: &ExperimentConfig,
    setup: &Setup,
    cache: &CachedBand<BlochBandModel>,
    eps: f64,
    out: &mut MemberResult,
) -> Result<()> {
    let dt = config.steppers.dt;
    let dynm = Dynamics::new(cache, &setup.w, eps);
    let env0 = config.envelope_grid()?;
    let mut ansatz = AnsatzState { leading: LeadingState::new(&config.q0, &config.p0), envelope: env0.clone() };
    let mut system = dynm.initial_state(&config.q0, &config.p0, EnvelopeState::Gaussian(config.gaussian()?))?;
    let h0 = dynm.hamiltonian_value(&system)?.value;
    out.trajectory.push(trajectory_row(&dynm, &system)?);
    let snap_due = |t: f64| config.envelope.snapshot_times.iter().any(|&s| (s - t).abs() < 1e-9);
    if snap_due(0.0) {
        out.snapshots.push(env0.clone());
    }
    let point0 = cache.point(&config.p0)?;
    let n0 = observables_from_ansatz(&ansatz.leading, &ansatz.envelope, &point0.connection, eps).norm;

    let direct_grid = if config.direct.enabled { Some(config.direct_grid()?) } else { None };
    let mut psi = match &direct_grid {
        Some(grid) => {
            check_commensurate(grid, &setup.v, &setup.w, eps)?;
            let (ppp, widths, ratio) = resolution_report(&setup.model, &point0, &env0, grid, eps);
            out.summary.resolution = Some([ppp, widths, ratio]);
            let f = assemble_initial_data(&setup.model, &point0, &config.q0, &env0, grid, eps, false)?;
            out.summary.initial_norm_sq = Some(f.norm().powi(2));
            Some(f)
        }
        None => None,
    };

    let mut h_drift: f64 = 0.0;
    let mut symplectic: f64 = out.trajectory[0].symplectic_residual;
    let mut n_drift: f64 = 0.0;
    for t in config.checkpoints() {
        let clock = Instant::now();
        ansatz = dynm.evolve_ansatz(&ansatz, t, dt)?;
        system = dynm.evolve_coupled(&system, t, dt)?;
        out.runtimes.asymptotic_seconds += clock.elapsed().as_secs_f64();
        let row = trajectory_row(&dynm, &system)?;
        h_drift = h_drift.max((row.h_eps - h0).abs());
        symplectic = symplectic.max(row.symplectic_residual);
        out.trajectory.push(row);
        if snap_due(t) {
            out.snapshots.push(ansatz.envelope.clone());
        }

        let point = cache.point(ansatz.leading.p.as_slice())?;
        let obs = observables_from_ansatz(&ansatz.leading, &ansatz.envelope, &point.connection, eps);
        n_drift = n_drift.max((obs.norm - n0).abs());
        let mut row = CheckpointRow {
            t,
            q_ansatz: obs.position.iter().copied().collect(),
            p_ansatz: obs.momentum.iter().copied().collect(),
            q_field: None,
            norm: obs.norm,
            expansion_residual: max_abs_diff(obs.position.iter().copied(), system.big_q.iter().copied()),
            momentum_residual: max_abs_diff(obs.momentum.iter().copied(), system.big_p.iter().copied()),
            field_residual: None,
            corrector: None,
            corrector_leading: None,
        };
        if let (Some(grid), Some(field)) = (&direct_grid, psi.as_mut()) {
            let clock = Instant::now();
            *field = propagate(field, &setup.v, &setup.w, t, eps * config.direct.dt_over_epsilon)?;
            out.runtimes.direct_seconds += clock.elapsed().as_secs_f64();
            let qf = position_from_field(field)?;
            row.field_residual = Some(max_abs_diff(qf.iter().copied(), obs.position.iter().copied()));
            row.q_field = Some(qf.iter().copied().collect());
            let clock = Instant::now();
            let model = &setup.model;
            let full = assemble_asymptotic(model, &point, &ansatz.leading, &ansatz.envelope, grid, eps, false)?;
            row.corrector = Some(corrector_norm(field, &full)?);
            if config.direct.leading_only {
                let lead = assemble_asymptotic(model, &point, &ansatz.leading, &ansatz.envelope, grid, eps, true)?;
                row.corrector_leading = Some(corrector_norm(field, &lead)?);
            }
            out.runtimes.asymptotic_seconds += clock.elapsed().as_secs_f64();
            if (t - config.horizon).abs() < 1e-9 {
                out.fields = Some((field.clone(), full));
            }
        }
        out.checkpoints.push(row);
    }
    let s = &mut out.summary;
    s.hamiltonian_drift = Some(h_drift);
    s.symplectic_residual = Some(symplectic);
    s.norm_drift = Some(n_drift);
    let last = out.checkpoints.last();
    let sup = |f: &dyn Fn(&CheckpointRow) -> Option<f64>| out.checkpoints.iter().filter_map(f).reduce(f64::max);
    s.corrector_final = last.and_then(|r| r.corrector);
    s.corrector_sup = sup(&|r| r.corrector);
    s.leading_final = last.and_then(|r| r.corrector_leading);
    s.leading_sup = sup(&|r| r.corrector_leading);
    s.expansion_final = last.map(|r| r.expansion_residual);
    s.expansion_sup = sup(&|r| Some(r.expansion_residual));
    s.field_final = last.and_then(|r| r.field_residual);
    s.field_sup = sup(&|r| r.field_residual);
    Ok(())
}

fn fit_member_values(members: &[MemberResult], f: impl Fn(&MemberSummary) -> Option<f64>) -> Option<LineFit> {
    let (x, y): (Vec<f64>, Vec<f64>) =
        members.iter().filter(|m| m.error.is_none()).filter_map(|m| f(&m.summary).map(|v| (m.epsilon, v))).unzip();
    fit_loglog(&x, &y)
}

pub fn fit_sweep(members: &[MemberResult]) -> SweepFits {
    SweepFits {
        corrected_final: fit_member_values(members, |s| s.corrector_final),
        corrected_sup: fit_member_values(members, |s| s.corrector_sup),
        leading_final: fit_member_values(members, |s| s.leading_final),
        leading_sup: fit_member_values(members, |s| s.leading_sup),
        expansion_final: fit_member_values(members, |s| s.expansion_final),
        expansion_sup: fit_member_values(members, |s| s.expansion_sup),
        field_final: fit_member_values(members, |s| s.field_final),
        field_sup: fit_member_values(members, |s| s.field_sup),
    }
}

fn in_range(name: &str, fit: Option<LineFit>, range: [f64; 2]) -> CheckOutcome {
    let value = fit.map(|f| f.slope);
    CheckOutcome {
        name: name.into(),
        value,
        requirement: format!("slope in [{}, {}]", range[0], range[1]),
        passed: value.is_some_and(|v| v >= range[0] && v <= range[1]),
    }
}

fn at_least(name: &str, fit: Option<LineFit>, min: f64, strict: bool) -> CheckOutcome {
    let value = fit.map(|f| f.slope);
    CheckOutcome {
        name: name.into(),
        value,
        requirement: format!("slope {} {min}", if strict { ">" } else { "≥" }),
        passed: value.is_some_and(|v| if strict { v > min } else { v >= min }),
    }
}

fn at_most(name: &str, value: Option<f64>, max: f64) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        value,
        requirement: format!("≤ {max:e}"),
        passed: value.is_some_and(|v| v <= max),
    }
}

pub fn evaluate_checks(config: &ExperimentConfig, members: &[MemberResult], fits: &SweepFits) -> Vec<CheckOutcome> {
    let c = &config.checks;
    let sup = c.statistic == SlopeStatistic::Sup;
    let pick = |fin: Option<LineFit>, s: Option<LineFit>| if sup { s } else { fin };
    let mut out = Vec::new();
    for m in members {
        out.push(CheckOutcome {
            name: format!("run ε={}", m.epsilon),
            value: None,
            requirement: "completes without error".into(),
            passed: m.error.is_none(),
        });
    }
    let worst = |f: &dyn Fn(&MemberSummary) -> Option<f64>| -> Option<f64> {
        let vals: Vec<Option<f64>> = members.iter().map(|m| f(&m.summary)).collect();
        if vals.is_empty() || vals.iter().any(|v| v.is_none()) {
            return None;
        }
        vals.into_iter().flatten().reduce(f64::max)
    };
    if let Some(r) = c.corrected_slope {
        out.push(in_range("corrected ansatz rate", pick(fits.corrected_final, fits.corrected_sup), r));
    }
    if let Some(r) = c.leading_slope {
        out.push(in_range("leading-only ansatz rate", pick(fits.leading_final, fits.leading_sup), r));
    }
    if let Some(max) = c.corrector_ceiling {
        out.push(at_most("corrector norm, all ε and checkpoints", worst(&|s| s.corrector_sup), max));
    }
    if let Some(min) = c.expansion_slope_min {
        out.push(at_least("observable expansion residual rate", pick(fits.expansion_final, fits.expansion_sup), min, true));
    }
    if let Some(min) = c.field_position_slope_min {
        out.push(at_least("field position vs 𝒬 rate", pick(fits.field_final, fits.field_sup), min, false));
    }
    if let Some(max) = c.hamiltonian_drift_max {
        out.push(at_most("extended Hamiltonian drift", worst(&|s| s.hamiltonian_drift), max));
    }
    if let Some(max) = c.symplectic_residual_max {
        out.push(at_most("symplectic residual", worst(&|s| s.symplectic_residual), max));
    }
    out
}
