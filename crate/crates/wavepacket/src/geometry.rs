//! Berry-geometry suite: curvature by two routes, symmetry zeros, Hellmann–Feynman gradients,
//! gauge invariance and the anomalous drift.

use serde::{Deserialize, Serialize};
use wavepacket_core::bands::{BandOracle, BlochBandModel, GaugeSpec};
use wavepacket_core::envelope::GaussianEnvelope;
use wavepacket_core::lattice::PeriodicPotential;
use wavepacket_core::linalg::RVec;
use wavepacket_core::particle_field::{envelope_second_moments, Dynamics, EnvelopeState, LeadingState};
use wavepacket_core::potential::ExternalPotential;
use wavepacket_core::C64;

use crate::config::ExperimentConfig;
use crate::validation::CheckOutcome;
use crate::Result;

/// Samples per axis of the Brillouin-zone grid.
pub fn zone_samples(dim: usize) -> usize {
    match dim {
        1 => 64,
        2 => 32,
        _ => 8,
    }
}

pub const HF_STEP: f64 = 1e-4;
pub const HF_MIN_GAP: f64 = 0.1;
/// Gradients smaller than this are compared in absolute terms.
pub const HF_SCALE_FLOOR: f64 = 1e-2;
pub const GEOMETRY_DT: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeInvariance {
    pub energy: f64,
    pub curvature: f64,
    pub trajectory_q: f64,
    pub trajectory_p: f64,
    /// Change of the connection, which must not vanish for the check to mean anything.
    pub connection_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalousDrift {
    pub epsilon: f64,
    /// `(𝒬 − q)(T) − (𝒬 − q)(0)` along the axis transverse to the force.
    pub measured: f64,
    /// `ε∫(g_β ℱ_{αβ} + ½(D³E:M)_α) dt`.
    pub predicted: f64,
    /// The curvature part alone.
    pub anomalous: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub dim: usize,
    pub samples: usize,
    /// Largest resolvent curvature entry on the zone grid.
    pub curvature_max: f64,
    /// `max|ℱ_res − ℱ_plaq| / max|ℱ_res|` on the zone grid.
    pub plaquette_relative: Option<f64>,
    /// Largest curvature after replacing every coefficient by its modulus.
    pub inversion_symmetric_max: Option<f64>,
    pub hellmann_feynman_max: f64,
    pub hellmann_feynman_points: usize,
    pub skipped_points: usize,
    pub gauge: GaugeInvariance,
    pub anomalous: Option<AnomalousDrift>,
}

/// Quasi-momenta `B(s − ½ + ½/n)` on an `n^d` grid of the zone.
pub fn zone_grid(model: &BlochBandModel, n: usize) -> Vec<Vec<f64>> {
    let lat = model.potential().lattice();
    let d = lat.dim();
    let b = lat.dual_generators();
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut k| {
            let mut s = RVec::zeros(d);
            for axis in 0..d {
                s[axis] = (k % n) as f64 / n as f64 - 0.5 + 0.5 / n as f64;
                k /= n;
            }
            (b * s).iter().copied().collect()
        })
        .collect()
}

fn local_model(v: &PeriodicPotential, cutoff: f64, band: usize, p: &[f64]) -> Result<BlochBandModel> {
    Ok(BlochBandModel::new(v.clone(), cutoff, band, 0.0, &GaugeSpec::default(), p)?)
}

/// Symmetric counterpart with `V̂_m` replaced by `|V̂_m|`.
pub fn inversion_symmetric(v: &PeriodicPotential) -> Result<PeriodicPotential> {
    let entries: Vec<_> = v.coefficients().map(|(m, c)| (*m, C64::new(c.norm(), 0.0))).collect();
    Ok(PeriodicPotential::new(v.lattice().clone(), &entries)?)
}

fn twisted(config: &ExperimentConfig) -> Result<BlochBandModel> {
    let d = config.dim;
    let base = config.band_model()?;
    let slope: Vec<f64> = (0..d).map(|k| 0.35 - 0.2 * k as f64).collect();
    let anchor = Some(base.anchor_index());
    Ok(BlochBandModel::new(
        config.periodic_potential()?,
        config.cutoff,
        config.band,
        config.gap_threshold,
        &GaugeSpec { anchor, phase: 1.1, slope },
        &config.p0,
    )?)
}

pub fn run_geometry_suite(config: &ExperimentConfig) -> Result<GeometryReport> {
    let v = config.periodic_potential()?;
    let model = config.band_model()?;
    let d = config.dim;
    let n = zone_samples(d);
    let points = zone_grid(&model, n);
    let sym = if d >= 2 { Some(inversion_symmetric(&v)?) } else { None };
    let mut curvature_max: f64 = 0.0;
    let mut plaquette_diff: f64 = 0.0;
    let mut inversion_max: f64 = 0.0;
    let mut hf_max: f64 = 0.0;
    let mut hf_points = 0;
    let mut skipped = 0;
    for p in &points {
        let local = match local_model(&v, config.cutoff, config.band, p) {
            Ok(m) => m,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let pt = match local.first_order(p) {
            Ok(pt) => pt,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        curvature_max = curvature_max.max(pt.curvature.max_abs());
        if d >= 2 {
            let plaq = local.curvature_plaquette(p)?;
            for (x, y) in pt.curvature.upper().iter().zip(plaq.upper()) {
                plaquette_diff = plaquette_diff.max((x - y).abs());
            }
        }
        if let Some(sv) = &sym {
            if let Ok(m) = local_model(sv, config.cutoff, config.band, p) {
                if let Ok(sp) = m.first_order(p) {
                    inversion_max = inversion_max.max(sp.curvature.max_abs());
                }
            }
        }
        if pt.gap >= HF_MIN_GAP {
            let mut err: f64 = 0.0;
            for axis in 0..d {
                let mut hi = p.clone();
                let mut lo = p.clone();
                hi[axis] += HF_STEP;
                lo[axis] -= HF_STEP;
                let fd = (local.slice(&hi)?.energy() - local.slice(&lo)?.energy()) / (2.0 * HF_STEP);
                err = err.max((fd - pt.grad[axis]).abs());
            }
            hf_max = hf_max.max(err / pt.grad.amax().max(HF_SCALE_FLOOR));
            hf_points += 1;
        }
    }
    let plaquette_relative = (d >= 2).then(|| plaquette_diff / curvature_max.max(f64::MIN_POSITIVE));
    Ok(GeometryReport {
        dim: d,
        samples: points.len(),
        curvature_max,
        plaquette_relative,
        inversion_symmetric_max: sym.map(|_| inversion_max),
        hellmann_feynman_max: hf_max,
        hellmann_feynman_points: hf_points,
        skipped_points: skipped,
        gauge: gauge_invariance(config, &model)?,
        anomalous: anomalous_drift(config, &model)?,
    })
}

fn gauge_invariance(config: &ExperimentConfig, model: &BlochBandModel) -> Result<GaugeInvariance> {
    let other = twisted(config)?;
    let w = config.external()?;
    let eps = config.epsilons.iter().copied().fold(1.0 / 16.0, f64::max);
    let d1 = Dynamics::new(model, &w, eps);
    let d2 = Dynamics::new(&other, &w, eps);
    let s0 = d1.initial_state(&config.q0, &config.p0, EnvelopeState::Gaussian(config.gaussian()?))?;
    let a = d1.evolve_coupled(&s0, config.horizon, GEOMETRY_DT)?;
    let b = d2.evolve_coupled(&s0, config.horizon, GEOMETRY_DT)?;
    let mut energy: f64 = 0.0;
    let mut curvature: f64 = 0.0;
    let mut connection_change: f64 = 0.0;
    for p in [&config.p0[..], a.big_p.as_slice()] {
        let x = model.point(p)?;
        let y = other.point(p)?;
        energy = energy.max((x.energy - y.energy).abs());
        for (u, v) in x.curvature.upper().iter().zip(y.curvature.upper()) {
            curvature = curvature.max((u - v).abs());
        }
        connection_change = connection_change.max((&x.connection - &y.connection).amax());
    }
    Ok(GaugeInvariance {
        energy,
        curvature,
        trajectory_q: (&a.big_q - &b.big_q).amax(),
        trajectory_p: (&a.big_p - &b.big_p).amax(),
        connection_change,
    })
}

/// Drift of `𝒬 − q` transverse to a uniform force; only for linear `W` in `d ≥ 2`.
fn anomalous_drift(config: &ExperimentConfig, model: &BlochBandModel) -> Result<Option<AnomalousDrift>> {
    let w = config.external()?;
    let d = config.dim;
    let g = match &w {
        ExternalPotential::Quadratic { hessian, gradient, .. } if d >= 2 && hessian.amax() == 0.0 => gradient.clone(),
        _ => return Ok(None),
    };
    let axis = (0..d).min_by(|&i, &j| g[i].abs().total_cmp(&g[j].abs())).unwrap_or(0);
    let eps = config.epsilons.iter().copied().fold(1.0, f64::min).min(1.0 / 16.0);
    let dynm = Dynamics::new(model, &w, eps);
    let start = dynm.initial_state(&config.q0, &config.p0, EnvelopeState::Gaussian(GaussianEnvelope::ground_state(d)))?;
    let rate = |s: &wavepacket_core::particle_field::ParticleFieldState| -> Result<(f64, f64)> {
        let pt = model.point(s.big_p.as_slice())?;
        let (_, mm) = envelope_second_moments(&s.env);
        let curv: f64 = (0..d).map(|b| g[b] * pt.curvature.get(axis, b)).sum();
        Ok((curv, 0.5 * pt.third.contract_matrix(&mm)[axis]))
    };
    let steps = (config.horizon / GEOMETRY_DT).round() as usize;
    let h = config.horizon / steps as f64;
    let mut s = start.clone();
    let mut prev = rate(&s)?;
    let (mut curv_int, mut env_int) = (0.0, 0.0);
    for _ in 0..steps {
        s = dynm.step_coupled(&s, h)?;
        let cur = rate(&s)?;
        curv_int += 0.5 * h * (prev.0 + cur.0);
        env_int += 0.5 * h * (prev.1 + cur.1);
        prev = cur;
    }
    let lead = Dynamics::new(model, &w, 0.0).leading_trajectory(&LeadingState::new(&config.q0, &config.p0), config.horizon, h)?;
    let q_end = lead.last().map(|l| l.q[axis]).unwrap_or(config.q0[axis]);
    let measured = (s.big_q[axis] - start.big_q[axis]) - (q_end - config.q0[axis]);
    let anomalous = eps * curv_int;
    let predicted = anomalous + eps * env_int;
    Ok(Some(AnomalousDrift {
        epsilon: eps,
        measured,
        predicted,
        anomalous,
        relative_error: (measured - predicted).abs() / predicted.abs().max(f64::MIN_POSITIVE),
    }))
}

/// Pass/fail view of a geometry report.
pub fn geometry_checks(r: &GeometryReport) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut push = |name: &str, value: Option<f64>, max: f64| {
        out.push(CheckOutcome {
            name: name.into(),
            value,
            requirement: format!("≤ {max:e}"),
            passed: value.is_some_and(|v| v <= max),
        })
    };
    if r.dim == 1 {
        push("curvature in one dimension", Some(r.curvature_max), 1e-12);
    }
    if r.plaquette_relative.is_some() {
        push("plaquette vs resolvent curvature (relative)", r.plaquette_relative, 1e-5);
    }
    if r.inversion_symmetric_max.is_some() {
        push("curvature of the inversion-symmetric potential", r.inversion_symmetric_max, 1e-8);
    }
    push("Hellmann–Feynman gradient vs differences (relative)", Some(r.hellmann_feynman_max), 1e-6);
    let gauge = r.gauge.energy.max(r.gauge.curvature).max(r.gauge.trajectory_q).max(r.gauge.trajectory_p);
    push("gauge change: E, ℱ, 𝒬, 𝒫", Some(gauge), 1e-10);
    if let Some(a) = &r.anomalous {
        push("anomalous drift vs curvature quadrature (relative)", Some(a.relative_error), 1e-2);
    }
    out
}
