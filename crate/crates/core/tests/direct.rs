use std::f64::consts::PI;

use wavepacket_core::bands::{BandOracle, BlochBandModel, GaugeSpec};
use wavepacket_core::direct::*;
use wavepacket_core::envelope::{default_envelope_box, EnvelopeGrid, GaussianEnvelope};
use wavepacket_core::grid::TensorGrid;
use wavepacket_core::lattice::{LatticeSpec, PeriodicPotential};
use wavepacket_core::observables::position_from_field;
use wavepacket_core::particle_field::{AnsatzState, Dynamics, LeadingState};
use wavepacket_core::potential::ExternalPotential;
use wavepacket_core::{Error, C64};

fn ground_envelope() -> EnvelopeGrid {
    let (ly, ny) = default_envelope_box(1);
    EnvelopeGrid::from_gaussian(&GaussianEnvelope::ground_state(1), TensorGrid::centered(1, ly, ny).unwrap(), 0.0)
}

fn mathieu_potential() -> PeriodicPotential {
    let l = LatticeSpec::cubic(1, 2.0 * PI).unwrap();
    PeriodicPotential::new(l, &[([1, 0, 0], C64::new(1.0, 0.0))]).unwrap()
}

fn free_potential() -> PeriodicPotential {
    PeriodicPotential::zero(LatticeSpec::cubic(1, PI / 2.0).unwrap())
}

#[test]
fn free_initial_data_is_plain_packet() {
    let v = free_potential();
    let model = BlochBandModel::new(v, 6.0, 1, 0.05, &GaugeSpec::default(), &[0.5]).unwrap();
    let pt = model.point(&[0.5]).unwrap();
    let eps = 1.0 / 16.0;
    let grid = TensorGrid::centered(1, 4.0 * PI, 2048).unwrap();
    let env = ground_envelope();
    let psi = assemble_initial_data(&model, &pt, &[0.3], &env, &grid, eps, false).unwrap();
    assert!((psi.norm() - 1.0).abs() < 1e-10);
    let g = GaussianEnvelope::ground_state(1);
    let mut worst: f64 = 0.0;
    grid.for_each_point(|i, x| {
        let y = (x[0] - 0.3) / eps.sqrt();
        let expect = C64::from_polar(eps.powf(-0.25), 0.5 * (x[0] - 0.3) / eps) * g.value(&[y]);
        worst = worst.max((psi.psi[i] - expect).norm());
    });
    assert!(worst < 1e-10, "{worst:e}");
}

#[test]
fn mathieu_initial_norm_expansion() {
    let v = mathieu_potential();
    let model = BlochBandModel::new(v, 10.0, 1, 0.05, &GaugeSpec::default(), &[0.3]).unwrap();
    let pt = model.point(&[0.3]).unwrap();
    let eps = 1.0 / 32.0;
    let grid = TensorGrid::centered(1, 2.0 * PI, 4096).unwrap();
    let env = ground_envelope();
    let full = assemble_initial_data(&model, &pt, &[0.0], &env, &grid, eps, false).unwrap();
    let dev = (full.norm().powi(2) - 1.0).abs();
    assert!(dev <= 0.5 * eps.sqrt(), "{dev}");
    let lead = assemble_initial_data(&model, &pt, &[0.0], &env, &grid, eps, true).unwrap();
    assert!(corrector_norm(&full, &lead).unwrap() > 1e-3);
    assert!((lead.norm() - 1.0).abs() < 1e-3, "{}", lead.norm());
}

#[test]
fn resolution_is_checked() {
    let v = mathieu_potential();
    let model = BlochBandModel::new(v, 10.0, 1, 0.05, &GaugeSpec::default(), &[0.3]).unwrap();
    let pt = model.point(&[0.3]).unwrap();
    let grid = TensorGrid::centered(1, 2.0 * PI, 256).unwrap();
    let err = assemble_initial_data(&model, &pt, &[0.0], &ground_envelope(), &grid, 1.0 / 64.0, false);
    assert!(matches!(err, Err(Error::ResolutionTooLow { .. })));
    let narrow = TensorGrid::centered(1, 2.0 * PI / 16.0, 1024).unwrap();
    let err = assemble_initial_data(&model, &pt, &[0.0], &ground_envelope(), &narrow, 1.0 / 16.0, false);
    assert!(matches!(err, Err(Error::ResolutionTooLow { box_in_widths, .. }) if box_in_widths < 12.0));
}

#[test]
fn plane_wave_phase() {
    let v = free_potential();
    let w = ExternalPotential::zero(1);
    let eps = 1.0 / 8.0;
    let grid = TensorGrid::centered(1, 2.0 * PI, 64).unwrap();
    let k = 5.0;
    let psi = grid.sample(|x| C64::from_polar(1.0, k * x[0]));
    let f = WaveField::new(grid.clone(), psi.clone(), 0.0, eps).unwrap();
    assert!(matches!(propagate(&f, &v, &w, 1.0, 0.01), Err(Error::DomainTooSmall { .. })));
    let out = propagate_periodic(&f, &v, &w, 1.0, 0.01).unwrap();
    let phase = C64::from_polar(1.0, -eps * k * k / 2.0);
    let err = psi.iter().zip(&out.psi).map(|(a, b)| (a * phase - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-12, "{err:e}");
}

#[test]
fn commensurability_is_enforced() {
    let v = mathieu_potential();
    let grid = TensorGrid::centered(1, 2.0 * PI + 0.01, 1024).unwrap();
    let w = ExternalPotential::zero(1);
    assert!(matches!(check_commensurate(&grid, &v, &w, 1.0 / 16.0), Err(Error::CommensurabilityError { .. })));
    let grid = TensorGrid::centered(1, 2.0 * PI, 1024).unwrap();
    let bad = ExternalPotential::cosine(0.1, &[1.5], 0.0);
    assert!(matches!(check_commensurate(&grid, &v, &bad, 1.0 / 16.0), Err(Error::CommensurabilityError { .. })));
    assert!(check_commensurate(&grid, &v, &ExternalPotential::cosine(0.1, &[1.0], 0.0), 1.0 / 16.0).is_ok());
}

#[test]
fn harmonic_coherent_state_center() {
    let v = free_potential();
    let w = ExternalPotential::harmonic(1, 1.0);
    let eps = 1.0 / 16.0;
    let (q0, p0) = (1.0, 0.5);
    let model = BlochBandModel::new(v.clone(), 6.0, 1, 0.05, &GaugeSpec::default(), &[p0]).unwrap();
    let pt = model.point(&[p0]).unwrap();
    let grid = TensorGrid::centered(1, 8.0 * PI, 4096).unwrap();
    let psi0 = assemble_initial_data(&model, &pt, &[q0], &ground_envelope(), &grid, eps, true).unwrap();
    let psi = propagate(&psi0, &v, &w, 1.0, eps / 100.0).unwrap();
    let x = position_from_field(&psi).unwrap()[0];
    let expect = q0 * 1f64.cos() + p0 * 1f64.sin();
    assert!((x - expect).abs() < 1e-6, "{x} vs {expect}");
    assert!((psi.norm() - psi0.norm()).abs() < 1e-10);
}

#[test]
fn asymptotic_at_time_zero_is_initial_data() {
    let v = mathieu_potential();
    let model = BlochBandModel::new(v, 10.0, 1, 0.05, &GaugeSpec::default(), &[0.3]).unwrap();
    let pt = model.point(&[0.3]).unwrap();
    let grid = TensorGrid::centered(1, 2.0 * PI, 2048).unwrap();
    let env = ground_envelope();
    let eps = 1.0 / 16.0;
    let a = assemble_initial_data(&model, &pt, &[0.2], &env, &grid, eps, false).unwrap();
    let b = assemble_asymptotic(&model, &pt, &LeadingState::new(&[0.2], &[0.3]), &env, &grid, eps, false).unwrap();
    assert_eq!(a, b);
    assert_eq!(corrector_norm(&a, &b).unwrap(), 0.0);
}

#[test]
fn corrector_norm_examples() {
    let grid = TensorGrid::centered(1, 20.0, 1024).unwrap();
    let base = grid.sample(|x| C64::new((-x[0] * x[0]).exp(), 0.0));
    let bump = grid.sample(|x| C64::new((-(x[0] - 2.0).powi(2)).exp(), 0.0));
    let scale = 0.01 / grid.norm(&bump);
    let shifted: Vec<C64> = base.iter().zip(&bump).map(|(a, b)| a + b * scale).collect();
    let f = WaveField::new(grid.clone(), base, 0.0, 0.1).unwrap();
    let g = WaveField::new(grid.clone(), shifted, 0.0, 0.1).unwrap();
    assert!((corrector_norm(&f, &g).unwrap() - 0.01).abs() < 1e-12);
    let other = WaveField::new(TensorGrid::centered(1, 20.0, 512).unwrap(), vec![C64::new(0.0, 0.0); 512], 0.0, 0.1).unwrap();
    assert!(matches!(corrector_norm(&f, &other), Err(Error::GridMismatch)));
    let mut late = g.clone();
    late.t = 1.0;
    assert!(matches!(corrector_norm(&f, &late), Err(Error::GridMismatch)));
}

#[test]
fn free_case_ansatz_is_exact() {
    let v = free_potential();
    let w = ExternalPotential::zero(1);
    let eps = 1.0 / 16.0;
    let p0 = 0.5;
    let model = BlochBandModel::new(v.clone(), 6.0, 1, 0.05, &GaugeSpec::default(), &[p0]).unwrap();
    let pt = model.point(&[p0]).unwrap();
    let grid = TensorGrid::centered(1, 8.0 * PI, 4096).unwrap();
    let env = ground_envelope();
    let psi0 = assemble_initial_data(&model, &pt, &[0.0], &env, &grid, eps, false).unwrap();
    let psi = propagate(&psi0, &v, &w, 1.0, eps / 100.0).unwrap();
    let d = Dynamics::new(&model, &w, eps);
    let st = d.evolve_ansatz(&AnsatzState { leading: LeadingState::new(&[0.0], &[p0]), envelope: env }, 1.0, 1e-2).unwrap();
    let pt1 = model.point(st.leading.p.as_slice()).unwrap();
    let tilde = assemble_asymptotic(&model, &pt1, &st.leading, &st.envelope, &grid, eps, false).unwrap();
    let err = corrector_norm(&psi, &tilde).unwrap();
    assert!(err < 1e-6, "{err:e}");
}

/// A twisted gauge with the compensating envelope transform describes the same field.
#[test]
fn gauge_change_leaves_corrector_invariant() {
    let v = mathieu_potential();
    let w = ExternalPotential::cosine(0.1, &[1.0], 0.0);
    let eps = 1.0 / 16.0;
    let (q0, p0) = (0.0, 0.3);
    let twist = GaugeSpec { anchor: None, phase: 0.7, slope: vec![0.2] };
    let grid = TensorGrid::centered(1, 8.0 * PI, 8192).unwrap();
    let env = ground_envelope();
    let mut errs = Vec::new();
    let mut initial = Vec::new();
    for gauge in [GaugeSpec::default(), twist.clone()] {
        let model = BlochBandModel::new(v.clone(), 10.0, 1, 0.05, &gauge, &[p0]).unwrap();
        let theta = gauge.phase + gauge.slope.first().copied().unwrap_or(0.0) * p0;
        let rot = C64::from_polar(1.0, -theta);
        let slope = gauge.slope.first().copied().unwrap_or(0.0);
        let da = env.grid.derivative(&env.a, 0);
        let a0: Vec<C64> = env.a.iter().map(|z| z * rot).collect();
        let b0: Vec<C64> = env.b.iter().zip(&da).map(|(b, d)| (b - d * slope) * rot).collect();
        let env0 = EnvelopeGrid::new(env.grid.clone(), a0, b0, 0.0).unwrap();
        let pt = model.point(&[p0]).unwrap();
        let psi0 = assemble_initial_data(&model, &pt, &[q0], &env0, &grid, eps, false).unwrap();
        initial.push(psi0.psi.clone());
        let psi = propagate(&psi0, &v, &w, 0.5, eps / 100.0).unwrap();
        let d = Dynamics::new(&model, &w, eps);
        let st = d
            .evolve_ansatz(&AnsatzState { leading: LeadingState::new(&[q0], &[p0]), envelope: env0 }, 0.5, 1e-2)
            .unwrap();
        let pt1 = model.point(st.leading.p.as_slice()).unwrap();
        let tilde = assemble_asymptotic(&model, &pt1, &st.leading, &st.envelope, &grid, eps, false).unwrap();
        errs.push(corrector_norm(&psi, &tilde).unwrap());
    }
    let same = initial[0].iter().zip(&initial[1]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(same < 1e-10, "initial data differ by {same:e}");
    assert!((errs[0] - errs[1]).abs() < 1e-10, "{errs:?}");
}
