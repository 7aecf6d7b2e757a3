use std::f64::consts::PI;

use wavepacket_core::bands::{BandOracle, BlochBandModel, GaugeSpec};
use wavepacket_core::direct::{assemble_initial_data, propagate, WaveField};
use wavepacket_core::envelope::{default_envelope_box, EnvelopeGrid, GaussianEnvelope};
use wavepacket_core::grid::TensorGrid;
use wavepacket_core::lattice::{LatticeSpec, PeriodicPotential};
use wavepacket_core::observables::*;
use wavepacket_core::particle_field::{Dynamics, LeadingState};
use wavepacket_core::potential::ExternalPotential;
use wavepacket_core::{Error, C64};

fn gaussian_samples(grid: &TensorGrid) -> Vec<f64> {
    let mut f = vec![0.0; grid.len()];
    grid.for_each_point(|i, x| f[i] = (-x[0] * x[0]).exp());
    f
}

#[test]
fn two_scale_constant_is_exact() {
    let lat = LatticeSpec::cubic(1, 2.0 * PI).unwrap();
    let grid = TensorGrid::centered(1, 16.0, 4096).unwrap();
    let f = gaussian_samples(&grid);
    let r = two_scale_average(&f, &grid, &|_| 1.0, &lat, 0.1, &[0.3]).unwrap();
    assert!((r.value - r.homogenized).abs() < 1e-14);
    assert!((r.homogenized - PI.sqrt()).abs() < 1e-12);
}

#[test]
fn two_scale_cosine_decays_fast() {
    let lat = LatticeSpec::cubic(1, 2.0 * PI).unwrap();
    let grid = TensorGrid::centered(1, 16.0, 8192).unwrap();
    let f = gaussian_samples(&grid);
    let g = |z: &[f64]| z[0].cos();
    for s in [0.0, 0.37] {
        let coarse = two_scale_average(&f, &grid, &g, &lat, 0.1, &[s]).unwrap();
        let fine = two_scale_average(&f, &grid, &g, &lat, 0.05, &[s]).unwrap();
        assert!(coarse.homogenized.abs() < 1e-12);
        assert!(fine.error() * 8.0 <= coarse.error(), "{} vs {}", fine.error(), coarse.error());
    }
    let shifted = two_scale_average(&f, &grid, &|z: &[f64]| 1.0 + z[0].cos(), &lat, 0.05, &[0.0]).unwrap();
    assert!((shifted.value - PI.sqrt()).abs() < 1e-8);
}

#[test]
fn two_scale_needs_resolution() {
    let lat = LatticeSpec::cubic(1, 2.0 * PI).unwrap();
    let grid = TensorGrid::centered(1, 16.0, 256).unwrap();
    let f = gaussian_samples(&grid);
    let r = two_scale_average(&f, &grid, &|z: &[f64]| z[0].cos(), &lat, 0.05, &[0.0]);
    assert!(matches!(r, Err(Error::ResolutionTooLow { .. })));
}

#[test]
fn well_prepared_observables_at_start() {
    let l = LatticeSpec::cubic(1, 2.0 * PI).unwrap();
    let v = PeriodicPotential::new(l, &[([1, 0, 0], C64::new(1.0, 0.0))]).unwrap();
    let gauge = GaugeSpec { anchor: None, phase: 0.0, slope: vec![0.3] };
    let model = BlochBandModel::new(v, 10.0, 1, 0.05, &gauge, &[0.3]).unwrap();
    let (ly, ny) = default_envelope_box(1);
    let env = EnvelopeGrid::from_gaussian(&GaussianEnvelope::ground_state(1), TensorGrid::centered(1, ly, ny).unwrap(), 0.0);
    let eps = 1.0 / 32.0;
    let pt = model.point(&[0.3]).unwrap();
    let obs = observables_from_ansatz(&LeadingState::new(&[0.5], &[0.3]), &env, &pt.connection, eps);
    assert!((obs.position[0] - (0.5 + eps * pt.connection[0])).abs() < 1e-12);
    assert!((obs.momentum[0] - 0.3).abs() < 1e-12);
    assert!((obs.norm - 1.0).abs() < 1e-12);
    assert!(pt.connection[0].abs() > 0.1);
}

#[test]
fn position_of_centered_packet() {
    let grid = TensorGrid::centered(1, 20.0, 1024).unwrap();
    let psi = grid.sample(|x| C64::new((-(x[0] - 2.0).powi(2)).exp(), 0.0));
    let f = WaveField::new(grid.clone(), psi, 0.0, 0.1).unwrap();
    assert!((position_from_field(&f).unwrap()[0] - 2.0).abs() < 1e-8);
    let wide = WaveField::new(grid.clone(), grid.sample(|_| C64::new(1.0, 0.0)), 0.0, 0.1).unwrap();
    assert!(matches!(position_from_field(&wide), Err(Error::DomainTooSmall { .. })));
}

#[test]
fn free_field_moments_follow_classical_path() {
    let v = PeriodicPotential::zero(LatticeSpec::cubic(1, PI / 2.0).unwrap());
    let w = ExternalPotential::zero(1);
    let eps = 1.0 / 32.0;
    let p0 = 0.5;
    let model = BlochBandModel::new(v.clone(), 6.0, 1, 0.05, &GaugeSpec::default(), &[p0]).unwrap();
    let pt = model.point(&[p0]).unwrap();
    let (ly, ny) = default_envelope_box(1);
    let env = EnvelopeGrid::from_gaussian(&GaussianEnvelope::ground_state(1), TensorGrid::centered(1, ly, ny).unwrap(), 0.0);
    let grid = TensorGrid::centered(1, 8.0 * PI, 8192).unwrap();
    let psi0 = assemble_initial_data(&model, &pt, &[0.0], &env, &grid, eps, false).unwrap();
    let psi = propagate(&psi0, &v, &w, 1.0, eps / 100.0).unwrap();
    let d = Dynamics::new(&model, &w, 0.0);
    let lead = d.leading_trajectory(&LeadingState::new(&[0.0], &[p0]), 1.0, 1e-2).unwrap();
    let q = lead.last().unwrap().q[0];
    assert!((position_from_field(&psi).unwrap()[0] - q).abs() < eps);
    assert!((momentum_from_field(&psi).unwrap()[0] - p0).abs() < 1e-8);
    assert!((norm_from_field(&psi) - 1.0).abs() < 1e-10);
}
