use std::f64::consts::PI;

use wavepacket_core::bands::{BlochBandModel, GaugeSpec};
use wavepacket_core::envelope::*;
use wavepacket_core::grid::TensorGrid;
use wavepacket_core::lattice::{LatticeSpec, PeriodicPotential};
use wavepacket_core::linalg::{CMat, RMat};
use wavepacket_core::particle_field::{CoefficientPath, Dynamics, LeadingState};
use wavepacket_core::potential::ExternalPotential;
use wavepacket_core::{Result, C64};

fn mathieu_model() -> BlochBandModel {
    let l = LatticeSpec::cubic(1, 2.0 * PI).unwrap();
    let v = PeriodicPotential::new(l, &[([1, 0, 0], C64::new(1.0, 0.0))]).unwrap();
    BlochBandModel::new(v, 10.0, 1, 0.05, &GaugeSpec::default(), &[0.3]).unwrap()
}

fn mathieu_path(q0: f64, t1: f64, spacing: f64) -> CoefficientPath {
    mathieu_path_with(0.1, q0, t1, spacing)
}

fn mathieu_path_with(amplitude: f64, q0: f64, t1: f64, spacing: f64) -> CoefficientPath {
    let model = mathieu_model();
    let w = ExternalPotential::cosine(amplitude, &[1.0], 0.0);
    let d = Dynamics::new(&model, &w, 0.0);
    d.coefficient_path(&LeadingState::new(&[q0], &[0.3]), t1, spacing).unwrap()
}

fn y_grid() -> TensorGrid {
    let (l, n) = default_envelope_box(1);
    TensorGrid::centered(1, l, n).unwrap()
}

fn constant(hess_e: f64, hess_w: f64) -> impl Fn(f64) -> Result<EnvelopeCoefficients> {
    move |_| Ok(EnvelopeCoefficients::quadratic(RMat::from_element(1, 1, hess_e), RMat::from_element(1, 1, hess_w)))
}

fn l2_gap(grid: &TensorGrid, f: &[C64], g: &[C64]) -> f64 {
    let diff: Vec<C64> = f.iter().zip(g).map(|(x, y)| x - y).collect();
    grid.norm(&diff)
}

#[test]
fn closed_form_linear_examples() {
    let g0 = GaussianEnvelope::ground_state(1);
    let free = evolve_gaussian(&g0, &constant(1.0, 0.0), 0.0, 1.0, 1e-3).unwrap();
    assert!((free.a()[(0, 0)] - C64::new(1.0, 1.0)).norm() < 1e-12);
    assert!((free.b()[(0, 0)] - C64::new(0.0, 1.0)).norm() < 1e-12);
    let rot = evolve_gaussian(&g0, &constant(1.0, 1.0), 0.0, PI / 2.0, 1e-3).unwrap();
    assert!((rot.a()[(0, 0)] - C64::new(0.0, 1.0)).norm() < 1e-12);
    assert!((rot.b()[(0, 0)] - C64::new(-1.0, 0.0)).norm() < 1e-12);
}

#[test]
fn symplectic_residuals_on_mathieu_path() {
    let dt = 1e-3;
    let path = mathieu_path(0.0, 1.0, dt / 4.0);
    let g0 = GaussianEnvelope::ground_state(1);
    let g = evolve_gaussian(&g0, &|t| path.at(t), 0.0, 1.0, dt).unwrap();
    let (r1, r2) = g.residuals();
    assert!(r1 <= 1e-9 && r2 <= 1e-9, "{r1} {r2}");
    let mixed = make_gaussian(
        C64::new(1.0, 0.0),
        CMat::identity(1, 1) * C64::new(2.0, 0.5),
        CMat::identity(1, 1) * C64::new(0.0, 0.5),
    )
    .unwrap();
    let g = evolve_gaussian(&mixed, &|t| path.at(t), 0.0, 1.0, dt).unwrap();
    let (r1, r2) = g.residuals();
    assert!(r1 <= 1e-9 && r2 <= 1e-9, "{r1} {r2}");
}

#[test]
fn grid_matches_closed_form_on_mathieu_path() {
    let dt = 1e-3;
    let path = mathieu_path(0.0, 1.0, dt / 4.0);
    let g0 = GaussianEnvelope::ground_state(1);
    let grid = y_grid();
    let closed = evolve_gaussian(&g0, &|t| path.at(t), 0.0, 1.0, dt).unwrap();
    let start = EnvelopeGrid::from_gaussian(&g0, grid.clone(), 0.0);
    let num = evolve_a_grid(&start, &|t| path.at(t), 0.0, 1.0, dt).unwrap();
    let gap = l2_gap(&grid, &num.a, &gaussian_sample(&closed, &grid));
    assert!(gap <= 1e-6, "{gap}");
}

#[test]
fn oscillator_ground_state_is_stationary() {
    let grid = y_grid();
    let start = EnvelopeGrid::from_gaussian(&GaussianEnvelope::ground_state(1), grid.clone(), 0.0);
    let end = evolve_a_grid(&start, &constant(1.0, 1.0), 0.0, 1.0, 2.5e-4).unwrap();
    let dev = start.a.iter().zip(&end.a).map(|(x, y)| (x.norm() - y.norm()).abs()).fold(0.0, f64::max);
    assert!(dev < 1e-8, "{dev}");
    let phase = end.a[grid.len() / 2] / start.a[grid.len() / 2];
    assert!((phase - C64::from_polar(1.0, -0.5)).norm() < 1e-8);
}

#[test]
fn zero_data_stays_zero() {
    let grid = y_grid();
    let zero = vec![C64::new(0.0, 0.0); grid.len()];
    let start = EnvelopeGrid::new(grid, zero.clone(), zero, 0.0).unwrap();
    let path = mathieu_path(1.0, 0.5, 2.5e-3);
    let end = evolve_b_grid(&start, &|t| path.at(t), 0.0, 0.5, 1e-2).unwrap();
    assert!(end.a.iter().chain(&end.b).all(|z| z.norm() == 0.0));
}

#[test]
fn corrector_vanishes_without_source() {
    let grid = y_grid();
    let start = EnvelopeGrid::from_gaussian(&GaussianEnvelope::ground_state(1), grid.clone(), 0.0);
    let end = evolve_b_grid(&start, &constant(1.0, 0.5), 0.0, 1.0, 1e-2).unwrap();
    assert_eq!(grid.norm(&end.b), 0.0);
    assert!(grid.norm(&end.a) > 0.99);
}

#[test]
fn corrector_self_convergence_order_two() {
    let grid = y_grid();
    let start = EnvelopeGrid::from_gaussian(&GaussianEnvelope::ground_state(1), grid.clone(), 0.0);
    let path = mathieu_path_with(1.0, 1.0, 0.5, 0.00125);
    let run = |dt: f64| evolve_b_grid(&start, &|t| path.at(t), 0.0, 0.5, dt).unwrap();
    let (b1, b2, b3) = (run(0.02), run(0.01), run(0.005));
    let e1 = l2_gap(&grid, &b1.b, &b2.b);
    let e2 = l2_gap(&grid, &b2.b, &b3.b);
    assert!(grid.norm(&b3.b) > 1e-3);
    let ratio = e1 / e2;
    assert!((3.5..=4.5).contains(&ratio), "{e1} {e2} {ratio}");
}

#[test]
fn corrector_is_linear_in_data() {
    let grid = y_grid();
    let g = GaussianEnvelope::ground_state(1);
    let one = EnvelopeGrid::from_gaussian(&g, grid.clone(), 0.0);
    let mut two = one.clone();
    two.a.iter_mut().for_each(|z| *z *= 2.0);
    let path = mathieu_path(1.0, 0.5, 2.5e-3);
    let e1 = evolve_b_grid(&one, &|t| path.at(t), 0.0, 0.5, 1e-2).unwrap();
    let e2 = evolve_b_grid(&two, &|t| path.at(t), 0.0, 0.5, 1e-2).unwrap();
    let doubled: Vec<C64> = e1.b.iter().map(|z| z * 2.0).collect();
    assert!(l2_gap(&grid, &doubled, &e2.b) < 1e-12 * grid.norm(&e2.b));
}

#[test]
fn centered_gaussian_moments() {
    let grid = y_grid();
    let m = envelope_moments(&EnvelopeGrid::from_gaussian(&GaussianEnvelope::ground_state(1), grid, 0.0));
    assert!(m.position[0].abs() < 1e-14 && m.momentum[0].abs() < 1e-14);
    assert!((m.position_second[(0, 0)] - 0.5).abs() < 1e-12);
    assert!((m.momentum_second[(0, 0)] - 0.5).abs() < 1e-12);
    assert!((m.norm_sq - 1.0).abs() < 1e-12);
}

#[test]
fn position_moment_rate_is_second_order() {
    let grid = y_grid();
    let shifted = grid.sample(|y| C64::from_polar(PI.powf(-0.25) * (-(y[0] - 1.0).powi(2) / 2.0).exp(), 0.7 * y[0]));
    let zero = vec![C64::new(0.0, 0.0); grid.len()];
    let start = EnvelopeGrid::new(grid, shifted, zero, 0.0).unwrap();
    let path = mathieu_path(0.0, 1.0, 2.5e-4);
    let p = |t| path.at(t);
    let t_mid = 0.5;
    let mid = evolve_a_grid(&start, &p, 0.0, t_mid, 1e-3).unwrap();
    let m_mid = envelope_moments(&mid);
    let exact = path.at(t_mid).unwrap().hess_e[(0, 0)] * m_mid.momentum[0];
    let fd_error = |h: f64| {
        let lo = envelope_moments(&evolve_a_grid(&start, &p, 0.0, t_mid - h, 1e-3).unwrap());
        let hi = envelope_moments(&evolve_a_grid(&start, &p, 0.0, t_mid + h, 1e-3).unwrap());
        ((hi.position[0] - lo.position[0]) / (2.0 * h) - exact).abs()
    };
    let (e1, e2) = (fd_error(0.2), fd_error(0.1));
    assert!(m_mid.momentum[0].abs() > 0.1);
    let ratio = e1 / e2;
    assert!((3.5..=4.5).contains(&ratio), "{e1} {e2}");
}

#[test]
fn pairing_is_conserved() {
    let grid = y_grid();
    let start = EnvelopeGrid::from_gaussian(&GaussianEnvelope::ground_state(1), grid, 0.0);
    let path = mathieu_path(1.0, 1.0, 2.5e-4);
    let mut env = start.clone();
    let mut drift: f64 = 0.0;
    let p0 = envelope_moments(&start).pairing;
    for k in 0..10 {
        let t0 = 0.1 * k as f64;
        env = evolve_b_grid(&env, &|t| path.at(t), t0, t0 + 0.1, 1e-3).unwrap();
        drift = drift.max((envelope_moments(&env).pairing - p0).abs());
    }
    assert!(drift <= 1e-8, "{drift}");
    assert!(envelope_moments(&env).mixed_position[0].abs() > 1e-4);
}

