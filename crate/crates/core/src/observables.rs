//! Wavepacket observables from the ansatz and from raw fields, and two-scale averaging.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::direct::WaveField;
use crate::envelope::{envelope_moments, EnvelopeGrid};
use crate::grid::TensorGrid;
use crate::lattice::LatticeSpec;
use crate::linalg::RVec;
use crate::particle_field::LeadingState;
use crate::{Error, Result};

/// Quadrature of `f(x) g(x/δ + s/δ²)` together with the homogenized value `(∫f)·mean(g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoScaleAverage {
    pub value: f64,
    pub homogenized: f64,
}

impl TwoScaleAverage {
    pub fn error(&self) -> f64 {
        (self.value - self.homogenized).abs()
    }
}

/// Cell average of a lattice-periodic function by the uniform rule in direct coordinates.
pub fn cell_mean(lattice: &LatticeSpec, g: &dyn Fn(&[f64]) -> f64, points: usize) -> f64 {
    let d = lattice.dim();
    let total = points.pow(d as u32);
    let gen = lattice.direct_generators();
    let mut sum = 0.0;
    let mut z = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        z.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..d {
            let u = (rem % points) as f64 / points as f64;
            rem /= points;
            for (i, zi) in z.iter_mut().enumerate() {
                *zi += gen[(i, k)] * u;
            }
        }
        sum += g(&z);
    }
    sum / total as f64
}

/// Two-scale quadrature on `grid` of real samples `f` against the periodic `g`.
pub fn two_scale_average(
    f: &[f64],
    grid: &TensorGrid,
    g: &dyn Fn(&[f64]) -> f64,
    lattice: &LatticeSpec,
    delta: f64,
    s: &[f64],
) -> Result<TwoScaleAverage> {
    let d = grid.dim();
    if f.len() != grid.len() || lattice.dim() != d || s.len() != d {
        return Err(Error::GridMismatch);
    }
    if !(delta > 0.0) {
        return Err(Error::invalid("delta must be positive"));
    }
    let mut points_per_period = f64::INFINITY;
    for axis in 0..d {
        let period = lattice.direct_generators().column(axis).norm();
        points_per_period = points_per_period.min(period * delta / grid.spacing(axis));
    }
    if points_per_period < 8.0 {
        return Err(Error::ResolutionTooLow { points_per_period, box_in_widths: f64::NAN, frequency_ratio: f64::NAN });
    }
    let dv = grid.cell_volume();
    let mut value = 0.0;
    let mut integral = 0.0;
    let mut z = vec![0.0; d];
    grid.for_each_point(|i, x| {
        for k in 0..d {
            z[k] = x[k] / delta + s[k] / (delta * delta);
        }
        value += f[i] * g(&z) * dv;
        integral += f[i] * dv;
    });
    Ok(TwoScaleAverage { value, homogenized: integral * cell_mean(lattice, g, 64) })
}

/// `(𝒬, 𝒫, 𝒩)` of the asymptotic solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub position: RVec,
    pub momentum: RVec,
    pub norm: f64,
}

/// `𝒩 = ‖a‖² + √ε(⟨b,a⟩+⟨a,b⟩)`,
/// `𝒬 = q + √ε⟨a,ya⟩/𝒩 + ε(⟨b,ya⟩+⟨a,yb⟩)/𝒩 + ε𝒜(p)`, and `𝒫` likewise with `−i∇` in place of
/// `y` and no connection term. `connection` is `𝒜` at `state.p` in the gauge of `env`.
pub fn observables_from_ansatz(state: &LeadingState, env: &EnvelopeGrid, connection: &RVec, epsilon: f64) -> Observables {
    let m = envelope_moments(env);
    let root = epsilon.sqrt();
    let norm = m.norm_sq + root * m.pairing;
    let position = &state.q + (&m.position * root + &m.mixed_position * epsilon) / norm + connection * epsilon;
    let momentum = &state.p + (&m.momentum * root + &m.mixed_momentum * epsilon) / norm;
    Observables { position, momentum, norm }
}

/// `∫x|ψ|² / ‖ψ‖²`.
pub fn position_from_field(field: &WaveField) -> Result<RVec> {
    field.check_boundary()?;
    let grid = &field.grid;
    let d = grid.dim();
    let mut first = vec![0.0; d];
    let mut mass = 0.0;
    grid.for_each_point(|i, x| {
        let rho = field.psi[i].norm_sqr();
        mass += rho;
        for k in 0..d {
            first[k] += rho * x[k];
        }
    });
    Ok(RVec::from_iterator(d, first.into_iter().map(|v| v / mass)))
}

/// `⟨ψ, −iε∇ψ⟩ / ‖ψ‖²`.
pub fn momentum_from_field(field: &WaveField) -> Result<RVec> {
    field.check_boundary()?;
    let grid = &field.grid;
    let d = grid.dim();
    let mass = grid.inner(&field.psi, &field.psi).re;
    let out: Vec<f64> = (0..d)
        .map(|k| {
            let dpsi = grid.momentum(&field.psi, k);
            field.epsilon * grid.inner(&field.psi, &dpsi).re / mass
        })
        .collect();
    Ok(RVec::from_vec(out))
}

/// `‖ψ‖²`.
pub fn norm_from_field(field: &WaveField) -> f64 {
    field.grid.inner(&field.psi, &field.psi).re
}
