//! Split-step solver for `iε∂ψ = −½ε²Δψ + V(x/ε)ψ + W(x)ψ`, Bloch-wavepacket initial data and the
//! asymptotic reconstruction.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::bands::{BandPoint, BlochBandModel, GaugeSpec};
use crate::envelope::{envelope_moments, EnvelopeGrid};
use crate::grid::TensorGrid;
use crate::lattice::PeriodicPotential;
use crate::ode::step_count;
use crate::particle_field::LeadingState;
use crate::potential::ExternalPotential;
use crate::{Error, Result, C64};

/// Fraction of the box treated as the boundary band.
pub const EDGE_FRACTION: f64 = 0.05;
pub const EDGE_TOLERANCE: f64 = 1e-8;
pub const MIN_POINTS_PER_PERIOD: f64 = 8.0;
pub const MIN_BOX_IN_WIDTHS: f64 = 12.0;

/// Samples of `ψ` on a periodic box.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: TensorGrid,
    pub psi: Vec<C64>,
    pub t: f64,
    pub epsilon: f64,
    /// Gauge of the Bloch factors used to build the field, if any.
    pub gauge: Option<GaugeSpec>,
}

impl WaveField {
    pub fn new(grid: TensorGrid, psi: Vec<C64>, t: f64, epsilon: f64) -> Result<Self> {
        if psi.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if !(epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        Ok(WaveField { grid, psi, t, epsilon, gauge: None })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn norm(&self) -> f64 {
        self.grid.norm(&self.psi)
    }

    pub fn edge_max(&self) -> f64 {
        self.grid.edge_band_max(&self.psi, EDGE_FRACTION)
    }

    pub fn check_boundary(&self) -> Result<()> {
        let edge = self.edge_max();
        if edge >= EDGE_TOLERANCE {
            return Err(Error::DomainTooSmall { edge });
        }
        Ok(())
    }
}

/// Checks that every box axis is an integer number of scaled lattice periods and that `W` is
/// either box-periodic or of a kind that is handled by the boundary guard.
pub fn check_commensurate(grid: &TensorGrid, v: &PeriodicPotential, w: &ExternalPotential, epsilon: f64) -> Result<()> {
    let d = grid.dim();
    if v.lattice().dim() != d || w.dim() != d {
        return Err(Error::invalid("potentials and grid differ in dimension"));
    }
    for axis in 0..d {
        let mut edge = vec![0.0; d];
        edge[axis] = grid.lengths()[axis] / epsilon;
        let coords = v.lattice().direct_coordinates(&edge);
        for &c in coords.iter() {
            if (c - c.round()).abs() > 1e-8 * c.abs().max(1.0) {
                return Err(Error::CommensurabilityError { axis, ratio: c });
            }
        }
    }
    if let ExternalPotential::CosineSum { terms, .. } = w {
        for t in terms {
            for (axis, (k, l)) in t.wavevector.iter().zip(grid.lengths()).enumerate() {
                let cycles = k * l / (2.0 * core::f64::consts::PI);
                if (cycles - cycles.round()).abs() > 1e-9 {
                    return Err(Error::CommensurabilityError { axis, ratio: cycles });
                }
            }
        }
    }
    Ok(())
}

/// The three resolution measures: points per scaled lattice period (smallest over axes), box
/// size in envelope standard deviations, and the highest carried wavenumber over the Nyquist limit.
pub fn resolution_report(
    model: &BlochBandModel,
    point: &BandPoint,
    env: &EnvelopeGrid,
    grid: &TensorGrid,
    epsilon: f64,
) -> (f64, f64, f64) {
    let d = grid.dim();
    let lattice = model.potential().lattice();
    let mut points_per_period = f64::INFINITY;
    for axis in 0..d {
        let period = lattice.direct_generators().column(axis).norm();
        points_per_period = points_per_period.min(period * epsilon / grid.spacing(axis));
    }
    let mom = envelope_moments(env);
    let norm = mom.norm_sq.max(f64::MIN_POSITIVE);
    let mut box_in_widths = f64::INFINITY;
    let mut frequency_ratio: f64 = 0.0;
    let scale = point.chi.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for axis in 0..d {
        let mean = mom.position[axis] / norm;
        let var = (mom.position_second[(axis, axis)] / norm - mean * mean).max(0.0);
        let sigma_x = epsilon.sqrt() * var.sqrt();
        box_in_widths = box_in_widths.min(grid.lengths()[axis] / sigma_x.max(f64::MIN_POSITIVE));
        let mut bloch: f64 = 0.0;
        for (i, c) in point.chi.iter().enumerate() {
            let carried = c.norm() > 1e-12 * scale
                || (0..d).any(|k| point.grad_chi[(i, k)].norm() > 1e-12 * scale.max(1.0));
            if carried {
                bloch = bloch.max((point.p[axis] + model.truncation().g(i)[axis]).abs());
            }
        }
        let env_freq = env.grid.frequencies(axis).iter().fold(0.0, |m: f64, x| m.max(x.abs()));
        let sigma_xi = (mom.momentum_second[(axis, axis)] / norm).sqrt();
        let carried = bloch / epsilon + (8.0 * sigma_xi).min(env_freq) / epsilon.sqrt();
        let nyquist = core::f64::consts::PI / grid.spacing(axis);
        frequency_ratio = frequency_ratio.max(carried / nyquist);
    }
    (points_per_period, box_in_widths, frequency_ratio)
}

fn check_resolution(report: (f64, f64, f64)) -> Result<()> {
    let (points_per_period, box_in_widths, frequency_ratio) = report;
    if points_per_period < MIN_POINTS_PER_PERIOD || box_in_widths < MIN_BOX_IN_WIDTHS || frequency_ratio >= 1.0 {
        return Err(Error::ResolutionTooLow { points_per_period, box_in_widths, frequency_ratio });
    }
    Ok(())
}

/// `χ(x/ε)` and `∇_pχ(x/ε)` at every grid point, summed directly from the Fourier coefficients.
pub fn bloch_samples(model: &BlochBandModel, point: &BandPoint, grid: &TensorGrid, epsilon: f64) -> (Vec<C64>, Vec<Vec<C64>>) {
    let d = grid.dim();
    let trunc = model.truncation();
    let mut chi = vec![C64::new(0.0, 0.0); grid.len()];
    let mut grad = vec![vec![C64::new(0.0, 0.0); grid.len()]; d];
    grid.for_each_point(|i, x| {
        let mut s = C64::new(0.0, 0.0);
        let mut g = [C64::new(0.0, 0.0); 3];
        for k in 0..trunc.len() {
            let th: f64 = trunc.g(k).iter().zip(x).map(|(gk, xk)| gk * xk).sum::<f64>() / epsilon;
            let e = C64::new(th.cos(), th.sin());
            s += point.chi[k] * e;
            for (a, ga) in g.iter_mut().enumerate().take(d) {
                *ga += point.grad_chi[(k, a)] * e;
            }
        }
        chi[i] = s;
        for a in 0..d {
            grad[a][i] = g[a];
        }
    });
    (chi, grad)
}

/// Builds `ε^{−d/4} e^{iS/ε} e^{ip·(x−q)/ε} e^{iφ_B} [a χ + √ε((−i∇a)·∇_pχ + b χ)]` on `grid`,
/// with the bracket dropped when `leading_only`.
pub fn synthesize(
    model: &BlochBandModel,
    point: &BandPoint,
    state: &LeadingState,
    env: &EnvelopeGrid,
    grid: &TensorGrid,
    epsilon: f64,
    leading_only: bool,
) -> Result<WaveField> {
    let d = grid.dim();
    if env.dim() != d || state.q.len() != d || model.truncation().dim() != d {
        return Err(Error::invalid("dimensions of the wavepacket data disagree"));
    }
    check_resolution(resolution_report(model, point, env, grid, epsilon))?;
    let root = epsilon.sqrt();
    let targets: Vec<Vec<f64>> =
        (0..d).map(|k| grid.coordinates(k).iter().map(|x| (x - state.q[k]) / root).collect()).collect();
    let eg = &env.grid;
    let mut spec_a = env.a.clone();
    eg.forward(&mut spec_a);
    let a = eg.resample_spectrum(&spec_a, &targets);
    let (chi, grad_chi) = bloch_samples(model, point, grid, epsilon);
    let mut bracket = vec![C64::new(0.0, 0.0); grid.len()];
    if !leading_only {
        let mut spec_b = env.b.clone();
        eg.forward(&mut spec_b);
        let b = eg.resample_spectrum(&spec_b, &targets);
        for (i, v) in bracket.iter_mut().enumerate() {
            *v = b[i] * chi[i];
        }
        for axis in 0..d {
            let mut spec_p = spec_a.clone();
            eg.for_each_mode(|i, xi| spec_p[i] *= xi[axis]);
            let pa = eg.resample_spectrum(&spec_p, &targets);
            for (i, v) in bracket.iter_mut().enumerate() {
                *v += pa[i] * grad_chi[axis][i];
            }
        }
    }
    let amplitude = epsilon.powf(-(d as f64) / 4.0);
    let global = state.action / epsilon + state.phi_b;
    let mut psi = vec![C64::new(0.0, 0.0); grid.len()];
    grid.for_each_point(|i, x| {
        let th: f64 = global + (0..d).map(|k| state.p[k] * (x[k] - state.q[k])).sum::<f64>() / epsilon;
        let phase = C64::from_polar(amplitude, th);
        psi[i] = phase * (a[i] * chi[i] + bracket[i] * root);
    });
    Ok(WaveField { grid: grid.clone(), psi, t: state.t, epsilon, gauge: Some(model.gauge_spec()) })
}

/// Bloch-wavepacket initial data at `(q0, p0)` from the envelope pair at time zero.
pub fn assemble_initial_data(
    model: &BlochBandModel,
    point: &BandPoint,
    q0: &[f64],
    env: &EnvelopeGrid,
    grid: &TensorGrid,
    epsilon: f64,
    leading_only: bool,
) -> Result<WaveField> {
    let state = LeadingState::new(q0, point.p.as_slice());
    synthesize(model, point, &state, env, grid, epsilon, leading_only)
}

/// Asymptotic solution at the time of `state`; `point` must be the band data at `state.p`.
pub fn assemble_asymptotic(
    model: &BlochBandModel,
    point: &BandPoint,
    state: &LeadingState,
    env: &EnvelopeGrid,
    grid: &TensorGrid,
    epsilon: f64,
    leading_only: bool,
) -> Result<WaveField> {
    if (&point.p - &state.p).amax() > 1e-12 * state.p.amax().max(1.0) {
        return Err(Error::invalid("band data and trajectory momentum differ"));
    }
    synthesize(model, point, state, env, grid, epsilon, leading_only)
}

/// Strang split-step propagation of `field` to `t1` with steps no larger than `dt`.
pub fn propagate(field: &WaveField, v: &PeriodicPotential, w: &ExternalPotential, t1: f64, dt: f64) -> Result<WaveField> {
    propagate_impl(field, v, w, t1, dt, true, |_| Ok(()))
}

/// As [`propagate`], calling `observe` after every step.
pub fn propagate_with<F>(
    field: &WaveField,
    v: &PeriodicPotential,
    w: &ExternalPotential,
    t1: f64,
    dt: f64,
    observe: F,
) -> Result<WaveField>
where
    F: FnMut(&WaveField) -> Result<()>,
{
    propagate_impl(field, v, w, t1, dt, true, observe)
}

/// As [`propagate`] without the boundary guard, for fields that are periodic on the box.
pub fn propagate_periodic(
    field: &WaveField,
    v: &PeriodicPotential,
    w: &ExternalPotential,
    t1: f64,
    dt: f64,
) -> Result<WaveField> {
    if !w.is_box_periodic(field.grid.lengths()) {
        return Err(Error::CommensurabilityError { axis: 0, ratio: f64::NAN });
    }
    propagate_impl(field, v, w, t1, dt, false, |_| Ok(()))
}

fn propagate_impl<F>(
    field: &WaveField,
    v: &PeriodicPotential,
    w: &ExternalPotential,
    t1: f64,
    dt: f64,
    guard: bool,
    mut observe: F,
) -> Result<WaveField>
where
    F: FnMut(&WaveField) -> Result<()>,
{
    let eps = field.epsilon;
    let grid = &field.grid;
    check_commensurate(grid, v, w, eps)?;
    if guard {
        field.check_boundary()?;
    }
    let n = step_count(field.t, t1, dt)?;
    let mut out = field.clone();
    if n == 0 {
        return Ok(out);
    }
    let h = (t1 - field.t) / n as f64;
    let mut half_pot = vec![C64::new(0.0, 0.0); grid.len()];
    grid.for_each_point(|i, x| {
        let z: Vec<f64> = x.iter().map(|xk| xk / eps).collect();
        let energy = v.evaluate(&z) + w.value(x);
        half_pot[i] = C64::from_polar(1.0, -energy * h / (2.0 * eps));
    });
    let mut kin = vec![C64::new(0.0, 0.0); grid.len()];
    grid.for_each_mode(|i, xi| {
        let k2: f64 = xi.iter().map(|k| k * k).sum();
        kin[i] = C64::from_polar(1.0, -eps * k2 * h / 2.0);
    });
    for step in 0..n {
        for (p, m) in out.psi.iter_mut().zip(&half_pot) {
            *p *= m;
        }
        grid.forward(&mut out.psi);
        for (p, m) in out.psi.iter_mut().zip(&kin) {
            *p *= m;
        }
        grid.inverse(&mut out.psi);
        for (p, m) in out.psi.iter_mut().zip(&half_pot) {
            *p *= m;
        }
        out.t = field.t + (step + 1) as f64 * h;
        if guard && (step % 16 == 15 || step + 1 == n) {
            out.check_boundary()?;
        }
        observe(&out)?;
    }
    Ok(out)
}

/// `‖ψ − ψ̃‖` by grid quadrature.
pub fn corrector_norm(psi: &WaveField, psi_tilde: &WaveField) -> Result<f64> {
    if psi.grid != psi_tilde.grid || (psi.t - psi_tilde.t).abs() > 1e-9 * psi.t.abs().max(1.0) {
        return Err(Error::GridMismatch);
    }
    if let (Some(a), Some(b)) = (&psi.gauge, &psi_tilde.gauge) {
        if a != b {
            return Err(Error::GaugeMismatch);
        }
    }
    let diff: Vec<C64> = psi.psi.iter().zip(&psi_tilde.psi).map(|(x, y)| x - y).collect();
    Ok(psi.grid.norm(&diff))
}
