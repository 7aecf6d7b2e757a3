//! Envelope dynamics in the slow variable `y`: Gaussian closed form, grid split-step evolution of
//! `a` and of the corrector `b`, Σˡ norms and moments.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::grid::TensorGrid;
use crate::linalg::{cnorm, complex_det, complex_inverse, to_complex, CMat, RMat, RVec, Tensor};
use crate::ode::step_count;
use crate::{Error, Result, C64};

pub const SYMPLECTIC_TOLERANCE: f64 = 1e-8;
pub const SYMPLECTIC_DRIFT_TOLERANCE: f64 = 1e-6;
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

/// Coefficients of the envelope equations at one instant.
///
/// `freq_linear` is `∇_p[∇W·𝒜]` and `pos_linear` is `∇_q[∇W·𝒜]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCoefficients {
    pub hess_e: RMat,
    pub hess_w: RMat,
    pub third_e: Tensor,
    pub third_w: Tensor,
    pub freq_linear: RVec,
    pub pos_linear: RVec,
}

impl EnvelopeCoefficients {
    /// Oscillator coefficients with a vanishing source.
    pub fn quadratic(hess_e: RMat, hess_w: RMat) -> Self {
        let d = hess_e.nrows();
        EnvelopeCoefficients {
            hess_e,
            hess_w,
            third_e: Tensor::zeros(d, 3),
            third_w: Tensor::zeros(d, 3),
            freq_linear: RVec::zeros(d),
            pos_linear: RVec::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.hess_e.nrows()
    }

    pub fn has_source(&self) -> bool {
        self.third_e.max_abs() > 0.0
            || self.third_w.max_abs() > 0.0
            || self.freq_linear.amax() > 0.0
            || self.pos_linear.amax() > 0.0
    }

    /// Largest coefficient magnitude, the `κ` of the Σˡ growth bound.
    pub fn magnitude(&self) -> f64 {
        self.hess_e.amax().max(self.hess_w.amax())
    }
}

/// Gaussian envelope `N [det A]^{−1/2} exp(½ i y·BA⁻¹y)` with a continuously tracked square root.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEnvelope {
    n: C64,
    a: CMat,
    b: CMat,
    det: C64,
    det_sqrt: C64,
}

/// Residuals `‖AᵀB − BᵀA‖` and `‖ĀᵀB − B̄ᵀA − 2iI‖` (Frobenius).
pub fn symplectic_residuals(a: &CMat, b: &CMat) -> (f64, f64) {
    let d = a.nrows();
    let r1 = cnorm(&(a.transpose() * b - b.transpose() * a));
    let two_i = CMat::identity(d, d) * C64::new(0.0, 2.0);
    let r2 = cnorm(&(a.adjoint() * b - b.adjoint() * a - two_i));
    (r1, r2)
}

pub fn make_gaussian(n: C64, a0: CMat, b0: CMat) -> Result<GaussianEnvelope> {
    let d = a0.nrows();
    if a0.ncols() != d || b0.nrows() != d || b0.ncols() != d || d == 0 {
        return Err(Error::invalid("A and B must be square matrices of equal size"));
    }
    if n == C64::new(0.0, 0.0) {
        return Err(Error::invalid("normalization constant must be nonzero"));
    }
    let (transpose, hermitian) = symplectic_residuals(&a0, &b0);
    if transpose > SYMPLECTIC_TOLERANCE || hermitian > SYMPLECTIC_TOLERANCE {
        return Err(Error::SymplecticViolation { transpose, hermitian });
    }
    let det = complex_det(&a0);
    Ok(GaussianEnvelope { n, a: a0, b: b0, det, det_sqrt: det.sqrt() })
}

impl GaussianEnvelope {
    /// `A = I`, `B = iI`, `N = π^{−d/4}`: the unit-norm ground state.
    pub fn ground_state(d: usize) -> Self {
        make_gaussian(
            C64::new(PI.powf(-(d as f64) / 4.0), 0.0),
            CMat::identity(d, d),
            CMat::identity(d, d) * C64::new(0.0, 1.0),
        )
        .expect("ground state is symplectic")
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn normalization(&self) -> C64 {
        self.n
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    /// Current branch of `[det A]^{1/2}`.
    pub fn det_sqrt(&self) -> C64 {
        self.det_sqrt
    }

    pub fn residuals(&self) -> (f64, f64) {
        symplectic_residuals(&self.a, &self.b)
    }

    /// `BA⁻¹`, whose imaginary part is positive definite.
    pub fn width_matrix(&self) -> CMat {
        &self.b * complex_inverse(&self.a).expect("A is invertible for symplectic pairs")
    }

    pub fn norm_sq(&self) -> f64 {
        self.n.norm_sqr() * PI.powf(self.dim() as f64 / 2.0)
    }

    /// `⟨y_β a, y_γ a⟩ = ‖a‖² ½ Re(AA*)`.
    pub fn position_second_moment(&self) -> RMat {
        (&self.a * self.a.adjoint()).map(|z| 0.5 * z.re) * self.norm_sq()
    }

    /// `⟨∂_β a, ∂_γ a⟩ = ‖a‖² ½ Re(BB*)`.
    pub fn momentum_second_moment(&self) -> RMat {
        (&self.b * self.b.adjoint()).map(|z| 0.5 * z.re) * self.norm_sq()
    }

    /// Replaces `(A, B)` and follows the square-root branch of `det A` continuously.
    pub fn update(&mut self, a: CMat, b: CMat) -> Result<()> {
        let det = complex_det(&a);
        let increment = (det / self.det).arg();
        if increment.abs() > core::f64::consts::FRAC_PI_2 {
            return Err(Error::BranchDiscontinuity { increment });
        }
        let root = det.sqrt();
        self.det_sqrt = if (root - self.det_sqrt).norm() <= (root + self.det_sqrt).norm() { root } else { -root };
        self.det = det;
        self.a = a;
        self.b = b;
        Ok(())
    }

    /// Value at one point.
    pub fn value(&self, y: &[f64]) -> C64 {
        let m = self.width_matrix();
        self.value_with(&m, y)
    }

    fn value_with(&self, m: &CMat, y: &[f64]) -> C64 {
        let d = y.len();
        let mut q = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                q += m[(i, j)] * y[i] * y[j];
            }
        }
        self.n / self.det_sqrt * (C64::new(0.0, 0.5) * q).exp()
    }
}

pub fn gaussian_sample(env: &GaussianEnvelope, grid: &TensorGrid) -> Vec<C64> {
    let m = env.width_matrix();
    grid.sample(|y| env.value_with(&m, y))
}

fn flatten(a: &CMat, b: &CMat) -> Vec<f64> {
    a.iter().chain(b.iter()).flat_map(|z| [z.re, z.im]).collect()
}

fn unflatten(d: usize, y: &[f64]) -> (CMat, CMat) {
    let m = d * d;
    let a = CMat::from_fn(d, d, |i, j| C64::new(y[2 * (j * d + i)], y[2 * (j * d + i) + 1]));
    let b = CMat::from_fn(d, d, |i, j| C64::new(y[2 * (m + j * d + i)], y[2 * (m + j * d + i) + 1]));
    (a, b)
}

/// Right-hand side `Ȧ = D²E·B`, `Ḃ = −D²W·A` on the flattened pair.
fn ab_rhs(c: &EnvelopeCoefficients, y: &[f64], dy: &mut [f64]) {
    let d = c.dim();
    let (a, b) = unflatten(d, y);
    let da = to_complex(&c.hess_e) * b;
    let db = -(to_complex(&c.hess_w) * a);
    dy.copy_from_slice(&flatten(&da, &db));
}

/// RK4 step of the pair `(A, B)`; halves the step when the `det A` branch moves too fast.
pub fn gaussian_rk4_step<P>(env: &mut GaussianEnvelope, path: &P, t: f64, dt: f64) -> Result<()>
where
    P: Fn(f64) -> Result<EnvelopeCoefficients>,
{
    let d = env.dim();
    let mut y = flatten(&env.a, &env.b);
    let mut f = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        ab_rhs(&path(s)?, y, dy);
        Ok(())
    };
    crate::ode::rk4_step(&mut f, t, &mut y, dt)?;
    let (a, b) = unflatten(d, &y);
    let saved = env.clone();
    match env.update(a, b) {
        Ok(()) => Ok(()),
        Err(Error::BranchDiscontinuity { increment }) => {
            if dt < 1e-12 {
                return Err(Error::BranchDiscontinuity { increment });
            }
            *env = saved;
            gaussian_rk4_step(env, path, t, 0.5 * dt)?;
            gaussian_rk4_step(env, path, t + 0.5 * dt, 0.5 * dt)
        }
        Err(e) => Err(e),
    }
}

/// Integrates the Gaussian parameters from `t0` to `t1`.
pub fn evolve_gaussian<P>(env: &GaussianEnvelope, path: &P, t0: f64, t1: f64, dt: f64) -> Result<GaussianEnvelope>
where
    P: Fn(f64) -> Result<EnvelopeCoefficients>,
{
    let n = step_count(t0, t1, dt)?;
    let mut out = env.clone();
    if n == 0 {
        return Ok(out);
    }
    let h = (t1 - t0) / n as f64;
    for k in 0..n {
        gaussian_rk4_step(&mut out, path, t0 + k as f64 * h, h)?;
    }
    let (r1, r2) = out.residuals();
    if r1.max(r2) > SYMPLECTIC_DRIFT_TOLERANCE {
        return Err(Error::SymplecticDrift { residual: r1.max(r2) });
    }
    Ok(out)
}

/// Grid samples of the leading envelope `a` and the corrector `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeGrid {
    pub grid: TensorGrid,
    pub a: Vec<C64>,
    pub b: Vec<C64>,
    pub t: f64,
}

/// Default y-box `(L_y, N_y)` per dimension.
pub fn default_envelope_box(dim: usize) -> (f64, usize) {
    if dim == 1 {
        (40.0, 512)
    } else {
        (24.0, 128)
    }
}

impl EnvelopeGrid {
    pub fn new(grid: TensorGrid, a: Vec<C64>, b: Vec<C64>, t: f64) -> Result<Self> {
        if a.len() != grid.len() || b.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(EnvelopeGrid { grid, a, b, t })
    }

    /// Samples a Gaussian `a` with `b = 0`.
    pub fn from_gaussian(env: &GaussianEnvelope, grid: TensorGrid, t: f64) -> Self {
        let a = gaussian_sample(env, &grid);
        let b = vec![C64::new(0.0, 0.0); grid.len()];
        EnvelopeGrid { grid, a, b, t }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Errors when either envelope is not negligible on the outer shell.
    pub fn check_boundary(&self) -> Result<()> {
        let edge = self.grid.shell_max(&self.a).max(self.grid.shell_max(&self.b));
        if edge >= BOUNDARY_TOLERANCE {
            return Err(Error::DomainTooSmall { edge });
        }
        Ok(())
    }

    /// One Strang step with coefficients frozen at the step midpoint:
    /// half potential, half kinetic, source kick `b −= i·dt·𝓘a`, half kinetic, half potential.
    pub fn split_step(&mut self, c: &EnvelopeCoefficients, dt: f64, with_b: bool) {
        let pot = potential_phase(&self.grid, &c.hess_w, 0.5 * dt);
        let kin = kinetic_phase(&self.grid, &c.hess_e, 0.5 * dt);
        let source = with_b && c.has_source();
        let fields: &mut [&mut Vec<C64>] = if with_b { &mut [&mut self.a, &mut self.b] } else { &mut [&mut self.a] };
        for f in fields.iter_mut() {
            apply_pointwise(f, &pot);
            apply_fourier(&self.grid, f, &kin);
        }
        if source {
            let ia = apply_source(&self.grid, c, &self.a);
            for (bv, s) in self.b.iter_mut().zip(&ia) {
                *bv -= C64::new(0.0, dt) * s;
            }
        }
        let fields: &mut [&mut Vec<C64>] = if with_b { &mut [&mut self.a, &mut self.b] } else { &mut [&mut self.a] };
        for f in fields.iter_mut() {
            apply_fourier(&self.grid, f, &kin);
            apply_pointwise(f, &pot);
        }
        self.t += dt;
    }
}

fn potential_phase(grid: &TensorGrid, hess_w: &RMat, tau: f64) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); grid.len()];
    grid.for_each_point(|i, y| {
        let v = 0.5 * quadratic_form(hess_w, y);
        out[i] = C64::from_polar(1.0, -tau * v);
    });
    out
}

fn kinetic_phase(grid: &TensorGrid, hess_e: &RMat, tau: f64) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); grid.len()];
    grid.for_each_mode(|i, xi| {
        let v = 0.5 * quadratic_form(hess_e, xi);
        out[i] = C64::from_polar(1.0, -tau * v);
    });
    out
}

fn quadratic_form(m: &RMat, v: &[f64]) -> f64 {
    let d = v.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += m[(i, j)] * v[i] * v[j];
        }
    }
    s
}

fn apply_pointwise(f: &mut [C64], m: &[C64]) {
    for (x, y) in f.iter_mut().zip(m) {
        *x *= y;
    }
}

fn apply_fourier(grid: &TensorGrid, f: &mut [C64], m: &[C64]) {
    grid.forward(f);
    apply_pointwise(f, m);
    grid.inverse(f);
}

/// `𝓘a = (⅙D³E[ξ,ξ,ξ] + k·ξ)^ a + (⅙D³W[y,y,y] + m·y) a` with `ξ = −i∇_y`.
pub fn apply_source(grid: &TensorGrid, c: &EnvelopeCoefficients, a: &[C64]) -> Vec<C64> {
    let mut freq = a.to_vec();
    grid.forward(&mut freq);
    grid.for_each_mode(|i, xi| {
        let s = c.third_e.contract_all(xi) / 6.0 + c.freq_linear.iter().zip(xi).map(|(k, x)| k * x).sum::<f64>();
        freq[i] *= s;
    });
    grid.inverse(&mut freq);
    let mut out = freq;
    grid.for_each_point(|i, y| {
        let s = c.third_w.contract_all(y) / 6.0 + c.pos_linear.iter().zip(y).map(|(m, x)| m * x).sum::<f64>();
        out[i] += a[i] * s;
    });
    out
}

/// Relative change when one step is replaced by two half steps.
pub fn step_discrepancy<P>(env: &EnvelopeGrid, path: &P, dt: f64, with_b: bool) -> Result<f64>
where
    P: Fn(f64) -> Result<EnvelopeCoefficients>,
{
    let t = env.t;
    let mut one = env.clone();
    one.split_step(&path(t + 0.5 * dt)?, dt, with_b);
    let mut two = env.clone();
    two.split_step(&path(t + 0.25 * dt)?, 0.5 * dt, with_b);
    two.split_step(&path(t + 0.75 * dt)?, 0.5 * dt, with_b);
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (x, y) in one.a.iter().zip(&two.a).chain(one.b.iter().zip(&two.b)) {
        diff += (x - y).norm_sqr();
        scale += y.norm_sqr();
    }
    Ok((diff / scale.max(f64::MIN_POSITIVE)).sqrt())
}

/// Tolerance of the first-step refinement check.
pub const STEP_TOLERANCE: f64 = 1e-6;

fn evolve_grid<P>(env: &EnvelopeGrid, path: &P, t0: f64, t1: f64, dt: f64, with_b: bool) -> Result<EnvelopeGrid>
where
    P: Fn(f64) -> Result<EnvelopeCoefficients>,
{
    env.check_boundary()?;
    let n = step_count(t0, t1, dt)?;
    let mut out = env.clone();
    out.t = t0;
    if n == 0 {
        return Ok(out);
    }
    let h = (t1 - t0) / n as f64;
    let discrepancy = step_discrepancy(&out, path, h, with_b)?;
    if discrepancy > STEP_TOLERANCE {
        return Err(Error::StepTooLarge { discrepancy });
    }
    for k in 0..n {
        let t = t0 + k as f64 * h;
        out.split_step(&path(t + 0.5 * h)?, h, with_b);
        out.t = t + h;
    }
    out.check_boundary()?;
    Ok(out)
}

/// Evolves `a` only (the corrector samples are left untouched).
pub fn evolve_a_grid<P>(env: &EnvelopeGrid, path: &P, t0: f64, t1: f64, dt: f64) -> Result<EnvelopeGrid>
where
    P: Fn(f64) -> Result<EnvelopeCoefficients>,
{
    evolve_grid(env, path, t0, t1, dt, false)
}

/// Evolves `a` and `b` together, `b` driven by the source `𝓘(t)a`.
pub fn evolve_b_grid<P>(env: &EnvelopeGrid, path: &P, t0: f64, t1: f64, dt: f64) -> Result<EnvelopeGrid>
where
    P: Fn(f64) -> Result<EnvelopeCoefficients>,
{
    evolve_grid(env, path, t0, t1, dt, true)
}

/// Multi-indices of length `d` with total degree at most `l`.
fn multi_indices(d: usize, l: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 0..=l {
        for mut rest in multi_indices(d - 1, l - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `Σ_{|α|+|β|≤l} ‖y^α (−i∂)^β f‖` with spectral derivatives.
pub fn sigma_norm(samples: &[C64], grid: &TensorGrid, l: usize) -> f64 {
    let d = grid.dim();
    let mut total = 0.0;
    for beta in multi_indices(d, l) {
        let order: usize = beta.iter().sum();
        let g = grid.fourier_multiply(samples, |xi| {
            C64::new(beta.iter().zip(xi).map(|(&k, &x)| x.powi(k as i32)).product(), 0.0)
        });
        for alpha in multi_indices(d, l - order) {
            let mut h = g.clone();
            grid.for_each_point(|i, y| {
                let w: f64 = alpha.iter().zip(y).map(|(&k, &x)| x.powi(k as i32)).product();
                h[i] *= w;
            });
            total += grid.norm(&h);
        }
    }
    total
}

/// Quadrature moments of an envelope pair (not divided by the norm).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeMoments {
    pub norm_sq: f64,
    /// `⟨a, y a⟩`.
    pub position: RVec,
    /// `⟨a, −i∇a⟩` (real part; the imaginary residue is reported separately).
    pub momentum: RVec,
    pub momentum_imag_residue: f64,
    /// `⟨y_β a, y_γ a⟩`.
    pub position_second: RMat,
    /// `⟨∂_β a, ∂_γ a⟩` (real part).
    pub momentum_second: RMat,
    /// `⟨b, y a⟩ + ⟨a, y b⟩`.
    pub mixed_position: RVec,
    /// `⟨b, −i∇a⟩ + ⟨a, −i∇b⟩`.
    pub mixed_momentum: RVec,
    /// `⟨b, a⟩ + ⟨a, b⟩`.
    pub pairing: f64,
}

pub fn envelope_moments(env: &EnvelopeGrid) -> EnvelopeMoments {
    let grid = &env.grid;
    let d = grid.dim();
    let ya: Vec<Vec<C64>> = (0..d).map(|k| multiply_coordinate(grid, &env.a, k)).collect();
    let yb: Vec<Vec<C64>> = (0..d).map(|k| multiply_coordinate(grid, &env.b, k)).collect();
    let pa: Vec<Vec<C64>> = (0..d).map(|k| grid.momentum(&env.a, k)).collect();
    let pb: Vec<Vec<C64>> = (0..d).map(|k| grid.momentum(&env.b, k)).collect();
    let mut momentum_imag_residue: f64 = 0.0;
    let momentum = RVec::from_fn(d, |k, _| {
        let z = grid.inner(&env.a, &pa[k]);
        momentum_imag_residue = momentum_imag_residue.max(z.im.abs());
        z.re
    });
    EnvelopeMoments {
        norm_sq: grid.inner(&env.a, &env.a).re,
        position: RVec::from_fn(d, |k, _| grid.inner(&env.a, &ya[k]).re),
        momentum,
        momentum_imag_residue,
        position_second: RMat::from_fn(d, d, |i, j| grid.inner(&ya[i], &ya[j]).re),
        momentum_second: RMat::from_fn(d, d, |i, j| grid.inner(&pa[i], &pa[j]).re),
        mixed_position: RVec::from_fn(d, |k, _| (grid.inner(&env.b, &ya[k]) + grid.inner(&env.a, &yb[k])).re),
        mixed_momentum: RVec::from_fn(d, |k, _| (grid.inner(&env.b, &pa[k]) + grid.inner(&env.a, &pb[k])).re),
        pairing: 2.0 * grid.inner(&env.a, &env.b).re,
    }
}

/// `y_k f`.
pub fn multiply_coordinate(grid: &TensorGrid, f: &[C64], axis: usize) -> Vec<C64> {
    let mut out = f.to_vec();
    grid.for_each_point(|i, y| out[i] *= y[axis]);
    out
}
