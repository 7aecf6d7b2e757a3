//! Classical band flow, action and Berry phase, and the ε-corrected particle–field system.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::bands::{BandOracle, BandPoint};
use crate::envelope::{EnvelopeCoefficients, EnvelopeGrid, GaussianEnvelope};
use crate::linalg::{Antisymmetric, CMat, RMat, RVec};
use crate::ode::{rk4_step, step_count};
use crate::potential::ExternalPotential;
use crate::{Error, Result, C64};

/// Band, external potential and scale parameter shared by every flow in this module.
#[derive(Debug, Clone, Copy)]
pub struct Dynamics<'a, B: BandOracle + ?Sized> {
    pub band: &'a B,
    pub w: &'a ExternalPotential,
    pub epsilon: f64,
}

/// Point on the leading-order trajectory with its action and Berry phase.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadingState {
    pub t: f64,
    pub q: RVec,
    pub p: RVec,
    pub action: f64,
    pub phi_b: f64,
}

impl LeadingState {
    pub fn new(q: &[f64], p: &[f64]) -> Self {
        LeadingState {
            t: 0.0,
            q: RVec::from_column_slice(q),
            p: RVec::from_column_slice(p),
            action: 0.0,
            phi_b: 0.0,
        }
    }

    fn pack(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.q.iter().chain(self.p.iter()).copied().collect();
        v.push(self.action);
        v.push(self.phi_b);
        v
    }

    fn unpack(d: usize, t: f64, y: &[f64]) -> Self {
        LeadingState {
            t,
            q: RVec::from_column_slice(&y[..d]),
            p: RVec::from_column_slice(&y[d..2 * d]),
            action: y[2 * d],
            phi_b: y[2 * d + 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeadingRates {
    pub q_dot: RVec,
    pub p_dot: RVec,
    pub action_dot: f64,
    pub phi_dot: f64,
}

/// Envelope carried by the particle–field state.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvelopeState {
    Gaussian(GaussianEnvelope),
    Grid(EnvelopeGrid),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    Gaussian,
    Grid,
}

/// Leading trajectory, corrected observables `(𝒬, 𝒫)`, canonical `𝒬ˢ` and the envelope `𝔞`
/// driven by coefficients at `(𝒬, 𝒫)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleFieldState {
    pub leading: LeadingState,
    pub big_q: RVec,
    pub big_p: RVec,
    pub qs: RVec,
    pub env: EnvelopeState,
    pub epsilon: f64,
}

impl ParticleFieldState {
    pub fn t(&self) -> f64 {
        self.leading.t
    }

    pub fn dim(&self) -> usize {
        self.big_q.len()
    }
}

/// Second moments `⟨y_β a, y_γ a⟩` and `Re⟨∂_β a, ∂_γ a⟩` of an envelope.
pub fn envelope_second_moments(env: &EnvelopeState) -> (RMat, RMat) {
    match env {
        EnvelopeState::Gaussian(g) => (g.position_second_moment(), g.momentum_second_moment()),
        EnvelopeState::Grid(g) => {
            let m = crate::envelope::envelope_moments(g);
            (m.position_second, m.momentum_second)
        }
    }
}

/// Envelope coefficients along the path at `(q, p)`: Hessians, third derivatives and the two
/// connection couplings `k_γ = Σ_α ∂_αW ∂_{p_γ}𝒜_α` and `m_γ = Σ_α ∂_{αγ}W 𝒜_α`.
pub fn envelope_coefficients(point: &BandPoint, w: &ExternalPotential, q: &[f64]) -> Result<EnvelopeCoefficients> {
    let d = q.len();
    let gw = w.gradient(q);
    let hw = w.hessian(q);
    let third_w = w.derivative(q, 3)?;
    let freq_linear = RVec::from_fn(d, |g, _| (0..d).map(|a| gw[a] * point.connection_jacobian[(g, a)]).sum());
    let pos_linear = RVec::from_fn(d, |g, _| (0..d).map(|a| hw[(a, g)] * point.connection[a]).sum());
    Ok(EnvelopeCoefficients {
        hess_e: point.hess.clone(),
        hess_w: hw,
        third_e: point.third.clone(),
        third_w,
        freq_linear,
        pos_linear,
    })
}

/// Anomalous velocity `v_α = −Ṗ_β ℱ_{αβ}`; in three dimensions it is checked against
/// `−Ṗ × Ω` with `Ω = (ℱ₂₃, ℱ₃₁, ℱ₁₂)`.
pub fn anomalous_velocity(p_dot: &RVec, curvature: &Antisymmetric) -> Result<RVec> {
    let d = p_dot.len();
    if curvature.dim() != d {
        return Err(Error::invalid("curvature and momentum rate differ in dimension"));
    }
    let v = RVec::from_fn(d, |a, _| -(0..d).map(|b| p_dot[b] * curvature.get(a, b)).sum::<f64>());
    if d == 3 {
        let omega = RVec::from_vec(vec![curvature.get(1, 2), curvature.get(2, 0), curvature.get(0, 1)]);
        let cross = -anomalous_velocity_cross(p_dot, &omega);
        let scale = p_dot.amax() * omega.amax();
        if (&cross - &v).amax() > 1e-12 * scale.max(1.0) {
            return Err(Error::invalid("index and cross-product anomalous velocities disagree"));
        }
    }
    Ok(v)
}

/// `Ṗ × Ω` in three dimensions.
pub fn anomalous_velocity_cross(p_dot: &RVec, omega: &RVec) -> RVec {
    RVec::from_vec(vec![
        p_dot[1] * omega[2] - p_dot[2] * omega[1],
        p_dot[2] * omega[0] - p_dot[0] * omega[2],
        p_dot[0] * omega[1] - p_dot[1] * omega[0],
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedRates {
    pub q_dot: RVec,
    pub p_dot: RVec,
}

/// Components of the extended Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianReport {
    pub value: f64,
    pub band: f64,
    pub external: f64,
    pub berry_coupling: f64,
    pub kinetic_envelope: f64,
    pub potential_envelope: f64,
}

impl<'a, B: BandOracle + ?Sized> Dynamics<'a, B> {
    pub fn new(band: &'a B, w: &'a ExternalPotential, epsilon: f64) -> Self {
        Dynamics { band, w, epsilon }
    }

    fn first_order(&self, p: &[f64]) -> Result<BandPoint> {
        self.band.first_order(p)
    }

    /// `q̇ = ∇E(p)`, `ṗ = −∇W(q)`, `Ṡ = p·∇E − E − W`, `φ̇_B = ṗ·𝒜(p)`.
    pub fn rhs_leading(&self, q: &[f64], p: &[f64]) -> Result<LeadingRates> {
        let pt = self.first_order(p)?;
        Ok(self.leading_from(&pt, q, p))
    }

    fn leading_from(&self, pt: &BandPoint, q: &[f64], p: &[f64]) -> LeadingRates {
        let p_dot = -self.w.gradient(q);
        let pv = RVec::from_column_slice(p);
        LeadingRates {
            action_dot: pv.dot(&pt.grad) - pt.energy - self.w.value(q),
            phi_dot: p_dot.dot(&pt.connection),
            q_dot: pt.grad.clone(),
            p_dot,
        }
    }

    /// Corrected rates given envelope second moments `m_pos = ⟨ya, ya⟩`, `m_mom = Re⟨∇a, ∇a⟩`.
    pub fn rhs_corrected(&self, big_q: &[f64], big_p: &[f64], m_pos: &RMat, m_mom: &RMat) -> Result<CorrectedRates> {
        let eps = self.epsilon;
        let pt = if eps == 0.0 { self.first_order(big_p)? } else { self.band.point(big_p)? };
        Ok(self.corrected_from(&pt, big_q, m_pos, m_mom))
    }

    fn corrected_from(&self, pt: &BandPoint, big_q: &[f64], m_pos: &RMat, m_mom: &RMat) -> CorrectedRates {
        let eps = self.epsilon;
        let mut p_dot = -self.w.gradient(big_q);
        let mut q_dot = pt.grad.clone();
        if eps != 0.0 {
            let third_w = self.w.third(big_q);
            p_dot -= third_w.contract_matrix(m_pos) * (0.5 * eps);
            let anomalous = anomalous_velocity(&p_dot, &pt.curvature).expect("dimensions agree");
            q_dot += (anomalous + pt.third.contract_matrix(m_mom) * 0.5) * eps;
        }
        CorrectedRates { q_dot, p_dot }
    }

    /// Requires an envelope; used by callers that only hold a state.
    pub fn rhs_corrected_state(&self, state: &ParticleFieldState) -> Result<CorrectedRates> {
        let (m_pos, m_mom) = envelope_second_moments(&state.env);
        self.rhs_corrected(state.big_q.as_slice(), state.big_p.as_slice(), &m_pos, &m_mom)
    }

    /// `(𝒬ˢ, 𝒫ˢ) = (𝒬 − ε𝒜(𝒫), 𝒫)`.
    pub fn canonical_change(&self, big_q: &RVec, big_p: &RVec) -> Result<(RVec, RVec)> {
        let pt = self.first_order(big_p.as_slice())?;
        Ok((big_q - &pt.connection * self.epsilon, big_p.clone()))
    }

    /// Inverse of [`Dynamics::canonical_change`].
    pub fn canonical_inverse(&self, qs: &RVec, ps: &RVec) -> Result<(RVec, RVec)> {
        let pt = self.first_order(ps.as_slice())?;
        Ok((qs + &pt.connection * self.epsilon, ps.clone()))
    }

    /// Extended Hamiltonian at the canonical variables of `state`.
    pub fn hamiltonian_value(&self, state: &ParticleFieldState) -> Result<HamiltonianReport> {
        let eps = self.epsilon;
        let ps = state.big_p.as_slice();
        let qs = state.qs.as_slice();
        let pt = if eps == 0.0 { self.first_order(ps)? } else { self.band.point(ps)? };
        let (m_pos, m_mom) = envelope_second_moments(&state.env);
        let band = pt.energy;
        let external = self.w.value(qs);
        let berry_coupling = eps * self.w.gradient(qs).dot(&pt.connection);
        let kinetic_envelope = if eps == 0.0 { 0.0 } else { 0.5 * eps * pt.hess.component_mul(&m_mom).sum() };
        let potential_envelope = if eps == 0.0 { 0.0 } else { 0.5 * eps * self.w.hessian(qs).component_mul(&m_pos).sum() };
        Ok(HamiltonianReport {
            value: band + external + berry_coupling + kinetic_envelope + potential_envelope,
            band,
            external,
            berry_coupling,
            kinetic_envelope,
            potential_envelope,
        })
    }

    /// Advances the leading state by one RK4 step.
    pub fn step_leading(&self, state: &LeadingState, dt: f64) -> Result<LeadingState> {
        let d = state.q.len();
        let mut y = state.pack();
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            let r = self.rhs_leading(&y[..d], &y[d..2 * d])?;
            write_leading(d, &r, dy);
            Ok(())
        };
        rk4_step(&mut f, state.t, &mut y, dt)?;
        Ok(LeadingState::unpack(d, state.t + dt, &y))
    }

    /// Leading trajectory sampled at every step from `state.t` to `t1`.
    pub fn leading_trajectory(&self, state: &LeadingState, t1: f64, dt: f64) -> Result<Vec<LeadingState>> {
        let n = step_count(state.t, t1, dt)?;
        let h = if n == 0 { 0.0 } else { (t1 - state.t) / n as f64 };
        let mut out = Vec::with_capacity(n + 1);
        out.push(state.clone());
        for _ in 0..n {
            let next = self.step_leading(out.last().expect("nonempty"), h)?;
            out.push(next);
        }
        Ok(out)
    }

    /// Initial particle–field state with `𝒬 = q₀ + ε𝒜(p₀)`, `𝒫 = p₀` (well-prepared data).
    pub fn initial_state(&self, q0: &[f64], p0: &[f64], env: EnvelopeState) -> Result<ParticleFieldState> {
        let pt = self.first_order(p0)?;
        let big_q = RVec::from_column_slice(q0) + &pt.connection * self.epsilon;
        let big_p = RVec::from_column_slice(p0);
        let qs = RVec::from_column_slice(q0);
        Ok(ParticleFieldState { leading: LeadingState::new(q0, p0), big_q, big_p, qs, env, epsilon: self.epsilon })
    }

    /// One coupled step of size `dt`.
    pub fn step_coupled(&self, state: &ParticleFieldState, dt: f64) -> Result<ParticleFieldState> {
        if !(dt > 0.0) {
            return Err(Error::invalid("time step must be positive"));
        }
        let mut next = match &state.env {
            EnvelopeState::Gaussian(g) => self.step_gaussian(state, g, dt)?,
            EnvelopeState::Grid(g) => self.step_grid(state, g, dt)?,
        };
        let (qs, _) = self.canonical_change(&next.big_q, &next.big_p)?;
        next.qs = qs;
        Ok(next)
    }

    fn step_gaussian(&self, state: &ParticleFieldState, g: &GaussianEnvelope, dt: f64) -> Result<ParticleFieldState> {
        let d = state.dim();
        let norm_sq = g.norm_sq();
        let mut y = state.leading.pack();
        y.extend(state.big_q.iter().chain(state.big_p.iter()));
        y.extend(g.a().iter().chain(g.b().iter()).flat_map(|z| [z.re, z.im]));
        let base = 2 * d + 2;
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            let lead = self.rhs_leading(&y[..d], &y[d..2 * d])?;
            write_leading(d, &lead, dy);
            let (a, b) = unpack_ab(d, &y[base + 2 * d..]);
            let m_pos = (&a * a.adjoint()).map(|z| 0.5 * z.re) * norm_sq;
            let m_mom = (&b * b.adjoint()).map(|z| 0.5 * z.re) * norm_sq;
            let big_q = &y[base..base + d];
            let big_p = &y[base + d..base + 2 * d];
            let pt = self.band.point(big_p)?;
            let c = self.corrected_from(&pt, big_q, &m_pos, &m_mom);
            dy[base..base + d].copy_from_slice(c.q_dot.as_slice());
            dy[base + d..base + 2 * d].copy_from_slice(c.p_dot.as_slice());
            let hw = crate::linalg::to_complex(&self.w.hessian(big_q));
            let he = crate::linalg::to_complex(&pt.hess);
            let da = he * &b;
            let db = -(hw * &a);
            let out = &mut dy[base + 2 * d..];
            for (k, z) in da.iter().chain(db.iter()).enumerate() {
                out[2 * k] = z.re;
                out[2 * k + 1] = z.im;
            }
            Ok(())
        };
        let mut trial = y.clone();
        rk4_step(&mut f, state.t(), &mut trial, dt)?;
        let (a, b) = unpack_ab(d, &trial[base + 2 * d..]);
        let mut env = g.clone();
        match env.update(a, b) {
            Ok(()) => {}
            Err(Error::BranchDiscontinuity { increment }) => {
                if dt < 1e-12 {
                    return Err(Error::BranchDiscontinuity { increment });
                }
                let half = self.step_gaussian(state, g, 0.5 * dt)?;
                let EnvelopeState::Gaussian(hg) = &half.env else { unreachable!() };
                let hg = hg.clone();
                return self.step_gaussian(&half, &hg, 0.5 * dt);
            }
            Err(e) => return Err(e),
        }
        Ok(ParticleFieldState {
            leading: LeadingState::unpack(d, state.t() + dt, &trial[..base]),
            big_q: RVec::from_column_slice(&trial[base..base + d]),
            big_p: RVec::from_column_slice(&trial[base + d..base + 2 * d]),
            qs: state.qs.clone(),
            env: EnvelopeState::Gaussian(env),
            epsilon: state.epsilon,
        })
    }

    /// Strang splitting: half particle step with frozen moments, envelope split-step with
    /// frozen `(𝒬, 𝒫)`, half particle step.
    fn step_grid(&self, state: &ParticleFieldState, g: &EnvelopeGrid, dt: f64) -> Result<ParticleFieldState> {
        let d = state.dim();
        let mom = crate::envelope::envelope_moments(g);
        let first = self.particle_half(state, &mom.position_second, &mom.momentum_second, 0.5 * dt)?;
        let pt = self.band.point(first.1.as_slice())?;
        let coeffs = envelope_coefficients(&pt, self.w, first.0.as_slice())?;
        let mut env = g.clone();
        env.split_step(&EnvelopeCoefficients::quadratic(coeffs.hess_e, coeffs.hess_w), dt, false);
        let mom = crate::envelope::envelope_moments(&env);
        let mid = ParticleFieldState {
            leading: first.2,
            big_q: first.0,
            big_p: first.1,
            qs: state.qs.clone(),
            env: EnvelopeState::Grid(env.clone()),
            epsilon: state.epsilon,
        };
        let second = self.particle_half(&mid, &mom.position_second, &mom.momentum_second, 0.5 * dt)?;
        debug_assert_eq!(second.0.len(), d);
        Ok(ParticleFieldState {
            leading: second.2,
            big_q: second.0,
            big_p: second.1,
            qs: state.qs.clone(),
            env: EnvelopeState::Grid(env),
            epsilon: state.epsilon,
        })
    }

    fn particle_half(
        &self,
        state: &ParticleFieldState,
        m_pos: &RMat,
        m_mom: &RMat,
        h: f64,
    ) -> Result<(RVec, RVec, LeadingState)> {
        let d = state.dim();
        let mut y = state.leading.pack();
        let base = y.len();
        y.extend(state.big_q.iter().chain(state.big_p.iter()));
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            let lead = self.rhs_leading(&y[..d], &y[d..2 * d])?;
            write_leading(d, &lead, dy);
            let c = self.rhs_corrected(&y[base..base + d], &y[base + d..base + 2 * d], m_pos, m_mom)?;
            dy[base..base + d].copy_from_slice(c.q_dot.as_slice());
            dy[base + d..base + 2 * d].copy_from_slice(c.p_dot.as_slice());
            Ok(())
        };
        rk4_step(&mut f, state.t(), &mut y, h)?;
        Ok((
            RVec::from_column_slice(&y[base..base + d]),
            RVec::from_column_slice(&y[base + d..base + 2 * d]),
            LeadingState::unpack(d, state.t() + h, &y[..base]),
        ))
    }

    /// Integrates the coupled system to `t1` with equal steps no larger than `dt`.
    pub fn evolve_coupled(&self, state: &ParticleFieldState, t1: f64, dt: f64) -> Result<ParticleFieldState> {
        let n = step_count(state.t(), t1, dt)?;
        let mut s = state.clone();
        if n == 0 {
            return Ok(s);
        }
        let h = (t1 - state.t()) / n as f64;
        for _ in 0..n {
            s = self.step_coupled(&s, h)?;
        }
        Ok(s)
    }

    /// Envelope coefficients along the leading path at `(q, p)`.
    pub fn coefficients_at(&self, q: &[f64], p: &[f64]) -> Result<EnvelopeCoefficients> {
        let pt = self.band.point(p)?;
        envelope_coefficients(&pt, self.w, q)
    }

    /// Advances the asymptotic solution: the leading trajectory and the envelope pair `(a, b)`
    /// with coefficients taken at the midpoint of each step.
    pub fn evolve_ansatz(&self, start: &AnsatzState, t1: f64, dt: f64) -> Result<AnsatzState> {
        let n = step_count(start.leading.t, t1, dt)?;
        let mut s = start.clone();
        if n == 0 {
            return Ok(s);
        }
        let h = (t1 - start.leading.t) / n as f64;
        for _ in 0..n {
            let mid = self.step_leading(&s.leading, 0.5 * h)?;
            let c = self.coefficients_at(mid.q.as_slice(), mid.p.as_slice())?;
            s.envelope.split_step(&c, h, true);
            s.leading = self.step_leading(&mid, 0.5 * h)?;
            s.envelope.t = s.leading.t;
        }
        s.envelope.check_boundary()?;
        Ok(s)
    }
}

/// Envelope coefficients tabulated along the leading trajectory at equally spaced nodes.
#[derive(Debug, Clone)]
pub struct CoefficientPath {
    t0: f64,
    spacing: f64,
    nodes: Vec<EnvelopeCoefficients>,
}

impl CoefficientPath {
    /// Coefficients at a tabulated node; other times are rejected rather than interpolated.
    pub fn at(&self, t: f64) -> Result<EnvelopeCoefficients> {
        let x = (t - self.t0) / self.spacing;
        let k = x.round();
        if (x - k).abs() > 1e-6 || k < 0.0 || k as usize >= self.nodes.len() {
            return Err(Error::invalid("time is not a node of the coefficient path"));
        }
        Ok(self.nodes[k as usize].clone())
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl<'a, B: BandOracle + ?Sized> Dynamics<'a, B> {
    /// Tabulates coefficients at spacing `spacing` from `start.t` to `t1` along the leading flow.
    pub fn coefficient_path(&self, start: &LeadingState, t1: f64, spacing: f64) -> Result<CoefficientPath> {
        let traj = self.leading_trajectory(start, t1, spacing)?;
        let h = if traj.len() > 1 { traj[1].t - traj[0].t } else { spacing };
        let nodes = traj
            .iter()
            .map(|s| self.coefficients_at(s.q.as_slice(), s.p.as_slice()))
            .collect::<Result<Vec<_>>>()?;
        Ok(CoefficientPath { t0: start.t, spacing: h, nodes })
    }
}

/// Leading trajectory together with grid envelopes `a` and `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzState {
    pub leading: LeadingState,
    pub envelope: EnvelopeGrid,
}

fn write_leading(d: usize, r: &LeadingRates, dy: &mut [f64]) {
    dy[..d].copy_from_slice(r.q_dot.as_slice());
    dy[d..2 * d].copy_from_slice(r.p_dot.as_slice());
    dy[2 * d] = r.action_dot;
    dy[2 * d + 1] = r.phi_dot;
}

fn unpack_ab(d: usize, y: &[f64]) -> (CMat, CMat) {
    let m = d * d;
    let a = CMat::from_fn(d, d, |i, j| C64::new(y[2 * (j * d + i)], y[2 * (j * d + i) + 1]));
    let b = CMat::from_fn(d, d, |i, j| C64::new(y[2 * (m + j * d + i)], y[2 * (m + j * d + i) + 1]));
    (a, b)
}
