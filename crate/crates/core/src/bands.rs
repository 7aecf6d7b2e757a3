//! Plane-wave Bloch eigenproblem, band derivatives and Berry geometry.
//!
//! Bloch functions are expanded as `χ(z) = Σ_G c_G e^{iG·z}` with `Σ|c_G|² = 1`, so `|χ|²` has
//! unit mean over the period cell. `H(p)` acts on coefficients as `½|p+G|² δ_{GG'} + V̂_{G−G'}`.

use alloc::collections::BTreeMap;
use alloc::format;

use alloc::vec::Vec;

use crate::lattice::{enumerate_reciprocal, LatticeSpec, MillerIndex, PeriodicPotential};
use crate::linalg::{Antisymmetric, CMat, CVec, RMat, RVec, Tensor};
use crate::{Error, Result, C64};
#[allow(unused_imports)]
use num_traits::Float;

/// Eigenvalues closer than this (relative to `1 + |E|`) count as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;
/// Anchor coefficients smaller than this make the reference gauge ill-defined.
pub const ANCHOR_MIN_MAGNITUDE: f64 = 1e-2;
/// Floor for the denominator of the relative curvature discrepancy.
pub const CURVATURE_FLOOR: f64 = 1e-3;
pub const CURVATURE_TOLERANCE: f64 = 1e-5;

/// Plane-wave basis `{G_m : |G_m| ≤ cutoff}` in lexicographic order of `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochTruncation {
    lattice: LatticeSpec,
    indices: Vec<MillerIndex>,
    vectors: Vec<RVec>,
    lookup: BTreeMap<MillerIndex, usize>,
    cutoff: f64,
}

impl BlochTruncation {
    pub fn new(lattice: &LatticeSpec, cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0) {
            return Err(Error::invalid("plane-wave cutoff must be positive"));
        }
        let indices = enumerate_reciprocal(lattice, cutoff);
        let vectors = indices.iter().map(|m| lattice.dual_vector(m)).collect();
        let lookup = indices.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        Ok(BlochTruncation { lattice: lattice.clone(), indices, vectors, lookup, cutoff })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn indices(&self) -> &[MillerIndex] {
        &self.indices
    }

    pub fn g(&self, i: usize) -> &RVec {
        &self.vectors[i]
    }

    pub fn position(&self, m: &MillerIndex) -> Option<usize> {
        self.lookup.get(m).copied()
    }

    /// Largest `|G|` in the basis.
    pub fn max_frequency(&self) -> f64 {
        self.vectors.iter().map(|g| g.norm()).fold(0.0, f64::max)
    }
}

/// `H(p)` on the truncated plane-wave basis.
pub fn assemble_bloch_matrix(v: &PeriodicPotential, trunc: &BlochTruncation, p: &[f64]) -> Result<CMat> {
    if v.lattice() != trunc.lattice() {
        return Err(Error::TruncationMismatch);
    }
    if p.len() != trunc.dim() {
        return Err(Error::invalid("quasi-momentum has the wrong dimension"));
    }
    let n = trunc.len();
    let mut h = CMat::zeros(n, n);
    for (i, mi) in trunc.indices.iter().enumerate() {
        for (j, mj) in trunc.indices.iter().enumerate() {
            h[(i, j)] = v.coefficient(&[mi[0] - mj[0], mi[1] - mj[1], mi[2] - mj[2]]);
        }
        let k2: f64 = trunc.g(i).iter().zip(p).map(|(g, q)| (g + q) * (g + q)).sum();
        h[(i, i)] += C64::new(0.5 * k2, 0.0);
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// Phase of a pinned anchor coefficient prescribed (zero unless twisted).
    Reference,
    /// Phase chosen by overlap with a neighbouring slice.
    Parallel,
}

/// Eigen-decomposition of `H(p)` with one tracked band.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochSlice {
    p: RVec,
    energies: Vec<f64>,
    vectors: CMat,
    n_max: usize,
    band: usize,
    gap: f64,
    gauge: Gauge,
    anchor: usize,
    slope: RVec,
}

impl BlochSlice {
    pub fn p(&self) -> &RVec {
        &self.p
    }

    /// The `n_max` lowest energies.
    pub fn energies(&self) -> &[f64] {
        &self.energies[..self.n_max]
    }

    /// Every eigenvalue of the truncated problem.
    pub fn all_energies(&self) -> &[f64] {
        &self.energies
    }

    /// Coefficient matrix with one column per eigenpair of the truncated problem.
    pub fn vectors(&self) -> &CMat {
        &self.vectors
    }

    /// Tracked band, counted from 1.
    pub fn band(&self) -> usize {
        self.band
    }

    pub fn energy(&self) -> f64 {
        self.energies[self.band - 1]
    }

    pub fn chi(&self) -> CVec {
        self.vectors.column(self.band - 1).into_owned()
    }

    /// Distance from the tracked band to the nearest other eigenvalue.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    /// Basis position of the coefficient whose phase defines the reference gauge.
    pub fn anchor(&self) -> usize {
        self.anchor
    }

    /// Slope `w` of the phase twist `e^{i(θ₀ + w·p)}` applied on top of the reference gauge.
    pub fn phase_slope(&self) -> &RVec {
        &self.slope
    }

    /// Multiplies the tracked column by a unit phase.
    pub fn rephase(&mut self, phase: C64) {
        let mut col = self.vectors.column_mut(self.band - 1);
        col *= phase;
    }

    fn check_isolated(&self) -> Result<()> {
        if self.gap <= DEGENERACY_TOLERANCE * (1.0 + self.energy().abs()) {
            return Err(Error::DegenerateBand { band: self.band, gap: self.gap });
        }
        Ok(())
    }
}

fn largest_coefficient(col: &[C64]) -> usize {
    let max = col.iter().map(|c| c.norm()).fold(0.0, f64::max);
    col.iter().position(|c| c.norm() >= max * (1.0 - 1e-10)).unwrap_or(0)
}

/// Diagonalizes `H(p)` and fixes the reference gauge of every column.
///
/// `band` is counted from 1; `gap_threshold` is the isolation margin `M`.
pub fn solve_bands(
    v: &PeriodicPotential,
    trunc: &BlochTruncation,
    p: &[f64],
    n_max: usize,
    band: usize,
    gap_threshold: f64,
) -> Result<BlochSlice> {
    let n = trunc.len();
    if n_max == 0 || n_max > n {
        return Err(Error::invalid(format!("n_max = {n_max} must lie in 1..={n}")));
    }
    if band == 0 || band > n_max {
        return Err(Error::invalid(format!("band {band} must lie in 1..={n_max}")));
    }
    let h = assemble_bloch_matrix(v, trunc, p)?;
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut c = eig.eigenvectors.column(k).into_owned();
        let norm = c.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::EigensolverFailure(format!("eigenvector {col} has norm {norm}")));
        }
        c /= C64::new(norm, 0.0);
        let a = largest_coefficient(c.as_slice());
        let ph = c[a].conj() / c[a].norm();
        c *= ph;
        let residual = (&h * &c - &c * C64::new(energies[col], 0.0)).norm();
        if residual > 1e-10 * (1.0 + energies[col].abs()) {
            return Err(Error::EigensolverFailure(format!(
                "residual {residual:e} for eigenpair {col} exceeds tolerance"
            )));
        }
        vectors.set_column(col, &c);
    }
    let e = energies[band - 1];
    let gap = energies
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != band - 1)
        .map(|(_, &x)| (x - e).abs())
        .fold(f64::INFINITY, f64::min);
    let anchor = largest_coefficient(vectors.column(band - 1).as_slice());
    let slice = BlochSlice {
        p: RVec::from_column_slice(p),
        energies,
        vectors,
        n_max,
        band,
        gap,
        gauge: Gauge::Reference,
        anchor,
        slope: RVec::zeros(p.len()),
    };
    slice.check_isolated()?;
    if gap < gap_threshold {
        return Err(Error::GapBelowThreshold { band, gap, threshold: gap_threshold });
    }
    Ok(slice)
}

/// Hellmann–Feynman gradient `∇E = ⟨χ, (p + G) χ⟩`.
pub fn grad_e_hellmann_feynman(slice: &BlochSlice, trunc: &BlochTruncation) -> Result<RVec> {
    slice.check_isolated()?;
    let d = slice.p.len();
    let col = slice.vectors.column(slice.band - 1);
    let mut grad = RVec::zeros(d);
    let mut imag: f64 = 0.0;
    for alpha in 0..d {
        let mut s = C64::new(0.0, 0.0);
        for (i, c) in col.iter().enumerate() {
            s += c.conj() * c * (slice.p[alpha] + trunc.g(i)[alpha]);
        }
        imag = imag.max(s.im.abs());
        grad[alpha] = s.re;
    }
    if imag > 1e-10 {
        return Err(Error::EigensolverFailure(format!("gradient has imaginary residue {imag:e}")));
    }
    Ok(grad)
}

/// `P⊥∂_αχ = −Σ_{m≠n} χ_m ⟨χ_m, (p+G)_α χ_n⟩ / (E_m − E_n)`, one column per axis.
pub fn perpendicular_derivative(slice: &BlochSlice, trunc: &BlochTruncation) -> Result<CMat> {
    slice.check_isolated()?;
    let n = trunc.len();
    let d = slice.p.len();
    let nb = slice.band - 1;
    let e = slice.energy();
    let chi = slice.vectors.column(nb);
    let mut out = CMat::zeros(n, d);
    let mut w = CVec::zeros(n);
    for alpha in 0..d {
        for i in 0..n {
            w[i] = chi[i] * (slice.p[alpha] + trunc.g(i)[alpha]);
        }
        let mut u = CVec::zeros(n);
        for m in 0..n {
            if m == nb {
                continue;
            }
            let vm = slice.vectors.column(m);
            let s = vm.dotc(&w);
            u -= vm * (s / (slice.energies[m] - e));
        }
        out.set_column(alpha, &u);
    }
    Ok(out)
}

/// Berry connection `i⟨χ, ∇χ⟩` implied by the slice's gauge.
pub fn berry_connection(slice: &BlochSlice, perp: &CMat) -> Result<RVec> {
    let d = slice.p.len();
    match slice.gauge {
        Gauge::Parallel => Ok(RVec::zeros(d)),
        Gauge::Reference => {
            let c = slice.vectors[(slice.anchor, slice.band - 1)];
            let mag = c.norm();
            if mag < ANCHOR_MIN_MAGNITUDE {
                return Err(Error::GaugeAnchorLost { magnitude: mag });
            }
            // ∂c_k = u_k − i𝒜c_k and arg c_k = θ₀ + w·p
            Ok(RVec::from_fn(d, |a, _| (c.conj() * perp[(slice.anchor, a)]).im / (mag * mag) - slice.slope[a]))
        }
    }
}

/// `∇_pχ = P⊥∇χ − i𝒜χ` in the slice's gauge, one column per axis.
pub fn grad_p_chi(slice: &BlochSlice, trunc: &BlochTruncation) -> Result<CMat> {
    let perp = perpendicular_derivative(slice, trunc)?;
    let a = berry_connection(slice, &perp)?;
    let chi = slice.chi();
    let mut out = perp;
    for alpha in 0..a.len() {
        let mut col = out.column_mut(alpha);
        col -= &chi * C64::new(0.0, a[alpha]);
    }
    Ok(out)
}

/// Berry curvature `ℱ_{αβ} = −2 Im⟨P⊥∂_αχ, P⊥∂_βχ⟩`.
pub fn curvature_resolvent(perp: &CMat) -> Antisymmetric {
    let d = perp.ncols();
    let mut f = Antisymmetric::zeros(d);
    for a in 0..d {
        for b in a + 1..d {
            let s = perp.column(a).dotc(&perp.column(b));
            f.set(a, b, -2.0 * s.im);
        }
    }
    f
}

/// Rotates `next`'s tracked column so that its overlap with `prev` is real positive.
pub fn transport_gauge(prev: &BlochSlice, next: &BlochSlice) -> Result<BlochSlice> {
    if prev.vectors.nrows() != next.vectors.nrows() {
        return Err(Error::TruncationMismatch);
    }
    let s = prev.chi().dotc(&next.chi());
    let overlap = s.norm();
    if !(overlap > 0.5) {
        return Err(Error::OverlapTooSmall { overlap });
    }
    let mut out = next.clone();
    out.rephase(s.conj() / overlap);
    out.gauge = Gauge::Parallel;
    Ok(out)
}

/// Gauge convention: reference anchor (`None` picks the largest coefficient at the first
/// point evaluated) and an optional twist `e^{i(θ₀ + w·p)}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaugeSpec {
    pub anchor: Option<MillerIndex>,
    pub phase: f64,
    pub slope: Vec<f64>,
}

/// Everything the dynamics needs from the tracked band at one quasi-momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPoint {
    pub p: RVec,
    pub energy: f64,
    pub gap: f64,
    pub grad: RVec,
    pub hess: RMat,
    pub third: Tensor,
    /// Berry connection `𝒜` in the model's gauge.
    pub connection: RVec,
    /// `∂_α𝒜_β` stored at `(α, β)`.
    pub connection_jacobian: RMat,
    pub curvature: Antisymmetric,
    pub chi: CVec,
    pub grad_chi: CMat,
    pub hess_asymmetry: f64,
    pub third_asymmetry: f64,
}

/// Full derivative report at one point, including both curvature routes.
#[derive(Debug, Clone, PartialEq)]
pub struct BandDerivatives {
    pub grad_e: RVec,
    pub hess_e: RMat,
    pub third_e: Tensor,
    pub berry_connection: RVec,
    pub berry_curvature: Antisymmetric,
    pub curvature_plaquette: Antisymmetric,
    pub curvature_discrepancy: f64,
    pub hess_asymmetry: f64,
    pub third_asymmetry: f64,
    /// Largest change of the Hessian when the step is halved.
    pub richardson_discrepancy: f64,
}

/// Anything that can report tracked-band data at a quasi-momentum.
pub trait BandOracle {
    fn dim(&self) -> usize;
    fn point(&self, p: &[f64]) -> Result<BandPoint>;

    /// Energy, gradient, connection and curvature only; fields needing the stencil may be zero.
    fn first_order(&self, p: &[f64]) -> Result<BandPoint> {
        self.point(p)
    }
}

impl<T: BandOracle + ?Sized> BandOracle for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn point(&self, p: &[f64]) -> Result<BandPoint> {
        (**self).point(p)
    }

    fn first_order(&self, p: &[f64]) -> Result<BandPoint> {
        (**self).first_order(p)
    }
}

/// Tracked Bloch band of a periodic potential in a fixed truncation and gauge.
#[derive(Debug, Clone)]
pub struct BlochBandModel {
    potential: PeriodicPotential,
    trunc: BlochTruncation,
    band: usize,
    gap_threshold: f64,
    fd_step: f64,
    plaquette_step: f64,
    anchor: usize,
    phase: f64,
    slope: RVec,
}

impl BlochBandModel {
    /// Builds the model with the anchor resolved at `p_ref` when the gauge leaves it open.
    pub fn new(
        potential: PeriodicPotential,
        cutoff: f64,
        band: usize,
        gap_threshold: f64,
        gauge: &GaugeSpec,
        p_ref: &[f64],
    ) -> Result<Self> {
        let trunc = BlochTruncation::new(potential.lattice(), cutoff)?;
        let d = trunc.dim();
        let b1 = potential.lattice().dual_generators().column(0).norm();
        let slope = if gauge.slope.is_empty() { RVec::zeros(d) } else { RVec::from_column_slice(&gauge.slope) };
        if slope.len() != d {
            return Err(Error::invalid("gauge slope has the wrong dimension"));
        }
        let anchor = match gauge.anchor {
            Some(m) => trunc.position(&m).ok_or_else(|| Error::invalid("gauge anchor lies outside the truncation"))?,
            None => solve_bands(&potential, &trunc, p_ref, band, band, 0.0)?.anchor,
        };
        Ok(BlochBandModel {
            potential,
            trunc,
            band,
            gap_threshold,
            fd_step: 1e-4 * b1,
            plaquette_step: 1e-2 * b1,
            anchor,
            phase: gauge.phase,
            slope,
        })
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn with_plaquette_step(mut self, h: f64) -> Self {
        self.plaquette_step = h;
        self
    }

    pub fn potential(&self) -> &PeriodicPotential {
        &self.potential
    }

    pub fn truncation(&self) -> &BlochTruncation {
        &self.trunc
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn gap_threshold(&self) -> f64 {
        self.gap_threshold
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn anchor_index(&self) -> MillerIndex {
        self.trunc.indices()[self.anchor]
    }

    /// Fully resolved gauge convention of this model.
    pub fn gauge_spec(&self) -> GaugeSpec {
        GaugeSpec { anchor: Some(self.anchor_index()), phase: self.phase, slope: self.slope.iter().copied().collect() }
    }

    /// Eigen-decomposition at `p` in the model's gauge.
    pub fn slice(&self, p: &[f64]) -> Result<BlochSlice> {
        let mut s = self.raw_slice(p)?;
        let phase = self.gauge_phase(&s, p)?;
        s.rephase(phase);
        s.anchor = self.anchor;
        s.slope = self.slope.clone();
        Ok(s)
    }

    fn raw_slice(&self, p: &[f64]) -> Result<BlochSlice> {
        solve_bands(&self.potential, &self.trunc, p, self.band, self.band, self.gap_threshold)
    }

    /// Unit factor taking a raw slice's tracked column into the model's gauge.
    fn gauge_phase(&self, raw: &BlochSlice, p: &[f64]) -> Result<C64> {
        let c = raw.vectors[(self.anchor, self.band - 1)];
        if c.norm() < ANCHOR_MIN_MAGNITUDE {
            return Err(Error::GaugeAnchorLost { magnitude: c.norm() });
        }
        let theta = self.phase + self.slope.iter().zip(p).map(|(w, q)| w * q).sum::<f64>();
        Ok(c.conj() / c.norm() * C64::new(theta.cos(), theta.sin()))
    }

    /// Gauge-invariant gradient and perpendicular derivative from the raw slice, plus the connection.
    fn gradient_and_connection(&self, p: &[f64]) -> Result<(RVec, RVec)> {
        let (_, g, _, conn, _) = self.local(p)?;
        Ok((g, conn))
    }

    /// Gauged slice, gradient, raw perpendicular derivative, connection and gauge factor.
    fn local(&self, p: &[f64]) -> Result<(BlochSlice, RVec, CMat, RVec, C64)> {
        let raw = self.raw_slice(p)?;
        let g = grad_e_hellmann_feynman(&raw, &self.trunc)?;
        let perp = perpendicular_derivative(&raw, &self.trunc)?;
        let phase = self.gauge_phase(&raw, p)?;
        let mut s = raw;
        s.rephase(phase);
        s.anchor = self.anchor;
        s.slope = self.slope.clone();
        let conn = berry_connection(&s, &(&perp * phase))?;
        Ok((s, g, perp, conn, phase))
    }

    /// Finite-difference Hessian, third derivative and connection Jacobian with step `h`.
    fn stencil(&self, p: &[f64], h: f64, center: &(RVec, RVec)) -> Result<(RMat, Tensor, RMat)> {
        let d = p.len();
        let shifted = |moves: &[(usize, f64)]| {
            let mut q = p.to_vec();
            for &(axis, s) in moves {
                q[axis] += s * h;
            }
            self.gradient_and_connection(&q)
        };
        let mut hess = RMat::zeros(d, d);
        let mut third = Tensor::zeros(d, 3);
        let mut jac = RMat::zeros(d, d);
        for a in 0..d {
            let (gp, ap) = shifted(&[(a, 1.0)])?;
            let (gm, am) = shifted(&[(a, -1.0)])?;
            for c in 0..d {
                hess[(a, c)] = (gp[c] - gm[c]) / (2.0 * h);
                jac[(a, c)] = (ap[c] - am[c]) / (2.0 * h);
                third.set(&[a, a, c], (gp[c] - 2.0 * center.0[c] + gm[c]) / (h * h));
            }
            for b in a + 1..d {
                let (gpp, _) = shifted(&[(a, 1.0), (b, 1.0)])?;
                let (gpm, _) = shifted(&[(a, 1.0), (b, -1.0)])?;
                let (gmp, _) = shifted(&[(a, -1.0), (b, 1.0)])?;
                let (gmm, _) = shifted(&[(a, -1.0), (b, -1.0)])?;
                for c in 0..d {
                    let v = (gpp[c] - gpm[c] - gmp[c] + gmm[c]) / (4.0 * h * h);
                    third.set(&[a, b, c], v);
                    third.set(&[b, a, c], v);
                }
            }
        }
        Ok((hess, third, jac))
    }

    /// Band data at `p` (resolvent curvature only).
    pub fn band_point(&self, p: &[f64]) -> Result<BandPoint> {
        let (s, grad, perp, connection, phase) = self.local(p)?;
        let curvature = curvature_resolvent(&perp);
        let chi = s.chi();
        let mut grad_chi = &perp * phase;
        for a in 0..connection.len() {
            let mut col = grad_chi.column_mut(a);
            col -= &chi * C64::new(0.0, connection[a]);
        }
        let center = (grad.clone(), connection.clone());
        let (hess_raw, third_raw, jac) = self.stencil(p, self.fd_step, &center)?;
        let hess_asymmetry = (&hess_raw - hess_raw.transpose()).amax();
        let third_asymmetry = third_raw.asymmetry();
        let hess = 0.5 * (&hess_raw + hess_raw.transpose());
        let third = third_raw.symmetrized();
        Ok(BandPoint {
            p: RVec::from_column_slice(p),
            energy: s.energy(),
            gap: s.gap(),
            grad,
            hess,
            third,
            connection,
            connection_jacobian: jac,
            curvature,
            chi,
            grad_chi,
            hess_asymmetry,
            third_asymmetry,
        })
    }

    /// Curvature from Berry phases of small counter-clockwise plaquettes, extrapolated from loop
    /// sizes `h` and `h/2`.
    pub fn curvature_plaquette(&self, p: &[f64]) -> Result<Antisymmetric> {
        let d = p.len();
        let mut f = Antisymmetric::zeros(d);
        for a in 0..d {
            for b in a + 1..d {
                let coarse = self.plaquette(p, a, b, self.plaquette_step)?;
                let fine = self.plaquette(p, a, b, 0.5 * self.plaquette_step)?;
                f.set(a, b, (4.0 * fine - coarse) / 3.0);
            }
        }
        Ok(f)
    }

    fn plaquette(&self, p: &[f64], a: usize, b: usize, h: f64) -> Result<f64> {
        let corners = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)];
        let mut chis = Vec::with_capacity(4);
        for (sa, sb) in corners {
            let mut q = p.to_vec();
            q[a] += sa * h;
            q[b] += sb * h;
            let s = solve_bands(&self.potential, &self.trunc, &q, self.band, self.band, self.gap_threshold)?;
            chis.push(s.chi());
        }
        let mut prod = C64::new(1.0, 0.0);
        for k in 0..4 {
            prod *= chis[k].dotc(&chis[(k + 1) % 4]);
        }
        // ⟨χ(p), χ(p+δ)⟩ ≈ e^{−i𝒜·δ}, so the loop product is e^{−i∮𝒜}
        Ok(-prod.im.atan2(prod.re) / (h * h))
    }

    /// Full derivative report with both curvature routes and the Richardson check.
    pub fn derivatives(&self, p: &[f64]) -> Result<BandDerivatives> {
        let point = self.band_point(p)?;
        let center = (point.grad.clone(), point.connection.clone());
        let (hess_half, _, _) = self.stencil(p, 0.5 * self.fd_step, &center)?;
        let hess_half = 0.5 * (&hess_half + hess_half.transpose());
        let richardson_discrepancy = (&hess_half - &point.hess).amax();
        let plaquette = self.curvature_plaquette(p)?;
        let mut diff: f64 = 0.0;
        for (x, y) in point.curvature.upper().iter().zip(plaquette.upper()) {
            diff = diff.max((x - y).abs());
        }
        let scale = point.curvature.max_abs().max(plaquette.max_abs()).max(CURVATURE_FLOOR);
        let relative = diff / scale;
        if relative > CURVATURE_TOLERANCE {
            return Err(Error::CurvatureMethodMismatch {
                resolvent: point.curvature.max_abs(),
                plaquette: plaquette.max_abs(),
                relative,
            });
        }
        Ok(BandDerivatives {
            grad_e: point.grad,
            hess_e: point.hess,
            third_e: point.third,
            berry_connection: point.connection,
            berry_curvature: point.curvature,
            curvature_plaquette: plaquette,
            curvature_discrepancy: relative,
            hess_asymmetry: point.hess_asymmetry,
            third_asymmetry: point.third_asymmetry,
            richardson_discrepancy,
        })
    }
}

impl BandOracle for BlochBandModel {
    fn dim(&self) -> usize {
        self.trunc.dim()
    }

    fn point(&self, p: &[f64]) -> Result<BandPoint> {
        self.band_point(p)
    }

    fn first_order(&self, p: &[f64]) -> Result<BandPoint> {
        let (s, grad, perp, connection, phase) = self.local(p)?;
        let d = p.len();
        let curvature = curvature_resolvent(&perp);
        let chi = s.chi();
        let mut grad_chi = &perp * phase;
        for a in 0..d {
            let mut col = grad_chi.column_mut(a);
            col -= &chi * C64::new(0.0, connection[a]);
        }
        Ok(BandPoint {
            p: RVec::from_column_slice(p),
            energy: s.energy(),
            gap: s.gap(),
            grad,
            hess: RMat::zeros(d, d),
            third: Tensor::zeros(d, 3),
            connection,
            connection_jacobian: RMat::zeros(d, d),
            curvature,
            chi,
            grad_chi,
            hess_asymmetry: 0.0,
            third_asymmetry: 0.0,
        })
    }
}

/// Band derivatives at `p` in the reference gauge anchored at `p`, with step `fd_step`.
pub fn band_derivatives(
    v: &PeriodicPotential,
    trunc: &BlochTruncation,
    p: &[f64],
    band: usize,
    fd_step: f64,
) -> Result<BandDerivatives> {
    let model = BlochBandModel::new(v.clone(), trunc.cutoff(), band, 0.0, &GaugeSpec::default(), p)?
        .with_fd_step(fd_step);
    model.derivatives(p)
}
