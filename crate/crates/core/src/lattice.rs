//! Bravais lattices, reciprocal enumeration, Brillouin-zone folding and periodic potentials.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::linalg::{RMat, RVec};
use crate::{Error, Result, C64};
#[allow(unused_imports)]
use num_traits::Float;

/// Integer index of a dual-lattice vector; unused trailing slots are zero.
pub type MillerIndex = [i64; 3];

/// Direct lattice Λ (columns `v_j`) and its dual Λ* (columns `b_j`, `b_i·v_j = 2πδ_ij`).
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    dim: usize,
    direct: RMat,
    dual: RMat,
    cell_volume_direct: f64,
    cell_volume_dual: f64,
    condition_number: f64,
}

/// Builds the dual lattice as `2π (Vᵀ)⁻¹`.
pub fn build_dual_lattice(direct_generators: &RMat) -> Result<LatticeSpec> {
    let d = direct_generators.nrows();
    if !(1..=3).contains(&d) || direct_generators.ncols() != d {
        return Err(Error::invalid("lattice generators must form a square matrix of size 1, 2 or 3"));
    }
    if direct_generators.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("lattice generators must be finite"));
    }
    let scale = direct_generators.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let det = direct_generators.determinant();
    if !(det.abs() >= 1e-12 * scale.powi(d as i32)) || scale == 0.0 {
        return Err(Error::SingularLattice { det });
    }
    let inv = direct_generators.clone().try_inverse().ok_or(Error::SingularLattice { det })?;
    let dual = inv.transpose() * (2.0 * PI);
    let sv = direct_generators.clone().svd(false, false).singular_values;
    let condition_number = sv.max() / sv.min();
    let cell_volume_direct = det.abs();
    Ok(LatticeSpec {
        dim: d,
        direct: direct_generators.clone(),
        dual,
        cell_volume_direct,
        cell_volume_dual: (2.0 * PI).powi(d as i32) / cell_volume_direct,
        condition_number,
    })
}

impl LatticeSpec {
    /// Cubic lattice with period `period` along every axis.
    pub fn cubic(dim: usize, period: f64) -> Result<Self> {
        build_dual_lattice(&(RMat::identity(dim, dim) * period))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn direct_generators(&self) -> &RMat {
        &self.direct
    }

    pub fn dual_generators(&self) -> &RMat {
        &self.dual
    }

    pub fn cell_volume_direct(&self) -> f64 {
        self.cell_volume_direct
    }

    pub fn cell_volume_dual(&self) -> f64 {
        self.cell_volume_dual
    }

    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    /// `G_m = Σ m_j b_j`.
    pub fn dual_vector(&self, m: &MillerIndex) -> RVec {
        let mut g = RVec::zeros(self.dim);
        for j in 0..self.dim {
            g += self.dual.column(j) * m[j] as f64;
        }
        g
    }

    /// Coordinates of `x` in the direct basis, `V⁻¹x`.
    pub fn direct_coordinates(&self, x: &[f64]) -> RVec {
        self.dual.transpose() * RVec::from_column_slice(x) / (2.0 * PI)
    }

    /// Coordinates of `p` in the dual basis, `B⁻¹p = Vᵀp / 2π`.
    pub fn dual_coordinates(&self, p: &[f64]) -> RVec {
        self.direct.transpose() * RVec::from_column_slice(p) / (2.0 * PI)
    }

    /// Largest residual of `b_i·v_j − 2πδ_ij`, relative to 2π.
    pub fn duality_residual(&self) -> f64 {
        let prod = self.dual.transpose() * &self.direct;
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let target = if i == j { 2.0 * PI } else { 0.0 };
                worst = worst.max((prod[(i, j)] - target).abs() / (2.0 * PI));
            }
        }
        worst
    }
}

/// All `m` with `|G_m| ≤ cutoff`, in lexicographic order.
pub fn enumerate_reciprocal(lattice: &LatticeSpec, cutoff: f64) -> Vec<MillerIndex> {
    let d = lattice.dim;
    // m = B⁻¹G and ‖row_j(B⁻¹)‖ = |v_j| / 2π bound each component.
    let bounds: Vec<i64> = (0..d)
        .map(|j| (cutoff * lattice.direct.column(j).norm() / (2.0 * PI)).floor() as i64)
        .collect();
    let limit = cutoff * (1.0 + 1e-12);
    let mut out = Vec::new();
    let mut m = [0i64; 3];
    for k in 0..d {
        m[k] = -bounds[k];
    }
    loop {
        if lattice.dual_vector(&m).norm() <= limit {
            out.push(m);
        }
        let mut axis = d;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if m[axis] < bounds[axis] {
                m[axis] += 1;
                for k in axis + 1..d {
                    m[k] = -bounds[k];
                }
                break;
            }
        }
    }
}

/// Result of folding a quasi-momentum into the centred fundamental cell of Λ*.
#[derive(Debug, Clone, PartialEq)]
pub struct Folded {
    pub p: RVec,
    pub shift: RVec,
    pub index: MillerIndex,
}

/// Folds `p` into the half-open cell `{Σ c_j b_j : c_j ∈ (−½, ½]}`.
pub fn fold_to_bz(lattice: &LatticeSpec, p: &[f64]) -> Folded {
    let c = lattice.dual_coordinates(p);
    let mut index = [0i64; 3];
    for j in 0..lattice.dim {
        let tol = 1e-13;
        index[j] = if c[j] > -0.5 + tol && c[j] <= 0.5 + tol { 0 } else { (c[j] - 0.5).ceil() as i64 };
    }
    let shift = lattice.dual_vector(&index);
    let folded = RVec::from_column_slice(p) - &shift;
    Folded { p: folded, shift, index }
}

/// Real periodic potential `V(z) = Σ_m V̂_m e^{iG_m·z}` with finitely many coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicPotential {
    lattice: LatticeSpec,
    coefficients: BTreeMap<MillerIndex, C64>,
}

impl PeriodicPotential {
    /// Builds the potential from `(m, V̂_m)` pairs. Missing partners `V̂_{−m}` are filled in as
    /// conjugates; inconsistent partners are rejected.
    pub fn new(lattice: LatticeSpec, entries: &[(MillerIndex, C64)]) -> Result<Self> {
        let d = lattice.dim;
        let mut coefficients = BTreeMap::new();
        for &(m, v) in entries {
            if m[d..].iter().any(|&k| k != 0) {
                return Err(Error::invalid("potential index has more components than the lattice dimension"));
            }
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::invalid("potential coefficients must be finite"));
            }
            if coefficients.insert(m, v).is_some() {
                return Err(Error::invalid("duplicate potential index"));
            }
        }
        let keys: Vec<MillerIndex> = coefficients.keys().copied().collect();
        for m in keys {
            let v = coefficients[&m];
            let neg = [-m[0], -m[1], -m[2]];
            match coefficients.get(&neg) {
                Some(w) => {
                    if (w - v.conj()).norm() > 1e-12 * (1.0 + v.norm()) {
                        return Err(Error::invalid("potential coefficients violate V̂(−m) = conj V̂(m)"));
                    }
                }
                None => {
                    coefficients.insert(neg, v.conj());
                }
            }
        }
        Ok(PeriodicPotential { lattice, coefficients })
    }

    pub fn zero(lattice: LatticeSpec) -> Self {
        PeriodicPotential { lattice, coefficients: BTreeMap::new() }
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn coefficient(&self, m: &MillerIndex) -> C64 {
        self.coefficients.get(m).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&MillerIndex, &C64)> {
        self.coefficients.iter()
    }

    /// Largest `|m_j|` among nonzero coefficients.
    pub fn cutoff_box(&self) -> i64 {
        self.coefficients.keys().flat_map(|m| m.iter().map(|k| k.abs())).max().unwrap_or(0)
    }

    /// Largest `|G_m|` among nonzero coefficients.
    pub fn max_frequency(&self) -> f64 {
        self.coefficients.keys().map(|m| self.lattice.dual_vector(m).norm()).fold(0.0, f64::max)
    }

    pub fn evaluate(&self, z: &[f64]) -> f64 {
        let mut s = 0.0;
        for (m, v) in &self.coefficients {
            let g = self.lattice.dual_vector(m);
            let th: f64 = g.iter().zip(z).map(|(a, b)| a * b).sum();
            s += v.re * th.cos() - v.im * th.sin();
        }
        s
    }
}
