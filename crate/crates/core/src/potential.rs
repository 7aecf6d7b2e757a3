//! Smooth external potentials `W(x)` with closed-form derivatives up to order four.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{RMat, RVec, Tensor};
use crate::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

pub const MAX_DERIVATIVE_ORDER: usize = 4;

/// One term `κ cos(k·x + φ)` of a cosine sum.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineTerm {
    pub amplitude: f64,
    pub wavevector: RVec,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExternalPotential {
    Zero { dim: usize },
    /// `½(x−c)ᵀH(x−c) + g·(x−c)`.
    Quadratic { hessian: RMat, gradient: RVec, center: RVec },
    /// `Σ κ cos(k·x + φ)`.
    CosineSum { dim: usize, terms: Vec<CosineTerm> },
    /// `−D exp(−|x−c|²/(2σ²))`.
    GaussianWell { depth: f64, width: f64, center: RVec },
}

impl ExternalPotential {
    pub fn zero(dim: usize) -> Self {
        ExternalPotential::Zero { dim }
    }

    /// Harmonic well `½ω²|x|²`.
    pub fn harmonic(dim: usize, omega: f64) -> Self {
        ExternalPotential::Quadratic {
            hessian: RMat::identity(dim, dim) * (omega * omega),
            gradient: RVec::zeros(dim),
            center: RVec::zeros(dim),
        }
    }

    /// Linear ramp `g·x`.
    pub fn linear(gradient: &[f64]) -> Self {
        let d = gradient.len();
        ExternalPotential::Quadratic {
            hessian: RMat::zeros(d, d),
            gradient: RVec::from_column_slice(gradient),
            center: RVec::zeros(d),
        }
    }

    pub fn cosine(amplitude: f64, wavevector: &[f64], phase: f64) -> Self {
        ExternalPotential::CosineSum {
            dim: wavevector.len(),
            terms: vec![CosineTerm { amplitude, wavevector: RVec::from_column_slice(wavevector), phase }],
        }
    }

    pub fn gaussian_well(depth: f64, width: f64, center: &[f64]) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::invalid("gaussian well width must be positive"));
        }
        Ok(ExternalPotential::GaussianWell { depth, width, center: RVec::from_column_slice(center) })
    }

    pub fn dim(&self) -> usize {
        match self {
            ExternalPotential::Zero { dim } | ExternalPotential::CosineSum { dim, .. } => *dim,
            ExternalPotential::Quadratic { center, .. } | ExternalPotential::GaussianWell { center, .. } => {
                center.len()
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ExternalPotential::Zero { .. } => "zero",
            ExternalPotential::Quadratic { .. } => "quadratic",
            ExternalPotential::CosineSum { .. } => "cosine_sum",
            ExternalPotential::GaussianWell { .. } => "gaussian_well",
        }
    }

    pub fn derivative_order_supported(&self) -> usize {
        MAX_DERIVATIVE_ORDER
    }

    /// Whether `W` is periodic on the box with the given side lengths.
    pub fn is_box_periodic(&self, lengths: &[f64]) -> bool {
        match self {
            ExternalPotential::Zero { .. } => true,
            ExternalPotential::CosineSum { terms, .. } => terms.iter().all(|t| {
                t.wavevector.iter().zip(lengths).all(|(k, l)| {
                    let cycles = k * l / (2.0 * core::f64::consts::PI);
                    (cycles - cycles.round()).abs() < 1e-9
                })
            }),
            ExternalPotential::Quadratic { hessian, gradient, .. } => {
                hessian.iter().all(|&h| h == 0.0) && gradient.iter().all(|&g| g == 0.0)
            }
            ExternalPotential::GaussianWell { depth, .. } => *depth == 0.0,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.derivative(x, 0).expect("order 0 is supported").value()
    }

    pub fn gradient(&self, x: &[f64]) -> RVec {
        self.derivative(x, 1).expect("order 1 is supported").to_vector()
    }

    pub fn hessian(&self, x: &[f64]) -> RMat {
        self.derivative(x, 2).expect("order 2 is supported").to_matrix()
    }

    pub fn third(&self, x: &[f64]) -> Tensor {
        self.derivative(x, 3).expect("order 3 is supported")
    }

    /// The symmetric tensor `∂^k W(x)`.
    pub fn derivative(&self, x: &[f64], order: usize) -> Result<Tensor> {
        eval_w_derivatives(self, x, order)
    }
}

/// Closed-form derivative tensor of order `order` at `x`.
pub fn eval_w_derivatives(w: &ExternalPotential, x: &[f64], order: usize) -> Result<Tensor> {
    if order > MAX_DERIVATIVE_ORDER {
        return Err(Error::UnsupportedOrder { order, max: MAX_DERIVATIVE_ORDER });
    }
    let d = w.dim();
    if x.len() != d {
        return Err(Error::invalid("evaluation point has the wrong dimension"));
    }
    let mut out = Tensor::zeros(d, order);
    match w {
        ExternalPotential::Zero { .. } => {}
        ExternalPotential::Quadratic { hessian, gradient, center } => {
            let delta = RVec::from_column_slice(x) - center;
            let sym = 0.5 * (hessian + hessian.transpose());
            match order {
                0 => out = Tensor::scalar(0.5 * delta.dot(&(&sym * &delta)) + gradient.dot(&delta)),
                1 => out = Tensor::from_vector(&(&sym * &delta + gradient)),
                2 => out = Tensor::from_matrix(&sym),
                _ => {}
            }
        }
        ExternalPotential::CosineSum { terms, .. } => {
            for t in terms {
                let th = t.wavevector.iter().zip(x).map(|(k, xi)| k * xi).sum::<f64>() + t.phase;
                // d^n/dθ^n cos θ = cos(θ + nπ/2)
                let c = t.amplitude * (th + order as f64 * core::f64::consts::FRAC_PI_2).cos();
                add_outer(&mut out, &t.wavevector, c);
            }
        }
        ExternalPotential::GaussianWell { depth, width, center } => {
            let u: Vec<f64> = x.iter().zip(center.iter()).map(|(a, c)| (a - c) / width).collect();
            let f = (-0.5 * u.iter().map(|v| v * v).sum::<f64>()).exp();
            let scale = -depth * f / width.powi(order as i32);
            gaussian_hermite(&mut out, &u, scale);
        }
    }
    Ok(out)
}

/// Adds `c·k⊗…⊗k` to `out`.
fn add_outer(out: &mut Tensor, k: &RVec, c: f64) {
    let d = out.dim();
    let order = out.order();
    let mut idx = vec![0usize; order];
    let total = d.pow(order as u32);
    for flat in 0..total {
        let mut rem = flat;
        for slot in idx.iter_mut().rev() {
            *slot = rem % d.max(1);
            rem /= d.max(1);
        }
        let v = idx.iter().fold(c, |acc, &i| acc * k[i]);
        out.set(&idx, out.get(&idx) + v);
    }
}

/// Fills `out` with `scale · (∂_u)^k exp(−|u|²/2) / exp(−|u|²/2)`.
fn gaussian_hermite(out: &mut Tensor, u: &[f64], scale: f64) {
    let d = u.len();
    let dl = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    match out.order() {
        0 => *out = Tensor::scalar(scale),
        1 => {
            for i in 0..d {
                out.set(&[i], -u[i] * scale);
            }
        }
        2 => {
            for i in 0..d {
                for j in 0..d {
                    out.set(&[i, j], (u[i] * u[j] - dl(i, j)) * scale);
                }
            }
        }
        3 => {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let v = -u[i] * u[j] * u[k] + dl(i, j) * u[k] + dl(i, k) * u[j] + dl(j, k) * u[i];
                        out.set(&[i, j, k], v * scale);
                    }
                }
            }
        }
        _ => {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        for l in 0..d {
                            let v = u[i] * u[j] * u[k] * u[l]
                                - dl(i, j) * u[k] * u[l]
                                - dl(i, k) * u[j] * u[l]
                                - dl(i, l) * u[j] * u[k]
                                - dl(j, k) * u[i] * u[l]
                                - dl(j, l) * u[i] * u[k]
                                - dl(k, l) * u[i] * u[j]
                                + dl(i, j) * dl(k, l)
                                + dl(i, k) * dl(j, l)
                                + dl(i, l) * dl(j, k);
                            out.set(&[i, j, k, l], v * scale);
                        }
                    }
                }
            }
        }
    }
}
