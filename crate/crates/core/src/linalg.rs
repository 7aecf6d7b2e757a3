//! Dense vector/matrix aliases and the small tensor types used for band and potential derivatives.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::C64;
#[allow(unused_imports)]
use num_traits::Float;

pub type RVec = DVector<f64>;
pub type RMat = DMatrix<f64>;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

/// Fully stored tensor of order 0..=4 over `dim` axes (row-major, last index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dim: usize,
    order: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dim: usize, order: usize) -> Self {
        Tensor { dim, order, data: vec![0.0; dim.pow(order as u32)] }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { dim: 0, order: 0, data: vec![value] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    pub fn value(&self) -> f64 {
        self.data[0]
    }

    /// Order-1 tensor as a vector.
    pub fn to_vector(&self) -> RVec {
        assert_eq!(self.order, 1);
        RVec::from_column_slice(&self.data)
    }

    /// Order-2 tensor as a matrix.
    pub fn to_matrix(&self) -> RMat {
        assert_eq!(self.order, 2);
        RMat::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn from_matrix(m: &RMat) -> Self {
        let d = m.nrows();
        let mut t = Tensor::zeros(d, 2);
        for i in 0..d {
            for j in 0..d {
                t.set(&[i, j], m[(i, j)]);
            }
        }
        t
    }

    pub fn from_vector(v: &RVec) -> Self {
        Tensor { dim: v.len(), order: 1, data: v.iter().copied().collect() }
    }

    /// `Σ T[i₁…iₖ] v[i₁]…v[iₖ]`.
    pub fn contract_all(&self, v: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut idx = vec![0usize; self.order];
        for (flat, &t) in self.data.iter().enumerate() {
            let mut rem = flat;
            for slot in idx.iter_mut().rev() {
                *slot = rem % self.dim;
                rem /= self.dim;
            }
            total += idx.iter().fold(t, |acc, &i| acc * v[i]);
        }
        total
    }

    /// For an order-3 tensor: `out[α] = Σ_{βγ} T[α,β,γ] M[β,γ]`.
    pub fn contract_matrix(&self, m: &RMat) -> RVec {
        assert_eq!(self.order, 3);
        let d = self.dim;
        RVec::from_fn(d, |a, _| {
            let mut s = 0.0;
            for b in 0..d {
                for c in 0..d {
                    s += self.get(&[a, b, c]) * m[(b, c)];
                }
            }
            s
        })
    }

    /// For an order-3 tensor: the matrix `T[α,·,·]`.
    pub fn slice(&self, a: usize) -> RMat {
        assert_eq!(self.order, 3);
        RMat::from_fn(self.dim, self.dim, |b, c| self.get(&[a, b, c]))
    }

    /// Largest difference between an entry and any permutation of its indices.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut idx = vec![0usize; self.order];
        for flat in 0..self.data.len() {
            let mut rem = flat;
            for slot in idx.iter_mut().rev() {
                *slot = rem % self.dim;
                rem /= self.dim;
            }
            let base = self.data[flat];
            for i in 0..self.order {
                for j in i + 1..self.order {
                    let mut p = idx.clone();
                    p.swap(i, j);
                    worst = worst.max((base - self.get(&p)).abs());
                }
            }
        }
        worst
    }

    /// Average over all index permutations.
    pub fn symmetrized(&self) -> Tensor {
        let mut out = Tensor::zeros(self.dim, self.order);
        let perms = permutations(self.order);
        let mut idx = vec![0usize; self.order];
        let mut p = vec![0usize; self.order];
        for flat in 0..self.data.len() {
            let mut rem = flat;
            for slot in idx.iter_mut().rev() {
                *slot = rem % self.dim;
                rem /= self.dim;
            }
            let mut s = 0.0;
            for perm in &perms {
                for (k, &src) in perm.iter().enumerate() {
                    p[k] = idx[src];
                }
                s += self.get(&p);
            }
            out.data[flat] = s / perms.len() as f64;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// Real antisymmetric matrix stored by its strict upper triangle, so antisymmetry holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Antisymmetric {
    dim: usize,
    upper: Vec<f64>,
}

impl Antisymmetric {
    pub fn zeros(dim: usize) -> Self {
        Antisymmetric { dim, upper: vec![0.0; dim * dim.saturating_sub(1) / 2] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        // rows 0..i contribute (dim-1) + (dim-2) + ... entries
        i * (2 * self.dim - i - 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        use core::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => self.upper[self.slot(i, j)],
            Greater => -self.upper[self.slot(j, i)],
            Equal => 0.0,
        }
    }

    /// Sets `F[i,j] = value` (and hence `F[j,i] = -value`).
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        use core::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => {
                let s = self.slot(i, j);
                self.upper[s] = value;
            }
            Greater => {
                let s = self.slot(j, i);
                self.upper[s] = -value;
            }
            Equal => assert!(value == 0.0, "diagonal of an antisymmetric matrix is zero"),
        }
    }

    /// Upper-triangle entries in row-major order: (0,1), (0,2), …, (1,2), ….
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn to_matrix(&self) -> RMat {
        RMat::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Determinant of a small complex matrix.
pub fn complex_det(m: &CMat) -> C64 {
    m.clone().lu().determinant()
}

pub fn complex_inverse(m: &CMat) -> Option<CMat> {
    m.clone().lu().try_inverse()
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// Frobenius norm of a complex matrix.
pub fn cnorm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
