//! Radix-2 complex FFT and its separable extension to row-major tensor grids.
//!
//! All grids in this crate have power-of-two sizes per axis. Forward transforms are
//! unnormalized; inverse transforms divide by the number of points.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Result, C64};
#[allow(unused_imports)]
use num_traits::Float;

/// Precomputed twiddles and bit-reversal table for one power-of-two length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    /// Stage twiddles laid out contiguously: the stage of length `2h` starts at `h − 1`.
    twiddles: Vec<C64>,
    inverse_twiddles: Vec<C64>,
    bitrev: Vec<usize>,
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::invalid("FFT length must be a power of two"));
        }
        let mut twiddles = Vec::with_capacity(n.max(1) - 1);
        let mut half = 1;
        while half < n {
            for k in 0..half {
                let theta = -PI * k as f64 / half as f64;
                twiddles.push(C64::new(theta.cos(), theta.sin()));
            }
            half <<= 1;
        }
        let inverse_twiddles = twiddles.iter().map(|w| w.conj()).collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        Ok(Fft { n, twiddles, inverse_twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [C64]) {
        self.transform(data, false);
    }

    pub fn inverse(&self, data: &mut [C64]) {
        self.transform(data, true);
        let scale = 1.0 / self.n as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn transform(&self, data: &mut [C64], inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n);
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let table = if inverse { &self.inverse_twiddles } else { &self.twiddles };
        let mut half = 1;
        while half < n {
            let tw = &table[half - 1..2 * half - 1];
            for block in data.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for ((u, v), w) in lo.iter_mut().zip(hi.iter_mut()).zip(tw) {
                    let t = *v * w;
                    *v = *u - t;
                    *u += t;
                }
            }
            half <<= 1;
        }
    }
}

/// Separable FFT over a row-major array with the given shape.
#[derive(Debug, Clone)]
pub struct FftNd {
    shape: Vec<usize>,
    plans: Vec<Fft>,
}

impl FftNd {
    pub fn new(shape: &[usize]) -> Result<Self> {
        let plans = shape.iter().map(|&n| Fft::new(n)).collect::<Result<Vec<_>>>()?;
        Ok(FftNd { shape: shape.to_vec(), plans })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn forward(&self, data: &mut [C64]) {
        self.apply(data, false);
    }

    pub fn inverse(&self, data: &mut [C64]) {
        self.apply(data, true);
    }

    fn apply(&self, data: &mut [C64], inverse: bool) {
        let total: usize = self.shape.iter().product();
        assert_eq!(data.len(), total);
        let d = self.shape.len();
        if d == 1 {
            if inverse {
                self.plans[0].inverse(data)
            } else {
                self.plans[0].forward(data)
            }
            return;
        }
        for axis in 0..d {
            let n = self.shape[axis];
            let inner: usize = self.shape[axis + 1..].iter().product();
            let outer = total / (n * inner);
            let mut line = vec![C64::new(0.0, 0.0); n];
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * n * inner + i;
                    for (k, z) in line.iter_mut().enumerate() {
                        *z = data[base + k * inner];
                    }
                    if inverse {
                        self.plans[axis].inverse(&mut line);
                    } else {
                        self.plans[axis].forward(&mut line);
                    }
                    for (k, z) in line.iter().enumerate() {
                        data[base + k * inner] = *z;
                    }
                }
            }
        }
    }
}
