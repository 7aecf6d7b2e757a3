//! Uniform periodic tensor grids, spectral derivatives, quadrature and resampling.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::fft::FftNd;
use crate::{Error, Result, C64};
#[allow(unused_imports)]
use num_traits::Float;

/// Uniform grid on the box `∏ [cₖ − Lₖ/2, cₖ + Lₖ/2)`, stored row-major (last axis fastest).
#[derive(Debug, Clone)]
pub struct TensorGrid {
    lengths: Vec<f64>,
    points: Vec<usize>,
    centers: Vec<f64>,
    fft: FftNd,
}

impl PartialEq for TensorGrid {
    fn eq(&self, other: &Self) -> bool {
        self.lengths == other.lengths && self.points == other.points && self.centers == other.centers
    }
}

impl TensorGrid {
    pub fn new(lengths: &[f64], points: &[usize], centers: &[f64]) -> Result<Self> {
        if lengths.len() != points.len() || lengths.len() != centers.len() || lengths.is_empty() {
            return Err(Error::invalid("grid axes must agree in number and be non-empty"));
        }
        if lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::invalid("grid lengths must be positive"));
        }
        let fft = FftNd::new(points)?;
        Ok(TensorGrid { lengths: lengths.to_vec(), points: points.to_vec(), centers: centers.to_vec(), fft })
    }

    /// Grid centred at the origin with the same length and point count on every axis.
    pub fn centered(dim: usize, length: f64, points: usize) -> Result<Self> {
        TensorGrid::new(&vec![length; dim], &vec![points; dim], &vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.points[axis] as f64
    }

    /// Quadrature weight of one grid point.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    pub fn coordinates(&self, axis: usize) -> Vec<f64> {
        let h = self.spacing(axis);
        let start = self.centers[axis] - 0.5 * self.lengths[axis];
        (0..self.points[axis]).map(|j| start + j as f64 * h).collect()
    }

    /// Angular frequencies in FFT order; index `N/2` carries the negative Nyquist frequency.
    pub fn frequencies(&self, axis: usize) -> Vec<f64> {
        let n = self.points[axis];
        let dk = 2.0 * PI / self.lengths[axis];
        (0..n).map(|j| if j < n / 2 { j as f64 * dk } else { (j as f64 - n as f64) * dk }).collect()
    }

    /// Multi-index of a flat position.
    pub fn unravel(&self, mut flat: usize, idx: &mut [usize]) {
        for axis in (0..self.dim()).rev() {
            idx[axis] = flat % self.points[axis];
            flat /= self.points[axis];
        }
    }

    /// Calls `f(flat, coordinates)` for every grid point in storage order.
    pub fn for_each_point(&self, mut f: impl FnMut(usize, &[f64])) {
        let coords: Vec<Vec<f64>> = (0..self.dim()).map(|k| self.coordinates(k)).collect();
        self.visit(&coords, &mut f);
    }

    /// Calls `f(flat, frequencies)` for every Fourier mode in storage order.
    pub fn for_each_mode(&self, mut f: impl FnMut(usize, &[f64])) {
        let freqs: Vec<Vec<f64>> = (0..self.dim()).map(|k| self.frequencies(k)).collect();
        self.visit(&freqs, &mut f);
    }

    fn visit(&self, axes: &[Vec<f64>], f: &mut impl FnMut(usize, &[f64])) {
        let d = self.dim();
        let mut idx = vec![0usize; d];
        let mut pos = vec![0.0; d];
        for flat in 0..self.len() {
            self.unravel(flat, &mut idx);
            for k in 0..d {
                pos[k] = axes[k][idx[k]];
            }
            f(flat, &pos);
        }
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> C64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        self.for_each_point(|i, x| out[i] = f(x));
        out
    }

    pub fn forward(&self, data: &mut [C64]) {
        self.fft.forward(data);
    }

    pub fn inverse(&self, data: &mut [C64]) {
        self.fft.inverse(data);
    }

    /// Applies a Fourier multiplier `m(ξ)` to periodic samples.
    pub fn fourier_multiply(&self, samples: &[C64], m: impl Fn(&[f64]) -> C64) -> Vec<C64> {
        let mut work = samples.to_vec();
        self.forward(&mut work);
        self.for_each_mode(|i, xi| work[i] *= m(xi));
        self.inverse(&mut work);
        work
    }

    /// `(−i∂_axis) f` by spectral differentiation.
    pub fn momentum(&self, samples: &[C64], axis: usize) -> Vec<C64> {
        self.fourier_multiply(samples, |xi| C64::new(xi[axis], 0.0))
    }

    /// `∂_axis f` by spectral differentiation.
    pub fn derivative(&self, samples: &[C64], axis: usize) -> Vec<C64> {
        self.fourier_multiply(samples, |xi| C64::new(0.0, xi[axis]))
    }

    /// `⟨f, g⟩ = ∫ f̄ g` by the trapezoidal (spectrally accurate) rule.
    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        let s = f.iter().zip(g).fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b);
        s * self.cell_volume()
    }

    pub fn norm(&self, f: &[C64]) -> f64 {
        (f.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell_volume()).sqrt()
    }

    /// Largest magnitude on the outermost shell of grid points.
    pub fn shell_max(&self, f: &[C64]) -> f64 {
        let mut worst: f64 = 0.0;
        let mut idx = vec![0usize; self.dim()];
        for (flat, z) in f.iter().enumerate() {
            self.unravel(flat, &mut idx);
            if idx.iter().zip(&self.points).any(|(&i, &n)| i == 0 || i + 1 == n) {
                worst = worst.max(z.norm());
            }
        }
        worst
    }

    /// Largest magnitude within `fraction` of the box length from any edge.
    pub fn edge_band_max(&self, f: &[C64], fraction: f64) -> f64 {
        let bands: Vec<usize> =
            self.points.iter().map(|&n| ((fraction * n as f64).ceil() as usize).max(1)).collect();
        let mut worst: f64 = 0.0;
        let mut idx = vec![0usize; self.dim()];
        for (flat, z) in f.iter().enumerate() {
            self.unravel(flat, &mut idx);
            let near = idx.iter().zip(&self.points).zip(&bands).any(|((&i, &n), &b)| i < b || i + b >= n);
            if near {
                worst = worst.max(z.norm());
            }
        }
        worst
    }

    /// Evaluates the trigonometric interpolant of `spectrum` (the forward FFT of grid samples) on
    /// the tensor product of `targets[k]` coordinates. Targets outside the box evaluate to zero.
    pub fn resample_spectrum(&self, spectrum: &[C64], targets: &[Vec<f64>]) -> Vec<C64> {
        let d = self.dim();
        assert_eq!(targets.len(), d);
        let mut data = spectrum.to_vec();
        let mut shape = self.points.clone();
        for axis in 0..d {
            let start = self.centers[axis] - 0.5 * self.lengths[axis];
            let dk = 2.0 * PI / self.lengths[axis];
            data = contract_axis(&data, &shape, axis, targets[axis].len(), |r, row| {
                let x = targets[axis][r];
                if x < start || x >= start + self.lengths[axis] {
                    return false;
                }
                fourier_row(row, dk * (x - start));
                true
            });
            shape[axis] = targets[axis].len();
        }
        data
    }

    /// Resamples grid samples onto another tensor grid (zero outside this grid's box).
    pub fn resample(&self, samples: &[C64], targets: &[Vec<f64>]) -> Vec<C64> {
        let mut spec = samples.to_vec();
        self.forward(&mut spec);
        self.resample_spectrum(&spec, targets)
    }
}

/// `e^{iξ_j u}/n` in storage order, by a recurrence re-anchored every 32 powers.
fn fourier_row(row: &mut [C64], phase: f64) {
    let n = row.len();
    let scale = 1.0 / n as f64;
    let w = C64::from_polar(1.0, phase);
    let mut pw = C64::new(1.0, 0.0);
    for k in 0..=n / 2 {
        if k % 32 == 0 {
            pw = C64::from_polar(1.0, phase * k as f64);
        }
        if k < n / 2 || n == 1 {
            row[k] = pw * scale;
        }
        if k > 0 && k <= n / 2 {
            row[n - k] = pw.conj() * scale;
        }
        pw *= w;
    }
}

/// Applies a `rows × shape[axis]` matrix along one axis of a row-major array; `fill(r, row)`
/// writes row `r` and returns false for an all-zero row.
fn contract_axis(
    data: &[C64],
    shape: &[usize],
    axis: usize,
    rows: usize,
    mut fill: impl FnMut(usize, &mut [C64]) -> bool,
) -> Vec<C64> {
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![C64::new(0.0, 0.0); outer * rows * inner];
    let mut row = vec![C64::new(0.0, 0.0); n];
    for r in 0..rows {
        if !fill(r, &mut row) {
            continue;
        }
        for o in 0..outer {
            for i in 0..inner {
                let mut s = C64::new(0.0, 0.0);
                for (k, &m) in row.iter().enumerate() {
                    s += m * data[(o * n + k) * inner + i];
                }
                out[(o * rows + r) * inner + i] = s;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: &TensorGrid) -> Vec<C64> {
        grid.sample(|y| C64::new((-0.5 * y.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0))
    }

    #[test]
    fn norm_of_gaussian() {
        let g = TensorGrid::centered(1, 40.0, 512).unwrap();
        let f = gaussian(&g);
        assert!((g.norm(&f).powi(2) - PI.sqrt()).abs() < 1e-12);
        let g2 = TensorGrid::centered(2, 24.0, 64).unwrap();
        assert!((g2.norm(&gaussian(&g2)).powi(2) - PI).abs() < 1e-12);
    }

    #[test]
    fn spectral_derivative_of_gaussian() {
        let g = TensorGrid::centered(1, 40.0, 512).unwrap();
        let f = gaussian(&g);
        let df = g.derivative(&f, 0);
        let ys = g.coordinates(0);
        for (y, d) in ys.iter().zip(&df) {
            assert!((d.re + y * (-0.5 * y * y).exp()).abs() < 1e-12);
            assert!(d.im.abs() < 1e-12);
        }
    }

    #[test]
    fn resampling_reproduces_function_off_grid() {
        let g = TensorGrid::new(&[30.0, 30.0], &[128, 64], &[0.5, -1.0]).unwrap();
        let f = g.sample(|y| C64::new((-(y[0] - 0.5).powi(2) / 2.0).exp(), 0.0) * (-(y[1] + 1.0).powi(2) / 3.0).exp());
        let t0 = vec![0.123, 2.5, -40.0];
        let t1 = vec![-1.7, 0.31];
        let v = g.resample(&f, &[t0.clone(), t1.clone()]);
        for (i, &a) in t0.iter().enumerate() {
            for (j, &b) in t1.iter().enumerate() {
                let expect = if a < -14.5 { 0.0 } else { (-(a - 0.5).powi(2) / 2.0).exp() * (-(b + 1.0).powi(2) / 3.0).exp() };
                assert!((v[i * 2 + j].re - expect).abs() < 1e-12, "{i} {j}");
            }
        }
    }

    #[test]
    fn shells() {
        let g = TensorGrid::centered(2, 10.0, 8).unwrap();
        let mut f = vec![C64::new(0.0, 0.0); 64];
        f[3 * 8 + 3] = C64::new(1.0, 0.0);
        assert_eq!(g.shell_max(&f), 0.0);
        f[7] = C64::new(0.5, 0.0);
        assert_eq!(g.shell_max(&f), 0.5);
        assert_eq!(g.edge_band_max(&f, 0.05), 0.5);
    }
}
