//! Fixed-step classical Runge–Kutta integration of `y' = f(t, y)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// One RK4 step of size `dt`, in place.
pub fn rk4_step<F>(f: &mut F, t: f64, y: &mut [f64], dt: f64) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(t, y, &mut k1)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    f(t + 0.5 * dt, &tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    f(t + 0.5 * dt, &tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    f(t + dt, &tmp, &mut k4)?;
    for i in 0..n {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

/// Number of equal steps of size at most `dt` covering `[t0, t1]`.
pub fn step_count(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("time step must be positive"));
    }
    if !(t1 >= t0) {
        return Err(Error::invalid("end time precedes start time"));
    }
    let n = ((t1 - t0) / dt - 1e-9).ceil();
    Ok((n as usize).max(if t1 > t0 { 1 } else { 0 }))
}

/// Integrates from `t0` to `t1` with equal steps no larger than `dt`.
pub fn rk4_integrate<F>(mut f: F, t0: f64, t1: f64, dt: f64, y: &mut [f64]) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = step_count(t0, t1, dt)?;
    if n == 0 {
        return Ok(());
    }
    let h = (t1 - t0) / n as f64;
    for k in 0..n {
        rk4_step(&mut f, t0 + k as f64 * h, y, h)?;
    }
    Ok(())
}

/// Samples the solution at `t0 + k·h` for every step; the first entry is the initial state.
pub fn rk4_trajectory<F>(mut f: F, t0: f64, t1: f64, dt: f64, y0: &[f64]) -> Result<Vec<(f64, Vec<f64>)>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = step_count(t0, t1, dt)?;
    let h = if n == 0 { 0.0 } else { (t1 - t0) / n as f64 };
    let mut y = y0.to_vec();
    let mut out = Vec::with_capacity(n + 1);
    out.push((t0, y.clone()));
    for k in 0..n {
        rk4_step(&mut f, t0 + k as f64 * h, &mut y, h)?;
        out.push((t0 + (k + 1) as f64 * h, y.clone()));
    }
    Ok(out)
}
