//! Read-mostly memo of band data keyed by the rounded quasi-momentum.

use std::collections::HashMap;
use std::sync::RwLock;

use wavepacket_core::bands::{BandOracle, BandPoint};
use wavepacket_core::Result;

type Key = (Vec<i64>, bool);

/// Wraps a band oracle; safe to share across sweep workers.
pub struct CachedBand<B> {
    inner: B,
    entries: RwLock<HashMap<Key, BandPoint>>,
    capacity: usize,
}

pub const DEFAULT_CAPACITY: usize = 1 << 18;

impl<B: BandOracle> CachedBand<B> {
    pub fn new(inner: B) -> Self {
        CachedBand { inner, entries: RwLock::new(HashMap::new()), capacity: DEFAULT_CAPACITY }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    pub fn len(&self) -> usize {
        self.entries.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn key(p: &[f64], full: bool) -> Key {
        (p.iter().map(|x| (x * 1e12).round() as i64).collect(), full)
    }

    fn lookup(&self, p: &[f64], full: bool, compute: impl FnOnce() -> Result<BandPoint>) -> Result<BandPoint> {
        let key = Self::key(p, full);
        if let Some(hit) = self.entries.read().ok().and_then(|m| m.get(&key).cloned()) {
            if hit.p.iter().zip(p).all(|(a, b)| a == b) {
                return Ok(hit);
            }
        }
        let value = compute()?;
        if let Ok(mut m) = self.entries.write() {
            if m.len() < self.capacity {
                m.insert(key, value.clone());
            }
        }
        Ok(value)
    }
}

impl<B: BandOracle> BandOracle for CachedBand<B> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn point(&self, p: &[f64]) -> Result<BandPoint> {
        self.lookup(p, true, || self.inner.point(p))
    }

    fn first_order(&self, p: &[f64]) -> Result<BandPoint> {
        self.lookup(p, false, || self.inner.first_order(p))
    }
}
