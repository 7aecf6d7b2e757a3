//! Experiment configuration: a TOML file with nested tables, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wavepacket_core::bands::{BlochBandModel, GaugeSpec};
use wavepacket_core::envelope::{default_envelope_box, make_gaussian, EnvelopeGrid, GaussianEnvelope};
use wavepacket_core::grid::TensorGrid;
use wavepacket_core::lattice::{build_dual_lattice, LatticeSpec, MillerIndex, PeriodicPotential};
use wavepacket_core::linalg::{CMat, RMat, RVec};
use wavepacket_core::potential::{CosineTerm, ExternalPotential};
use wavepacket_core::C64;

use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dim: usize,
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub potential: Vec<FourierEntry>,
    /// Plane-wave cutoff `|G| ≤ cutoff`.
    pub cutoff: f64,
    #[serde(default = "default_band")]
    pub band: usize,
    #[serde(default = "default_gap_threshold")]
    pub gap_threshold: f64,
    pub external: ExternalConfig,
    pub q0: Vec<f64>,
    pub p0: Vec<f64>,
    #[serde(default)]
    pub envelope: EnvelopeConfig,
    #[serde(default)]
    pub gauge: GaugeConfig,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_checkpoint")]
    pub checkpoint_interval: f64,
    /// `c̃` of the guard `T ≤ c̃·ln(1/ε_min)`.
    #[serde(default = "default_ehrenfest")]
    pub ehrenfest_constant: f64,
    #[serde(default)]
    pub steppers: StepperConfig,
    #[serde(default)]
    pub direct: DirectConfig,
    #[serde(default)]
    pub checks: CheckConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Worker pool size; 0 uses the number of CPUs.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    /// Cubic lattice with this period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// Direct generators as columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<Vec<f64>>>,
}

/// One coefficient `V̂_m = re + i·im`; partners `V̂_{−m}` are added as conjugates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierEntry {
    pub m: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExternalConfig {
    Zero,
    Harmonic { omega: f64 },
    Linear { gradient: Vec<f64> },
    Quadratic { hessian: Vec<Vec<f64>>, gradient: Vec<f64>, center: Vec<f64> },
    Cosine { terms: Vec<CosineConfig> },
    GaussianWell { depth: f64, width: f64, center: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineConfig {
    pub amplitude: f64,
    pub wavevector: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(Default)]
pub struct EnvelopeConfig {
    /// Complex matrices as `[[re, im], …]` rows; absent means `A = I`, `B = iI`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b0: Option<Vec<Vec<[f64; 2]>>>,
    /// Normalization `N`; absent means `π^{−d/4}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<[f64; 2]>,
    /// y-box side and points per axis; absent uses the built-in default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Times at which envelope snapshots are written.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}


#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<i64>>,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub slope: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperConfig {
    /// Step of the particle–field RK4 and of the envelope split step.
    pub dt: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig { dt: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectConfig {
    pub enabled: bool,
    /// Box side per axis (x units) and points per axis.
    pub box_length: f64,
    pub points: usize,
    /// Direct step as a multiple of ε.
    pub dt_over_epsilon: f64,
    /// Also reconstruct the leading-only ansatz.
    pub leading_only: bool,
    /// Write binary field snapshots at the horizon.
    pub dump_fields: bool,
}

impl Default for DirectConfig {
    fn default() -> Self {
        DirectConfig {
            enabled: true,
            box_length: 8.0 * std::f64::consts::PI,
            points: 16384,
            dt_over_epsilon: 0.01,
            leading_only: true,
            dump_fields: false,
        }
    }
}

/// Which value of the corrector norm enters the slope fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlopeStatistic {
    /// The norm at the horizon.
    Final,
    /// The largest norm over all checkpoints in `[0, T]`.
    Sup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub statistic: SlopeStatistic,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_slope: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leading_slope: Option<[f64; 2]>,
    /// Upper bound on every corrector norm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrector_ceiling: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion_slope_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_position_slope_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian_drift_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symplectic_residual_max: Option<f64>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            statistic: SlopeStatistic::Final,
            corrected_slope: None,
            leading_slope: None,
            corrector_ceiling: None,
            expansion_slope_min: None,
            field_position_slope_min: None,
            hamiltonian_drift_max: None,
            symplectic_residual_max: None,
        }
    }
}

fn default_band() -> usize {
    1
}
fn default_gap_threshold() -> f64 {
    0.05
}
fn default_horizon() -> f64 {
    1.0
}
fn default_checkpoint() -> f64 {
    0.01
}
fn default_ehrenfest() -> f64 {
    1.0
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
    pub dt: Option<f64>,
    pub epsilons: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(out) = &o.output {
            self.output = out.clone();
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(dt) = o.dt {
            self.steppers.dt = dt;
        }
        if let Some(eps) = &o.epsilons {
            self.epsilons = eps.clone();
        }
        self.validate()
    }

    /// Ehrenfest horizon `c̃·ln(1/ε_min)`, if any ε is configured.
    pub fn ehrenfest_horizon(&self) -> Option<f64> {
        self.epsilons.iter().copied().reduce(f64::min).map(|e| self.ehrenfest_constant * (1.0 / e).ln())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.dim == 0 || self.dim > 3 {
            return bad(format!("dim must be 1, 2 or 3, got {}", self.dim));
        }
        if self.q0.len() != self.dim || self.p0.len() != self.dim {
            return bad("q0 and p0 must have dim components".into());
        }
        for &e in &self.epsilons {
            if !(e > 0.0 && e <= 0.25) {
                return bad(format!("epsilon {e} outside (0, 1/4]"));
            }
            let k = (1.0 / e).log2();
            if (k - k.round()).abs() > 1e-12 {
                return bad(format!("epsilon {e} is not 1/2^k"));
            }
        }
        let mut sorted = self.epsilons.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("epsilon list has duplicates".into());
        }
        if !(self.horizon > 0.0) {
            return bad("horizon must be positive".into());
        }
        if let Some(limit) = self.ehrenfest_horizon() {
            if self.horizon > limit {
                return bad(format!(
                    "horizon {} exceeds the Ehrenfest guard c̃·ln(1/ε_min) = {limit} (c̃ = {})",
                    self.horizon, self.ehrenfest_constant
                ));
            }
        }
        if !(self.checkpoint_interval > 0.0) || !(self.steppers.dt > 0.0) || !(self.direct.dt_over_epsilon > 0.0) {
            return bad("time steps and checkpoint interval must be positive".into());
        }
        let n = (self.horizon / self.checkpoint_interval).round();
        if (n * self.checkpoint_interval - self.horizon).abs() > 1e-9 {
            return bad("checkpoint interval must divide the horizon".into());
        }
        if !self.direct.points.is_power_of_two() {
            return bad("direct.points must be a power of two".into());
        }
        if self.band == 0 {
            return bad("bands are numbered from 1".into());
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        let l = &self.lattice;
        let spec = match (&l.period, &l.generators) {
            (Some(p), None) => LatticeSpec::cubic(self.dim, *p)?,
            (None, Some(g)) => {
                if g.len() != self.dim || g.iter().any(|c| c.len() != self.dim) {
                    return Err(HarnessError::Config("generators must be dim columns of length dim".into()));
                }
                build_dual_lattice(&RMat::from_fn(self.dim, self.dim, |i, j| g[j][i]))?
            }
            _ => return Err(HarnessError::Config("lattice needs exactly one of period or generators".into())),
        };
        Ok(spec)
    }

    pub fn periodic_potential(&self) -> Result<PeriodicPotential> {
        let lattice = self.lattice()?;
        let entries = self
            .potential
            .iter()
            .map(|e| Ok((miller(&e.m, self.dim)?, C64::new(e.re, e.im))))
            .collect::<Result<Vec<_>>>()?;
        Ok(PeriodicPotential::new(lattice, &entries)?)
    }

    pub fn external(&self) -> Result<ExternalPotential> {
        let d = self.dim;
        let vec_of = |v: &[f64], what: &str| {
            if v.len() != d {
                Err(HarnessError::Config(format!("{what} must have dim components")))
            } else {
                Ok(RVec::from_column_slice(v))
            }
        };
        Ok(match &self.external {
            ExternalConfig::Zero => ExternalPotential::zero(d),
            ExternalConfig::Harmonic { omega } => ExternalPotential::harmonic(d, *omega),
            ExternalConfig::Linear { gradient } => {
                vec_of(gradient, "gradient")?;
                ExternalPotential::linear(gradient)
            }
            ExternalConfig::Quadratic { hessian, gradient, center } => {
                if hessian.len() != d || hessian.iter().any(|r| r.len() != d) {
                    return Err(HarnessError::Config("hessian must be dim × dim".into()));
                }
                ExternalPotential::Quadratic {
                    hessian: RMat::from_fn(d, d, |i, j| hessian[i][j]),
                    gradient: vec_of(gradient, "gradient")?,
                    center: vec_of(center, "center")?,
                }
            }
            ExternalConfig::Cosine { terms } => ExternalPotential::CosineSum {
                dim: d,
                terms: terms
                    .iter()
                    .map(|t| {
                        Ok(CosineTerm { amplitude: t.amplitude, wavevector: vec_of(&t.wavevector, "wavevector")?, phase: t.phase })
                    })
                    .collect::<Result<Vec<_>>>()?,
            },
            ExternalConfig::GaussianWell { depth, width, center } => {
                vec_of(center, "center")?;
                ExternalPotential::gaussian_well(*depth, *width, center)?
            }
        })
    }

    pub fn gauge_spec(&self) -> Result<GaugeSpec> {
        let anchor = match &self.gauge.anchor {
            Some(m) => Some(miller(m, self.dim)?),
            None => None,
        };
        Ok(GaugeSpec { anchor, phase: self.gauge.phase, slope: self.gauge.slope.clone() })
    }

    pub fn band_model(&self) -> Result<BlochBandModel> {
        Ok(BlochBandModel::new(
            self.periodic_potential()?,
            self.cutoff,
            self.band,
            self.gap_threshold,
            &self.gauge_spec()?,
            &self.p0,
        )?)
    }

    pub fn gaussian(&self) -> Result<GaussianEnvelope> {
        let d = self.dim;
        let e = &self.envelope;
        if e.a0.is_none() && e.b0.is_none() && e.normalization.is_none() {
            return Ok(GaussianEnvelope::ground_state(d));
        }
        let mat = |m: &Option<Vec<Vec<[f64; 2]>>>, default: CMat| -> Result<CMat> {
            match m {
                None => Ok(default),
                Some(rows) => {
                    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                        return Err(HarnessError::Config("envelope matrices must be dim × dim".into()));
                    }
                    Ok(CMat::from_fn(d, d, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
                }
            }
        };
        let a = mat(&e.a0, CMat::identity(d, d))?;
        let b = mat(&e.b0, CMat::identity(d, d) * C64::new(0.0, 1.0))?;
        let n = e.normalization.map(|z| C64::new(z[0], z[1])).unwrap_or(C64::new(
            std::f64::consts::PI.powf(-(d as f64) / 4.0),
            0.0,
        ));
        Ok(make_gaussian(n, a, b)?)
    }

    pub fn envelope_grid(&self) -> Result<EnvelopeGrid> {
        let (l, n) = default_envelope_box(self.dim);
        let grid = TensorGrid::centered(self.dim, self.envelope.box_length.unwrap_or(l), self.envelope.points.unwrap_or(n))?;
        Ok(EnvelopeGrid::from_gaussian(&self.gaussian()?, grid, 0.0))
    }

    pub fn direct_grid(&self) -> Result<TensorGrid> {
        Ok(TensorGrid::centered(self.dim, self.direct.box_length, self.direct.points)?)
    }

    /// Checkpoint times `k·Δ`, `k = 1..=T/Δ`.
    pub fn checkpoints(&self) -> Vec<f64> {
        let n = (self.horizon / self.checkpoint_interval).round() as usize;
        (1..=n).map(|k| k as f64 * self.checkpoint_interval).collect()
    }
}

fn miller(m: &[i64], d: usize) -> Result<MillerIndex> {
    if m.len() != d {
        return Err(HarnessError::Config(format!("Miller index {m:?} must have {d} components")));
    }
    let mut out = [0i64; 3];
    out[..d].copy_from_slice(m);
    Ok(out)
}

/// Parses `--eps` lists such as `1/16,1/32,0.015625`.
pub fn parse_epsilon_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|item| {
            let item = item.trim();
            let value = match item.split_once('/') {
                Some((n, d)) => {
                    let n: f64 = n.trim().parse().map_err(|_| HarnessError::Config(format!("bad epsilon {item}")))?;
                    let d: f64 = d.trim().parse().map_err(|_| HarnessError::Config(format!("bad epsilon {item}")))?;
                    n / d
                }
                None => item.parse().map_err(|_| HarnessError::Config(format!("bad epsilon {item}")))?,
            };
            Ok(value)
        })
        .collect()
}
