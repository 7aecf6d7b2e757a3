//! Built-in scenarios `free`, `mathieu-1d` and `asym-2d`.

use std::f64::consts::PI;
use std::path::PathBuf;

use crate::config::*;
use crate::{HarnessError, Result};

pub const SCENARIOS: [&str; 3] = ["free", "mathieu-1d", "asym-2d"];

fn sweep() -> Vec<f64> {
    vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
}

fn base(name: &str, dim: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        dim,
        lattice: LatticeConfig { period: Some(2.0 * PI), generators: None },
        potential: Vec::new(),
        cutoff: 10.0,
        band: 1,
        gap_threshold: 0.05,
        external: ExternalConfig::Zero,
        q0: vec![0.0; dim],
        p0: vec![0.0; dim],
        envelope: EnvelopeConfig::default(),
        gauge: GaugeConfig::default(),
        epsilons: sweep(),
        horizon: 1.0,
        checkpoint_interval: 0.01,
        ehrenfest_constant: 1.0,
        steppers: StepperConfig::default(),
        direct: DirectConfig::default(),
        checks: CheckConfig::default(),
        output: PathBuf::from("out").join(name),
        workers: 0,
        seed: 0,
    }
}

/// `V = 0`, `W = 0`: the ansatz is exact and the corrector sits at the discretization floor.
pub fn free() -> ExperimentConfig {
    let mut c = base("free", 1);
    c.lattice.period = Some(PI / 2.0);
    c.cutoff = 6.0;
    c.p0 = vec![0.5];
    c.direct.points = 8192;
    c.checks.corrector_ceiling = Some(1e-6);
    c.checks.hamiltonian_drift_max = Some(1e-8);
    c.checks.symplectic_residual_max = Some(1e-9);
    c
}

/// `V(z) = 2cos z`, `W(x) = 0.1cos x`, band 1, `p0 = 0.3`.
pub fn mathieu_1d() -> ExperimentConfig {
    let mut c = base("mathieu-1d", 1);
    c.potential = vec![FourierEntry { m: vec![1], re: 1.0, im: 0.0 }];
    c.external = ExternalConfig::Cosine { terms: vec![CosineConfig { amplitude: 0.1, wavevector: vec![1.0], phase: 0.0 }] };
    c.p0 = vec![0.3];
    c.checks.corrected_slope = Some([0.8, 1.2]);
    c.checks.leading_slope = Some([0.35, 0.65]);
    c.checks.expansion_slope_min = Some(1.2);
    c.checks.field_position_slope_min = Some(0.8);
    c.checks.hamiltonian_drift_max = Some(1e-8);
    c.checks.symplectic_residual_max = Some(1e-9);
    c
}

/// Square lattice without inversion symmetry and a linear ramp along the first axis.
pub fn asym_2d() -> ExperimentConfig {
    let mut c = base("asym-2d", 2);
    let polar = |r: f64, phi: f64| (r * phi.cos(), r * phi.sin());
    let (re, im) = polar(0.8, 0.7);
    c.potential = vec![
        FourierEntry { m: vec![1, 0], re: 1.0, im: 0.0 },
        FourierEntry { m: vec![0, 1], re: 1.0, im: 0.0 },
        FourierEntry { m: vec![1, 1], re, im },
    ];
    c.cutoff = 4.0;
    c.external = ExternalConfig::Linear { gradient: vec![0.5, 0.0] };
    c.p0 = vec![0.1, 0.2];
    c.epsilons = vec![1.0 / 16.0];
    c.direct.box_length = 2.0 * PI;
    c.direct.points = 512;
    c.direct.leading_only = true;
    c.checks.hamiltonian_drift_max = Some(1e-8);
    c.checks.symplectic_residual_max = Some(1e-9);
    c
}

pub fn builtin(name: &str) -> Option<ExperimentConfig> {
    match name {
        "free" => Some(free()),
        "mathieu-1d" => Some(mathieu_1d()),
        "asym-2d" => Some(asym_2d()),
        _ => None,
    }
}

/// A built-in scenario name or a path to a TOML file.
pub fn resolve(spec: &str) -> Result<ExperimentConfig> {
    if let Some(c) = builtin(spec) {
        return Ok(c);
    }
    let path = std::path::Path::new(spec);
    if path.exists() {
        return ExperimentConfig::load(path);
    }
    Err(HarnessError::Config(format!("'{spec}' is neither a scenario ({}) nor a file", SCENARIOS.join(", "))))
}
