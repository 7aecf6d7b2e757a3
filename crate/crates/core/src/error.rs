use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("lattice generators are singular (|det| = {det:e})")]
    SingularLattice { det: f64 },
    #[error("derivative order {order} is not supported (maximum {max})")]
    UnsupportedOrder { order: usize, max: usize },
    #[error("truncation and potential live on different lattices")]
    TruncationMismatch,
    #[error("eigensolver failed: {0}")]
    EigensolverFailure(String),
    #[error("band {band} gap {gap:e} is below the threshold {threshold:e}")]
    GapBelowThreshold { band: usize, gap: f64, threshold: f64 },
    #[error("band {band} is degenerate (gap {gap:e})")]
    DegenerateBand { band: usize, gap: f64 },
    #[error("curvature routes disagree: resolvent {resolvent:e}, plaquette {plaquette:e} (relative {relative:e})")]
    CurvatureMethodMismatch { resolvent: f64, plaquette: f64, relative: f64 },
    #[error("overlap {overlap:e} between neighbouring Bloch functions is too small")]
    OverlapTooSmall { overlap: f64 },
    #[error("gauge anchor coefficient vanished (|c| = {magnitude:e})")]
    GaugeAnchorLost { magnitude: f64 },
    #[error("A, B violate the symplectic conditions (residuals {transpose:e}, {hermitian:e})")]
    SymplecticViolation { transpose: f64, hermitian: f64 },
    #[error("symplectic residual {residual:e} exceeds the drift tolerance")]
    SymplecticDrift { residual: f64 },
    #[error("det A phase jumped by {increment:e} within one step")]
    BranchDiscontinuity { increment: f64 },
    #[error("samples on the outer shell reach {edge:e}; enlarge the domain")]
    DomainTooSmall { edge: f64 },
    #[error("step too large: refinement changes the solution by {discrepancy:e}")]
    StepTooLarge { discrepancy: f64 },
    #[error("envelope data unavailable for the corrected dynamics")]
    EnvelopeUnavailable,
    #[error("grid under-resolved: {points_per_period:.2} points per lattice period, box spans {box_in_widths:.2} envelope widths, highest Bloch frequency {frequency_ratio:.2} of Nyquist")]
    ResolutionTooLow { points_per_period: f64, box_in_widths: f64, frequency_ratio: f64 },
    #[error("box axis {axis} is not commensurate with the scaled lattice (ratio {ratio})")]
    CommensurabilityError { axis: usize, ratio: f64 },
    #[error("band data gauge differs from the gauge of the initial data")]
    GaugeMismatch,
    #[error("fields live on different grids or times")]
    GridMismatch,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
