use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("singular cell with periodic boundaries enabled")]
    SingularCell,

    #[error("cutoff must be positive, got {0}")]
    NonPositiveCutoff(f64),

    #[error("atoms {i} and {j} overlap (distance {distance:e} Å)")]
    OverlappingAtoms { i: usize, j: usize, distance: f64 },

    #[error("atom index {index} out of range for {len} atoms")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("extended-XYZ parse error at line {line}: {msg}")]
    Xyz { line: usize, msg: String },

    #[error("irreps parse error: {0}")]
    IrrepsParse(String),

    #[error("expected a unit vector, |u| = {0}")]
    NotUnitVector(f64),

    #[error("matrix is not a proper rotation")]
    NotRotation,

    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("output irrep {0} is not reachable from the inputs")]
    UnreachableIrrep(String),

    #[error("invalid qubit index {qubit} for a {n_qubits}-qubit register")]
    InvalidQubit { qubit: usize, n_qubits: usize },

    #[error("register of {0} qubits exceeds the simulator limit")]
    TooManyQubits(usize),

    #[error("shot count must be at least 1")]
    ZeroShots,

    #[error("gradients require exact-expectation mode")]
    GradientInShotsMode,

    #[error("forces unavailable under finite shots: analytic gradients of a sampled estimator are undefined")]
    ForcesUnavailableUnderShots,

    #[error("unknown species Z = {0}")]
    UnknownSpecies(u32),

    #[error("readout has no shot concept: {0}")]
    NotQuantumReadout(String),

    #[error("missing reference labels: {0}")]
    MissingLabels(String),

    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),

    #[error("non-silicon species Z = {0} in Stillinger-Weber evaluation")]
    NonSilicon(u32),

    #[error("unphysical configuration: atoms {i} and {j} at {distance:.3} Å")]
    UnphysicalDensity { i: usize, j: usize, distance: f64 },

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("atom {0} escaped the simulation region")]
    AtomEscaped(usize),

    #[error("r_max {r_max} exceeds half the minimum cell width {half_width}")]
    RdfRangeTooLarge { r_max: f64, half_width: f64 },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("unsupported checkpoint format version {0}")]
    UnsupportedFormat(u32),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
