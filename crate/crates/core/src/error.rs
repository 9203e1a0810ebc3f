use thiserror::Error;

/// Errors produced anywhere in the twin / planning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("plant has no non-rejected components")]
    EmptyPlant,

    #[error("unknown component id {0}")]
    UnknownComponent(u32),

    #[error("annotation payload path does not resolve: {0}")]
    MissingPayload(String),

    #[error("no fiducial observations")]
    NoObservations,

    #[error("no turntable calibration for camera {camera_id} at angle index {angle_index}")]
    MissingCalibration { camera_id: u32, angle_index: u32 },

    #[error("leaf cannot be aligned to the camera (residual {residual_deg:.2} deg)")]
    Unalignable { residual_deg: f64 },

    #[error("tool pose outside workspace: {0}")]
    OutOfWorkspace(String),

    #[error("leaf length {length:.4} m below minimum {minimum:.4} m")]
    LeafTooSmall { length: f64, minimum: f64 },

    #[error("unknown simulator leaf {0}")]
    UnknownLeaf(usize),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("expected file version {expected:?}, found {found:?}")]
    VersionMismatch { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
