//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, MmlError>;

#[derive(Debug, Error)]
pub enum MmlError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "aliasing risk: degree-{degree} products of a field with {modes} modes \
         are not resolved on {n_x} points"
    )]
    AliasingRisk {
        modes: u32,
        n_x: usize,
        degree: u32,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 8], found: [u8; 8] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("declared shape overflows addressable size: {0}")]
    ShapeOverflow(String),

    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("integrator state became non-finite at substep {step}")]
    BlowUp { step: usize },

    #[error("reference field has zero norm; relative error is undefined")]
    ZeroReferenceNorm,

    #[error(
        "grid mismatch: checkpoint was built for {expected_t}x{expected_x}, \
         requested {got_t}x{got_x}"
    )]
    GridMismatch {
        expected_t: usize,
        expected_x: usize,
        got_t: usize,
        got_x: usize,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
