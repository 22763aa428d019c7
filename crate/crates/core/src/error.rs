use crate::grid_index::{BlockCoord, NodeTuple};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("component {value} of {what} is outside the packable range for {bits}-bit fields")]
    KeyRange { what: &'static str, value: i64, bits: u32 },

    #[error("node {0:?} lies in block {1:?}, which is not active")]
    InactiveBlock(NodeTuple, BlockCoord),

    #[error("node {0:?} is outside the dense grid")]
    OutsideDomain(NodeTuple),

    #[error("no particles to build a grid from")]
    NoParticles,

    #[error("particle {index} has a non-positive deformation gradient determinant ({det})")]
    InvertedParticle { index: usize, det: f64 },

    #[error("particle {0} has a non-finite position")]
    NonFinite(usize),

    #[error("invalid configuration: {0}")]
    Config(&'static str),

    #[error("hash table capacity {0} is not a power of two")]
    Capacity(usize),

    #[error("thread pool: {0}")]
    ThreadPool(alloc::string::String),
}
