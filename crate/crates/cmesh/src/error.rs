use thiserror::Error;

/// Errors produced by mesh construction, codec, and partition routines.
#[derive(Debug, Error)]
pub enum CmeshError {
    #[error("face mismatch: corner counts differ ({0} vs {1})")]
    FaceMismatch(usize, usize),

    #[error("face index {face} out of range for {what}")]
    FaceOutOfRange { face: usize, what: &'static str },

    #[error("neighbor face {0} exceeds maximal face count {1}")]
    FaceCodeRange(usize, usize),

    #[error("rank {0} out of range (world size {1})")]
    RankOutOfRange(usize, usize),

    #[error("invalid offset array: {0}")]
    InvalidOffsets(String),

    #[error("invalid partition view: {0}")]
    InvalidView(String),

    #[error("tree count mismatch: old partition has {0} trees, new has {1}")]
    TreeCountMismatch(i64, i64),

    #[error("rank {rank}: missing ghost {ghost} while resolving tree {tree}")]
    MissingGhost { rank: usize, ghost: i64, tree: i64 },

    #[error("rank {rank}: duplicate ghost {ghost} (received and retained)")]
    DuplicateGhost { rank: usize, ghost: i64 },

    #[error("rank {rank}: tree {tree} delivered more than once")]
    DuplicateTree { rank: usize, tree: i64 },

    #[error("rank {rank}: tree {tree} never delivered")]
    UndeliveredTree { rank: usize, tree: i64 },

    #[error("rank {rank}: rewritten index {index} outside destination range of {dest}")]
    IndexOutOfDestRange { rank: usize, index: i64, dest: usize },

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("rank {rank}: {source}")]
    AtRank {
        rank: usize,
        #[source]
        source: Box<CmeshError>,
    },
}

pub type Result<T> = std::result::Result<T, CmeshError>;
