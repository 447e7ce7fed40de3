use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("edge {src} -> {dst} appears more than once")]
    DuplicateEdge { src: usize, dst: usize },
    #[error("self-loop at node {node}")]
    SelfLoop { node: usize },
    #[error("edge {src} -> {dst} has non-positive weight {weight}")]
    NonPositiveWeight { src: usize, dst: usize, weight: String },
    #[error("node id {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("graph has no nodes")]
    EmptyGraph,

    #[error("transient nodes {nodes:?} cannot reach the absorbing set; the fundamental matrix does not exist")]
    UnreachableTransient { nodes: Vec<usize> },
    #[error("matrix is singular: pivot {pivot:e} at step {step} is below the threshold")]
    Singular { step: usize, pivot: f64 },
    #[error("node {node} is not transient for this fundamental matrix")]
    NotTransient { node: usize },
    #[error("node sets overlap at node {node}")]
    OverlappingSets { node: usize },
    #[error("inversion residual {residual:e} exceeds {limit:e}")]
    Residual { residual: f64, limit: f64 },

    #[error("evaporation factor {alpha} is outside (0, 1]")]
    InvalidAlpha { alpha: f64 },
    #[error(
        "alpha {alpha:e} underflows over paths of length {diameter_bound}; the smallest safe alpha is \
         {min_safe_alpha:e} (try exact-diameter mode)"
    )]
    UnderflowRisk { alpha: f64, diameter_bound: f64, min_safe_alpha: f64 },
    #[error(
        "alpha bound underflows double precision (d_max={d_max}, L_max={l_max}, delta={delta}); \
         recompute with the exact diameter or reduce the graph"
    )]
    BoundUnderflow { d_max: usize, l_max: f64, delta: f64 },
    #[error("alpha {alpha:e} exceeds the safe bound {bound:e}; pass the unsafe override to accept it")]
    AlphaAboveBound { alpha: f64, bound: f64 },
    #[error("the error bound diverges at alpha = 1")]
    BoundDiverges,
    #[error("invalid bound parameters: {0}")]
    InvalidBoundInput(String),
    #[error(
        "cost {cost} leaves residual {residual} outside the rounding window ({low}, {high}); alpha is too \
         large for this instance"
    )]
    RoundingWindow { cost: f64, residual: f64, low: f64, high: f64 },

    #[error("target {target} is in the failure set")]
    TargetInFailures { target: usize },
    #[error("failure node {node} listed more than once")]
    DuplicateFailure { node: usize },
    #[error("successor chain starting at node {node} contains a cycle")]
    SuccessorCycle { node: usize },

    #[error("not an oracle file (bad magic)")]
    BadMagic,
    #[error("unsupported oracle format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("oracle checksum mismatch: stored {stored:016x}, computed {computed:016x}")]
    Checksum { stored: u64, computed: u64 },
    #[error("oracle file truncated")]
    Truncated,
    #[error("oracle file is malformed: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Errors raised by numerical guards rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::UnreachableTransient { .. }
                | Error::Singular { .. }
                | Error::Residual { .. }
                | Error::UnderflowRisk { .. }
                | Error::BoundUnderflow { .. }
                | Error::BoundDiverges
                | Error::RoundingWindow { .. }
                | Error::SuccessorCycle { .. }
        )
    }
}
