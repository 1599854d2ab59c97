use thiserror::Error;

use crate::graph::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("neighbor {neighbor} of vertex {vertex} is out of range (vertex count {count})")]
    OutOfRangeNeighbor {
        vertex: usize,
        neighbor: usize,
        count: usize,
    },
    #[error("undirected edge {from}->{to} has no reverse entry")]
    AsymmetricUndirectedEdge { from: usize, to: usize },
    #[error("vertex {vertex} lists neighbor {neighbor} more than once")]
    DuplicateNeighbor { vertex: usize, neighbor: usize },
    #[error("vertex {vertex} is out of range (vertex count {count})")]
    OutOfRangeVertex { vertex: usize, count: usize },
    #[error("invalid grid spec: {0}")]
    InvalidGridSpec(String),
    #[error("invalid scenario: {}", format_violations(.0))]
    InvalidScenario(Vec<Violation>),

    #[error("game is already over")]
    GameOver,
    #[error("game is not over")]
    GameNotOver,
    #[error("illegal move: {0}")]
    IllegalMove(String),

    #[error("PathExplosion: more than {cap} paths")]
    PathExplosion { cap: usize },
    #[error("no feasible path from {start} to any exit within {max_len} moves")]
    NoFeasiblePath { start: usize, max_len: usize },
    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("policy incompatible: {0}")]
    PolicyIncompatible(String),
    #[error("StateSpaceTooLarge: {states} states exceed bound {bound}")]
    StateSpaceTooLarge { states: usize, bound: usize },
    #[error("empty path set")]
    EmptyPathSet,
    #[error("empty mixture")]
    EmptyMixture,
    #[error("weights do not match: {0}")]
    WeightMismatch(String),
    #[error("InfoCaseUnsupported: {0}")]
    InfoCaseUnsupported(String),

    #[error("DimensionMismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("NonConvergence after {iterations} iterations (gap {gap:.3e})")]
    NonConvergence { iterations: usize, gap: f64 },

    #[error("TreeTooLarge: game tree exceeds {cap} nodes")]
    TreeTooLarge { cap: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
