//! Urban network security games: a pursuer team chases an evader heading
//! for an exit on a road graph.
//!
//! The crate covers graph construction, the simultaneous-move dynamics,
//! evader path enumeration, exact and sampled evaluation of pursuer
//! policies, best-response oracles, a double oracle solver and tabular CFR.

pub mod cfr;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod meta;
pub mod oracles;
pub mod paths;
pub mod scenario;

pub use error::{Error, Result};
