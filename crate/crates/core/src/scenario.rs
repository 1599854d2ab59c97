//! Scenario files (TOML), bundled benchmarks and result rows.
//!
//! A scenario names the graph, the starting positions, the horizon and
//! info case, how evader paths are enumerated and the solver settings:
//!
//! ```toml
//! id = "hard"
//! horizon = 4
//! info_case = "pursuer-sees-evader"
//! exits = [4, 12]
//! pursuer_starts = [8]
//! evader_start = 0
//!
//! [graph]
//! kind = "grid"
//! rows = 7
//! cols = 7
//! side_exist_prob = 1.0
//! diagonal_exist_prob = 0.0
//! seed = 0
//!
//! [eval]
//! path_mode = "walks"
//! max_len = 4
//!
//! [solver]
//! eps = 1e-4
//! max_iters = 200
//! ```
//!
//! `kind = "adjacency"` takes `directed` and `adjacency` (one neighbor list
//! per vertex) plus optional `weights` instead of the grid fields. Unknown
//! keys are rejected everywhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{GameConfig, InfoCase};
use crate::error::{Error, Result};
use crate::graph::{generate_grid, Graph, GridSpec, Vertex};
use crate::meta::DoOptions;
use crate::paths::{enumerate_paths, EvaderPath, PathMode, PathOptions, PathSet, DEFAULT_PATH_CAP};

/// Seeds are 64-bit unsigned but TOML integers are signed: seeds above
/// `i64::MAX` are written as decimal strings, and both forms are read.
pub(crate) mod seed_format {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        struct Seed;
        impl Visitor<'_> for Seed {
            type Value = u64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a nonnegative integer or a decimal string")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<u64, E> {
                u64::try_from(v).map_err(|_| E::custom(format!("negative seed {v}")))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<u64, E> {
                Ok(v)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<u64, E> {
                v.parse().map_err(|_| E::custom(format!("bad seed {v:?}")))
            }
        }
        d.deserialize_any(Seed)
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub id: String,
    pub horizon: usize,
    pub info_case: InfoCase,
    #[serde(default = "yes")]
    pub allow_stay: bool,
    #[serde(default = "yes")]
    pub capture_before_escape: bool,
    pub exits: Vec<Vertex>,
    pub pursuer_starts: Vec<Vertex>,
    pub evader_start: Vertex,
    pub graph: GraphSource,
    pub eval: EvalSection,
    #[serde(default)]
    pub solver: SolverSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphSource {
    Grid(GridSpec),
    Adjacency(AdjacencySource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjacencySource {
    pub directed: bool,
    pub adjacency: Vec<Vec<Vertex>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<f64>>>,
}

fn default_path_cap() -> usize {
    DEFAULT_PATH_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub path_mode: PathMode,
    pub max_len: usize,
    #[serde(default = "default_path_cap")]
    pub path_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Do,
    Cfr,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Do => "do",
            SolverKind::Cfr => "cfr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Target bound gap for double oracle.
    pub eps: f64,
    pub max_iters: usize,
    pub mc_samples: usize,
    #[serde(with = "seed_format")]
    pub seed: u64,
    pub cfr_iterations: usize,
    /// Solvers run by `bench`.
    pub bench: Vec<SolverKind>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            eps: 1e-4,
            max_iters: 200,
            mc_samples: 100_000,
            seed: 0,
            cfr_iterations: 10_000,
            bench: vec![SolverKind::Do],
        }
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<ScenarioFile> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn graph(&self) -> Result<Graph> {
        let g = match &self.graph {
            GraphSource::Grid(spec) => generate_grid(spec)?,
            GraphSource::Adjacency(a) => {
                let g = Graph::from_adjacency(a.adjacency.clone(), a.directed)?;
                match &a.weights {
                    Some(w) => g.with_weights(w.clone())?,
                    None => g,
                }
            }
        };
        g.with_exits(self.exits.iter().copied())
    }

    /// The game this file describes, validated.
    pub fn config(&self) -> Result<GameConfig> {
        let mut c = GameConfig::new(
            self.graph()?,
            self.pursuer_starts.clone(),
            self.evader_start,
            self.horizon,
            self.info_case,
        );
        c.allow_stay = self.allow_stay;
        c.capture_before_escape = self.capture_before_escape;
        c.validate()?;
        Ok(c)
    }

    pub fn path_options(&self) -> PathOptions {
        PathOptions {
            mode: self.eval.path_mode,
            max_len: self.eval.max_len,
            allow_stay: self.allow_stay,
            cap: self.eval.path_cap,
        }
    }

    pub fn paths(&self, config: &GameConfig) -> Result<PathSet> {
        enumerate_paths(&config.graph, config.evader_start, &self.path_options())
    }

    pub fn do_options(&self) -> DoOptions {
        DoOptions::new(self.solver.eps, self.solver.max_iters)
    }
}

/// Initial double oracle column: one path drawn from `full` by `seed`.
pub fn seed_paths(full: &PathSet, seed: u64) -> Result<Vec<EvaderPath>> {
    if full.is_empty() {
        return Err(Error::EmptyPathSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![full.paths()[rng.gen_range(0..full.len())].clone()])
}

const BUNDLED: [(&str, &str); 3] = [
    ("easy", include_str!("../scenarios/easy.toml")),
    ("hard", include_str!("../scenarios/hard.toml")),
    ("small", include_str!("../scenarios/small.toml")),
];

/// The bundled benchmark scenarios, in a fixed order.
pub fn bundled() -> Vec<ScenarioFile> {
    BUNDLED
        .iter()
        .map(|(name, text)| {
            let s = ScenarioFile::parse(text).unwrap_or_else(|e| panic!("bundled {name}: {e}"));
            assert_eq!(s.id, *name);
            s
        })
        .collect()
}

pub fn bundled_scenario(id: &str) -> Option<ScenarioFile> {
    bundled().into_iter().find(|s| s.id == id)
}

/// One line of a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub solver: String,
    pub value: f64,
    /// Bound gap (double oracle), exploitability (CFR) or standard error.
    pub gap: f64,
    pub iterations: usize,
    pub wall_ms: f64,
}

impl ResultRow {
    pub fn csv_header(timing: bool) -> &'static str {
        if timing {
            "scenario,solver,value,gap_or_stderr,iterations,wall_ms"
        } else {
            "scenario,solver,value,gap_or_stderr,iterations"
        }
    }

    pub fn csv_row(&self, timing: bool) -> String {
        let mut row = format!(
            "{},{},{:.9},{:.9},{}",
            self.scenario, self.solver, self.value, self.gap, self.iterations
        );
        if timing {
            row.push_str(&format!(",{:.3}", self.wall_ms));
        }
        row
    }
}
