//! Game graphs: grid generation, adjacency import, and scenario validation.
//!
//! Exits are a subset of vertices. Edge weights may be attached for
//! bookkeeping but no solver reads them.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::GameConfig;
use crate::error::{Error, Result};

pub type Vertex = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Vec<Vec<Vertex>>,
    exits: BTreeSet<Vertex>,
    is_exit: Vec<bool>,
    directed: bool,
    weights: Option<Vec<Vec<f64>>>,
    // move lists: [without stay, with stay]; never empty (dead ends force a stay)
    moves: [Vec<Vec<Vertex>>; 2],
}

/// Parameters of a random grid graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub side_exist_prob: f64,
    pub diagonal_exist_prob: f64,
    #[serde(with = "crate::scenario::seed_format")]
    pub seed: u64,
}

impl GridSpec {
    pub fn full(rows: usize, cols: usize) -> Self {
        GridSpec {
            rows,
            cols,
            side_exist_prob: 1.0,
            diagonal_exist_prob: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob_ok = |p: f64| p.is_finite() && (0.0..=1.0).contains(&p);
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidGridSpec(format!(
                "rows and cols must be >= 1 (got {}x{})",
                self.rows, self.cols
            )));
        }
        if !prob_ok(self.side_exist_prob) {
            return Err(Error::InvalidGridSpec(format!(
                "side_exist_prob {} not in [0,1]",
                self.side_exist_prob
            )));
        }
        if !prob_ok(self.diagonal_exist_prob) {
            return Err(Error::InvalidGridSpec(format!(
                "diagonal_exist_prob {} not in [0,1]",
                self.diagonal_exist_prob
            )));
        }
        Ok(())
    }

    pub fn vertex(&self, row: usize, col: usize) -> Vertex {
        row * self.cols + col
    }
}

/// Builds a row-major grid. Side edges are drawn first (right, then down for
/// each cell), then diagonal edges (down-right, then down-left for each cell).
/// One uniform draw is consumed per candidate edge, so the seed alone fixes
/// the graph.
pub fn generate_grid(spec: &GridSpec) -> Result<Graph> {
    spec.validate()?;
    let GridSpec { rows, cols, .. } = *spec;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut adjacency: Vec<BTreeSet<Vertex>> = vec![BTreeSet::new(); rows * cols];
    let mut link = |a: Vertex, b: Vertex| {
        adjacency[a].insert(b);
        adjacency[b].insert(a);
    };

    for r in 0..rows {
        for c in 0..cols {
            let v = spec.vertex(r, c);
            if c + 1 < cols && rng.gen::<f64>() < spec.side_exist_prob {
                link(v, spec.vertex(r, c + 1));
            }
            if r + 1 < rows && rng.gen::<f64>() < spec.side_exist_prob {
                link(v, spec.vertex(r + 1, c));
            }
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let v = spec.vertex(r, c);
            if r + 1 < rows && c + 1 < cols && rng.gen::<f64>() < spec.diagonal_exist_prob {
                link(v, spec.vertex(r + 1, c + 1));
            }
            if r + 1 < rows && c > 0 && rng.gen::<f64>() < spec.diagonal_exist_prob {
                link(v, spec.vertex(r + 1, c - 1));
            }
        }
    }

    let lists = adjacency
        .into_iter()
        .map(|s| s.into_iter().collect())
        .collect();
    Graph::from_adjacency(lists, false)
}

impl Graph {
    /// Imports per-vertex neighbor lists. Undirected input must already be
    /// symmetric; it is validated, never repaired.
    pub fn from_adjacency(lists: Vec<Vec<Vertex>>, directed: bool) -> Result<Graph> {
        let count = lists.len();
        if count == 0 {
            return Err(Error::OutOfRangeVertex {
                vertex: 0,
                count: 0,
            });
        }
        let mut sets: Vec<BTreeSet<Vertex>> = Vec::with_capacity(count);
        for (vertex, list) in lists.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for &neighbor in list {
                if neighbor >= count {
                    return Err(Error::OutOfRangeNeighbor {
                        vertex,
                        neighbor,
                        count,
                    });
                }
                if !seen.insert(neighbor) {
                    return Err(Error::DuplicateNeighbor { vertex, neighbor });
                }
            }
            sets.push(seen);
        }
        if !directed {
            for (from, set) in sets.iter().enumerate() {
                for &to in set {
                    if !sets[to].contains(&from) {
                        return Err(Error::AsymmetricUndirectedEdge { from, to });
                    }
                }
            }
        }

        let mut moves = [Vec::with_capacity(count), Vec::with_capacity(count)];
        for (v, list) in lists.iter().enumerate() {
            let plain: Vec<Vertex> = list.iter().copied().filter(|&w| w != v).collect();
            let mut with_stay = Vec::with_capacity(plain.len() + 1);
            with_stay.push(v);
            with_stay.extend_from_slice(&plain);
            moves[0].push(if plain.is_empty() { vec![v] } else { plain });
            moves[1].push(with_stay);
        }

        Ok(Graph {
            adjacency: lists,
            exits: BTreeSet::new(),
            is_exit: vec![false; count],
            directed,
            weights: None,
            moves,
        })
    }

    pub fn with_exits(mut self, exits: impl IntoIterator<Item = Vertex>) -> Result<Graph> {
        let count = self.vertex_count();
        let exits: BTreeSet<Vertex> = exits.into_iter().collect();
        if let Some(&vertex) = exits.iter().find(|&&e| e >= count) {
            return Err(Error::OutOfRangeVertex { vertex, count });
        }
        self.is_exit = (0..count).map(|v| exits.contains(&v)).collect();
        self.exits = exits;
        Ok(self)
    }

    /// Attaches per-edge weights parallel to the adjacency lists.
    pub fn with_weights(mut self, weights: Vec<Vec<f64>>) -> Result<Graph> {
        if weights.len() != self.vertex_count() {
            return Err(Error::DimensionMismatch {
                expected: self.vertex_count(),
                got: weights.len(),
            });
        }
        for (w, adj) in weights.iter().zip(&self.adjacency) {
            if w.len() != adj.len() {
                return Err(Error::DimensionMismatch {
                    expected: adj.len(),
                    got: w.len(),
                });
            }
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn adjacency(&self) -> &[Vec<Vertex>] {
        &self.adjacency
    }

    pub fn weights(&self) -> Option<&[Vec<f64>]> {
        self.weights.as_deref()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn exits(&self) -> &BTreeSet<Vertex> {
        &self.exits
    }

    #[inline]
    pub fn is_exit(&self, v: Vertex) -> bool {
        self.is_exit[v]
    }

    /// Number of edges; undirected edges are counted once.
    pub fn edge_count(&self) -> usize {
        let arcs: usize = self
            .adjacency
            .iter()
            .enumerate()
            .map(|(v, l)| l.iter().filter(|&&w| w != v).count())
            .sum();
        if self.directed {
            arcs
        } else {
            arcs / 2
        }
    }

    /// Raw neighbor list of `v`, with `v` prepended when `allow_stay` is set.
    pub fn neighbors(&self, v: Vertex, allow_stay: bool) -> Result<Vec<Vertex>> {
        self.check_vertex(v)?;
        let mut out = Vec::with_capacity(self.adjacency[v].len() + 1);
        if allow_stay {
            out.push(v);
        }
        out.extend(self.adjacency[v].iter().copied().filter(|&w| w != v));
        Ok(out)
    }

    /// Legal moves from `v`. Identical to [`Graph::neighbors`] except that a
    /// dead end yields the forced stay `[v]`.
    #[inline]
    pub fn moves(&self, v: Vertex, allow_stay: bool) -> &[Vertex] {
        &self.moves[allow_stay as usize][v]
    }

    pub fn check_vertex(&self, v: Vertex) -> Result<()> {
        if v < self.vertex_count() {
            Ok(())
        } else {
            Err(Error::OutOfRangeVertex {
                vertex: v,
                count: self.vertex_count(),
            })
        }
    }

    pub fn is_connected(&self) -> bool {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    PositionOutOfRange { who: String, vertex: Vertex },
    NoExits,
    ZeroHorizon,
    NoPursuers,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PositionOutOfRange { who, vertex } => {
                write!(f, "PositionOutOfRange({who} at {vertex})")
            }
            Violation::NoExits => write!(f, "NoExits"),
            Violation::ZeroHorizon => write!(f, "ZeroHorizon"),
            Violation::NoPursuers => write!(f, "NoPursuers"),
        }
    }
}

/// Collects every violation instead of stopping at the first.
pub fn validate_scenario(config: &GameConfig) -> std::result::Result<(), Vec<Violation>> {
    let graph = &config.graph;
    let n = graph.vertex_count();
    let mut out = Vec::new();
    if config.pursuer_starts.is_empty() {
        out.push(Violation::NoPursuers);
    }
    for (i, &p) in config.pursuer_starts.iter().enumerate() {
        if p >= n {
            out.push(Violation::PositionOutOfRange {
                who: format!("pursuer {i}"),
                vertex: p,
            });
        }
    }
    if config.evader_start >= n {
        out.push(Violation::PositionOutOfRange {
            who: "evader".into(),
            vertex: config.evader_start,
        });
    }
    if graph.exits().is_empty() {
        out.push(Violation::NoExits);
    }
    if config.horizon == 0 {
        out.push(Violation::ZeroHorizon);
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
