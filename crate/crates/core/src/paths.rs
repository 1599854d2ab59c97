//! Evader open-loop strategies: timed routes from the start to an exit.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::GameConfig;
use crate::error::{Error, Result};
use crate::graph::{Graph, Vertex};

pub const DEFAULT_PATH_CAP: usize = 5_000_000;

/// A vertex sequence `v_0..v_k`; position at time `t` is `v_t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EvaderPath(pub Vec<Vertex>);

impl EvaderPath {
    pub fn vertices(&self) -> &[Vertex] {
        &self.0
    }

    /// Number of moves.
    pub fn len(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn start(&self) -> Vertex {
        self.0[0]
    }

    pub fn end(&self) -> Vertex {
        *self.0.last().expect("path has at least one vertex")
    }

    /// Checks that the path starts at the evader start, moves legally,
    /// and ends at its first exit.
    pub fn validate(&self, config: &GameConfig) -> Result<()> {
        let v = &self.0;
        if v.is_empty() {
            return Err(Error::InvalidPath("empty path".into()));
        }
        if v[0] != config.evader_start {
            return Err(Error::InvalidPath(format!(
                "starts at {} instead of {}",
                v[0], config.evader_start
            )));
        }
        for &x in v {
            config.graph.check_vertex(x)?;
        }
        for w in v.windows(2) {
            if !config.moves(w[0]).contains(&w[1]) {
                return Err(Error::InvalidPath(format!("illegal move {}->{}", w[0], w[1])));
            }
        }
        if let Some(i) = v[..v.len() - 1]
            .iter()
            .position(|&x| config.graph.is_exit(x))
        {
            return Err(Error::InvalidPath(format!("passes exit {} at t={i}", v[i])));
        }
        if !config.graph.is_exit(self.end()) {
            return Err(Error::InvalidPath(format!("ends at non-exit {}", self.end())));
        }
        Ok(())
    }
}

impl fmt::Display for EvaderPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl FromStr for EvaderPath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .split(';')
            .map(|x| {
                x.trim()
                    .parse::<Vertex>()
                    .map_err(|e| Error::Parse(format!("bad vertex '{x}': {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(EvaderPath)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathMode {
    /// Acyclic routes.
    Simple,
    /// Any legal walk, including stays and revisits.
    Walks,
}

impl PathMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PathMode::Simple => "simple",
            PathMode::Walks => "walks",
        }
    }
}

impl FromStr for PathMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(PathMode::Simple),
            "walks" => Ok(PathMode::Walks),
            _ => Err(Error::Parse(format!("unknown path mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    pub mode: PathMode,
    pub max_len: usize,
    pub allow_stay: bool,
    pub cap: usize,
}

impl PathOptions {
    pub fn new(mode: PathMode, max_len: usize) -> Self {
        PathOptions {
            mode,
            max_len,
            allow_stay: true,
            cap: DEFAULT_PATH_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    paths: Vec<EvaderPath>,
    mode: PathMode,
    max_len: usize,
}

impl PathSet {
    /// Builds a set from arbitrary paths, sorting and removing duplicates.
    pub fn from_paths(mut paths: Vec<EvaderPath>, mode: PathMode, max_len: usize) -> PathSet {
        paths.sort();
        paths.dedup();
        PathSet {
            paths,
            mode,
            max_len,
        }
    }

    pub fn paths(&self) -> &[EvaderPath] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn mode(&self) -> PathMode {
        self.mode
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Simple paths omit waiting and backtracking routes, so a worst case
    /// over them may overstate the pursuer's guarantee.
    pub fn is_exact_open_loop(&self) -> bool {
        self.mode == PathMode::Walks
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for p in &self.paths {
            out.push_str(&p.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, mode: PathMode) -> Result<PathSet> {
        let paths: Vec<EvaderPath> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        let max_len = paths.iter().map(EvaderPath::len).max().unwrap_or(0);
        Ok(PathSet::from_paths(paths, mode, max_len))
    }
}

/// Multi-source BFS distance from every vertex to the nearest exit, along
/// edge direction.
pub fn exit_distances(graph: &Graph) -> Vec<Option<usize>> {
    let n = graph.vertex_count();
    let mut reverse: Vec<Vec<Vertex>> = vec![Vec::new(); n];
    for (v, list) in graph.adjacency().iter().enumerate() {
        for &w in list {
            reverse[w].push(v);
        }
    }
    let mut dist = vec![None; n];
    let mut queue = VecDeque::new();
    for &e in graph.exits() {
        dist[e] = Some(0);
        queue.push_back(e);
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap() + 1;
        for &u in &reverse[v] {
            if dist[u].is_none() {
                dist[u] = Some(d);
                queue.push_back(u);
            }
        }
    }
    dist
}

pub fn shortest_exit_distance(graph: &Graph, start: Vertex) -> Option<usize> {
    exit_distances(graph)[start]
}

/// Depth-first enumeration of every route from `start` that ends at the
/// first exit it touches within `max_len` moves. Output is sorted
/// lexicographically by vertex sequence.
pub fn enumerate_paths(graph: &Graph, start: Vertex, opts: &PathOptions) -> Result<PathSet> {
    graph.check_vertex(start)?;
    let dist = exit_distances(graph);
    let mut search = Search {
        graph,
        opts,
        dist: &dist,
        on_path: vec![false; graph.vertex_count()],
        stack: vec![start],
        out: Vec::new(),
    };
    search.on_path[start] = true;
    search.visit(start)?;
    Ok(PathSet::from_paths(search.out, opts.mode, opts.max_len))
}

struct Search<'a> {
    graph: &'a Graph,
    opts: &'a PathOptions,
    dist: &'a [Option<usize>],
    on_path: Vec<bool>,
    stack: Vec<Vertex>,
    out: Vec<EvaderPath>,
}

impl Search<'_> {
    fn visit(&mut self, v: Vertex) -> Result<()> {
        if self.graph.is_exit(v) {
            if self.out.len() == self.opts.cap {
                return Err(Error::PathExplosion { cap: self.opts.cap });
            }
            self.out.push(EvaderPath(self.stack.clone()));
            return Ok(());
        }
        let remaining = self.opts.max_len - (self.stack.len() - 1);
        if remaining == 0 {
            return Ok(());
        }
        let simple = self.opts.mode == PathMode::Simple;
        let moves = self.graph.moves(v, self.opts.allow_stay && !simple);
        for &w in moves {
            if simple && self.on_path[w] {
                continue;
            }
            match self.dist[w] {
                Some(d) if d < remaining => {}
                _ => continue,
            }
            self.stack.push(w);
            self.on_path[w] = simple;
            let res = self.visit(w);
            self.stack.pop();
            self.on_path[w] = false;
            res?;
        }
        Ok(())
    }
}

/// Approximate evader best response used by earlier solvers: pick a
/// reachable exit uniformly, then one of its simple paths uniformly.
pub fn sample_simplified_br<R: Rng + ?Sized>(
    graph: &Graph,
    start: Vertex,
    max_len: usize,
    rng: &mut R,
) -> Result<EvaderPath> {
    let set = enumerate_paths(graph, start, &PathOptions::new(PathMode::Simple, max_len))?;
    let mut by_exit: BTreeMap<Vertex, Vec<&EvaderPath>> = BTreeMap::new();
    for p in set.paths() {
        by_exit.entry(p.end()).or_default().push(p);
    }
    if by_exit.is_empty() {
        return Err(Error::NoFeasiblePath { start, max_len });
    }
    let exits: Vec<&Vec<&EvaderPath>> = by_exit.values().collect();
    let group = exits[rng.gen_range(0..exits.len())];
    Ok(group[rng.gen_range(0..group.len())].clone())
}
