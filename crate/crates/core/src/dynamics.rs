//! Simultaneous-move game state, transitions, and observation filtering.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{validate_scenario, Graph, Vertex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Pursuer,
    Evader,
}

/// Which side receives the opponent's real-time locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfoCase {
    EvaderSeesPursuers,
    PursuerSeesEvader,
    BothSee,
    NeitherSees,
}

impl InfoCase {
    pub const ALL: [InfoCase; 4] = [
        InfoCase::EvaderSeesPursuers,
        InfoCase::PursuerSeesEvader,
        InfoCase::BothSee,
        InfoCase::NeitherSees,
    ];

    pub fn pursuer_sees_evader(self) -> bool {
        matches!(self, InfoCase::PursuerSeesEvader | InfoCase::BothSee)
    }

    pub fn evader_sees_pursuers(self) -> bool {
        matches!(self, InfoCase::EvaderSeesPursuers | InfoCase::BothSee)
    }

    pub fn sees_opponent(self, role: Role) -> bool {
        match role {
            Role::Pursuer => self.pursuer_sees_evader(),
            Role::Evader => self.evader_sees_pursuers(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InfoCase::EvaderSeesPursuers => "evader-sees-pursuers",
            InfoCase::PursuerSeesEvader => "pursuer-sees-evader",
            InfoCase::BothSee => "both-see",
            InfoCase::NeitherSees => "neither-sees",
        }
    }
}

impl fmt::Display for InfoCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InfoCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        InfoCase::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown info case '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub graph: Graph,
    pub pursuer_starts: Vec<Vertex>,
    pub evader_start: Vertex,
    pub horizon: usize,
    pub info_case: InfoCase,
    pub allow_stay: bool,
    pub capture_before_escape: bool,
}

impl GameConfig {
    /// Config with stays allowed and capture taking precedence over escape.
    pub fn new(
        graph: Graph,
        pursuer_starts: Vec<Vertex>,
        evader_start: Vertex,
        horizon: usize,
        info_case: InfoCase,
    ) -> Self {
        GameConfig {
            graph,
            pursuer_starts,
            evader_start,
            horizon,
            info_case,
            allow_stay: true,
            capture_before_escape: true,
        }
    }

    pub fn pursuer_count(&self) -> usize {
        self.pursuer_starts.len()
    }

    pub fn validate(&self) -> Result<()> {
        validate_scenario(self).map_err(Error::InvalidScenario)
    }

    #[inline]
    pub fn moves(&self, v: Vertex) -> &[Vertex] {
        self.graph.moves(v, self.allow_stay)
    }

    /// Terminal classification of a position at time `t`: capture, then
    /// escape, then timeout (the first two swap when capture does not take
    /// precedence).
    pub fn classify(&self, pursuers: &[Vertex], evader: Vertex, t: usize) -> Status {
        let captured = pursuers.contains(&evader);
        let escaped = self.graph.is_exit(evader);
        if captured && (self.capture_before_escape || !escaped) {
            Status::PursuerWinCapture
        } else if escaped {
            Status::EvaderWin
        } else if t >= self.horizon {
            Status::PursuerWinTimeout
        } else {
            Status::Ongoing
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Ongoing,
    PursuerWinCapture,
    PursuerWinTimeout,
    EvaderWin,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Ongoing
    }

    /// Pursuer payoff of a terminal status; `None` while ongoing.
    pub fn pursuer_payoff(self) -> Option<f64> {
        match self {
            Status::Ongoing => None,
            Status::PursuerWinCapture | Status::PursuerWinTimeout => Some(1.0),
            Status::EvaderWin => Some(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GameState {
    pub t: usize,
    pub pursuer_locs: Vec<Vertex>,
    pub evader_loc: Vertex,
    pub status: Status,
}

pub fn initial_state(config: &GameConfig) -> Result<GameState> {
    config.validate()?;
    Ok(GameState {
        t: 0,
        pursuer_locs: config.pursuer_starts.clone(),
        evader_loc: config.evader_start,
        status: config.classify(&config.pursuer_starts, config.evader_start, 0),
    })
}

/// Enumerates the Cartesian product of per-agent move lists in odometer
/// order (last agent varies fastest).
pub fn cartesian_moves(config: &GameConfig, locs: &[Vertex]) -> Vec<Vec<Vertex>> {
    let lists: Vec<&[Vertex]> = locs.iter().map(|&v| config.moves(v)).collect();
    let total: usize = lists.iter().map(|l| l.len()).product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; lists.len()];
    for _ in 0..total {
        out.push(idx.iter().zip(&lists).map(|(&i, l)| l[i]).collect());
        for k in (0..lists.len()).rev() {
            idx[k] += 1;
            if idx[k] < lists[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

/// All joint moves for `role`. Evader moves are singleton vectors.
pub fn joint_action_set(
    state: &GameState,
    role: Role,
    config: &GameConfig,
) -> Result<Vec<Vec<Vertex>>> {
    if state.status.is_terminal() {
        return Err(Error::GameOver);
    }
    Ok(match role {
        Role::Pursuer => cartesian_moves(config, &state.pursuer_locs),
        Role::Evader => config
            .moves(state.evader_loc)
            .iter()
            .map(|&v| vec![v])
            .collect(),
    })
}

pub fn step(
    state: &GameState,
    pursuer_move: &[Vertex],
    evader_move: Vertex,
    config: &GameConfig,
) -> Result<GameState> {
    if state.status.is_terminal() {
        return Err(Error::GameOver);
    }
    if pursuer_move.len() != state.pursuer_locs.len() {
        return Err(Error::IllegalMove(format!(
            "expected {} pursuer moves, got {}",
            state.pursuer_locs.len(),
            pursuer_move.len()
        )));
    }
    for (i, (&from, &to)) in state.pursuer_locs.iter().zip(pursuer_move).enumerate() {
        if !config.moves(from).contains(&to) {
            return Err(Error::IllegalMove(format!(
                "pursuer {i} cannot move {from}->{to}"
            )));
        }
    }
    if !config.moves(state.evader_loc).contains(&evader_move) {
        return Err(Error::IllegalMove(format!(
            "evader cannot move {}->{evader_move}",
            state.evader_loc
        )));
    }
    let t = state.t + 1;
    Ok(GameState {
        t,
        pursuer_locs: pursuer_move.to_vec(),
        evader_loc: evader_move,
        status: config.classify(pursuer_move, evader_move, t),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub role: Role,
    pub own: Vec<Vertex>,
    pub opponent: Option<Vec<Vertex>>,
    pub t: usize,
    pub horizon: usize,
}

pub fn observe(state: &GameState, role: Role, config: &GameConfig) -> Observation {
    let (own, other) = match role {
        Role::Pursuer => (state.pursuer_locs.clone(), vec![state.evader_loc]),
        Role::Evader => (vec![state.evader_loc], state.pursuer_locs.clone()),
    };
    Observation {
        role,
        own,
        opponent: config.info_case.sees_opponent(role).then_some(other),
        t: state.t,
        horizon: config.horizon,
    }
}

pub fn pursuer_payoff(state: &GameState) -> Result<f64> {
    state.status.pursuer_payoff().ok_or(Error::GameNotOver)
}

pub fn evader_payoff(state: &GameState) -> Result<f64> {
    pursuer_payoff(state).map(|u| -u)
}
