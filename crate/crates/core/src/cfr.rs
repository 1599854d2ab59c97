//! Tabular CFR on the turn-based conversion of a small game.
//!
//! Each simultaneous step becomes two turns: the pursuer team moves first
//! (one joint action), then the evader moves without seeing that pending
//! action. Information sets are keyed by what the mover has observed under
//! the info case; both roles have perfect recall of their own moves.

use std::collections::HashMap;

use crate::dynamics::{cartesian_moves, initial_state, GameConfig, GameState, Role};
use crate::error::{Error, Result};
use crate::graph::Vertex;

pub const DEFAULT_TREE_CAP: usize = 10_000_000;

const NO_INFOSET: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InfoSetKey {
    pub role: Role,
    pub t: usize,
    /// Own positions at steps 0..=t (a joint tuple per step for the pursuer).
    pub own: Vec<Vec<Vertex>>,
    /// Opponent positions at steps 0..=t, when the info case grants them.
    pub opponent: Option<Vec<Vec<Vertex>>>,
}

#[derive(Debug, Clone)]
pub struct InfoSet {
    pub key: InfoSetKey,
    pub actions: Vec<Vec<Vertex>>,
    offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Simultaneous regret-matching updates with uniform averaging.
    Vanilla,
    /// Regret-matching+ with alternating updates and linear averaging.
    PlusAveraging,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Vanilla => "vanilla",
            Variant::PlusAveraging => "plus",
        }
    }
}

/// Per-infoset action probabilities, laid out like the game's regret table.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    probs: Vec<f64>,
}

impl Profile {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// The reachable turn-based game tree, stored as an arena with each node's
/// children contiguous.
#[derive(Debug, Clone)]
pub struct CfrGame {
    first_child: Vec<u32>,
    n_children: Vec<u32>,
    infoset: Vec<u32>,
    payoff: Vec<f64>,
    depth: Vec<u32>,
    infosets: Vec<InfoSet>,
    roles: Vec<Role>,
    width: usize,
}

struct Builder<'a> {
    config: &'a GameConfig,
    cap: usize,
    game: CfrGame,
    index: HashMap<InfoSetKey, u32>,
    pursuer_hist: Vec<Vec<Vertex>>,
    evader_hist: Vec<Vertex>,
}

impl Builder<'_> {
    fn alloc(&mut self, count: usize) -> Result<usize> {
        let first = self.game.first_child.len();
        if first + count > self.cap {
            return Err(Error::TreeTooLarge { cap: self.cap });
        }
        for _ in 0..count {
            self.game.first_child.push(0);
            self.game.n_children.push(0);
            self.game.infoset.push(NO_INFOSET);
            self.game.payoff.push(0.0);
            self.game.depth.push(0);
        }
        Ok(first)
    }

    fn infoset(&mut self, role: Role, t: usize, actions: Vec<Vec<Vertex>>) -> u32 {
        let sees = self.config.info_case.sees_opponent(role);
        let evader: Vec<Vec<Vertex>> = self.evader_hist.iter().map(|&v| vec![v]).collect();
        let (own, opponent) = match role {
            Role::Pursuer => (self.pursuer_hist.clone(), sees.then_some(evader)),
            Role::Evader => (evader, sees.then(|| self.pursuer_hist.clone())),
        };
        let key = InfoSetKey {
            role,
            t,
            own,
            opponent,
        };
        if let Some(&id) = self.index.get(&key) {
            debug_assert_eq!(self.game.infosets[id as usize].actions, actions);
            return id;
        }
        let id = self.game.infosets.len() as u32;
        let offset = self.game.width;
        self.game.width += actions.len();
        self.game.roles.push(role);
        self.game.infosets.push(InfoSet {
            key: key.clone(),
            actions,
            offset,
        });
        self.index.insert(key, id);
        id
    }

    /// Fills node `id` as the pursuer's turn at `state`.
    fn pursuer_turn(&mut self, id: usize, state: &GameState, depth: u32) -> Result<()> {
        self.game.depth[id] = depth;
        if let Some(payoff) = state.status.pursuer_payoff() {
            self.game.payoff[id] = payoff;
            return Ok(());
        }
        let actions = cartesian_moves(self.config, &state.pursuer_locs);
        let first = self.alloc(actions.len())?;
        self.game.first_child[id] = first as u32;
        self.game.n_children[id] = actions.len() as u32;
        self.game.infoset[id] = self.infoset(Role::Pursuer, state.t, actions.clone());
        for (a, joint) in actions.iter().enumerate() {
            self.evader_turn(first + a, state, joint, depth + 1)?;
        }
        Ok(())
    }

    fn evader_turn(
        &mut self,
        id: usize,
        state: &GameState,
        pending: &[Vertex],
        depth: u32,
    ) -> Result<()> {
        self.game.depth[id] = depth;
        let moves: Vec<Vertex> = self.config.moves(state.evader_loc).to_vec();
        let first = self.alloc(moves.len())?;
        self.game.first_child[id] = first as u32;
        self.game.n_children[id] = moves.len() as u32;
        let actions = moves.iter().map(|&m| vec![m]).collect();
        self.game.infoset[id] = self.infoset(Role::Evader, state.t, actions);
        for (a, &m) in moves.iter().enumerate() {
            let t = state.t + 1;
            let next = GameState {
                t,
                pursuer_locs: pending.to_vec(),
                evader_loc: m,
                status: self.config.classify(pending, m, t),
            };
            self.pursuer_hist.push(pending.to_vec());
            self.evader_hist.push(m);
            let res = self.pursuer_turn(first + a, &next, depth + 1);
            self.pursuer_hist.pop();
            self.evader_hist.pop();
            res?;
        }
        Ok(())
    }
}

fn regret_matching(regrets: &[f64], out: &mut [f64]) {
    let total: f64 = regrets.iter().map(|r| r.max(0.0)).sum();
    if total > 0.0 {
        for (o, r) in out.iter_mut().zip(regrets) {
            *o = r.max(0.0) / total;
        }
    } else {
        let u = 1.0 / regrets.len() as f64;
        out.iter_mut().for_each(|o| *o = u);
    }
}

impl CfrGame {
    pub fn build(config: &GameConfig, cap: usize) -> Result<CfrGame> {
        let state = initial_state(config)?;
        let mut b = Builder {
            config,
            cap,
            game: CfrGame {
                first_child: Vec::new(),
                n_children: Vec::new(),
                infoset: Vec::new(),
                payoff: Vec::new(),
                depth: Vec::new(),
                infosets: Vec::new(),
                roles: Vec::new(),
                width: 0,
            },
            index: HashMap::new(),
            pursuer_hist: vec![state.pursuer_locs.clone()],
            evader_hist: vec![state.evader_loc],
        };
        b.alloc(1)?;
        b.pursuer_turn(0, &state, 0)?;
        Ok(b.game)
    }

    pub fn node_count(&self) -> usize {
        self.first_child.len()
    }

    pub fn infosets(&self) -> &[InfoSet] {
        &self.infosets
    }

    fn children(&self, node: usize) -> std::ops::Range<usize> {
        let first = self.first_child[node] as usize;
        first..first + self.n_children[node] as usize
    }

    fn is_terminal(&self, node: usize) -> bool {
        self.infoset[node] == NO_INFOSET
    }

    /// Builds a profile from a per-infoset rule; the rule's output is
    /// normalised.
    pub fn profile_from<F>(&self, mut rule: F) -> Profile
    where
        F: FnMut(&InfoSetKey, &[Vec<Vertex>]) -> Vec<f64>,
    {
        let mut probs = vec![0.0; self.width];
        for info in &self.infosets {
            let raw = rule(&info.key, &info.actions);
            assert_eq!(raw.len(), info.actions.len(), "one weight per action");
            let total: f64 = raw.iter().sum();
            for (a, w) in raw.iter().enumerate() {
                probs[info.offset + a] = if total > 0.0 {
                    w / total
                } else {
                    1.0 / raw.len() as f64
                };
            }
        }
        Profile { probs }
    }

    pub fn uniform_profile(&self) -> Profile {
        self.profile_from(|_, a| vec![1.0; a.len()])
    }

    fn action_prob(&self, profile: &Profile, node: usize, a: usize) -> f64 {
        let info = &self.infosets[self.infoset[node] as usize];
        profile.probs[info.offset + a]
    }

    /// Expected pursuer payoff under `profile`.
    pub fn value(&self, profile: &Profile) -> f64 {
        self.value_at(profile, 0)
    }

    fn value_at(&self, profile: &Profile, node: usize) -> f64 {
        if self.is_terminal(node) {
            return self.payoff[node];
        }
        self.children(node)
            .enumerate()
            .map(|(a, c)| {
                let p = self.action_prob(profile, node, a);
                if p == 0.0 {
                    0.0
                } else {
                    p * self.value_at(profile, c)
                }
            })
            .sum()
    }

    /// Leaf payoff reached by fixed move sequences: `pursuer[t]` is the
    /// joint move at step t, `evader[t]` the evader's move.
    pub fn play(&self, pursuer: &[Vec<Vertex>], evader: &[Vertex]) -> Result<f64> {
        let mut node = 0;
        let mut t = 0;
        loop {
            if self.is_terminal(node) {
                return Ok(self.payoff[node]);
            }
            let info = &self.infosets[self.infoset[node] as usize];
            let wanted = match info.key.role {
                Role::Pursuer => pursuer.get(t).cloned(),
                Role::Evader => evader.get(t).map(|&v| vec![v]),
            }
            .ok_or_else(|| Error::IllegalMove(format!("no move supplied for step {t}")))?;
            let a = info
                .actions
                .iter()
                .position(|m| *m == wanted)
                .ok_or_else(|| Error::IllegalMove(format!("{wanted:?} at step {t}")))?;
            if info.key.role == Role::Evader {
                t += 1;
            }
            node = self.children(node).start + a;
        }
    }

    /// Best-response value for `role` against the other role's part of
    /// `profile`.
    pub fn best_response_value(&self, profile: &Profile, role: Role) -> f64 {
        let n = self.node_count();
        // opponent reach, top-down (parents precede children in the arena)
        let mut reach = vec![0.0; n];
        reach[0] = 1.0;
        for node in 0..n {
            if self.is_terminal(node) || reach[node] == 0.0 {
                continue;
            }
            let mover = self.infosets[self.infoset[node] as usize].key.role;
            for (a, c) in self.children(node).enumerate() {
                reach[c] = if mover == role {
                    reach[node]
                } else {
                    reach[node] * self.action_prob(profile, node, a)
                };
            }
        }

        let max_depth = self.depth.iter().copied().max().unwrap_or(0) as usize;
        let mut by_depth: Vec<Vec<usize>> = vec![Vec::new(); max_depth + 1];
        for node in 0..n {
            by_depth[self.depth[node] as usize].push(node);
        }
        let mut value = vec![0.0; n];
        let mut scores: HashMap<u32, Vec<f64>> = HashMap::new();
        for layer in by_depth.iter().rev() {
            scores.clear();
            for &node in layer {
                if self.is_terminal(node) {
                    value[node] = self.payoff[node];
                    continue;
                }
                let id = self.infoset[node];
                let info = &self.infosets[id as usize];
                if info.key.role == role {
                    let s = scores
                        .entry(id)
                        .or_insert_with(|| vec![0.0; info.actions.len()]);
                    for (a, c) in self.children(node).enumerate() {
                        s[a] += reach[node] * value[c];
                    }
                } else {
                    value[node] = self
                        .children(node)
                        .enumerate()
                        .map(|(a, c)| self.action_prob(profile, node, a) * value[c])
                        .sum();
                }
            }
            let mut chosen: HashMap<u32, usize> = HashMap::with_capacity(scores.len());
            for (&id, s) in &scores {
                let mut best = 0;
                for a in 1..s.len() {
                    let better = match role {
                        Role::Pursuer => s[a] > s[best],
                        Role::Evader => s[a] < s[best],
                    };
                    if better {
                        best = a;
                    }
                }
                chosen.insert(id, best);
            }
            for &node in layer {
                if let Some(&a) = chosen.get(&self.infoset[node]) {
                    value[node] = value[self.children(node).start + a];
                }
            }
        }
        value[0]
    }

    /// Pursuer best-response gain plus evader best-response gain; zero
    /// exactly at an equilibrium.
    pub fn exploitability(&self, profile: &Profile) -> f64 {
        let up = self.best_response_value(profile, Role::Pursuer);
        let down = self.best_response_value(profile, Role::Evader);
        (up - down).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfrOptions {
    pub iterations: usize,
    pub variant: Variant,
    pub tree_cap: usize,
    /// Stop at a logged iteration once exploitability is at most this.
    pub target_exploitability: Option<f64>,
    /// Also log every `log_every` iterations (powers of two are always logged).
    pub log_every: usize,
}

impl CfrOptions {
    pub fn new(iterations: usize, variant: Variant) -> Self {
        CfrOptions {
            iterations,
            variant,
            tree_cap: DEFAULT_TREE_CAP,
            target_exploitability: None,
            log_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfrLogRow {
    pub iteration: usize,
    pub value: f64,
    pub exploitability: f64,
}

impl CfrLogRow {
    pub const CSV_HEADER: &'static str = "iteration,value,exploitability";

    pub fn csv_row(&self) -> String {
        format!("{},{:.12},{:.12}", self.iteration, self.value, self.exploitability)
    }
}

#[derive(Debug, Clone)]
pub struct CfrSolution {
    pub game: CfrGame,
    pub average: Profile,
    pub value: f64,
    pub exploitability: f64,
    pub iterations: usize,
    pub log: Vec<CfrLogRow>,
}

struct Tables {
    regret: Vec<f64>,
    strategy_sum: Vec<f64>,
    current: Vec<f64>,
}

impl CfrGame {
    fn refresh(&self, tables: &mut Tables, role: Option<Role>) {
        for (info, &r) in self.infosets.iter().zip(&self.roles) {
            if role.is_some_and(|want| want != r) {
                continue;
            }
            let span = info.offset..info.offset + info.actions.len();
            regret_matching(&tables.regret[span.clone()], &mut tables.current[span]);
        }
    }

    /// One traversal; updates regrets and strategy sums of `updating`
    /// (both roles when `None`). Returns the pursuer value.
    fn traverse(
        &self,
        tables: &mut Tables,
        node: usize,
        reach_p: f64,
        reach_e: f64,
        updating: Option<Role>,
        weight: f64,
        floor: bool,
    ) -> f64 {
        if self.is_terminal(node) {
            return self.payoff[node];
        }
        if reach_p == 0.0 && reach_e == 0.0 {
            return 0.0;
        }
        let id = self.infoset[node] as usize;
        let role = self.roles[id];
        let offset = self.infosets[id].offset;
        let kids = self.children(node);
        let k = kids.len();
        let mut values = [0.0f64; 32];
        let mut heap;
        let vals: &mut [f64] = if k <= values.len() {
            &mut values[..k]
        } else {
            heap = vec![0.0; k];
            &mut heap
        };
        let mut ev = 0.0;
        for (a, c) in kids.enumerate() {
            let p = tables.current[offset + a];
            let (rp, re) = match role {
                Role::Pursuer => (reach_p * p, reach_e),
                Role::Evader => (reach_p, reach_e * p),
            };
            vals[a] = self.traverse(tables, c, rp, re, updating, weight, floor);
            ev += p * vals[a];
        }
        if updating.map_or(true, |u| u == role) {
            let (own, opp, sign) = match role {
                Role::Pursuer => (reach_p, reach_e, 1.0),
                Role::Evader => (reach_e, reach_p, -1.0),
            };
            for a in 0..k {
                let r = &mut tables.regret[offset + a];
                *r += sign * opp * (vals[a] - ev);
                if floor && *r < 0.0 {
                    *r = 0.0;
                }
                tables.strategy_sum[offset + a] += weight * own * tables.current[offset + a];
            }
        }
        ev
    }

    pub fn average_profile(&self, strategy_sum: &[f64]) -> Profile {
        let mut probs = vec![0.0; self.width];
        for info in &self.infosets {
            let span = info.offset..info.offset + info.actions.len();
            let total: f64 = strategy_sum[span.clone()].iter().sum();
            for i in span {
                probs[i] = if total > 0.0 {
                    strategy_sum[i] / total
                } else {
                    1.0 / info.actions.len() as f64
                };
            }
        }
        Profile { probs }
    }

    pub fn solve(self, opts: CfrOptions) -> CfrSolution {
        let mut tables = Tables {
            regret: vec![0.0; self.width],
            strategy_sum: vec![0.0; self.width],
            current: vec![0.0; self.width],
        };
        let mut log = Vec::new();
        let mut done = 0;
        for it in 1..=opts.iterations {
            match opts.variant {
                Variant::Vanilla => {
                    self.refresh(&mut tables, None);
                    self.traverse(&mut tables, 0, 1.0, 1.0, None, 1.0, false);
                }
                Variant::PlusAveraging => {
                    let w = it as f64;
                    for role in [Role::Pursuer, Role::Evader] {
                        self.refresh(&mut tables, None);
                        self.traverse(&mut tables, 0, 1.0, 1.0, Some(role), w, true);
                    }
                }
            }
            done = it;
            let scheduled = it.is_power_of_two()
                || (opts.log_every > 0 && it % opts.log_every == 0)
                || it == opts.iterations;
            if scheduled {
                let avg = self.average_profile(&tables.strategy_sum);
                let row = CfrLogRow {
                    iteration: it,
                    value: self.value(&avg),
                    exploitability: self.exploitability(&avg),
                };
                let stop = opts
                    .target_exploitability
                    .is_some_and(|target| row.exploitability <= target);
                log.push(row);
                if stop {
                    break;
                }
            }
        }
        let average = self.average_profile(&tables.strategy_sum);
        let (value, exploitability) = match log.last() {
            Some(r) if r.iteration == done => (r.value, r.exploitability),
            _ => (self.value(&average), self.exploitability(&average)),
        };
        CfrSolution {
            game: self,
            average,
            value,
            exploitability,
            iterations: done,
            log,
        }
    }
}

/// Builds the tree (bounded by `opts.tree_cap`) and runs CFR.
pub fn cfr_solve(config: &GameConfig, opts: CfrOptions) -> Result<CfrSolution> {
    let game = CfrGame::build(config, opts.tree_cap)?;
    Ok(game.solve(opts))
}
