//! Independent reference solvers and random scenario generators shared by
//! the integration tests. Nothing here calls the crate's solvers; only the
//! graph, the step function and path enumeration are reused.
#![allow(dead_code)]

use std::collections::HashMap;

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use rand::seq::SliceRandom;
use rand::Rng;
use unsg::dynamics::{cartesian_moves, initial_state, step, GameConfig, GameState, InfoCase};
use unsg::evaluation::{Distribution, EvaderView, Fallback, IndependentPolicy, ViewKind};
use unsg::graph::{generate_grid, GridSpec, Vertex};
use unsg::paths::{enumerate_paths, EvaderPath, PathMode, PathOptions, PathSet};

/// Value of the zero-sum matrix game (row player maximises) by LP.
pub fn matrix_game_value(rows: &[Vec<f64>]) -> f64 {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let v = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let x: Vec<Variable> = rows.iter().map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    let sum: Vec<(Variable, f64)> = x.iter().map(|&xi| (xi, 1.0)).collect();
    lp.add_constraint(sum.as_slice(), ComparisonOp::Eq, 1.0);
    for j in 0..rows[0].len() {
        let mut expr: Vec<(Variable, f64)> =
            x.iter().zip(rows).map(|(&xi, r)| (xi, r[j])).collect();
        expr.push((v, -1.0));
        lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, 0.0);
    }
    lp.solve().expect("matrix LP solves").objective()
}

/// Every legal open-loop move sequence of `len` steps for agents at `starts`.
fn move_sequences(config: &GameConfig, starts: &[Vertex], len: usize) -> Vec<Vec<Vec<Vertex>>> {
    let mut out = Vec::new();
    let mut stack = Vec::new();
    fn rec(
        c: &GameConfig,
        at: &[Vertex],
        left: usize,
        stack: &mut Vec<Vec<Vertex>>,
        out: &mut Vec<Vec<Vec<Vertex>>>,
    ) {
        if left == 0 {
            out.push(stack.clone());
            return;
        }
        for m in cartesian_moves(c, at) {
            stack.push(m.clone());
            rec(c, &m, left - 1, stack, out);
            stack.pop();
        }
    }
    rec(config, starts, len, &mut stack, &mut out);
    out
}

fn replay(config: &GameConfig, pursuer: &[Vec<Vertex>], evader: &[Vec<Vertex>]) -> f64 {
    let mut s = initial_state(config).unwrap();
    for (p, e) in pursuer.iter().zip(evader) {
        if s.status.is_terminal() {
            break;
        }
        s = step(&s, p, e[0], config).unwrap();
    }
    s.status.pursuer_payoff().expect("horizon ends the game")
}

/// Full normal-form value when neither side observes the other: both sides
/// pick open-loop move sequences over the whole horizon.
pub fn blind_matrix_value(config: &GameConfig) -> f64 {
    let ps = move_sequences(config, &config.pursuer_starts, config.horizon);
    let es = move_sequences(config, &[config.evader_start], config.horizon);
    let rows: Vec<Vec<f64>> = ps
        .iter()
        .map(|p| es.iter().map(|e| replay(config, p, e)).collect())
        .collect();
    matrix_game_value(&rows)
}

/// Game value when the pursuer observes the evader and the evader mixes
/// over `paths`, by the sequence-form LP over pursuer realization plans.
pub fn sequence_form_value(config: &GameConfig, paths: &[EvaderPath]) -> f64 {
    sequence_form(config, paths, None)
}

/// Best-response value of an observing pursuer against the evader mixture
/// `weights` over `paths`, by the same LP with the mixture fixed.
pub fn best_response_value_lp(config: &GameConfig, paths: &[EvaderPath], weights: &[f64]) -> f64 {
    sequence_form(config, paths, Some(weights))
}

fn sequence_form(config: &GameConfig, paths: &[EvaderPath], weights: Option<&[f64]>) -> f64 {
    type Key = (Vec<Vec<Vertex>>, Vec<Vertex>);
    struct Sf<'a> {
        config: &'a GameConfig,
        lp: Problem,
        infosets: HashMap<Key, Vec<Variable>>,
    }
    impl Sf<'_> {
        fn vars(&mut self, key: Key, n: usize, parent: Option<Variable>) -> Vec<Variable> {
            if let Some(v) = self.infosets.get(&key) {
                return v.clone();
            }
            let vars: Vec<Variable> = (0..n).map(|_| self.lp.add_var(0.0, (0.0, 1.0))).collect();
            let mut expr: Vec<(Variable, f64)> = vars.iter().map(|&v| (v, 1.0)).collect();
            let rhs = match parent {
                Some(p) => {
                    expr.push((p, -1.0));
                    0.0
                }
                None => 1.0,
            };
            self.lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, rhs);
            self.infosets.insert(key, vars.clone());
            vars
        }

        fn walk(
            &mut self,
            path: &[Vertex],
            state: &GameState,
            own: &mut Vec<Vec<Vertex>>,
            parent: Option<Variable>,
            coef: &mut HashMap<Variable, f64>,
        ) {
            let actions = cartesian_moves(self.config, &state.pursuer_locs);
            let key = (own.clone(), path[..=state.t].to_vec());
            let vars = self.vars(key, actions.len(), parent);
            // a path longer than the horizon times out before it ends
            let e = path[state.t + 1];
            for (a, m) in actions.iter().enumerate() {
                let next = step(state, m, e, self.config).unwrap();
                match next.status.pursuer_payoff() {
                    Some(u) => *coef.entry(vars[a]).or_default() += u,
                    None => {
                        own.push(m.clone());
                        self.walk(path, &next, own, Some(vars[a]), coef);
                        own.pop();
                    }
                }
            }
        }
    }

    let mut sf = Sf {
        config,
        lp: Problem::new(OptimizationDirection::Maximize),
        infosets: HashMap::new(),
    };
    let start = initial_state(config).unwrap();
    let mut constant = 0.0;
    let value = weights.is_none().then(|| sf.lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY)));
    for (j, path) in paths.iter().enumerate() {
        let target = match weights {
            Some(w) => sf.lp.add_var(w[j], (f64::NEG_INFINITY, f64::INFINITY)),
            None => value.unwrap(),
        };
        if let Some(u) = start.status.pursuer_payoff() {
            // decided before anyone moves
            match weights {
                Some(w) => constant += w[j] * u,
                None => {
                    sf.lp.add_constraint(&[(target, 1.0)], ComparisonOp::Le, u);
                }
            }
            continue;
        }
        let mut coef = HashMap::new();
        let mut own = vec![start.pursuer_locs.clone()];
        sf.walk(path.vertices(), &start, &mut own, None, &mut coef);
        let mut expr: Vec<(Variable, f64)> = coef.into_iter().collect();
        expr.sort_by_key(|(var, _)| var.idx());
        expr.push((target, -1.0));
        let op = if weights.is_some() { ComparisonOp::Eq } else { ComparisonOp::Ge };
        sf.lp.add_constraint(expr.as_slice(), op, 0.0);
    }
    constant + sf.lp.solve().expect("sequence-form LP solves").objective()
}

/// A 3x3 grid scenario with random edges, exits, positions and horizon,
/// together with its complete evader walk set. `None` when the evader has
/// no route to an exit.
pub fn random_small_scenario<R: Rng>(
    rng: &mut R,
    info: InfoCase,
    max_horizon: usize,
) -> Option<(GameConfig, PathSet)> {
    let spec = GridSpec {
        rows: 3,
        cols: 3,
        side_exist_prob: rng.gen_range(0.6..=1.0),
        diagonal_exist_prob: rng.gen_range(0.0..0.3),
        seed: rng.gen(),
    };
    let mut vertices: Vec<Vertex> = (0..9).collect();
    vertices.shuffle(rng);
    let evader = vertices[0];
    let pursuer = vertices[1];
    let exit_count = rng.gen_range(1..=2);
    let exits = vertices[2..2 + exit_count].to_vec();
    let graph = generate_grid(&spec).unwrap().with_exits(exits).unwrap();
    let horizon = rng.gen_range(2..=max_horizon);
    let config = GameConfig::new(graph, vec![pursuer], evader, horizon, info);
    let paths = enumerate_paths(
        &config.graph,
        evader,
        &PathOptions::new(PathMode::Walks, horizon),
    )
    .unwrap();
    (!paths.is_empty()).then_some((config, paths))
}

/// Like [`random_small_scenario`] but redraws until the observing-pursuer
/// game value lies strictly inside (0, 1). Returns the oracle value too.
pub fn random_contested_scenario<R: Rng>(
    rng: &mut R,
    info: InfoCase,
    max_horizon: usize,
) -> (GameConfig, PathSet, f64) {
    loop {
        let Some((config, paths)) = random_small_scenario(rng, info, max_horizon) else {
            continue;
        };
        let value = if info == InfoCase::NeitherSees {
            blind_matrix_value(&config)
        } else {
            sequence_form_value(&config, paths.paths())
        };
        if value > 1e-6 && value < 1.0 - 1e-6 {
            return (config, paths, value);
        }
    }
}

fn random_distribution<R: Rng>(rng: &mut R, moves: &[Vertex]) -> Distribution<Vertex> {
    let weights: Vec<f64> = moves.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = weights.iter().sum();
    Distribution(moves.iter().zip(&weights).map(|(&m, w)| (m, w / total)).collect())
}

/// Time-dependent random Markov policy for each pursuer, conditioned on the
/// evader's position when `view` is `Position`.
pub fn random_independent_policy<R: Rng>(
    rng: &mut R,
    config: &GameConfig,
    view: ViewKind,
) -> IndependentPolicy {
    let n = config.graph.vertex_count();
    let mut p = IndependentPolicy::new(view, config.pursuer_count());
    p.fallback = Some(Fallback::Uniform);
    for i in 0..config.pursuer_count() {
        for own in 0..n {
            for t in 0..config.horizon {
                let views: Vec<EvaderView> = match view {
                    ViewKind::Hidden => vec![EvaderView::Hidden],
                    ViewKind::Position => (0..n).map(EvaderView::Position).collect(),
                    ViewKind::History => panic!("history keys are not generated"),
                };
                for e in views {
                    let d = random_distribution(rng, config.moves(own));
                    p.insert(i, own, e, Some(t), d);
                }
            }
        }
    }
    p
}
