//! Catch probability of a pursuer policy against fixed evader paths, and the
//! worst case over a path set.

mod file;
pub mod policy;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{initial_state, step, GameConfig, Status};
use crate::error::{Error, Result};
use crate::graph::Vertex;
use crate::paths::{EvaderPath, PathSet};

pub use policy::{
    Distribution, EvaderView, Fallback, IndependentPolicy, JointPolicy, ObsKey, PursuerPolicy,
    ViewKind,
};

/// Default cap on live joint states in the joint DP.
pub const DEFAULT_STATE_BOUND: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ExactFactored,
    ExactJoint,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ExactFactored => "exact-factored",
            Method::ExactJoint => "exact-joint",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

/// How a sweep evaluates each path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    Exact { state_bound: usize },
    MonteCarlo { samples: usize, seed: u64 },
    /// Exact, falling back to Monte Carlo when the joint DP is too large.
    Auto {
        state_bound: usize,
        samples: usize,
        seed: u64,
    },
}

impl Default for EvalMode {
    fn default() -> Self {
        EvalMode::Exact {
            state_bound: DEFAULT_STATE_BOUND,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub value: f64,
    pub method: Method,
    pub stderr: Option<f64>,
    pub worst_path: Option<EvaderPath>,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "scenario,method,value,stderr,worst_path";

    pub fn csv_row(&self, scenario: &str) -> String {
        format!(
            "{scenario},{},{:.12},{},{}",
            self.method.as_str(),
            self.value,
            self.stderr.map(|s| format!("{s:.12}")).unwrap_or_default(),
            self.worst_path
                .as_ref()
                .map(ToString::to_string)
                .unwrap_or_default()
        )
    }
}

/// When coincidence counts as capture along a path, and what happens if the
/// evader survives to its last vertex.
struct Schedule<'a> {
    path: &'a [Vertex],
    /// Number of moves simulated.
    moves: usize,
    check_last: bool,
}

/// `None` when the path cannot finish within the horizon (timeout: certain
/// catch).
fn schedule<'a>(path: &'a EvaderPath, config: &GameConfig) -> Result<Option<Schedule<'a>>> {
    path.validate(config)?;
    let moves = path.len();
    if moves > config.horizon {
        return Ok(None);
    }
    Ok(Some(Schedule {
        path: path.vertices(),
        moves,
        check_last: config.capture_before_escape,
    }))
}

impl Schedule<'_> {
    fn checked(&self, t: usize) -> bool {
        t < self.moves || self.check_last
    }
}

/// Exact catch probability, using the factored DP for independent policies
/// and the joint DP otherwise.
pub fn catch_probability_exact(
    policy: &PursuerPolicy,
    path: &EvaderPath,
    config: &GameConfig,
) -> Result<f64> {
    policy.validate(config)?;
    catch_probability_with(policy, path, config, DEFAULT_STATE_BOUND).map(|(v, _)| v)
}

/// Skips policy validation; callers validate once up front.
pub(crate) fn catch_probability_trusted(
    policy: &PursuerPolicy,
    path: &EvaderPath,
    config: &GameConfig,
    state_bound: usize,
) -> Result<f64> {
    catch_probability_with(policy, path, config, state_bound).map(|(v, _)| v)
}

fn catch_probability_with(
    policy: &PursuerPolicy,
    path: &EvaderPath,
    config: &GameConfig,
    state_bound: usize,
) -> Result<(f64, Method)> {
    match policy {
        PursuerPolicy::Independent(p) => {
            factored_dp(p, path, config).map(|v| (v, Method::ExactFactored))
        }
        PursuerPolicy::Joint(_) => {
            joint_dp(policy, path, config, state_bound).map(|v| (v, Method::ExactJoint))
        }
    }
}

/// Per-pursuer survival DP; valid because independent policies keyed on
/// own position give independent trajectories against a fixed path.
pub fn catch_probability_factored(
    policy: &IndependentPolicy,
    path: &EvaderPath,
    config: &GameConfig,
) -> Result<f64> {
    policy.validate(config)?;
    factored_dp(policy, path, config)
}

fn factored_dp(policy: &IndependentPolicy, path: &EvaderPath, config: &GameConfig) -> Result<f64> {
    let Some(sched) = schedule(path, config)? else {
        return Ok(1.0);
    };
    let n = config.graph.vertex_count();
    let mut survival = 1.0;
    let mut mass = vec![0.0; n];
    let mut next = vec![0.0; n];
    for (i, &start) in config.pursuer_starts.iter().enumerate() {
        mass.iter_mut().for_each(|m| *m = 0.0);
        mass[start] = 1.0;
        if sched.checked(0) {
            mass[sched.path[0]] = 0.0;
        }
        for t in 0..sched.moves {
            next.iter_mut().for_each(|m| *m = 0.0);
            let prefix = &sched.path[..=t];
            for v in 0..n {
                if mass[v] == 0.0 {
                    continue;
                }
                let dist = policy.distribution(config, i, v, prefix, t)?;
                for &(w, p) in dist.entries() {
                    next[w] += mass[v] * p;
                }
            }
            if sched.checked(t + 1) {
                next[sched.path[t + 1]] = 0.0;
            }
            std::mem::swap(&mut mass, &mut next);
        }
        survival *= mass.iter().sum::<f64>();
    }
    Ok((1.0 - survival).clamp(0.0, 1.0))
}

/// DP over joint pursuer location tuples. Accepts both policy kinds.
pub fn catch_probability_joint(
    policy: &PursuerPolicy,
    path: &EvaderPath,
    config: &GameConfig,
    state_bound: usize,
) -> Result<f64> {
    policy.validate(config)?;
    joint_dp(policy, path, config, state_bound)
}

fn joint_dp(
    policy: &PursuerPolicy,
    path: &EvaderPath,
    config: &GameConfig,
    state_bound: usize,
) -> Result<f64> {
    let Some(sched) = schedule(path, config)? else {
        return Ok(1.0);
    };
    let mut live: BTreeMap<Vec<Vertex>, f64> = BTreeMap::new();
    let starts = config.pursuer_starts.clone();
    if !(sched.checked(0) && starts.contains(&sched.path[0])) {
        live.insert(starts, 1.0);
    }
    for t in 0..sched.moves {
        let prefix = &sched.path[..=t];
        let target = sched.checked(t + 1).then_some(sched.path[t + 1]);
        let mut next: BTreeMap<Vec<Vertex>, f64> = BTreeMap::new();
        for (locs, mass) in &live {
            for (joint, p) in joint_distribution(policy, config, locs, prefix, t)? {
                if target.is_some_and(|e| joint.contains(&e)) {
                    continue;
                }
                *next.entry(joint).or_insert(0.0) += mass * p;
            }
            if next.len() > state_bound {
                return Err(Error::StateSpaceTooLarge {
                    states: next.len(),
                    bound: state_bound,
                });
            }
        }
        live = next;
    }
    let survival: f64 = live.values().sum();
    Ok((1.0 - survival).clamp(0.0, 1.0))
}

fn joint_distribution(
    policy: &PursuerPolicy,
    config: &GameConfig,
    locs: &[Vertex],
    prefix: &[Vertex],
    t: usize,
) -> Result<Vec<(Vec<Vertex>, f64)>> {
    match policy {
        PursuerPolicy::Joint(p) => Ok(p.distribution(config, locs, prefix, t)?.into_owned().0),
        PursuerPolicy::Independent(p) => {
            let mut out: Vec<(Vec<Vertex>, f64)> = vec![(Vec::with_capacity(locs.len()), 1.0)];
            for (i, &v) in locs.iter().enumerate() {
                let dist = p.distribution(config, i, v, prefix, t)?;
                out = out
                    .into_iter()
                    .flat_map(|(m, q)| {
                        dist.entries().iter().map(move |&(w, r)| {
                            let mut m = m.clone();
                            m.push(w);
                            (m, q * r)
                        })
                    })
                    .collect();
            }
            Ok(out)
        }
    }
}

/// Monte Carlo estimate by rolling the game with the evader scripted to
/// `path`. Returns (mean, stderr) with stderr = sample sd / sqrt(samples).
pub fn catch_probability_mc(
    policy: &PursuerPolicy,
    path: &EvaderPath,
    config: &GameConfig,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    policy.validate(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    mc_with_rng(policy, path, config, samples, &mut rng)
}

fn mc_with_rng(
    policy: &PursuerPolicy,
    path: &EvaderPath,
    config: &GameConfig,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::Parse("samples must be >= 1".into()));
    }
    path.validate(config)?;
    let verts = path.vertices();
    let mut caught = 0usize;
    for _ in 0..samples {
        let mut state = initial_state(config)?;
        while state.status == Status::Ongoing {
            let t = state.t;
            let moves = policy.sample(config, &state.pursuer_locs, &verts[..=t], t, rng)?;
            state = step(&state, &moves, verts[t + 1], config)?;
        }
        if state.status != Status::EvaderWin {
            caught += 1;
        }
    }
    let n = samples as f64;
    let mean = caught as f64 / n;
    let stderr = if samples > 1 {
        let var = (caught as f64 * (1.0 - mean).powi(2)
            + (samples - caught) as f64 * mean.powi(2))
            / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok((mean, stderr))
}

/// Minimum catch probability over `paths`; ties go to the lexicographically
/// smallest path. Paths are evaluated in parallel.
pub fn worst_case_reward(
    policy: &PursuerPolicy,
    paths: &PathSet,
    config: &GameConfig,
    mode: EvalMode,
) -> Result<EvalReport> {
    if paths.is_empty() {
        return Err(Error::EmptyPathSet);
    }
    policy.validate(config)?;
    let results: Vec<(f64, Method, Option<f64>)> = paths
        .paths()
        .par_iter()
        .enumerate()
        .map(|(idx, path)| evaluate_one(policy, path, config, mode, idx as u64))
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.0 < results[best].0 {
            best = i;
        }
    }
    let (value, method, stderr) = results[best];
    Ok(EvalReport {
        value,
        method,
        stderr,
        worst_path: Some(paths.paths()[best].clone()),
    })
}

fn evaluate_one(
    policy: &PursuerPolicy,
    path: &EvaderPath,
    config: &GameConfig,
    mode: EvalMode,
    stream: u64,
) -> Result<(f64, Method, Option<f64>)> {
    let mc = |samples: usize, seed: u64| -> Result<(f64, Method, Option<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let (mean, se) = mc_with_rng(policy, path, config, samples, &mut rng)?;
        Ok((mean, Method::MonteCarlo, Some(se)))
    };
    match mode {
        EvalMode::Exact { state_bound } => {
            let (v, m) = catch_probability_with(policy, path, config, state_bound)?;
            Ok((v, m, None))
        }
        EvalMode::MonteCarlo { samples, seed } => mc(samples, seed),
        EvalMode::Auto {
            state_bound,
            samples,
            seed,
        } => match catch_probability_with(policy, path, config, state_bound) {
            Ok((v, m)) => Ok((v, m, None)),
            Err(Error::StateSpaceTooLarge { .. }) => mc(samples, seed),
            Err(e) => Err(e),
        },
    }
}
