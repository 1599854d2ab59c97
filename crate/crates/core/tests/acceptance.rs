//! Acceptance criteria, one PASS/FAIL line each. Runs with its own harness so
//! the lines are always printed; exits nonzero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{random_contested_scenario, random_independent_policy, random_small_scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unsg::cfr::{cfr_solve, CfrOptions, Variant};
use unsg::cli::{bench_csv, solve_scenario};
use unsg::dynamics::{
    evader_payoff, initial_state, pursuer_payoff, step, GameConfig, InfoCase, Status,
};
use unsg::error::Error;
use unsg::evaluation::{
    catch_probability_factored, catch_probability_joint, catch_probability_mc, worst_case_reward,
    EvalMode, EvaderView, Distribution, IndependentPolicy, PursuerPolicy, ViewKind,
    DEFAULT_STATE_BOUND,
};
use unsg::graph::{generate_grid, GridSpec};
use unsg::meta::{double_oracle_solve, DoOptions};
use unsg::paths::{enumerate_paths, PathMode, PathOptions, DEFAULT_PATH_CAP};
use unsg::scenario::{bundled, bundled_scenario, seed_paths, SolverKind};

// Tolerances and limits, pinned.
const EASY_TOL: f64 = 1e-3;
const EASY_LIMIT: Duration = Duration::from_secs(60);
const HARD_TOL: f64 = 1e-2;
const HARD_GAP: f64 = 1e-3;
const HARD_LIMIT: Duration = Duration::from_secs(300);
const ORACLE_SCENARIOS: usize = 20;
const ORACLE_DO_TOL: f64 = 1e-3;
const ORACLE_CFR_TOL: f64 = 1e-2;
const ORACLE_CFR_MAX_ITERS: usize = 100_000;
const ORACLE_LIMIT: Duration = Duration::from_secs(600);
const EVAL_SCENARIOS: usize = 50;
const EVAL_DP_TOL: f64 = 1e-10;
const EVAL_MC_SAMPLES: usize = 100_000;
const EVAL_MC_SIGMAS: f64 = 3.0;
const SWEEP_LIMIT: Duration = Duration::from_secs(600);
const ROLLOUTS: usize = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ground_truth_easy() -> Outcome {
    let s = bundled_scenario("easy").unwrap();
    let started = Instant::now();
    let run = solve_scenario(&s, SolverKind::Do, Variant::PlusAveraging).unwrap();
    let took = started.elapsed();
    let v = run.row.value;
    outcome(
        (v - 1.0).abs() <= EASY_TOL && took < EASY_LIMIT,
        format!("double oracle value {v:.6} (target 1 ± {EASY_TOL:e}), {:.2} s (limit {} s)", took.as_secs_f64(), EASY_LIMIT.as_secs()),
    )
}

fn ground_truth_hard() -> Outcome {
    let s = bundled_scenario("hard").unwrap();
    let started = Instant::now();
    let d = solve_scenario(&s, SolverKind::Do, Variant::PlusAveraging).unwrap();
    let c = solve_scenario(&s, SolverKind::Cfr, Variant::PlusAveraging).unwrap();
    let took = started.elapsed();
    let pass = (d.row.value - 0.5).abs() <= HARD_TOL
        && (c.row.value - 0.5).abs() <= HARD_TOL
        && d.converged
        && d.row.gap <= HARD_GAP
        && took < HARD_LIMIT;
    outcome(
        pass,
        format!(
            "do {:.6} (gap {:.1e} <= {HARD_GAP:e}), cfr {:.6} after {} iterations (target 0.5 ± {HARD_TOL:e}), {:.2} s (limit {} s)",
            d.row.value, d.row.gap, c.row.value, c.row.iterations, took.as_secs_f64(), HARD_LIMIT.as_secs()
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_do, mut worst_cfr, mut max_iters) = (0.0f64, 0.0f64, 0);
    let mut failures = Vec::new();
    for i in 0..ORACLE_SCENARIOS {
        let (config, paths, oracle) =
            random_contested_scenario(&mut rng, InfoCase::PursuerSeesEvader, 3);
        let res = double_oracle_solve(&config, &paths, &paths.paths()[..1], DoOptions::default()).unwrap();
        let mut opts = CfrOptions::new(ORACLE_CFR_MAX_ITERS, Variant::PlusAveraging);
        opts.target_exploitability = Some(ORACLE_CFR_TOL / 2.0);
        opts.log_every = 500;
        let sol = cfr_solve(&config, opts).unwrap();
        let (e_do, e_cfr) = ((res.value - oracle).abs(), (sol.value - oracle).abs());
        worst_do = worst_do.max(e_do);
        worst_cfr = worst_cfr.max(e_cfr);
        max_iters = max_iters.max(sol.iterations);
        if e_do > ORACLE_DO_TOL || e_cfr > ORACLE_CFR_TOL {
            failures.push(i);
        }
    }
    let took = started.elapsed();
    outcome(
        failures.is_empty() && took < ORACLE_LIMIT,
        format!(
            "{ORACLE_SCENARIOS} contested 3x3 games vs sequence-form LP: max |do-lp| {worst_do:.1e} (tol {ORACLE_DO_TOL:e}), max |cfr-lp| {worst_cfr:.1e} (tol {ORACLE_CFR_TOL:e}, <= {max_iters} iterations), failures {failures:?}, {:.1} s",
            took.as_secs_f64()
        ),
    )
}

fn evaluation_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut done, mut worst_dp, mut worst_sigma) = (0, 0.0f64, 0.0f64);
    let mut failures = Vec::new();
    while done < EVAL_SCENARIOS {
        let Some((mut config, paths)) = random_small_scenario(&mut rng, InfoCase::PursuerSeesEvader, 3) else {
            continue;
        };
        config.pursuer_starts.push(rng.gen_range(0..9));
        let view = if done % 2 == 0 { ViewKind::Position } else { ViewKind::Hidden };
        let policy = random_independent_policy(&mut rng, &config, view);
        let wrapped = PursuerPolicy::Independent(policy.clone());
        let path = &paths.paths()[rng.gen_range(0..paths.len())];
        let f = catch_probability_factored(&policy, path, &config).unwrap();
        let j = catch_probability_joint(&wrapped, path, &config, DEFAULT_STATE_BOUND).unwrap();
        let (mean, se) = catch_probability_mc(&wrapped, path, &config, EVAL_MC_SAMPLES, done as u64).unwrap();
        worst_dp = worst_dp.max((f - j).abs());
        let mc_ok = if se == 0.0 {
            (mean - f).abs() <= 1e-12
        } else {
            let sigmas = (mean - f).abs() / se;
            worst_sigma = worst_sigma.max(sigmas);
            sigmas <= EVAL_MC_SIGMAS
        };
        if (f - j).abs() > EVAL_DP_TOL || !mc_ok {
            failures.push(done);
        }
        done += 1;
    }
    outcome(
        failures.is_empty(),
        format!(
            "{EVAL_SCENARIOS} random independent policies: max |factored-joint| {worst_dp:.1e} (tol {EVAL_DP_TOL:e}), worst MC deviation {worst_sigma:.2} stderr (limit {EVAL_MC_SIGMAS}), failures {failures:?}"
        ),
    )
}

fn do_sandwich() -> Outcome {
    let mut violations = Vec::new();
    let mut rows = 0;
    for s in bundled() {
        let eps = s.solver.eps;
        let config = s.config().unwrap();
        let full = s.paths(&config).unwrap();
        let seed = seed_paths(&full, s.solver.seed).unwrap();
        let res = double_oracle_solve(&config, &full, &seed, s.do_options()).unwrap();
        for r in &res.log {
            rows += 1;
            if !(r.lower <= r.value + 2.0 * eps && r.value <= r.upper + 2.0 * eps) {
                violations.push(format!("{}#{}", s.id, r.iteration));
            }
        }
        if !res.converged || res.gap() > eps {
            violations.push(format!("{} final gap {:.1e}", s.id, res.gap()));
        }
    }
    outcome(
        violations.is_empty(),
        format!("{rows} logged iterations over the bundled benchmarks satisfy lower <= value <= upper (slack 2 eps), final gaps <= eps; violations {violations:?}"),
    )
}

fn sweep_scale() -> Outcome {
    let started = Instant::now();
    let graph = generate_grid(&GridSpec::full(7, 7)).unwrap().with_exits([0, 6, 42, 48]).unwrap();
    let config = GameConfig::new(graph, vec![10, 38], 24, 12, InfoCase::NeitherSees);
    let paths = match enumerate_paths(&config.graph, 24, &PathOptions::new(PathMode::Simple, 12)) {
        Ok(p) => p,
        Err(e @ Error::PathExplosion { .. }) => return outcome(false, e.to_string()),
        Err(e) => panic!("{e}"),
    };
    // time-independent random Markov policy on own position
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut policy = IndependentPolicy::new(ViewKind::Hidden, 2);
    for i in 0..2 {
        for v in 0..49 {
            let moves = config.moves(v);
            let w: Vec<f64> = moves.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            let dist = Distribution(moves.iter().zip(&w).map(|(&m, x)| (m, x / total)).collect());
            policy.insert(i, v, EvaderView::Hidden, None, dist);
        }
    }
    let report = worst_case_reward(
        &PursuerPolicy::Independent(policy),
        &paths,
        &config,
        EvalMode::Exact { state_bound: DEFAULT_STATE_BOUND },
    )
    .unwrap();
    let took = started.elapsed();
    outcome(
        took < SWEEP_LIMIT && report.stderr.is_none(),
        format!(
            "7x7 grid, 4 exits, max_len 12: {} simple paths (cap {DEFAULT_PATH_CAP}), exact worst case {:.6} via {}, {:.2} s (limit {} s)",
            paths.len(),
            report.value,
            report.method.as_str(),
            took.as_secs_f64(),
            SWEEP_LIMIT.as_secs()
        ),
    )
}

fn determinism() -> Outcome {
    let a = bench_csv(None, Some(0), false).unwrap();
    let b = bench_csv(None, Some(0), false).unwrap();
    outcome(
        a == b,
        format!("two bench runs, {} rows, {} bytes, identical: {}", a.lines().count() - 1, a.len(), a == b),
    )
}

/// Independent statement of the terminal rules.
fn expected_status(config: &GameConfig, pursuers: &[usize], evader: usize, t: usize) -> Status {
    let met = pursuers.contains(&evader);
    let out = config.graph.is_exit(evader);
    if met && (config.capture_before_escape || !out) {
        Status::PursuerWinCapture
    } else if out {
        Status::EvaderWin
    } else if t >= config.horizon {
        Status::PursuerWinTimeout
    } else {
        Status::Ongoing
    }
}

fn dynamics_conformance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations: Vec<String> = Vec::new();
    let mut steps = 0;
    for k in 0..ROLLOUTS {
        let spec = GridSpec {
            rows: rng.gen_range(2..5),
            cols: rng.gen_range(2..5),
            side_exist_prob: rng.gen_range(0.5..=1.0),
            diagonal_exist_prob: rng.gen_range(0.0..0.5),
            seed: rng.gen(),
        };
        let n = spec.rows * spec.cols;
        let exits: Vec<usize> = (0..rng.gen_range(1..3)).map(|_| rng.gen_range(0..n)).collect();
        let graph = generate_grid(&spec).unwrap().with_exits(exits).unwrap();
        let pursuers = (0..rng.gen_range(1..4)).map(|_| rng.gen_range(0..n)).collect();
        let mut config = GameConfig::new(
            graph,
            pursuers,
            rng.gen_range(0..n),
            rng.gen_range(1..8),
            InfoCase::ALL[rng.gen_range(0..4)],
        );
        config.allow_stay = rng.gen();
        config.capture_before_escape = rng.gen();

        let mut s = initial_state(&config).unwrap();
        let check = |s: &unsg::dynamics::GameState, violations: &mut Vec<String>| {
            if s.status != expected_status(&config, &s.pursuer_locs, s.evader_loc, s.t) {
                violations.push(format!("rollout {k} t={}: status {:?}", s.t, s.status));
            }
            match (pursuer_payoff(s), evader_payoff(s)) {
                (Ok(u), Ok(w)) if s.status.is_terminal() && (u == 0.0 || u == 1.0) && u + w == 0.0 => {}
                (Err(Error::GameNotOver), Err(Error::GameNotOver)) if !s.status.is_terminal() => {}
                other => violations.push(format!("rollout {k}: payoffs {other:?}")),
            }
            if s.t > config.horizon {
                violations.push(format!("rollout {k}: t={} past horizon", s.t));
            }
        };
        check(&s, &mut violations);
        while !s.status.is_terminal() {
            let joint: Vec<usize> = s
                .pursuer_locs
                .iter()
                .map(|&v| {
                    let m = config.moves(v);
                    m[rng.gen_range(0..m.len())]
                })
                .collect();
            let em = config.moves(s.evader_loc);
            let e = em[rng.gen_range(0..em.len())];
            let next = step(&s, &joint, e, &config).unwrap();
            if next.t != s.t + 1 {
                violations.push(format!("rollout {k}: time jumped"));
            }
            s = next;
            steps += 1;
            check(&s, &mut violations);
        }
        // terminal states stay terminal
        if !matches!(step(&s, &s.pursuer_locs.clone(), s.evader_loc, &config), Err(Error::GameOver)) {
            violations.push(format!("rollout {k}: stepped past the end"));
        }
    }
    violations.truncate(5);
    outcome(
        violations.is_empty(),
        format!("{ROLLOUTS} random rollouts ({steps} steps): capture dominance, zero-sum payoffs, status monotonicity; violations {violations:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("ground-truth easy game", ground_truth_easy),
        ("ground-truth hard game", ground_truth_hard),
        ("oracle equivalence", oracle_equivalence),
        ("evaluation consistency", evaluation_consistency),
        ("double oracle sandwich", do_sandwich),
        ("worst-case sweep scale", sweep_scale),
        ("determinism", determinism),
        ("dynamics conformance", dynamics_conformance),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {} [{tag}] {name}: {}", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
