//! Restricted zero-sum meta-game and the double-oracle loop.
//!
//! Rows are pursuer policies (maximiser), columns are evader paths
//! (minimiser), entries are exact catch probabilities.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::dynamics::GameConfig;
use crate::error::{Error, Result};
use crate::evaluation::{catch_probability_trusted, PursuerPolicy, DEFAULT_STATE_BOUND};
use crate::oracles::{argmin_first, pursuer_best_response, BestResponseOptions, MixedStrategy};
use crate::paths::{EvaderPath, PathSet};

#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PayoffMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in &rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(PayoffMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `M y`
    pub fn row_payoffs(&self, y: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(y).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `x^T M`
    pub fn col_payoffs(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(r)) {
                *o += xr * m;
            }
        }
        out
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.row_payoffs(y)).map(|(a, b)| a * b).sum()
    }

    /// Sum of both players' best-response gains against `(x, y)`.
    pub fn exploitability(&self, x: &[f64], y: &[f64]) -> f64 {
        let best_row = self.row_payoffs(y).into_iter().fold(f64::MIN, f64::max);
        let best_col = self.col_payoffs(x).into_iter().fold(f64::MAX, f64::min);
        best_row - best_col
    }
}

pub enum Extension<'a> {
    Row(&'a [f64]),
    Col(&'a [f64]),
}

/// Grows the matrix by one row or column; existing entries are untouched.
pub fn extend_matrix(matrix: &mut PayoffMatrix, ext: Extension<'_>) -> Result<()> {
    match ext {
        Extension::Row(r) => {
            if r.len() != matrix.cols {
                return Err(Error::DimensionMismatch {
                    expected: matrix.cols,
                    got: r.len(),
                });
            }
            matrix.data.extend_from_slice(r);
            matrix.rows += 1;
        }
        Extension::Col(c) => {
            if c.len() != matrix.rows {
                return Err(Error::DimensionMismatch {
                    expected: matrix.rows,
                    got: c.len(),
                });
            }
            let cols = matrix.cols + 1;
            let mut data = Vec::with_capacity(matrix.rows * cols);
            for (r, &extra) in c.iter().enumerate() {
                data.extend_from_slice(matrix.row(r));
                data.push(extra);
            }
            matrix.data = data;
            matrix.cols = cols;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSolution {
    pub row_strategy: Vec<f64>,
    pub col_strategy: Vec<f64>,
    pub value: f64,
    pub exploitability: f64,
    pub iterations: usize,
}

pub const DEFAULT_MATRIX_ITERATIONS: usize = 2_000_000;

fn normalize_positive(q: &[f64], out: &mut [f64]) {
    let total: f64 = q.iter().sum();
    if total > 0.0 {
        for (o, &v) in out.iter_mut().zip(q) {
            *o = v / total;
        }
    } else {
        let u = 1.0 / q.len() as f64;
        out.iter_mut().for_each(|o| *o = u);
    }
}

/// Regret-matching+ self-play with alternating updates and linearly
/// weighted averages; stops once the averages are `eps`-exploitable.
pub fn solve_matrix_zero_sum(
    matrix: &PayoffMatrix,
    eps: f64,
    max_iterations: usize,
) -> Result<MatrixSolution> {
    if !(eps > 0.0) {
        return Err(Error::Parse(format!("eps must be > 0 (got {eps})")));
    }
    let (m, n) = (matrix.rows, matrix.cols);
    let mut q_row = vec![0.0; m];
    let mut q_col = vec![0.0; n];
    let mut x = vec![1.0 / m as f64; m];
    let mut y = vec![1.0 / n as f64; n];
    let mut avg_x = vec![0.0; m];
    let mut avg_y = vec![0.0; n];
    let mut sx = vec![0.0; m];
    let mut sy = vec![0.0; n];
    let mut gap = f64::INFINITY;

    for it in 1..=max_iterations {
        let weight = it as f64;

        let u = matrix.row_payoffs(&y);
        let ev: f64 = x.iter().zip(&u).map(|(a, b)| a * b).sum();
        for (q, ui) in q_row.iter_mut().zip(&u) {
            *q = (*q + ui - ev).max(0.0);
        }
        normalize_positive(&q_row, &mut x);

        let l = matrix.col_payoffs(&x);
        let ev: f64 = y.iter().zip(&l).map(|(a, b)| a * b).sum();
        for (q, lj) in q_col.iter_mut().zip(&l) {
            *q = (*q + ev - lj).max(0.0);
        }
        normalize_positive(&q_col, &mut y);

        for (a, &v) in avg_x.iter_mut().zip(&x) {
            *a += weight * v;
        }
        for (a, &v) in avg_y.iter_mut().zip(&y) {
            *a += weight * v;
        }

        if it % 8 == 0 || it == max_iterations || it == 1 {
            normalize_positive(&avg_x, &mut sx);
            normalize_positive(&avg_y, &mut sy);
            gap = matrix.exploitability(&sx, &sy);
            if gap <= eps {
                return Ok(MatrixSolution {
                    value: matrix.value(&sx, &sy),
                    row_strategy: sx,
                    col_strategy: sy,
                    exploitability: gap.max(0.0),
                    iterations: it,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iterations,
        gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoOptions {
    /// Target bound gap.
    pub eps: f64,
    pub max_iters: usize,
    /// Exploitability target for each restricted-game solve.
    pub meta_eps: f64,
    pub meta_max_iterations: usize,
    pub state_bound: usize,
}

impl DoOptions {
    pub fn new(eps: f64, max_iters: usize) -> Self {
        DoOptions {
            eps,
            max_iters,
            meta_eps: eps / 10.0,
            meta_max_iterations: DEFAULT_MATRIX_ITERATIONS,
            state_bound: DEFAULT_STATE_BOUND,
        }
    }
}

impl Default for DoOptions {
    fn default() -> Self {
        DoOptions::new(1e-4, 200)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    /// Restricted-game value.
    pub value: f64,
    /// Evader best-response value against the pursuer meta-strategy.
    pub lower: f64,
    /// Pursuer best-response value against the evader meta-strategy.
    pub upper: f64,
    pub rows: usize,
    pub cols: usize,
    pub wall: Duration,
}

impl IterationLog {
    pub fn csv_header(timing: bool) -> &'static str {
        if timing {
            "iteration,value,lower,upper,rows,cols,wall_ms"
        } else {
            "iteration,value,lower,upper,rows,cols"
        }
    }

    pub fn csv_row(&self, timing: bool) -> String {
        let mut row = format!(
            "{},{:.12},{:.12},{:.12},{},{}",
            self.iteration, self.value, self.lower, self.upper, self.rows, self.cols
        );
        if timing {
            row.push_str(&format!(",{:.3}", self.wall.as_secs_f64() * 1e3));
        }
        row
    }
}

#[derive(Debug, Clone)]
pub struct DoResult {
    pub matrix: PayoffMatrix,
    pub policies: Vec<PursuerPolicy>,
    pub paths: Vec<EvaderPath>,
    pub row_strategy: Vec<f64>,
    pub col_strategy: Vec<f64>,
    pub value: f64,
    /// Best bounds seen at the last logged iteration.
    pub lower: f64,
    pub upper: f64,
    pub log: Vec<IterationLog>,
    pub converged: bool,
}

impl DoResult {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

struct Restricted<'a> {
    config: &'a GameConfig,
    full: &'a PathSet,
    state_bound: usize,
    matrix: Option<PayoffMatrix>,
    policies: Vec<PursuerPolicy>,
    /// Each policy's catch probability on every path of `full`.
    sweeps: Vec<Vec<f64>>,
    paths: Vec<EvaderPath>,
}

impl Restricted<'_> {
    fn entry(&self, row: usize, path: &EvaderPath) -> Result<f64> {
        match self.full.paths().binary_search(path) {
            Ok(j) => Ok(self.sweeps[row][j]),
            Err(_) => catch_probability_trusted(&self.policies[row], path, self.config, self.state_bound),
        }
    }

    fn add_policy(&mut self, policy: PursuerPolicy) -> Result<()> {
        policy.validate(self.config)?;
        let sweep: Vec<f64> = self
            .full
            .paths()
            .par_iter()
            .map(|p| catch_probability_trusted(&policy, p, self.config, self.state_bound))
            .collect::<Result<_>>()?;
        self.policies.push(policy);
        self.sweeps.push(sweep);
        let row = self.policies.len() - 1;
        let entries: Vec<f64> = self
            .paths
            .iter()
            .map(|p| self.entry(row, p))
            .collect::<Result<_>>()?;
        match &mut self.matrix {
            Some(m) => extend_matrix(m, Extension::Row(&entries))?,
            None => self.matrix = Some(PayoffMatrix::from_rows(vec![entries])?),
        }
        Ok(())
    }

    fn add_path(&mut self, path: EvaderPath) -> Result<()> {
        let entries: Vec<f64> = (0..self.policies.len())
            .into_par_iter()
            .map(|r| self.entry(r, &path))
            .collect::<Result<_>>()?;
        self.paths.push(path);
        let m = self.matrix.as_mut().expect("matrix has a row");
        extend_matrix(m, Extension::Col(&entries))
    }
}

/// Double oracle with exact best responses. The evader oracle scans the
/// whole of `full`; `seed` gives the initial columns.
pub fn double_oracle_solve(
    config: &GameConfig,
    full: &PathSet,
    seed: &[EvaderPath],
    opts: DoOptions,
) -> Result<DoResult> {
    if !config.info_case.pursuer_sees_evader() {
        return Err(Error::InfoCaseUnsupported(format!(
            "double oracle needs a pursuer that observes the evader (info case {})",
            config.info_case
        )));
    }
    if full.is_empty() || seed.is_empty() {
        return Err(Error::EmptyPathSet);
    }
    for p in full.paths().iter().chain(seed) {
        p.validate(config)?;
    }
    let br_opts = BestResponseOptions {
        state_bound: opts.state_bound,
    };
    let mut game = Restricted {
        config,
        full,
        state_bound: opts.state_bound,
        matrix: None,
        policies: Vec::new(),
        sweeps: Vec::new(),
        paths: Vec::new(),
    };
    let mut seed_paths = seed.to_vec();
    seed_paths.sort();
    seed_paths.dedup();
    let (first, _) = pursuer_best_response(&MixedStrategy::uniform(seed_paths.clone())?, config, br_opts)?;
    game.paths = seed_paths;
    game.add_policy(first)?;

    let started = Instant::now();
    let mut log = Vec::new();
    let mut converged = false;
    let mut bounds = (f64::NAN, f64::NAN);
    let mut solution = None;
    for iteration in 0..opts.max_iters {
        let matrix = game.matrix.as_ref().expect("matrix has a row");
        let sol = solve_matrix_zero_sum(matrix, opts.meta_eps, opts.meta_max_iterations)?;

        let evader_mix = MixedStrategy::new(game.paths.clone(), sol.col_strategy.clone())?;
        let (policy, upper) = pursuer_best_response(&evader_mix, config, br_opts)?;

        let mixed: Vec<f64> = (0..full.len())
            .map(|j| {
                sol.row_strategy
                    .iter()
                    .zip(&game.sweeps)
                    .map(|(x, s)| x * s[j])
                    .sum()
            })
            .collect();
        let best = argmin_first(&mixed);
        let lower = mixed[best];

        log.push(IterationLog {
            iteration,
            value: sol.value,
            lower,
            upper,
            rows: matrix.rows(),
            cols: matrix.cols(),
            wall: started.elapsed(),
        });
        bounds = (lower, upper);
        let value = sol.value;
        solution = Some(sol);
        if upper - lower <= opts.eps {
            converged = true;
            break;
        }

        let mut added = false;
        if upper > value + opts.eps / 2.0 && !game.policies.contains(&policy) {
            game.add_policy(policy)?;
            added = true;
        }
        let path = &full.paths()[best];
        if lower < value - opts.eps / 2.0 && !game.paths.contains(path) {
            game.add_path(path.clone())?;
            added = true;
        }
        if !added {
            break;
        }
    }

    let matrix = game.matrix.expect("matrix has a row");
    let sol = match solution {
        // the last solve predates any strategies added after it
        Some(s) if s.row_strategy.len() == matrix.rows() && s.col_strategy.len() == matrix.cols() => s,
        _ => solve_matrix_zero_sum(&matrix, opts.meta_eps, opts.meta_max_iterations)?,
    };
    Ok(DoResult {
        matrix,
        policies: game.policies,
        paths: game.paths,
        value: sol.value,
        row_strategy: sol.row_strategy,
        col_strategy: sol.col_strategy,
        lower: bounds.0,
        upper: bounds.1,
        log,
        converged,
    })
}
