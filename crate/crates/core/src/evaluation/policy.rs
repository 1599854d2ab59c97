//! Tabular pursuer policies keyed by observation.

use std::borrow::Cow;
use std::collections::BTreeMap;

use crate::dynamics::GameConfig;
use crate::error::{Error, Result};
use crate::graph::Vertex;

const SUM_TOLERANCE: f64 = 1e-9;

/// How much of the evader's trajectory a policy conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViewKind {
    Hidden,
    Position,
    History,
}

impl ViewKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViewKind::Hidden => "hidden",
            ViewKind::Position => "position",
            ViewKind::History => "history",
        }
    }

    /// The evader component of an observation key, given the evader's
    /// positions up to and including the current step.
    pub fn view(self, prefix: &[Vertex]) -> EvaderView {
        match self {
            ViewKind::Hidden => EvaderView::Hidden,
            ViewKind::Position => EvaderView::Position(*prefix.last().expect("nonempty prefix")),
            ViewKind::History => EvaderView::History(prefix.to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EvaderView {
    Hidden,
    Position(Vertex),
    History(Vec<Vertex>),
}

impl EvaderView {
    pub fn kind(&self) -> ViewKind {
        match self {
            EvaderView::Hidden => ViewKind::Hidden,
            EvaderView::Position(_) => ViewKind::Position,
            EvaderView::History(_) => ViewKind::History,
        }
    }
}

/// Observation key. `t = None` matches every timestep not listed explicitly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObsKey<O> {
    pub own: O,
    pub evader: EvaderView,
    pub t: Option<usize>,
}

/// Finite distribution over moves.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<A>(pub Vec<(A, f64)>);

impl<A> Distribution<A> {
    pub fn pure(a: A) -> Self {
        Distribution(vec![(a, 1.0)])
    }

    pub fn entries(&self) -> &[(A, f64)] {
        &self.0
    }

    fn check_sum(&self) -> Result<()> {
        if self.0.iter().any(|(_, p)| !p.is_finite() || *p < 0.0) {
            return Err(Error::PolicyIncompatible("negative or non-finite probability".into()));
        }
        let total: f64 = self.0.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::PolicyIncompatible(format!(
                "distribution sums to {total}"
            )));
        }
        Ok(())
    }
}

impl Distribution<Vertex> {
    pub fn uniform(moves: &[Vertex]) -> Self {
        let p = 1.0 / moves.len() as f64;
        Distribution(moves.iter().map(|&m| (m, p)).collect())
    }
}

/// Behaviour at observations without a table entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    /// First legal move (the stay, when stays are allowed).
    FirstMove,
    Uniform,
}

impl Fallback {
    pub fn as_str(self) -> &'static str {
        match self {
            Fallback::FirstMove => "first-move",
            Fallback::Uniform => "uniform",
        }
    }
}

/// One table per pursuer, each keyed on that pursuer's own position only.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentPolicy {
    pub view: ViewKind,
    pub tables: Vec<BTreeMap<ObsKey<Vertex>, Distribution<Vertex>>>,
    pub fallback: Option<Fallback>,
}

/// A single table keyed on the full pursuer location tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPolicy {
    pub view: ViewKind,
    pub table: BTreeMap<ObsKey<Vec<Vertex>>, Distribution<Vec<Vertex>>>,
    pub fallback: Option<Fallback>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PursuerPolicy {
    Independent(IndependentPolicy),
    Joint(JointPolicy),
}

fn lookup<'a, O: Ord + Clone, A>(
    table: &'a BTreeMap<ObsKey<O>, Distribution<A>>,
    own: &O,
    evader: EvaderView,
    t: usize,
) -> Option<&'a Distribution<A>> {
    let mut key = ObsKey {
        own: own.clone(),
        evader,
        t: Some(t),
    };
    if let Some(d) = table.get(&key) {
        return Some(d);
    }
    key.t = None;
    table.get(&key)
}

fn check_view(view: ViewKind, config: &GameConfig) -> Result<()> {
    if view != ViewKind::Hidden && !config.info_case.pursuer_sees_evader() {
        return Err(Error::PolicyIncompatible(format!(
            "policy observes the evader ({}) but the info case is {}",
            view.as_str(),
            config.info_case
        )));
    }
    Ok(())
}

fn check_key_view(evader: &EvaderView, view: ViewKind, config: &GameConfig) -> Result<()> {
    if evader.kind() != view {
        return Err(Error::PolicyIncompatible(format!(
            "key view {} differs from policy view {}",
            evader.kind().as_str(),
            view.as_str()
        )));
    }
    match evader {
        EvaderView::Position(v) => config.graph.check_vertex(*v),
        EvaderView::History(h) => h.iter().try_for_each(|&v| config.graph.check_vertex(v)),
        EvaderView::Hidden => Ok(()),
    }
}

impl IndependentPolicy {
    pub fn new(view: ViewKind, pursuers: usize) -> Self {
        IndependentPolicy {
            view,
            tables: vec![BTreeMap::new(); pursuers],
            fallback: None,
        }
    }

    /// Every pursuer picks uniformly among its legal moves at every step.
    pub fn uniform(config: &GameConfig) -> Self {
        IndependentPolicy {
            fallback: Some(Fallback::Uniform),
            ..Self::new(ViewKind::Hidden, config.pursuer_count())
        }
    }

    /// Every pursuer stays put forever (requires stays to be allowed).
    pub fn stationary(config: &GameConfig) -> Self {
        IndependentPolicy {
            fallback: Some(Fallback::FirstMove),
            ..Self::new(ViewKind::Hidden, config.pursuer_count())
        }
    }

    pub fn insert(
        &mut self,
        pursuer: usize,
        own: Vertex,
        evader: EvaderView,
        t: Option<usize>,
        dist: Distribution<Vertex>,
    ) {
        self.tables[pursuer].insert(ObsKey { own, evader, t }, dist);
    }

    /// Move distribution of `pursuer` at `own` given the evader's prefix.
    pub fn distribution(
        &self,
        config: &GameConfig,
        pursuer: usize,
        own: Vertex,
        prefix: &[Vertex],
        t: usize,
    ) -> Result<Cow<'_, Distribution<Vertex>>> {
        if let Some(d) = lookup(&self.tables[pursuer], &own, self.view.view(prefix), t) {
            return Ok(Cow::Borrowed(d));
        }
        let moves = config.moves(own);
        match self.fallback {
            Some(Fallback::FirstMove) => Ok(Cow::Owned(Distribution::pure(moves[0]))),
            Some(Fallback::Uniform) => Ok(Cow::Owned(Distribution::uniform(moves))),
            None => Err(Error::PolicyIncompatible(format!(
                "pursuer {pursuer} has no rule at vertex {own}, t={t}"
            ))),
        }
    }

    pub fn validate(&self, config: &GameConfig) -> Result<()> {
        check_view(self.view, config)?;
        if self.tables.len() != config.pursuer_count() {
            return Err(Error::PolicyIncompatible(format!(
                "{} tables for {} pursuers",
                self.tables.len(),
                config.pursuer_count()
            )));
        }
        for table in &self.tables {
            for (key, dist) in table {
                config.graph.check_vertex(key.own)?;
                check_key_view(&key.evader, self.view, config)?;
                dist.check_sum()?;
                let legal = config.moves(key.own);
                if let Some((m, _)) = dist.0.iter().find(|(m, _)| !legal.contains(m)) {
                    return Err(Error::PolicyIncompatible(format!(
                        "move {}->{m} is not legal",
                        key.own
                    )));
                }
            }
        }
        Ok(())
    }
}

impl JointPolicy {
    pub fn new(view: ViewKind) -> Self {
        JointPolicy {
            view,
            table: BTreeMap::new(),
            fallback: None,
        }
    }

    pub fn insert(
        &mut self,
        own: Vec<Vertex>,
        evader: EvaderView,
        t: Option<usize>,
        dist: Distribution<Vec<Vertex>>,
    ) {
        self.table.insert(ObsKey { own, evader, t }, dist);
    }

    pub fn distribution(
        &self,
        config: &GameConfig,
        own: &[Vertex],
        prefix: &[Vertex],
        t: usize,
    ) -> Result<Cow<'_, Distribution<Vec<Vertex>>>> {
        let own_vec = own.to_vec();
        if let Some(d) = lookup(&self.table, &own_vec, self.view.view(prefix), t) {
            return Ok(Cow::Borrowed(d));
        }
        match self.fallback {
            Some(Fallback::FirstMove) => Ok(Cow::Owned(Distribution::pure(
                own.iter().map(|&v| config.moves(v)[0]).collect(),
            ))),
            Some(Fallback::Uniform) => {
                let joint = crate::dynamics::cartesian_moves(config, own);
                let p = 1.0 / joint.len() as f64;
                Ok(Cow::Owned(Distribution(
                    joint.into_iter().map(|m| (m, p)).collect(),
                )))
            }
            None => Err(Error::PolicyIncompatible(format!(
                "no joint rule at {own:?}, t={t}"
            ))),
        }
    }

    pub fn validate(&self, config: &GameConfig) -> Result<()> {
        check_view(self.view, config)?;
        let n = config.pursuer_count();
        for (key, dist) in &self.table {
            if key.own.len() != n {
                return Err(Error::PolicyIncompatible(format!(
                    "key {:?} has {} positions for {n} pursuers",
                    key.own,
                    key.own.len()
                )));
            }
            key.own
                .iter()
                .try_for_each(|&v| config.graph.check_vertex(v))?;
            check_key_view(&key.evader, self.view, config)?;
            dist.check_sum()?;
            for (m, _) in &dist.0 {
                let ok = m.len() == n
                    && m
                        .iter()
                        .zip(&key.own)
                        .all(|(&to, &from)| config.moves(from).contains(&to));
                if !ok {
                    return Err(Error::PolicyIncompatible(format!(
                        "joint move {:?}->{m:?} is not legal",
                        key.own
                    )));
                }
            }
        }
        Ok(())
    }
}

impl PursuerPolicy {
    pub fn validate(&self, config: &GameConfig) -> Result<()> {
        match self {
            PursuerPolicy::Independent(p) => p.validate(config),
            PursuerPolicy::Joint(p) => p.validate(config),
        }
    }

    pub fn view(&self) -> ViewKind {
        match self {
            PursuerPolicy::Independent(p) => p.view,
            PursuerPolicy::Joint(p) => p.view,
        }
    }

    /// Samples a joint move.
    pub fn sample<R: rand::Rng + ?Sized>(
        &self,
        config: &GameConfig,
        own: &[Vertex],
        prefix: &[Vertex],
        t: usize,
        rng: &mut R,
    ) -> Result<Vec<Vertex>> {
        match self {
            PursuerPolicy::Independent(p) => own
                .iter()
                .enumerate()
                .map(|(i, &v)| Ok(sample_from(&*p.distribution(config, i, v, prefix, t)?, rng)))
                .collect(),
            PursuerPolicy::Joint(p) => Ok(sample_from(&*p.distribution(config, own, prefix, t)?, rng)),
        }
    }
}

fn sample_from<A: Clone, R: rand::Rng + ?Sized>(dist: &Distribution<A>, rng: &mut R) -> A {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (a, p) in &dist.0 {
        acc += p;
        if u < acc {
            return a.clone();
        }
    }
    // rounding left u above the cumulative total
    dist.0
        .iter()
        .rev()
        .find(|(_, p)| *p > 0.0)
        .map(|(a, _)| a.clone())
        .expect("distribution has positive mass")
}
