//! Exact best responses for the double-oracle loop.
//!
//! The evader oracle scans a path set for the cheapest route against a
//! pursuer mixture. The pursuer oracle runs backward induction over
//! (joint pursuer positions, evader prefix) where prefixes come from a
//! weighted prefix tree of the evader's mixture; a path mixture is not
//! Markov in the evader's position, but it is in the observed prefix.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::dynamics::{cartesian_moves, GameConfig, Status};
use crate::error::{Error, Result};
use crate::evaluation::{
    catch_probability_trusted, Distribution, EvaderView, Fallback, JointPolicy, PursuerPolicy,
    ViewKind, DEFAULT_STATE_BOUND,
};
use crate::graph::Vertex;
use crate::paths::{EvaderPath, PathSet};

const WEIGHT_TOLERANCE: f64 = 1e-9;
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategy<T> {
    support: Vec<T>,
    weights: Vec<f64>,
}

impl<T> MixedStrategy<T> {
    pub fn new(support: Vec<T>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptyMixture);
        }
        if support.len() != weights.len() {
            return Err(Error::WeightMismatch(format!(
                "{} strategies, {} weights",
                support.len(),
                weights.len()
            )));
        }
        check_weights(&weights)?;
        Ok(MixedStrategy { support, weights })
    }

    pub fn pure(s: T) -> Self {
        MixedStrategy {
            support: vec![s],
            weights: vec![1.0],
        }
    }

    pub fn uniform(support: Vec<T>) -> Result<Self> {
        let w = 1.0 / support.len() as f64;
        let weights = vec![w; support.len()];
        Self::new(support, weights)
    }

    pub fn support(&self) -> &[T] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, f64)> {
        self.support.iter().zip(self.weights.iter().copied())
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::WeightMismatch("negative or non-finite weight".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::WeightMismatch(format!("weights sum to {total}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrefixNode {
    pub vertex: Vertex,
    pub depth: usize,
    pub weight: f64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// The prefix is itself one of the paths.
    pub terminal: bool,
}

/// Merged prefixes of a weighted path set. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixTree {
    nodes: Vec<PrefixNode>,
}

impl PrefixTree {
    pub fn nodes(&self) -> &[PrefixNode] {
        &self.nodes
    }

    pub fn root(&self) -> &PrefixNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &PrefixNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Vertex sequence from the root to `id`.
    pub fn prefix(&self, id: usize) -> Vec<Vertex> {
        let mut out = Vec::with_capacity(self.nodes[id].depth + 1);
        let mut cur = Some(id);
        while let Some(i) = cur {
            out.push(self.nodes[i].vertex);
            cur = self.nodes[i].parent;
        }
        out.reverse();
        out
    }
}

/// Zero-weight paths are dropped; children are ordered by vertex id.
pub fn build_prefix_tree(paths: &[EvaderPath], weights: &[f64]) -> Result<PrefixTree> {
    if paths.len() != weights.len() {
        return Err(Error::WeightMismatch(format!(
            "{} paths, {} weights",
            paths.len(),
            weights.len()
        )));
    }
    check_weights(weights)?;
    let mut live = paths.iter().zip(weights).filter(|(_, &w)| w > 0.0);
    let (first, _) = live.clone().next().ok_or(Error::EmptyPathSet)?;
    if first.is_empty() {
        return Err(Error::InvalidPath("empty path".into()));
    }
    let root_vertex = first.start();

    let mut nodes = vec![PrefixNode {
        vertex: root_vertex,
        depth: 0,
        weight: 0.0,
        parent: None,
        children: Vec::new(),
        terminal: false,
    }];
    let mut index: Vec<BTreeMap<Vertex, usize>> = vec![BTreeMap::new()];
    for (path, &w) in live.by_ref() {
        let v = path.vertices();
        if v.is_empty() || v[0] != root_vertex {
            return Err(Error::InvalidPath(format!(
                "path {path} does not start at {root_vertex}"
            )));
        }
        let mut cur = 0;
        nodes[0].weight += w;
        for (depth, &x) in v.iter().enumerate().skip(1) {
            let next = match index[cur].get(&x) {
                Some(&id) => id,
                None => {
                    let id = nodes.len();
                    nodes.push(PrefixNode {
                        vertex: x,
                        depth,
                        weight: 0.0,
                        parent: Some(cur),
                        children: Vec::new(),
                        terminal: false,
                    });
                    index.push(BTreeMap::new());
                    index[cur].insert(x, id);
                    id
                }
            };
            nodes[next].weight += w;
            cur = next;
        }
        nodes[cur].terminal = true;
    }
    for (node, idx) in nodes.iter_mut().zip(&index) {
        node.children = idx.values().copied().collect();
    }
    Ok(PrefixTree { nodes })
}

/// Path in `paths` minimising the mixture's expected catch probability;
/// ties go to the lexicographically smallest path.
pub fn evader_best_response(
    pursuer_mixture: &MixedStrategy<PursuerPolicy>,
    paths: &PathSet,
    config: &GameConfig,
) -> Result<(EvaderPath, f64)> {
    if paths.is_empty() {
        return Err(Error::EmptyPathSet);
    }
    for policy in pursuer_mixture.support() {
        policy.validate(config)?;
    }
    let values: Vec<f64> = paths
        .paths()
        .par_iter()
        .map(|path| {
            pursuer_mixture
                .iter()
                .filter(|(_, w)| *w > 0.0)
                .map(|(policy, w)| {
                    catch_probability_trusted(policy, path, config, DEFAULT_STATE_BOUND)
                        .map(|v| w * v)
                })
                .sum::<Result<f64>>()
        })
        .collect::<Result<_>>()?;
    let best = argmin_first(&values);
    Ok((paths.paths()[best].clone(), values[best]))
}

pub(crate) fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponseOptions {
    /// Cap on memoised (node, pursuer tuple) states.
    pub state_bound: usize,
}

impl Default for BestResponseOptions {
    fn default() -> Self {
        BestResponseOptions {
            state_bound: DEFAULT_STATE_BOUND,
        }
    }
}

/// Exact pursuer best response to a mixture of evader paths, for info cases
/// in which the pursuer observes the evader. Returns a deterministic joint
/// policy keyed on (pursuer tuple, evader history, t) and its value.
pub fn pursuer_best_response(
    evader_mixture: &MixedStrategy<EvaderPath>,
    config: &GameConfig,
    opts: BestResponseOptions,
) -> Result<(PursuerPolicy, f64)> {
    if !config.info_case.pursuer_sees_evader() {
        return Err(Error::InfoCaseUnsupported(format!(
            "exact pursuer best response needs the pursuer to observe the evader (info case {})",
            config.info_case
        )));
    }
    config.validate()?;
    for path in evader_mixture.support() {
        path.validate(config)?;
    }
    let tree = build_prefix_tree(evader_mixture.support(), evader_mixture.weights())?;
    let mut induction = Induction {
        config,
        tree: &tree,
        memo: HashMap::new(),
        bound: opts.state_bound,
    };
    let starts = config.pursuer_starts.clone();
    let value = induction.value(0, &starts)?;

    let mut policy = JointPolicy::new(ViewKind::History);
    policy.fallback = Some(Fallback::FirstMove);
    induction.extract(0, starts, &mut policy);
    Ok((PursuerPolicy::Joint(policy), value))
}

struct Induction<'a> {
    config: &'a GameConfig,
    tree: &'a PrefixTree,
    /// (node, pursuer tuple) -> (value, chosen joint move if ongoing)
    memo: HashMap<(usize, Vec<Vertex>), (f64, Option<Vec<Vertex>>)>,
    bound: usize,
}

impl Induction<'_> {
    fn value(&mut self, node_id: usize, locs: &[Vertex]) -> Result<f64> {
        let key = (node_id, locs.to_vec());
        if let Some((v, _)) = self.memo.get(&key) {
            return Ok(*v);
        }
        let node = self.tree.node(node_id);
        let status = self.config.classify(locs, node.vertex, node.depth);
        let entry = if let Some(payoff) = status.pursuer_payoff() {
            (payoff, None)
        } else if node.children.is_empty() {
            // a path ended off-exit; only reachable for malformed input
            debug_assert!(status == Status::Ongoing);
            (0.0, None)
        } else {
            let weight = node.weight;
            let children = node.children.clone();
            let mut best: Option<(f64, Vec<Vertex>)> = None;
            for joint in cartesian_moves(self.config, locs) {
                let mut v = 0.0;
                for &c in &children {
                    let share = self.tree.node(c).weight / weight;
                    v += share * self.value(c, &joint)?;
                }
                if best.as_ref().map_or(true, |(b, _)| v > b + TIE_TOLERANCE) {
                    best = Some((v, joint));
                }
                if best.as_ref().is_some_and(|(b, _)| *b >= 1.0 - TIE_TOLERANCE) {
                    break;
                }
            }
            let (v, m) = best.expect("at least one joint move");
            (v.min(1.0), Some(m))
        };
        if self.memo.len() >= self.bound {
            return Err(Error::StateSpaceTooLarge {
                states: self.memo.len() + 1,
                bound: self.bound,
            });
        }
        let v = entry.0;
        self.memo.insert(key, entry);
        Ok(v)
    }

    fn extract(&self, node_id: usize, locs: Vec<Vertex>, policy: &mut JointPolicy) {
        let Some((_, Some(joint))) = self.memo.get(&(node_id, locs.clone())) else {
            return;
        };
        let joint = joint.clone();
        let node = self.tree.node(node_id);
        policy.insert(
            locs,
            EvaderView::History(self.tree.prefix(node_id)),
            Some(node.depth),
            Distribution::pure(joint.clone()),
        );
        for &c in &node.children {
            self.extract(c, joint.clone(), policy);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::InfoCase;
    use crate::evaluation::{catch_probability_exact, IndependentPolicy};
    use crate::graph::Graph;
    use crate::paths::PathMode;

    fn p(v: &[Vertex]) -> EvaderPath {
        EvaderPath(v.to_vec())
    }

    /// Ring 0..8 with exits 2 and 6, evader at 0, pursuer at 4.
    fn ring8() -> GameConfig {
        let n = 8;
        let adj = (0..n).map(|v| vec![(v + n - 1) % n, (v + 1) % n]).collect();
        let g = Graph::from_adjacency(adj, false)
            .unwrap()
            .with_exits([2, 6])
            .unwrap();
        GameConfig::new(g, vec![4], 0, 2, InfoCase::PursuerSeesEvader)
    }

    #[test]
    fn prefix_tree_shapes() {
        let t = build_prefix_tree(&[p(&[0, 1, 2])], &[1.0]).unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.node(2).terminal);

        let t = build_prefix_tree(&[p(&[0, 1, 2, 3]), p(&[0, 1, 2, 4])], &[0.5, 0.5]).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.node(2).children.len(), 2);
        assert_eq!(t.prefix(4), vec![0, 1, 2, 4]);

        let t = build_prefix_tree(&[p(&[0, 1]), p(&[0, 1])], &[0.25, 0.75]).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.node(1).weight, 1.0);

        assert!(matches!(
            build_prefix_tree(&[p(&[0, 1])], &[0.5]),
            Err(Error::WeightMismatch(_))
        ));
        assert!(matches!(
            build_prefix_tree(&[p(&[0, 1])], &[1.0, 0.0]),
            Err(Error::WeightMismatch(_))
        ));
    }

    #[test]
    fn waiting_pursuer_captures_single_path() {
        let g = Graph::from_adjacency(vec![vec![1], vec![0, 2], vec![1]], false)
            .unwrap()
            .with_exits([2])
            .unwrap();
        let c = GameConfig::new(g, vec![1], 0, 2, InfoCase::PursuerSeesEvader);
        let (_, v) = pursuer_best_response(
            &MixedStrategy::pure(p(&[0, 1, 2])),
            &c,
            BestResponseOptions::default(),
        )
        .unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn unreachable_paths_give_zero() {
        let g = Graph::from_adjacency(vec![vec![1], vec![0], vec![]], false)
            .unwrap()
            .with_exits([1])
            .unwrap();
        let c = GameConfig::new(g, vec![2], 0, 3, InfoCase::BothSee);
        let (_, v) = pursuer_best_response(
            &MixedStrategy::pure(p(&[0, 1])),
            &c,
            BestResponseOptions::default(),
        )
        .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn diverging_mixture_gives_half() {
        let c = ring8();
        let mix = MixedStrategy::uniform(vec![p(&[0, 1, 2]), p(&[0, 7, 6])]).unwrap();
        let (policy, v) = pursuer_best_response(&mix, &c, BestResponseOptions::default()).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let forward: f64 = mix
            .iter()
            .map(|(path, w)| w * catch_probability_exact(&policy, path, &c).unwrap())
            .sum();
        assert!((forward - v).abs() < 1e-10);
    }

    #[test]
    fn blind_pursuer_is_unsupported() {
        let mut c = ring8();
        c.info_case = InfoCase::NeitherSees;
        assert!(matches!(
            pursuer_best_response(
                &MixedStrategy::pure(p(&[0, 1, 2])),
                &c,
                BestResponseOptions::default()
            ),
            Err(Error::InfoCaseUnsupported(_))
        ));
    }

    #[test]
    fn state_bound_enforced() {
        let c = ring8();
        let mix = MixedStrategy::uniform(vec![p(&[0, 1, 2]), p(&[0, 7, 6])]).unwrap();
        assert!(matches!(
            pursuer_best_response(&mix, &c, BestResponseOptions { state_bound: 2 }),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    /// Walks from 4 toward `exit` along the ring and parks there.
    fn cover(c: &GameConfig, via: Vertex, exit: Vertex) -> PursuerPolicy {
        let mut policy = IndependentPolicy::stationary(c);
        policy.insert(0, 4, EvaderView::Hidden, Some(0), Distribution::pure(via));
        policy.insert(0, via, EvaderView::Hidden, Some(1), Distribution::pure(exit));
        PursuerPolicy::Independent(policy)
    }

    #[test]
    fn evader_response_to_split_cover() {
        let mut c = ring8();
        c.info_case = InfoCase::NeitherSees;
        let paths = PathSet::from_paths(vec![p(&[0, 1, 2]), p(&[0, 7, 6])], PathMode::Simple, 2);
        let left = cover(&c, 3, 2);
        let right = cover(&c, 5, 6);

        // per-pair values by hand: each cover catches exactly its own exit
        assert_eq!(catch_probability_exact(&left, &paths.paths()[0], &c), Ok(1.0));
        assert_eq!(catch_probability_exact(&left, &paths.paths()[1], &c), Ok(0.0));
        assert_eq!(catch_probability_exact(&right, &paths.paths()[0], &c), Ok(0.0));
        assert_eq!(catch_probability_exact(&right, &paths.paths()[1], &c), Ok(1.0));

        let mix = MixedStrategy::uniform(vec![left.clone(), right]).unwrap();
        let (path, v) = evader_best_response(&mix, &paths, &c).unwrap();
        assert_eq!((path, v), (p(&[0, 1, 2]), 0.5));

        let (path, v) = evader_best_response(&MixedStrategy::pure(left), &paths, &c).unwrap();
        assert_eq!((path, v), (p(&[0, 7, 6]), 0.0));

        let idle = PursuerPolicy::Independent(IndependentPolicy::stationary(&c));
        let (path, v) = evader_best_response(&MixedStrategy::pure(idle), &paths, &c).unwrap();
        assert_eq!((path, v), (p(&[0, 1, 2]), 0.0));
    }

    #[test]
    fn mixture_validation() {
        assert!(matches!(
            MixedStrategy::<u8>::new(vec![], vec![]),
            Err(Error::EmptyMixture)
        ));
        assert!(MixedStrategy::new(vec![1, 2], vec![0.3, 0.3]).is_err());
        assert!(MixedStrategy::new(vec![1, 2], vec![0.3, 0.7]).is_ok());
    }
}
