//! Ground-truth comparators: Dijkstra on the failure-reduced graph, explicit
//! walk enumeration in the evaporating chain and shortest-path flow counting.
//!
//! Nothing here touches a matrix inverse, so these results can be used to
//! check the Markov-chain machinery independently.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaporation::EvaporatedChain;
use crate::graph::{Graph, TransitionMatrix};

/// Walks whose probability drops below this are pruned during enumeration.
pub const PRUNE_MASS: f64 = 1e-18;

/// Enumeration stops storing walks after this many and reports truncation.
pub const WALK_BUDGET: usize = 2_000_000;

/// Exact shortest distances toward a target, with a deterministic tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShortestTree {
    pub target: usize,
    /// Distance in graph units (see [`Graph::scale`]); `None` if unreachable
    /// or failed.
    pub distance_units: Vec<Option<u64>>,
    /// Next hop toward the target, smallest node id among optimal choices.
    pub successor: Vec<Option<usize>>,
}

impl ShortestTree {
    pub fn distance(&self, g: &Graph, i: usize) -> Option<f64> {
        self.distance_units[i].map(|u| g.units_to_weight(u))
    }
}

/// Dijkstra toward `t` after deleting `failures` and their incident edges.
pub fn dijkstra_reduced(g: &Graph, t: usize, failures: &[usize]) -> Result<ShortestTree> {
    let n = g.n();
    if t >= n {
        return Err(Error::NodeOutOfRange { node: t, n });
    }
    let mut failed = vec![false; n];
    for &f in failures {
        if f >= n {
            return Err(Error::NodeOutOfRange { node: f, n });
        }
        if f == t {
            return Err(Error::TargetInFailures { target: t });
        }
        failed[f] = true;
    }

    let mut incoming: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
    for (k, e) in g.edges().iter().enumerate() {
        if !failed[e.src] && !failed[e.dst] {
            incoming[e.dst].push((e.src, g.edge_units(k)));
        }
    }

    let mut dist: Vec<Option<u64>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[t] = Some(0);
    heap.push(Reverse((0u64, t)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if dist[v] != Some(d) {
            continue;
        }
        for &(u, w) in &incoming[v] {
            let nd = d + w;
            if dist[u].is_none_or(|cur| nd < cur) {
                dist[u] = Some(nd);
                heap.push(Reverse((nd, u)));
            }
        }
    }

    let successor = (0..n)
        .map(|i| {
            if i == t || failed[i] {
                return None;
            }
            let di = dist[i]?;
            g.out_range(i).find_map(|k| {
                let e = g.edges()[k];
                let dj = dist[e.dst]?;
                (!failed[e.dst] && dj + g.edge_units(k) == di).then_some(e.dst)
            })
        })
        .collect();
    Ok(ShortestTree { target: t, distance_units: dist, successor })
}

/// One enumerated walk from `s` that stops on its first visit to `t`.
#[derive(Clone, Debug, Serialize)]
pub struct Walk {
    pub nodes: Vec<usize>,
    /// Total weight in graph units.
    pub cost_units: u64,
    /// Product of the unevaporated transition probabilities.
    pub probability: f64,
    /// Product of the evaporated transition probabilities.
    pub mass: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PathSet {
    pub source: usize,
    pub target: usize,
    pub alpha: f64,
    pub max_len: usize,
    pub walks: Vec<Walk>,
    /// Evaporated mass that was still travelling when enumeration stopped
    /// (length cap, pruning or walk budget). Bounds the mass of missing walks.
    pub residual: f64,
    pub truncated: bool,
    scale: u64,
}

/// Walks of equal cost grouped together.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LengthClass {
    pub cost: f64,
    pub probability: f64,
    pub mass: f64,
}

impl PathSet {
    /// Probability of reaching the target without evaporating.
    pub fn reach_probability(&self) -> f64 {
        self.walks.iter().map(|w| w.mass).sum()
    }

    /// Expected cost conditioned on reaching the target, or `None` if no walk
    /// was found.
    pub fn hitting_cost(&self) -> Option<f64> {
        let mass = self.reach_probability();
        if mass <= 0.0 {
            return None;
        }
        let weighted: f64 = self.walks.iter().map(|w| w.mass * self.cost(w)).sum();
        Some(weighted / mass)
    }

    /// Expected number of steps conditioned on reaching the target.
    pub fn hitting_time(&self) -> Option<f64> {
        let mass = self.reach_probability();
        (mass > 0.0).then(|| self.walks.iter().map(|w| w.mass * (w.nodes.len() - 1) as f64).sum::<f64>() / mass)
    }

    fn cost(&self, w: &Walk) -> f64 {
        w.cost_units as f64 / self.scale as f64
    }

    /// Walk mass aggregated by walk cost, cheapest first.
    pub fn length_classes(&self) -> Vec<LengthClass> {
        let mut by_cost: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        for w in &self.walks {
            let entry = by_cost.entry(w.cost_units).or_default();
            entry.0 += w.probability;
            entry.1 += w.mass;
        }
        by_cost
            .into_iter()
            .map(|(c, (probability, mass))| LengthClass { cost: c as f64 / self.scale as f64, probability, mass })
            .collect()
    }

    /// Hitting cost rebuilt from the length classes as
    /// `sum_l l Pr_l alpha^l / sum_l Pr_l alpha^l`.
    ///
    /// Only meaningful for the degree-weighted or uniform chains built by
    /// [`crate::evaporation::evaporate`], where a walk's evaporated mass is its
    /// probability times `alpha^cost`.
    pub fn decomposed_cost(&self) -> Option<f64> {
        let classes = self.length_classes();
        let (num, den) = classes.iter().fold((0.0, 0.0), |(num, den), c| {
            let damp = self.alpha.powf(c.cost);
            (num + c.cost * c.probability * damp, den + c.probability * damp)
        });
        (den > 0.0).then(|| num / den)
    }
}

/// Depth-first enumeration of walks from `s` that end at their first visit to
/// `t`, up to `max_len` steps.
pub fn enumerate_walks(
    g: &Graph,
    p: &TransitionMatrix,
    chain: &EvaporatedChain<f64>,
    s: usize,
    t: usize,
    max_len: usize,
) -> PathSet {
    let mut set = PathSet {
        source: s,
        target: t,
        alpha: chain.alpha(),
        max_len,
        walks: Vec::new(),
        residual: 0.0,
        truncated: false,
        scale: g.scale(),
    };
    if s == t {
        set.walks.push(Walk { nodes: vec![s], cost_units: 0, probability: 1.0, mass: 1.0 });
        return set;
    }
    let mut path = vec![s];
    walk_dfs(g, p, chain, t, &mut path, 0, 1.0, 1.0, &mut set);
    set
}

#[allow(clippy::too_many_arguments)]
fn walk_dfs(
    g: &Graph,
    p: &TransitionMatrix,
    chain: &EvaporatedChain<f64>,
    t: usize,
    path: &mut Vec<usize>,
    cost: u64,
    prob: f64,
    mass: f64,
    set: &mut PathSet,
) {
    let cur = *path.last().expect("walk is never empty");
    if path.len() > set.max_len {
        set.residual += mass;
        set.truncated = true;
        return;
    }
    for k in g.out_range(cur) {
        let e = g.edges()[k];
        let m = mass * chain.edge(k);
        let pr = prob * p.edge(k);
        let c = cost + g.edge_units(k);
        if e.dst == t {
            if set.walks.len() >= WALK_BUDGET {
                set.residual += m;
                set.truncated = true;
                continue;
            }
            let mut nodes = path.clone();
            nodes.push(t);
            set.walks.push(Walk { nodes, cost_units: c, probability: pr, mass: m });
        } else if m < PRUNE_MASS {
            if m > 0.0 {
                set.residual += m;
                set.truncated = true;
            }
        } else {
            path.push(e.dst);
            walk_dfs(g, p, chain, t, path, c, pr, m, set);
            path.pop();
        }
    }
}

/// For every node `m`, the probability-weighted fraction of shortest `s -> t`
/// paths passing through `m`, weighting each path by the product of its
/// transition probabilities. Returns `None` if `t` is unreachable from `s`.
///
/// Shortest paths are simple because weights are positive, so path weights
/// factor over the shortest-path DAG: the fraction through `m` is
/// `fwd(m) * bwd(m) / bwd(s)` with `fwd`/`bwd` the DAG path sums from `s` and
/// to `t`.
pub fn shortest_path_flows(g: &Graph, p: &TransitionMatrix, s: usize, t: usize) -> Option<Vec<f64>> {
    let to_t = dijkstra_reduced(g, t, &[]).ok()?;
    let ds = to_t.distance_units[s]?;
    let n = g.n();
    let on_dag = |k: usize| {
        let e = g.edges()[k];
        matches!((to_t.distance_units[e.src], to_t.distance_units[e.dst]),
            (Some(a), Some(b)) if b + g.edge_units(k) == a)
    };

    // Nodes sorted by decreasing distance to t form a topological order of
    // the DAG restricted to nodes at distance <= d(s).
    let mut order: Vec<usize> = (0..n).filter(|&v| to_t.distance_units[v].is_some_and(|d| d <= ds)).collect();
    order.sort_by_key(|&v| Reverse(to_t.distance_units[v]));

    let mut bwd = vec![0.0; n];
    bwd[t] = 1.0;
    for &v in order.iter().rev() {
        if v == t {
            continue;
        }
        bwd[v] = g.out_range(v).filter(|&k| on_dag(k)).map(|k| p.edge(k) * bwd[g.edges()[k].dst]).sum();
    }
    let mut fwd = vec![0.0; n];
    fwd[s] = 1.0;
    for &v in &order {
        if v == t || fwd[v] == 0.0 {
            continue;
        }
        for k in g.out_range(v).filter(|&k| on_dag(k)) {
            fwd[g.edges()[k].dst] += fwd[v] * p.edge(k);
        }
    }
    let total = bwd[s];
    (total > 0.0).then(|| (0..n).map(|m| fwd[m] * bwd[m] / total).collect())
}
