//! Oracle-versus-Dijkstra verification over seeded random instances.

use serde::Serialize;

use crate::error::Result;
use crate::evaporation::error_upper_bound;
use crate::generate::{failure_set, instance_rng, random_graph, GraphSpec};
use crate::graph::{Graph, TransitionPolicy};
use crate::oracle::{self, BuildOptions, NodeStatus, Oracle, Query, QueryOptions, ReplacementResult};
use crate::reference::dijkstra_reduced;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// Multiprecision when the `mp` feature is enabled.
    #[default]
    Mp,
    F64,
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mp" => Ok(Precision::Mp),
            "f64" => Ok(Precision::F64),
            _ => Err(format!("unknown precision {s:?} (expected mp or f64)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    pub instances: usize,
    pub spec: GraphSpec,
    /// Failure-set sizes queried for every target; capped at `n - 2` so one
    /// node besides the target survives.
    pub failure_sizes: Vec<usize>,
    pub precision: Precision,
    pub policy: TransitionPolicy,
    /// Use the exact diameter instead of `(n - 1) w_max` in the alpha bound.
    pub exact_diameter: bool,
    /// Zero one entry of `F°` in the first instance.
    pub perturb: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 42,
            instances: 300,
            spec: GraphSpec::default(),
            failure_sizes: vec![0, 1, 2, 5, usize::MAX],
            precision: Precision::Mp,
            policy: TransitionPolicy::DegreeWeighted,
            exact_diameter: true,
            perturb: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Mismatch {
    pub instance: usize,
    pub target: usize,
    pub failures: Vec<usize>,
    pub node: usize,
    pub expected: Option<f64>,
    pub reported: Option<f64>,
    pub reason: String,
}

/// `U - L` checks for the unfailed queries of one instance.
#[derive(Clone, Debug, Default, Serialize)]
pub struct EpsilonStats {
    pub checked: usize,
    pub min: f64,
    /// Largest `epsilon / (delta / d_max)`.
    pub max_ratio: f64,
    /// Largest `epsilon / error_upper_bound`.
    pub max_bound_ratio: f64,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InstanceOutcome {
    pub index: usize,
    pub n: usize,
    pub edges: usize,
    pub alpha: f64,
    pub queries: usize,
    pub checked_nodes: usize,
    pub mismatches: Vec<Mismatch>,
    pub epsilon: EpsilonStats,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub instances: Vec<InstanceOutcome>,
}

impl VerifyReport {
    pub fn mismatch_count(&self) -> usize {
        self.instances.iter().map(|i| i.mismatches.len()).sum()
    }

    pub fn query_count(&self) -> usize {
        self.instances.iter().map(|i| i.queries).sum()
    }

    pub fn checked_nodes(&self) -> usize {
        self.instances.iter().map(|i| i.checked_nodes).sum()
    }
}

/// Follows successors from `i`; returns the path length in graph units if
/// it reaches `t` within `n` steps without touching a failure.
fn walk_tree(g: &Graph, r: &ReplacementResult, failed: &[bool], i: usize) -> std::result::Result<u64, String> {
    let (t, mut cur, mut total) = (r.target, i, 0u64);
    for _ in 0..g.n() {
        if cur == t {
            return Ok(total);
        }
        let next = r.nodes[cur].successor.ok_or_else(|| format!("chain stops at {cur}"))?;
        if failed[next] {
            return Err(format!("chain visits failed node {next}"));
        }
        let k = g.edge_index(cur, next).ok_or_else(|| format!("{cur} -> {next} is not an edge"))?;
        total += g.edge_units(k);
        cur = next;
    }
    if cur == t {
        Ok(total)
    } else {
        Err("chain does not reach the target".into())
    }
}

/// Compares one query result against Dijkstra on the reduced graph.
pub fn check_result(g: &Graph, r: &ReplacementResult, instance: usize) -> Result<Vec<Mismatch>> {
    let t = r.target;
    let exact = dijkstra_reduced(g, t, &r.failures)?;
    let mut failed = vec![false; g.n()];
    for &f in &r.failures {
        failed[f] = true;
    }
    let mut out = Vec::new();
    for node in &r.nodes {
        let i = node.id;
        let expected = exact.distance(g, i);
        let mismatch = |reason: String| Mismatch {
            instance,
            target: t,
            failures: r.failures.clone(),
            node: i,
            expected,
            reported: node.distance,
            reason,
        };
        if failed[i] {
            if node.status != NodeStatus::FailedNode {
                out.push(mismatch("failed node not reported as failed".into()));
            }
            continue;
        }
        match (expected, node.status) {
            (None, NodeStatus::Unreachable) => {}
            (None, _) => out.push(mismatch("reported reachable".into())),
            (Some(_), NodeStatus::Ok) => {
                if node.distance != expected {
                    out.push(mismatch("distance differs".into()));
                    continue;
                }
                match walk_tree(g, r, &failed, i) {
                    Ok(units) if Some(units) == exact.distance_units[i] => {}
                    Ok(units) => out.push(mismatch(format!("tree path has length {}", g.units_to_weight(units)))),
                    Err(why) => out.push(mismatch(why)),
                }
            }
            (Some(_), status) => out.push(mismatch(format!("reported {status:?}"))),
        }
    }
    Ok(out)
}

fn build_and_check<T: Scalar>(g: &Graph, oracle: &mut Oracle<T>, cfg: &VerifyConfig, index: usize, rng: &mut impl rand::Rng) -> Result<InstanceOutcome> {
    let n = g.n();
    if cfg.perturb && index == 0 {
        perturb(g, oracle);
    }
    let delta = g.delta();
    let d_max = g.d_max().max(1);
    let l_max = g.diameter_bound();
    let window = delta / d_max as f64;
    let bound = if oracle.alpha() < 1.0 { error_upper_bound(oracle.alpha(), delta, d_max, l_max).ok() } else { None };
    let noise = T::epsilon(oracle.fundamental().get(0, 0).ctx()) * NOISE_FACTOR;

    let mut outcome = InstanceOutcome {
        index,
        n,
        edges: g.edge_count(),
        alpha: oracle.alpha(),
        queries: 0,
        checked_nodes: 0,
        mismatches: Vec::new(),
        epsilon: EpsilonStats { min: f64::INFINITY, ..Default::default() },
    };
    for t in 0..n {
        for &size in &cfg.failure_sizes {
            let failures = failure_set(rng, n, t, size.min(n.saturating_sub(2)));
            let unfailed = failures.is_empty();
            let opts = QueryOptions { raw_cost: unfailed };
            let r = oracle.query_with(&Query::new(t, failures), &opts)?;
            outcome.queries += 1;
            outcome.checked_nodes += n - r.failures.len();
            outcome.mismatches.extend(check_result(g, &r, index)?);
            if unfailed {
                record_epsilon(&mut outcome.epsilon, &r, window, bound, noise);
            }
        }
    }
    Ok(outcome)
}

/// Relative rounding noise tolerated below zero, in units of the working
/// epsilon.
const NOISE_FACTOR: f64 = (1u64 << 40) as f64;

fn record_epsilon(stats: &mut EpsilonStats, r: &ReplacementResult, window: f64, bound: Option<f64>, noise: f64) {
    for node in r.nodes.iter().filter(|n| n.status == NodeStatus::Ok && n.id != r.target) {
        let Some(eps) = node.cost_residual else { continue };
        let slack = noise * node.distance.unwrap_or(0.0).max(1.0);
        stats.checked += 1;
        stats.min = stats.min.min(eps);
        stats.max_ratio = stats.max_ratio.max(eps / window);
        if let Some(b) = bound {
            if b > 0.0 {
                stats.max_bound_ratio = stats.max_bound_ratio.max(eps / b);
            }
            if eps > b * (1.0 + 1e-12) + slack {
                stats.violations.push(format!("t={} s={}: epsilon {eps:e} exceeds bound {b:e}", r.target, node.id));
            }
        }
        if !(eps >= -slack && eps < window) {
            stats.violations.push(format!("t={} s={}: epsilon {eps:e} outside [0, {window})", r.target, node.id));
        }
    }
}

/// Zeroes `F°_{i,t}` for the first pair with a finite distance.
fn perturb<T: Scalar>(g: &Graph, oracle: &mut Oracle<T>) {
    for t in 0..g.n() {
        let tree = dijkstra_reduced(g, t, &[]).expect("no failures");
        if let Some(i) = (0..g.n()).find(|&i| i != t && tree.distance_units[i].is_some()) {
            let ctx = oracle.fundamental().get(i, t).ctx();
            oracle.set_fundamental_entry(i, t, T::zero(ctx));
            return;
        }
    }
}

/// Generates and checks instance `index`.
pub fn verify_instance(cfg: &VerifyConfig, index: usize) -> Result<InstanceOutcome> {
    let mut rng = instance_rng(cfg.seed, index as u64);
    let mut g = random_graph(&mut rng, &cfg.spec);
    if cfg.exact_diameter {
        g = g.with_exact_diameter();
    }
    let opts = BuildOptions { policy: cfg.policy, ..Default::default() };
    match cfg.precision {
        #[cfg(feature = "mp")]
        Precision::Mp => {
            let mut o = oracle::preprocess_mp(&g, &opts)?;
            build_and_check(&g, &mut o, cfg, index, &mut rng)
        }
        _ => {
            let mut o = oracle::preprocess(&g, &opts)?;
            build_and_check(&g, &mut o, cfg, index, &mut rng)
        }
    }
}

/// Runs every instance, in parallel when the `parallel` feature is on.
pub fn run(cfg: &VerifyConfig) -> Result<VerifyReport> {
    #[cfg(feature = "parallel")]
    let instances: Result<Vec<_>> = {
        use rayon::prelude::*;
        (0..cfg.instances).into_par_iter().map(|i| verify_instance(cfg, i)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let instances: Result<Vec<_>> = (0..cfg.instances).map(|i| verify_instance(cfg, i)).collect();
    Ok(VerifyReport { instances: instances? })
}
