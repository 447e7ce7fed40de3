//! Query-versus-recompute timing on sparse random graphs.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaporation::min_safe_alpha;
use crate::generate::{bench_graph, failure_set, instance_rng};
use crate::graph::{Graph, TransitionPolicy};
use crate::linalg::instrument;
use crate::oracle::{self, BuildOptions, Oracle, Query, QueryOptions};
use crate::reference::dijkstra_reduced;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub seed: u64,
    pub n: usize,
    pub failure_sizes: Vec<usize>,
    /// Timed repetitions per measurement; the median is reported.
    pub trials: usize,
    pub extra_per_node: f64,
    pub policy: TransitionPolicy,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { seed: 42, n: 500, failure_sizes: vec![5], trials: 9, extra_per_node: 1.0, policy: TransitionPolicy::DegreeWeighted }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub edges: usize,
    pub failures: usize,
    pub alpha: f64,
    /// Whether alpha is within the safe bound.
    pub alpha_safe: bool,
    pub preprocess_ms: f64,
    pub query_ms: f64,
    pub dijkstra_ms: f64,
    /// Largest matrix factored by any timed query.
    pub max_factor_dim: usize,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        values[k / 2]
    } else {
        (values[k / 2 - 1] + values[k / 2]) / 2.0
    }
}

/// The safe bound when double precision can hold it over the diameter,
/// otherwise the smallest alpha that avoids underflow, flagged unsafe.
pub fn bench_alpha(g: &Graph) -> (f64, bool) {
    let floor = min_safe_alpha(g.diameter_bound());
    match oracle::graph_alpha_bound(g) {
        Ok(b) if b >= floor => (oracle::default_alpha(b), true),
        _ => (floor, false),
    }
}

fn time_ms<T>(f: impl FnOnce() -> T) -> (f64, T) {
    let start = Instant::now();
    let out = f();
    (start.elapsed().as_secs_f64() * 1e3, out)
}

/// Builds the benchmark graph and oracle for `cfg`.
pub fn setup(cfg: &BenchConfig) -> Result<(Graph, Oracle<f64>, f64, bool)> {
    let mut rng = instance_rng(cfg.seed, 0);
    let g = bench_graph(&mut rng, cfg.n, cfg.extra_per_node).with_exact_diameter();
    let (alpha, safe) = bench_alpha(&g);
    let opts = BuildOptions { alpha: Some(alpha), allow_unsafe: true, policy: cfg.policy };
    let o = oracle::preprocess(&g, &opts)?;
    Ok((g, o, alpha, safe))
}

pub fn run(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.trials == 0 {
        return Err(Error::InvalidBoundInput("trials must be positive".into()));
    }
    let (g, o, alpha, safe) = setup(cfg)?;
    let opts = BuildOptions { alpha: Some(alpha), allow_unsafe: true, policy: cfg.policy };
    let mut build = Vec::with_capacity(cfg.trials);
    for _ in 0..cfg.trials {
        let (ms, built) = time_ms(|| oracle::preprocess(&g, &opts));
        built?;
        build.push(ms);
    }
    let preprocess_ms = median(&mut build);

    let mut rng = instance_rng(cfg.seed, 1);
    let n = g.n();
    let query_opts = QueryOptions { raw_cost: false };
    let mut rows = Vec::new();
    for &f in &cfg.failure_sizes {
        let (mut q_ms, mut d_ms, mut max_dim) = (Vec::new(), Vec::new(), 0);
        for _ in 0..cfg.trials {
            let t = rng.gen_range(0..n);
            let q = Query::new(t, failure_set(&mut rng, n, t, f));
            instrument::reset();
            let (ms, r) = time_ms(|| o.query_with(&q, &query_opts));
            r?;
            max_dim = max_dim.max(instrument::factorizations().into_iter().max().unwrap_or(0));
            q_ms.push(ms);
            let (ms, tree) = time_ms(|| dijkstra_reduced(&g, t, &q.failures));
            tree?;
            d_ms.push(ms);
        }
        rows.push(BenchRow {
            n,
            edges: g.edge_count(),
            failures: f.min(n - 1),
            alpha,
            alpha_safe: safe,
            preprocess_ms,
            query_ms: median(&mut q_ms),
            dijkstra_ms: median(&mut d_ms),
            max_factor_dim: max_dim,
        });
    }
    Ok(rows)
}
