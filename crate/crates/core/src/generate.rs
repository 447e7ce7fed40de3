//! Seeded random graph generators for verification and benchmarks.
//!
//! Every graph gets a random spanning arborescence toward a root, so every
//! node can reach the root, and then extra random edges. Node ids are
//! shuffled at the end so the root is not always node 0.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{diameter_exact, Graph};

/// Deterministic RNG for instance `index` of a run seeded with `seed`.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Debug)]
pub struct GraphSpec {
    pub min_n: usize,
    pub max_n: usize,
    pub max_out_degree: usize,
    pub min_weight: u64,
    pub max_weight: u64,
    /// Resample until the exact diameter is at most this.
    pub max_diameter: Option<u64>,
    /// Tree parents are drawn from the first `fanin` placed nodes, which
    /// keeps the arborescence shallow; `None` draws from all of them.
    pub fanin: Option<usize>,
    /// Extra-edge attempts are drawn uniformly from `[0, extra_factor * n]`.
    pub extra_factor: f64,
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec {
            min_n: 4,
            max_n: 25,
            max_out_degree: 4,
            min_weight: 1,
            max_weight: 5,
            max_diameter: Some(8),
            fanin: Some(3),
            extra_factor: 1.0,
        }
    }
}

impl GraphSpec {
    pub fn with_max_n(mut self, max_n: usize) -> Self {
        self.max_n = max_n;
        self.min_n = self.min_n.min(max_n);
        self
    }
}

/// Samples a graph following `spec`. Diameter rejection resamples edges
/// for the same node count.
pub fn random_graph(rng: &mut impl Rng, spec: &GraphSpec) -> Graph {
    let n = rng.gen_range(spec.min_n..=spec.max_n.max(spec.min_n));
    loop {
        let g = sample(rng, spec, n);
        match spec.max_diameter {
            Some(cap) if diameter_exact(&g) > cap as f64 => continue,
            _ => return g,
        }
    }
}

fn sample(rng: &mut impl Rng, spec: &GraphSpec, n: usize) -> Graph {
    let mut out: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
    let has = |out: &Vec<Vec<(usize, u64)>>, u: usize, v: usize| out[u].iter().any(|&(x, _)| x == v);
    for i in 1..n {
        let pool = spec.fanin.map_or(i, |f| f.min(i));
        let parent = rng.gen_range(0..pool);
        let w = rng.gen_range(spec.min_weight..=spec.max_weight);
        out[i].push((parent, w));
    }
    let attempts = (rng.gen::<f64>() * spec.extra_factor * n as f64) as usize;
    for _ in 0..attempts {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v || has(&out, u, v) || out[u].len() >= spec.max_out_degree {
            continue;
        }
        let w = rng.gen_range(spec.min_weight..=spec.max_weight);
        out[u].push((v, w));
    }
    relabel(rng, n, &out)
}

fn relabel(rng: &mut impl Rng, n: usize, out: &[Vec<(usize, u64)>]) -> Graph {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let edges = out
        .iter()
        .enumerate()
        .flat_map(|(u, list)| list.iter().map(move |&(v, w)| (u, v, w)))
        .map(|(u, v, w)| (perm[u], perm[v], w as f64));
    Graph::new(n, edges).expect("generated graphs are valid")
}

/// Sparse benchmark graph: arborescence with parents drawn from all earlier
/// nodes plus about `extra_per_node * n` random edges.
pub fn bench_graph(rng: &mut impl Rng, n: usize, extra_per_node: f64) -> Graph {
    let spec = GraphSpec {
        min_n: n,
        max_n: n,
        max_out_degree: 4,
        min_weight: 1,
        max_weight: 5,
        max_diameter: None,
        fanin: None,
        extra_factor: 2.0 * extra_per_node,
    };
    sample(rng, &spec, n)
}

/// Random failure set of `size` nodes (capped at `n - 1`) avoiding `t`,
/// sorted.
pub fn failure_set(rng: &mut impl Rng, n: usize, t: usize, size: usize) -> Vec<usize> {
    let others: Vec<usize> = (0..n).filter(|&v| v != t).collect();
    let k = size.min(others.len());
    let mut f: Vec<usize> = others.choose_multiple(rng, k).copied().collect();
    f.sort_unstable();
    f
}
