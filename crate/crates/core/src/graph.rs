//! Directed weighted graphs, edge-list parsing and random-walk transition
//! matrices.
//!
//! Weights are kept twice: as `f64` for the Markov computations and as exact
//! integers ("units") scaled by a common power of ten. The units make the
//! granularity `delta` and every path length exact.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Decimal places beyond this are rejected; `10^MAX_DECIMALS` must stay far
/// below `u64::MAX` once multiplied by realistic weights.
const MAX_DECIMALS: u32 = 9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    units: Vec<u64>,
    scale: u64,
    offsets: Vec<usize>,
    d_max: usize,
    delta_units: u64,
    w_max_units: u64,
    diameter_bound: f64,
}

/// A weight read as an exact decimal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Decimal {
    mantissa: u64,
    decimals: u32,
}

impl FromStr for Decimal {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.contains(['e', 'E']) {
            // Rust's Display for f64 never uses exponent notation.
            let v: f64 = s.parse().map_err(|_| format!("invalid weight {s:?}"))?;
            return format!("{v}").parse();
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(format!("invalid weight {s:?}"));
        }
        if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(format!("invalid weight {s:?}"));
        }
        let frac = frac.trim_end_matches('0');
        if frac.len() as u32 > MAX_DECIMALS {
            return Err(format!("weight {s:?} has more than {MAX_DECIMALS} decimal places"));
        }
        let digits = format!("{int}{frac}");
        let mantissa: u64 = if digits.is_empty() {
            0
        } else {
            digits.parse().map_err(|_| format!("weight {s:?} is too large"))?
        };
        if neg && mantissa != 0 {
            return Err(format!("negative weight {s:?}"));
        }
        Ok(Decimal { mantissa, decimals: frac.len() as u32 })
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Graph {
    /// Builds a graph from `(src, dst, weight)` triples. Weights go through
    /// their shortest decimal representation so `0.1` means exactly one tenth.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut raw = Vec::new();
        for (src, dst, w) in edges {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::NonPositiveWeight { src, dst, weight: format!("{w}") });
            }
            let dec: Decimal = format!("{w}")
                .parse()
                .map_err(|msg| Error::Parse { line: 0, msg })?;
            raw.push((src, dst, dec));
        }
        Self::from_decimals(n, raw)
    }

    fn from_decimals(n: usize, raw: Vec<(usize, usize, Decimal)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let decimals = raw.iter().map(|e| e.2.decimals).max().unwrap_or(0);
        let scale = 10u64.pow(decimals);
        let mut triples = Vec::with_capacity(raw.len());
        for (src, dst, dec) in raw {
            for node in [src, dst] {
                if node >= n {
                    return Err(Error::NodeOutOfRange { node, n });
                }
            }
            if src == dst {
                return Err(Error::SelfLoop { node: src });
            }
            if dec.mantissa == 0 {
                return Err(Error::NonPositiveWeight { src, dst, weight: "0".into() });
            }
            let units = dec
                .mantissa
                .checked_mul(10u64.pow(decimals - dec.decimals))
                .ok_or_else(|| Error::Parse { line: 0, msg: format!("weight on {src} -> {dst} overflows") })?;
            triples.push((src, dst, units));
        }
        triples.sort_unstable();
        for w in triples.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(Error::DuplicateEdge { src: w[0].0, dst: w[0].1 });
            }
        }

        let mut offsets = vec![0usize; n + 1];
        for &(src, _, _) in &triples {
            offsets[src + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let d_max = (0..n).map(|i| offsets[i + 1] - offsets[i]).max().unwrap_or(0);
        let delta_units = triples.iter().fold(0, |g, e| gcd(g, e.2));
        let w_max_units = triples.iter().map(|e| e.2).max().unwrap_or(0);
        let edges = triples
            .iter()
            .map(|&(src, dst, u)| Edge { src, dst, weight: u as f64 / scale as f64 })
            .collect();
        let units = triples.iter().map(|e| e.2).collect();
        let w_max = w_max_units as f64 / scale as f64;
        Ok(Graph {
            n,
            edges,
            units,
            scale,
            offsets,
            d_max,
            delta_units,
            w_max_units,
            diameter_bound: (n - 1) as f64 * w_max,
        })
    }

    /// Parses the edge-list format: a `n <count>` header followed by
    /// `<src> <dst> <weight>` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n = None;
        let mut raw = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let err = |msg: String| Error::Parse { line: line_no, msg };
            match n {
                None => {
                    if fields.len() != 2 || fields[0] != "n" {
                        return Err(err(format!("expected header \"n <count>\", found {content:?}")));
                    }
                    n = Some(fields[1].parse::<usize>().map_err(|_| err(format!("bad node count {:?}", fields[1])))?);
                }
                Some(count) => {
                    if fields.len() != 3 {
                        return Err(err(format!("expected \"<src> <dst> <weight>\", found {content:?}")));
                    }
                    let src: usize = fields[0].parse().map_err(|_| err(format!("bad node id {:?}", fields[0])))?;
                    let dst: usize = fields[1].parse().map_err(|_| err(format!("bad node id {:?}", fields[1])))?;
                    for node in [src, dst] {
                        if node >= count {
                            return Err(Error::NodeOutOfRange { node, n: count });
                        }
                    }
                    let w = fields[2].trim();
                    let dec: Decimal = match w.parse() {
                        Ok(d) => d,
                        Err(_) if w.starts_with('-') && w.parse::<f64>().is_ok() => {
                            return Err(Error::NonPositiveWeight { src, dst, weight: w.into() })
                        }
                        Err(msg) => return Err(err(msg)),
                    };
                    if dec.mantissa == 0 {
                        return Err(Error::NonPositiveWeight { src, dst, weight: w.into() });
                    }
                    raw.push((src, dst, dec));
                }
            }
        }
        let n = n.ok_or(Error::Parse { line: 0, msg: "missing \"n <count>\" header".into() })?;
        Self::from_decimals(n, raw)
    }

    /// Renders the graph back to the edge-list format.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for e in &self.edges {
            out.push_str(&format!("{} {} {}\n", e.src, e.dst, e.weight));
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// All edges, sorted by `(src, dst)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Outgoing edges of `i`, sorted by destination.
    pub fn out_edges(&self, i: usize) -> &[Edge] {
        &self.edges[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Index range of `i`'s outgoing edges within [`Graph::edges`].
    pub fn out_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn edge_index(&self, src: usize, dst: usize) -> Option<usize> {
        let r = self.out_range(src);
        self.edges[r.clone()].binary_search_by_key(&dst, |e| e.dst).ok().map(|k| r.start + k)
    }

    pub fn weight(&self, src: usize, dst: usize) -> Option<f64> {
        self.edge_index(src, dst).map(|k| self.edges[k].weight)
    }

    /// Exact integer weight of edge `k`, in units of `1 / scale`.
    pub fn edge_units(&self, k: usize) -> u64 {
        self.units[k]
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn units_to_weight(&self, units: u64) -> f64 {
        units as f64 / self.scale as f64
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    /// Largest value dividing every edge weight.
    pub fn delta(&self) -> f64 {
        self.delta_units as f64 / self.scale as f64
    }

    pub fn delta_units(&self) -> u64 {
        self.delta_units
    }

    pub fn w_max(&self) -> f64 {
        self.w_max_units as f64 / self.scale as f64
    }

    /// Upper estimate of the diameter used by the alpha bound.
    pub fn diameter_bound(&self) -> f64 {
        self.diameter_bound
    }

    pub fn with_diameter_bound(mut self, bound: f64) -> Self {
        self.diameter_bound = bound;
        self
    }

    /// Replaces the default `(n - 1) * w_max` estimate with the exact
    /// diameter, or `delta` when no two nodes are connected.
    pub fn with_exact_diameter(self) -> Self {
        let d = diameter_exact(&self).max(self.delta());
        self.with_diameter_bound(d)
    }

    /// Dense matrix of weights, zero where there is no edge.
    pub fn weight_matrix(&self) -> Matrix<f64> {
        let mut w = Matrix::zeros(self.n, self.n, ());
        for e in &self.edges {
            w.set(e.src, e.dst, e.weight);
        }
        w
    }

    /// Copy with every edge touching `nodes` removed; node ids are kept.
    pub fn without_nodes(&self, nodes: &[usize]) -> Graph {
        let mut dead = vec![false; self.n];
        for &v in nodes {
            dead[v] = true;
        }
        let raw = self
            .edges
            .iter()
            .zip(&self.units)
            .filter(|(e, _)| !dead[e.src] && !dead[e.dst])
            .map(|(e, &u)| (e.src, e.dst, Decimal { mantissa: u, decimals: self.scale.ilog10() }))
            .collect();
        Self::from_decimals(self.n, raw).expect("subgraph of a valid graph is valid")
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_edge_list())
    }
}

/// Largest finite shortest-path distance over ordered pairs.
pub fn diameter_exact(g: &Graph) -> f64 {
    let mut best = 0u64;
    for t in 0..g.n() {
        let tree = crate::reference::dijkstra_reduced(g, t, &[]).expect("no failures");
        best = best.max(tree.distance_units.iter().flatten().copied().max().unwrap_or(0));
    }
    g.units_to_weight(best)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitionPolicy {
    /// `P = D^{-1} A` with `D` the row sums of the weighted adjacency matrix.
    #[default]
    DegreeWeighted,
    /// Every out-edge equally likely.
    Uniform,
}

impl FromStr for TransitionPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "degree-weighted" | "degree" => Ok(TransitionPolicy::DegreeWeighted),
            "uniform" => Ok(TransitionPolicy::Uniform),
            _ => Err(format!("unknown transition policy {s:?} (expected degree-weighted or uniform)")),
        }
    }
}

/// Row-substochastic random-walk matrix over a graph's nodes.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    policy: TransitionPolicy,
    p: Matrix<f64>,
    by_edge: Vec<f64>,
}

impl TransitionMatrix {
    pub fn policy(&self) -> TransitionPolicy {
        self.policy
    }

    pub fn dense(&self) -> &Matrix<f64> {
        &self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        *self.p.get(i, j)
    }

    /// Probability of edge `k` of the source graph.
    pub fn edge(&self, k: usize) -> f64 {
        self.by_edge[k]
    }

    pub fn by_edge(&self) -> &[f64] {
        &self.by_edge
    }

    pub fn n(&self) -> usize {
        self.p.rows()
    }
}

pub fn transition_matrix(g: &Graph, policy: TransitionPolicy) -> TransitionMatrix {
    let mut by_edge = vec![0.0; g.edge_count()];
    let mut p = Matrix::zeros(g.n(), g.n(), ());
    for i in 0..g.n() {
        let range = g.out_range(i);
        if range.is_empty() {
            continue;
        }
        let degree: f64 = g.out_edges(i).iter().map(|e| e.weight).sum();
        let count = range.len() as f64;
        for k in range {
            let e = g.edges()[k];
            let prob = match policy {
                TransitionPolicy::DegreeWeighted => e.weight / degree,
                TransitionPolicy::Uniform => 1.0 / count,
            };
            by_edge[k] = prob;
            p.set(i, e.dst, prob);
        }
    }
    TransitionMatrix { policy, p, by_edge }
}
