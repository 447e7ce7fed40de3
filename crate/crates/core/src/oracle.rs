//! The distance sensitivity oracle: one `n x n` inversion up front, then
//! replacement shortest-path trees for any target and failure set.
//!
//! A query for `(t, F)` updates only column `t` of the inverse,
//! `c = F°_{.,t} - F°_{.,F} (F°_{F,F})^{-1} F°_{F,t}`, and routes every node to
//! the out-neighbour maximizing `P_ij(alpha) c_j`. The only factorization in a
//! query is the `|F| x |F|` block.

use std::collections::VecDeque;
use std::io::{Read, Write};

use crc::{Crc, CRC_64_XZ};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaporation::{self, EvaporatedChain};
use crate::graph::{transition_matrix, Graph, TransitionPolicy};
use crate::linalg::{Lu, Matrix};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"AVOR";
pub const FORMAT_VERSION: u32 = 1;

/// Largest tolerated `max |F°(I - P(alpha)) - I|`.
pub const RESIDUAL_LIMIT: f64 = 1e-9;

/// Double-precision walk masses at or below this are treated as zero.
pub const UNREACHABLE_FLOOR: f64 = 1e-250;

/// A double-precision replacement mass smaller than this fraction of the
/// unfailed mass has lost most of its significant digits to cancellation.
pub const CANCELLATION_WARNING: f64 = 1e-10;

/// Bits of headroom a multiprecision query keeps below its working
/// precision before calling a mass zero.
const MP_GUARD_BITS: i64 = 40;

const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

const FLAG_UNSAFE: u8 = 1;
const FLAG_UNIFORM: u8 = 2;

#[derive(Clone, Copy, Debug, Default)]
pub struct BuildOptions {
    /// Evaporation factor; defaults to the safe bound.
    pub alpha: Option<f64>,
    /// Accept an alpha above the safe bound, recording it as unsafe.
    pub allow_unsafe: bool,
    pub policy: TransitionPolicy,
}

/// Alpha used when none is given: the safe bound, or 0.5 when the bound is
/// one (graphs without branching), since `I - P` can be singular at one.
pub fn default_alpha(bound: f64) -> f64 {
    if bound < 1.0 {
        bound
    } else {
        0.5
    }
}

/// Safe bound for a graph, one for graphs without edges.
pub fn graph_alpha_bound(g: &Graph) -> Result<f64> {
    if g.d_max() == 0 {
        return Ok(1.0);
    }
    evaporation::alpha_bound(g.d_max(), g.diameter_bound(), g.delta())
}

/// Working precision (bits) that resolves every replacement walk mass of
/// `g` at `alpha`, whatever the failure set.
pub fn suggested_precision(g: &Graph, alpha: f64, policy: TransitionPolicy) -> usize {
    let p = transition_matrix(g, policy);
    let p_min = p.by_edge().iter().copied().fold(1.0, f64::min);
    let hops = (g.n().saturating_sub(1)) as f64;
    let longest = hops * g.w_max();
    let bits = (1.0 / alpha).log2() * longest + hops * (1.0 / p_min).log2();
    128 + bits.ceil() as usize
}

#[derive(Clone, Debug)]
pub struct Oracle<T: Scalar = f64> {
    graph: Graph,
    chain: EvaporatedChain<T>,
    f_o: Matrix<T>,
    alpha_bound: Option<f64>,
    unsafe_alpha: bool,
    residual: f64,
}

fn resolve_alpha(g: &Graph, opts: &BuildOptions) -> Result<(f64, Option<f64>, bool)> {
    let bound = graph_alpha_bound(g);
    match (opts.alpha, bound) {
        (None, Ok(b)) => Ok((default_alpha(b), Some(b), false)),
        (None, Err(e)) => Err(e),
        (Some(a), Ok(b)) if a > b && !opts.allow_unsafe => Err(Error::AlphaAboveBound { alpha: a, bound: b }),
        (Some(a), Ok(b)) => Ok((a, Some(b), a > b)),
        (Some(a), Err(_)) if opts.allow_unsafe => Ok((a, None, true)),
        (Some(_), Err(e)) => Err(e),
    }
}

/// Double-precision preprocessing.
pub fn preprocess(g: &Graph, opts: &BuildOptions) -> Result<Oracle<f64>> {
    let (alpha, bound, unsafe_alpha) = resolve_alpha(g, opts)?;
    let p = transition_matrix(g, opts.policy);
    let chain = evaporation::evaporate(g, &p, alpha)?;
    Oracle::from_chain(g.clone(), chain, bound, unsafe_alpha)
}

/// Preprocessing in an arbitrary scalar type with context `ctx`.
pub fn preprocess_in<T: Scalar>(g: &Graph, opts: &BuildOptions, ctx: T::Ctx) -> Result<Oracle<T>> {
    let (alpha, bound, unsafe_alpha) = resolve_alpha(g, opts)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha { alpha });
    }
    let p = transition_matrix(g, opts.policy);
    let chain = evaporation::evaporate_in::<T>(g, &p, alpha, ctx);
    Oracle::from_chain(g.clone(), chain, bound, unsafe_alpha)
}

/// Multiprecision preprocessing at [`suggested_precision`].
#[cfg(feature = "mp")]
pub fn preprocess_mp(g: &Graph, opts: &BuildOptions) -> Result<Oracle<crate::mp::MpFloat>> {
    let (alpha, _, _) = resolve_alpha(g, opts)?;
    preprocess_in(g, opts, suggested_precision(g, alpha, opts.policy))
}

/// `max |F°(I - P(alpha)) - I|` using the sparsity of `P(alpha)`.
fn inversion_residual<T: Scalar>(g: &Graph, chain: &EvaporatedChain<T>, f_o: &Matrix<T>) -> f64 {
    let n = g.n();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut row: Vec<T> = f_o.row(i).to_vec();
        for (k, e) in g.edges().iter().enumerate() {
            let fik = f_o.get(i, e.src);
            if !fik.is_zero() {
                row[e.dst].mul_sub_assign(fik, chain.edge(k));
            }
        }
        for (j, v) in row.iter().enumerate() {
            let dev = if i == j { v.to_f64() - 1.0 } else { v.to_f64() };
            worst = worst.max(dev.abs());
        }
    }
    worst
}

impl<T: Scalar> Oracle<T> {
    fn from_chain(graph: Graph, chain: EvaporatedChain<T>, alpha_bound: Option<f64>, unsafe_alpha: bool) -> Result<Self> {
        let n = graph.n();
        let ctx = chain.dense().get(0, 0).ctx();
        let (zero, one) = (T::zero(ctx), T::one(ctx));
        let system = Matrix::from_fn(n, n, |i, j| {
            let p = chain.dense().get(i, j);
            if i == j {
                one.sub(p)
            } else {
                zero.sub(p)
            }
        });
        let f_o = Lu::factor(&system)?.inverse();
        let residual = inversion_residual(&graph, &chain, &f_o);
        if !(residual < RESIDUAL_LIMIT) {
            return Err(Error::Residual { residual, limit: RESIDUAL_LIMIT });
        }
        Ok(Oracle { graph, chain, f_o, alpha_bound, unsafe_alpha, residual })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn alpha(&self) -> f64 {
        self.chain.alpha()
    }

    /// Safe bound for the stored graph, `None` if it underflows.
    pub fn alpha_bound(&self) -> Option<f64> {
        self.alpha_bound
    }

    /// Whether alpha exceeds the safe bound.
    pub fn is_unsafe(&self) -> bool {
        self.unsafe_alpha
    }

    pub fn policy(&self) -> TransitionPolicy {
        self.chain.policy()
    }

    pub fn chain(&self) -> &EvaporatedChain<T> {
        &self.chain
    }

    /// `F°(alpha) = (I - P(alpha))^{-1}`.
    pub fn fundamental(&self) -> &Matrix<T> {
        &self.f_o
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Overwrites one entry of `F°`. Only meant for fault-injection tests of
    /// verification harnesses.
    pub fn set_fundamental_entry(&mut self, i: usize, j: usize, value: T) {
        self.f_o.set(i, j, value);
    }

    fn ctx(&self) -> T::Ctx {
        self.f_o.get(0, 0).ctx()
    }

    fn validate(&self, q: &Query) -> Result<Vec<bool>> {
        let n = self.n();
        if q.target >= n {
            return Err(Error::NodeOutOfRange { node: q.target, n });
        }
        let mut failed = vec![false; n];
        for &f in &q.failures {
            if f >= n {
                return Err(Error::NodeOutOfRange { node: f, n });
            }
            if f == q.target {
                return Err(Error::TargetInFailures { target: q.target });
            }
            if failed[f] {
                return Err(Error::DuplicateFailure { node: f });
            }
            failed[f] = true;
        }
        Ok(failed)
    }

    /// Column `t` of the fundamental matrix with the failures made
    /// absorbing, zero on failed nodes, together with the factored failure
    /// block.
    fn replacement(&self, q: &Query, failed: &[bool]) -> Result<(Vec<T>, Option<Lu<T>>)> {
        let n = self.n();
        let t = q.target;
        let fs = &q.failures;
        let mut c: Vec<T> = self.f_o.column(t);
        if fs.is_empty() {
            return Ok((c, None));
        }
        let block = self.f_o.select(fs, fs);
        let lu = Lu::factor(&block)?;
        let rhs: Vec<T> = fs.iter().map(|&f| self.f_o.get(f, t).clone()).collect();
        let y = lu.solve_vec(&rhs);
        for i in 0..n {
            if failed[i] {
                c[i] = T::zero(self.ctx());
                continue;
            }
            for (k, &f) in fs.iter().enumerate() {
                c[i].mul_sub_assign(self.f_o.get(i, f), &y[k]);
            }
        }
        Ok((c, Some(lu)))
    }

    /// Replacement column `F^{F, o}_{., t}` by node id (zero on failures).
    pub fn replacement_column(&self, q: &Query) -> Result<Vec<T>> {
        let failed = self.validate(q)?;
        Ok(self.replacement(q, &failed)?.0)
    }

    pub fn query(&self, q: &Query) -> Result<ReplacementResult> {
        self.query_with(q, &QueryOptions::default())
    }

    pub fn query_with(&self, q: &Query, opts: &QueryOptions) -> Result<ReplacementResult> {
        let failed = self.validate(q)?;
        let (c, lu) = self.replacement(q, &failed)?;
        let g = &self.graph;
        let n = g.n();
        let t = q.target;
        let mut warnings = Vec::new();
        if self.unsafe_alpha {
            warnings.push(format!(
                "alpha {} exceeds the safe bound {}; distances are not guaranteed",
                self.alpha(),
                self.alpha_bound.map_or("(underflowed)".to_string(), |b| format!("{b:e}"))
            ));
        }

        let structural = reachable_avoiding(g, t, &failed);
        let mut alive = vec![false; n];
        let mut lost = Vec::new();
        let mut cancelled = Vec::new();
        for i in 0..n {
            if !structural[i] {
                continue;
            }
            let full = self.f_o.get(i, t).to_f64();
            let (zero, noisy) = self.mass_state(&c[i], full);
            if zero {
                lost.push(i);
            } else {
                alive[i] = true;
                if noisy {
                    cancelled.push(i);
                }
            }
        }
        if !lost.is_empty() {
            warnings.push(format!(
                "walk mass underflowed at nodes {lost:?}; they are reported unreachable although a path exists"
            ));
        }
        if !cancelled.is_empty() {
            warnings.push(format!(
                "replacement masses at nodes {cancelled:?} lost most significant digits to cancellation; \
                 rerun with multiprecision arithmetic"
            ));
        }

        let mut successor = vec![None; n];
        for i in (0..n).filter(|&i| alive[i] && i != t) {
            let mut best: Option<(usize, T)> = None;
            for k in g.out_range(i) {
                let j = g.edges()[k].dst;
                if !alive[j] {
                    continue;
                }
                let score = self.chain.edge(k).mul(&c[j]);
                if best.as_ref().is_none_or(|(_, b)| score > *b) {
                    best = Some((j, score));
                }
            }
            successor[i] = best.map(|(j, _)| j);
        }

        let units = tree_distance_units(g, t, &successor)?;
        let costs = if opts.raw_cost { Some(self.raw_costs(q, &failed, &alive, &c, lu.as_ref())) } else { None };

        let delta = g.delta();
        let d_max = g.d_max().max(1);
        let mut disagreements = Vec::new();
        let nodes = (0..n)
            .map(|i| {
                let status = if failed[i] {
                    NodeStatus::FailedNode
                } else if alive[i] && units[i].is_some() {
                    NodeStatus::Ok
                } else {
                    NodeStatus::Unreachable
                };
                let ok = status == NodeStatus::Ok;
                let distance = if ok { units[i].map(|u| g.units_to_weight(u)) } else { None };
                let (raw_cost, cost_residual) = match (&costs, ok) {
                    (Some(u), true) => {
                        let raw = u[i].to_f64();
                        let tree = distance.expect("ok nodes have distances");
                        let residual = u[i].sub(&T::from_f64(tree, u[i].ctx())).to_f64();
                        match round_distance(raw, delta, d_max) {
                            Ok(r) if (r - tree).abs() <= delta * 1e-9 => {}
                            Ok(r) => disagreements.push(format!("node {i}: raw cost {raw} rounds to {r}, tree gives {tree}")),
                            Err(_) => disagreements.push(format!("node {i}: raw cost {raw} is outside the rounding window")),
                        }
                        (Some(raw), Some(residual))
                    }
                    _ => (None, None),
                };
                NodeResult { id: i, status, successor: if ok { successor[i] } else { None }, distance, raw_cost, cost_residual }
            })
            .collect();
        if !disagreements.is_empty() {
            warnings.push(format!("raw costs disagree with the tree: {}", disagreements.join("; ")));
        }
        Ok(ReplacementResult { target: t, failures: q.failures.clone(), nodes, warnings })
    }

    /// Returns `(treat as zero, significant digits lost)` for a replacement
    /// mass `c` whose unfailed counterpart is `full`.
    fn mass_state(&self, c: &T, full: f64) -> (bool, bool) {
        match T::UNDERFLOW_FLOOR {
            Some(_) => {
                let v = c.to_f64();
                (v <= UNREACHABLE_FLOOR, v < full * CANCELLATION_WARNING)
            }
            None => {
                let eps = T::epsilon(c.ctx());
                let floor = T::from_f64(full, c.ctx()).mul(&T::from_f64(2f64.powi(MP_GUARD_BITS as i32), c.ctx()).mul(&T::from_f64(eps, c.ctx())));
                (!(*c > floor), false)
            }
        }
    }

    /// Conditioned expected cost to `t` avoiding failures and evaporation:
    /// `U_s = h_s / c_s - h_t / c_t` with `h = F^{F,o} g` and
    /// `g_m = sum_j P_mj(alpha) w_mj c_j`.
    fn raw_costs(&self, q: &Query, failed: &[bool], alive: &[bool], c: &[T], lu: Option<&Lu<T>>) -> Vec<T> {
        let g = &self.graph;
        let n = g.n();
        let t = q.target;
        let ctx = self.ctx();
        let mut gv: Vec<T> = vec![T::zero(ctx); n];
        for m in (0..n).filter(|&m| !failed[m] && m != t) {
            for k in g.out_range(m) {
                let e = g.edges()[k];
                if failed[e.dst] || c[e.dst].is_zero() {
                    continue;
                }
                let term = self.chain.edge(k).mul(&T::from_f64(e.weight, ctx));
                gv[m].mul_add_assign(&term, &c[e.dst]);
            }
        }
        let mut h = self.f_o.mul_vec(&gv);
        if let Some(lu) = lu {
            let fs = &q.failures;
            let rhs: Vec<T> = fs
                .iter()
                .map(|&f| {
                    let mut acc = T::zero(ctx);
                    for (m, gm) in gv.iter().enumerate() {
                        acc.mul_add_assign(self.f_o.get(f, m), gm);
                    }
                    acc
                })
                .collect();
            let y = lu.solve_vec(&rhs);
            for (i, hi) in h.iter_mut().enumerate() {
                for (k, &f) in fs.iter().enumerate() {
                    hi.mul_sub_assign(self.f_o.get(i, f), &y[k]);
                }
            }
        }
        let base = h[t].div(&c[t]);
        (0..n).map(|i| if alive[i] { h[i].div(&c[i]).sub(&base) } else { T::zero(ctx) }).collect()
    }
}

/// Nodes that can reach `t` without touching a failed node.
fn reachable_avoiding(g: &Graph, t: usize, failed: &[bool]) -> Vec<bool> {
    let n = g.n();
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in g.edges() {
        incoming[e.dst].push(e.src);
    }
    let mut seen = vec![false; n];
    seen[t] = true;
    let mut queue = VecDeque::from([t]);
    while let Some(v) = queue.pop_front() {
        for &u in &incoming[v] {
            if !seen[u] && !failed[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub target: usize,
    pub failures: Vec<usize>,
}

impl Query {
    pub fn new(target: usize, failures: impl Into<Vec<usize>>) -> Self {
        Query { target, failures: failures.into() }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QueryOptions {
    /// Compute the conditioned expected costs next to the tree distances.
    pub raw_cost: bool,
}

impl Default for QueryOptions {
    fn default() -> Self {
        QueryOptions { raw_cost: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeStatus {
    Ok,
    Unreachable,
    FailedNode,
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeResult {
    pub id: usize,
    pub status: NodeStatus,
    pub successor: Option<usize>,
    pub distance: Option<f64>,
    pub raw_cost: Option<f64>,
    /// `raw_cost - distance` evaluated in the oracle's own precision.
    #[serde(skip)]
    pub cost_residual: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplacementResult {
    pub target: usize,
    pub failures: Vec<usize>,
    pub nodes: Vec<NodeResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ReplacementResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn successors(&self) -> Vec<Option<usize>> {
        self.nodes.iter().map(|r| r.successor).collect()
    }

    pub fn tree_edges(&self) -> Vec<(usize, usize)> {
        self.nodes.iter().filter_map(|r| r.successor.map(|s| (r.id, s))).collect()
    }

    /// Graphviz rendering of the tree; failed nodes are drawn crossed out.
    pub fn to_dot(&self, g: &Graph) -> String {
        let mut out = String::from("digraph replacement {\n  rankdir=LR;\n");
        for r in &self.nodes {
            let label = match r.distance {
                Some(d) => format!("{} ({d})", r.id),
                None => r.id.to_string(),
            };
            let style = match r.status {
                _ if r.id == self.target => ", shape=doublecircle",
                NodeStatus::FailedNode => ", shape=Mcircle, style=dashed",
                NodeStatus::Unreachable => ", style=dotted",
                NodeStatus::Ok => "",
            };
            out.push_str(&format!("  {} [label=\"{label}\"{style}];\n", r.id));
        }
        for (i, j) in self.tree_edges() {
            let w = g.weight(i, j).unwrap_or(f64::NAN);
            out.push_str(&format!("  {i} -> {j} [label=\"{w}\"];\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Sums edge weights along successor chains, in graph units. Nodes without
/// a successor (other than `t`) get `None`.
pub fn tree_distance_units(g: &Graph, t: usize, successor: &[Option<usize>]) -> Result<Vec<Option<u64>>> {
    let n = g.n();
    let mut dist: Vec<Option<u64>> = vec![None; n];
    let mut done = vec![false; n];
    dist[t] = Some(0);
    done[t] = true;
    let mut on_stack = vec![false; n];
    for start in 0..n {
        let mut path = Vec::new();
        let mut v = start;
        while !done[v] {
            if on_stack[v] {
                return Err(Error::SuccessorCycle { node: start });
            }
            on_stack[v] = true;
            path.push(v);
            match successor[v] {
                Some(next) if next < n => v = next,
                Some(next) => return Err(Error::NodeOutOfRange { node: next, n }),
                None => break,
            }
        }
        let mut acc = if done[v] { dist[v] } else { None };
        for &u in path.iter().rev() {
            acc = match (acc, successor[u]) {
                (Some(d), Some(next)) => {
                    let k = g
                        .edge_index(u, next)
                        .ok_or_else(|| Error::Malformed(format!("successor {u} -> {next} is not an edge")))?;
                    Some(d + g.edge_units(k))
                }
                _ => None,
            };
            dist[u] = acc;
            done[u] = true;
        }
    }
    Ok(dist)
}

/// Distances along the successor chains of a query result.
pub fn tree_distances(result: &ReplacementResult, g: &Graph) -> Result<Vec<Option<f64>>> {
    let units = tree_distance_units(g, result.target, &result.successors())?;
    Ok(units.into_iter().map(|u| u.map(|u| g.units_to_weight(u))).collect())
}

/// Rounds a conditioned cost to the multiple `k delta` with
/// `k = floor((u + delta / (2 d_max)) / delta)`; the residual `u - k delta`
/// must lie in `(-delta / (2 d_max), delta / d_max)`.
pub fn round_distance(u: f64, delta: f64, d_max: usize) -> Result<f64> {
    let d = d_max.max(1) as f64;
    let k = ((u + delta / (2.0 * d)) / delta).floor();
    let value = k * delta;
    let residual = u - value;
    let (low, high) = (-delta / (2.0 * d), delta / d);
    if residual > low && residual < high {
        Ok(value)
    } else {
        Err(Error::RoundingWindow { cost: u, residual, low, high })
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, k: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(k).filter(|&e| e <= self.buf.len()).ok_or(Error::Truncated)?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Malformed("size does not fit in memory".into()))
    }
}

impl Oracle<f64> {
    /// Serializes the oracle; see [`Oracle::from_bytes`] for the layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.graph;
        let n = g.n();
        let mut w = Writer { buf: Vec::with_capacity(64 + 16 * n * n + 24 * g.edge_count()) };
        w.buf.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        w.u64(n as u64);
        w.f64(self.alpha());
        w.f64(g.delta());
        w.u64(g.d_max() as u64);
        w.u64(g.diameter_bound().ceil() as u64);
        for &x in self.f_o.as_slice() {
            w.f64(x);
        }
        for &x in self.chain.dense().as_slice() {
            w.f64(x);
        }
        let mut flags = 0;
        if self.unsafe_alpha {
            flags |= FLAG_UNSAFE;
        }
        if self.policy() == TransitionPolicy::Uniform {
            flags |= FLAG_UNIFORM;
        }
        w.u8(flags);
        w.f64(g.diameter_bound());
        w.u64(g.edge_count() as u64);
        for e in g.edges() {
            w.u64(e.src as u64);
            w.u64(e.dst as u64);
            w.f64(e.weight);
        }
        let crc = CRC64.checksum(&w.buf);
        w.u64(crc);
        w.buf
    }

    /// Layout, little endian: `"AVOR"`, `u32` version, `u64 n`, `f64 alpha`,
    /// `f64 delta`, `u64 d_max`, `u64` diameter bound (rounded up), `n^2`
    /// `f64` of `F°` row-major, `n^2` `f64` of `P(alpha)` row-major, `u8`
    /// flags (bit 0 unsafe alpha, bit 1 uniform policy), `f64` exact diameter
    /// bound, `u64 m`, `m` edges as `(u64 src, u64 dst, f64 weight)`, and a
    /// CRC-64/XZ of everything before it.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4).map_err(|_| Error::BadMagic)? != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: FORMAT_VERSION });
        }
        if bytes.len() < 8 {
            return Err(Error::Truncated);
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));

        let n = r.usize()?;
        let alpha = r.f64()?;
        let delta = r.f64()?;
        let d_max = r.usize()?;
        let _diameter_ceil = r.u64()?;
        let cells = n.checked_mul(n).filter(|c| c.checked_mul(16).is_some_and(|b| b <= body.len())).ok_or(Error::Truncated)?;
        let read_matrix = |r: &mut Reader| -> Result<Matrix<f64>> {
            let raw = r.take(cells * 8)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            Ok(Matrix::from_row_major(n, n, data))
        };
        let f_o = read_matrix(&mut r)?;
        let p_alpha = read_matrix(&mut r)?;
        let flags = r.u8()?;
        let diameter_bound = r.f64()?;
        let m = r.usize()?;
        if m.checked_mul(24).is_none_or(|b| b > body.len()) {
            return Err(Error::Truncated);
        }
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            edges.push((r.usize()?, r.usize()?, r.f64()?));
        }
        if r.pos + 8 > bytes.len() {
            return Err(Error::Truncated);
        }
        if r.pos + 8 < bytes.len() {
            return Err(Error::Malformed(format!("{} trailing bytes", bytes.len() - r.pos - 8)));
        }
        let computed = CRC64.checksum(body);
        if computed != stored {
            return Err(Error::Checksum { stored, computed });
        }

        let graph = Graph::new(n, edges).map_err(|e| Error::Malformed(format!("stored graph: {e}")))?.with_diameter_bound(diameter_bound);
        if graph.d_max() != d_max || graph.delta() != delta {
            return Err(Error::Malformed("graph metadata disagrees with the stored edges".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Malformed(format!("alpha {alpha} outside (0, 1]")));
        }
        let policy = if flags & FLAG_UNIFORM != 0 { TransitionPolicy::Uniform } else { TransitionPolicy::DegreeWeighted };
        let chain = EvaporatedChain::from_dense(&graph, alpha, policy, p_alpha);
        let residual = inversion_residual(&graph, &chain, &f_o);
        let alpha_bound = graph_alpha_bound(&graph).ok();
        Ok(Oracle { graph, chain, f_o, alpha_bound, unsafe_alpha: flags & FLAG_UNSAFE != 0, residual })
    }

    pub fn save(&self, mut out: impl Write) -> Result<()> {
        out.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(mut input: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
