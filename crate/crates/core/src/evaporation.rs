//! The evaporating chain `P(alpha) = P ⊙ alpha^W`, its safe-alpha bound,
//! routing-continuum edge probabilities and alpha sweeps.
//!
//! Mass missing from a row of `P(alpha)` evaporates into an implicit
//! absorbing node that is never materialized.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, TransitionMatrix, TransitionPolicy};
use crate::linalg::Matrix;
use crate::markov::{self, Avoid, FundamentalMatrix, Reach};
use crate::reference;
use crate::scalar::Scalar;

/// Smallest walk mass a double-precision chain may be asked to represent.
pub const UNDERFLOW_FLOOR: f64 = 1e-280;

/// Edge probabilities below this are dropped from DOT output.
pub const DOT_EPSILON: f64 = 1e-9;

/// Flows within this distance of 0 or 1 count as exactly 0 or 1.
pub const FLOW_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct EvaporatedChain<T: Scalar = f64> {
    alpha: f64,
    policy: TransitionPolicy,
    by_edge: Vec<T>,
    dense: Matrix<T>,
}

impl<T: Scalar> EvaporatedChain<T> {
    /// Rebuilds a chain from a stored dense `P(alpha)`; entries off the
    /// graph's edges are ignored.
    pub(crate) fn from_dense(g: &Graph, alpha: f64, policy: TransitionPolicy, dense: Matrix<T>) -> Self {
        let by_edge = g.edges().iter().map(|e| dense.get(e.src, e.dst).clone()).collect();
        EvaporatedChain { alpha, policy, by_edge, dense }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn policy(&self) -> TransitionPolicy {
        self.policy
    }

    /// Evaporated probability of edge `k` of the source graph.
    pub fn edge(&self, k: usize) -> &T {
        &self.by_edge[k]
    }

    pub fn by_edge(&self) -> &[T] {
        &self.by_edge
    }

    pub fn dense(&self) -> &Matrix<T> {
        &self.dense
    }

    /// Probability of evaporating on the next step from `i`.
    pub fn leak(&self, i: usize) -> f64 {
        1.0 - self.dense.row(i).iter().map(Scalar::to_f64).sum::<f64>()
    }
}

/// Smallest alpha whose `alpha^(L+1)` stays above [`UNDERFLOW_FLOOR`].
pub fn min_safe_alpha(diameter_bound: f64) -> f64 {
    UNDERFLOW_FLOOR.powf(1.0 / (diameter_bound + 1.0))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha { alpha })
    }
}

/// Double-precision chain, refusing alphas that would underflow over paths as
/// long as the graph's diameter bound.
pub fn evaporate(g: &Graph, p: &TransitionMatrix, alpha: f64) -> Result<EvaporatedChain<f64>> {
    check_alpha(alpha)?;
    let l = g.diameter_bound();
    // log form so that min_safe_alpha itself passes despite rounding
    if (l + 1.0) * alpha.ln() < UNDERFLOW_FLOOR.ln() * (1.0 + 1e-12) {
        return Err(Error::UnderflowRisk { alpha, diameter_bound: l, min_safe_alpha: min_safe_alpha(l) });
    }
    Ok(evaporate_in(g, p, alpha, ()))
}

/// Chain in an arbitrary scalar type. No underflow guard: callers pick a
/// type whose exponent range covers the walk masses.
pub fn evaporate_in<T: Scalar>(g: &Graph, p: &TransitionMatrix, alpha: f64, ctx: T::Ctx) -> EvaporatedChain<T> {
    let n = g.n();
    // alpha^w = (alpha^delta)^(w / delta) with an integer exponent
    let base = T::from_f64(alpha, ctx).powf(g.delta());
    let by_edge: Vec<T> = (0..g.edge_count())
        .map(|k| {
            let steps = g.edge_units(k) / g.delta_units();
            T::from_f64(p.edge(k), ctx).mul(&base.powf(steps as f64))
        })
        .collect();
    let mut dense = Matrix::zeros(n, n, ctx);
    for (k, e) in g.edges().iter().enumerate() {
        dense.set(e.src, e.dst, by_edge[k].clone());
    }
    EvaporatedChain { alpha, policy: p.policy(), by_edge, dense }
}

/// Largest alpha guaranteeing a distance error below `delta / d_max`:
/// `(1 / (d_max^(L+1) - d_max + 1))^(1/delta)`.
pub fn alpha_bound(d_max: usize, l_max: f64, delta: f64) -> Result<f64> {
    if d_max == 0 {
        return Err(Error::InvalidBoundInput("d_max must be at least 1".into()));
    }
    if !(l_max > 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidBoundInput(format!("need L_max > 0 and delta > 0, got {l_max} and {delta}")));
    }
    if d_max == 1 {
        return Ok(1.0);
    }
    let d = d_max as f64;
    let ln_top = (l_max + 1.0) * d.ln();
    // ln(d^(L+1) - d + 1) = ln d^(L+1) + ln(1 - (d - 1) / d^(L+1))
    let ln_denom = ln_top + (-(d - 1.0) * (-ln_top).exp()).ln_1p();
    let alpha = (-ln_denom / delta).exp();
    if alpha < f64::MIN_POSITIVE {
        return Err(Error::BoundUnderflow { d_max, l_max, delta });
    }
    Ok(alpha)
}

/// Upper bound on `U - L` at a given alpha:
/// `delta * alpha^delta / (1 - alpha^delta) * (d_max^L - 1)`.
pub fn error_upper_bound(alpha: f64, delta: f64, d_max: usize, l_max: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha == 1.0 {
        return Err(Error::BoundDiverges);
    }
    if d_max == 0 || !(delta > 0.0) || !(l_max >= 0.0) {
        return Err(Error::InvalidBoundInput(format!("d_max={d_max}, delta={delta}, L_max={l_max}")));
    }
    if d_max == 1 || l_max == 0.0 {
        return Ok(0.0);
    }
    let d = d_max as f64;
    let a = alpha.powf(delta);
    let ln_dl = l_max * d.ln();
    let ln_growth = ln_dl + (-(-ln_dl).exp()).ln_1p();
    Ok((delta.ln() + a.ln() - (-a).ln_1p() + ln_growth).exp())
}

/// Conditioned next-hop probabilities toward a target, by edge index.
#[derive(Clone, Debug, Serialize)]
pub struct EdgeProbabilities {
    pub target: usize,
    pub alpha: f64,
    /// `ČP` for each edge of the graph; zero on edges leaving unreachable
    /// nodes or the target.
    pub cp: Vec<f64>,
    pub reachable: Vec<bool>,
}

impl EdgeProbabilities {
    pub fn get(&self, g: &Graph, i: usize, j: usize) -> Option<f64> {
        g.edge_index(i, j).map(|k| self.cp[k])
    }

    pub fn row_sum(&self, g: &Graph, i: usize) -> f64 {
        g.out_range(i).map(|k| self.cp[k]).sum()
    }

    pub fn max_abs_diff(&self, other: &EdgeProbabilities) -> f64 {
        self.cp.iter().zip(&other.cp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn conditioned_edges(
    g: &Graph,
    chain: &EvaporatedChain<f64>,
    t: usize,
    weight: impl Fn(usize) -> f64,
) -> EdgeProbabilities {
    let reachable: Vec<bool> = (0..g.n()).map(|i| i == t || weight(i) > 0.0).collect();
    let mut cp = vec![0.0; g.edge_count()];
    for i in (0..g.n()).filter(|&i| i != t && reachable[i]) {
        let wi = weight(i);
        for k in g.out_range(i) {
            cp[k] = chain.edge(k) * weight(g.edges()[k].dst) / wi;
        }
    }
    EdgeProbabilities { target: t, alpha: chain.alpha(), cp, reachable }
}

/// `ČP_ij = P_ij(alpha) Q_j / Q_i` from absorption probabilities `q` (by node
/// id, with `q[t] = 1`).
pub fn transform_chain(g: &Graph, chain: &EvaporatedChain<f64>, q: &[f64], t: usize) -> EdgeProbabilities {
    conditioned_edges(g, chain, t, |i| if i == t { 1.0 } else { q[i] })
}

/// `ČP_ij = P_ij(alpha) F°_jt / F°_it` straight from the fundamental matrix
/// of the evaporating chain.
pub fn edge_probabilities(g: &Graph, chain: &EvaporatedChain<f64>, f_o: &FundamentalMatrix, t: usize) -> Result<EdgeProbabilities> {
    let ti = f_o.index_of(t).ok_or(Error::NotTransient { node: t })?;
    let col: Vec<f64> = (0..g.n()).map(|i| f_o.index_of(i).map_or(0.0, |r| *f_o.matrix().get(r, ti))).collect();
    Ok(conditioned_edges(g, chain, t, |i| col[i]))
}

/// Default alpha grid: the bound followed by 0.3, 0.6, 0.9 and 1.
pub fn default_grid(alpha_star: f64) -> Vec<f64> {
    let mut grid = vec![alpha_star, 0.3, 0.6, 0.9, 1.0];
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowRow {
    pub source: usize,
    /// Expected visits to each node on walks that reach the target; one at
    /// the target, `None` when the source cannot reach it.
    pub flow: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgeValue {
    pub src: usize,
    pub dst: usize,
    pub p: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuumBlock {
    pub alpha: f64,
    pub edges: Vec<EdgeValue>,
    pub hitting_cost: Vec<Option<f64>>,
    pub flows: Vec<FlowRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<Option<f64>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuumReport {
    pub target: usize,
    pub alphas: Vec<f64>,
    pub blocks: Vec<ContinuumBlock>,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    /// Restrict flow rows to these sources; all nodes when empty.
    pub sources: Vec<usize>,
    /// Attach `U - L` using exact distances from the reference module.
    pub with_reference: bool,
}

/// Conditioned flows `F^{t, not o}_{s, .}` with the target counted once.
pub fn node_flows(af: &markov::AvoidanceFundamental, s: usize, n: usize) -> Option<Vec<f64>> {
    if !af.is_reachable(s) {
        return None;
    }
    let mut row: Vec<f64> = (0..n).map(|m| af.get(s, m).value().unwrap_or(0.0)).collect();
    row[af.target()] = 1.0;
    Some(row)
}

/// The same conditioned flows straight from `F°` in any scalar type:
/// `(F°_sm - F°_st F°_tm / F°_tt) F°_mt / F°_st`.
pub fn node_flows_in<T: Scalar>(f_o: &Matrix<T>, s: usize, t: usize) -> Option<Vec<f64>> {
    let n = f_o.rows();
    let mut row = vec![0.0; n];
    row[t] = 1.0;
    if s == t {
        return Some(row);
    }
    let f_st = f_o.get(s, t);
    if !f_st.is_positive() {
        return None;
    }
    let ratio = f_st.div(f_o.get(t, t));
    for (m, slot) in row.iter_mut().enumerate().filter(|&(m, _)| m != t) {
        let mut before_t = f_o.get(s, m).clone();
        before_t.mul_sub_assign(&ratio, f_o.get(t, m));
        *slot = before_t.mul(f_o.get(m, t)).div(f_st).to_f64();
    }
    Some(row)
}

/// Whether a flow value is (numerically) zero, one or strictly between.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowClass {
    Zero,
    Interior,
    One,
}

pub fn classify_flow(v: f64, tol: f64) -> FlowClass {
    if v < tol {
        FlowClass::Zero
    } else if (v - 1.0).abs() < tol {
        FlowClass::One
    } else {
        FlowClass::Interior
    }
}

fn sweep_point(g: &Graph, p: &TransitionMatrix, t: usize, alpha: f64, opts: &SweepOptions, exact: Option<&reference::ShortestTree>) -> Result<ContinuumBlock> {
    let chain = evaporate(g, p, alpha)?;
    let af = markov::avoidance_fundamental(chain.dense(), t, Avoid::Leak)?;
    let cp = transform_chain(g, &chain, af.absorption(), t);
    let cost = markov::avoidance_hitting_cost(g, chain.dense(), t, Avoid::Leak)?;
    let hitting_cost: Vec<Option<f64>> = cost.iter().map(|c| c.value()).collect();
    let sources: Vec<usize> = if opts.sources.is_empty() { (0..g.n()).collect() } else { opts.sources.clone() };
    let flows = sources.iter().map(|&s| FlowRow { source: s, flow: node_flows(&af, s, g.n()) }).collect();
    let edges = g
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| cp.reachable[e.src] && e.src != t)
        .map(|(k, e)| EdgeValue { src: e.src, dst: e.dst, p: cp.cp[k] })
        .collect();
    let epsilon = exact.map(|tree| {
        (0..g.n())
            .map(|s| match (cost[s], tree.distance(g, s)) {
                (Reach::Value(u), Some(l)) => Some(u - l),
                _ => None,
            })
            .collect()
    });
    Ok(ContinuumBlock { alpha, edges, hitting_cost, flows, epsilon })
}

/// Evaluates every alpha of the grid for target `t`.
pub fn continuum_sweep(g: &Graph, p: &TransitionMatrix, t: usize, alphas: &[f64], opts: &SweepOptions) -> Result<ContinuumReport> {
    if t >= g.n() {
        return Err(Error::NodeOutOfRange { node: t, n: g.n() });
    }
    for &a in alphas {
        check_alpha(a)?;
    }
    let exact = if opts.with_reference { Some(reference::dijkstra_reduced(g, t, &[])?) } else { None };
    let run = |&alpha: &f64| sweep_point(g, p, t, alpha, opts, exact.as_ref());
    #[cfg(feature = "parallel")]
    let blocks: Result<Vec<_>> = {
        use rayon::prelude::*;
        alphas.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let blocks: Result<Vec<_>> = alphas.iter().map(run).collect();
    Ok(ContinuumReport { target: t, alphas: alphas.to_vec(), blocks: blocks? })
}

impl ContinuumBlock {
    /// Graphviz rendering with the routing probabilities as edge labels;
    /// edges with negligible probability are left out.
    pub fn to_dot(&self, g: &Graph, target: usize) -> String {
        let mut out = format!("digraph continuum {{\n  label=\"alpha = {}\";\n  rankdir=LR;\n", self.alpha);
        for v in 0..g.n() {
            let shape = if v == target { "doublecircle" } else { "circle" };
            out.push_str(&format!("  {v} [shape={shape}];\n"));
        }
        for e in self.edges.iter().filter(|e| e.p >= DOT_EPSILON) {
            out.push_str(&format!("  {} -> {} [label=\"{:.4}\"];\n", e.src, e.dst, e.p));
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::transition_matrix;

    const DIAMOND: &str = "n 4\n0 1 1\n0 2 1\n1 3 1\n2 3 3\n";

    #[test]
    fn bound_examples() {
        assert!((alpha_bound(2, 2.0, 1.0).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(alpha_bound(1, 5.0, 1.0).unwrap(), 1.0);
        let b = alpha_bound(4, 8.0, 1.0).unwrap();
        assert!((b - 1.0 / 262141.0).abs() < 1e-18);
        let approx = 0.25f64.powi(9);
        assert!(b / approx > 0.5 && b / approx < 2.0);
        assert!(matches!(alpha_bound(4, 2000.0, 1.0), Err(Error::BoundUnderflow { .. })));
        assert!(matches!(alpha_bound(0, 2.0, 1.0), Err(Error::InvalidBoundInput(_))));
    }

    #[test]
    fn error_bound_examples() {
        let e = error_upper_bound(1.0 / 7.0, 1.0, 2, 3.0).unwrap();
        assert!((e - 7.0 / 6.0).abs() < 1e-12);
        assert_eq!(error_upper_bound(0.5, 1.0, 1, 4.0).unwrap(), 0.0);
        assert!(matches!(error_upper_bound(1.0, 1.0, 2, 3.0), Err(Error::BoundDiverges)));
        // at the bound the guarantee delta / d_max is met with equality
        for (d, l) in [(2usize, 2.0), (3, 4.0), (4, 8.0)] {
            let a = alpha_bound(d, l, 1.0).unwrap();
            let e = error_upper_bound(a, 1.0, d, l).unwrap();
            assert!(e <= 1.0 / d as f64 * (1.0 + 1e-12), "{d} {l} {e}");
        }
    }

    #[test]
    fn diamond_chain() {
        let g = Graph::parse(DIAMOND).unwrap();
        let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted);
        let a = 1.0 / 7.0;
        let chain = evaporate(&g, &p, a).unwrap();
        assert!((chain.dense().get(0, 1) - 0.5 / 7.0).abs() < 1e-17);
        assert!((chain.dense().get(2, 3) - a.powi(3)).abs() < 1e-17);
        assert!((chain.leak(1) - (1.0 - a)).abs() < 1e-16);
        let one = evaporate(&g, &p, 1.0).unwrap();
        assert_eq!(one.dense(), p.dense());
        assert!(matches!(evaporate(&g, &p, 0.0), Err(Error::InvalidAlpha { .. })));
        assert!(matches!(evaporate(&g, &p, 1e-100), Err(Error::UnderflowRisk { .. })));
    }

    #[test]
    fn diamond_edge_probabilities() {
        let g = Graph::parse(DIAMOND).unwrap();
        let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted);
        let a = 1.0 / 7.0;
        let chain = evaporate(&g, &p, a).unwrap();
        let fo = markov::fundamental(chain.dense(), &[]).unwrap();
        let ep = edge_probabilities(&g, &chain, &fo, 3).unwrap();
        assert!((ep.get(&g, 0, 1).unwrap() - 49.0 / 50.0).abs() < 1e-14);
        assert!((ep.get(&g, 0, 2).unwrap() - 1.0 / 50.0).abs() < 1e-14);
        let af = markov::avoidance_fundamental(chain.dense(), 3, Avoid::Leak).unwrap();
        let tc = transform_chain(&g, &chain, af.absorption(), 3);
        assert!(ep.max_abs_diff(&tc) < 1e-14);
        for i in 0..3 {
            assert!((ep.row_sum(&g, i) - 1.0).abs() < 1e-14);
        }
        let ep0 = edge_probabilities(&g, &chain, &fo, 0).unwrap();
        assert!(!ep0.reachable[3]);
    }

    #[test]
    fn diamond_continuum() {
        let g = Graph::parse(DIAMOND).unwrap();
        let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted);
        let star = alpha_bound(g.d_max(), g.diameter_bound(), g.delta()).unwrap();
        let grid = default_grid(star);
        let opts = SweepOptions { sources: vec![0], with_reference: true };
        let report = continuum_sweep(&g, &p, 3, &grid, &opts).unwrap();
        let u: Vec<f64> = report.blocks.iter().map(|b| b.hitting_cost[0].unwrap()).collect();
        assert!(u.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        assert_eq!(u[0].floor(), 2.0);
        assert!((u[4] - 3.0).abs() < 1e-12);
        let flow = report.blocks[0].flows[0].flow.clone().unwrap();
        assert_eq!(classify_flow(flow[1], FLOW_TOLERANCE), FlowClass::One);
        assert_eq!(classify_flow(flow[2], FLOW_TOLERANCE), FlowClass::Zero);
        let eps = report.blocks[0].epsilon.as_ref().unwrap()[0].unwrap();
        assert!(eps > 0.0 && eps < 0.5);
        // at alpha = 1 the routing probabilities are the original ones
        let last = &report.blocks[4];
        for e in &last.edges {
            assert!((e.p - p.get(e.src, e.dst)).abs() < 1e-12);
        }
        let dot = last.to_dot(&g, 3);
        assert!(dot.contains("0 -> 1 [label=\"0.5000\"]"));
    }

    #[test]
    fn symmetric_diamond_flows() {
        let g = Graph::parse("n 4\n0 1 1\n0 2 1\n1 3 1\n2 3 1\n").unwrap();
        let p = transition_matrix(&g, TransitionPolicy::Uniform);
        let star = alpha_bound(g.d_max(), g.diameter_bound(), g.delta()).unwrap();
        let opts = SweepOptions { sources: vec![0], with_reference: false };
        let report = continuum_sweep(&g, &p, 3, &[star], &opts).unwrap();
        let flow = report.blocks[0].flows[0].flow.clone().unwrap();
        assert!((flow[1] - 0.5).abs() < 1e-12 && (flow[2] - 0.5).abs() < 1e-12);
        assert_eq!(classify_flow(flow[1], FLOW_TOLERANCE), FlowClass::Interior);
    }

    #[test]
    fn default_grid_is_sorted() {
        assert_eq!(default_grid(1.0 / 7.0), vec![1.0 / 7.0, 0.3, 0.6, 0.9, 1.0]);
        assert_eq!(default_grid(1.0), vec![0.3, 0.6, 0.9, 1.0]);
    }
}
