//! Absorbing-chain metrics: fundamental matrices, hitting times and costs,
//! absorption probabilities and their avoidance-conditioned variants.
//!
//! Every matrix carries the node ids of its rows and columns; results are
//! exposed by node id so that blocks with deleted rows can't be misaligned.
//!
//! The chains here may be substochastic. A row summing to less than one leaks
//! the missing mass to an implicit absorbing node, which is how the
//! evaporation node `o` is represented.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{Lu, Matrix};

/// Rows whose sum falls below `1 - LEAK_TOLERANCE` count as leaking.
const LEAK_TOLERANCE: f64 = 1e-12;

/// `F = (I - P_TT)^{-1}` for a fixed absorbing set.
#[derive(Clone, Debug)]
pub struct FundamentalMatrix {
    n: usize,
    f: Matrix<f64>,
    absorbing: Vec<usize>,
    transient: Vec<usize>,
    index: Vec<Option<usize>>,
    residual: f64,
}

impl FundamentalMatrix {
    /// Total number of nodes in the underlying chain.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Matrix<f64> {
        &self.f
    }

    pub fn absorbing(&self) -> &[usize] {
        &self.absorbing
    }

    /// Transient node ids in row order.
    pub fn transient(&self) -> &[usize] {
        &self.transient
    }

    pub fn index_of(&self, node: usize) -> Option<usize> {
        self.index.get(node).copied().flatten()
    }

    /// Entry for transient nodes `s` and `m`.
    pub fn get(&self, s: usize, m: usize) -> Option<f64> {
        Some(*self.f.get(self.index_of(s)?, self.index_of(m)?))
    }

    /// `max |F (I - P_TT) - I|` measured when the matrix was built.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

fn node_flags(n: usize, nodes: &[usize]) -> Result<Vec<bool>> {
    let mut flags = vec![false; n];
    for &v in nodes {
        if v >= n {
            return Err(Error::NodeOutOfRange { node: v, n });
        }
        if flags[v] {
            return Err(Error::OverlappingSets { node: v });
        }
        flags[v] = true;
    }
    Ok(flags)
}

/// Nodes that can reach a node flagged in `goal` through positive entries of
/// `p`, never stepping onto a node flagged in `blocked`.
fn can_reach(p: &Matrix<f64>, goal: &[bool], blocked: &[bool]) -> Vec<bool> {
    let n = p.rows();
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, &x) in p.row(i).iter().enumerate() {
            if x > 0.0 {
                incoming[j].push(i);
            }
        }
    }
    let mut seen = goal.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&v| goal[v]).collect();
    while let Some(v) = stack.pop() {
        for &u in &incoming[v] {
            if !seen[u] && !blocked[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen
}

fn leaks(p: &Matrix<f64>, i: usize) -> bool {
    p.row(i).iter().sum::<f64>() < 1.0 - LEAK_TOLERANCE
}

/// Fundamental matrix over the nodes outside `absorbing`. Rows of `p` that
/// sum to less than one leak into an implicit absorbing state.
pub fn fundamental(p: &Matrix<f64>, absorbing: &[usize]) -> Result<FundamentalMatrix> {
    let n = p.rows();
    let is_abs = node_flags(n, absorbing)?;
    let transient: Vec<usize> = (0..n).filter(|&v| !is_abs[v]).collect();
    fundamental_over(p, absorbing.to_vec(), transient)
}

fn fundamental_over(p: &Matrix<f64>, absorbing: Vec<usize>, transient: Vec<usize>) -> Result<FundamentalMatrix> {
    let n = p.rows();
    let mut index = vec![None; n];
    for (k, &v) in transient.iter().enumerate() {
        index[v] = Some(k);
    }
    let mut exits = vec![false; n];
    for v in 0..n {
        exits[v] = index[v].is_none() || leaks(p, v);
    }
    let reach = can_reach(p, &exits, &vec![false; n]);
    let stuck: Vec<usize> = transient.iter().copied().filter(|&v| !reach[v]).collect();
    if !stuck.is_empty() {
        return Err(Error::UnreachableTransient { nodes: stuck });
    }

    let k = transient.len();
    let p_tt = p.select(&transient, &transient);
    let system = Matrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { 0.0 } - p_tt.get(i, j));
    let f = Lu::factor(&system)?.inverse();
    let residual = f.matmul(&system).max_abs_diff(&Matrix::identity(k, ()));
    Ok(FundamentalMatrix { n, f, absorbing, transient, index, residual })
}

/// Expected number of steps before absorption, indexed by node id; zero on
/// absorbing nodes.
pub fn hitting_time(fm: &FundamentalMatrix) -> Vec<f64> {
    let mut h = vec![0.0; fm.n];
    for (k, &v) in fm.transient.iter().enumerate() {
        h[v] = fm.f.row(k).iter().sum();
    }
    h
}

/// Expected cost of the next step from each node: `r_i = sum_j p_ij w_ij`.
pub fn step_costs(g: &Graph, p: &Matrix<f64>) -> Vec<f64> {
    (0..g.n()).map(|i| g.out_edges(i).iter().map(|e| p.get(i, e.dst) * e.weight).sum()).collect()
}

/// Expected accumulated cost before absorption, `U = F r`, indexed by node
/// id; zero on absorbing nodes.
pub fn hitting_cost(fm: &FundamentalMatrix, r: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; fm.n];
    for (k, &v) in fm.transient.iter().enumerate() {
        u[v] = fm.f.row(k).iter().zip(&fm.transient).map(|(f, &m)| f * r[m]).sum();
    }
    u
}

/// `Q = F P_TA`: probability of being absorbed by each absorbing node.
#[derive(Clone, Debug)]
pub struct AbsorptionMatrix {
    q: Matrix<f64>,
    rows: Vec<Option<usize>>,
    columns: Vec<usize>,
}

impl AbsorptionMatrix {
    pub fn matrix(&self) -> &Matrix<f64> {
        &self.q
    }

    /// Absorbing node ids in column order.
    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    /// Probability that a walk from transient `i` ends in absorbing `a`.
    pub fn get(&self, i: usize, a: usize) -> Option<f64> {
        let col = self.columns.iter().position(|&c| c == a)?;
        Some(*self.q.get((*self.rows.get(i)?)?, col))
    }
}

pub fn absorption(fm: &FundamentalMatrix, p: &Matrix<f64>) -> AbsorptionMatrix {
    let p_ta = p.select(&fm.transient, &fm.absorbing);
    AbsorptionMatrix { q: fm.f.matmul(&p_ta), rows: fm.index.clone(), columns: fm.absorbing.clone() }
}

/// `Q_i^{j, not S} = F_ij / F_jj`, indexed by node id. Absorbing nodes of
/// `fm` get zero.
pub fn absorption_from_fundamental(fm: &FundamentalMatrix, j: usize) -> Result<Vec<f64>> {
    let jj = fm.index_of(j).ok_or(Error::NotTransient { node: j })?;
    let d = *fm.f.get(jj, jj);
    let mut q = vec![0.0; fm.n];
    for (k, &v) in fm.transient.iter().enumerate() {
        q[v] = fm.f.get(k, jj) / d;
    }
    Ok(q)
}

/// Fundamental matrix for `S1 ∪ S2` obtained from the one for `S1` by
/// inverting only the `|S2| x |S2|` block.
pub fn incremental_fundamental(fm: &FundamentalMatrix, s2: &[usize]) -> Result<FundamentalMatrix> {
    let mut drop = vec![false; fm.n];
    for &v in s2 {
        if v >= fm.n {
            return Err(Error::NodeOutOfRange { node: v, n: fm.n });
        }
        if fm.absorbing.contains(&v) || drop[v] {
            return Err(Error::OverlappingSets { node: v });
        }
        drop[v] = true;
    }
    let s2_idx: Vec<usize> = s2.iter().map(|&v| fm.index_of(v).ok_or(Error::NotTransient { node: v })).collect::<Result<_>>()?;
    let keep: Vec<usize> = fm.transient.iter().copied().filter(|&v| !drop[v]).collect();
    let keep_idx: Vec<usize> = keep.iter().map(|&v| fm.index_of(v).expect("transient")).collect();

    let mut f = fm.f.select(&keep_idx, &keep_idx);
    if !s2.is_empty() {
        let block = fm.f.select(&s2_idx, &s2_idx);
        let right = fm.f.select(&s2_idx, &keep_idx);
        let x = Lu::factor(&block)?.solve(&right);
        let left = fm.f.select(&keep_idx, &s2_idx);
        let correction = left.matmul(&x);
        for i in 0..keep.len() {
            for j in 0..keep.len() {
                *f.get_mut(i, j) -= correction.get(i, j);
            }
        }
    }

    let mut absorbing = fm.absorbing.clone();
    absorbing.extend_from_slice(s2);
    let mut index = vec![None; fm.n];
    for (k, &v) in keep.iter().enumerate() {
        index[v] = Some(k);
    }
    Ok(FundamentalMatrix { n: fm.n, f, absorbing, transient: keep, index, residual: fm.residual })
}

/// What a walk must avoid before reaching the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Avoid {
    /// The implicit leak state (evaporation node `o`).
    Leak,
    /// A specific node, treated as absorbing.
    Node(usize),
}

/// A conditioned quantity that only exists if the target can be reached.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Reach {
    Value(f64),
    Unreachable,
}

impl Reach {
    pub fn value(self) -> Option<f64> {
        match self {
            Reach::Value(v) => Some(v),
            Reach::Unreachable => None,
        }
    }
}

/// `F^{t, not k}`: expected visits conditioned on hitting `t` before `k`.
///
/// Rows and columns cover only the nodes that can reach `t` without touching
/// `k`; every other node has `Q = 0` and is reported unreachable.
#[derive(Clone, Debug)]
pub struct AvoidanceFundamental {
    target: usize,
    avoid: Avoid,
    nodes: Vec<usize>,
    index: Vec<Option<usize>>,
    f: Matrix<f64>,
    q: Vec<f64>,
}

impl AvoidanceFundamental {
    pub fn target(&self) -> usize {
        self.target
    }

    pub fn avoid(&self) -> Avoid {
        self.avoid
    }

    /// Nodes other than the target from which the target is reachable.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn matrix(&self) -> &Matrix<f64> {
        &self.f
    }

    /// `Q_i^{t, not k}` by node id; one at the target.
    pub fn absorption(&self) -> &[f64] {
        &self.q
    }

    pub fn is_reachable(&self, s: usize) -> bool {
        s == self.target || self.index[s].is_some()
    }

    /// Conditioned expected visits to `m` from `s`; the target itself is
    /// absorbing and counts zero visits.
    pub fn get(&self, s: usize, m: usize) -> Reach {
        match (self.index[s], self.index[m]) {
            (None, _) if s == self.target => Reach::Value(0.0),
            (None, _) => Reach::Unreachable,
            (Some(_), None) => Reach::Value(0.0),
            (Some(i), Some(j)) => Reach::Value(*self.f.get(i, j)),
        }
    }

    pub fn max_abs_diff(&self, other: &AvoidanceFundamental) -> f64 {
        assert_eq!(self.nodes, other.nodes, "avoidance matrices cover different nodes");
        self.f.max_abs_diff(&other.f)
    }
}

struct AvoidanceSetup {
    absorbing: Vec<usize>,
    nodes: Vec<usize>,
    index: Vec<Option<usize>>,
}

fn avoidance_setup(p: &Matrix<f64>, t: usize, avoid: Avoid) -> Result<AvoidanceSetup> {
    let n = p.rows();
    let mut absorbing = vec![t];
    if let Avoid::Node(k) = avoid {
        absorbing.push(k);
    }
    let is_abs = node_flags(n, &absorbing)?;
    let mut goal = vec![false; n];
    goal[t] = true;
    let reach = can_reach(p, &goal, &is_abs);
    let nodes: Vec<usize> = (0..n).filter(|&v| reach[v] && !is_abs[v]).collect();
    let mut index = vec![None; n];
    for (k, &v) in nodes.iter().enumerate() {
        index[v] = Some(k);
    }
    Ok(AvoidanceSetup { absorbing, nodes, index })
}

/// Conditioned fundamental matrix via `F^{t,k}_{sm} Q_m / Q_s`.
pub fn avoidance_fundamental(p: &Matrix<f64>, t: usize, avoid: Avoid) -> Result<AvoidanceFundamental> {
    let setup = avoidance_setup(p, t, avoid)?;
    let fm = fundamental_over(p, setup.absorbing.clone(), setup.nodes.clone())?;
    let n = p.rows();
    // Q_i = sum_m F_im p_mt over the restricted block
    let p_t: Vec<f64> = setup.nodes.iter().map(|&m| *p.get(m, t)).collect();
    let mut q = vec![0.0; n];
    q[t] = 1.0;
    for (i, &v) in setup.nodes.iter().enumerate() {
        q[v] = fm.f.row(i).iter().zip(&p_t).map(|(a, b)| a * b).sum();
    }
    let k = setup.nodes.len();
    let f = Matrix::from_fn(k, k, |i, j| {
        let (s, m) = (setup.nodes[i], setup.nodes[j]);
        fm.f.get(i, j) * q[m] / q[s]
    });
    Ok(AvoidanceFundamental { target: t, avoid, nodes: setup.nodes, index: setup.index, f, q })
}

/// Same matrix through the classical fundamental matrix of the chain where
/// only the avoided state absorbs:
/// `F^{t,not k}_{sm} = F^k_{mt} (F^k_{sm} / F^k_{st} - F^k_{tm} / F^k_{tt})`.
pub fn avoidance_fundamental_classical(p: &Matrix<f64>, t: usize, avoid: Avoid) -> Result<AvoidanceFundamental> {
    let setup = avoidance_setup(p, t, avoid)?;
    let absorbing: Vec<usize> = match avoid {
        Avoid::Leak => vec![],
        Avoid::Node(k) => vec![k],
    };
    let fk = fundamental(p, &absorbing)?;
    let at = |a: usize, b: usize| fk.get(a, b).expect("transient in the avoided-only chain");
    let n = p.rows();
    let mut q = vec![0.0; n];
    for &v in setup.nodes.iter().chain([&t]) {
        q[v] = at(v, t) / at(t, t);
    }
    let k = setup.nodes.len();
    let f = Matrix::from_fn(k, k, |i, j| {
        let (s, m) = (setup.nodes[i], setup.nodes[j]);
        at(m, t) * (at(s, m) / at(s, t) - at(t, m) / at(t, t))
    });
    Ok(AvoidanceFundamental { target: t, avoid, nodes: setup.nodes, index: setup.index, f, q })
}

/// Conditioned expected number of steps to `t`, by node id.
pub fn avoidance_hitting_time(p: &Matrix<f64>, t: usize, avoid: Avoid) -> Result<Vec<Reach>> {
    let af = avoidance_fundamental(p, t, avoid)?;
    Ok(conditioned_sum(&af, |_| 1.0))
}

/// Conditioned expected cost to `t`, by node id, with
/// `r_m = sum_i p_mi w_mi Q_i / Q_m`.
pub fn avoidance_hitting_cost(g: &Graph, p: &Matrix<f64>, t: usize, avoid: Avoid) -> Result<Vec<Reach>> {
    let af = avoidance_fundamental(p, t, avoid)?;
    let q = af.absorption();
    let r: Vec<f64> = (0..g.n())
        .map(|m| {
            if q[m] == 0.0 {
                return 0.0;
            }
            g.out_edges(m).iter().map(|e| p.get(m, e.dst) * e.weight * q[e.dst]).sum::<f64>() / q[m]
        })
        .collect();
    Ok(conditioned_sum(&af, |m| r[m]))
}

fn conditioned_sum(af: &AvoidanceFundamental, weight: impl Fn(usize) -> f64) -> Vec<Reach> {
    let n = af.index.len();
    (0..n)
        .map(|s| match af.index[s] {
            Some(i) => Reach::Value(af.f.row(i).iter().zip(&af.nodes).map(|(f, &m)| f * weight(m)).sum()),
            None if s == af.target => Reach::Value(0.0),
            None => Reach::Unreachable,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaporation::evaporate;
    use crate::graph::{transition_matrix, TransitionPolicy};

    const DIAMOND: &str = "n 4\n0 1 1\n0 2 1\n1 3 1\n2 3 3\n";

    fn diamond() -> (Graph, Matrix<f64>) {
        let g = Graph::parse(DIAMOND).unwrap();
        let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted).dense().clone();
        (g, p)
    }

    #[test]
    fn chain_fundamental() {
        let g = Graph::parse("n 3\n0 1 1\n1 2 1\n").unwrap();
        let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted);
        let fm = fundamental(p.dense(), &[2]).unwrap();
        assert_eq!(fm.matrix().as_slice(), &[1.0, 1.0, 0.0, 1.0]);
        assert_eq!(hitting_time(&fm)[0], 2.0);
        assert_eq!(hitting_time(&fm)[2], 0.0);
    }

    #[test]
    fn diamond_fundamental_and_costs() {
        let (g, p) = diamond();
        let fm = fundamental(&p, &[3]).unwrap();
        assert_eq!(fm.get(0, 0), Some(1.0));
        assert_eq!(fm.get(0, 1), Some(0.5));
        assert_eq!(fm.get(0, 2), Some(0.5));
        assert_eq!(fm.get(1, 1), Some(1.0));
        assert_eq!(fm.get(1, 2), Some(0.0));
        assert_eq!(fm.get(3, 3), None);
        assert_eq!(hitting_time(&fm)[0], 2.0);
        let r = step_costs(&g, &p);
        assert_eq!(r, vec![1.0, 1.0, 3.0, 0.0]);
        assert_eq!(hitting_cost(&fm, &r)[0], 3.0);
        assert!(fm.residual() < 1e-15);
    }

    #[test]
    fn exit_free_cycle_is_rejected() {
        let g = Graph::parse("n 4\n0 1 1\n1 0 1\n2 3 1\n").unwrap();
        let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted);
        match fundamental(p.dense(), &[3]) {
            Err(Error::UnreachableTransient { nodes }) => assert_eq!(nodes, vec![0, 1]),
            other => panic!("expected unreachable transient error, got {other:?}"),
        }
    }

    #[test]
    fn absorption_examples() {
        let g = Graph::parse("n 3\n0 1 1\n0 2 1\n").unwrap();
        let p = transition_matrix(&g, TransitionPolicy::Uniform);
        let fm = fundamental(p.dense(), &[1, 2]).unwrap();
        let q = absorption(&fm, p.dense());
        assert_eq!(q.get(0, 1), Some(0.5));
        assert_eq!(q.get(0, 2), Some(0.5));

        let (_, p) = diamond();
        let fm = fundamental(&p, &[1, 3]).unwrap();
        let q = absorption(&fm, &p);
        assert_eq!(q.get(0, 1), Some(0.5));
        assert_eq!(q.get(2, 3), Some(1.0));
    }

    #[test]
    fn diamond_avoidance_closed_forms() {
        let (g, p) = diamond();
        let a = 1.0 / 7.0;
        let pa = evaporate(&g, &transition_matrix(&g, TransitionPolicy::DegreeWeighted), a).unwrap();
        let af = avoidance_fundamental(pa.dense(), 3, Avoid::Leak).unwrap();
        let expected = 1.0 / (1.0 + a * a);
        assert!((af.get(0, 1).value().unwrap() - expected).abs() < 1e-15);
        let classical = avoidance_fundamental_classical(pa.dense(), 3, Avoid::Leak).unwrap();
        assert!(af.max_abs_diff(&classical) < 1e-14);

        // both surviving walks take two steps; only their costs differ
        let h = avoidance_hitting_time(pa.dense(), 3, Avoid::Leak).unwrap();
        assert!((h[0].value().unwrap() - 2.0).abs() < 1e-14);
        let u0 = (2.0 + 4.0 * a * a) / (1.0 + a * a);
        assert!((u0 - 2.04).abs() < 1e-12);
        let u = avoidance_hitting_cost(&g, pa.dense(), 3, Avoid::Leak).unwrap();
        assert!((u[0].value().unwrap() - u0).abs() < 1e-14);
        assert_eq!(u[3], Reach::Value(0.0));

        // nothing is reachable "up" the diamond
        let af = avoidance_fundamental(&p, 0, Avoid::Leak).unwrap();
        assert_eq!(af.get(3, 0), Reach::Unreachable);
    }

    #[test]
    fn avoiding_the_only_path() {
        let g = Graph::parse("n 3\n0 1 1\n1 2 1\n").unwrap();
        let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted);
        let h = avoidance_hitting_time(p.dense(), 2, Avoid::Node(1)).unwrap();
        assert_eq!(h[0], Reach::Unreachable);
        let h = avoidance_hitting_time(p.dense(), 2, Avoid::Leak).unwrap();
        assert_eq!(h[0], Reach::Value(2.0));
    }

    #[test]
    fn vacuous_avoidance_matches_classical() {
        // node 3 is a separate sink no walk can hit
        let g = Graph::parse("n 4\n0 1 1\n1 2 1\n").unwrap();
        let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted);
        let fm = fundamental(p.dense(), &[2, 3]).unwrap();
        let af = avoidance_fundamental(p.dense(), 2, Avoid::Node(3)).unwrap();
        for s in [0, 1] {
            for m in [0, 1] {
                assert_eq!(af.get(s, m).value(), fm.get(s, m));
            }
        }
    }

    #[test]
    fn incremental_diamond() {
        let (g, _) = diamond();
        let a = 1.0 / 7.0;
        let pa = evaporate(&g, &transition_matrix(&g, TransitionPolicy::DegreeWeighted), a).unwrap();
        let fo = fundamental(pa.dense(), &[]).unwrap();
        let f1 = incremental_fundamental(&fo, &[1]).unwrap();
        let expected = 0.5 * a.powi(4);
        assert!((f1.get(0, 3).unwrap() - expected).abs() < 1e-16);
        let direct = fundamental(pa.dense(), &[1]).unwrap();
        assert!(f1.matrix().max_abs_diff(direct.matrix()) < 1e-15);
        let same = incremental_fundamental(&fo, &[]).unwrap();
        assert_eq!(same.matrix(), fo.matrix());
        assert!(matches!(incremental_fundamental(&f1, &[1]), Err(Error::OverlappingSets { node: 1 })));
    }

    #[test]
    fn avoidance_metrics_on_the_diamond() {
        let (g, _) = diamond();
        let a = 1.0 / 7.0;
        let pa = evaporate(&g, &transition_matrix(&g, TransitionPolicy::DegreeWeighted), a).unwrap();
        let fo = fundamental(pa.dense(), &[]).unwrap();
        let q = absorption_from_fundamental(&fo, 3).unwrap();
        let expected = 0.5 * a * a + 0.5 * a.powi(4);
        assert!((q[0] - expected).abs() < 1e-16);
        assert_eq!(q[3], 1.0);
    }
}
