use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use dso_core::bench::{self, BenchConfig};
use dso_core::evaporation::{self, classify_flow, default_grid, edge_probabilities, evaporate, node_flows_in, transform_chain, SweepOptions};
use dso_core::generate::{instance_rng, random_graph, GraphSpec};
use dso_core::graph::{transition_matrix, Graph, TransitionPolicy};
use dso_core::linalg::instrument;
use dso_core::markov::{self, avoidance_fundamental, avoidance_hitting_cost, fundamental, incremental_fundamental, Avoid};
use dso_core::oracle::{self, graph_alpha_bound, BuildOptions, Oracle, Query, QueryOptions};
use dso_core::reference::{dijkstra_reduced, enumerate_walks, shortest_path_flows};
use dso_core::verify::{self, VerifyConfig};

const SEED: u64 = 20240611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn graph(seed: u64, index: u64, spec: &GraphSpec) -> Graph {
    random_graph(&mut instance_rng(seed, index), spec).with_exact_diameter()
}

/// Nodes that reach `t`, excluding `t`.
fn sources(g: &Graph, t: usize) -> Vec<usize> {
    let tree = dijkstra_reduced(g, t, &[]).unwrap();
    (0..g.n()).filter(|&s| s != t && tree.distance_units[s].is_some()).collect()
}

/// Target reached by the most nodes; ties go to the smallest id.
fn busiest_target(g: &Graph) -> usize {
    (0..g.n()).max_by_key(|&t| (sources(g, t).len(), std::cmp::Reverse(t))).unwrap()
}

fn oracle_correctness(report: &verify::VerifyReport, elapsed: f64) -> Outcome {
    let mismatches = report.mismatch_count();
    let first = report.instances.iter().flat_map(|i| &i.mismatches).next();
    let detail = format!(
        "{} instances, {} queries, {} node checks, {mismatches} mismatches, {elapsed:.1}s{}",
        report.instances.len(),
        report.query_count(),
        report.checked_nodes(),
        first.map_or(String::new(), |m| format!(" (first: {m:?})"))
    );
    outcome(mismatches == 0 && elapsed < 120.0 && report.instances.len() == 300, detail)
}

fn alpha_guarantee(report: &verify::VerifyReport) -> Outcome {
    let checked: usize = report.instances.iter().map(|i| i.epsilon.checked).sum();
    let min = report.instances.iter().map(|i| i.epsilon.min).fold(f64::INFINITY, f64::min);
    let ratio = report.instances.iter().map(|i| i.epsilon.max_ratio).fold(0.0, f64::max);
    let bound_ratio = report.instances.iter().map(|i| i.epsilon.max_bound_ratio).fold(0.0, f64::max);
    let violations: Vec<&String> = report.instances.iter().flat_map(|i| &i.epsilon.violations).collect();
    let detail = format!(
        "{checked} pairs, min eps {min:e}, max eps/(delta/d_max) {ratio:.3e}, max eps/bound {bound_ratio:.3e}, {} violations{}",
        violations.len(),
        violations.first().map_or(String::new(), |v| format!(" (first: {v})"))
    );
    outcome(checked > 0 && violations.is_empty(), detail)
}

fn incremental_update() -> Outcome {
    let spec = GraphSpec::default().with_max_n(20);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for i in 0..200u64 {
        let mut rng = instance_rng(SEED + 2, i);
        let g = random_graph(&mut rng, &spec);
        let alpha = rng.gen_range(0.2..0.95);
        let p = evaporate(&g, &transition_matrix(&g, TransitionPolicy::DegreeWeighted), alpha).unwrap();
        let mut nodes: Vec<usize> = (0..g.n()).collect();
        nodes.shuffle(&mut rng);
        let k1 = rng.gen_range(0..=g.n() / 3);
        let k2 = rng.gen_range(1..=(g.n() - k1 - 1).min(6));
        let (s1, rest) = nodes.split_at(k1);
        let s2 = &rest[..k2];
        let fm = fundamental(p.dense(), s1).unwrap();
        let inc = incremental_fundamental(&fm, s2).unwrap();
        let union: Vec<usize> = s1.iter().chain(s2).copied().collect();
        let full = fundamental(p.dense(), &union).unwrap();
        let scale = full.matrix().as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut err = 0.0f64;
        for &a in full.transient() {
            for &b in full.transient() {
                err = err.max((inc.get(a, b).unwrap() - full.get(a, b).unwrap()).abs());
            }
        }
        worst = worst.max(err / scale);
        cases += 1;
    }
    outcome(cases == 200 && worst < 1e-9, format!("{cases} cases, max relative error {worst:.3e}"))
}

fn continuum() -> Outcome {
    let spec = GraphSpec::default();
    let (mut worst_drop, mut worst_boundary, mut boundary_checks) = (0.0f64, 0.0f64, 0);
    for i in 0..50u64 {
        let g = graph(SEED + 3, i, &spec);
        let t = busiest_target(&g);
        let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted);
        let grid = default_grid(graph_alpha_bound(&g).unwrap());
        let report = evaporation::continuum_sweep(&g, &p, t, &grid, &SweepOptions::default()).unwrap();
        for s in 0..g.n() {
            let u: Vec<f64> = report.blocks.iter().filter_map(|b| b.hitting_cost[s]).collect();
            for w in u.windows(2) {
                worst_drop = worst_drop.max(w[0] - w[1]);
            }
        }

        // Sources whose walks hit t surely at alpha = 1 see the classical cost.
        let at_one = avoidance_fundamental(p.dense(), t, Avoid::Leak).unwrap();
        let last = report.blocks.last().unwrap();
        for s in sources(&g, t) {
            if (at_one.absorption()[s] - 1.0).abs() > 1e-12 {
                continue;
            }
            let reach_from_s = dijkstra_reach(&g, s);
            let absorbing: Vec<usize> = (0..g.n()).filter(|&v| v == t || !reach_from_s[v]).collect();
            let fm = fundamental(p.dense(), &absorbing).unwrap();
            let classical = markov::hitting_cost(&fm, &markov::step_costs(&g, p.dense()))[s];
            worst_boundary = worst_boundary.max((last.hitting_cost[s].unwrap() - classical).abs());
            boundary_checks += 1;
        }
    }
    let detail = format!(
        "50 graphs, largest decrease {worst_drop:.3e}, {boundary_checks} alpha=1 checks with max |U - classical| {worst_boundary:.3e}"
    );
    outcome(worst_drop <= 1e-9 && worst_boundary < 1e-9 && boundary_checks > 0, detail)
}

/// Nodes reachable from `s` (forward BFS).
fn dijkstra_reach(g: &Graph, s: usize) -> Vec<bool> {
    let mut seen = vec![false; g.n()];
    seen[s] = true;
    let mut stack = vec![s];
    while let Some(v) = stack.pop() {
        for e in g.out_edges(v) {
            if !seen[e.dst] {
                seen[e.dst] = true;
                stack.push(e.dst);
            }
        }
    }
    seen
}

fn node_flow_trichotomy() -> Outcome {
    let spec = GraphSpec::default().with_max_n(15);
    let (mut pairs, mut disagreements, mut multi_instances, mut worst) = (0, 0, 0, 0.0f64);
    let mut first = None;
    let mut alpha_max = 0.0f64;
    for i in 0..50u64 {
        // default (n - 1) w_max diameter bound; its alpha needs multiprecision
        let g = random_graph(&mut instance_rng(SEED + 5, i), &spec);
        let t = busiest_target(&g);
        let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted);
        let o = oracle::preprocess_mp(&g, &BuildOptions::default()).unwrap();
        alpha_max = alpha_max.max(o.alpha());
        let mut multiple = false;
        for s in sources(&g, t) {
            let flows = node_flows_in(o.fundamental(), s, t).unwrap();
            let exact = shortest_path_flows(&g, &p, s, t).unwrap();
            pairs += 1;
            for m in 0..g.n() {
                let (a, b) = (classify_flow(flows[m], 1e-4), classify_flow(exact[m], 1e-4));
                worst = worst.max((flows[m] - exact[m]).abs());
                if b == evaporation::FlowClass::Interior {
                    multiple = true;
                }
                if a != b {
                    disagreements += 1;
                    first.get_or_insert(format!("instance {i} s={s} m={m}: {} vs {}", flows[m], exact[m]));
                }
            }
        }
        multi_instances += usize::from(multiple);
    }
    let detail = format!(
        "{pairs} source/target pairs at alpha <= {alpha_max:.2e}, {disagreements} class disagreements, max |flow - exact| {worst:.3e}, {multi_instances} instances with multiple shortest paths{}",
        first.map_or(String::new(), |f| format!(" (first: {f})"))
    );
    outcome(disagreements == 0 && multi_instances >= 10, detail)
}

fn transformation() -> Outcome {
    let spec = GraphSpec::default().with_max_n(20);
    let (mut worst_row, mut worst_diff, mut rows) = (0.0f64, 0.0f64, 0);
    for i in 0..100u64 {
        let mut rng = instance_rng(SEED + 6, i);
        let g = random_graph(&mut rng, &spec).with_exact_diameter();
        let t = busiest_target(&g);
        let grid = default_grid(graph_alpha_bound(&g).unwrap());
        let alpha = grid[rng.gen_range(0..grid.len() - 1)];
        let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted);
        let chain = evaporate(&g, &p, alpha).unwrap();
        let af = avoidance_fundamental(chain.dense(), t, Avoid::Leak).unwrap();
        let via_q = transform_chain(&g, &chain, af.absorption(), t);
        let f_o = fundamental(chain.dense(), &[]).unwrap();
        let via_f = edge_probabilities(&g, &chain, &f_o, t).unwrap();
        for s in (0..g.n()).filter(|&s| s != t && via_q.reachable[s]) {
            worst_row = worst_row.max((via_q.row_sum(&g, s) - 1.0).abs());
            rows += 1;
        }
        worst_diff = worst_diff.max(via_q.max_abs_diff(&via_f));
    }
    let detail = format!("100 instances, {rows} rows, max |row sum - 1| {worst_row:.3e}, max |F-form - Q-form| {worst_diff:.3e}");
    outcome(worst_row < 1e-9 && worst_diff < 1e-12, detail)
}

fn decomposition() -> Outcome {
    let spec = GraphSpec { max_n: 8, max_out_degree: 3, ..GraphSpec::default() };
    let (mut accepted, mut skipped, mut worst) = (0, 0, 0.0f64);
    let mut index = 0u64;
    while accepted < 30 && index < 1000 {
        let mut rng = instance_rng(SEED + 7, index);
        index += 1;
        let g = random_graph(&mut rng, &spec);
        let t = busiest_target(&g);
        let alpha = rng.gen_range(0.05..0.4);
        let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted);
        let chain = evaporate(&g, &p, alpha).unwrap();
        let u = avoidance_hitting_cost(&g, chain.dense(), t, Avoid::Leak).unwrap();
        let mut ok = true;
        let mut local = 0.0f64;
        for s in sources(&g, t) {
            let walks = enumerate_walks(&g, &p, &chain, s, t, 400);
            if walks.residual >= 1e-12 {
                ok = false;
                break;
            }
            let matrix = u[s].value().unwrap();
            local = local.max((walks.decomposed_cost().unwrap() - matrix).abs());
            local = local.max((walks.hitting_cost().unwrap() - matrix).abs());
        }
        if ok {
            accepted += 1;
            worst = worst.max(local);
        } else {
            skipped += 1;
        }
    }
    let detail = format!("{accepted} instances ({skipped} skipped for truncation residual), max |U_walks - U_matrix| {worst:.3e}");
    outcome(accepted == 30 && worst < 1e-9, detail)
}

fn persistence() -> Outcome {
    let g = graph(SEED + 8, 0, &GraphSpec::default().with_max_n(20));
    let o = oracle::preprocess(&g, &BuildOptions::default()).unwrap();
    let bytes = o.to_bytes();
    let loaded = Oracle::from_bytes(&bytes).unwrap();
    let same_bytes = loaded.to_bytes() == bytes;
    let same_matrix = loaded.fundamental().as_slice().iter().zip(o.fundamental().as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
    let mut rng = instance_rng(SEED + 8, 1);
    let mut detected = 0;
    for _ in 0..50 {
        let mut bad = bytes.clone();
        let pos = rng.gen_range(0..bad.len());
        bad[pos] ^= rng.gen_range(1..=255u8);
        detected += usize::from(Oracle::from_bytes(&bad).is_err());
    }
    let detail = format!("{} bytes, round trip identical: {}, corruptions detected {detected}/50", bytes.len(), same_bytes && same_matrix);
    outcome(same_bytes && same_matrix && detected == 50, detail)
}

fn query_structure() -> Outcome {
    let cfg = BenchConfig { n: 500, failure_sizes: vec![5], trials: 9, ..BenchConfig::default() };
    let (g, o, _, _) = bench::setup(&cfg).unwrap();
    let mut rng = instance_rng(SEED + 9, 0);
    let mut logs_ok = true;
    for _ in 0..20 {
        let t = rng.gen_range(0..g.n());
        let f = dso_core::generate::failure_set(&mut rng, g.n(), t, 5);
        instrument::reset();
        o.query_with(&Query::new(t, f), &QueryOptions { raw_cost: false }).unwrap();
        logs_ok &= instrument::factorizations() == vec![5];
    }
    let row = bench::run(&cfg).unwrap().remove(0);
    let speedup = row.preprocess_ms / row.query_ms;
    let detail = format!(
        "factorizations per query exactly [5]: {logs_ok}; n={} m={} median query {:.3} ms, preprocess {:.1} ms, ratio {speedup:.0}x",
        row.n, row.edges, row.query_ms, row.preprocess_ms
    );
    outcome(logs_ok && row.max_factor_dim == 5 && speedup >= 10.0, detail)
}

fn main() -> ExitCode {
    let start = Instant::now();
    let report = verify::run(&VerifyConfig::default());
    let elapsed = start.elapsed().as_secs_f64();
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            println!("criterion 1 FAIL: verification aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    let results = [
        ("oracle correctness", oracle_correctness(&report, elapsed)),
        ("incremental fundamental", incremental_update()),
        ("continuum monotonicity and boundary", continuum()),
        ("alpha-bound guarantee", alpha_guarantee(&report)),
        ("node-flow trichotomy", node_flow_trichotomy()),
        ("chain transformation", transformation()),
        ("walk decomposition", decomposition()),
        ("persistence", persistence()),
        ("query-path structure", query_structure()),
    ];
    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {} {verdict} {name}: {}", k + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
