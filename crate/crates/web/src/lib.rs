//! Browser bindings: every function takes the edge-list text and returns a
//! JSON string, so the page keeps no oracle state between calls.

use dso_core::evaporation::{self, SweepOptions};
use dso_core::graph::{diameter_exact, transition_matrix};
use dso_core::oracle::{self, BuildOptions, Query};
use dso_core::{Graph, TransitionPolicy};
use serde_json::json;
use wasm_bindgen::prelude::*;

pub const SAMPLE: &str = "n 6
# two routes from 0 to 5 plus a detour through 4
0 1 1
0 2 1
1 3 1
2 3 3
3 5 1
1 4 2
4 5 1
2 4 1
";

#[wasm_bindgen]
pub fn sample_graph() -> String {
    SAMPLE.to_string()
}

fn load(text: &str) -> Result<Graph, String> {
    Graph::parse(text).map(Graph::with_exact_diameter).map_err(|e| e.to_string())
}

fn parse_nodes(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| format!("invalid node id {s:?}")))
        .collect()
}

/// Structural diagnostics and the safe evaporation factor.
#[wasm_bindgen]
pub fn graph_summary(text: &str) -> Result<String, String> {
    let g = load(text)?;
    let edges: Vec<_> = g.edges().iter().map(|e| json!({"src": e.src, "dst": e.dst, "weight": e.weight})).collect();
    let bound = oracle::graph_alpha_bound(&g).map_err(|e| e.to_string())?;
    Ok(json!({
        "n": g.n(),
        "edges": edges,
        "d_max": g.d_max(),
        "delta": g.delta(),
        "diameter": diameter_exact(&g),
        "alpha_bound": bound,
    })
    .to_string())
}

/// Replacement shortest-path tree toward `target` with the comma-separated
/// `failures` removed.
#[wasm_bindgen]
pub fn replacement_tree(text: &str, target: usize, failures: &str) -> Result<String, String> {
    let g = load(text)?;
    let q = Query::new(target, parse_nodes(failures)?);
    let o = oracle::preprocess_mp(&g, &BuildOptions::default()).map_err(|e| e.to_string())?;
    let r = o.query(&q).map_err(|e| e.to_string())?;
    let value = json!({"alpha": o.alpha(), "result": r, "dot": r.to_dot(&g)});
    Ok(value.to_string())
}

/// Routing probabilities and conditioned costs for each alpha of the
/// comma-separated list (default grid when empty).
#[wasm_bindgen]
pub fn continuum(text: &str, target: usize, alphas: &str) -> Result<String, String> {
    let g = load(text)?;
    let mut grid = Vec::new();
    for a in alphas.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        grid.push(a.parse::<f64>().map_err(|_| format!("invalid alpha {a:?}"))?);
    }
    if grid.is_empty() {
        let bound = oracle::graph_alpha_bound(&g).map_err(|e| e.to_string())?;
        grid = evaporation::default_grid(oracle::default_alpha(bound));
    }
    let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted);
    let opts = SweepOptions { with_reference: true, ..Default::default() };
    let report = evaporation::continuum_sweep(&g, &p, target, &grid, &opts).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}
