use dso_web::*;
use serde_json::Value;

fn json(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

#[test]
fn summary_of_the_sample() {
    let v = json(graph_summary(&sample_graph()));
    assert_eq!(v["n"], 6);
    assert_eq!(v["edges"].as_array().unwrap().len(), 8);
    assert_eq!(v["d_max"], 2);
    assert_eq!(v["diameter"], 3.0);
    let bound = v["alpha_bound"].as_f64().unwrap();
    assert!((bound - 1.0 / 15.0).abs() < 1e-15);
}

#[test]
fn failing_a_node_reroutes_the_tree() {
    let g = sample_graph();
    let v = json(replacement_tree(&g, 5, ""));
    let node0 = &v["result"]["nodes"][0];
    assert_eq!(node0["distance"], 3.0);
    assert_eq!(node0["successor"], 1);

    let v = json(replacement_tree(&g, 5, "1"));
    let node0 = &v["result"]["nodes"][0];
    assert_eq!(node0["distance"], 3.0);
    assert_eq!(node0["successor"], 2);
    assert_eq!(v["result"]["nodes"][2]["successor"], 4);
    assert!(v["dot"].as_str().unwrap().contains("digraph"));

    let v = json(replacement_tree(&g, 5, "3, 4"));
    assert_eq!(v["result"]["nodes"][0]["status"], "unreachable");
}

#[test]
fn continuum_costs_rise_toward_the_classical_chain() {
    let v = json(continuum(&sample_graph(), 5, ""));
    let blocks = v["blocks"].as_array().unwrap();
    assert!(blocks.len() >= 2);
    let u0: Vec<f64> = blocks.iter().map(|b| b["hitting_cost"][0].as_f64().unwrap()).collect();
    assert!(u0.windows(2).all(|w| w[0] <= w[1]));
    assert!((u0[0] - 3.0).abs() < 0.5);

    let v = json(continuum(&sample_graph(), 5, "0.2, 0.7"));
    assert_eq!(v["blocks"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_input_is_reported_as_text() {
    assert!(graph_summary("n 2\n0 5 1\n").is_err());
    assert!(replacement_tree(&sample_graph(), 5, "x").unwrap_err().contains("invalid node id"));
    assert!(replacement_tree(&sample_graph(), 5, "5").is_err());
    assert!(continuum(&sample_graph(), 5, "0.5,abc").unwrap_err().contains("invalid alpha"));
}
