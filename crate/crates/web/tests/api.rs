use serde_json::Value;

use kgroup::hypergraph::parse_edgelist;
use kgroup::oracle::verify_groups;
use kgroup::problems::Problem;
use kgroup_web::api::{gamma_schedule, generate_graph, solve, solve_view, SolveOptions};

#[test]
fn schedule_is_linear_through_zero() {
    let g = gamma_schedule(-2.5, 1000, 2000).unwrap();
    assert_eq!(g.len(), 2001);
    assert_eq!(g[0], -2.5);
    assert_eq!(g[1000], 0.0);
    assert!(g.windows(2).all(|w| w[1] >= w[0]));
    assert!(gamma_schedule(f64::NAN, 10, 5).is_err());
    assert!(gamma_schedule(-1.0, 0, 5).is_err());
}

#[test]
fn generated_graph_parses_back() {
    let text = generate_graph(12, 20, 4).unwrap();
    let g = parse_edgelist(&text).unwrap();
    assert_eq!((g.num_vertices(), g.num_edges()), (12, 20));
    assert_eq!(text, generate_graph(12, 20, 4).unwrap());
    assert!(generate_graph(3, 10, 0).is_err());
}

#[test]
fn solve_returns_verifiable_assignment_and_drawing_data() {
    let instance = "0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n";
    let json = solve(
        "maxcut",
        instance,
        "edgelist",
        r#"{"epochs": 300, "restarts": 2, "seed": 1}"#,
    )
    .unwrap();
    let v: Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["report"]["cut"], 4);
    assert_eq!(v["layout"].as_array().unwrap().len(), 4);
    assert_eq!(v["gini"].as_array().unwrap().len(), 4);
    assert_eq!(v["trace"][0]["epoch"], 0);
    assert_eq!(v["trace"].as_array().unwrap().last().unwrap()["epoch"], 300);

    let groups: Vec<usize> = serde_json::from_value(v["assignment"].clone()).unwrap();
    let g = parse_edgelist(instance).unwrap();
    let report = verify_groups(Problem::MaxCut, &g, &groups, 2).unwrap();
    assert_eq!(serde_json::to_value(&report).unwrap(), v["report"]);
}

#[test]
fn hypergraph_coloring_and_thinned_trace() {
    let options = SolveOptions {
        k: Some(2),
        epochs: 2000,
        restarts: 2,
        ..SolveOptions::default()
    };
    let view = solve_view("proper-coloring", "3 4\n1 2\n1 3 4\n2 3 4\n", "hgr", &options).unwrap();
    assert!(view.feasible);
    assert!(view.trace.len() <= 401);
    assert_eq!(view.trace.last().unwrap().epoch, 2000);
    assert_eq!(view.edges.len(), 3);
}

#[test]
fn annealing_can_be_switched_off() {
    let options = r#"{"epochs": 50, "restarts": 1, "anneal": false}"#;
    let v: Value = serde_json::from_str(&solve("maxcut", "0 1\n", "", options).unwrap()).unwrap();
    assert!(v["trace"].as_array().unwrap().iter().all(|p| p["gamma"] == 0.0));
}

#[test]
fn errors_are_messages() {
    assert!(solve("tsp", "0 1\n", "edgelist", "").unwrap_err().contains("tsp"));
    assert!(solve("maxcut", "0 0\n", "edgelist", "")
        .unwrap_err()
        .contains("self-loop"));
    assert!(solve("maxcut", "0 1\n", "dimacs", "").is_err());
    assert!(solve("maxcut", "0 1\n", "edgelist", r#"{"epoch": 3}"#)
        .unwrap_err()
        .contains("bad options"));
}
