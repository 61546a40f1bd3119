use dfd_web::{build_diagram, run_query, score_reports};

const COMPOSE: &str = include_str!("../../core/tests/fixtures/web_mongo.yml");

#[test]
fn build_returns_every_view() {
    let v = build_diagram(COMPOSE, "shop", 7).unwrap();
    for key in ["model", "dot", "svg", "explicit", "reasoned"] {
        assert!(!v[key].as_str().unwrap().is_empty(), "{key}");
    }
    let svg = v["svg"].as_str().unwrap();
    assert!(svg.starts_with("<svg") && svg.ends_with("</svg>"));
    assert_eq!(svg.matches("class=\"flow\"").count(), 5);
    assert!(!svg.contains("mongodb") && !svg.contains("web"));
    let ids: Vec<&str> = v["threats"].as_array().unwrap().iter().map(|t| t["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["2-1", "3-3"]);
    assert!(v["triples"]["reasoned"].as_u64() > v["triples"]["explicit"].as_u64());
    assert_eq!(v, build_diagram(COMPOSE, "shop", 7).unwrap());
}

#[test]
fn build_reports_bad_input() {
    assert!(build_diagram("services: [", "x", 0).is_err());
}

#[test]
fn custom_query() {
    let rows = run_query(COMPOSE, 1, "SELECT ?p WHERE { ?p a bm:Process . }").unwrap();
    assert_eq!(rows[0]["id"], "custom");
    assert_eq!(rows[0]["columns"][0], "p");
    assert_eq!(rows[0]["rows"].as_array().unwrap().len(), 2);
    assert!(run_query(COMPOSE, 1, "SELECT ?p WHERE { ?p a").unwrap_err().contains("syntax error"));
}

#[test]
fn scoring_built_reports() {
    let a = build_diagram(COMPOSE, "a", 1).unwrap();
    let b = build_diagram("services:\n  cache:\n    image: redis\n", "b", 1).unwrap();
    let reports = serde_json::json!([a["report"], b["report"]]).to_string();
    let v = score_reports(&reports, "a,1\nb,\n").unwrap();
    assert!(v["table"].as_str().unwrap().starts_with("Criteria"));
    assert_eq!(v["rows"][0]["positive"], 1);
    assert_eq!(v["rows"][0]["precision"], "1.00");
    assert!(score_reports(&reports, "a,1 2\n").is_err());
}
