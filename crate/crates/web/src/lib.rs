//! Browser bindings. Every export returns a JSON string; the inner functions
//! are plain Rust so they can be tested natively.

use std::collections::HashMap;
use std::fmt::Write as _;

use dfd_core::dfd::{DfdModel, Stencil, StencilKind};
use dfd_core::evaluation::{default_mappings, evaluate_corpus, format_table, load_labels};
use dfd_core::export::{export_dot, export_model, flow_label};
use dfd_core::pattern::{evaluate, parse_patterns, pattern_note, report_from_json, report_to_json};
use dfd_core::pipeline::{Analyzer, DiagramArtifacts};
use dfd_core::turtle::to_turtle;
use dfd_core::IdGenerator;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn analyze(compose: &str, name: &str, seed: u32, with_patterns: bool) -> Result<DiagramArtifacts, String> {
    let mut analyzer = Analyzer::starter();
    if !with_patterns {
        analyzer.patterns.clear();
    }
    analyzer
        .analyze(compose, name, &mut IdGenerator::seeded(seed.into()))
        .map_err(|e| e.to_string())
}

/// Builds every representation of one Compose file.
pub fn build_diagram(compose: &str, name: &str, seed: u32) -> Result<Value, String> {
    let analyzer = Analyzer::starter();
    let art = analyze(compose, name, seed, true)?;
    let report: Value = serde_json::from_str(&report_to_json(&art.report, &analyzer.patterns)).map_err(|e| e.to_string())?;
    let threats: Vec<Value> = art
        .report
        .matched()
        .into_iter()
        .map(|id| {
            let title = analyzer.patterns.iter().find(|q| q.id == id).map(|q| q.title.as_str());
            json!({ "id": id, "title": title, "note": pattern_note(id), "rows": art.report.matches[id].len() })
        })
        .collect();
    Ok(json!({
        "name": name,
        "model": export_model(&art.model),
        "dot": export_dot(&art.model),
        "svg": render_svg(&art.model),
        "explicit": to_turtle(&art.explicit, name),
        "reasoned": to_turtle(&art.reasoned, name),
        "triples": { "explicit": art.explicit.len(), "reasoned": art.reasoned.len() },
        "threats": threats,
        "report": report,
    }))
}

/// Runs user-written patterns over the reasoned graph of one Compose file.
pub fn run_query(compose: &str, seed: u32, patterns: &str) -> Result<Value, String> {
    let queries = parse_patterns(patterns).map_err(|e| e.to_string())?;
    let art = analyze(compose, "query", seed, false)?;
    let mut out = Vec::new();
    for q in &queries {
        let rows: Vec<Vec<String>> = evaluate(&art.reasoned, q)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|r| q.projection.iter().map(|v| r.get(v).map(|n| n.to_string()).unwrap_or_default()).collect())
            .collect();
        out.push(json!({ "id": q.id, "title": q.title, "columns": q.projection, "rows": rows }));
    }
    Ok(Value::Array(out))
}

/// Scores a list of report objects (as returned by `build_diagram`) against labels.
pub fn score_reports(reports: &str, labels: &str) -> Result<Value, String> {
    let values: Vec<Value> = serde_json::from_str(reports).map_err(|e| e.to_string())?;
    let reports = values
        .iter()
        .map(|v| report_from_json(&v.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let labels = load_labels(labels).map_err(|e| e.to_string())?;
    let rows = evaluate_corpus(&reports, &labels, &default_mappings());
    Ok(json!({
        "table": format_table(&rows),
        "rows": serde_json::to_value(&rows).map_err(|e| e.to_string())?,
    }))
}

const COL_X: [f64; 3] = [90.0, 330.0, 570.0];
const ROW_H: f64 = 80.0;
const TOP: f64 = 50.0;

fn column(kind: StencilKind) -> usize {
    match kind {
        StencilKind::ExternalEntity => 0,
        StencilKind::Process => 1,
        StencilKind::DataStore => 2,
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn node(out: &mut String, s: &Stencil, x: f64, y: f64) {
    match s.kind {
        StencilKind::ExternalEntity => {
            let _ = write!(out, r#"<rect x="{}" y="{}" width="120" height="44" class="ext"/>"#, x - 60.0, y - 22.0);
        }
        StencilKind::Process => {
            let _ = write!(out, r#"<ellipse cx="{x}" cy="{y}" rx="70" ry="26" class="proc"/>"#);
        }
        StencilKind::DataStore => {
            let _ = write!(
                out,
                r#"<path d="M{} {}h120M{} {}h120" class="store"/>"#,
                x - 60.0,
                y - 20.0,
                x - 60.0,
                y + 20.0
            );
        }
    }
    let _ = write!(
        out,
        r#"<text x="{x}" y="{}" text-anchor="middle">{}</text><text x="{x}" y="{}" text-anchor="middle" class="cls">{}</text>"#,
        y - 3.0,
        esc(&s.name),
        y + 12.0,
        esc(&s.model_class)
    );
}

/// Three columns: external entities, processes, storages.
pub fn render_svg(model: &DfdModel) -> String {
    let mut pos: HashMap<&str, (f64, f64)> = HashMap::new();
    let mut rows = [0usize; 3];
    for s in model.externals.iter().chain(&model.processes).chain(&model.storages) {
        let c = column(s.kind);
        pos.insert(&s.id, (COL_X[c], TOP + rows[c] as f64 * ROW_H));
        rows[c] += 1;
    }
    let height = TOP * 2.0 + (rows.iter().max().copied().unwrap_or(1).max(1) - 1) as f64 * ROW_H;
    let mut out = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 680 {height}" width="680" height="{height}"><defs><marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="7" markerHeight="7" orient="auto-start-reverse"><path d="M0 0L10 5L0 10z"/></marker></defs>"#
    );
    for (i, f) in model.flows.iter().enumerate() {
        let (Some(&(x1, y1)), Some(&(x2, y2))) = (pos.get(f.source_id.as_str()), pos.get(f.target_id.as_str())) else {
            continue;
        };
        // flows inside the process column bow out to the right
        let (cx, cy) = if x1 == x2 {
            (x1 + 110.0 + (i % 3) as f64 * 15.0, (y1 + y2) / 2.0)
        } else {
            ((x1 + x2) / 2.0, (y1 + y2) / 2.0 + ((i % 3) as f64 - 1.0) * 12.0)
        };
        let (sx, tx) = if x1 == x2 { (x1 + 70.0, x2 + 70.0) } else if x1 < x2 { (x1 + 65.0, x2 - 65.0) } else { (x1 - 65.0, x2 + 65.0) };
        let _ = write!(
            out,
            r#"<path d="M{sx} {y1}Q{cx} {cy} {tx} {y2}" class="flow" marker-end="url(#arrow)"><title>{}</title></path>"#,
            esc(&flow_label(f))
        );
        let _ = write!(out, r#"<text x="{cx}" y="{}" text-anchor="middle" class="flabel">{}</text>"#, cy - 4.0, esc(&f.name));
    }
    for s in model.stencils() {
        let (x, y) = pos[s.id.as_str()];
        node(&mut out, s, x, y);
    }
    out.push_str("</svg>");
    out
}

fn js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn build(compose: &str, name: &str, seed: u32) -> Result<String, JsError> {
    js(build_diagram(compose, name, seed))
}

#[wasm_bindgen]
pub fn query(compose: &str, seed: u32, patterns: &str) -> Result<String, JsError> {
    js(run_query(compose, seed, patterns))
}

#[wasm_bindgen]
pub fn score(reports: &str, labels: &str) -> Result<String, JsError> {
    js(score_reports(reports, labels))
}
