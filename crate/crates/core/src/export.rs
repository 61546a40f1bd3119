//! Model document and DOT rendering of a diagram.

use serde::Deserialize;
use thiserror::Error;

use crate::dfd::{DfdModel, Flow, FlowClass, Stencil, StencilKind};

#[derive(Debug, Error)]
pub enum ModelDocError {
    #[error("model document: {0}")]
    Yaml(#[from] serde_yaml::Error),
    #[error("model document: {0}")]
    Invalid(String),
}

fn q(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

fn push_labels(out: &mut String, indent: &str, labels: &[String]) {
    if labels.is_empty() {
        out.push_str(&format!("{indent}labels: null\n"));
    } else {
        out.push_str(&format!("{indent}labels:\n"));
        for l in labels {
            out.push_str(&format!("{indent}  - {}\n", q(l)));
        }
    }
}

fn push_stencils(out: &mut String, section: &str, stencils: &[Stencil]) {
    if stencils.is_empty() {
        out.push_str(&format!("{section}: []\n"));
        return;
    }
    out.push_str(&format!("{section}:\n"));
    for s in stencils {
        out.push_str(&format!("- name: {}\n", q(&s.name)));
        match &s.real_name {
            Some(r) => out.push_str(&format!("  realName: {}\n", q(r))),
            None => out.push_str("  realName: null\n"),
        }
        out.push_str(&format!("  model: {}\n", q(&s.model_class)));
        out.push_str(&format!("  id: {}\n", q(&s.id)));
        push_labels(out, "  ", &s.labels);
    }
}

/// The depersonalized model document: `processes`, `storages`,
/// `externals` and `flows` sections with the fields in listing order.
pub fn export_model(model: &DfdModel) -> String {
    let mut out = String::new();
    push_stencils(&mut out, "processes", &model.processes);
    push_stencils(&mut out, "storages", &model.storages);
    push_stencils(&mut out, "externals", &model.externals);
    if model.flows.is_empty() {
        out.push_str("flows: []\n");
        return out;
    }
    out.push_str("flows:\n");
    let name_of = |id: &str| model.stencil_by_id(id).map_or("", |s| s.name.as_str()).to_string();
    for f in &model.flows {
        out.push_str(&format!("- name: {}\n", q(&f.name)));
        out.push_str(&format!("  model: {}\n", q(f.model_class.as_str())));
        out.push_str("  realPortMapping: null\n");
        out.push_str(&format!("  id: {}\n", q(&f.id)));
        out.push_str("  localPort: null\n");
        for (key, id) in [("source", &f.source_id), ("target", &f.target_id)] {
            out.push_str(&format!("  {key}:\n"));
            out.push_str(&format!("    name: {}\n", q(&name_of(id))));
            out.push_str(&format!("    id: {}\n", q(id)));
        }
        push_labels(&mut out, "  ", &f.labels);
        out.push_str("  realStorageMappings: null\n");
    }
    out
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct StencilDoc {
    name: String,
    real_name: Option<String>,
    model: String,
    id: String,
    labels: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct EndpointDoc {
    id: String,
}

#[derive(Deserialize)]
struct FlowDoc {
    name: String,
    model: String,
    id: String,
    source: EndpointDoc,
    target: EndpointDoc,
    labels: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct ModelDoc {
    #[serde(default)]
    processes: Option<Vec<StencilDoc>>,
    #[serde(default)]
    storages: Option<Vec<StencilDoc>>,
    #[serde(default)]
    externals: Option<Vec<StencilDoc>>,
    #[serde(default)]
    flows: Option<Vec<FlowDoc>>,
}

fn stencils(docs: Option<Vec<StencilDoc>>, kind: StencilKind) -> Vec<Stencil> {
    docs.unwrap_or_default()
        .into_iter()
        .map(|d| Stencil {
            name: d.name,
            kind,
            model_class: d.model,
            labels: d.labels.unwrap_or_default(),
            id: d.id,
            real_name: d.real_name,
        })
        .collect()
}

/// Reads a model document back. Unknown fields are ignored.
pub fn parse_model(text: &str) -> Result<DfdModel, ModelDocError> {
    let doc: ModelDoc = serde_yaml::from_str(text)?;
    let mut flows = Vec::new();
    for f in doc.flows.unwrap_or_default() {
        let model_class: FlowClass = f.model.parse().map_err(ModelDocError::Invalid)?;
        flows.push(Flow {
            name: f.name,
            model_class,
            labels: f.labels.unwrap_or_default(),
            source_id: f.source.id,
            target_id: f.target.id,
            id: f.id,
        });
    }
    let model = DfdModel {
        processes: stencils(doc.processes, StencilKind::Process),
        storages: stencils(doc.storages, StencilKind::DataStore),
        externals: stencils(doc.externals, StencilKind::ExternalEntity),
        flows,
    };
    model.validate().map_err(ModelDocError::Invalid)?;
    Ok(model)
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn flow_label(f: &Flow) -> String {
    let mut label = format!("{}: {}", f.name, f.model_class.as_str());
    for l in &f.labels {
        label.push('/');
        label.push_str(l);
    }
    label
}

/// Graphviz rendering: processes as ellipses, storages as boxes open at
/// the sides, externals as rectangles, flows as labeled edges.
pub fn export_dot(model: &DfdModel) -> String {
    let mut out = String::from("digraph dfd {\n");
    if model.stencils().next().is_some() {
        out.push_str("  rankdir=LR;\n");
    }
    for s in model.stencils() {
        let caption = format!("{}\\n{}", s.name, s.model_class);
        let attrs = match s.kind {
            StencilKind::Process => format!("shape=ellipse, label={}", q_dot(&caption)),
            StencilKind::ExternalEntity => format!("shape=rect, label={}", q_dot(&caption)),
            StencilKind::DataStore => format!(
                "shape=none, margin=0, label=<<table border=\"0\" cellspacing=\"0\"><tr><td border=\"1\" sides=\"TB\" cellpadding=\"6\">{}<br/>{}</td></tr></table>>",
                html_escape(&s.name),
                html_escape(&s.model_class)
            ),
        };
        out.push_str(&format!("  {} [{attrs}];\n", q(&s.name)));
    }
    for f in &model.flows {
        let (Some(src), Some(dst)) = (model.stencil_by_id(&f.source_id), model.stencil_by_id(&f.target_id)) else {
            continue;
        };
        out.push_str(&format!(
            "  {} -> {} [label={}];\n",
            q(&src.name),
            q(&dst.name),
            q(&flow_label(f))
        ));
    }
    out.push_str("}\n");
    out
}

/// Quotes a DOT string, keeping `\n` escapes intact.
fn q_dot(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\\\""))
}
