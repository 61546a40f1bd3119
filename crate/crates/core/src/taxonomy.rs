//! The domain dictionary (`services.yml`).
//!
//! Maps normalized image names to process classes, published ports to
//! server/flow labels, and container paths to storage kinds.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The taxonomy shipped with the crate.
pub const STARTER_TAXONOMY: &str = include_str!("../data/services.yml");

/// Parent class of every flow label.
pub const NETWORK_FLOW: &str = "NetworkFlow";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("malformed taxonomy at {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("image `{image}` is listed by both `{first}` and `{second}`")]
    DuplicateImage {
        image: String,
        first: String,
        second: String,
    },
    #[error("port {value} is listed by both `{first}` and `{second}`")]
    DuplicatePort {
        value: u32,
        first: String,
        second: String,
    },
    #[error("path prefix `{path}` is listed under both `{first}` and `{second}`")]
    DuplicatePath {
        path: String,
        first: &'static str,
        second: &'static str,
    },
    #[error("class hierarchy has a cycle through `{0}`")]
    Cycle(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceEntry {
    #[serde(rename = "name")]
    pub model_name: String,
    #[serde(default, deserialize_with = "null_as_empty")]
    pub images: Vec<String>,
    #[serde(default, deserialize_with = "null_as_empty")]
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortEntry {
    pub name: String,
    #[serde(rename = "label")]
    pub server_label: String,
    #[serde(rename = "flowLabel")]
    pub flow_label: String,
    pub value: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StorageKind {
    Data,
    Config,
    Cert,
    Log,
    DockerSocket,
    Unknown,
}

/// On-disk layout of `services.yml`.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyFile {
    #[serde(default, deserialize_with = "null_as_empty")]
    services: Vec<ServiceEntry>,
    #[serde(default, deserialize_with = "null_as_empty")]
    ports: Vec<PortEntry>,
    #[serde(default, deserialize_with = "null_as_empty")]
    datas: Vec<String>,
    #[serde(default, deserialize_with = "null_as_empty")]
    configs: Vec<String>,
    #[serde(default, deserialize_with = "null_as_empty")]
    certs: Vec<String>,
    #[serde(default, deserialize_with = "null_as_empty")]
    logs: Vec<String>,
    #[serde(default, rename = "dockerSockets", deserialize_with = "null_as_empty")]
    docker_sockets: Vec<String>,
}

fn null_as_empty<'de, D, T>(de: D) -> Result<Vec<T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(Option::<Vec<T>>::deserialize(de)?.unwrap_or_default())
}

/// A loaded, validated taxonomy. Immutable after [`load_taxonomy`].
#[derive(Debug, Clone, Default)]
pub struct Taxonomy {
    pub service_entries: Vec<ServiceEntry>,
    pub port_entries: Vec<PortEntry>,
    pub data_paths: Vec<String>,
    pub config_paths: Vec<String>,
    pub cert_paths: Vec<String>,
    pub log_paths: Vec<String>,
    pub docker_socket_paths: Vec<String>,
    /// `(subclass, superclass)` pairs.
    pub class_hierarchy: Vec<(String, String)>,
    image_index: HashMap<String, usize>,
    port_index: HashMap<u16, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageClass<'a> {
    pub model_class: &'a str,
    pub labels: &'a [String],
}

impl Taxonomy {
    pub fn starter() -> Self {
        load_taxonomy(STARTER_TAXONOMY).expect("bundled taxonomy is valid")
    }

    pub fn classify_image(&self, image: &str) -> Option<ImageClass<'_>> {
        self.image_index.get(image).map(|&i| {
            let entry = &self.service_entries[i];
            ImageClass {
                model_class: &entry.model_name,
                labels: &entry.labels,
            }
        })
    }

    pub fn classify_port(&self, port: u16) -> Option<&PortEntry> {
        self.port_index.get(&port).map(|&i| &self.port_entries[i])
    }

    /// Exact match on a docker-socket path wins; otherwise the longest
    /// configured prefix (ending on a path-component boundary) decides.
    pub fn classify_path(&self, container_path: &str) -> StorageKind {
        let path = trim_slash(container_path);
        if self.is_docker_socket(path) {
            return StorageKind::DockerSocket;
        }
        let lists = [
            (StorageKind::Data, &self.data_paths),
            (StorageKind::Config, &self.config_paths),
            (StorageKind::Cert, &self.cert_paths),
            (StorageKind::Log, &self.log_paths),
        ];
        let mut best: Option<(usize, StorageKind)> = None;
        for (kind, prefixes) in lists {
            for prefix in prefixes.iter() {
                let prefix = trim_slash(prefix);
                if is_component_prefix(prefix, path)
                    && best.is_none_or(|(len, _)| prefix.len() > len)
                {
                    best = Some((prefix.len(), kind));
                }
            }
        }
        best.map_or(StorageKind::Unknown, |(_, kind)| kind)
    }

    pub fn is_docker_socket(&self, path: &str) -> bool {
        let path = trim_slash(path);
        self.docker_socket_paths.iter().any(|p| trim_slash(p) == path)
    }

    /// Classes a process can be typed with: service models, their labels
    /// and port server labels.
    pub fn process_classes(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for e in &self.service_entries {
            out.insert(e.model_name.as_str());
            out.extend(e.labels.iter().map(String::as_str));
        }
        out.extend(self.port_entries.iter().map(|p| p.server_label.as_str()));
        out
    }

    /// Serializes back into the `services.yml` layout.
    pub fn to_yaml(&self) -> String {
        let file = TaxonomyFile {
            services: self.service_entries.clone(),
            ports: self.port_entries.clone(),
            datas: self.data_paths.clone(),
            configs: self.config_paths.clone(),
            certs: self.cert_paths.clone(),
            logs: self.log_paths.clone(),
            docker_sockets: self.docker_socket_paths.clone(),
        };
        serde_yaml::to_string(&file).expect("taxonomy serializes")
    }
}

fn trim_slash(p: &str) -> &str {
    if p.len() > 1 {
        p.trim_end_matches('/')
    } else {
        p
    }
}

fn is_component_prefix(prefix: &str, path: &str) -> bool {
    if prefix == "/" {
        return path.starts_with('/');
    }
    path == prefix
        || (path.starts_with(prefix) && path.as_bytes().get(prefix.len()) == Some(&b'/'))
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

/// Loads and validates a `services.yml` document.
pub fn load_taxonomy(text: &str) -> Result<Taxonomy, TaxonomyError> {
    let file: Option<TaxonomyFile> =
        serde_yaml::from_str(text).map_err(|e| TaxonomyError::Malformed {
            path: e
                .location()
                .map(|l| format!("line {}", l.line()))
                .unwrap_or_else(|| "document".into()),
            message: e.to_string(),
        })?;
    let file = file.unwrap_or_default();

    let mut image_index = HashMap::new();
    let mut class_hierarchy = Vec::new();
    for (i, entry) in file.services.iter().enumerate() {
        let path = format!("services[{i}]");
        if !is_identifier(&entry.model_name) {
            return Err(malformed(&path, "name must be a non-empty identifier"));
        }
        for label in &entry.labels {
            if !is_identifier(label) {
                return Err(malformed(&path, &format!("label `{label}` is not an identifier")));
            }
            if label != &entry.model_name {
                push_unique(&mut class_hierarchy, (entry.model_name.clone(), label.clone()));
            }
        }
        for image in &entry.images {
            let image = image.trim().to_lowercase();
            if image.is_empty() {
                return Err(malformed(&path, "empty image name"));
            }
            if let Some(&prev) = image_index.get(&image) {
                let first: &ServiceEntry = &file.services[prev];
                if first.model_name != entry.model_name || prev != i {
                    return Err(TaxonomyError::DuplicateImage {
                        image,
                        first: first.model_name.clone(),
                        second: entry.model_name.clone(),
                    });
                }
            }
            image_index.insert(image, i);
        }
    }

    let mut port_index = HashMap::new();
    for (i, entry) in file.ports.iter().enumerate() {
        let path = format!("ports[{i}]");
        if !(1..=65535).contains(&entry.value) {
            return Err(malformed(&path, &format!("port {} out of range", entry.value)));
        }
        if !is_identifier(&entry.server_label) || !is_identifier(&entry.flow_label) {
            return Err(malformed(&path, "label and flowLabel must be identifiers"));
        }
        if let Some(&prev) = port_index.get(&(entry.value as u16)) {
            let first: &PortEntry = &file.ports[prev];
            return Err(TaxonomyError::DuplicatePort {
                value: entry.value,
                first: first.name.clone(),
                second: entry.name.clone(),
            });
        }
        port_index.insert(entry.value as u16, i);
        if entry.flow_label != NETWORK_FLOW {
            push_unique(
                &mut class_hierarchy,
                (entry.flow_label.clone(), NETWORK_FLOW.to_string()),
            );
        }
    }

    let mut seen_paths: HashMap<String, &'static str> = HashMap::new();
    for (section, list) in [
        ("datas", &file.datas),
        ("configs", &file.configs),
        ("certs", &file.certs),
        ("logs", &file.logs),
    ] {
        for (i, p) in list.iter().enumerate() {
            if !p.starts_with('/') {
                return Err(malformed(&format!("{section}[{i}]"), "path must be absolute"));
            }
            if let Some(prev) = seen_paths.insert(trim_slash(p).to_string(), section) {
                if prev != section {
                    return Err(TaxonomyError::DuplicatePath {
                        path: p.clone(),
                        first: prev,
                        second: section,
                    });
                }
            }
        }
    }
    for (i, p) in file.docker_sockets.iter().enumerate() {
        if !p.starts_with('/') {
            return Err(malformed(&format!("dockerSockets[{i}]"), "path must be absolute"));
        }
    }

    check_acyclic(&class_hierarchy)?;

    Ok(Taxonomy {
        service_entries: file.services,
        port_entries: file.ports,
        data_paths: file.datas,
        config_paths: file.configs,
        cert_paths: file.certs,
        log_paths: file.logs,
        docker_socket_paths: file.docker_sockets,
        class_hierarchy,
        image_index,
        port_index,
    })
}

fn malformed(path: &str, message: &str) -> TaxonomyError {
    TaxonomyError::Malformed {
        path: path.to_string(),
        message: message.to_string(),
    }
}

fn push_unique(pairs: &mut Vec<(String, String)>, pair: (String, String)) {
    if !pairs.contains(&pair) {
        pairs.push(pair);
    }
}

/// Depth-first search over the subclass edges.
pub(crate) fn check_acyclic(pairs: &[(String, String)]) -> Result<(), TaxonomyError> {
    let mut edges: HashMap<&str, Vec<&str>> = HashMap::new();
    for (sub, sup) in pairs {
        edges.entry(sub.as_str()).or_default().push(sup.as_str());
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    let mut marks: HashMap<&str, Mark> = HashMap::new();
    fn visit<'a>(
        node: &'a str,
        edges: &HashMap<&'a str, Vec<&'a str>>,
        marks: &mut HashMap<&'a str, Mark>,
    ) -> Result<(), TaxonomyError> {
        match marks.get(node) {
            Some(Mark::Done) => return Ok(()),
            Some(Mark::Active) => return Err(TaxonomyError::Cycle(node.to_string())),
            None => {}
        }
        marks.insert(node, Mark::Active);
        for &next in edges.get(node).into_iter().flatten() {
            visit(next, edges, marks)?;
        }
        marks.insert(node, Mark::Done);
        Ok(())
    }
    let mut keys: Vec<&str> = edges.keys().copied().collect();
    keys.sort_unstable();
    for node in keys {
        visit(node, &edges, &mut marks)?;
    }
    Ok(())
}
