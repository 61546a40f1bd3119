//! Docker Compose ingestion.
//!
//! Only the fields that shape a data-flow diagram are consumed: `image`,
//! `ports`, `volumes`, `depends_on` and `links`. Everything else in the
//! document (`environment`, `networks`, `build`, `expose`, ...) is ignored.

use std::collections::HashSet;
use std::fmt;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use serde_yaml::Value;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComposeError {
    #[error("malformed compose document{}: {message}", line_suffix(*.line))]
    Syntax { message: String, line: Option<usize> },
    #[error("duplicate service name `{0}`")]
    DuplicateService(String),
    #[error("service `{service}`: invalid port `{raw}`: {reason}")]
    InvalidPort {
        service: String,
        raw: String,
        reason: String,
    },
    #[error("service `{service}`: invalid volume `{raw}`: {reason}")]
    InvalidVolume {
        service: String,
        raw: String,
        reason: String,
    },
    #[error("service `{service}`: invalid `{field}` entry: {reason}")]
    InvalidField {
        service: String,
        field: &'static str,
        reason: String,
    },
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

/// A parsed Compose file. Services keep document order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComposeModel {
    pub services: Vec<ServiceSpec>,
}

impl ComposeModel {
    pub fn service(&self, name: &str) -> Option<&ServiceSpec> {
        self.services.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServiceSpec {
    pub name: String,
    pub image: Option<String>,
    pub ports: Vec<PortMapping>,
    pub volumes: Vec<VolumeMapping>,
    pub depends_on: Vec<String>,
    pub links: Vec<LinkRef>,
}

/// A published port. `host_port` is `None` when only the container side is
/// given (Docker then picks an ephemeral host port).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortMapping {
    pub host_port: Option<u16>,
    pub container_port: u16,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VolumeMapping {
    /// Host path, named volume, or empty for an anonymous volume.
    pub source: String,
    pub container_path: String,
    pub read_only: bool,
    pub raw: String,
}

impl VolumeMapping {
    pub fn source_kind(&self) -> VolumeSource {
        if self.source.is_empty() {
            VolumeSource::Anonymous
        } else if is_host_path(&self.source) {
            VolumeSource::HostPath
        } else {
            VolumeSource::Named
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeSource {
    HostPath,
    Named,
    Anonymous,
}

/// Host folders start with a dot or a slash (`~` is accepted as well).
fn is_host_path(source: &str) -> bool {
    source.starts_with('.') || source.starts_with('/') || source.starts_with('~')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkRef {
    pub target_service: String,
    pub alias: String,
}

/// Keeps every key of a mapping in document order, duplicates included.
struct OrderedEntries(Vec<(Value, Value)>);

impl<'de> Deserialize<'de> for OrderedEntries {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;
        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = OrderedEntries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a mapping of services")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, v)) = map.next_entry::<Value, Value>()? {
                    entries.push((k, v));
                }
                Ok(OrderedEntries(entries))
            }
            fn visit_unit<E>(self) -> Result<Self::Value, E> {
                Ok(OrderedEntries(Vec::new()))
            }
        }
        de.deserialize_any(EntriesVisitor)
    }
}

#[derive(Deserialize)]
struct RawDocument {
    #[serde(default)]
    services: Option<OrderedEntries>,
}

/// Parses a Compose document.
pub fn parse_compose(text: &str) -> Result<ComposeModel, ComposeError> {
    let doc: Option<RawDocument> = serde_yaml::from_str(text).map_err(|e| ComposeError::Syntax {
        line: e.location().map(|l| l.line()),
        message: e.to_string(),
    })?;
    let entries = doc.and_then(|d| d.services).map(|e| e.0).unwrap_or_default();

    let mut seen = HashSet::new();
    let mut services = Vec::with_capacity(entries.len());
    for (key, body) in entries {
        let name = scalar_string(&key).ok_or_else(|| ComposeError::Syntax {
            message: "service names must be scalars".into(),
            line: None,
        })?;
        if !seen.insert(name.clone()) {
            return Err(ComposeError::DuplicateService(name));
        }
        services.push(parse_service(name, &body)?);
    }
    Ok(ComposeModel { services })
}

fn parse_service(name: String, body: &Value) -> Result<ServiceSpec, ComposeError> {
    let mut spec = ServiceSpec {
        name,
        ..ServiceSpec::default()
    };
    let map = match body {
        Value::Mapping(m) => m,
        Value::Null => return Ok(spec),
        _ => {
            return Err(ComposeError::InvalidField {
                service: spec.name,
                field: "service",
                reason: "service definition must be a mapping".into(),
            })
        }
    };

    spec.image = map
        .get("image")
        .and_then(scalar_string)
        .filter(|s| !s.trim().is_empty());

    if let Some(ports) = map.get("ports") {
        for entry in as_list(ports) {
            let parsed = parse_port_entry(entry).map_err(|reason| ComposeError::InvalidPort {
                service: spec.name.clone(),
                raw: render_raw(entry),
                reason,
            })?;
            spec.ports.extend(parsed);
        }
    }

    if let Some(volumes) = map.get("volumes") {
        for entry in as_list(volumes) {
            let parsed = parse_volume_entry(entry).map_err(|reason| ComposeError::InvalidVolume {
                service: spec.name.clone(),
                raw: render_raw(entry),
                reason,
            })?;
            spec.volumes.push(parsed);
        }
    }

    if let Some(deps) = map.get("depends_on") {
        spec.depends_on = match deps {
            // long syntax: `depends_on: { db: { condition: service_healthy } }`
            Value::Mapping(m) => m.keys().filter_map(scalar_string).collect(),
            other => as_list(other).iter().filter_map(scalar_string).collect(),
        };
        if spec.depends_on.iter().any(|d| d.trim().is_empty()) {
            return Err(ComposeError::InvalidField {
                service: spec.name,
                field: "depends_on",
                reason: "empty service name".into(),
            });
        }
    }

    if let Some(links) = map.get("links") {
        for entry in as_list(links) {
            let raw = scalar_string(entry).unwrap_or_default();
            let (target, alias) = match raw.split_once(':') {
                Some((t, a)) => (t.trim(), a.trim()),
                None => (raw.trim(), raw.trim()),
            };
            if target.is_empty() {
                return Err(ComposeError::InvalidField {
                    service: spec.name,
                    field: "links",
                    reason: format!("empty link target in `{raw}`"),
                });
            }
            spec.links.push(LinkRef {
                target_service: target.to_string(),
                alias: if alias.is_empty() { target } else { alias }.to_string(),
            });
        }
    }

    Ok(spec)
}

fn as_list(value: &Value) -> &[Value] {
    match value {
        Value::Sequence(seq) => seq,
        _ => std::slice::from_ref(value),
    }
}

fn scalar_string(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn render_raw(value: &Value) -> String {
    scalar_string(value).unwrap_or_else(|| {
        serde_yaml::to_string(value)
            .map(|s| s.trim().replace('\n', " "))
            .unwrap_or_default()
    })
}

fn parse_port_number(text: &str) -> Result<u16, String> {
    let n: u32 = text
        .trim()
        .parse()
        .map_err(|_| format!("`{text}` is not a port number"))?;
    if (1..=65535).contains(&n) {
        Ok(n as u16)
    } else {
        Err(format!("port {n} is out of range 1..65535"))
    }
}

fn parse_port_range(text: &str) -> Result<Vec<u16>, String> {
    match text.split_once('-') {
        Some((lo, hi)) => {
            let (lo, hi) = (parse_port_number(lo)?, parse_port_number(hi)?);
            if lo > hi {
                return Err(format!("empty port range `{text}`"));
            }
            Ok((lo..=hi).collect())
        }
        None => Ok(vec![parse_port_number(text)?]),
    }
}

/// Short syntax `[[ip:]host:]container[/proto]`; ranges expand to one
/// mapping per port. Long syntax maps use `target` and `published`.
fn parse_port_entry(entry: &Value) -> Result<Vec<PortMapping>, String> {
    if let Value::Mapping(m) = entry {
        let target = m
            .get("target")
            .and_then(scalar_string)
            .ok_or("long-syntax port without `target`")?;
        let container_port = parse_port_number(&target)?;
        let host_port = match m.get("published").and_then(scalar_string) {
            Some(p) if !p.is_empty() => Some(parse_port_number(p.split('-').next().unwrap_or(&p))?),
            _ => None,
        };
        return Ok(vec![PortMapping {
            host_port,
            container_port,
            raw: render_raw(entry),
        }]);
    }

    let raw = scalar_string(entry).ok_or("port entry must be a string or number")?;
    let spec = raw.trim();
    let numeric = match spec.rsplit_once('/') {
        Some((ports, proto)) if !proto.is_empty() && proto.chars().all(|c| c.is_ascii_alphabetic()) => ports,
        Some(_) => return Err("malformed protocol suffix".into()),
        None => spec,
    };
    let parts: Vec<&str> = numeric.rsplitn(3, ':').collect();
    let (host, container) = match parts.as_slice() {
        [container] => (None, *container),
        [container, host] => (Some(*host), *container),
        // ip:host:container, host may be empty ("127.0.0.1::80")
        [container, host, _ip] => (Some(*host).filter(|h| !h.is_empty()), *container),
        _ => return Err("expected `[host:]container[/proto]`".into()),
    };
    let containers = parse_port_range(container)?;
    let hosts = host.map(parse_port_range).transpose()?;
    match hosts {
        None => Ok(containers
            .into_iter()
            .map(|c| PortMapping {
                host_port: None,
                container_port: c,
                raw: raw.clone(),
            })
            .collect()),
        Some(hosts) if hosts.len() == containers.len() => Ok(hosts
            .into_iter()
            .zip(containers)
            .map(|(h, c)| PortMapping {
                host_port: Some(h),
                container_port: c,
                raw: raw.clone(),
            })
            .collect()),
        // a host range for a single container port: Docker binds one of them
        Some(hosts) if containers.len() == 1 => Ok(vec![PortMapping {
            host_port: hosts.first().copied(),
            container_port: containers[0],
            raw: raw.clone(),
        }]),
        Some(_) => Err("host and container port ranges differ in length".into()),
    }
}

/// Short syntax `[source:]target[:mode]`; long syntax maps use `source`,
/// `target` and `read_only`.
fn parse_volume_entry(entry: &Value) -> Result<VolumeMapping, String> {
    if let Value::Mapping(m) = entry {
        let target = m
            .get("target")
            .and_then(scalar_string)
            .ok_or("long-syntax volume without `target`")?;
        let source = m.get("source").and_then(scalar_string).unwrap_or_default();
        let read_only = matches!(m.get("read_only"), Some(Value::Bool(true)));
        return finish_volume(source, target, read_only, render_raw(entry));
    }
    let raw = scalar_string(entry).ok_or("volume entry must be a string")?;
    let parts: Vec<&str> = raw.trim().split(':').collect();
    let (source, target, mode) = match parts.as_slice() {
        [target] => ("", *target, ""),
        [a, b] if b.starts_with('/') => (*a, *b, ""),
        [target, mode] => ("", *target, *mode),
        [source, target, mode] => (*source, *target, *mode),
        _ => return Err("expected `[source:]target[:mode]`".into()),
    };
    let read_only = mode.split(',').any(|m| m.trim() == "ro");
    finish_volume(source.to_string(), target.to_string(), read_only, raw)
}

fn finish_volume(
    source: String,
    target: String,
    read_only: bool,
    raw: String,
) -> Result<VolumeMapping, String> {
    if !target.starts_with('/') {
        return Err(format!("container path `{target}` is not absolute"));
    }
    Ok(VolumeMapping {
        source,
        container_path: target,
        read_only,
        raw,
    })
}

/// Reduces an image reference to its bare repository name: digest, tag,
/// registry and namespace are dropped and the result is lowercased.
pub fn normalize_image(raw: &str) -> String {
    let without_digest = raw.split('@').next().unwrap_or(raw);
    let without_tag = match without_digest.rsplit_once(':') {
        Some((repo, tag)) if !tag.contains('/') => repo,
        _ => without_digest,
    };
    let name = without_tag
        .rsplit('/')
        .next()
        .unwrap_or(without_tag)
        .trim()
        .to_lowercase();
    if name.is_empty() || name.contains([':', '@']) {
        raw.trim().to_lowercase()
    } else {
        name
    }
}
