//! Depersonalized data-flow diagram built from a Compose model.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;
use uuid::Uuid;

use crate::compose::{normalize_image, ComposeModel, VolumeSource};
use crate::taxonomy::{StorageKind, Taxonomy};

pub const HOST_STORAGE: &str = "hostStorage";
pub const DOCKER_SOCKET: &str = "dockerSocket";
pub const USER: &str = "user";

pub const REMOTE_USER: &str = "RemoteUser";
pub const GENERIC_PROCESS: &str = "GenericProcess";
pub const HOST_STORAGE_CLASS: &str = "HostStorage";
pub const DOCKER_VOLUME_CLASS: &str = "DockerVolume";
pub const DOCKER_SOCKET_CLASS: &str = "DockerSocket";
pub const READ_WRITE: &str = "ReadWriteFlow";
pub const READ_ONLY: &str = "ReadOnlyFlow";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("service `{service}`: {field} refers to unknown service `{target}`")]
    UnknownService {
        service: String,
        field: &'static str,
        target: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StencilKind {
    Process,
    DataStore,
    ExternalEntity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stencil {
    pub name: String,
    pub kind: StencilKind,
    pub model_class: String,
    pub labels: Vec<String>,
    pub id: String,
    /// Always `None` in builder output.
    pub real_name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlowClass {
    NetworkFlow,
    DataStorageFlow,
    ConfigStorageFlow,
    CertStorageFlow,
    LogStorageFlow,
    DockerSocketFlow,
    DependFlow,
    LinkFlow,
}

impl FlowClass {
    pub const ALL: [FlowClass; 8] = [
        FlowClass::NetworkFlow,
        FlowClass::DataStorageFlow,
        FlowClass::ConfigStorageFlow,
        FlowClass::CertStorageFlow,
        FlowClass::LogStorageFlow,
        FlowClass::DockerSocketFlow,
        FlowClass::DependFlow,
        FlowClass::LinkFlow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FlowClass::NetworkFlow => "NetworkFlow",
            FlowClass::DataStorageFlow => "DataStorageFlow",
            FlowClass::ConfigStorageFlow => "ConfigStorageFlow",
            FlowClass::CertStorageFlow => "CertStorageFlow",
            FlowClass::LogStorageFlow => "LogStorageFlow",
            FlowClass::DockerSocketFlow => "DockerSocketFlow",
            FlowClass::DependFlow => "DependFlow",
            FlowClass::LinkFlow => "LinkFlow",
        }
    }

    pub fn is_storage(self) -> bool {
        matches!(
            self,
            FlowClass::DataStorageFlow
                | FlowClass::ConfigStorageFlow
                | FlowClass::CertStorageFlow
                | FlowClass::LogStorageFlow
                | FlowClass::DockerSocketFlow
        )
    }

    fn for_storage(kind: StorageKind) -> FlowClass {
        match kind {
            StorageKind::Config => FlowClass::ConfigStorageFlow,
            StorageKind::Cert => FlowClass::CertStorageFlow,
            StorageKind::Log => FlowClass::LogStorageFlow,
            StorageKind::DockerSocket => FlowClass::DockerSocketFlow,
            StorageKind::Data | StorageKind::Unknown => FlowClass::DataStorageFlow,
        }
    }
}

impl fmt::Display for FlowClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlowClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FlowClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown flow class `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub name: String,
    pub model_class: FlowClass,
    pub labels: Vec<String>,
    pub source_id: String,
    pub target_id: String,
    pub id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DfdModel {
    pub processes: Vec<Stencil>,
    pub storages: Vec<Stencil>,
    pub externals: Vec<Stencil>,
    pub flows: Vec<Flow>,
}

impl DfdModel {
    pub fn stencils(&self) -> impl Iterator<Item = &Stencil> {
        self.processes
            .iter()
            .chain(&self.storages)
            .chain(&self.externals)
    }

    pub fn stencil_by_id(&self, id: &str) -> Option<&Stencil> {
        self.stencils().find(|s| s.id == id)
    }

    pub fn stencil_by_name(&self, name: &str) -> Option<&Stencil> {
        self.stencils().find(|s| s.name == name)
    }

    pub fn flow_by_name(&self, name: &str) -> Option<&Flow> {
        self.flows.iter().find(|f| f.name == name)
    }

    /// The storage standing for a mounted Docker socket, if any volume
    /// mounts one.
    pub fn docker_socket(&self) -> Option<&Stencil> {
        self.storages.iter().find(|s| s.name == DOCKER_SOCKET)
    }

    pub fn user(&self) -> Option<&Stencil> {
        self.externals.iter().find(|s| s.name == USER)
    }

    /// Checks the structural invariants of a diagram: unique ids, endpoint
    /// existence and the endpoint typing of each flow class.
    pub fn validate(&self) -> Result<(), String> {
        let mut ids: HashMap<&str, StencilKind> = HashMap::new();
        for s in self.stencils() {
            if ids.insert(&s.id, s.kind).is_some() {
                return Err(format!("duplicate id {}", s.id));
            }
            if s.kind == StencilKind::ExternalEntity && s.model_class != REMOTE_USER {
                return Err(format!("external `{}` is not a {REMOTE_USER}", s.name));
            }
            let mut labels = s.labels.clone();
            labels.sort();
            labels.dedup();
            if labels.len() != s.labels.len() {
                return Err(format!("`{}` has duplicate labels", s.name));
            }
        }
        for f in &self.flows {
            if ids.contains_key(f.id.as_str()) {
                return Err(format!("duplicate id {}", f.id));
            }
            let src = ids.get(f.source_id.as_str()).ok_or_else(|| format!("{}: dangling source", f.name))?;
            let dst = ids.get(f.target_id.as_str()).ok_or_else(|| format!("{}: dangling target", f.name))?;
            use StencilKind::*;
            let ok = match f.model_class {
                FlowClass::NetworkFlow => *src == ExternalEntity && *dst == Process,
                FlowClass::DependFlow | FlowClass::LinkFlow => *src == Process && *dst == Process,
                _ => {
                    let rw = f.labels.iter().filter(|l| *l == READ_WRITE || *l == READ_ONLY).count();
                    *src == Process && *dst == DataStore && rw == 1
                }
            };
            if !ok {
                return Err(format!("{}: endpoints do not fit {}", f.name, f.model_class));
            }
        }
        Ok(())
    }
}

/// Produces stencil and flow identifiers. Seeded generators give
/// reproducible UUIDs.
#[derive(Debug, Clone)]
pub struct IdGenerator {
    rng: Option<ChaCha8Rng>,
}

impl IdGenerator {
    pub fn seeded(seed: u64) -> Self {
        IdGenerator {
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    #[cfg(feature = "random-ids")]
    pub fn random() -> Self {
        IdGenerator { rng: None }
    }

    pub fn next_id(&mut self) -> String {
        match &mut self.rng {
            Some(rng) => {
                let mut bytes = [0u8; 16];
                rng.fill_bytes(&mut bytes);
                uuid::Builder::from_random_bytes(bytes).into_uuid().to_string()
            }
            None => random_uuid().to_string(),
        }
    }
}

#[cfg(feature = "random-ids")]
fn random_uuid() -> Uuid {
    Uuid::new_v4()
}

#[cfg(not(feature = "random-ids"))]
fn random_uuid() -> Uuid {
    unreachable!("unseeded generators need the `random-ids` feature")
}

struct Builder<'a> {
    tax: &'a Taxonomy,
    ids: &'a mut IdGenerator,
    model: DfdModel,
    host_storage: Option<String>,
    docker_socket: Option<String>,
    volumes: HashMap<String, String>,
    user: Option<String>,
}

impl Builder<'_> {
    fn add_storage(&mut self, name: String, class: &str) -> String {
        let id = self.ids.next_id();
        self.model.storages.push(Stencil {
            name,
            kind: StencilKind::DataStore,
            model_class: class.to_string(),
            labels: Vec::new(),
            id: id.clone(),
            real_name: None,
        });
        id
    }

    fn user_id(&mut self) -> String {
        if let Some(id) = &self.user {
            return id.clone();
        }
        let id = self.ids.next_id();
        self.model.externals.push(Stencil {
            name: USER.to_string(),
            kind: StencilKind::ExternalEntity,
            model_class: REMOTE_USER.to_string(),
            labels: Vec::new(),
            id: id.clone(),
            real_name: None,
        });
        self.user = Some(id.clone());
        id
    }

    fn add_flow(&mut self, class: FlowClass, labels: Vec<String>, source_id: String, target_id: String) {
        let name = format!("flow{}", self.model.flows.len());
        let id = self.ids.next_id();
        self.model.flows.push(Flow {
            name,
            model_class: class,
            labels,
            source_id,
            target_id,
            id,
        });
    }

    fn storage_for(&mut self, source: VolumeSource, source_name: &str, socket: bool) -> String {
        if socket {
            if let Some(id) = &self.docker_socket {
                return id.clone();
            }
            let id = self.add_storage(DOCKER_SOCKET.to_string(), DOCKER_SOCKET_CLASS);
            self.docker_socket = Some(id.clone());
            return id;
        }
        match source {
            VolumeSource::HostPath => {
                if let Some(id) = &self.host_storage {
                    return id.clone();
                }
                let id = self.add_storage(HOST_STORAGE.to_string(), HOST_STORAGE_CLASS);
                self.host_storage = Some(id.clone());
                id
            }
            VolumeSource::Named => {
                if let Some(id) = self.volumes.get(source_name) {
                    return id.clone();
                }
                let id = self.new_volume();
                self.volumes.insert(source_name.to_string(), id.clone());
                id
            }
            VolumeSource::Anonymous => self.new_volume(),
        }
    }

    fn new_volume(&mut self) -> String {
        let n = self
            .model
            .storages
            .iter()
            .filter(|s| s.model_class == DOCKER_VOLUME_CLASS)
            .count();
        self.add_storage(format!("storage{n}"), DOCKER_VOLUME_CLASS)
    }
}

/// Builds the diagram for a Compose model.
///
/// Processes follow document order. Flows are numbered in three passes:
/// network and storage flows service by service, then all `depends_on`
/// flows, then all `links` flows.
pub fn build_model(
    compose: &ComposeModel,
    tax: &Taxonomy,
    ids: &mut IdGenerator,
) -> Result<DfdModel, BuildError> {
    let index: HashMap<&str, usize> = compose
        .services
        .iter()
        .enumerate()
        .map(|(i, s)| (s.name.as_str(), i))
        .collect();
    for service in &compose.services {
        let edges = service
            .depends_on
            .iter()
            .map(|d| ("depends_on", d))
            .chain(service.links.iter().map(|l| ("links", &l.target_service)));
        for (field, target) in edges {
            if !index.contains_key(target.as_str()) {
                return Err(BuildError::UnknownService {
                    service: service.name.clone(),
                    field,
                    target: target.clone(),
                });
            }
        }
    }

    let mut b = Builder {
        tax,
        ids,
        model: DfdModel::default(),
        host_storage: None,
        docker_socket: None,
        volumes: HashMap::new(),
        user: None,
    };

    for (i, service) in compose.services.iter().enumerate() {
        let class = service
            .image
            .as_deref()
            .map(normalize_image)
            .and_then(|img| b.tax.classify_image(&img));
        let (model_class, mut labels) = match class {
            Some(c) => (c.model_class.to_string(), c.labels.to_vec()),
            None => (GENERIC_PROCESS.to_string(), Vec::new()),
        };
        for port in &service.ports {
            if let Some(entry) = b.tax.classify_port(port.container_port) {
                if !labels.contains(&entry.server_label) {
                    labels.push(entry.server_label.clone());
                }
            }
        }
        let id = b.ids.next_id();
        b.model.processes.push(Stencil {
            name: format!("process{i}"),
            kind: StencilKind::Process,
            model_class,
            labels,
            id,
            real_name: None,
        });
    }

    for (i, service) in compose.services.iter().enumerate() {
        let process_id = b.model.processes[i].id.clone();
        for port in &service.ports {
            let user = b.user_id();
            let labels = b
                .tax
                .classify_port(port.container_port)
                .map(|e| vec![e.flow_label.clone()])
                .unwrap_or_default();
            b.add_flow(FlowClass::NetworkFlow, labels, user, process_id.clone());
        }
        for volume in &service.volumes {
            let socket = b.tax.is_docker_socket(&volume.container_path)
                || (volume.source_kind() == VolumeSource::HostPath
                    && b.tax.is_docker_socket(&volume.source));
            let class = if socket {
                FlowClass::DockerSocketFlow
            } else {
                FlowClass::for_storage(b.tax.classify_path(&volume.container_path))
            };
            let storage = b.storage_for(volume.source_kind(), &volume.source, socket);
            let mode = if volume.read_only { READ_ONLY } else { READ_WRITE };
            b.add_flow(class, vec![mode.to_string()], process_id.clone(), storage);
        }
    }

    for (i, service) in compose.services.iter().enumerate() {
        for dep in &service.depends_on {
            let source = b.model.processes[i].id.clone();
            let target = b.model.processes[index[dep.as_str()]].id.clone();
            b.add_flow(FlowClass::DependFlow, Vec::new(), source, target);
        }
    }
    for (i, service) in compose.services.iter().enumerate() {
        for link in &service.links {
            let source = b.model.processes[i].id.clone();
            let target = b.model.processes[index[link.target_service.as_str()]].id.clone();
            b.add_flow(FlowClass::LinkFlow, Vec::new(), source, target);
        }
    }

    Ok(b.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::parse_compose;

    const WEB_MONGO: &str = "services:\n  web:\n    image: php:8.0\n    volumes:\n      - ./app:/var/www/html\n    depends_on:\n      - mongodb\n    ports:\n      - 80:80\n  mongodb:\n    image: mongo:latest\n    volumes:\n      - dbdata:/data/db\n    links:\n      - web\n";

    fn build(text: &str) -> DfdModel {
        let compose = parse_compose(text).unwrap();
        build_model(&compose, &Taxonomy::starter(), &mut IdGenerator::seeded(1)).unwrap()
    }

    fn endpoints(m: &DfdModel, f: &Flow) -> (String, String) {
        (
            m.stencil_by_id(&f.source_id).unwrap().name.clone(),
            m.stencil_by_id(&f.target_id).unwrap().name.clone(),
        )
    }

    #[test]
    fn worked_example() {
        let m = build(WEB_MONGO);
        m.validate().unwrap();
        let p0 = &m.processes[0];
        assert_eq!((p0.name.as_str(), p0.model_class.as_str()), ("process0", "PHPEnv"));
        assert_eq!(p0.labels, vec!["DevelopmentEnvironment", "HTTPServer"]);
        let p1 = &m.processes[1];
        assert_eq!((p1.name.as_str(), p1.model_class.as_str()), ("process1", "NoSQLDatabase"));
        assert_eq!(p1.labels, vec!["Database"]);

        let storages: Vec<_> = m
            .storages
            .iter()
            .map(|s| (s.name.as_str(), s.model_class.as_str()))
            .collect();
        assert_eq!(storages, vec![("hostStorage", "HostStorage"), ("storage0", "DockerVolume")]);
        assert_eq!(m.externals.len(), 1);
        assert_eq!(m.externals[0].name, "user");
        assert_eq!(m.externals[0].model_class, "RemoteUser");

        let flows: Vec<_> = m
            .flows
            .iter()
            .map(|f| {
                let (s, t) = endpoints(&m, f);
                (f.name.clone(), f.model_class, f.labels.clone(), s, t)
            })
            .collect();
        let expect = |n: &str, c, l: &[&str], s: &str, t: &str| {
            (n.to_string(), c, l.iter().map(|x| x.to_string()).collect::<Vec<_>>(), s.to_string(), t.to_string())
        };
        assert_eq!(
            flows,
            vec![
                expect("flow0", FlowClass::NetworkFlow, &["HTTPFlow"], "user", "process0"),
                expect("flow1", FlowClass::DataStorageFlow, &["ReadWriteFlow"], "process0", "hostStorage"),
                expect("flow2", FlowClass::DataStorageFlow, &["ReadWriteFlow"], "process1", "storage0"),
                expect("flow3", FlowClass::DependFlow, &[], "process0", "process1"),
                expect("flow4", FlowClass::LinkFlow, &[], "process1", "process0"),
            ]
        );
        assert!(m.stencils().all(|s| s.real_name.is_none()));
    }

    #[test]
    fn lone_service() {
        let m = build("services:\n  a:\n    image: alpine\n");
        assert_eq!(m.processes.len(), 1);
        assert_eq!(m.processes[0].model_class, GENERIC_PROCESS);
        assert!(m.processes[0].labels.is_empty());
        assert!(m.storages.is_empty() && m.externals.is_empty() && m.flows.is_empty());
    }

    #[test]
    fn read_only_config_volume() {
        let m = build("services:\n  a:\n    image: nginx\n    volumes: [\"./conf:/etc/nginx:ro\"]\n");
        let f = &m.flows[0];
        assert_eq!(f.model_class, FlowClass::ConfigStorageFlow);
        assert_eq!(f.labels, vec!["ReadOnlyFlow"]);
        assert_eq!(endpoints(&m, f).1, "hostStorage");
    }

    #[test]
    fn docker_socket_storage() {
        let m = build("services:\n  a:\n    image: traefik\n    volumes: [\"/var/run/docker.sock:/var/run/docker.sock\"]\n  b:\n    volumes: [\"/var/run/docker.sock:/var/run/docker.sock:ro\", \"./x:/data\"]\n");
        let socket = m.docker_socket().unwrap();
        assert_eq!(m.storages.iter().filter(|s| s.name == DOCKER_SOCKET).count(), 1);
        let socket_flows: Vec<_> = m.flows.iter().filter(|f| f.target_id == socket.id).collect();
        assert_eq!(socket_flows.len(), 2);
        assert!(socket_flows.iter().all(|f| f.model_class == FlowClass::DockerSocketFlow));
        assert_eq!(socket_flows[0].labels, vec![READ_WRITE]);
        assert_eq!(socket_flows[1].labels, vec![READ_ONLY]);
        // the ./x mount still lands on hostStorage
        assert_eq!(endpoints(&m, m.flows.last().unwrap()).1, HOST_STORAGE);

        assert!(build(WEB_MONGO).docker_socket().is_none());
    }

    #[test]
    fn socket_detected_from_host_side() {
        let m = build("services:\n  a:\n    volumes: [\"/var/run/docker.sock:/tmp/docker.sock\"]\n");
        assert_eq!(m.flows[0].model_class, FlowClass::DockerSocketFlow);
        assert!(m.docker_socket().is_some());
    }

    #[test]
    fn unknown_path_defaults_to_data() {
        let m = build("services:\n  a:\n    volumes: [\"v:/opt/nowhere\"]\n");
        assert_eq!(m.flows[0].model_class, FlowClass::DataStorageFlow);
    }

    #[test]
    fn volumes_shared_by_name_anonymous_kept_apart() {
        let m = build("services:\n  a:\n    volumes: [\"v:/data\", \"/x\", \"/y\"]\n  b:\n    volumes: [\"v:/data\"]\n");
        let names: Vec<_> = m.storages.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, vec!["storage0", "storage1", "storage2"]);
        assert_eq!(m.flows[0].target_id, m.flows[3].target_id);
    }

    #[test]
    fn two_ports_two_flows() {
        let m = build("services:\n  a:\n    image: nginx\n    ports: [\"80:80\", \"443:443\"]\n");
        assert_eq!(m.flows.len(), 2);
        assert_eq!(m.flows[0].labels, vec!["HTTPFlow"]);
        assert_eq!(m.flows[1].labels, vec!["HTTPSFlow"]);
        assert_eq!(m.processes[0].labels, vec!["WebServer", "HTTPServer", "HTTPSServer"]);
        assert_eq!(m.externals.len(), 1);
    }

    #[test]
    fn container_port_decides_class() {
        let m = build("services:\n  a:\n    ports: [\"8081:80\", \"61999\"]\n");
        assert_eq!(m.flows[0].labels, vec!["HTTPFlow"]);
        assert!(m.flows[1].labels.is_empty());
    }

    #[test]
    fn unknown_dependency_is_an_error() {
        let compose = parse_compose("services:\n  a:\n    depends_on: [ghost]\n").unwrap();
        let err = build_model(&compose, &Taxonomy::starter(), &mut IdGenerator::seeded(0)).unwrap_err();
        assert_eq!(
            err,
            BuildError::UnknownService {
                service: "a".into(),
                field: "depends_on",
                target: "ghost".into()
            }
        );
        let compose = parse_compose("services:\n  a:\n    links: [\"ghost:g\"]\n").unwrap();
        assert!(build_model(&compose, &Taxonomy::starter(), &mut IdGenerator::seeded(0)).is_err());
    }

    #[test]
    fn seeded_ids_are_reproducible() {
        assert_eq!(build(WEB_MONGO), build(WEB_MONGO));
        let compose = parse_compose(WEB_MONGO).unwrap();
        let other = build_model(&compose, &Taxonomy::starter(), &mut IdGenerator::seeded(2)).unwrap();
        assert_ne!(other.processes[0].id, build(WEB_MONGO).processes[0].id);
        assert!(Uuid::parse_str(&other.processes[0].id).is_ok());
    }

    #[test]
    fn flow_class_names_round_trip() {
        for c in FlowClass::ALL {
            assert_eq!(c.as_str().parse::<FlowClass>().unwrap(), c);
        }
        assert!("Nope".parse::<FlowClass>().is_err());
    }
}
