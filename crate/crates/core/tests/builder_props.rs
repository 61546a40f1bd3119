use dfd_core::compose::parse_compose;
use dfd_core::dfd::{build_model, FlowClass, IdGenerator, StencilKind};
use dfd_core::export::{export_dot, export_model, parse_model};
use dfd_core::graph::lower;
use dfd_core::Taxonomy;
use proptest::prelude::*;

const IMAGES: [&str; 8] = [
    "nginx:1.25",
    "php:8-fpm",
    "mongo",
    "registry.example.com/team/postgres:15",
    "redis@sha256:abc",
    "acme/secret-internal-app:2",
    "grafana/grafana",
    "traefik:v2",
];
const PORTS: [&str; 6] = ["80:80", "8443:443", "127.0.0.1:5432:5432", "3000", "6379:6379/tcp", "9999:22"];
const VOLUMES: [&str; 8] = [
    "./site:/var/www/html",
    "/var/run/docker.sock:/var/run/docker.sock:ro",
    "privatevol:/data/db",
    "./conf/nginx.conf:/etc/nginx/nginx.conf:ro",
    "/srv/secret-logs:/var/log",
    "/opt/x:/opt/unknown",
    "certs:/etc/ssl:ro",
    "/tmp/cache",
];

#[derive(Debug, Clone)]
struct Svc {
    image: usize,
    ports: Vec<usize>,
    volumes: Vec<usize>,
    depends: Vec<usize>,
    links: Vec<usize>,
}

fn svc_strategy(n: usize) -> impl Strategy<Value = Svc> {
    (
        0..IMAGES.len(),
        prop::collection::vec(0..PORTS.len(), 0..3),
        prop::collection::vec(0..VOLUMES.len(), 0..3),
        prop::collection::btree_set(0..n, 0..3),
        prop::collection::btree_set(0..n, 0..2),
    )
        .prop_map(|(image, ports, volumes, depends, links)| Svc {
            image,
            ports,
            volumes,
            depends: depends.into_iter().collect(),
            links: links.into_iter().collect(),
        })
}

fn compose_strategy() -> impl Strategy<Value = Vec<Svc>> {
    (1usize..6).prop_flat_map(|n| prop::collection::vec(svc_strategy(n), n))
}

fn render(services: &[Svc]) -> String {
    let mut out = String::from("services:\n");
    for (i, s) in services.iter().enumerate() {
        out.push_str(&format!("  secretservice{i}:\n    image: \"{}\"\n", IMAGES[s.image]));
        let mut ports: Vec<_> = s.ports.clone();
        ports.dedup();
        if !ports.is_empty() {
            out.push_str("    ports:\n");
            for p in ports {
                out.push_str(&format!("      - \"{}\"\n", PORTS[p]));
            }
        }
        if !s.volumes.is_empty() {
            out.push_str("    volumes:\n");
            for v in &s.volumes {
                out.push_str(&format!("      - \"{}\"\n", VOLUMES[*v]));
            }
        }
        for (key, targets) in [("depends_on", &s.depends), ("links", &s.links)] {
            if !targets.is_empty() {
                out.push_str(&format!("    {key}:\n"));
                for t in targets {
                    out.push_str(&format!("      - secretservice{t}\n"));
                }
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn count_law(services in compose_strategy()) {
        let text = render(&services);
        let compose = parse_compose(&text).unwrap();
        let m = build_model(&compose, &Taxonomy::starter(), &mut IdGenerator::seeded(1)).unwrap();
        let expected: usize = compose
            .services
            .iter()
            .map(|s| s.ports.len() + s.volumes.len() + s.depends_on.len() + s.links.len())
            .sum();
        prop_assert_eq!(m.flows.len(), expected);
        prop_assert_eq!(m.processes.len(), services.len());
    }

    #[test]
    fn endpoint_typing(services in compose_strategy()) {
        let compose = parse_compose(&render(&services)).unwrap();
        let m = build_model(&compose, &Taxonomy::starter(), &mut IdGenerator::seeded(2)).unwrap();
        prop_assert!(m.validate().is_ok(), "{:?}", m.validate());
        for f in &m.flows {
            let src = m.stencil_by_id(&f.source_id).unwrap().kind;
            let dst = m.stencil_by_id(&f.target_id).unwrap().kind;
            match f.model_class {
                FlowClass::NetworkFlow => prop_assert_eq!((src, dst), (StencilKind::ExternalEntity, StencilKind::Process)),
                FlowClass::DependFlow | FlowClass::LinkFlow => prop_assert_eq!((src, dst), (StencilKind::Process, StencilKind::Process)),
                _ => prop_assert_eq!((src, dst), (StencilKind::Process, StencilKind::DataStore)),
            }
        }
        prop_assert_eq!(m.user().is_some(), m.flows.iter().any(|f| f.model_class == FlowClass::NetworkFlow));
    }

    #[test]
    fn depersonalized(services in compose_strategy()) {
        let compose = parse_compose(&render(&services)).unwrap();
        let m = build_model(&compose, &Taxonomy::starter(), &mut IdGenerator::seeded(3)).unwrap();
        let doc = export_model(&m) + &export_dot(&m);
        for secret in ["secretservice", "secret-internal", "privatevol", "/srv", "./site", "registry.example", "certs:"] {
            prop_assert!(!doc.contains(secret), "`{}` leaked", secret);
        }
        prop_assert!(m.stencils().all(|s| s.real_name.is_none()));
    }

    #[test]
    fn seeded_runs_are_byte_identical(services in compose_strategy(), seed in any::<u64>()) {
        let compose = parse_compose(&render(&services)).unwrap();
        let tax = Taxonomy::starter();
        let a = build_model(&compose, &tax, &mut IdGenerator::seeded(seed)).unwrap();
        let b = build_model(&compose, &tax, &mut IdGenerator::seeded(seed)).unwrap();
        prop_assert_eq!(export_model(&a), export_model(&b));
        prop_assert_eq!(export_dot(&a), export_dot(&b));
        prop_assert_eq!(lower(&a, &tax).unwrap().len(), lower(&b, &tax).unwrap().len());
    }

    #[test]
    fn model_document_round_trips(services in compose_strategy()) {
        let compose = parse_compose(&render(&services)).unwrap();
        let m = build_model(&compose, &Taxonomy::starter(), &mut IdGenerator::seeded(4)).unwrap();
        prop_assert_eq!(parse_model(&export_model(&m)).unwrap(), m);
    }
}
