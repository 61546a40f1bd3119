//! Test support: a random diagram generator and two reference
//! implementations written for clarity, not speed.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use dfd_core::dfd::{DfdModel, Flow, FlowClass, Stencil, StencilKind};
use dfd_core::graph::{vocab, KnowledgeGraph, Name, RDF_TYPE};
use dfd_core::pattern::{MatchRow, Node, PatternQuery, TripleAtom};
use dfd_core::reasoner::{Atom, ClassExpression, Rule, RuleSet};
use dfd_core::taxonomy::Taxonomy;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const WEB_MONGO: &str = include_str!("../fixtures/web_mongo.yml");

pub type NamedTriple = (Name, Name, Name);

// ---------------------------------------------------------------------------
// Random diagrams

const STORAGE_LABELS: [&str; 2] = ["ReadWriteFlow", "ReadOnlyFlow"];
const NETWORK_LABELS: [&str; 6] = ["HTTPFlow", "HTTPSFlow", "DBFlow", "SSHFlow", "AMQPFlow", "MQTTFlow"];

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).copied().expect("non-empty")
}

/// A structurally valid diagram with at most `max_stencils` stencils.
/// Processes draw their classes from the starter taxonomy, so the
/// pattern catalog has something to find.
pub fn random_model(rng: &mut ChaCha8Rng, max_stencils: usize) -> DfdModel {
    let tax = Taxonomy::starter();
    let n_processes = rng.gen_range(1..=max_stencils.saturating_sub(2).max(1));
    let room = max_stencils - n_processes;
    let n_storages = rng.gen_range(0..room);
    let with_user = room > n_storages && rng.gen_bool(0.8);

    let mut next_id = 0;
    let mut id = || {
        next_id += 1;
        format!("id-{next_id}")
    };
    let mut m = DfdModel::default();
    for i in 0..n_processes {
        let (model_class, labels) = if rng.gen_bool(0.85) {
            let entry = tax.service_entries.choose(rng).expect("taxonomy has services");
            let mut labels = entry.labels.clone();
            if rng.gen_bool(0.3) {
                labels.push(pick(rng, &["HTTPServer", "HTTPSServer", "DBServer"]).to_string());
            }
            labels.sort();
            labels.dedup();
            (entry.model_name.clone(), labels)
        } else {
            ("GenericProcess".to_string(), Vec::new())
        };
        m.processes.push(Stencil {
            name: format!("process{i}"),
            kind: StencilKind::Process,
            model_class,
            labels,
            id: id(),
            real_name: None,
        });
    }
    for i in 0..n_storages {
        let (name, class) = match i {
            0 => ("hostStorage".to_string(), "HostStorage"),
            1 if rng.gen_bool(0.5) => ("dockerSocket".to_string(), "DockerSocket"),
            _ => (format!("storage{i}"), "DockerVolume"),
        };
        m.storages.push(Stencil {
            name,
            kind: StencilKind::DataStore,
            model_class: class.to_string(),
            labels: Vec::new(),
            id: id(),
            real_name: None,
        });
    }
    if with_user {
        m.externals.push(Stencil {
            name: "user".into(),
            kind: StencilKind::ExternalEntity,
            model_class: "RemoteUser".into(),
            labels: Vec::new(),
            id: id(),
            real_name: None,
        });
    }

    let n_flows = rng.gen_range(0..=2 * max_stencils);
    for i in 0..n_flows {
        let p = m.processes.choose(rng).expect("processes").id.clone();
        let choice = rng.gen_range(0..3);
        let (class, labels, source, target) = if choice == 0 && !m.storages.is_empty() {
            let class = *[
                FlowClass::DataStorageFlow,
                FlowClass::ConfigStorageFlow,
                FlowClass::CertStorageFlow,
                FlowClass::LogStorageFlow,
            ]
            .choose(rng)
            .expect("classes");
            let s = m.storages.choose(rng).expect("storages").id.clone();
            (class, vec![pick(rng, &STORAGE_LABELS).to_string()], p, s)
        } else if choice == 1 && with_user {
            let user = m.externals[0].id.clone();
            let labels = if rng.gen_bool(0.8) {
                vec![pick(rng, &NETWORK_LABELS).to_string()]
            } else {
                Vec::new()
            };
            (FlowClass::NetworkFlow, labels, user, p)
        } else {
            let q = m.processes.choose(rng).expect("processes").id.clone();
            let class = if rng.gen_bool(0.5) {
                FlowClass::DependFlow
            } else {
                FlowClass::LinkFlow
            };
            (class, Vec::new(), p, q)
        };
        m.flows.push(Flow {
            name: format!("flow{i}"),
            model_class: class,
            labels,
            source_id: source,
            target_id: target,
            id: id(),
        });
    }
    m.validate().expect("generator produces valid diagrams");
    m
}

// ---------------------------------------------------------------------------
// Naive reasoner

fn bm(s: &str) -> Name {
    Name::bm(s)
}

fn rdf_type() -> Name {
    Name::builtin(RDF_TYPE)
}

/// Members of `expr` in `facts`, found by trying every individual.
fn satisfies(facts: &BTreeSet<NamedTriple>, x: &Name, expr: &ClassExpression) -> bool {
    expr.atoms.iter().all(|atom| match atom {
        Atom::Class(c) => facts.contains(&(x.clone(), rdf_type(), c.clone())),
        Atom::Exists { property, filler } => facts
            .iter()
            .any(|(s, p, o)| s == x && p == property && satisfies(facts, o, filler)),
    })
}

/// Applies every enabled rule to every combination of facts until nothing
/// changes. Works on names only and shares no code with the engine.
pub fn naive_materialize(g: &KnowledgeGraph, rules: &RuleSet) -> BTreeSet<NamedTriple> {
    let on = |r: &Rule| rules.rules.contains(r);
    let subclass: BTreeSet<(Name, Name)> = g.named_subclass_axioms();
    let mut inverse: BTreeSet<(Name, Name)> = BTreeSet::from([
        (bm(vocab::HAS_SOURCE), bm(vocab::IS_SOURCE_OF)),
        (bm(vocab::HAS_TARGET), bm(vocab::IS_TARGET_OF)),
    ]);
    let mut symmetric: BTreeSet<Name> = BTreeSet::from([bm(vocab::RELATES)]);
    for (a, b) in g.named_property_axioms() {
        if a == b {
            symmetric.insert(a);
        } else {
            inverse.insert((a, b));
        }
    }
    let templates: Vec<_> = rules
        .rules
        .iter()
        .filter_map(|r| match r {
            Rule::ThreatTemplate(t) => Some(t.clone()),
            _ => None,
        })
        .collect();

    let mut facts = g.named_triples();
    loop {
        let mut new = BTreeSet::new();
        for (s, p, o) in &facts {
            if on(&Rule::SubclassProp) && *p == rdf_type() {
                for (c, d) in &subclass {
                    if c == o {
                        new.insert((s.clone(), rdf_type(), d.clone()));
                    }
                }
            }
            if on(&Rule::InverseProp) {
                for (a, b) in &inverse {
                    if p == a {
                        new.insert((o.clone(), b.clone(), s.clone()));
                    }
                    if p == b {
                        new.insert((o.clone(), a.clone(), s.clone()));
                    }
                }
            }
            if on(&Rule::SymmetricProp) && symmetric.contains(p) {
                new.insert((o.clone(), p.clone(), s.clone()));
            }
            if on(&Rule::EdgeDerivation) && (*p == bm(vocab::IS_SOURCE_OF) || *p == bm(vocab::IS_TARGET_OF)) {
                new.insert((s.clone(), bm(vocab::IS_EDGE_OF), o.clone()));
            }
            if on(&Rule::GenericThreats) && *p == rdf_type() && *o == bm(vocab::PROCESS) {
                for t in vocab::GENERIC_THREATS {
                    new.insert((s.clone(), bm(vocab::IS_AFFECTED_BY), bm(t)));
                }
            }
            if on(&Rule::RelatesDerivation) && *p == bm(vocab::HAS_SOURCE) {
                for (f, q, y) in &facts {
                    if f == s && *q == bm(vocab::HAS_TARGET) && y != o {
                        new.insert((o.clone(), bm(vocab::RELATES), y.clone()));
                    }
                }
            }
        }
        let individuals: BTreeSet<Name> = facts.iter().flat_map(|(s, _, o)| [s.clone(), o.clone()]).collect();
        for t in &templates {
            for x in &individuals {
                if satisfies(&facts, x, &t.condition) {
                    if let Some(threat) = &t.threat {
                        new.insert((x.clone(), bm(vocab::IS_AFFECTED_BY), threat.clone()));
                    }
                    if let Some(class) = &t.derived_class {
                        new.insert((x.clone(), rdf_type(), class.clone()));
                    }
                }
            }
        }
        let before = facts.len();
        facts.extend(new);
        if facts.len() == before {
            return facts;
        }
    }
}

// ---------------------------------------------------------------------------
// Brute-force pattern evaluation

type Assignment = BTreeMap<String, Name>;

fn node_value<'a>(n: &'a Node, a: &'a Assignment) -> Option<&'a Name> {
    match n {
        Node::Const(c) => Some(c),
        Node::Var(v) => a.get(v),
    }
}

fn vars_in_order(atoms: &[TripleAtom]) -> Vec<String> {
    let mut vars = Vec::new();
    for a in atoms {
        for v in a.vars() {
            if !vars.iter().any(|x: &String| x == v) {
                vars.push(v.to_string());
            }
        }
    }
    vars
}

/// Every assignment of `vars` over `universe` satisfying all `atoms`.
/// Atoms are checked as soon as all their variables are assigned, which
/// prunes the enumeration without changing its result.
fn enumerate(facts: &BTreeSet<NamedTriple>, universe: &[Name], atoms: &[TripleAtom], vars: &[String]) -> Vec<Assignment> {
    fn go(
        facts: &BTreeSet<NamedTriple>,
        universe: &[Name],
        atoms: &[TripleAtom],
        vars: &[String],
        a: &mut Assignment,
        out: &mut Vec<Assignment>,
    ) {
        for atom in atoms {
            if let (Some(s), Some(o)) = (node_value(&atom.subject, a), node_value(&atom.object, a)) {
                if !facts.contains(&(s.clone(), atom.predicate.clone(), o.clone())) {
                    return;
                }
            }
        }
        let Some(v) = vars.iter().find(|v| !a.contains_key(*v)) else {
            out.push(a.clone());
            return;
        };
        for value in universe {
            a.insert(v.clone(), value.clone());
            go(facts, universe, atoms, vars, a, out);
        }
        a.remove(v);
    }
    let mut out = Vec::new();
    go(facts, universe, atoms, vars, &mut Assignment::new(), &mut out);
    out
}

/// Rows of `q` over `g` by definition: all satisfying assignments of the
/// body, minus those compatible with some block solution on a non-empty
/// set of shared variables, projected.
pub fn brute_force(g: &KnowledgeGraph, q: &PatternQuery) -> BTreeSet<MatchRow> {
    let facts = g.named_triples();
    let universe: Vec<Name> = facts
        .iter()
        .flat_map(|(s, _, o)| [s.clone(), o.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let body = enumerate(&facts, &universe, &q.body, &vars_in_order(&q.body));
    let blocks: Vec<Vec<Assignment>> = q
        .minus_blocks
        .iter()
        .map(|b| enumerate(&facts, &universe, b, &vars_in_order(b)))
        .collect();
    body.into_iter()
        .filter(|mu| {
            !blocks.iter().flatten().any(|nu| {
                let shared: Vec<&String> = mu.keys().filter(|k| nu.contains_key(*k)).collect();
                !shared.is_empty() && shared.iter().all(|k| mu[*k] == nu[*k])
            })
        })
        .map(|mu| MatchRow {
            bindings: q.projection.iter().map(|v| (v.clone(), mu[v].clone())).collect(),
        })
        .collect()
}
