//! Triple store for one diagram.
//!
//! Terms are interned per graph: a [`Term`] is an index into the graph's
//! name table, so term equality is integer equality. [`Name`] is the owned,
//! graph-independent form used by queries, templates and serializers.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::dfd::{DfdModel, StencilKind};
use crate::taxonomy::Taxonomy;

pub const BASE_MODEL_IRI: &str = "http://www.grsu.by/net/OdTMBaseThreatModel#";
pub const CATALOG_IRI: &str = "urn:dfd:threats#";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Namespace {
    /// `rdf:`, `rdfs:` and `owl:` terms; the local name carries the prefix.
    Builtin,
    BaseModel,
    /// The per-diagram namespace: instances and taxonomy classes.
    Local,
    /// Threat individuals and derived classes from template catalogs.
    Catalog,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name {
    pub namespace: Namespace,
    pub local_name: String,
}

impl Name {
    pub fn new(namespace: Namespace, local_name: impl Into<String>) -> Self {
        Name {
            namespace,
            local_name: local_name.into(),
        }
    }
    pub fn bm(local_name: impl Into<String>) -> Self {
        Name::new(Namespace::BaseModel, local_name)
    }
    pub fn local(local_name: impl Into<String>) -> Self {
        Name::new(Namespace::Local, local_name)
    }
    pub fn catalog(local_name: impl Into<String>) -> Self {
        Name::new(Namespace::Catalog, local_name)
    }
    pub fn builtin(qualified: &str) -> Self {
        Name::new(Namespace::Builtin, qualified)
    }

    /// Parses a prefixed name (`bm:Process`, `:user`, `tc:x`, `rdf:type`).
    /// Bare names resolve to the base model when they belong to its
    /// vocabulary and to the local namespace otherwise.
    pub fn parse(text: &str) -> Option<Name> {
        let text = text.trim();
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            return None;
        }
        let name = match text.split_once(':') {
            Some(("", rest)) => Name::local(rest),
            Some(("bm" | "b", rest)) => Name::bm(rest),
            Some(("tc", rest)) => Name::catalog(rest),
            Some(("rdf" | "rdfs" | "owl", _)) => Name::builtin(text),
            Some(_) => return None,
            None if text == "a" => Name::builtin(RDF_TYPE),
            None if vocab::is_base_name(text) => Name::bm(text),
            None => Name::local(text),
        };
        (!name.local_name.is_empty()).then_some(name)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.namespace {
            Namespace::Builtin => f.write_str(&self.local_name),
            Namespace::BaseModel => write!(f, "bm:{}", self.local_name),
            Namespace::Local => write!(f, ":{}", self.local_name),
            Namespace::Catalog => write!(f, "tc:{}", self.local_name),
        }
    }
}

pub const RDF_TYPE: &str = "rdf:type";

/// Names of the base threat model vocabulary.
pub mod vocab {
    pub const STENCIL: &str = "Stencil";
    pub const TARGET: &str = "Target";
    pub const PROCESS: &str = "Process";
    pub const EXTERNAL_INTERACTOR: &str = "ExternalInteractor";
    pub const DATA_STORE: &str = "DataStore";
    pub const DATA_FLOW: &str = "DataFlow";
    pub const TRUST_BOUNDARY: &str = "TrustBoundary";

    pub const CLASSIFIED: &str = "Classified";
    pub const CLASSIFIED_IS_EDGE: &str = "ClassifiedIsEdge";
    pub const AS_SOURCE: &str = "AffectedByGenericProcessThreatAsSource";
    pub const AS_TARGET: &str = "AffectedByGenericProcessThreatAsTarget";

    pub const HAS_SOURCE: &str = "hasSource";
    pub const IS_SOURCE_OF: &str = "isSourceOf";
    pub const HAS_TARGET: &str = "hasTarget";
    pub const IS_TARGET_OF: &str = "isTargetOf";
    pub const RELATES: &str = "relates";
    pub const IS_EDGE_OF: &str = "isEdgeOf";
    pub const IS_AFFECTED_BY: &str = "isAffectedBy";

    pub const STENCIL_CLASSES: [&str; 7] = [
        STENCIL,
        TARGET,
        PROCESS,
        EXTERNAL_INTERACTOR,
        DATA_STORE,
        DATA_FLOW,
        TRUST_BOUNDARY,
    ];
    pub const DERIVED_CLASSES: [&str; 4] = [CLASSIFIED, CLASSIFIED_IS_EDGE, AS_SOURCE, AS_TARGET];
    pub const PROPERTIES: [&str; 7] = [
        HAS_SOURCE,
        IS_SOURCE_OF,
        HAS_TARGET,
        IS_TARGET_OF,
        RELATES,
        IS_EDGE_OF,
        IS_AFFECTED_BY,
    ];
    pub const GENERIC_THREATS: [&str; 6] = [
        "threat_GenericSpoofing",
        "threat_GenericTampering",
        "threat_GenericRepudiation",
        "threat_GenericInformationDisclosure",
        "threat_GenericDenialOfService",
        "threat_GenericElevationOfPrivilege",
    ];

    pub fn is_base_name(name: &str) -> bool {
        STENCIL_CLASSES.contains(&name)
            || DERIVED_CLASSES.contains(&name)
            || PROPERTIES.contains(&name)
            || GENERIC_THREATS.contains(&name)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("`{0}` collides with a base-model class name")]
    ReservedName(String),
    #[error("subclass axiom {sub} ⊑ {sup} would create a cycle")]
    Cycle { sub: String, sup: String },
    #[error("empty term")]
    EmptyTerm,
}

/// Interned term handle, valid only for the graph that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term(u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Self {
        Triple {
            subject,
            predicate,
            object,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PropertyAxiom {
    /// Stored with the smaller term first.
    InverseOf(Term, Term),
    Symmetric(Term),
}

/// A set of triples plus class-hierarchy and property axioms.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    names: Vec<Name>,
    index: HashMap<Name, Term>,
    triples: HashSet<Triple>,
    by_subject_predicate: HashMap<(Term, Term), Vec<Term>>,
    by_predicate_object: HashMap<(Term, Term), Vec<Term>>,
    by_predicate: HashMap<Term, Vec<(Term, Term)>>,
    subclass_axioms: BTreeSet<(Term, Term)>,
    property_axioms: BTreeSet<PropertyAxiom>,
    classes: BTreeSet<Term>,
    properties: BTreeSet<Term>,
}

impl Default for KnowledgeGraph {
    fn default() -> Self {
        Self::new()
    }
}

/// `rdf:type` is always the first interned term.
const RDF_TYPE_TERM: Term = Term(0);

impl KnowledgeGraph {
    pub fn new() -> Self {
        let mut g = KnowledgeGraph {
            names: Vec::new(),
            index: HashMap::new(),
            triples: HashSet::new(),
            by_subject_predicate: HashMap::new(),
            by_predicate_object: HashMap::new(),
            by_predicate: HashMap::new(),
            subclass_axioms: BTreeSet::new(),
            property_axioms: BTreeSet::new(),
            classes: BTreeSet::new(),
            properties: BTreeSet::new(),
        };
        g.intern(&Name::builtin(RDF_TYPE));
        g
    }

    pub fn intern(&mut self, name: &Name) -> Term {
        if let Some(&t) = self.index.get(name) {
            return t;
        }
        let t = Term(self.names.len() as u32);
        self.names.push(name.clone());
        self.index.insert(name.clone(), t);
        t
    }

    pub fn lookup(&self, name: &Name) -> Option<Term> {
        self.index.get(name).copied()
    }

    pub fn name(&self, term: Term) -> &Name {
        &self.names[term.0 as usize]
    }

    pub fn rdf_type(&self) -> Term {
        RDF_TYPE_TERM
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    /// Inserts a triple; returns `false` if it was already present.
    pub fn insert(&mut self, t: Triple) -> bool {
        if !self.triples.insert(t) {
            return false;
        }
        self.by_subject_predicate
            .entry((t.subject, t.predicate))
            .or_default()
            .push(t.object);
        self.by_predicate_object
            .entry((t.predicate, t.object))
            .or_default()
            .push(t.subject);
        self.by_predicate
            .entry(t.predicate)
            .or_default()
            .push((t.subject, t.object));
        if t.predicate == RDF_TYPE_TERM {
            self.classes.insert(t.object);
        } else {
            self.properties.insert(t.predicate);
        }
        true
    }

    pub fn insert_names(&mut self, s: &Name, p: &Name, o: &Name) -> Result<bool, GraphError> {
        if [s, p, o].iter().any(|n| n.local_name.is_empty()) {
            return Err(GraphError::EmptyTerm);
        }
        let t = Triple::new(self.intern(s), self.intern(p), self.intern(o));
        Ok(self.insert(t))
    }

    pub fn assert_type(&mut self, individual: &Name, class: &Name) {
        let t = Triple::new(self.intern(individual), RDF_TYPE_TERM, self.intern(class));
        self.insert(t);
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn objects(&self, subject: Term, predicate: Term) -> &[Term] {
        self.by_subject_predicate
            .get(&(subject, predicate))
            .map_or(&[], Vec::as_slice)
    }

    pub fn subjects(&self, predicate: Term, object: Term) -> &[Term] {
        self.by_predicate_object
            .get(&(predicate, object))
            .map_or(&[], Vec::as_slice)
    }

    pub fn pairs(&self, predicate: Term) -> &[(Term, Term)] {
        self.by_predicate.get(&predicate).map_or(&[], Vec::as_slice)
    }

    pub fn declare_class(&mut self, class: &Name) -> Term {
        let t = self.intern(class);
        self.classes.insert(t);
        t
    }

    pub fn declare_property(&mut self, property: &Name) -> Term {
        let t = self.intern(property);
        self.properties.insert(t);
        t
    }

    pub fn is_class(&self, t: Term) -> bool {
        self.classes.contains(&t)
    }

    pub fn classes(&self) -> impl Iterator<Item = Term> + '_ {
        self.classes.iter().copied()
    }

    pub fn properties(&self) -> impl Iterator<Item = Term> + '_ {
        self.properties.iter().copied()
    }

    /// Adds `sub ⊑ sup`, refusing axioms that would close a cycle.
    pub fn add_subclass(&mut self, sub: &Name, sup: &Name) -> Result<(), GraphError> {
        let (s, p) = (self.declare_class(sub), self.declare_class(sup));
        if s == p {
            return Ok(());
        }
        if self.superclasses(p).contains(&s) {
            return Err(GraphError::Cycle {
                sub: sub.to_string(),
                sup: sup.to_string(),
            });
        }
        self.subclass_axioms.insert((s, p));
        Ok(())
    }

    pub fn subclass_axioms(&self) -> impl Iterator<Item = (Term, Term)> + '_ {
        self.subclass_axioms.iter().copied()
    }

    /// Reflexive-transitive superclasses of `class`.
    pub fn superclasses(&self, class: Term) -> BTreeSet<Term> {
        let mut seen = BTreeSet::from([class]);
        let mut stack = vec![class];
        while let Some(c) = stack.pop() {
            for &(sub, sup) in &self.subclass_axioms {
                if sub == c && seen.insert(sup) {
                    stack.push(sup);
                }
            }
        }
        seen
    }

    pub fn is_subclass_of(&self, sub: &Name, sup: &Name) -> bool {
        match (self.lookup(sub), self.lookup(sup)) {
            (Some(s), Some(p)) => self.superclasses(s).contains(&p),
            _ => false,
        }
    }

    pub fn add_inverse(&mut self, p: &Name, q: &Name) {
        let (a, b) = (self.declare_property(p), self.declare_property(q));
        self.property_axioms
            .insert(PropertyAxiom::InverseOf(a.min(b), a.max(b)));
    }

    pub fn add_symmetric(&mut self, p: &Name) {
        let a = self.declare_property(p);
        self.property_axioms.insert(PropertyAxiom::Symmetric(a));
    }

    pub fn property_axioms(&self) -> impl Iterator<Item = PropertyAxiom> + '_ {
        self.property_axioms.iter().copied()
    }

    pub fn inverse_of(&self, p: &Name) -> Option<Name> {
        let t = self.lookup(p)?;
        self.property_axioms.iter().find_map(|ax| match *ax {
            PropertyAxiom::InverseOf(a, b) if a == t => Some(self.name(b).clone()),
            PropertyAxiom::InverseOf(a, b) if b == t => Some(self.name(a).clone()),
            _ => None,
        })
    }

    /// Graph-independent view of the triples, for comparisons.
    pub fn named_triples(&self) -> BTreeSet<(Name, Name, Name)> {
        self.triples
            .iter()
            .map(|t| {
                (
                    self.name(t.subject).clone(),
                    self.name(t.predicate).clone(),
                    self.name(t.object).clone(),
                )
            })
            .collect()
    }

    pub fn named_subclass_axioms(&self) -> BTreeSet<(Name, Name)> {
        self.subclass_axioms
            .iter()
            .map(|&(a, b)| (self.name(a).clone(), self.name(b).clone()))
            .collect()
    }

    pub fn named_property_axioms(&self) -> BTreeSet<(Name, Name)> {
        self.property_axioms
            .iter()
            .map(|ax| match *ax {
                PropertyAxiom::InverseOf(a, b) => {
                    let (x, y) = (self.name(a).clone(), self.name(b).clone());
                    (x.clone().min(y.clone()), x.max(y))
                }
                PropertyAxiom::Symmetric(a) => (self.name(a).clone(), self.name(a).clone()),
            })
            .collect()
    }

    /// Objects of `predicate` for `subject`, by name.
    pub fn objects_of(&self, subject: &Name, predicate: &Name) -> BTreeSet<Name> {
        match (self.lookup(subject), self.lookup(predicate)) {
            (Some(s), Some(p)) => self.objects(s, p).iter().map(|&o| self.name(o).clone()).collect(),
            _ => BTreeSet::new(),
        }
    }

    pub fn types_of(&self, subject: &Name) -> BTreeSet<Name> {
        self.objects_of(subject, &Name::builtin(RDF_TYPE))
    }

    /// Union of triples and axioms of `other` into `self`.
    pub fn merge(&mut self, other: &KnowledgeGraph) -> Result<(), GraphError> {
        for &c in &other.classes {
            self.declare_class(other.name(c));
        }
        for &p in &other.properties {
            self.declare_property(other.name(p));
        }
        for (a, b) in other.named_subclass_axioms() {
            self.add_subclass(&a, &b)?;
        }
        for ax in &other.property_axioms {
            match *ax {
                PropertyAxiom::InverseOf(a, b) => self.add_inverse(other.name(a), other.name(b)),
                PropertyAxiom::Symmetric(a) => self.add_symmetric(other.name(a)),
            }
        }
        for t in &other.triples {
            self.insert_names(other.name(t.subject), other.name(t.predicate), other.name(t.object))?;
        }
        Ok(())
    }
}

/// Graphs are equal when they hold the same named triples and axioms.
impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.named_triples() == other.named_triples()
            && self.named_subclass_axioms() == other.named_subclass_axioms()
            && self.named_property_axioms() == other.named_property_axioms()
    }
}

impl Eq for KnowledgeGraph {}

/// The stencil part of the base threat model.
pub fn base_vocabulary() -> KnowledgeGraph {
    use vocab::*;
    let mut g = KnowledgeGraph::new();
    for class in STENCIL_CLASSES.iter().chain(&DERIVED_CLASSES) {
        g.declare_class(&Name::bm(*class));
    }
    let hierarchy = [
        (TARGET, STENCIL),
        (DATA_FLOW, STENCIL),
        (TRUST_BOUNDARY, STENCIL),
        (PROCESS, TARGET),
        (EXTERNAL_INTERACTOR, TARGET),
        (DATA_STORE, TARGET),
    ];
    for (sub, sup) in hierarchy {
        g.add_subclass(&Name::bm(sub), &Name::bm(sup))
            .expect("base hierarchy is acyclic");
    }
    for p in PROPERTIES {
        g.declare_property(&Name::bm(p));
    }
    g.add_inverse(&Name::bm(HAS_SOURCE), &Name::bm(IS_SOURCE_OF));
    g.add_inverse(&Name::bm(HAS_TARGET), &Name::bm(IS_TARGET_OF));
    g.add_symmetric(&Name::bm(RELATES));
    g
}

fn check_reserved(class: &str) -> Result<(), GraphError> {
    if vocab::STENCIL_CLASSES.contains(&class) || vocab::DERIVED_CLASSES.contains(&class) {
        Err(GraphError::ReservedName(class.to_string()))
    } else {
        Ok(())
    }
}

/// Lowers a diagram into explicit facts: type assertions for every stencil
/// and flow, `hasSource`/`hasTarget` for every flow, and the taxonomy's
/// class hierarchy. Nothing inferred is added.
pub fn lower(model: &DfdModel, tax: &Taxonomy) -> Result<KnowledgeGraph, GraphError> {
    use vocab::*;
    let mut g = base_vocabulary();

    for (sub, sup) in &tax.class_hierarchy {
        check_reserved(sub)?;
        check_reserved(sup)?;
        g.add_subclass(&Name::local(sub), &Name::local(sup))?;
    }

    for s in model.stencils() {
        let kind = match s.kind {
            StencilKind::Process => PROCESS,
            StencilKind::DataStore => DATA_STORE,
            StencilKind::ExternalEntity => EXTERNAL_INTERACTOR,
        };
        let me = Name::local(&s.name);
        g.assert_type(&me, &Name::bm(kind));
        check_reserved(&s.model_class)?;
        let model_class = Name::local(&s.model_class);
        g.add_subclass(&model_class, &Name::bm(kind))?;
        g.assert_type(&me, &model_class);
        for label in &s.labels {
            check_reserved(label)?;
            g.assert_type(&me, &Name::local(label));
        }
    }

    let names_by_id: HashMap<&str, &str> = model
        .stencils()
        .map(|s| (s.id.as_str(), s.name.as_str()))
        .collect();
    let has_source = Name::bm(HAS_SOURCE);
    let has_target = Name::bm(HAS_TARGET);
    for f in &model.flows {
        let me = Name::local(&f.name);
        g.assert_type(&me, &Name::bm(DATA_FLOW));
        let class = Name::local(f.model_class.as_str());
        g.add_subclass(&class, &Name::bm(DATA_FLOW))?;
        g.assert_type(&me, &class);
        for label in &f.labels {
            check_reserved(label)?;
            g.assert_type(&me, &Name::local(label));
        }
        if let Some(src) = names_by_id.get(f.source_id.as_str()) {
            g.insert_names(&me, &has_source, &Name::local(*src))?;
        }
        if let Some(dst) = names_by_id.get(f.target_id.as_str()) {
            g.insert_names(&me, &has_target, &Name::local(*dst))?;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::parse_compose;
    use crate::dfd::{build_model, IdGenerator};

    const WEB_MONGO: &str = "services:\n  web:\n    image: php:8.0\n    volumes:\n      - ./app:/var/www/html\n    depends_on:\n      - mongodb\n    ports:\n      - 80:80\n  mongodb:\n    image: mongo:latest\n    volumes:\n      - dbdata:/data/db\n    links:\n      - web\n";

    fn web_mongo() -> KnowledgeGraph {
        let tax = Taxonomy::starter();
        let compose = parse_compose(WEB_MONGO).unwrap();
        let model = build_model(&compose, &tax, &mut IdGenerator::seeded(7)).unwrap();
        lower(&model, &tax).unwrap()
    }

    fn has(g: &KnowledgeGraph, s: Name, p: Name, o: Name) -> bool {
        g.named_triples().contains(&(s, p, o))
    }

    #[test]
    fn base_hierarchy() {
        let g = base_vocabulary();
        assert!(g.is_subclass_of(&Name::bm("Process"), &Name::bm("Stencil")));
        assert!(g.is_subclass_of(&Name::bm("DataStore"), &Name::bm("Target")));
        assert!(!g.is_subclass_of(&Name::bm("DataFlow"), &Name::bm("Target")));
        assert!(!g.is_subclass_of(&Name::bm("Stencil"), &Name::bm("Process")));
        assert_eq!(g.inverse_of(&Name::bm("hasSource")), Some(Name::bm("isSourceOf")));
        assert_eq!(g.inverse_of(&Name::bm("isTargetOf")), Some(Name::bm("hasTarget")));
        assert_eq!(g.inverse_of(&Name::bm("relates")), None);
        assert!(g.is_empty());
    }

    #[test]
    fn inverse_stored_once() {
        let mut g = base_vocabulary();
        let before = g.property_axioms().count();
        g.add_inverse(&Name::bm("isSourceOf"), &Name::bm("hasSource"));
        assert_eq!(g.property_axioms().count(), before);
    }

    #[test]
    fn cycle_rejected() {
        let mut g = base_vocabulary();
        let err = g.add_subclass(&Name::bm("Stencil"), &Name::bm("Process")).unwrap_err();
        assert!(matches!(err, GraphError::Cycle { .. }));
    }

    #[test]
    fn lowers_flow0() {
        let g = web_mongo();
        let ty = || Name::builtin(RDF_TYPE);
        assert!(has(&g, Name::local("flow0"), ty(), Name::local("HTTPFlow")));
        assert!(has(&g, Name::local("flow0"), ty(), Name::local("NetworkFlow")));
        assert!(has(&g, Name::local("flow0"), Name::bm("hasSource"), Name::local("user")));
        assert!(has(&g, Name::local("flow0"), Name::bm("hasTarget"), Name::local("process0")));
    }

    #[test]
    fn lowers_process0() {
        let g = web_mongo();
        let types = g.types_of(&Name::local("process0"));
        for c in ["DevelopmentEnvironment", "HTTPServer", "PHPEnv"] {
            assert!(types.contains(&Name::local(c)));
        }
        assert!(types.contains(&Name::bm("Process")));
        // only explicit facts
        assert!(!types.contains(&Name::bm("Target")));
    }

    #[test]
    fn no_reasoner_predicates_after_lowering() {
        let g = web_mongo();
        let forbidden: Vec<Name> = ["isSourceOf", "isTargetOf", "isEdgeOf", "relates", "isAffectedBy"]
            .into_iter()
            .map(Name::bm)
            .collect();
        assert!(g.named_triples().iter().all(|(_, p, _)| !forbidden.contains(p)));
    }

    #[test]
    fn each_flow_has_one_source_and_target() {
        let g = web_mongo();
        for i in 0..5 {
            let f = Name::local(format!("flow{i}"));
            assert_eq!(g.objects_of(&f, &Name::bm("hasSource")).len(), 1);
            assert_eq!(g.objects_of(&f, &Name::bm("hasTarget")).len(), 1);
        }
    }

    #[test]
    fn empty_model_is_base_vocabulary() {
        let tax = crate::taxonomy::load_taxonomy("").unwrap();
        assert_eq!(lower(&DfdModel::default(), &tax).unwrap(), base_vocabulary());
        // with a populated taxonomy only axioms are added, never triples
        let g = lower(&DfdModel::default(), &Taxonomy::starter()).unwrap();
        assert!(g.is_empty());
    }

    #[test]
    fn reserved_label_is_rejected() {
        let tax = crate::taxonomy::load_taxonomy("services:\n- name: Weird\n  images: [weird]\n  labels: [Process]\n").unwrap();
        let compose = parse_compose("services:\n  a:\n    image: weird\n").unwrap();
        let model = build_model(&compose, &tax, &mut IdGenerator::seeded(0)).unwrap();
        assert_eq!(lower(&model, &tax).unwrap_err(), GraphError::ReservedName("Process".into()));
    }

    #[test]
    fn name_parsing() {
        assert_eq!(Name::parse("bm:Process"), Some(Name::bm("Process")));
        assert_eq!(Name::parse("b:relates"), Some(Name::bm("relates")));
        assert_eq!(Name::parse(":user"), Some(Name::local("user")));
        assert_eq!(Name::parse("Process"), Some(Name::bm("Process")));
        assert_eq!(Name::parse("HTTPFlow"), Some(Name::local("HTTPFlow")));
        assert_eq!(Name::parse("a"), Some(Name::builtin(RDF_TYPE)));
        assert_eq!(Name::parse("tc:x"), Some(Name::catalog("x")));
        assert_eq!(Name::parse("zz:x"), None);
        assert_eq!(Name::parse(":"), None);
    }
}
