//! Forward-chaining materialization.
//!
//! Rules only ever add triples and contain no negation, so the fixpoint is
//! unique and reached after finitely many rounds. Evaluation is
//! delta-driven: each round only fires rules on triples that were new in
//! the previous round, joining against the whole store.

use std::collections::{BTreeSet, HashMap, HashSet};

use log::{debug, warn};
use serde::Deserialize;
use thiserror::Error;

use crate::graph::{vocab, KnowledgeGraph, Name, PropertyAxiom, Term, Triple};
use crate::taxonomy::Taxonomy;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReasonError {
    #[error("materialization exceeded the budget of {0} triples")]
    BudgetExceeded(usize),
    #[error("invalid class expression `{text}`: {reason}")]
    Expression { text: String, reason: String },
    #[error("malformed template catalog: {0}")]
    Catalog(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    Class(Name),
    Exists { property: Name, filler: ClassExpression },
}

/// A conjunction of class atoms and existential restrictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassExpression {
    pub atoms: Vec<Atom>,
}

impl ClassExpression {
    pub fn class(name: Name) -> Self {
        ClassExpression {
            atoms: vec![Atom::Class(name)],
        }
    }

    pub fn and(mut self, atom: Atom) -> Self {
        self.atoms.push(atom);
        self
    }

    pub fn some(property: Name, filler: ClassExpression) -> Atom {
        Atom::Exists { property, filler }
    }

    /// Parses `Process and some isTargetOf HTTPFlow`-style text.
    ///
    /// Grammar: `expr := item ("and" item)*`,
    /// `item := NAME | "some" NAME item | "(" expr ")"`.
    pub fn parse(text: &str) -> Result<Self, ReasonError> {
        let spaced = text.replace('(', " ( ").replace(')', " ) ");
        let tokens: Vec<&str> = spaced.split_whitespace().collect();
        let mut pos = 0;
        let err = |reason: &str| ReasonError::Expression {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let expr = parse_conjunction(&tokens, &mut pos).map_err(|r| err(&r))?;
        if pos != tokens.len() {
            return Err(err(&format!("unexpected `{}`", tokens[pos])));
        }
        Ok(expr)
    }
}

fn parse_conjunction(tokens: &[&str], pos: &mut usize) -> Result<ClassExpression, String> {
    let mut atoms = parse_item(tokens, pos)?;
    while tokens.get(*pos).is_some_and(|t| t.eq_ignore_ascii_case("and")) {
        *pos += 1;
        atoms.extend(parse_item(tokens, pos)?);
    }
    Ok(ClassExpression { atoms })
}

fn parse_item(tokens: &[&str], pos: &mut usize) -> Result<Vec<Atom>, String> {
    let tok = *tokens.get(*pos).ok_or("unexpected end of expression")?;
    *pos += 1;
    match tok {
        "(" => {
            let inner = parse_conjunction(tokens, pos)?;
            if tokens.get(*pos) != Some(&")") {
                return Err("missing `)`".into());
            }
            *pos += 1;
            Ok(inner.atoms)
        }
        ")" => Err("unexpected `)`".into()),
        t if t.eq_ignore_ascii_case("some") => {
            let prop = *tokens.get(*pos).ok_or("`some` without a property")?;
            *pos += 1;
            let property = Name::parse(prop).ok_or_else(|| format!("bad property `{prop}`"))?;
            let filler = ClassExpression {
                atoms: parse_item(tokens, pos)?,
            };
            Ok(vec![Atom::Exists { property, filler }])
        }
        t if t.eq_ignore_ascii_case("and") => Err("dangling `and`".into()),
        t => Ok(vec![Atom::Class(
            Name::parse(t).ok_or_else(|| format!("bad class name `{t}`"))?,
        )]),
    }
}

/// Members of the condition get `isAffectedBy threat` and/or
/// `rdf:type derived_class`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreatTemplate {
    pub condition: ClassExpression,
    pub threat: Option<Name>,
    pub derived_class: Option<Name>,
}

impl ThreatTemplate {
    /// Processes targeted by a plain HTTP flow are affected by an insecure
    /// process threat.
    pub fn insecure_http() -> Self {
        ThreatTemplate {
            condition: ClassExpression::class(Name::bm(vocab::PROCESS)).and(ClassExpression::some(
                Name::bm(vocab::IS_TARGET_OF),
                ClassExpression::class(Name::local("HTTPFlow")),
            )),
            threat: Some(Name::catalog("insecureProcessThreat")),
            derived_class: None,
        }
    }
}

/// Templates for the derived classes seen in reasoned diagrams:
/// `Classified` (carries a taxonomy class), `ClassifiedIsEdge`, and the
/// two `AffectedByGenericProcessThreatAs*` classes.
pub fn derived_class_templates(tax: &Taxonomy) -> Vec<ThreatTemplate> {
    let derive = |condition, class: &str| ThreatTemplate {
        condition,
        threat: None,
        derived_class: Some(Name::bm(class)),
    };
    let mut out: Vec<ThreatTemplate> = tax
        .process_classes()
        .into_iter()
        .map(|c| derive(ClassExpression::class(Name::local(c)), vocab::CLASSIFIED))
        .collect();
    let data_flow = || ClassExpression::class(Name::bm(vocab::DATA_FLOW));
    out.push(derive(
        ClassExpression::class(Name::bm(vocab::CLASSIFIED))
            .and(ClassExpression::some(Name::bm(vocab::IS_EDGE_OF), data_flow())),
        vocab::CLASSIFIED_IS_EDGE,
    ));
    out.push(derive(
        ClassExpression::class(Name::bm(vocab::PROCESS))
            .and(ClassExpression::some(Name::bm(vocab::IS_SOURCE_OF), data_flow())),
        vocab::AS_SOURCE,
    ));
    out.push(derive(
        ClassExpression::class(Name::bm(vocab::PROCESS))
            .and(ClassExpression::some(Name::bm(vocab::IS_TARGET_OF), data_flow())),
        vocab::AS_TARGET,
    ));
    out
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct TemplateRecord {
    condition: String,
    #[serde(default)]
    threat: Option<String>,
    #[serde(default)]
    derived_class: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    #[serde(default)]
    templates: Vec<TemplateRecord>,
}

/// Loads a template catalog. Threats and derived classes given without a
/// prefix live in the catalog namespace.
pub fn load_templates(text: &str) -> Result<Vec<ThreatTemplate>, ReasonError> {
    let file: Option<TemplateFile> =
        serde_yaml::from_str(text).map_err(|e| ReasonError::Catalog(e.to_string()))?;
    let resolve = |s: &str| -> Result<Name, ReasonError> {
        let name = if s.contains(':') {
            Name::parse(s)
        } else if vocab::is_base_name(s) {
            Some(Name::bm(s))
        } else {
            Some(Name::catalog(s))
        };
        name.ok_or_else(|| ReasonError::Catalog(format!("bad term `{s}`")))
    };
    file.map(|f| f.templates)
        .unwrap_or_default()
        .into_iter()
        .map(|r| {
            if r.threat.is_none() && r.derived_class.is_none() {
                return Err(ReasonError::Catalog(format!(
                    "template `{}` has neither threat nor derivedClass",
                    r.condition
                )));
            }
            Ok(ThreatTemplate {
                condition: ClassExpression::parse(&r.condition)?,
                threat: r.threat.as_deref().map(resolve).transpose()?,
                derived_class: r.derived_class.as_deref().map(resolve).transpose()?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    /// x type C, C ⊑ D ⊢ x type D
    SubclassProp,
    /// p(x, y), inverse(p, q) ⊢ q(y, x)
    InverseProp,
    /// p(x, y), p symmetric ⊢ p(y, x)
    SymmetricProp,
    /// isSourceOf(x, f) or isTargetOf(x, f) ⊢ isEdgeOf(x, f)
    EdgeDerivation,
    /// hasSource(f, x), hasTarget(f, y), x ≠ y ⊢ relates(x, y)
    RelatesDerivation,
    /// x type Process ⊢ isAffectedBy(x, t) for the six generic threats
    GenericThreats,
    ThreatTemplate(ThreatTemplate),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    /// Upper bound on the size of the materialized graph.
    pub max_triples: Option<usize>,
}

impl RuleSet {
    /// The structural rules without any templates.
    pub fn core() -> Self {
        RuleSet {
            rules: vec![
                Rule::SubclassProp,
                Rule::InverseProp,
                Rule::SymmetricProp,
                Rule::EdgeDerivation,
                Rule::RelatesDerivation,
                Rule::GenericThreats,
            ],
            max_triples: None,
        }
    }

    /// Structural rules, the derived-class templates for `tax`, and the
    /// insecure-HTTP threat template.
    pub fn standard(tax: &Taxonomy) -> Self {
        let mut set = Self::core();
        set.rules.extend(
            derived_class_templates(tax)
                .into_iter()
                .map(Rule::ThreatTemplate),
        );
        set.rules
            .push(Rule::ThreatTemplate(ThreatTemplate::insecure_http()));
        set
    }

    pub fn with_templates(mut self, templates: impl IntoIterator<Item = ThreatTemplate>) -> Self {
        self.rules
            .extend(templates.into_iter().map(Rule::ThreatTemplate));
        self
    }

    fn has(&self, rule: &Rule) -> bool {
        self.rules.contains(rule)
    }

    fn templates(&self) -> impl Iterator<Item = &ThreatTemplate> {
        self.rules.iter().filter_map(|r| match r {
            Rule::ThreatTemplate(t) => Some(t),
            _ => None,
        })
    }
}

/// Precomputed term handles and static axioms for one run.
struct Context {
    rdf_type: Term,
    process: Term,
    has_source: Term,
    has_target: Term,
    is_source_of: Term,
    is_target_of: Term,
    is_edge_of: Term,
    relates: Term,
    is_affected_by: Term,
    threats: Vec<Term>,
    ancestors: HashMap<Term, Vec<Term>>,
    inverses: HashMap<Term, Vec<Term>>,
    symmetric: HashSet<Term>,
    subclass: bool,
    inverse: bool,
    symmetric_rule: bool,
    edge: bool,
    relate: bool,
    generic: bool,
}

impl Context {
    fn new(g: &mut KnowledgeGraph, rules: &RuleSet) -> Self {
        use vocab::*;
        let bm = |g: &mut KnowledgeGraph, n: &str| g.intern(&Name::bm(n));
        let has_source = bm(g, HAS_SOURCE);
        let has_target = bm(g, HAS_TARGET);
        let is_source_of = bm(g, IS_SOURCE_OF);
        let is_target_of = bm(g, IS_TARGET_OF);
        let relates = bm(g, RELATES);

        let mut inverses: HashMap<Term, Vec<Term>> = HashMap::new();
        let mut symmetric = HashSet::from([relates]);
        let mut pairs = vec![(has_source, is_source_of), (has_target, is_target_of)];
        for ax in g.property_axioms() {
            match ax {
                PropertyAxiom::InverseOf(a, b) => pairs.push((a, b)),
                PropertyAxiom::Symmetric(a) => {
                    symmetric.insert(a);
                }
            }
        }
        for (a, b) in pairs {
            for (x, y) in [(a, b), (b, a)] {
                let e = inverses.entry(x).or_default();
                if !e.contains(&y) {
                    e.push(y);
                }
            }
        }

        let mut ancestors = HashMap::new();
        let classes: Vec<Term> = g.classes().collect();
        for c in classes {
            let sup: Vec<Term> = g.superclasses(c).into_iter().filter(|&s| s != c).collect();
            if !sup.is_empty() {
                ancestors.insert(c, sup);
            }
        }

        Context {
            rdf_type: g.rdf_type(),
            process: bm(g, PROCESS),
            has_source,
            has_target,
            is_source_of,
            is_target_of,
            is_edge_of: bm(g, IS_EDGE_OF),
            relates,
            is_affected_by: bm(g, IS_AFFECTED_BY),
            threats: GENERIC_THREATS.iter().map(|t| bm(g, t)).collect(),
            ancestors,
            inverses,
            symmetric,
            subclass: rules.has(&Rule::SubclassProp),
            inverse: rules.has(&Rule::InverseProp),
            symmetric_rule: rules.has(&Rule::SymmetricProp),
            edge: rules.has(&Rule::EdgeDerivation),
            relate: rules.has(&Rule::RelatesDerivation),
            generic: rules.has(&Rule::GenericThreats),
        }
    }

    /// Fires every single-premise rule on `t` and every two-premise rule
    /// with `t` as one premise and the store supplying the other.
    fn derive(&self, t: Triple, g: &KnowledgeGraph, out: &mut Vec<Triple>) {
        let Triple {
            subject: s,
            predicate: p,
            object: o,
        } = t;
        if p == self.rdf_type {
            if self.subclass {
                for &d in self.ancestors.get(&o).into_iter().flatten() {
                    out.push(Triple::new(s, p, d));
                }
            }
            if self.generic && o == self.process {
                for &threat in &self.threats {
                    out.push(Triple::new(s, self.is_affected_by, threat));
                }
            }
            return;
        }
        if self.inverse {
            for &q in self.inverses.get(&p).into_iter().flatten() {
                out.push(Triple::new(o, q, s));
            }
        }
        if self.symmetric_rule && self.symmetric.contains(&p) {
            out.push(Triple::new(o, p, s));
        }
        if self.relate {
            if p == self.has_source {
                for &y in g.objects(s, self.has_target) {
                    if y != o {
                        out.push(Triple::new(o, self.relates, y));
                    }
                }
            } else if p == self.has_target {
                for &x in g.objects(s, self.has_source) {
                    if x != o {
                        out.push(Triple::new(x, self.relates, o));
                    }
                }
            }
        }
        if self.edge && (p == self.is_source_of || p == self.is_target_of) {
            out.push(Triple::new(s, self.is_edge_of, o));
        }
    }
}

/// Computes the least fixpoint of `rules` over `g`. The input graph is left
/// untouched.
pub fn materialize(g: &KnowledgeGraph, rules: &RuleSet) -> Result<KnowledgeGraph, ReasonError> {
    let mut out = g.clone();
    let ctx = Context::new(&mut out, rules);
    let templates: Vec<&ThreatTemplate> = rules.templates().collect();
    let template_terms: Vec<(Option<Term>, Option<Term>)> = templates
        .iter()
        .map(|t| {
            (
                t.threat.as_ref().map(|n| out.intern(n)),
                t.derived_class.as_ref().map(|n| out.declare_class(n)),
            )
        })
        .collect();
    let budget = rules.max_triples.unwrap_or(usize::MAX);
    let check = |g: &KnowledgeGraph| {
        if g.len() > budget {
            Err(ReasonError::BudgetExceeded(budget))
        } else {
            Ok(())
        }
    };
    check(&out)?;

    let mut delta: Vec<Triple> = out.triples().copied().collect();
    delta.sort_unstable();
    let mut rounds = 0usize;
    loop {
        while !delta.is_empty() {
            rounds += 1;
            let mut derived = Vec::new();
            for &t in &delta {
                ctx.derive(t, &out, &mut derived);
            }
            delta.clear();
            for t in derived {
                if out.insert(t) {
                    delta.push(t);
                }
            }
            check(&out)?;
        }

        // Template conditions may join over several triples; they are
        // re-evaluated against the whole store once the structural rules
        // have settled.
        let mut derived = Vec::new();
        for (template, &(threat, class)) in templates.iter().zip(&template_terms) {
            for x in eval_quiet(&out, &template.condition) {
                if let Some(threat) = threat {
                    derived.push(Triple::new(x, ctx.is_affected_by, threat));
                }
                if let Some(class) = class {
                    derived.push(Triple::new(x, ctx.rdf_type, class));
                }
            }
        }
        for t in derived {
            if out.insert(t) {
                delta.push(t);
            }
        }
        check(&out)?;
        if delta.is_empty() {
            break;
        }
    }
    debug!("materialized {} triples in {rounds} rounds", out.len());
    Ok(out)
}

/// Individuals satisfying `expr` in an already materialized graph.
/// Unknown class names evaluate to the empty set.
pub fn eval_class_expression(g: &KnowledgeGraph, expr: &ClassExpression) -> BTreeSet<Term> {
    eval(g, expr, true)
}

fn eval_quiet(g: &KnowledgeGraph, expr: &ClassExpression) -> BTreeSet<Term> {
    eval(g, expr, false)
}

fn eval(g: &KnowledgeGraph, expr: &ClassExpression, warn_unknown: bool) -> BTreeSet<Term> {
    let mut result: Option<BTreeSet<Term>> = None;
    for atom in &expr.atoms {
        let members: BTreeSet<Term> = match atom {
            Atom::Class(name) => match g.lookup(name).filter(|&c| g.is_class(c)) {
                Some(c) => g.subjects(g.rdf_type(), c).iter().copied().collect(),
                None => {
                    if warn_unknown {
                        warn!("unknown class {name} in class expression");
                    }
                    BTreeSet::new()
                }
            },
            Atom::Exists { property, filler } => match g.lookup(property) {
                Some(p) => eval(g, filler, warn_unknown)
                    .into_iter()
                    .flat_map(|y| g.subjects(p, y).iter().copied())
                    .collect(),
                None => BTreeSet::new(),
            },
        };
        result = Some(match result {
            None => members,
            Some(acc) => acc.intersection(&members).copied().collect(),
        });
        if result.as_ref().is_some_and(BTreeSet::is_empty) {
            break;
        }
    }
    result.unwrap_or_default()
}
