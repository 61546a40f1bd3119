//! Turtle serialization of knowledge graphs.
//!
//! Only the subset needed here is supported: `@prefix` lines, prefixed
//! names, full IRIs in known namespaces, `a`, and `;`/`,` lists. Literals
//! and blank nodes are rejected.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::graph::{GraphError, KnowledgeGraph, Name, Namespace, PropertyAxiom, BASE_MODEL_IRI, CATALOG_IRI, RDF_TYPE};

pub const RDF_IRI: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS_IRI: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const OWL_IRI: &str = "http://www.w3.org/2002/07/owl#";

const SUBCLASS_OF: &str = "rdfs:subClassOf";
const INVERSE_OF: &str = "owl:inverseOf";
const OWL_CLASS: &str = "owl:Class";
const OBJECT_PROPERTY: &str = "owl:ObjectProperty";
const SYMMETRIC_PROPERTY: &str = "owl:SymmetricProperty";

#[derive(Debug, Error)]
pub enum TurtleError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub fn local_iri(diagram_id: &str) -> String {
    format!("urn:dfd:{diagram_id}#")
}

fn token(n: &Name) -> String {
    if n.namespace == Namespace::Builtin && n.local_name == RDF_TYPE {
        "a".to_string()
    } else {
        n.to_string()
    }
}

/// All statements of `g` as printed tokens, axioms included.
fn statements(g: &KnowledgeGraph) -> BTreeSet<(String, String, String)> {
    let mut out: BTreeSet<(String, String, String)> = g
        .named_triples()
        .iter()
        .map(|(s, p, o)| (token(s), token(p), token(o)))
        .collect();
    let mut add = |s: &Name, p: &str, o: &str| {
        out.insert((token(s), p.to_string(), o.to_string()));
    };
    for c in g.classes() {
        add(g.name(c), "a", OWL_CLASS);
    }
    for p in g.properties() {
        add(g.name(p), "a", OBJECT_PROPERTY);
    }
    for (sub, sup) in g.subclass_axioms() {
        add(g.name(sub), SUBCLASS_OF, &token(g.name(sup)));
    }
    for ax in g.property_axioms() {
        match ax {
            PropertyAxiom::InverseOf(a, b) => {
                // term ids depend on load order, token order does not
                let (a, b) = if token(g.name(a)) <= token(g.name(b)) { (a, b) } else { (b, a) };
                add(g.name(a), INVERSE_OF, &token(g.name(b)));
            }
            PropertyAxiom::Symmetric(a) => add(g.name(a), "a", SYMMETRIC_PROPERTY),
        }
    }
    out
}

/// Serializes `g` with the diagram namespace bound to `:`. Subjects,
/// predicates and objects appear in lexicographic order.
pub fn to_turtle(g: &KnowledgeGraph, diagram_id: &str) -> String {
    let mut out = String::new();
    for (prefix, iri) in [
        ("rdf", RDF_IRI.to_string()),
        ("rdfs", RDFS_IRI.to_string()),
        ("owl", OWL_IRI.to_string()),
        ("bm", BASE_MODEL_IRI.to_string()),
        ("tc", CATALOG_IRI.to_string()),
        ("", local_iri(diagram_id)),
    ] {
        out.push_str(&format!("@prefix {prefix}: <{iri}> .\n"));
    }
    let mut grouped: BTreeMap<String, BTreeMap<String, Vec<String>>> = BTreeMap::new();
    for (s, p, o) in statements(g) {
        grouped.entry(s).or_default().entry(p).or_default().push(o);
    }
    for (subject, predicates) in grouped {
        out.push('\n');
        out.push_str(&subject);
        let n = predicates.len();
        for (i, (p, objects)) in predicates.into_iter().enumerate() {
            out.push_str(if i == 0 { " " } else { "    " });
            out.push_str(&p);
            out.push(' ');
            out.push_str(&objects.join(", "));
            out.push_str(if i + 1 == n { " .\n" } else { " ;\n" });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Term(String),
    Dot,
    Semi,
    Comma,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, TurtleError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let mut chars = raw.chars().peekable();
        while let Some(&c) = chars.peek() {
            match c {
                c if c.is_whitespace() => {
                    chars.next();
                }
                '#' => break,
                '.' | ';' | ',' => {
                    chars.next();
                    out.push((
                        line,
                        match c {
                            '.' => Tok::Dot,
                            ';' => Tok::Semi,
                            _ => Tok::Comma,
                        },
                    ));
                }
                '<' => {
                    let mut s = String::new();
                    for c in chars.by_ref() {
                        s.push(c);
                        if c == '>' {
                            break;
                        }
                    }
                    if !s.ends_with('>') {
                        return Err(TurtleError::Syntax {
                            line,
                            reason: "unterminated IRI".into(),
                        });
                    }
                    out.push((line, Tok::Term(s)));
                }
                '"' | '\'' | '_' | '[' | '(' => {
                    return Err(TurtleError::Syntax {
                        line,
                        reason: format!("unsupported construct starting with `{c}`"),
                    })
                }
                _ => {
                    let mut s = String::new();
                    while let Some(&c) = chars.peek() {
                        if c.is_whitespace() || ";,#".contains(c) {
                            break;
                        }
                        // a dot ends a term unless more name characters follow
                        if c == '.' {
                            let mut ahead = chars.clone();
                            ahead.next();
                            if !ahead.peek().is_some_and(|n| n.is_alphanumeric() || *n == '_') {
                                break;
                            }
                        }
                        s.push(c);
                        chars.next();
                    }
                    out.push((line, Tok::Term(s)));
                }
            }
        }
    }
    Ok(out)
}

struct Resolver {
    prefixes: HashMap<String, (Namespace, String)>,
}

impl Resolver {
    fn namespace_of(iri: &str) -> (Namespace, String) {
        match iri {
            RDF_IRI => (Namespace::Builtin, "rdf".into()),
            RDFS_IRI => (Namespace::Builtin, "rdfs".into()),
            OWL_IRI => (Namespace::Builtin, "owl".into()),
            BASE_MODEL_IRI => (Namespace::BaseModel, String::new()),
            CATALOG_IRI => (Namespace::Catalog, String::new()),
            // any other namespace is taken as the diagram's own
            _ => (Namespace::Local, String::new()),
        }
    }

    fn resolve(&self, term: &str, line: usize) -> Result<Name, TurtleError> {
        let err = |reason: String| TurtleError::Syntax { line, reason };
        if term == "a" {
            return Ok(Name::builtin(RDF_TYPE));
        }
        if let Some(iri) = term.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
            let (base, local) = match iri.rfind('#') {
                Some(i) => iri.split_at(i + 1),
                None => return Err(err(format!("IRI <{iri}> has no fragment"))),
            };
            let (ns, builtin) = Self::namespace_of(base);
            if ns == Namespace::Local && !base.starts_with("urn:dfd:") {
                return Err(err(format!("IRI <{iri}> is outside the known namespaces")));
            }
            return Ok(qualify(ns, &builtin, local));
        }
        let (prefix, local) = term
            .split_once(':')
            .ok_or_else(|| err(format!("`{term}` is not a prefixed name")))?;
        let (ns, builtin) = self
            .prefixes
            .get(prefix)
            .ok_or_else(|| err(format!("undeclared prefix `{prefix}:`")))?;
        if local.is_empty() {
            return Err(err("empty local name".into()));
        }
        Ok(qualify(*ns, builtin, local))
    }
}

fn qualify(ns: Namespace, builtin_prefix: &str, local: &str) -> Name {
    if ns == Namespace::Builtin {
        Name::builtin(&format!("{builtin_prefix}:{local}"))
    } else {
        Name::new(ns, local)
    }
}

/// Parses Turtle written by [`to_turtle`] (or hand-written in the same
/// subset). Schema vocabulary is routed into axioms, not triples.
pub fn parse_turtle(text: &str) -> Result<KnowledgeGraph, TurtleError> {
    let tokens = lex(text)?;
    let mut resolver = Resolver {
        prefixes: HashMap::new(),
    };
    let mut g = KnowledgeGraph::new();
    let mut i = 0;
    let syntax = |line: usize, reason: &str| TurtleError::Syntax {
        line,
        reason: reason.to_string(),
    };
    while i < tokens.len() {
        let (line, tok) = &tokens[i];
        let line = *line;
        if tok == &Tok::Term("@prefix".into()) || tok == &Tok::Term("PREFIX".into()) {
            let sparql_style = tok == &Tok::Term("PREFIX".into());
            let (Some((_, Tok::Term(p))), Some((_, Tok::Term(iri)))) = (tokens.get(i + 1), tokens.get(i + 2)) else {
                return Err(syntax(line, "malformed prefix declaration"));
            };
            let prefix = p
                .strip_suffix(':')
                .ok_or_else(|| syntax(line, "prefix must end with `:`"))?;
            let iri = iri
                .strip_prefix('<')
                .and_then(|t| t.strip_suffix('>'))
                .ok_or_else(|| syntax(line, "prefix IRI must be in angle brackets"))?;
            resolver
                .prefixes
                .insert(prefix.to_string(), Resolver::namespace_of(iri));
            i += 3;
            if !sparql_style {
                if tokens.get(i).map(|t| &t.1) != Some(&Tok::Dot) {
                    return Err(syntax(line, "expected `.` after prefix"));
                }
                i += 1;
            }
            continue;
        }
        let Tok::Term(s) = tok else {
            return Err(syntax(line, "expected a subject"));
        };
        let subject = resolver.resolve(s, line)?;
        i += 1;
        loop {
            let Some((pl, Tok::Term(p))) = tokens.get(i) else {
                return Err(syntax(line, "expected a predicate"));
            };
            let predicate = resolver.resolve(p, *pl)?;
            i += 1;
            loop {
                let Some((ol, Tok::Term(o))) = tokens.get(i) else {
                    return Err(syntax(line, "expected an object"));
                };
                let object = resolver.resolve(o, *ol)?;
                add_statement(&mut g, &subject, &predicate, &object)?;
                i += 1;
                if tokens.get(i).map(|t| &t.1) == Some(&Tok::Comma) {
                    i += 1;
                } else {
                    break;
                }
            }
            match tokens.get(i).map(|t| &t.1) {
                Some(Tok::Semi) => {
                    i += 1;
                    if tokens.get(i).map(|t| &t.1) == Some(&Tok::Dot) {
                        i += 1;
                        break;
                    }
                }
                Some(Tok::Dot) => {
                    i += 1;
                    break;
                }
                _ => return Err(syntax(line, "expected `;` or `.`")),
            }
        }
    }
    Ok(g)
}

fn add_statement(g: &mut KnowledgeGraph, s: &Name, p: &Name, o: &Name) -> Result<(), GraphError> {
    let builtin = |n: &Name, text: &str| n.namespace == Namespace::Builtin && n.local_name == text;
    if builtin(p, SUBCLASS_OF) {
        g.add_subclass(s, o)?;
    } else if builtin(p, INVERSE_OF) {
        g.add_inverse(s, o);
    } else if builtin(p, RDF_TYPE) && builtin(o, OWL_CLASS) {
        g.declare_class(s);
    } else if builtin(p, RDF_TYPE) && builtin(o, OBJECT_PROPERTY) {
        g.declare_property(s);
    } else if builtin(p, RDF_TYPE) && builtin(o, SYMMETRIC_PROPERTY) {
        g.add_symmetric(s);
    } else {
        g.insert_names(s, p, o)?;
    }
    Ok(())
}
