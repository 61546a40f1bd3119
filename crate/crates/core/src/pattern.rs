//! Closed-world pattern queries.
//!
//! A pattern is a conjunctive query over a reasoned graph with optional
//! `MINUS` blocks. Negation is evaluated against what the graph contains
//! and nothing else: absent facts are false.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{KnowledgeGraph, Name, Term, Triple};

const BUILTIN_PATTERNS: &str = include_str!("../data/patterns.rq");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("pattern {id}: {reason}")]
    Invalid { id: String, reason: String },
    #[error("query syntax error near token {position}: {reason}")]
    Syntax { position: usize, reason: String },
    #[error("unknown pattern id `{0}`")]
    UnknownPattern(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternGroup {
    Docker,
    Network,
    WebArchitecture,
    DataProcessing,
}

impl FromStr for PatternGroup {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "docker" => Ok(PatternGroup::Docker),
            "network" => Ok(PatternGroup::Network),
            "web" | "webarchitecture" => Ok(PatternGroup::WebArchitecture),
            "data" | "dataprocessing" => Ok(PatternGroup::DataProcessing),
            _ => Err(format!("unknown pattern group `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Var(String),
    Const(Name),
}

impl Node {
    pub fn var(name: &str) -> Self {
        Node::Var(name.to_string())
    }
    fn as_var(&self) -> Option<&str> {
        match self {
            Node::Var(v) => Some(v),
            Node::Const(_) => None,
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Var(v) => write!(f, "?{v}"),
            Node::Const(n) => write!(f, "{n}"),
        }
    }
}

/// A triple pattern; the predicate is always a ground term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleAtom {
    pub subject: Node,
    pub predicate: Name,
    pub object: Node,
}

impl TripleAtom {
    pub fn new(subject: Node, predicate: Name, object: Node) -> Self {
        TripleAtom {
            subject,
            predicate,
            object,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.subject.as_var().into_iter().chain(self.object.as_var())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternQuery {
    pub id: String,
    pub group: PatternGroup,
    pub title: String,
    pub projection: Vec<String>,
    pub body: Vec<TripleAtom>,
    pub minus_blocks: Vec<Vec<TripleAtom>>,
    pub order_by: Vec<String>,
}

impl PatternQuery {
    pub fn body_vars(&self) -> BTreeSet<&str> {
        self.body.iter().flat_map(TripleAtom::vars).collect()
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        let invalid = |reason: String| QueryError::Invalid {
            id: self.id.clone(),
            reason,
        };
        if self.body.is_empty() {
            return Err(invalid("empty body".into()));
        }
        if self.projection.is_empty() {
            return Err(invalid("empty projection".into()));
        }
        let vars = self.body_vars();
        for v in self.projection.iter().chain(&self.order_by) {
            if !vars.contains(v.as_str()) {
                return Err(invalid(format!("variable ?{v} does not occur in the body")));
            }
        }
        if self.minus_blocks.iter().any(Vec::is_empty) {
            return Err(invalid("empty MINUS block".into()));
        }
        Ok(())
    }
}

impl fmt::Display for PatternQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let group = match self.group {
            PatternGroup::Docker => "docker",
            PatternGroup::Network => "network",
            PatternGroup::WebArchitecture => "web",
            PatternGroup::DataProcessing => "data",
        };
        writeln!(f, "PATTERN {:?} GROUP {group} TITLE {:?}", self.id, self.title)?;
        let vars: Vec<String> = self.projection.iter().map(|v| format!("?{v}")).collect();
        writeln!(f, "SELECT {}", vars.join(" "))?;
        writeln!(f, "WHERE {{")?;
        for a in &self.body {
            writeln!(f, "  {} {} {} .", a.subject, a.predicate, a.object)?;
        }
        for block in &self.minus_blocks {
            writeln!(f, "  MINUS {{")?;
            for a in block {
                writeln!(f, "    {} {} {} .", a.subject, a.predicate, a.object)?;
            }
            writeln!(f, "  }}")?;
        }
        writeln!(f, "}}")?;
        if !self.order_by.is_empty() {
            let vars: Vec<String> = self.order_by.iter().map(|v| format!("?{v}")).collect();
            writeln!(f, "ORDER BY {}", vars.join(" "))?;
        }
        Ok(())
    }
}

/// One result row: the projected variables and their bindings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MatchRow {
    pub bindings: BTreeMap<String, Name>,
}

impl MatchRow {
    pub fn get(&self, var: &str) -> Option<&Name> {
        self.bindings.get(var)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternReport {
    pub diagram_id: String,
    /// Every evaluated pattern id, including those without rows.
    pub matches: BTreeMap<String, Vec<MatchRow>>,
}

impl PatternReport {
    /// Ids of patterns with at least one row.
    pub fn matched(&self) -> BTreeSet<&str> {
        self.matches
            .iter()
            .filter(|(_, rows)| !rows.is_empty())
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct PatternRecord {
    pattern_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    title: Option<String>,
    row_count: usize,
    rows: Vec<BTreeMap<String, String>>,
}

#[derive(Serialize, Deserialize)]
struct ReportRecord {
    diagram_id: String,
    matched: Vec<String>,
    patterns: Vec<PatternRecord>,
}

/// Machine-readable report. Titles are taken from `catalog` when present.
pub fn report_to_json(report: &PatternReport, catalog: &[PatternQuery]) -> String {
    let record = ReportRecord {
        diagram_id: report.diagram_id.clone(),
        matched: report.matched().into_iter().map(String::from).collect(),
        patterns: report
            .matches
            .iter()
            .map(|(id, rows)| PatternRecord {
                pattern_id: id.clone(),
                title: catalog.iter().find(|q| &q.id == id).map(|q| q.title.clone()),
                row_count: rows.len(),
                rows: rows
                    .iter()
                    .map(|r| r.bindings.iter().map(|(k, v)| (k.clone(), v.to_string())).collect())
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&record).expect("report serializes") + "\n"
}

pub fn report_from_json(text: &str) -> Result<PatternReport, String> {
    let record: ReportRecord = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let mut matches = BTreeMap::new();
    for p in record.patterns {
        let mut rows = Vec::new();
        for r in p.rows {
            let mut bindings = BTreeMap::new();
            for (k, v) in r {
                let name = Name::parse(&v).ok_or_else(|| format!("pattern {}: bad term `{v}`", p.pattern_id))?;
                bindings.insert(k, name);
            }
            rows.push(MatchRow { bindings });
        }
        matches.insert(p.pattern_id, rows);
    }
    Ok(PatternReport {
        diagram_id: record.diagram_id,
        matches,
    })
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Str(String),
    Open,
    Close,
    Dot,
    Semi,
    Comma,
}

fn tokenize(text: &str) -> Result<Vec<Token>, QueryError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '#' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '{' | '}' | '.' | ';' | ',' => {
                chars.next();
                out.push(match c {
                    '{' => Token::Open,
                    '}' => Token::Close,
                    '.' => Token::Dot,
                    ';' => Token::Semi,
                    _ => Token::Comma,
                });
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some(c) => s.push(c),
                        None => {
                            return Err(QueryError::Syntax {
                                position: out.len(),
                                reason: "unterminated string".into(),
                            })
                        }
                    }
                }
                out.push(Token::Str(s));
            }
            _ => {
                let mut w = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || "{}.;,\"#".contains(c) {
                        break;
                    }
                    w.push(c);
                    chars.next();
                }
                out.push(Token::Word(w));
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn err<T>(&self, reason: impl Into<String>) -> Result<T, QueryError> {
        Err(QueryError::Syntax {
            position: self.pos,
            reason: reason.into(),
        })
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.peek_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{kw}`"))
        }
    }

    fn expect(&mut self, tok: Token) -> Result<(), QueryError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {tok:?}"))
        }
    }

    fn text(&mut self) -> Result<String, QueryError> {
        match self.next() {
            Some(Token::Str(s)) | Some(Token::Word(s)) => Ok(s),
            _ => {
                self.pos -= 1;
                self.err("expected a word or string")
            }
        }
    }

    fn variables(&mut self) -> Vec<String> {
        let mut vars = Vec::new();
        while let Some(Token::Word(w)) = self.peek() {
            match w.strip_prefix('?') {
                Some(v) if !v.is_empty() => {
                    vars.push(v.to_string());
                    self.pos += 1;
                }
                _ => break,
            }
        }
        vars
    }

    fn node(&mut self) -> Result<Node, QueryError> {
        match self.next() {
            Some(Token::Word(w)) => {
                if let Some(v) = w.strip_prefix('?') {
                    if v.is_empty() {
                        return self.err("empty variable name");
                    }
                    return Ok(Node::Var(v.to_string()));
                }
                match Name::parse(&w) {
                    Some(n) => Ok(Node::Const(n)),
                    None => self.err(format!("bad term `{w}`")),
                }
            }
            _ => {
                self.pos -= 1;
                self.err("expected a term")
            }
        }
    }

    fn predicate(&mut self) -> Result<Name, QueryError> {
        match self.node()? {
            Node::Const(n) => Ok(n),
            Node::Var(v) => self.err(format!("variable predicate ?{v} is not supported")),
        }
    }

    /// Triples until the closing brace of the group; nested `MINUS`
    /// blocks are collected separately.
    fn group(&mut self, allow_minus: bool) -> Result<(Vec<TripleAtom>, Vec<Vec<TripleAtom>>), QueryError> {
        self.expect(Token::Open)?;
        let mut atoms = Vec::new();
        let mut minus = Vec::new();
        loop {
            match self.peek() {
                Some(Token::Close) => {
                    self.pos += 1;
                    break;
                }
                Some(Token::Dot) => {
                    self.pos += 1;
                }
                Some(Token::Word(w)) if w.eq_ignore_ascii_case("minus") => {
                    if !allow_minus {
                        return self.err("nested MINUS is not supported");
                    }
                    self.pos += 1;
                    let (block, _) = self.group(false)?;
                    minus.push(block);
                }
                Some(_) => {
                    let subject = self.node()?;
                    loop {
                        let predicate = self.predicate()?;
                        loop {
                            let object = self.node()?;
                            atoms.push(TripleAtom::new(subject.clone(), predicate.clone(), object));
                            if self.peek() == Some(&Token::Comma) {
                                self.pos += 1;
                            } else {
                                break;
                            }
                        }
                        if self.peek() == Some(&Token::Semi) {
                            self.pos += 1;
                            // `;` directly before `.` or `}` ends the list
                            if matches!(self.peek(), Some(Token::Dot) | Some(Token::Close)) {
                                break;
                            }
                        } else {
                            break;
                        }
                    }
                }
                None => return self.err("unexpected end of query"),
            }
        }
        Ok((atoms, minus))
    }

    fn pattern(&mut self, header: Option<(String, PatternGroup, String)>) -> Result<PatternQuery, QueryError> {
        self.keyword("SELECT")?;
        let projection = self.variables();
        if projection.is_empty() {
            return self.err("SELECT needs at least one variable");
        }
        self.keyword("WHERE")?;
        let (body, minus_blocks) = self.group(true)?;
        let mut order_by = Vec::new();
        if self.peek_keyword("ORDER") {
            self.pos += 1;
            self.keyword("BY")?;
            order_by = self.variables();
        }
        let (id, group, title) = header.unwrap_or_else(|| {
            (
                "custom".to_string(),
                PatternGroup::WebArchitecture,
                String::new(),
            )
        });
        let q = PatternQuery {
            id,
            group,
            title,
            projection,
            body,
            minus_blocks,
            order_by,
        };
        q.validate()?;
        Ok(q)
    }

    fn header(&mut self) -> Result<(String, PatternGroup, String), QueryError> {
        self.keyword("PATTERN")?;
        let id = self.text()?;
        let mut group = PatternGroup::WebArchitecture;
        let mut title = String::new();
        loop {
            if self.peek_keyword("GROUP") {
                self.pos += 1;
                let g = self.text()?;
                group = match g.parse() {
                    Ok(g) => g,
                    Err(e) => return self.err(e),
                };
            } else if self.peek_keyword("TITLE") {
                self.pos += 1;
                title = self.text()?;
            } else {
                break;
            }
        }
        Ok((id, group, title))
    }
}

/// Parses a pattern file: one or more `PATTERN` headed queries, or a single
/// bare `SELECT` query (which gets the id `custom`).
pub fn parse_patterns(text: &str) -> Result<Vec<PatternQuery>, QueryError> {
    let mut p = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    let mut out = Vec::new();
    if p.peek_keyword("SELECT") {
        out.push(p.pattern(None)?);
    }
    while p.peek().is_some() {
        let header = p.header()?;
        out.push(p.pattern(Some(header))?);
    }
    let mut ids = HashSet::new();
    for q in &out {
        if !ids.insert(q.id.as_str()) {
            return Err(QueryError::Invalid {
                id: q.id.clone(),
                reason: "duplicate pattern id".into(),
            });
        }
    }
    Ok(out)
}

/// The sixteen built-in patterns, in catalog order.
pub fn builtin_catalog() -> Vec<PatternQuery> {
    parse_patterns(BUILTIN_PATTERNS).expect("bundled pattern catalog parses")
}

/// Free-text concern attached to a built-in pattern id. Metadata only.
pub fn pattern_note(id: &str) -> Option<&'static str> {
    Some(match id {
        "1-1" | "1-2" => "Docker socket mounted inside a container",
        "1-3" => "Configuration storage writable by the container",
        "2-1" => "Plain HTTP reachable from outside without an HTTPS counterpart",
        "2-2" => "Database port reachable from outside",
        _ => return None,
    })
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Clone, Copy)]
enum Slot {
    Var(usize),
    Const(Term),
}

#[derive(Clone, Copy)]
struct ResolvedAtom {
    s: Slot,
    p: Term,
    o: Slot,
}

struct Resolver<'a> {
    g: &'a KnowledgeGraph,
    vars: Vec<String>,
}

impl Resolver<'_> {
    fn var(&mut self, v: &str) -> usize {
        match self.vars.iter().position(|x| x == v) {
            Some(i) => i,
            None => {
                self.vars.push(v.to_string());
                self.vars.len() - 1
            }
        }
    }

    /// `None` when a ground term is absent from the graph.
    fn atom(&mut self, a: &TripleAtom) -> Option<ResolvedAtom> {
        let p = self.g.lookup(&a.predicate)?;
        let mut slot = |n: &Node| -> Option<Slot> {
            match n {
                Node::Var(v) => Some(Slot::Var(self.var(v))),
                Node::Const(c) => self.g.lookup(c).map(Slot::Const),
            }
        };
        Some(ResolvedAtom {
            s: slot(&a.subject)?,
            p,
            o: slot(&a.object)?,
        })
    }
}

fn bound(slot: Slot, binding: &[Option<Term>]) -> Option<Term> {
    match slot {
        Slot::Const(t) => Some(t),
        Slot::Var(i) => binding[i],
    }
}

/// Backtracking join. The next atom is always the unused one with the most
/// bound positions, so every step after the first probes an index.
fn solve(
    g: &KnowledgeGraph,
    atoms: &[ResolvedAtom],
    used: &mut [bool],
    binding: &mut [Option<Term>],
    out: &mut Vec<Vec<Option<Term>>>,
) {
    let pick = atoms
        .iter()
        .enumerate()
        .filter(|(i, _)| !used[*i])
        .map(|(i, a)| {
            let score = bound(a.s, binding).is_some() as u8 * 2 + bound(a.o, binding).is_some() as u8;
            (i, score)
        })
        .max_by_key(|&(i, score)| (score, std::cmp::Reverse(i)));
    let Some((pick, _)) = pick else {
        out.push(binding.to_vec());
        return;
    };
    let atom = atoms[pick];
    used[pick] = true;

    let candidates: Vec<(Term, Term)> = match (bound(atom.s, binding), bound(atom.o, binding)) {
        (Some(s), Some(o)) => {
            if g.contains(&Triple::new(s, atom.p, o)) {
                vec![(s, o)]
            } else {
                Vec::new()
            }
        }
        (Some(s), None) => g.objects(s, atom.p).iter().map(|&o| (s, o)).collect(),
        (None, Some(o)) => g.subjects(atom.p, o).iter().map(|&s| (s, o)).collect(),
        (None, None) => g.pairs(atom.p).to_vec(),
    };
    for (s, o) in candidates {
        let mut assigned = Vec::with_capacity(2);
        let mut ok = true;
        for (slot, value) in [(atom.s, s), (atom.o, o)] {
            if let Slot::Var(i) = slot {
                match binding[i] {
                    Some(existing) if existing != value => ok = false,
                    Some(_) => {}
                    None => {
                        binding[i] = Some(value);
                        assigned.push(i);
                    }
                }
            }
        }
        if ok {
            solve(g, atoms, used, binding, out);
        }
        for i in assigned {
            binding[i] = None;
        }
    }
    used[pick] = false;
}

fn conjunctive(g: &KnowledgeGraph, atoms: &[ResolvedAtom], nvars: usize) -> Vec<Vec<Option<Term>>> {
    let mut out = Vec::new();
    let mut used = vec![false; atoms.len()];
    let mut binding = vec![None; nvars];
    solve(g, atoms, &mut used, &mut binding, &mut out);
    out
}

fn compare_rows(a: &[Name], b: &[Name]) -> Ordering {
    a.iter().cmp(b.iter())
}

/// Evaluates `q` over a materialized graph. Rows are deduplicated and
/// sorted by `order_by`, ties broken by the full projected row.
pub fn evaluate(g: &KnowledgeGraph, q: &PatternQuery) -> Result<Vec<MatchRow>, QueryError> {
    q.validate()?;
    let mut resolver = Resolver {
        g,
        vars: Vec::new(),
    };
    let mut body = Vec::with_capacity(q.body.len());
    for atom in &q.body {
        match resolver.atom(atom) {
            Some(a) => body.push(a),
            None => {
                warn!("pattern {}: `{} {} {}` names a term absent from the graph", q.id, atom.subject, atom.predicate, atom.object);
                return Ok(Vec::new());
            }
        }
    }
    let body_vars = resolver.vars.len();
    let mut blocks = Vec::new();
    for block in &q.minus_blocks {
        // a block mentioning an absent term has no solutions
        let resolved: Option<Vec<ResolvedAtom>> = block.iter().map(|a| resolver.atom(a)).collect();
        if let Some(atoms) = resolved {
            let vars: BTreeSet<usize> = atoms
                .iter()
                .flat_map(|a| [a.s, a.o])
                .filter_map(|s| match s {
                    Slot::Var(i) => Some(i),
                    Slot::Const(_) => None,
                })
                .collect();
            blocks.push((atoms, vars));
        }
    }
    let nvars = resolver.vars.len();

    let mut solutions = conjunctive(g, &body, nvars);
    for (atoms, vars) in &blocks {
        let shared: Vec<usize> = vars.iter().copied().filter(|&i| i < body_vars).collect();
        if shared.is_empty() {
            continue;
        }
        let excluded: HashSet<Vec<Term>> = conjunctive(g, atoms, nvars)
            .into_iter()
            .map(|sol| shared.iter().map(|&i| sol[i].expect("bound")).collect())
            .collect();
        solutions.retain(|sol| {
            let key: Vec<Term> = shared.iter().map(|&i| sol[i].expect("bound")).collect();
            !excluded.contains(&key)
        });
    }

    let index: HashMap<&str, usize> = resolver
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| (v.as_str(), i))
        .collect();
    let proj: Vec<usize> = q.projection.iter().map(|v| index[v.as_str()]).collect();
    let order: Vec<usize> = q.order_by.iter().map(|v| index[v.as_str()]).collect();
    let mut rows: Vec<(Vec<Name>, Vec<Name>)> = solutions
        .iter()
        .map(|sol| {
            let name = |i: usize| g.name(sol[i].expect("body variable bound")).clone();
            (order.iter().map(|&i| name(i)).collect(), proj.iter().map(|&i| name(i)).collect())
        })
        .collect();
    rows.sort_by(|a, b| compare_rows(&a.0, &b.0).then_with(|| compare_rows(&a.1, &b.1)));
    rows.dedup_by(|a, b| a.1 == b.1);
    Ok(rows
        .into_iter()
        .map(|(_, values)| MatchRow {
            bindings: q.projection.iter().cloned().zip(values).collect(),
        })
        .collect())
}

/// Evaluates `patterns` and collects the rows per pattern id.
pub fn run_patterns(
    g: &KnowledgeGraph,
    diagram_id: &str,
    patterns: &[PatternQuery],
) -> Result<PatternReport, QueryError> {
    let mut matches = BTreeMap::new();
    for q in patterns {
        matches.insert(q.id.clone(), evaluate(g, q)?);
    }
    Ok(PatternReport {
        diagram_id: diagram_id.to_string(),
        matches,
    })
}

/// Runs the whole built-in catalog.
pub fn run_catalog(g: &KnowledgeGraph, diagram_id: &str) -> Result<PatternReport, QueryError> {
    run_patterns(g, diagram_id, &builtin_catalog())
}

/// Picks catalog entries by id; `all` selects everything.
pub fn select_patterns(catalog: &[PatternQuery], ids: &[String]) -> Result<Vec<PatternQuery>, QueryError> {
    if ids.is_empty() || ids.iter().any(|i| i == "all") {
        return Ok(catalog.to_vec());
    }
    ids.iter()
        .map(|id| {
            catalog
                .iter()
                .find(|q| &q.id == id)
                .cloned()
                .ok_or_else(|| QueryError::UnknownPattern(id.clone()))
        })
        .collect()
}
