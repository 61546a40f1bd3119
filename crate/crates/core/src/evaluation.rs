//! Precision and recall of pattern detections against manual labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use log::warn;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::pattern::PatternReport;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LabelError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: unknown criterion `{value}` (expected 1..5)")]
    UnknownCriterion { line: usize, value: String },
    #[error("diagram `{diagram}`: criterion {present} excludes criterion {excluded}")]
    Exclusion {
        diagram: String,
        present: u8,
        excluded: u8,
    },
    #[error("line {line}: diagram `{diagram}` labeled twice")]
    Duplicate { line: usize, diagram: String },
}

/// Manual five-criterion labels per diagram.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSet {
    pub labels: BTreeMap<String, BTreeSet<u8>>,
}

/// Criteria that rule each other out on a single diagram: (present, excluded).
const EXCLUSIONS: [(u8, u8); 3] = [(2, 1), (5, 3), (5, 4)];

impl LabelSet {
    pub fn get(&self, diagram: &str) -> Option<&BTreeSet<u8>> {
        self.labels.get(diagram)
    }

    pub fn insert(&mut self, diagram: impl Into<String>, criteria: BTreeSet<u8>) -> Result<(), LabelError> {
        let diagram = diagram.into();
        check_exclusions(&diagram, &criteria)?;
        self.labels.insert(diagram, criteria);
        Ok(())
    }
}

fn check_exclusions(diagram: &str, criteria: &BTreeSet<u8>) -> Result<(), LabelError> {
    for (present, excluded) in EXCLUSIONS {
        if criteria.contains(&present) && criteria.contains(&excluded) {
            return Err(LabelError::Exclusion {
                diagram: diagram.to_string(),
                present,
                excluded,
            });
        }
    }
    Ok(())
}

/// Reads a label file: one `diagram_id,criteria...` record per line,
/// criteria separated by spaces, possibly none. `#` starts a comment.
pub fn load_labels(text: &str) -> Result<LabelSet, LabelError> {
    let mut set = LabelSet::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((id, rest)) = content.split_once(',') else {
            return Err(LabelError::Malformed {
                line,
                reason: "expected `diagram_id,criteria`".into(),
            });
        };
        let id = id.trim();
        if id.is_empty() {
            return Err(LabelError::Malformed {
                line,
                reason: "empty diagram id".into(),
            });
        }
        let mut criteria = BTreeSet::new();
        for value in rest.split_whitespace() {
            match value.parse::<u8>() {
                Ok(c @ 1..=5) => {
                    criteria.insert(c);
                }
                _ => {
                    return Err(LabelError::UnknownCriterion {
                        line,
                        value: value.to_string(),
                    })
                }
            }
        }
        if set.labels.contains_key(id) {
            return Err(LabelError::Duplicate {
                line,
                diagram: id.to_string(),
            });
        }
        set.insert(id, criteria)?;
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriterionMapping {
    pub criteria_group: BTreeSet<u8>,
    pub pattern_group: BTreeSet<String>,
}

impl CriterionMapping {
    pub fn new(criteria: &[u8], patterns: &[&str]) -> Self {
        CriterionMapping {
            criteria_group: criteria.iter().copied().collect(),
            pattern_group: patterns.iter().map(|p| p.to_string()).collect(),
        }
    }

    pub fn criteria_label(&self) -> String {
        join(self.criteria_group.iter().map(|c| format!("({c})")))
    }

    pub fn pattern_label(&self) -> String {
        join(self.pattern_group.iter().map(|p| format!("({p})")))
    }
}

fn join(parts: impl Iterator<Item = String>) -> String {
    parts.collect::<Vec<_>>().join(" + ")
}

pub fn default_mappings() -> Vec<CriterionMapping> {
    vec![
        CriterionMapping::new(&[1, 2], &["3-2", "3-3"]),
        CriterionMapping::new(&[2], &["3-4"]),
        CriterionMapping::new(&[3, 5], &["4-1"]),
        CriterionMapping::new(&[4, 5], &["4-2"]),
        CriterionMapping::new(&[5], &["4-3"]),
    ]
}

/// An exact ratio. Displayed rounded half-up to two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    /// `None` when the denominator is zero.
    pub fn new(numerator: u64, denominator: u64) -> Option<Self> {
        (denominator > 0).then_some(Ratio {
            numerator,
            denominator,
        })
    }

    pub fn value(self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// Hundredths, rounded half-up in integer arithmetic.
    pub fn hundredths(self) -> u64 {
        (200 * self.numerator + self.denominator) / (2 * self.denominator)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.hundredths();
        write!(f, "{}.{:02}", h / 100, h % 100)
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalRow {
    pub criteria: String,
    pub patterns: String,
    pub total_criteria: u64,
    pub detected: u64,
    pub positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub precision: Option<Ratio>,
    pub recall: Option<Ratio>,
}

impl EvalRow {
    pub fn from_counts(mapping: &CriterionMapping, total: u64, detected: u64, positive: u64) -> Self {
        assert!(positive <= total && positive <= detected, "positive exceeds total or detected");
        EvalRow {
            criteria: mapping.criteria_label(),
            patterns: mapping.pattern_label(),
            total_criteria: total,
            detected,
            positive,
            false_positive: detected - positive,
            false_negative: total - positive,
            precision: Ratio::new(positive, detected),
            recall: Ratio::new(positive, total),
        }
    }
}

/// Scores every mapping over the reported diagrams. A diagram counts once
/// per mapping however many rows its patterns produced.
pub fn evaluate_corpus(
    reports: &[PatternReport],
    labels: &LabelSet,
    mappings: &[CriterionMapping],
) -> Vec<EvalRow> {
    let empty = BTreeSet::new();
    let mut diagrams: BTreeMap<&str, (&BTreeSet<u8>, BTreeSet<&str>)> = BTreeMap::new();
    for r in reports {
        let criteria = labels.get(&r.diagram_id).unwrap_or_else(|| {
            warn!("diagram `{}` has no labels; treating it as unclassified", r.diagram_id);
            &empty
        });
        let entry = diagrams.entry(r.diagram_id.as_str()).or_insert((criteria, BTreeSet::new()));
        entry.1.extend(r.matched());
    }
    for id in labels.labels.keys() {
        if !diagrams.contains_key(id.as_str()) {
            warn!("labeled diagram `{id}` has no pattern report; ignored");
        }
    }
    mappings
        .iter()
        .map(|m| {
            let (mut total, mut detected, mut positive) = (0, 0, 0);
            for (criteria, matched) in diagrams.values() {
                let labeled = criteria.iter().any(|c| m.criteria_group.contains(c));
                let hit = m.pattern_group.iter().any(|p| matched.contains(p.as_str()));
                total += labeled as u64;
                detected += hit as u64;
                positive += (labeled && hit) as u64;
            }
            EvalRow::from_counts(m, total, detected, positive)
        })
        .collect()
}

fn ratio_cell(r: Option<Ratio>) -> String {
    r.map_or_else(|| "N/A".to_string(), |r| r.to_string())
}

/// Aligned text table with the columns of the recognition table.
pub fn format_table(rows: &[EvalRow]) -> String {
    let header = [
        "Criteria",
        "Patterns",
        "Total criteria",
        "Detected patterns",
        "Positive",
        "False Positive",
        "False Negative",
        "Precision",
        "Recall",
    ];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.criteria.clone(),
                r.patterns.clone(),
                r.total_criteria.to_string(),
                r.detected.to_string(),
                r.positive.to_string(),
                r.false_positive.to_string(),
                r.false_negative.to_string(),
                ratio_cell(r.precision),
                ratio_cell(r.recall),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |row: Vec<&str>| {
        let parts: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    for row in &cells {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

pub fn to_json(rows: &[EvalRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize") + "\n"
}
