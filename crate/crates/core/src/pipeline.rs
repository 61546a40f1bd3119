//! Batch driver: compose files in, diagram artifacts out.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use log::{error, info};
use thiserror::Error;

use crate::compose::{parse_compose, ComposeError};
use crate::dfd::{build_model, BuildError, DfdModel, IdGenerator};
use crate::evaluation::{self, default_mappings, evaluate_corpus, load_labels, EvalRow, LabelError};
use crate::export::{export_dot, export_model};
use crate::graph::{lower, GraphError, KnowledgeGraph};
use crate::pattern::{builtin_catalog, parse_patterns, report_to_json, run_patterns, select_patterns, PatternQuery, PatternReport, QueryError};
use crate::reasoner::{load_templates, materialize, ReasonError, RuleSet};
use crate::taxonomy::{load_taxonomy, Taxonomy, TaxonomyError};
use crate::turtle::to_turtle;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("taxonomy: {0}")]
    Taxonomy(#[from] TaxonomyError),
    #[error("patterns: {0}")]
    Query(#[from] QueryError),
    #[error("templates: {0}")]
    Templates(ReasonError),
    #[error("labels: {0}")]
    Labels(#[from] LabelError),
    #[error("no compose files found")]
    NoInput,
}

/// Failure of one diagram; the rest of the corpus is unaffected.
#[derive(Debug, Error)]
pub enum DiagramError {
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Reason(#[from] ReasonError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("{0}")]
    Io(#[from] io::Error),
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExportFormats {
    pub model: bool,
    pub explicit: bool,
    pub reasoned: bool,
    pub dot: bool,
    pub report: bool,
}

impl ExportFormats {
    pub const ALL: ExportFormats = ExportFormats {
        model: true,
        explicit: true,
        reasoned: true,
        dot: true,
        report: true,
    };

    /// Parses a comma list of `model`, `explicit`, `reasoned`, `dot`,
    /// `report` or `all`.
    pub fn parse(list: &str) -> Result<Self, String> {
        let mut f = ExportFormats {
            model: false,
            explicit: false,
            reasoned: false,
            dot: false,
            report: false,
        };
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "all" => f = ExportFormats::ALL,
                "model" => f.model = true,
                "explicit" => f.explicit = true,
                "reasoned" => f.reasoned = true,
                "dot" => f.dot = true,
                "report" => f.report = true,
                _ => return Err(format!("unknown export format `{item}`")),
            }
        }
        Ok(f)
    }
}

impl Default for ExportFormats {
    fn default() -> Self {
        ExportFormats::ALL
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    /// `None` uses the bundled starter taxonomy.
    pub taxonomy_path: Option<PathBuf>,
    /// Compose files or directories holding them.
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    /// Pattern ids; empty or `all` selects the whole catalog.
    pub patterns: Vec<String>,
    /// Replaces the built-in catalog.
    pub pattern_file: Option<PathBuf>,
    /// Extra threat templates.
    pub templates_path: Option<PathBuf>,
    pub labels_path: Option<PathBuf>,
    pub formats: ExportFormats,
}

/// Everything needed to analyze one diagram.
#[derive(Debug, Clone)]
pub struct Analyzer {
    pub taxonomy: Taxonomy,
    pub rules: RuleSet,
    pub patterns: Vec<PatternQuery>,
}

/// The three representations of a diagram plus its pattern report.
#[derive(Debug, Clone)]
pub struct DiagramArtifacts {
    pub model: DfdModel,
    pub explicit: KnowledgeGraph,
    pub reasoned: KnowledgeGraph,
    pub report: PatternReport,
}

impl Analyzer {
    pub fn starter() -> Self {
        let taxonomy = Taxonomy::starter();
        Analyzer {
            rules: RuleSet::standard(&taxonomy),
            taxonomy,
            patterns: builtin_catalog(),
        }
    }

    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let taxonomy = match &cfg.taxonomy_path {
            Some(p) => load_taxonomy(&read(p)?)?,
            None => Taxonomy::starter(),
        };
        let mut rules = RuleSet::standard(&taxonomy);
        if let Some(p) = &cfg.templates_path {
            rules = rules.with_templates(load_templates(&read(p)?).map_err(PipelineError::Templates)?);
        }
        let catalog = match &cfg.pattern_file {
            Some(p) => parse_patterns(&read(p)?)?,
            None => builtin_catalog(),
        };
        let patterns = select_patterns(&catalog, &cfg.patterns)?;
        Ok(Analyzer {
            taxonomy,
            rules,
            patterns,
        })
    }

    pub fn analyze(&self, compose: &str, diagram_id: &str, ids: &mut IdGenerator) -> Result<DiagramArtifacts, DiagramError> {
        let parsed = parse_compose(compose)?;
        let model = build_model(&parsed, &self.taxonomy, ids)?;
        let explicit = lower(&model, &self.taxonomy)?;
        let reasoned = materialize(&explicit, &self.rules)?;
        let report = run_patterns(&reasoned, diagram_id, &self.patterns)?;
        Ok(DiagramArtifacts {
            model,
            explicit,
            reasoned,
            report,
        })
    }
}

/// Output of a pipeline run.
#[derive(Debug, Default)]
pub struct PipelineSummary {
    pub processed: Vec<PathBuf>,
    pub failures: Vec<(PathBuf, String)>,
    pub reports: Vec<PatternReport>,
    pub evaluation: Option<Vec<EvalRow>>,
}

impl PipelineSummary {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }
}

fn is_compose_file(p: &Path) -> bool {
    matches!(p.extension().and_then(|e| e.to_str()), Some("yml" | "yaml"))
}

/// Expands directories (non-recursively) into their `*.yml`/`*.yaml`
/// files, sorted by path.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = fs::read_dir(input).map_err(|source| PipelineError::Io {
                path: input.clone(),
                source,
            })?;
            let mut files: Vec<PathBuf> = entries
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.is_file() && is_compose_file(p))
                .collect();
            files.sort();
            out.extend(files);
        } else if input.is_file() {
            out.push(input.clone());
        } else {
            return Err(PipelineError::Io {
                path: input.clone(),
                source: io::Error::new(io::ErrorKind::NotFound, "no such file or directory"),
            });
        }
    }
    if out.is_empty() {
        return Err(PipelineError::NoInput);
    }
    Ok(out)
}

/// Diagram id for an input file: its file stem.
pub fn diagram_id(path: &Path) -> String {
    path.file_stem().map_or_else(|| "diagram".to_string(), |s| s.to_string_lossy().into_owned())
}

fn process_file(analyzer: &Analyzer, cfg: &PipelineConfig, path: &Path) -> Result<PatternReport, DiagramError> {
    let text = fs::read_to_string(path)?;
    let id = diagram_id(path);
    let mut ids = match cfg.seed {
        Some(seed) => IdGenerator::seeded(seed),
        None => new_random_ids(),
    };
    let a = analyzer.analyze(&text, &id, &mut ids)?;
    let out = |ext: &str| cfg.output_dir.join(format!("{id}.{ext}"));
    let f = cfg.formats;
    if f.model {
        fs::write(out("model.yml"), export_model(&a.model))?;
    }
    if f.explicit {
        fs::write(out("explicit.ttl"), to_turtle(&a.explicit, &id))?;
    }
    if f.reasoned {
        fs::write(out("reasoned.ttl"), to_turtle(&a.reasoned, &id))?;
    }
    if f.dot {
        fs::write(out("dot"), export_dot(&a.model))?;
    }
    if f.report {
        fs::write(out("report.json"), report_to_json(&a.report, &analyzer.patterns))?;
    }
    Ok(a.report)
}

#[cfg(feature = "random-ids")]
fn new_random_ids() -> IdGenerator {
    IdGenerator::random()
}

#[cfg(not(feature = "random-ids"))]
fn new_random_ids() -> IdGenerator {
    IdGenerator::seeded(0)
}

/// Runs every input through parse, build, lower, materialize and the
/// pattern catalog, writing the selected artifacts to the output
/// directory. Per-file failures are collected, not fatal.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary, PipelineError> {
    let analyzer = Analyzer::from_config(cfg)?;
    let labels = match &cfg.labels_path {
        Some(p) => Some(load_labels(&read(p)?)?),
        None => None,
    };
    let files = collect_inputs(&cfg.inputs)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|source| PipelineError::Io {
        path: cfg.output_dir.clone(),
        source,
    })?;

    let run = |path: &PathBuf| (path.clone(), process_file(&analyzer, cfg, path));
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        files.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = files.iter().map(run).collect();

    let mut summary = PipelineSummary::default();
    for (path, result) in results {
        match result {
            Ok(report) => {
                info!("{}: matched {:?}", path.display(), report.matched());
                summary.processed.push(path);
                summary.reports.push(report);
            }
            Err(e) => {
                error!("{}: {e}", path.display());
                summary.failures.push((path, e.to_string()));
            }
        }
    }

    if let Some(labels) = labels {
        let rows = evaluate_corpus(&summary.reports, &labels, &default_mappings());
        write(&cfg.output_dir.join("evaluation.txt"), &evaluation::format_table(&rows))?;
        write(&cfg.output_dir.join("evaluation.json"), &evaluation::to_json(&rows))?;
        summary.evaluation = Some(rows);
    }
    Ok(summary)
}
