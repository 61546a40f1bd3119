use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dfd_core::evaluation::{default_mappings, evaluate_corpus, format_table, load_labels, to_json};
use dfd_core::export::{export_dot, parse_model};
use dfd_core::pattern::{report_from_json, report_to_json, run_patterns};
use dfd_core::pipeline::{run_pipeline, Analyzer, ExportFormats, PipelineConfig};
use dfd_core::turtle::parse_turtle;
use dfd_core::materialize;

#[derive(Parser)]
#[command(name = "dfdsec", version, about = "Semantic data-flow diagrams from Docker Compose files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct AnalysisOpts {
    /// Domain taxonomy (services.yml); the bundled starter taxonomy by default
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Pattern ids to run, comma separated, or `all`
    #[arg(long, value_delimiter = ',', default_value = "all")]
    patterns: Vec<String>,
    /// Pattern file replacing the built-in catalog
    #[arg(long)]
    pattern_file: Option<PathBuf>,
    /// Extra threat templates
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build all representations for compose files or directories of them
    Build {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        /// Seed for reproducible identifiers
        #[arg(long)]
        seed: Option<u64>,
        /// Label file; writes an evaluation table next to the artifacts
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Artifacts to write: model, explicit, reasoned, dot, report or all
        #[arg(long, default_value = "all")]
        formats: String,
        #[command(flatten)]
        analysis: AnalysisOpts,
    },
    /// Run patterns over Turtle graphs (reasoning first)
    Analyze {
        #[arg(required = true)]
        graphs: Vec<PathBuf>,
        /// Directory for report files; stdout when absent
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        analysis: AnalysisOpts,
    },
    /// Score pattern reports against manual labels
    Eval {
        /// Report files or directories holding `*.report.json`
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        labels: PathBuf,
        /// Print JSON instead of the text table
        #[arg(long)]
        json: bool,
    },
    /// Render a model document as Graphviz DOT
    Render {
        model: PathBuf,
        /// Output file; stdout when absent
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn analyzer(opts: &AnalysisOpts) -> Result<Analyzer> {
    let cfg = PipelineConfig {
        taxonomy_path: opts.taxonomy.clone(),
        patterns: opts.patterns.clone(),
        pattern_file: opts.pattern_file.clone(),
        templates_path: opts.templates.clone(),
        ..Default::default()
    };
    Ok(Analyzer::from_config(&cfg)?)
}

/// `shop.reasoned.ttl` and `shop.explicit.ttl` both belong to `shop`.
fn graph_id(path: &Path) -> String {
    let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    for suffix in [".reasoned", ".explicit"] {
        if let Some(id) = stem.strip_suffix(suffix) {
            return id.to_string();
        }
    }
    stem
}

fn report_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.to_string_lossy().ends_with(".report.json"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(input.clone());
        }
    }
    if out.is_empty() {
        bail!("no report files found");
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Build {
            inputs,
            out,
            seed,
            labels,
            formats,
            analysis,
        } => {
            let cfg = PipelineConfig {
                taxonomy_path: analysis.taxonomy,
                inputs,
                output_dir: out,
                seed,
                patterns: analysis.patterns,
                pattern_file: analysis.pattern_file,
                templates_path: analysis.templates,
                labels_path: labels,
                formats: ExportFormats::parse(&formats).map_err(anyhow::Error::msg)?,
            };
            let summary = run_pipeline(&cfg)?;
            for r in &summary.reports {
                let matched: Vec<&str> = r.matched().into_iter().collect();
                println!("{}: {}", r.diagram_id, if matched.is_empty() { "-".to_string() } else { matched.join(" ") });
            }
            for (path, err) in &summary.failures {
                eprintln!("error: {}: {err}", path.display());
            }
            if let Some(rows) = &summary.evaluation {
                print!("{}", format_table(rows));
            }
            println!("{} processed, {} failed", summary.processed.len(), summary.failures.len());
            Ok(summary.success())
        }
        Command::Analyze { graphs, out, analysis } => {
            let a = analyzer(&analysis)?;
            if let Some(dir) = &out {
                fs::create_dir_all(dir)?;
            }
            for path in graphs {
                let g = parse_turtle(&read(&path)?).with_context(|| path.display().to_string())?;
                let reasoned = materialize(&g, &a.rules)?;
                let id = graph_id(&path);
                let report = run_patterns(&reasoned, &id, &a.patterns)?;
                let text = report_to_json(&report, &a.patterns);
                emit(out.as_ref().map(|d| d.join(format!("{id}.report.json"))).as_deref(), &text)?;
            }
            Ok(true)
        }
        Command::Eval { reports, labels, json } => {
            let labels = load_labels(&read(&labels)?)?;
            let mut parsed = Vec::new();
            for path in report_files(&reports)? {
                parsed.push(report_from_json(&read(&path)?).map_err(anyhow::Error::msg).with_context(|| path.display().to_string())?);
            }
            let rows = evaluate_corpus(&parsed, &labels, &default_mappings());
            print!("{}", if json { to_json(&rows) } else { format_table(&rows) });
            Ok(true)
        }
        Command::Render { model, out } => {
            let m = parse_model(&read(&model)?).with_context(|| model.display().to_string())?;
            emit(out.as_deref(), &export_dot(&m))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
