//! Converts Docker Compose configurations into semantic data-flow diagrams
//! and recognizes security-relevant architectural patterns in them.
//!
//! The pipeline has four stages:
//!
//! 1. [`compose`] parses a Compose document into a [`compose::ComposeModel`].
//! 2. [`dfd`] builds a depersonalized diagram ([`dfd::DfdModel`]) with help
//!    of the domain dictionary in [`taxonomy`].
//! 3. [`graph`] lowers the diagram into explicit facts; [`reasoner`]
//!    materializes the implicit ones.
//! 4. [`pattern`] runs closed-world pattern queries over the reasoned graph,
//!    and [`evaluation`] compares detections with manual labels.
//!
//! [`export`] and [`pipeline`] hold the serializers and the batch driver.

pub mod compose;
pub mod dfd;
pub mod evaluation;
pub mod export;
pub mod graph;
pub mod pattern;
pub mod pipeline;
pub mod reasoner;
pub mod taxonomy;
pub mod turtle;

pub use compose::{parse_compose, ComposeModel};
pub use dfd::{build_model, DfdModel, IdGenerator};
pub use graph::{lower, KnowledgeGraph};
pub use pattern::{builtin_catalog, run_catalog, PatternQuery, PatternReport};
pub use reasoner::{materialize, RuleSet};
pub use taxonomy::Taxonomy;
