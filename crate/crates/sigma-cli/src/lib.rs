//! Command-line front end for `sigma-core`: a small document grammar and
//! one report-producing command per capability.

pub mod document;
pub mod run;

pub use document::{parse_document, parse_expr, print_document, Document, ParseError, Statement};
pub use run::{run, Command, Job, Outcome, Report, RunError, EXIT_INPUT, EXIT_OK, EXIT_UNDECIDED, SCHEMA_VERSION};
