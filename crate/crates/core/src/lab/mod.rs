//! Seeded generators, suite configuration, the suite runner and its reports.

mod config;
mod generate;
mod report;
mod suites;

pub use config::{parse_kv, SuiteConfig, SuiteName, Thresholds};
pub use generate::{generate, generate_with, rng_for, GeneratorKind};
pub use report::{emit_plotdata, CheckRecord, InputsHash, Series, SuiteReport, SERIES};
pub use suites::run_suite;
