//! Random generators, brute-force oracles and property suites.

mod gen;
pub mod oracle;
mod shrink;
mod suites;

pub use gen::{gen_term, graft, Gen, GenConfig};
pub use shrink::{minimize, Shrink, Stage, STAGES};
pub use suites::{run_suite, Failure, SuiteReport, SUITES};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HarnessError {
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("bad generator configuration: {0}")]
    Config(String),
}
