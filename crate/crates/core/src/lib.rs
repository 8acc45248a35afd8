//! Certification of local minimax points for constrained minimax problems.

pub mod certifier;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod generalized_jacobian;
pub mod linalg;
pub mod lower_level;
pub mod oracle;
pub mod problem;
pub mod report;
pub mod upper_level;
pub mod value_function;

pub use certifier::{certify, classify_path, render_summary, CertPath, CertificateReport, Verdict};
pub use config::CheckConfig;
pub use error::{Error, Result};
pub use lower_level::{solve_lower, KktSolution, LowerSeed, PathTag, SolveMethod};
pub use oracle::{verify_minimax_definition, GridSpec};
pub use problem::{parse_problem, CandidatePoint, Dims, ProblemSpec};
pub use report::{ConditionResult, Method, Role, Status};
