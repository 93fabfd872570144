//! Exact polynomial algebra over jet charts, the Dirac-Bergmann constrained
//! Hamiltonian pipeline, and numeric checks of the resulting flows.

pub mod chart;
pub mod dirac;
pub mod expr;
pub mod flow;
pub mod lagrangian;
pub mod linalg;
pub mod parser;
pub mod sample;
pub mod system;
pub mod verify;

pub use chart::{ChartError, ChartId, JetChart, VarId, VarKind};
pub use dirac::{
    ConstrainedSystem, Constraint, ConstraintClass, ConstraintOrigin, EnergyPresentations, MultiplierValue,
    PipelineError,
};
pub use expr::{rat, EvalError, Expr, Monomial, Rational};
pub use flow::{FlowError, FlowSetup, MonitorSummary, PhaseState, Trajectory};
pub use lagrangian::{euler_lagrange, verify_el_equals_lie, ElLieVerdict, ElSystem, LieSystem};
pub use parser::{parse_expr, render_expr, ParseError, ParseErrorKind, SourceSpan};
pub use system::{parse_system_file, IntegrateDefaults, SystemDefinition};
pub use verify::{all_pass, run_checks, Check, Verdict, VerifyOptions};
