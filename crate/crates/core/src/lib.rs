//! Numerical laboratory for strongly continuous semigroups of finite
//! dimensional operators: resolvents, exponential approximations, contour
//! integrals, generator checks, spectral mapping and convergence studies.

pub mod cli;
pub mod contour;
pub mod error;
pub mod generator;
pub mod lab;
pub mod linalg;
pub mod operator;
pub mod quadrature;
pub mod report;
pub mod resolvent;
pub mod semigroup;
pub mod spectral;

pub use error::{LabError, Result};
pub use linalg::{CMatrix, CVector};
pub use operator::{
    estimate_growth_envelope, make_operator, operator_norm, parse_operator, spectrum, GeneratorSpec,
    GrowthEnvelope, MatrixFreeOperator, OperatorHandle, OperatorKind, OperatorSource, SpectrumReport,
};
pub use report::{CheckReport, ConvergenceRow, ConvergenceTable};
