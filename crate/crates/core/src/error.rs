use thiserror::Error;

use crate::barriers::BarrierError;
use crate::bounds::BoundsError;
use crate::expr::ExprError;
use crate::geometry::GeometryError;
use crate::operators::OperatorError;
use crate::solver::SolverError;
use crate::structure::StructureError;
use crate::verify::VerifyError;

/// Crate-level error. Each variant names the module the failure came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("expr: {0}")]
    Expr(#[from] ExprError),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("operators: {0}")]
    Operator(#[from] OperatorError),
    #[error("structure: {0}")]
    Structure(#[from] StructureError),
    #[error("barriers: {0}")]
    Barrier(#[from] BarrierError),
    #[error("verify: {0}")]
    Verify(#[from] VerifyError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("bounds: {0}")]
    Bounds(#[from] BoundsError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
