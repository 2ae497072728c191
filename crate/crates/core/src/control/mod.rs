//! The optimal control problem over admissible pairs and its direct-method
//! solver.

mod optimize;
mod problem;

pub use optimize::{
    optimal_set_sample, optimize, optimize_with, value, OptimalSetSample, OptimizeOptions, OptimizeResult,
    DEFAULT_STARTS,
};
pub use problem::{
    annotate, check_admissible, control_l2_gap, evaluate_cost, AdmissibilityReport, AdmissiblePair, ControlProblem, CostSpec,
    OperatorFamily, ParameterSpace,
};
