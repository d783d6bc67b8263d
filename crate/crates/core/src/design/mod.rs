//! Optimality criteria and optimal designs over a finite set of candidates.

mod binary;
mod criteria;
mod lowner;
mod optimize;

pub use binary::{binary_a_optimal, binary_d_optimal, binary_grid_search, BinaryDesignSummary, BinaryOptimum, SPECIAL_BRANCH_TOL};
pub use criteria::{
    efficiency, evaluate_criterion, evaluate_detailed, gamma_limits_consistency, CriterionValue,
    GammaLimitsReport, OptimalityCriterion, RANGE_TOL, RANK_TOL,
};
pub use lowner::{
    iid_vs_mixed_under_lowner, lowner_check, lowner_dominant, IidReport, LownerReport, LOWNER_TOL,
    SWEEP_WEIGHTS,
};
pub use optimize::{
    gamma_optimal_diagonal, optimize_frequencies, project_simplex, DesignBranch, OptimalDesignResult,
    OptimizeOptions, SUPPORT_CUTOFF,
};
