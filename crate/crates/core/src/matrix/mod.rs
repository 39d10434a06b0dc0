//! Transition-matrix analysis: reconstruction of `M[t]` from round traces,
//! coefficients of ergodicity, and convergence certificates.

mod certificate;
mod dense;
mod ergodicity;
mod transition;

pub use certificate::{
    block_length, block_product_certificate, convergence_certificate, dominance_check,
    evaluate_blocks, BlockCertificate, BlockReport, ConvergenceCertificate, SpreadCheck,
    CERTIFICATE_SLACK,
};
pub use dense::{compensated_sum, Matrix};
pub use ergodicity::{
    delta, ergodicity, hajnal_bound_check, lambda, ErgodicityReport, HajnalCheck, HAJNAL_SLACK,
    STOCHASTIC_TOL,
};
pub use transition::{
    beta, build_transition_matrix, build_transition_row, decompose, verify_conditions,
    ConditionChecks, RowAudit, StochasticRow, TransitionMatrix, WeightDecomposition,
    BETA_REL_SLACK, REPRODUCTION_TOL, ROW_SUM_TOL,
};
