//! Lossy compression under an excess-distortion constraint: rate-distortion
//! functions and d-tilted information, d-ball probabilities, quantizer
//! entropies, and the bounds tying them to the minimum average length.
//!
//! Rates are reported in bits; slopes `lambda` are in bits per unit
//! distortion. Exponentials inside the solvers are natural.

mod ball;
mod distortion;
mod expansion;
mod quantizer;
mod rd;

pub use ball::{
    ball_log_prob, rplus, rplus_search, source_as_output, theorem6_bounds, RplusEstimate,
    Theorem6Bounds, DP_STATE_CAP, RPLUS_SWEEPS,
};
pub use distortion::{DistortionFile, DistortionSpec};
pub use expansion::{lemma3_mc_check, tilted_cutoff_expansion, Lemma3Report, TiltedPoint};
pub use quantizer::{
    constant_tilted_lower, hdeps_exact, ldet_exact, optimal_code_search, theorem5_and_hdeps,
    CodeSearch, QuantizerBounds, QuantizerOptimum, SEARCH_MAX_REPRODUCTIONS, SEARCH_MAX_SOURCE,
};
pub use rd::{
    finite_difference_slope, rd_excess_solve, rd_excess_solve_product, rd_solve, rd_solve_with,
    RdSolution, CLASS_REDUCTION_MAX_K,
};
