//! Convergence-bound constants and evaluation, empirical lemma checks on
//! seeded local-SGD runs, and CSV output.

mod bound;
mod curves;
mod lemmas;

pub use bound::{
    estimate_constants, theorem1_bound, ConvergenceConstants, OPTIMUM_TOL, SAFETY_FACTOR,
};
pub use curves::{
    bound_table, emit_curves, round_table, write_atomic, CsvTable, BOUND_HEADER, ROUND_HEADER,
};
pub use lemmas::{
    bound_curve, run_local_sgd, summary_text, verify_lemmas, BoundPoint, CompensatedSum, GapPoint,
    LemmaCheck, LemmaReport, LocalSgdConfig, LocalSgdTrace, StepSchedule, StepStats,
    LEMMA_PASS_FRACTION,
};
