//! Decoy-state estimation of the single-photon click fraction and the phase
//! error rate.

mod chernoff;
mod estimate;
mod tally;

pub use chernoff::{
    chernoff_direct, chernoff_inverse, chernoff_inverse_tail, g2, solve_n_alpha, ChernoffInterval,
};
pub use estimate::{
    asymptotic_estimate, asymptotic_q_parity, estimate_from_inputs, estimate_y1_two_intensity,
    finite_breakdown, finite_size_estimate, photon_click_fractions, DecoyEstimate, DecoyInputs,
    EstimateMethod, FiniteBreakdown, GainBounds, Presets,
};
pub use tally::{TallyCell, TallyTable, CSV_HEADER};
