//! Closed-form privacy accounting.
//!
//! Bounds that were derived under a parameter window (minimum `n`, maximum
//! `epsilon`, ...) check it according to a [`WindowCheck`]. Under
//! [`WindowCheck::Unchecked`] the value is still computed and the resulting
//! [`BoundReport`] is tagged `outside_validity`.

mod amplification;
mod closed_form;
mod composition;
pub mod rdp;
mod report;

pub use amplification::{
    chernoff_visit_bound, collusion_adjust, cycle_bound_sum, erlingsson_shuffle, erlingsson_window,
    feldman_shuffle, feldman_window, histogram_cycle_bound, subsample_amplify, FeldmanShuffle,
};
pub use closed_form::{
    complete_histogram_bound, complete_sum_bound, local_sum_baseline, ring_histogram_bound,
    ring_sum_bound, sgd_closed_form_bound, sgd_utility_bound, spotted_bound, ContributionCount,
    SpottedMode,
};
pub use composition::{
    advanced_composition, advanced_composition_real, advanced_epsilon, heterogeneous_advanced,
    simple_composition,
};
pub use rdp::{rdp_compose, rdp_to_dp, RdpPoint};
pub use report::{BoundReport, WindowCheck};
