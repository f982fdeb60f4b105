//! Two-photon polarization states through waveplates and a magnetized vapor
//! cell: rates, NooN fidelity, field scans and Fisher information.

mod elements;
mod fisher;
mod sensing;
mod state;

pub use elements::{
    apply_element, apply_jones, dominant_period, measurement_rates, oscillation_count, retarder, rotator,
    transmitted_fraction, visibility, Analyzer, MeasurementRates, OpticalElement,
};
pub use fisher::{fisher_information, FisherOptions, FisherReport, MAX_FIELD_STEP_T, RICHARDSON_TOLERANCE};
pub use sensing::{
    cavity_frame_input, circular_amplitudes, hyperfine_line_hz, jones_from_circular, noon_probe_detuning_hz,
    outcome_probabilities, scan_with_jones, sensing_scan, summarize_scan, write_scan_csv, FringeSummary,
    OutcomeProbabilities, SensingScanPoint, SensingSetup, MAX_SENSING_FIELD_T,
};
pub use state::{
    ideal_noon, make_noon_from_pair, noon_fidelity, noon_fidelity_at, surrogate_noon_state, Basis2, NoonFidelity,
    TwoPhotonPolState, BASIS, SURROGATE_COHERENCE_PHASE,
};
