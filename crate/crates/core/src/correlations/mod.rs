//! Pair arrival-time correlations: single- and multimode envelopes, binned
//! detection with window functions and accidentals, envelope fitting and a
//! seeded event generator.

mod detection;
mod envelope;
mod events;
mod fit;

pub use detection::{
    adjacent_bin_visibility, beat_period_s, bin_overlap, binned_histogram, BinDelay, CoincidenceHistogram,
    DetectionModel, HistogramKind, HistogramMode, DELTA_COMB_MIN_MODES,
};
pub use envelope::{comb_kernel, g2_multi_exact, g2_multi_weights, g2_single, CombTooth, G2Envelope, TOOTH_CUTOFF};
pub use events::{
    histogram_from_events, poisson_resample, read_events, simulate_events, write_events, DetectionEvent,
    MonteCarloConfig, EVENT_RECORD_BYTES, MONTE_CARLO_SHARDS,
};
pub use fit::{fit_envelope, EnvelopeFit, MAX_ITERATIONS};
