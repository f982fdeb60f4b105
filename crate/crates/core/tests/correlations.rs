use proptest::prelude::*;
use rbphoton_core::correlations::{
    binned_histogram, histogram_from_events, read_events, simulate_events, write_events, BinDelay, DetectionEvent,
    DetectionModel, G2Envelope, HistogramMode, MonteCarloConfig, EVENT_RECORD_BYTES,
};

fn detection(delay_s: f64) -> DetectionModel {
    DetectionModel {
        bin_width_s: 1e-9,
        delay: BinDelay::from_seconds(delay_s, 1e-9),
        singles_rates: [2e4, 2e4],
        pair_rate: 1e3,
        comb_period_s: 1.0 / 501e6,
        modes_each_side: 546,
        jitter_fwhm_s: None,
    }
}

#[test]
fn simulated_counts_follow_the_expected_histogram() {
    let env = G2Envelope::from_linewidth(8.4e6, 0.8);
    let det = detection(12e-9);
    let cfg = MonteCarloConfig {
        duration_s: 10.0,
        seed: 5,
    };
    let events = simulate_events(&env, &det, HistogramMode::Single, &cfg).unwrap();
    assert!(events.windows(2).all(|w| w[0] <= w[1]));
    let counted = histogram_from_events(&events, 1e-9, -100..=120, Some(cfg.duration_s));
    let expected = binned_histogram(&env, &det, HistogramMode::Single, -100..=120).unwrap();
    let total = |v: &[f64]| v.iter().sum::<f64>();
    let predicted = total(&expected.entries) * cfg.duration_s;
    let observed = total(&counted.entries);
    assert!(
        (observed - predicted).abs() < 4.0 * predicted.sqrt(),
        "{observed} vs {predicted}"
    );
    let peak = counted
        .bins()
        .zip(&counted.entries)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert!((peak - 12).abs() <= 3, "{peak}");
}

#[test]
fn truncated_stream_is_rejected() {
    let mut buf = Vec::new();
    write_events(
        &mut buf,
        &[DetectionEvent {
            timestamp: 7,
            channel: 1,
        }],
    )
    .unwrap();
    assert_eq!(buf.len(), EVENT_RECORD_BYTES);
    buf.pop();
    assert!(read_events(buf.as_slice()).is_err());
}

proptest! {
    #[test]
    fn events_round_trip(raw in prop::collection::vec((any::<u64>(), 0u8..2), 0..64)) {
        let events: Vec<DetectionEvent> = raw.into_iter().map(|(timestamp, channel)| DetectionEvent { timestamp, channel }).collect();
        let mut buf = Vec::new();
        write_events(&mut buf, &events).unwrap();
        prop_assert_eq!(buf.len(), events.len() * EVENT_RECORD_BYTES);
        prop_assert_eq!(read_events(buf.as_slice()).unwrap(), events);
    }

    #[test]
    fn whole_bin_shift_moves_histogram_exactly(shift in -20i64..20) {
        let env = G2Envelope::from_linewidth(8.4e6, 0.8);
        let base = detection(0.3e-9);
        let moved = DetectionModel { delay: base.delay.shifted(shift), ..base.clone() };
        let a = binned_histogram(&env, &base, HistogramMode::Multi, -60..=60).unwrap();
        let b = binned_histogram(&env, &moved, HistogramMode::Multi, -60 + shift..=60 + shift).unwrap();
        prop_assert_eq!(a.entries, b.entries);
    }
}
