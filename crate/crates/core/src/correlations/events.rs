use std::io::{Read, Write};

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Exp, Poisson, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detection::{CoincidenceHistogram, DetectionModel, HistogramKind, HistogramMode};
use super::envelope::{g2_multi_weights, G2Envelope};
use crate::error::{Error, Result};

/// Bytes per record: little-endian u64 timestamp (bin units) then a u8 channel.
pub const EVENT_RECORD_BYTES: usize = 9;

/// Fixed shard count so seeded runs do not depend on the thread pool.
pub const MONTE_CARLO_SHARDS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub timestamp: u64,
    pub channel: u8,
}

pub fn write_events<W: Write>(mut out: W, events: &[DetectionEvent]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(events.len() * EVENT_RECORD_BYTES);
    for e in events {
        buf.extend_from_slice(&e.timestamp.to_le_bytes());
        buf.push(e.channel);
    }
    out.write_all(&buf)
}

pub fn read_events<R: Read>(mut input: R) -> Result<Vec<DetectionEvent>> {
    let mut buf = Vec::new();
    input
        .read_to_end(&mut buf)
        .map_err(|e| Error::Numeric(format!("reading events: {e}")))?;
    if buf.len() % EVENT_RECORD_BYTES != 0 {
        return Err(Error::Contract(format!(
            "event stream length {} is not a multiple of {EVENT_RECORD_BYTES}",
            buf.len()
        )));
    }
    Ok(buf
        .chunks_exact(EVENT_RECORD_BYTES)
        .map(|c| DetectionEvent {
            timestamp: u64::from_le_bytes(c[..8].try_into().expect("8-byte slice")),
            channel: c[8],
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub duration_s: f64,
    pub seed: u64,
}

fn shard_events(
    env: &G2Envelope,
    det: &DetectionModel,
    mode: HistogramMode,
    cfg: &MonteCarloConfig,
    shard: u64,
    margin_s: f64,
) -> Result<Vec<DetectionEvent>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(shard);
    let span = cfg.duration_s / MONTE_CARLO_SHARDS as f64;
    let start = margin_s + shard as f64 * span;
    let when = Uniform::new(start, start + span).map_err(|e| Error::Numeric(e.to_string()))?;
    let draw_count = |rng: &mut ChaCha8Rng, rate: f64| -> Result<u64> {
        let mean = rate * span;
        if mean <= 0.0 {
            return Ok(0);
        }
        let p = Poisson::new(mean).map_err(|e| Error::Numeric(e.to_string()))?;
        Ok(p.sample(rng) as u64)
    };
    let t_bin = det.bin_width_s;
    let stamp = |t: f64| (t / t_bin).floor() as u64;
    let t0 = det.delay.seconds(t_bin);
    let mut events = Vec::new();

    let pairs = draw_count(&mut rng, det.pair_rate)?;
    let teeth = g2_multi_weights(env, det.comb_period_s)?;
    let pick = WeightedIndex::new(teeth.iter().map(|t| t.weight)).map_err(|e| Error::Numeric(e.to_string()))?;
    let decay = Exp::new(env.decay_rate()).map_err(|e| Error::Numeric(e.to_string()))?;
    for _ in 0..pairs {
        let ts = when.sample(&mut rng);
        let delay = match mode {
            HistogramMode::Single => {
                let magnitude = decay.sample(&mut rng);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
            HistogramMode::Multi => teeth[pick.sample(&mut rng)].delay_s,
        };
        events.push(DetectionEvent {
            timestamp: stamp(ts),
            channel: 0,
        });
        events.push(DetectionEvent {
            timestamp: stamp(ts + t0 + delay),
            channel: 1,
        });
    }
    for (channel, &rate) in det.singles_rates.iter().enumerate() {
        let extra = draw_count(&mut rng, rate - det.pair_rate)?;
        for _ in 0..extra {
            events.push(DetectionEvent {
                timestamp: stamp(when.sample(&mut rng)),
                channel: channel as u8,
            });
        }
    }
    Ok(events)
}

/// Seeded event stream: pairs with delays drawn from the envelope (or its
/// delta comb) plus uncorrelated singles that bring each detector to its
/// singles rate. Events are sorted by timestamp then channel.
pub fn simulate_events(
    env: &G2Envelope,
    det: &DetectionModel,
    mode: HistogramMode,
    cfg: &MonteCarloConfig,
) -> Result<Vec<DetectionEvent>> {
    env.validate()?;
    det.validate()?;
    if !(cfg.duration_s > 0.0) {
        return Err(Error::config("monte_carlo.duration_s", "must be positive"));
    }
    if det.singles_rates.iter().any(|&r| r < det.pair_rate) {
        return Err(Error::config(
            "detection.singles_rates",
            "must be at least the pair rate",
        ));
    }
    // keep every timestamp positive
    let margin_s = det.delay.seconds(det.bin_width_s).abs() + 40.0 / env.decay_rate() + det.bin_width_s;
    let shards: Vec<Vec<DetectionEvent>> = (0..MONTE_CARLO_SHARDS)
        .into_par_iter()
        .map(|s| shard_events(env, det, mode, cfg, s, margin_s))
        .collect::<Result<_>>()?;
    let mut events: Vec<DetectionEvent> = shards.into_iter().flatten().collect();
    events.sort_unstable();
    Ok(events)
}

/// Histogram of channel-1 minus channel-0 timestamp differences over `bins`.
pub fn histogram_from_events(
    events: &[DetectionEvent],
    bin_width_s: f64,
    bins: std::ops::RangeInclusive<i64>,
    duration_s: Option<f64>,
) -> CoincidenceHistogram {
    let mut starts: Vec<u64> = events.iter().filter(|e| e.channel == 0).map(|e| e.timestamp).collect();
    let mut stops: Vec<u64> = events.iter().filter(|e| e.channel == 1).map(|e| e.timestamp).collect();
    starts.sort_unstable();
    stops.sort_unstable();
    let (lo, hi) = (*bins.start(), *bins.end());
    let mut entries = vec![0.0; (hi - lo + 1).max(0) as usize];
    for &s in &starts {
        let from = stops.partition_point(|&t| (t as i128) < s as i128 + lo as i128);
        for &t in &stops[from..] {
            let d = t as i128 - s as i128;
            if d > hi as i128 {
                break;
            }
            entries[(d - lo as i128) as usize] += 1.0;
        }
    }
    CoincidenceHistogram {
        first_bin: lo,
        bin_width_s,
        kind: HistogramKind::Counts,
        entries,
        duration_s,
    }
}

/// Poisson counts whose expectation is `h` scaled to `peak_counts` at its maximum.
pub fn poisson_resample<R: Rng + ?Sized>(
    h: &CoincidenceHistogram,
    peak_counts: f64,
    rng: &mut R,
) -> Result<CoincidenceHistogram> {
    let peak = h.entries.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) || !(peak_counts > 0.0) {
        return Err(Error::Contract("need a positive histogram and peak count".into()));
    }
    let scale = peak_counts / peak;
    let entries = h
        .entries
        .iter()
        .map(|&v| {
            let mean = v * scale;
            if mean <= 0.0 {
                Ok(0.0)
            } else {
                Poisson::new(mean)
                    .map(|p| p.sample(rng))
                    .map_err(|e| Error::Numeric(e.to_string()))
            }
        })
        .collect::<Result<_>>()?;
    Ok(CoincidenceHistogram {
        kind: HistogramKind::Counts,
        entries,
        ..h.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::{binned_histogram, BinDelay};

    fn setup() -> (G2Envelope, DetectionModel) {
        let env = G2Envelope::from_linewidth(8.4e6, 0.8);
        let det = DetectionModel {
            bin_width_s: 1e-9,
            delay: BinDelay::from_seconds(20.3e-9, 1e-9),
            singles_rates: [1e5, 1.5e5],
            pair_rate: 2e4,
            comb_period_s: 1.0 / 501e6,
            modes_each_side: 546,
            jitter_fwhm_s: None,
        };
        (env, det)
    }

    #[test]
    fn binary_round_trip() {
        let events = vec![
            DetectionEvent {
                timestamp: 0,
                channel: 0,
            },
            DetectionEvent {
                timestamp: u64::MAX,
                channel: 1,
            },
            DetectionEvent {
                timestamp: 0x0102_0304_0506_0708,
                channel: 7,
            },
        ];
        let mut buf = Vec::new();
        write_events(&mut buf, &events).unwrap();
        assert_eq!(buf.len(), 27);
        assert_eq!(&buf[18..27], &[8, 7, 6, 5, 4, 3, 2, 1, 7]);
        assert_eq!(read_events(buf.as_slice()).unwrap(), events);
        assert!(read_events(&buf[..10]).is_err());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let (env, det) = setup();
        let cfg = MonteCarloConfig {
            duration_s: 0.05,
            seed: 99,
        };
        let a = simulate_events(&env, &det, HistogramMode::Multi, &cfg).unwrap();
        let b = simulate_events(&env, &det, HistogramMode::Multi, &cfg).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        write_events(&mut ba, &a).unwrap();
        write_events(&mut bb, &b).unwrap();
        assert_eq!(ba, bb);
        let other = simulate_events(&env, &det, HistogramMode::Multi, &MonteCarloConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn simulated_histogram_matches_model() {
        let (env, det) = setup();
        let cfg = MonteCarloConfig {
            duration_s: 2.0,
            seed: 5,
        };
        let events = simulate_events(&env, &det, HistogramMode::Single, &cfg).unwrap();
        let measured = histogram_from_events(&events, det.bin_width_s, -400..=400, Some(cfg.duration_s));
        let expected = binned_histogram(&env, &det, HistogramMode::Single, -400..=400).unwrap();

        // accidental floor: bins more than 5 FWHM from the delay
        let t0 = det.delay.seconds(det.bin_width_s);
        let far: Vec<f64> = measured
            .bins()
            .zip(&measured.entries)
            .filter(|(b, _)| (*b as f64 * det.bin_width_s - t0).abs() > 5.0 * env.fwhm_s())
            .map(|(_, &c)| c)
            .collect();
        let mean = far.iter().sum::<f64>() / far.len() as f64;
        let floor = det.accidental_rate() * cfg.duration_s;
        let sigma = (floor / far.len() as f64).sqrt();
        assert!((mean - floor).abs() < 4.0 * sigma, "{mean} vs {floor} +- {sigma}");

        let peak = det.delay.bins;
        let m = measured.get(peak).unwrap();
        let e = expected.get(peak).unwrap() * cfg.duration_s;
        assert!((m - e).abs() < 5.0 * e.sqrt(), "{m} vs {e}");
    }
}
