use std::f64::consts::LN_2;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::detection::{single_bin_probability, CoincidenceHistogram, HistogramKind};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;

const REWEIGHT_PASSES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    /// Fitted γ₁+γ₂ (s^-1).
    pub decay_rate: f64,
    pub delay_s: f64,
    pub floor: f64,
    pub amplitude: f64,
    pub fwhm_s: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Peak-normalized binned double exponential: (1/t_bin)∫ e^{-γ|T|} overlap.
fn shape(g: f64, centre_bins: f64, bin: i64) -> f64 {
    let k = centre_bins.round();
    let d = centre_bins - k;
    single_bin_probability(g, d, bin - k as i64) * 2.0 / g
}

struct Problem<'a> {
    bins: Vec<i64>,
    y: &'a [f64],
    sigma: Vec<f64>,
}

impl Problem<'_> {
    // p = [amplitude, centre (bins), g = γ t_bin, floor]
    fn model(&self, p: &Vector4<f64>, bin: i64) -> f64 {
        p[3] + p[0] * shape(p[2], p[1], bin)
    }

    fn residuals(&self, p: &Vector4<f64>) -> Vec<f64> {
        self.bins
            .iter()
            .zip(self.y)
            .zip(&self.sigma)
            .map(|((&b, &y), &s)| (self.model(p, b) - y) / s)
            .collect()
    }

    fn cost(&self, p: &Vector4<f64>) -> f64 {
        self.residuals(p).iter().map(|r| r * r).sum()
    }

    fn jacobian(&self, p: &Vector4<f64>) -> Vec<[f64; 4]> {
        let steps = [
            1e-6 * p[0].abs().max(1e-12),
            1e-4,
            1e-6 * p[2],
            1e-6 * p[0].abs().max(1e-12),
        ];
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|k| {
                let (mut hi, mut lo) = (*p, *p);
                hi[k] += steps[k];
                lo[k] -= steps[k];
                let (rh, rl) = (self.residuals(&hi), self.residuals(&lo));
                rh.iter().zip(&rl).map(|(a, b)| (a - b) / (2.0 * steps[k])).collect()
            })
            .collect();
        (0..self.bins.len())
            .map(|i| [cols[0][i], cols[1][i], cols[2][i], cols[3][i]])
            .collect()
    }
}

/// Damped Gauss–Newton from `p`; returns the parameters, iterations and
/// whether the cost settled within [`MAX_ITERATIONS`].
fn levenberg_marquardt(
    problem: &Problem,
    mut p: Vector4<f64>,
    clamp: &impl Fn(Vector4<f64>) -> Vector4<f64>,
) -> (Vector4<f64>, usize, bool) {
    let mut cost = problem.cost(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let r = problem.residuals(&p);
        let jac = problem.jacobian(&p);
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (row, ri) in jac.iter().zip(&r) {
            let v = Vector4::from_row_slice(row);
            jtj += v * v.transpose();
            jtr += v * *ri;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for k in 0..4 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-30);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = clamp(p + step);
            let trial_cost = problem.cost(&trial);
            if trial_cost <= cost {
                let gain = cost - trial_cost;
                let tiny_step = (trial - p)
                    .iter()
                    .zip(p.iter())
                    .all(|(s, v)| s.abs() <= 1e-12 * v.abs().max(1e-9));
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if tiny_step || gain <= 1e-12 * cost {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            converged = true;
        }
        if converged {
            break;
        }
    }
    (p, iterations, converged)
}

/// Least-squares fit of `floor + A·exp(-|i t_bin - T₀| γ)`, binned.
pub fn fit_envelope(h: &CoincidenceHistogram) -> Result<EnvelopeFit> {
    let n = h.entries.len();
    if n < 8 {
        return Err(Error::Coverage("histogram too short to fit".into()));
    }
    let y = &h.entries;
    let edge = (n / 10).max(2);
    let outer: Vec<f64> = y[..edge].iter().chain(&y[n - edge..]).copied().collect();
    let floor0 = outer.iter().sum::<f64>() / outer.len() as f64;
    let spread = (outer.iter().map(|v| (v - floor0).powi(2)).sum::<f64>() / outer.len() as f64).sqrt();
    let noise = match h.kind {
        HistogramKind::Counts => spread.max(floor0.max(0.0).sqrt()),
        HistogramKind::Rate => spread,
    };
    let (peak_at, &peak) = y.iter().enumerate().fold(
        (0, &f64::NEG_INFINITY),
        |best, (i, v)| if *v > *best.1 { (i, v) } else { best },
    );
    if !(peak - floor0 > 3.0 * noise && peak > floor0) {
        return Err(Error::FitFailed(format!(
            "no peak 3 sigma above floor (peak {peak:.3e}, floor {floor0:.3e}, sigma {noise:.3e})"
        )));
    }
    let half = floor0 + (peak - floor0) / 2.0;
    let left = (0..peak_at).rev().find(|&i| y[i] < half).unwrap_or(0);
    let right = (peak_at..n).find(|&i| y[i] < half).unwrap_or(n - 1);
    let width_bins = ((right - left) as f64 - 1.0).max(1.0);
    if (n as f64) < 3.0 * width_bins {
        return Err(Error::Coverage(format!(
            "histogram spans {n} bins, under three times the {width_bins:.0}-bin width"
        )));
    }

    let mut problem = Problem {
        bins: h.bins().collect(),
        y,
        sigma: match h.kind {
            HistogramKind::Counts => y.iter().map(|v| v.max(1.0).sqrt()).collect(),
            HistogramKind::Rate => vec![1.0; n],
        },
    };
    let lower = Vector4::new(0.0, h.first_bin as f64, 1e-6, 0.0);
    let upper = Vector4::new(f64::INFINITY, h.last_bin() as f64, 10.0, f64::INFINITY);
    let clamp = |p: Vector4<f64>| p.zip_zip_map(&lower, &upper, |v, lo, hi| v.clamp(lo, hi));

    let start = clamp(Vector4::new(
        peak - floor0,
        (h.first_bin + peak_at as i64) as f64,
        2.0 * LN_2 / width_bins,
        floor0.max(0.0),
    ));
    let (mut p, mut iterations, mut converged) = levenberg_marquardt(&problem, start, &clamp);
    if h.kind == HistogramKind::Counts {
        // observed-count weights favour low fluctuations; refit with the model's variance
        for _ in 0..REWEIGHT_PASSES {
            problem.sigma = problem
                .bins
                .iter()
                .map(|&b| problem.model(&p, b).max(1.0).sqrt())
                .collect();
            let (next, more, ok) = levenberg_marquardt(&problem, p, &clamp);
            let settled = (next - p)
                .iter()
                .zip(p.iter())
                .all(|(d, v)| d.abs() <= 1e-9 * v.abs().max(1e-9));
            p = next;
            iterations += more;
            converged = ok;
            if settled {
                break;
            }
        }
    }
    let decay_rate = p[2] / h.bin_width_s;
    Ok(EnvelopeFit {
        decay_rate,
        delay_s: p[1] * h.bin_width_s,
        floor: p[3],
        amplitude: p[0],
        fwhm_s: 2.0 * LN_2 / decay_rate,
        iterations,
        converged,
    })
}
