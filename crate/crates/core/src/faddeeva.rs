//! Faddeeva function `w(z) = exp(-z^2) erfc(-iz)` for `Im z >= 0`.
//!
//! Near the origin a 32-term rational expansion in `(L + iz)/(L - iz)` is used;
//! far out, the Laplace continued fraction.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

const TERMS: usize = 32;
const FAR_RADIUS: f64 = 12.0;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

struct Expansion {
    scale: f64,
    coeffs: [f64; TERMS],
}

fn expansion() -> &'static Expansion {
    static CELL: OnceLock<Expansion> = OnceLock::new();
    CELL.get_or_init(|| {
        let m = 2 * TERMS;
        let n_samples = 2 * m;
        let scale = (TERMS as f64 / std::f64::consts::SQRT_2).sqrt();
        // samples of exp(-t^2)(L^2 + t^2) at t = L tan(theta/2), laid out
        // with theta = 0 first, matching a centred FFT
        let sample = |k: i64| -> f64 {
            if k == -(m as i64) {
                return 0.0;
            }
            let theta = k as f64 * PI / m as f64;
            let t = scale * (theta / 2.0).tan();
            (-t * t).exp() * (scale * scale + t * t)
        };
        let shifted: Vec<f64> = (0..n_samples)
            .map(|j| {
                let k = j as i64;
                if k < m as i64 {
                    sample(k)
                } else {
                    sample(k - n_samples as i64)
                }
            })
            .collect();
        let mut coeffs = [0.0; TERMS];
        for (n, c) in coeffs.iter_mut().enumerate() {
            let freq = (n + 1) as f64;
            let re: f64 = shifted
                .iter()
                .enumerate()
                .map(|(j, &g)| g * (2.0 * PI * j as f64 * freq / n_samples as f64).cos())
                .sum();
            *c = re / n_samples as f64;
        }
        Expansion { scale, coeffs }
    })
}

fn rational(z: Complex64) -> Complex64 {
    let e = expansion();
    let iz = Complex64::i() * z;
    let denom = e.scale - iz;
    let zz = (e.scale + iz) / denom;
    let poly = e
        .coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * zz + c);
    2.0 * poly / (denom * denom) + FRAC_1_SQRT_PI / denom
}

fn continued_fraction(z: Complex64) -> Complex64 {
    let r = z.norm();
    let depth = if r > 100.0 {
        8
    } else if r > 30.0 {
        16
    } else {
        40
    };
    let mut tail = z;
    for k in (1..=depth).rev() {
        tail = z - (k as f64 / 2.0) / tail;
    }
    Complex64::i() * FRAC_1_SQRT_PI / tail
}

/// Evaluates `w(z)`. Arguments in the lower half plane use the reflection
/// `w(z) = 2 exp(-z^2) - w(-z)`.
pub fn faddeeva(z: Complex64) -> Complex64 {
    if z.im < 0.0 {
        return 2.0 * (-z * z).exp() - faddeeva(-z);
    }
    if z.norm() > FAR_RADIUS {
        continued_fraction(z)
    } else {
        rational(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // (x, y, Re w, Im w), evaluated with 40-digit arithmetic
    #[allow(clippy::excessive_precision)]
    const REFERENCE: [(f64, f64, f64, f64); 50] = [
        (0.0, 0.01, 0.98881546104634251, 0.0),
        (0.0, 0.3, 0.73459933456765515, 0.0),
        (0.1, 0.01, 0.97908652655342538, 0.11013063795281996),
        (0.1, 0.3, 0.7293372656252226, 0.068410360995129598),
        (0.5, 0.01, 0.77234501841006655, 0.47121688569118492),
        (0.5, 0.3, 0.61485153914699102, 0.30312434964735106),
        (1.0, 0.01, 0.36870241739776607, 0.59985199449578834),
        (1.0, 0.3, 0.36938633777048706, 0.42722473632062878),
        (2.0, 0.01, 0.020620065445569127, 0.33928137058021126),
        (2.0, 0.3, 0.076395951675642117, 0.3098311071402927),
        (3.5, 0.01, 0.00053906761677611917, 0.16882773636001321),
        (3.5, 0.3, 0.015845945845876173, 0.16721187842685255),
        (5.0, 0.01, 0.00024080339195117517, 0.11524544620269498),
        (5.0, 0.3, 0.0071936623836764719, 0.11478396551148927),
        (6.0, 0.01, 0.00016375289889683184, 0.095395923386601482),
        (6.0, 0.3, 0.0048989689162197577, 0.095139922037989142),
        (8.0, 0.01, 9.0306058683762278e-5, 0.071087996059197241),
        (8.0, 0.3, 0.0027051565495498398, 0.07098415240142902),
        (12.0, 0.01, 3.9595190540519387e-5, 0.047180745358665932),
        (12.0, 0.3, 0.0011870959561778176, 0.047150784526348904),
        (27.0, 0.01, 7.7552042503902382e-6, 0.020910269114864358),
        (27.0, 0.3, 0.00023262730134558812, 0.020907681901633731),
        (100.0, 0.01, 5.6427422750508796e-7, 0.0056421779161582479),
        (100.0, 0.3, 1.6928074588473431e-5, 0.0056421271807501171),
        (3000.0, 0.01, 6.2687741952567878e-10, 0.00018806320496178616),
        (3000.0, 0.3, 1.8806322397916024e-8, 0.0001880632030832432),
        (-10.570034, 0.000567866, 2.9069865326049379e-6, -0.053618479632352857),
        (9.056068, 0.00023024, 1.6137876831767631e-6, 0.062686605303235447),
        (2.15292, 0.00673666, 0.011017539760715913, 0.3071296572480274),
        (-26.520065, 0.0344492, 2.7693819762125147e-5, -0.021289185366640736),
        (-27.75026, 0.0147309, 1.0813542298845569e-5, -0.020344186327738975),
        (-25.808675, 0.000284161, 2.4123410813578738e-7, -0.021876909635417114),
        (-4.528849, 1.36226, 0.036609620376464269, -0.11595379777804193),
        (-22.571882, 0.00130676, 1.451337403831465e-6, -0.025019841087343038),
        (7.645993, 5.47702, 0.035256885027351846, 0.048661947555416974),
        (4.626177, 0.00962504, 0.00027403572026406225, 0.1250324689303462),
        (28.575306, 0.000170967, 1.1834641087959997e-7, 0.019756068140006071),
        (21.508108, 0.00280573, 3.4330497931119107e-6, 0.026259927954173743),
        (-21.344695, 0.000388116, 4.8221654027328153e-7, -0.026461413981309523),
        (-11.491091, 1.20401, 0.0051459114401819265, -0.048740644775034272),
        (-19.156417, 0.0809097, 0.00012490304005421891, -0.029491491899788579),
        (8.334808, 0.00727759, 6.0429186341458931e-5, 0.068188837427885818),
        (2.864668, 0.000206037, 0.0002912413808398521, 0.21246596472341741),
        (-26.42393, 0.00107101, 8.6727956980745583e-7, -0.02136678651737121),
        (10.823998, 0.0137392, 6.7027988318009224e-5, 0.052349229174081871),
        (-11.15117, 0.0846856, 0.00038893995906152347, -0.050797606825534777),
        (-2.808937, 0.00315381, 0.00067027326665378814, -0.21754930676732447),
        (17.662769, 0.312588, 0.00056786121416366607, 0.031983650118744961),
        (-15.354209, 0.0744935, 0.00017941643641468952, -0.036822502732890075),
        (1.51179, 2.37513, 0.16892481943498108, 0.09609786200402271),
    ];

    #[test]
    fn matches_high_precision_reference() {
        for &(x, y, re, im) in REFERENCE.iter() {
            let w = faddeeva(Complex64::new(x, y));
            let expected = Complex64::new(re, im);
            let rel = (w - expected).norm() / expected.norm();
            assert!(rel < 1e-6, "w({x}+{y}i) = {w}, expected {expected}, rel {rel:e}");
        }
    }

    #[test]
    fn value_at_origin_is_one() {
        assert!((faddeeva(Complex64::new(0.0, 0.0)) - 1.0).norm() < 1e-10);
    }

    #[test]
    fn branches_agree_at_switch_radius() {
        for k in 0..16 {
            let phi = k as f64 * PI / 15.0;
            let z = Complex64::from_polar(FAR_RADIUS, phi.min(PI));
            let z = Complex64::new(z.re, z.im.abs());
            let a = rational(z);
            let b = continued_fraction(z);
            assert!((a - b).norm() / b.norm() < 1e-8, "{z}: {a} vs {b}");
        }
    }

    #[test]
    fn shallow_fraction_is_accurate_far_out() {
        let full = |z: Complex64| {
            let mut tail = z;
            for k in (1..=60).rev() {
                tail = z - (k as f64 / 2.0) / tail;
            }
            Complex64::i() * FRAC_1_SQRT_PI / tail
        };
        for r in [12.5, 31.0, 101.0, 1e4] {
            for y in [0.0, 0.01, 0.5] {
                let z = Complex64::new(r, y);
                let rel = (continued_fraction(z) - full(z)).norm() / full(z).norm();
                assert!(rel < 1e-13, "{z}: {rel:e}");
            }
        }
    }

    #[test]
    fn imaginary_axis_is_scaled_erfc() {
        // w(iy) = exp(y^2) erfc(y), real and decreasing
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let w = faddeeva(Complex64::new(0.0, k as f64 * 0.25));
            assert!(w.im.abs() < 1e-12);
            assert!(w.re < prev);
            prev = w.re;
        }
    }
}
