//! Spin operators and Clebsch–Gordan coefficients.
//!
//! Angular momenta are passed around doubled (`two_j = 2j`) so half-integer
//! values stay exact integers. Spin bases are ordered by descending `m`.

use nalgebra::DMatrix;

/// Projections `2m` for spin `j`, descending from `+2j`.
pub fn projections(two_j: u32) -> Vec<i32> {
    let two_j = two_j as i32;
    (0..=two_j).map(|k| two_j - 2 * k).collect()
}

/// Matrices `(J_z, J_+, J_-)` for spin `two_j / 2` in the descending-`m` basis.
pub fn spin_operators(two_j: u32) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let ms = projections(two_j);
    let dim = ms.len();
    let j = two_j as f64 / 2.0;
    let mut jz = DMatrix::zeros(dim, dim);
    let mut jp = DMatrix::zeros(dim, dim);
    for (k, &two_m) in ms.iter().enumerate() {
        let m = two_m as f64 / 2.0;
        jz[(k, k)] = m;
        // J+ |m> lands on |m+1>, which sits one row above in descending order.
        if k > 0 {
            jp[(k - 1, k)] = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
        }
    }
    let jm = jp.transpose();
    debug_assert!(commutation_holds(&jz, &jp, &jm), "spin algebra broken for 2j={two_j}");
    (jz, jp, jm)
}

fn commutation_holds(jz: &DMatrix<f64>, jp: &DMatrix<f64>, jm: &DMatrix<f64>) -> bool {
    let c1 = jp * jm - jm * jp - jz * 2.0;
    let c2 = jz * jp - jp * jz - jp;
    c1.amax() < 1e-12 && c2.amax() < 1e-12
}

fn factorial(n: i32) -> f64 {
    debug_assert!(n >= 0);
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `<j1 m1; j2 m2 | J M>` with every argument doubled. Returns 0 for
/// combinations violating the triangle or projection rules.
pub fn clebsch_gordan(two_j1: i32, two_m1: i32, two_j2: i32, two_m2: i32, two_j: i32, two_m: i32) -> f64 {
    if two_m1 + two_m2 != two_m {
        return 0.0;
    }
    if two_m1.abs() > two_j1 || two_m2.abs() > two_j2 || two_m.abs() > two_j {
        return 0.0;
    }
    if two_j > two_j1 + two_j2 || two_j < (two_j1 - two_j2).abs() {
        return 0.0;
    }
    if (two_j1 + two_j2 + two_j) % 2 != 0 {
        return 0.0;
    }
    let h = |x: i32| -> i32 {
        debug_assert!(x % 2 == 0, "non-integer combination");
        x / 2
    };
    let a = h(two_j1 + two_j2 - two_j);
    let b = h(two_j1 - two_m1);
    let c = h(two_j2 + two_m2);
    let d = h(two_j - two_j2 + two_m1);
    let e = h(two_j - two_j1 - two_m2);

    let pre = ((two_j + 1) as f64
        * factorial(h(two_j + two_j1 - two_j2))
        * factorial(h(two_j - two_j1 + two_j2))
        * factorial(a)
        / factorial(h(two_j1 + two_j2 + two_j) + 1))
    .sqrt();
    let norm = (factorial(h(two_j + two_m))
        * factorial(h(two_j - two_m))
        * factorial(b)
        * factorial(h(two_j1 + two_m1))
        * factorial(h(two_j2 - two_m2))
        * factorial(c))
    .sqrt();

    let k_min = 0.max(-d).max(-e);
    let k_max = a.min(b).min(c);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign
            / (factorial(k)
                * factorial(a - k)
                * factorial(b - k)
                * factorial(c - k)
                * factorial(d + k)
                * factorial(e + k));
    }
    pre * norm * sum
}
