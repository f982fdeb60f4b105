//! Gauss–Legendre rules from the Golub–Welsch eigenvalue construction.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n > 0, "quadrature needs at least one node");
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], 2.0 * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [1usize, 3, 11] {
            let rule = gauss_legendre(n);
            for p in 0..(2 * n) as i32 {
                let approx: f64 = rule.iter().map(|(x, w)| w * x.powi(p)).sum();
                let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
                assert!((approx - exact).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn three_point_rule() {
        let rule = gauss_legendre(3);
        assert!((rule[2].0 - 0.6f64.sqrt()).abs() < 1e-14);
        assert!((rule[1].1 - 8.0 / 9.0).abs() < 1e-14);
    }
}
