//! Monic polynomials written by their lower coefficients.
//!
//! `lower = [a_0, a_1, .., a_{n-1}]` stands for `λⁿ + a_{n-1}λⁿ⁻¹ + .. + a_1λ + a_0`,
//! which is the ordering used for both the observer coefficients `c_1..c_n`
//! and the sliding-variable coefficients `γ_1..γ_{n-1}`.

use nalgebra::{Complex, DMatrix};

/// Companion matrix whose characteristic polynomial is the monic polynomial given by `lower`.
pub fn companion(lower: &[f64]) -> DMatrix<f64> {
    let n = lower.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        m[(i, i + 1)] = 1.0;
    }
    for (j, a) in lower.iter().enumerate() {
        m[(n - 1, j)] = -a;
    }
    m
}

pub fn roots(lower: &[f64]) -> Vec<Complex<f64>> {
    match lower.len() {
        0 => Vec::new(),
        1 => vec![Complex::new(-lower[0], 0.0)],
        _ => companion(lower).complex_eigenvalues().iter().copied().collect(),
    }
}

/// Coefficients of `(λ + 1)ⁿ` in lower order, i.e. `C(n, k)` for `k = 0..n`.
pub fn binomial(n: usize) -> Vec<f64> {
    let mut row = vec![1.0_f64];
    for _ in 0..n {
        let mut next = vec![1.0; row.len() + 1];
        for k in 1..row.len() {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    row.truncate(n);
    row
}

pub fn max_real_part(roots: &[Complex<f64>]) -> f64 {
    roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HurwitzCheck {
    pub hurwitz: bool,
    pub roots: Vec<Complex<f64>>,
    /// Set when a coefficient is non-positive, which already rules out Hurwitz stability.
    pub failed_sign_screen: bool,
}

pub fn hurwitz(lower: &[f64]) -> HurwitzCheck {
    let failed_sign_screen = lower.iter().any(|&a| !(a > 0.0));
    let roots = roots(lower);
    let hurwitz = !failed_sign_screen && roots.iter().all(|r| r.re < 0.0);
    HurwitzCheck {
        hurwitz,
        roots,
        failed_sign_screen,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_rows() {
        assert_eq!(binomial(0), Vec::<f64>::new());
        assert_eq!(binomial(1), vec![1.0]);
        assert_eq!(binomial(2), vec![1.0, 2.0]);
        assert_eq!(binomial(3), vec![1.0, 3.0, 3.0]);
        assert_eq!(binomial(4), vec![1.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn roots_of_known_polynomials() {
        // λ² + 3λ + 2 = (λ + 1)(λ + 2)
        let mut r: Vec<f64> = roots(&[2.0, 3.0]).iter().map(|c| c.re).collect();
        r.sort_by(f64::total_cmp);
        assert!((r[0] + 2.0).abs() < 1e-12 && (r[1] + 1.0).abs() < 1e-12);

        // λ² + 0.64 has roots ±0.8i
        let r = roots(&[0.64, 0.0]);
        for c in &r {
            assert!(c.re.abs() < 1e-12);
            assert!((c.im.abs() - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn binomial_is_hurwitz_and_sign_screen_rejects() {
        let check = hurwitz(&binomial(3));
        assert!(check.hurwitz);
        for r in &check.roots {
            assert!((r.re + 1.0).abs() < 1e-4 && r.im.abs() < 1e-4);
        }
        let bad = hurwitz(&[-1.0, 0.0]);
        assert!(!bad.hurwitz && bad.failed_sign_screen);
        // positive coefficients but unstable: λ³ + λ² + λ + 5
        let bad = hurwitz(&[5.0, 1.0, 1.0]);
        assert!(!bad.hurwitz && !bad.failed_sign_screen);
        assert!(hurwitz(&[]).hurwitz);
    }
}
