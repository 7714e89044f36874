//! Binomial coefficients and pmfs in double precision.
//!
//! Populations here stay below a couple of hundred, so incremental products
//! are exact enough and never overflow.

/// `C(n, k)`, zero when `k > n`.
pub fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// `C(n, k) q^k (1-q)^(n-k)`.
pub fn binomial_pmf(k: usize, n: usize, q: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    choose(n, k) * q.powi(k as i32) * (1.0 - q).powi((n - k) as i32)
}

/// Full pmf vector `[P(0), ..., P(n)]`.
pub fn binomial_row(n: usize, q: f64) -> Vec<f64> {
    (0..=n).map(|k| binomial_pmf(k, n, q)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_coefficients() {
        assert_eq!(choose(0, 0), 1.0);
        assert_eq!(choose(5, 2), 10.0);
        assert_eq!(choose(5, 6), 0.0);
        assert_eq!(choose(10, 10), 1.0);
        assert!((choose(50, 25) - 126_410_606_437_752.0).abs() / 1.26e14 < 1e-14);
    }

    #[test]
    fn pmf_handles_degenerate_probabilities() {
        assert_eq!(binomial_pmf(0, 4, 0.0), 1.0);
        assert_eq!(binomial_pmf(4, 4, 1.0), 1.0);
        assert_eq!(binomial_pmf(3, 4, 1.0), 0.0);
        assert_eq!(binomial_pmf(0, 0, 0.3), 1.0);
    }
}
