//! Binomial coefficients.

/// Generalized binomial coefficient for a real upper argument:
/// `x (x-1) ... (x-y+1) / y!` when `x >= y`, and 0 otherwise.
pub fn gen_binom(x: f64, y: usize) -> f64 {
    if x < y as f64 {
        return 0.0;
    }
    let mut acc = 1.0;
    for i in 0..y {
        acc *= (x - i as f64) / (i + 1) as f64;
    }
    acc
}

/// Exact integer binomial coefficient. Returns 0 when `k > n`.
pub fn binom_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_values_match_pascal() {
        for n in 0..20u64 {
            for k in 0..=n {
                let want = if k == 0 || k == n {
                    1
                } else {
                    binom_u128(n - 1, k - 1) + binom_u128(n - 1, k)
                };
                assert_eq!(binom_u128(n, k), want);
                assert!((gen_binom(n as f64, k as usize) - want as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn below_lower_argument_is_zero() {
        assert_eq!(gen_binom(1.5, 2), 0.0);
        assert_eq!(gen_binom(0.0, 1), 0.0);
        assert_eq!(gen_binom(0.0, 0), 1.0);
        assert_eq!(binom_u128(3, 5), 0);
    }

    #[test]
    fn real_argument() {
        // 2.5 * 1.5 / 2
        assert!((gen_binom(2.5, 2) - 1.875).abs() < 1e-15);
    }
}
