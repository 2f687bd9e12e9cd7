//! Scalar special functions shared by the potentials, the mapping and the samplers.

use std::f64::consts::PI;

/// Above this argument `erfcx` switches from `exp(x^2) erfc(x)` to a continued fraction.
const ERFCX_CF_THRESHOLD: f64 = 10.0;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Scaled complementary error function `exp(x^2) * erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < ERFCX_CF_THRESHOLD {
        if x < -26.0 {
            return f64::INFINITY;
        }
        (x * x).exp() * libm::erfc(x)
    } else {
        erfcx_continued_fraction(x)
    }
}

/// `ln(erfcx(x))`, finite for every finite `x`.
pub fn ln_erfcx(x: f64) -> f64 {
    if x >= 0.0 {
        erfcx(x).ln()
    } else {
        // erfc(x) lies in (1, 2] here, so nothing cancels.
        x * x + libm::erfc(x).ln()
    }
}

// Lentz evaluation of erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
fn erfcx_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..200 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (f * PI.sqrt())
}

/// Inverse Mills ratio of the standard normal, `phi(m) / Phi(m)`.
pub fn inverse_mills(m: f64) -> f64 {
    (2.0 / PI).sqrt() / erfcx(-m / std::f64::consts::SQRT_2)
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(sigmoid(x))`.
pub fn ln_logistic(x: f64) -> f64 {
    -softplus(-x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Recursive pairwise summation; error grows as O(log n) rather than O(n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfcx_branches_agree_at_threshold() {
        let x = ERFCX_CF_THRESHOLD;
        let direct = (x * x).exp() * libm::erfc(x);
        let cf = erfcx_continued_fraction(x);
        assert!((direct - cf).abs() / cf < 1e-13, "{direct} vs {cf}");
        let x = 6.0_f64;
        let direct = (x * x).exp() * libm::erfc(x);
        assert!((direct - erfcx_continued_fraction(x)).abs() / direct < 1e-13);
    }

    #[test]
    fn erfcx_asymptotics() {
        // erfcx(x) ~ 1/(x sqrt(pi)) * (1 - 1/(2x^2) + 3/(4x^4))
        let x = 1e4;
        let approx = 1.0 / (x * PI.sqrt()) * (1.0 - 0.5 / (x * x));
        assert!((erfcx(x) - approx).abs() / approx < 1e-14);
        assert_eq!(erfcx(0.0), 1.0);
    }

    #[test]
    fn ln_erfcx_negative_side() {
        for &x in &[-0.3, -2.0, -10.0, -40.0] {
            let expected = x * x + libm::erfc(x).ln();
            assert!((ln_erfcx(x) - expected).abs() < 1e-12);
        }
        assert!(ln_erfcx(-40.0).is_finite());
        assert!((ln_erfcx(-40.0) - (1600.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn inverse_mills_matches_direct_ratio() {
        for &m in &[-3.0, -0.5, 0.0, 1.0, 4.0] {
            let phi = (-m * m / 2.0f64).exp() / (2.0 * PI).sqrt();
            let cdf = 0.5 * libm::erfc(-m / std::f64::consts::SQRT_2);
            assert!((inverse_mills(m) - phi / cdf).abs() < 1e-13);
        }
        // deep left tail: phi/Phi ~ -m
        assert!((inverse_mills(-60.0) - 60.0).abs() < 0.02);
    }

    #[test]
    fn softplus_and_logistic() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert_eq!(logistic(0.0), 0.5);
        assert!((ln_logistic(-1000.0) + 1000.0).abs() < 1e-12);
    }

    #[test]
    fn logsumexp_shift_invariance() {
        let v = [0.1, -3.0, 2.5, 7.0];
        let k = 1234.5;
        let shifted: Vec<f64> = v.iter().map(|x| x + k).collect();
        assert!((logsumexp(&shifted) - logsumexp(&v) - k).abs() < 1e-12);
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-12);
    }
}
