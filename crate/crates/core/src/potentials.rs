//! Hidden-unit potentials.
//!
//! Every potential `U(z) = c z + U0(z)` induces a prior density `rho(z) ∝ exp(-U(z))` whose
//! cumulant generating function `K(q, c) = ln E_rho[exp(q z)]` drives the visible marginal
//! `P(v) ∝ exp(b·v + Σ_μ K((Wᵀv)_μ, c_μ))`. Given a total input `I`, the hidden unit follows
//! `P(z | I) ∝ exp((I - c) z - U0(z))`:
//!
//! | kind          | `U0(z)`                 | `P(z | I)`                              |
//! |---------------|-------------------------|-----------------------------------------|
//! | `Linear`      | `z²/2`                  | `N(I - c, 1)`                           |
//! | `Relu`        | `z²/2` on `z ≥ 0`       | `N(I - c, 1)` truncated to `[0, ∞)`     |
//! | `Step`        | `0` on `{0, 1}`         | `Bernoulli(sigmoid(I - c))`             |
//! | `Exponential` | `ln z!` on `ℕ`          | `Poisson(exp(I - c))`                   |

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::special::{inverse_mills, ln_erfcx, ln_gamma, logistic, softplus};

/// Below this Poisson rate samples are drawn by sequential inversion.
const POISSON_INVERSION_MAX_RATE: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActivationKind {
    Linear,
    Relu,
    Step,
    Exponential,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] = [
        ActivationKind::Linear,
        ActivationKind::Relu,
        ActivationKind::Step,
        ActivationKind::Exponential,
    ];

    pub const NONLINEAR: [ActivationKind; 3] = [
        ActivationKind::Relu,
        ActivationKind::Step,
        ActivationKind::Exponential,
    ];

    /// Identifier used in model files and on the command line.
    pub fn as_str(self) -> &'static str {
        match self {
            ActivationKind::Linear => "linear",
            ActivationKind::Relu => "relu",
            ActivationKind::Step => "step",
            ActivationKind::Exponential => "exp",
        }
    }

    /// Cumulant generating function `K(q)` of the hidden prior with bias `c`.
    ///
    /// `K(0, c) = 0` exactly for every kind. Returns [`Error::Range`] when the value overflows,
    /// which only happens for `Exponential` with very large `q - c`.
    pub fn cgf(self, q: f64, c: f64) -> Result<f64> {
        let value = match self {
            ActivationKind::Linear => q * (0.5 * q - c),
            // ln[(1 + erf((q-c)/√2)) / (1 - erf(c/√2))]  +  q²/2 - qc
            // collapses to a difference of ln erfcx terms; the quadratics cancel exactly.
            ActivationKind::Relu => {
                if q == 0.0 {
                    0.0
                } else {
                    ln_erfcx((c - q) / SQRT_2) - ln_erfcx(c / SQRT_2)
                }
            }
            ActivationKind::Step => {
                if q == 0.0 {
                    0.0
                } else {
                    softplus(q - c) - softplus(-c)
                }
            }
            ActivationKind::Exponential => (-c).exp() * q.exp_m1(),
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Range(format!(
                "cumulant generating function of {self} overflows at q = {q}, c = {c}"
            )))
        }
    }

    /// `n`-th cumulant of the hidden prior with bias `c`.
    ///
    /// Closed forms cover orders 1 and 2 for every kind and all orders for `Linear` and
    /// `Exponential`; higher orders of `Relu` and `Step` are extrapolated finite differences.
    pub fn cumulant(self, c: f64, n: u32) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidConfig("cumulant order must be at least 1".into()));
        }
        let value = match (self, n) {
            (ActivationKind::Linear, 1) => -c,
            (ActivationKind::Linear, 2) => 1.0,
            (ActivationKind::Linear, _) => 0.0,
            (ActivationKind::Exponential, _) => (-c).exp(),
            (ActivationKind::Relu, 1) => self.conditional_mean(c, 0.0),
            (ActivationKind::Relu, 2) => {
                let r = inverse_mills(-c);
                1.0 + r * (c - r)
            }
            (ActivationKind::Step, 1) => logistic(-c),
            (ActivationKind::Step, 2) => logistic(-c) * logistic(c),
            _ => return self.cumulant_numeric(c, n),
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Range(format!("cumulant {n} of {self} at c = {c}")))
        }
    }

    /// `n`-th derivative of `K(·, c)` at zero by Richardson-extrapolated central differences.
    pub fn cumulant_numeric(self, c: f64, n: u32) -> Result<f64> {
        nth_derivative_at_zero(|q| self.cgf(q, c), n, 0.5)
    }

    /// Mean of `P(z | input)`.
    pub fn conditional_mean(self, c: f64, input: f64) -> f64 {
        let m = input - c;
        match self {
            ActivationKind::Linear => m,
            ActivationKind::Relu => m + inverse_mills(m),
            ActivationKind::Step => logistic(m),
            ActivationKind::Exponential => m.exp(),
        }
    }

    /// Variance of `P(z | input)`.
    pub fn conditional_variance(self, c: f64, input: f64) -> f64 {
        let m = input - c;
        match self {
            ActivationKind::Linear => 1.0,
            ActivationKind::Relu => {
                let r = inverse_mills(m);
                1.0 - r * (m + r)
            }
            ActivationKind::Step => logistic(m) * logistic(-m),
            ActivationKind::Exponential => m.exp(),
        }
    }

    /// Mode of `P(z | input)`: the activation function proper.
    pub fn conditional_mode(self, c: f64, input: f64) -> f64 {
        let m = input - c;
        match self {
            ActivationKind::Linear => m,
            ActivationKind::Relu => m.max(0.0),
            ActivationKind::Step => {
                if m > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Exponential => m.exp().floor(),
        }
    }

    /// Draws one hidden state from `P(z | input)`.
    pub fn sample_hidden<R: Rng + ?Sized>(self, c: f64, input: f64, rng: &mut R) -> Result<f64> {
        let m = input - c;
        match self {
            ActivationKind::Linear => {
                let e: f64 = StandardNormal.sample(rng);
                Ok(m + e)
            }
            ActivationKind::Relu => Ok(sample_truncated_normal(m, rng)),
            ActivationKind::Step => Ok(if rng.random::<f64>() < logistic(m) {
                1.0
            } else {
                0.0
            }),
            ActivationKind::Exponential => {
                let rate = m.exp();
                if !rate.is_finite() {
                    return Err(Error::Range(format!(
                        "Poisson rate exp({m}) overflows for hidden input {input}, bias {c}"
                    )));
                }
                Ok(sample_poisson(rate, rng))
            }
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ActivationKind::Linear),
            "relu" => Ok(ActivationKind::Relu),
            "step" => Ok(ActivationKind::Step),
            "exp" => Ok(ActivationKind::Exponential),
            other => Err(Error::InvalidConfig(format!(
                "unknown activation {other:?} (expected linear, relu, step or exp)"
            ))),
        }
    }
}

/// The conditional law of one hidden unit given its total input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenConditional {
    pub kind: ActivationKind,
    pub input: f64,
    pub bias: f64,
}

impl HiddenConditional {
    pub fn new(kind: ActivationKind, input: f64, bias: f64) -> Self {
        Self { kind, input, bias }
    }

    pub fn mean(&self) -> f64 {
        self.kind.conditional_mean(self.bias, self.input)
    }

    pub fn mode(&self) -> f64 {
        self.kind.conditional_mode(self.bias, self.input)
    }

    pub fn variance(&self) -> f64 {
        self.kind.conditional_variance(self.bias, self.input)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.kind.sample_hidden(self.bias, self.input, rng)
    }
}

// N(m, 1) restricted to [0, ∞). For m < 0 uses the exponential proposal with the optimal rate
// for truncation point a = -m; otherwise plain rejection from the untruncated normal.
fn sample_truncated_normal<R: Rng + ?Sized>(m: f64, rng: &mut R) -> f64 {
    if m >= 0.0 {
        loop {
            let e: f64 = StandardNormal.sample(rng);
            let z = m + e;
            if z >= 0.0 {
                return z;
            }
        }
    }
    let a = -m;
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let x = a + e / rate;
        let u: f64 = rng.random();
        let d = x - rate;
        if u.ln() <= -0.5 * d * d {
            return x - a;
        }
    }
}

fn sample_poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    if rate < POISSON_INVERSION_MAX_RATE {
        poisson_inversion(rate, rng)
    } else {
        poisson_ptrs(rate, rng)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let mut k = 0u32;
    let mut p = (-rate).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= rate / k as f64;
        cdf += p;
        // the tail beyond this point is below the resolution of u
        if p == 0.0 && k as f64 > rate {
            break;
        }
    }
    k as f64
}

// Hörmann's transformed rejection with squeeze (PTRS), valid for rate >= 10.
fn poisson_ptrs<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    let slam = rate.sqrt();
    let loglam = rate.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + rate + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
            <= -rate + k * loglam - ln_gamma(k + 1.0)
        {
            return k;
        }
    }
}

fn central_difference<F>(f: &F, n: u32, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let half = n as f64 / 2.0;
    let mut acc = 0.0;
    let mut binom = 1.0;
    for j in 0..=n {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * f((half - j as f64) * h)?;
        binom = binom * (n - j) as f64 / (j + 1) as f64;
    }
    Ok(acc / h.powi(n as i32))
}

/// Ridders-style Neville tableau over halving steps; central differences carry an error
/// series in even powers of `h`, so each column removes a factor of 4.
pub(crate) fn nth_derivative_at_zero<F>(f: F, n: u32, h0: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    const LEVELS: usize = 10;
    let mut prev: Vec<f64> = Vec::with_capacity(LEVELS);
    let mut best = f64::NAN;
    let mut best_err = f64::INFINITY;
    for i in 0..LEVELS {
        let h = h0 / (1u64 << i) as f64;
        let mut row = Vec::with_capacity(i + 1);
        row.push(central_difference(&f, n, h)?);
        let mut factor = 1.0;
        for j in 1..=i {
            factor *= 4.0;
            let value = (factor * row[j - 1] - prev[j - 1]) / (factor - 1.0);
            let err = (value - row[j - 1]).abs().max((value - prev[j - 1]).abs());
            if err <= best_err {
                best_err = err;
                best = value;
            }
            row.push(value);
        }
        if i > 0 && (row[i] - prev[i - 1]).abs() >= 2.0 * best_err {
            break;
        }
        prev = row;
    }
    if best.is_nan() {
        best = prev[0];
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cgf_vanishes_at_zero() {
        for kind in ActivationKind::ALL {
            for &c in &[-30.0, -3.0, 0.0, 1.7, 3.0, 30.0] {
                assert_eq!(kind.cgf(0.0, c).unwrap(), 0.0, "{kind} c={c}");
            }
        }
    }

    #[test]
    fn cgf_closed_form_examples() {
        let l = ActivationKind::Linear.cgf(1.0, 0.0).unwrap();
        assert!((l - 0.5).abs() < 1e-15);
        let s = ActivationKind::Step.cgf(3f64.ln(), 0.0).unwrap();
        assert!((s - 2f64.ln()).abs() < 1e-15);
        let e = ActivationKind::Exponential.cgf(1.0, 0.0).unwrap();
        assert!((e - (std::f64::consts::E - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn relu_cgf_matches_erf_form_where_that_is_stable() {
        for &(q, c) in &[(0.3, 0.2), (-1.0, 0.5), (2.0, -1.0), (1.0, 1.0)] {
            let erf_form = q * q / 2.0 - q * c
                + ((1.0 + libm::erf((q - c) / SQRT_2)) / (1.0 - libm::erf(c / SQRT_2))).ln();
            let got = ActivationKind::Relu.cgf(q, c).unwrap();
            assert!((got - erf_form).abs() < 1e-13, "q={q} c={c}: {got} vs {erf_form}");
        }
    }

    #[test]
    fn relu_cgf_stable_for_large_bias() {
        // For c >> 0 the prior is an exponential-like sliver at 0 with mean ≈ 1/c.
        let k = ActivationKind::Relu.cgf(0.01, 40.0).unwrap();
        let approx = 0.01 * ActivationKind::Relu.cumulant(40.0, 1).unwrap();
        assert!(k.is_finite());
        assert!((k - approx).abs() < 1e-6, "{k} {approx}");
    }

    #[test]
    fn exponential_overflow_is_a_range_error() {
        assert!(matches!(
            ActivationKind::Exponential.cgf(800.0, 0.0),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn cumulant_examples() {
        assert_eq!(ActivationKind::Linear.cumulant(0.3, 2).unwrap(), 1.0);
        assert_eq!(ActivationKind::Linear.cumulant(0.3, 1).unwrap(), -0.3);
        assert_eq!(ActivationKind::Linear.cumulant(0.3, 5).unwrap(), 0.0);
        assert!((ActivationKind::Step.cumulant(0.0, 2).unwrap() - 0.25).abs() < 1e-15);
        let relu = ActivationKind::Relu.cumulant(0.0, 2).unwrap();
        assert!((relu - (1.0 - 2.0 / std::f64::consts::PI)).abs() < 1e-14);
        assert_eq!(ActivationKind::Exponential.cumulant(0.0, 5).unwrap(), 1.0);
        assert!(ActivationKind::Step.cumulant(0.0, 0).is_err());
    }

    #[test]
    fn numeric_cumulants_match_bernoulli_closed_forms() {
        for &c in &[-2.0, -0.4, 0.0, 1.0, 2.5] {
            let p = logistic(-c);
            let k3 = p * (1.0 - p) * (1.0 - 2.0 * p);
            let k4 = p * (1.0 - p) * (1.0 - 6.0 * p * (1.0 - p));
            let n3 = ActivationKind::Step.cumulant(c, 3).unwrap();
            let n4 = ActivationKind::Step.cumulant(c, 4).unwrap();
            assert!((n3 - k3).abs() < 1e-9, "c={c}: {n3} vs {k3}");
            assert!((n4 - k4).abs() < 1e-8, "c={c}: {n4} vs {k4}");
        }
        for n in 1..=6 {
            let got = ActivationKind::Exponential.cumulant_numeric(0.7, n).unwrap();
            let want = (-0.7f64).exp();
            assert!((got - want).abs() < 1e-7, "n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn numeric_low_orders_agree_with_closed_forms() {
        for kind in ActivationKind::ALL {
            for &c in &[-1.5, 0.0, 2.0] {
                for n in 1..=2 {
                    let closed = kind.cumulant(c, n).unwrap();
                    let numeric = kind.cumulant_numeric(c, n).unwrap();
                    assert!((closed - numeric).abs() < 1e-9, "{kind} c={c} n={n}");
                }
            }
        }
    }

    #[test]
    fn means_and_modes() {
        assert_eq!(ActivationKind::Linear.conditional_mean(0.0, 2.0), 2.0);
        assert_eq!(ActivationKind::Linear.conditional_mode(0.0, 2.0), 2.0);
        assert_eq!(ActivationKind::Step.conditional_mean(1.0, 1.0), 0.5);
        assert_eq!(ActivationKind::Relu.conditional_mode(0.0, -3.0), 0.0);
        assert_eq!(ActivationKind::Step.conditional_mode(0.0, 0.3), 1.0);
        assert_eq!(ActivationKind::Exponential.conditional_mode(0.0, 4f64.ln() + 1e-12), 4.0);
        // softplus-like ReLU mean stays positive and finite deep below threshold
        let deep = ActivationKind::Relu.conditional_mean(0.0, -50.0);
        assert!(deep > 0.0 && deep < 0.03);
        for kind in ActivationKind::ALL {
            for &x in &[-5.0, -0.5, 0.0, 0.5, 5.0] {
                let h = HiddenConditional::new(kind, x, 0.2);
                assert!(h.mean().is_finite() && h.mode().is_finite());
                assert!(h.variance() > 0.0);
            }
        }
    }

    #[test]
    fn samples_respect_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let s = ActivationKind::Step.sample_hidden(0.3, 0.1, &mut rng).unwrap();
            assert!(s == 0.0 || s == 1.0);
            let r = ActivationKind::Relu.sample_hidden(2.0, -3.0, &mut rng).unwrap();
            assert!(r >= 0.0);
            let r = ActivationKind::Relu.sample_hidden(-2.0, 1.0, &mut rng).unwrap();
            assert!(r >= 0.0);
            let p = ActivationKind::Exponential.sample_hidden(0.0, 4.0, &mut rng).unwrap();
            assert!(p >= 0.0 && p.fract() == 0.0);
        }
        assert!(ActivationKind::Exponential
            .sample_hidden(0.0, 1e6, &mut rng)
            .is_err());
    }

    #[test]
    fn activation_names_round_trip() {
        for kind in ActivationKind::ALL {
            assert_eq!(kind.as_str().parse::<ActivationKind>().unwrap(), kind);
        }
        assert!("sigmoid".parse::<ActivationKind>().is_err());
    }
}
