//! Exhaustive enumeration of all `2^N` visible states.
//!
//! States are indexed by bitmask: bit `i` of the mask is `v_i`.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::model::{fmt_real, InteractionModel, RbmModel, Subset};
use crate::special::logsumexp;

pub const MAX_ENUMERATION_VISIBLE: usize = 24;

/// Gray-code blocks cover the low bits of the mask; higher bits are fixed per block.
const BLOCK_BITS: usize = 12;

/// Anything that assigns an unnormalized log-weight to every visible state.
pub trait Enumerable {
    fn n_visible(&self) -> usize;

    /// Log-weights of every state, indexed by mask.
    fn log_weight_table(&self) -> Result<Vec<f64>>;
}

impl Enumerable for RbmModel {
    fn n_visible(&self) -> usize {
        RbmModel::n_visible(self)
    }

    fn log_weight_table(&self) -> Result<Vec<f64>> {
        let n = RbmModel::n_visible(self);
        check_cap(n)?;
        let low_bits = n.min(BLOCK_BITS);
        let block = 1usize << low_bits;
        let mut table = vec![0.0; 1usize << n];
        table
            .par_chunks_mut(block)
            .enumerate()
            .try_for_each(|(high, out)| fill_block(self, high << low_bits, low_bits, out))?;
        Ok(table)
    }
}

// Walks the low bits in Gray-code order, updating Wᵀv and b·v by one row per step.
fn fill_block(model: &RbmModel, base: usize, low_bits: usize, out: &mut [f64]) -> Result<()> {
    let n = model.n_visible();
    let v: Vec<u8> = (0..n).map(|i| (base >> i & 1) as u8).collect();
    let mut input = model.hidden_inputs(&v);
    let mut field: f64 = (0..n)
        .filter(|&i| v[i] == 1)
        .map(|i| model.visible_bias()[i])
        .sum();
    out[0] = field + model.hidden_free_energy(&input)?;
    let mut state = 0usize;
    for g in 1..(1usize << low_bits) {
        let bit = g.trailing_zeros() as usize;
        state ^= 1 << bit;
        let sign = if state >> bit & 1 == 1 { 1.0 } else { -1.0 };
        for (acc, w) in input.iter_mut().zip(model.weight_row(bit)) {
            *acc += sign * w;
        }
        field += sign * model.visible_bias()[bit];
        out[state] = field + model.hidden_free_energy(&input)?;
    }
    Ok(())
}

impl Enumerable for InteractionModel {
    fn n_visible(&self) -> usize {
        InteractionModel::n_visible(self)
    }

    fn log_weight_table(&self) -> Result<Vec<f64>> {
        let n = InteractionModel::n_visible(self);
        check_cap(n)?;
        let mut table = vec![0.0; 1usize << n];
        for (subset, value) in self.iter() {
            table[subset.mask() as usize] += value;
        }
        subset_sum_transform(&mut table);
        Ok(table)
    }
}

fn check_cap(n: usize) -> Result<()> {
    if n > MAX_ENUMERATION_VISIBLE {
        Err(Error::TooManyVisible {
            n,
            cap: MAX_ENUMERATION_VISIBLE,
        })
    } else {
        Ok(())
    }
}

/// In place `f(S) ← Σ_{T⊆S} f(T)`.
pub fn subset_sum_transform(values: &mut [f64]) {
    let len = values.len();
    debug_assert!(len.is_power_of_two());
    let mut half = 1;
    while half < len {
        for block in values.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (h, l) in hi.iter_mut().zip(lo.iter()) {
                *h += *l;
            }
        }
        half *= 2;
    }
}

/// In place `f(S) ← Σ_{T⊆S} (-1)^{|S|-|T|} f(T)`, the inverse of [`subset_sum_transform`].
pub fn moebius_transform(values: &mut [f64]) {
    let len = values.len();
    debug_assert!(len.is_power_of_two());
    let mut half = 1;
    while half < len {
        for block in values.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (h, l) in hi.iter_mut().zip(lo.iter()) {
                *h -= *l;
            }
        }
        half *= 2;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSummary {
    n_visible: usize,
    log_weights: Vec<f64>,
    log_partition: f64,
    probabilities: Vec<f64>,
}

impl ExactSummary {
    pub fn from_log_weights(n_visible: usize, log_weights: Vec<f64>) -> Result<Self> {
        check_cap(n_visible)?;
        if log_weights.len() != 1usize << n_visible {
            return Err(Error::DimensionMismatch {
                what: "log-weight table",
                expected: 1usize << n_visible,
                actual: log_weights.len(),
            });
        }
        if log_weights.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("log-weight table entry".into()));
        }
        let log_partition = logsumexp(&log_weights);
        let probabilities = log_weights
            .iter()
            .map(|lw| (lw - log_partition).exp())
            .collect();
        Ok(Self {
            n_visible,
            log_weights,
            log_partition,
            probabilities,
        })
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_states(&self) -> usize {
        self.log_weights.len()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `ln Z'`.
    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, mask: u64) -> f64 {
        self.probabilities[mask as usize]
    }

    /// `P(v_i = 1)`.
    pub fn marginal(&self, i: usize) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask >> i & 1 == 1)
            .map(|(_, p)| p)
            .sum()
    }

    /// `P(v_i = 1 | v_{-i})` read off the table.
    pub fn site_conditional(&self, mask: u64, i: usize) -> f64 {
        let on = self.log_weights[(mask | 1 << i) as usize];
        let off = self.log_weights[(mask & !(1 << i)) as usize];
        crate::special::logistic(on - off)
    }

    /// Draws i.i.d. states from the exact distribution.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<u64> {
        let mut cdf = Vec::with_capacity(self.probabilities.len());
        let mut acc = 0.0;
        for p in &self.probabilities {
            acc += p;
            cdf.push(acc);
        }
        (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u64
            })
            .collect()
    }

    /// CSV `mask,log_weight,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mask,log_weight,probability\n");
        for (mask, (lw, p)) in self.log_weights.iter().zip(&self.probabilities).enumerate() {
            let _ = writeln!(out, "{mask},{},{}", fmt_real(*lw), fmt_real(*p));
        }
        out
    }
}

pub fn enumerate<E: Enumerable + ?Sized>(model: &E) -> Result<ExactSummary> {
    ExactSummary::from_log_weights(model.n_visible(), model.log_weight_table()?)
}

/// Recovers every interaction coefficient from the exact log-weights.
///
/// Coefficients that come out exactly zero are omitted.
pub fn moebius_invert(summary: &ExactSummary) -> InteractionModel {
    let base = summary.log_weights[0];
    let mut h: Vec<f64> = summary.log_weights.iter().map(|lw| lw - base).collect();
    moebius_transform(&mut h);
    let mut out = InteractionModel::new(summary.n_visible);
    for (mask, value) in h.into_iter().enumerate().skip(1) {
        if value != 0.0 {
            out.insert(Subset::from_mask(mask as u64), value)
                .expect("mask lies within n_visible and value is finite");
        }
    }
    out
}

/// Bitmask of a binary vector (`N ≤ 64`).
pub fn state_mask(v: &[u8]) -> u64 {
    v.iter()
        .enumerate()
        .fold(0, |m, (i, &x)| m | (u64::from(x & 1) << i))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateFrequency {
    pub mask: u64,
    pub probability: f64,
    /// Frequency over all samples pooled.
    pub frequency: f64,
    /// Mean and standard deviation of the per-trial frequencies.
    pub trial_mean: f64,
    pub trial_sd: f64,
    pub trial_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyReport {
    pub n_samples: usize,
    pub n_trials: usize,
    pub states: Vec<StateFrequency>,
    pub total_variation: f64,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

impl FrequencyReport {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mask,probability,frequency,trial_mean,trial_sd,trial_se\n");
        for s in &self.states {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.mask,
                fmt_real(s.probability),
                fmt_real(s.frequency),
                fmt_real(s.trial_mean),
                fmt_real(s.trial_sd),
                fmt_real(s.trial_se)
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "n_samples,n_trials,total_variation,chi_square,degrees_of_freedom,p_value\n{},{},{},{},{},{}\n",
            self.n_samples,
            self.n_trials,
            fmt_real(self.total_variation),
            fmt_real(self.chi_square),
            self.degrees_of_freedom,
            fmt_real(self.p_value)
        )
    }
}

/// Compares sampled state frequencies with exact probabilities.
///
/// Each element of `trials` is one independent block of sampled state masks. The chi-square
/// statistic pools all samples; states with expected count below 5 are merged into one bin.
pub fn compare_frequencies(summary: &ExactSummary, trials: &[Vec<u64>]) -> Result<FrequencyReport> {
    let n_samples: usize = trials.iter().map(Vec::len).sum();
    if n_samples == 0 {
        return Err(Error::EmptyInput("no samples to compare"));
    }
    let n_states = summary.n_states();
    let mut pooled = vec![0usize; n_states];
    let mut per_trial = Vec::with_capacity(trials.len());
    for trial in trials.iter().filter(|t| !t.is_empty()) {
        let mut counts = vec![0usize; n_states];
        for &mask in trial {
            let idx = mask as usize;
            if idx >= n_states {
                return Err(Error::DimensionMismatch {
                    what: "sampled state mask",
                    expected: n_states,
                    actual: idx,
                });
            }
            counts[idx] += 1;
            pooled[idx] += 1;
        }
        let len = trial.len() as f64;
        per_trial.push(counts.into_iter().map(|c| c as f64 / len).collect::<Vec<_>>());
    }
    let n_trials = per_trial.len();

    let states: Vec<StateFrequency> = (0..n_states)
        .map(|s| {
            let freqs: Vec<f64> = per_trial.iter().map(|t| t[s]).collect();
            let mean = freqs.iter().sum::<f64>() / n_trials as f64;
            let sd = if n_trials > 1 {
                (freqs.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n_trials - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            StateFrequency {
                mask: s as u64,
                probability: summary.probabilities[s],
                frequency: pooled[s] as f64 / n_samples as f64,
                trial_mean: mean,
                trial_sd: sd,
                trial_se: sd / (n_trials as f64).sqrt(),
            }
        })
        .collect();

    let total_variation = 0.5
        * states
            .iter()
            .map(|s| (s.frequency - s.probability).abs())
            .sum::<f64>();

    let total = n_samples as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut rare = (0.0, 0.0);
    for s in &states {
        let expected = s.probability * total;
        let observed = pooled[s.mask as usize] as f64;
        if expected < 5.0 {
            rare.0 += observed;
            rare.1 += expected;
        } else {
            bins.push((observed, expected));
        }
    }
    if rare.1 > 0.0 || rare.0 > 0.0 {
        if rare.1 >= 5.0 || bins.is_empty() {
            bins.push(rare);
        } else {
            let smallest = bins
                .iter_mut()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("bins is nonempty");
            smallest.0 += rare.0;
            smallest.1 += rare.1;
        }
    }
    let chi_square: f64 = bins
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let degrees_of_freedom = bins.len().saturating_sub(1);
    let p_value = if degrees_of_freedom == 0 {
        1.0
    } else {
        ChiSquared::new(degrees_of_freedom as f64)
            .expect("positive degrees of freedom")
            .sf(chi_square)
    };

    Ok(FrequencyReport {
        n_samples,
        n_trials,
        states,
        total_variation,
        chi_square,
        degrees_of_freedom,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::ActivationKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_table(model: &RbmModel) -> Vec<f64> {
        let n = model.n_visible();
        (0..1u64 << n)
            .map(|mask| {
                let v: Vec<u8> = (0..n).map(|i| (mask >> i & 1) as u8).collect();
                model.log_weight(&v).unwrap()
            })
            .collect()
    }

    #[test]
    fn gray_code_table_matches_naive() {
        let n = 14; // more than one block
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect();
        let b = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let m = RbmModel::from_rows(ActivationKind::Relu, b, vec![0.1, -0.2, 0.3], &rows).unwrap();
        let fast = m.log_weight_table().unwrap();
        let slow = naive_table(&m);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_when_parameters_vanish() {
        let m = RbmModel::zeros(ActivationKind::Step, 5, 2).unwrap();
        let s = enumerate(&m).unwrap();
        assert!(s.probabilities().iter().all(|&p| (p - 1.0 / 32.0).abs() < 1e-15));
        assert!(moebius_invert(&s).is_empty());
    }

    #[test]
    fn single_visible_is_logistic_of_field() {
        let m = RbmModel::new(ActivationKind::Linear, vec![3f64.ln()], vec![0.0], vec![0.0])
            .unwrap();
        let s = enumerate(&m).unwrap();
        assert!((s.probability(1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn pure_three_body_ratio() {
        let mut im = InteractionModel::new(3);
        im.insert(Subset::new(vec![0, 1, 2]).unwrap(), 0.5).unwrap();
        let s = enumerate(&im).unwrap();
        assert!((s.probability(7) / s.probability(0) - 0.5f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn moebius_round_trip() {
        let mut im = InteractionModel::new(2);
        im.insert(Subset::new(vec![0]).unwrap(), 0.2).unwrap();
        im.insert(Subset::new(vec![0, 1]).unwrap(), -0.5).unwrap();
        let back = moebius_invert(&enumerate(&im).unwrap());
        assert!((back.get(&[0]) - 0.2).abs() < 1e-12);
        assert!((back.get(&[0, 1]) + 0.5).abs() < 1e-12);
        assert!(back.get(&[1]).abs() < 1e-12);
    }

    #[test]
    fn transforms_are_inverse() {
        let mut v: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).cos()).collect();
        let orig = v.clone();
        subset_sum_transform(&mut v);
        moebius_transform(&mut v);
        for (a, b) in v.iter().zip(&orig) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let m = RbmModel::zeros(ActivationKind::Step, 25, 1).unwrap();
        assert!(matches!(enumerate(&m), Err(Error::TooManyVisible { .. })));
    }

    #[test]
    fn logsumexp_shift() {
        let lw: Vec<f64> = (0..16).map(|i| (i as f64).sin()).collect();
        let a = ExactSummary::from_log_weights(4, lw.clone()).unwrap();
        let b = ExactSummary::from_log_weights(4, lw.iter().map(|x| x + 321.0).collect()).unwrap();
        assert!((b.log_partition() - a.log_partition() - 321.0).abs() < 1e-12);
        for (p, q) in a.probabilities().iter().zip(b.probabilities()) {
            assert!((p - q).abs() < 1e-14);
        }
        assert!((a.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frequency_report_extremes() {
        let m = RbmModel::zeros(ActivationKind::Step, 3, 1).unwrap();
        let s = enumerate(&m).unwrap();
        let r = compare_frequencies(&s, &[vec![0; 100]]).unwrap();
        assert!((r.total_variation - (1.0 - 1.0 / 8.0)).abs() < 1e-15);
        assert!(r.p_value < 1e-10);
        assert!(compare_frequencies(&s, &[]).is_err());
        assert!(compare_frequencies(&s, &[vec![9]]).is_err());
    }

    #[test]
    fn exact_sampler_has_small_tv_at_500x_coverage() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| (rng.random::<f64>() - 0.5) * 0.8).collect())
            .collect();
        let m = RbmModel::from_rows(ActivationKind::Step, vec![0.0; n], vec![0.0; 4], &rows)
            .unwrap();
        let s = enumerate(&m).unwrap();
        let samples = s.sample(512_000, &mut rng);
        let r = compare_frequencies(&s, &[samples]).unwrap();
        assert!(r.total_variation < 0.02, "tv {}", r.total_variation);
        assert!(r.passes(1e-3));
    }

    #[test]
    fn trial_blocks_report_mean_and_sd() {
        let mut im = InteractionModel::new(3);
        im.insert(Subset::new(vec![0, 1, 2]).unwrap(), 0.5).unwrap();
        let s = enumerate(&im).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let trials: Vec<Vec<u64>> = (0..20).map(|_| s.sample(1000, &mut rng)).collect();
        let r = compare_frequencies(&s, &trials).unwrap();
        assert_eq!(r.n_trials, 20);
        assert_eq!(r.states.len(), 8);
        for st in &r.states {
            // binomial SD of a frequency over 1000 draws
            let sd = (st.probability * (1.0 - st.probability) / 1000.0).sqrt();
            assert!(st.trial_sd > 0.3 * sd && st.trial_sd < 2.0 * sd);
            assert!((st.trial_mean - st.frequency).abs() < 1e-12);
        }
        assert!(r.to_csv().lines().count() == 9);
    }
}
