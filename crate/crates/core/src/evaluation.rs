//! Likelihood estimates and coefficient statistics.

use std::collections::{BTreeMap, HashSet};

use itertools::Itertools;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mapping::interaction_terms;
use crate::model::{InteractionModel, RbmModel, Subset};
use crate::rng::stream_rng;
use crate::sampling::VisibleCache;
use crate::special::{ln_logistic, logistic, logsumexp, pairwise_sum, softplus};

/// Normal-consistency factor for the median absolute deviation.
pub const MAD_SCALE: f64 = 1.4826;
pub const MAD_CUTOFF: f64 = 3.0;
pub const DEFAULT_AIS_RUNS: usize = 100;
pub const DEFAULT_AIS_TEMPERATURES: usize = 14_000;

/// `Σ_i ln P(v_i | v_{-i})` for one visible vector.
pub fn pseudo_log_likelihood_point(model: &RbmModel, v: &[u8]) -> Result<f64> {
    let cache = VisibleCache::new(model, v.to_vec())?;
    let mut terms = Vec::with_capacity(v.len());
    for (i, &x) in v.iter().enumerate() {
        let delta = cache.site_log_odds(i)?;
        terms.push(if x == 1 {
            ln_logistic(delta)
        } else {
            ln_logistic(-delta)
        });
    }
    Ok(pairwise_sum(&terms))
}

/// Mean over data points of the site-summed log pseudo-likelihood.
pub fn pseudo_likelihood<V: AsRef<[u8]> + Sync>(model: &RbmModel, data: &[V]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("pseudo-likelihood needs at least one data point"));
    }
    let per_point: Vec<f64> = data
        .par_iter()
        .map(|v| pseudo_log_likelihood_point(model, v.as_ref()))
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&per_point) / data.len() as f64)
}

/// Exact mean log-likelihood `⟨ln P(v)⟩` given `ln Z'`.
pub fn mean_log_likelihood<V: AsRef<[u8]> + Sync>(
    model: &RbmModel,
    data: &[V],
    log_partition: f64,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("log-likelihood needs at least one data point"));
    }
    let per_point: Vec<f64> = data
        .par_iter()
        .map(|v| model.log_weight(v.as_ref()))
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&per_point) / data.len() as f64 - log_partition)
}

/// Log-odds of the empirical means, with means clamped to `[ε, 1-ε]`.
pub fn empirical_log_odds(means: &[f64], eps: f64) -> Vec<f64> {
    means
        .iter()
        .map(|&p| {
            let p = p.clamp(eps, 1.0 - eps);
            p.ln() - (1.0 - p).ln()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AisConfig {
    pub n_runs: usize,
    /// Inverse temperatures, strictly increasing from 0 to 1.
    pub schedule: Vec<f64>,
    /// Biases of the independent base distribution; zeros when `None`.
    pub base_biases: Option<Vec<f64>>,
    pub seed: u64,
}

impl AisConfig {
    pub fn new(n_runs: usize, n_temperatures: usize, seed: u64) -> Self {
        Self {
            n_runs,
            schedule: uniform_schedule(n_temperatures),
            base_biases: None,
            seed,
        }
    }

    pub fn n_temperatures(&self) -> usize {
        self.schedule.len()
    }

    fn validate(&self, n_visible: usize) -> Result<()> {
        if self.n_runs < 2 {
            return Err(Error::InvalidConfig("AIS needs at least 2 runs".into()));
        }
        let s = &self.schedule;
        if s.len() < 2 || s[0] != 0.0 || s[s.len() - 1] != 1.0 {
            return Err(Error::InvalidConfig(
                "AIS schedule must run from 0 to 1 with at least 2 points".into(),
            ));
        }
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("AIS schedule must be strictly increasing".into()));
        }
        if let Some(b) = &self.base_biases {
            if b.len() != n_visible {
                return Err(Error::DimensionMismatch {
                    what: "AIS base biases",
                    expected: n_visible,
                    actual: b.len(),
                });
            }
            if b.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("AIS base bias".into()));
            }
        }
        Ok(())
    }
}

/// `n` evenly spaced inverse temperatures from 0 to 1 inclusive.
pub fn uniform_schedule(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n)
            .map(|k| if k + 1 == n { 1.0 } else { k as f64 / (n - 1) as f64 })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AisEstimate {
    /// `ln` of the mean importance weight over the surviving runs.
    pub log_z_mean: f64,
    /// `ln(mean - 3 SE)`; `-∞` when the interval reaches zero.
    pub log_z_lower: f64,
    /// `ln(mean + 3 SE)`.
    pub log_z_upper: f64,
    /// Per-run estimates `ln Z_base + ln w_r`, in run order, before filtering.
    pub run_log_z: Vec<f64>,
    /// `true` for runs kept by the outlier filter.
    pub kept: Vec<bool>,
    pub n_outliers_removed: usize,
}

impl AisEstimate {
    /// Summarizes per-run log-estimates: outlier filter, then mean and standard error of the
    /// importance weights.
    pub fn from_run_log_z(run_log_z: Vec<f64>) -> Result<Self> {
        if let Some(bad) = run_log_z.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("AIS run log-weight {bad}")));
        }
        let kept = mad_keep_mask(&run_log_z);
        let survivors: Vec<f64> = run_log_z
            .iter()
            .zip(&kept)
            .filter(|(_, &k)| k)
            .map(|(&x, _)| x)
            .collect();
        if survivors.len() < 2 {
            return Err(Error::TooFewRuns {
                survivors: survivors.len(),
            });
        }
        let n = survivors.len() as f64;
        let shift = survivors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = survivors.iter().map(|x| (x - shift).exp()).collect();
        let mean = weights.iter().sum::<f64>() / n;
        let var = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let lower = mean - 3.0 * se;
        let n_outliers_removed = kept.iter().filter(|k| !**k).count();
        Ok(Self {
            log_z_mean: logsumexp(&survivors) - n.ln(),
            log_z_lower: if lower > 0.0 {
                shift + lower.ln()
            } else {
                f64::NEG_INFINITY
            },
            log_z_upper: shift + (mean + 3.0 * se).ln(),
            run_log_z,
            kept,
            n_outliers_removed,
        })
    }

    pub fn contains(&self, log_z: f64) -> bool {
        self.log_z_lower <= log_z && log_z <= self.log_z_upper
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Marks values within three scaled median absolute deviations of the median.
pub fn mad_keep_mask(values: &[f64]) -> Vec<bool> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = median(&sorted);
    let mut dev: Vec<f64> = values.iter().map(|x| (x - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mad = MAD_SCALE * median(&dev);
    values
        .iter()
        .map(|x| (x - med).abs() <= MAD_CUTOFF * mad)
        .collect()
}

/// Values surviving [`mad_keep_mask`].
pub fn mad_filter(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .zip(mad_keep_mask(values))
        .filter(|(_, k)| *k)
        .map(|(&x, _)| x)
        .collect()
}

/// Annealed importance sampling estimate of `ln Z'`.
///
/// The path interpolates from independent units with biases `b₀` to the model:
/// `p_β(v) ∝ exp[(1-β) b₀·v + β F(v)]` with `F(v) = b·v + Σ_μ K((Wᵀv)_μ, c_μ)`. Each step
/// adds `(β_k - β_{k-1})(F(v) - b₀·v)` to the run's log-weight and then applies one
/// single-site Gibbs sweep at `β_k`.
pub fn ais_log_partition(model: &RbmModel, config: &AisConfig) -> Result<AisEstimate> {
    let n = model.n_visible();
    config.validate(n)?;
    let base = config
        .base_biases
        .clone()
        .unwrap_or_else(|| vec![0.0; n]);
    let log_z_base: f64 = base.iter().map(|&b| softplus(b)).sum();
    let run_log_z: Vec<f64> = (0..config.n_runs as u64)
        .into_par_iter()
        .map(|r| ais_run(model, &base, &config.schedule, config.seed, r))
        .map(|lw| lw.map(|lw| lw + log_z_base))
        .collect::<Result<_>>()?;
    AisEstimate::from_run_log_z(run_log_z)
}

fn ais_run(model: &RbmModel, base: &[f64], schedule: &[f64], seed: u64, run: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, run);
    let v: Vec<u8> = base
        .iter()
        .map(|&b| u8::from(rng.random::<f64>() < logistic(b)))
        .collect();
    let mut cache = VisibleCache::new(model, v)?;
    let mut log_w = 0.0;
    for (k, pair) in schedule.windows(2).enumerate() {
        let (prev, beta) = (pair[0], pair[1]);
        let mut excess = cache.hidden_free_energy();
        for (i, &x) in cache.v().iter().enumerate() {
            if x == 1 {
                excess += model.visible_bias()[i] - base[i];
            }
        }
        log_w += (beta - prev) * excess;
        if k + 2 < schedule.len() {
            cache.tempered_sweep(beta, base, &mut rng)?;
        }
    }
    if !log_w.is_finite() {
        return Err(Error::NonFinite(format!("AIS run {run} log-weight")));
    }
    Ok(log_w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonStats {
    /// Least-squares slope `α` of `A ≈ α B` through the origin.
    pub slope: f64,
    /// `sqrt(Σ (A-B)² / Σ B²)`.
    pub nrmse: f64,
    pub rms_a: f64,
    pub rms_b: f64,
    pub n_terms: usize,
}

/// Compares the order-`s` coefficients of `a` against the reference `b`; subsets missing from
/// one model count as zero there.
pub fn comparison_stats(a: &InteractionModel, b: &InteractionModel, order: usize) -> Result<ComparisonStats> {
    if a.n_visible() != b.n_visible() {
        return Err(Error::DimensionMismatch {
            what: "interaction model size",
            expected: b.n_visible(),
            actual: a.n_visible(),
        });
    }
    let mut pairs: BTreeMap<&Subset, (f64, f64)> = BTreeMap::new();
    for (s, x) in a.terms_of_order(order) {
        pairs.entry(s).or_default().0 = x;
    }
    for (s, y) in b.terms_of_order(order) {
        pairs.entry(s).or_default().1 = y;
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no coefficients of the requested order"));
    }
    let ab: Vec<f64> = pairs.values().map(|(x, y)| x * y).collect();
    let bb: Vec<f64> = pairs.values().map(|(_, y)| y * y).collect();
    let aa: Vec<f64> = pairs.values().map(|(x, _)| x * x).collect();
    let dd: Vec<f64> = pairs.values().map(|(x, y)| (x - y) * (x - y)).collect();
    let sbb = pairwise_sum(&bb);
    if sbb == 0.0 {
        return Err(Error::Range(format!(
            "reference coefficients of order {order} are all zero"
        )));
    }
    let n = pairs.len() as f64;
    Ok(ComparisonStats {
        slope: pairwise_sum(&ab) / sbb,
        nrmse: (pairwise_sum(&dd) / sbb).sqrt(),
        rms_a: (pairwise_sum(&aa) / n).sqrt(),
        rms_b: (sbb / n).sqrt(),
        n_terms: pairs.len(),
    })
}

/// `sqrt(Σ w² / (N M))`.
pub fn rms_weight(model: &RbmModel) -> f64 {
    let w = model.weights();
    (w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64).sqrt()
}

/// Distinct uniformly random subsets of the given order.
pub fn random_subsets<R: Rng + ?Sized>(
    n_visible: usize,
    order: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Subset>> {
    if order == 0 || order > n_visible {
        return Err(Error::InvalidConfig(format!(
            "cannot draw subsets of order {order} from {n_visible} units"
        )));
    }
    let mut total = 1.0f64;
    for s in 0..order {
        total = total * (n_visible - s) as f64 / (s + 1) as f64;
    }
    if (count as f64) > total {
        return Err(Error::InvalidConfig(format!(
            "only {total} subsets of order {order} exist, {count} requested"
        )));
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut idx = sample_indices(rng, n_visible, order).into_vec();
        idx.sort_unstable();
        if seen.insert(idx.clone()) {
            out.push(Subset::new(idx)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderStrength {
    pub order: usize,
    pub n_terms: usize,
    /// Root mean square of the coefficients (visible biases excluded at order 1).
    pub rms: f64,
}

/// RMS coefficient strength for each order. All subsets are used when there are at most
/// `max_subsets` of them, otherwise a uniform sample of that many.
pub fn strength_by_order(
    model: &RbmModel,
    orders: &[usize],
    max_subsets: usize,
    seed: u64,
) -> Result<Vec<OrderStrength>> {
    let n = model.n_visible();
    orders
        .iter()
        .map(|&order| {
            let mut count = 1.0f64;
            for s in 0..order.min(n) {
                count = count * (n - s) as f64 / (s + 1) as f64;
            }
            let subsets: Vec<Subset> = if count <= max_subsets as f64 {
                (0..n)
                    .combinations(order)
                    .map(Subset::new)
                    .collect::<Result<_>>()?
            } else {
                let mut rng = stream_rng(seed, order as u64);
                random_subsets(n, order, max_subsets, &mut rng)?
            };
            let values = interaction_terms(model, &subsets, false)?;
            let sq: Vec<f64> = values.iter().map(|x| x * x).collect();
            Ok(OrderStrength {
                order,
                n_terms: values.len(),
                rms: (pairwise_sum(&sq) / values.len().max(1) as f64).sqrt(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "fit points",
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::EmptyInput("a line fit needs at least two points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Range("line fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}
