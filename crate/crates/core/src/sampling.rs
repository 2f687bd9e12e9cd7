//! Blocked Gibbs sampling on `(v, z)` and single-site updates of the hidden-marginalized
//! visible distribution.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::RbmModel;
use crate::rng::stream_rng;
use crate::special::logistic;

pub const DEFAULT_BURN_IN: usize = 1000;
pub const DEFAULT_THINNING: usize = 1;
/// Number of single-site flips between full recomputations of the cached inputs.
pub const CACHE_REFRESH_INTERVAL: usize = 10_000;

/// One Markov chain over visible and hidden units.
#[derive(Debug, Clone)]
pub struct ChainState {
    v: Vec<u8>,
    z: Vec<f64>,
    rng: ChaCha8Rng,
    sweeps_done: u64,
}

impl ChainState {
    /// Chain started from uniformly random visible bits.
    pub fn new(model: &RbmModel, seed: u64, chain_id: u64) -> Self {
        let mut rng = stream_rng(seed, chain_id);
        let v = (0..model.n_visible())
            .map(|_| u8::from(rng.random::<bool>()))
            .collect();
        Self {
            v,
            z: vec![0.0; model.n_hidden()],
            rng,
            sweeps_done: 0,
        }
    }

    pub fn from_visible(model: &RbmModel, v: Vec<u8>, seed: u64, chain_id: u64) -> Result<Self> {
        model.check_visible(&v)?;
        Ok(Self {
            v,
            z: vec![0.0; model.n_hidden()],
            rng: stream_rng(seed, chain_id),
            sweeps_done: 0,
        })
    }

    pub fn v(&self) -> &[u8] {
        &self.v
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweeps_done
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Samples `z ~ P(z | v)`, then `v ~ P(v | z)`.
pub fn gibbs_sweep(model: &RbmModel, state: &mut ChainState) -> Result<()> {
    if state.v.len() != model.n_visible() || state.z.len() != model.n_hidden() {
        return Err(Error::DimensionMismatch {
            what: "chain state",
            expected: model.n_visible(),
            actual: state.v.len(),
        });
    }
    sample_hidden_layer(model, &state.v, &mut state.z, &mut state.rng)?;
    sample_visible_layer(model, &state.z, &mut state.v, &mut state.rng);
    state.sweeps_done += 1;
    Ok(())
}

pub(crate) fn sample_hidden_layer<R: Rng + ?Sized>(
    model: &RbmModel,
    v: &[u8],
    z: &mut [f64],
    rng: &mut R,
) -> Result<()> {
    let input = model.hidden_inputs(v);
    let kind = model.activation();
    for ((z, &q), &c) in z.iter_mut().zip(&input).zip(model.hidden_bias()) {
        *z = kind.sample_hidden(c, q, rng)?;
    }
    Ok(())
}

pub(crate) fn sample_visible_layer<R: Rng + ?Sized>(
    model: &RbmModel,
    z: &[f64],
    v: &mut [u8],
    rng: &mut R,
) {
    for (i, v) in v.iter_mut().enumerate() {
        let field: f64 = model.visible_bias()[i]
            + model
                .weight_row(i)
                .iter()
                .zip(z)
                .map(|(w, z)| w * z)
                .sum::<f64>();
        *v = u8::from(rng.random::<f64>() < logistic(field));
    }
}

/// `P(v_i = 1 | v_{-i})` under the hidden-marginalized distribution, computed from scratch.
pub fn visible_site_conditional(model: &RbmModel, v: &[u8], i: usize) -> Result<f64> {
    let cache = VisibleCache::new(model, v.to_vec())?;
    Ok(logistic(cache.site_log_odds(i)?))
}

/// Visible state with cached hidden inputs `Wᵀv` and per-unit `K(input_μ, c_μ)`.
#[derive(Debug, Clone)]
pub struct VisibleCache<'a> {
    model: &'a RbmModel,
    v: Vec<u8>,
    input: Vec<f64>,
    cgf: Vec<f64>,
    flips_since_refresh: usize,
}

impl<'a> VisibleCache<'a> {
    pub fn new(model: &'a RbmModel, v: Vec<u8>) -> Result<Self> {
        model.check_visible(&v)?;
        let mut cache = Self {
            model,
            input: Vec::new(),
            cgf: Vec::new(),
            v,
            flips_since_refresh: 0,
        };
        cache.refresh()?;
        Ok(cache)
    }

    pub fn v(&self) -> &[u8] {
        &self.v
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }

    /// `Σ_μ K(input_μ, c_μ)` for the current state.
    pub fn hidden_free_energy(&self) -> f64 {
        self.cgf.iter().sum()
    }

    /// Recomputes the cache from the current visible state.
    pub fn refresh(&mut self) -> Result<()> {
        self.input = self.model.hidden_inputs(&self.v);
        let kind = self.model.activation();
        self.cgf = self
            .input
            .iter()
            .zip(self.model.hidden_bias())
            .map(|(&q, &c)| kind.cgf(q, c))
            .collect::<Result<_>>()?;
        self.flips_since_refresh = 0;
        Ok(())
    }

    /// Log-odds `ln P(v_i=1|v_{-i}) - ln P(v_i=0|v_{-i})`, split into the visible bias and the
    /// hidden contribution `Σ_μ [K(input with v_i=1) - K(input with v_i=0)]`.
    pub fn site_terms(&self, i: usize) -> Result<(f64, f64)> {
        if i >= self.v.len() {
            return Err(Error::DimensionMismatch {
                what: "visible site index",
                expected: self.v.len(),
                actual: i,
            });
        }
        let kind = self.model.activation();
        let on = self.v[i] == 1;
        let mut delta = 0.0;
        for (((&q, &k), &w), &c) in self
            .input
            .iter()
            .zip(&self.cgf)
            .zip(self.model.weight_row(i))
            .zip(self.model.hidden_bias())
        {
            if on {
                delta += k - kind.cgf(q - w, c)?;
            } else {
                delta += kind.cgf(q + w, c)? - k;
            }
        }
        Ok((self.model.visible_bias()[i], delta))
    }

    pub fn site_log_odds(&self, i: usize) -> Result<f64> {
        let (b, h) = self.site_terms(i)?;
        Ok(b + h)
    }

    pub fn site_conditional(&self, i: usize) -> Result<f64> {
        Ok(logistic(self.site_log_odds(i)?))
    }

    /// Sets `v_i`, updating the cache incrementally when the value changes.
    pub fn set(&mut self, i: usize, value: u8) -> Result<()> {
        if self.v[i] == value {
            return Ok(());
        }
        let sign = if value == 1 { 1.0 } else { -1.0 };
        self.v[i] = value;
        self.flips_since_refresh += 1;
        if self.flips_since_refresh >= CACHE_REFRESH_INTERVAL {
            return self.refresh();
        }
        let kind = self.model.activation();
        for (((q, k), &w), &c) in self
            .input
            .iter_mut()
            .zip(self.cgf.iter_mut())
            .zip(self.model.weight_row(i))
            .zip(self.model.hidden_bias())
        {
            *q += sign * w;
            *k = kind.cgf(*q, c)?;
        }
        Ok(())
    }

    /// One sequential sweep of single-site Gibbs updates on the tempered distribution
    /// `exp[(1-β) b₀·v + β(b·v + Σ_μ K)]`.
    pub fn tempered_sweep<R: Rng + ?Sized>(
        &mut self,
        beta: f64,
        base_bias: &[f64],
        rng: &mut R,
    ) -> Result<()> {
        for i in 0..self.v.len() {
            let (b, h) = self.site_terms(i)?;
            let log_odds = (1.0 - beta) * base_bias[i] + beta * (b + h);
            let value = u8::from(rng.random::<f64>() < logistic(log_odds));
            self.set(i, value)?;
        }
        Ok(())
    }

    /// One sequential sweep of single-site Gibbs updates on the model itself.
    pub fn site_sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        for i in 0..self.v.len() {
            let p = self.site_conditional(i)?;
            let value = u8::from(rng.random::<f64>() < p);
            self.set(i, value)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleConfig {
    pub n_samples: usize,
    pub burn_in: usize,
    /// Sweeps between recorded samples.
    pub thinning: usize,
    pub seed: u64,
}

impl SampleConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            n_samples,
            burn_in: DEFAULT_BURN_IN,
            thinning: DEFAULT_THINNING,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.thinning == 0 {
            return Err(Error::InvalidConfig("thinning must be at least 1 sweep".into()));
        }
        Ok(())
    }
}

/// Runs one blocked Gibbs chain and records its visible states.
pub fn sample_chain(model: &RbmModel, config: &SampleConfig, chain_id: u64) -> Result<Vec<Vec<u8>>> {
    config.validate()?;
    let mut state = ChainState::new(model, config.seed, chain_id);
    for _ in 0..config.burn_in {
        gibbs_sweep(model, &mut state)?;
    }
    let mut out = Vec::with_capacity(config.n_samples);
    for _ in 0..config.n_samples {
        for _ in 0..config.thinning {
            gibbs_sweep(model, &mut state)?;
        }
        out.push(state.v.clone());
    }
    Ok(out)
}

/// Independent chains, one per trial, run in parallel; trial `t` uses chain id `t`.
pub fn sample_trials(
    model: &RbmModel,
    config: &SampleConfig,
    trials: usize,
) -> Result<Vec<Vec<Vec<u8>>>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| sample_chain(model, config, t))
        .collect()
}
