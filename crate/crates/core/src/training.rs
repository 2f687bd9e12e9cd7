//! Contrastive divergence training.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::data::BinaryDataset;
use crate::error::{Error, Result};
use crate::evaluation::pseudo_likelihood;
use crate::model::{fmt_real, RbmModel};
use crate::potentials::ActivationKind;
use crate::rng::{derive_seed, splitmix64, stream_rng};
use crate::sampling::{sample_hidden_layer, sample_visible_layer};

/// Pseudo-count keeping initial visible biases finite.
pub const PSEUDO_COUNT: f64 = 1e-6;
pub const INIT_WEIGHT_VARIANCE: f64 = 0.1;
/// Largest absolute weight change allowed in one update.
pub const DEFAULT_CLIP: f64 = 1.0;
/// Width of the moving average in the training log, in epochs.
pub const MOVING_AVERAGE_EPOCHS: usize = 20;
/// Samples per block when summing gradients; fixes the reduction order.
const GRADIENT_BLOCK: usize = 8;

pub fn default_eta0(kind: ActivationKind) -> f64 {
    match kind {
        ActivationKind::Step => 0.05,
        ActivationKind::Linear => 0.01,
        ActivationKind::Relu => 0.01,
        ActivationKind::Exponential => 0.005,
    }
}

/// CD steps at a 1-based epoch: `ceil(epoch / 10)`.
pub fn cd_steps(epoch: usize) -> usize {
    epoch.div_ceil(10).max(1)
}

/// `η0 / k` at a 1-based epoch.
pub fn learning_rate(eta0: f64, epoch: usize) -> f64 {
    eta0 / cd_steps(epoch) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub minibatch: usize,
    pub epochs: usize,
    pub eta0: f64,
    pub seed: u64,
    /// Data points used for the pseudo-likelihood after each update.
    pub eval_subset: usize,
    pub clip: f64,
}

impl TrainConfig {
    pub fn new(kind: ActivationKind) -> Self {
        Self {
            minibatch: 100,
            epochs: 500,
            eta0: default_eta0(kind),
            seed: 0,
            eval_subset: 100,
            clip: DEFAULT_CLIP,
        }
    }

    /// Applies `key = value` lines on top of `self`; `#` starts a comment.
    pub fn with_overrides(mut self, text: &str) -> Result<Self> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                line: lineno + 1,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key = value, found {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |e: &dyn std::fmt::Display| parse_err(format!("bad value for {key}: {e}"));
            match key {
                "minibatch" => self.minibatch = value.parse().map_err(|e| bad(&e))?,
                "epochs" => self.epochs = value.parse().map_err(|e| bad(&e))?,
                "eta0" => self.eta0 = value.parse().map_err(|e| bad(&e))?,
                "seed" => self.seed = value.parse().map_err(|e| bad(&e))?,
                "eval_subset" => self.eval_subset = value.parse().map_err(|e| bad(&e))?,
                "clip" => self.clip = value.parse().map_err(|e| bad(&e))?,
                other => return Err(parse_err(format!("unknown key {other:?}"))),
            }
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.minibatch == 0 || self.epochs == 0 || self.eval_subset == 0 {
            return Err(Error::InvalidConfig(
                "minibatch, epochs and eval_subset must be positive".into(),
            ));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::InvalidConfig(format!("eta0 must be positive, got {}", self.eta0)));
        }
        if !(self.clip > 0.0) {
            return Err(Error::InvalidConfig(format!("clip must be positive, got {}", self.clip)));
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "minibatch = {}\nepochs = {}\neta0 = {}\nseed = {}\neval_subset = {}\nclip = {}\n",
            self.minibatch, self.epochs, self.eta0, self.seed, self.eval_subset, self.clip
        )
    }
}

/// Initial model: visible biases at the data log-odds, weights `±sqrt(0.1/N)` with random signs,
/// hidden biases `c = Wᵀ⟨v⟩`.
pub fn initialize(
    data: &BinaryDataset,
    n_hidden: usize,
    kind: ActivationKind,
    seed: u64,
) -> Result<RbmModel> {
    if data.is_empty() {
        return Err(Error::EmptyInput("cannot initialize from an empty dataset"));
    }
    let means = data.feature_means();
    initialize_from_means(&means, n_hidden, kind, seed)
}

pub fn initialize_from_means(
    means: &[f64],
    n_hidden: usize,
    kind: ActivationKind,
    seed: u64,
) -> Result<RbmModel> {
    let n = means.len();
    let b: Vec<f64> = means
        .iter()
        .map(|&p| {
            let p = p.clamp(PSEUDO_COUNT, 1.0 - PSEUDO_COUNT);
            p.ln() - (1.0 - p).ln()
        })
        .collect();
    let scale = (INIT_WEIGHT_VARIANCE / n as f64).sqrt();
    let mut rng = stream_rng(seed, 0);
    let weights: Vec<f64> = (0..n * n_hidden)
        .map(|_| if rng.random::<bool>() { scale } else { -scale })
        .collect();
    let mut c = vec![0.0; n_hidden];
    for (i, &p) in means.iter().enumerate() {
        for (cm, w) in c.iter_mut().zip(&weights[i * n_hidden..(i + 1) * n_hidden]) {
            *cm += w * p;
        }
    }
    RbmModel::new(kind, b, c, weights)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdStats {
    /// Largest absolute weight change before clipping.
    pub max_weight_change: f64,
    pub clipped: bool,
}

struct Gradient {
    w: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl Gradient {
    fn zeros(n: usize, m: usize) -> Self {
        Self {
            w: vec![0.0; n * m],
            b: vec![0.0; n],
            c: vec![0.0; m],
        }
    }

    fn add(&mut self, other: &Gradient) {
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            *a += b;
        }
        for (a, b) in self.b.iter_mut().zip(&other.b) {
            *a += b;
        }
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += b;
        }
    }
}

fn conditional_means(model: &RbmModel, v: &[u8], out: &mut [f64]) {
    let kind = model.activation();
    for ((h, q), &c) in out.iter_mut().zip(model.hidden_inputs(v)).zip(model.hidden_bias()) {
        *h = kind.conditional_mean(c, q);
    }
}

fn accumulate_sample(
    model: &RbmModel,
    v: &[u8],
    k: usize,
    seed: u64,
    sample: u64,
    grad: &mut Gradient,
) -> Result<()> {
    let m = model.n_hidden();
    let mut rng = stream_rng(seed, sample);
    let mut h_data = vec![0.0; m];
    conditional_means(model, v, &mut h_data);

    let mut v_model = v.to_vec();
    let mut z = vec![0.0; m];
    for _ in 0..k {
        sample_hidden_layer(model, &v_model, &mut z, &mut rng)?;
        sample_visible_layer(model, &z, &mut v_model, &mut rng);
    }
    let mut h_model = vec![0.0; m];
    conditional_means(model, &v_model, &mut h_model);

    for (i, (&x, &y)) in v.iter().zip(&v_model).enumerate() {
        let row = &mut grad.w[i * m..(i + 1) * m];
        if x == 1 {
            for (g, h) in row.iter_mut().zip(&h_data) {
                *g += h;
            }
        }
        if y == 1 {
            for (g, h) in row.iter_mut().zip(&h_model) {
                *g -= h;
            }
        }
        grad.b[i] += f64::from(x) - f64::from(y);
    }
    for ((g, a), b) in grad.c.iter_mut().zip(&h_data).zip(&h_model) {
        *g -= a - b;
    }
    Ok(())
}

/// One CD-k update on a minibatch. Chains start at the data; the data term uses conditional
/// hidden means, the reconstruction chain samples hidden states, and the model term uses the
/// conditional means at the end of the chain.
///
/// Sample `j` of the batch draws from stream `j` of `seed`, so the result does not depend on
/// the number of worker threads.
pub fn cd_step<V: AsRef<[u8]> + Sync>(
    model: &mut RbmModel,
    batch: &[V],
    k: usize,
    eta: f64,
    clip: f64,
    seed: u64,
) -> Result<CdStats> {
    if k == 0 {
        return Err(Error::InvalidConfig("CD needs at least one Gibbs step".into()));
    }
    if batch.is_empty() {
        return Err(Error::EmptyInput("empty minibatch"));
    }
    for v in batch {
        model.check_visible(v.as_ref())?;
    }
    let (n, m) = (model.n_visible(), model.n_hidden());
    let blocks: Vec<Gradient> = batch
        .par_chunks(GRADIENT_BLOCK)
        .enumerate()
        .map(|(blk, chunk)| {
            let mut g = Gradient::zeros(n, m);
            for (j, v) in chunk.iter().enumerate() {
                let sample = (blk * GRADIENT_BLOCK + j) as u64;
                accumulate_sample(model, v.as_ref(), k, seed, sample, &mut g)?;
            }
            Ok(g)
        })
        .collect::<Result<_>>()?;
    let mut total = Gradient::zeros(n, m);
    for g in &blocks {
        total.add(g);
    }

    let step = eta / batch.len() as f64;
    let mut max_change = 0.0f64;
    for g in total.w.iter_mut() {
        *g *= step;
        max_change = max_change.max(g.abs());
    }
    for g in total.b.iter_mut().chain(total.c.iter_mut()) {
        *g *= step;
    }
    let finite = total
        .w
        .iter()
        .chain(&total.b)
        .chain(&total.c)
        .all(|x| x.is_finite());
    if !finite {
        return Err(Error::NonFinite(format!(
            "CD-{k} update with learning rate {eta} produced a non-finite gradient"
        )));
    }
    let clipped = max_change > clip;
    if clipped {
        let scale = clip / max_change;
        for g in total.w.iter_mut() {
            *g *= scale;
        }
    }
    if eta == 0.0 {
        return Ok(CdStats {
            max_weight_change: 0.0,
            clipped: false,
        });
    }
    for (w, g) in model.weights_mut().iter_mut().zip(&total.w) {
        *w += g;
    }
    for (b, g) in model.visible_bias_mut().iter_mut().zip(&total.b) {
        *b += g;
    }
    for (c, g) in model.hidden_bias_mut().iter_mut().zip(&total.c) {
        *c += g;
    }
    Ok(CdStats {
        max_weight_change: max_change,
        clipped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub update: usize,
    pub epoch: usize,
    pub cd_steps: usize,
    pub learning_rate: f64,
    pub pseudo_likelihood: f64,
    /// Mean pseudo-likelihood over the trailing 20 epochs of updates (fewer at the start).
    pub moving_average: f64,
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
    pub updates_per_epoch: usize,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "update,epoch,cd_steps,learning_rate,pseudo_likelihood,moving_average,clipped\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.update,
                r.epoch,
                r.cd_steps,
                fmt_real(r.learning_rate),
                fmt_real(r.pseudo_likelihood),
                fmt_real(r.moving_average),
                u8::from(r.clipped)
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: RbmModel,
    pub log: TrainingLog,
}

/// Trains from the standard initialization.
pub fn train(
    data: &BinaryDataset,
    kind: ActivationKind,
    n_hidden: usize,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let model = initialize(data, n_hidden, kind, derive_seed(config.seed, "init"))?;
    train_from(model, data, config)
}

/// Trains an existing model with the epoch schedules `k = ceil(epoch/10)`, `η = η0/k`.
pub fn train_from(
    mut model: RbmModel,
    data: &BinaryDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("cannot train on an empty dataset"));
    }
    if data.n_features() != model.n_visible() {
        return Err(Error::DimensionMismatch {
            what: "dataset width",
            expected: model.n_visible(),
            actual: data.n_features(),
        });
    }
    let shuffle_seed = derive_seed(config.seed, "shuffle");
    let cd_seed = derive_seed(config.seed, "cd");
    let eval_seed = derive_seed(config.seed, "eval");
    let n_items = data.n_items();
    let updates_per_epoch = n_items.div_ceil(config.minibatch);
    let window = MOVING_AVERAGE_EPOCHS * updates_per_epoch;
    let eval_size = config.eval_subset.min(n_items);

    let mut order: Vec<usize> = (0..n_items).collect();
    let mut rows = Vec::with_capacity(config.epochs * updates_per_epoch);
    let mut pl_history: Vec<f64> = Vec::with_capacity(rows.capacity());
    let mut update = 0usize;
    for epoch in 1..=config.epochs {
        let k = cd_steps(epoch);
        let eta = learning_rate(config.eta0, epoch);
        order.shuffle(&mut stream_rng(shuffle_seed, epoch as u64));
        for batch_idx in order.chunks(config.minibatch) {
            update += 1;
            let batch = data.select(batch_idx);
            let step_seed = splitmix64(cd_seed ^ update as u64);
            let stats = cd_step(&mut model, &batch, k, eta, config.clip, step_seed)?;

            let mut eval_rng = stream_rng(eval_seed, update as u64);
            let eval_items =
                rand::seq::index::sample(&mut eval_rng, n_items, eval_size).into_vec();
            let pl = pseudo_likelihood(&model, &data.select(&eval_items))?;
            if !pl.is_finite() {
                return Err(Error::NonFinite(format!(
                    "pseudo-likelihood after update {update}"
                )));
            }
            pl_history.push(pl);
            let start = pl_history.len().saturating_sub(window);
            let tail = &pl_history[start..];
            rows.push(LogRow {
                update,
                epoch,
                cd_steps: k,
                learning_rate: eta,
                pseudo_likelihood: pl,
                moving_average: tail.iter().sum::<f64>() / tail.len() as f64,
                clipped: stats.clipped,
            });
        }
    }
    Ok(TrainOutcome {
        model,
        log: TrainingLog {
            rows,
            updates_per_epoch,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        assert_eq!(cd_steps(1), 1);
        assert_eq!(cd_steps(10), 1);
        assert_eq!(cd_steps(11), 2);
        assert_eq!(cd_steps(500), 50);
        assert_eq!(learning_rate(0.05, 25), 0.05 / 3.0);
    }

    #[test]
    fn initialization_formulas() {
        let rows = vec![vec![0u8, 1, 1], vec![0, 1, 0]];
        let data = BinaryDataset::from_rows(&rows, String::new()).unwrap();
        let m = initialize(&data, 4, ActivationKind::Step, 1).unwrap();
        let floor = PSEUDO_COUNT.ln() - (1.0 - PSEUDO_COUNT).ln();
        assert!((m.visible_bias()[0] - floor).abs() < 1e-12);
        assert!((floor + 13.815_509_56).abs() < 1e-7);
        assert!((m.visible_bias()[1] + floor).abs() < 1e-9);
        assert_eq!(m.visible_bias()[2], 0.0);
        let w = (0.1f64 / 3.0).sqrt();
        assert!(m.weights().iter().all(|x| x.abs() == w));
        for mu in 0..4 {
            let want = m.weight(1, mu) + 0.5 * m.weight(2, mu);
            assert!((m.hidden_bias()[mu] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_rate_leaves_model_unchanged() {
        let rows = vec![vec![0u8, 1, 1], vec![1, 1, 0]];
        let data = BinaryDataset::from_rows(&rows, String::new()).unwrap();
        let mut m = initialize(&data, 2, ActivationKind::Relu, 3).unwrap();
        let before = m.clone();
        cd_step(&mut m, &rows, 3, 0.0, 1.0, 5).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn config_overrides() {
        let c = TrainConfig::new(ActivationKind::Exponential)
            .with_overrides("# settings\nepochs = 7\neta0=0.2 # fast\n\nseed = 11\n")
            .unwrap();
        assert_eq!((c.epochs, c.eta0, c.seed, c.minibatch), (7, 0.2, 11, 100));
        assert!(TrainConfig::new(ActivationKind::Step).with_overrides("speed = 3").is_err());
        assert!(TrainConfig::new(ActivationKind::Step).with_overrides("epochs 3").is_err());
        let round = TrainConfig::new(ActivationKind::Step)
            .with_overrides(&c.to_key_values())
            .unwrap();
        assert_eq!(round, c);
        let mut bad = c.clone();
        bad.eta0 = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn clipping_bounds_weight_change() {
        let rows = vec![vec![1u8, 1], vec![1, 1]];
        let mut m = RbmModel::new(ActivationKind::Linear, vec![-3.0; 2], vec![-2.0], vec![0.0; 2]).unwrap();
        let before = m.weights().to_vec();
        let stats = cd_step(&mut m, &rows, 1, 100.0, 0.5, 1).unwrap();
        assert!(stats.clipped);
        let change = m
            .weights()
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!((change - 0.5).abs() < 1e-12);
    }
}
