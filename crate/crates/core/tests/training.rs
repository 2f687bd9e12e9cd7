use boltzmap::exact::{enumerate, ExactSummary};
use boltzmap::training::{cd_step, initialize, train, train_from, TrainConfig};
use boltzmap::{ActivationKind, BinaryDataset, RbmModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_rbm(kind: ActivationKind, n: usize, m: usize, sigma: f64, seed: u64) -> RbmModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(0.0, sigma).unwrap();
    let b = Normal::new(0.0, 0.5).unwrap();
    RbmModel::new(
        kind,
        (0..n).map(|_| b.sample(&mut rng)).collect(),
        (0..m).map(|_| b.sample(&mut rng)).collect(),
        (0..n * m).map(|_| d.sample(&mut rng)).collect(),
    )
    .unwrap()
}

fn unpack(mask: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((mask >> i) & 1) as u8).collect()
}

fn exact_samples(summary: &ExactSummary, count: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    summary
        .sample(count, &mut rng)
        .into_iter()
        .map(|m| unpack(m, summary.n_visible()))
        .collect()
}

fn kl(p: &ExactSummary, q: &ExactSummary) -> f64 {
    p.probabilities()
        .iter()
        .zip(q.log_weights())
        .zip(p.log_weights())
        .filter(|((&pp, _), _)| pp > 0.0)
        .map(|((&pp, &lq), &lp)| pp * ((lp - p.log_partition()) - (lq - q.log_partition())))
        .sum()
}

/// `⟨v_i E[z_μ|v]⟩` under a weighted set of visible states.
fn weight_statistic(model: &RbmModel, states: &[(Vec<u8>, f64)]) -> Vec<f64> {
    let (n, m) = (model.n_visible(), model.n_hidden());
    let mut out = vec![0.0; n * m];
    for (v, p) in states {
        let input = model.hidden_inputs(v);
        for mu in 0..m {
            let ez = model
                .activation()
                .conditional_mean(model.hidden_bias()[mu], input[mu]);
            for i in 0..n {
                if v[i] == 1 {
                    out[i * m + mu] += p * ez;
                }
            }
        }
    }
    out
}

fn exact_weight_gradient(model: &RbmModel, data: &[Vec<u8>]) -> Vec<f64> {
    let n = model.n_visible();
    let uniform = 1.0 / data.len() as f64;
    let data_states: Vec<_> = data.iter().map(|v| (v.clone(), uniform)).collect();
    let summary = enumerate(model).unwrap();
    let model_states: Vec<_> = (0..summary.n_states() as u64)
        .map(|mask| (unpack(mask, n), summary.probability(mask)))
        .collect();
    let pos = weight_statistic(model, &data_states);
    let neg = weight_statistic(model, &model_states);
    pos.iter().zip(&neg).map(|(a, b)| a - b).collect()
}

fn weight_delta(before: &RbmModel, after: &RbmModel) -> Vec<f64> {
    after
        .weights()
        .iter()
        .zip(before.weights())
        .map(|(a, b)| a - b)
        .collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn training_reduces_exact_kl_to_teacher() {
    let teacher = random_rbm(ActivationKind::Step, 6, 4, 1.5, 11);
    let truth = enumerate(&teacher).unwrap();
    let rows = exact_samples(&truth, 2000, 12);
    let data = BinaryDataset::from_rows(&rows, String::new()).unwrap();
    let mut config = TrainConfig::new(ActivationKind::Step);
    config.epochs = 200;
    config.minibatch = 20;
    config.eta0 = 0.2;
    config.seed = 13;
    config.eval_subset = 20;
    let start = initialize(&data, 4, ActivationKind::Step, 14).unwrap();
    let before = kl(&truth, &enumerate(&start).unwrap());
    let trained = train_from(start, &data, &config).unwrap().model;
    let after = kl(&truth, &enumerate(&trained).unwrap());
    assert!(after <= 0.5 * before, "KL {before} -> {after}");
}

#[test]
fn same_seed_gives_identical_log_and_model() {
    let teacher = random_rbm(ActivationKind::Relu, 5, 3, 1.0, 21);
    let rows = exact_samples(&enumerate(&teacher).unwrap(), 300, 22);
    let data = BinaryDataset::from_rows(&rows, String::new()).unwrap();
    let mut config = TrainConfig::new(ActivationKind::Relu);
    config.epochs = 3;
    config.minibatch = 50;
    config.seed = 23;
    let a = train(&data, ActivationKind::Relu, 3, &config).unwrap();
    let b = train(&data, ActivationKind::Relu, 3, &config).unwrap();
    assert_eq!(a.log.to_csv(), b.log.to_csv());
    assert_eq!(a.model, b.model);
    config.seed = 24;
    let c = train(&data, ActivationKind::Relu, 3, &config).unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn update_from_self_generated_data_shrinks_with_batch() {
    let model = random_rbm(ActivationKind::Step, 6, 4, 1.0, 31);
    let summary = enumerate(&model).unwrap();
    let mean_norm = |batch: usize| {
        let mut total = 0.0;
        for rep in 0..8u64 {
            let data = exact_samples(&summary, batch, 100 * batch as u64 + rep);
            let mut m = model.clone();
            cd_step(&mut m, &data, 1, 1.0, f64::INFINITY, rep).unwrap();
            total += norm(&weight_delta(&model, &m));
        }
        total / 8.0
    };
    let ratio = mean_norm(100) / mean_norm(10_000);
    // Pure noise: the norm scales as 1/sqrt(batch), a factor of 10 here.
    assert!((6.0..16.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn long_chain_cd_follows_exact_gradient() {
    for (seed, kind) in [
        (41, ActivationKind::Step),
        (42, ActivationKind::Relu),
        (43, ActivationKind::Exponential),
        (44, ActivationKind::Linear),
    ] {
        let sigma = if kind == ActivationKind::Exponential { 0.5 } else { 1.0 };
        let teacher = random_rbm(kind, 6, 3, 1.5 * sigma, seed);
        let data = exact_samples(&enumerate(&teacher).unwrap(), 4000, seed + 100);
        let model = random_rbm(kind, 6, 3, 0.5 * sigma, seed + 200);
        let exact = exact_weight_gradient(&model, &data);
        let mut m = model.clone();
        cd_step(&mut m, &data, 50, 1.0, f64::INFINITY, seed).unwrap();
        let cd = weight_delta(&model, &m);
        let cosine =
            exact.iter().zip(&cd).map(|(a, b)| a * b).sum::<f64>() / (norm(&exact) * norm(&cd));
        assert!(cosine > 0.9, "{kind}: cosine {cosine}");
    }
}

#[test]
fn linear_rbm_reaches_pairwise_likelihood() {
    // Pairwise teacher written as a Linear RBM with M = N.
    let n = 5;
    let teacher = random_rbm(ActivationKind::Linear, n, n, 0.4, 51);
    let truth = enumerate(&teacher).unwrap();
    let rows = exact_samples(&truth, 5000, 52);
    let data = BinaryDataset::from_rows(&rows, String::new()).unwrap();
    let mean_ll = |s: &ExactSummary| {
        rows.iter()
            .map(|v| s.log_weights()[boltzmap::exact::state_mask(v) as usize] - s.log_partition())
            .sum::<f64>()
            / rows.len() as f64
    };
    let mut config = TrainConfig::new(ActivationKind::Linear);
    config.epochs = 100;
    config.eta0 = 0.05;
    config.seed = 53;
    config.eval_subset = 20;
    let trained = train(&data, ActivationKind::Linear, n, &config).unwrap().model;
    let gap = mean_ll(&enumerate(&trained).unwrap()) - mean_ll(&truth);
    assert!(gap.abs() <= 1e-2, "log-likelihood gap {gap}");
}
