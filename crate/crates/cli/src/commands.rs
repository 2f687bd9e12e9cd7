use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use boltzmap::data::{load_dataset, BinaryDataset, DEFAULT_THRESHOLD};
use boltzmap::evaluation::{
    ais_log_partition, comparison_stats, empirical_log_odds, linear_fit, mean_log_likelihood,
    pseudo_likelihood, rms_weight, strength_by_order, AisConfig, DEFAULT_AIS_RUNS,
    DEFAULT_AIS_TEMPERATURES,
};
use boltzmap::exact::{compare_frequencies, enumerate, moebius_invert, state_mask};
use boltzmap::mapping::{expand_with_budget, linear_embed, small_w_interaction, DEFAULT_EXPAND_BUDGET};
use boltzmap::model::fmt_real;
use boltzmap::rng::derive_seed;
use boltzmap::sampling::{sample_trials, SampleConfig, DEFAULT_BURN_IN, DEFAULT_THINNING};
use boltzmap::training::{initialize, train_from, TrainConfig, PSEUDO_COUNT};
use boltzmap::{ActivationKind, InteractionModel, RbmModel};
use clap::{Args, ValueEnum};
use serde_json::json;

use crate::manifest::Run;
use crate::UsageError;

fn parse_activation(s: &str) -> std::result::Result<ActivationKind, String> {
    s.parse().map_err(|e: boltzmap::Error| e.to_string())
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn load_model(run: &mut Run, path: &Path) -> Result<RbmModel> {
    let text = run.read_input_text(path)?;
    RbmModel::from_text(&text).with_context(|| format!("parsing model {}", path.display()))
}

fn load_data(run: &mut Run, path: &Path, threshold: u8) -> Result<BinaryDataset> {
    // Digest the file, then let the loader pick IDX or CSV.
    run.read_input(path)?;
    load_dataset(path, threshold).with_context(|| format!("loading data {}", path.display()))
}

/// Writes to `out`, or to stdout with the same header when no path is given.
fn emit(run: &mut Run, out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(path) => run.write_csv(path, body),
        None => {
            print!("{}{}", run.csv_header(), body);
            Ok(())
        }
    }
}

fn parse_index_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| usage(format!("bad index {t:?}: {e}")))
        })
        .collect()
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training data: IDX image file or CSV of 0/1 rows
    #[arg(long)]
    data: PathBuf,
    /// Hidden activation: linear, relu, step or exp
    #[arg(long, value_parser = parse_activation)]
    activation: ActivationKind,
    /// Number of hidden units
    #[arg(long)]
    hidden: usize,
    /// Epochs [default: 500]
    #[arg(long)]
    epochs: Option<usize>,
    /// Minibatch size [default: 100]
    #[arg(long)]
    minibatch: Option<usize>,
    /// Initial learning rate [default: step 0.05, linear 0.01, relu 0.01, exp 0.005]
    #[arg(long)]
    eta0: Option<f64>,
    /// Data points in each pseudo-likelihood evaluation [default: 100]
    #[arg(long)]
    eval_subset: Option<usize>,
    /// Largest absolute weight change per update [default: 1]
    #[arg(long)]
    clip: Option<f64>,
    /// key = value file with any of: minibatch, epochs, eta0, seed, eval_subset, clip
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pixels at or above this value become 1
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u8,
    /// Output model file
    #[arg(long)]
    out: PathBuf,
    /// Per-update training log (CSV)
    #[arg(long)]
    log: Option<PathBuf>,
}

pub fn train(args: TrainArgs, seed: Option<u64>) -> Result<()> {
    let mut config = TrainConfig::new(args.activation);
    let mut config_text = None;
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        config = config
            .with_overrides(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config_text = Some(path.clone());
    }
    if let Some(x) = args.epochs {
        config.epochs = x;
    }
    if let Some(x) = args.minibatch {
        config.minibatch = x;
    }
    if let Some(x) = args.eta0 {
        config.eta0 = x;
    }
    if let Some(x) = args.eval_subset {
        config.eval_subset = x;
    }
    if let Some(x) = args.clip {
        config.clip = x;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    if args.hidden == 0 {
        return Err(usage("--hidden must be at least 1"));
    }

    let mut run = Run::new(
        "train",
        config.seed,
        json!({
            "activation": args.activation.as_str(),
            "hidden": args.hidden,
            "minibatch": config.minibatch,
            "epochs": config.epochs,
            "eta0": config.eta0,
            "eval_subset": config.eval_subset,
            "clip": config.clip,
            "threshold": args.threshold,
            "cd_schedule": "k = ceil(epoch / 10)",
            "lr_schedule": "eta = eta0 / k",
        }),
    );
    if let Some(path) = &config_text {
        run.read_input(path)?;
    }
    let data = load_data(&mut run, &args.data, args.threshold)?;
    let model = initialize(
        &data,
        args.hidden,
        args.activation,
        derive_seed(config.seed, "init"),
    )?;
    let outcome = train_from(model, &data, &config)?;
    run.write_raw(&args.out, &outcome.model.to_text())?;
    if let Some(log) = &args.log {
        run.write_csv(log, &outcome.log.to_csv())?;
    }
    if let Some(last) = outcome.log.rows.last() {
        eprintln!(
            "trained {} updates; pseudo-likelihood {:.4} (moving average {:.4}, summed over sites)",
            last.update, last.pseudo_likelihood, last.moving_average
        );
    }
    run.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MapMethod {
    /// Alternating sums of the cumulant generating function
    Expand,
    /// Möbius inversion of the enumerated log-probabilities (N ≤ 24)
    Exact,
    /// Leading small-weight approximation from the cumulants
    SmallW,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// RBM model file
    #[arg(long)]
    model: PathBuf,
    /// Highest interaction order to report
    #[arg(long, default_value_t = 2)]
    max_order: usize,
    /// How coefficients are computed
    #[arg(long, value_enum, default_value_t = MapMethod::Expand)]
    method: MapMethod,
    /// Comma-separated visible indices to restrict the subsets to [default: all]
    #[arg(long)]
    pool: Option<String>,
    /// Ceiling on cumulant evaluations for the expand method
    #[arg(long, default_value_t = DEFAULT_EXPAND_BUDGET)]
    budget: f64,
    /// Output CSV [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn map(args: MapArgs, seed: Option<u64>) -> Result<()> {
    let pool = args.pool.as_deref().map(parse_index_list).transpose()?;
    let mut run = Run::new(
        "map",
        seed.unwrap_or(0),
        json!({
            "max_order": args.max_order,
            "method": format!("{:?}", args.method).to_lowercase(),
            "pool": pool,
            "budget": args.budget,
        }),
    );
    let model = load_model(&mut run, &args.model)?;
    let terms = match args.method {
        MapMethod::Expand => expand_with_budget(&model, args.max_order, pool.as_deref(), args.budget)?,
        MapMethod::Exact => {
            let full = moebius_invert(&enumerate(&model)?);
            let mut out = InteractionModel::new(model.n_visible());
            for (s, x) in full.iter() {
                let in_pool = pool
                    .as_ref()
                    .is_none_or(|p| s.indices().iter().all(|i| p.contains(i)));
                if s.order() <= args.max_order && in_pool {
                    out.insert(s.clone(), x)?;
                }
            }
            out
        }
        MapMethod::SmallW => {
            let reference = expand_with_budget(&model, args.max_order, pool.as_deref(), args.budget)?;
            let mut out = InteractionModel::new(model.n_visible());
            for (s, _) in reference.iter() {
                let mut x = small_w_interaction(&model, s)?;
                if let [k] = s.indices() {
                    x += model.visible_bias()[*k];
                }
                out.insert(s.clone(), x)?;
            }
            out
        }
    };
    emit(&mut run, args.out.as_deref(), &terms.to_csv())?;
    run.finish()
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Symmetric coupling matrix with zero diagonal, one row per line
    #[arg(long)]
    couplings: PathBuf,
    /// Fields, N values on one line [default: zeros]
    #[arg(long)]
    fields: Option<PathBuf>,
    /// Hidden units to keep [default: N - 1]
    #[arg(long)]
    rank: Option<usize>,
    /// Output model file
    #[arg(long)]
    out: PathBuf,
}

fn parse_real_rows(text: &str, what: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|e| boltzmap::Error::Parse {
                    line: lineno + 1,
                    msg: format!("{what}: bad number {t:?}: {e}"),
                })
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn embed(args: EmbedArgs, seed: Option<u64>) -> Result<()> {
    let mut run = Run::new("embed", seed.unwrap_or(0), json!({ "rank": args.rank }));
    let rows = parse_real_rows(&run.read_input_text(&args.couplings)?, "couplings")?;
    let n = rows.len();
    if n == 0 {
        bail!(boltzmap::Error::EmptyInput("coupling matrix is empty"));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        bail!(boltzmap::Error::DimensionMismatch {
            what: "coupling matrix row",
            expected: n,
            actual: bad.len(),
        });
    }
    let fields = match &args.fields {
        Some(path) => {
            let f: Vec<f64> = parse_real_rows(&run.read_input_text(path)?, "fields")?
                .into_iter()
                .flatten()
                .collect();
            if f.len() != n {
                bail!(boltzmap::Error::DimensionMismatch {
                    what: "fields",
                    expected: n,
                    actual: f.len(),
                });
            }
            f
        }
        None => vec![0.0; n],
    };
    let couplings: Vec<f64> = rows.into_iter().flatten().collect();
    let model = linear_embed(&couplings, &fields, args.rank)?;
    eprintln!("embedded N = {n} into M = {} linear hidden units", model.n_hidden());
    run.write_raw(&args.out, &model.to_text())?;
    run.finish()
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// RBM model file
    #[arg(long)]
    model: PathBuf,
    /// Samples per trial
    #[arg(long)]
    n_samples: usize,
    /// Independent chains; their samples are written one block after another
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Sweeps discarded before recording
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    /// Sweeps between recorded samples
    #[arg(long, default_value_t = DEFAULT_THINNING)]
    thinning: usize,
    /// Output CSV of 0/1 rows
    #[arg(long)]
    out: PathBuf,
}

pub fn sample(args: SampleArgs, seed: Option<u64>) -> Result<()> {
    let master = seed.unwrap_or(0);
    let mut run = Run::new(
        "sample",
        master,
        json!({
            "n_samples": args.n_samples,
            "trials": args.trials,
            "burn_in": args.burn_in,
            "thinning": args.thinning,
        }),
    );
    let model = load_model(&mut run, &args.model)?;
    let config = SampleConfig {
        n_samples: args.n_samples,
        burn_in: args.burn_in,
        thinning: args.thinning,
        seed: derive_seed(master, "sample"),
    };
    let trials = sample_trials(&model, &config, args.trials)?;
    let mut body = String::new();
    for v in trials.iter().flatten() {
        for (j, x) in v.iter().enumerate() {
            if j > 0 {
                body.push(',');
            }
            body.push(if *x == 1 { '1' } else { '0' });
        }
        body.push('\n');
    }
    run.write_csv(&args.out, &body)?;
    run.finish()
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// RBM model file (N ≤ 24)
    #[arg(long)]
    model: PathBuf,
    /// Samples per trial
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Independent chains
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Sweeps discarded before recording
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    /// Sweeps between recorded samples
    #[arg(long, default_value_t = DEFAULT_THINNING)]
    thinning: usize,
    /// Per-state comparison CSV [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary CSV with total variation and chi-square test
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Exact table `mask,log_weight,probability`
    #[arg(long)]
    exact_out: Option<PathBuf>,
}

pub fn validate(args: ValidateArgs, seed: Option<u64>) -> Result<()> {
    let master = seed.unwrap_or(0);
    let mut run = Run::new(
        "validate",
        master,
        json!({
            "samples": args.samples,
            "trials": args.trials,
            "burn_in": args.burn_in,
            "thinning": args.thinning,
        }),
    );
    let model = load_model(&mut run, &args.model)?;
    let summary = enumerate(&model)?;
    let config = SampleConfig {
        n_samples: args.samples,
        burn_in: args.burn_in,
        thinning: args.thinning,
        seed: derive_seed(master, "validate"),
    };
    let trials: Vec<Vec<u64>> = sample_trials(&model, &config, args.trials)?
        .iter()
        .map(|t| t.iter().map(|v| state_mask(v)).collect())
        .collect();
    let report = compare_frequencies(&summary, &trials)?;
    emit(&mut run, args.out.as_deref(), &report.to_csv())?;
    if let Some(path) = &args.summary {
        run.write_csv(path, &report.summary_csv())?;
    }
    if let Some(path) = &args.exact_out {
        run.write_csv(path, &summary.to_csv())?;
    }
    eprintln!(
        "total variation {:.5}; chi-square {:.3} on {} dof, p = {:.4}",
        report.total_variation, report.chi_square, report.degrees_of_freedom, report.p_value
    );
    run.finish()
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// RBM model file
    #[arg(long)]
    model: PathBuf,
    /// Evaluation data: IDX image file or CSV of 0/1 rows
    #[arg(long)]
    data: Option<PathBuf>,
    /// Pixels at or above this value become 1
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u8,
    /// Mean pseudo-likelihood of the data (summed over sites)
    #[arg(long)]
    pl: bool,
    /// Estimate ln Z with annealed importance sampling
    #[arg(long)]
    ais: bool,
    /// Annealing runs
    #[arg(long, default_value_t = DEFAULT_AIS_RUNS)]
    runs: usize,
    /// Inverse temperatures, evenly spaced from 0 to 1
    #[arg(long, default_value_t = DEFAULT_AIS_TEMPERATURES)]
    temps: usize,
    /// Data whose log-odds set the AIS base distribution [default: --data, else uniform]
    #[arg(long)]
    base_data: Option<PathBuf>,
    /// Exact ln Z by enumeration (N ≤ 24)
    #[arg(long)]
    exact: bool,
    /// Per-run AIS estimates (CSV)
    #[arg(long)]
    runs_out: Option<PathBuf>,
    /// Output CSV `metric,value` [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn eval(args: EvalArgs, seed: Option<u64>) -> Result<()> {
    if !(args.pl || args.ais || args.exact) {
        return Err(usage("choose at least one of --pl, --ais, --exact"));
    }
    if args.pl && args.data.is_none() {
        return Err(usage("--pl needs --data"));
    }
    let master = seed.unwrap_or(0);
    let mut run = Run::new(
        "eval",
        master,
        json!({
            "pl": args.pl,
            "ais": args.ais,
            "exact": args.exact,
            "runs": args.runs,
            "temps": args.temps,
            "threshold": args.threshold,
            "pseudo_likelihood_normalization": "sum over sites, mean over data points",
        }),
    );
    let model = load_model(&mut run, &args.model)?;
    let data = args
        .data
        .as_ref()
        .map(|p| load_data(&mut run, p, args.threshold))
        .transpose()?;
    let rows: Option<Vec<Vec<u8>>> = data.as_ref().map(|d| d.rows().collect());
    let mut body = String::from("metric,value\n");
    let mut line = |name: &str, value: f64| {
        let _ = writeln!(body, "{name},{}", fmt_real(value));
    };
    if let Some(rows) = &rows {
        line("n_data", rows.len() as f64);
    }
    if args.pl {
        let rows = rows.as_ref().expect("checked above");
        line("pseudo_likelihood", pseudo_likelihood(&model, rows)?);
    }
    let mut runs_csv = None;
    if args.ais {
        let base_data = match &args.base_data {
            Some(p) => Some(load_data(&mut run, p, args.threshold)?),
            None => data.clone(),
        };
        let mut config = AisConfig::new(args.runs, args.temps, derive_seed(master, "ais"));
        config.base_biases = base_data
            .as_ref()
            .map(|d| empirical_log_odds(&d.feature_means(), PSEUDO_COUNT));
        let est = ais_log_partition(&model, &config)?;
        line("ais_log_z", est.log_z_mean);
        line("ais_log_z_lower", est.log_z_lower);
        line("ais_log_z_upper", est.log_z_upper);
        line("ais_runs", args.runs as f64);
        line("ais_outliers_removed", est.n_outliers_removed as f64);
        if let Some(rows) = &rows {
            line("ais_log_likelihood", mean_log_likelihood(&model, rows, est.log_z_mean)?);
        }
        let mut csv = String::from("run,log_z,kept\n");
        for (r, (x, k)) in est.run_log_z.iter().zip(&est.kept).enumerate() {
            let _ = writeln!(csv, "{r},{},{}", fmt_real(*x), u8::from(*k));
        }
        runs_csv = Some(csv);
    }
    if args.exact {
        let log_z = enumerate(&model)?.log_partition();
        line("exact_log_z", log_z);
        if let Some(rows) = &rows {
            line("exact_log_likelihood", mean_log_likelihood(&model, rows, log_z)?);
        }
    }
    emit(&mut run, args.out.as_deref(), &body)?;
    if let (Some(path), Some(csv)) = (&args.runs_out, &runs_csv) {
        run.write_csv(path, csv)?;
    }
    run.finish()
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Interaction CSV to compare
    #[arg(long, requires_all = ["b", "order"], conflicts_with = "model")]
    a: Option<PathBuf>,
    /// Reference interaction CSV
    #[arg(long, requires = "a")]
    b: Option<PathBuf>,
    /// Interaction order compared
    #[arg(long, requires = "a")]
    order: Option<usize>,
    /// RBM model: RMS weight and RMS coefficient strength by order
    #[arg(long)]
    model: Option<PathBuf>,
    /// Orders for the strength table (order 1 excludes the visible biases)
    #[arg(long, default_value = "1,2,3")]
    orders: String,
    /// Subsets per order above which a uniform random sample is used
    #[arg(long, default_value_t = 100_000)]
    max_subsets: usize,
    /// Output CSV [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_interactions(run: &mut Run, path: &Path, n: Option<usize>) -> Result<InteractionModel> {
    let text = run.read_input_text(path)?;
    InteractionModel::from_csv(&text, n).with_context(|| format!("parsing {}", path.display()))
}

fn widen(model: &InteractionModel, n: usize) -> Result<InteractionModel> {
    let mut out = InteractionModel::new(n);
    for (s, x) in model.iter() {
        out.insert(s.clone(), x)?;
    }
    Ok(out)
}

pub fn stats(args: StatsArgs, seed: Option<u64>) -> Result<()> {
    let master = seed.unwrap_or(0);
    let mut run = Run::new(
        "stats",
        master,
        json!({
            "order": args.order,
            "orders": args.orders,
            "max_subsets": args.max_subsets,
        }),
    );
    match (&args.a, &args.b, args.order, &args.model) {
        (Some(a), Some(b), Some(order), None) => {
            let a0 = load_interactions(&mut run, a, None)?;
            let b0 = load_interactions(&mut run, b, None)?;
            let n = a0.n_visible().max(b0.n_visible());
            let a = widen(&a0, n)?;
            let b = widen(&b0, n)?;
            let s = comparison_stats(&a, &b, order)?;
            let body = format!(
                "order,slope,nrmse,rms_a,rms_b,n_terms\n{order},{},{},{},{},{}\n",
                fmt_real(s.slope),
                fmt_real(s.nrmse),
                fmt_real(s.rms_a),
                fmt_real(s.rms_b),
                s.n_terms
            );
            emit(&mut run, args.out.as_deref(), &body)?;
        }
        (None, None, None, Some(model)) => {
            let model = load_model(&mut run, model)?;
            let orders = parse_index_list(&args.orders)?;
            let strength = strength_by_order(
                &model,
                &orders,
                args.max_subsets,
                derive_seed(master, "strength"),
            )?;
            let mut body = String::from("order,n_terms,rms,ln_rms\n");
            for s in &strength {
                let _ = writeln!(
                    body,
                    "{},{},{},{}",
                    s.order,
                    s.n_terms,
                    fmt_real(s.rms),
                    fmt_real(s.rms.ln())
                );
            }
            let _ = writeln!(body, "# rms_weight={}", fmt_real(rms_weight(&model)));
            let (xs, ys): (Vec<f64>, Vec<f64>) = strength
                .iter()
                .filter(|s| s.rms > 0.0)
                .map(|s| (s.order as f64, s.rms.ln()))
                .unzip();
            if let Ok(fit) = linear_fit(&xs, &ys) {
                let _ = writeln!(
                    body,
                    "# ln_rms_fit slope={} intercept={} r_squared={}",
                    fmt_real(fit.slope),
                    fmt_real(fit.intercept),
                    fmt_real(fit.r_squared)
                );
            }
            emit(&mut run, args.out.as_deref(), &body)?;
        }
        _ => return Err(usage("use either --a/--b/--order or --model")),
    }
    run.finish()
}

#[derive(Debug, Args)]
pub struct CumulantsArgs {
    /// Hidden activation: linear, relu, step or exp
    #[arg(long, value_parser = parse_activation)]
    activation: ActivationKind,
    /// Hidden bias c
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    bias: f64,
    /// Highest cumulant order
    #[arg(long, default_value_t = 4)]
    max_order: u32,
    /// Comma-separated inputs q; prints K(q, c) instead of cumulants
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
    /// Output CSV [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn cumulants(args: CumulantsArgs, seed: Option<u64>) -> Result<()> {
    let mut run = Run::new(
        "cumulants",
        seed.unwrap_or(0),
        json!({
            "activation": args.activation.as_str(),
            "bias": args.bias,
            "max_order": args.max_order,
            "q": args.q,
        }),
    );
    let kind = args.activation;
    let body = match &args.q {
        Some(list) => {
            let mut body = String::from("q,cgf\n");
            for t in list.split(',') {
                let q: f64 = t
                    .trim()
                    .parse()
                    .map_err(|e| usage(format!("bad value {t:?} in --q: {e}")))?;
                let _ = writeln!(body, "{},{}", fmt_real(q), fmt_real(kind.cgf(q, args.bias)?));
            }
            body
        }
        None => {
            if args.max_order == 0 {
                return Err(usage("--max-order must be at least 1"));
            }
            let mut body = String::from("order,cumulant,finite_difference\n");
            for n in 1..=args.max_order {
                let _ = writeln!(
                    body,
                    "{n},{},{}",
                    fmt_real(kind.cumulant(args.bias, n)?),
                    fmt_real(kind.cumulant_numeric(args.bias, n)?)
                );
            }
            body
        }
    };
    emit(&mut run, args.out.as_deref(), &body)?;
    run.finish()
}
