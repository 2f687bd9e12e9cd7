//! RBM parameters ⇄ interaction coefficients.
//!
//! With a separable potential every hidden unit contributes additively to every coefficient:
//!
//! ```text
//! I_S = [s = 1] b_k  +  Σ_μ Σ_{∅≠T⊆S} (-1)^{|S|-|T|} K(Σ_{j∈T} w_{j,μ}, c_μ)
//! ```
//!
//! which is the Möbius inversion of `S ↦ K(Σ_{j∈S} w_j)` on the boolean lattice.

mod eigen;

pub use eigen::{jacobi_eigen, SymmetricEigen};

use itertools::Itertools;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{InteractionModel, RbmModel, Subset};
use crate::potentials::ActivationKind;
use crate::special::pairwise_sum;

/// Default ceiling on `Σ_s C(pool, s) 2^s M` cumulant evaluations for [`expand`].
pub const DEFAULT_EXPAND_BUDGET: f64 = 1e9;

/// Largest subset order handled by [`interaction_term`].
pub const MAX_SUBSET_ORDER: usize = 30;

/// Coefficient `I_S`, including the visible bias when `|S| = 1`.
pub fn interaction_term(model: &RbmModel, subset: &Subset) -> Result<f64> {
    let hidden = hidden_interaction_term(model, subset)?;
    Ok(match subset.indices() {
        [k] => model.visible_bias()[*k] + hidden,
        _ => hidden,
    })
}

/// Contribution of the hidden layer to `I_S` (the bias is left out for `|S| = 1`).
pub fn hidden_interaction_term(model: &RbmModel, subset: &Subset) -> Result<f64> {
    subset.check_bounds(model.n_visible())?;
    if subset.order() > MAX_SUBSET_ORDER {
        return Err(Error::InvalidSubset {
            subset: subset.indices().to_vec(),
            reason: format!("order above {MAX_SUBSET_ORDER}"),
        });
    }
    let mut scratch = Vec::new();
    hidden_term_with(model, subset.indices(), &mut scratch)
}

fn hidden_term_with(model: &RbmModel, indices: &[usize], signed: &mut Vec<f64>) -> Result<f64> {
    let s = indices.len();
    let kind = model.activation();
    let mut per_unit = Vec::with_capacity(model.n_hidden());
    for (mu, &c) in model.hidden_bias().iter().enumerate() {
        signed.clear();
        // Gray-code walk over the nonempty sub-subsets: one addition per step.
        let mut sum = 0.0;
        for g in 1u64..(1u64 << s) {
            let flipped = g.trailing_zeros() as usize;
            let gray = g ^ (g >> 1);
            let w = model.weight(indices[flipped], mu);
            if gray >> flipped & 1 == 1 {
                sum += w;
            } else {
                sum -= w;
            }
            let k = kind.cgf(sum, c)?;
            let parity = (s - gray.count_ones() as usize) % 2;
            signed.push(if parity == 0 { k } else { -k });
        }
        per_unit.push(pairwise_sum(signed));
    }
    Ok(pairwise_sum(&per_unit))
}

/// Coefficients for many subsets at once, evaluated in parallel; output follows input order.
pub fn interaction_terms(
    model: &RbmModel,
    subsets: &[Subset],
    include_bias: bool,
) -> Result<Vec<f64>> {
    for s in subsets {
        s.check_bounds(model.n_visible())?;
        if s.order() > MAX_SUBSET_ORDER {
            return Err(Error::InvalidSubset {
                subset: s.indices().to_vec(),
                reason: format!("order above {MAX_SUBSET_ORDER}"),
            });
        }
    }
    subsets
        .par_iter()
        .map_init(Vec::new, |scratch, subset| {
            let hidden = hidden_term_with(model, subset.indices(), scratch)?;
            Ok(match subset.indices() {
                [k] if include_bias => model.visible_bias()[*k] + hidden,
                _ => hidden,
            })
        })
        .collect()
}

/// Number of cumulant evaluations [`expand`] performs.
pub fn expand_cost(pool_size: usize, max_order: usize, n_hidden: usize) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    for s in 1..=max_order.min(pool_size) {
        binom = binom * (pool_size + 1 - s) as f64 / s as f64;
        total += binom * 2f64.powi(s as i32) * n_hidden as f64;
    }
    total
}

/// All coefficients of order `≤ max_order` over `pool` (default: every visible unit).
pub fn expand(model: &RbmModel, max_order: usize, pool: Option<&[usize]>) -> Result<InteractionModel> {
    expand_with_budget(model, max_order, pool, DEFAULT_EXPAND_BUDGET)
}

pub fn expand_with_budget(
    model: &RbmModel,
    max_order: usize,
    pool: Option<&[usize]>,
    budget: f64,
) -> Result<InteractionModel> {
    let pool: Vec<usize> = match pool {
        Some(p) => {
            let mut p = p.to_vec();
            p.sort_unstable();
            p.dedup();
            p
        }
        None => (0..model.n_visible()).collect(),
    };
    if let Some(&bad) = pool.iter().find(|&&i| i >= model.n_visible()) {
        return Err(Error::InvalidSubset {
            subset: vec![bad],
            reason: format!("pool index out of range for N = {}", model.n_visible()),
        });
    }
    if max_order == 0 || max_order > pool.len() {
        return Err(Error::InvalidConfig(format!(
            "max order {max_order} must lie in 1..={}",
            pool.len()
        )));
    }
    let estimate = expand_cost(pool.len(), max_order, model.n_hidden());
    if estimate > budget {
        return Err(Error::BudgetExceeded { estimate, budget });
    }
    let subsets: Vec<Subset> = (1..=max_order)
        .flat_map(|s| pool.iter().copied().combinations(s))
        .map(Subset::new)
        .collect::<Result<_>>()?;
    let values = interaction_terms(model, &subsets, true)?;
    let mut out = InteractionModel::new(model.n_visible());
    for (subset, value) in subsets.into_iter().zip(values) {
        out.insert(subset, value)?;
    }
    Ok(out)
}

/// Leading small-weight term `Σ_μ κ^(s)_μ Π_{j∈S} w_{j,μ}` (bias excluded).
pub fn small_w_interaction(model: &RbmModel, subset: &Subset) -> Result<f64> {
    subset.check_bounds(model.n_visible())?;
    let s = subset.order() as u32;
    let kind = model.activation();
    let mut total = 0.0;
    for (mu, &c) in model.hidden_bias().iter().enumerate() {
        let product: f64 = subset.indices().iter().map(|&k| model.weight(k, mu)).product();
        if product != 0.0 {
            total += kind.cumulant(c, s)? * product;
        }
    }
    Ok(total)
}

/// Exponential-activation reparameterization `u = e^w - 1`, `λ̃ = e^{-c}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpParams {
    n_hidden: usize,
    /// Row-major `N × M`.
    pub u: Vec<f64>,
    pub lambda_tilde: Vec<f64>,
}

impl ExpParams {
    pub fn from_model(model: &RbmModel) -> Result<Self> {
        if model.activation() != ActivationKind::Exponential {
            return Err(Error::InvalidModel(format!(
                "exponential parameters need an exp model, got {}",
                model.activation()
            )));
        }
        Ok(Self {
            n_hidden: model.n_hidden(),
            u: model.weights().iter().map(|w| w.exp_m1()).collect(),
            lambda_tilde: model.hidden_bias().iter().map(|c| (-c).exp()).collect(),
        })
    }

    /// `Σ_μ λ̃_μ Π_{k∈S} u_{k,μ}` (bias excluded for `|S| = 1`).
    pub fn interaction(&self, subset: &Subset) -> f64 {
        self.lambda_tilde
            .iter()
            .enumerate()
            .map(|(mu, lt)| {
                lt * subset
                    .indices()
                    .iter()
                    .map(|&k| self.u[k * self.n_hidden + mu])
                    .product::<f64>()
            })
            .sum()
    }
}

/// Linear-activation RBM whose pairwise couplings reproduce `couplings` (off-diagonal) and
/// whose fields reproduce `fields`.
///
/// `J + λ₀ I` with `λ₀ = -λ_min(J)` is positive semidefinite; its top `rank` eigenpairs give
/// the columns `√(λ_k + λ₀) u_k` of `W`. The diagonal of `W Wᵀ` acts on `v_i² = v_i` and is
/// removed through the visible biases. `rank` defaults to `N - 1`, which is exact when the
/// smallest eigenvalue is simple; smaller ranks give the best Frobenius approximation.
pub fn linear_embed(couplings: &[f64], fields: &[f64], rank: Option<usize>) -> Result<RbmModel> {
    let n = fields.len();
    if n == 0 {
        return Err(Error::EmptyInput("embedding needs at least one visible unit"));
    }
    if couplings.len() != n * n {
        return Err(Error::DimensionMismatch {
            what: "coupling matrix",
            expected: n * n,
            actual: couplings.len(),
        });
    }
    let norm = couplings.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sym_tol = 1e-12 * norm.max(1.0);
    for i in 0..n {
        if couplings[i * n + i] != 0.0 {
            return Err(Error::InvalidModel(format!(
                "coupling matrix must have a zero diagonal (J[{i}][{i}] = {})",
                couplings[i * n + i]
            )));
        }
        for j in 0..i {
            if (couplings[i * n + j] - couplings[j * n + i]).abs() > sym_tol {
                return Err(Error::InvalidModel(format!(
                    "coupling matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let max_rank = n.saturating_sub(1).max(1);
    let rank = rank.unwrap_or(max_rank);
    if rank == 0 || rank > max_rank {
        return Err(Error::InvalidConfig(format!(
            "embedding rank {rank} must lie in 1..={max_rank}"
        )));
    }

    let eig = jacobi_eigen(couplings, n)?;
    let lambda_min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = -lambda_min;
    let zero_tol = 1e-10 * norm.max(1.0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.values[b].total_cmp(&eig.values[a]));
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&k| eig.values[k] + shift > zero_tol)
        .take(rank)
        .collect();

    let m = kept.len().max(1);
    let mut weights = vec![0.0; n * m];
    for (mu, &k) in kept.iter().enumerate() {
        let scale = (eig.values[k] + shift).sqrt();
        for i in 0..n {
            weights[i * m + mu] = eig.vectors[i * n + k] * scale;
        }
    }
    let visible_bias = (0..n)
        .map(|i| {
            let diag: f64 = weights[i * m..(i + 1) * m].iter().map(|w| w * w).sum();
            fields[i] - 0.5 * diag
        })
        .collect();
    RbmModel::new(ActivationKind::Linear, visible_bias, vec![0.0; m], weights)
}
