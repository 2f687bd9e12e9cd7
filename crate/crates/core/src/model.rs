//! Parameter containers and their text formats.
//!
//! RBM files (`boltzmap-rbm v1`):
//!
//! ```text
//! boltzmap-rbm v1
//! N M activation
//! b_0            (N lines)
//! c_0            (M lines)
//! w_00 ... w_0M  (N lines of M entries)
//! ```
//!
//! Interaction files are CSV with header `order,indices,value`, indices joined by `;`.
//! Reals are written with 17 significant digits so parsing restores them bit for bit.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::potentials::ActivationKind;

pub const RBM_HEADER: &str = "boltzmap-rbm v1";
pub const INTERACTION_HEADER: &str = "order,indices,value";

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbmModel {
    activation: ActivationKind,
    n_visible: usize,
    n_hidden: usize,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
    /// Row-major `N × M`; row `i` holds the weights leaving visible unit `i`.
    weights: Vec<f64>,
}

impl RbmModel {
    pub fn new(
        activation: ActivationKind,
        visible_bias: Vec<f64>,
        hidden_bias: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let n = visible_bias.len();
        let m = hidden_bias.len();
        if n == 0 || m == 0 {
            return Err(Error::InvalidModel(format!(
                "need at least one visible and one hidden unit, got N = {n}, M = {m}"
            )));
        }
        if weights.len() != n * m {
            return Err(Error::DimensionMismatch {
                what: "weight matrix",
                expected: n * m,
                actual: weights.len(),
            });
        }
        let all = visible_bias.iter().chain(&hidden_bias).chain(&weights);
        if let Some(bad) = all.copied().find(|x| !x.is_finite()) {
            return Err(Error::InvalidModel(format!("non-finite parameter {bad}")));
        }
        Ok(Self {
            activation,
            n_visible: n,
            n_hidden: m,
            visible_bias,
            hidden_bias,
            weights,
        })
    }

    pub fn zeros(activation: ActivationKind, n_visible: usize, n_hidden: usize) -> Result<Self> {
        Self::new(
            activation,
            vec![0.0; n_visible],
            vec![0.0; n_hidden],
            vec![0.0; n_visible * n_hidden],
        )
    }

    /// Builds a model from weight rows (one row per visible unit).
    pub fn from_rows(
        activation: ActivationKind,
        visible_bias: Vec<f64>,
        hidden_bias: Vec<f64>,
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        let m = hidden_bias.len();
        if let Some(row) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                what: "weight row",
                expected: m,
                actual: row.len(),
            });
        }
        Self::new(activation, visible_bias, hidden_bias, rows.concat())
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.visible_bias
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize, mu: usize) -> f64 {
        self.weights[i * self.n_hidden + mu]
    }

    pub fn weight_row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n_hidden..(i + 1) * self.n_hidden]
    }

    pub(crate) fn visible_bias_mut(&mut self) -> &mut [f64] {
        &mut self.visible_bias
    }

    pub(crate) fn hidden_bias_mut(&mut self) -> &mut [f64] {
        &mut self.hidden_bias
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn set_visible_bias(&mut self, bias: Vec<f64>) -> Result<()> {
        check_len("visible bias", self.n_visible, bias.len())?;
        self.visible_bias = bias;
        Ok(())
    }

    pub fn set_hidden_bias(&mut self, bias: Vec<f64>) -> Result<()> {
        check_len("hidden bias", self.n_hidden, bias.len())?;
        self.hidden_bias = bias;
        Ok(())
    }

    pub fn check_visible(&self, v: &[u8]) -> Result<()> {
        check_len("visible vector", self.n_visible, v.len())?;
        if v.iter().any(|&x| x > 1) {
            return Err(Error::InvalidModel("visible entries must be 0 or 1".into()));
        }
        Ok(())
    }

    /// `Wᵀv`: total input to each hidden unit.
    pub fn hidden_inputs(&self, v: &[u8]) -> Vec<f64> {
        let mut input = vec![0.0; self.n_hidden];
        for (i, _) in v.iter().enumerate().filter(|(_, &x)| x == 1) {
            for (acc, w) in input.iter_mut().zip(self.weight_row(i)) {
                *acc += w;
            }
        }
        input
    }

    /// `Σ_μ K(input_μ, c_μ)`.
    pub fn hidden_free_energy(&self, input: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (&q, &c) in input.iter().zip(&self.hidden_bias) {
            total += self.activation.cgf(q, c)?;
        }
        Ok(total)
    }

    /// Unnormalized log-probability `b·v + Σ_μ K((Wᵀv)_μ, c_μ)` of a visible state.
    pub fn log_weight(&self, v: &[u8]) -> Result<f64> {
        self.check_visible(v)?;
        let field: f64 = v
            .iter()
            .zip(&self.visible_bias)
            .filter(|(&x, _)| x == 1)
            .map(|(_, b)| b)
            .sum();
        Ok(field + self.hidden_free_energy(&self.hidden_inputs(v))?)
    }

    /// Model restricted to a subset of hidden units, sharing the visible biases.
    pub fn hidden_subset(&self, hidden: &[usize]) -> Result<Self> {
        if let Some(&bad) = hidden.iter().find(|&&mu| mu >= self.n_hidden) {
            return Err(Error::InvalidModel(format!("hidden index {bad} out of range")));
        }
        let c = hidden.iter().map(|&mu| self.hidden_bias[mu]).collect();
        let rows: Vec<Vec<f64>> = (0..self.n_visible)
            .map(|i| hidden.iter().map(|&mu| self.weight(i, mu)).collect())
            .collect();
        Self::from_rows(self.activation, self.visible_bias.clone(), c, &rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{RBM_HEADER}");
        let _ = writeln!(out, "{} {} {}", self.n_visible, self.n_hidden, self.activation);
        for &b in &self.visible_bias {
            let _ = writeln!(out, "{}", fmt_real(b));
        }
        for &c in &self.hidden_bias {
            let _ = writeln!(out, "{}", fmt_real(c));
        }
        for i in 0..self.n_visible {
            let row: Vec<String> = self.weight_row(i).iter().map(|&w| fmt_real(w)).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty model file".into(),
        })?;
        if header != RBM_HEADER {
            return Err(Error::Parse {
                line,
                msg: format!("expected header {RBM_HEADER:?}, found {header:?}"),
            });
        }
        let (line, dims) = lines.next().ok_or(Error::Parse {
            line: line + 1,
            msg: "missing dimension line".into(),
        })?;
        let fields: Vec<&str> = dims.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected `N M activation`, found {dims:?}"),
            });
        }
        let n: usize = parse_field(fields[0], line)?;
        let m: usize = parse_field(fields[1], line)?;
        let activation: ActivationKind = fields[2].parse().map_err(|e: Error| Error::Parse {
            line,
            msg: e.to_string(),
        })?;

        let mut next_values = |count: usize, per_line: usize| -> Result<Vec<f64>> {
            let mut values = Vec::with_capacity(count * per_line);
            for _ in 0..count {
                let (line, text) = lines.next().ok_or(Error::Parse {
                    line: 0,
                    msg: "unexpected end of model file".into(),
                })?;
                let row: Vec<&str> = text.split_whitespace().collect();
                if row.len() != per_line {
                    return Err(Error::Parse {
                        line,
                        msg: format!("expected {per_line} values, found {}", row.len()),
                    });
                }
                for token in row {
                    values.push(parse_field(token, line)?);
                }
            }
            Ok(values)
        };
        let b = next_values(n, 1)?;
        let c = next_values(m, 1)?;
        let w = next_values(n, m)?;
        if let Some((line, extra)) = lines.next() {
            return Err(Error::Parse {
                line,
                msg: format!("trailing content {extra:?}"),
            });
        }
        Self::new(activation, b, c, w)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}

fn parse_field<T: std::str::FromStr>(token: &str, line: usize) -> Result<T> {
    token.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {token:?}"),
    })
}

/// Strictly increasing visible indices. Ordered by size first, then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subset(Vec<usize>);

impl Subset {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidSubset {
                subset: indices,
                reason: "empty subset".into(),
            });
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSubset {
                subset: indices,
                reason: "indices must be strictly increasing".into(),
            });
        }
        Ok(Self(indices))
    }

    /// Subset of the set bits of `mask`.
    pub fn from_mask(mask: u64) -> Self {
        Self((0..64).filter(|i| mask >> i & 1 == 1).collect())
    }

    pub fn check_bounds(&self, n_visible: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last >= n_visible => Err(Error::InvalidSubset {
                subset: self.0.clone(),
                reason: format!("index {last} out of range for N = {n_visible}"),
            }),
            _ => Ok(()),
        }
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0, |m, &i| m | 1u64 << i)
    }

    pub fn is_active(&self, v: &[u8]) -> bool {
        self.0.iter().all(|&i| v[i] == 1)
    }
}

impl Ord for Subset {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Subset {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse model `P(v) ∝ exp(Σ_S I_S Π_{i∈S} v_i)` over binary variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionModel {
    n_visible: usize,
    terms: BTreeMap<Subset, f64>,
}

impl InteractionModel {
    pub fn new(n_visible: usize) -> Self {
        Self {
            n_visible,
            terms: BTreeMap::new(),
        }
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn insert(&mut self, subset: Subset, value: f64) -> Result<()> {
        subset.check_bounds(self.n_visible)?;
        if !value.is_finite() {
            return Err(Error::NonFinite(format!(
                "coefficient {value} for subset {:?}",
                subset.indices()
            )));
        }
        self.terms.insert(subset, value);
        Ok(())
    }

    pub fn get(&self, indices: &[usize]) -> f64 {
        self.terms
            .get(&Subset(indices.to_vec()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_order(&self) -> usize {
        self.terms.keys().map(Subset::order).max().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Subset, f64)> {
        self.terms.iter().map(|(s, &v)| (s, v))
    }

    pub fn terms_of_order(&self, order: usize) -> impl Iterator<Item = (&Subset, f64)> {
        self.iter().filter(move |(s, _)| s.order() == order)
    }

    /// Drops terms with `|value| <= tol`.
    pub fn pruned(mut self, tol: f64) -> Self {
        self.terms.retain(|_, v| v.abs() > tol);
        self
    }

    /// Exponent of the unnormalized probability: sum of the terms fully active in `v`.
    pub fn energy_argument(&self, v: &[u8]) -> Result<f64> {
        check_len("visible vector", self.n_visible, v.len())?;
        Ok(self
            .terms
            .iter()
            .filter(|(s, _)| s.is_active(v))
            .map(|(_, &value)| value)
            .sum())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{INTERACTION_HEADER}");
        for (subset, value) in &self.terms {
            let idx: Vec<String> = subset.indices().iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{},{},{}", subset.order(), idx.join(";"), fmt_real(*value));
        }
        out
    }

    /// Parses the CSV format; `#` lines are comments. `n_visible` defaults to one past the
    /// largest index seen.
    pub fn from_csv(text: &str, n_visible: Option<usize>) -> Result<Self> {
        let mut entries = Vec::new();
        let mut header_seen = false;
        for (line_no, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line != INTERACTION_HEADER {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("expected header {INTERACTION_HEADER:?}"),
                    });
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected 3 columns, found {}", fields.len()),
                });
            }
            let order: usize = parse_field(fields[0], line_no)?;
            let indices = fields[1]
                .split(';')
                .map(|t| parse_field::<usize>(t, line_no))
                .collect::<Result<Vec<_>>>()?;
            if indices.len() != order {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("order {order} but {} indices", indices.len()),
                });
            }
            let value: f64 = parse_field(fields[2], line_no)?;
            let subset = Subset::new(indices).map_err(|e| Error::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;
            entries.push((line_no, subset, value));
        }
        let inferred = entries
            .iter()
            .filter_map(|(_, s, _)| s.indices().last())
            .max()
            .map_or(0, |&i| i + 1);
        let mut model = Self::new(n_visible.unwrap_or(inferred));
        for (line, subset, value) in entries {
            if model.terms.contains_key(&subset) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate subset {:?}", subset.indices()),
                });
            }
            model.insert(subset, value)?;
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, n_visible: Option<usize>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?, n_visible)
    }
}

impl FromIterator<(Subset, f64)> for InteractionModel {
    /// Collects terms; `n_visible` is inferred from the largest index.
    fn from_iter<T: IntoIterator<Item = (Subset, f64)>>(iter: T) -> Self {
        let terms: BTreeMap<Subset, f64> = iter.into_iter().collect();
        let n_visible = terms
            .keys()
            .filter_map(|s| s.indices().last())
            .max()
            .map_or(0, |&i| i + 1);
        Self { n_visible, terms }
    }
}
