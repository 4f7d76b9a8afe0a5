use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Similarity between query pattern and context patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Similarity {
    #[default]
    DotProduct,
}

/// Separation function applied to the scaled similarity scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Separation {
    #[default]
    Softmax,
}

/// Hopfield network with context.
///
/// `xi_q` and `xi_k` are `d_m × d_q` memory matrices mapping query and context
/// vectors into the associative space; `w_v` is the `d_q × d_q` value map used
/// by the attention view.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HncModel {
    #[serde(serialize_with = "rows")]
    xi_q: DMatrix<f64>,
    #[serde(serialize_with = "rows")]
    xi_k: DMatrix<f64>,
    #[serde(serialize_with = "rows")]
    w_v: DMatrix<f64>,
    gamma: f64,
    similarity: Similarity,
    separation: Separation,
}

/// Matrices go to JSON as row-major nested arrays.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Inverse of [`matrix_rows`].
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(r) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::dim("matrix row", ncols, r.len()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_rows(m).serialize(s)
}

fn all_finite<'a>(it: impl IntoIterator<Item = &'a f64>) -> bool {
    it.into_iter().all(|v| v.is_finite())
}

impl HncModel {
    pub fn new(
        xi_q: DMatrix<f64>,
        xi_k: DMatrix<f64>,
        w_v: Option<DMatrix<f64>>,
        gamma: f64,
    ) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if xi_q.shape() != xi_k.shape() {
            return Err(if xi_q.nrows() != xi_k.nrows() {
                Error::dim("xi_k rows", xi_q.nrows(), xi_k.nrows())
            } else {
                Error::dim("xi_k cols", xi_q.ncols(), xi_k.ncols())
            });
        }
        if xi_q.nrows() == 0 || xi_q.ncols() == 0 {
            return Err(Error::invalid("memory matrices must be non-empty"));
        }
        let d_q = xi_q.ncols();
        let w_v = w_v.unwrap_or_else(|| DMatrix::identity(d_q, d_q));
        if w_v.shape() != (d_q, d_q) {
            return Err(Error::dim("w_v", d_q, w_v.nrows()));
        }
        if !all_finite(xi_q.iter()) || !all_finite(xi_k.iter()) || !all_finite(w_v.iter()) {
            return Err(Error::NonFinite("model matrices"));
        }
        Ok(Self {
            xi_q,
            xi_k,
            w_v,
            gamma,
            similarity: Similarity::DotProduct,
            separation: Separation::Softmax,
        })
    }

    /// `xi_q = xi_k = I_d`, `w_v = I_d`.
    pub fn identity(d: usize, gamma: f64) -> Result<Self> {
        Self::new(
            DMatrix::identity(d, d),
            DMatrix::identity(d, d),
            None,
            gamma,
        )
    }

    pub fn with_value_map(mut self, w_v: DMatrix<f64>) -> Result<Self> {
        let d_q = self.d_q();
        if w_v.shape() != (d_q, d_q) {
            return Err(Error::dim("w_v", d_q, w_v.nrows()));
        }
        self.w_v = w_v;
        Ok(self)
    }

    pub fn d_m(&self) -> usize {
        self.xi_q.nrows()
    }

    pub fn d_q(&self) -> usize {
        self.xi_q.ncols()
    }

    pub fn xi_q(&self) -> &DMatrix<f64> {
        &self.xi_q
    }

    pub fn xi_k(&self) -> &DMatrix<f64> {
        &self.xi_k
    }

    pub fn w_v(&self) -> &DMatrix<f64> {
        &self.w_v
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn similarity(&self) -> Similarity {
        self.similarity
    }

    pub fn separation(&self) -> Separation {
        self.separation
    }
}

/// The `d_m × M` matrix Λ whose columns are context vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextSet {
    #[serde(serialize_with = "rows")]
    lambda: DMatrix<f64>,
}

impl ContextSet {
    pub fn new(lambda: DMatrix<f64>) -> Result<Self> {
        if lambda.ncols() == 0 {
            return Err(Error::EmptyContext);
        }
        if !all_finite(lambda.iter()) {
            return Err(Error::NonFinite("context vectors"));
        }
        Ok(Self { lambda })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let first = columns.first().ok_or(Error::EmptyContext)?;
        let d = first.len();
        if let Some(bad) = columns.iter().find(|c| c.len() != d) {
            return Err(Error::dim("context vector", d, bad.len()));
        }
        Self::new(DMatrix::from_fn(d, columns.len(), |i, j| columns[j][i]))
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    /// Number of context vectors M.
    pub fn len(&self) -> usize {
        self.lambda.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.lambda.nrows()
    }

    /// Reorder columns: column `j` of the result is column `perm[j]` of self.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() || perm.iter().any(|&p| p >= self.len()) {
            return Err(Error::invalid("permutation does not match context size"));
        }
        Self::new(self.lambda.select_columns(perm))
    }
}

/// Query vector σ and its query pattern `u = σ ξ_Q` (both row vectors,
/// stored as column vectors).
#[derive(Debug, Clone, PartialEq)]
pub struct QueryState {
    sigma: DVector<f64>,
    u: DVector<f64>,
}

impl QueryState {
    pub fn new(model: &HncModel, sigma: DVector<f64>) -> Result<Self> {
        if sigma.len() != model.d_m() {
            return Err(Error::dim("query vector", model.d_m(), sigma.len()));
        }
        if !all_finite(sigma.iter()) {
            return Err(Error::NonFinite("query vector"));
        }
        let u = model.xi_q.tr_mul(&sigma);
        Ok(Self { sigma, u })
    }

    pub fn from_slice(model: &HncModel, sigma: &[f64]) -> Result<Self> {
        Self::new(model, DVector::from_column_slice(sigma))
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    /// Retrieved pattern `u_new` (length d_q).
    pub u_new: DVector<f64>,
    /// Softmax weights over the M context patterns.
    pub weights: DVector<f64>,
    /// Pre-softmax scores `γ · u z_j`.
    pub scores: DVector<f64>,
}

/// Numerically stable softmax (max-score subtraction).
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn check_context(model: &HncModel, ctx: &ContextSet) -> Result<()> {
    if ctx.is_empty() {
        return Err(Error::EmptyContext);
    }
    if ctx.dim() != model.d_m() {
        return Err(Error::dim("context vector", model.d_m(), ctx.dim()));
    }
    Ok(())
}

fn check_query(model: &HncModel, query: &QueryState) -> Result<()> {
    if query.u.len() != model.d_q() {
        return Err(Error::dim("query pattern", model.d_q(), query.u.len()));
    }
    Ok(())
}

/// Context patterns `Z = ξ_Kᵀ Λ` (`d_q × M`, one pattern per column).
pub fn context_patterns(model: &HncModel, ctx: &ContextSet) -> Result<DMatrix<f64>> {
    check_context(model, ctx)?;
    Ok(model.xi_k.tr_mul(&ctx.lambda))
}

/// One HN-C update: `u_new = softmax(γ u Z) Λᵀ ξ_K`.
pub fn hnc_retrieve(
    model: &HncModel,
    ctx: &ContextSet,
    query: &QueryState,
) -> Result<RetrievalResult> {
    check_query(model, query)?;
    let z = context_patterns(model, ctx)?;
    let scores = z.tr_mul(&query.u) * model.gamma;
    if !all_finite(scores.iter()) {
        return Err(Error::NonFinite("similarity scores"));
    }
    let weights = DVector::from_vec(softmax(scores.as_slice()));
    let u_new = &z * &weights;
    Ok(RetrievalResult {
        u_new,
        weights,
        scores,
    })
}

/// Self-attention form of the same update:
/// `Q = σ ξ_Q`, `Kᵀ = ξ_Kᵀ Λ`, `V = Λᵀ ξ_K W_v`, output `softmax(γ Q Kᵀ) V`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionView {
    pub q: RowDVector<f64>,
    /// `Kᵀ`, shape `d_q × M`.
    pub k_t: DMatrix<f64>,
    /// `V`, shape `M × d_q`.
    pub v: DMatrix<f64>,
    pub output: RowDVector<f64>,
}

pub fn attention_view(
    model: &HncModel,
    ctx: &ContextSet,
    query: &QueryState,
) -> Result<AttentionView> {
    check_context(model, ctx)?;
    if query.sigma.len() != model.d_m() {
        return Err(Error::dim("query vector", model.d_m(), query.sigma.len()));
    }
    let q = query.sigma.transpose() * &model.xi_q;
    let k_t = model.xi_k.transpose() * &ctx.lambda;
    let v = ctx.lambda.transpose() * &model.xi_k * &model.w_v;
    let logits = (&q * &k_t) * model.gamma;
    if !all_finite(logits.iter()) {
        return Err(Error::NonFinite("attention logits"));
    }
    let attn = RowDVector::from_vec(softmax(logits.as_slice()));
    let output = &attn * &v;
    Ok(AttentionView { q, k_t, v, output })
}
