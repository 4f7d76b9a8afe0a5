//! Query–context separation, realized retrieval error, and the closed-form
//! retrieval-error upper bound with its instance/contextual split.
//!
//! For a target context pattern `z_i` repeated `t` times among `M`, with
//! `c = exp(-γ δ_min)` and ground truth `u* = (z_i + Δz)ᵀ`:
//!
//! ```text
//! ε = ‖u_new − u*‖ ≤ ‖Δz‖ + β ‖z_max‖
//! β = 1 − (1 + c(M−t)/t)⁻¹ + c(M−t)
//! ```
//!
//! `z_max` is the context pattern of largest Euclidean norm.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::associative::{
    context_patterns, hnc_retrieve, ContextSet, HncModel, QueryState, RetrievalResult,
};
use crate::error::{Error, Result};

/// Per-coordinate tolerance for treating two context patterns as equal.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

/// Relative slack allowed when comparing realized error to the bound.
pub const BOUND_RELATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub target_index: usize,
    /// `u z_i − u z_j` for every distinct `z_j`; `None` at duplicates of `z_i`.
    pub delta_all: Vec<Option<f64>>,
    /// `None` when every context pattern equals the target (t = M).
    pub delta_min: Option<f64>,
    /// Multiplicity `t` of the target pattern, itself included.
    pub duplicate_count: usize,
}

impl SeparationReport {
    /// Number of context patterns M.
    pub fn context_size(&self) -> usize {
        self.delta_all.len()
    }
}

fn same_pattern(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= DUPLICATE_TOLERANCE)
}

fn separation_from_patterns(
    u: &DVector<f64>,
    z: &DMatrix<f64>,
    target_index: usize,
) -> Result<SeparationReport> {
    let m = z.ncols();
    if target_index >= m {
        return Err(Error::invalid(format!(
            "target index {target_index} out of range for {m} context patterns"
        )));
    }
    let target = z.column(target_index);
    let target_score = u.dot(&target);
    let mut delta_all = Vec::with_capacity(m);
    let mut t = 0;
    for j in 0..m {
        let zj = z.column(j);
        if same_pattern(target.as_slice(), zj.as_slice()) {
            t += 1;
            delta_all.push(None);
        } else {
            delta_all.push(Some(target_score - u.dot(&zj)));
        }
    }
    let delta_min = delta_all.iter().flatten().copied().reduce(f64::min);
    Ok(SeparationReport {
        target_index,
        delta_all,
        delta_min,
        duplicate_count: t,
    })
}

/// Separation of context pattern `target_index` from all distinct others,
/// as seen by the query pattern.
pub fn separation(
    query: &QueryState,
    ctx: &ContextSet,
    model: &HncModel,
    target_index: usize,
) -> Result<SeparationReport> {
    let z = context_patterns(model, ctx)?;
    if query.u().len() != z.nrows() {
        return Err(Error::dim("query pattern", z.nrows(), query.u().len()));
    }
    separation_from_patterns(query.u(), &z, target_index)
}

/// `‖u_new − u*‖`.
pub fn realized_error(result: &RetrievalResult, u_star: &[f64]) -> Result<f64> {
    if result.u_new.len() != u_star.len() {
        return Err(Error::dim(
            "ground-truth pattern",
            result.u_new.len(),
            u_star.len(),
        ));
    }
    Ok(result
        .u_new
        .iter()
        .zip(u_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// β for separation constant `c`, context size `m` and multiplicity `t`.
///
/// Evaluated as `x / (1 + x) + c(M−t)` with `x = c(M−t)/t`, which equals
/// `1 − (1 + x)⁻¹ + c(M−t)` without the cancellation for tiny `x`.
pub fn beta(c: f64, m: usize, t: usize) -> f64 {
    let distinct = (m - t) as f64;
    let x = c * distinct / t as f64;
    x / (1.0 + x) + c * distinct
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub gamma: f64,
    pub delta_min: Option<f64>,
    /// `‖Δz‖`.
    pub instance_error: f64,
    pub c: f64,
    pub t: usize,
    pub m: usize,
    pub beta: f64,
    pub z_max_norm: f64,
    pub upper_bound: f64,
    /// ε, once paired with a retrieval.
    pub realized_error: Option<f64>,
    pub u_star: Option<Vec<f64>>,
}

pub const BOUND_CSV_HEADER: &str =
    "instance_id,M,t,gamma,delta_min,c,instance_error,beta,z_max_norm,upper_bound,realized_error";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl BoundReport {
    /// `β ‖z_max‖`.
    pub fn contextual_error(&self) -> f64 {
        self.beta * self.z_max_norm
    }

    /// `realized / bound`, or 0 when both vanish.
    pub fn tightness(&self) -> Option<f64> {
        let eps = self.realized_error?;
        Some(if self.upper_bound > 0.0 {
            eps / self.upper_bound
        } else if eps == 0.0 {
            0.0
        } else {
            f64::INFINITY
        })
    }

    pub fn within_bound(&self) -> bool {
        match self.realized_error {
            Some(eps) => {
                eps >= 0.0
                    && eps <= self.upper_bound + BOUND_RELATIVE_TOLERANCE * (1.0 + self.upper_bound)
            }
            None => true,
        }
    }

    pub fn csv_row(&self, instance_id: u64) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            instance_id,
            self.m,
            self.t,
            self.gamma,
            opt(self.delta_min),
            self.c,
            self.instance_error,
            self.beta,
            self.z_max_norm,
            self.upper_bound,
            opt(self.realized_error),
        )
    }
}

/// Closed-form upper bound from a separation report.
pub fn theorem1_bound(
    sep: &SeparationReport,
    gamma: f64,
    instance_error: f64,
    z_max_norm: f64,
) -> Result<BoundReport> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if !(instance_error >= 0.0) || !(z_max_norm >= 0.0) {
        return Err(Error::invalid("norms must be non-negative"));
    }
    let m = sep.context_size();
    let t = sep.duplicate_count;
    if t == 0 {
        return Err(Error::invalid("multiplicity t must be at least 1"));
    }
    if m < t {
        return Err(Error::invalid(format!(
            "context size {m} below multiplicity {t}"
        )));
    }
    // (M - t) multiplies every c-term, so c is irrelevant when it is undefined.
    let c = match sep.delta_min {
        Some(d) if m > t => (-gamma * d).exp(),
        _ => 0.0,
    };
    let b = beta(c, m, t);
    Ok(BoundReport {
        gamma,
        delta_min: sep.delta_min,
        instance_error,
        c,
        t,
        m,
        beta: b,
        z_max_norm,
        upper_bound: instance_error + b * z_max_norm,
        realized_error: None,
        u_star: None,
    })
}

/// Full instance attached to a bound violation.
#[derive(Debug, Clone)]
pub struct BoundViolation {
    pub report: BoundReport,
    pub model: HncModel,
    pub context: ContextSet,
    pub sigma: Vec<f64>,
    pub target_index: usize,
}

impl fmt::Display for BoundViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epsilon={:?} bound={} (M={}, t={}, gamma={}, delta_min={:?}, target={}); instance: {}",
            self.report.realized_error,
            self.report.upper_bound,
            self.report.m,
            self.report.t,
            self.report.gamma,
            self.report.delta_min,
            self.target_index,
            serde_json::json!({
                "model": &self.model,
                "context": &self.context,
                "sigma": &self.sigma,
                "u_star": &self.report.u_star,
            })
        )
    }
}

/// Retrieve, decompose `u* = z_target + Δz`, evaluate the bound and check it.
pub fn verify_bound(
    model: &HncModel,
    ctx: &ContextSet,
    query: &QueryState,
    u_star: &[f64],
    target_index: usize,
) -> Result<BoundReport> {
    let result = hnc_retrieve(model, ctx, query)?;
    let z = context_patterns(model, ctx)?;
    if u_star.len() != z.nrows() {
        return Err(Error::dim("ground-truth pattern", z.nrows(), u_star.len()));
    }
    let sep = separation_from_patterns(query.u(), &z, target_index)?;
    let target = z.column(target_index);
    let instance_error = u_star
        .iter()
        .zip(target.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let z_max_norm = z.column_iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
    let mut report = theorem1_bound(&sep, model.gamma(), instance_error, z_max_norm)?;
    report.realized_error = Some(realized_error(&result, u_star)?);
    report.u_star = Some(u_star.to_vec());
    if !report.within_bound() {
        return Err(Error::BoundViolation(Box::new(BoundViolation {
            report,
            model: model.clone(),
            context: ctx.clone(),
            sigma: query.sigma().as_slice().to_vec(),
            target_index,
        })));
    }
    Ok(report)
}

/// Parameter axis for [`bound_monotonicity_check`]; the others stay at the
/// base report's values.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    C(Vec<f64>),
    M(Vec<usize>),
    T(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: f64,
    pub beta: f64,
    pub bound: f64,
}

/// Re-evaluate β and the bound along one axis. Rows come back sorted by the
/// swept parameter.
pub fn bound_monotonicity_check(base: &BoundReport, sweep: &Sweep) -> Result<Vec<SweepRow>> {
    let row = |c: f64, m: usize, t: usize, p: f64| {
        let b = beta(c, m, t);
        SweepRow {
            parameter: p,
            beta: b,
            bound: base.instance_error + b * base.z_max_norm,
        }
    };
    let mut rows = match sweep {
        Sweep::C(cs) => {
            if cs.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
                return Err(Error::invalid(
                    "c sweep values must be finite and non-negative",
                ));
            }
            if base.t == 0 || base.m < base.t {
                return Err(Error::invalid("base report has M < t"));
            }
            cs.iter()
                .map(|&c| row(c, base.m, base.t, c))
                .collect::<Vec<_>>()
        }
        Sweep::M(ms) => {
            if base.t == 0 || ms.iter().any(|&m| m < base.t) {
                return Err(Error::invalid("M sweep values must be at least t"));
            }
            ms.iter()
                .map(|&m| row(base.c, m, base.t, m as f64))
                .collect()
        }
        Sweep::T(ts) => {
            if ts.iter().any(|&t| t == 0 || t > base.m) {
                return Err(Error::invalid("t sweep values must lie in 1..=M"));
            }
            ts.iter()
                .map(|&t| row(base.c, base.m, t, t as f64))
                .collect()
        }
    };
    if rows.is_empty() {
        return Err(Error::invalid("empty sweep"));
    }
    rows.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    Ok(rows)
}

pub fn is_non_decreasing(rows: &[SweepRow]) -> bool {
    rows.windows(2).all(|w| w[1].beta >= w[0].beta)
}

pub fn is_non_increasing(rows: &[SweepRow]) -> bool {
    rows.windows(2).all(|w| w[1].beta <= w[0].beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sep(m: usize, t: usize, delta_min: Option<f64>) -> SeparationReport {
        let mut delta_all = vec![None; t];
        delta_all.extend(std::iter::repeat_n(delta_min, m - t));
        SeparationReport {
            target_index: 0,
            delta_all,
            delta_min,
            duplicate_count: t,
        }
    }

    #[test]
    fn simple_separation() {
        let model = HncModel::identity(2, 1.0).unwrap();
        let ctx = ContextSet::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let q = QueryState::from_slice(&model, &[1.0, 0.0]).unwrap();
        let s = separation(&q, &ctx, &model, 0).unwrap();
        assert_eq!(s.delta_min, Some(1.0));
        assert_eq!(s.duplicate_count, 1);
        assert!(separation(&q, &ctx, &model, 2).is_err());
    }

    #[test]
    fn all_duplicates_leave_delta_undefined() {
        let model = HncModel::identity(2, 1.0).unwrap();
        let ctx = ContextSet::from_columns(&vec![vec![0.3, 0.7]; 4]).unwrap();
        let q = QueryState::from_slice(&model, &[1.0, 0.0]).unwrap();
        let s = separation(&q, &ctx, &model, 2).unwrap();
        assert_eq!(s.duplicate_count, 4);
        assert_eq!(s.delta_min, None);
        let b = theorem1_bound(&s, 1.0, 0.25, 1.0).unwrap();
        assert_eq!(b.beta, 0.0);
        assert_eq!(b.upper_bound, 0.25);
    }

    #[test]
    fn near_duplicates_beyond_tolerance_are_distinct() {
        let model = HncModel::identity(2, 1.0).unwrap();
        let ctx = ContextSet::from_columns(&[vec![1.0, 0.0], vec![1.0 + 1e-9, 0.0]]).unwrap();
        let q = QueryState::from_slice(&model, &[1.0, 0.0]).unwrap();
        let s = separation(&q, &ctx, &model, 0).unwrap();
        assert_eq!(s.duplicate_count, 1);
    }

    #[test]
    fn realized_error_examples() {
        let r = RetrievalResult {
            u_new: DVector::from_vec(vec![1.0, 0.0]),
            weights: DVector::from_vec(vec![1.0]),
            scores: DVector::from_vec(vec![0.0]),
        };
        assert_eq!(realized_error(&r, &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(realized_error(&r, &[0.0, 0.0]).unwrap(), 1.0);
        assert!(realized_error(&r, &[0.0]).is_err());
    }

    #[test]
    fn bound_example_two_patterns() {
        // beta = 1 - 1/(1 + e^-1) + e^-1
        let b = theorem1_bound(&sep(2, 1, Some(1.0)), 1.0, 0.1, 1.0).unwrap();
        assert!((b.c - 0.367_879_441_171_442_33).abs() < 1e-15);
        assert!((b.beta - 0.636_820_862_541_437_4).abs() < 1e-12);
        assert!((b.upper_bound - 0.736_820_862_541_437_5).abs() < 1e-12);
        assert!((b.upper_bound - b.instance_error - b.contextual_error()).abs() < 1e-15);
    }

    #[test]
    fn exact_retrieval_limit() {
        let b = theorem1_bound(&sep(8, 1, Some(1.0)), 1e4, 0.0, 3.0).unwrap();
        assert_eq!(b.upper_bound, 0.0);
    }

    #[test]
    fn bound_rejects_bad_multiplicity() {
        assert!(theorem1_bound(&sep(3, 0, Some(1.0)), 1.0, 0.0, 1.0).is_err());
        let mut s = sep(3, 1, Some(1.0));
        s.duplicate_count = 4;
        assert!(theorem1_bound(&s, 1.0, 0.0, 1.0).is_err());
        assert!(theorem1_bound(&sep(3, 1, Some(1.0)), 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn c_sweep_values() {
        let base = theorem1_bound(&sep(2, 1, Some(1.0)), 1.0, 0.0, 1.0).unwrap();
        let rows = bound_monotonicity_check(&base, &Sweep::C(vec![1.0, 0.0, 0.5])).unwrap();
        let betas: Vec<f64> = rows.iter().map(|r| r.beta).collect();
        assert_eq!(betas[0], 0.0);
        assert!((betas[1] - 5.0 / 6.0).abs() < 1e-15);
        assert!((betas[2] - 1.5).abs() < 1e-15);
        assert!(is_non_decreasing(&rows));
    }

    #[test]
    fn m_sweep_with_zero_c_is_flat() {
        let base = theorem1_bound(&sep(4, 4, None), 1.0, 0.2, 1.0).unwrap();
        assert_eq!(base.c, 0.0);
        let rows = bound_monotonicity_check(&base, &Sweep::M(vec![4, 8, 16])).unwrap();
        assert!(rows.iter().all(|r| r.beta == 0.0 && r.bound == 0.2));
    }

    #[test]
    fn t_sweep_strictly_decreasing() {
        let mut base = theorem1_bound(&sep(8, 1, Some(1.0)), 1.0, 0.0, 1.0).unwrap();
        base.c = 0.5;
        let rows = bound_monotonicity_check(&base, &Sweep::T(vec![1, 2, 4])).unwrap();
        assert!(rows.windows(2).all(|w| w[1].beta < w[0].beta));
        assert!(bound_monotonicity_check(&base, &Sweep::T(vec![0])).is_err());
        assert!(bound_monotonicity_check(&base, &Sweep::M(vec![0])).is_err());
        assert!(bound_monotonicity_check(&base, &Sweep::C(vec![-1.0])).is_err());
    }

    #[test]
    fn verify_single_pattern() {
        let model = HncModel::identity(3, 2.0).unwrap();
        let ctx = ContextSet::from_columns(&[vec![0.2, 0.4, -1.0]]).unwrap();
        let q = QueryState::from_slice(&model, &[1.0, 0.0, 0.0]).unwrap();
        let r = verify_bound(&model, &ctx, &q, &[0.2, 0.4, -1.0], 0).unwrap();
        assert_eq!(r.realized_error, Some(0.0));
        assert_eq!(r.upper_bound, 0.0);
    }

    #[test]
    fn verify_two_pattern_example() {
        let model = HncModel::identity(2, 1.0).unwrap();
        let ctx = ContextSet::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let q = QueryState::from_slice(&model, &[1.0, 0.0]).unwrap();
        let r = verify_bound(&model, &ctx, &q, &[1.0, 0.0], 0).unwrap();
        let eps = r.realized_error.unwrap();
        assert!((eps - 0.380_340_605_585_344_4).abs() < 1e-12, "{eps}");
        assert!((r.upper_bound - 0.636_820_862_541_437_4).abs() < 1e-12);
        assert_eq!(r.instance_error, 0.0);
    }

    #[test]
    fn csv_row_shape() {
        let b = theorem1_bound(&sep(4, 4, None), 1.0, 0.5, 1.0).unwrap();
        let row = b.csv_row(7);
        assert_eq!(row.split(',').count(), BOUND_CSV_HEADER.split(',').count());
        assert!(row.starts_with("7,4,4,1,,0,0.5,0,1,0.5,"));
    }
}
