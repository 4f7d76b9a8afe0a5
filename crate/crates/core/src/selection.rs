//! Choosing K in-context exemplars from a labeled pool.
//!
//! Strategies: uniform random (the baseline), nearest-by-metric, active
//! selection by Monte-Carlo value, and the evaluation-only instance-best
//! ranking that peeks at the query's ground truth.
//!
//! Ties are always broken by ascending exemplar id.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exemplar::{Exemplar, ExemplarPool};
use crate::oracle::CompletionOracle;
use crate::rng;
use crate::task::{score, ScoreFunction};

/// Probe budget used when none is configured.
pub const DEFAULT_SUBSAMPLE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Random,
    Metric,
    Active,
    #[serde(rename = "instance-best")]
    InstanceBest,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Metric => "metric",
            Strategy::Active => "active",
            Strategy::InstanceBest => "instance-best",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Strategy::Random),
            "metric" => Ok(Strategy::Metric),
            "active" => Ok(Strategy::Active),
            "instance-best" | "oracle-instance-best" => Ok(Strategy::InstanceBest),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Cosine,
    #[default]
    Euclidean,
}

/// How many probe samples back a value estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subsample {
    All,
    Count(usize),
}

impl Default for Subsample {
    fn default() -> Self {
        Subsample::Count(DEFAULT_SUBSAMPLE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub exemplar_id: u64,
    pub value: f64,
    pub sample_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    /// Probe terms whose score was undefined and counted as 0.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub failures: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Diagnostics {
    Seed { seed: u64 },
    MetricScores { scores: Vec<(u64, f64)> },
    Values { values: Vec<ValueEstimate> },
    InstanceScores { scores: Vec<(u64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen: Vec<u64>,
    pub strategy: Strategy,
    pub diagnostics: Diagnostics,
}

impl SelectionResult {
    /// Chosen exemplars in context order.
    pub fn exemplars<'a>(&self, pool: &'a ExemplarPool) -> Vec<&'a Exemplar> {
        self.chosen
            .iter()
            .map(|id| pool.by_id(*id).expect("selected id comes from the pool"))
            .collect()
    }
}

fn check_k(pool: &ExemplarPool, k: usize) -> Result<()> {
    if k == 0 || k > pool.len() {
        return Err(Error::invalid(format!(
            "k = {k} outside 1..={} for this pool",
            pool.len()
        )));
    }
    Ok(())
}

/// Descending score, then ascending id.
fn rank_desc(scored: &mut [(u64, f64)]) {
    scored.sort_by(|a, b| match b.1.total_cmp(&a.1) {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
}

/// `k` distinct exemplars drawn uniformly without replacement by a
/// Fisher–Yates prefix on the seeded stream, returned in pool order.
pub fn random_select(pool: &ExemplarPool, k: usize, seed: u64) -> Result<SelectionResult> {
    check_k(pool, k)?;
    let mut stream = rng::stream(seed);
    let mut picked = rng::fisher_yates_prefix(&mut stream, pool.len(), k);
    picked.sort_unstable();
    Ok(SelectionResult {
        chosen: picked.into_iter().map(|i| pool.exemplars()[i].id).collect(),
        strategy: Strategy::Random,
        diagnostics: Diagnostics::Seed { seed },
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// The `k` exemplars whose `x` is closest to `query_x`, closest first.
pub fn metric_select(
    pool: &ExemplarPool,
    k: usize,
    query_x: &[f64],
    metric: Metric,
) -> Result<SelectionResult> {
    check_k(pool, k)?;
    if query_x.len() != pool.x_dim() {
        return Err(Error::dim("query x", pool.x_dim(), query_x.len()));
    }
    let qn = norm(query_x);
    if metric == Metric::Cosine && qn == 0.0 {
        return Err(Error::invalid("zero query vector under cosine metric"));
    }
    let mut scored = pool
        .iter()
        .map(|e| {
            let closeness = match metric {
                Metric::Euclidean => {
                    -e.x.iter()
                        .zip(query_x)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                }
                Metric::Cosine => {
                    let en = norm(&e.x);
                    if en == 0.0 {
                        return Err(Error::invalid(format!(
                            "exemplar {} has a zero x under cosine metric",
                            e.id
                        )));
                    }
                    e.x.iter().zip(query_x).map(|(a, b)| a * b).sum::<f64>() / (en * qn)
                }
            };
            Ok((e.id, closeness))
        })
        .collect::<Result<Vec<_>>>()?;
    rank_desc(&mut scored);
    scored.truncate(k);
    Ok(SelectionResult {
        chosen: scored.iter().map(|s| s.0).collect(),
        strategy: Strategy::Metric,
        diagnostics: Diagnostics::MetricScores { scores: scored },
    })
}

/// Pool positions probed when valuing the exemplar at `exclude`.
///
/// For `Count(n)` the seeded stream shuffles a prefix of `n + 1` positions;
/// dropping `exclude` and keeping `n` leaves a uniform `n`-subset of the
/// other exemplars. The prefix depends only on the seed, so every exemplar
/// valued under the same seed shares the same probe set, minus itself.
fn probe_positions(
    pool_len: usize,
    exclude: Option<usize>,
    subsample: Subsample,
    seed: u64,
) -> Result<Vec<usize>> {
    let others = pool_len - usize::from(exclude.is_some());
    match subsample {
        Subsample::All => Ok((0..pool_len).filter(|&j| Some(j) != exclude).collect()),
        Subsample::Count(n) => {
            if n == 0 || n > others {
                return Err(Error::invalid(format!(
                    "subsample {n} outside 1..={others}"
                )));
            }
            let mut stream = rng::stream(seed);
            let prefix = rng::fisher_yates_prefix(&mut stream, pool_len, (n + 1).min(pool_len));
            Ok(prefix
                .into_iter()
                .filter(|&j| Some(j) != exclude)
                .take(n)
                .collect())
        }
    }
}

/// Monte-Carlo value of `e` as a one-shot context:
/// the mean of `s(F(e, x_j), y_j)` over probe exemplars `j ≠ e`.
pub fn value_estimate(
    e: &Exemplar,
    pool: &ExemplarPool,
    oracle: &dyn CompletionOracle,
    score_fn: ScoreFunction,
    subsample: Subsample,
    seed: u64,
) -> Result<ValueEstimate> {
    if pool.len() < 2 {
        return Err(Error::invalid(
            "value estimation needs a pool of at least 2",
        ));
    }
    let probes = probe_positions(pool.len(), pool.position(e.id), subsample, seed)?;
    let mut scores = Vec::with_capacity(probes.len());
    let mut failures = 0;
    for j in probes {
        let probe = &pool.exemplars()[j];
        let y_hat = oracle
            .predict(&[e], &probe.x)
            .map_err(|err| Error::Oracle {
                exemplar_id: Some(e.id),
                sample_id: Some(probe.id),
                message: err.to_string(),
            })?;
        match score(score_fn, &y_hat, &probe.y) {
            Ok(s) => scores.push(s),
            Err(_) => {
                failures += 1;
                scores.push(0.0);
            }
        }
    }
    let value = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(ValueEstimate {
        exemplar_id: e.id,
        value,
        sample_count: scores.len(),
        scores: Some(scores),
        failures,
    })
}

/// Value estimates for every pool member, in pool order.
pub fn pool_values(
    pool: &ExemplarPool,
    oracle: &dyn CompletionOracle,
    score_fn: ScoreFunction,
    subsample: Subsample,
    seed: u64,
) -> Result<Vec<ValueEstimate>> {
    let one = |e: &Exemplar| {
        value_estimate(e, pool, oracle, score_fn, subsample, seed).map(|mut v| {
            v.scores = None;
            v
        })
    };
    if oracle.supports_concurrency() {
        pool.exemplars().par_iter().map(one).collect()
    } else {
        pool.iter().map(one).collect()
    }
}

/// Ids of the `k` highest values, highest first.
pub fn top_k_by_value(values: &[ValueEstimate], k: usize) -> Vec<u64> {
    let mut scored: Vec<(u64, f64)> = values.iter().map(|v| (v.exemplar_id, v.value)).collect();
    rank_desc(&mut scored);
    scored.into_iter().take(k).map(|s| s.0).collect()
}

/// Active exemplar selection: value every pool member against one shared
/// probe set and keep the top `k`.
pub fn active_select(
    pool: &ExemplarPool,
    k: usize,
    oracle: &dyn CompletionOracle,
    score_fn: ScoreFunction,
    subsample: Subsample,
    seed: u64,
) -> Result<SelectionResult> {
    check_k(pool, k)?;
    let values = pool_values(pool, oracle, score_fn, subsample, seed)?;
    Ok(SelectionResult {
        chosen: top_k_by_value(&values, k),
        strategy: Strategy::Active,
        diagnostics: Diagnostics::Values { values },
    })
}

/// Rank every exemplar by its score as the sole context for this query.
/// Undefined scores rank last.
pub fn instance_best_select(
    pool: &ExemplarPool,
    query: (&[f64], &[f64]),
    k: usize,
    oracle: &dyn CompletionOracle,
    score_fn: ScoreFunction,
) -> Result<SelectionResult> {
    check_k(pool, k)?;
    let (x, y) = query;
    let mut scored = pool
        .iter()
        .map(|e| {
            let y_hat = oracle.predict(&[e], x).map_err(|err| Error::Oracle {
                exemplar_id: Some(e.id),
                sample_id: None,
                message: err.to_string(),
            })?;
            Ok((
                e.id,
                score(score_fn, &y_hat, y).unwrap_or(f64::NEG_INFINITY),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    rank_desc(&mut scored);
    scored.truncate(k);
    Ok(SelectionResult {
        chosen: scored.iter().map(|s| s.0).collect(),
        strategy: Strategy::InstanceBest,
        diagnostics: Diagnostics::InstanceScores { scores: scored },
    })
}

/// Most frequent pattern under tolerance clustering.
///
/// Each pattern joins the first cluster whose representative (its first
/// member) agrees coordinate-wise within `tolerance`. Ties go to the cluster
/// that appeared first.
pub fn mode_pattern(patterns: &[Vec<f64>], tolerance: f64) -> Result<(Vec<f64>, usize)> {
    if patterns.is_empty() {
        return Err(Error::invalid("mode of an empty pattern list"));
    }
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    for (i, p) in patterns.iter().enumerate() {
        let rep = clusters.iter_mut().find(|(r, _)| {
            let q = &patterns[*r];
            q.len() == p.len() && q.iter().zip(p).all(|(a, b)| (a - b).abs() <= tolerance)
        });
        match rep {
            Some((_, count)) => *count += 1,
            None => clusters.push((i, 1)),
        }
    }
    let mut best = clusters[0];
    for &c in &clusters[1..] {
        if c.1 > best.1 {
            best = c;
        }
    }
    Ok((patterns[best.0].clone(), best.1))
}
