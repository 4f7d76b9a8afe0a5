use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OracleKind};
use super::instances::{random_instance, InstanceShape};
use super::stats;
use crate::bounds::{verify_bound, BoundReport, BOUND_CSV_HEADER};
use crate::error::{Error, Result};
use crate::exemplar::{Exemplar, ExemplarPool};
use crate::oracle::{CompletionOracle, HncOracle, RemoteConfig, RemoteOracle};
use crate::rng::derive_seed;
use crate::selection::{
    instance_best_select, metric_select, pool_values, random_select, top_k_by_value, Strategy,
};
use crate::task::{generate_pool, score, QuerySample, ScoreFunction, TaskSpec};

pub const BOUND_SWEEP_CSV_VERSION: &str = "# hnc-icl bound-sweep csv v1";
pub const K_STUDY_CSV_VERSION: &str = "# hnc-icl k-study csv v1";
pub const COMPARE_CSV_VERSION: &str = "# hnc-icl compare csv v1";

const TAG_TASK: u64 = 1;
const TAG_POOL: u64 = 2;
const TAG_TRIALS: u64 = 3;
const TAG_SWEEP: u64 = 4;
const TAG_ACTIVE: u64 = u64::MAX;

#[derive(Debug, Clone)]
pub struct BoundSweep {
    /// `(instance_id, report)` in grid order.
    pub rows: Vec<(u64, BoundReport)>,
    /// Largest `ε / bound` over the sweep.
    pub max_ratio: f64,
}

impl BoundSweep {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{BOUND_SWEEP_CSV_VERSION}\n{BOUND_CSV_HEADER}\n");
        for (id, r) in &self.rows {
            out.push_str(&r.csv_row(*id));
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "instances={} violations=0 max_ratio={}",
            self.rows.len(),
            self.max_ratio
        )
    }
}

/// One bound report per grid point and instance. A bound violation aborts
/// the sweep with the offending instance attached.
pub fn run_bound_sweep(config: &ExperimentConfig) -> Result<BoundSweep> {
    let s = &config.sweep;
    let root = derive_seed(config.seed, TAG_SWEEP);
    let mut jobs = Vec::new();
    for &gamma in &s.gamma {
        for &m in &s.m {
            for &f in &s.dup_fraction {
                for _ in 0..s.instances {
                    jobs.push((jobs.len() as u64, gamma, m, f));
                }
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(id, gamma, m, f)| {
            let seed = derive_seed(root, id);
            let mut r = crate::rng::stream(seed);
            use rand::Rng;
            let shape = InstanceShape {
                d_m: r.gen_range(2..=8),
                d_q: r.gen_range(2..=8),
                m,
                t: InstanceShape::multiplicity(m, f),
                gamma,
                delta_z_norm: r.gen_range(0.0..=s.delta_z_scale),
            };
            let inst = random_instance(derive_seed(seed, 0), shape)?;
            let report = verify_bound(
                &inst.model,
                &inst.context,
                &inst.query,
                &inst.u_star,
                inst.target_index,
            )?;
            Ok((id, report))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = rows
        .iter()
        .filter_map(|(_, r)| r.tightness())
        .fold(0.0, f64::max);
    Ok(BoundSweep { rows, max_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub trial_seed: u64,
    pub strategy: Strategy,
    pub k: usize,
    pub mean_score: f64,
    pub per_query_scores: Vec<f64>,
    /// Wall time; kept out of the CSV so output bytes stay reproducible.
    #[serde(skip)]
    pub runtime_ms: u64,
}

const TRIAL_CSV_HEADER: &str = "trial,trial_seed,strategy,k,mean_score,per_query_scores";

fn trial_csv(version: &str, records: &[TrialRecord]) -> String {
    let mut out = format!("{version}\n{TRIAL_CSV_HEADER}\n");
    for r in records {
        let scores: Vec<String> = r.per_query_scores.iter().map(f64::to_string).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.trial,
            r.trial_seed,
            r.strategy,
            r.k,
            r.mean_score,
            scores.join(";")
        );
    }
    out
}

pub fn build_oracle(
    config: &ExperimentConfig,
    task: &TaskSpec,
) -> Result<Box<dyn CompletionOracle>> {
    match config.oracle.kind {
        OracleKind::Builtin => Ok(Box::new(HncOracle::identity(
            task.x_dim(),
            task.y_dim(),
            config.oracle.gamma,
        )?)),
        OracleKind::Remote => {
            let endpoint = config
                .oracle
                .endpoint
                .clone()
                .ok_or_else(|| Error::Config("oracle.endpoint missing".into()))?;
            Ok(Box::new(RemoteOracle::new(RemoteConfig {
                endpoint,
                timeout_ms: config.oracle.timeout_ms,
                max_retries: config.oracle.max_retries,
                supports_concurrency: config.oracle.supports_concurrency,
                y_dim: Some(task.y_dim()),
            })?))
        }
    }
}

/// Task, pool and queries shared by every trial of a run.
struct Bench {
    task: TaskSpec,
    pool: ExemplarPool,
    queries: Vec<QuerySample>,
    oracle: Box<dyn CompletionOracle>,
    score: ScoreFunction,
}

impl Bench {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        let t = &config.task;
        let task = TaskSpec::random(
            t.kind,
            t.d,
            t.prototypes,
            t.noise_sigma,
            derive_seed(config.seed, TAG_TASK),
        )?;
        let (pool, queries) = generate_pool(
            &task,
            config.pool.size,
            config.queries.size,
            derive_seed(config.seed, TAG_POOL),
        )?;
        let oracle = build_oracle(config, &task)?;
        Ok(Self {
            task,
            pool,
            queries,
            oracle,
            score: config.score,
        })
    }

    /// Undefined scores (e.g. a zero prediction under cosine) count as 0.
    fn score_one(&self, context: &[&Exemplar], q: &QuerySample) -> Result<f64> {
        let y_hat = self.oracle.predict(context, &q.x)?;
        Ok(score(self.score, &y_hat, &q.y).unwrap_or(0.0))
    }

    fn score_fixed(&self, context: &[&Exemplar]) -> Result<Vec<f64>> {
        self.queries
            .iter()
            .map(|q| self.score_one(context, q))
            .collect()
    }

    /// Per-query instance-best ranking (ids, best first). Depends only on the
    /// pool and the query, so it is computed once per run.
    fn instance_rankings(&self, k_max: usize) -> Result<Vec<Vec<u64>>> {
        self.queries
            .iter()
            .map(|q| {
                instance_best_select(
                    &self.pool,
                    (&q.x, &q.y),
                    k_max,
                    self.oracle.as_ref(),
                    self.score,
                )
                .map(|r| r.chosen)
            })
            .collect()
    }

    fn ids_to_context(&self, ids: &[u64]) -> Vec<&Exemplar> {
        ids.iter()
            .map(|id| self.pool.by_id(*id).expect("id from pool"))
            .collect()
    }

    fn run_trial(
        &self,
        config: &ExperimentConfig,
        trial: usize,
        rankings: Option<&[Vec<u64>]>,
    ) -> Result<Vec<TrialRecord>> {
        let trial_seed = derive_seed(derive_seed(config.seed, TAG_TRIALS), trial as u64);
        let mut out = Vec::new();
        for &strategy in &config.strategies {
            let values = match strategy {
                Strategy::Active => Some(pool_values(
                    &self.pool,
                    self.oracle.as_ref(),
                    self.score,
                    config.subsample(),
                    derive_seed(trial_seed, TAG_ACTIVE),
                )?),
                _ => None,
            };
            for &k in &config.k_values {
                let started = Instant::now();
                let scores = match strategy {
                    Strategy::Random => {
                        let sel = random_select(&self.pool, k, derive_seed(trial_seed, k as u64))?;
                        self.score_fixed(&sel.exemplars(&self.pool))?
                    }
                    Strategy::Active => {
                        let ids = top_k_by_value(values.as_deref().expect("values"), k);
                        self.score_fixed(&self.ids_to_context(&ids))?
                    }
                    Strategy::Metric => self
                        .queries
                        .iter()
                        .map(|q| {
                            let sel = metric_select(&self.pool, k, &q.x, config.metric)?;
                            self.score_one(&sel.exemplars(&self.pool), q)
                        })
                        .collect::<Result<Vec<_>>>()?,
                    Strategy::InstanceBest => {
                        let rankings = rankings.expect("rankings computed");
                        self.queries
                            .iter()
                            .zip(rankings)
                            .map(|(q, ranked)| {
                                self.score_one(&self.ids_to_context(&ranked[..k]), q)
                            })
                            .collect::<Result<Vec<_>>>()?
                    }
                };
                out.push(TrialRecord {
                    trial,
                    trial_seed,
                    strategy,
                    k,
                    mean_score: stats::mean(&scores),
                    per_query_scores: scores,
                    runtime_ms: started.elapsed().as_millis() as u64,
                });
            }
        }
        Ok(out)
    }

    fn run_trials(&self, config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
        let rankings = if config.strategies.contains(&Strategy::InstanceBest) {
            Some(self.instance_rankings(*config.k_values.last().expect("validated"))?)
        } else {
            None
        };
        let rankings = rankings.as_deref();
        let per_trial: Vec<Vec<TrialRecord>> = if self.oracle.supports_concurrency() {
            (0..config.trials)
                .into_par_iter()
                .map(|t| self.run_trial(config, t, rankings))
                .collect::<Result<_>>()?
        } else {
            (0..config.trials)
                .map(|t| self.run_trial(config, t, rankings))
                .collect::<Result<_>>()?
        };
        Ok(per_trial.into_iter().flatten().collect())
    }
}

#[derive(Debug, Clone)]
pub struct KStudy {
    pub task: TaskSpec,
    pub records: Vec<TrialRecord>,
}

impl KStudy {
    pub fn to_csv(&self) -> String {
        trial_csv(K_STUDY_CSV_VERSION, &self.records)
    }

    /// Trial means for one `(strategy, k)` cell, in trial order.
    pub fn means(&self, strategy: Strategy, k: usize) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.strategy == strategy && r.k == k)
            .map(|r| r.mean_score)
            .collect()
    }
}

/// Fresh selection and evaluation for every `(trial, strategy, k)`.
/// Instance-best re-selects per query.
pub fn run_k_study(config: &ExperimentConfig) -> Result<KStudy> {
    config.validate()?;
    let bench = Bench::new(config)?;
    let records = bench.run_trials(config)?;
    Ok(KStudy {
        task: bench.task,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: Strategy,
    pub k: usize,
    pub mean: f64,
    pub std: f64,
    /// Fraction of trials whose mean beats random's in the same trial.
    pub win_rate_vs_random: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<ComparisonRow>,
}

const SUMMARY_CSV_HEADER: &str = "strategy,k,mean,std,win_rate_vs_random";

impl Comparison {
    /// Per-trial records followed by the summary table.
    pub fn to_csv(&self) -> String {
        let mut out = trial_csv(COMPARE_CSV_VERSION, &self.records);
        let _ = writeln!(out, "# summary\n{SUMMARY_CSV_HEADER}");
        for r in &self.summary {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.strategy,
                r.k,
                r.mean,
                r.std,
                r.win_rate_vs_random
                    .map(|w| w.to_string())
                    .unwrap_or_default()
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }
}

pub fn run_strategy_comparison(config: &ExperimentConfig) -> Result<Comparison> {
    config.validate()?;
    let bench = Bench::new(config)?;
    let records = bench.run_trials(config)?;
    let mut cells: HashMap<(Strategy, usize), Vec<f64>> = HashMap::new();
    for r in &records {
        cells
            .entry((r.strategy, r.k))
            .or_default()
            .push(r.mean_score);
    }
    let mut summary = Vec::new();
    for &strategy in &config.strategies {
        for &k in &config.k_values {
            let means = &cells[&(strategy, k)];
            let win_rate_vs_random = cells.get(&(Strategy::Random, k)).map(|random| {
                let wins = means.iter().zip(random).filter(|(a, b)| a > b).count();
                wins as f64 / means.len() as f64
            });
            summary.push(ComparisonRow {
                strategy,
                k,
                mean: stats::mean(means),
                std: stats::std_dev(means),
                win_rate_vs_random,
            });
        }
    }
    Ok(Comparison { records, summary })
}
