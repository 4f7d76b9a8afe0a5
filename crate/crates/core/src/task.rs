//! Synthetic in-context tasks with known latent prototypes, and the score
//! functions used to grade completions.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exemplar::{Exemplar, ExemplarPool};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// `x = p + noise`, `y = p`.
    PrototypeCompletion,
    /// Prototype is `(key ‖ value)`; `x = (key + noise ‖ 0)`, `y = value`.
    KeyValueAssociation,
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prototype-completion" => Ok(Self::PrototypeCompletion),
            "key-value-association" => Ok(Self::KeyValueAssociation),
            other => Err(Error::Config(format!("unknown task kind {other:?}"))),
        }
    }
}

/// Generative law of a synthetic task: a prototype is drawn uniformly, the
/// input carries isotropic Gaussian noise, the target is clean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub d: usize,
    pub prototypes: Vec<Vec<f64>>,
    pub noise_sigma: f64,
    pub seed: u64,
}

fn unit_gaussian<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl TaskSpec {
    /// `count` prototypes drawn uniformly from the unit sphere (key and value
    /// blocks normalized separately for key–value tasks).
    pub fn random(
        kind: TaskKind,
        d: usize,
        count: usize,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = rng::stream(seed);
        let prototypes = (0..count)
            .map(|_| match kind {
                TaskKind::PrototypeCompletion => unit_gaussian(&mut rng, d),
                TaskKind::KeyValueAssociation => {
                    let mut p = unit_gaussian(&mut rng, d);
                    p.extend(unit_gaussian(&mut rng, d));
                    p
                }
            })
            .collect();
        let spec = Self {
            kind,
            d,
            prototypes,
            noise_sigma,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("task dimension must be positive"));
        }
        if self.prototypes.is_empty() {
            return Err(Error::invalid("task needs at least one prototype"));
        }
        let plen = self.prototype_len();
        if let Some(p) = self.prototypes.iter().find(|p| p.len() != plen) {
            return Err(Error::dim("prototype", plen, p.len()));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::invalid(
                "noise_sigma must be finite and non-negative",
            ));
        }
        Ok(())
    }

    fn prototype_len(&self) -> usize {
        match self.kind {
            TaskKind::PrototypeCompletion => self.d,
            TaskKind::KeyValueAssociation => 2 * self.d,
        }
    }

    pub fn x_dim(&self) -> usize {
        self.prototype_len()
    }

    pub fn y_dim(&self) -> usize {
        self.d
    }

    pub fn min_prototype_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, a) in self.prototypes.iter().enumerate() {
            for b in &self.prototypes[i + 1..] {
                let dist = distance(a, b);
                best = Some(best.map_or(dist, |m| m.min(dist)));
            }
        }
        best
    }

    /// Warn when prototypes are not separated by more than four noise widths.
    pub fn separation_warning(&self) -> Option<String> {
        let min = self.min_prototype_distance()?;
        (min <= 4.0 * self.noise_sigma).then(|| {
            format!(
                "prototypes are close: min pairwise distance {min} <= 4 * noise_sigma ({})",
                4.0 * self.noise_sigma
            )
        })
    }

    /// Clean target for prototype `latent`.
    pub fn target(&self, latent: usize) -> Vec<f64> {
        let p = &self.prototypes[latent];
        match self.kind {
            TaskKind::PrototypeCompletion => p.clone(),
            TaskKind::KeyValueAssociation => p[self.d..].to_vec(),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, noise: &Normal<f64>) -> (Vec<f64>, Vec<f64>, usize) {
        let latent = rng.gen_range(0..self.prototypes.len());
        let p = &self.prototypes[latent];
        let x = match self.kind {
            TaskKind::PrototypeCompletion => p.iter().map(|v| v + noise.sample(rng)).collect(),
            TaskKind::KeyValueAssociation => {
                let mut x: Vec<f64> = p[..self.d].iter().map(|v| v + noise.sample(rng)).collect();
                x.resize(2 * self.d, 0.0);
                x
            }
        };
        (x, self.target(latent), latent)
    }
}

/// A test query with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub latent_id: usize,
}

/// Draw `pool_size` training exemplars (ids `0..pool_size`) followed by
/// `query_count` test queries, i.i.d. from the task's law.
pub fn generate_pool(
    spec: &TaskSpec,
    pool_size: usize,
    query_count: usize,
    seed: u64,
) -> Result<(ExemplarPool, Vec<QuerySample>)> {
    spec.validate()?;
    if pool_size < 2 {
        return Err(Error::invalid("pool size must be at least 2"));
    }
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
    let mut rng = rng::stream(seed);
    let exemplars = (0..pool_size)
        .map(|i| {
            let (x, y, latent) = spec.draw(&mut rng, &noise);
            Exemplar {
                id: i as u64,
                x,
                y,
                latent_id: Some(latent),
            }
        })
        .collect();
    let queries = (0..query_count)
        .map(|_| {
            let (x, y, latent_id) = spec.draw(&mut rng, &noise);
            QuerySample { x, y, latent_id }
        })
        .collect();
    Ok((ExemplarPool::new(exemplars)?, queries))
}

/// Task score `s(ŷ, y)`; higher is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreFunction {
    /// `(1 + cos(ŷ, y)) / 2`, in `[0, 1]`.
    #[default]
    CosineScore,
    /// 1 when every coordinate agrees to [`EXACT_MATCH_TOLERANCE`], else 0.
    ExactMatch,
    /// `−‖ŷ − y‖`.
    NegativeError,
}

pub const EXACT_MATCH_TOLERANCE: f64 = 1e-6;

impl std::str::FromStr for ScoreFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine-score" => Ok(Self::CosineScore),
            "exact-match" => Ok(Self::ExactMatch),
            "negative-error" => Ok(Self::NegativeError),
            other => Err(Error::Config(format!("unknown score function {other:?}"))),
        }
    }
}

pub fn score(f: ScoreFunction, y_hat: &[f64], y: &[f64]) -> Result<f64> {
    if y_hat.len() != y.len() {
        return Err(Error::dim("prediction", y.len(), y_hat.len()));
    }
    if y_hat.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Score("non-finite prediction or target".into()));
    }
    match f {
        ScoreFunction::CosineScore => {
            let na = y_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                return Err(Error::Score("cosine of a zero vector".into()));
            }
            let dot: f64 = y_hat.iter().zip(y).map(|(a, b)| a * b).sum();
            let cos = (dot / (na * nb)).clamp(-1.0, 1.0);
            Ok((1.0 + cos) / 2.0)
        }
        ScoreFunction::ExactMatch => Ok(
            if y_hat
                .iter()
                .zip(y)
                .all(|(a, b)| (a - b).abs() <= EXACT_MATCH_TOLERANCE)
            {
                1.0
            } else {
                0.0
            },
        ),
        ScoreFunction::NegativeError => Ok(-distance(y_hat, y)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_examples() {
        let y = [0.3, -0.4];
        assert_eq!(score(ScoreFunction::ExactMatch, &y, &y).unwrap(), 1.0);
        assert_eq!(
            score(ScoreFunction::ExactMatch, &[0.3, 0.4], &y).unwrap(),
            0.0
        );
        assert_eq!(
            score(ScoreFunction::CosineScore, &[-0.3, 0.4], &y).unwrap(),
            0.0
        );
        assert!((score(ScoreFunction::CosineScore, &y, &y).unwrap() - 1.0).abs() < 1e-15);
        let ne = score(ScoreFunction::NegativeError, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((ne + std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn score_errors() {
        assert!(score(ScoreFunction::CosineScore, &[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(score(ScoreFunction::NegativeError, &[0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn noiseless_single_prototype() {
        let spec = TaskSpec::random(TaskKind::PrototypeCompletion, 4, 1, 0.0, 5).unwrap();
        let (pool, queries) = generate_pool(&spec, 10, 5, 1).unwrap();
        for e in &pool {
            assert_eq!(e.x, spec.prototypes[0]);
            assert_eq!(e.y, spec.prototypes[0]);
        }
        assert!(queries.iter().all(|q| q.x == spec.prototypes[0]));
    }

    #[test]
    fn key_value_layout() {
        let spec = TaskSpec::random(TaskKind::KeyValueAssociation, 3, 2, 0.0, 5).unwrap();
        let (pool, _) = generate_pool(&spec, 4, 0, 2).unwrap();
        let e = pool.get(0).unwrap();
        let p = &spec.prototypes[e.latent_id.unwrap()];
        assert_eq!(e.x.len(), 6);
        assert_eq!(&e.x[..3], &p[..3]);
        assert_eq!(&e.x[3..], &[0.0; 3]);
        assert_eq!(e.y, p[3..].to_vec());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = TaskSpec::random(TaskKind::PrototypeCompletion, 8, 3, 0.1, 9).unwrap();
        let a = generate_pool(&spec, 50, 10, 4).unwrap();
        let b = generate_pool(&spec, 50, 10, 4).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = TaskSpec::random(TaskKind::PrototypeCompletion, 2, 2, 0.1, 1).unwrap();
        assert!(generate_pool(&spec, 1, 0, 0).is_err());
        spec.noise_sigma = -1.0;
        assert!(spec.validate().is_err());
        spec.noise_sigma = 0.1;
        spec.prototypes.push(vec![1.0]);
        assert!(spec.validate().is_err());
        assert!(TaskSpec::random(TaskKind::PrototypeCompletion, 2, 0, 0.1, 1).is_err());
    }

    #[test]
    fn close_prototypes_warn() {
        let spec = TaskSpec {
            kind: TaskKind::PrototypeCompletion,
            d: 2,
            prototypes: vec![vec![1.0, 0.0], vec![1.0, 0.1]],
            noise_sigma: 0.05,
            seed: 0,
        };
        assert!(spec.separation_warning().is_some());
    }
}
