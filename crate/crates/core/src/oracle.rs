//! Completion oracles: the predictor `F(e_1..e_K, x) → ŷ` that exemplar
//! selection and evaluation score against ground truth.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::associative::{hnc_retrieve, ContextSet, HncModel, QueryState};
use crate::error::{Error, Result};
use crate::exemplar::Exemplar;

pub trait CompletionOracle: Send + Sync {
    fn name(&self) -> &str;

    /// Whether `predict` may be called from several threads at once.
    fn supports_concurrency(&self) -> bool;

    fn predict(&self, context: &[&Exemplar], x: &[f64]) -> Result<Vec<f64>>;
}

/// Built-in oracle: associative completion with an HN-C.
///
/// Context columns are `(x ‖ y)`, the query is `(x ‖ 0)`, and the prediction
/// is the y-block of `u_new`. An empty context predicts the zero vector.
#[derive(Debug, Clone)]
pub struct HncOracle {
    model: HncModel,
    x_dim: usize,
    y_dim: usize,
}

impl HncOracle {
    pub fn new(model: HncModel, x_dim: usize, y_dim: usize) -> Result<Self> {
        let d = x_dim + y_dim;
        if model.d_m() != d {
            return Err(Error::dim("oracle embedding", d, model.d_m()));
        }
        if model.d_q() != d {
            return Err(Error::dim("oracle pattern space", d, model.d_q()));
        }
        Ok(Self {
            model,
            x_dim,
            y_dim,
        })
    }

    /// `ξ_Q = ξ_K = I`.
    pub fn identity(x_dim: usize, y_dim: usize, gamma: f64) -> Result<Self> {
        Self::new(HncModel::identity(x_dim + y_dim, gamma)?, x_dim, y_dim)
    }

    pub fn model(&self) -> &HncModel {
        &self.model
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn y_dim(&self) -> usize {
        self.y_dim
    }
}

impl CompletionOracle for HncOracle {
    fn name(&self) -> &str {
        "hnc"
    }

    fn supports_concurrency(&self) -> bool {
        true
    }

    fn predict(&self, context: &[&Exemplar], x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.x_dim {
            return Err(Error::dim("query x", self.x_dim, x.len()));
        }
        if context.is_empty() {
            return Ok(vec![0.0; self.y_dim]);
        }
        let d = self.x_dim + self.y_dim;
        for e in context {
            if e.x.len() != self.x_dim {
                return Err(Error::dim("exemplar x", self.x_dim, e.x.len()));
            }
            if e.y.len() != self.y_dim {
                return Err(Error::dim("exemplar y", self.y_dim, e.y.len()));
            }
        }
        let lambda = DMatrix::from_fn(d, context.len(), |i, j| {
            let e = context[j];
            if i < self.x_dim {
                e.x[i]
            } else {
                e.y[i - self.x_dim]
            }
        });
        let ctx = ContextSet::new(lambda)?;
        let mut sigma = DVector::zeros(d);
        sigma.rows_mut(0, self.x_dim).copy_from_slice(x);
        let query = QueryState::new(&self.model, sigma)?;
        let r = hnc_retrieve(&self.model, &ctx, &query)?;
        Ok(r.u_new.as_slice()[self.x_dim..].to_vec())
    }
}

/// Endpoint settings for [`RemoteOracle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub supports_concurrency: bool,
    /// Expected prediction length; checked when set.
    #[serde(default)]
    pub y_dim: Option<usize>,
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_max_retries() -> u32 {
    2
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            supports_concurrency: false,
            y_dim: None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WireExemplar {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Request body: `{"exemplars":[{"x":[..],"y":[..]},..],"query":[..]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct WireRequest {
    pub exemplars: Vec<WireExemplar>,
    pub query: Vec<f64>,
}

/// Response body: `{"prediction":[..]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct WireResponse {
    pub prediction: Vec<f64>,
}

pub const REQUEST_ID_HEADER: &str = "x-request-id";

/// HTTP adapter for an external completion service.
///
/// One POST per `predict`. Transport errors are retried up to `max_retries`
/// times; non-2xx statuses and schema violations fail immediately. When the
/// endpoint does not support concurrency, requests are serialized.
pub struct RemoteOracle {
    config: RemoteConfig,
    agent: ureq::Agent,
    next_request: AtomicU64,
    gate: Mutex<()>,
}

impl RemoteOracle {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        if config.endpoint.is_empty() {
            return Err(Error::Config("remote oracle endpoint is empty".into()));
        }
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        Ok(Self {
            config,
            agent,
            next_request: AtomicU64::new(0),
            gate: Mutex::new(()),
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn failure(request_id: u64, message: impl std::fmt::Display) -> Error {
        Error::Oracle {
            exemplar_id: None,
            sample_id: None,
            message: format!("request {request_id}: {message}"),
        }
    }

    fn send(&self, request_id: u64, body: &WireRequest) -> Result<Vec<f64>> {
        let mut attempt = 0;
        let response = loop {
            let sent = self
                .agent
                .post(&self.config.endpoint)
                .set(REQUEST_ID_HEADER, &request_id.to_string())
                .send_json(body);
            match sent {
                Ok(r) => break r,
                Err(ureq::Error::Status(code, _)) => {
                    return Err(Self::failure(request_id, format!("status {code}")));
                }
                Err(ureq::Error::Transport(t)) => {
                    if attempt >= self.config.max_retries {
                        return Err(Self::failure(
                            request_id,
                            format!("transport error after {} attempts: {t}", attempt + 1),
                        ));
                    }
                    attempt += 1;
                }
            }
        };
        let text = response
            .into_string()
            .map_err(|e| Self::failure(request_id, format!("reading body: {e}")))?;
        let parsed: WireResponse = serde_json::from_str(&text)
            .map_err(|e| Self::failure(request_id, format!("malformed response: {e}")))?;
        if parsed.prediction.iter().any(|v| !v.is_finite()) {
            return Err(Self::failure(request_id, "non-finite prediction"));
        }
        if let Some(d) = self.config.y_dim {
            if parsed.prediction.len() != d {
                return Err(Self::failure(
                    request_id,
                    format!("prediction length {} != {d}", parsed.prediction.len()),
                ));
            }
        }
        Ok(parsed.prediction)
    }
}

impl CompletionOracle for RemoteOracle {
    fn name(&self) -> &str {
        "remote"
    }

    fn supports_concurrency(&self) -> bool {
        self.config.supports_concurrency
    }

    fn predict(&self, context: &[&Exemplar], x: &[f64]) -> Result<Vec<f64>> {
        let request_id = self.next_request.fetch_add(1, Ordering::Relaxed);
        let body = WireRequest {
            exemplars: context
                .iter()
                .map(|e| WireExemplar {
                    x: e.x.clone(),
                    y: e.y.clone(),
                })
                .collect(),
            query: x.to_vec(),
        };
        if self.config.supports_concurrency {
            self.send(request_id, &body)
        } else {
            let _guard = self.gate.lock().unwrap_or_else(|p| p.into_inner());
            self.send(request_id, &body)
        }
    }
}
