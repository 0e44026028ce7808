//! Drives synthetic student cohorts through the real HTTP API.
//!
//! Answer streams come from a seeded ChaCha8 generator, so the same spec
//! always produces the same answers.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::api::StatusView;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnswerModel {
    /// Each answer drawn uniformly from 1..=5.
    Uniform,
    /// Every answer equals k.
    AllK(u8),
}

impl fmt::Display for AnswerModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerModel::Uniform => f.write_str("uniform"),
            AnswerModel::AllK(k) => write!(f, "all_{k}"),
        }
    }
}

impl FromStr for AnswerModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "uniform" {
            return Ok(AnswerModel::Uniform);
        }
        match s.strip_prefix("all_").and_then(|k| k.parse::<u8>().ok()) {
            Some(k @ 1..=5) => Ok(AnswerModel::AllK(k)),
            _ => Err(format!("answer model must be `uniform` or `all_1` … `all_5`, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub seed: u64,
    pub cohort_size: usize,
    pub answer_model: AnswerModel,
}

/// The raw answers each simulated student will give, in submission order.
pub fn answer_streams(spec: &SimulationSpec, item_count: usize) -> Vec<Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.cohort_size)
        .map(|_| {
            (0..item_count)
                .map(|_| match spec.answer_model {
                    AnswerModel::Uniform => rng.gen_range(1..=5),
                    AnswerModel::AllK(k) => k,
                })
                .collect()
        })
        .collect()
}

/// SHA-256 over all streams, one byte per answer.
pub fn streams_digest(streams: &[Vec<u8>]) -> String {
    let mut hasher = Sha256::new();
    for s in streams {
        hasher.update(s);
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub spec: SimulationSpec,
    pub teacher_id: i64,
    pub completed: usize,
    pub result_ids: Vec<i64>,
    pub answers_sha256: String,
    /// The public statistics report for the evaluated teacher after the run.
    pub report: Value,
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("cohort size must be at least 1")]
    EmptyCohort,
    #[error("evaluation is not active or no teacher is selected")]
    NotReady,
    #[error("{method} {path} failed with {status}: {body}")]
    Api { method: &'static str, path: String, status: u16, body: String },
    #[error("unexpected response from {path}: {detail}")]
    Protocol { path: String, detail: String },
    #[error(transparent)]
    Http(#[from] reqwest::Error),
}

struct Client {
    http: reqwest::Client,
    base: String,
}

impl Client {
    async fn send(&self, method: &'static str, path: &str, body: Option<Value>) -> Result<Value, SimulationError> {
        let url = format!("{}{}", self.base, path);
        let req = match body {
            Some(b) => self.http.post(url).json(&b),
            None => self.http.get(url),
        };
        let resp = req.send().await?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().await.unwrap_or_default();
            return Err(SimulationError::Api { method, path: path.to_owned(), status: status.as_u16(), body });
        }
        Ok(resp.json().await?)
    }
}

fn protocol(path: &str, detail: impl Into<String>) -> SimulationError {
    SimulationError::Protocol { path: path.to_owned(), detail: detail.into() }
}

/// Runs `spec.cohort_size` complete questionnaires one after another.
pub async fn simulate(base_url: &str, spec: SimulationSpec) -> Result<SimulationSummary, SimulationError> {
    if spec.cohort_size == 0 {
        return Err(SimulationError::EmptyCohort);
    }
    let client = Client { http: reqwest::Client::new(), base: base_url.trim_end_matches('/').to_owned() };
    let status: StatusView = serde_json::from_value(client.send("GET", "/api/status", None).await?)
        .map_err(|e| protocol("/api/status", e.to_string()))?;
    let teacher = match (status.active, status.evaluated_teacher) {
        (true, Some(t)) => t.teacher_id,
        _ => return Err(SimulationError::NotReady),
    };

    let streams = answer_streams(&spec, status.total_questions);
    let mut result_ids = Vec::with_capacity(streams.len());
    for stream in &streams {
        let started = client.send("POST", "/api/session", Some(Value::Object(Default::default()))).await?;
        let token = started["token"].as_str().ok_or_else(|| protocol("/api/session", "missing token"))?.to_owned();
        let path = format!("/api/session/{token}/answer");
        let mut finished = None;
        for (i, &value) in stream.iter().enumerate() {
            let reply = client.send("POST", &path, Some(serde_json::json!({ "index": i + 1, "value": value }))).await?;
            if reply["finished"] == Value::Bool(true) {
                finished = reply["result_id"].as_i64();
            }
        }
        result_ids.push(finished.ok_or_else(|| protocol(&path, "questionnaire did not finish"))?);
    }

    let report = client.send("GET", &format!("/api/stats/{teacher}"), None).await?;
    Ok(SimulationSummary {
        spec,
        teacher_id: teacher.0,
        completed: result_ids.len(),
        result_ids,
        answers_sha256: streams_digest(&streams),
        report,
    })
}
