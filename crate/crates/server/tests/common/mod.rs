#![allow(dead_code)]

use std::net::IpAddr;
use std::sync::Arc;

use evaluare_core::store::{HashParams, NewTeacher, StateChanges};
use evaluare_core::{ChairId, FacultyId, QuestionBank, Store, StoreConfig, TeacherId};
use evaluare_server::error::ErrorCode;
use evaluare_server::{AppCore, RunningServer, ServerConfig};
use reqwest::{Client, RequestBuilder, Response};
use serde_json::Value;

pub const ADMIN_USER: &str = "admin";
pub const ADMIN_PASSWORD: &str = "s3cret-pass";

pub fn store_config() -> StoreConfig {
    StoreConfig { hash_params: HashParams::fast(), ..Default::default() }
}

pub fn memory_store() -> Store {
    let store = Store::open_in_memory(store_config()).unwrap();
    store.init_admin(ADMIN_USER, ADMIN_PASSWORD, false).unwrap();
    store
}

pub fn add_teacher(store: &Store, name: &str, chair: &str, faculty: &str) -> TeacherId {
    store
        .put_teacher(NewTeacher {
            full_name: name.into(),
            chair_id: ChairId(chair.into()),
            faculty_id: FacultyId(faculty.into()),
            photo: None,
        })
        .unwrap()
}

pub fn loopback() -> IpAddr {
    "127.0.0.1".parse().unwrap()
}

pub fn activate(store: &Store, teacher: TeacherId, allowlist: Vec<IpAddr>) {
    store
        .set_state(StateChanges {
            active: Some(true),
            selected_teacher: Some(Some(teacher)),
            allowlist: Some(allowlist),
        })
        .unwrap();
}

pub struct Harness {
    pub core: Arc<AppCore>,
    pub server: RunningServer,
    pub http: Client,
}

impl Harness {
    pub async fn start(store: Store, bank: QuestionBank) -> Harness {
        Harness::start_with(store, bank, ServerConfig::default()).await
    }

    pub async fn start_with(store: Store, bank: QuestionBank, config: ServerConfig) -> Harness {
        let core = Arc::new(AppCore::new(store, bank, config).unwrap());
        let server = RunningServer::start(core.clone()).await.unwrap();
        Harness { core, server, http: Client::new() }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.server.url(), path)
    }

    pub fn get(&self, path: &str) -> RequestBuilder {
        self.http.get(self.url(path))
    }

    pub fn post(&self, path: &str) -> RequestBuilder {
        self.http.post(self.url(path))
    }

    pub fn put(&self, path: &str) -> RequestBuilder {
        self.http.put(self.url(path))
    }

    pub fn delete(&self, path: &str) -> RequestBuilder {
        self.http.delete(self.url(path))
    }

    pub fn admin(&self, req: RequestBuilder) -> RequestBuilder {
        req.basic_auth(ADMIN_USER, Some(ADMIN_PASSWORD))
    }

    pub async fn start_session(&self) -> Response {
        self.post("/api/session").send().await.unwrap()
    }

    pub async fn answer(&self, token: &str, index: usize, value: i64) -> Response {
        self.post(&format!("/api/session/{token}/answer"))
            .json(&serde_json::json!({ "index": index, "value": value }))
            .send()
            .await
            .unwrap()
    }

    /// Completes one questionnaire with the given raw answers; returns (token, result_id).
    pub async fn complete(&self, answers: &[i64]) -> (String, i64) {
        let started = ok_json(self.start_session().await).await;
        let token = started["token"].as_str().unwrap().to_owned();
        let mut result_id = None;
        for (i, &v) in answers.iter().enumerate() {
            let reply = ok_json(self.answer(&token, i + 1, v).await).await;
            if reply["finished"] == true {
                result_id = reply["result_id"].as_i64();
            }
        }
        (token, result_id.expect("questionnaire finished"))
    }

    pub async fn stop(self) -> Arc<AppCore> {
        self.server.stop().await.unwrap();
        self.core
    }
}

pub async fn ok_json(resp: Response) -> Value {
    let status = resp.status();
    let body: Value = resp.json().await.unwrap_or(Value::Null);
    assert!(status.is_success(), "expected success, got {status}: {body}");
    body
}

/// Asserts an error response carries `code` with the status the error table assigns it.
pub async fn expect_error(resp: Response, code: ErrorCode) -> Value {
    let status = resp.status();
    let body: Value = resp.json().await.unwrap_or(Value::Null);
    assert_eq!(body["code"], code.as_str(), "status {status}, body {body}");
    assert_eq!(status.as_u16(), code.status().as_u16(), "code {} body {body}", code.as_str());
    body
}
