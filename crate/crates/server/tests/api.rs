mod common;

use std::sync::Arc;

use common::*;
use evaluare_core::store::{FaultPoint, MAX_PHOTO_BYTES};
use evaluare_core::{QuestionBank, Store, ViewerRole};
use evaluare_server::error::ErrorCode;
use evaluare_server::{AppCore, RunningServer, ServerConfig};
use reqwest::multipart::{Form, Part};
use reqwest::StatusCode;
use serde_json::{json, Value};

const JPEG: &[u8] = &[0xFF, 0xD8, 0xFF, 0xE0, 0x00, 0x10, b'J', b'F', b'I', b'F', 0x00];

async fn active_harness() -> (Harness, evaluare_core::TeacherId) {
    let store = memory_store();
    let t = add_teacher(&store, "Conf. dr. Dan Laurențiu Lacrămă", "info", "fcia");
    let h = Harness::start(store, QuestionBank::default_bank()).await;
    activate(&h.core.store, t, vec![loopback()]);
    (h, t)
}

#[tokio::test]
async fn student_flow() {
    let (h, t) = active_harness().await;
    let started = ok_json(h.start_session().await).await;
    let token = started["token"].as_str().unwrap().to_owned();
    assert_eq!(started["question"]["index"], 1);
    assert_eq!(started["question"]["total"], 58);
    let options = started["question"]["options"].as_array().unwrap();
    let labels: Vec<&str> = options.iter().map(|o| o["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["Very Poor", "Poor", "Medium", "Good", "Very Good"]);
    assert_eq!(options.iter().map(|o| o["value"].as_i64().unwrap()).collect::<Vec<_>>(), [1, 2, 3, 4, 5]);

    let next = ok_json(h.answer(&token, 1, 3).await).await;
    assert_eq!(next["finished"], false);
    assert_eq!(next["next"]["index"], 2);
    expect_error(h.answer(&token, 1, 3).await, ErrorCode::OutOfOrder).await;
    expect_error(h.answer(&token, 5, 3).await, ErrorCode::OutOfOrder).await;
    expect_error(h.answer(&token, 2, 6).await, ErrorCode::InvalidValue).await;
    expect_error(h.answer(&token, 2, 0).await, ErrorCode::InvalidValue).await;
    let malformed =
        h.post(&format!("/api/session/{token}/answer")).body("{").header("content-type", "application/json");
    expect_error(malformed.send().await.unwrap(), ErrorCode::BadRequest).await;
    let q = ok_json(h.get(&format!("/api/session/{token}/question")).send().await.unwrap()).await;
    assert_eq!(q["index"], 2);
    expect_error(h.get(&format!("/api/results/own/{token}")).send().await.unwrap(), ErrorCode::SessionNotActive).await;

    let mut last = Value::Null;
    for i in 2..=58 {
        last = ok_json(h.answer(&token, i, ((i % 5) + 1) as i64).await).await;
    }
    assert_eq!(last["finished"], true);
    let result_id = last["result_id"].as_i64().unwrap();
    assert_eq!(last["answers_view"], format!("/api/results/own/{token}"));
    expect_error(h.answer(&token, 58, 3).await, ErrorCode::SessionNotActive).await;
    expect_error(h.get(&format!("/api/session/{token}/question")).send().await.unwrap(), ErrorCode::SessionNotActive)
        .await;

    let view = ok_json(h.get(&format!("/api/results/own/{token}")).send().await.unwrap()).await;
    assert_eq!(view["result_number"], result_id);
    assert_eq!(view["teacher_name"], "Conf. dr. Dan Laurențiu Lacrămă");
    let direct = view["direct"].as_array().unwrap();
    let reverse = view["reverse"].as_array().unwrap();
    assert_eq!(direct.len() + reverse.len(), 58);
    assert_eq!(direct[0]["number"], 1);
    for item in direct.iter().chain(reverse) {
        let display = format!("{} - {}", item["score"], item["label"].as_str().unwrap());
        assert_eq!(item["display"], display);
        assert!(!item["text"].as_str().unwrap().is_empty());
    }
    // Item 2 is reverse-coded and was answered 3: score 3, middle label.
    let item2 = reverse.iter().find(|i| i["item_index"] == 2).unwrap();
    assert_eq!(item2["score"], 3);
    assert!(view.to_string().find("127.0.0.1").is_none());

    expect_error(h.get("/api/results/own/not-a-token").send().await.unwrap(), ErrorCode::UnknownToken).await;
    expect_error(h.get("/api/session/not-a-token/question").send().await.unwrap(), ErrorCode::UnknownToken).await;
    expect_error(h.answer("not-a-token", 1, 3).await, ErrorCode::UnknownToken).await;

    let stats = ok_json(h.get(&format!("/api/stats/{t}")).send().await.unwrap()).await;
    assert_eq!(stats["count"], 1);
    assert_eq!(stats["distributions"].as_array().unwrap().len(), 58);
    assert_eq!(stats["report"]["questionnaire_count"], 1);
    assert!(stats.get("results").is_none() && !stats.to_string().contains("answers"));

    // The same workstation may start the next student's questionnaire.
    ok_json(h.start_session().await).await;
}

#[tokio::test]
async fn gate_errors() {
    let store = memory_store();
    let t = add_teacher(&store, "A", "info", "fcia");
    let h = Harness::start(store, QuestionBank::default_bank()).await;
    expect_error(h.start_session().await, ErrorCode::EvaluationInactive).await;

    activate(&h.core.store, t, vec!["10.9.9.9".parse().unwrap()]);
    let body = expect_error(h.start_session().await, ErrorCode::IpNotAllowed).await;
    assert!(!body.to_string().contains("127.0.0.1"));

    activate(&h.core.store, t, vec![loopback()]);
    ok_json(h.start_session().await).await;
    let body = expect_error(h.start_session().await, ErrorCode::SessionActiveForIp).await;
    assert!(!body.to_string().contains("127.0.0.1"));
}

#[tokio::test]
async fn forwarded_address_only_in_trusted_proxy_mode() {
    for trusted in [false, true] {
        let store = memory_store();
        let t = add_teacher(&store, "A", "info", "fcia");
        let config = ServerConfig { trusted_proxy: trusted, ..Default::default() };
        let h = Harness::start_with(store, QuestionBank::default_bank(), config).await;
        activate(&h.core.store, t, vec!["10.0.0.5".parse().unwrap()]);
        let resp = h.post("/api/session").header("x-forwarded-for", "10.0.0.5, 172.16.0.1").send().await.unwrap();
        if trusted {
            ok_json(resp).await;
        } else {
            expect_error(resp, ErrorCode::IpNotAllowed).await;
        }
    }
}

#[tokio::test]
async fn concurrent_submissions_to_one_token() {
    let (h, t) = active_harness().await;
    let token = ok_json(h.start_session().await).await["token"].as_str().unwrap().to_owned();
    let h = Arc::new(h);
    let mut tasks = Vec::new();
    for _ in 0..16 {
        let (h, token) = (h.clone(), token.clone());
        tasks.push(tokio::spawn(async move { h.answer(&token, 1, 4).await.status() }));
    }
    let mut statuses = Vec::new();
    for task in tasks {
        statuses.push(task.await.unwrap());
    }
    assert_eq!(statuses.iter().filter(|s| s.is_success()).count(), 1);
    assert!(statuses.iter().filter(|s| !s.is_success()).all(|s| *s == StatusCode::CONFLICT));
    let session = h.core.store.active_sessions().unwrap();
    assert_eq!(session[0].answers.len(), 1);
    assert_eq!(h.core.store.count_results(t).unwrap(), 0);
}

#[tokio::test]
async fn admin_authentication() {
    let (h, _) = active_harness().await;
    let admin_paths = ["/api/admin/state", "/api/admin/teachers", "/api/admin/orgmap", "/api/admin/results"];
    for path in admin_paths {
        let resp = h.get(path).send().await.unwrap();
        assert!(resp.headers().contains_key("www-authenticate"), "{path}");
        expect_error(resp, ErrorCode::Unauthenticated).await;
        let wrong = h.get(path).basic_auth(ADMIN_USER, Some("wrong")).send().await.unwrap();
        expect_error(wrong, ErrorCode::Unauthenticated).await;
        let unknown = h.get(path).basic_auth("root", Some(ADMIN_PASSWORD)).send().await.unwrap();
        expect_error(unknown, ErrorCode::Unauthenticated).await;
        ok_json(h.admin(h.get(path)).send().await.unwrap()).await;
    }
    let resp = h.put("/api/admin/state").json(&json!({ "active": false })).send().await.unwrap();
    expect_error(resp, ErrorCode::Unauthenticated).await;

    let dean = h.core.store.issue_role_key(ViewerRole::Dean, chrono::Utc::now()).unwrap();
    let resp = h.get("/api/admin/state").bearer_auth(&dean).send().await.unwrap();
    expect_error(resp, ErrorCode::AccessDenied).await;
    let resp = h.get("/api/admin/state").bearer_auth("forged-key").send().await.unwrap();
    expect_error(resp, ErrorCode::Unauthenticated).await;
}

#[tokio::test]
async fn state_updates() {
    let store = memory_store();
    let h = Harness::start(store, QuestionBank::default_bank()).await;
    let put = |body: Value| h.admin(h.put("/api/admin/state")).json(&body).send();

    expect_error(put(json!({ "active": true })).await.unwrap(), ErrorCode::NoTeacherSelected).await;
    expect_error(put(json!({ "selected_teacher": 99 })).await.unwrap(), ErrorCode::UnknownTeacher).await;
    expect_error(put(json!({ "allowlist": ["127.0.0.1", "nope"] })).await.unwrap(), ErrorCode::InvalidIp).await;
    expect_error(put(json!({ "bogus": 1 })).await.unwrap(), ErrorCode::BadRequest).await;

    let t = add_teacher(&h.core.store, "A", "info", "fcia");
    let state = ok_json(
        put(json!({ "active": true, "selected_teacher": t.0, "allowlist": ["127.0.0.1", "::1", "127.0.0.1"] }))
            .await
            .unwrap(),
    )
    .await;
    assert_eq!(state["active"], true);
    assert_eq!(state["selected_teacher"], t.0);
    assert_eq!(state["allowlist"].as_array().unwrap().len(), 2);
    assert_eq!(state["total_questions"], 58);

    // A failed batch changes nothing.
    expect_error(put(json!({ "active": false, "allowlist": ["x"] })).await.unwrap(), ErrorCode::InvalidIp).await;
    assert!(h.core.store.get_state().unwrap().active);

    let status = ok_json(h.get("/api/status").send().await.unwrap()).await;
    assert_eq!(status["active"], true);
    assert_eq!(status["evaluated_teacher"]["full_name"], "A");

    let cleared = ok_json(put(json!({ "active": false, "selected_teacher": null })).await.unwrap()).await;
    assert_eq!(cleared["selected_teacher"], Value::Null);
    // Omitting the field leaves the selection alone.
    ok_json(put(json!({ "selected_teacher": t.0 })).await.unwrap()).await;
    let kept = ok_json(put(json!({ "allowlist": [] })).await.unwrap()).await;
    assert_eq!(kept["selected_teacher"], t.0);
}

fn teacher_form(name: &str, photo: Option<&[u8]>) -> Form {
    let form = Form::new().text("full_name", name.to_owned()).text("chair_id", "info").text("faculty_id", "fcia");
    match photo {
        Some(bytes) => {
            form.part("photo", Part::bytes(bytes.to_vec()).file_name("p.jpg").mime_str("image/jpeg").unwrap())
        }
        None => form,
    }
}

#[tokio::test]
async fn teacher_management() {
    let h = Harness::start(memory_store(), QuestionBank::default_bank()).await;
    let create = |form: Form| h.admin(h.post("/api/admin/teachers")).multipart(form).send();

    expect_error(create(teacher_form("A", Some(b"GIF89a..."))).await.unwrap(), ErrorCode::InvalidPhoto).await;
    let mut big = JPEG.to_vec();
    big.resize(MAX_PHOTO_BYTES + 1, 0);
    expect_error(create(teacher_form("A", Some(&big))).await.unwrap(), ErrorCode::InvalidPhoto).await;
    expect_error(create(Form::new().text("chair_id", "x")).await.unwrap(), ErrorCode::InvalidRecord).await;
    assert!(ok_json(h.get("/api/teachers").send().await.unwrap()).await.as_array().unwrap().is_empty());

    let a = ok_json(create(teacher_form("Lect. A", Some(JPEG))).await.unwrap()).await;
    let id = a["teacher_id"].as_i64().unwrap();
    let photo_url = a["photo_url"].as_str().unwrap();
    let photo = h.get(photo_url).send().await.unwrap();
    assert_eq!(photo.headers()["content-type"], "image/jpeg");
    assert_eq!(photo.bytes().await.unwrap().as_ref(), JPEG);

    let bare = ok_json(create(Form::new().text("full_name", "No Photo")).await.unwrap()).await;
    assert_eq!(bare["chair_id"], "unassigned");
    assert_eq!(bare["photo_url"], Value::Null);
    let bare_id = bare["teacher_id"].as_i64().unwrap();
    expect_error(h.get(&format!("/api/teachers/{bare_id}/photo")).send().await.unwrap(), ErrorCode::NotFound).await;

    let renamed = h
        .admin(h.put(&format!("/api/admin/teachers/{id}")))
        .multipart(Form::new().text("full_name", "Conf. A"))
        .send()
        .await
        .unwrap();
    let renamed = ok_json(renamed).await;
    assert_eq!(renamed["full_name"], "Conf. A");
    assert!(renamed["photo_url"].is_string());
    let missing = h.admin(h.put("/api/admin/teachers/999")).multipart(Form::new().text("full_name", "x"));
    expect_error(missing.send().await.unwrap(), ErrorCode::NotFound).await;

    activate(&h.core.store, evaluare_core::TeacherId(id), vec![loopback()]);
    expect_error(
        h.admin(h.delete(&format!("/api/admin/teachers/{id}"))).send().await.unwrap(),
        ErrorCode::TeacherInUse,
    )
    .await;
    ok_json(h.admin(h.delete(&format!("/api/admin/teachers/{bare_id}"))).send().await.unwrap()).await;
    expect_error(h.get(&format!("/api/stats/{bare_id}")).send().await.unwrap(), ErrorCode::NotFound).await;
    expect_error(h.get("/api/stats/abc").send().await.unwrap(), ErrorCode::NotFound).await;
    let listed = ok_json(h.admin(h.get("/api/admin/teachers")).send().await.unwrap()).await;
    assert_eq!(listed.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn stats_for_unevaluated_teacher() {
    let store = memory_store();
    let t = add_teacher(&store, "A", "info", "fcia");
    let h = Harness::start(store, QuestionBank::default_bank()).await;
    let stats = ok_json(h.get(&format!("/api/stats/{t}")).send().await.unwrap()).await;
    assert_eq!(stats["count"], 0);
    assert_eq!(stats["report"]["overall"], Value::Null);
    assert!(stats["report"]["per_competence"].as_object().unwrap().is_empty());
    assert_eq!(stats["distributions"][0]["counts"], json!({ "1": 0, "2": 0, "3": 0, "4": 0, "5": 0 }));
}

#[tokio::test]
async fn role_access_to_results_and_reports() {
    let store = memory_store();
    let t1 = add_teacher(&store, "A", "info", "fcia");
    let t2 = add_teacher(&store, "B", "econ", "fse");
    let h = Harness::start(store, QuestionBank::default_bank()).await;
    activate(&h.core.store, t1, vec![loopback()]);
    h.complete(&[4; 58]).await;
    activate(&h.core.store, t2, vec![loopback()]);
    h.complete(&[2; 58]).await;
    h.complete(&[3; 58]).await;

    let now = chrono::Utc::now();
    let rector = h.core.store.issue_role_key(ViewerRole::Rector, now).unwrap();
    let own1 = h.core.store.issue_role_key(ViewerRole::EvaluatedTeacher(t1), now).unwrap();

    expect_error(h.get("/api/results").send().await.unwrap(), ErrorCode::AccessDenied).await;
    expect_error(h.get(&format!("/api/results?teacher={t2}")).send().await.unwrap(), ErrorCode::AccessDenied).await;
    expect_error(h.get("/api/admin/results").send().await.unwrap(), ErrorCode::Unauthenticated).await;

    let all = ok_json(h.get("/api/results").bearer_auth(&rector).send().await.unwrap()).await;
    assert_eq!(all.as_array().unwrap().len(), 3);
    let via_header = ok_json(h.get("/api/admin/results").header("x-access-key", &rector).send().await.unwrap()).await;
    assert_eq!(via_header, all);
    let mine = ok_json(h.get("/api/results").bearer_auth(&own1).send().await.unwrap()).await;
    assert_eq!(mine.as_array().unwrap().len(), 1);
    assert_eq!(mine[0]["teacher_id"], t1.0);
    let denied = h.get(&format!("/api/admin/results?teacher={t2}")).bearer_auth(&own1).send().await.unwrap();
    expect_error(denied, ErrorCode::AccessDenied).await;
    let admin_view = ok_json(h.admin(h.get(&format!("/api/admin/results?teacher={t2}"))).send().await.unwrap()).await;
    assert_eq!(admin_view.as_array().unwrap().len(), 2);
    expect_error(h.admin(h.get("/api/admin/results?teacher=x")).send().await.unwrap(), ErrorCode::BadRequest).await;

    let report = |q: &str| h.admin(h.get(&format!("/api/admin/report?{q}"))).send();
    let uni = ok_json(report("scope=university").await.unwrap()).await;
    assert_eq!(uni["questionnaire_count"], 3);
    let fse = ok_json(report("scope=faculty&id=fse&formulation=mean_of_means").await.unwrap()).await;
    assert_eq!(fse["questionnaire_count"], 2);
    // All-2 answers score 2 on the 30 direct items and 4 on the 28 reverse ones.
    let want = (172.0 / 58.0 + 3.0) / 2.0;
    assert!((fse["overall"]["mean"].as_f64().unwrap() - want).abs() < 1e-12);
    expect_error(report("scope=chair&id=nowhere").await.unwrap(), ErrorCode::UnknownUnit).await;
    expect_error(report("scope=galaxy").await.unwrap(), ErrorCode::BadRequest).await;
    expect_error(report("scope=teacher").await.unwrap(), ErrorCode::BadRequest).await;
    expect_error(report("scope=university&formulation=median").await.unwrap(), ErrorCode::BadRequest).await;

    let own_scope = h.get(&format!("/api/admin/report?scope=teacher&id={t1}")).bearer_auth(&own1).send().await.unwrap();
    assert_eq!(ok_json(own_scope).await["questionnaire_count"], 1);
    let other = h.get("/api/admin/report?scope=university").bearer_auth(&own1).send().await.unwrap();
    expect_error(other, ErrorCode::AccessDenied).await;
    let unauth = h.get("/api/admin/report?scope=university").send().await.unwrap();
    expect_error(unauth, ErrorCode::Unauthenticated).await;
}

#[tokio::test]
async fn keys_and_org_map() {
    let store = memory_store();
    let t = add_teacher(&store, "A", "tmp", "tmp");
    let h = Harness::start(store, QuestionBank::default_bank()).await;
    let issued = ok_json(
        h.admin(h.post("/api/admin/keys"))
            .json(&json!({ "role": "evaluated_teacher", "teacher_id": t.0 }))
            .send()
            .await
            .unwrap(),
    )
    .await;
    assert_eq!(issued["role"], "evaluated_teacher");
    let key = issued["key"].as_str().unwrap();
    assert_eq!(h.core.store.resolve_role_key(key).unwrap(), Some(ViewerRole::EvaluatedTeacher(t)));
    let bad = h.admin(h.post("/api/admin/keys")).json(&json!({ "role": "admin" })).send().await.unwrap();
    expect_error(bad, ErrorCode::BadRequest).await;
    let wrong_method = h.get("/api/admin/keys").bearer_auth(key).send().await.unwrap();
    assert_eq!(wrong_method.status(), StatusCode::METHOD_NOT_ALLOWED);

    let map = json!({ "assignment": [{ "teacher": t.0, "chair": "info", "faculty": "fcia" }] });
    let applied = ok_json(h.admin(h.put("/api/admin/orgmap")).json(&map).send().await.unwrap()).await;
    assert_eq!(applied["chairs"]["info"], "fcia");
    let got = ok_json(h.admin(h.get("/api/admin/orgmap")).send().await.unwrap()).await;
    assert_eq!(got, applied);
    let unknown = json!({ "assignment": [{ "teacher": 404, "chair": "x", "faculty": "y" }] });
    let resp = h.admin(h.put("/api/admin/orgmap")).json(&unknown).send().await.unwrap();
    expect_error(resp, ErrorCode::UnknownTeacher).await;
}

#[tokio::test]
async fn unknown_endpoints_and_static_bundle() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>evaluare</h1>").unwrap();
    let config = ServerConfig { static_dir: Some(dir.path().to_path_buf()), ..Default::default() };
    let h = Harness::start_with(memory_store(), QuestionBank::default_bank(), config).await;
    expect_error(h.get("/api/nothing").send().await.unwrap(), ErrorCode::NotFound).await;
    let index = h.get("/").send().await.unwrap();
    assert!(index.status().is_success());
    assert_eq!(index.text().await.unwrap(), "<h1>evaluare</h1>");
}

#[tokio::test]
async fn interrupted_finalization_recovers_on_restart() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open_dir(dir.path(), store_config()).unwrap();
    store.init_admin(ADMIN_USER, ADMIN_PASSWORD, false).unwrap();
    let t = add_teacher(&store, "A", "info", "fcia");
    let h = Harness::start(store, QuestionBank::default_bank()).await;
    activate(&h.core.store, t, vec![loopback()]);
    let token = ok_json(h.start_session().await).await["token"].as_str().unwrap().to_owned();
    for i in 1..58 {
        ok_json(h.answer(&token, i, 5).await).await;
    }
    h.core.store.inject_fault(Some(FaultPoint::BeforeFinalizeCommit));
    expect_error(h.answer(&token, 58, 5).await, ErrorCode::Internal).await;
    expect_error(h.get(&format!("/api/results/own/{token}")).send().await.unwrap(), ErrorCode::SessionNotActive).await;

    let core = h.stop().await;
    drop(Arc::try_unwrap(core).ok().expect("server released the store"));
    let store = Store::open_dir(dir.path(), store_config()).unwrap();
    let core = Arc::new(AppCore::new(store, QuestionBank::default_bank(), ServerConfig::default()).unwrap());
    let server = RunningServer::start(core.clone()).await.unwrap();
    let view: Value =
        reqwest::get(format!("{}/api/results/own/{token}", server.url())).await.unwrap().json().await.unwrap();
    assert_eq!(view["report"]["overall"]["mark"], "medium");
    assert_eq!(core.store.count_results(t).unwrap(), 1);
    assert_eq!(core.store.integrity().unwrap(), Default::default());
    server.stop().await.unwrap();
}
