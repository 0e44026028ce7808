//! Routes and handlers. Request and response field names are the public
//! contract consumed by the browser UI.

use std::collections::BTreeMap;
use std::net::IpAddr;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, FromRequest, FromRequestParts, Multipart, Path, Query, Request, State};
use axum::http::header;
use axum::http::request::Parts;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use evaluare_core::aggregation::{self, Formulation, ItemDistribution, UnitReport};
use evaluare_core::bank::{Polarity, QuestionItem};
use evaluare_core::org::{Assignment, OrgMapFile};
use evaluare_core::scoring::{questionnaire_report, score_item, QuestionnaireReport, ResponseValue};
use evaluare_core::store::{AnswerReceipt, NewTeacher, StateChanges, TeacherChanges, MAX_PHOTO_BYTES};
use evaluare_core::{ChairId, FacultyId, ResultRecord, Scope, SessionToken, TeacherId, TeacherRecord, ViewerRole};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use tower_http::services::ServeDir;

use crate::auth::{Admin, ClientIp, Principal, Privileged};
use crate::error::{ApiError, ErrorCode};
use crate::AppCore;

type Core = State<Arc<AppCore>>;
type ApiResult<T> = Result<T, ApiError>;

/// Chair and faculty given to teachers created without a placement.
pub const UNASSIGNED: &str = "unassigned";

pub fn router(core: Arc<AppCore>) -> Router {
    let api = Router::new()
        .route("/status", get(status))
        .route("/session", post(start_session))
        .route("/session/{token}/question", get(current_question))
        .route("/session/{token}/answer", post(submit_answer))
        .route("/results/own/{token}", get(own_results))
        .route("/results", get(list_results))
        .route("/stats/{teacher_id}", get(stats))
        .route("/teachers", get(public_teachers))
        .route("/teachers/{teacher_id}/photo", get(teacher_photo))
        .route("/admin/state", get(admin_state).put(update_state))
        .route("/admin/teachers", get(admin_teachers).post(create_teacher).layer(DefaultBodyLimit::max(UPLOAD_LIMIT)))
        .route(
            "/admin/teachers/{teacher_id}",
            put(edit_teacher).delete(delete_teacher).layer(DefaultBodyLimit::max(UPLOAD_LIMIT)),
        )
        .route("/admin/report", get(report))
        .route("/admin/results", get(privileged_results))
        .route("/admin/keys", post(issue_key))
        .route("/admin/orgmap", get(org_map).put(replace_org_map))
        .fallback(|| async { ApiError::new(ErrorCode::NotFound, "no such endpoint") });

    let app = Router::new().nest("/api", api);
    let app = match &core.config.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.fallback(|| async { "evaluare: API available under /api\n" }),
    };
    app.with_state(core)
}

const UPLOAD_LIMIT: usize = MAX_PHOTO_BYTES + 512 * 1024;

// ---------------------------------------------------------------------------
// Extractors whose rejections use the error table.

pub struct ApiJson<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| ApiJson(v))
            .map_err(|e: JsonRejection| ApiError::bad_request(e.body_text()))
    }
}

pub struct ApiQuery<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequestParts<S> for ApiQuery<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        Query::<T>::from_request_parts(parts, state)
            .await
            .map(|Query(v)| ApiQuery(v))
            .map_err(|e: QueryRejection| ApiError::bad_request(e.body_text()))
    }
}

fn parse_teacher_id(raw: &str) -> ApiResult<TeacherId> {
    raw.parse::<i64>().map(TeacherId).map_err(|_| ApiError::new(ErrorCode::NotFound, format!("no teacher {raw}")))
}

fn double_option<'de, D, T>(d: D) -> Result<Option<Option<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(d).map(Some)
}

// ---------------------------------------------------------------------------
// Student flow.

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct OptionView {
    pub value: u8,
    pub label: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct QuestionView {
    pub index: usize,
    pub total: usize,
    pub text: String,
    pub options: Vec<OptionView>,
}

fn question_view(core: &AppCore, item: &QuestionItem) -> QuestionView {
    QuestionView {
        index: item.index,
        total: core.bank.len(),
        text: item.text.clone(),
        options: ResponseValue::all()
            .zip(core.bank.labels().options.iter())
            .map(|(v, label)| OptionView { value: v.get(), label: label.clone() })
            .collect(),
    }
}

#[derive(Serialize)]
struct SessionStarted {
    token: String,
    question: QuestionView,
}

async fn start_session(State(core): Core, ClientIp(ip): ClientIp) -> ApiResult<Json<SessionStarted>> {
    let session = core.store.start_session(&core.bank, ip, Utc::now())?;
    let (_, item) = session.current_question(&core.bank)?;
    Ok(Json(SessionStarted { token: session.token.as_str().to_owned(), question: question_view(&core, item) }))
}

async fn current_question(State(core): Core, Path(token): Path<String>) -> ApiResult<Json<QuestionView>> {
    let session = core.store.session(&SessionToken::from_string(token))?;
    let (_, item) = session.current_question(&core.bank)?;
    Ok(Json(question_view(&core, item)))
}

#[derive(Deserialize)]
struct AnswerBody {
    index: usize,
    value: i64,
}

#[derive(Serialize)]
#[serde(untagged)]
enum AnswerResponse {
    Next { finished: bool, next: QuestionView },
    Finished { finished: bool, result_id: i64, answers_view: String },
}

async fn submit_answer(
    State(core): Core,
    Path(token): Path<String>,
    ApiJson(body): ApiJson<AnswerBody>,
) -> ApiResult<Json<AnswerResponse>> {
    let value = ResponseValue::new(body.value).map_err(|e| ApiError::new(ErrorCode::InvalidValue, e.to_string()))?;
    let token = SessionToken::from_string(token);
    match core.store.submit_answer(&token, body.index, value, Utc::now())? {
        AnswerReceipt::Progress { next_index } => {
            let item = core.bank.item_at(next_index).map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?;
            Ok(Json(AnswerResponse::Next { finished: false, next: question_view(&core, item) }))
        }
        AnswerReceipt::Finished { result_id } => Ok(Json(AnswerResponse::Finished {
            finished: true,
            result_id,
            answers_view: format!("/api/results/own/{}", token.as_str()),
        })),
    }
}

/// One answered item as shown on the printable answers sheet.
#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct AnsweredItem {
    /// Position inside its column, starting at 1.
    pub number: usize,
    pub item_index: usize,
    /// Post-reversal score, 5 = best.
    pub score: u8,
    pub label: String,
    /// `"<score> - <label>"`.
    pub display: String,
    /// Statement text, shown on hover.
    pub text: String,
}

#[derive(Serialize)]
struct OwnView {
    result_number: i64,
    teacher_id: TeacherId,
    teacher_name: Option<String>,
    evaluated_at: DateTime<Utc>,
    direct: Vec<AnsweredItem>,
    reverse: Vec<AnsweredItem>,
    report: QuestionnaireReport,
}

fn answered_column(core: &AppCore, result: &ResultRecord, polarity: Polarity) -> Vec<AnsweredItem> {
    let labels = core.bank.labels();
    core.bank
        .items()
        .iter()
        .zip(&result.answers)
        .filter(|(item, _)| item.polarity == polarity)
        .enumerate()
        .map(|(n, (item, &answer))| {
            let score = score_item(item.polarity, answer).get();
            let label = labels.display_label(item.polarity, score).to_owned();
            AnsweredItem {
                number: n + 1,
                item_index: item.index,
                score,
                display: format!("{score} - {label}"),
                label,
                text: item.text.clone(),
            }
        })
        .collect()
}

async fn own_results(State(core): Core, Path(token): Path<String>) -> ApiResult<Json<OwnView>> {
    let result = core.store.own_result(&SessionToken::from_string(token))?;
    if result.bank_digest != core.bank.digest() {
        return Err(ApiError::new(ErrorCode::BankMismatch, "questionnaire was taken against another bank"));
    }
    let teacher_name = match core.store.get_teacher(result.teacher_id) {
        Ok(t) => Some(t.full_name),
        Err(evaluare_core::StoreError::TeacherNotFound(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let report = questionnaire_report(&result.answers, &core.bank)
        .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?;
    Ok(Json(OwnView {
        result_number: result.result_id,
        teacher_id: result.teacher_id,
        teacher_name,
        evaluated_at: result.completed_at,
        direct: answered_column(&core, &result, Polarity::Direct),
        reverse: answered_column(&core, &result, Polarity::Reverse),
        report,
    }))
}

// ---------------------------------------------------------------------------
// Public information.

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct PublicTeacher {
    pub teacher_id: TeacherId,
    pub full_name: String,
    pub chair_id: ChairId,
    pub faculty_id: FacultyId,
    pub photo_url: Option<String>,
}

impl From<TeacherRecord> for PublicTeacher {
    fn from(t: TeacherRecord) -> Self {
        PublicTeacher {
            photo_url: t.photo.as_ref().map(|_| format!("/api/teachers/{}/photo", t.teacher_id)),
            teacher_id: t.teacher_id,
            full_name: t.full_name,
            chair_id: t.chair_id,
            faculty_id: t.faculty_id,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatusView {
    pub active: bool,
    pub evaluated_teacher: Option<PublicTeacher>,
    pub total_questions: usize,
}

async fn status(State(core): Core) -> ApiResult<Json<StatusView>> {
    let state = core.store.get_state()?;
    let evaluated_teacher = match state.selected_teacher {
        Some(t) => Some(core.store.get_teacher(t)?.into()),
        None => None,
    };
    Ok(Json(StatusView { active: state.active, evaluated_teacher, total_questions: core.bank.len() }))
}

async fn public_teachers(State(core): Core) -> ApiResult<Json<Vec<PublicTeacher>>> {
    Ok(Json(core.store.list_teachers()?.into_iter().map(PublicTeacher::from).collect()))
}

async fn teacher_photo(State(core): Core, Path(raw): Path<String>) -> ApiResult<Response> {
    let id = parse_teacher_id(&raw)?;
    match core.store.teacher_photo(id)? {
        Some(bytes) => Ok(([(header::CONTENT_TYPE, "image/jpeg")], bytes).into_response()),
        None => Err(ApiError::new(ErrorCode::NotFound, format!("teacher {id} has no photo"))),
    }
}

#[derive(Serialize)]
struct StatsView {
    teacher_id: TeacherId,
    count: u64,
    distributions: Vec<ItemDistribution>,
    report: UnitReport,
}

async fn stats(State(core): Core, Path(raw): Path<String>) -> ApiResult<Json<StatsView>> {
    let id = parse_teacher_id(&raw)?;
    core.store.get_teacher(id)?;
    let results = core.store.results_unchecked(Some(id))?;
    Ok(Json(StatsView {
        teacher_id: id,
        count: results.len() as u64,
        distributions: aggregation::all_item_distributions(&results, &core.bank)?,
        report: aggregation::teacher_report(id, &results, &core.bank)?,
    }))
}

// ---------------------------------------------------------------------------
// Raw results for privileged viewers.

#[derive(Deserialize)]
struct TeacherFilter {
    teacher: Option<i64>,
}

fn read_results(core: &AppCore, role: ViewerRole, filter: TeacherFilter) -> ApiResult<Json<Vec<ResultRecord>>> {
    let teacher = filter.teacher.map(TeacherId);
    if let Some(t) = teacher {
        if !role.may_read(t) {
            return Err(ApiError::access_denied());
        }
        core.store.get_teacher(t)?;
    }
    Ok(Json(core.store.list_results(role, teacher)?))
}

/// Open to any caller; without credentials the answer is `access_denied`.
async fn list_results(
    State(core): Core,
    Principal(role): Principal,
    ApiQuery(filter): ApiQuery<TeacherFilter>,
) -> ApiResult<Json<Vec<ResultRecord>>> {
    read_results(&core, role, filter)
}

/// Requires credentials; without them the answer is `unauthenticated`.
async fn privileged_results(
    State(core): Core,
    Privileged(role): Privileged,
    ApiQuery(filter): ApiQuery<TeacherFilter>,
) -> ApiResult<Json<Vec<ResultRecord>>> {
    read_results(&core, role, filter)
}

#[derive(Deserialize)]
struct ReportQuery {
    scope: String,
    id: Option<String>,
    formulation: Option<String>,
}

fn parse_scope(q: &ReportQuery) -> ApiResult<Scope> {
    let id = || q.id.clone().ok_or_else(|| ApiError::bad_request(format!("scope {} needs an id", q.scope)));
    Ok(match q.scope.as_str() {
        "teacher" => Scope::Teacher(
            id()?.parse().map(TeacherId).map_err(|_| ApiError::bad_request("teacher id must be an integer"))?,
        ),
        "chair" => Scope::Chair(ChairId(id()?)),
        "faculty" => Scope::Faculty(FacultyId(id()?)),
        "university" => Scope::University,
        other => return Err(ApiError::bad_request(format!("unknown scope {other}"))),
    })
}

fn parse_formulation(raw: Option<&str>) -> ApiResult<Formulation> {
    match raw {
        None | Some("pooled") => Ok(Formulation::Pooled),
        Some("mean_of_means") => Ok(Formulation::MeanOfQuestionnaireMeans),
        Some(other) => Err(ApiError::bad_request(format!("unknown formulation {other}"))),
    }
}

async fn report(
    State(core): Core,
    Privileged(role): Privileged,
    ApiQuery(q): ApiQuery<ReportQuery>,
) -> ApiResult<Json<UnitReport>> {
    let scope = parse_scope(&q)?;
    let formulation = parse_formulation(q.formulation.as_deref())?;
    if let ViewerRole::EvaluatedTeacher(own) = role {
        if scope != Scope::Teacher(own) {
            return Err(ApiError::access_denied());
        }
    }
    let org = core.store.org_map()?;
    let results = core.store.results_unchecked(None)?;
    Ok(Json(aggregation::unit_report_with(&scope, &org, &results, &core.bank, formulation)?))
}

// ---------------------------------------------------------------------------
// Administration.

#[derive(Debug, Serialize, Deserialize)]
pub struct StateView {
    pub active: bool,
    pub selected_teacher: Option<TeacherId>,
    pub bank_digest: String,
    pub total_questions: usize,
    pub allowlist: Vec<IpAddr>,
    pub active_sessions: usize,
}

fn state_view(core: &AppCore) -> ApiResult<Json<StateView>> {
    let state = core.store.get_state()?;
    Ok(Json(StateView {
        active: state.active,
        selected_teacher: state.selected_teacher,
        bank_digest: state.bank_digest,
        total_questions: core.bank.len(),
        allowlist: state.allowlist.into_iter().collect(),
        active_sessions: core.store.active_sessions()?.len(),
    }))
}

async fn admin_state(State(core): Core, _: Admin) -> ApiResult<Json<StateView>> {
    state_view(&core)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateUpdate {
    active: Option<bool>,
    #[serde(default, deserialize_with = "double_option")]
    selected_teacher: Option<Option<TeacherId>>,
    allowlist: Option<Vec<String>>,
}

async fn update_state(State(core): Core, _: Admin, ApiJson(body): ApiJson<StateUpdate>) -> ApiResult<Json<StateView>> {
    let allowlist = body
        .allowlist
        .map(|list| {
            list.iter()
                .map(|s| {
                    s.trim()
                        .parse::<IpAddr>()
                        .map_err(|_| ApiError::new(ErrorCode::InvalidIp, format!("not an IP address: {s:?}")))
                })
                .collect::<ApiResult<Vec<_>>>()
        })
        .transpose()?;
    core.store.set_state(StateChanges { active: body.active, selected_teacher: body.selected_teacher, allowlist })?;
    state_view(&core)
}

async fn admin_teachers(State(core): Core, _: Admin) -> ApiResult<Json<Vec<PublicTeacher>>> {
    public_teachers(State(core)).await
}

#[derive(Default)]
struct TeacherForm {
    full_name: Option<String>,
    chair_id: Option<String>,
    faculty_id: Option<String>,
    photo: Option<Vec<u8>>,
}

async fn read_teacher_form(mut multipart: Multipart) -> ApiResult<TeacherForm> {
    let bad = |e: axum::extract::multipart::MultipartError| ApiError::bad_request(e.body_text());
    let mut form = TeacherForm::default();
    while let Some(field) = multipart.next_field().await.map_err(bad)? {
        let name = field.name().unwrap_or_default().to_owned();
        match name.as_str() {
            "photo" => {
                let bytes = field.bytes().await.map_err(bad)?;
                if !bytes.is_empty() {
                    form.photo = Some(bytes.to_vec());
                }
            }
            "full_name" | "chair_id" | "faculty_id" => {
                let text = field.text().await.map_err(bad)?;
                let slot = match name.as_str() {
                    "full_name" => &mut form.full_name,
                    "chair_id" => &mut form.chair_id,
                    _ => &mut form.faculty_id,
                };
                *slot = Some(text.trim().to_owned()).filter(|s| !s.is_empty());
            }
            other => return Err(ApiError::bad_request(format!("unexpected form field {other:?}"))),
        }
    }
    Ok(form)
}

async fn create_teacher(State(core): Core, _: Admin, multipart: Multipart) -> ApiResult<Json<PublicTeacher>> {
    let form = read_teacher_form(multipart).await?;
    let full_name = form.full_name.ok_or_else(|| ApiError::new(ErrorCode::InvalidRecord, "full_name is required"))?;
    let id = core.store.put_teacher(NewTeacher {
        full_name,
        chair_id: ChairId(form.chair_id.unwrap_or_else(|| UNASSIGNED.into())),
        faculty_id: FacultyId(form.faculty_id.unwrap_or_else(|| UNASSIGNED.into())),
        photo: form.photo,
    })?;
    Ok(Json(core.store.get_teacher(id)?.into()))
}

async fn edit_teacher(
    State(core): Core,
    _: Admin,
    Path(raw): Path<String>,
    multipart: Multipart,
) -> ApiResult<Json<PublicTeacher>> {
    let id = parse_teacher_id(&raw)?;
    let form = read_teacher_form(multipart).await?;
    let updated = core.store.update_teacher(
        id,
        TeacherChanges {
            full_name: form.full_name,
            chair_id: form.chair_id.map(ChairId),
            faculty_id: form.faculty_id.map(FacultyId),
            photo: form.photo,
        },
    )?;
    Ok(Json(updated.into()))
}

async fn delete_teacher(State(core): Core, _: Admin, Path(raw): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let id = parse_teacher_id(&raw)?;
    core.store.delete_teacher(id)?;
    Ok(Json(serde_json::json!({ "deleted": id })))
}

#[derive(Serialize)]
struct IssuedKey {
    key: String,
    #[serde(flatten)]
    role: ViewerRole,
}

async fn issue_key(State(core): Core, _: Admin, ApiJson(role): ApiJson<ViewerRole>) -> ApiResult<Json<IssuedKey>> {
    if matches!(role, ViewerRole::Admin | ViewerRole::Public) {
        return Err(ApiError::bad_request("keys are issued for dean, rector or evaluated_teacher"));
    }
    let key = core.store.issue_role_key(role, Utc::now())?;
    Ok(Json(IssuedKey { key, role }))
}

#[derive(Serialize)]
struct OrgMapView {
    assignments: Vec<Assignment>,
    chairs: BTreeMap<ChairId, FacultyId>,
}

fn org_map_view(core: &AppCore) -> ApiResult<Json<OrgMapView>> {
    let teachers = core.store.list_teachers()?;
    Ok(Json(OrgMapView {
        chairs: teachers.iter().map(|t| (t.chair_id.clone(), t.faculty_id.clone())).collect(),
        assignments: teachers
            .into_iter()
            .map(|t| Assignment { teacher: t.teacher_id, chair: t.chair_id, faculty: t.faculty_id })
            .collect(),
    }))
}

async fn org_map(State(core): Core, _: Admin) -> ApiResult<Json<OrgMapView>> {
    org_map_view(&core)
}

async fn replace_org_map(
    State(core): Core,
    _: Admin,
    ApiJson(file): ApiJson<OrgMapFile>,
) -> ApiResult<Json<OrgMapView>> {
    core.store.apply_org_map(&file)?;
    org_map_view(&core)
}
