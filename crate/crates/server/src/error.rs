use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use evaluare_core::aggregation::AggregationError;
use evaluare_core::bank::BankError;
use evaluare_core::session::SessionError;
use evaluare_core::StoreError;
use serde::Serialize;

/// Stable machine-readable error codes. Each maps to exactly one HTTP status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    EvaluationInactive,
    IpNotAllowed,
    SessionActiveForIp,
    UnknownToken,
    OutOfOrder,
    SessionNotActive,
    InvalidValue,
    IncompleteAnswers,
    BankMismatch,
    BankLocked,
    AccessDenied,
    Unauthenticated,
    NotFound,
    TeacherInUse,
    InvalidPhoto,
    NoTeacherSelected,
    UnknownTeacher,
    UnknownUnit,
    InvalidIp,
    InvalidRecord,
    BadRequest,
    Internal,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 22] = [
        ErrorCode::EvaluationInactive,
        ErrorCode::IpNotAllowed,
        ErrorCode::SessionActiveForIp,
        ErrorCode::UnknownToken,
        ErrorCode::OutOfOrder,
        ErrorCode::SessionNotActive,
        ErrorCode::InvalidValue,
        ErrorCode::IncompleteAnswers,
        ErrorCode::BankMismatch,
        ErrorCode::BankLocked,
        ErrorCode::AccessDenied,
        ErrorCode::Unauthenticated,
        ErrorCode::NotFound,
        ErrorCode::TeacherInUse,
        ErrorCode::InvalidPhoto,
        ErrorCode::NoTeacherSelected,
        ErrorCode::UnknownTeacher,
        ErrorCode::UnknownUnit,
        ErrorCode::InvalidIp,
        ErrorCode::InvalidRecord,
        ErrorCode::BadRequest,
        ErrorCode::Internal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::EvaluationInactive => "evaluation_inactive",
            ErrorCode::IpNotAllowed => "ip_not_allowed",
            ErrorCode::SessionActiveForIp => "session_active_for_ip",
            ErrorCode::UnknownToken => "unknown_token",
            ErrorCode::OutOfOrder => "out_of_order",
            ErrorCode::SessionNotActive => "session_not_active",
            ErrorCode::InvalidValue => "invalid_value",
            ErrorCode::IncompleteAnswers => "incomplete_answers",
            ErrorCode::BankMismatch => "bank_mismatch",
            ErrorCode::BankLocked => "bank_locked",
            ErrorCode::AccessDenied => "access_denied",
            ErrorCode::Unauthenticated => "unauthenticated",
            ErrorCode::NotFound => "not_found",
            ErrorCode::TeacherInUse => "teacher_in_use",
            ErrorCode::InvalidPhoto => "invalid_photo",
            ErrorCode::NoTeacherSelected => "no_teacher_selected",
            ErrorCode::UnknownTeacher => "unknown_teacher",
            ErrorCode::UnknownUnit => "unknown_unit",
            ErrorCode::InvalidIp => "invalid_ip",
            ErrorCode::InvalidRecord => "invalid_record",
            ErrorCode::BadRequest => "bad_request",
            ErrorCode::Internal => "internal",
        }
    }

    pub fn status(self) -> StatusCode {
        use ErrorCode::*;
        match self {
            BadRequest => StatusCode::BAD_REQUEST,
            Unauthenticated => StatusCode::UNAUTHORIZED,
            IpNotAllowed | AccessDenied => StatusCode::FORBIDDEN,
            UnknownToken | NotFound | UnknownUnit => StatusCode::NOT_FOUND,
            EvaluationInactive | SessionActiveForIp | OutOfOrder | SessionNotActive | IncompleteAnswers
            | BankMismatch | BankLocked | TeacherInUse | NoTeacherSelected => StatusCode::CONFLICT,
            InvalidValue | InvalidPhoto | UnknownTeacher | InvalidIp | InvalidRecord => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError { code, message: message.into() }
    }

    pub fn unauthenticated() -> Self {
        ApiError::new(ErrorCode::Unauthenticated, "authentication required")
    }

    pub fn access_denied() -> Self {
        ApiError::new(ErrorCode::AccessDenied, "access denied")
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(ErrorCode::BadRequest, message)
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.code == ErrorCode::Internal {
            tracing::error!(message = %self.message, "request failed");
        }
        let mut resp =
            (self.code.status(), Json(ErrorBody { code: self.code.as_str(), message: &self.message })).into_response();
        if self.code == ErrorCode::Unauthenticated {
            resp.headers_mut().insert(header::WWW_AUTHENTICATE, HeaderValue::from_static("Basic realm=\"evaluare\""));
        }
        resp
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let code = match e {
            SessionError::EvaluationInactive => ErrorCode::EvaluationInactive,
            SessionError::IpNotAllowed(_) => ErrorCode::IpNotAllowed,
            SessionError::SessionAlreadyActiveForIp(_) => ErrorCode::SessionActiveForIp,
            SessionError::SessionNotActive => ErrorCode::SessionNotActive,
            SessionError::BankMismatch => ErrorCode::BankMismatch,
            SessionError::OutOfOrder { .. } => ErrorCode::OutOfOrder,
            SessionError::IncompleteAnswers { .. } => ErrorCode::IncompleteAnswers,
        };
        // The address is the caller's own; still keep it out of response bodies.
        let message = match e {
            SessionError::IpNotAllowed(_) => "this workstation is not authorized for the evaluation".to_owned(),
            SessionError::SessionAlreadyActiveForIp(_) => {
                "an unfinished questionnaire is already open on this workstation".to_owned()
            }
            other => other.to_string(),
        };
        ApiError::new(code, message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let code = match &e {
            StoreError::Session(s) => return s.clone().into(),
            StoreError::TeacherNotFound(_) => ErrorCode::NotFound,
            StoreError::UnknownToken => ErrorCode::UnknownToken,
            StoreError::TeacherInUse(_) => ErrorCode::TeacherInUse,
            StoreError::InvalidPhoto(_) => ErrorCode::InvalidPhoto,
            StoreError::NoTeacherSelected => ErrorCode::NoTeacherSelected,
            StoreError::UnknownTeacher(_) => ErrorCode::UnknownTeacher,
            StoreError::AccessDenied => ErrorCode::AccessDenied,
            StoreError::BankLocked => ErrorCode::BankLocked,
            StoreError::InvalidRecord(_) | StoreError::AlreadyExists => ErrorCode::InvalidRecord,
            StoreError::Sqlite(_) | StoreError::Io(_) | StoreError::Locked(_) | StoreError::InjectedFault(_) => {
                ErrorCode::Internal
            }
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<AggregationError> for ApiError {
    fn from(e: AggregationError) -> Self {
        let code = match &e {
            AggregationError::BankMismatch { .. } => ErrorCode::BankMismatch,
            AggregationError::UnknownUnit(_) => ErrorCode::UnknownUnit,
            AggregationError::Bank(BankError::IndexOutOfRange { .. }) => ErrorCode::NotFound,
            AggregationError::Bank(_) | AggregationError::Scoring(_) => ErrorCode::Internal,
        };
        ApiError::new(code, e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn codes_are_unique_and_statuses_fixed() {
        let names: HashSet<&str> = ErrorCode::ALL.iter().map(|c| c.as_str()).collect();
        assert_eq!(names.len(), ErrorCode::ALL.len());
        for code in ErrorCode::ALL {
            assert_eq!(serde_json::to_value(code).unwrap(), code.as_str());
        }
        assert_eq!(ErrorCode::IpNotAllowed.status(), StatusCode::FORBIDDEN);
        assert_eq!(ErrorCode::EvaluationInactive.status(), StatusCode::CONFLICT);
        assert_eq!(ErrorCode::InvalidValue.status(), StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(ErrorCode::Unauthenticated.status(), StatusCode::UNAUTHORIZED);
    }

    #[test]
    fn gate_errors_hide_addresses() {
        let e: ApiError = SessionError::IpNotAllowed("10.1.2.3".parse().unwrap()).into();
        assert!(!e.message.contains("10.1.2.3"));
        assert_eq!(e.code, ErrorCode::IpNotAllowed);
    }
}
