//! Caller identification: HTTP Basic for the administrator, bearer access
//! keys for deans, rectors and evaluated teachers, and the client address
//! used by the allowlist gate.

use std::net::{IpAddr, SocketAddr};
use std::sync::Arc;

use axum::extract::{ConnectInfo, FromRequestParts};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use evaluare_core::ViewerRole;

use crate::error::{ApiError, ErrorCode};
use crate::AppCore;

pub const ACCESS_KEY_HEADER: &str = "x-access-key";

enum Credentials {
    Basic { username: String, password: String },
    Key(String),
    None,
}

fn credentials(headers: &HeaderMap) -> Result<Credentials, ApiError> {
    if let Some(value) = headers.get(header::AUTHORIZATION) {
        let value = value.to_str().map_err(|_| ApiError::unauthenticated())?;
        if let Some(encoded) = value.strip_prefix("Basic ") {
            let decoded = STANDARD.decode(encoded.trim()).map_err(|_| ApiError::unauthenticated())?;
            let decoded = String::from_utf8(decoded).map_err(|_| ApiError::unauthenticated())?;
            let (username, password) = decoded.split_once(':').ok_or_else(ApiError::unauthenticated)?;
            return Ok(Credentials::Basic { username: username.to_owned(), password: password.to_owned() });
        }
        if let Some(key) = value.strip_prefix("Bearer ") {
            return Ok(Credentials::Key(key.trim().to_owned()));
        }
        return Err(ApiError::unauthenticated());
    }
    if let Some(key) = headers.get(ACCESS_KEY_HEADER) {
        let key = key.to_str().map_err(|_| ApiError::unauthenticated())?;
        return Ok(Credentials::Key(key.trim().to_owned()));
    }
    Ok(Credentials::None)
}

/// Who is calling. Requests without credentials are `Public`; requests with
/// bad credentials are rejected outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Principal(pub ViewerRole);

impl FromRequestParts<Arc<AppCore>> for Principal {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, core: &Arc<AppCore>) -> Result<Self, Self::Rejection> {
        match credentials(&parts.headers)? {
            Credentials::None => Ok(Principal(ViewerRole::Public)),
            Credentials::Basic { username, password } => {
                let core = core.clone();
                let ok = tokio::task::spawn_blocking(move || core.store.verify_admin(&username, &password))
                    .await
                    .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))??;
                if ok {
                    Ok(Principal(ViewerRole::Admin))
                } else {
                    Err(ApiError::unauthenticated())
                }
            }
            Credentials::Key(key) => match core.store.resolve_role_key(&key)? {
                Some(role) => Ok(Principal(role)),
                None => Err(ApiError::unauthenticated()),
            },
        }
    }
}

/// The authenticated administrator.
pub struct Admin;

impl FromRequestParts<Arc<AppCore>> for Admin {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, core: &Arc<AppCore>) -> Result<Self, Self::Rejection> {
        match Principal::from_request_parts(parts, core).await?.0 {
            ViewerRole::Admin => Ok(Admin),
            ViewerRole::Public => Err(ApiError::unauthenticated()),
            _ => Err(ApiError::access_denied()),
        }
    }
}

/// Any authenticated caller: administrator or an access-key holder.
pub struct Privileged(pub ViewerRole);

impl FromRequestParts<Arc<AppCore>> for Privileged {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, core: &Arc<AppCore>) -> Result<Self, Self::Rejection> {
        match Principal::from_request_parts(parts, core).await?.0 {
            ViewerRole::Public => Err(ApiError::unauthenticated()),
            role => Ok(Privileged(role)),
        }
    }
}

/// The client address the allowlist is checked against: the TCP peer, or
/// the first `X-Forwarded-For` hop when trusted-proxy mode is on.
pub struct ClientIp(pub IpAddr);

impl FromRequestParts<Arc<AppCore>> for ClientIp {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, core: &Arc<AppCore>) -> Result<Self, Self::Rejection> {
        if core.config.trusted_proxy {
            if let Some(ip) = parts
                .headers
                .get("x-forwarded-for")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.split(',').next())
                .and_then(|v| v.trim().parse::<IpAddr>().ok())
            {
                return Ok(ClientIp(ip));
            }
        }
        let ConnectInfo(addr) = parts
            .extensions
            .get::<ConnectInfo<SocketAddr>>()
            .copied()
            .ok_or_else(|| ApiError::new(ErrorCode::Internal, "peer address unavailable"))?;
        Ok(ClientIp(addr.ip()))
    }
}
