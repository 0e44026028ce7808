//! The one-shot questionnaire protocol.
//!
//! A session starts at cursor 1 and accepts exactly the answer for the
//! cursor position, one at a time. There is no way back and no way to skip
//! ahead. Once all items are answered the session is finalized into an
//! anonymous [`NewResult`] and becomes terminal.

use std::net::IpAddr;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use chrono::{DateTime, Duration, Utc};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bank::{QuestionBank, QuestionItem};
use crate::org::TeacherId;
use crate::records::{AppStateRecord, NewResult};
use crate::scoring::ResponseValue;

/// Default lifetime of an unfinished session.
pub const DEFAULT_SESSION_TTL: Duration = Duration::hours(2);

const TOKEN_BYTES: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("the evaluation is not active")]
    EvaluationInactive,
    #[error("client address {0} is not on the allowlist")]
    IpNotAllowed(IpAddr),
    #[error("an unfinished session already exists for {0}")]
    SessionAlreadyActiveForIp(IpAddr),
    #[error("session is not active")]
    SessionNotActive,
    #[error("session was started against a different question bank")]
    BankMismatch,
    #[error("answer for question {got} rejected; the current question is {expected}")]
    OutOfOrder { expected: usize, got: usize },
    #[error("only {answered} of {expected} questions answered")]
    IncompleteAnswers { answered: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionToken(String);

impl SessionToken {
    /// 256 random bits, URL-safe base64 without padding.
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; TOKEN_BYTES];
        rng.fill_bytes(&mut bytes);
        SessionToken(URL_SAFE_NO_PAD.encode(bytes))
    }

    pub fn from_string(s: String) -> Self {
        SessionToken(s)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum SessionPhase {
    Active { cursor: usize },
    Completed,
    Aborted,
}

impl SessionPhase {
    pub fn is_active(&self) -> bool {
        matches!(self, SessionPhase::Active { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmitOutcome {
    Progress { next_index: usize },
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationSession {
    pub token: SessionToken,
    pub teacher_id: TeacherId,
    pub bank_digest: String,
    /// Number of items in the bank the session was started against.
    pub item_count: usize,
    /// Present only while the session is active; cleared on completion or abort.
    pub client_ip: Option<IpAddr>,
    pub started_at: DateTime<Utc>,
    pub phase: SessionPhase,
    pub answers: Vec<ResponseValue>,
}

/// Checks the start gate: state active, address allowlisted, no unfinished
/// session from the same address. Returns the teacher being evaluated.
pub fn check_gate(
    state: &AppStateRecord,
    client_ip: IpAddr,
    ip_has_active_session: bool,
) -> Result<TeacherId, SessionError> {
    if !state.active {
        return Err(SessionError::EvaluationInactive);
    }
    let teacher = state.selected_teacher.ok_or(SessionError::EvaluationInactive)?;
    if !state.allows(client_ip) {
        return Err(SessionError::IpNotAllowed(client_ip));
    }
    if ip_has_active_session {
        return Err(SessionError::SessionAlreadyActiveForIp(client_ip));
    }
    Ok(teacher)
}

pub fn start_session<R: RngCore + CryptoRng>(
    state: &AppStateRecord,
    bank: &QuestionBank,
    client_ip: IpAddr,
    ip_has_active_session: bool,
    now: DateTime<Utc>,
    rng: &mut R,
) -> Result<EvaluationSession, SessionError> {
    let teacher_id = check_gate(state, client_ip, ip_has_active_session)?;
    if state.bank_digest != bank.digest() {
        return Err(SessionError::BankMismatch);
    }
    Ok(EvaluationSession {
        token: SessionToken::generate(rng),
        teacher_id,
        bank_digest: bank.digest().to_owned(),
        item_count: bank.len(),
        client_ip: Some(client_ip),
        started_at: now,
        phase: SessionPhase::Active { cursor: 1 },
        answers: Vec::new(),
    })
}

impl EvaluationSession {
    pub fn cursor(&self) -> Option<usize> {
        match self.phase {
            SessionPhase::Active { cursor } => Some(cursor),
            _ => None,
        }
    }

    /// True once every item is answered but the result is not yet written.
    pub fn awaiting_finalize(&self) -> bool {
        self.cursor() == Some(self.item_count + 1)
    }

    pub fn current_question<'b>(&self, bank: &'b QuestionBank) -> Result<(usize, &'b QuestionItem), SessionError> {
        let cursor = self.cursor().ok_or(SessionError::SessionNotActive)?;
        if self.bank_digest != bank.digest() {
            return Err(SessionError::BankMismatch);
        }
        let item = bank.item_at(cursor).map_err(|_| SessionError::SessionNotActive)?;
        Ok((cursor, item))
    }

    pub fn submit_answer(&mut self, index: usize, value: ResponseValue) -> Result<SubmitOutcome, SessionError> {
        let cursor = self.cursor().ok_or(SessionError::SessionNotActive)?;
        if cursor > self.item_count {
            return Err(SessionError::SessionNotActive);
        }
        if index != cursor {
            return Err(SessionError::OutOfOrder { expected: cursor, got: index });
        }
        self.answers.push(value);
        self.phase = SessionPhase::Active { cursor: cursor + 1 };
        Ok(if cursor == self.item_count {
            SubmitOutcome::Finished
        } else {
            SubmitOutcome::Progress { next_index: cursor + 1 }
        })
    }

    /// Moves the session to `Completed` and returns the anonymous result.
    pub fn finalize(&mut self, now: DateTime<Utc>) -> Result<NewResult, SessionError> {
        if !self.phase.is_active() {
            return Err(SessionError::SessionNotActive);
        }
        if self.answers.len() != self.item_count {
            return Err(SessionError::IncompleteAnswers { answered: self.answers.len(), expected: self.item_count });
        }
        self.phase = SessionPhase::Completed;
        self.client_ip = None;
        Ok(NewResult {
            teacher_id: self.teacher_id,
            bank_digest: self.bank_digest.clone(),
            completed_at: now,
            answers: self.answers.clone(),
        })
    }

    /// Discards partial answers and makes the session terminal.
    pub fn abort(&mut self) -> Result<(), SessionError> {
        if !self.phase.is_active() {
            return Err(SessionError::SessionNotActive);
        }
        self.phase = SessionPhase::Aborted;
        self.answers.clear();
        self.client_ip = None;
        Ok(())
    }

    /// Aborts the session if it is older than `ttl`. Returns whether it was aborted.
    pub fn abort_stale(&mut self, now: DateTime<Utc>, ttl: Duration) -> Result<bool, SessionError> {
        if !self.phase.is_active() {
            return Err(SessionError::SessionNotActive);
        }
        if now - self.started_at > ttl {
            self.abort()?;
            return Ok(true);
        }
        Ok(false)
    }
}
