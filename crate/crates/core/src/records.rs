//! Persistent record types shared by the session engine, the store and the API.

use std::collections::BTreeSet;
use std::net::IpAddr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::org::{ChairId, FacultyId, TeacherId};
use crate::scoring::ResponseValue;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherRecord {
    pub teacher_id: TeacherId,
    pub full_name: String,
    /// Blob name inside the photo area, when a photo was uploaded.
    pub photo: Option<String>,
    pub chair_id: ChairId,
    pub faculty_id: FacultyId,
}

/// Evaluation control plane: on/off flag, evaluated teacher, IP allowlist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppStateRecord {
    pub active: bool,
    pub selected_teacher: Option<TeacherId>,
    pub bank_digest: String,
    pub allowlist: BTreeSet<IpAddr>,
}

impl AppStateRecord {
    pub fn allows(&self, ip: IpAddr) -> bool {
        self.allowlist.contains(&ip.to_canonical())
    }
}

/// A finalized questionnaire. Holds no token, IP or student identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub result_id: i64,
    pub teacher_id: TeacherId,
    pub bank_digest: String,
    pub completed_at: DateTime<Utc>,
    pub answers: Vec<ResponseValue>,
}

/// A result ready to be stored; the store assigns `result_id`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewResult {
    pub teacher_id: TeacherId,
    pub bank_digest: String,
    pub completed_at: DateTime<Utc>,
    pub answers: Vec<ResponseValue>,
}

impl NewResult {
    pub fn with_id(self, result_id: i64) -> ResultRecord {
        ResultRecord {
            result_id,
            teacher_id: self.teacher_id,
            bank_digest: self.bank_digest,
            completed_at: self.completed_at,
            answers: self.answers,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", content = "teacher_id", rename_all = "snake_case")]
pub enum ViewerRole {
    Admin,
    Dean,
    Rector,
    EvaluatedTeacher(TeacherId),
    Public,
}

impl ViewerRole {
    /// Whether this role may read raw questionnaires of `teacher`.
    pub fn may_read(&self, teacher: TeacherId) -> bool {
        match self {
            ViewerRole::Admin | ViewerRole::Dean | ViewerRole::Rector => true,
            ViewerRole::EvaluatedTeacher(t) => *t == teacher,
            ViewerRole::Public => false,
        }
    }
}
