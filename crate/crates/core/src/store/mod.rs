//! Durable storage for teachers, allowlist, administrator, evaluation state,
//! sessions and results.
//!
//! Everything lives in one SQLite file owned by a single process, plus a
//! `photos/` directory for teacher portraits. All access goes through one
//! connection behind a mutex, so mutations are serialized and every session
//! transition for a token is linearizable.

mod credentials;
mod photos;
mod schema;

use std::collections::BTreeSet;
use std::fs::{self, File, TryLockError};
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, Duration, Utc};
use rusqlite::{params, Connection, OptionalExtension, Row, Transaction};
use thiserror::Error;

use crate::bank::QuestionBank;
use crate::org::{Assignment, ChairId, FacultyId, OrgMap, OrgMapFile, TeacherId};
use crate::records::{AppStateRecord, NewResult, ResultRecord, TeacherRecord, ViewerRole};
use crate::scoring::ResponseValue;
use crate::session::{
    self, EvaluationSession, SessionError, SessionPhase, SessionToken, SubmitOutcome, DEFAULT_SESSION_TTL,
};

pub use credentials::HashParams;
use photos::PhotoArea;
pub use photos::{validate_jpeg, MAX_PHOTO_BYTES};

pub const DB_FILE: &str = "evaluare.db";
pub const LOCK_FILE: &str = "evaluare.lock";
pub const PHOTO_DIR: &str = "photos";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("database error: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("data directory {0} is locked by another process")]
    Locked(PathBuf),
    #[error("teacher {0} not found")]
    TeacherNotFound(TeacherId),
    #[error("unknown session token")]
    UnknownToken,
    #[error("teacher {0} is being evaluated and cannot be deleted")]
    TeacherInUse(TeacherId),
    #[error("invalid photo: {0}")]
    InvalidPhoto(String),
    #[error("cannot activate the evaluation without a selected teacher")]
    NoTeacherSelected,
    #[error("unknown teacher {0}")]
    UnknownTeacher(TeacherId),
    #[error("access denied")]
    AccessDenied,
    #[error("an administrator account already exists")]
    AlreadyExists,
    #[error("the question bank cannot change while the evaluation is active")]
    BankLocked,
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("injected fault at {0:?}")]
    InjectedFault(FaultPoint),
    #[error(transparent)]
    Session(#[from] SessionError),
}

pub type StoreResult<T> = Result<T, StoreError>;

/// Places where a test can make the store fail as if the process died.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultPoint {
    /// After the final answer is committed, before finalization starts.
    AfterAnswerPersist,
    /// Inside the finalization transaction, after the result row is written.
    BeforeFinalizeCommit,
}

#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub session_ttl: Duration,
    pub hash_params: HashParams,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig { session_ttl: DEFAULT_SESSION_TTL, hash_params: HashParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewTeacher {
    pub full_name: String,
    pub chair_id: ChairId,
    pub faculty_id: FacultyId,
    pub photo: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TeacherChanges {
    pub full_name: Option<String>,
    pub chair_id: Option<ChairId>,
    pub faculty_id: Option<FacultyId>,
    pub photo: Option<Vec<u8>>,
}

/// A batch of state edits applied together.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateChanges {
    pub active: Option<bool>,
    pub selected_teacher: Option<Option<TeacherId>>,
    pub allowlist: Option<Vec<IpAddr>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerReceipt {
    Progress { next_index: usize },
    Finished { result_id: i64 },
}

/// Cross-table consistency counters; all zero in a healthy store.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Integrity {
    pub orphan_results: u64,
    pub completed_without_result: u64,
    pub active_sessions_with_gaps: u64,
}

pub struct Store {
    conn: Mutex<Connection>,
    photos: PhotoArea,
    config: StoreConfig,
    fault: Mutex<Option<FaultPoint>>,
    dummy_digest: String,
    _lock: Option<File>,
}

impl Store {
    /// Opens (creating if needed) a data directory and takes its exclusive lock.
    pub fn open_dir(dir: &Path, config: StoreConfig) -> StoreResult<Self> {
        fs::create_dir_all(dir.join(PHOTO_DIR))?;
        let lock = File::options().create(true).truncate(false).write(true).open(dir.join(LOCK_FILE))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(TryLockError::WouldBlock) => return Err(StoreError::Locked(dir.to_path_buf())),
            Err(TryLockError::Error(e)) => return Err(e.into()),
        }
        let conn = Connection::open(dir.join(DB_FILE))?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "FULL")?;
        Self::init(conn, PhotoArea::Dir(dir.join(PHOTO_DIR)), config, Some(lock))
    }

    pub fn open_in_memory(config: StoreConfig) -> StoreResult<Self> {
        Self::init(Connection::open_in_memory()?, PhotoArea::Memory(Default::default()), config, None)
    }

    fn init(conn: Connection, photos: PhotoArea, config: StoreConfig, lock: Option<File>) -> StoreResult<Self> {
        conn.pragma_update(None, "foreign_keys", true)?;
        conn.execute_batch(schema::SCHEMA)?;
        let dummy_digest = credentials::hash_password("not-a-real-password", &config.hash_params)
            .map_err(StoreError::InvalidRecord)?;
        Ok(Store { conn: Mutex::new(conn), photos, config, fault: Mutex::new(None), dummy_digest, _lock: lock })
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    fn conn(&self) -> MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Arms a one-shot fault. Test hook.
    pub fn inject_fault(&self, point: Option<FaultPoint>) {
        *self.fault.lock().unwrap_or_else(|e| e.into_inner()) = point;
    }

    fn trip(&self, point: FaultPoint) -> StoreResult<()> {
        let mut armed = self.fault.lock().unwrap_or_else(|e| e.into_inner());
        if *armed == Some(point) {
            *armed = None;
            return Err(StoreError::InjectedFault(point));
        }
        Ok(())
    }

    // ---- question bank -------------------------------------------------

    /// Records the bank in use. While the evaluation is active the bank is
    /// frozen; a different digest is refused.
    pub fn register_bank(&self, bank: &QuestionBank) -> StoreResult<()> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        tx.execute(
            "INSERT OR IGNORE INTO banks (digest, item_count) VALUES (?1, ?2)",
            params![bank.digest(), bank.len() as i64],
        )?;
        let state = read_state(&tx)?;
        if state.bank_digest != bank.digest() {
            if state.active {
                return Err(StoreError::BankLocked);
            }
            tx.execute("UPDATE stare SET bank_digest = ?1 WHERE id = 1", [bank.digest()])?;
        }
        tx.commit()?;
        Ok(())
    }

    // ---- teachers ------------------------------------------------------

    pub fn put_teacher(&self, teacher: NewTeacher) -> StoreResult<TeacherId> {
        validate_name(&teacher.full_name)?;
        if let Some(photo) = &teacher.photo {
            validate_jpeg(photo).map_err(StoreError::InvalidPhoto)?;
        }
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        tx.execute(
            "INSERT INTO listaprofi (full_name, chair_id, faculty_id) VALUES (?1, ?2, ?3)",
            params![teacher.full_name.trim(), teacher.chair_id.0, teacher.faculty_id.0],
        )?;
        let id = TeacherId(tx.last_insert_rowid());
        check_org_consistency(&tx)?;
        if let Some(photo) = &teacher.photo {
            let name = PhotoArea::blob_name(id);
            tx.execute("UPDATE listaprofi SET photo = ?1 WHERE teacher_id = ?2", params![name, id.0])?;
            self.photos.write(&name, photo)?;
        }
        tx.commit()?;
        Ok(id)
    }

    pub fn update_teacher(&self, id: TeacherId, changes: TeacherChanges) -> StoreResult<TeacherRecord> {
        if let Some(name) = &changes.full_name {
            validate_name(name)?;
        }
        if let Some(photo) = &changes.photo {
            validate_jpeg(photo).map_err(StoreError::InvalidPhoto)?;
        }
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let mut record = read_teacher(&tx, id)?.ok_or(StoreError::TeacherNotFound(id))?;
        if let Some(name) = changes.full_name {
            record.full_name = name.trim().to_owned();
        }
        if let Some(chair) = changes.chair_id {
            record.chair_id = chair;
        }
        if let Some(faculty) = changes.faculty_id {
            record.faculty_id = faculty;
        }
        if changes.photo.is_some() {
            record.photo = Some(PhotoArea::blob_name(id));
        }
        tx.execute(
            "UPDATE listaprofi SET full_name = ?1, chair_id = ?2, faculty_id = ?3, photo = ?4 WHERE teacher_id = ?5",
            params![record.full_name, record.chair_id.0, record.faculty_id.0, record.photo, id.0],
        )?;
        check_org_consistency(&tx)?;
        if let Some(photo) = &changes.photo {
            self.photos.write(&PhotoArea::blob_name(id), photo)?;
        }
        tx.commit()?;
        Ok(record)
    }

    /// Removes a teacher profile. Refused while the teacher is being evaluated.
    pub fn delete_teacher(&self, id: TeacherId) -> StoreResult<()> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let record = read_teacher(&tx, id)?.ok_or(StoreError::TeacherNotFound(id))?;
        let state = read_state(&tx)?;
        if state.selected_teacher == Some(id) {
            if state.active {
                return Err(StoreError::TeacherInUse(id));
            }
            tx.execute("UPDATE stare SET selected_teacher = NULL WHERE id = 1", [])?;
        }
        tx.execute("DELETE FROM listaprofi WHERE teacher_id = ?1", [id.0])?;
        tx.commit()?;
        if let Some(name) = record.photo {
            self.photos.remove(&name)?;
        }
        Ok(())
    }

    pub fn get_teacher(&self, id: TeacherId) -> StoreResult<TeacherRecord> {
        read_teacher(&self.conn(), id)?.ok_or(StoreError::TeacherNotFound(id))
    }

    pub fn list_teachers(&self) -> StoreResult<Vec<TeacherRecord>> {
        let conn = self.conn();
        let mut stmt = conn
            .prepare("SELECT teacher_id, full_name, photo, chair_id, faculty_id FROM listaprofi ORDER BY teacher_id")?;
        let rows = stmt.query_map([], teacher_from_row)?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    pub fn teacher_photo(&self, id: TeacherId) -> StoreResult<Option<Vec<u8>>> {
        let record = self.get_teacher(id)?;
        match record.photo {
            Some(name) => Ok(self.photos.read(&name)?),
            None => Ok(None),
        }
    }

    pub fn org_map(&self) -> StoreResult<OrgMap> {
        let teachers = self.list_teachers()?;
        org_map_of(&teachers)
    }

    /// Applies chair/faculty placements from an org map file.
    pub fn apply_org_map(&self, file: &OrgMapFile) -> StoreResult<OrgMap> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        for a in &file.assignments {
            let n = tx.execute(
                "UPDATE listaprofi SET chair_id = ?1, faculty_id = ?2 WHERE teacher_id = ?3",
                params![a.chair.0, a.faculty.0, a.teacher.0],
            )?;
            if n == 0 {
                return Err(StoreError::UnknownTeacher(a.teacher));
            }
        }
        let map = check_org_consistency(&tx)?;
        tx.commit()?;
        Ok(map)
    }

    // ---- evaluation state ----------------------------------------------

    pub fn get_state(&self) -> StoreResult<AppStateRecord> {
        read_state(&self.conn())
    }

    /// Applies a batch of state edits atomically. Turning the evaluation on
    /// or off, or switching the evaluated teacher, aborts every unfinished
    /// session and discards its partial answers.
    pub fn set_state(&self, changes: StateChanges) -> StoreResult<AppStateRecord> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let current = read_state(&tx)?;
        let active = changes.active.unwrap_or(current.active);
        let selected = changes.selected_teacher.unwrap_or(current.selected_teacher);
        if let Some(t) = selected {
            if read_teacher(&tx, t)?.is_none() {
                return Err(StoreError::UnknownTeacher(t));
            }
        }
        if active && selected.is_none() {
            return Err(StoreError::NoTeacherSelected);
        }
        if active && current.bank_digest.is_empty() {
            return Err(StoreError::InvalidRecord("no question bank registered".into()));
        }
        tx.execute(
            "UPDATE stare SET active = ?1, selected_teacher = ?2 WHERE id = 1",
            params![active, selected.map(|t| t.0)],
        )?;
        if let Some(list) = changes.allowlist {
            tx.execute("DELETE FROM listaip", [])?;
            let unique: BTreeSet<IpAddr> = list.into_iter().map(|ip| ip.to_canonical()).collect();
            for ip in unique {
                tx.execute("INSERT INTO listaip (ip) VALUES (?1)", [ip.to_string()])?;
            }
        }
        if active != current.active || selected != current.selected_teacher {
            abort_all_active(&tx)?;
        }
        let state = read_state(&tx)?;
        tx.commit()?;
        Ok(state)
    }

    // ---- sessions ------------------------------------------------------

    /// Runs the start gate and persists a new session atomically. Stale
    /// sessions are swept first so an abandoned browser cannot block its
    /// workstation forever.
    pub fn start_session(
        &self,
        bank: &QuestionBank,
        client_ip: IpAddr,
        now: DateTime<Utc>,
    ) -> StoreResult<EvaluationSession> {
        let client_ip = client_ip.to_canonical();
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        sweep_stale(&tx, now, self.config.session_ttl)?;
        let state = read_state(&tx)?;
        let busy: bool = tx.query_row(
            "SELECT EXISTS (SELECT 1 FROM eval_sesiune WHERE phase = 'active' AND client_ip = ?1)",
            [client_ip.to_string()],
            |r| r.get(0),
        )?;
        let session = session::start_session(&state, bank, client_ip, busy, now, &mut rand::rngs::OsRng)?;
        tx.execute(
            "INSERT INTO eval_sesiune (token, teacher_id, bank_digest, item_count, client_ip, started_at, phase)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, 'active')",
            params![
                session.token.as_str(),
                session.teacher_id.0,
                session.bank_digest,
                session.item_count as i64,
                client_ip.to_string(),
                session.started_at.to_rfc3339(),
            ],
        )?;
        tx.commit()?;
        Ok(session)
    }

    pub fn session(&self, token: &SessionToken) -> StoreResult<EvaluationSession> {
        read_session(&self.conn(), token)?.ok_or(StoreError::UnknownToken)
    }

    /// Accepts the answer for the current question. The final answer is
    /// committed first, then the session is finalized in a second
    /// transaction that writes the result and completes the session together.
    pub fn submit_answer(
        &self,
        token: &SessionToken,
        index: usize,
        value: ResponseValue,
        now: DateTime<Utc>,
    ) -> StoreResult<AnswerReceipt> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let mut session = read_session(&tx, token)?.ok_or(StoreError::UnknownToken)?;
        let outcome = session.submit_answer(index, value)?;
        write_session(&tx, &session)?;
        tx.commit()?;
        match outcome {
            SubmitOutcome::Progress { next_index } => Ok(AnswerReceipt::Progress { next_index }),
            SubmitOutcome::Finished => {
                self.trip(FaultPoint::AfterAnswerPersist)?;
                let result = self.finalize_locked(&mut conn, session, now)?;
                Ok(AnswerReceipt::Finished { result_id: result.result_id })
            }
        }
    }

    /// Finalizes a session whose answers are all in.
    pub fn finalize(&self, token: &SessionToken, now: DateTime<Utc>) -> StoreResult<ResultRecord> {
        let mut conn = self.conn();
        let session = read_session(&conn, token)?.ok_or(StoreError::UnknownToken)?;
        self.finalize_locked(&mut conn, session, now)
    }

    fn finalize_locked(
        &self,
        conn: &mut Connection,
        mut session: EvaluationSession,
        now: DateTime<Utc>,
    ) -> StoreResult<ResultRecord> {
        let tx = conn.transaction()?;
        let new = session.finalize(now)?;
        let record = insert_result(&tx, new)?;
        self.trip(FaultPoint::BeforeFinalizeCommit)?;
        tx.execute(
            "UPDATE eval_sesiune SET phase = 'completed', client_ip = NULL, result_id = ?1 WHERE token = ?2",
            params![record.result_id, session.token.as_str()],
        )?;
        tx.commit()?;
        Ok(record)
    }

    pub fn abort_session(&self, token: &SessionToken) -> StoreResult<()> {
        let conn = self.conn();
        let mut session = read_session(&conn, token)?.ok_or(StoreError::UnknownToken)?;
        session.abort()?;
        write_session(&conn, &session)
    }

    /// Aborts every session older than the configured TTL.
    pub fn abort_stale(&self, now: DateTime<Utc>) -> StoreResult<usize> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let n = sweep_stale(&tx, now, self.config.session_ttl)?;
        tx.commit()?;
        Ok(n)
    }

    /// Finalizes sessions left fully answered by an interrupted finalization.
    pub fn recover(&self, now: DateTime<Utc>) -> StoreResult<usize> {
        let mut conn = self.conn();
        let pending: Vec<EvaluationSession> = {
            let mut stmt = conn.prepare(&format!("{SESSION_SELECT} WHERE phase = 'active'"))?;
            let rows = stmt.query_map([], session_from_row)?;
            rows.collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .collect::<StoreResult<Vec<_>>>()?
                .into_iter()
                .filter(EvaluationSession::awaiting_finalize)
                .collect()
        };
        let n = pending.len();
        for session in pending {
            self.finalize_locked(&mut conn, session, now)?;
        }
        Ok(n)
    }

    /// The questionnaire a student submitted, looked up by their own token.
    pub fn own_result(&self, token: &SessionToken) -> StoreResult<ResultRecord> {
        let conn = self.conn();
        let row: Option<(String, Option<i64>)> = conn
            .query_row("SELECT phase, result_id FROM eval_sesiune WHERE token = ?1", [token.as_str()], |r| {
                Ok((r.get(0)?, r.get(1)?))
            })
            .optional()?;
        match row {
            None => Err(StoreError::UnknownToken),
            Some((_, Some(id))) => read_result(&conn, id)?.ok_or(StoreError::UnknownToken),
            Some(_) => Err(SessionError::SessionNotActive.into()),
        }
    }

    // ---- results -------------------------------------------------------

    /// Raw questionnaires visible to `role`, optionally for one teacher.
    pub fn list_results(&self, role: ViewerRole, teacher: Option<TeacherId>) -> StoreResult<Vec<ResultRecord>> {
        let filter = match (role, teacher) {
            (ViewerRole::Public, _) => return Err(StoreError::AccessDenied),
            (ViewerRole::EvaluatedTeacher(own), Some(t)) if own != t => return Err(StoreError::AccessDenied),
            (ViewerRole::EvaluatedTeacher(own), _) => Some(own),
            (_, t) => t,
        };
        self.results_unchecked(filter)
    }

    /// All results (or one teacher's) without a role check, for aggregation
    /// and internal use. Never expose the output to unprivileged callers.
    pub fn results_unchecked(&self, teacher: Option<TeacherId>) -> StoreResult<Vec<ResultRecord>> {
        let conn = self.conn();
        let mut stmt = conn.prepare(
            "SELECT result_id, teacher_id, bank_digest, completed_at, answers FROM rezultate
             WHERE ?1 IS NULL OR teacher_id = ?1 ORDER BY result_id",
        )?;
        let rows = stmt.query_map([teacher.map(|t| t.0)], result_from_row)?;
        rows.collect::<Result<Vec<_>, _>>()?.into_iter().collect()
    }

    pub fn count_results(&self, teacher: TeacherId) -> StoreResult<u64> {
        let conn = self.conn();
        if read_teacher(&conn, teacher)?.is_none() {
            return Err(StoreError::TeacherNotFound(teacher));
        }
        let n: i64 =
            conn.query_row("SELECT COUNT(*) FROM rezultate WHERE teacher_id = ?1", [teacher.0], |r| r.get(0))?;
        Ok(n as u64)
    }

    pub fn integrity(&self) -> StoreResult<Integrity> {
        let conn = self.conn();
        let count = |sql: &str| -> StoreResult<u64> { Ok(conn.query_row(sql, [], |r| r.get::<_, i64>(0))? as u64) };
        let orphan_results = count(
            "SELECT COUNT(*) FROM rezultate r WHERE NOT EXISTS
             (SELECT 1 FROM eval_sesiune s WHERE s.result_id = r.result_id AND s.phase = 'completed')",
        )?;
        let completed_without_result = count(
            "SELECT COUNT(*) FROM eval_sesiune s WHERE s.phase = 'completed' AND NOT EXISTS
             (SELECT 1 FROM rezultate r WHERE r.result_id = s.result_id)",
        )?;
        drop(conn);
        let gaps =
            self.sessions_where("phase = 'active'")?.iter().filter(|s| s.cursor() != Some(s.answers.len() + 1)).count()
                as u64;
        Ok(Integrity { orphan_results, completed_without_result, active_sessions_with_gaps: gaps })
    }

    fn sessions_where(&self, clause: &str) -> StoreResult<Vec<EvaluationSession>> {
        let conn = self.conn();
        let mut stmt = conn.prepare(&format!("{SESSION_SELECT} WHERE {clause}"))?;
        let rows = stmt.query_map([], session_from_row)?;
        rows.collect::<Result<Vec<_>, _>>()?.into_iter().collect()
    }

    pub fn active_sessions(&self) -> StoreResult<Vec<EvaluationSession>> {
        self.sessions_where("phase = 'active'")
    }

    pub fn completed_session_count(&self) -> StoreResult<u64> {
        Ok(self.sessions_where("phase = 'completed'")?.len() as u64)
    }

    // ---- credentials ---------------------------------------------------

    pub fn has_admin(&self) -> StoreResult<bool> {
        Ok(self.conn().query_row("SELECT EXISTS (SELECT 1 FROM admin)", [], |r| r.get(0))?)
    }

    /// Stores the single administrator credential. An existing one is only
    /// replaced when `force` is set.
    pub fn init_admin(&self, username: &str, password: &str, force: bool) -> StoreResult<()> {
        if username.trim().is_empty() {
            return Err(StoreError::InvalidRecord("username must not be empty".into()));
        }
        if password.is_empty() {
            return Err(StoreError::InvalidRecord("password must not be empty".into()));
        }
        let digest =
            credentials::hash_password(password, &self.config.hash_params).map_err(StoreError::InvalidRecord)?;
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let exists: bool = tx.query_row("SELECT EXISTS (SELECT 1 FROM admin)", [], |r| r.get(0))?;
        if exists && !force {
            return Err(StoreError::AlreadyExists);
        }
        tx.execute("DELETE FROM admin", [])?;
        tx.execute("INSERT INTO admin (username, password_digest) VALUES (?1, ?2)", params![username, digest])?;
        tx.commit()?;
        Ok(())
    }

    /// Unknown usernames are checked against a dummy digest so both failure
    /// paths cost one full hash.
    pub fn verify_admin(&self, username: &str, password: &str) -> StoreResult<bool> {
        let stored: Option<String> = self
            .conn()
            .query_row("SELECT password_digest FROM admin WHERE username = ?1", [username], |r| r.get(0))
            .optional()?;
        Ok(match stored {
            Some(digest) => credentials::verify_password(password, &digest),
            None => {
                let _ = credentials::verify_password(password, &self.dummy_digest);
                false
            }
        })
    }

    /// Issues an access key for a dean, rector or evaluated teacher. The key
    /// is returned once; only its digest is kept.
    pub fn issue_role_key(&self, role: ViewerRole, now: DateTime<Utc>) -> StoreResult<String> {
        let (name, teacher) = match role {
            ViewerRole::Dean => ("dean", None),
            ViewerRole::Rector => ("rector", None),
            ViewerRole::EvaluatedTeacher(t) => ("evaluated_teacher", Some(t)),
            ViewerRole::Admin | ViewerRole::Public => {
                return Err(StoreError::InvalidRecord("keys are issued only for dean, rector or teacher".into()))
            }
        };
        let conn = self.conn();
        if let Some(t) = teacher {
            if read_teacher(&conn, t)?.is_none() {
                return Err(StoreError::TeacherNotFound(t));
            }
        }
        let key = credentials::generate_key();
        conn.execute(
            "INSERT INTO role_keys (key_hash, role, teacher_id, issued_at) VALUES (?1, ?2, ?3, ?4)",
            params![credentials::key_digest(&key), name, teacher.map(|t| t.0), now.to_rfc3339()],
        )?;
        Ok(key)
    }

    pub fn resolve_role_key(&self, key: &str) -> StoreResult<Option<ViewerRole>> {
        let row: Option<(String, Option<i64>)> = self
            .conn()
            .query_row(
                "SELECT role, teacher_id FROM role_keys WHERE key_hash = ?1",
                [credentials::key_digest(key)],
                |r| Ok((r.get(0)?, r.get(1)?)),
            )
            .optional()?;
        Ok(row.and_then(|(role, teacher)| match (role.as_str(), teacher) {
            ("dean", _) => Some(ViewerRole::Dean),
            ("rector", _) => Some(ViewerRole::Rector),
            ("evaluated_teacher", Some(t)) => Some(ViewerRole::EvaluatedTeacher(TeacherId(t))),
            _ => None,
        }))
    }
}

fn validate_name(name: &str) -> StoreResult<()> {
    if name.trim().is_empty() {
        return Err(StoreError::InvalidRecord("full name must not be empty".into()));
    }
    Ok(())
}

fn org_map_of(teachers: &[TeacherRecord]) -> StoreResult<OrgMap> {
    OrgMap::new(teachers.iter().map(|t| Assignment {
        teacher: t.teacher_id,
        chair: t.chair_id.clone(),
        faculty: t.faculty_id.clone(),
    }))
    .map_err(|e| StoreError::InvalidRecord(e.to_string()))
}

fn check_org_consistency(conn: &Connection) -> StoreResult<OrgMap> {
    let mut stmt = conn.prepare("SELECT teacher_id, full_name, photo, chair_id, faculty_id FROM listaprofi")?;
    let teachers = stmt.query_map([], teacher_from_row)?.collect::<Result<Vec<_>, _>>()?;
    org_map_of(&teachers)
}

fn teacher_from_row(row: &Row<'_>) -> rusqlite::Result<TeacherRecord> {
    Ok(TeacherRecord {
        teacher_id: TeacherId(row.get(0)?),
        full_name: row.get(1)?,
        photo: row.get(2)?,
        chair_id: ChairId(row.get(3)?),
        faculty_id: FacultyId(row.get(4)?),
    })
}

fn read_teacher(conn: &Connection, id: TeacherId) -> StoreResult<Option<TeacherRecord>> {
    Ok(conn
        .query_row(
            "SELECT teacher_id, full_name, photo, chair_id, faculty_id FROM listaprofi WHERE teacher_id = ?1",
            [id.0],
            teacher_from_row,
        )
        .optional()?)
}

fn read_state(conn: &Connection) -> StoreResult<AppStateRecord> {
    let (active, selected, bank_digest): (bool, Option<i64>, String) =
        conn.query_row("SELECT active, selected_teacher, bank_digest FROM stare WHERE id = 1", [], |r| {
            Ok((r.get(0)?, r.get(1)?, r.get(2)?))
        })?;
    let mut stmt = conn.prepare("SELECT ip FROM listaip")?;
    let ips = stmt.query_map([], |r| r.get::<_, String>(0))?;
    let mut allowlist = BTreeSet::new();
    for ip in ips {
        let ip = ip?;
        allowlist.insert(ip.parse().map_err(|_| StoreError::InvalidRecord(format!("bad allowlist entry {ip}")))?);
    }
    Ok(AppStateRecord { active, selected_teacher: selected.map(TeacherId), bank_digest, allowlist })
}

fn encode_answers(answers: &[ResponseValue]) -> String {
    answers.iter().map(|a| char::from(b'0' + a.get())).collect()
}

fn decode_answers(s: &str) -> StoreResult<Vec<ResponseValue>> {
    s.bytes()
        .map(|b| {
            ResponseValue::new(i64::from(b) - i64::from(b'0'))
                .map_err(|_| StoreError::InvalidRecord(format!("corrupt answer string {s:?}")))
        })
        .collect()
}

fn parse_time(s: &str) -> StoreResult<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|_| StoreError::InvalidRecord(format!("bad timestamp {s:?}")))
}

const SESSION_SELECT: &str =
    "SELECT token, teacher_id, bank_digest, item_count, client_ip, started_at, phase, answers FROM eval_sesiune";

type RawSession = (String, i64, String, i64, Option<String>, String, String, String);

fn session_from_row(r: &Row<'_>) -> rusqlite::Result<StoreResult<EvaluationSession>> {
    let raw: RawSession = (r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?, r.get(5)?, r.get(6)?, r.get(7)?);
    Ok(session_from_raw(raw))
}

fn session_from_raw(raw: RawSession) -> StoreResult<EvaluationSession> {
    let (token, teacher, bank_digest, item_count, ip, started_at, phase, answers) = raw;
    let answers = decode_answers(&answers)?;
    let phase = match phase.as_str() {
        "active" => SessionPhase::Active { cursor: answers.len() + 1 },
        "completed" => SessionPhase::Completed,
        "aborted" => SessionPhase::Aborted,
        other => return Err(StoreError::InvalidRecord(format!("unknown session phase {other:?}"))),
    };
    let client_ip = ip
        .map(|s| s.parse().map_err(|_| StoreError::InvalidRecord(format!("bad client address {s:?}"))))
        .transpose()?;
    Ok(EvaluationSession {
        token: SessionToken::from_string(token),
        teacher_id: TeacherId(teacher),
        bank_digest,
        item_count: item_count as usize,
        client_ip,
        started_at: parse_time(&started_at)?,
        phase,
        answers,
    })
}

fn read_session(conn: &Connection, token: &SessionToken) -> StoreResult<Option<EvaluationSession>> {
    conn.query_row(&format!("{SESSION_SELECT} WHERE token = ?1"), [token.as_str()], session_from_row)
        .optional()?
        .transpose()
}

/// Persists phase and answers of a session that is active or aborted.
fn write_session(conn: &Connection, session: &EvaluationSession) -> StoreResult<()> {
    let phase = match session.phase {
        SessionPhase::Active { .. } => "active",
        SessionPhase::Aborted => "aborted",
        SessionPhase::Completed => {
            return Err(StoreError::InvalidRecord("completed sessions are written by finalize".into()))
        }
    };
    conn.execute(
        "UPDATE eval_sesiune SET phase = ?1, answers = ?2, client_ip = ?3 WHERE token = ?4",
        params![
            phase,
            encode_answers(&session.answers),
            session.client_ip.map(|ip| ip.to_string()),
            session.token.as_str()
        ],
    )?;
    Ok(())
}

fn abort_all_active(tx: &Transaction<'_>) -> StoreResult<usize> {
    Ok(tx.execute(
        "UPDATE eval_sesiune SET phase = 'aborted', answers = '', client_ip = NULL WHERE phase = 'active'",
        [],
    )?)
}

fn sweep_stale(tx: &Transaction<'_>, now: DateTime<Utc>, ttl: Duration) -> StoreResult<usize> {
    let mut stmt = tx.prepare(&format!("{SESSION_SELECT} WHERE phase = 'active'"))?;
    let sessions = stmt.query_map([], session_from_row)?.collect::<Result<Vec<_>, _>>()?;
    let mut aborted = 0;
    for session in sessions {
        let mut session = session?;
        if session.abort_stale(now, ttl)? {
            write_session(tx, &session)?;
            aborted += 1;
        }
    }
    Ok(aborted)
}

fn insert_result(tx: &Transaction<'_>, new: NewResult) -> StoreResult<ResultRecord> {
    tx.execute(
        "INSERT INTO rezultate (teacher_id, bank_digest, completed_at, answers) VALUES (?1, ?2, ?3, ?4)",
        params![new.teacher_id.0, new.bank_digest, new.completed_at.to_rfc3339(), encode_answers(&new.answers)],
    )?;
    let id = tx.last_insert_rowid();
    Ok(new.with_id(id))
}

fn result_from_row(r: &Row<'_>) -> rusqlite::Result<StoreResult<ResultRecord>> {
    let (id, teacher, digest, completed, answers): (i64, i64, String, String, String) =
        (r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?);
    Ok((|| {
        Ok(ResultRecord {
            result_id: id,
            teacher_id: TeacherId(teacher),
            bank_digest: digest,
            completed_at: parse_time(&completed)?,
            answers: decode_answers(&answers)?,
        })
    })())
}

fn read_result(conn: &Connection, id: i64) -> StoreResult<Option<ResultRecord>> {
    conn.query_row(
        "SELECT result_id, teacher_id, bank_digest, completed_at, answers FROM rezultate WHERE result_id = ?1",
        [id],
        result_from_row,
    )
    .optional()?
    .transpose()
}
