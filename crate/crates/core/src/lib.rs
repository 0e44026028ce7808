//! Teaching-staff evaluation: questionnaire bank, Likert scoring with
//! reverse-coded items, the one-shot anonymous session protocol, durable
//! storage with role-gated results, and hierarchical aggregation.

pub mod aggregation;
pub mod bank;
pub mod org;
pub mod records;
pub mod scoring;
pub mod session;
pub mod store;

pub use aggregation::{ItemDistribution, UnitReport};
pub use bank::{Competence, Polarity, QuestionBank, QuestionItem};
pub use org::{ChairId, FacultyId, OrgMap, Scope, TeacherId};
pub use records::{AppStateRecord, ResultRecord, TeacherRecord, ViewerRole};
pub use scoring::{CategoryMark, ResponseValue};
pub use session::{EvaluationSession, SessionPhase, SessionToken};
pub use store::{Store, StoreConfig, StoreError};
