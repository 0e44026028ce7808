//! The ordered bank of questionnaire items.
//!
//! A bank is loaded from a TOML document with a top-level `item` array. Each
//! entry carries `index`, `text`, `competence` and `polarity`; an optional
//! `[scale]` table supplies the five presented option labels and the
//! per-polarity display labels used when showing a submitted questionnaire.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// The shipped 58-item bank.
pub const DEFAULT_BANK_TOML: &str = include_str!("../data/default_bank.toml");

/// Number of points on the response scale.
pub const SCALE_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Competence {
    #[serde(alias = "Scientific")]
    Scientific,
    #[serde(alias = "PsychoPedagogical", alias = "psychopedagogical")]
    PsychoPedagogical,
    #[serde(alias = "Psychosocial")]
    Psychosocial,
    #[serde(alias = "Managerial")]
    Managerial,
}

impl Competence {
    pub const ALL: [Competence; 4] =
        [Competence::Scientific, Competence::PsychoPedagogical, Competence::Psychosocial, Competence::Managerial];

    pub fn as_str(self) -> &'static str {
        match self {
            Competence::Scientific => "scientific",
            Competence::PsychoPedagogical => "psycho_pedagogical",
            Competence::Psychosocial => "psychosocial",
            Competence::Managerial => "managerial",
        }
    }
}

impl fmt::Display for Competence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    #[serde(alias = "Direct")]
    Direct,
    #[serde(alias = "Reverse")]
    Reverse,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Direct => "direct",
            Polarity::Reverse => "reverse",
        }
    }

    pub fn flipped(self) -> Polarity {
        match self {
            Polarity::Direct => Polarity::Reverse,
            Polarity::Reverse => Polarity::Direct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionItem {
    pub index: usize,
    pub text: String,
    pub competence: Competence,
    pub polarity: Polarity,
}

/// Labels attached to the response scale.
///
/// `options` are shown to the student in presentation order (raw response
/// 1..=5). The display labels are indexed by post-reversal score, so a
/// reverse item scored 5 shows `reverse_labels[4]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleLabels {
    pub options: [String; SCALE_POINTS],
    pub direct_labels: [String; SCALE_POINTS],
    pub reverse_labels: [String; SCALE_POINTS],
}

impl Default for ScaleLabels {
    fn default() -> Self {
        let s = |v: [&str; SCALE_POINTS]| v.map(str::to_owned);
        ScaleLabels {
            options: s(["Very Poor", "Poor", "Medium", "Good", "Very Good"]),
            direct_labels: s(["very little or not at all", "little", "moderately", "much", "very much"]),
            reverse_labels: s(["very much", "much", "moderately", "little", "very little or not at all"]),
        }
    }
}

impl ScaleLabels {
    pub fn display_label(&self, polarity: Polarity, score: u8) -> &str {
        let i = usize::from(score.clamp(1, 5)) - 1;
        match polarity {
            Polarity::Direct => &self.direct_labels[i],
            Polarity::Reverse => &self.reverse_labels[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BankError {
    #[error("malformed bank document: {0}")]
    Parse(String),
    #[error("invalid bank: {0}")]
    Validation(String),
    #[error("question index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionBank {
    items: Vec<QuestionItem>,
    digest: String,
    labels: ScaleLabels,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BankDocument {
    #[serde(default)]
    scale: Option<ScaleLabels>,
    #[serde(default, rename = "item")]
    items: Vec<QuestionItem>,
}

impl QuestionBank {
    /// Parses and validates a bank document.
    pub fn load(document: &str) -> Result<Self, BankError> {
        let doc: BankDocument = toml::from_str(document).map_err(|e| BankError::Parse(e.message().to_owned()))?;
        Self::from_items(doc.items, doc.scale.unwrap_or_default())
    }

    pub fn default_bank() -> Self {
        Self::load(DEFAULT_BANK_TOML).expect("shipped bank is valid")
    }

    /// Builds a bank from items listed in any order.
    pub fn from_items(mut items: Vec<QuestionItem>, labels: ScaleLabels) -> Result<Self, BankError> {
        if items.is_empty() {
            return Err(BankError::Validation("bank has no items".into()));
        }
        items.sort_by_key(|it| it.index);
        for (pos, item) in items.iter().enumerate() {
            if item.index != pos + 1 {
                return Err(BankError::Validation(format!(
                    "item indices must be contiguous from 1; expected {} but found {}",
                    pos + 1,
                    item.index
                )));
            }
            if item.text.trim().is_empty() {
                return Err(BankError::Validation(format!("item {} has empty text", item.index)));
            }
        }
        let present: BTreeSet<Competence> = items.iter().map(|it| it.competence).collect();
        if let Some(missing) = Competence::ALL.iter().find(|c| !present.contains(c)) {
            return Err(BankError::Validation(format!("competence {missing} has no items")));
        }
        if labels.options.iter().any(|l| l.trim().is_empty()) {
            return Err(BankError::Validation("scale option labels must be non-empty".into()));
        }
        let digest = compute_digest(&items);
        Ok(QuestionBank { items, digest, labels })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[QuestionItem] {
        &self.items
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn labels(&self) -> &ScaleLabels {
        &self.labels
    }

    pub fn item_at(&self, index: usize) -> Result<&QuestionItem, BankError> {
        index
            .checked_sub(1)
            .and_then(|i| self.items.get(i))
            .ok_or(BankError::IndexOutOfRange { index, len: self.items.len() })
    }

    pub fn items_in(&self, competence: Competence) -> impl Iterator<Item = &QuestionItem> {
        self.items.iter().filter(move |it| it.competence == competence)
    }
}

/// SHA-256 over the canonical `(index, text, competence, polarity)` stream.
/// Fields are separated by 0x1F and records terminated by 0x1E, neither of
/// which can appear in TOML basic strings unescaped.
fn compute_digest(items: &[QuestionItem]) -> String {
    let mut hasher = Sha256::new();
    for item in items {
        hasher.update(item.index.to_string().as_bytes());
        hasher.update([0x1f]);
        hasher.update(item.text.as_bytes());
        hasher.update([0x1f]);
        hasher.update(item.competence.as_str().as_bytes());
        hasher.update([0x1f]);
        hasher.update(item.polarity.as_str().as_bytes());
        hasher.update([0x1e]);
    }
    hex::encode(hasher.finalize())
}
