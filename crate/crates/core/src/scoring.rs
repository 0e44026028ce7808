//! Likert scoring: raw responses, reverse-coded items, means and marks.
//!
//! Raw responses are kept as captured on the presented 1..=5 scale. Reversal
//! happens here, at scoring time. Means are carried as exact integer ratios
//! so mark boundaries are decided without rounding error.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bank::{Competence, Polarity, QuestionBank};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("response value {0} outside 1..=5")]
    InvalidValue(i64),
    #[error("expected {expected} answers, got {got}")]
    IncompleteAnswers { expected: usize, got: usize },
    #[error("mean {0} outside [1, 5]")]
    OutOfRange(f64),
}

/// A raw answer as selected by the student.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct ResponseValue(u8);

impl ResponseValue {
    pub fn new(value: i64) -> Result<Self, ScoringError> {
        match value {
            1..=5 => Ok(ResponseValue(value as u8)),
            _ => Err(ScoringError::InvalidValue(value)),
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = ResponseValue> {
        (1..=5).map(ResponseValue)
    }
}

impl TryFrom<i64> for ResponseValue {
    type Error = ScoringError;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        ResponseValue::new(value)
    }
}

impl From<ResponseValue> for u8 {
    fn from(v: ResponseValue) -> u8 {
        v.0
    }
}

impl fmt::Display for ResponseValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Post-reversal quality score, 5 = best.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ItemScore(u8);

impl ItemScore {
    pub fn get(self) -> u8 {
        self.0
    }

    /// Reinterprets a score as if it had been a raw answer.
    pub fn as_response(self) -> ResponseValue {
        ResponseValue(self.0)
    }
}

pub fn score_item(polarity: Polarity, response: ResponseValue) -> ItemScore {
    match polarity {
        Polarity::Direct => ItemScore(response.0),
        Polarity::Reverse => ItemScore(6 - response.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryMark {
    VeryPoor,
    Poor,
    Medium,
    Good,
    VeryGood,
}

impl CategoryMark {
    pub const ALL: [CategoryMark; 5] =
        [CategoryMark::VeryPoor, CategoryMark::Poor, CategoryMark::Medium, CategoryMark::Good, CategoryMark::VeryGood];

    pub fn label(self) -> &'static str {
        match self {
            CategoryMark::VeryPoor => "Very Poor",
            CategoryMark::Poor => "Poor",
            CategoryMark::Medium => "Medium",
            CategoryMark::Good => "Good",
            CategoryMark::VeryGood => "Very Good",
        }
    }
}

/// Maps a mean on the 1..5 scale to its nearest label; half points go up.
pub fn mark_from_mean(mean: f64) -> Result<CategoryMark, ScoringError> {
    if !(1.0..=5.0).contains(&mean) {
        return Err(ScoringError::OutOfRange(mean));
    }
    Ok(if mean < 1.5 {
        CategoryMark::VeryPoor
    } else if mean < 2.5 {
        CategoryMark::Poor
    } else if mean < 3.5 {
        CategoryMark::Medium
    } else if mean < 4.5 {
        CategoryMark::Good
    } else {
        CategoryMark::VeryGood
    })
}

/// Running total of item scores; mean and mark come from the exact ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScoreSum {
    pub total: u64,
    pub count: u64,
}

impl ScoreSum {
    pub fn add(&mut self, score: ItemScore) {
        self.total += u64::from(score.0);
        self.count += 1;
    }

    pub fn merge(&mut self, other: ScoreSum) {
        self.total += other.total;
        self.count += other.count;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.total as f64 / self.count as f64)
    }

    /// Mark decided on the exact ratio: `total/count >= b` iff `2*total >= 2b*count`.
    pub fn mark(&self) -> Option<CategoryMark> {
        if self.count == 0 {
            return None;
        }
        let twice = 2 * self.total;
        let c = self.count;
        Some(if twice < 3 * c {
            CategoryMark::VeryPoor
        } else if twice < 5 * c {
            CategoryMark::Poor
        } else if twice < 7 * c {
            CategoryMark::Medium
        } else if twice < 9 * c {
            CategoryMark::Good
        } else {
            CategoryMark::VeryGood
        })
    }

    pub fn mean_mark(&self) -> Option<MeanMark> {
        Some(MeanMark { mean: self.mean()?, mark: self.mark()? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMark {
    pub mean: f64,
    pub mark: CategoryMark,
}

impl MeanMark {
    pub fn from_mean(mean: f64) -> Result<Self, ScoringError> {
        Ok(MeanMark { mean, mark: mark_from_mean(mean)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionnaireReport {
    pub per_competence: BTreeMap<Competence, MeanMark>,
    pub overall: MeanMark,
}

fn check_complete(answers: &[ResponseValue], bank: &QuestionBank) -> Result<(), ScoringError> {
    if answers.len() != bank.len() {
        return Err(ScoringError::IncompleteAnswers { expected: bank.len(), got: answers.len() });
    }
    Ok(())
}

/// Per-competence score sums for one complete questionnaire, plus the overall sum.
pub fn competence_sums(
    answers: &[ResponseValue],
    bank: &QuestionBank,
) -> Result<(BTreeMap<Competence, ScoreSum>, ScoreSum), ScoringError> {
    check_complete(answers, bank)?;
    let mut per: BTreeMap<Competence, ScoreSum> = BTreeMap::new();
    let mut overall = ScoreSum::default();
    for (item, &answer) in bank.items().iter().zip(answers) {
        let score = score_item(item.polarity, answer);
        per.entry(item.competence).or_default().add(score);
        overall.add(score);
    }
    Ok((per, overall))
}

pub fn category_mean(
    answers: &[ResponseValue],
    bank: &QuestionBank,
    competence: Competence,
) -> Result<f64, ScoringError> {
    let (per, _) = competence_sums(answers, bank)?;
    Ok(per.get(&competence).and_then(ScoreSum::mean).expect("validated banks cover every competence"))
}

pub fn questionnaire_report(
    answers: &[ResponseValue],
    bank: &QuestionBank,
) -> Result<QuestionnaireReport, ScoringError> {
    let (per, overall) = competence_sums(answers, bank)?;
    Ok(QuestionnaireReport {
        per_competence: per.into_iter().map(|(c, s)| (c, s.mean_mark().expect("non-empty category"))).collect(),
        overall: overall.mean_mark().expect("non-empty bank"),
    })
}
