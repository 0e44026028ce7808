//! Statistical processing of finalized questionnaires per teacher, chair,
//! faculty and university.
//!
//! Reports pool item scores: each questionnaire weighs equally regardless of
//! which teacher it belongs to. Questionnaires from different banks are never
//! merged.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::bank::{BankError, Competence, QuestionBank, SCALE_POINTS};
use crate::org::{OrgMap, Scope, TeacherId};
use crate::records::ResultRecord;
use crate::scoring::{competence_sums, MeanMark, ScoreSum, ScoringError};

#[derive(Debug, Error, PartialEq)]
pub enum AggregationError {
    #[error("result {result_id} was recorded against a different question bank")]
    BankMismatch { result_id: i64 },
    #[error("unknown organisational unit {0:?}")]
    UnknownUnit(Scope),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// How per-competence means are combined across questionnaires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Formulation {
    /// Mean of every item score in the scope.
    #[default]
    Pooled,
    /// Mean of the per-questionnaire category means.
    MeanOfQuestionnaireMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitReport {
    pub scope: Scope,
    pub questionnaire_count: u64,
    /// Empty when `questionnaire_count` is zero.
    pub per_competence: BTreeMap<Competence, MeanMark>,
    pub overall: Option<MeanMark>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemDistribution {
    pub item_index: usize,
    /// `counts[v - 1]` is the number of raw responses equal to `v`.
    pub counts: [u64; SCALE_POINTS],
}

impl ItemDistribution {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

impl Serialize for ItemDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            item_index: usize,
            counts: BTreeMap<String, &'a u64>,
        }
        Repr {
            item_index: self.item_index,
            counts: self.counts.iter().enumerate().map(|(i, c)| ((i + 1).to_string(), c)).collect(),
        }
        .serialize(serializer)
    }
}

fn check_digest(result: &ResultRecord, bank: &QuestionBank) -> Result<(), AggregationError> {
    if result.bank_digest != bank.digest() {
        return Err(AggregationError::BankMismatch { result_id: result.result_id });
    }
    Ok(())
}

/// Aggregates an arbitrary set of results under the given scope label.
pub fn aggregate<'r, I>(
    scope: Scope,
    results: I,
    bank: &QuestionBank,
    formulation: Formulation,
) -> Result<UnitReport, AggregationError>
where
    I: IntoIterator<Item = &'r ResultRecord>,
{
    let mut pooled: BTreeMap<Competence, ScoreSum> = BTreeMap::new();
    let mut pooled_overall = ScoreSum::default();
    let mut mean_sums: BTreeMap<Competence, f64> = BTreeMap::new();
    let mut overall_mean_sum = 0.0;
    let mut count = 0u64;

    for result in results {
        check_digest(result, bank)?;
        let (per, overall) = competence_sums(&result.answers, bank)?;
        for (competence, sum) in per {
            pooled.entry(competence).or_default().merge(sum);
            *mean_sums.entry(competence).or_default() += sum.mean().unwrap_or_default();
        }
        pooled_overall.merge(overall);
        overall_mean_sum += overall.mean().unwrap_or_default();
        count += 1;
    }

    let (per_competence, overall) = match formulation {
        Formulation::Pooled => {
            (pooled.into_iter().filter_map(|(c, s)| Some((c, s.mean_mark()?))).collect(), pooled_overall.mean_mark())
        }
        Formulation::MeanOfQuestionnaireMeans if count > 0 => {
            let n = count as f64;
            let per = mean_sums
                .into_iter()
                .map(|(c, s)| Ok((c, MeanMark::from_mean(s / n)?)))
                .collect::<Result<_, ScoringError>>()?;
            (per, Some(MeanMark::from_mean(overall_mean_sum / n)?))
        }
        Formulation::MeanOfQuestionnaireMeans => (BTreeMap::new(), None),
    };
    Ok(UnitReport { scope, questionnaire_count: count, per_competence, overall })
}

/// Report over one teacher's questionnaires; results of other teachers are ignored.
pub fn teacher_report(
    teacher: TeacherId,
    results: &[ResultRecord],
    bank: &QuestionBank,
) -> Result<UnitReport, AggregationError> {
    aggregate(Scope::Teacher(teacher), results.iter().filter(|r| r.teacher_id == teacher), bank, Formulation::Pooled)
}

/// Report over every questionnaire whose teacher falls under `scope`.
pub fn unit_report(
    scope: &Scope,
    org_map: &OrgMap,
    all_results: &[ResultRecord],
    bank: &QuestionBank,
) -> Result<UnitReport, AggregationError> {
    unit_report_with(scope, org_map, all_results, bank, Formulation::Pooled)
}

pub fn unit_report_with(
    scope: &Scope,
    org_map: &OrgMap,
    all_results: &[ResultRecord],
    bank: &QuestionBank,
    formulation: Formulation,
) -> Result<UnitReport, AggregationError> {
    if !org_map.resolves(scope) {
        return Err(AggregationError::UnknownUnit(scope.clone()));
    }
    aggregate(scope.clone(), all_results.iter().filter(|r| org_map.contains(scope, r.teacher_id)), bank, formulation)
}

/// Histogram of raw (pre-reversal) responses to one item.
pub fn item_distribution(
    results: &[ResultRecord],
    bank: &QuestionBank,
    item_index: usize,
) -> Result<ItemDistribution, AggregationError> {
    bank.item_at(item_index)?;
    let mut counts = [0u64; SCALE_POINTS];
    for result in results {
        check_digest(result, bank)?;
        let answer = result
            .answers
            .get(item_index - 1)
            .ok_or(ScoringError::IncompleteAnswers { expected: bank.len(), got: result.answers.len() })?;
        counts[usize::from(answer.get()) - 1] += 1;
    }
    Ok(ItemDistribution { item_index, counts })
}

pub fn all_item_distributions(
    results: &[ResultRecord],
    bank: &QuestionBank,
) -> Result<Vec<ItemDistribution>, AggregationError> {
    (1..=bank.len()).map(|i| item_distribution(results, bank, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::org::{Assignment, ChairId, FacultyId};
    use crate::scoring::{questionnaire_report, ResponseValue};
    use chrono::Utc;

    fn result(id: i64, teacher: i64, bank: &QuestionBank, answers: Vec<i64>) -> ResultRecord {
        ResultRecord {
            result_id: id,
            teacher_id: TeacherId(teacher),
            bank_digest: bank.digest().to_owned(),
            completed_at: Utc::now(),
            answers: answers.into_iter().map(|v| ResponseValue::new(v).unwrap()).collect(),
        }
    }

    #[test]
    fn empty_scope_reports_absence() {
        let bank = QuestionBank::default_bank();
        let report = teacher_report(TeacherId(1), &[], &bank).unwrap();
        assert_eq!(report.questionnaire_count, 0);
        assert!(report.per_competence.is_empty());
        assert!(report.overall.is_none());
    }

    #[test]
    fn single_questionnaire_matches_questionnaire_report() {
        let bank = QuestionBank::default_bank();
        let answers: Vec<i64> = (0..58).map(|i| (i * 7 % 5) + 1).collect();
        let r = result(1, 1, &bank, answers);
        let unit = teacher_report(TeacherId(1), std::slice::from_ref(&r), &bank).unwrap();
        let single = questionnaire_report(&r.answers, &bank).unwrap();
        assert_eq!(unit.per_competence, single.per_competence);
        assert_eq!(unit.overall, Some(single.overall));
    }

    #[test]
    fn mixed_digest_rejected() {
        let bank = QuestionBank::default_bank();
        let mut r = result(9, 1, &bank, vec![3; 58]);
        r.bank_digest = "other".into();
        assert_eq!(
            teacher_report(TeacherId(1), &[r], &bank).unwrap_err(),
            AggregationError::BankMismatch { result_id: 9 }
        );
    }

    #[test]
    fn distribution_tally() {
        let bank = QuestionBank::default_bank();
        let rs: Vec<_> = [5, 5, 4]
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut a = vec![3; 58];
                a[0] = v;
                result(i as i64 + 1, 1, &bank, a)
            })
            .collect();
        let d = item_distribution(&rs, &bank, 1).unwrap();
        assert_eq!(d.counts, [0, 0, 0, 1, 2]);
        assert_eq!(item_distribution(&[], &bank, 1).unwrap().counts, [0; 5]);
        assert!(matches!(item_distribution(&rs, &bank, 59), Err(AggregationError::Bank(_))));
        let json = serde_json::to_value(&d).unwrap();
        assert_eq!(json["counts"]["5"], 2);
    }

    #[test]
    fn unit_scopes() {
        let bank = QuestionBank::default_bank();
        let map = OrgMap::new([Assignment {
            teacher: TeacherId(1),
            chair: ChairId("info".into()),
            faculty: FacultyId("fcia".into()),
        }])
        .unwrap();
        let rs = vec![result(1, 1, &bank, vec![4; 58]), result(2, 2, &bank, vec![1; 58])];
        let chair = unit_report(&Scope::Chair(ChairId("info".into())), &map, &rs, &bank).unwrap();
        let teacher = teacher_report(TeacherId(1), &rs, &bank).unwrap();
        assert_eq!(chair.per_competence, teacher.per_competence);
        assert_eq!(chair.questionnaire_count, 1);
        assert_eq!(
            unit_report(&Scope::Chair(ChairId("law".into())), &map, &rs, &bank).unwrap_err(),
            AggregationError::UnknownUnit(Scope::Chair(ChairId("law".into())))
        );
    }
}
