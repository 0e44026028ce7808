//! Anonymized result dumps: one row per questionnaire with its raw answers.

use std::io::Write;

use evaluare_core::ResultRecord;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(format!("format must be csv or json, got {other:?}")),
        }
    }
}

#[derive(Serialize)]
struct ExportDocument<'a> {
    item_count: usize,
    results: &'a [ResultRecord],
}

pub fn csv_header(item_count: usize) -> Vec<String> {
    ["result_id", "teacher_id", "completed_at"]
        .into_iter()
        .map(str::to_owned)
        .chain((1..=item_count).map(|i| format!("q{i}")))
        .collect()
}

pub fn write_csv<W: Write>(results: &[ResultRecord], item_count: usize, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(item_count))?;
    for r in results {
        let mut row = vec![r.result_id.to_string(), r.teacher_id.to_string(), r.completed_at.to_rfc3339()];
        row.extend(r.answers.iter().map(|a| a.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(results: &[ResultRecord], item_count: usize, out: W) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(out, &ExportDocument { item_count, results })
}

pub fn write<W: Write>(
    format: ExportFormat,
    results: &[ResultRecord],
    item_count: usize,
    out: W,
) -> std::io::Result<()> {
    match format {
        ExportFormat::Csv => write_csv(results, item_count, out).map_err(std::io::Error::other),
        ExportFormat::Json => write_json(results, item_count, out).map_err(std::io::Error::other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use evaluare_core::{ResponseValue, TeacherId};

    fn result(id: i64) -> ResultRecord {
        ResultRecord {
            result_id: id,
            teacher_id: TeacherId(7),
            bank_digest: "d".into(),
            completed_at: chrono::Utc.with_ymd_and_hms(2009, 5, 4, 10, 0, 0).unwrap(),
            answers: vec![ResponseValue::new(4).unwrap(), ResponseValue::new(2).unwrap()],
        }
    }

    #[test]
    fn empty_export_is_header_only() {
        let mut out = Vec::new();
        write_csv(&[], 3, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "result_id,teacher_id,completed_at,q1,q2,q3\n");
    }

    #[test]
    fn one_row_per_result() {
        let mut out = Vec::new();
        write_csv(&[result(1), result(2)], 2, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "1,7,2009-05-04T10:00:00+00:00,4,2");
    }

    #[test]
    fn json_document() {
        let mut out = Vec::new();
        write_json(&[result(5)], 2, &mut out).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
        assert_eq!(v["results"][0]["answers"], serde_json::json!([4, 2]));
        assert_eq!(v["item_count"], 2);
    }
}
