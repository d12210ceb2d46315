use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ClassMetrics, EvalResults};
use crate::corpus::EventClass;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    /// Aligned plain-text table.
    Text,
    /// The confusion matrix only, with a header row and a label column.
    ConfusionCsv,
}

pub fn export_report(results: &EvalResults, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(results)?),
        ReportFormat::Text => Ok(text_table(results)),
        ReportFormat::ConfusionCsv => confusion_csv(results),
    }
}

fn row(out: &mut String, name: &str, m: &ClassMetrics) {
    let _ = writeln!(
        out,
        "{name:<24} {:>6} {:>6} {:>6} {:>7.2} {:>7.2} {:>7.2}",
        m.tp,
        m.fp,
        m.fn_,
        100.0 * m.precision,
        100.0 * m.recall,
        100.0 * m.f1
    );
}

fn text_table(r: &EvalResults) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<24} {:>6} {:>6} {:>6} {:>7} {:>7} {:>7}", "class", "tp", "fp", "fn", "P", "R", "F1");
    for (class, m) in &r.per_class {
        row(&mut out, class.name(), m);
    }
    row(&mut out, "overall", &r.overall);
    let _ = writeln!(out);
    let _ = writeln!(out, "criterion: {}", r.criterion);
    let _ = writeln!(
        out,
        "detection P/R/F1: {:.2}/{:.2}/{:.2}",
        100.0 * r.detection.precision,
        100.0 * r.detection.recall,
        100.0 * r.detection.f1
    );
    let _ = writeln!(out, "macro-F1: {:.2}", 100.0 * r.macro_f1);
    out
}

fn confusion_csv(r: &EvalResults) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["gold\\pred".to_string()];
    header.extend(EventClass::ALL.iter().map(|c| c.code().to_string()));
    w.write_record(&header)?;
    for (class, counts) in EventClass::ALL.iter().zip(&r.confusion) {
        let mut rec = vec![class.code().to_string()];
        rec.extend(counts.iter().map(|c| c.to_string()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Write `<stem>.json`, `<stem>.txt` and `<stem>_confusion.csv` into `dir`.
pub fn write_reports(results: &EvalResults, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (format, name) in [
        (ReportFormat::Json, format!("{stem}.json")),
        (ReportFormat::Text, format!("{stem}.txt")),
        (ReportFormat::ConfusionCsv, format!("{stem}_confusion.csv")),
    ] {
        let path = dir.join(name);
        fs::write(&path, export_report(results, format)?).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::MatchCriterion;
    use std::collections::BTreeMap;

    fn results() -> EvalResults {
        let mut per_class = BTreeMap::new();
        for (i, &c) in EventClass::ALL.iter().enumerate() {
            per_class.insert(c, ClassMetrics::from_counts(i + 1, i, 2));
        }
        let mut confusion = vec![vec![0; 7]; 7];
        confusion[1][2] = 4;
        confusion[3][3] = 9;
        EvalResults {
            criterion: MatchCriterion::SPAN_AND_CLASS,
            per_class,
            overall: ClassMetrics::from_counts(28, 21, 14),
            detection: ClassMetrics::from_counts(30, 19, 12),
            macro_f1: 0.5,
            confusion,
            ..Default::default()
        }
    }

    #[test]
    fn json_round_trip() {
        let r = results();
        let back: EvalResults = serde_json::from_str(&export_report(&r, ReportFormat::Json).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn text_table_rows() {
        let t = export_report(&results(), ReportFormat::Text).unwrap();
        let table: Vec<&str> = t.lines().take_while(|l| !l.is_empty()).collect();
        assert_eq!(table.len(), 1 + 7 + 1);
        assert!(table[8].starts_with("overall"));
    }

    #[test]
    fn csv_is_a_seven_by_seven_grid() {
        let csv_text = export_report(&results(), ReportFormat::ConfusionCsv).unwrap();
        let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
        let grid: Vec<Vec<usize>> =
            rdr.records().map(|r| r.unwrap().iter().skip(1).map(|c| c.parse().unwrap()).collect()).collect();
        assert_eq!(grid.len(), 7);
        assert!(grid.iter().all(|r| r.len() == 7));
        assert_eq!(grid[1][2], 4);
    }
}
