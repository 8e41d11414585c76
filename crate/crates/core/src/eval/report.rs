use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::MosSummary;
use crate::{Error, Result};

pub const CSV_HEADER: &str = "metric,cohort,value,ci_low,ci_high";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub metric: String,
    pub cohort: String,
    pub value: f64,
    pub ci: Option<(f64, f64)>,
}

/// Evaluation report rendered as aligned text and as CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub title: String,
    pub rows: Vec<ReportRow>,
    /// Free-form lines appended to the text rendering only.
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Report {
            title: title.into(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, metric: &str, cohort: &str, value: f64) {
        self.rows.push(ReportRow {
            metric: metric.into(),
            cohort: cohort.into(),
            value,
            ci: None,
        });
    }

    pub fn push_mos(&mut self, metric: &str, cohort: &str, mos: &MosSummary) {
        self.rows.push(ReportRow {
            metric: metric.into(),
            cohort: cohort.into(),
            value: mos.mean,
            ci: Some(mos.ci()),
        });
    }

    pub fn get(&self, metric: &str, cohort: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.cohort == cohort)
            .map(|r| r.value)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let (lo, hi) = r.ci.map_or((String::new(), String::new()), |(l, h)| {
                (format!("{l:.6}"), format!("{h:.6}"))
            });
            writeln!(out, "{},{},{:.6},{lo},{hi}", r.metric, r.cohort, r.value).unwrap();
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.title);
        let width = self
            .rows
            .iter()
            .map(|r| r.metric.len() + r.cohort.len() + 3)
            .max()
            .unwrap_or(0);
        for r in &self.rows {
            let label = format!("{} [{}]", r.metric, r.cohort);
            let value = match r.ci {
                Some((lo, hi)) => format!("{:.2} ± {:.2}", r.value, (hi - lo) / 2.0),
                None if r.metric.ends_with("_pct") => format!("{:.2}%", r.value),
                None => format!("{:.4}", r.value),
            };
            writeln!(out, "  {label:<width$}  {value}").unwrap();
        }
        for n in &self.notes {
            writeln!(out, "  {n}").unwrap();
        }
        out
    }

    /// Writes `<stem>.txt` and `<stem>.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        for (ext, body) in [("txt", self.to_text()), ("csv", self.to_csv())] {
            let path = dir.join(format!("{stem}.{ext}"));
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
