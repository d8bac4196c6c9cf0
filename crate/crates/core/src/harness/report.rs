use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::Statistic;
use crate::error::{Error, Result};
use crate::solver::Method;
use crate::threshold::ThresholdSpec;

pub const CSV_HEADER: [&str; 7] = ["frame", "method", "statistic", "multiplier", "threshold", "count_raw", "count_recon"];

/// One cell of the comparison grid. `threshold` is the value applied to
/// the reconstructed maps; the raw threshold is in the metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub frame: usize,
    pub method: Method,
    pub statistic: Statistic,
    pub multiplier: f64,
    pub threshold: f64,
    pub count_raw: usize,
    pub count_recon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    /// `raw` or a method name.
    pub source: String,
    /// `ace` or `bulk`; `bulk_persist` reuses the bulk threshold.
    pub statistic: Statistic,
    pub spec: ThresholdSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub method: Method,
    pub frames: usize,
    pub converged_frames: usize,
    pub max_iterations: usize,
    pub max_final_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub plan_sha256: String,
    pub config_sha256: String,
    pub frames: usize,
    pub background_frames: Option<(usize, usize)>,
    pub beta_raw: f64,
    pub beta_recon: f64,
    pub thresholds: Vec<ThresholdRecord>,
    pub convergence: Vec<ConvergenceSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
    pub metadata: ReportMetadata,
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

impl ComparisonReport {
    pub fn threshold(&self, source: &str, statistic: Statistic) -> Option<&ThresholdSpec> {
        let family = if statistic == Statistic::BulkPersist { Statistic::Bulk } else { statistic };
        self.metadata.thresholds.iter().find(|t| t.source == source && t.statistic == family).map(|t| &t.spec)
    }

    /// Rows for one `(method, statistic, multiplier)` series, by frame.
    pub fn series(&self, method: Method, statistic: Statistic, multiplier: f64) -> Vec<&ReportRow> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.statistic == statistic && r.multiplier == multiplier)
            .collect()
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.frame.to_string(),
                r.method.to_string(),
                r.statistic.to_string(),
                real(r.multiplier),
                real(r.threshold),
                r.count_raw.to_string(),
                r.count_recon.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is ascii"))
    }

    /// Parses a report CSV back into rows.
    pub fn rows_from_csv(text: &str) -> Result<Vec<ReportRow>> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
        if header != CSV_HEADER {
            return Err(Error::Format(format!("unexpected report header {header:?}")));
        }
        let bad = |f: &str| Error::Format(format!("bad report field {f:?}"));
        reader
            .records()
            .map(|rec| {
                let rec = rec?;
                Ok(ReportRow {
                    frame: rec[0].parse().map_err(|_| bad(&rec[0]))?,
                    method: rec[1].parse()?,
                    statistic: rec[2].parse()?,
                    multiplier: rec[3].parse().map_err(|_| bad(&rec[3]))?,
                    threshold: rec[4].parse().map_err(|_| bad(&rec[4]))?,
                    count_raw: rec[5].parse().map_err(|_| bad(&rec[5]))?,
                    count_recon: rec[6].parse().map_err(|_| bad(&rec[6]))?,
                })
            })
            .collect()
    }

    /// One chart per `(method, statistic)` at the unscaled threshold.
    pub fn svg_charts(&self) -> Vec<(String, String)> {
        let mut keys: Vec<(Method, Statistic)> = self.rows.iter().map(|r| (r.method, r.statistic)).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|(m, s)| (format!("{m}_{s}.svg"), render_svg(&format!("{m} / {s}"), &self.series(m, s, 1.0))))
            .collect()
    }

    /// Relative paths and contents of `report.csv`, `metadata.json` and
    /// `plots/*.svg`.
    pub fn files(&self) -> Result<Vec<(String, String)>> {
        let mut files = vec![
            ("report.csv".to_string(), self.to_csv_string()?),
            ("metadata.json".to_string(), serde_json::to_string_pretty(&self.metadata)?),
        ];
        files.extend(self.svg_charts().into_iter().map(|(name, svg)| (format!("plots/{name}"), svg)));
        Ok(files)
    }

    pub fn emit(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("plots"))?;
        for (rel, text) in self.files()? {
            fs::write(dir.join(rel), text)?;
        }
        Ok(())
    }
}

/// Pixels-over-threshold against frame: raw as blue crosses, reconstructed
/// as red circles.
pub fn render_svg(title: &str, rows: &[&ReportRow]) -> String {
    let (w, h, pad) = (640.0, 360.0, 48.0);
    let max_frame = rows.iter().map(|r| r.frame).max().unwrap_or(0).max(1) as f64;
    let max_count = rows.iter().map(|r| r.count_raw.max(r.count_recon)).max().unwrap_or(0).max(1) as f64;
    let x = |f: usize| pad + (w - 2.0 * pad) * f as f64 / max_frame;
    let y = |c: usize| h - pad - (h - 2.0 * pad) * c as f64 / max_count;
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = write!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    let _ = write!(
        s,
        r#"<path d="M{pad} {pad} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = h - pad,
        r = w - pad
    );
    let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="middle">frame</text>"#, w / 2.0, h - 10.0);
    let _ = write!(s, r#"<text x="{pad}" y="{}" text-anchor="end">0</text>"#, h - pad + 14.0);
    let _ = write!(s, r#"<text x="{}" y="{pad}" text-anchor="end">{max_count}</text>"#, pad - 4.0);
    let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="middle">{max_frame}</text>"#, w - pad, h - pad + 14.0);
    for r in rows {
        let (cx, cy) = (x(r.frame), y(r.count_raw));
        let _ = write!(
            s,
            r#"<path d="M{} {} l6 6 M{} {} l-6 6" stroke="blue"/>"#,
            cx - 3.0,
            cy - 3.0,
            cx + 3.0,
            cy - 3.0
        );
        let _ = write!(s, r#"<circle cx="{cx}" cy="{}" r="3" fill="none" stroke="red"/>"#, y(r.count_recon));
    }
    let _ = write!(
        s,
        r#"<text x="{}" y="{}" fill="blue">x raw</text><text x="{}" y="{}" fill="red">o reconstructed</text>"#,
        w - 170.0,
        pad - 16.0,
        w - 110.0,
        pad - 16.0
    );
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
