//! Plot data: measured-vs-forecast scatter and a time-slice window, each as
//! CSV plus a small static SVG.

use std::fmt::Write as _;
use std::io::Write;

use chrono::Duration;

use crate::committee::RecordStream;
use crate::data::{format_timestamp, reconstruct_ghi, Timestamp};
use crate::error::{Error, Result};
use crate::eval::Evaluation;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;

fn csv_err(e: csv::Error) -> Error {
    Error::Schema(e.to_string())
}

/// Scatter rows `model,timestamp,measured,forecast` for every scored hour.
pub fn write_scatter_csv<W: Write>(eval: &Evaluation, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["model", "timestamp", "ghi_measured", "ghi_forecast"]).map_err(csv_err)?;
    for (m, name) in eval.models.iter().enumerate() {
        for s in &eval.scored {
            w.write_record([
                name.clone(),
                format_timestamp(&s.timestamp),
                s.measured.to_string(),
                s.forecasts[m].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Schema(e.to_string()))
}

fn svg_header(title: &str, xlabel: &str, ylabel: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, WIDTH / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    s
}

fn legend(s: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{name}</text>"#,
            MARGIN + 8.0,
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            MARGIN + 22.0,
            y
        );
    }
}

fn scale(v: f64, max: f64, lo: f64, hi: f64) -> f64 {
    if max <= 0.0 {
        lo
    } else {
        lo + (hi - lo) * v / max
    }
}

/// Measured (x) against forecast (y) for every model, with the 1:1 line.
pub fn scatter_svg(eval: &Evaluation) -> String {
    let max = eval
        .scored
        .iter()
        .flat_map(|s| s.forecasts.iter().chain(std::iter::once(&s.measured)))
        .fold(0.0_f64, |a, b| a.max(*b));
    let mut s = svg_header("Measured vs forecast GHI", "Measured GHI (Wh/m2)", "Forecast GHI (Wh/m2)");
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="gray" stroke-dasharray="4 3"/>"#);
    for (m, _) in eval.models.iter().enumerate() {
        let _ = writeln!(s, r#"<g fill="{}" fill-opacity="0.35">"#, PALETTE[m % PALETTE.len()]);
        for r in &eval.scored {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="1.5"/>"#,
                scale(r.measured, max, x0, x1),
                scale(r.forecasts[m], max, y0, y1)
            );
        }
        let _ = writeln!(s, "</g>");
    }
    let names: Vec<&str> = eval.models.iter().map(String::as_str).collect();
    legend(&mut s, &names);
    s.push_str("</svg>\n");
    s
}

/// One unmasked hour of a time-slice window.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceRow {
    pub timestamp: Timestamp,
    pub ghi_measured: Option<f64>,
    /// Member GHI forecasts, then the committee.
    pub forecasts: Vec<Option<f64>>,
}

/// Hours `[start, start + days)` of a record stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSlice {
    pub start: Timestamp,
    pub hours: usize,
    /// Column names of `SliceRow::forecasts`.
    pub models: Vec<String>,
    /// Unmasked hours only.
    pub rows: Vec<SliceRow>,
    /// Hours of the window present in the stream but masked.
    pub n_masked: usize,
    /// Hours of the window absent from the stream.
    pub n_missing: usize,
}

pub fn time_slice(stream: &RecordStream, start: Timestamp, days: u32) -> TimeSlice {
    let hours = 24 * days as usize;
    let end = start + Duration::hours(hours as i64);
    let mut models = stream.member_names.clone();
    models.push("committee".into());
    let mut rows = Vec::new();
    let mut n_masked = 0;
    let mut present = 0;
    for r in stream.records.iter().filter(|r| r.timestamp >= start && r.timestamp < end) {
        present += 1;
        if r.kcls_measured.is_none() {
            n_masked += 1;
            continue;
        }
        let mut forecasts: Vec<Option<f64>> =
            r.member_kcls.iter().map(|k| k.map(|k| reconstruct_ghi(k, r.ghi_clearsky))).collect();
        forecasts.push(r.committee_ghi);
        rows.push(SliceRow { timestamp: r.timestamp, ghi_measured: r.ghi_measured, forecasts });
    }
    TimeSlice { start, hours, models, rows, n_masked, n_missing: hours - present }
}

impl TimeSlice {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["timestamp".to_string(), "ghi_measured".into()];
        header.extend(self.models.iter().map(|m| format!("{m}_ghi")));
        w.write_record(&header).map_err(csv_err)?;
        let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            let mut row = vec![format_timestamp(&r.timestamp), cell(r.ghi_measured)];
            row.extend(r.forecasts.iter().map(|f| cell(*f)));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Schema(e.to_string()))
    }

    /// Measured GHI and the committee forecast over the window; gaps break
    /// the lines.
    pub fn svg(&self) -> String {
        let committee = self.models.len() - 1;
        let max =
            self.rows.iter().flat_map(|r| [r.ghi_measured, r.forecasts[committee]]).flatten().fold(0.0_f64, f64::max);
        let title = format!("GHI from {} ({} h)", format_timestamp(&self.start), self.hours);
        let mut s = svg_header(&title, "Hour of window", "GHI (Wh/m2)");
        let x = |t: &Timestamp| {
            let h = (*t - self.start).num_hours() as f64;
            scale(h, self.hours as f64, MARGIN, WIDTH - MARGIN)
        };
        let series: [(&str, Box<dyn Fn(&SliceRow) -> Option<f64>>); 2] = [
            ("measured", Box::new(|r: &SliceRow| r.ghi_measured)),
            ("committee", Box::new(move |r: &SliceRow| r.forecasts[committee])),
        ];
        for (k, (_, get)) in series.iter().enumerate() {
            let mut runs: Vec<Vec<(f64, f64)>> = Vec::new();
            let mut prev: Option<Timestamp> = None;
            for r in &self.rows {
                let Some(v) = get(r) else {
                    prev = None;
                    continue;
                };
                let pt = (x(&r.timestamp), scale(v, max, HEIGHT - MARGIN, MARGIN));
                match (prev, runs.last_mut()) {
                    (Some(p), Some(run)) if r.timestamp - p == Duration::hours(1) => run.push(pt),
                    _ => runs.push(vec![pt]),
                }
                prev = Some(r.timestamp);
            }
            for run in runs {
                let pts: Vec<String> = run.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                    PALETTE[k],
                    pts.join(" ")
                );
            }
        }
        legend(&mut s, &series.iter().map(|s| s.0).collect::<Vec<_>>());
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::committee::{ForecastRecord, RecordFlag};
    use crate::eval::{evaluate_run, EvalOptions};
    use chrono::{TimeZone, Utc};

    fn stream(days: usize) -> RecordStream {
        let t0 = Utc.with_ymd_and_hms(2006, 6, 1, 0, 0, 0).unwrap();
        let records = (0..24 * days)
            .map(|i| {
                let h = i % 24;
                let day = (6..18).contains(&h);
                let cs = if day { 800.0 } else { 0.0 };
                let k = 0.5 + 0.01 * (i % 7) as f64;
                ForecastRecord {
                    timestamp: t0 + Duration::hours(i as i64),
                    ghi_measured: Some(if day { cs * k } else { 0.0 }),
                    ghi_clearsky: cs,
                    kcls_measured: day.then_some(k),
                    member_kcls: vec![day.then_some(k)],
                    committee_kcls: day.then_some(k),
                    committee_ghi: day.then_some(cs * k),
                    flag: if day { RecordFlag::Ok } else { RecordFlag::Masked },
                }
            })
            .collect();
        RecordStream { member_names: vec!["a".into()], records }
    }

    #[test]
    fn four_day_window_counts() {
        let s = stream(10);
        let w = time_slice(&s, s.records[48].timestamp, 4);
        assert_eq!(w.hours, 96);
        assert_eq!(w.n_masked, 4 * 12);
        assert_eq!(w.rows.len() + w.n_masked, 96);
        assert_eq!(w.n_missing, 0);
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 48);
        assert!(w.svg().contains("<polyline"));
    }

    #[test]
    fn window_past_the_end_reports_missing_hours() {
        let s = stream(2);
        let w = time_slice(&s, s.records[24].timestamp, 4);
        assert_eq!(w.n_missing, 72);
        assert_eq!(w.rows.len() + w.n_masked, 24);
    }

    #[test]
    fn scatter_outputs() {
        let e = evaluate_run(&stream(3), &EvalOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_scatter_csv(&e, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + e.models.len() * e.scored.len());
        let svg = scatter_svg(&e);
        assert_eq!(svg.matches("<circle").count(), e.models.len() * e.scored.len());
    }
}
