//! Hourly series, the clear-sky-index transform, train/test splitting and
//! CSV ingestion.

use std::io::Read;
use std::ops::Range;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Timestamp = DateTime<Utc>;

/// Stored in place of the clear-sky index at masked samples.
pub const MASKED_KCLS: f64 = f64::NAN;

/// Default daytime threshold on clear-sky GHI, Wh·m⁻².
pub const DEFAULT_THRESHOLD: f64 = 20.0;

/// Checks that `timestamps` are strictly increasing with a one-hour step.
pub(crate) fn check_hourly(timestamps: &[Timestamp]) -> Result<()> {
    for (i, w) in timestamps.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::NonMonotonicTimestamps { index: i + 1 });
        }
        if w[1] - w[0] != Duration::hours(1) {
            return Err(Error::NonHourlyStep { index: i + 1 });
        }
    }
    Ok(())
}

fn check_aligned(a: &[Timestamp], b: &[Timestamp], what: &str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::MisalignedSeries(format!("{what}: lengths {} and {}", a.len(), b.len())));
    }
    if let Some(i) = a.iter().zip(b).position(|(x, y)| x != y) {
        return Err(Error::MisalignedSeries(format!("{what}: timestamps differ at index {i}")));
    }
    Ok(())
}

/// Measured hourly GHI in Wh·m⁻². `None` marks a missing measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct IrradianceSeries {
    timestamps: Vec<Timestamp>,
    values: Vec<Option<f64>>,
}

impl IrradianceSeries {
    pub fn new(timestamps: Vec<Timestamp>, values: Vec<Option<f64>>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch { left: timestamps.len(), right: values.len() });
        }
        check_hourly(&timestamps)?;
        for (i, v) in values.iter().enumerate() {
            if let Some(v) = v {
                if !v.is_finite() || *v < 0.0 {
                    return Err(Error::InvalidParameter(format!("GHI at index {i} is {v}")));
                }
            }
        }
        Ok(IrradianceSeries { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn slice(&self, range: Range<usize>) -> Self {
        IrradianceSeries { timestamps: self.timestamps[range.clone()].to_vec(), values: self.values[range].to_vec() }
    }

    /// Linearly interpolates runs of at most `max_gap` missing hours that
    /// have measurements on both sides. Longer runs stay missing.
    pub fn interpolate_gaps(&self, max_gap: usize) -> Self {
        let mut values = self.values.clone();
        let mut i = 0;
        while i < values.len() {
            if values[i].is_some() {
                i += 1;
                continue;
            }
            let start = i;
            while i < values.len() && values[i].is_none() {
                i += 1;
            }
            let gap = i - start;
            if start == 0 || i == values.len() || gap > max_gap {
                continue;
            }
            let (a, b) = (values[start - 1].unwrap(), values[i].unwrap());
            for k in 0..gap {
                let w = (k + 1) as f64 / (gap + 1) as f64;
                values[start + k] = Some(a + w * (b - a));
            }
        }
        IrradianceSeries { timestamps: self.timestamps.clone(), values }
    }
}

/// Clear-sky GHI aligned with an [`IrradianceSeries`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClearSkySeries {
    timestamps: Vec<Timestamp>,
    values: Vec<f64>,
}

impl ClearSkySeries {
    pub fn new(timestamps: Vec<Timestamp>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch { left: timestamps.len(), right: values.len() });
        }
        check_hourly(&timestamps)?;
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("clear-sky GHI at index {i} is {}", values[i])));
        }
        Ok(ClearSkySeries { timestamps, values })
    }

    pub(crate) fn new_unchecked(timestamps: Vec<Timestamp>, values: Vec<f64>) -> Self {
        ClearSkySeries { timestamps, values }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, range: Range<usize>) -> Self {
        ClearSkySeries { timestamps: self.timestamps[range.clone()].to_vec(), values: self.values[range].to_vec() }
    }
}

/// Clear-sky index with its daytime validity mask.
///
/// Masked samples hold [`MASKED_KCLS`] and are excluded from fitting,
/// forecasting and scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearSkyIndexSeries {
    timestamps: Vec<Timestamp>,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl ClearSkyIndexSeries {
    /// Builds a series from raw index values; a sample is valid iff its value
    /// is finite and non-negative.
    pub fn from_values(timestamps: Vec<Timestamp>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch { left: timestamps.len(), right: values.len() });
        }
        check_hourly(&timestamps)?;
        let valid: Vec<bool> = values.iter().map(|v| v.is_finite() && *v >= 0.0).collect();
        let values = values.into_iter().zip(&valid).map(|(v, ok)| if *ok { v } else { MASKED_KCLS }).collect();
        Ok(ClearSkyIndexSeries { timestamps, values, valid })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn slice(&self, range: Range<usize>) -> Self {
        ClearSkyIndexSeries {
            timestamps: self.timestamps[range.clone()].to_vec(),
            values: self.values[range.clone()].to_vec(),
            valid: self.valid[range].to_vec(),
        }
    }

    /// Chains of sample indices over which lag windows may be formed.
    pub fn segments(&self, policy: LagPolicy) -> Vec<Vec<usize>> {
        segments(&self.valid, policy)
    }

    /// Values of each segment, in order.
    pub fn segment_values(&self, policy: LagPolicy) -> Vec<Vec<f64>> {
        self.segments(policy).into_iter().map(|seg| seg.into_iter().map(|i| self.values[i]).collect()).collect()
    }
}

/// How autoregressive lag windows treat masked samples (nights, missing
/// measurements).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagPolicy {
    /// Lags only span consecutive valid samples; a masked sample restarts the
    /// history, so the first hours after each night are not forecast.
    #[default]
    Contiguous,
    /// Masked samples are skipped and the last valid sample before a gap acts
    /// as the previous lag.
    Bridge,
}

/// Splits the valid positions of `valid` into lag chains under `policy`.
pub fn segments(valid: &[bool], policy: LagPolicy) -> Vec<Vec<usize>> {
    match policy {
        LagPolicy::Bridge => {
            let all: Vec<usize> = (0..valid.len()).filter(|&i| valid[i]).collect();
            if all.is_empty() {
                vec![]
            } else {
                vec![all]
            }
        }
        LagPolicy::Contiguous => {
            let mut out = Vec::new();
            let mut cur = Vec::new();
            for (i, ok) in valid.iter().enumerate() {
                if *ok {
                    cur.push(i);
                } else if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            if !cur.is_empty() {
                out.push(cur);
            }
            out
        }
    }
}

/// Computes `k = GHI / GHI_clearsky` where the clear-sky value reaches
/// `threshold` and the measurement exists; everything else is masked.
pub fn compute_clear_sky_index(
    ghi: &IrradianceSeries,
    cls: &ClearSkySeries,
    threshold: f64,
) -> Result<ClearSkyIndexSeries> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::InvalidParameter(format!("threshold must be > 0, got {threshold}")));
    }
    check_aligned(ghi.timestamps(), cls.timestamps(), "GHI vs clear-sky")?;
    let mut values = Vec::with_capacity(ghi.len());
    let mut valid = Vec::with_capacity(ghi.len());
    for (g, c) in ghi.values().iter().zip(cls.values()) {
        match g {
            Some(g) if *c >= threshold => {
                values.push(g / c);
                valid.push(true);
            }
            _ => {
                values.push(MASKED_KCLS);
                valid.push(false);
            }
        }
    }
    Ok(ClearSkyIndexSeries { timestamps: ghi.timestamps().to_vec(), values, valid })
}

/// Inverse transform: a clear-sky-index forecast back to GHI, floored at 0.
pub fn reconstruct_ghi(kcls_forecast: f64, cls_at_target: f64) -> f64 {
    (kcls_forecast * cls_at_target).max(0.0)
}

/// Half-open time interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TimeRange {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self> {
        if end <= start {
            return Err(Error::InvalidSplit(format!("empty range {start} .. {end}")));
        }
        Ok(TimeRange { start, end })
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }

    /// Index range of `timestamps` (sorted) falling inside this interval.
    pub fn indices(&self, timestamps: &[Timestamp]) -> Range<usize> {
        let lo = timestamps.partition_point(|t| *t < self.start);
        let hi = timestamps.partition_point(|t| *t < self.end);
        lo..hi
    }
}

/// In-sample / out-of-sample partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSplit", into = "RawSplit")]
pub struct SplitConfig {
    train: TimeRange,
    test: TimeRange,
}

#[derive(Serialize, Deserialize)]
struct RawSplit {
    train: TimeRange,
    test: TimeRange,
}

impl TryFrom<RawSplit> for SplitConfig {
    type Error = Error;
    fn try_from(raw: RawSplit) -> Result<Self> {
        SplitConfig::new(raw.train, raw.test)
    }
}

impl From<SplitConfig> for RawSplit {
    fn from(cfg: SplitConfig) -> Self {
        RawSplit { train: cfg.train, test: cfg.test }
    }
}

impl SplitConfig {
    pub fn new(train: TimeRange, test: TimeRange) -> Result<Self> {
        if train.end <= train.start || test.end <= test.start {
            return Err(Error::InvalidSplit("ranges must be non-empty".into()));
        }
        if test.start < train.end {
            return Err(Error::InvalidSplit(format!(
                "test range must start at or after the end of the train range ({} < {})",
                test.start, train.end
            )));
        }
        Ok(SplitConfig { train, test })
    }

    pub fn train(&self) -> TimeRange {
        self.train
    }

    pub fn test(&self) -> TimeRange {
        self.test
    }

    /// Index ranges of the train and test partitions within `timestamps`.
    pub fn index_ranges(&self, timestamps: &[Timestamp]) -> Result<(Range<usize>, Range<usize>)> {
        let (first, last) = match (timestamps.first(), timestamps.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return Err(Error::InvalidSplit("series is empty".into())),
        };
        for (name, r) in [("train", self.train), ("test", self.test)] {
            if r.start < first || r.start > last {
                return Err(Error::InvalidSplit(format!(
                    "{name} range starts at {}, outside the series span {first} .. {last}",
                    r.start
                )));
            }
        }
        Ok((self.train.indices(timestamps), self.test.indices(timestamps)))
    }
}

/// Partitions `series` into train and test pieces.
pub fn split(series: &ClearSkyIndexSeries, cfg: &SplitConfig) -> Result<(ClearSkyIndexSeries, ClearSkyIndexSeries)> {
    let (tr, te) = cfg.index_ranges(series.timestamps())?;
    let train = series.slice(tr);
    let test = series.slice(te);
    if train.valid_count() == 0 {
        return Err(Error::EmptyPartition { side: "train" });
    }
    if test.valid_count() == 0 {
        return Err(Error::EmptyPartition { side: "test" });
    }
    Ok((train, test))
}

/// Column layout of an input CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub timestamp_column: String,
    pub ghi_column: String,
    /// Optional precomputed clear-sky GHI column; when set, the built-in
    /// clear-sky model is bypassed.
    pub clearsky_column: Option<String>,
    /// Offset of timestamps without an explicit zone, in hours east of UTC.
    pub utc_offset_hours: f64,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            timestamp_column: "timestamp".into(),
            ghi_column: "ghi".into(),
            clearsky_column: None,
            utc_offset_hours: 0.0,
        }
    }
}

/// Result of reading an input file.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub ghi: IrradianceSeries,
    pub clear_sky: Option<ClearSkySeries>,
    pub rows: usize,
}

pub(crate) fn parse_timestamp(s: &str, utc_offset_hours: f64) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(n) = NaiveDateTime::parse_from_str(s, fmt) {
            let shift = Duration::seconds((utc_offset_hours * 3600.0).round() as i64);
            return Some(n.and_utc() - shift);
        }
    }
    None
}

pub(crate) fn format_timestamp(t: &Timestamp) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn parse_value(field: &str) -> std::result::Result<Option<f64>, String> {
    let f = field.trim();
    if f.is_empty() || f.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    f.parse::<f64>().map(Some).map_err(|e| format!("`{f}`: {e}"))
}

/// Reads an hourly CSV file.
pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Ingested> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, schema)
}

/// Reads hourly CSV data from any reader. Empty fields and `NaN` are
/// missing; a missing clear-sky value is read as 0 (masked downstream).
pub fn ingest_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Schema(format!("cannot read header: {e}")))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}` (header: {:?})", headers)))
    };
    let ts_col = column(&schema.timestamp_column)?;
    let ghi_col = column(&schema.ghi_column)?;
    let cs_col = schema.clearsky_column.as_deref().map(column).transpose()?;

    let mut timestamps = Vec::new();
    let mut ghi = Vec::new();
    let mut cs = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| record.get(i).ok_or_else(|| Error::Parse { line, reason: format!("missing field {i}") });
        let ts = parse_timestamp(field(ts_col)?, schema.utc_offset_hours).ok_or_else(|| Error::Parse {
            line,
            reason: format!("invalid timestamp `{}`", record.get(ts_col).unwrap_or("")),
        })?;
        let g = parse_value(field(ghi_col)?).map_err(|reason| Error::Parse { line, reason })?;
        if let Some(g) = g {
            if g < 0.0 || !g.is_finite() {
                return Err(Error::Parse { line, reason: format!("GHI must be non-negative, got {g}") });
            }
        }
        if let Some(c) = cs_col {
            let v = parse_value(field(c)?).map_err(|reason| Error::Parse { line, reason })?.unwrap_or(0.0);
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Parse { line, reason: format!("clear-sky GHI must be non-negative, got {v}") });
            }
            cs.push(v);
        }
        timestamps.push(ts);
        ghi.push(g);
    }
    let rows = timestamps.len();
    // Map ordering failures back to file lines (header is line 1).
    if let Err(e) = check_hourly(&timestamps) {
        let index = match e {
            Error::NonMonotonicTimestamps { index } | Error::NonHourlyStep { index } => index,
            _ => 0,
        };
        return Err(Error::Parse { line: index + 2, reason: e.to_string() });
    }
    let clear_sky = cs_col.map(|_| ClearSkySeries::new_unchecked(timestamps.clone(), cs));
    Ok(Ingested { ghi: IrradianceSeries { timestamps, values: ghi }, clear_sky, rows })
}

/// Writes `timestamp,ghi[,clearsky]` rows in the ingestible layout.
pub fn write_csv<W: std::io::Write>(
    writer: W,
    ghi: &IrradianceSeries,
    clear_sky: Option<&ClearSkySeries>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::Schema(e.to_string());
    if clear_sky.is_some() {
        w.write_record(["timestamp", "ghi", "clearsky"]).map_err(to_err)?;
    } else {
        w.write_record(["timestamp", "ghi"]).map_err(to_err)?;
    }
    for (i, t) in ghi.timestamps().iter().enumerate() {
        let g = ghi.values()[i].map(|v| v.to_string()).unwrap_or_default();
        let mut row = vec![format_timestamp(t), g];
        if let Some(cs) = clear_sky {
            row.push(cs.values()[i].to_string());
        }
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Schema(e.to_string()))?;
    Ok(())
}
