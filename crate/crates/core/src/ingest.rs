//! Loading metric series from CSV snapshots or a remote REST endpoint.
//!
//! Snapshots are plain `date,value` CSV files named `<CODE>.csv`. Calendar
//! gaps inside a series are passed through untouched.

use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{NaiveDate, Utc};

use crate::error::{Error, Result};
use crate::metric::MetricCode;
use crate::series::MetricSeries;

/// First record of every analysed series: the day the price left zero.
pub const STUDY_START: NaiveDate = match NaiveDate::from_ymd_opt(2010, 8, 16) {
    Some(d) => d,
    None => unreachable!(),
};

/// ATRCT is zero before this date.
pub const ATRCT_START: NaiveDate = match NaiveDate::from_ymd_opt(2011, 12, 2) {
    Some(d) => d,
    None => unreachable!(),
};

pub const DEFAULT_PATH_TEMPLATE: &str = "{base}/datasets/BCHAIN/{CODE}.csv";
pub const DEFAULT_API_KEY_ENV: &str = "DATALINK_API_KEY";

pub fn snapshot_path(dir: &Path, code: MetricCode) -> PathBuf {
    dir.join(format!("{code}.csv"))
}

/// Reads a `date,value` CSV file.
pub fn load_csv(path: &Path, code: MetricCode) -> Result<MetricSeries> {
    let file =
        File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    read_csv(file, code, &path.display().to_string())
}

/// Loads `<dir>/<CODE>.csv`.
pub fn load_snapshot(dir: &Path, code: MetricCode) -> Result<MetricSeries> {
    load_csv(&snapshot_path(dir, code), code)
}

/// Parses `date,value` CSV from any reader. `source` names the input in errors.
///
/// The header is matched case-insensitively, so exports with `Date,Value`
/// headers load unchanged. Rows may arrive in any order; duplicates are
/// rejected.
pub fn read_csv<R: Read>(reader: R, code: MetricCode, source: &str) -> Result<MetricSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let parse_err = |row: usize, message: String| Error::Parse {
        path: source.to_string(),
        row,
        message,
    };

    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyInput(source.to_string()));
    }
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(date_col), Some(value_col)) = (column("date"), column("value")) else {
        return Err(parse_err(
            1,
            format!(
                "expected header `date,value`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    };

    let mut records: Vec<(NaiveDate, f64, usize)> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| parse_err(line, e.to_string()))?;
        let raw_date = row
            .get(date_col)
            .ok_or_else(|| parse_err(line, "missing date".into()))?;
        let raw_value = row
            .get(value_col)
            .ok_or_else(|| parse_err(line, "missing value".into()))?;
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|e| parse_err(line, format!("bad date `{raw_date}`: {e}")))?;
        let value: f64 = raw_value
            .parse()
            .map_err(|e| parse_err(line, format!("bad value `{raw_value}`: {e}")))?;
        if !value.is_finite() {
            return Err(Error::InvalidValue {
                date,
                value,
                reason: "not finite",
            });
        }
        if value < 0.0 {
            return Err(Error::InvalidValue {
                date,
                value,
                reason: "negative",
            });
        }
        records.push((date, value, line));
    }
    if records.is_empty() {
        return Err(Error::EmptyInput(source.to_string()));
    }

    records.sort_by_key(|r| r.0);
    if let Some(w) = records.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateDate {
            date: w[1].0,
            row: w[0].2.max(w[1].2),
        });
    }
    let (dates, values) = records.into_iter().map(|(d, v, _)| (d, v)).unzip();
    MetricSeries::new(code, dates, values)
}

/// Writes `date,value` CSV. Values use the shortest representation that
/// parses back to the same bits.
pub fn write_csv<W: Write>(series: &MetricSeries, mut out: W) -> Result<()> {
    writeln!(out, "date,value")?;
    for (date, value) in series.iter() {
        writeln!(out, "{},{}", date.format("%Y-%m-%d"), value)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `<dir>/<CODE>.csv`, creating `dir` if needed.
pub fn write_snapshot(dir: &Path, series: &MetricSeries) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = snapshot_path(dir, series.code());
    let mut buf = Vec::new();
    write_csv(series, &mut buf)?;
    fs::write(&path, buf)?;
    Ok(path)
}

/// Drops records before the study start; ATRCT additionally starts on
/// 2011-12-02.
pub fn clip_to_study_window(series: &MetricSeries) -> MetricSeries {
    let start = if series.code() == MetricCode::ATRCT {
        ATRCT_START
    } else {
        STUDY_START
    };
    match series.last_date() {
        Some(last) if last >= start => crate::series::slice_window(series, start, last),
        _ => MetricSeries::empty(series.code()),
    }
}

/// How the API key travels with the request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuthPlacement {
    Query(String),
    Header(String),
}

impl Default for AuthPlacement {
    fn default() -> Self {
        AuthPlacement::Query("api_key".into())
    }
}

/// A Quandl-style dataset endpoint.
#[derive(Debug, Clone)]
pub struct RemoteSource {
    pub base_url: String,
    /// `{base}` and `{CODE}` are substituted.
    pub path_template: String,
    pub auth: AuthPlacement,
    pub timeout: Duration,
}

impl RemoteSource {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            path_template: DEFAULT_PATH_TEMPLATE.to_string(),
            auth: AuthPlacement::default(),
            timeout: Duration::from_secs(30),
        }
    }

    pub fn url_for(&self, code: MetricCode) -> String {
        self.path_template
            .replace("{base}", self.base_url.trim_end_matches('/'))
            .replace("{CODE}", code.as_str())
    }
}

/// Reads the API key from `var`. An unset variable is an error; callers that
/// target open endpoints pass `None` to `fetch_remote` instead.
pub fn credentials_from_env(var: &str) -> Result<String> {
    std::env::var(var)
        .ok()
        .filter(|v| !v.is_empty())
        .ok_or_else(|| Error::MissingCredentials(var.to_string()))
}

/// Downloads one dataset and parses it like a local snapshot.
pub fn download(code: MetricCode, source: &RemoteSource, credentials: Option<&str>) -> Result<MetricSeries> {
    let url = source.url_for(code);
    let agent = ureq::AgentBuilder::new().timeout(source.timeout).build();
    let mut request = agent.get(&url);
    if let Some(key) = credentials {
        request = match &source.auth {
            AuthPlacement::Query(param) => request.query(param, key),
            AuthPlacement::Header(name) => request.set(name, key),
        };
    }
    let response = match request.call() {
        Ok(r) => r,
        Err(ureq::Error::Status(status, _)) => return Err(Error::HttpStatus { status, url }),
        Err(ureq::Error::Transport(t)) => return Err(Error::Transport(t.to_string())),
    };
    let body = response.into_string().map_err(|e| Error::Transport(e.to_string()))?;
    if body.trim_start().starts_with('{') || body.trim_start().starts_with('<') {
        return Err(Error::Schema(format!("{url}: expected `date,value` CSV payload")));
    }
    read_csv(body.as_bytes(), code, &url).map_err(|e| match e {
        Error::Parse { message, row, .. } => Error::Schema(format!("{url}: row {row}: {message}")),
        Error::EmptyInput(_) => Error::Schema(format!("{url}: payload has no records")),
        other => other,
    })
}

/// Downloads `code` and persists it under `snapshot_dir`: the current copy as
/// `<CODE>.csv` and an archived copy stamped with the UTC fetch time.
pub fn fetch_remote(
    code: MetricCode,
    source: &RemoteSource,
    credentials: Option<&str>,
    snapshot_dir: &Path,
) -> Result<MetricSeries> {
    let series = download(code, source, credentials)?;
    write_snapshot(snapshot_dir, &series)?;
    let archive = snapshot_dir.join("archive");
    fs::create_dir_all(&archive)?;
    let stamp = Utc::now().format("%Y%m%dT%H%M%SZ");
    let mut buf = Vec::new();
    write_csv(&series, &mut buf)?;
    fs::write(archive.join(format!("{code}-{stamp}.csv")), buf)?;
    Ok(series)
}
