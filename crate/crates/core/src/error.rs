use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown metric code `{0}`")]
    UnknownMetric(String),

    #[error("{path}: row {row}: {message}")]
    Parse { path: String, row: usize, message: String },

    #[error("{0}: no records")]
    EmptyInput(String),

    #[error("duplicate date {date} (row {row})")]
    DuplicateDate { date: NaiveDate, row: usize },

    #[error("dates out of order at index {index}: {date} does not follow the previous record")]
    UnorderedDates { index: usize, date: NaiveDate },

    #[error("invalid value {value} at {date}: {reason}")]
    InvalidValue {
        date: NaiveDate,
        value: f64,
        reason: &'static str,
    },

    #[error("dates and values differ in length ({dates} vs {values})")]
    LengthMismatch { dates: usize, values: usize },

    #[error("series too short: need at least {needed} records, have {actual}")]
    SeriesTooShort { needed: usize, actual: usize },

    #[error("series have no dates in common")]
    EmptyIntersection,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("result undefined: {0}")]
    Undefined(String),

    #[error("need at least two extremum events for a regression, found {0}")]
    TooFewEvents(usize),

    #[error("regression line is non-positive ({value}) at record {index}; cannot divide")]
    DivisionDomain { index: usize, value: f64 },

    #[error("HTTP {status} from {url}")]
    HttpStatus { status: u16, url: String },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("missing credentials: environment variable {0} is not set")]
    MissingCredentials(String),

    #[error("payload schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
