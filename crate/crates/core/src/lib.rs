//! Blockchain-metric ribbons for Bitcoin trading.
//!
//! Turns daily blockchain metric series into moving-average ribbons and
//! adjusted indicators, ranks metrics by functional dependence of the price on
//! them, backtests crossing signals under a fixed 1:1 target/stop rule, and
//! exports feature matrices for external predictive models.

pub mod backtest;
pub mod cli;
pub mod dependence;
pub mod error;
pub mod features;
pub mod indicators;
pub mod ingest;
pub mod metric;
pub mod report;
pub mod series;

pub use error::{Error, Result};
pub use metric::MetricCode;
pub use series::MetricSeries;
