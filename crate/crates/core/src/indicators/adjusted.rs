//! Adjusted indicators: the regression-channel CPTRA and the derivative
//! ribbons used for metrics that only ever grow.

use chrono::Datelike;

use super::extrema::{
    fit_line, keep_record_highs, monotonic_yearly_maxima_from, yearly_minima_from, ExtremumEvent, RegressionLine,
    FIRST_EXTREMUM_YEAR,
};
use super::ribbon::{build_ribbon_with, Ribbon, DEFAULT_LONG_PERIOD, DEFAULT_SHORT_PERIOD};
use crate::error::{Error, Result};
use crate::metric::MetricCode;
use crate::series::{diff_backward, sma, MetricSeries, SmaWindow};

pub const DERIVATIVE_SHORT_PERIOD: usize = 10;
pub const DERIVATIVE_LONG_PERIOD: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdCptraOptions {
    pub first_year: i32,
    /// Fit the maxima line without the last kept maximum.
    pub drop_final_max: bool,
}

impl Default for AdCptraOptions {
    fn default() -> Self {
        Self {
            first_year: FIRST_EXTREMUM_YEAR,
            drop_final_max: false,
        }
    }
}

/// AdCPTRA together with the pieces it was built from.
#[derive(Debug, Clone)]
pub struct AdCptra {
    /// `(SMA30 - MinLR) / MaxLR` from the first extremum year on.
    pub values: MetricSeries,
    pub sma30: MetricSeries,
    pub maxima: Vec<ExtremumEvent>,
    pub minima: Vec<ExtremumEvent>,
    pub max_line: RegressionLine,
    pub min_line: RegressionLine,
}

impl AdCptra {
    /// Normalizes any line sharing the SMA-30 dates by the two channels.
    fn normalize(&self, line: &MetricSeries, first_year: i32) -> Result<MetricSeries> {
        let mut records = Vec::new();
        for (date, value) in line.iter() {
            if date.year() < first_year {
                continue;
            }
            let Some(i) = self.sma30.index_of(date) else {
                continue;
            };
            let upper = self.max_line.at(i);
            if upper <= 0.0 {
                return Err(Error::DivisionDomain { index: i, value: upper });
            }
            records.push((date, (value - self.min_line.at(i)) / upper));
        }
        MetricSeries::from_records(line.code(), records)
    }
}

pub fn adcptra(cptra: &MetricSeries) -> Result<MetricSeries> {
    adcptra_with(cptra, AdCptraOptions::default()).map(|a| a.values)
}

pub fn adcptra_with(cptra: &MetricSeries, options: AdCptraOptions) -> Result<AdCptra> {
    let sma30 = sma(cptra, DEFAULT_SHORT_PERIOD)?;
    let mut maxima = monotonic_yearly_maxima_from(&sma30, options.first_year)?;
    if options.drop_final_max {
        maxima.pop();
    }
    let minima = yearly_minima_from(&sma30, options.first_year)?;
    let max_line = fit_line(&maxima)?;
    let min_line = fit_line(&minima)?;
    let mut out = AdCptra {
        values: MetricSeries::empty(cptra.code()),
        sma30: sma30.clone(),
        maxima,
        minima,
        max_line,
        min_line,
    };
    out.values = out.normalize(&sma30, options.first_year)?;
    Ok(out)
}

/// The AdCPTRA ribbon: both CPTRA ribbon lines passed through the same
/// channel normalization. Also returns the gate series (the SMA-30 line).
pub fn adcptra_ribbon(cptra: &MetricSeries, options: AdCptraOptions) -> Result<(Ribbon, MetricSeries)> {
    let parts = adcptra_with(cptra, options)?;
    let sma60 = sma(cptra, DEFAULT_LONG_PERIOD)?;
    let long_line = parts.normalize(&sma60, options.first_year)?;
    let ribbon = Ribbon::from_lines(
        cptra.code(),
        &parts.values,
        &long_line,
        DEFAULT_SHORT_PERIOD,
        DEFAULT_LONG_PERIOD,
    )?;
    Ok((ribbon, parts.values))
}

/// AdCPTRA computed causally: the value on each date uses only the SMA-30
/// history up to that date to locate extrema and fit the channels. Dates
/// without two maxima and two minima yet, or with a non-positive upper
/// channel, are omitted.
pub fn adcptra_causal(cptra: &MetricSeries, first_year: i32) -> Result<MetricSeries> {
    let sma30 = sma(cptra, DEFAULT_SHORT_PERIOD)?;
    let mut maxima: Vec<ExtremumEvent> = Vec::new();
    let mut minima: Vec<ExtremumEvent> = Vec::new();
    let mut records = Vec::new();
    for (i, (date, value)) in sma30.iter().enumerate() {
        let year = date.year();
        if year < first_year {
            continue;
        }
        match (maxima.last_mut(), minima.last_mut()) {
            (Some(mx), Some(mn)) if mx.year == year => {
                if value > mx.value {
                    *mx = ExtremumEvent {
                        year,
                        day_index: i,
                        value,
                    };
                }
                if value < mn.value {
                    *mn = ExtremumEvent {
                        year,
                        day_index: i,
                        value,
                    };
                }
            }
            _ => {
                maxima.push(ExtremumEvent {
                    year,
                    day_index: i,
                    value,
                });
                minima.push(ExtremumEvent {
                    year,
                    day_index: i,
                    value,
                });
            }
        }
        let kept = keep_record_highs(maxima.clone());
        if kept.len() < 2 || minima.len() < 2 {
            continue;
        }
        let (Ok(upper), Ok(lower)) = (fit_line(&kept), fit_line(&minima)) else {
            continue;
        };
        let upper = upper.at(i);
        if upper > 0.0 {
            records.push((date, (value - lower.at(i)) / upper));
        }
    }
    MetricSeries::from_records(cptra.code(), records)
}

/// Ribbon of moving averages over the backward differences of `series`.
///
/// The averages include the current difference, so the short line at `t` is
/// the mean of `x'(t), ..., x'(t - short + 1)`.
pub fn adjusted_derivative(series: &MetricSeries, short: usize, long: usize) -> Result<Ribbon> {
    if series.len() < long + 2 {
        return Err(Error::SeriesTooShort {
            needed: long + 2,
            actual: series.len(),
        });
    }
    let derivative = diff_backward(series)?;
    build_ribbon_with(&derivative, short, long, SmaWindow::Inclusive)
}

/// Display label for an adjusted indicator built from `code`.
pub fn adjusted_label(code: MetricCode) -> String {
    format!("Ad{code}")
}
