//! Yearly extrema of a smoothed series and least-squares lines through them.

use chrono::Datelike;

use crate::error::{Error, Result};
use crate::series::MetricSeries;

/// First calendar year whose extrema enter the regression channels.
pub const FIRST_EXTREMUM_YEAR: i32 = 2012;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremumEvent {
    pub year: i32,
    /// Record index into the smoothed series the event was taken from.
    pub day_index: usize,
    pub value: f64,
}

#[derive(Clone, Copy)]
enum Extreme {
    Max,
    Min,
}

/// One event per calendar year present in `series` from `first_year` on.
/// The earliest record wins ties within a year.
fn yearly(series: &MetricSeries, first_year: i32, kind: Extreme) -> Vec<ExtremumEvent> {
    let mut out: Vec<ExtremumEvent> = Vec::new();
    for (i, (date, value)) in series.iter().enumerate() {
        let year = date.year();
        if year < first_year {
            continue;
        }
        match out.last_mut() {
            Some(ev) if ev.year == year => {
                let better = match kind {
                    Extreme::Max => value > ev.value,
                    Extreme::Min => value < ev.value,
                };
                if better {
                    ev.day_index = i;
                    ev.value = value;
                }
            }
            _ => out.push(ExtremumEvent {
                year,
                day_index: i,
                value,
            }),
        }
    }
    out
}

/// Yearly maxima, keeping only those that exceed every previously kept one.
pub fn monotonic_yearly_maxima(sma30: &MetricSeries) -> Result<Vec<ExtremumEvent>> {
    monotonic_yearly_maxima_from(sma30, FIRST_EXTREMUM_YEAR)
}

pub fn monotonic_yearly_maxima_from(sma30: &MetricSeries, first_year: i32) -> Result<Vec<ExtremumEvent>> {
    let kept = keep_record_highs(yearly(sma30, first_year, Extreme::Max));
    if kept.len() < 2 {
        return Err(Error::TooFewEvents(kept.len()));
    }
    Ok(kept)
}

pub(crate) fn keep_record_highs(maxima: Vec<ExtremumEvent>) -> Vec<ExtremumEvent> {
    let mut kept: Vec<ExtremumEvent> = Vec::with_capacity(maxima.len());
    for ev in maxima {
        if kept.last().is_none_or(|last| ev.value > last.value) {
            kept.push(ev);
        }
    }
    kept
}

/// Yearly minima, unfiltered.
pub fn yearly_minima(sma30: &MetricSeries) -> Result<Vec<ExtremumEvent>> {
    yearly_minima_from(sma30, FIRST_EXTREMUM_YEAR)
}

pub fn yearly_minima_from(sma30: &MetricSeries, first_year: i32) -> Result<Vec<ExtremumEvent>> {
    let minima = yearly(sma30, first_year, Extreme::Min);
    if minima.len() < 2 {
        return Err(Error::TooFewEvents(minima.len()));
    }
    Ok(minima)
}

/// Least-squares line of value against record index.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionLine {
    pub slope: f64,
    pub intercept: f64,
    pub fit_points: Vec<(usize, f64)>,
}

impl RegressionLine {
    pub fn at(&self, day_index: usize) -> f64 {
        self.intercept + self.slope * day_index as f64
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.fit_points.iter().map(|&(x, y)| y - self.at(x)).collect()
    }
}

pub fn fit_line(events: &[ExtremumEvent]) -> Result<RegressionLine> {
    if events.len() < 2 {
        return Err(Error::TooFewEvents(events.len()));
    }
    let points: Vec<(usize, f64)> = events.iter().map(|e| (e.day_index, e.value)).collect();
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in &points {
        let dx = x as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return Err(Error::Undefined("all extremum events share one day index".into()));
    }
    let slope = sxy / sxx;
    Ok(RegressionLine {
        slope,
        intercept: mean_y - slope * mean_x,
        fit_points: points,
    })
}
