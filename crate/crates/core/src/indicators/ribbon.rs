use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::metric::MetricCode;
use crate::series::{align, sma_with, MetricSeries, SmaWindow};

pub const DEFAULT_SHORT_PERIOD: usize = 30;
pub const DEFAULT_LONG_PERIOD: usize = 60;

/// A short-period and a long-period moving average of one metric, reported
/// on the dates where both are defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Ribbon {
    pub code: MetricCode,
    pub short_line: MetricSeries,
    pub long_line: MetricSeries,
    pub short_period: usize,
    pub long_period: usize,
}

impl Ribbon {
    /// Pairs two precomputed lines, truncating both to their common dates.
    pub fn from_lines(
        code: MetricCode,
        short_line: &MetricSeries,
        long_line: &MetricSeries,
        short_period: usize,
        long_period: usize,
    ) -> Result<Self> {
        if short_period == 0 || short_period >= long_period {
            return Err(Error::InvalidArgument(format!(
                "ribbon periods must satisfy 0 < short < long, got {short_period}/{long_period}"
            )));
        }
        let (short_line, long_line) = align(short_line, long_line)?;
        Ok(Self {
            code,
            short_line,
            long_line,
            short_period,
            long_period,
        })
    }

    pub fn len(&self) -> usize {
        self.short_line.len()
    }

    pub fn is_empty(&self) -> bool {
        self.short_line.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        self.short_line.dates()
    }

    /// `long - short` per record.
    pub fn spread(&self) -> Vec<f64> {
        self.long_line
            .values()
            .iter()
            .zip(self.short_line.values())
            .map(|(l, s)| l - s)
            .collect()
    }
}

/// Ribbon of exclusive look-back moving averages.
pub fn build_ribbon(series: &MetricSeries, short: usize, long: usize) -> Result<Ribbon> {
    build_ribbon_with(series, short, long, SmaWindow::Exclusive)
}

pub fn build_ribbon_with(series: &MetricSeries, short: usize, long: usize, window: SmaWindow) -> Result<Ribbon> {
    if short == 0 || short >= long {
        return Err(Error::InvalidArgument(format!(
            "ribbon periods must satisfy 0 < short < long, got {short}/{long}"
        )));
    }
    let long_line = sma_with(series, long, window)?;
    let short_line = sma_with(series, short, window)?;
    Ribbon::from_lines(series.code(), &short_line, &long_line, short, long)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Bullish,
    Bearish,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Direction::Bullish => Direction::Bearish,
            Direction::Bearish => Direction::Bullish,
        }
    }
}

/// Which line crossing above the other counts as bullish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    /// The long line rising through the short line is bullish.
    #[default]
    PaperText,
    /// The short line rising through the long line is bullish, as in the
    /// usual moving-average crossover.
    Conventional,
}

impl Convention {
    pub fn name(self) -> &'static str {
        match self {
            Convention::PaperText => "paper-text",
            Convention::Conventional => "conventional",
        }
    }
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper-text" => Ok(Convention::PaperText),
            "conventional" => Ok(Convention::Conventional),
            other => Err(Error::InvalidArgument(format!("unknown crossing convention `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub date: NaiveDate,
    /// Record index into the ribbon.
    pub index: usize,
    pub direction: Direction,
    pub long_value: f64,
    pub short_value: f64,
}

/// Indices where the sign of `spread` flips, with `true` when the new sign is
/// positive. Zeros continue the previous sign, so a crossing is reported at
/// the record where the new strict sign first appears.
pub fn sign_changes(spread: &[f64]) -> Vec<(usize, bool)> {
    let mut out = Vec::new();
    let mut prev: Option<bool> = None;
    for (i, &d) in spread.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let positive = d > 0.0;
        if prev.is_some_and(|p| p != positive) {
            out.push((i, positive));
        }
        prev = Some(positive);
    }
    out
}

pub fn detect_crossings(ribbon: &Ribbon, convention: Convention) -> Vec<Crossing> {
    sign_changes(&ribbon.spread())
        .into_iter()
        .map(|(index, long_above)| {
            let direction = match (convention, long_above) {
                (Convention::PaperText, true) | (Convention::Conventional, false) => Direction::Bullish,
                _ => Direction::Bearish,
            };
            Crossing {
                date: ribbon.dates()[index],
                index,
                direction,
                long_value: ribbon.long_line.values()[index],
                short_value: ribbon.short_line.values()[index],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::test_support::daily;
    use proptest::prelude::*;

    const X: MetricCode = MetricCode::HRATE;

    fn ribbon_from_spread(spread: &[f64]) -> Ribbon {
        let short = daily(X, &vec![0.0; spread.len()]);
        let long = daily(X, spread);
        Ribbon::from_lines(X, &short, &long, 1, 2).unwrap()
    }

    #[test]
    fn single_sign_change_is_bullish_under_paper_text() {
        let c = detect_crossings(&ribbon_from_spread(&[-1.0, -0.5, 0.2]), Convention::PaperText);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].index, 2);
        assert_eq!(c[0].direction, Direction::Bullish);
        assert_eq!(c[0].long_value, 0.2);

        let c = detect_crossings(&ribbon_from_spread(&[-1.0, -0.5, 0.2]), Convention::Conventional);
        assert_eq!(c[0].direction, Direction::Bearish);
    }

    #[test]
    fn touching_without_sign_change_is_not_a_crossing() {
        assert!(sign_changes(&[1.0, 0.0, 0.0, 1.0]).is_empty());
    }

    #[test]
    fn zero_continues_previous_sign() {
        assert_eq!(sign_changes(&[-1.0, 0.0, 1.0]), vec![(2, true)]);
        assert_eq!(sign_changes(&[0.0, 0.0, 1.0, -1.0]), vec![(3, false)]);
    }

    #[test]
    fn constant_series_gives_identical_lines() {
        let r = build_ribbon(&daily(X, &[0.1; 120]), 30, 60).unwrap();
        assert_eq!(r.len(), 60);
        assert_eq!(r.short_line.values(), r.long_line.values());
        assert!(detect_crossings(&r, Convention::PaperText).is_empty());
    }

    #[test]
    fn linear_ramp_keeps_long_below_short() {
        let vals: Vec<f64> = (0..200).map(|i| 3.0 + 0.7 * i as f64).collect();
        let r = build_ribbon(&daily(X, &vals), 30, 60).unwrap();
        assert!(r.spread().iter().all(|&d| d < 0.0));
        assert!(detect_crossings(&r, Convention::PaperText).is_empty());
    }

    #[test]
    fn ribbon_truncates_to_long_line_domain() {
        let vals: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let s = daily(X, &vals);
        let r = build_ribbon(&s, 30, 60).unwrap();
        assert_eq!(r.dates(), &s.dates()[60..]);
        assert_eq!(r.long_line.dates(), r.short_line.dates());
    }

    #[test]
    fn ribbon_errors() {
        let s = daily(X, &[1.0; 60]);
        assert!(matches!(
            build_ribbon(&s, 30, 60),
            Err(Error::SeriesTooShort { needed: 61, .. })
        ));
        assert!(matches!(build_ribbon(&s, 30, 30), Err(Error::InvalidArgument(_))));
    }

    proptest! {
        #[test]
        fn crossings_alternate(vals in proptest::collection::vec(0.0f64..100.0, 80..300)) {
            let r = build_ribbon(&daily(X, &vals), 5, 10).unwrap();
            let c = detect_crossings(&r, Convention::PaperText);
            for w in c.windows(2) {
                prop_assert_ne!(w[0].direction, w[1].direction);
                prop_assert!(w[0].index < w[1].index);
            }
        }
    }
}
