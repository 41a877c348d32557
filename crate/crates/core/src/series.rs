//! Dated daily series and the record-indexed arithmetic built on them.
//!
//! Moving averages and differences count records, not calendar days. A gap in
//! the source data therefore widens the calendar span of a window instead of
//! shrinking the number of values averaged.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::metric::MetricCode;

/// A daily-sampled real-valued series for one metric.
///
/// Dates strictly increase and every value is finite. Instances are immutable
/// once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    code: MetricCode,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl MetricSeries {
    pub fn new(code: MetricCode, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::LengthMismatch {
                dates: dates.len(),
                values: values.len(),
            });
        }
        for (i, w) in dates.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::UnorderedDates {
                    index: i + 1,
                    date: w[1],
                });
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue {
                date: dates[i],
                value: values[i],
                reason: "not finite",
            });
        }
        Ok(Self { code, dates, values })
    }

    pub fn empty(code: MetricCode) -> Self {
        Self {
            code,
            dates: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a series from `(date, value)` pairs, sorting them by date first.
    pub fn from_records(code: MetricCode, mut records: Vec<(NaiveDate, f64)>) -> Result<Self> {
        records.sort_by_key(|r| r.0);
        let (dates, values) = records.into_iter().unzip();
        Self::new(code, dates, values)
    }

    pub fn code(&self) -> MetricCode {
        self.code
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.dates.first().copied()
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.dates.last().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.dates.iter().copied().zip(self.values.iter().copied())
    }

    /// Record index of `date`, if present.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn value_at(&self, date: NaiveDate) -> Option<f64> {
        self.index_of(date).map(|i| self.values[i])
    }

    pub fn with_code(mut self, code: MetricCode) -> Self {
        self.code = code;
        self
    }

    /// Applies `f` to every value, keeping the dates.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.code,
            self.dates.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Keeps the last `len` records.
    pub fn tail(&self, len: usize) -> Self {
        let start = self.len().saturating_sub(len);
        Self {
            code: self.code,
            dates: self.dates[start..].to_vec(),
            values: self.values[start..].to_vec(),
        }
    }

    fn from_parts_unchecked(code: MetricCode, dates: Vec<NaiveDate>, values: Vec<f64>) -> Self {
        debug_assert_eq!(dates.len(), values.len());
        Self { code, dates, values }
    }
}

/// Which records a moving-average window covers at index `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmaWindow {
    /// The `period` records strictly before `t`.
    #[default]
    Exclusive,
    /// The `period` records ending at `t`.
    Inclusive,
}

/// Simple moving average over the `period` records strictly before each index.
pub fn sma(series: &MetricSeries, period: usize) -> Result<MetricSeries> {
    sma_with(series, period, SmaWindow::Exclusive)
}

pub fn sma_with(series: &MetricSeries, period: usize, window: SmaWindow) -> Result<MetricSeries> {
    if period == 0 {
        return Err(Error::InvalidArgument("moving-average period must be positive".into()));
    }
    // first output index
    let first = match window {
        SmaWindow::Exclusive => period,
        SmaWindow::Inclusive => period - 1,
    };
    if series.len() <= first {
        return Err(Error::SeriesTooShort {
            needed: first + 1,
            actual: series.len(),
        });
    }
    let values = series.values();
    let divisor = period as f64;
    let out: Vec<f64> = (first..series.len())
        .map(|t| {
            let end = match window {
                SmaWindow::Exclusive => t,
                SmaWindow::Inclusive => t + 1,
            };
            exact_sum(values[end - period..end].iter().copied()) / divisor
        })
        .collect();
    Ok(MetricSeries::from_parts_unchecked(
        series.code(),
        series.dates()[first..].to_vec(),
        out,
    ))
}

/// `value(t) - value(t-1)`, one record step apart.
pub fn diff_backward(series: &MetricSeries) -> Result<MetricSeries> {
    if series.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            actual: series.len(),
        });
    }
    let out = series.values().windows(2).map(|w| w[1] - w[0]).collect();
    Ok(MetricSeries::from_parts_unchecked(
        series.code(),
        series.dates()[1..].to_vec(),
        out,
    ))
}

/// Restricts two series to the dates they share.
pub fn align(a: &MetricSeries, b: &MetricSeries) -> Result<(MetricSeries, MetricSeries)> {
    let mut aligned = align_all(&[a.clone(), b.clone()])?;
    let b = aligned.pop().expect("two series in");
    let a = aligned.pop().expect("two series in");
    Ok((a, b))
}

/// Restricts every series to the dates common to all of them.
pub fn align_all(series: &[MetricSeries]) -> Result<Vec<MetricSeries>> {
    let Some((head, rest)) = series.split_first() else {
        return Ok(Vec::new());
    };
    let mut common: Vec<NaiveDate> = head.dates().to_vec();
    for s in rest {
        common.retain(|d| s.index_of(*d).is_some());
    }
    if common.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    Ok(series
        .iter()
        .map(|s| {
            if s.len() == common.len() {
                return s.clone();
            }
            let values = common.iter().map(|d| s.value_at(*d).expect("date is common")).collect();
            MetricSeries::from_parts_unchecked(s.code(), common.clone(), values)
        })
        .collect())
}

/// Records with `start <= date <= end`.
pub fn slice_window(series: &MetricSeries, start: NaiveDate, end: NaiveDate) -> MetricSeries {
    let lo = series.dates().partition_point(|d| *d < start);
    let hi = series.dates().partition_point(|d| *d <= end).max(lo);
    MetricSeries::from_parts_unchecked(
        series.code(),
        series.dates()[lo..hi].to_vec(),
        series.values()[lo..hi].to_vec(),
    )
}

/// Correctly rounded floating-point sum (Shewchuk's exact partials).
///
/// Rounding only once keeps window means order-preserving: for
/// non-decreasing data the 2p-record mean can never exceed the p-record mean
/// through accumulated rounding error.
pub(crate) fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut kept = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }

    let Some(mut n) = partials.len().checked_sub(1) else {
        return 0.0;
    };
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    // round-half-even across the remaining partials
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn day(n: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2012, 1, 1).unwrap() + chrono::Duration::days(n)
    }

    pub fn daily(code: MetricCode, values: &[f64]) -> MetricSeries {
        let dates = (0..values.len() as i64).map(day).collect();
        MetricSeries::new(code, dates, values.to_vec()).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::{daily, day};
    use super::*;
    use proptest::prelude::*;

    const X: MetricCode = MetricCode::HRATE;

    #[test]
    fn rejects_unordered_and_non_finite() {
        assert!(matches!(
            MetricSeries::new(X, vec![day(1), day(1)], vec![1.0, 2.0]),
            Err(Error::UnorderedDates { index: 1, .. })
        ));
        assert!(matches!(
            MetricSeries::new(X, vec![day(1)], vec![f64::NAN]),
            Err(Error::InvalidValue { .. })
        ));
        assert!(matches!(
            MetricSeries::new(X, vec![day(1)], vec![]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn sma_uses_strictly_prior_records() {
        let s = daily(X, &[1.0, 2.0, 3.0, 4.0]);
        let out = sma(&s, 2).unwrap();
        assert_eq!(out.values(), &[1.5, 2.5]);
        assert_eq!(out.dates(), &[day(2), day(3)]);
    }

    #[test]
    fn sma_inclusive_window_includes_current_record() {
        let s = daily(X, &[1.0, 2.0, 3.0, 4.0]);
        let out = sma_with(&s, 2, SmaWindow::Inclusive).unwrap();
        assert_eq!(out.values(), &[1.5, 2.5, 3.5]);
        assert_eq!(out.first_date(), Some(day(1)));
    }

    #[test]
    fn sma_of_constant_is_constant() {
        for c in [0.1, 3.7, 1e9 + 0.3] {
            let s = daily(X, &[c; 100]);
            for p in [1, 7, 30, 60] {
                assert!(sma(&s, p).unwrap().values().iter().all(|&v| v == c));
            }
        }
    }

    #[test]
    fn sma_first_output_is_record_after_full_window() {
        let vals: Vec<f64> = (0..40).map(|i| 0.0769 + i as f64 * 0.001).collect();
        let s = daily(X, &vals);
        let out = sma(&s, 30).unwrap();
        assert_eq!(out.first_date(), Some(s.dates()[30]));
        assert_eq!(out.len(), 10);
    }

    #[test]
    fn sma_errors() {
        let s = daily(X, &[1.0, 2.0]);
        assert!(matches!(
            sma(&s, 2),
            Err(Error::SeriesTooShort { needed: 3, actual: 2 })
        ));
        assert!(matches!(sma(&s, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn diff_backward_examples() {
        let d = diff_backward(&daily(X, &[5.0, 7.0, 7.0, 4.0])).unwrap();
        assert_eq!(d.values(), &[2.0, 0.0, -3.0]);
        assert_eq!(d.first_date(), Some(day(1)));
        assert!(diff_backward(&daily(X, &[1.0, 2.0, 5.0]))
            .unwrap()
            .values()
            .iter()
            .all(|&v| v > 0.0));
        assert!(diff_backward(&daily(X, &[4.0; 5]))
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
        assert!(matches!(
            diff_backward(&daily(X, &[1.0])),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn align_intersects_dates() {
        let a = MetricSeries::new(X, vec![day(1), day(2), day(3)], vec![1.0, 2.0, 3.0]).unwrap();
        let b = MetricSeries::new(X, vec![day(2), day(3), day(4)], vec![20.0, 30.0, 40.0]).unwrap();
        let (a2, b2) = align(&a, &b).unwrap();
        assert_eq!(a2.dates(), &[day(2), day(3)]);
        assert_eq!(a2.values(), &[2.0, 3.0]);
        assert_eq!(b2.values(), &[20.0, 30.0]);

        let (a3, a4) = align(&a, &a).unwrap();
        assert_eq!(a3, a);
        assert_eq!(a4, a);

        let c = MetricSeries::new(X, vec![day(10)], vec![1.0]).unwrap();
        assert!(matches!(align(&a, &c), Err(Error::EmptyIntersection)));
    }

    #[test]
    fn slice_window_is_inclusive() {
        let s = daily(X, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(slice_window(&s, day(1), day(3)).values(), &[2.0, 3.0, 4.0]);
        assert_eq!(slice_window(&s, day(0), day(4)), s);
        assert!(slice_window(&s, day(-10), day(-1)).is_empty());
        assert!(slice_window(&s, day(3), day(1)).is_empty());
    }

    #[test]
    fn exact_sum_is_correctly_rounded() {
        assert_eq!(exact_sum([1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum(vec![0.1; 10]), 1.0);
        assert_eq!(exact_sum(std::iter::empty()), 0.0);
        assert_eq!(exact_sum([1.0, 1e-16, 1e-16]), 1.0000000000000002);
    }

    fn series_strategy() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1e6_f64..1e6, 70..200)
    }

    proptest! {
        #[test]
        fn sma_length_and_suffix(vals in series_strategy(), a in 1usize..20, b in 1usize..20) {
            let s = daily(X, &vals);
            let once = sma(&s, a).unwrap();
            prop_assert_eq!(once.len(), s.len() - a);
            let twice = sma(&once, b).unwrap();
            prop_assert!(s.dates().ends_with(twice.dates()));
        }

        #[test]
        fn diff_telescopes(vals in series_strategy()) {
            let s = daily(X, &vals);
            let d = diff_backward(&s).unwrap();
            let total = exact_sum(d.values().iter().copied());
            let expected = vals[vals.len() - 1] - vals[0];
            prop_assert!((total - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }

        #[test]
        fn sma_translation_equivariant(vals in series_strategy(), c in -1e3_f64..1e3, p in 1usize..60) {
            let s = daily(X, &vals);
            let shifted = s.map_values(|v| v + c).unwrap();
            let lhs = sma(&shifted, p).unwrap();
            let rhs = sma(&s, p).unwrap();
            for (l, r) in lhs.values().iter().zip(rhs.values()) {
                prop_assert!((l - (r + c)).abs() <= 1e-9 * (r.abs() + c.abs()).max(1.0));
            }
        }
    }
}
