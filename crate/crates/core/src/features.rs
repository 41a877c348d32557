//! Feature matrices and error scores for external price-forecasting models.

use std::io::{Read, Write};

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::indicators::{
    adcptra_causal, adjusted_derivative, adjusted_label, build_ribbon, DEFAULT_LONG_PERIOD, DEFAULT_SHORT_PERIOD,
    DERIVATIVE_LONG_PERIOD, DERIVATIVE_SHORT_PERIOD, FIRST_EXTREMUM_YEAR,
};
use crate::metric::MetricCode;
use crate::series::{diff_backward, sma, MetricSeries};

pub const DEFAULT_HORIZON: usize = 10;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureColumn {
    pub name: String,
    pub description: String,
    pub values: Vec<f64>,
}

/// Dated feature rows plus a target `horizon` records ahead.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<FeatureColumn>,
    pub target: Vec<f64>,
    pub horizon: usize,
    /// Rows removed because a feature or the target was undefined there
    /// (for example a zero SMA-60 denominator). Warm-up rows are not counted.
    pub dropped_rows: usize,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.dates.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c.values[i]).collect()
    }

    /// Rows `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> FeatureMatrix {
        FeatureMatrix {
            dates: self.dates[start..end].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|c| FeatureColumn {
                    name: c.name.clone(),
                    description: c.description.clone(),
                    values: c.values[start..end].to_vec(),
                })
                .collect(),
            target: self.target[start..end].to_vec(),
            horizon: self.horizon,
            dropped_rows: 0,
        }
    }

    /// Same dates, column names and bit patterns, ignoring descriptions.
    pub fn bit_identical(&self, other: &FeatureMatrix) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.dates == other.dates
            && self.columns.len() == other.columns.len()
            && self
                .columns
                .iter()
                .zip(&other.columns)
                .all(|(a, b)| a.name == b.name && bits(&a.values) == bits(&b.values))
            && bits(&self.target) == bits(&other.target)
    }

    /// `date`, every feature, then `target`. Values use the shortest
    /// representation that parses back to the same bits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        header.push("target".into());
        wtr.write_record(&header)?;
        for i in 0..self.rows() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(self.dates[i].to_string());
            rec.extend(self.columns.iter().map(|c| c.values[i].to_string()));
            rec.push(self.target[i].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, horizon: usize) -> Result<FeatureMatrix> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        let n = header.len();
        if n < 2 || &header[0] != "date" || &header[n - 1] != "target" {
            return Err(Error::Schema(
                "feature csv must start with `date` and end with `target`".into(),
            ));
        }
        let mut columns: Vec<FeatureColumn> = header
            .iter()
            .skip(1)
            .take(n - 2)
            .map(|name| FeatureColumn {
                name: name.to_string(),
                description: String::new(),
                values: Vec::new(),
            })
            .collect();
        let mut dates = Vec::new();
        let mut target = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |message: String| Error::Parse {
                path: "feature csv".into(),
                row: row + 2,
                message,
            };
            let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| bad(e.to_string()))?;
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
            for (col, field) in columns.iter_mut().zip(rec.iter().skip(1)) {
                col.values.push(num(field)?);
            }
            target.push(num(&rec[n - 1])?);
            dates.push(date);
        }
        Ok(FeatureMatrix {
            dates,
            columns,
            target,
            horizon,
            dropped_rows: 0,
        })
    }

    /// Sidecar describing each CSV column.
    pub fn write_schema<W: Write>(&self, target_description: &str, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["column", "description"])?;
        wtr.write_record(["date", "observation date; features use records up to and including it"])?;
        for c in &self.columns {
            wtr.write_record([c.name.as_str(), c.description.as_str()])?;
        }
        wtr.write_record(["target", target_description])?;
        wtr.flush()?;
        Ok(())
    }
}

/// A feature column before row assembly. Values may be non-finite where the
/// transform is undefined.
struct Col {
    name: String,
    description: String,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl Col {
    fn from_series(name: String, description: String, s: &MetricSeries) -> Self {
        Col {
            name,
            description,
            dates: s.dates().to_vec(),
            values: s.values().to_vec(),
        }
    }

    fn get(&self, date: NaiveDate) -> Option<f64> {
        self.dates.binary_search(&date).ok().map(|i| self.values[i])
    }
}

fn check_inputs(metrics: &[MetricSeries], horizon: usize) -> Result<()> {
    if metrics.is_empty() {
        return Err(Error::InvalidArgument("no metrics given for the feature matrix".into()));
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument(
            "forecast horizon must be at least one record".into(),
        ));
    }
    Ok(())
}

fn assemble(
    cols: Vec<Col>,
    price: &MetricSeries,
    horizon: usize,
    target: impl Fn(f64, f64) -> f64,
) -> Result<FeatureMatrix> {
    let closes = price.values();
    let mut dates = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
    let mut targets = Vec::new();
    let mut dropped = 0;
    let mut row = Vec::with_capacity(cols.len());
    for i in 0..closes.len().saturating_sub(horizon) {
        let date = price.dates()[i];
        row.clear();
        let mut undefined = false;
        let mut missing = false;
        for col in &cols {
            match col.get(date) {
                None => {
                    missing = true;
                    break;
                }
                Some(v) => {
                    undefined |= !v.is_finite();
                    row.push(v);
                }
            }
        }
        if missing {
            continue;
        }
        let y = target(closes[i], closes[i + horizon]);
        if undefined || !y.is_finite() {
            dropped += 1;
            continue;
        }
        dates.push(date);
        for (dst, &v) in values.iter_mut().zip(&row) {
            dst.push(v);
        }
        targets.push(y);
    }
    if dates.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    Ok(FeatureMatrix {
        dates,
        columns: cols
            .into_iter()
            .zip(values)
            .map(|(c, values)| FeatureColumn {
                name: c.name,
                description: c.description,
                values,
            })
            .collect(),
        target: targets,
        horizon,
        dropped_rows: dropped,
    })
}

fn test1_columns(m: &MetricSeries) -> Result<Vec<Col>> {
    let code = m.code();
    let mut cols = vec![Col::from_series(code.to_string(), format!("{code} raw value"), m)];
    for period in [DEFAULT_SHORT_PERIOD, DEFAULT_LONG_PERIOD] {
        cols.push(Col::from_series(
            format!("{code} sma {period}"),
            format!("mean of the {period} {code} records before the date"),
            &sma(m, period)?,
        ));
    }
    Ok(cols)
}

/// Raw values and both moving averages of every metric; the target is the
/// price `horizon` records ahead.
pub fn build_test1(metrics: &[MetricSeries], price: &MetricSeries, horizon: usize) -> Result<FeatureMatrix> {
    check_inputs(metrics, horizon)?;
    let cols = metrics
        .par_iter()
        .map(test1_columns)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    assemble(cols, price, horizon, |_, ahead| ahead)
}

fn test2_columns(m: &MetricSeries) -> Result<Vec<Col>> {
    let code = m.code();
    let ribbon = build_ribbon(m, DEFAULT_SHORT_PERIOD, DEFAULT_LONG_PERIOD)?;
    let normalized: Vec<f64> = ribbon
        .short_line
        .values()
        .iter()
        .zip(ribbon.long_line.values())
        .map(|(s, l)| if *l == 0.0 { f64::NAN } else { (s - l) / l })
        .collect();
    let mut cols = vec![
        Col {
            name: format!("RIBBON {code} 30 60 / sma 60"),
            description: format!("(sma 30 - sma 60) / sma 60 of {code}"),
            dates: ribbon.dates().to_vec(),
            values: normalized,
        },
        Col::from_series(
            format!("{code} sma 60 diff1"),
            format!("first backward difference of the {code} sma 60"),
            &diff_backward(&ribbon.long_line)?,
        ),
    ];
    if code.is_monotonic() {
        let d = adjusted_derivative(m, DERIVATIVE_SHORT_PERIOD, DERIVATIVE_LONG_PERIOD)?;
        let diff = diff_backward(m)?;
        let spread: Vec<f64> = d.spread().iter().map(|v| -v).collect();
        cols.push(Col::from_series(
            format!("{code} diff1"),
            format!("first backward difference of {code}"),
            &diff,
        ));
        cols.push(Col::from_series(
            format!("{code} diff1 sma 10"),
            format!("mean of the last 10 {code} differences, current one included"),
            &d.short_line,
        ));
        cols.push(Col::from_series(
            format!("{code} diff1 sma 20"),
            format!("mean of the last 20 {code} differences, current one included"),
            &d.long_line,
        ));
        cols.push(Col {
            name: format!("RIBBON {code} diff1 10 20"),
            description: format!("{} ribbon: diff1 sma 10 - diff1 sma 20", adjusted_label(code)),
            dates: d.dates().to_vec(),
            values: spread,
        });
    }
    if code == MetricCode::CPTRA {
        cols.push(Col::from_series(
            adjusted_label(code),
            "adjusted CPTRA with channels fitted to extrema known at the date".into(),
            &adcptra_causal(m, FIRST_EXTREMUM_YEAR)?,
        ));
    }
    Ok(cols)
}

/// Ribbons normalized by the SMA-60, SMA-60 differences, the derivative
/// ribbons of monotonic metrics and causal AdCPTRA; the target is the percent
/// price change `horizon` records ahead.
pub fn build_test2(metrics: &[MetricSeries], price: &MetricSeries, horizon: usize) -> Result<FeatureMatrix> {
    check_inputs(metrics, horizon)?;
    let cols = metrics
        .par_iter()
        .map(test2_columns)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    assemble(cols, price, horizon, |now, ahead| 100.0 * (ahead - now) / now)
}

/// Earliest `floor(fraction * rows)` rows for training, the rest for testing.
pub fn chronological_split(m: &FeatureMatrix, train_fraction: f64) -> Result<(FeatureMatrix, FeatureMatrix)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = m.rows();
    let cut = (train_fraction * n as f64).floor() as usize;
    if cut == 0 || cut == n {
        return Err(Error::InvalidArgument(format!(
            "{n} rows are too few for a {train_fraction} split"
        )));
    }
    Ok((m.slice(0, cut), m.slice(cut, n)))
}

/// Key-value description of a split, one pair per line.
pub fn write_split_manifest<W: Write>(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    train_fraction: f64,
    mut out: W,
) -> Result<()> {
    let span = |m: &FeatureMatrix| {
        (
            m.dates.first().map_or_else(String::new, |d| d.to_string()),
            m.dates.last().map_or_else(String::new, |d| d.to_string()),
        )
    };
    let (train_start, train_end) = span(train);
    let (test_start, test_end) = span(test);
    writeln!(out, "train_fraction={train_fraction}")?;
    writeln!(out, "horizon={}", train.horizon)?;
    writeln!(out, "train_rows={}", train.rows())?;
    writeln!(out, "train_start={train_start}")?;
    writeln!(out, "train_end={train_end}")?;
    writeln!(out, "test_rows={}", test.rows())?;
    writeln!(out, "test_start={test_start}")?;
    writeln!(out, "test_end={test_end}")?;
    Ok(())
}

fn check_pair(pred: &[f64], actual: &[f64]) -> Result<()> {
    if pred.len() != actual.len() {
        return Err(Error::LengthMismatch {
            dates: pred.len(),
            values: actual.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("cannot score an empty prediction".into()));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(pred, actual)?;
    let sse: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// Mean absolute error scaled by that of the lag-`lag` naive forecast.
///
/// Both means run over `t >= lag`, where the naive forecast exists, so the
/// naive forecast itself scores exactly 1.
pub fn mase(pred: &[f64], actual: &[f64], lag: usize) -> Result<f64> {
    check_pair(pred, actual)?;
    if lag == 0 || actual.len() <= lag {
        return Err(Error::SeriesTooShort {
            needed: lag.max(1) + 1,
            actual: actual.len(),
        });
    }
    let err: f64 = (lag..actual.len()).map(|t| (pred[t] - actual[t]).abs()).sum();
    let naive: f64 = (lag..actual.len()).map(|t| (actual[t] - actual[t - lag]).abs()).sum();
    if naive == 0.0 {
        return Err(Error::Undefined("naive forecast error is zero".into()));
    }
    Ok(err / naive)
}

/// `actual[t - lag]` for `t >= lag`; the first `lag` entries repeat `actual`
/// and are ignored by [`mase`].
pub fn naive_forecast(actual: &[f64], lag: usize) -> Vec<f64> {
    (0..actual.len())
        .map(|t| if t >= lag { actual[t - lag] } else { actual[t] })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::test_support::daily;

    fn ramp(code: MetricCode, n: usize, start: f64, step: f64) -> MetricSeries {
        daily(code, &(0..n).map(|i| start + step * i as f64).collect::<Vec<_>>())
    }

    #[test]
    fn test1_constant_inputs() {
        let m = daily(MetricCode::HRATE, &[4.0; 100]);
        let price = daily(MetricCode::MKPRU, &[250.0; 100]);
        let fm = build_test1(&[m], &price, 10).unwrap();
        assert!(fm.rows() <= 90);
        assert_eq!(fm.rows(), 30);
        assert!(fm.columns.iter().all(|c| c.values.iter().all(|&v| v == 4.0)));
        assert!(fm.target.iter().all(|&v| v == 250.0));
    }

    #[test]
    fn test1_schema() {
        let a = ramp(MetricCode::HRATE, 120, 1.0, 1.0);
        let b = ramp(MetricCode::DIFF, 120, 5.0, 2.0);
        let price = ramp(MetricCode::MKPRU, 120, 100.0, 1.0);
        let fm = build_test1(&[a, b], &price, 10).unwrap();
        assert_eq!(
            fm.column_names(),
            vec![
                "HRATE",
                "HRATE sma 30",
                "HRATE sma 60",
                "DIFF",
                "DIFF sma 30",
                "DIFF sma 60"
            ]
        );
        // first row is record 60; sma 60 there is the mean of records 0..60
        assert_eq!(fm.dates[0], price.dates()[60]);
        assert_eq!(fm.column("HRATE sma 60").unwrap()[0], 30.5);
        assert_eq!(fm.target[0], 170.0);
    }

    #[test]
    fn test2_ramp_target_and_zero_ribbon() {
        let m = daily(MetricCode::HRATE, &[3.0; 100]);
        let price = ramp(MetricCode::MKPRU, 100, 50.0, 2.0);
        let fm = build_test2(&[m], &price, 10).unwrap();
        assert_eq!(
            fm.column_names(),
            vec!["RIBBON HRATE 30 60 / sma 60", "HRATE sma 60 diff1"]
        );
        assert!(fm
            .column("RIBBON HRATE 30 60 / sma 60")
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        for (d, y) in fm.dates.iter().zip(&fm.target) {
            let c = price.value_at(*d).unwrap();
            assert!((y - 100.0 * 20.0 / c).abs() < 1e-12);
        }
    }

    #[test]
    fn test2_constant_price_zero_target() {
        let m = ramp(MetricCode::HRATE, 100, 1.0, 0.5);
        let price = daily(MetricCode::MKPRU, &[7.0; 100]);
        let fm = build_test2(&[m], &price, 10).unwrap();
        assert!(fm.target.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn test2_zero_sma60_rows_are_dropped_and_counted() {
        let mut v = vec![0.0; 70];
        v.extend((0..50).map(|i| i as f64 + 1.0));
        let m = daily(MetricCode::HRATE, &v);
        let price = ramp(MetricCode::MKPRU, 120, 10.0, 1.0);
        let fm = build_test2(&[m], &price, 10).unwrap();
        // records 61..=70 have an all-zero look-back window; record 60 has no
        // sma 60 difference yet and counts as warm-up
        assert_eq!(fm.dropped_rows, 10);
        assert_eq!(fm.dates[0], price.dates()[71]);
    }

    #[test]
    fn test2_monotonic_metric_gets_derivative_columns() {
        let m = ramp(MetricCode::MWNUS, 100, 10.0, 3.0);
        let price = ramp(MetricCode::MKPRU, 100, 10.0, 1.0);
        let fm = build_test2(&[m], &price, 5).unwrap();
        assert_eq!(fm.columns.len(), 6);
        assert!(fm.column("MWNUS diff1").unwrap().iter().all(|&v| v == 3.0));
        assert!(fm.column("MWNUS diff1 sma 20").unwrap().iter().all(|&v| v == 3.0));
        assert!(fm.column("RIBBON MWNUS diff1 10 20").unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bad_inputs() {
        let price = daily(MetricCode::MKPRU, &[1.0; 100]);
        assert!(matches!(build_test1(&[], &price, 10), Err(Error::InvalidArgument(_))));
        let m = daily(MetricCode::HRATE, &[1.0; 100]);
        assert!(matches!(
            build_test1(std::slice::from_ref(&m), &price, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(build_test1(&[m], &price, 95), Err(Error::EmptyIntersection)));
    }

    #[test]
    fn split_sizes_and_partition() {
        let m = daily(MetricCode::HRATE, &[1.0; 71]);
        let price = ramp(MetricCode::MKPRU, 71, 1.0, 1.0);
        let fm = build_test1(&[m], &price, 1).unwrap();
        assert_eq!(fm.rows(), 10);
        let (train, test) = chronological_split(&fm, 0.8).unwrap();
        assert_eq!((train.rows(), test.rows()), (8, 2));
        let mut joined = train.dates.clone();
        joined.extend(&test.dates);
        assert_eq!(joined, fm.dates);
        let mut target = train.target.clone();
        target.extend(&test.target);
        assert_eq!(target, fm.target);

        let five = fm.slice(0, 5);
        let (a, b) = chronological_split(&five, 0.8).unwrap();
        assert_eq!((a.rows(), b.rows()), (4, 1));
        assert!(chronological_split(&fm, 1.0).is_err());
        assert!(chronological_split(&fm.slice(0, 1), 0.8).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let a = daily(
            MetricCode::HRATE,
            &(0..90).map(|i| (i as f64).sqrt() / 3.0).collect::<Vec<_>>(),
        );
        let price = daily(
            MetricCode::MKPRU,
            &(0..90).map(|i| 1.0 / (i as f64 + 7.0)).collect::<Vec<_>>(),
        );
        let fm = build_test2(&[a], &price, 3).unwrap();
        let mut buf = Vec::new();
        fm.write_csv(&mut buf).unwrap();
        let back = FeatureMatrix::read_csv(buf.as_slice(), 3).unwrap();
        assert!(fm.bit_identical(&back));
    }

    #[test]
    fn schema_lists_every_column() {
        let m = daily(MetricCode::HRATE, &[1.0; 80]);
        let fm = build_test1(std::slice::from_ref(&m), &m.clone().with_code(MetricCode::MKPRU), 2).unwrap();
        let mut buf = Vec::new();
        fm.write_schema("price 2 records ahead", &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 1 + 3 + 1);
    }

    #[test]
    fn scores() {
        assert_eq!(rmse(&[1.0, 2.0], &[3.0, 2.0]).unwrap(), 2f64.sqrt());
        let actual = [1.0, 3.0, 2.0, 5.0, 4.0];
        assert_eq!(rmse(&actual, &actual).unwrap(), 0.0);
        assert_eq!(mase(&actual, &actual, 1).unwrap(), 0.0);
        assert_eq!(mase(&naive_forecast(&actual, 2), &actual, 2).unwrap(), 1.0);
        assert!(matches!(mase(&[1.0; 4], &[1.0; 4], 1), Err(Error::Undefined(_))));
        assert!(mase(&[1.0], &[1.0], 1).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn mase_scale_invariant(
            pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
            c in proptest::prop_oneof![-50.0f64..-0.1, 0.1f64..50.0],
        ) {
            let pred: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let actual: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            if let Ok(base) = mase(&pred, &actual, 1) {
                let sp: Vec<f64> = pred.iter().map(|v| v * c).collect();
                let sa: Vec<f64> = actual.iter().map(|v| v * c).collect();
                let scaled = mase(&sp, &sa, 1).unwrap();
                proptest::prop_assert!((scaled - base).abs() <= 1e-9 * base.abs().max(1.0));
            }
        }
    }
}
