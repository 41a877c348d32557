//! Table assembly and rendering for rankings and backtest runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::backtest::{run_backtest, BacktestReport, DirectionFilter, Gate, Side, StrategyConfig, Trade};
use crate::dependence::DependenceResult;
use crate::error::{Error, Result};
use crate::indicators::{
    adcptra_ribbon, adjusted_derivative, adjusted_label, build_ribbon, detect_crossings, AdCptraOptions, Convention,
    Ribbon, DEFAULT_LONG_PERIOD, DEFAULT_SHORT_PERIOD, DERIVATIVE_LONG_PERIOD, DERIVATIVE_SHORT_PERIOD,
};
use crate::metric::MetricCode;
use crate::series::MetricSeries;

/// Clipped series keyed by metric.
pub type Dataset = BTreeMap<MetricCode, MetricSeries>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Markdown,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Markdown => "md",
            Format::Csv => "csv",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidArgument(format!("unknown output format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Markdown => Ok(self.to_markdown()),
            Format::Csv => self.to_csv(),
        }
    }

    fn to_markdown(&self) -> String {
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "### {}\n", self.title);
        }
        let _ = writeln!(out, "| {} |", self.headers.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(self.headers.len()));
        for row in &self.rows {
            let _ = writeln!(out, "| {} |", row.join(" | "));
        }
        out
    }

    fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(&self.headers)?;
        for row in &self.rows {
            wtr.write_record(row)?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn fixed(v: f64) -> String {
    format!("{v:.2}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), fixed)
}

pub fn ranking_table(results: &[DependenceResult]) -> Table {
    Table {
        title: "Functional dependence of the price on each metric".into(),
        headers: vec!["Metric".into(), "xi".into(), "Pearson".into(), "n".into()],
        rows: results
            .iter()
            .map(|r| {
                vec![
                    r.code.to_string(),
                    format!("{:.6}", r.xi),
                    r.pearson.map_or_else(|| "-".into(), |p| format!("{p:.6}")),
                    r.n.to_string(),
                ]
            })
            .collect(),
    }
}

pub const BACKTEST_HEADERS: [&str; 15] = [
    "Metric",
    "Trades",
    "Winning Trades",
    "Winning Trades (%)",
    "Trade Profit (%)",
    "Maximum Achieved (%)",
    "Minimum BT Price (%)",
    "Threshold achieved",
    "Stop Loss activated",
    "Threshold achieved (%)",
    "Stop Loss activated (%)",
    "Strategy Balance",
    "Trades Total Balance Strategy (%)",
    "Strategy Total Profit (%)",
    "Winning Trades (w-l)/n (%)",
];

/// One backtest run with the trades behind it.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub report: BacktestReport,
    /// Set for tables that mix long and short rows.
    pub option: Option<Side>,
    pub trades: Vec<Trade>,
}

/// Renders reports in the standard column order. `with_option` adds the
/// long/short column used by the adjusted-ribbon tables.
pub fn backtest_table(title: &str, rows: &[ReportRow], with_option: bool) -> Table {
    let mut headers: Vec<String> = BACKTEST_HEADERS.iter().map(|h| h.to_string()).collect();
    if with_option {
        headers.insert(1, "Opt.".into());
    }
    let rows = rows
        .iter()
        .map(|row| {
            let r = &row.report;
            let mut cells = vec![
                r.label.clone(),
                r.n.to_string(),
                r.w.to_string(),
                opt(r.wt_ratio_pct),
                opt(r.mean_profit_pct),
                opt(r.mean_max_pct),
                opt(r.mean_min_pct),
                r.t.to_string(),
                r.s.to_string(),
                opt(r.threshold_pct),
                opt(r.stop_pct_share),
                r.sb_count.to_string(),
                opt(r.sb_pct),
                fixed(r.stp_pct),
                opt(r.wt_paper_pct),
            ];
            if with_option {
                cells.insert(1, row.option.map_or("-", Side::name).to_string());
            }
            cells
        })
        .collect();
    Table {
        title: title.to_string(),
        headers,
        rows,
    }
}

pub const LEDGER_HEADER: [&str; 10] = [
    "code",
    "direction",
    "entry_date",
    "entry_price",
    "exit_date",
    "exit_price",
    "max_pct",
    "min_pct",
    "profit_pct",
    "outcome",
];

/// Writes the trades of every row as one ledger.
pub fn write_ledger<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(LEDGER_HEADER)?;
    for row in rows {
        for t in &row.trades {
            wtr.write_record([
                row.report.label.clone(),
                t.side.name().to_string(),
                t.entry_date.to_string(),
                t.entry_price.to_string(),
                t.exit_date.to_string(),
                t.exit_price.to_string(),
                t.max_pct.to_string(),
                t.min_pct.to_string(),
                t.profit_pct.to_string(),
                t.outcome.name().to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Highest total profit first.
pub fn sort_by_stp(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| {
        b.report
            .stp_pct
            .total_cmp(&a.report.stp_pct)
            .then_with(|| a.report.label.cmp(&b.report.label))
    });
}

fn backtest_ribbon(
    label: String,
    code: MetricCode,
    ribbon: &Ribbon,
    price: &MetricSeries,
    config: &StrategyConfig,
    convention: Convention,
) -> Result<ReportRow> {
    let signals = detect_crossings(ribbon, convention);
    let (report, trades) = run_backtest(label, code, price, &signals, config)?;
    let option = match config.directions {
        DirectionFilter::LongOnly => Some(Side::Long),
        DirectionFilter::ShortOnly => Some(Side::Short),
        DirectionFilter::Both => None,
    };
    Ok(ReportRow { report, option, trades })
}

/// Backtests the (30, 60) ribbon of one metric.
pub fn ribbon_backtest(
    metric: &MetricSeries,
    price: &MetricSeries,
    config: &StrategyConfig,
    convention: Convention,
) -> Result<ReportRow> {
    let ribbon = build_ribbon(metric, DEFAULT_SHORT_PERIOD, DEFAULT_LONG_PERIOD)?;
    backtest_ribbon(
        metric.code().to_string(),
        metric.code(),
        &ribbon,
        price,
        config,
        convention,
    )
}

/// Backtests the gated AdCPTRA ribbon.
pub fn adcptra_backtest(
    cptra: &MetricSeries,
    price: &MetricSeries,
    config: &StrategyConfig,
    convention: Convention,
    options: AdCptraOptions,
) -> Result<ReportRow> {
    let (ribbon, gate) = adcptra_ribbon(cptra, options)?;
    let mut config = config.clone();
    config.gate = Some(Gate::adcptra(gate));
    backtest_ribbon(
        adjusted_label(cptra.code()),
        cptra.code(),
        &ribbon,
        price,
        &config,
        convention,
    )
}

/// Backtests the (10, 20) derivative ribbon of a monotonic metric.
pub fn derivative_backtest(
    metric: &MetricSeries,
    price: &MetricSeries,
    config: &StrategyConfig,
    convention: Convention,
) -> Result<ReportRow> {
    let ribbon = adjusted_derivative(metric, DERIVATIVE_SHORT_PERIOD, DERIVATIVE_LONG_PERIOD)?;
    backtest_ribbon(
        adjusted_label(metric.code()),
        metric.code(),
        &ribbon,
        price,
        config,
        convention,
    )
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    /// Target, stop, fee and window for the plain and AdCPTRA ribbons.
    pub strategy: StrategyConfig,
    /// Target and stop for the derivative ribbons.
    pub derivative_target_pct: f64,
    pub convention: Convention,
    pub adcptra: AdCptraOptions,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            strategy: StrategyConfig::default(),
            derivative_target_pct: StrategyConfig::DERIVATIVE_TARGET_PCT,
            convention: Convention::default(),
            adcptra: AdCptraOptions::default(),
        }
    }
}

impl SuiteConfig {
    fn derivative_strategy(&self) -> StrategyConfig {
        StrategyConfig {
            target_pct: self.derivative_target_pct,
            stop_pct: self.derivative_target_pct,
            gate: None,
            ..self.strategy.clone()
        }
    }
}

/// The five backtest tables.
#[derive(Debug, Clone)]
pub struct Suite {
    /// Plain ribbons, long and short combined.
    pub both: Vec<ReportRow>,
    pub long: Vec<ReportRow>,
    pub short: Vec<ReportRow>,
    /// CPTRA against the gated AdCPTRA ribbon.
    pub adcptra: Vec<ReportRow>,
    /// Derivative ribbons of the monotonic metrics.
    pub derivative: Vec<ReportRow>,
}

impl Suite {
    pub fn tables(&self) -> [(&'static str, &'static str, &[ReportRow]); 5] {
        [
            (
                "ribbons_both",
                "Blockchain ribbons, long and short operations",
                &self.both,
            ),
            ("ribbons_long", "Blockchain ribbons, long operations", &self.long),
            ("ribbons_short", "Blockchain ribbons, short operations", &self.short),
            ("adcptra", "CPTRA ribbon vs adjusted CPTRA ribbon", &self.adcptra),
            ("derivative", "Adjusted derivative ribbons", &self.derivative),
        ]
    }
}

fn series(data: &Dataset, code: MetricCode) -> Result<&MetricSeries> {
    data.get(&code)
        .ok_or_else(|| Error::InvalidArgument(format!("no {code} series loaded (expected {code}.csv)")))
}

/// Runs one direction filter over every plain ribbon metric in `data`,
/// sorted by total profit.
pub fn ribbon_table(
    data: &Dataset,
    price: &MetricSeries,
    strategy: &StrategyConfig,
    convention: Convention,
    directions: DirectionFilter,
) -> Result<Vec<ReportRow>> {
    let config = strategy.clone().with_directions(directions);
    let metrics: Vec<&MetricSeries> = data.values().filter(|s| !s.code().is_monotonic()).collect();
    let mut rows = metrics
        .par_iter()
        .map(|m| ribbon_backtest(m, price, &config, convention))
        .collect::<Result<Vec<_>>>()?;
    sort_by_stp(&mut rows);
    Ok(rows)
}

pub fn adcptra_table(data: &Dataset, price: &MetricSeries, config: &SuiteConfig) -> Result<Vec<ReportRow>> {
    let cptra = series(data, MetricCode::CPTRA)?;
    let mut rows = Vec::new();
    for directions in [DirectionFilter::LongOnly, DirectionFilter::ShortOnly] {
        let strategy = config.strategy.clone().with_directions(directions);
        rows.push(adcptra_backtest(
            cptra,
            price,
            &strategy,
            config.convention,
            config.adcptra,
        )?);
        rows.push(ribbon_backtest(cptra, price, &strategy, config.convention)?);
    }
    Ok(rows)
}

pub fn derivative_table(data: &Dataset, price: &MetricSeries, config: &SuiteConfig) -> Result<Vec<ReportRow>> {
    let base = config.derivative_strategy();
    let mut rows = Vec::new();
    for code in [MetricCode::BLCHS, MetricCode::NTRAT, MetricCode::MWNUS] {
        let metric = series(data, code)?;
        for directions in [DirectionFilter::LongOnly, DirectionFilter::ShortOnly] {
            let strategy = base.clone().with_directions(directions);
            rows.push(derivative_backtest(metric, price, &strategy, config.convention)?);
        }
    }
    Ok(rows)
}

/// Every backtest table for the loaded data. `data` must hold MKPRU plus the
/// metrics to report on, already clipped to the study window.
pub fn reporting_suite(data: &Dataset, config: &SuiteConfig) -> Result<Suite> {
    let price = series(data, MetricCode::PRICE)?;
    let table = |d| ribbon_table(data, price, &config.strategy, config.convention, d);
    Ok(Suite {
        both: table(DirectionFilter::Both)?,
        long: table(DirectionFilter::LongOnly)?,
        short: table(DirectionFilter::ShortOnly)?,
        adcptra: adcptra_table(data, price, config)?,
        derivative: derivative_table(data, price, config)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::Outcome;
    use crate::series::test_support::{daily, day};

    fn row(label: &str, stp: f64, n: usize) -> ReportRow {
        let trades: Vec<Trade> = (0..n)
            .map(|i| Trade {
                side: Side::Long,
                entry_date: day(i as i64),
                entry_price: 100.0,
                exit_date: day(i as i64 + 1),
                exit_price: 101.0,
                max_pct: 1.0,
                min_pct: 0.0,
                profit_pct: 1.0,
                outcome: Outcome::Win,
            })
            .collect();
        let mut report = crate::backtest::summarize(label, MetricCode::HRATE, &trades, &StrategyConfig::default());
        report.stp_pct = stp;
        ReportRow {
            report,
            option: None,
            trades,
        }
    }

    #[test]
    fn markdown_and_csv_share_columns() {
        let rows = vec![row("HRATE", 5.0, 2), row("DIFF", 9.0, 1)];
        let table = backtest_table("t", &rows, false);
        assert_eq!(table.headers.len(), 15);
        let md = table.render(Format::Markdown).unwrap();
        assert!(md.contains("| Metric | Trades | Winning Trades |"));
        let csv = table.render(Format::Csv).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv
            .lines()
            .next()
            .unwrap()
            .starts_with("Metric,Trades,Winning Trades,Winning Trades (%)"));
    }

    #[test]
    fn empty_rows_render_dashes() {
        let empty = crate::backtest::summarize("ATRCT", MetricCode::ATRCT, &[], &StrategyConfig::default());
        let table = backtest_table(
            "t",
            &[ReportRow {
                report: empty,
                option: Some(Side::Short),
                trades: vec![],
            }],
            true,
        );
        assert_eq!(table.headers[1], "Opt.");
        assert_eq!(table.rows[0][1], "short");
        assert_eq!(table.rows[0][2], "0");
        assert_eq!(table.rows[0][4], "-");
    }

    #[test]
    fn rows_sort_by_total_profit() {
        let mut rows = vec![row("A", 1.0, 1), row("B", 7.0, 1), row("C", -3.0, 1)];
        sort_by_stp(&mut rows);
        let labels: Vec<_> = rows.iter().map(|r| r.report.label.as_str()).collect();
        assert_eq!(labels, vec!["B", "A", "C"]);
    }

    #[test]
    fn ledger_has_one_line_per_trade() {
        let mut buf = Vec::new();
        write_ledger(&[row("HRATE", 0.0, 3)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), LEDGER_HEADER.join(","));
        assert_eq!(text.lines().count(), 4);
        assert!(text.contains("HRATE,long,2012-01-01,100,2012-01-02,101,1,0,1,win"));
    }

    #[test]
    fn zero_crossing_metric_yields_empty_row() {
        let price = daily(
            MetricCode::MKPRU,
            &(0..200).map(|i| 100.0 + i as f64).collect::<Vec<_>>(),
        );
        let flat = daily(MetricCode::DIFF, &[5.0; 200]);
        let row = ribbon_backtest(&flat, &price, &StrategyConfig::default(), Convention::PaperText).unwrap();
        assert_eq!(row.report.n, 0);
    }

    #[test]
    fn ranking_table_format() {
        let t = ranking_table(&[DependenceResult {
            code: MetricCode::MWNUS,
            xi: 0.9867821,
            pearson: None,
            n: 4432,
        }]);
        assert_eq!(t.rows[0], vec!["MWNUS", "0.986782", "-", "4432"]);
    }
}
