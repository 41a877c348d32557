//! Command-line front end.
//!
//! Every option can also come from a flat `key = value` config file passed
//! with `--config`; flags override the file, which overrides the defaults.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::backtest::{DirectionFilter, StrategyConfig};
use crate::dependence::{score, sort_by_xi};
use crate::error::Error;
use crate::features::{
    build_test1, build_test2, chronological_split, write_split_manifest, FeatureMatrix, DEFAULT_HORIZON,
    DEFAULT_TRAIN_FRACTION,
};
use crate::indicators::{
    adcptra_with, adjusted_derivative, build_ribbon, AdCptraOptions, Convention, DEFAULT_LONG_PERIOD,
    DEFAULT_SHORT_PERIOD, DERIVATIVE_LONG_PERIOD, DERIVATIVE_SHORT_PERIOD,
};
use crate::ingest::{
    clip_to_study_window, credentials_from_env, fetch_remote, load_snapshot, AuthPlacement, RemoteSource,
    DEFAULT_API_KEY_ENV, DEFAULT_PATH_TEMPLATE,
};
use crate::metric::MetricCode;
use crate::report::{
    adcptra_backtest, backtest_table, derivative_backtest, ranking_table, ribbon_backtest, sort_by_stp, write_ledger,
    Dataset, Format, ReportRow, Table,
};
use crate::series::{slice_window, MetricSeries};

pub const DEFAULT_BASE_URL: &str = "https://data.nasdaq.com/api/v3";
pub const DEFAULT_DATA_DIR: &str = "data";
pub const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Parser)]
#[command(
    name = "chain-ribbons",
    version,
    about = "Blockchain-metric ribbons and crossing backtests for Bitcoin"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Download metric snapshots into the data directory.
    Fetch,
    /// Rank metrics by the dependence of the price on them.
    Rank,
    /// Backtest the (30, 60) ribbon of each metric.
    Backtest,
    /// Backtest the adjusted CPTRA ribbon and the derivative ribbons.
    Adjusted,
    /// Write feature matrices for forecasting models.
    Features,
    /// Write ribbon and adjusted-indicator series as CSV for plotting.
    Export,
}

/// Options shared by all commands. All are optional here so that the config
/// file can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Flat `key = value` file with defaults for any option below.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory holding `<CODE>.csv` snapshots [default: data].
    #[arg(long, global = true, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Comma-separated metric codes, or `all`.
    #[arg(long, global = true, value_name = "CODES")]
    pub metrics: Option<String>,
    /// Take-profit threshold in percent [default: 30].
    #[arg(long, global = true, value_name = "PCT")]
    pub target_pct: Option<String>,
    /// Stop-loss threshold in percent [default: 30].
    #[arg(long, global = true, value_name = "PCT")]
    pub stop_pct: Option<String>,
    /// Fee per trade in percent [default: 1].
    #[arg(long, global = true, value_name = "PCT")]
    pub fee_pct: Option<String>,
    /// Target and stop for the derivative ribbons [default: 10].
    #[arg(long, global = true, value_name = "PCT")]
    pub derivative_target_pct: Option<String>,
    /// long, short, both or all [default: all].
    #[arg(long, global = true, value_name = "DIR")]
    pub direction: Option<String>,
    /// paper-text, conventional or both [default: paper-text].
    #[arg(long, global = true, value_name = "NAME")]
    pub convention: Option<String>,
    /// First date (YYYY-MM-DD) on which signals may open trades.
    #[arg(long, global = true, value_name = "DATE")]
    pub window_start: Option<String>,
    /// Last date (YYYY-MM-DD) on which signals may open trades.
    #[arg(long, global = true, value_name = "DATE")]
    pub window_end: Option<String>,
    /// Forecast horizon in records [default: 10].
    #[arg(long, global = true, value_name = "N")]
    pub horizon: Option<String>,
    /// Share of rows in the training split [default: 0.8].
    #[arg(long, global = true, value_name = "F")]
    pub train_fraction: Option<String>,
    /// markdown or csv [default: markdown].
    #[arg(long, global = true, value_name = "FMT")]
    pub format: Option<String>,
    /// Report failing metrics and carry on with the rest.
    #[arg(long, global = true)]
    pub keep_going: bool,
    /// Directory for report, ledger, feature and plot files.
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Remote API root [default: https://data.nasdaq.com/api/v3].
    #[arg(long, global = true, value_name = "URL")]
    pub base_url: Option<String>,
    /// Dataset URL with `{base}` and `{CODE}` placeholders.
    #[arg(long, global = true, value_name = "TEMPLATE")]
    pub path_template: Option<String>,
    /// Environment variable holding the API key [default: DATALINK_API_KEY].
    #[arg(long, global = true, value_name = "VAR")]
    pub api_key_env: Option<String>,
    /// Send the API key in this header instead of the `api_key` query parameter.
    #[arg(long, global = true, value_name = "NAME")]
    pub auth_header: Option<String>,
    /// HTTP timeout in seconds [default: 30].
    #[arg(long, global = true, value_name = "SECS")]
    pub timeout_secs: Option<String>,
}

const CONFIG_KEYS: &[&str] = &[
    "data-dir",
    "metrics",
    "target-pct",
    "stop-pct",
    "fee-pct",
    "derivative-target-pct",
    "direction",
    "convention",
    "window-start",
    "window-end",
    "horizon",
    "train-fraction",
    "format",
    "keep-going",
    "out-dir",
    "base-url",
    "path-template",
    "api-key-env",
    "auth-header",
    "timeout-secs",
];

/// Parses the config file format: one `key = value` per line, `#` starts a
/// comment line, keys use the long flag names with `-` or `_`.
pub fn parse_config(text: &str) -> anyhow::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected `key = value`", i + 1))?;
        let key = key.trim().to_ascii_lowercase().replace('_', "-");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            bail!("config line {}: unknown key `{key}`", i + 1);
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            bail!("config line {}: `{key}` given twice", i + 1);
        }
    }
    Ok(out)
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    /// `None` selects the command's default set.
    pub metrics: Option<Vec<MetricCode>>,
    pub strategy: StrategyConfig,
    pub derivative_target_pct: f64,
    pub directions: Vec<DirectionFilter>,
    pub conventions: Vec<Convention>,
    pub horizon: usize,
    pub train_fraction: f64,
    pub format: Format,
    pub keep_going: bool,
    pub out_dir: Option<PathBuf>,
    pub source: RemoteSource,
    pub api_key_env: String,
}

struct Layers<'a> {
    file: &'a BTreeMap<String, String>,
}

impl Layers<'_> {
    fn pick<T>(&self, flag: Option<&str>, key: &str) -> anyhow::Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let (raw, origin) = match (flag, self.file.get(key)) {
            (Some(v), _) => (v, "flag"),
            (None, Some(v)) => (v.as_str(), "config file"),
            (None, None) => return Ok(None),
        };
        raw.parse::<T>()
            .map(Some)
            .map_err(|e| anyhow!("invalid {key} `{raw}` ({origin}): {e}"))
    }
}

fn parse_directions(s: &str) -> Result<Vec<DirectionFilter>, Error> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(vec![
            DirectionFilter::Both,
            DirectionFilter::LongOnly,
            DirectionFilter::ShortOnly,
        ]);
    }
    Ok(vec![s.parse()?])
}

fn parse_conventions(s: &str) -> Result<Vec<Convention>, Error> {
    if s.trim().eq_ignore_ascii_case("both") {
        return Ok(vec![Convention::PaperText, Convention::Conventional]);
    }
    Ok(vec![s.parse()?])
}

struct DirectionList(Vec<DirectionFilter>);
struct ConventionList(Vec<Convention>);
struct MetricList(Vec<MetricCode>);

impl FromStr for DirectionList {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        parse_directions(s).map(DirectionList)
    }
}

impl FromStr for ConventionList {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        parse_conventions(s).map(ConventionList)
    }
}

impl FromStr for MetricList {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        MetricCode::parse_list(s).map(MetricList)
    }
}

impl RunConfig {
    pub fn resolve(options: &Options) -> anyhow::Result<Self> {
        let file = match &options.config {
            Some(path) => {
                let text =
                    fs::read_to_string(path).with_context(|| format!("reading config file {}", path.display()))?;
                parse_config(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => BTreeMap::new(),
        };
        let l = Layers { file: &file };
        let o = options;
        let path_flag = |p: &Option<PathBuf>| p.as_ref().map(|p| p.to_string_lossy().into_owned());
        let data_dir_flag = path_flag(&o.data_dir);
        let out_dir_flag = path_flag(&o.out_dir);

        let mut strategy = StrategyConfig::default();
        if let Some(v) = l.pick(o.target_pct.as_deref(), "target-pct")? {
            strategy.target_pct = v;
        }
        if let Some(v) = l.pick(o.stop_pct.as_deref(), "stop-pct")? {
            strategy.stop_pct = v;
        }
        if let Some(v) = l.pick(o.fee_pct.as_deref(), "fee-pct")? {
            strategy.fee_pct = v;
        }
        let start: Option<NaiveDate> = l.pick(o.window_start.as_deref(), "window-start")?;
        let end: Option<NaiveDate> = l.pick(o.window_end.as_deref(), "window-end")?;
        if start.is_some() || end.is_some() {
            strategy.window = Some((start.unwrap_or(NaiveDate::MIN), end.unwrap_or(NaiveDate::MAX)));
        }
        strategy.validate()?;

        let derivative_target_pct = l
            .pick(o.derivative_target_pct.as_deref(), "derivative-target-pct")?
            .unwrap_or(StrategyConfig::DERIVATIVE_TARGET_PCT);
        if derivative_target_pct.is_nan() || derivative_target_pct <= 0.0 {
            bail!("derivative-target-pct must be positive");
        }
        let horizon = l.pick(o.horizon.as_deref(), "horizon")?.unwrap_or(DEFAULT_HORIZON);
        let train_fraction = l
            .pick(o.train_fraction.as_deref(), "train-fraction")?
            .unwrap_or(DEFAULT_TRAIN_FRACTION);

        let mut source = RemoteSource::new(
            l.pick::<String>(o.base_url.as_deref(), "base-url")?
                .unwrap_or_else(|| DEFAULT_BASE_URL.to_string()),
        );
        source.path_template = l
            .pick(o.path_template.as_deref(), "path-template")?
            .unwrap_or_else(|| DEFAULT_PATH_TEMPLATE.to_string());
        if let Some(header) = l.pick::<String>(o.auth_header.as_deref(), "auth-header")? {
            source.auth = AuthPlacement::Header(header);
        }
        if let Some(secs) = l.pick::<u64>(o.timeout_secs.as_deref(), "timeout-secs")? {
            source.timeout = Duration::from_secs(secs);
        }

        let keep_going_flag = o.keep_going.then_some("true");
        Ok(RunConfig {
            data_dir: l
                .pick(data_dir_flag.as_deref(), "data-dir")?
                .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR)),
            metrics: l.pick::<MetricList>(o.metrics.as_deref(), "metrics")?.map(|m| m.0),
            strategy,
            derivative_target_pct,
            directions: l
                .pick::<DirectionList>(o.direction.as_deref(), "direction")?
                .map_or_else(|| parse_directions("all").expect("literal"), |d| d.0),
            conventions: l
                .pick::<ConventionList>(o.convention.as_deref(), "convention")?
                .map_or_else(|| vec![Convention::default()], |c| c.0),
            horizon,
            train_fraction,
            format: l.pick(o.format.as_deref(), "format")?.unwrap_or_default(),
            keep_going: l.pick(keep_going_flag, "keep-going")?.unwrap_or(false),
            out_dir: l.pick(out_dir_flag.as_deref(), "out-dir")?,
            source,
            api_key_env: l
                .pick(o.api_key_env.as_deref(), "api-key-env")?
                .unwrap_or_else(|| DEFAULT_API_KEY_ENV.to_string()),
        })
    }

    fn metrics_or(&self, default: impl IntoIterator<Item = MetricCode>) -> Vec<MetricCode> {
        self.metrics.clone().unwrap_or_else(|| default.into_iter().collect())
    }

    fn out_dir_or_default(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

/// Collects per-metric failures under `--keep-going`.
struct Failures {
    keep_going: bool,
    items: Vec<String>,
}

impl Failures {
    fn new(keep_going: bool) -> Self {
        Self {
            keep_going,
            items: Vec::new(),
        }
    }

    /// `Some` on success. On failure either records it and returns `None`,
    /// or aborts the run.
    fn check<T>(&mut self, label: &str, result: crate::Result<T>) -> anyhow::Result<Option<T>> {
        match result {
            Ok(v) => Ok(Some(v)),
            Err(e) if self.keep_going => {
                eprintln!("warning: {label}: {e}");
                self.items.push(label.to_string());
                Ok(None)
            }
            Err(e) => Err(anyhow::Error::new(e).context(label.to_string())),
        }
    }

    fn finish(self) -> anyhow::Result<()> {
        if self.items.is_empty() {
            Ok(())
        } else {
            bail!("{} item(s) failed: {}", self.items.len(), self.items.join(", "))
        }
    }
}

fn load(cfg: &RunConfig, code: MetricCode) -> crate::Result<MetricSeries> {
    load_snapshot(&cfg.data_dir, code).map(|s| clip_to_study_window(&s))
}

/// Loads the price and the requested metrics. The price is never optional.
fn load_dataset(cfg: &RunConfig, codes: &[MetricCode], failures: &mut Failures) -> anyhow::Result<Dataset> {
    let mut data = Dataset::new();
    let price = load(cfg, MetricCode::PRICE)
        .with_context(|| format!("loading the price series from {}", cfg.data_dir.display()))?;
    data.insert(MetricCode::PRICE, price);
    for &code in codes {
        if code == MetricCode::PRICE {
            continue;
        }
        if let Some(s) = failures.check(code.as_str(), load(cfg, code))? {
            data.insert(code, s);
        }
    }
    Ok(data)
}

fn loaded<'a>(data: &'a Dataset, codes: &[MetricCode]) -> Vec<&'a MetricSeries> {
    codes.iter().filter_map(|c| data.get(c)).collect()
}

struct Output<'a> {
    cfg: &'a RunConfig,
    stdout: std::io::StdoutLock<'static>,
    first: bool,
}

impl<'a> Output<'a> {
    fn new(cfg: &'a RunConfig) -> anyhow::Result<Self> {
        if let Some(dir) = &cfg.out_dir {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(Self {
            cfg,
            stdout: std::io::stdout().lock(),
            first: true,
        })
    }

    fn table(&mut self, name: &str, table: &Table) -> anyhow::Result<()> {
        let text = table.render(self.cfg.format)?;
        if !self.first {
            writeln!(self.stdout)?;
        }
        self.first = false;
        if self.cfg.format == Format::Csv {
            writeln!(self.stdout, "# {}", table.title)?;
        }
        self.stdout.write_all(text.as_bytes())?;
        if let Some(dir) = &self.cfg.out_dir {
            let path = dir.join(format!("{name}.{}", self.cfg.format.extension()));
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }

    fn ledger(&self, name: &str, rows: &[ReportRow]) -> anyhow::Result<()> {
        if let Some(dir) = &self.cfg.out_dir {
            let path = dir.join(format!("{name}.csv"));
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_ledger(rows, std::io::BufWriter::new(file))?;
        }
        Ok(())
    }
}

fn cmd_fetch(cfg: &RunConfig) -> anyhow::Result<()> {
    let codes = cfg.metrics_or(MetricCode::ALL);
    let credentials = match credentials_from_env(&cfg.api_key_env) {
        Ok(key) => Some(key),
        Err(e) => {
            eprintln!("note: {e}; requesting without an API key");
            None
        }
    };
    fs::create_dir_all(&cfg.data_dir).with_context(|| format!("creating {}", cfg.data_dir.display()))?;
    let mut failures = Failures::new(cfg.keep_going);
    for code in codes {
        let result = fetch_remote(code, &cfg.source, credentials.as_deref(), &cfg.data_dir);
        if let Some(series) = failures.check(code.as_str(), result)? {
            println!("{code}: {} records", series.len());
        }
    }
    failures.finish()
}

fn window_slice(cfg: &RunConfig, s: &MetricSeries) -> MetricSeries {
    match cfg.strategy.window {
        Some((start, end)) => slice_window(s, start, end),
        None => s.clone(),
    }
}

fn cmd_rank(cfg: &RunConfig) -> anyhow::Result<()> {
    let codes = cfg.metrics_or(MetricCode::ALL);
    let mut failures = Failures::new(cfg.keep_going);
    let data = load_dataset(cfg, &codes, &mut failures)?;
    let price = window_slice(cfg, &data[&MetricCode::PRICE]);
    let mut results = Vec::new();
    for m in loaded(&data, &codes) {
        if m.code() == MetricCode::PRICE {
            continue;
        }
        if let Some(r) = failures.check(m.code().as_str(), score(&window_slice(cfg, m), &price))? {
            results.push(r);
        }
    }
    sort_by_xi(&mut results);
    Output::new(cfg)?.table("rank", &ranking_table(&results))?;
    failures.finish()
}

fn operations(d: DirectionFilter) -> &'static str {
    match d {
        DirectionFilter::Both => "long and short operations",
        DirectionFilter::LongOnly => "long operations",
        DirectionFilter::ShortOnly => "short operations",
    }
}

fn cmd_backtest(cfg: &RunConfig) -> anyhow::Result<()> {
    let codes = cfg.metrics_or(MetricCode::ribbon_metrics());
    let mut failures = Failures::new(cfg.keep_going);
    let data = load_dataset(cfg, &codes, &mut failures)?;
    let price = &data[&MetricCode::PRICE];
    let mut metrics = Vec::new();
    for m in loaded(&data, &codes) {
        let probe = build_ribbon(m, DEFAULT_SHORT_PERIOD, DEFAULT_LONG_PERIOD).map(|_| ());
        if failures.check(m.code().as_str(), probe)?.is_some() {
            metrics.push(m);
        }
    }
    let mut out = Output::new(cfg)?;
    for &convention in &cfg.conventions {
        for &directions in &cfg.directions {
            let config = cfg.strategy.clone().with_directions(directions);
            let mut rows = metrics
                .iter()
                .map(|m| ribbon_backtest(m, price, &config, convention))
                .collect::<crate::Result<Vec<_>>>()?;
            sort_by_stp(&mut rows);
            let name = format!("backtest_{}_{}", convention.name(), directions.name());
            let title = format!(
                "Blockchain ribbons, {}, {} crossings",
                operations(directions),
                convention.name()
            );
            out.table(&name, &backtest_table(&title, &rows, false))?;
            out.ledger(&format!("trades_{}_{}", convention.name(), directions.name()), &rows)?;
        }
    }
    failures.finish()
}

fn cmd_adjusted(cfg: &RunConfig) -> anyhow::Result<()> {
    let derivative_codes = [MetricCode::BLCHS, MetricCode::NTRAT, MetricCode::MWNUS];
    let default: Vec<MetricCode> = std::iter::once(MetricCode::CPTRA).chain(derivative_codes).collect();
    let codes = cfg.metrics_or(default);
    let mut failures = Failures::new(cfg.keep_going);
    let data = load_dataset(cfg, &codes, &mut failures)?;
    let price = &data[&MetricCode::PRICE];
    let sides = [DirectionFilter::LongOnly, DirectionFilter::ShortOnly];
    let derivative_base = StrategyConfig {
        target_pct: cfg.derivative_target_pct,
        stop_pct: cfg.derivative_target_pct,
        ..cfg.strategy.clone()
    };
    let mut out = Output::new(cfg)?;
    for &convention in &cfg.conventions {
        let mut cptra_rows = Vec::new();
        if let Some(cptra) = data.get(&MetricCode::CPTRA) {
            for d in sides {
                let config = cfg.strategy.clone().with_directions(d);
                let adjusted = adcptra_backtest(cptra, price, &config, convention, AdCptraOptions::default());
                if let Some(row) = failures.check(&format!("AdCPTRA {}", d.name()), adjusted)? {
                    cptra_rows.push(row);
                }
                cptra_rows.push(ribbon_backtest(cptra, price, &config, convention)?);
            }
        }
        let mut derivative_rows = Vec::new();
        for code in derivative_codes {
            let Some(metric) = data.get(&code) else { continue };
            for d in sides {
                let config = derivative_base.clone().with_directions(d);
                let row = derivative_backtest(metric, price, &config, convention);
                if let Some(row) = failures.check(&format!("Ad{code} {}", d.name()), row)? {
                    derivative_rows.push(row);
                }
            }
        }
        let conv = convention.name();
        if !cptra_rows.is_empty() {
            let title = format!("CPTRA ribbon vs adjusted CPTRA ribbon, {conv} crossings");
            out.table(&format!("adcptra_{conv}"), &backtest_table(&title, &cptra_rows, true))?;
            out.ledger(&format!("trades_adcptra_{conv}"), &cptra_rows)?;
        }
        if !derivative_rows.is_empty() {
            let title = format!(
                "Adjusted derivative ribbons, {}% target, {conv} crossings",
                cfg.derivative_target_pct
            );
            out.table(
                &format!("derivative_{conv}"),
                &backtest_table(&title, &derivative_rows, true),
            )?;
            out.ledger(&format!("trades_derivative_{conv}"), &derivative_rows)?;
        }
    }
    failures.finish()
}

fn write_matrix(dir: &Path, name: &str, m: &FeatureMatrix, target: &str, fraction: f64) -> anyhow::Result<()> {
    let create = |file: String| -> anyhow::Result<std::io::BufWriter<fs::File>> {
        let path = dir.join(file);
        Ok(std::io::BufWriter::new(
            fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        ))
    };
    m.write_csv(create(format!("{name}.csv"))?)?;
    m.write_schema(target, create(format!("{name}_schema.csv"))?)?;
    let (train, test) = chronological_split(m, fraction)?;
    write_split_manifest(&train, &test, fraction, create(format!("{name}_split.txt"))?)?;
    println!(
        "{name}: {} rows, {} features, {} rows dropped, train {} / test {}",
        m.rows(),
        m.columns.len(),
        m.dropped_rows,
        train.rows(),
        test.rows()
    );
    Ok(())
}

fn cmd_features(cfg: &RunConfig) -> anyhow::Result<()> {
    let codes = cfg.metrics_or(MetricCode::ALL.into_iter().filter(|&c| c != MetricCode::PRICE));
    let mut failures = Failures::new(cfg.keep_going);
    let data = load_dataset(cfg, &codes, &mut failures)?;
    let price = &data[&MetricCode::PRICE];
    let metrics: Vec<MetricSeries> = loaded(&data, &codes).into_iter().cloned().collect();
    let dir = cfg.out_dir_or_default();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let h = cfg.horizon;
    let test1 = build_test1(&metrics, price, h)?;
    write_matrix(
        &dir,
        "test1",
        &test1,
        &format!("MKPRU close {h} records ahead"),
        cfg.train_fraction,
    )?;
    let test2 = build_test2(&metrics, price, h)?;
    let target = format!("percent change of the MKPRU close {h} records ahead");
    write_matrix(&dir, "test2", &test2, &target, cfg.train_fraction)?;
    failures.finish()
}

fn write_columns(path: &Path, header: &[&str], columns: &[&MetricSeries]) -> anyhow::Result<()> {
    let mut dates: Vec<NaiveDate> = columns.iter().flat_map(|c| c.dates().iter().copied()).collect();
    dates.sort();
    dates.dedup();
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut wtr = csv::Writer::from_writer(std::io::BufWriter::new(file));
    wtr.write_record(header)?;
    for d in dates {
        let mut rec = vec![d.to_string()];
        rec.extend(
            columns
                .iter()
                .map(|c| c.value_at(d).map_or_else(String::new, |v| v.to_string())),
        );
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

fn cmd_export(cfg: &RunConfig) -> anyhow::Result<()> {
    let codes = cfg.metrics_or(MetricCode::ALL);
    let mut failures = Failures::new(cfg.keep_going);
    let data = load_dataset(cfg, &codes, &mut failures)?;
    let dir = cfg.out_dir_or_default();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for m in loaded(&data, &codes) {
        let code = m.code();
        let ribbon = build_ribbon(m, DEFAULT_SHORT_PERIOD, DEFAULT_LONG_PERIOD);
        if let Some(r) = failures.check(code.as_str(), ribbon)? {
            let path = dir.join(format!("{code}_ribbon.csv"));
            write_columns(
                &path,
                &["date", "value", "sma_30", "sma_60"],
                &[m, &r.short_line, &r.long_line],
            )?;
        }
        if code.is_monotonic() {
            let d = adjusted_derivative(m, DERIVATIVE_SHORT_PERIOD, DERIVATIVE_LONG_PERIOD);
            if let Some(r) = failures.check(&format!("Ad{code}"), d)? {
                let path = dir.join(format!("Ad{code}_ribbon.csv"));
                write_columns(
                    &path,
                    &["date", "diff1_sma_10", "diff1_sma_20"],
                    &[&r.short_line, &r.long_line],
                )?;
            }
        }
        if code == MetricCode::CPTRA {
            let ad = adcptra_with(m, AdCptraOptions::default());
            if let Some(ad) = failures.check("AdCPTRA", ad)? {
                let channel = |line: &crate::indicators::RegressionLine| {
                    let values = (0..ad.sma30.len()).map(|i| line.at(i)).collect();
                    MetricSeries::new(code, ad.sma30.dates().to_vec(), values)
                };
                let upper = channel(&ad.max_line)?;
                let lower = channel(&ad.min_line)?;
                let path = dir.join("AdCPTRA.csv");
                write_columns(
                    &path,
                    &["date", "sma_30", "max_line", "min_line", "adcptra"],
                    &[&ad.sma30, &upper, &lower, &ad.values],
                )?;
            }
        }
    }
    println!("wrote plot series to {}", dir.display());
    failures.finish()
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::resolve(&cli.options)?;
    match cli.command {
        Command::Fetch => cmd_fetch(&cfg),
        Command::Rank => cmd_rank(&cfg),
        Command::Backtest => cmd_backtest(&cfg),
        Command::Adjusted => cmd_adjusted(&cfg),
        Command::Features => cmd_features(&cfg),
        Command::Export => cmd_export(&cfg),
    }
}

/// Parses the process arguments and runs; returns the exit code.
pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
