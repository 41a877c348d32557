//! Crossing-signal backtests under a fixed target/stop rule.
//!
//! Every crossing is an opportunity to enter. An open position is closed by
//! whichever comes first: the target level, the stop level (both checked on
//! daily closes), or the next crossing. After a target or stop close the
//! strategy stays flat until the next crossing.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::indicators::{Crossing, Direction};
use crate::metric::MetricCode;
use crate::series::MetricSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Long,
    Short,
}

impl Side {
    pub fn from_signal(direction: Direction) -> Self {
        match direction {
            Direction::Bullish => Side::Long,
            Direction::Bearish => Side::Short,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Long => "long",
            Side::Short => "short",
        }
    }

    /// Profit of a position from `entry` to `exit`, in percent of entry.
    pub fn profit_pct(self, entry: f64, exit: f64) -> f64 {
        match self {
            Side::Long => 100.0 * (exit - entry) / entry,
            Side::Short => 100.0 * (entry - exit) / entry,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectionFilter {
    LongOnly,
    ShortOnly,
    #[default]
    Both,
}

impl DirectionFilter {
    pub fn allows(self, side: Side) -> bool {
        matches!(
            (self, side),
            (DirectionFilter::Both, _)
                | (DirectionFilter::LongOnly, Side::Long)
                | (DirectionFilter::ShortOnly, Side::Short)
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            DirectionFilter::LongOnly => "long",
            DirectionFilter::ShortOnly => "short",
            DirectionFilter::Both => "both",
        }
    }
}

impl FromStr for DirectionFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "long" | "long-only" => Ok(DirectionFilter::LongOnly),
            "short" | "short-only" => Ok(DirectionFilter::ShortOnly),
            "both" => Ok(DirectionFilter::Both),
            other => Err(Error::InvalidArgument(format!("unknown direction `{other}`"))),
        }
    }
}

/// Entry filter on an indicator value at the signal date: longs need the
/// value below `long_below`, shorts above `short_above`.
#[derive(Debug, Clone)]
pub struct Gate {
    pub series: MetricSeries,
    pub long_below: f64,
    pub short_above: f64,
}

impl Gate {
    pub const ADCPTRA_LONG_BELOW: f64 = 0.3;
    pub const ADCPTRA_SHORT_ABOVE: f64 = 0.6;

    pub fn adcptra(series: MetricSeries) -> Self {
        Self {
            series,
            long_below: Self::ADCPTRA_LONG_BELOW,
            short_above: Self::ADCPTRA_SHORT_ABOVE,
        }
    }

    /// `None` when the gate series has no value on `date`.
    fn admits(&self, side: Side, date: NaiveDate) -> Option<bool> {
        let v = self.series.value_at(date)?;
        Some(match side {
            Side::Long => v < self.long_below,
            Side::Short => v > self.short_above,
        })
    }
}

#[derive(Debug, Clone)]
pub struct StrategyConfig {
    pub target_pct: f64,
    pub stop_pct: f64,
    /// Fee charged once per trade, in percent.
    pub fee_pct: f64,
    pub directions: DirectionFilter,
    pub gate: Option<Gate>,
    /// Only signals dated inside this inclusive range open positions.
    pub window: Option<(NaiveDate, NaiveDate)>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            target_pct: 30.0,
            stop_pct: 30.0,
            fee_pct: 1.0,
            directions: DirectionFilter::Both,
            gate: None,
            window: None,
        }
    }
}

impl StrategyConfig {
    pub const DERIVATIVE_TARGET_PCT: f64 = 10.0;

    /// Settings for the derivative ribbons, whose swings are shorter.
    pub fn derivative() -> Self {
        Self {
            target_pct: Self::DERIVATIVE_TARGET_PCT,
            stop_pct: Self::DERIVATIVE_TARGET_PCT,
            ..Self::default()
        }
    }

    pub fn with_directions(mut self, directions: DirectionFilter) -> Self {
        self.directions = directions;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_pct > 0.0 && self.stop_pct > 0.0 && self.fee_pct >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need target > 0, stop > 0, fee >= 0 (got {}, {}, {})",
                self.target_pct, self.stop_pct, self.fee_pct
            )));
        }
        if let Some((start, end)) = self.window {
            if start > end {
                return Err(Error::InvalidArgument(format!(
                    "window start {start} is after end {end}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// A: closed by a crossing (or end of data) with positive profit.
    Win,
    /// B: closed by a crossing (or end of data) without profit.
    Loss,
    /// C
    StopLoss,
    /// D
    Target,
}

impl Outcome {
    pub fn letter(self) -> char {
        match self {
            Outcome::Win => 'A',
            Outcome::Loss => 'B',
            Outcome::StopLoss => 'C',
            Outcome::Target => 'D',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Outcome::Win => "win",
            Outcome::Loss => "loss",
            Outcome::StopLoss => "stop_loss",
            Outcome::Target => "target",
        }
    }

    /// Counted as a winning trade.
    pub fn is_winning(self) -> bool {
        matches!(self, Outcome::Win | Outcome::Target)
    }

    /// Closed by a crossing or end of data rather than a threshold.
    pub fn is_free(self) -> bool {
        matches!(self, Outcome::Win | Outcome::Loss)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trade {
    pub side: Side,
    pub entry_date: NaiveDate,
    pub entry_price: f64,
    pub exit_date: NaiveDate,
    pub exit_price: f64,
    /// Highest close after entry up to exit, in percent of entry.
    pub max_pct: f64,
    /// Lowest close after entry up to exit, in percent of entry.
    pub min_pct: f64,
    pub profit_pct: f64,
    pub outcome: Outcome,
}

/// Aggregate performance indicators for one run.
///
/// Ratios are `None` when the run has no trades.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub label: String,
    pub code: MetricCode,
    pub n: usize,
    pub w: usize,
    pub l: usize,
    /// `100 w / n`.
    pub wt_ratio_pct: Option<f64>,
    /// `100 (w - l) / n`, net of losing trades.
    pub wt_paper_pct: Option<f64>,
    /// Mean profit over all trades.
    pub mean_profit_pct: Option<f64>,
    pub mean_max_pct: Option<f64>,
    pub mean_min_pct: Option<f64>,
    pub t: usize,
    pub s: usize,
    pub threshold_pct: Option<f64>,
    pub stop_pct_share: Option<f64>,
    pub sb_count: i64,
    pub sb_pct: Option<f64>,
    pub stp_pct: f64,
}

/// Maps each signal to the first price record on or after its date. Signals
/// past the end of the price data, or landing on the same record as an
/// earlier signal, are dropped.
fn locate_signals(price: &MetricSeries, signals: &[Crossing]) -> Vec<(usize, Crossing)> {
    let mut out: Vec<(usize, Crossing)> = Vec::with_capacity(signals.len());
    for c in signals {
        let idx = price.dates().partition_point(|d| *d < c.date);
        if idx >= price.len() {
            break;
        }
        if out.last().is_some_and(|(prev, _)| *prev >= idx) {
            continue;
        }
        out.push((idx, *c));
    }
    out
}

/// Runs the position state machine and returns the closed trades.
pub fn simulate(price: &MetricSeries, signals: &[Crossing], config: &StrategyConfig) -> Result<Vec<Trade>> {
    config.validate()?;
    if signals.windows(2).any(|w| w[1].date <= w[0].date) {
        return Err(Error::InvalidArgument(
            "signals must be in strictly increasing date order".into(),
        ));
    }
    let dates = price.dates();
    let closes = price.values();
    let located = locate_signals(price, signals);
    let mut trades = Vec::new();

    for (k, &(entry_idx, signal)) in located.iter().enumerate() {
        let side = Side::from_signal(signal.direction);
        if !config.directions.allows(side) {
            continue;
        }
        if let Some((start, end)) = config.window {
            if signal.date < start || signal.date > end {
                continue;
            }
        }
        if let Some(gate) = &config.gate {
            if gate.admits(side, signal.date) != Some(true) {
                continue;
            }
        }
        let entry = closes[entry_idx];
        if entry <= 0.0 {
            continue;
        }
        let last_idx = located.get(k + 1).map_or(price.len() - 1, |next| next.0);
        if last_idx <= entry_idx {
            continue;
        }

        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        let mut close: Option<(usize, Outcome)> = None;
        for (j, &p) in closes.iter().enumerate().take(last_idx + 1).skip(entry_idx + 1) {
            hi = hi.max(p);
            lo = lo.min(p);
            let gain = side.profit_pct(entry, p);
            // a close breaching both levels resolves to the stop
            if -gain >= config.stop_pct {
                close = Some((j, Outcome::StopLoss));
                break;
            }
            if gain >= config.target_pct {
                close = Some((j, Outcome::Target));
                break;
            }
        }

        let (exit_idx, exit_price, profit_pct, outcome) = match close {
            Some((j, Outcome::Target)) => {
                let level = match side {
                    Side::Long => entry * (1.0 + config.target_pct / 100.0),
                    Side::Short => entry * (1.0 - config.target_pct / 100.0),
                };
                (j, level, config.target_pct, Outcome::Target)
            }
            Some((j, _)) => {
                let level = match side {
                    Side::Long => entry * (1.0 - config.stop_pct / 100.0),
                    Side::Short => entry * (1.0 + config.stop_pct / 100.0),
                };
                (j, level, -config.stop_pct, Outcome::StopLoss)
            }
            None => {
                let exit = closes[last_idx];
                let profit = side.profit_pct(entry, exit);
                let outcome = if profit > 0.0 { Outcome::Win } else { Outcome::Loss };
                (last_idx, exit, profit, outcome)
            }
        };

        trades.push(Trade {
            side,
            entry_date: dates[entry_idx],
            entry_price: entry,
            exit_date: dates[exit_idx],
            exit_price,
            max_pct: 100.0 * (hi - entry) / entry,
            min_pct: 100.0 * (lo - entry) / entry,
            profit_pct,
            outcome,
        });
    }
    Ok(trades)
}

/// How the total strategy profit combines its three terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StpForm {
    /// `(t - s) Target + Σ_free PT - n fee`.
    #[default]
    Sum,
    /// `(t - s)/(t + s) Target + mean_free PT - n fee`.
    Normalized,
}

pub fn compute_stp(trades: &[Trade], config: &StrategyConfig) -> f64 {
    compute_stp_with(trades, config, StpForm::Sum)
}

pub fn compute_stp_with(trades: &[Trade], config: &StrategyConfig, form: StpForm) -> f64 {
    if trades.is_empty() {
        return 0.0;
    }
    let t = trades.iter().filter(|tr| tr.outcome == Outcome::Target).count() as f64;
    let s = trades.iter().filter(|tr| tr.outcome == Outcome::StopLoss).count() as f64;
    let free: Vec<f64> = trades
        .iter()
        .filter(|tr| tr.outcome.is_free())
        .map(|tr| tr.profit_pct)
        .collect();
    let free_sum: f64 = free.iter().sum();
    let fees = trades.len() as f64 * config.fee_pct;
    match form {
        StpForm::Sum => (t - s) * config.target_pct + free_sum - fees,
        StpForm::Normalized => {
            let balance = if t + s > 0.0 {
                (t - s) / (t + s) * config.target_pct
            } else {
                0.0
            };
            let non_achieved = if free.is_empty() {
                0.0
            } else {
                free_sum / free.len() as f64
            };
            balance + non_achieved - fees
        }
    }
}

/// Sum-form STP from aggregate report columns, with the free-trade profit
/// total taken as `mean_pt` times the free-trade count.
pub fn stp_from_aggregates(n: usize, t: usize, s: usize, mean_pt: f64, target_pct: f64, fee_pct: f64) -> f64 {
    let free = n.saturating_sub(t + s) as f64;
    (t as f64 - s as f64) * target_pct + free * mean_pt - n as f64 * fee_pct
}

pub fn summarize(
    label: impl Into<String>,
    code: MetricCode,
    trades: &[Trade],
    config: &StrategyConfig,
) -> BacktestReport {
    let n = trades.len();
    let w = trades.iter().filter(|t| t.outcome.is_winning()).count();
    let l = n - w;
    let t = trades.iter().filter(|tr| tr.outcome == Outcome::Target).count();
    let s = trades.iter().filter(|tr| tr.outcome == Outcome::StopLoss).count();
    let pct = |count: f64| (n > 0).then(|| 100.0 * count / n as f64);
    let mean = |f: fn(&Trade) -> f64| (n > 0).then(|| trades.iter().map(f).sum::<f64>() / n as f64);
    let sb_count = t as i64 - s as i64;
    BacktestReport {
        label: label.into(),
        code,
        n,
        w,
        l,
        wt_ratio_pct: pct(w as f64),
        wt_paper_pct: pct(w as f64 - l as f64),
        mean_profit_pct: mean(|t| t.profit_pct),
        mean_max_pct: mean(|t| t.max_pct),
        mean_min_pct: mean(|t| t.min_pct),
        t,
        s,
        threshold_pct: pct(t as f64),
        stop_pct_share: pct(s as f64),
        sb_count,
        sb_pct: pct(sb_count as f64),
        stp_pct: compute_stp(trades, config),
    }
}

/// Simulates `signals` on `price` and aggregates the result.
pub fn run_backtest(
    label: impl Into<String>,
    code: MetricCode,
    price: &MetricSeries,
    signals: &[Crossing],
    config: &StrategyConfig,
) -> Result<(BacktestReport, Vec<Trade>)> {
    let trades = simulate(price, signals, config)?;
    Ok((summarize(label, code, &trades, config), trades))
}
