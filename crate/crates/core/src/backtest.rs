//! Signals, positions and equity lines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyMode {
    /// Positions in {-1, 0, +1}.
    #[default]
    LongShort,
    /// Positions in {0, +1}.
    LongOnly,
}

/// Position held over each day; `positions[i]` earns `returns[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalSeries {
    mode: StrategyMode,
    positions: Vec<i8>,
}

impl SignalSeries {
    pub fn new(positions: Vec<i8>, mode: StrategyMode) -> Result<Self> {
        let allowed: &[i8] = match mode {
            StrategyMode::LongShort => &[-1, 0, 1],
            StrategyMode::LongOnly => &[0, 1],
        };
        if let Some(p) = positions.iter().find(|p| !allowed.contains(p)) {
            return Err(Error::Usage(format!("position {p} not allowed in {mode:?} mode")));
        }
        Ok(Self { mode, positions })
    }

    pub fn mode(&self) -> StrategyMode {
        self.mode
    }

    pub fn positions(&self) -> &[i8] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Sign of each forecast; long-only maps non-positive forecasts to cash.
pub fn signals_from_predictions(preds: &[f64], mode: StrategyMode) -> SignalSeries {
    let positions = preds
        .iter()
        .map(|&p| match mode {
            StrategyMode::LongShort if p > 0.0 => 1,
            StrategyMode::LongShort if p < 0.0 => -1,
            StrategyMode::LongOnly if p > 0.0 => 1,
            _ => 0,
        })
        .collect();
    SignalSeries { mode, positions }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TradeEvent {
    /// Index of the first day held at `to`; equals the series length for a final exit.
    pub day: usize,
    pub from: i8,
    pub to: i8,
}

/// Equity starting at 1.0, one more point than there are days.
#[derive(Debug, Clone, PartialEq)]
pub struct EquityLine {
    equity: Vec<f64>,
    positions: Vec<i8>,
    strategy_returns: Vec<f64>,
    trades: Vec<TradeEvent>,
}

impl EquityLine {
    pub fn equity(&self) -> &[f64] {
        &self.equity
    }

    pub fn positions(&self) -> &[i8] {
        &self.positions
    }

    pub fn strategy_returns(&self) -> &[f64] {
        &self.strategy_returns
    }

    pub fn trades(&self) -> &[TradeEvent] {
        &self.trades
    }

    pub fn n_trades(&self) -> usize {
        self.trades.len()
    }

    pub fn final_equity(&self) -> f64 {
        *self.equity.last().expect("equity starts at 1.0")
    }

    /// Recompounds already-computed daily strategy returns, e.g. read back from an export.
    pub fn from_strategy_returns(signals: &SignalSeries, strategy_returns: Vec<f64>) -> Result<Self> {
        if signals.len() != strategy_returns.len() {
            return Err(Error::Usage(format!(
                "{} positions for {} strategy returns",
                signals.len(),
                strategy_returns.len()
            )));
        }
        let mut equity = Vec::with_capacity(strategy_returns.len() + 1);
        equity.push(1.0);
        for (day, sr) in strategy_returns.iter().enumerate() {
            let next = equity[day] * (1.0 + sr);
            if !(next > 0.0 && next.is_finite()) {
                return Err(Error::Numeric(format!("equity reached {next} on day {day}")));
            }
            equity.push(next);
        }
        Ok(Self {
            equity,
            positions: signals.positions.clone(),
            strategy_returns,
            trades: position_changes(&signals.positions),
        })
    }

    /// Adds the exit of an open position after the last day, free of cost.
    pub fn close_out(mut self) -> Self {
        let last = self.positions.last().copied().unwrap_or(0);
        if last != 0 {
            self.trades.push(TradeEvent {
                day: self.positions.len(),
                from: last,
                to: 0,
            });
        }
        self
    }
}

/// `P[i+1] = P[i]·(1 + pos[i]·r[i] − cost[i])` with
/// `cost[i] = cost_bps·1e-4·|pos[i] − pos[i−1]|` and a flat start.
pub fn run_backtest(signals: &SignalSeries, returns: &[f64], cost_bps: f64) -> Result<EquityLine> {
    if signals.len() != returns.len() {
        return Err(Error::Usage(format!(
            "{} signals for {} returns",
            signals.len(),
            returns.len()
        )));
    }
    if !(cost_bps.is_finite() && cost_bps >= 0.0) {
        return Err(Error::Usage(format!(
            "cost_bps must be finite and non-negative, got {cost_bps}"
        )));
    }
    let n = returns.len();
    let mut equity = Vec::with_capacity(n + 1);
    let mut strategy_returns = Vec::with_capacity(n);
    equity.push(1.0);
    let mut prev = 0i8;
    for (day, (&pos, &r)) in signals.positions.iter().zip(returns).enumerate() {
        let cost = cost_bps * 1e-4 * f64::from((pos - prev).abs());
        let sr = f64::from(pos) * r - cost;
        let next = equity[day] * (1.0 + sr);
        if !(next > 0.0 && next.is_finite()) {
            return Err(Error::Numeric(format!("equity reached {next} on day {day}")));
        }
        strategy_returns.push(sr);
        equity.push(next);
        prev = pos;
    }
    Ok(EquityLine {
        equity,
        positions: signals.positions.clone(),
        strategy_returns,
        trades: position_changes(&signals.positions),
    })
}

fn position_changes(positions: &[i8]) -> Vec<TradeEvent> {
    let mut prev = 0;
    let mut trades = Vec::new();
    for (day, &pos) in positions.iter().enumerate() {
        if pos != prev {
            trades.push(TradeEvent {
                day,
                from: prev,
                to: pos,
            });
        }
        prev = pos;
    }
    trades
}

/// Constant long position entered on the first day and closed after the last.
pub fn buy_and_hold(returns: &[f64]) -> Result<EquityLine> {
    let signals = SignalSeries::new(vec![1; returns.len()], StrategyMode::LongOnly)?;
    Ok(run_backtest(&signals, returns, 0.0)?.close_out())
}
