//! Risk-adjusted performance statistics of an equity line.
//!
//! Functions work in fractions and years. [`MetricsReport::row`] converts
//! aRC, aSD and MD to percent for display.

use serde::Serialize;

use crate::backtest::EquityLine;
use crate::error::{Error, Result};

/// Annualized compounded return `Π(1+r)^(scale/n) − 1`.
pub fn annualized_return(returns: &[f64], scale: f64) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::Usage("aRC needs at least one return".into()));
    }
    if let Some(r) = returns.iter().find(|r| !(**r > -1.0 && r.is_finite())) {
        return Err(Error::Numeric(format!("return {r} is outside (-1, inf)")));
    }
    let log_growth: f64 = returns.iter().map(|r| r.ln_1p()).sum();
    Ok((scale / returns.len() as f64 * log_growth).exp_m1())
}

/// Sample standard deviation scaled by `sqrt(scale)`.
pub fn annualized_std(returns: &[f64], scale: f64) -> Result<f64> {
    let n = returns.len();
    if n < 2 {
        return Err(Error::Usage(format!("aSD needs at least 2 returns, got {n}")));
    }
    // shifted by the first value so constant series give exactly zero
    let shift = returns[0];
    let mean = returns.iter().map(|r| r - shift).sum::<f64>() / n as f64;
    let ss: f64 = returns.iter().map(|r| (r - shift - mean).powi(2)).sum();
    Ok((scale * ss / (n - 1) as f64).sqrt())
}

/// Largest fall from a running peak, as a fraction of that peak.
pub fn max_drawdown(equity: &[f64]) -> Result<f64> {
    let first = *equity
        .first()
        .ok_or_else(|| Error::Usage("max drawdown of an empty equity line".into()))?;
    let mut peak = first;
    let mut worst = 0.0f64;
    for &p in equity {
        peak = peak.max(p);
        worst = worst.max((peak - p) / peak);
    }
    Ok(worst)
}

/// Longest stretch, in years, from a running maximum until it is strictly
/// exceeded. A new high on the very next day is not a loss period. A
/// drawdown still open at the end counts up to the final observation.
pub fn max_loss_duration(equity: &[f64], scale: f64) -> Result<f64> {
    let first = *equity
        .first()
        .ok_or_else(|| Error::Usage("max loss duration of an empty equity line".into()))?;
    let (mut peak, mut peak_idx, mut longest) = (first, 0usize, 0usize);
    for (i, &p) in equity.iter().enumerate().skip(1) {
        if p > peak {
            let span = i - peak_idx;
            if span > 1 {
                longest = longest.max(span);
            }
            peak = p;
            peak_idx = i;
        }
    }
    longest = longest.max(equity.len() - 1 - peak_idx);
    Ok(longest as f64 / scale)
}

/// `None` marks a ratio whose denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InformationRatios {
    pub ir1: Option<f64>,
    pub ir2: Option<f64>,
    pub ir3: Option<f64>,
}

/// `IR* = aRC/aSD`, `IR** = aRC²·sign(aRC)/(aSD·MD)`, `IR*** = aRC³/(aSD·MD·MLD)`.
pub fn information_ratios(arc: f64, asd: f64, md: f64, mld: f64) -> InformationRatios {
    let ratio = |num: f64, den: f64| (den != 0.0 && den.is_finite()).then(|| num / den);
    InformationRatios {
        ir1: ratio(arc, asd),
        ir2: ratio(arc * arc.abs(), asd * md),
        ir3: ratio(arc.powi(3), asd * md * mld),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub arc: f64,
    pub asd: f64,
    pub md: f64,
    /// Years.
    pub mld: f64,
    pub ir: InformationRatios,
    pub n_obs: usize,
    pub n_trades: usize,
    pub scale: f64,
}

pub const REPORT_COLUMNS: [&str; 10] = [
    "Model", "aRC", "aSD", "MD", "MLD", "IR*", "IR**", "IR***", "nObs", "nTrades",
];

/// Placeholder printed for undefined ratios.
pub const UNDEFINED: &str = "NA";

impl MetricsReport {
    pub fn from_equity(line: &EquityLine, scale: f64) -> Result<Self> {
        let returns = line.strategy_returns();
        let arc = annualized_return(returns, scale)?;
        let asd = annualized_std(returns, scale)?;
        let md = max_drawdown(line.equity())?;
        let mld = max_loss_duration(line.equity(), scale)?;
        Ok(Self {
            arc,
            asd,
            md,
            mld,
            ir: information_ratios(arc, asd, md, mld),
            n_obs: returns.len(),
            n_trades: line.n_trades(),
            scale,
        })
    }

    /// Display cells after the model label: percentages to 2 decimals, MLD and
    /// IR* to 2, IR** and IR*** to 3.
    pub fn row(&self) -> [String; 9] {
        let ir = |v: Option<f64>, digits: usize| v.map_or(UNDEFINED.to_owned(), |x| format!("{x:.digits$}"));
        [
            format!("{:.2}", self.arc * 100.0),
            format!("{:.2}", self.asd * 100.0),
            format!("{:.2}", self.md * 100.0),
            format!("{:.2}", self.mld),
            ir(self.ir.ir1, 2),
            ir(self.ir.ir2, 3),
            ir(self.ir.ir3, 3),
            self.n_obs.to_string(),
            self.n_trades.to_string(),
        ]
    }
}

/// Fixed-width text table with a header line.
pub fn format_table(rows: &[(String, MetricsReport)]) -> String {
    let cells: Vec<Vec<String>> = std::iter::once(REPORT_COLUMNS.iter().map(|s| s.to_string()).collect())
        .chain(
            rows.iter()
                .map(|(label, r)| std::iter::once(label.clone()).chain(r.row()).collect()),
        )
        .collect();
    let widths: Vec<usize> = (0..REPORT_COLUMNS.len())
        .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, w))| {
                if c == 0 {
                    format!("{cell:<w$}")
                } else {
                    format!("{cell:>w$}")
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
