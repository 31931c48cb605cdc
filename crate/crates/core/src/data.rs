//! Daily price ingestion and simple returns.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetClass {
    Equity,
    Crypto,
}

impl AssetClass {
    /// Observations per year: 252 trading days for equities, 365 calendar days for crypto.
    pub fn periods_per_year(self) -> usize {
        match self {
            AssetClass::Equity => 252,
            AssetClass::Crypto => 365,
        }
    }
}

/// Column names and labels applied while reading a price file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub symbol: String,
    pub asset_class: AssetClass,
    pub date_column: String,
    pub close_column: String,
}

impl CsvSchema {
    pub fn new(symbol: impl Into<String>, asset_class: AssetClass) -> Self {
        Self {
            symbol: symbol.into(),
            asset_class,
            date_column: "date".into(),
            close_column: "close".into(),
        }
    }
}

/// Closing prices with strictly increasing dates.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    symbol: String,
    asset_class: AssetClass,
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
}

impl PriceSeries {
    pub fn new(
        symbol: impl Into<String>,
        asset_class: AssetClass,
        dates: Vec<NaiveDate>,
        closes: Vec<f64>,
    ) -> Result<Self> {
        if dates.len() != closes.len() {
            return Err(Error::Usage("dates and closes differ in length".into()));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::data(
                None,
                format!("dates not strictly increasing at {}", w[1]),
            ));
        }
        if let Some((d, c)) = dates
            .iter()
            .zip(&closes)
            .find(|(_, c)| !(**c > 0.0 && c.is_finite()))
        {
            return Err(Error::data(None, format!("non-positive close {c} on {d}")));
        }
        Ok(Self {
            symbol: symbol.into(),
            asset_class,
            dates,
            closes,
        })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn asset_class(&self) -> AssetClass {
        self.asset_class
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }
}

/// `r_t = P_t / P_{t-1} - 1`, stamped with the later date.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    symbol: String,
    asset_class: AssetClass,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl ReturnSeries {
    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn asset_class(&self) -> AssetClass {
        self.asset_class
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

    /// Builds an undated series from raw values (day index `i` dated `base + i` days); used for synthetic data.
    pub fn synthetic(symbol: impl Into<String>, asset_class: AssetClass, values: Vec<f64>) -> Result<Self> {
        if let Some(r) = values.iter().find(|r| !(**r > -1.0 && r.is_finite())) {
            return Err(Error::data(None, format!("return {r} is not above -1")));
        }
        let base = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
        let dates = (0..values.len())
            .map(|i| base + chrono::Days::new(i as u64))
            .collect();
        Ok(Self {
            symbol: symbol.into(),
            asset_class,
            dates,
            values,
        })
    }
}

pub fn to_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::Usage(format!(
            "{} needs at least 2 prices for returns, has {}",
            prices.symbol,
            prices.len()
        )));
    }
    let values = prices.closes.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    Ok(ReturnSeries {
        symbol: prices.symbol.clone(),
        asset_class: prices.asset_class,
        dates: prices.dates[1..].to_vec(),
        values,
    })
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<PriceSeries> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::data(None, format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, schema)
}

/// Parses a headed CSV with ISO-8601 dates. Extra columns are ignored; rows
/// may appear in any order.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::data(Some(1), format!("unreadable header: {e}")))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(Some(1), format!("missing column '{name}'")))
    };
    let date_idx = column(&schema.date_column)?;
    let close_idx = column(&schema.close_column)?;

    let mut rows: Vec<(NaiveDate, f64, u64)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line());
            Error::data(line, format!("malformed row: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |idx: usize, name: &str| {
            record
                .get(idx)
                .ok_or_else(|| Error::data(Some(line), format!("row has no '{name}' field")))
        };
        let raw_date = field(date_idx, &schema.date_column)?;
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|_| Error::data(Some(line), format!("unparsable date '{raw_date}'")))?;
        let raw_close = field(close_idx, &schema.close_column)?;
        let close: f64 = raw_close
            .parse()
            .map_err(|_| Error::data(Some(line), format!("unparsable close '{raw_close}'")))?;
        if !(close > 0.0 && close.is_finite()) {
            return Err(Error::data(
                Some(line),
                format!("non-positive close {raw_close} on {date}"),
            ));
        }
        rows.push((date, close, line));
    }

    rows.sort_by_key(|&(d, _, _)| d);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::data(
            Some(w[0].2.max(w[1].2)),
            format!(
                "duplicate date {} (lines {} and {})",
                w[0].0,
                w[0].2.min(w[1].2),
                w[0].2.max(w[1].2)
            ),
        ));
    }
    let (dates, closes) = rows.into_iter().map(|(d, c, _)| (d, c)).unzip();
    PriceSeries::new(schema.symbol.clone(), schema.asset_class, dates, closes)
}
