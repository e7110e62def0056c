//! Quarterly time series: CSV ingestion, growth-rate construction and
//! lead/lag correlation tables.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calendar quarter, stored as `4 * year + (quarter - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Period(i32);

impl Period {
    pub fn new(year: i32, quarter: u8) -> Result<Self> {
        if !(1..=4).contains(&quarter) {
            return Err(Error::PeriodLabel(format!("{year}Q{quarter}")));
        }
        Ok(Period(4 * year + i32::from(quarter) - 1))
    }

    pub fn year(self) -> i32 {
        self.0.div_euclid(4)
    }

    pub fn quarter(self) -> u8 {
        (self.0.rem_euclid(4) + 1) as u8
    }

    /// Shift by a number of quarters.
    pub fn offset(self, quarters: i64) -> Period {
        Period(self.0 + quarters as i32)
    }

    /// Number of quarters from `self` to `other`.
    pub fn quarters_until(self, other: Period) -> i64 {
        i64::from(other.0) - i64::from(self.0)
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year(), self.quarter())
    }
}

impl FromStr for Period {
    type Err = Error;

    /// Accepts `1978Q1`, `1978-Q1`, `1978 q1` and ISO dates (`1978-01-01`,
    /// `1978-03-31`, `1978-02`), the latter mapped to the containing quarter.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::PeriodLabel(s.to_string());
        let t = s.trim();
        if let Some(pos) = t.find(['Q', 'q']) {
            let year: i32 = t[..pos].trim_end_matches(['-', ' ', '.']).parse().map_err(|_| bad())?;
            let q: u8 = t[pos + 1..].trim().parse().map_err(|_| bad())?;
            return Period::new(year, q).map_err(|_| bad());
        }
        let mut parts = t.split('-');
        let year: i32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let month: u8 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if let Some(day) = parts.next() {
            let day: u8 = day.parse().map_err(|_| bad())?;
            if !(1..=31).contains(&day) {
                return Err(bad());
            }
        }
        if parts.next().is_some() || !(1..=12).contains(&month) {
            return Err(bad());
        }
        Period::new(year, (month - 1) / 3 + 1)
    }
}

impl Serialize for Period {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A contiguous quarterly series with finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    periods: Vec<Period>,
    values: Vec<f64>,
    label: String,
}

impl TimeSeries {
    /// Build a series, checking that periods are consecutive quarters and
    /// values are finite.
    pub fn new(periods: Vec<Period>, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if periods.len() != values.len() {
            return Err(Error::Series(format!("{} periods but {} values", periods.len(), values.len())));
        }
        for (i, w) in periods.windows(2).enumerate() {
            match w[0].quarters_until(w[1]) {
                1 => {}
                0 => return Err(Error::Series(format!("duplicated period {} at index {}", w[1], i + 1))),
                d if d < 0 => {
                    return Err(Error::Series(format!("period {} precedes {} at index {}", w[1], w[0], i + 1)))
                }
                _ => return Err(Error::Series(format!("gap between {} and {}", w[0], w[1]))),
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Series(format!("non-finite value at index {i}")));
        }
        Ok(TimeSeries { periods, values, label: label.into() })
    }

    /// Consecutive quarters starting at `start`.
    pub fn from_start(start: Period, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let periods = (0..values.len()).map(|i| start.offset(i as i64)).collect();
        TimeSeries::new(periods, values, label)
    }

    pub fn periods(&self) -> &[Period] {
        &self.periods
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start(&self) -> Option<Period> {
        self.periods.first().copied()
    }

    /// Value at a given period, if covered.
    pub fn at(&self, p: Period) -> Option<f64> {
        let start = self.start()?;
        let idx = start.quarters_until(p);
        if idx < 0 {
            return None;
        }
        self.values.get(idx as usize).copied()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Elementwise map keeping the period index.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        TimeSeries::new(self.periods.clone(), self.values.iter().map(|&v| f(v)).collect(), self.label.clone())
    }

    /// Write `(t, value)` rows to CSV.
    pub fn write_csv<W: Write>(&self, w: W, value_header: &str) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Series(e.to_string());
        out.write_record(["t", value_header]).map_err(io)?;
        for (p, v) in self.periods.iter().zip(&self.values) {
            out.write_record([p.to_string(), fmt_f64(*v)]).map_err(io)?;
        }
        out.flush().map_err(|e| Error::Series(e.to_string()))?;
        Ok(())
    }
}

/// Shortest representation that round-trips; used by every CSV writer so
/// reruns are byte-identical.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Load one value column of a CSV file. The period labels are read from the
/// first column.
pub fn load_csv(path: impl AsRef<Path>, value_column: &str) -> Result<TimeSeries> {
    let mut cols = load_csv_columns(path, None, &[value_column])?;
    Ok(cols.remove(0))
}

/// Load several value columns sharing one period column (the first column when
/// `period_column` is `None`). Every requested cell must parse as a finite
/// number; blank cells are rejected with the offending row.
pub fn load_csv_columns(
    path: impl AsRef<Path>,
    period_column: Option<&str>,
    value_columns: &[&str],
) -> Result<Vec<TimeSeries>> {
    load_columns(path.as_ref(), period_column, value_columns, false)
}

/// Like [`load_csv`], but rows at the start of the file whose cell is blank
/// are skipped (e.g. the first `eta` of a shock file). Blank cells after the
/// first value are still errors.
pub fn load_csv_skip_leading_blanks(path: impl AsRef<Path>, value_column: &str) -> Result<TimeSeries> {
    let mut cols = load_columns(path.as_ref(), None, &[value_column], true)?;
    Ok(cols.remove(0))
}

fn load_columns(
    path: &Path,
    period_column: Option<&str>,
    value_columns: &[&str],
    skip_leading_blanks: bool,
) -> Result<Vec<TimeSeries>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let csv_err = |row: usize, message: String| Error::Csv { path: path.to_path_buf(), row, message };

    let headers = rdr.headers().map_err(|e| csv_err(1, e.to_string()))?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| csv_err(1, format!("no column named '{name}'")))
    };
    let period_idx = match period_column {
        Some(name) => find(name)?,
        None => 0,
    };
    let value_idx = value_columns.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let mut periods: Vec<Period> = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); value_idx.len()];
    for (i, rec) in rdr.records().enumerate() {
        // header occupies line 1
        let fallback_row = i + 2;
        let rec = rec.map_err(|e| csv_err(fallback_row, e.to_string()))?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(fallback_row);
        let label = rec.get(period_idx).unwrap_or("");
        let period: Period = label.parse().map_err(|_| csv_err(row, format!("cannot parse period '{label}'")))?;
        if skip_leading_blanks && periods.is_empty() && value_idx.iter().all(|&i| rec.get(i).unwrap_or("").is_empty()) {
            continue;
        }
        if let Some(prev) = periods.last() {
            match prev.quarters_until(period) {
                1 => {}
                0 => return Err(csv_err(row, format!("duplicated period {period}"))),
                d if d < 0 => return Err(csv_err(row, format!("period {period} is not after {prev}"))),
                _ => return Err(csv_err(row, format!("gap between {prev} and {period}"))),
            }
        }
        periods.push(period);
        for (k, &idx) in value_idx.iter().enumerate() {
            let cell = rec.get(idx).unwrap_or("");
            if cell.is_empty() {
                return Err(csv_err(row, format!("missing value in column '{}'", value_columns[k])));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| csv_err(row, format!("cannot parse '{cell}' in column '{}'", value_columns[k])))?;
            if !v.is_finite() {
                return Err(csv_err(row, format!("non-finite value in column '{}'", value_columns[k])));
            }
            values[k].push(v);
        }
    }
    value_columns.iter().zip(values).map(|(name, vals)| TimeSeries::new(periods.clone(), vals, *name)).collect()
}

/// `100 * (log v_t - log v_{t-1})`, without demeaning.
pub fn growth_rate(ts: &TimeSeries) -> Result<TimeSeries> {
    if ts.len() < 2 {
        return Err(Error::Series("growth rate needs at least two observations".into()));
    }
    if let Some(i) = ts.values.iter().position(|&v| v <= 0.0) {
        return Err(Error::Series(format!("non-positive level {} at {}", ts.values[i], ts.periods[i])));
    }
    let g = ts.values.windows(2).map(|w| 100.0 * (w[1].ln() - w[0].ln())).collect();
    TimeSeries::new(ts.periods[1..].to_vec(), g, format!("{} growth", ts.label))
}

/// Subtract the sample mean; returns the demeaned series and the mean removed.
pub fn demean(ts: &TimeSeries) -> Result<(TimeSeries, f64)> {
    if ts.is_empty() {
        return Err(Error::Series("cannot demean an empty series".into()));
    }
    let mean = mean(&ts.values);
    let mut out: Vec<f64> = ts.values.iter().map(|v| v - mean).collect();
    // second pass removes the rounding residue of the first
    let resid = self::mean(&out);
    out.iter_mut().for_each(|v| *v -= resid);
    Ok((TimeSeries::new(ts.periods.clone(), out, ts.label.clone())?, mean))
}

/// Percent log growth rate minus its sample mean.
pub fn growth_rate_demeaned(ts: &TimeSeries) -> Result<TimeSeries> {
    let g = growth_rate(ts)?;
    let (d, _) = demean(&g)?;
    Ok(d.with_label(format!("{} growth (demeaned)", ts.label)))
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Minimum overlap for a lead/lag correlation.
pub const MIN_OVERLAP: usize = 8;

/// One row of a lead/lag table: `corr(a_t, b_{t+k})` over `n` common periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadLag {
    pub k: i64,
    pub corr: f64,
    pub n: usize,
}

/// Pearson correlation of `a_t` with `b_{t+k}` over the maximal common
/// overlap, for every `k` in `k_min..=k_max`.
pub fn lead_lag_correlation(a: &TimeSeries, b: &TimeSeries, k_min: i64, k_max: i64) -> Result<Vec<LeadLag>> {
    if k_min > k_max {
        return Err(Error::InvalidArgument(format!("k_min {k_min} > k_max {k_max}")));
    }
    (k_min..=k_max)
        .map(|k| {
            let (xa, xb): (Vec<f64>, Vec<f64>) =
                a.periods.iter().zip(&a.values).filter_map(|(p, &va)| b.at(p.offset(k)).map(|vb| (va, vb))).unzip();
            if xa.len() < MIN_OVERLAP {
                return Err(Error::InsufficientData(format!(
                    "overlap of {} periods at k = {k} (need {MIN_OVERLAP})",
                    xa.len()
                )));
            }
            let corr = pearson(&xa, &xb).ok_or_else(|| Error::Series(format!("zero-variance window at k = {k}")))?;
            Ok(LeadLag { k, corr, n: xa.len() })
        })
        .collect()
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Write a lead/lag table as CSV with columns `(k, corr)`.
pub fn write_lead_lag_csv<W: Write>(rows: &[LeadLag], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Series(e.to_string());
    out.write_record(["k", "corr"]).map_err(io)?;
    for r in rows {
        out.write_record([r.k.to_string(), fmt_f64(r.corr)]).map_err(io)?;
    }
    out.flush().map_err(|e| Error::Series(e.to_string()))?;
    Ok(())
}
