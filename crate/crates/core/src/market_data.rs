//! Intraday price ingestion: calendar filtering, daily open-close returns,
//! realized variances and date alignment of two assets.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Realized variances below this are replaced by it before taking logs.
pub const RV_FLOOR: f64 = 1e-12;

/// Minimum aligned sample length for estimation.
pub const MIN_ESTIMATION_LEN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntradayBar {
    pub timestamp: NaiveDateTime,
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyObservation {
    pub date: NaiveDate,
    /// Open-close log return.
    pub ret: f64,
    /// Realized variance (sum of squared intraday log returns), floored at [`RV_FLOOR`].
    pub rv: f64,
}

/// Date-aligned daily observations of two assets.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub dates: Vec<NaiveDate>,
    pub asset1: Vec<DailyObservation>,
    pub asset2: Vec<DailyObservation>,
}

pub(crate) fn is_low_activity_day(d: NaiveDate) -> bool {
    matches!(d.weekday(), Weekday::Sat | Weekday::Sun)
        || matches!((d.month(), d.day()), (12, 24..=26) | (12, 31) | (1, 1..=2))
}

/// Drop bars on weekends, listed holidays, December 24–26 and December 31–January 2.
pub fn filter_calendar(
    bars: &[IntradayBar],
    holidays: &BTreeSet<NaiveDate>,
) -> Result<Vec<IntradayBar>> {
    let kept: Vec<IntradayBar> = bars
        .iter()
        .filter(|b| {
            let d = b.timestamp.date();
            !is_low_activity_day(d) && !holidays.contains(&d)
        })
        .copied()
        .collect();
    if kept.is_empty() {
        return Err(Error::Input("no bars left after calendar filtering".into()));
    }
    Ok(kept)
}

fn check_day(bars: &[IntradayBar]) -> Result<()> {
    if bars.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            have: bars.len(),
        });
    }
    Ok(())
}

/// Open-close return: the sum of intraday log returns, i.e. `ln(p_last / p_first)`.
pub fn daily_return(bars: &[IntradayBar]) -> Result<f64> {
    check_day(bars)?;
    Ok(bars
        .windows(2)
        .map(|w| (w[1].price / w[0].price).ln())
        .sum())
}

/// Sum of squared intraday log returns (unfloored).
pub fn realized_variance(bars: &[IntradayBar]) -> Result<f64> {
    check_day(bars)?;
    Ok(bars
        .windows(2)
        .map(|w| {
            let r = w[1].price.ln() - w[0].price.ln();
            r * r
        })
        .sum())
}

/// Annualized volatility in percent, `100 sqrt(250 rv)`.
pub fn annualized_vol(rv: f64) -> f64 {
    100.0 * (250.0 * rv).sqrt()
}

/// Collapse intraday bars into daily observations.
///
/// Bars are sorted by timestamp; for duplicate timestamps the last price in
/// input order wins. Days with fewer than two bars are dropped with a warning.
pub fn daily_observations(bars: &[IntradayBar]) -> Result<Vec<DailyObservation>> {
    if let Some(b) = bars.iter().find(|b| !(b.price > 0.0) || !b.price.is_finite()) {
        return Err(Error::Input(format!(
            "non-positive price {} at {}",
            b.price, b.timestamp
        )));
    }
    let mut by_time: BTreeMap<NaiveDateTime, f64> = BTreeMap::new();
    for b in bars {
        by_time.insert(b.timestamp, b.price);
    }
    let mut days: BTreeMap<NaiveDate, Vec<IntradayBar>> = BTreeMap::new();
    for (&timestamp, &price) in &by_time {
        days.entry(timestamp.date())
            .or_default()
            .push(IntradayBar { timestamp, price });
    }
    let mut out = Vec::with_capacity(days.len());
    for (date, day) in days {
        if day.len() < 2 {
            log::warn!("dropping {date}: fewer than two bars");
            continue;
        }
        let ret = daily_return(&day)?;
        let rv = realized_variance(&day)?.max(RV_FLOOR);
        out.push(DailyObservation { date, ret, rv });
    }
    Ok(out)
}

/// Inner join on dates; fails when fewer than [`MIN_ESTIMATION_LEN`] dates remain.
pub fn align_panel(a: &[DailyObservation], b: &[DailyObservation]) -> Result<ReturnPanel> {
    align_panel_min(a, b, MIN_ESTIMATION_LEN)
}

/// Inner join on dates requiring at least `min_len` common dates (and at least one).
pub fn align_panel_min(
    a: &[DailyObservation],
    b: &[DailyObservation],
    min_len: usize,
) -> Result<ReturnPanel> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("cannot align an empty series".into()));
    }
    let lookup: BTreeMap<NaiveDate, DailyObservation> = b.iter().map(|o| (o.date, *o)).collect();
    let mut first: BTreeMap<NaiveDate, DailyObservation> = BTreeMap::new();
    for o in a {
        first.insert(o.date, *o);
    }
    let mut panel = ReturnPanel {
        dates: Vec::new(),
        asset1: Vec::new(),
        asset2: Vec::new(),
    };
    for (date, oa) in first {
        if let Some(ob) = lookup.get(&date) {
            panel.dates.push(date);
            panel.asset1.push(oa);
            panel.asset2.push(*ob);
        }
    }
    let needed = min_len.max(1);
    if panel.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            have: panel.len(),
        });
    }
    Ok(panel)
}

impl ReturnPanel {
    /// Build from columns; dates must be strictly increasing.
    pub fn from_columns(
        dates: Vec<NaiveDate>,
        ret1: &[f64],
        rv1: &[f64],
        ret2: &[f64],
        rv2: &[f64],
    ) -> Result<Self> {
        let n = dates.len();
        if [ret1.len(), rv1.len(), ret2.len(), rv2.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::Input("panel columns differ in length".into()));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input("panel dates must be strictly increasing".into()));
        }
        let obs = |ret: &[f64], rv: &[f64]| -> Result<Vec<DailyObservation>> {
            dates
                .iter()
                .zip(ret.iter().zip(rv))
                .map(|(&date, (&ret, &rv))| {
                    if !ret.is_finite() || !rv.is_finite() || rv < 0.0 {
                        return Err(Error::Input(format!("invalid observation on {date}")));
                    }
                    Ok(DailyObservation {
                        date,
                        ret,
                        rv: rv.max(RV_FLOOR),
                    })
                })
                .collect()
        };
        let asset1 = obs(ret1, rv1)?;
        let asset2 = obs(ret2, rv2)?;
        Ok(Self {
            dates,
            asset1,
            asset2,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn asset(&self, i: usize) -> &[DailyObservation] {
        match i {
            0 => &self.asset1,
            1 => &self.asset2,
            _ => panic!("panel holds two assets, index {i}"),
        }
    }

    /// Rows `range` as a new panel.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            dates: self.dates[range.clone()].to_vec(),
            asset1: self.asset1[range.clone()].to_vec(),
            asset2: self.asset2[range].to_vec(),
        }
    }

    /// Rows in the given order (used by resampling schemes).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            dates: rows.iter().map(|&i| self.dates[i]).collect(),
            asset1: rows.iter().map(|&i| self.asset1[i]).collect(),
            asset2: rows.iter().map(|&i| self.asset2[i]).collect(),
        }
    }

    /// Number of rows dated on or before `date`.
    pub fn split_index(&self, date: NaiveDate) -> usize {
        self.dates.partition_point(|&d| d <= date)
    }

    pub fn check_estimable(&self) -> Result<()> {
        if self.len() < MIN_ESTIMATION_LEN {
            return Err(Error::InsufficientData {
                needed: MIN_ESTIMATION_LEN,
                have: self.len(),
            });
        }
        Ok(())
    }
}

/// Parse an ISO-8601 timestamp (`T` or space separator, optional fraction).
pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .ok_or_else(|| Error::Input(format!("unparseable timestamp '{s}'")))
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|_| Error::Input(format!("unparseable date '{}'", s.trim())))
}

/// Read `timestamp,price` bars.
pub fn read_bars<R: Read>(reader: R) -> Result<Vec<IntradayBar>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "timestamp" || &headers[1] != "price" {
        return Err(Error::Input("bar file header must be 'timestamp,price'".into()));
    }
    let mut bars = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let timestamp = parse_timestamp(&rec[0])?;
        let price: f64 = rec[1]
            .parse()
            .map_err(|_| Error::Input(format!("bad price '{}'", &rec[1])))?;
        bars.push(IntradayBar { timestamp, price });
    }
    Ok(bars)
}

pub fn read_bars_file(path: &Path) -> Result<Vec<IntradayBar>> {
    read_bars(std::fs::File::open(path)?)
}

/// One ISO date per line; blank lines and `#` comments are skipped.
pub fn read_holidays<R: BufRead>(reader: R) -> Result<BTreeSet<NaiveDate>> {
    let mut out = BTreeSet::new();
    for line in reader.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.insert(parse_date(t)?);
    }
    Ok(out)
}

pub fn read_holidays_file(path: &Path) -> Result<BTreeSet<NaiveDate>> {
    read_holidays(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Write `date,ret1,rv1,ret2,rv2`.
pub fn write_panel<W: Write>(panel: &ReturnPanel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "ret1", "rv1", "ret2", "rv2"])?;
    for ((d, a), b) in panel.dates.iter().zip(&panel.asset1).zip(&panel.asset2) {
        w.write_record([
            d.to_string(),
            a.ret.to_string(),
            a.rv.to_string(),
            b.ret.to_string(),
            b.rv.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_panel<R: Read>(reader: R) -> Result<ReturnPanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["date", "ret1", "rv1", "ret2", "rv2"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Input("panel header must be 'date,ret1,rv1,ret2,rv2'".into()));
    }
    let mut dates = Vec::new();
    let mut cols: [Vec<f64>; 4] = Default::default();
    for rec in rdr.records() {
        let rec = rec?;
        dates.push(parse_date(&rec[0])?);
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(
                rec[j + 1]
                    .parse()
                    .map_err(|_| Error::Input(format!("bad number '{}'", &rec[j + 1])))?,
            );
        }
    }
    ReturnPanel::from_columns(dates, &cols[0], &cols[1], &cols[2], &cols[3])
}
