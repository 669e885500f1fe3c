//! Tick-data ingestion.
//!
//! Input is CSV with header `date,time_sec,price`: an ISO date, seconds since
//! the 09:30 open and a positive trade price. Rows are grouped by date, kept
//! only inside the 6.5 hour session, non-positive prices are dropped, prices
//! are logged and trades sharing a timestamp collapse to the last one.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{TickSeries, DAY, SECONDS_PER_YEAR};

/// Session length in seconds.
pub const SESSION_SECONDS: f64 = 23_400.0;

/// Share of malformed rows tolerated before ingestion fails.
pub const MAX_MALFORMED_SHARE: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub date: String,
    pub time_sec: f64,
    pub price: f64,
}

fn valid_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter().enumerate().all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
}

/// Groups records into per-day series (sorted by date) after the session,
/// price and duplicate-timestamp rules. Days left with fewer than two ticks
/// are dropped with a warning.
pub fn from_ticks(records: &[TickRecord]) -> Result<Vec<TickSeries>> {
    let mut days: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        if !(0.0..=SESSION_SECONDS).contains(&r.time_sec) || !(r.price > 0.0) {
            continue;
        }
        days.entry(r.date.as_str()).or_default().push((r.time_sec, r.price));
    }
    let mut out = Vec::with_capacity(days.len());
    for (date, mut ticks) in days {
        // stable: equal timestamps keep file order, so the last one wins below
        ticks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut dedup: Vec<(f64, f64)> = Vec::with_capacity(ticks.len());
        for t in ticks {
            match dedup.last_mut() {
                Some(last) if last.0 == t.0 => *last = t,
                _ => dedup.push(t),
            }
        }
        if dedup.len() < 2 {
            warn!("{date}: fewer than two ticks in session, day skipped");
            continue;
        }
        let times = dedup.iter().map(|t| t.0 / SECONDS_PER_YEAR).collect();
        let values = dedup.iter().map(|t| t.1.ln()).collect();
        out.push(TickSeries::new(times, values, 0.0, DAY)?.with_date(date));
    }
    Ok(out)
}

/// Parses tick CSV from a reader. Malformed rows are reported with their
/// line number and skipped while they stay within [`MAX_MALFORMED_SHARE`].
pub fn read_ticks<R: Read>(input: R) -> Result<Vec<TickRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.len() > 0 && headers.iter().collect::<Vec<_>>() != ["date", "time_sec", "price"] {
        return Err(Error::Malformed {
            line: 1,
            msg: format!("expected header date,time_sec,price, found {}", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut records = Vec::new();
    let mut bad = Vec::new();
    let mut total = 0usize;
    for row in rdr.records() {
        total += 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(total + 1, |p| p.line() as usize);
                bad.push((line, e.to_string()));
                continue;
            }
        };
        let line = row.position().map_or(total + 1, |p| p.line() as usize);
        let parsed = (|| {
            if row.len() != 3 {
                return Err(format!("expected 3 fields, found {}", row.len()));
            }
            let date = row[0].to_string();
            if !valid_date(&date) {
                return Err(format!("bad date '{date}'"));
            }
            let time_sec: f64 = row[1].parse().map_err(|_| format!("bad time '{}'", &row[1]))?;
            let price: f64 = row[2].parse().map_err(|_| format!("bad price '{}'", &row[2]))?;
            if !time_sec.is_finite() || !price.is_finite() {
                return Err("non-finite value".to_string());
            }
            Ok(TickRecord { date, time_sec, price })
        })();
        match parsed {
            Ok(r) => records.push(r),
            Err(msg) => bad.push((line, msg)),
        }
    }
    for (line, msg) in &bad {
        warn!("line {line}: {msg}");
    }
    if bad.len() as f64 > MAX_MALFORMED_SHARE * total as f64 {
        return Err(Error::TooManyMalformed { bad: bad.len(), total });
    }
    Ok(records)
}

/// Reads a tick CSV file into per-day series.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Vec<TickSeries>> {
    let f = std::fs::File::open(path)?;
    from_ticks(&read_ticks(f)?)
}

/// Tick records for the in-session part of a series (`[0, T]` mapped to
/// seconds, log-prices exponentiated).
pub fn to_ticks(series: &TickSeries, date: &str) -> Vec<TickRecord> {
    series
        .times
        .iter()
        .zip(&series.values)
        .filter(|(&t, _)| t >= series.start && t <= series.end)
        .map(|(&t, &z)| TickRecord {
            date: date.to_string(),
            time_sec: t * SECONDS_PER_YEAR,
            price: z.exp(),
        })
        .collect()
}

/// Writes records in the ingestion schema with round-trip float formatting.
pub fn write_ticks<W: Write>(records: &[TickRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "time_sec", "price"])?;
    for r in records {
        w.write_record(&[r.date.clone(), r.time_sec.to_string(), r.price.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
