//! Observed log-price series and block partitions.
//!
//! A [`TickSeries`] stores every observation it has, including any recorded
//! before `start` or after `end`. Estimators treat `[start, end]` as the
//! sample and the rest as edge data (burn-in from a simulator, or nothing for
//! real data).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trading seconds in a year (252 sessions of 6.5 hours).
pub const SECONDS_PER_YEAR: f64 = 252.0 * 23_400.0;

/// One trading day in years.
pub const DAY: f64 = 1.0 / 252.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickSeries {
    /// Observation times in years, strictly increasing.
    pub times: Vec<f64>,
    /// Observed log-prices.
    pub values: Vec<f64>,
    pub start: f64,
    pub end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
}

/// Inclusive range of observation indices `lo..=hi`; the block's returns are
/// `Z[j] - Z[j-1]` for `j` in `lo+1..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub lo: usize,
    pub hi: usize,
}

impl Window {
    pub fn n_returns(&self) -> usize {
        self.hi - self.lo
    }
}

impl TickSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, start: f64, end: f64) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Config(format!(
                "times ({}) and values ({}) differ in length",
                times.len(),
                values.len()
            )));
        }
        if !(start < end) {
            return Err(Error::Config(format!("empty horizon [{start}, {end}]")));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!("times not strictly increasing at index {}", i + 1)));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite log-price".into()));
        }
        Ok(TickSeries {
            times,
            values,
            start,
            end,
            date: None,
        })
    }

    pub fn with_date(mut self, date: impl Into<String>) -> Self {
        self.date = Some(date.into());
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.end - self.start
    }

    fn tol(&self) -> f64 {
        1e-10 * (self.end - self.start)
    }

    /// Index of the last observation at or before `t` (up to a rounding
    /// tolerance of 1e-10 of the horizon), if any.
    pub fn last_at_or_before(&self, t: f64) -> Option<usize> {
        let t = t + self.tol();
        let k = self.times.partition_point(|&x| x <= t);
        k.checked_sub(1)
    }

    /// The in-sample window: first observation at or after `start` through
    /// the last at or before `end`.
    pub fn sample_window(&self) -> Result<Window> {
        let lo = self.times.partition_point(|&x| x < self.start - self.tol());
        let hi = self.last_at_or_before(self.end);
        match hi {
            Some(hi) if hi > lo => Ok(Window { lo, hi }),
            _ => Err(Error::TooShort {
                what: "in-sample observations",
                need: 2,
                have: hi.map_or(0, |h| (h + 1).saturating_sub(lo)),
            }),
        }
    }

    /// Number of in-sample returns.
    pub fn n_returns(&self) -> usize {
        self.sample_window().map_or(0, |w| w.n_returns())
    }

    /// Observation windows of each block. Block `i` runs from the last
    /// observation at or before `𝕋_{i-1}` to the last at or before `𝕋_i`, so
    /// consecutive blocks share a boundary observation.
    pub fn block_windows(&self, partition: &BlockPartition) -> Result<Vec<Window>> {
        let sample = self.sample_window()?;
        let bounds = partition.boundaries();
        let mut idx = Vec::with_capacity(bounds.len());
        idx.push(sample.lo);
        for &b in &bounds[1..bounds.len() - 1] {
            let k = self.last_at_or_before(b).unwrap_or(sample.lo).clamp(sample.lo, sample.hi);
            idx.push(k);
        }
        idx.push(sample.hi);
        Ok(idx.windows(2).map(|w| Window { lo: w[0], hi: w[1] }).collect())
    }

    /// Log-prices on a window, both boundary observations included.
    pub fn window_values(&self, w: Window) -> &[f64] {
        &self.values[w.lo..=w.hi]
    }

    /// Returns on a window.
    pub fn window_returns(&self, w: Window) -> Vec<f64> {
        self.values[w.lo..=w.hi].windows(2).map(|p| p[1] - p[0]).collect()
    }

    /// Shift every log-price by `c`.
    pub fn shifted(&self, c: f64) -> TickSeries {
        let mut s = self.clone();
        s.values.iter_mut().for_each(|v| *v += c);
        s
    }

    /// Multiply every log-price by `lambda`.
    pub fn scaled(&self, lambda: f64) -> TickSeries {
        let mut s = self.clone();
        s.values.iter_mut().for_each(|v| *v *= lambda);
        s
    }
}

/// `B` equal blocks of `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub blocks: usize,
    pub start: f64,
    pub end: f64,
}

impl BlockPartition {
    pub fn new(blocks: usize, start: f64, end: f64) -> Result<Self> {
        if blocks == 0 {
            return Err(Error::Config("number of blocks must be positive".into()));
        }
        if !(start < end) {
            return Err(Error::Config(format!("empty horizon [{start}, {end}]")));
        }
        Ok(BlockPartition { blocks, start, end })
    }

    pub fn for_series(blocks: usize, series: &TickSeries) -> Result<Self> {
        Self::new(blocks, series.start, series.end)
    }

    /// Length of one block.
    pub fn block_len(&self) -> f64 {
        (self.end - self.start) / self.blocks as f64
    }

    /// `𝕋_0, …, 𝕋_B` with the end points set exactly.
    pub fn boundaries(&self) -> Vec<f64> {
        let h = self.end - self.start;
        (0..=self.blocks)
            .map(|i| {
                if i == self.blocks {
                    self.end
                } else {
                    self.start + h * i as f64 / self.blocks as f64
                }
            })
            .collect()
    }
}
