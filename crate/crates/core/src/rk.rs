//! Flat-top realized kernel on blocks of a tick series.
//!
//! `K = γ0 + Σ_{h=1}^{H} k((h-1)/H)(γ_h + γ_{-h})` with non-truncated
//! autocovariances: lags reach past the window into neighbouring blocks or
//! burn-in data. Block boundary prices are jittered (averaged over the `m`
//! nearest observations) before the kernel is applied, and the blocked
//! estimator sums the per-block kernels.

use std::sync::atomic::{AtomicBool, Ordering};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::avar;
use crate::error::{domain, Error, Result};
use crate::kernels::{self, KernelFamily};
use crate::preavg::{self, Pilots, PreAvgConfig};
use crate::series::{BlockPartition, TickSeries, Window};

/// Default number of observations averaged at each block boundary.
pub const DEFAULT_JITTER: usize = 25;

/// Minimum number of returns per block.
pub const MIN_BLOCK_RETURNS: usize = 50;

static PAD_WARNED: AtomicBool = AtomicBool::new(false);

#[derive(Debug, Clone, PartialEq)]
pub enum Bandwidths {
    /// One bandwidth per block.
    PerBlock(Vec<usize>),
    /// The same bandwidth on every block.
    Fixed(usize),
    /// `H_i = round(ĉ*_i ξ̂_i sqrt(n_i))` from pre-averaging pilots.
    Auto(PreAvgConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RkBlock {
    pub estimate: f64,
    pub bandwidth: usize,
    pub n_returns: usize,
    /// Bandwidth constant `ĉ*·ξ̂` before rounding (auto mode), else `H/sqrt(n_i)`.
    pub c: f64,
    pub rho_hat: Option<f64>,
    pub xi2_hat: Option<f64>,
    /// Feasible per-block AVAR contribution `â (Δ_B Q̂_i)^{3/4} g(ρ̂_i)`.
    pub avar: Option<f64>,
    pub pilots: Option<Pilots>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RkEstimate {
    pub total: f64,
    pub blocks: Vec<RkBlock>,
    pub a2_hat: f64,
    pub block_len: f64,
    /// `B^{1/2} Σ avar_i` when every block has pilots.
    pub avar: Option<f64>,
}

fn check_edges(len: usize, w: Window, h: usize) -> Result<()> {
    if w.lo < h || w.hi + h >= len {
        let have = w.lo.min(len.saturating_sub(w.hi + 1));
        return Err(Error::TooShort {
            what: "edge observations for the requested lag",
            need: h,
            have,
        });
    }
    Ok(())
}

/// `γ_h = Σ_{j=lo+1}^{hi} r_j r_{j-h}` with `r_j = Z_j - Z_{j-1}`; negative
/// `h` gives `γ_{-|h|}`. Lagged returns outside the window are taken from the
/// series, which must contain them.
pub fn realized_autocov(series: &TickSeries, window: Window, h: i64) -> Result<f64> {
    let a = h.unsigned_abs() as usize;
    check_edges(series.len(), window, a)?;
    let z = &series.values;
    let r = |j: usize| z[j] - z[j - 1];
    let mut s = 0.0;
    for j in window.lo + 1..=window.hi {
        let other = if h >= 0 { j - a } else { j + a };
        s += r(j) * r(other);
    }
    Ok(s)
}

/// Kernel on a vector of returns where `ret[off + t]` is the return into
/// window observation `lo + 1 + t`, `t ∈ [-H, n + H)`.
fn kernel_on_returns(ret: &[f64], off: usize, n: usize, bandwidth: usize, family: KernelFamily) -> f64 {
    let inner = &ret[off..off + n];
    let mut k = inner.iter().map(|x| x * x).sum::<f64>();
    let hf = bandwidth as f64;
    for h in 1..=bandwidth {
        let w = family.weight((h - 1) as f64 / hf);
        let mut g = 0.0;
        for (t, x) in inner.iter().enumerate() {
            g += x * (ret[off + t - h] + ret[off + t + h]);
        }
        k += w * g;
    }
    k
}

/// Flat-top realized kernel on `window` with bandwidth `bandwidth`.
pub fn rk_block(series: &TickSeries, window: Window, bandwidth: usize, family: KernelFamily) -> Result<f64> {
    if bandwidth == 0 {
        return Err(domain("bandwidth must be at least 1"));
    }
    check_edges(series.len(), window, bandwidth)?;
    let z = &series.values;
    let first = window.lo + 1 - bandwidth;
    let last = window.hi + bandwidth;
    let ret: Vec<f64> = (first..=last).map(|j| z[j] - z[j - 1]).collect();
    Ok(kernel_on_returns(&ret, bandwidth, window.n_returns(), bandwidth, family))
}

fn nearest(len: usize, index: usize, m: usize) -> Result<std::ops::Range<usize>> {
    if m == 0 {
        return Err(domain("jitter width must be at least 1"));
    }
    if len < m {
        return Err(Error::TooShort {
            what: "observations around a jittered boundary",
            need: m,
            have: len,
        });
    }
    let start = index.saturating_sub((m - 1) / 2).min(len - m);
    Ok(start..start + m)
}

/// Mean of the `m` observations nearest to `index` (centred where the series
/// allows, shifted inwards at its ends).
pub fn jitter(series: &TickSeries, index: usize, m: usize) -> Result<f64> {
    if index >= series.len() {
        return Err(domain(format!("boundary index {index} out of range")));
    }
    if m == 1 {
        return Ok(series.values[index]);
    }
    let r = nearest(series.len(), index, m)?;
    Ok(series.values[r].iter().sum::<f64>() / m as f64)
}

/// Copy of `series` with both boundary observations of `window` jittered.
pub fn jittered(series: &TickSeries, window: Window, m: usize) -> Result<TickSeries> {
    let mut s = series.clone();
    s.values[window.lo] = jitter(series, window.lo, m)?;
    s.values[window.hi] = jitter(series, window.hi, m)?;
    Ok(s)
}

/// Kernel with reflected returns where the series lacks edge data.
fn rk_block_padded(series: &TickSeries, window: Window, bandwidth: usize, family: KernelFamily) -> f64 {
    if !PAD_WARNED.swap(true, Ordering::Relaxed) {
        warn!("not enough edge data for bandwidth {bandwidth}; reflecting returns at the sample ends");
    }
    let z = &series.values;
    let last_ret = z.len() - 1; // returns exist for j in 1..=last_ret
    let reflect = |j: i64| -> usize {
        let mut j = j;
        let hi = last_ret as i64;
        loop {
            if j < 1 {
                j = 2 - j;
            } else if j > hi {
                j = 2 * hi - j;
            } else {
                return j as usize;
            }
        }
    };
    let first = window.lo as i64 + 1 - bandwidth as i64;
    let last = (window.hi + bandwidth) as i64;
    let ret: Vec<f64> = (first..=last)
        .map(|j| {
            let j = reflect(j);
            z[j] - z[j - 1]
        })
        .collect();
    kernel_on_returns(&ret, bandwidth, window.n_returns(), bandwidth, family)
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Blocked realized kernel `K̃ = Σ K_i`.
pub fn local_rk(
    series: &TickSeries,
    partition: &BlockPartition,
    family: KernelFamily,
    bandwidths: &Bandwidths,
    m: usize,
) -> Result<RkEstimate> {
    let windows = series.block_windows(partition)?;
    let sample = series.sample_window()?;
    if let Bandwidths::PerBlock(h) = bandwidths {
        if h.len() != windows.len() {
            return Err(Error::Config(format!("{} bandwidths for {} blocks", h.len(), windows.len())));
        }
    }
    for w in &windows {
        if w.n_returns() < MIN_BLOCK_RETURNS {
            return Err(Error::TooShort {
                what: "block returns",
                need: MIN_BLOCK_RETURNS,
                have: w.n_returns(),
            });
        }
    }
    let profile = kernels::profile(family);
    let a2 = preavg::noise_variance(series.window_values(sample))?;
    let block_len = partition.block_len();
    let pilot_cfg = match bandwidths {
        Bandwidths::Auto(cfg) => *cfg,
        _ => PreAvgConfig::default(),
    };

    let mut blocks = Vec::with_capacity(windows.len());
    for (i, &w) in windows.iter().enumerate() {
        let n = w.n_returns();
        let pilots = match preavg::pilots(series.window_values(w), block_len, &pilot_cfg) {
            Ok(p) => Some(p),
            Err(e) if matches!(bandwidths, Bandwidths::Auto(_)) => return Err(e),
            Err(e) => {
                debug!("block {i}: no pilots ({e})");
                None
            }
        };
        let xi2 = pilots.map(|p| a2 / (block_len * p.quarticity).sqrt());
        let (bandwidth, c) = match bandwidths {
            Bandwidths::PerBlock(h) => (h[i], h[i] as f64 / (n as f64).sqrt()),
            Bandwidths::Fixed(h) => (*h, *h as f64 / (n as f64).sqrt()),
            Bandwidths::Auto(_) => {
                let p = pilots.expect("auto mode requires pilots");
                let c = kernels::c_star(p.rho, &profile)? * xi2.unwrap_or(0.0).sqrt();
                let raw = round_half_up(c * (n as f64).sqrt());
                let h = raw.clamp(1, n - 1);
                if h != raw {
                    debug!("block {i}: bandwidth {raw} clamped to {h}");
                }
                (h, c)
            }
        };
        if bandwidth == 0 || bandwidth >= n {
            return Err(domain(format!("bandwidth {bandwidth} outside [1, {}]", n - 1)));
        }
        let js = jittered(series, w, m)?;
        let estimate = match rk_block(&js, w, bandwidth, family) {
            Ok(k) => k,
            Err(Error::TooShort { .. }) => rk_block_padded(&js, w, bandwidth, family),
            Err(e) => return Err(e),
        };
        let avar = pilots.map(|p| avar::rk_feasible_block(a2.sqrt(), block_len, &p, &profile));
        blocks.push(RkBlock {
            estimate,
            bandwidth,
            n_returns: n,
            c,
            rho_hat: pilots.map(|p| p.rho),
            xi2_hat: xi2,
            avar,
            pilots,
        });
    }
    let total = blocks.iter().map(|b| b.estimate).sum();
    let avar = blocks
        .iter()
        .map(|b| b.avar)
        .sum::<Option<f64>>()
        .map(|s| (windows.len() as f64).sqrt() * s);
    Ok(RkEstimate {
        total,
        blocks,
        a2_hat: a2,
        block_len,
        avar,
    })
}

/// The global (single-block) kernel.
pub fn global_rk(series: &TickSeries, family: KernelFamily, bandwidths: &Bandwidths, m: usize) -> Result<RkEstimate> {
    local_rk(series, &BlockPartition::for_series(1, series)?, family, bandwidths, m)
}
