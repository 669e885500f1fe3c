//! Gaussian MA(1) quasi-likelihood for `(σ², a²)` and the blocked QMLE.
//!
//! Returns `Y` on a block of `n` observations with spacing `Δ̃` are treated as
//! Gaussian with tridiagonal covariance `Ω`: diagonal `σ²Δ̃ + 2a²`,
//! off-diagonal `-a²`. The fit maximises the likelihood over a box by
//! multi-start Nelder-Mead in log-parameters. On an irregular grid `Δ̃` is the
//! block length divided by the block's tick count.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::avar;
use crate::error::{domain, Error, Result};
use crate::optim::{nelder_mead, NmOptions};
use crate::preavg::{self, Pilots, PreAvgConfig};
use crate::series::{BlockPartition, TickSeries};
use crate::tridiag;

/// Minimum number of returns per block.
pub const MIN_RETURNS: usize = 10;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Search box for `(σ², a²)`; σ² is a variance rate per year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QmleBox {
    pub sigma2: (f64, f64),
    pub a2: (f64, f64),
}

impl QmleBox {
    /// Moment-based box: `σ² ∈ [1e-4, 1e4]·RV/L` and `a² ∈ [1e-6, 10]·â²`
    /// with `â² = RV/(2n)`.
    pub fn from_moments(returns: &[f64], delta_tilde: f64) -> Result<Self> {
        let n = returns.len() as f64;
        let rv: f64 = returns.iter().map(|y| y * y).sum();
        if !(rv > 0.0) {
            return Err(domain("returns have zero realized variance"));
        }
        let rate = rv / (n * delta_tilde);
        let a2 = rv / (2.0 * n);
        Ok(QmleBox {
            sigma2: (1e-4 * rate, 1e4 * rate),
            a2: (1e-6 * a2, 10.0 * a2),
        })
    }

    fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi > lo && hi.is_finite();
        if ok(self.sigma2) && ok(self.a2) {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid QMLE box {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QmleFit {
    pub sigma2_hat: f64,
    pub a2_hat: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Gaussian MA(1) quasi log-likelihood.
pub fn quasi_loglik(returns: &[f64], sigma2: f64, a2: f64, delta_tilde: f64) -> Result<f64> {
    if !(sigma2 >= 0.0 && a2 > 0.0 && delta_tilde > 0.0) {
        return Err(domain(format!(
            "need sigma2 >= 0, a2 > 0, delta > 0 (got {sigma2}, {a2}, {delta_tilde})"
        )));
    }
    let diag = sigma2 * delta_tilde + 2.0 * a2;
    let (logdet, q) = tridiag::logdet_and_quadform(returns, diag, -a2)?;
    Ok(-0.5 * logdet - 0.5 * returns.len() as f64 * LN_2PI - 0.5 * q)
}

/// Maximises [`quasi_loglik`] over `bx` (moment-based when `None`).
pub fn fit_qmle(returns: &[f64], delta_tilde: f64, bx: Option<QmleBox>) -> Result<QmleFit> {
    if returns.len() < MIN_RETURNS {
        return Err(Error::TooShort {
            what: "QMLE returns",
            need: MIN_RETURNS,
            have: returns.len(),
        });
    }
    if !(delta_tilde > 0.0) {
        return Err(domain("sampling interval must be positive"));
    }
    let bx = match bx {
        Some(b) => b,
        None => QmleBox::from_moments(returns, delta_tilde)?,
    };
    bx.validate()?;
    let lo = [bx.sigma2.0.ln(), bx.a2.0.ln()];
    let hi = [bx.sigma2.1.ln(), bx.a2.1.ln()];
    let nll = |u: &[f64]| -> f64 {
        let s2 = u[0].clamp(lo[0], hi[0]).exp();
        let a2 = u[1].clamp(lo[1], hi[1]).exp();
        match quasi_loglik(returns, s2, a2, delta_tilde) {
            Ok(l) => -l,
            Err(_) => f64::INFINITY,
        }
    };
    let opts = NmOptions::default();
    let span = [hi[0] - lo[0], hi[1] - lo[1]];
    let mut best: Option<(Vec<f64>, f64, usize, bool)> = None;
    let mut iterations = 0;
    // centres of the four quadrants of the log-box
    for (fs, fa) in [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)] {
        let x0 = [lo[0] + fs * span[0], lo[1] + fa * span[1]];
        let step = [0.1 * span[0], 0.1 * span[1]];
        let r = nelder_mead(nll, &x0, &step, opts);
        iterations += r.iterations;
        if best.as_ref().map_or(true, |b| r.fx < b.1) {
            best = Some((r.x, r.fx, r.iterations, r.converged));
        }
    }
    let (x, _, _, _) = best.expect("at least one start");
    // restart at the best point with a small simplex to shake off a collapsed one
    let polish = nelder_mead(nll, &x, &[0.05, 0.05], opts);
    iterations += polish.iterations;
    let u = [polish.x[0].clamp(lo[0], hi[0]), polish.x[1].clamp(lo[1], hi[1])];
    let on_edge = (0..2).any(|i| (u[i] - lo[i]).abs() < 1e-6 || (hi[i] - u[i]).abs() < 1e-6);
    if on_edge {
        debug!("QMLE fit on the box edge: sigma2 = {:e}, a2 = {:e}", u[0].exp(), u[1].exp());
    }
    Ok(QmleFit {
        sigma2_hat: u[0].exp(),
        a2_hat: u[1].exp(),
        loglik: -polish.fx,
        iterations,
        converged: polish.converged && !on_edge,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmleBlock {
    /// `q_i = Δ_B σ̂²_i`.
    pub estimate: f64,
    pub sigma2: f64,
    pub a2: f64,
    pub n_returns: usize,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Feasible per-block AVAR `5Δ_B â Q̂_i/ÎV_i^{1/2} + 3â ÎV_i^{3/2}`.
    pub avar: Option<f64>,
    pub pilots: Option<Pilots>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmleEstimate {
    pub total: f64,
    pub blocks: Vec<QmleBlock>,
    /// `B⁻¹ Σ â²_i`.
    pub a2_mean: f64,
    /// `(2n)⁻¹ Σ(ΔZ)²` on the whole sample.
    pub a2_hat: f64,
    pub block_len: f64,
    /// `B^{1/2} Σ avar_i` when every block has pilots.
    pub avar: Option<f64>,
}

impl QmleEstimate {
    pub fn all_converged(&self) -> bool {
        self.blocks.iter().all(|b| b.converged)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QmleOptions {
    pub bx: Option<QmleBox>,
    pub pilots: PreAvgConfig,
}

/// Blocked QMLE `Q̃ = Σ Δ_B σ̂²_i`.
pub fn local_qmle(series: &TickSeries, partition: &BlockPartition, opts: &QmleOptions) -> Result<QmleEstimate> {
    let windows = series.block_windows(partition)?;
    let sample = series.sample_window()?;
    let block_len = partition.block_len();
    let a2_hat = preavg::noise_variance(series.window_values(sample))?;
    let mut blocks = Vec::with_capacity(windows.len());
    for (i, &w) in windows.iter().enumerate() {
        let y = series.window_returns(w);
        let n = y.len();
        if n < MIN_RETURNS {
            return Err(Error::TooShort {
                what: "QMLE block returns",
                need: MIN_RETURNS,
                have: n,
            });
        }
        let fit = fit_qmle(&y, block_len / n as f64, opts.bx)?;
        let pilots = match preavg::pilots(series.window_values(w), block_len, &opts.pilots) {
            Ok(p) => Some(p),
            Err(e) => {
                debug!("block {i}: no pilots ({e})");
                None
            }
        };
        let avar = pilots.map(|p| avar::qmle_feasible_block(a2_hat.sqrt(), block_len, &p));
        blocks.push(QmleBlock {
            estimate: block_len * fit.sigma2_hat,
            sigma2: fit.sigma2_hat,
            a2: fit.a2_hat,
            n_returns: n,
            loglik: fit.loglik,
            iterations: fit.iterations,
            converged: fit.converged,
            avar,
            pilots,
        });
    }
    let b = blocks.len() as f64;
    let total = blocks.iter().map(|q| q.estimate).sum();
    let a2_mean = blocks.iter().map(|q| q.a2).sum::<f64>() / b;
    let avar = blocks.iter().map(|q| q.avar).sum::<Option<f64>>().map(|s| b.sqrt() * s);
    Ok(QmleEstimate {
        total,
        blocks,
        a2_mean,
        a2_hat,
        block_len,
        avar,
    })
}

/// The global (single-block) QMLE.
pub fn global_qmle(series: &TickSeries, opts: &QmleOptions) -> Result<QmleEstimate> {
    local_qmle(series, &BlockPartition::for_series(1, series)?, opts)
}
