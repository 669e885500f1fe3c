//! Asymptotic variances, the efficiency bound and efficiency losses.
//!
//! Everything here works on volatility functionals (integrals of σ², σ³, σ⁴
//! over an interval) rather than on raw prices, so the arithmetic can be
//! checked exactly on hand-built paths. Plug-in (feasible) versions take
//! pre-averaging pilots instead of true functionals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::{self, KernelFamily, KernelProfile};
use crate::preavg::{self, Pilots, PreAvgConfig};
use crate::series::{BlockPartition, TickSeries};

/// Integrated functionals of σ over an interval of length `horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolFunctionals {
    pub iv: f64,
    pub tricity: f64,
    pub quarticity: f64,
    /// `iv` plus the squared price jumps inside the interval.
    pub qv: f64,
    pub horizon: f64,
    pub a0: f64,
}

impl VolFunctionals {
    /// Left-point Riemann sums of a σ path sampled every `dt`.
    pub fn from_sigma(sigma: &[f64], dt: f64, a0: f64) -> Self {
        let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
        for &s in sigma {
            let v = s * s;
            s2 += v;
            s3 += v * s.abs();
            s4 += v * v;
        }
        VolFunctionals {
            iv: s2 * dt,
            tricity: s3 * dt,
            quarticity: s4 * dt,
            qv: s2 * dt,
            horizon: sigma.len() as f64 * dt,
            a0,
        }
    }

    /// Constant volatility `sigma` over `horizon`.
    pub fn constant(sigma: f64, horizon: f64, a0: f64) -> Self {
        VolFunctionals {
            iv: sigma.powi(2) * horizon,
            tricity: sigma.powi(3) * horizon,
            quarticity: sigma.powi(4) * horizon,
            qv: sigma.powi(2) * horizon,
            horizon,
            a0,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(domain("degenerate interval"));
        }
        if !(self.iv > 0.0 && self.quarticity > 0.0 && self.tricity > 0.0) {
            return Err(domain("volatility functionals must be positive"));
        }
        Ok(())
    }
}

/// A σ path on a regular grid covering `[0, len·dt)`.
#[derive(Debug, Clone, Copy)]
pub struct VolPath<'a> {
    pub sigma: &'a [f64],
    pub dt: f64,
    pub a0: f64,
}

impl VolPath<'_> {
    pub fn total(&self) -> VolFunctionals {
        VolFunctionals::from_sigma(self.sigma, self.dt, self.a0)
    }

    /// Functionals on each of `blocks` equal blocks (grid points split by index).
    pub fn blocks(&self, blocks: usize) -> Vec<VolFunctionals> {
        let n = self.sigma.len();
        (0..blocks)
            .map(|i| {
                let (a, b) = (i * n / blocks, (i + 1) * n / blocks);
                VolFunctionals::from_sigma(&self.sigma[a..b], self.dt, self.a0)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    pub rho: f64,
    pub kappa: f64,
    pub xi2: f64,
}

/// `ρ = IV/sqrt(L·Q)`, `κ = ∫σ³/(L^{1/4} Q^{3/4})`, `ξ² = a0²/sqrt(L·Q)`.
pub fn measures(f: &VolFunctionals) -> Result<Measures> {
    f.check()?;
    let lq = f.horizon * f.quarticity;
    Ok(Measures {
        rho: f.iv / lq.sqrt(),
        kappa: f.tricity / (f.horizon.powf(0.25) * f.quarticity.powf(0.75)),
        xi2: f.a0 * f.a0 / lq.sqrt(),
    })
}

/// Efficiency bound `8 a0 sqrt(L) ∫σ³`.
pub fn bound_efficiency(f: &VolFunctionals) -> f64 {
    8.0 * f.a0 * f.horizon.sqrt() * f.tricity
}

/// Kernel AVAR with bandwidth constant `c` (`H = c·sqrt(n)`):
/// `4 L Q {c k00 + 2 k11 ρ ξ²/c + k22 ξ⁴/c³}`.
pub fn avar_rk(f: &VolFunctionals, c: f64, profile: &KernelProfile) -> Result<f64> {
    if !(c > 0.0) {
        return Err(domain(format!("bandwidth constant {c} must be positive")));
    }
    let m = measures(f)?;
    let bracket =
        c * profile.k00 + 2.0 * profile.k11 * m.rho * m.xi2 / c + profile.k22 * m.xi2 * m.xi2 / c.powi(3);
    Ok(4.0 * f.horizon * f.quarticity * bracket)
}

/// Kernel AVAR at the optimal constant: `a0 (L Q)^{3/4} g(ρ)`.
pub fn avar_rk_opt(f: &VolFunctionals, profile: &KernelProfile) -> Result<f64> {
    let m = measures(f)?;
    Ok(f.a0 * (f.horizon * f.quarticity).powf(0.75) * kernels::g(m.rho.min(kernels::RHO_MAX), profile)?)
}

/// Optimal bandwidth constant `c*(ρ)·ξ` for the interval.
pub fn optimal_c(f: &VolFunctionals, profile: &KernelProfile) -> Result<f64> {
    let m = measures(f)?;
    Ok(kernels::c_star(m.rho, profile)? * m.xi2.sqrt())
}

/// QMLE AVAR `5 L a0 Q / IV^{1/2} + 3 a0 IV^{3/2}`.
pub fn avar_qmle(f: &VolFunctionals) -> Result<f64> {
    if !(f.iv > 0.0) {
        return Err(domain("integrated variance must be positive"));
    }
    Ok(5.0 * f.horizon * f.a0 * f.quarticity / f.iv.sqrt() + 3.0 * f.a0 * f.iv.powf(1.5))
}

/// Kernel loss from the heteroskedasticity measures: `g(ρ)/(8κ) - 1`.
pub fn loss_rk(rho: f64, kappa: f64, profile: &KernelProfile) -> Result<f64> {
    Ok(kernels::g(rho, profile)? / (8.0 * kappa) - 1.0)
}

/// QMLE loss from the measures: `(5 + 3ρ²)/(8κρ^{1/2}) - 1`.
pub fn loss_qmle(rho: f64, kappa: f64) -> f64 {
    (5.0 + 3.0 * rho * rho) / (8.0 * kappa * rho.sqrt()) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Estimator {
    Rk(KernelFamily),
    Qmle,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Rk(k) => write!(f, "rk-{k}"),
            Estimator::Qmle => f.write_str("qmle"),
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "qmle" {
            return Ok(Estimator::Qmle);
        }
        match s.strip_prefix("rk-").or_else(|| s.strip_prefix("rk:")) {
            Some(k) => Ok(Estimator::Rk(k.parse()?)),
            None => Err(Error::Config(format!("unknown estimator '{s}'"))),
        }
    }
}

impl TryFrom<String> for Estimator {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Estimator> for String {
    fn from(e: Estimator) -> String {
        e.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockedAvar {
    pub avar: f64,
    pub bound: f64,
    pub loss: f64,
}

/// Per-block optimal AVAR of one interval.
pub fn avar_interval(f: &VolFunctionals, estimator: Estimator) -> Result<f64> {
    match estimator {
        Estimator::Rk(k) => avar_rk_opt(f, &kernels::profile(k)),
        Estimator::Qmle => avar_qmle(f),
    }
}

/// `B^{1/2} Σ_i AVAR_i` over per-block functionals, with the loss against the
/// bound of `total`.
pub fn avar_blocked(blocks: &[VolFunctionals], total: &VolFunctionals, estimator: Estimator) -> Result<BlockedAvar> {
    if blocks.is_empty() {
        return Err(domain("no blocks"));
    }
    let profile = match estimator {
        Estimator::Rk(k) => Some(kernels::profile(k)),
        Estimator::Qmle => None,
    };
    let mut s = 0.0;
    for b in blocks {
        s += match &profile {
            Some(p) => avar_rk_opt(b, p)?,
            None => avar_qmle(b)?,
        };
    }
    let avar = (blocks.len() as f64).sqrt() * s;
    let bound = bound_efficiency(total);
    Ok(BlockedAvar {
        avar,
        bound,
        loss: avar / bound - 1.0,
    })
}

/// Feasible kernel AVAR contribution of one block: `â (Δ_B Q̂)^{3/4} g(ρ̂)`.
pub fn rk_feasible_block(a_hat: f64, block_len: f64, p: &Pilots, profile: &KernelProfile) -> f64 {
    a_hat * (block_len * p.quarticity).powf(0.75) * kernels::g_unchecked(p.rho, profile)
}

/// Feasible QMLE AVAR contribution of one block:
/// `5 Δ_B â Q̂/ÎV^{1/2} + 3 â ÎV^{3/2}`.
pub fn qmle_feasible_block(a_hat: f64, block_len: f64, p: &Pilots) -> f64 {
    5.0 * block_len * a_hat * p.quarticity / p.iv.sqrt() + 3.0 * a_hat * p.iv.powf(1.5)
}

/// Plug-in blocked AVAR from pre-averaging pilots and `â² = (2n)⁻¹Σ(ΔZ)²`.
pub fn avar_feasible(
    series: &TickSeries,
    partition: &BlockPartition,
    estimator: Estimator,
    cfg: &PreAvgConfig,
) -> Result<f64> {
    let sample = series.sample_window()?;
    let a_hat = preavg::noise_variance(series.window_values(sample))?.sqrt();
    let block_len = partition.block_len();
    let profile = match estimator {
        Estimator::Rk(k) => Some(kernels::profile(k)),
        Estimator::Qmle => None,
    };
    let mut s = 0.0;
    for w in series.block_windows(partition)? {
        let p = preavg::pilots(series.window_values(w), block_len, cfg)?;
        s += match &profile {
            Some(pr) => rk_feasible_block(a_hat, block_len, &p, pr),
            None => qmle_feasible_block(a_hat, block_len, &p),
        };
    }
    Ok((partition.blocks as f64).sqrt() * s)
}

/// A price jump with the spot volatility and sampling intensity around it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpMark {
    pub size: f64,
    pub sigma_before: f64,
    pub sigma_after: f64,
    pub alpha_before: f64,
    pub alpha_after: f64,
}

/// Inputs of the large-`B` limits under random sampling times and jumps.
#[derive(Debug, Clone, Copy)]
pub struct RobustInputs<'a> {
    pub sigma: &'a [f64],
    /// Sampling intensity process α on the same grid as `sigma`.
    pub alpha: &'a [f64],
    pub dt: f64,
    pub a0: f64,
    pub jumps: &'a [JumpMark],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustLimits {
    /// Kernel AVAR limit without jumps: `g(1) a0 (∫α⁻¹)^{1/2} ∫α^{1/2}σ³`.
    pub rk_limit: f64,
    /// Extra kernel term from price jumps.
    pub rk_jump_term: f64,
    /// QMLE AVAR limit without jumps: `8 a0 (∫α⁻¹)^{1/2} ∫α^{1/2}σ³`.
    pub qmle_limit: f64,
    /// Coefficient of `B^{1/2}` in the diverging QMLE AVAR under jumps.
    pub qmle_jump_divergence_coeff: f64,
}

/// Large-`B` limits of the blocked AVARs under random sampling and jumps.
pub fn robust_limits(inp: &RobustInputs<'_>, profile: &KernelProfile) -> Result<RobustLimits> {
    if inp.sigma.len() != inp.alpha.len() || inp.sigma.is_empty() {
        return Err(domain("sigma and alpha paths must be non-empty and aligned"));
    }
    if inp.alpha.iter().any(|&a| !(a > 0.0)) {
        return Err(domain("sampling intensity must be positive"));
    }
    let horizon = inp.sigma.len() as f64 * inp.dt;
    let inv_alpha: f64 = inp.alpha.iter().map(|a| 1.0 / a).sum::<f64>() * inp.dt;
    let weighted: f64 = inp
        .sigma
        .iter()
        .zip(inp.alpha)
        .map(|(s, a)| a.sqrt() * s.powi(3))
        .sum::<f64>()
        * inp.dt;
    let root = inv_alpha.sqrt();
    let g1 = kernels::g_unchecked(1.0, profile);
    let jump_const = 16.0 / 3.0 * (std::f64::consts::FRAC_1_SQRT_2 + std::f64::consts::SQRT_2) * (profile.k00 * profile.k11).sqrt();
    let rk_jump_term = inp
        .jumps
        .iter()
        .map(|j| {
            let v = j.sigma_after.powi(2) * j.alpha_after + j.sigma_before.powi(2) * j.alpha_before;
            j.size * j.size * v.sqrt()
        })
        .sum::<f64>()
        * jump_const
        * inp.a0
        * root;
    let coeff = 3.0 * inp.a0 / horizon.sqrt()
        * root
        * inp.jumps.iter().map(|j| j.alpha_after.sqrt() * j.size.abs().powi(3)).sum::<f64>();
    Ok(RobustLimits {
        rk_limit: g1 * inp.a0 * root * weighted,
        rk_jump_term,
        qmle_limit: 8.0 * inp.a0 * root * weighted,
        qmle_jump_divergence_coeff: coeff,
    })
}
