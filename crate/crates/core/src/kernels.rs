//! Flat-top kernel weight functions and their moment constants.
//!
//! The families are the usual ones from the realized-kernel literature:
//!
//! * Tukey-Hanning of order p: `k(x) = sin²(π/2 · (1-x)^p)`
//! * Parzen: `1 - 6x² + 6x³` on `[0, 1/2]`, `2(1-x)³` on `(1/2, 1]`
//! * Cubic: `1 - 3x² + 2x³`
//!
//! A [`KernelProfile`] carries `k00 = ∫k²`, `k11 = ∫k'²`, `k22 = ∫k''²` over
//! `[0, 1]` and `d = k00·k22 / k11²`. These drive the optimal bandwidth
//! constant [`c_star`] and the variance factor [`g`].

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad;

/// Largest ρ accepted by [`g`] and [`c_star`]; pilot estimates can exceed 1.
pub const RHO_MAX: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelFamily {
    TukeyHanning(u32),
    Parzen,
    Cubic,
}

impl KernelFamily {
    /// `k(x)` without the domain check; callers guarantee `x ∈ [0, 1]`.
    #[inline]
    pub fn weight(self, x: f64) -> f64 {
        match self {
            KernelFamily::TukeyHanning(p) => {
                let s = (FRAC_PI_2 * (1.0 - x).powi(p as i32)).sin();
                s * s
            }
            KernelFamily::Parzen => {
                if x <= 0.5 {
                    1.0 - 6.0 * x * x + 6.0 * x * x * x
                } else {
                    2.0 * (1.0 - x).powi(3)
                }
            }
            KernelFamily::Cubic => 1.0 - 3.0 * x * x + 2.0 * x * x * x,
        }
    }

    /// First derivative `k'(x)`.
    pub fn deriv1(self, x: f64) -> f64 {
        match self {
            KernelFamily::TukeyHanning(p) => {
                let y = 1.0 - x;
                let pf = p as f64;
                let u = FRAC_PI_2 * y.powi(p as i32);
                let du = -FRAC_PI_2 * pf * y.powi(p as i32 - 1);
                (2.0 * u).sin() * du
            }
            KernelFamily::Parzen => {
                if x <= 0.5 {
                    -12.0 * x + 18.0 * x * x
                } else {
                    -6.0 * (1.0 - x).powi(2)
                }
            }
            KernelFamily::Cubic => -6.0 * x + 6.0 * x * x,
        }
    }

    /// Second derivative `k''(x)`.
    pub fn deriv2(self, x: f64) -> f64 {
        match self {
            KernelFamily::TukeyHanning(p) => {
                let y = 1.0 - x;
                let pf = p as f64;
                let u = FRAC_PI_2 * y.powi(p as i32);
                let du = -FRAC_PI_2 * pf * y.powi(p as i32 - 1);
                let ddu = if p >= 2 {
                    FRAC_PI_2 * pf * (pf - 1.0) * y.powi(p as i32 - 2)
                } else {
                    0.0
                };
                2.0 * (2.0 * u).cos() * du * du + (2.0 * u).sin() * ddu
            }
            KernelFamily::Parzen => {
                if x <= 0.5 {
                    -12.0 + 36.0 * x
                } else {
                    12.0 * (1.0 - x)
                }
            }
            KernelFamily::Cubic => -6.0 + 12.0 * x,
        }
    }

    /// Whether `k'(0)² + k'(1)² = 0` holds for this family.
    pub fn is_smooth(self) -> bool {
        match self {
            KernelFamily::TukeyHanning(p) => p >= 2,
            KernelFamily::Parzen | KernelFamily::Cubic => true,
        }
    }

    fn breaks(self) -> &'static [f64] {
        match self {
            KernelFamily::Parzen => &[0.0, 0.5, 1.0],
            _ => &[0.0, 1.0],
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::TukeyHanning(p) => write!(f, "th{p}"),
            KernelFamily::Parzen => f.write_str("parzen"),
            KernelFamily::Cubic => f.write_str("cubic"),
        }
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "parzen" => Ok(KernelFamily::Parzen),
            "cubic" => Ok(KernelFamily::Cubic),
            _ => {
                let p = lower
                    .strip_prefix("th")
                    .and_then(|rest| rest.parse::<u32>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown kernel '{s}'")))?;
                if p == 0 || p > 64 {
                    return Err(Error::Config(format!("Tukey-Hanning order {p} out of range")));
                }
                Ok(KernelFamily::TukeyHanning(p))
            }
        }
    }
}

impl TryFrom<String> for KernelFamily {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelFamily> for String {
    fn from(k: KernelFamily) -> String {
        k.to_string()
    }
}

/// `k(x)` with a domain check on `x`.
pub fn eval_kernel(family: KernelFamily, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("kernel argument {x} outside [0, 1]")));
    }
    Ok(family.weight(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelProfile {
    pub family: KernelFamily,
    pub k00: f64,
    pub k11: f64,
    pub k22: f64,
    pub d: f64,
}

const QUAD_TOL: f64 = 1e-12;

/// Moment constants of `family` by adaptive quadrature.
pub fn profile(family: KernelFamily) -> KernelProfile {
    let br = family.breaks();
    let k00 = quad::integrate_pieces(|x| family.weight(x).powi(2), br, QUAD_TOL);
    let k11 = quad::integrate_pieces(|x| family.deriv1(x).powi(2), br, QUAD_TOL);
    let k22 = quad::integrate_pieces(|x| family.deriv2(x).powi(2), br, QUAD_TOL);
    KernelProfile {
        family,
        k00,
        k11,
        k22,
        d: k00 * k22 / (k11 * k11),
    }
}

impl KernelProfile {
    /// Loss of the kernel under constant volatility: `g(1)/8 - 1`.
    pub fn parametric_loss(&self) -> f64 {
        g_unchecked(1.0, self) / 8.0 - 1.0
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho <= RHO_MAX) {
        return Err(domain(format!("rho = {rho} outside (0, {RHO_MAX}]")));
    }
    Ok(())
}

pub(crate) fn g_unchecked(rho: f64, p: &KernelProfile) -> f64 {
    let root = (1.0 + (1.0 + 3.0 * p.d / (rho * rho)).sqrt()).sqrt();
    16.0 / 3.0 * (rho * p.k00 * p.k11).sqrt() * (1.0 / root + root)
}

pub(crate) fn c_star_unchecked(rho: f64, p: &KernelProfile) -> f64 {
    (rho * (p.k11 / p.k00) * (1.0 + (1.0 + 3.0 * p.d / (rho * rho)).sqrt())).sqrt()
}

/// Variance factor of the optimally tuned kernel at heteroskedasticity `rho`.
pub fn g(rho: f64, profile: &KernelProfile) -> Result<f64> {
    check_rho(rho)?;
    Ok(g_unchecked(rho, profile))
}

/// Optimal bandwidth constant (before scaling by ξ).
pub fn c_star(rho: f64, profile: &KernelProfile) -> Result<f64> {
    check_rho(rho)?;
    Ok(c_star_unchecked(rho, profile))
}
