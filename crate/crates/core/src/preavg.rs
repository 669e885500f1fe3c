//! Pre-averaging pilots: block integrated volatility and quarticity, the
//! noise variance, and the derived ρ̂ and ĉ* used to tune the realized kernel.
//!
//! Prices passed in are the block's log-prices with both boundary
//! observations included, so `z.len() - 1` returns. The window length is
//! `k = max(2, round(θ / sqrt(Δ)))` with θ and Δ measured in seconds, and the
//! effective `θ = k·sqrt(Δ)` is what enters the estimators.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::{self, KernelProfile};
use crate::quad;
use crate::series::SECONDS_PER_YEAR;

pub const RHO_CLIP: (f64, f64) = (0.05, 1.5);

/// Floor applied to a pilot quarticity, as a fraction of `IV²/L`.
pub const QUARTICITY_FLOOR: f64 = 0.01;

/// Pre-averaging weight function. Only the triangular weight `x ∧ (1-x)` is
/// built in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weight {
    #[default]
    Triangular,
}

impl Weight {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Weight::Triangular => x.min(1.0 - x).max(0.0),
        }
    }

    pub fn deriv(self, x: f64) -> f64 {
        match self {
            Weight::Triangular => {
                if x < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// `ψ1 = ∫f'²`.
    pub fn psi1(self) -> f64 {
        match self {
            Weight::Triangular => 1.0,
        }
    }

    /// `ψ2 = ∫f²`.
    pub fn psi2(self) -> f64 {
        match self {
            Weight::Triangular => 1.0 / 12.0,
        }
    }

    /// `(Φ11, Φ12, Φ22)` by nested quadrature, with
    /// `φ1(s) = ∫_s^1 f'(u) f'(u-s) du`, `φ2(s) = ∫_s^1 f(u) f(u-s) du` and
    /// `Φij = ∫_0^1 φi φj`.
    pub fn phi_constants(self) -> (f64, f64, f64) {
        let tol = 1e-11;
        let inner = |s: f64, d: bool| {
            // kinks of the integrand at 1/2 and s + 1/2
            let mut br = vec![s, 1.0];
            for k in [0.5, s + 0.5] {
                if k > s && k < 1.0 {
                    br.push(k);
                }
            }
            br.sort_by(|a, b| a.partial_cmp(b).unwrap());
            quad::integrate_pieces(
                |u| {
                    if d {
                        self.deriv(u) * self.deriv(u - s)
                    } else {
                        self.eval(u) * self.eval(u - s)
                    }
                },
                &br,
                tol,
            )
        };
        let br = [0.0, 0.5, 1.0];
        let p11 = quad::integrate_pieces(|s| inner(s, true).powi(2), &br, tol);
        let p12 = quad::integrate_pieces(|s| inner(s, true) * inner(s, false), &br, tol);
        let p22 = quad::integrate_pieces(|s| inner(s, false).powi(2), &br, tol);
        (p11, p12, p22)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreAvgConfig {
    /// Window scale in seconds.
    pub theta_seconds: f64,
    #[serde(default)]
    pub weight: Weight,
}

impl Default for PreAvgConfig {
    fn default() -> Self {
        PreAvgConfig {
            theta_seconds: 30.0,
            weight: Weight::Triangular,
        }
    }
}

impl PreAvgConfig {
    /// Window length for sampling interval `delta` (years).
    pub fn window(&self, delta: f64) -> usize {
        let dsec = (delta * SECONDS_PER_YEAR).sqrt();
        ((self.theta_seconds / dsec).round() as usize).max(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pilots {
    pub iv: f64,
    pub quarticity: f64,
    /// ρ̂ after clipping.
    pub rho: f64,
    /// ρ̂ before clipping.
    pub rho_raw: f64,
    pub window: usize,
    pub quarticity_floored: bool,
}

fn returns(z: &[f64]) -> Vec<f64> {
    z.windows(2).map(|w| w[1] - w[0]).collect()
}

/// `â² = (2n)⁻¹ Σ (ΔZ)²` over the `n` available increments.
pub fn noise_variance(z: &[f64]) -> Result<f64> {
    if z.len() < 2 {
        return Err(Error::TooShort {
            what: "noise variance",
            need: 2,
            have: z.len(),
        });
    }
    let n = (z.len() - 1) as f64;
    let ss: f64 = z.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(ss / (2.0 * n))
}

struct Averaged {
    r: Vec<f64>,
    zbar: Vec<f64>,
    k: usize,
    delta: f64,
}

fn preaverage(z: &[f64], block_len: f64, cfg: &PreAvgConfig) -> Result<Averaged> {
    if !(block_len > 0.0) {
        return Err(domain(format!("block length {block_len} must be positive")));
    }
    let n = z.len().saturating_sub(1);
    if n == 0 {
        return Err(Error::TooShort {
            what: "pre-averaging block",
            need: 2,
            have: z.len(),
        });
    }
    let delta = block_len / n as f64;
    let k = cfg.window(delta);
    if n < 2 * k {
        return Err(Error::TooShort {
            what: "pre-averaging block (returns vs 2k)",
            need: 2 * k,
            have: n,
        });
    }
    let r = returns(z);
    let w: Vec<f64> = (1..k).map(|i| cfg.weight.eval(i as f64 / k as f64)).collect();
    // Z̄_j = Σ_{i=1}^{k-1} f(i/k) r_{j+i}, returns 1-indexed, j = 0..=n-k+1
    let zbar = (0..=n - k + 1)
        .map(|j| w.iter().enumerate().map(|(i, wi)| wi * r[j + i]).sum())
        .collect();
    Ok(Averaged { r, zbar, k, delta })
}

/// Pre-averaged integrated variance of a block.
pub fn preavg_iv(z: &[f64], block_len: f64, cfg: &PreAvgConfig) -> Result<f64> {
    let a = preaverage(z, block_len, cfg)?;
    Ok(iv_from(&a, cfg))
}

fn iv_from(a: &Averaged, cfg: &PreAvgConfig) -> f64 {
    let k = a.k as f64;
    let (psi1, psi2) = (cfg.weight.psi1(), cfg.weight.psi2());
    let s2: f64 = a.zbar.iter().map(|x| x * x).sum();
    let rv: f64 = a.r.iter().map(|x| x * x).sum();
    s2 / (k * psi2) - psi1 * rv / (2.0 * k * k * psi2)
}

fn quarticity_from(a: &Averaged, cfg: &PreAvgConfig) -> f64 {
    let (psi1, psi2) = (cfg.weight.psi1(), cfg.weight.psi2());
    let k = a.k;
    let n = a.r.len();
    let theta2 = (k * k) as f64 * a.delta;
    let theta4 = theta2 * theta2;
    let r2: Vec<f64> = a.r.iter().map(|x| x * x).collect();

    let s4: f64 = a.zbar.iter().map(|x| x.powi(4)).sum();

    // Σ_j Z̄_j² Σ_{l=j+k}^{j+2k-1} r_l², returns 1-indexed (r_l = r2[l-1])
    let mut window: f64 = r2[k - 1..2 * k - 1].iter().sum();
    let mut cross = 0.0;
    for j in 0..=n + 1 - 2 * k {
        if j > 0 {
            window += r2[j + 2 * k - 2] - r2[j + k - 2];
        }
        cross += a.zbar[j].powi(2) * window;
    }

    // Σ_{j=1}^{n-2} r_j² r_{j+2}²
    let lag2: f64 = (0..n.saturating_sub(2)).map(|j| r2[j] * r2[j + 2]).sum();

    s4 / (3.0 * theta2 * psi2 * psi2) - a.delta * psi1 * cross / (theta4 * psi2 * psi2)
        + a.delta * psi1 * psi1 * lag2 / (4.0 * theta4 * psi2 * psi2)
}

/// Pre-averaged integrated quarticity of a block, without flooring.
pub fn preavg_quarticity(z: &[f64], block_len: f64, cfg: &PreAvgConfig) -> Result<f64> {
    let a = preaverage(z, block_len, cfg)?;
    Ok(quarticity_from(&a, cfg))
}

/// IV and quarticity pilots with ρ̂. A quarticity below
/// `QUARTICITY_FLOOR · IV²/L` is raised to that level.
pub fn pilots(z: &[f64], block_len: f64, cfg: &PreAvgConfig) -> Result<Pilots> {
    let a = preaverage(z, block_len, cfg)?;
    let iv = iv_from(&a, cfg);
    if !(iv > 0.0) {
        return Err(domain(format!("pilot integrated variance {iv:e} is not positive")));
    }
    let raw_q = quarticity_from(&a, cfg);
    let floor = QUARTICITY_FLOOR * iv * iv / block_len;
    let floored = raw_q < floor;
    if floored {
        warn!("pilot quarticity {raw_q:e} below floor, using {floor:e}");
    }
    let quarticity = raw_q.max(floor);
    let rho_raw = iv / (block_len * quarticity).sqrt();
    let rho = rho_raw.clamp(RHO_CLIP.0, RHO_CLIP.1);
    if rho != rho_raw {
        debug!("rho-hat {rho_raw} clipped to {rho}");
    }
    Ok(Pilots {
        iv,
        quarticity,
        rho,
        rho_raw,
        window: a.k,
        quarticity_floored: floored,
    })
}

/// ρ̂ of a block, clipped to [`RHO_CLIP`].
pub fn rho_hat(z: &[f64], block_len: f64, cfg: &PreAvgConfig) -> Result<f64> {
    pilots(z, block_len, cfg).map(|p| p.rho)
}

/// `c*(ρ̂)` for a block.
pub fn c_hat_star(z: &[f64], block_len: f64, cfg: &PreAvgConfig, profile: &KernelProfile) -> Result<f64> {
    kernels::c_star(rho_hat(z, block_len, cfg)?, profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn brownian(n: usize, len: f64, sigma: f64, noise: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dt = len / n as f64;
        let mut x = 0.0;
        let mut z = Vec::with_capacity(n + 1);
        for i in 0..=n {
            if i > 0 {
                let e: f64 = StandardNormal.sample(&mut rng);
                x += sigma * dt.sqrt() * e;
            }
            let e: f64 = StandardNormal.sample(&mut rng);
            z.push(x + noise * e);
        }
        z
    }

    #[test]
    fn triangular_constants() {
        let w = Weight::Triangular;
        let psi1 = quad::integrate_pieces(|x| w.deriv(x).powi(2), &[0.0, 0.5, 1.0], 1e-13);
        let psi2 = quad::integrate_pieces(|x| w.eval(x).powi(2), &[0.0, 0.5, 1.0], 1e-13);
        assert!((psi1 - w.psi1()).abs() < 1e-14);
        assert!((psi2 - w.psi2()).abs() < 1e-14);
        let (p11, p12, p22) = w.phi_constants();
        assert!((p11 - 1.0 / 6.0).abs() < 1e-9, "{p11}");
        assert!((p12 - 1.0 / 96.0).abs() < 1e-9, "{p12}");
        assert!((p22 - 151.0 / 80640.0).abs() < 1e-9, "{p22}");
    }

    #[test]
    fn window_lengths() {
        let cfg = PreAvgConfig::default();
        let day = 1.0 / 252.0;
        assert_eq!(cfg.window(day / 23_400.0), 30);
        assert_eq!(cfg.window(day / 46_800.0), 42);
        assert_eq!(cfg.window(day / 5_850.0), 15);
        assert_eq!(cfg.window(day), 2);
    }

    #[test]
    fn constant_prices() {
        let z = vec![4.2; 500];
        let cfg = PreAvgConfig::default();
        assert_eq!(noise_variance(&z).unwrap(), 0.0);
        assert_eq!(preavg_iv(&z, 1.0 / 252.0, &cfg).unwrap(), 0.0);
        assert_eq!(preavg_quarticity(&z, 1.0 / 252.0, &cfg).unwrap(), 0.0);
        assert!(pilots(&z, 1.0 / 252.0, &cfg).is_err());
    }

    #[test]
    fn too_short_block() {
        let z = brownian(40, 1.0 / 252.0 / 585.0, 1.0, 0.0, 1);
        let cfg = PreAvgConfig::default();
        assert!(matches!(preavg_iv(&z, 40.0 / 23_400.0 / 252.0, &cfg), Err(Error::TooShort { .. })));
        assert!(noise_variance(&[1.0]).is_err());
    }

    #[test]
    fn noiseless_brownian_day() {
        // oracle: IV = σ²·L, quarticity = σ⁴·L; averaged over seeds
        let cfg = PreAvgConfig::default();
        let len = 1.0 / 252.0;
        let reps = 40;
        let (mut iv, mut q) = (Vec::new(), Vec::new());
        for s in 0..reps {
            let z = brownian(23_400, len, 1.0, 0.0, 100 + s);
            iv.push(preavg_iv(&z, len, &cfg).unwrap() / len);
            q.push(preavg_quarticity(&z, len, &cfg).unwrap() / len);
        }
        for (v, name) in [(&iv, "iv"), (&q, "quarticity")] {
            let m = v.iter().sum::<f64>() / reps as f64;
            let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
            let se = sd / (reps as f64).sqrt();
            assert!((m - 1.0).abs() < 3.0 * se + 1e-3, "{name}: mean {m}, se {se}");
        }
    }

    #[test]
    fn pure_noise_variance() {
        // oracle: E[(ε_{j+1} - ε_j)²]/2 = a0²
        let a0 = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z: Vec<f64> = (0..100_000)
            .map(|_| a0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let v = noise_variance(&z).unwrap();
        // se of the mean of (Δε)²/2: Var((Δε)²) = 8a0⁴, lag-1 covariance 2a0⁴
        let se = (a0 * a0) * ((8.0 + 4.0) / 4.0 / 1e5f64).sqrt();
        assert!((v - a0 * a0).abs() < 3.0 * se, "{v}");
    }

    #[test]
    fn location_and_scale() {
        let cfg = PreAvgConfig::default();
        let len = 1.0 / 252.0;
        let z = brownian(5_000, len, 0.3, 1e-4, 3);
        let base = pilots(&z, len, &cfg).unwrap();
        let shifted: Vec<f64> = z.iter().map(|v| v + 3.7).collect();
        let p = pilots(&shifted, len, &cfg).unwrap();
        assert!(((p.iv - base.iv) / base.iv).abs() < 1e-9);
        assert!(((noise_variance(&shifted).unwrap() - noise_variance(&z).unwrap()) / noise_variance(&z).unwrap()).abs() < 1e-9);
        let lam = 2.5;
        let scaled: Vec<f64> = z.iter().map(|v| v * lam).collect();
        let p = pilots(&scaled, len, &cfg).unwrap();
        assert!((p.iv / (lam * lam) / base.iv - 1.0).abs() < 1e-10);
        assert!((p.quarticity / lam.powi(4) / base.quarticity - 1.0).abs() < 1e-10);
        assert!((p.rho - base.rho).abs() < 1e-10);
    }

    #[test]
    fn rho_within_clip_bounds() {
        let cfg = PreAvgConfig::default();
        for seed in 0..20 {
            let z = brownian(600, 1.0 / 252.0 / 39.0, 1.0, 0.0005, seed);
            if let Ok(p) = pilots(&z, 1.0 / 252.0 / 39.0, &cfg) {
                assert!(p.rho >= RHO_CLIP.0 && p.rho <= RHO_CLIP.1);
            }
        }
    }
}
