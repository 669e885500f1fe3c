//! Simulated efficient prices, volatility and noisy observations.
//!
//! The latent log-price follows `dX = μ dt + σ dW` with
//! `σ = σ_SV · σ_U`: a Heston variance (Euler, full truncation) times a
//! deterministic intraday U-shape that can drop once, at a uniform time τ,
//! by a fraction β of its pre-jump level. Observations are taken on a
//! regular grid or at random times and contaminated with Gaussian noise
//! whose variance is set per path from the requested noise-to-signal ratio.
//!
//! Time is in years; the canonical day is `T = 1/252`. Burn-in observations
//! are simulated before 0 and after `T` so estimators have edge data.

use std::io::Write;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::avar::{self, JumpMark, RobustInputs, VolFunctionals, VolPath};
use crate::error::{Error, Result};
use crate::series::{TickSeries, DAY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heston {
    /// Mean-reversion rate (1/year).
    pub alpha: f64,
    /// Long-run variance.
    pub sigma_bar2: f64,
    /// Volatility of variance.
    pub delta: f64,
    /// Correlation between price and variance shocks.
    pub phi: f64,
}

/// `σ_U(t) = C + A e^{-a t/T} + D e^{-b (1 - t/T)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UShape {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "A")]
    pub a_amp: f64,
    #[serde(rename = "D")]
    pub d_amp: f64,
    pub a: f64,
    pub b: f64,
}

impl UShape {
    /// Value at `frac = t/T`, clamped to the session.
    pub fn at(&self, frac: f64) -> f64 {
        let u = frac.clamp(0.0, 1.0);
        self.c + self.a_amp * (-self.a * u).exp() + self.d_amp * (-self.b * (1.0 - u)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolJump {
    /// Fractional drop of the U-shape at τ.
    pub beta: f64,
    pub t0_frac: f64,
    pub t1_frac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpSize {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceJumps {
    /// Jumps per year.
    pub intensity: f64,
    pub size: JumpSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    /// Noise-to-signal ratio `a0²/sqrt(T ∫σ⁴)`.
    pub xi2: f64,
}

/// Sampling intensity process α for random observation times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AlphaSpec {
    Constant { value: f64 },
    /// `dα = κ(m - α)dt + ν sqrt(α) dB`, floored at `m/100`.
    Cir { kappa: f64, mean: f64, vol: f64, start: f64 },
}

/// Distribution of the i.i.d. multipliers `U_i`, all with mean 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UDist {
    Exponential,
    /// Uniform on `[0.5, 1.5]`.
    Uniform,
    /// Always 1.
    Unit,
}

impl UDist {
    fn draw<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            UDist::Exponential => Exp1.sample(rng),
            UDist::Uniform => rng.random_range(0.5..1.5),
            UDist::Unit => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum Sampling {
    Regular { n_obs: usize },
    /// `t_i = t_{i-1} + Δ α_{t_{i-1}} U_i` with `Δ = T/n_obs`.
    Random { n_obs: usize, alpha: AlphaSpec, u: UDist },
}

impl Sampling {
    pub fn n_obs(&self) -> usize {
        match *self {
            Sampling::Regular { n_obs } | Sampling::Random { n_obs, .. } => n_obs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Session length in years.
    pub horizon: f64,
    pub n_euler: usize,
    pub mu: f64,
    pub heston: Heston,
    pub ushape: UShape,
    #[serde(default)]
    pub vol_jump: Option<VolJump>,
    #[serde(default)]
    pub price_jump: Option<PriceJumps>,
    pub noise: Noise,
    pub sampling: Sampling,
    /// Extra observations simulated before 0 and after `T`.
    pub burn: usize,
}

pub const PRESETS: [&str; 3] = ["model1", "model2", "model3"];

impl ModelConfig {
    /// Built-in designs: `model1` (steep U), `model2` (normal U with one
    /// volatility drop anywhere in the day), `model3` (steep U, drop in
    /// `[0.05T, 0.7T]`).
    pub fn preset(name: &str) -> Result<Self> {
        let steep = UShape {
            c: 0.83,
            a_amp: 1.26,
            d_amp: 0.42,
            a: 10.0,
            b: 10.0,
        };
        let normal = UShape {
            c: 0.75,
            a_amp: 0.25,
            d_amp: 0.89,
            a: 10.0,
            b: 10.0,
        };
        let (ushape, vol_jump) = match name.to_ascii_lowercase().as_str() {
            "model1" => (steep, None),
            "model2" => (
                normal,
                Some(VolJump {
                    beta: 0.5,
                    t0_frac: 0.0,
                    t1_frac: 1.0,
                }),
            ),
            "model3" => (
                steep,
                Some(VolJump {
                    beta: 0.5,
                    t0_frac: 0.05,
                    t1_frac: 0.7,
                }),
            ),
            other => return Err(Error::Config(format!("unknown model preset '{other}'"))),
        };
        Ok(ModelConfig {
            horizon: DAY,
            n_euler: 46_800,
            mu: 0.03,
            heston: Heston {
                alpha: 5.0,
                sigma_bar2: 0.1,
                delta: 0.4,
                phi: -0.75,
            },
            ushape,
            vol_jump,
            price_jump: None,
            noise: Noise { xi2: 0.001 },
            sampling: Sampling::Regular { n_obs: 46_800 },
            burn: 1000,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.horizon > 0.0) {
            return bad(format!("horizon {} must be positive", self.horizon));
        }
        let n_obs = self.sampling.n_obs();
        if n_obs < 2 || self.n_euler < n_obs {
            return bad(format!("need 2 <= n_obs ({n_obs}) <= n_euler ({})", self.n_euler));
        }
        if self.n_euler % n_obs != 0 {
            return bad(format!("n_obs ({n_obs}) must divide n_euler ({})", self.n_euler));
        }
        let h = &self.heston;
        if !(h.alpha > 0.0 && h.sigma_bar2 > 0.0 && h.delta >= 0.0 && h.phi.abs() <= 1.0) {
            return bad(format!("invalid Heston parameters {h:?}"));
        }
        if let Some(j) = &self.vol_jump {
            if !(j.beta >= 0.0 && 0.0 <= j.t0_frac && j.t0_frac <= j.t1_frac && j.t1_frac <= 1.0) {
                return bad(format!("invalid volatility jump {j:?}"));
            }
        }
        if let Some(p) = &self.price_jump {
            if !(p.intensity >= 0.0 && p.size.sd >= 0.0) {
                return bad(format!("invalid price jumps {p:?}"));
            }
        }
        if !(self.noise.xi2 >= 0.0) {
            return bad(format!("noise-to-signal ratio {} must be non-negative", self.noise.xi2));
        }
        if let Sampling::Random { alpha, .. } = &self.sampling {
            let ok = match *alpha {
                AlphaSpec::Constant { value } => value > 0.0,
                AlphaSpec::Cir { kappa, mean, vol, start } => kappa >= 0.0 && mean > 0.0 && vol >= 0.0 && start > 0.0,
            };
            if !ok {
                return bad(format!("invalid sampling intensity {alpha:?}"));
            }
        }
        Ok(())
    }
}

/// Ground-truth functionals over `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub iv: f64,
    pub tricity: f64,
    pub quarticity: f64,
    pub qv: f64,
    pub rho: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceJump {
    pub time: f64,
    pub size: f64,
    /// First Euler index carrying the jump.
    pub euler_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBundle {
    pub horizon: f64,
    pub dt: f64,
    pub euler_times: Vec<f64>,
    /// Latent log-price on the Euler grid.
    pub x: Vec<f64>,
    /// Spot volatility on the Euler grid.
    pub sigma: Vec<f64>,
    /// Sampling intensity on the Euler grid (random sampling only).
    pub alpha: Option<Vec<f64>>,
    /// Euler indices `first..last` whose left points lie in `[0, T)`.
    pub in_sample: (usize, usize),
    pub obs_times: Vec<f64>,
    /// Euler index of the previous grid point for each observation.
    pub obs_index: Vec<usize>,
    /// Observed noisy log-prices.
    pub z: Vec<f64>,
    pub a0: f64,
    pub jumps: Vec<PriceJump>,
    pub vol_jump_time: Option<f64>,
    pub truth: Truth,
}

fn alpha_value(spec: &AlphaSpec) -> Option<f64> {
    match *spec {
        AlphaSpec::Constant { value } => Some(value),
        AlphaSpec::Cir { .. } => None,
    }
}

/// Simulate one path with a seeded ChaCha8 generator.
pub fn simulate(config: &ModelConfig, seed: u64) -> Result<PathBundle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with(config, &mut rng)
}

/// Simulate one path drawing from `rng`: latent path, then price jumps, then
/// noise.
pub fn simulate_with<R: Rng>(config: &ModelConfig, rng: &mut R) -> Result<PathBundle> {
    let mut b = simulate_latent(config, rng)?;
    if let Some(pj) = &config.price_jump {
        add_price_jumps(&mut b, pj.intensity, pj.size, rng.random())?;
    }
    apply_noise(&mut b, config.noise.xi2, rng)?;
    Ok(b)
}

/// Latent path and observation times; `z` equals the latent price at the
/// observation times and `a0 = 0`.
pub fn simulate_latent<R: Rng>(config: &ModelConfig, rng: &mut R) -> Result<PathBundle> {
    config.validate()?;
    let t_len = config.horizon;
    let n = config.n_euler;
    let n_obs = config.sampling.n_obs();
    let step = n / n_obs;
    let burn_steps = config.burn * step;
    let total = n + 2 * burn_steps;
    let dt = t_len / n as f64;
    let sdt = dt.sqrt();
    let h = config.heston;

    let times: Vec<f64> = (0..=total).map(|k| (k as f64 - burn_steps as f64) * dt).collect();

    let mut v = if h.delta > 0.0 {
        let shape = 2.0 * h.alpha * h.sigma_bar2 / (h.delta * h.delta);
        let scale = h.delta * h.delta / (2.0 * h.alpha);
        Gamma::new(shape, scale)
            .map_err(|e| Error::Config(format!("variance law: {e}")))?
            .sample(rng)
    } else {
        h.sigma_bar2
    };

    let (jump_k, jump_drop) = match &config.vol_jump {
        Some(j) if j.beta > 0.0 => {
            let frac: f64 = if j.t1_frac > j.t0_frac {
                rng.random_range(j.t0_frac..j.t1_frac)
            } else {
                j.t0_frac
            };
            let k = burn_steps + (frac * n as f64).round() as usize;
            let frac_k = (k - burn_steps) as f64 / n as f64;
            (Some(k), j.beta * config.ushape.at(frac_k))
        }
        _ => (None, 0.0),
    };

    let mut alpha_state = match &config.sampling {
        Sampling::Random { alpha, .. } => Some(match *alpha {
            AlphaSpec::Constant { value } => value,
            AlphaSpec::Cir { start, .. } => start,
        }),
        Sampling::Regular { .. } => None,
    };
    let alpha_spec = match &config.sampling {
        Sampling::Random { alpha, .. } => Some(*alpha),
        _ => None,
    };

    let rho_c = (1.0 - h.phi * h.phi).max(0.0).sqrt();
    let mut x = Vec::with_capacity(total + 1);
    let mut sigma = Vec::with_capacity(total + 1);
    let mut alpha_path = alpha_state.map(|_| Vec::with_capacity(total + 1));
    let mut xk = 0.0;
    let mut negative_u = false;
    for k in 0..=total {
        let frac = (k as f64 - burn_steps as f64) / n as f64;
        let mut u = config.ushape.at(frac);
        if matches!(jump_k, Some(jk) if k >= jk) {
            u -= jump_drop;
        }
        negative_u |= u < 0.0;
        let s = v.max(0.0).sqrt() * u;
        x.push(xk);
        sigma.push(s);
        if let (Some(a), Some(path)) = (alpha_state, alpha_path.as_mut()) {
            path.push(a);
        }
        if k == total {
            break;
        }
        let z1: f64 = StandardNormal.sample(rng);
        xk += config.mu * dt + s * sdt * z1;
        if h.delta > 0.0 {
            let z2: f64 = StandardNormal.sample(rng);
            let vp = v.max(0.0);
            v += h.alpha * (h.sigma_bar2 - vp) * dt + h.delta * vp.sqrt() * sdt * (h.phi * z1 + rho_c * z2);
        }
        if let (Some(a), Some(AlphaSpec::Cir { kappa, mean, vol, .. })) = (alpha_state.as_mut(), alpha_spec) {
            let z3: f64 = StandardNormal.sample(rng);
            let ap = a.max(0.0);
            *a = (*a + kappa * (mean - ap) * dt + vol * ap.sqrt() * sdt * z3).max(mean / 100.0);
        }
    }
    if negative_u {
        warn!("U-shape volatility factor went negative on this path");
    }

    let (obs_times, obs_index) = match &config.sampling {
        Sampling::Regular { .. } => {
            let idx: Vec<usize> = (0..=total).step_by(step).collect();
            (idx.iter().map(|&k| times[k]).collect::<Vec<_>>(), idx)
        }
        Sampling::Random { u, .. } => {
            let delta = t_len / n_obs as f64;
            let alpha = alpha_path.as_ref().expect("random sampling keeps alpha");
            let (mut ts, mut ix) = (Vec::new(), Vec::new());
            let end = times[total];
            let mut t = times[0];
            let const_alpha = alpha_spec.and_then(|a| alpha_value(&a));
            while t <= end {
                let k = (((t - times[0]) / dt).floor() as usize).min(total);
                if ts.last().map_or(true, |&p| t > p) {
                    ts.push(t);
                    ix.push(k);
                }
                let a = const_alpha.unwrap_or(alpha[k]);
                t += delta * a * u.draw(rng);
            }
            (ts, ix)
        }
    };

    let first = burn_steps;
    let last = burn_steps + n;
    let f = VolFunctionals::from_sigma(&sigma[first..last], dt, 0.0);
    let m = avar::measures(&f)?;
    let z = obs_index.iter().map(|&k| x[k]).collect();
    Ok(PathBundle {
        horizon: t_len,
        dt,
        euler_times: times,
        x,
        sigma,
        alpha: alpha_path,
        in_sample: (first, last),
        obs_times,
        obs_index,
        z,
        a0: 0.0,
        jumps: Vec::new(),
        vol_jump_time: jump_k.map(|k| (k - burn_steps) as f64 * dt),
        truth: Truth {
            iv: f.iv,
            tricity: f.tricity,
            quarticity: f.quarticity,
            qv: f.iv,
            rho: m.rho,
            kappa: m.kappa,
        },
    })
}

/// Sets `a0² = xi2 · sqrt(T ∫σ⁴)` and redraws the noise on every observation.
pub fn apply_noise<R: Rng>(bundle: &mut PathBundle, xi2: f64, rng: &mut R) -> Result<()> {
    if !(xi2 >= 0.0) {
        return Err(Error::Config(format!("noise-to-signal ratio {xi2} must be non-negative")));
    }
    bundle.a0 = (xi2 * (bundle.horizon * bundle.truth.quarticity).sqrt()).sqrt();
    for (zi, &k) in bundle.z.iter_mut().zip(&bundle.obs_index) {
        let e: f64 = StandardNormal.sample(rng);
        *zi = bundle.x[k] + bundle.a0 * e;
    }
    Ok(())
}

/// Adds one price jump of `size` at `time ∈ [0, T)`, effective from the next
/// Euler grid point.
pub fn add_jump(bundle: &mut PathBundle, time: f64, size: f64) -> Result<()> {
    if !(0.0..bundle.horizon).contains(&time) {
        return Err(Error::Config(format!("jump time {time} outside [0, T)")));
    }
    let k = bundle.in_sample.0 + (time / bundle.dt).ceil() as usize;
    let k = k.min(bundle.in_sample.1);
    bundle.x[k..].iter_mut().for_each(|v| *v += size);
    for (zi, &ki) in bundle.z.iter_mut().zip(&bundle.obs_index) {
        if ki >= k {
            *zi += size;
        }
    }
    bundle.truth.qv += size * size;
    bundle.jumps.push(PriceJump {
        time,
        size,
        euler_index: k,
    });
    Ok(())
}

/// Compound-Poisson price jumps with normal sizes; returns the jump count.
pub fn add_price_jumps(bundle: &mut PathBundle, intensity: f64, size: JumpSize, seed: u64) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if !(intensity >= 0.0) {
        return Err(Error::Config(format!("jump intensity {intensity} must be non-negative")));
    }
    let lambda = intensity * bundle.horizon;
    if lambda == 0.0 {
        return Ok(0);
    }
    let count = Poisson::new(lambda)
        .map_err(|e| Error::Config(format!("jump count law: {e}")))?
        .sample(&mut rng) as usize;
    let sizes = Normal::new(size.mean, size.sd).map_err(|e| Error::Config(format!("jump size law: {e}")))?;
    for _ in 0..count {
        let t = rng.random_range(0.0..bundle.horizon);
        let j = sizes.sample(&mut rng);
        add_jump(bundle, t, j)?;
    }
    Ok(count)
}

/// Keeps every `factor`-th observation counted from the first in-sample one
/// (burn observations included on the same stride).
pub fn thin(bundle: &PathBundle, factor: usize) -> Result<PathBundle> {
    if factor == 0 {
        return Err(Error::Config("thinning factor must be positive".into()));
    }
    let series = bundle.series();
    let w = series.sample_window()?;
    if w.n_returns() % factor != 0 {
        return Err(Error::Config(format!(
            "thinning factor {factor} does not divide the {} in-sample returns",
            w.n_returns()
        )));
    }
    let keep: Vec<usize> = (0..bundle.obs_times.len())
        .filter(|&i| (i as i64 - w.lo as i64).rem_euclid(factor as i64) == 0)
        .collect();
    let mut out = bundle.clone();
    out.obs_times = keep.iter().map(|&i| bundle.obs_times[i]).collect();
    out.obs_index = keep.iter().map(|&i| bundle.obs_index[i]).collect();
    out.z = keep.iter().map(|&i| bundle.z[i]).collect();
    Ok(out)
}

impl PathBundle {
    /// Observed series on `[0, T]`, burn observations kept as edge data.
    pub fn series(&self) -> TickSeries {
        TickSeries {
            times: self.obs_times.clone(),
            values: self.z.clone(),
            start: 0.0,
            end: self.horizon,
            date: None,
        }
    }

    /// In-sample σ path with this bundle's noise level.
    pub fn vol_path(&self) -> VolPath<'_> {
        VolPath {
            sigma: &self.sigma[self.in_sample.0..self.in_sample.1],
            dt: self.dt,
            a0: self.a0,
        }
    }

    /// Functionals over `[0, T]`, including squared jumps in `qv`.
    pub fn functionals(&self) -> VolFunctionals {
        let mut f = self.vol_path().total();
        f.qv = self.truth.qv;
        f
    }

    /// Functionals on `blocks` equal blocks; a jump at `t` counts in the
    /// block `(T_{i-1}, T_i]` containing it.
    pub fn block_functionals(&self, blocks: usize) -> Vec<VolFunctionals> {
        let mut out = self.vol_path().blocks(blocks);
        let len = self.horizon / blocks as f64;
        for j in &self.jumps {
            let i = ((j.time / len).ceil() as usize).clamp(1, blocks) - 1;
            out[i].qv += j.size * j.size;
        }
        out
    }

    /// Latent price at each observation.
    pub fn obs_x(&self) -> Vec<f64> {
        self.obs_index.iter().map(|&k| self.x[k]).collect()
    }

    /// Spot volatility at each observation.
    pub fn obs_sigma(&self) -> Vec<f64> {
        self.obs_index.iter().map(|&k| self.sigma[k]).collect()
    }

    /// Number of in-sample returns.
    pub fn n_returns(&self) -> usize {
        self.series().n_returns()
    }

    /// Jump marks for the large-`B` limit formulas.
    pub fn jump_marks(&self) -> Vec<JumpMark> {
        let alpha = |k: usize| self.alpha.as_ref().map_or(1.0, |a| a[k]);
        self.jumps
            .iter()
            .map(|j| {
                let k = j.euler_index;
                JumpMark {
                    size: j.size,
                    sigma_before: self.sigma[k - 1],
                    sigma_after: self.sigma[k],
                    alpha_before: alpha(k - 1),
                    alpha_after: alpha(k),
                }
            })
            .collect()
    }

    /// Writes `time,z,x,sigma` rows for every observation.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "z", "x", "sigma"])?;
        for (i, &k) in self.obs_index.iter().enumerate() {
            w.write_record(&[
                self.obs_times[i].to_string(),
                self.z[i].to_string(),
                self.x[k].to_string(),
                self.sigma[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Owned inputs for [`avar::robust_limits`].
pub struct RobustData {
    pub sigma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub dt: f64,
    pub a0: f64,
    pub jumps: Vec<JumpMark>,
}

impl RobustData {
    pub fn from_bundle(b: &PathBundle) -> Self {
        let (lo, hi) = b.in_sample;
        RobustData {
            sigma: b.sigma[lo..hi].to_vec(),
            alpha: b.alpha.as_ref().map_or_else(|| vec![1.0; hi - lo], |a| a[lo..hi].to_vec()),
            dt: b.dt,
            a0: b.a0,
            jumps: b.jump_marks(),
        }
    }

    pub fn inputs(&self) -> RobustInputs<'_> {
        RobustInputs {
            sigma: &self.sigma,
            alpha: &self.alpha,
            dt: self.dt,
            a0: self.a0,
            jumps: &self.jumps,
        }
    }
}

/// Observation times `0 = t_0 < t_1 < …` up to `T`: the regular grid `iΔ`,
/// or the random recursion with α simulated on a grid of `4n` steps.
pub fn sample_times(scheme: &Sampling, horizon: f64, seed: u64) -> Result<Vec<f64>> {
    let n = scheme.n_obs();
    if n < 2 {
        return Err(Error::Config("need at least 2 observations".into()));
    }
    let delta = horizon / n as f64;
    match scheme {
        Sampling::Regular { .. } => Ok((0..=n).map(|i| i as f64 * delta).collect()),
        Sampling::Random { alpha, u, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let grid = 4 * n;
            let dt = horizon / grid as f64;
            let path: Vec<f64> = match *alpha {
                AlphaSpec::Constant { value } => vec![value; grid + 1],
                AlphaSpec::Cir { kappa, mean, vol, start } => {
                    let mut a = start;
                    (0..=grid)
                        .map(|_| {
                            let cur = a;
                            let z: f64 = StandardNormal.sample(&mut rng);
                            a = (a + kappa * (mean - a) * dt + vol * a.max(0.0).sqrt() * dt.sqrt() * z).max(mean / 100.0);
                            cur
                        })
                        .collect()
                }
            };
            let mut t = 0.0;
            let mut out = Vec::with_capacity(n + 1);
            while t <= horizon * (1.0 + 1e-12) {
                out.push(t);
                let k = ((t / dt) as usize).min(grid);
                t += delta * path[k] * u.draw(&mut rng);
            }
            Ok(out)
        }
    }
}

/// Deterministic σ path `σ_U(t) - β σ_U(τ) 1{t ≥ τ}` on `n` left points of
/// `[0, 1)`, jump placed at the grid point nearest to `tau_frac`.
pub fn ushape_jump_path(ushape: &UShape, beta: f64, tau_frac: f64, n: usize) -> Vec<f64> {
    let kj = (tau_frac * n as f64).round() as usize;
    let drop = beta * ushape.at(kj as f64 / n as f64);
    (0..n)
        .map(|k| {
            let u = ushape.at(k as f64 / n as f64);
            if k >= kj {
                u - drop
            } else {
                u
            }
        })
        .collect()
}
