//! Monte Carlo study of the blocked estimators.
//!
//! Each replication simulates one latent day, adds noise at every requested
//! noise level, thins to every requested sample size and runs every
//! (estimator, B) pair, recording the infeasible Z (true AVAR), the feasible
//! Z (plug-in AVAR) and the squared error against the efficiency bound.

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_estimator, EstimatorSettings};
use crate::avar::{self, Estimator};
use crate::error::{Error, Result};
use crate::simulate::{self, ModelConfig, PathBundle, Sampling};

/// Lower-tail probabilities (percent) at which Z coverage is reported.
pub const COVERAGE_LEVELS: [f64; 6] = [0.5, 2.5, 5.0, 95.0, 97.5, 99.5];

/// Standard normal quantiles at [`COVERAGE_LEVELS`].
const NORMAL_QUANTILES: [f64; 6] = [
    -2.575_829_303_548_901,
    -1.959_963_984_540_054,
    -1.644_853_626_951_472_2,
    1.644_853_626_951_472_2,
    1.959_963_984_540_054,
    2.575_829_303_548_901,
];

/// Default share of failed replications tolerated per cell.
pub const DEFAULT_MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Preset(String),
    Custom(Box<ModelConfig>),
}

impl ModelSpec {
    pub fn resolve(&self) -> Result<ModelConfig> {
        match self {
            ModelSpec::Preset(name) => ModelConfig::preset(name),
            ModelSpec::Custom(c) => Ok(**c),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ModelSpec::Preset(name) => name.clone(),
            ModelSpec::Custom(_) => "custom".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub model: ModelSpec,
    pub replications: usize,
    pub seed: u64,
    /// Numbers of returns; each must divide the simulated observation count.
    pub sizes: Vec<usize>,
    pub xi2: Vec<f64>,
    pub blocks: Vec<usize>,
    pub estimators: Vec<Estimator>,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub settings: EstimatorSettings,
    #[serde(default = "default_failure_rate")]
    pub max_failure_rate: f64,
}

fn default_failure_rate() -> f64 {
    DEFAULT_MAX_FAILURE_RATE
}

impl McConfig {
    /// Desk-scale defaults for a preset: 2000 replications, `n = 23 400`,
    /// `ξ² = 0.001`, B = 1, 2, 4, 6, 8, TH2 kernel and QMLE.
    pub fn desk(model: &str) -> Self {
        McConfig {
            model: ModelSpec::Preset(model.into()),
            replications: 2000,
            seed: 1,
            sizes: vec![23_400],
            xi2: vec![0.001],
            blocks: vec![1, 2, 4, 6, 8],
            estimators: vec![Estimator::Rk(crate::kernels::KernelFamily::TukeyHanning(2)), Estimator::Qmle],
            workers: None,
            settings: EstimatorSettings::default(),
            max_failure_rate: DEFAULT_MAX_FAILURE_RATE,
        }
    }

    pub fn validate(&self) -> Result<ModelConfig> {
        let bad = |m: String| Err(Error::Config(m));
        let model = self.model.resolve()?;
        model.validate()?;
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.sizes.is_empty() || self.xi2.is_empty() || self.blocks.is_empty() || self.estimators.is_empty() {
            return bad("sizes, xi2, blocks and estimators must be non-empty".into());
        }
        let base = model.sampling.n_obs();
        match model.sampling {
            Sampling::Regular { .. } => {
                if let Some(n) = self.sizes.iter().find(|&&n| n == 0 || base % n != 0) {
                    return bad(format!("sample size {n} does not divide {base}"));
                }
            }
            Sampling::Random { .. } => {
                if self.sizes != [base] {
                    return bad(format!("random sampling supports only its own size {base}"));
                }
            }
        }
        if self.xi2.iter().any(|&x| !(x > 0.0)) {
            return bad("noise-to-signal ratios must be positive".into());
        }
        if self.blocks.contains(&0) {
            return bad("block counts must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return bad(format!("failure rate {} outside [0, 1]", self.max_failure_rate));
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        Ok(model)
    }
}

/// Moments and tail coverage of a Z statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZStats {
    pub count: usize,
    pub mean: f64,
    /// Standard deviation with divisor `count`.
    pub sd: f64,
    pub rmse: f64,
    /// Percent of draws at or below the normal quantile of each level.
    pub coverage: [f64; 6],
}

impl ZStats {
    fn from_draws(z: &[f64]) -> Option<ZStats> {
        if z.is_empty() {
            return None;
        }
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let ms = z.iter().map(|v| v * v).sum::<f64>() / n;
        let mut coverage = [0.0; 6];
        for (c, q) in coverage.iter_mut().zip(NORMAL_QUANTILES) {
            *c = 100.0 * z.iter().filter(|&&v| v <= q).count() as f64 / n;
        }
        Some(ZStats {
            count: z.len(),
            mean,
            sd: var.sqrt(),
            rmse: ms.sqrt(),
            coverage,
        })
    }
}

/// Statistics for one (estimator, B, n, ξ²) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub estimator: Estimator,
    pub blocks: usize,
    pub n: usize,
    pub xi2: f64,
    pub used: usize,
    pub failed: usize,
    /// QMLE replications with at least one block fit not converged (kept).
    pub nonconverged: usize,
    pub z: Option<ZStats>,
    pub z_feasible: Option<ZStats>,
    /// `E_M[n^{1/2}(est - QV)²/bound] - 1`.
    pub empirical_loss: f64,
    /// `E_M[AVAR_B/bound - 1]` from the true functionals.
    pub theoretical_loss: f64,
    /// `L̆ + 1`.
    pub decomposition_lhs: f64,
    /// `(L̃ + 1) · Var_M[Z]`.
    pub decomposition_rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSummary {
    pub rho_mean: f64,
    pub rho_sd: f64,
    pub kappa_mean: f64,
    pub kappa_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub schema_version: String,
    pub model: String,
    pub replications: usize,
    pub seed: u64,
    pub truth: TruthSummary,
    pub cells: Vec<McCell>,
}

#[derive(Debug, Clone, Copy)]
struct Draw {
    z: f64,
    z_feasible: Option<f64>,
    sq_ratio: f64,
    theo_loss: f64,
    converged: bool,
}

type CellDraw = std::result::Result<Draw, String>;

struct Replication {
    rho: f64,
    kappa: f64,
    draws: Vec<CellDraw>,
}

/// Replication-specific generator: the base seed selects the key, the
/// replication index selects the ChaCha stream.
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

fn cell_count(cfg: &McConfig) -> usize {
    cfg.xi2.len() * cfg.sizes.len() * cfg.estimators.len() * cfg.blocks.len()
}

fn one_cell(bundle: &PathBundle, series: &crate::series::TickSeries, est: Estimator, b: usize, cfg: &McConfig) -> CellDraw {
    let e = run_estimator(series, est, b, &cfg.settings).map_err(|e| e.to_string())?;
    let truth = avar::avar_blocked(&bundle.block_functionals(b), &bundle.functionals(), est).map_err(|e| e.to_string())?;
    let n = series.n_returns() as f64;
    let err = n.powf(0.25) * (e.total - bundle.truth.qv);
    Ok(Draw {
        z: err / truth.avar.sqrt(),
        z_feasible: e.avar.filter(|&v| v > 0.0).map(|v| err / v.sqrt()),
        sq_ratio: err * err / truth.bound,
        theo_loss: truth.loss,
        converged: e.converged,
    })
}

fn replicate(model: &ModelConfig, cfg: &McConfig, rep: usize) -> Result<Replication> {
    let mut rng = replication_rng(cfg.seed, rep);
    let mut latent = simulate::simulate_latent(model, &mut rng)?;
    if let Some(pj) = &model.price_jump {
        simulate::add_price_jumps(&mut latent, pj.intensity, pj.size, rng.random())?;
    }
    let base = model.sampling.n_obs();
    let mut draws = Vec::with_capacity(cell_count(cfg));
    for &xi2 in &cfg.xi2 {
        let mut bundle = latent.clone();
        simulate::apply_noise(&mut bundle, xi2, &mut rng)?;
        for &n in &cfg.sizes {
            let thinned = match model.sampling {
                Sampling::Regular { .. } => simulate::thin(&bundle, base / n)?,
                Sampling::Random { .. } => bundle.clone(),
            };
            let series = thinned.series();
            for &est in &cfg.estimators {
                for &b in &cfg.blocks {
                    draws.push(one_cell(&thinned, &series, est, b, cfg));
                }
            }
        }
    }
    Ok(Replication {
        rho: latent.truth.rho,
        kappa: latent.truth.kappa,
        draws,
    })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

/// Runs the study. Results depend only on the configuration and seed: each
/// replication owns its generator and aggregation is in replication order.
pub fn run_mc(cfg: &McConfig) -> Result<McReport> {
    let model = cfg.validate()?;
    let work = || -> Vec<Result<Replication>> {
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| replicate(&model, cfg, rep))
            .collect()
    };
    let reps = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let reps: Vec<Replication> = reps.into_iter().collect::<Result<_>>()?;
    info!("{} replications simulated", reps.len());

    let rho: Vec<f64> = reps.iter().map(|r| r.rho).collect();
    let kappa: Vec<f64> = reps.iter().map(|r| r.kappa).collect();
    let (rho_mean, rho_sd) = mean_sd(&rho);
    let (kappa_mean, kappa_sd) = mean_sd(&kappa);

    let mut cells = Vec::with_capacity(cell_count(cfg));
    let mut idx = 0;
    for &xi2 in &cfg.xi2 {
        for &n in &cfg.sizes {
            for &estimator in &cfg.estimators {
                for &blocks in &cfg.blocks {
                    let mut ok = Vec::with_capacity(reps.len());
                    let mut failed = 0;
                    for r in &reps {
                        match &r.draws[idx] {
                            Ok(d) => ok.push(*d),
                            Err(e) => {
                                failed += 1;
                                warn!("{estimator} B={blocks} n={n} xi2={xi2}: {e}");
                            }
                        }
                    }
                    idx += 1;
                    if failed as f64 > cfg.max_failure_rate * reps.len() as f64 {
                        return Err(Error::ReplicationFailures {
                            failed,
                            total: reps.len(),
                        });
                    }
                    cells.push(summarize(estimator, blocks, n, xi2, &ok, failed));
                }
            }
        }
    }
    Ok(McReport {
        schema_version: super::report::SCHEMA_VERSION.into(),
        model: cfg.model.label(),
        replications: cfg.replications,
        seed: cfg.seed,
        truth: TruthSummary {
            rho_mean,
            rho_sd,
            kappa_mean,
            kappa_sd,
        },
        cells,
    })
}

fn summarize(estimator: Estimator, blocks: usize, n: usize, xi2: f64, ok: &[Draw], failed: usize) -> McCell {
    let z: Vec<f64> = ok.iter().map(|d| d.z).collect();
    let zf: Vec<f64> = ok.iter().filter_map(|d| d.z_feasible).collect();
    let m = ok.len().max(1) as f64;
    let empirical_loss = ok.iter().map(|d| d.sq_ratio).sum::<f64>() / m - 1.0;
    let theoretical_loss = ok.iter().map(|d| d.theo_loss).sum::<f64>() / m;
    let zs = ZStats::from_draws(&z);
    let var_z = zs.as_ref().map_or(f64::NAN, |s| s.sd * s.sd);
    McCell {
        estimator,
        blocks,
        n,
        xi2,
        used: ok.len(),
        failed,
        nonconverged: ok.iter().filter(|d| !d.converged).count(),
        z: zs,
        z_feasible: ZStats::from_draws(&zf),
        empirical_loss,
        theoretical_loss,
        decomposition_lhs: empirical_loss + 1.0,
        decomposition_rhs: (theoretical_loss + 1.0) * var_z,
    }
}

impl McReport {
    pub fn cell(&self, estimator: Estimator, blocks: usize, n: usize, xi2: f64) -> Option<&McCell> {
        self.cells
            .iter()
            .find(|c| c.estimator == estimator && c.blocks == blocks && c.n == n && c.xi2 == xi2)
    }
}
