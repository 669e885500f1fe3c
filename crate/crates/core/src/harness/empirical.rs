//! Per-day estimation over a panel of trading days and cross-day summaries.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_estimator, EstimatorSettings};
use crate::avar::Estimator;
use crate::error::{Error, Result};
use crate::series::TickSeries;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalConfig {
    pub blocks: Vec<usize>,
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub settings: EstimatorSettings,
}

impl Default for EmpiricalConfig {
    fn default() -> Self {
        EmpiricalConfig {
            blocks: vec![1, 2, 4, 6, 8],
            estimators: vec![Estimator::Rk(crate::kernels::KernelFamily::TukeyHanning(2)), Estimator::Qmle],
            settings: EstimatorSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayCell {
    pub estimator: Estimator,
    pub blocks: usize,
    pub estimate: f64,
    pub avar: Option<f64>,
    /// `estimate ± 1.96 n^{-1/4} sqrt(AVAR)`.
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Mean pilot ρ̂ over the day's blocks.
    pub rho_hat_mean: Option<f64>,
    /// Largest block ρ̂.
    pub rho_hat_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayReport {
    pub date: Option<String>,
    pub n_returns: usize,
    /// Reason the day is excluded from cross-day tables.
    pub flag: Option<String>,
    pub cells: Vec<DayCell>,
}

impl DayReport {
    pub fn cell(&self, estimator: Estimator, blocks: usize) -> Option<&DayCell> {
        self.cells.iter().find(|c| c.estimator == estimator && c.blocks == blocks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub blocks: usize,
    /// Mean of block ρ̂ across days and blocks.
    pub rho_hat_mean: f64,
    /// Mean over days of `AVAR_B / AVAR_1`, per estimator in config order.
    pub avar_ratio: Vec<f64>,
    /// Largest per-day ratio, per estimator.
    pub avar_ratio_max: Vec<f64>,
    /// `corr(Q̃_B - Q, K̃_B - K)` across days, when both a kernel and the
    /// QMLE are configured.
    pub correction_corr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub blocks: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReport {
    pub schema_version: String,
    pub estimators: Vec<Estimator>,
    pub blocks: Vec<usize>,
    pub days: Vec<DayReport>,
    pub used_days: usize,
    pub by_blocks: Vec<BlockSummary>,
    pub summaries: Vec<EstimatorSummary>,
    /// Row/column labels `"<estimator>/B"` of `correlation`.
    pub labels: Vec<String>,
    pub correlation: Vec<Vec<f64>>,
}

fn estimate_day(day: &TickSeries, cfg: &EmpiricalConfig) -> DayReport {
    let n = day.n_returns();
    let mut rep = DayReport {
        date: day.date.clone(),
        n_returns: n,
        flag: None,
        cells: Vec::new(),
    };
    let constant = match day.sample_window() {
        Ok(w) => day.window_values(w).windows(2).all(|v| v[0] == v[1]),
        Err(e) => {
            rep.flag = Some(e.to_string());
            return rep;
        }
    };
    if constant {
        rep.flag = Some("constant prices".into());
        for &estimator in &cfg.estimators {
            for &blocks in &cfg.blocks {
                rep.cells.push(DayCell {
                    estimator,
                    blocks,
                    estimate: 0.0,
                    avar: Some(0.0),
                    ci_low: Some(0.0),
                    ci_high: Some(0.0),
                    rho_hat_mean: None,
                    rho_hat_max: None,
                });
            }
        }
        return rep;
    }
    let scale = (n as f64).powf(-0.25);
    for &estimator in &cfg.estimators {
        for &blocks in &cfg.blocks {
            match run_estimator(day, estimator, blocks, &cfg.settings) {
                Ok(e) => {
                    let half = e.avar.map(|v| Z95 * scale * v.sqrt());
                    let k = e.rho_hat.len();
                    rep.cells.push(DayCell {
                        estimator,
                        blocks,
                        estimate: e.total,
                        avar: e.avar,
                        ci_low: half.map(|h| e.total - h),
                        ci_high: half.map(|h| e.total + h),
                        rho_hat_mean: (k > 0).then(|| e.rho_hat.iter().sum::<f64>() / k as f64),
                        rho_hat_max: e.rho_hat.iter().copied().reduce(f64::max),
                    });
                }
                Err(err) => {
                    warn!("{}: {estimator} B={blocks} failed: {err}", day.date.as_deref().unwrap_or("?"));
                    rep.flag.get_or_insert_with(|| format!("{estimator} B={blocks}: {err}"));
                }
            }
        }
    }
    if rep.flag.is_none() && rep.cells.iter().any(|c| c.avar.is_none()) {
        rep.flag = Some("missing pilot AVAR".into());
    }
    rep
}

fn corr(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Estimates every day, then builds cross-day tables from the unflagged days.
pub fn empirical_report(days: &[TickSeries], cfg: &EmpiricalConfig) -> Result<EmpiricalReport> {
    if days.is_empty() {
        return Err(Error::Config("no trading days".into()));
    }
    if cfg.blocks.is_empty() || cfg.estimators.is_empty() || cfg.blocks.contains(&0) {
        return Err(Error::Config("blocks and estimators must be non-empty and positive".into()));
    }
    let reports: Vec<DayReport> = days.par_iter().map(|d| estimate_day(d, cfg)).collect();
    let used: Vec<&DayReport> = reports.iter().filter(|d| d.flag.is_none()).collect();
    let get = |d: &DayReport, e: Estimator, b: usize| d.cell(e, b).expect("unflagged days carry every cell").clone();

    let mut by_blocks = Vec::new();
    let rk = cfg.estimators.iter().copied().find(|e| matches!(e, Estimator::Rk(_)));
    let has_qmle = cfg.estimators.contains(&Estimator::Qmle);
    let base_b = cfg.blocks.iter().copied().min().unwrap_or(1);
    let mut labels = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut summaries = Vec::new();
    if !used.is_empty() {
        for &b in &cfg.blocks {
            let (mut rs, mut cnt) = (0.0, 0usize);
            for d in &used {
                for e in &cfg.estimators {
                    if let Some(r) = get(d, *e, b).rho_hat_mean {
                        rs += r;
                        cnt += 1;
                    }
                }
            }
            let ratios: Vec<Vec<f64>> = cfg
                .estimators
                .iter()
                .map(|&e| {
                    used.iter()
                        .map(|d| get(d, e, b).avar.unwrap() / get(d, e, base_b).avar.unwrap())
                        .collect()
                })
                .collect();
            let correction_corr = match (rk, has_qmle) {
                (Some(k), true) if used.len() > 2 => {
                    let dq: Vec<f64> = used.iter().map(|d| get(d, Estimator::Qmle, b).estimate - get(d, Estimator::Qmle, base_b).estimate).collect();
                    let dk: Vec<f64> = used.iter().map(|d| get(d, k, b).estimate - get(d, k, base_b).estimate).collect();
                    Some(corr(&dq, &dk)).filter(|c| c.is_finite())
                }
                _ => None,
            };
            by_blocks.push(BlockSummary {
                blocks: b,
                rho_hat_mean: rs / cnt.max(1) as f64,
                avar_ratio: ratios.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect(),
                avar_ratio_max: ratios.iter().map(|r| r.iter().copied().fold(f64::MIN, f64::max)).collect(),
                correction_corr,
            });
        }
        for &e in &cfg.estimators {
            for &b in &cfg.blocks {
                let v: Vec<f64> = used.iter().map(|d| get(d, e, b).estimate).collect();
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let sd = if v.len() > 1 {
                    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
                summaries.push(EstimatorSummary {
                    estimator: e,
                    blocks: b,
                    mean,
                    sd,
                });
                labels.push(format!("{e}/{b}"));
                columns.push(v);
            }
        }
    }
    let correlation = if used.len() > 2 {
        columns.iter().map(|a| columns.iter().map(|b| corr(a, b)).collect()).collect()
    } else {
        Vec::new()
    };
    Ok(EmpiricalReport {
        schema_version: super::report::SCHEMA_VERSION.into(),
        estimators: cfg.estimators.clone(),
        blocks: cfg.blocks.clone(),
        used_days: used.len(),
        days: reports,
        by_blocks,
        summaries,
        labels,
        correlation,
    })
}
