//! Theoretical loss curves on the deterministic U-shape with one volatility
//! drop, indexed by the drop time τ and hence by ρ.

use serde::{Deserialize, Serialize};

use crate::avar::{self, Estimator, VolPath};
use crate::error::{Error, Result};
use crate::simulate::{ushape_jump_path, UShape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub ushape: UShape,
    pub beta: f64,
    /// Drop times are spread evenly over `[tau_lo, tau_hi]` (fractions of T).
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub n_tau: usize,
    /// Grid points used for the Riemann sums.
    pub n_grid: usize,
    pub max_blocks: usize,
}

impl Default for CurveSpec {
    /// Normal U (C = 0.75, A = 0.25, D = 0.89, a = b = 10), a 50% drop and
    /// τ ∈ [0.013T, T].
    fn default() -> Self {
        CurveSpec {
            ushape: UShape {
                c: 0.75,
                a_amp: 0.25,
                d_amp: 0.89,
                a: 10.0,
                b: 10.0,
            },
            beta: 0.5,
            tau_lo: 0.013,
            tau_hi: 1.0,
            n_tau: 200,
            n_grid: 46_800,
            max_blocks: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub estimator: Estimator,
    pub blocks: usize,
    pub tau_frac: f64,
    pub rho: f64,
    pub kappa: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCurves {
    pub schema_version: String,
    pub points: Vec<CurvePoint>,
}

/// Losses for `B = 1..=max_blocks` at drop time `tau_frac` (unit horizon,
/// unit noise; losses do not depend on either).
pub fn losses_at(spec: &CurveSpec, tau_frac: f64, estimator: Estimator) -> Result<Vec<CurvePoint>> {
    let sigma = ushape_jump_path(&spec.ushape, spec.beta, tau_frac, spec.n_grid);
    let path = VolPath {
        sigma: &sigma,
        dt: 1.0 / spec.n_grid as f64,
        a0: 1.0,
    };
    let total = path.total();
    let m = avar::measures(&total)?;
    (1..=spec.max_blocks)
        .map(|b| {
            let r = avar::avar_blocked(&path.blocks(b), &total, estimator)?;
            Ok(CurvePoint {
                estimator,
                blocks: b,
                tau_frac,
                rho: m.rho,
                kappa: m.kappa,
                loss: r.loss,
            })
        })
        .collect()
}

/// The grid of drop times of `spec`.
pub fn tau_grid(spec: &CurveSpec) -> Vec<f64> {
    if spec.n_tau == 1 {
        return vec![spec.tau_lo];
    }
    (0..spec.n_tau)
        .map(|i| spec.tau_lo + (spec.tau_hi - spec.tau_lo) * i as f64 / (spec.n_tau - 1) as f64)
        .collect()
}

pub fn loss_curves(spec: &CurveSpec, estimators: &[Estimator]) -> Result<LossCurves> {
    if spec.n_tau == 0 || spec.n_grid < spec.max_blocks || spec.max_blocks == 0 {
        return Err(Error::Config("curve grid too small".into()));
    }
    if !(0.0 <= spec.tau_lo && spec.tau_lo <= spec.tau_hi && spec.tau_hi <= 1.0) {
        return Err(Error::Config("drop times must lie in [0, 1]".into()));
    }
    let mut points = Vec::new();
    for &e in estimators {
        for tau in tau_grid(spec) {
            points.extend(losses_at(spec, tau, e)?);
        }
    }
    Ok(LossCurves {
        schema_version: super::report::SCHEMA_VERSION.into(),
        points,
    })
}

/// The drop time on the grid whose ρ is closest to `target`, and that ρ.
pub fn tau_for_rho(spec: &CurveSpec, target: f64) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for tau in tau_grid(spec) {
        let sigma = ushape_jump_path(&spec.ushape, spec.beta, tau, spec.n_grid);
        let f = VolPath {
            sigma: &sigma,
            dt: 1.0 / spec.n_grid as f64,
            a0: 1.0,
        }
        .total();
        let rho = avar::measures(&f)?.rho;
        if best.map_or(true, |(_, r)| (rho - target).abs() < (r - target).abs()) {
            best = Some((tau, rho));
        }
    }
    best.ok_or_else(|| Error::Config("empty drop-time grid".into()))
}
