//! Monte Carlo driver, tick ingestion, the per-day empirical pipeline and
//! report output.

pub mod curves;
pub mod empirical;
pub mod ingest;
pub mod mc;
pub mod report;

use serde::{Deserialize, Serialize};

use crate::avar::Estimator;
use crate::error::Result;
use crate::preavg::PreAvgConfig;
use crate::qmle::{self, QmleOptions};
use crate::rk::{self, Bandwidths, DEFAULT_JITTER};
use crate::series::{BlockPartition, TickSeries};

/// Tuning shared by every estimator run from the harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSettings {
    #[serde(default)]
    pub preavg: PreAvgConfig,
    #[serde(default = "default_jitter")]
    pub jitter: usize,
}

fn default_jitter() -> usize {
    DEFAULT_JITTER
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings {
            preavg: PreAvgConfig::default(),
            jitter: DEFAULT_JITTER,
        }
    }
}

/// A blocked estimate reduced to what reports need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockedEstimate {
    pub estimator: Estimator,
    pub blocks: usize,
    pub total: f64,
    /// Plug-in blocked AVAR, when every block had pilots.
    pub avar: Option<f64>,
    /// Pilot ρ̂ per block (missing blocks skipped).
    pub rho_hat: Vec<f64>,
    pub converged: bool,
}

/// Runs one blocked estimator on `series` with `blocks` equal blocks; the
/// kernel uses pilot-tuned bandwidths.
pub fn run_estimator(
    series: &TickSeries,
    estimator: Estimator,
    blocks: usize,
    settings: &EstimatorSettings,
) -> Result<BlockedEstimate> {
    let partition = BlockPartition::for_series(blocks, series)?;
    match estimator {
        Estimator::Rk(family) => {
            let e = rk::local_rk(series, &partition, family, &Bandwidths::Auto(settings.preavg), settings.jitter)?;
            Ok(BlockedEstimate {
                estimator,
                blocks,
                total: e.total,
                avar: e.avar,
                rho_hat: e.blocks.iter().filter_map(|b| b.rho_hat).collect(),
                converged: true,
            })
        }
        Estimator::Qmle => {
            let opts = QmleOptions {
                bx: None,
                pilots: settings.preavg,
            };
            let e = qmle::local_qmle(series, &partition, &opts)?;
            Ok(BlockedEstimate {
                estimator,
                blocks,
                total: e.total,
                avar: e.avar,
                rho_hat: e.blocks.iter().filter_map(|b| b.pilots.map(|p| p.rho)).collect(),
                converged: e.all_converged(),
            })
        }
    }
}
