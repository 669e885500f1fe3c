//! Blocked realized-kernel and quasi-maximum-likelihood estimators of
//! integrated volatility from noisy high-frequency prices, with the
//! asymptotic-variance calculus behind them and a simulation harness.
//!
//! Times are in years (one trading day is `1/252`), prices are log-prices.

pub mod avar;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod optim;
pub mod preavg;
pub mod qmle;
pub mod quad;
pub mod rk;
pub mod series;
pub mod simulate;
pub mod tridiag;

pub use avar::{Estimator, VolFunctionals};
pub use error::{Error, Result};
pub use kernels::{KernelFamily, KernelProfile};
pub use preavg::{Pilots, PreAvgConfig};
pub use qmle::{QmleEstimate, QmleFit};
pub use rk::{Bandwidths, RkEstimate};
pub use series::{BlockPartition, TickSeries};
pub use simulate::{ModelConfig, PathBundle};
