//! Joint conditional distributions of two asset-return series.
//!
//! Margins follow an AR(p) mean with a log-linear Realized-GARCH(1,1)
//! variance and skewed-t innovations. Dependence is a bivariate copula whose
//! parameter is either constant or driven by its scaled score (GAS(1,1)).
//! The fitted joint model feeds Monte-Carlo forecasts of portfolio
//! Value-at-Risk, expected shortfall and conditional diversification benefit.

pub mod copulas;
pub mod distributions;
pub mod error;
pub mod estimation;
pub mod margins;
pub mod market_data;
pub mod optim;
pub mod risk;
pub mod seed;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
