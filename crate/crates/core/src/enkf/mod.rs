//! Ensemble Kalman filtering: a generic filter plus the mortality-model layer.

pub mod assimilation;
pub mod config;
pub mod covariance;
pub mod filter;
pub mod rng;
pub mod sud;

pub use assimilation::{
    run_assimilation, simulate, synthetic_observations, Assimilation, ParamSummary, SimulatedYear, Spread, YearRecord,
};
pub use config::{Exposure, FilterConfig, NoiseStructure, Reanchor};
pub use covariance::{Covariance, Sampler};
pub use filter::{
    ensemble_covariance, ensemble_cross_covariance, ensemble_mean, forecast_step, init_ensemble, update_step,
    Dynamics, Ensemble, ForecastReport, Measurement, ObservationVector, UpdateReport,
};
pub use rng::{NoiseStreams, Purpose};
