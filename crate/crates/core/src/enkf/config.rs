use super::covariance::Covariance;
use super::sud::Layout;
use crate::error::{Error, Result};
use crate::model::AgeGrid;

/// How the process-noise scale is spread over the augmented state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseStructure {
    /// `scale · J`: one shared draw moves every entry together.
    Ones,
    /// `scale · I`: independent draws per entry.
    Diagonal,
}

/// When `ln μ_d` is reset from the observed deaths during an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reanchor {
    Off,
    /// Before the gain: `D̃` is rescaled to the new rate, so the gain only
    /// sees the part of the innovation `μ_d` cannot explain.
    BeforeGain,
    /// After the gain, overwriting whatever the gain did to `ln μ_d`.
    AfterGain,
}

/// Whose SUD population the re-anchored rate divides by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exposure {
    /// Each member's own exposure; the spread of `μ_d` then carries the
    /// population uncertainty.
    Member,
    EnsembleMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub ensemble_size: usize,
    /// Forecast step in years.
    pub dt: f64,
    pub grid: AgeGrid,
    /// Initial variance of the density and `D̃` entries.
    pub initial_state_variance: f64,
    /// Initial variance of the log-parameters.
    pub initial_param_variance: f64,
    pub process_noise: f64,
    pub process_noise_structure: NoiseStructure,
    /// Variance of each observation entry, in (deaths per 1,000)².
    pub observation_noise: f64,
    /// How many times the first observed year is assimilated.
    pub first_year_cycles: usize,
    /// Observation bins must lie inside this age window to be used.
    pub measurement_window: (f64, f64),
    /// Panel width of the outer integrals in `∂n/∂t`.
    pub quad_step: f64,
    pub reanchor: Reanchor,
    pub reanchor_exposure: Exposure,
    /// Keep influx component 1 the younger one in every member.
    pub order_components: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            ensemble_size: 1000,
            dt: 0.1,
            grid: AgeGrid::standard(),
            initial_state_variance: 1e-4,
            initial_param_variance: 1.0,
            process_noise: 1e-4,
            process_noise_structure: NoiseStructure::Ones,
            observation_noise: 2e-3,
            first_year_cycles: 2,
            measurement_window: (10.0, 70.0),
            quad_step: 0.1,
            reanchor: Reanchor::BeforeGain,
            reanchor_exposure: Exposure::Member,
            order_components: true,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size < 2 {
            return Err(Error::config(format!("ensemble_size must be >= 2, got {}", self.ensemble_size)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config(format!("dt must be > 0, got {}", self.dt)));
        }
        self.steps_per_year()?;
        for (name, v) in [
            ("initial_state_variance", self.initial_state_variance),
            ("initial_param_variance", self.initial_param_variance),
            ("process_noise", self.process_noise),
            ("observation_noise", self.observation_noise),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.first_year_cycles == 0 {
            return Err(Error::config("first_year_cycles must be >= 1"));
        }
        let (lo, hi) = self.measurement_window;
        if !(lo < hi) {
            return Err(Error::config(format!("measurement window [{lo}, {hi}] is empty")));
        }
        if !(self.quad_step > 0.0) {
            return Err(Error::config(format!("quad_step must be > 0, got {}", self.quad_step)));
        }
        Ok(())
    }

    /// Number of forecast steps per year; `1 / dt` must be an integer.
    pub fn steps_per_year(&self) -> Result<usize> {
        let k = (1.0 / self.dt).round();
        if k < 1.0 || (k * self.dt - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("1/dt must be a whole number of steps, got dt = {}", self.dt)));
        }
        Ok(k as usize)
    }

    pub fn initial_covariance(&self, layout: Layout) -> Covariance {
        let mut d = vec![self.initial_state_variance; 2 * layout.nodes()];
        d.extend(std::iter::repeat_n(self.initial_param_variance, layout.dim() - d.len()));
        Covariance::Diagonal(d)
    }

    pub fn process_covariance(&self, layout: Layout) -> Covariance {
        match self.process_noise_structure {
            NoiseStructure::Ones => Covariance::ScaledOnes {
                dim: layout.dim(),
                scale: self.process_noise,
            },
            NoiseStructure::Diagonal => Covariance::Diagonal(vec![self.process_noise; layout.dim()]),
        }
    }

    pub fn observation_covariance(&self, bins: usize) -> Covariance {
        Covariance::Diagonal(vec![self.observation_noise; bins])
    }
}
