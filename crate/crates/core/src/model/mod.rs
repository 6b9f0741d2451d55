//! Age-structured model of the population living with a substance use
//! disorder (SUD):
//!
//! ```text
//! (∂/∂a + ∂/∂t) n(a,t) = -μ(a) n(a,t) + r(a) [N(a,t) - n(a,t)]
//! ```
//!
//! with `n(0, t) = 0` and `n(a, t0) = ρ(a)`. Solutions are evaluated along
//! characteristics with exact survival exponents; only the outer
//! source integrals use numerical quadrature.

mod characteristics;
mod deaths;
mod profile;
mod rates;

pub use characteristics::{characteristic_solution, state_derivative, Characteristics};
pub use deaths::{accumulate_deaths, accumulate_deaths_along_characteristics, DEATH_SCALE};
pub use profile::{InitialProfile, TabulatedProfile};
pub use rates::{
    baseline_mortality, gamma_mode, gamma_pdf, influx_integral, influx_rate,
    influx_rate_derivative, initial_density, initial_density_derivative, mortality_integral,
    total_mortality, Kernel,
};

use crate::error::{Error, Result};

/// Uniform age discretization; node `j` (zero based) sits at `a0 + j * delta_a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeGrid {
    a0: f64,
    delta_a: f64,
    n_a: usize,
}

impl AgeGrid {
    pub fn new(a0: f64, delta_a: f64, n_a: usize) -> Result<Self> {
        if !(delta_a > 0.0) || !delta_a.is_finite() {
            return Err(Error::domain(format!("age step must be > 0, got {delta_a}")));
        }
        if n_a < 2 {
            return Err(Error::domain(format!("age grid needs at least 2 nodes, got {n_a}")));
        }
        if !(a0 >= 0.0) {
            return Err(Error::domain(format!("first age must be >= 0, got {a0}")));
        }
        Ok(AgeGrid { a0, delta_a, n_a })
    }

    /// Grid from `a0` to `a_max` inclusive; `a_max - a0` must be a multiple of `delta_a`.
    pub fn spanning(a0: f64, a_max: f64, delta_a: f64) -> Result<Self> {
        let steps = (a_max - a0) / delta_a;
        let rounded = steps.round();
        if (steps - rounded).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::domain(format!(
                "age span {a0}..{a_max} is not a multiple of {delta_a}"
            )));
        }
        AgeGrid::new(a0, delta_a, rounded as usize + 1)
    }

    /// Grid used for all nationwide and county runs: 0 to 120 years in steps of 1.2.
    pub fn standard() -> Self {
        AgeGrid::spanning(0.0, 120.0, 1.2).expect("standard grid is valid")
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn delta_a(&self) -> f64 {
        self.delta_a
    }

    pub fn len(&self) -> usize {
        self.n_a
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn age(&self, j: usize) -> f64 {
        self.a0 + j as f64 * self.delta_a
    }

    pub fn ages(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_a).map(move |j| self.age(j))
    }

    pub fn max_age(&self) -> f64 {
        self.age(self.n_a - 1)
    }
}

/// Gompertz-Makeham-Siler baseline mortality plus the drug-caused excess `mu_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MortalityParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Age shift of the senescence term, in years.
    pub m_shift: f64,
    pub mu_d: f64,
}

impl MortalityParams {
    /// United States males, 2010.
    pub fn us_males(mu_d: f64) -> Self {
        MortalityParams {
            gamma1: 0.00258,
            gamma2: 0.00037,
            lambda1: 5.09657,
            lambda2: 0.09040,
            m_shift: 83.22956,
            mu_d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("m_shift", self.m_shift)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be > 0, got {v}")));
            }
        }
        // zero switches the corresponding term off
        for (name, v) in [("gamma1", self.gamma1), ("gamma2", self.gamma2), ("lambda2", self.lambda2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.mu_d >= 0.0) || !self.mu_d.is_finite() {
            return Err(Error::domain(format!("mu_d must be >= 0, got {}", self.mu_d)));
        }
        Ok(())
    }
}

/// Two-component gamma mixture influx `r(a) = [r1 f(a; α1, β1) + r2 f(a; α2, β2)] / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluxParams {
    pub r1: f64,
    pub r2: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
}

impl InfluxParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha1", self.alpha1), ("beta1", self.beta1), ("alpha2", self.alpha2), ("beta2", self.beta2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be > 0, got {v}")));
            }
        }
        // Zero amplitudes switch the influx off; negative ones are meaningless.
        for (name, v) in [("r1", self.r1), ("r2", self.r2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn none() -> Self {
        InfluxParams {
            r1: 0.0,
            r2: 0.0,
            alpha1: 2.0,
            beta1: 1.0,
            alpha2: 2.0,
            beta2: 1.0,
        }
    }
}

/// `ρ(a) = prevalence · n0_total · f(a; α0, β0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    pub n0_total: f64,
    pub prevalence: f64,
    pub alpha0: f64,
    pub beta0: f64,
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        if !(self.n0_total > 0.0) {
            return Err(Error::domain(format!("n0_total must be > 0, got {}", self.n0_total)));
        }
        // prevalence = 0 is accepted to switch the initial cohort off.
        if !(self.prevalence >= 0.0 && self.prevalence < 1.0) {
            return Err(Error::domain(format!(
                "prevalence must lie in [0, 1), got {}",
                self.prevalence
            )));
        }
        if !(self.alpha0 > 0.0 && self.beta0 > 0.0) {
            return Err(Error::domain("initial gamma shape and rate must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub mortality: MortalityParams,
    pub influx: InfluxParams,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        self.mortality.validate()?;
        self.influx.validate()
    }
}

/// SUD density on an age grid at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: AgeGrid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DensityField {
    pub fn new(grid: AgeGrid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::domain(format!(
                "density has {} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("density values must be finite and >= 0, got {v}")));
        }
        Ok(DensityField { grid, values, time })
    }

    /// Samples `profile` at the grid nodes.
    pub fn sample(grid: AgeGrid, profile: &impl InitialProfile, time: f64) -> Self {
        let values = grid.ages().map(|a| profile.density(a).max(0.0)).collect();
        DensityField { grid, values, time }
    }

    /// `∫ n da` by the rectangle rule on node cells `[a_j, a_j + Δa)`.
    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.delta_a()
    }
}
