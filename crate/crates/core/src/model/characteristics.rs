//! Closed-form solutions along characteristics and their time derivatives.
//!
//! Local time `τ = t - origin` runs from the instant at which the initial
//! profile `ρ` is given. Nodes with `a >= τ` sit on characteristics that
//! start inside that profile; nodes with `a < τ` on characteristics that
//! enter through the `a = 0` boundary, where `n(0, t) = 0`.

use super::{DensityField, InitialProfile, Kernel, ModelParams, TabulatedProfile};
use crate::error::{Error, Result};
use crate::population::PopulationField;

/// Evaluates `n(a, t)` and `∂n/∂t` for one parameter set.
pub struct Characteristics<'a, N: PopulationField + ?Sized> {
    kernel: Kernel,
    population: &'a N,
    quad_step: f64,
}

/// Composite trapezoid on `[0, len]` with panels no wider than `step`.
fn trapezoid(len: f64, step: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    if len <= 0.0 {
        return Ok(0.0);
    }
    let panels = ((len / step) - 1e-9).ceil().max(1.0) as usize;
    let h = len / panels as f64;
    let mut acc = 0.5 * (f(0.0)? + f(len)?);
    for k in 1..panels {
        acc += f(k as f64 * h)?;
    }
    Ok(acc * h)
}

fn finite(v: f64, what: &str, a: f64, t: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("non-finite {what} at age {a}, time {t}")))
    }
}

impl<'a, N: PopulationField + ?Sized> Characteristics<'a, N> {
    pub fn new(params: &ModelParams, population: &'a N, quad_step: f64) -> Result<Self> {
        if !(quad_step > 0.0) {
            return Err(Error::domain(format!("quadrature step must be > 0, got {quad_step}")));
        }
        Ok(Characteristics {
            kernel: Kernel::new(params)?,
            population,
            quad_step,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    fn local_time(a: f64, t: f64, origin: f64) -> Result<f64> {
        let tau = t - origin;
        if !(tau >= 0.0) || !(a >= 0.0) {
            return Err(Error::domain(format!(
                "characteristics need a >= 0 and t >= origin, got a={a}, t={t}, origin={origin}"
            )));
        }
        Ok(tau)
    }

    /// `n(a, t)` given the profile `ρ` at time `origin`.
    pub fn solution(&self, profile: &(impl InitialProfile + ?Sized), origin: f64, a: f64, t: f64) -> Result<f64> {
        let tau = Self::local_time(a, t, origin)?;
        let k = &self.kernel;
        let g_a = k.hazard_cumulative(a);
        let v = if a >= tau {
            let c = a - tau;
            let carried = profile.density(c) * (k.hazard_cumulative(c) - g_a).exp();
            let recruited = trapezoid(tau, self.quad_step, |s| {
                let x = c + s;
                let n = self.population.sample(x, origin + s)?.value;
                Ok(k.influx(x) * n * (k.hazard_cumulative(x) - g_a).exp())
            })?;
            carried + recruited
        } else {
            trapezoid(a, self.quad_step, |s| {
                let n = self.population.sample(s, origin + s - a + tau)?.value;
                Ok(k.influx(s) * n * (k.hazard_cumulative(s) - g_a).exp())
            })?
        };
        finite(v, "density", a, t)
    }

    /// `∂n/∂t` at `(a, t)` given the profile `ρ` at time `origin`.
    ///
    /// The `a = 0` boundary is held at zero.
    pub fn derivative(&self, profile: &(impl InitialProfile + ?Sized), origin: f64, a: f64, t: f64) -> Result<f64> {
        let tau = Self::local_time(a, t, origin)?;
        if a == 0.0 {
            return Ok(0.0);
        }
        let k = &self.kernel;
        let g_a = k.hazard_cumulative(a);
        let v = if a >= tau {
            let c = a - tau;
            let hazard_c = k.mortality(c) + k.influx(c);
            let transport = -(profile.slope(c) + profile.density(c) * hazard_c)
                * (k.hazard_cumulative(c) - g_a).exp();
            let inflow = k.influx(a) * self.population.sample(a, t)?.value;
            let shift = trapezoid(tau, self.quad_step, |s| {
                let x = c + s;
                let pop = self.population.sample(x, origin + s)?;
                let r = k.influx(x);
                let body = pop.value * (r * (k.mortality(x) + r) + k.influx_slope(x)) + pop.d_age * r;
                Ok((k.hazard_cumulative(x) - g_a).exp() * body)
            })?;
            transport + inflow - shift
        } else {
            trapezoid(a, self.quad_step, |s| {
                let pop = self.population.sample(s, origin + s - a + tau)?;
                Ok(k.influx(s) * pop.d_time * (k.hazard_cumulative(s) - g_a).exp())
            })?
        };
        finite(v, "time derivative", a, t)
    }

    /// `∂n/∂t` at every node of `field.grid`, treating `field` as the profile at `field.time`.
    pub fn derivative_field(&self, field: &DensityField, t: f64) -> Result<Vec<f64>> {
        let profile = TabulatedProfile::new(field);
        field
            .grid
            .ages()
            .map(|a| self.derivative(&profile, field.time, a, t))
            .collect()
    }
}

/// `n(a, t)` for the profile `initial` given at time `origin`, outer integrals
/// by composite trapezoid with panels no wider than `quad_step`.
pub fn characteristic_solution<N: PopulationField + ?Sized>(
    a: f64,
    t: f64,
    params: &ModelParams,
    initial: &(impl InitialProfile + ?Sized),
    origin: f64,
    population: &N,
    quad_step: f64,
) -> Result<f64> {
    Characteristics::new(params, population, quad_step)?.solution(initial, origin, a, t)
}

/// `∂n/∂t` at each node of `state`, whose values act as the profile at `state.time`.
pub fn state_derivative<N: PopulationField + ?Sized>(
    state: &DensityField,
    t: f64,
    params: &ModelParams,
    population: &N,
    quad_step: f64,
) -> Result<Vec<f64>> {
    Characteristics::new(params, population, quad_step)?.derivative_field(state, t)
}
