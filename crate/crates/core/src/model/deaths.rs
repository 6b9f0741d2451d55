use super::{Characteristics, DensityField, ModelParams, TabulatedProfile};
use crate::error::{Error, Result};
use crate::population::PopulationField;

/// Deaths are carried per 1,000 persons in the filter state.
pub const DEATH_SCALE: f64 = 1000.0;

/// Drug-caused deaths per node over `window`, in thousands.
///
/// Explicit Euler at step `dt`: `Σ_k mu_d · n(t_k) · h / 1000` with `t_k` the
/// left end of each step, matching the filter's forecast step.
/// `density_at(t)` supplies the node densities at time `t`.
pub fn accumulate_deaths(
    params: &ModelParams,
    window: (f64, f64),
    dt: f64,
    mut density_at: impl FnMut(f64) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let (ta, tb) = window;
    if !(ta <= tb) {
        return Err(Error::domain(format!("death window [{ta}, {tb}] is reversed")));
    }
    if !(dt > 0.0) {
        return Err(Error::domain(format!("time step must be > 0, got {dt}")));
    }
    let mu_d = params.mortality.mu_d;
    let first = density_at(ta)?;
    let mut deaths = vec![0.0; first.len()];
    if tb == ta {
        return Ok(deaths);
    }
    let steps = ((tb - ta) / dt - 1e-9).ceil().max(1.0) as usize;
    let h = (tb - ta) / steps as f64;
    for k in 0..steps {
        let n = if k == 0 { first.clone() } else { density_at(ta + k as f64 * h)? };
        if n.len() != deaths.len() {
            return Err(Error::domain("density trajectory changed length"));
        }
        for (d, v) in deaths.iter_mut().zip(n.iter()) {
            *d += mu_d * v * h / DEATH_SCALE;
        }
    }
    Ok(deaths)
}

/// Deaths over `window` with densities evolved along characteristics from `state`.
pub fn accumulate_deaths_along_characteristics<N: PopulationField + ?Sized>(
    state: &DensityField,
    params: &ModelParams,
    population: &N,
    window: (f64, f64),
    dt: f64,
) -> Result<Vec<f64>> {
    let solver = Characteristics::new(params, population, dt)?;
    let profile = TabulatedProfile::new(state);
    accumulate_deaths(params, window, dt, |t| {
        state
            .grid
            .ages()
            .map(|a| solver.solution(&profile, state.time, a, t))
            .collect()
    })
}
