//! Augmented state of the SUD model and the pieces the filter needs from it.
//!
//! Layout: `[n(a_1..a_Na), D̃(a_1..a_Na), ln μ_d, ln r1, ln r2, ln α1, ln β1, ln α2, ln β2]`.
//! `D̃_j` counts deaths (per 1,000) in the age cell `[a_j, a_j + Δa)` since the
//! last reset, so summing it over the nodes of a bin gives that bin's deaths.

use super::filter::{Dynamics, Ensemble, Measurement};
use super::rng::{standard_normal, NoiseStreams, Purpose};
use crate::error::{Error, Result};
use crate::ingest::AgeBinScheme;
use crate::model::{
    AgeGrid, Characteristics, DensityField, InfluxParams, ModelParams, MortalityParams,
    TabulatedProfile, DEATH_SCALE,
};
use crate::population::PopulationField;

pub const N_PARAMS: usize = 7;

pub const PARAM_NAMES: [&str; N_PARAMS] = ["mu_d", "r1", "r2", "alpha1", "beta1", "alpha2", "beta2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    n_a: usize,
}

impl Layout {
    pub fn new(n_a: usize) -> Self {
        Layout { n_a }
    }

    pub fn for_grid(grid: &AgeGrid) -> Self {
        Layout { n_a: grid.len() }
    }

    pub fn nodes(&self) -> usize {
        self.n_a
    }

    pub fn dim(&self) -> usize {
        2 * self.n_a + N_PARAMS
    }

    pub fn densities<'a>(&self, state: &'a [f64]) -> &'a [f64] {
        &state[..self.n_a]
    }

    pub fn deaths<'a>(&self, state: &'a [f64]) -> &'a [f64] {
        &state[self.n_a..2 * self.n_a]
    }

    pub fn deaths_mut<'a>(&self, state: &'a mut [f64]) -> &'a mut [f64] {
        &mut state[self.n_a..2 * self.n_a]
    }

    pub fn log_params<'a>(&self, state: &'a [f64]) -> &'a [f64] {
        &state[2 * self.n_a..]
    }

    pub fn log_params_mut<'a>(&self, state: &'a mut [f64]) -> &'a mut [f64] {
        &mut state[2 * self.n_a..]
    }

    pub fn mu_d_index(&self) -> usize {
        2 * self.n_a
    }

    pub fn params(&self, state: &[f64]) -> SudParams {
        SudParams::from_log(self.log_params(state))
    }
}

/// Estimated parameters on their natural scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SudParams {
    pub mu_d: f64,
    pub r1: f64,
    pub r2: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
}

impl SudParams {
    pub fn from_log(logs: &[f64]) -> Self {
        let e = |k: usize| logs[k].exp();
        SudParams {
            mu_d: e(0),
            r1: e(1),
            r2: e(2),
            alpha1: e(3),
            beta1: e(4),
            alpha2: e(5),
            beta2: e(6),
        }
    }

    pub fn as_array(&self) -> [f64; N_PARAMS] {
        [self.mu_d, self.r1, self.r2, self.alpha1, self.beta1, self.alpha2, self.beta2]
    }

    pub fn to_log(&self) -> Result<[f64; N_PARAMS]> {
        let values = self.as_array();
        if let Some((name, v)) = PARAM_NAMES.iter().zip(values).find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("{name} must be > 0 to take its logarithm, got {v}")));
        }
        Ok(values.map(f64::ln))
    }

    pub fn influx(&self) -> InfluxParams {
        InfluxParams {
            r1: self.r1,
            r2: self.r2,
            alpha1: self.alpha1,
            beta1: self.beta1,
            alpha2: self.alpha2,
            beta2: self.beta2,
        }
    }

    /// Full model parameters using `baseline` for the non-drug mortality.
    pub fn model(&self, baseline: &MortalityParams) -> ModelParams {
        ModelParams {
            mortality: MortalityParams {
                mu_d: self.mu_d,
                ..*baseline
            },
            influx: self.influx(),
        }
    }

    /// Mode of the first influx component, `(α1 - 1) / β1`.
    pub fn a1_max(&self) -> f64 {
        (self.alpha1 - 1.0) / self.beta1
    }

    pub fn a2_max(&self) -> f64 {
        (self.alpha2 - 1.0) / self.beta2
    }
}

/// Augmented state with densities from `field`, zero `D̃`, and `params`.
pub fn augmented_state(field: &DensityField, params: &SudParams) -> Result<Vec<f64>> {
    let mut x = field.values.clone();
    x.extend(std::iter::repeat_n(0.0, field.grid.len()));
    x.extend(params.to_log()?);
    Ok(x)
}

/// `f(x, t)`: closed-form `∂n/∂t` from the window-start profile, the death
/// rate per node, and zero for the parameters.
pub struct SudDynamics<'a, N: PopulationField + ?Sized> {
    grid: AgeGrid,
    layout: Layout,
    baseline: MortalityParams,
    population: &'a N,
    quad_step: f64,
}

impl<'a, N: PopulationField + ?Sized> SudDynamics<'a, N> {
    pub fn new(grid: AgeGrid, baseline: MortalityParams, population: &'a N, quad_step: f64) -> Self {
        SudDynamics {
            layout: Layout::for_grid(&grid),
            grid,
            baseline,
            population,
            quad_step,
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }
}

impl<N: PopulationField + ?Sized> Dynamics for SudDynamics<'_, N> {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn derivative(&self, state: &[f64], origin: &[f64], window_start: f64, t: f64, out: &mut [f64]) -> Result<()> {
        let l = self.layout;
        let params = l.params(state);
        let chars = Characteristics::new(&params.model(&self.baseline), self.population, self.quad_step)?;
        let start = DensityField {
            grid: self.grid,
            values: l.densities(origin).iter().map(|v| v.max(0.0)).collect(),
            time: window_start,
        };
        let profile = TabulatedProfile::new(&start);
        let n_a = l.nodes();
        for j in 0..n_a {
            out[j] = chars.derivative(&profile, window_start, self.grid.age(j), t)?;
        }
        let scale = params.mu_d * self.grid.delta_a() / DEATH_SCALE;
        for (d, n) in out[n_a..2 * n_a].iter_mut().zip(l.densities(state)) {
            *d = scale * n.max(0.0);
        }
        out[2 * n_a..].fill(0.0);
        Ok(())
    }
}

/// `h(x)`: per bin, the sum of `D̃` over the bin's nodes.
#[derive(Debug, Clone)]
pub struct BinnedDeaths {
    layout: Layout,
    node_sets: Vec<Vec<usize>>,
}

impl BinnedDeaths {
    pub fn new(grid: &AgeGrid, scheme: &AgeBinScheme, window: (f64, f64)) -> Result<Self> {
        Ok(BinnedDeaths {
            layout: Layout::for_grid(grid),
            node_sets: scheme.node_sets(grid, window)?,
        })
    }

    pub fn node_sets(&self) -> &[Vec<usize>] {
        &self.node_sets
    }
}

impl Measurement for BinnedDeaths {
    fn dim(&self) -> usize {
        self.node_sets.len()
    }

    fn measure(&self, state: &[f64]) -> Vec<f64> {
        let d = self.layout.deaths(state);
        self.node_sets.iter().map(|s| s.iter().map(|&j| d[j]).sum()).collect()
    }
}

/// Zeroes `D̃` in every member so the next measurement covers only the new year.
pub fn annual_measurement_reset(ens: &mut Ensemble, layout: Layout) {
    for x in ens.members_mut() {
        layout.deaths_mut(x).fill(0.0);
    }
}

/// Clamps densities at zero in every member.
pub fn clamp_densities(ens: &mut Ensemble, layout: Layout) {
    for x in ens.members_mut() {
        for v in &mut x[..layout.nodes()] {
            *v = v.max(0.0);
        }
    }
}

/// Resets `ln μ_d` in member `i` to
/// `ln(max(observed + 1000 η_i, 1) / exposure_i)` with `η_i ~ N(0, noise_variance)`.
///
/// `observed` is the year's death count over the measured bins,
/// `noise_variance` the summed per-1,000 observation variance of those bins,
/// and `exposure_i` the person-years of the SUD population in the same bins
/// over the year. Returns the change of `ln μ_d` per member.
pub fn reanchor_mu_d(
    ens: &mut Ensemble,
    layout: Layout,
    observed: f64,
    noise_variance: f64,
    exposure: &[f64],
    streams: &NoiseStreams,
    step: u64,
) -> Result<Vec<f64>> {
    if exposure.len() != ens.size() {
        return Err(Error::config("one exposure per ensemble member is required"));
    }
    if let Some(e) = exposure.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(Error::Numerical(format!("cannot re-anchor mu_d on exposure {e}")));
    }
    let sd = noise_variance.max(0.0).sqrt();
    let index = layout.mu_d_index();
    let mut shifts = Vec::with_capacity(ens.size());
    for (i, (x, e)) in ens.members_mut().iter_mut().zip(exposure).enumerate() {
        let eta = sd * standard_normal(&mut streams.stream(Purpose::Reanchor, i as u64, step));
        let deaths = (observed + DEATH_SCALE * eta).max(1.0);
        let new = (deaths / e).ln();
        shifts.push(new - x[index]);
        x[index] = new;
    }
    Ok(shifts)
}

/// Multiplies each member's `D̃` by `exp(shift)`, matching a change of `ln μ_d`.
///
/// `D̃` accrues at a rate proportional to `μ_d`, so this is what the year's
/// deaths would have been with the new rate and the same densities.
pub fn rescale_deaths(ens: &mut Ensemble, layout: Layout, shifts: &[f64]) {
    for (x, s) in ens.members_mut().iter_mut().zip(shifts) {
        let ratio = s.exp();
        layout.deaths_mut(x).iter_mut().for_each(|d| *d *= ratio);
    }
}

/// Swaps the two influx components of every member whose first component
/// peaks at an older age than its second, so component 1 is the younger one.
pub fn order_components(ens: &mut Ensemble, layout: Layout) -> usize {
    let mut swapped = 0;
    for x in ens.members_mut() {
        let p = layout.params(x);
        if p.a1_max() > p.a2_max() {
            let lp = layout.log_params_mut(x);
            lp.swap(1, 2);
            lp.swap(3, 5);
            lp.swap(4, 6);
            swapped += 1;
        }
    }
    swapped
}
