//! Yearly forecast/update cycles over a calendar range.

use log::{debug, info};

use super::filter::{
    ensemble_covariance, ensemble_mean, forecast_step, init_ensemble, update_step, Dynamics, Ensemble, Measurement,
};
use super::rng::NoiseStreams;
use super::config::{Exposure, Reanchor};
use super::sud::{
    annual_measurement_reset, augmented_state, clamp_densities, order_components, reanchor_mu_d, rescale_deaths,
    BinnedDeaths, Layout, SudDynamics, SudParams, N_PARAMS,
};
use crate::error::{Error, Result};
use crate::ingest::{FatalityRecord, FatalityTable, ObservationSeries, Reliability};
use crate::model::{DensityField, DEATH_SCALE};
use crate::population::PopulationField;
use crate::scenario::Scenario;

/// Mean and standard deviation of one quantity across the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Spread {
    pub mean: f64,
    pub sd: f64,
}

impl Spread {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let m = v.len() as f64;
        let mean = v.iter().sum::<f64>() / m;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        Spread { mean, sd: var.sqrt() }
    }
}

/// Parameter estimates on their natural scale.
///
/// Each estimate is the exponential of the ensemble-mean log-parameter; its
/// standard deviation is propagated from the ensemble covariance of the
/// log-parameters to first order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    /// In the order `mu_d, r1, r2, alpha1, beta1, alpha2, beta2`.
    pub params: [Spread; N_PARAMS],
    pub a1_max: Spread,
    pub a2_max: Spread,
}

/// `(α - 1)/β` at the mean of `(ln α, ln β)`, with first-order spread.
fn mode_spread(u: f64, v: f64, var_u: f64, var_v: f64, cov: f64) -> Spread {
    let (alpha, beta) = (u.exp(), v.exp());
    let mode = (alpha - 1.0) / beta;
    let (gu, gv) = (alpha / beta, -mode);
    let var = gu * gu * var_u + gv * gv * var_v + 2.0 * gu * gv * cov;
    Spread {
        mean: mode,
        sd: var.max(0.0).sqrt(),
    }
}

impl ParamSummary {
    pub fn of(ens: &Ensemble, layout: Layout) -> Self {
        let logs: Vec<Vec<f64>> = ens.members().iter().map(|x| layout.log_params(x).to_vec()).collect();
        let mean = ensemble_mean(&logs);
        let cov = ensemble_covariance(&logs);
        let params = std::array::from_fn(|k| {
            let est = mean[k].exp();
            Spread {
                mean: est,
                sd: est * cov[(k, k)].max(0.0).sqrt(),
            }
        });
        ParamSummary {
            params,
            a1_max: mode_spread(mean[3], mean[4], cov[(3, 3)], cov[(4, 4)], cov[(3, 4)]),
            a2_max: mode_spread(mean[5], mean[6], cov[(5, 5)], cov[(6, 6)], cov[(5, 6)]),
        }
    }

    pub fn mu_d(&self) -> Spread {
        self.params[0]
    }

    pub fn r1(&self) -> Spread {
        self.params[1]
    }

    pub fn r2(&self) -> Spread {
        self.params[2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct YearRecord {
    pub year: i32,
    /// Whether the year's observation entered an update.
    pub updated: bool,
    /// Year after the last observed one: prediction only.
    pub forecast_only: bool,
    /// Annual deaths per bin predicted before the update.
    pub predicted: Vec<Spread>,
    pub observed: Option<Vec<Option<u64>>>,
    /// Bins left out of the update (suppressed, unobserved or outside the window).
    pub mask: Vec<bool>,
    /// Estimates after the update (or the forecast, without one).
    pub params: ParamSummary,
    pub state_mean: Vec<f64>,
    pub state_variance: Vec<f64>,
    pub resampled: usize,
}

impl YearRecord {
    pub fn predicted_total(&self) -> f64 {
        self.predicted.iter().map(|s| s.mean).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assimilation {
    pub records: Vec<YearRecord>,
    pub last_observed_year: Option<i32>,
}

impl Assimilation {
    pub fn record(&self, year: i32) -> Option<&YearRecord> {
        self.records.iter().find(|r| r.year == year)
    }
}

/// Runs the filter from `scenario.start_year` through `scenario.end_year`,
/// assimilating every year of `observations` that falls in that range.
/// Without observations this is an ensemble forecast.
pub fn run_assimilation<N: PopulationField + ?Sized>(
    scenario: &Scenario,
    population: &N,
    observations: Option<&ObservationSeries>,
    seed: u64,
) -> Result<Assimilation> {
    scenario.validate()?;
    let cfg = &scenario.filter;
    if let Some(obs) = observations {
        if obs.scheme != scenario.scheme {
            return Err(Error::config(format!(
                "observations use age bins {:?} but the scenario expects {:?}",
                obs.scheme.edges(),
                scenario.scheme.edges()
            )));
        }
    }
    let grid = cfg.grid;
    let layout = Layout::for_grid(&grid);
    let dynamics = SudDynamics::new(grid, scenario.baseline, population, cfg.quad_step);
    let h = BinnedDeaths::new(&grid, &scenario.scheme, cfg.measurement_window)?;
    let streams = NoiseStreams::new(seed);
    let steps = cfg.steps_per_year()?;
    let start = scenario.start_year as f64;

    let field = DensityField::sample(grid, &scenario.initial, start);
    let x0 = augmented_state(&field, &scenario.params)?;
    let mut ens = init_ensemble(
        cfg.ensemble_size,
        &x0,
        &cfg.initial_covariance(layout),
        start,
        &streams,
        |x| {
            x[..layout.nodes()].iter_mut().for_each(|v| *v = v.max(0.0));
            x[layout.nodes()..2 * layout.nodes()].fill(0.0);
        },
    )?;
    let q = cfg.process_covariance(layout).sampler()?;
    let r = cfg.observation_covariance(scenario.scheme.len());

    let last_observed = observations
        .and_then(|o| o.years.range(scenario.start_year..=scenario.end_year).next_back().map(|(y, _)| *y));
    let mut records = Vec::new();
    let mut reanchors = 0u64;
    for year in scenario.start_year..=scenario.end_year {
        let z = observations.and_then(|o| o.observation(year, cfg.measurement_window));
        let usable = z.as_ref().is_some_and(|z| z.mask.iter().any(|m| !m));
        let cycles = if year == scenario.start_year && usable { cfg.first_year_cycles } else { 1 };
        let year_start: Vec<Vec<f64>> = ens.members().iter().map(|x| layout.densities(x).to_vec()).collect();
        for cycle in 0..cycles {
            if cycle > 0 {
                for (x, n) in ens.members_mut().iter_mut().zip(&year_start) {
                    x[..layout.nodes()].copy_from_slice(n);
                }
                annual_measurement_reset(&mut ens, layout);
                ens.set_time(year as f64);
            }
            // person-years per node, for each member
            let mut exposure = vec![vec![0.0; layout.nodes()]; ens.size()];
            let mut resampled = 0;
            for _ in 0..steps {
                for (e, x) in exposure.iter_mut().zip(ens.members()) {
                    for (ej, n) in e.iter_mut().zip(layout.densities(x)) {
                        *ej += cfg.dt * grid.delta_a() * n.max(0.0);
                    }
                }
                resampled += forecast_step(&mut ens, &dynamics, cfg.dt, &q, &streams)?.resampled.len();
                clamp_densities(&mut ens, layout);
            }

            let predicted: Vec<Vec<f64>> = ens.members().iter().map(|x| h.measure(x)).collect();
            let predicted: Vec<Spread> = (0..h.dim())
                .map(|k| Spread::of(predicted.iter().map(|p| p[k] * DEATH_SCALE)))
                .collect();
            let mask = z.as_ref().map_or_else(|| vec![true; h.dim()], |z| z.mask.clone());
            if let (Some(z), true) = (&z, usable) {
                let active = z.active();
                let observed: f64 = active.iter().map(|&k| z.values[k] * DEATH_SCALE).sum();
                let variance = active.len() as f64 * cfg.observation_noise;
                let nodes: Vec<usize> = active.iter().flat_map(|&k| h.node_sets()[k].iter().copied()).collect();
                let mut exposed: Vec<f64> = exposure.iter().map(|e| nodes.iter().map(|&j| e[j]).sum()).collect();
                if cfg.reanchor_exposure == Exposure::EnsembleMean {
                    let mean = exposed.iter().sum::<f64>() / exposed.len() as f64;
                    exposed.fill(mean);
                }
                if cfg.reanchor == Reanchor::BeforeGain {
                    let shifts = reanchor_mu_d(&mut ens, layout, observed, variance, &exposed, &streams, reanchors)?;
                    rescale_deaths(&mut ens, layout, &shifts);
                    reanchors += 1;
                }
                update_step(&mut ens, z, &r, &h, &streams)?;
                clamp_densities(&mut ens, layout);
                if cfg.reanchor == Reanchor::AfterGain {
                    reanchor_mu_d(&mut ens, layout, observed, variance, &exposed, &streams, reanchors)?;
                    reanchors += 1;
                }
                if cfg.order_components {
                    order_components(&mut ens, layout);
                }
            }
            if cycle + 1 == cycles {
                let mu = ParamSummary::of(&ens, layout);
                debug!("{year}: mu_d = {:.5} ± {:.5}", mu.mu_d().mean, mu.mu_d().sd);
                records.push(YearRecord {
                    year,
                    updated: usable,
                    forecast_only: last_observed.is_none_or(|l| year > l),
                    predicted,
                    observed: observations.and_then(|o| o.get(year)).map(|y| y.deaths.clone()),
                    mask,
                    params: mu,
                    state_mean: ens.mean(),
                    state_variance: ens.variance(),
                    resampled,
                });
            }
            annual_measurement_reset(&mut ens, layout);
            ens.set_time((year + 1) as f64);
        }
    }
    info!("assimilation finished: {} years, last observed {:?}", records.len(), last_observed);
    Ok(Assimilation {
        records,
        last_observed_year: last_observed,
    })
}

/// One year of a deterministic forward run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedYear {
    pub year: i32,
    /// Density at the start of the year, per node.
    pub densities: Vec<f64>,
    /// Deaths during the year in each node's age cell.
    pub deaths: Vec<f64>,
    pub params: SudParams,
}

/// Deterministic forward run of the model with the filter's time stepping.
///
/// `schedule` gives the parameters in force during each year; the scenario's
/// parameters are used when it is `None`.
pub fn simulate<N: PopulationField + ?Sized>(
    scenario: &Scenario,
    population: &N,
    schedule: Option<&dyn Fn(i32) -> SudParams>,
) -> Result<Vec<SimulatedYear>> {
    scenario.validate()?;
    let cfg = &scenario.filter;
    let grid = cfg.grid;
    let layout = Layout::for_grid(&grid);
    let dynamics = SudDynamics::new(grid, scenario.baseline, population, cfg.quad_step);
    let steps = cfg.steps_per_year()?;
    let field = DensityField::sample(grid, &scenario.initial, scenario.start_year as f64);
    let mut x = field.values.clone();
    x.resize(layout.dim(), 0.0);
    let mut f = vec![0.0; x.len()];
    let mut out = Vec::new();
    for year in scenario.start_year..=scenario.end_year {
        let params = schedule.map_or(scenario.params, |s| s(year));
        // zero rates are allowed here: ln 0 = -inf and exp(-inf) = 0 exactly
        params.model(&scenario.baseline).validate()?;
        layout.log_params_mut(&mut x).copy_from_slice(&params.as_array().map(f64::ln));
        layout.deaths_mut(&mut x).fill(0.0);
        let origin = x.clone();
        let t0 = year as f64;
        for k in 0..steps {
            dynamics.derivative(&x, &origin, t0, t0 + k as f64 * cfg.dt, &mut f)?;
            for (xi, fi) in x.iter_mut().zip(&f) {
                *xi += cfg.dt * fi;
            }
            x[..layout.nodes()].iter_mut().for_each(|v| *v = v.max(0.0));
        }
        out.push(SimulatedYear {
            year,
            densities: layout.densities(&origin).to_vec(),
            deaths: layout.deaths(&x).iter().map(|d| d * DEATH_SCALE).collect(),
            params,
        });
    }
    Ok(out)
}

/// Rounds simulated deaths onto the scenario's bins, one record per bin and year.
pub fn synthetic_observations(scenario: &Scenario, run: &[SimulatedYear]) -> Result<FatalityTable> {
    let sets = scenario.scheme.node_sets(&scenario.filter.grid, scenario.filter.measurement_window)?;
    let mut table = FatalityTable::default();
    for y in run {
        for ((lo, hi), nodes) in scenario.scheme.bins().zip(&sets) {
            let d: f64 = nodes.iter().map(|&j| y.deaths[j]).sum();
            table.records.push(FatalityRecord {
                year: y.year,
                age_lo: lo,
                age_hi: hi,
                deaths: Some(d.max(0.0).round() as u64),
                reliability: Reliability::Ok,
            });
        }
    }
    Ok(table)
}
