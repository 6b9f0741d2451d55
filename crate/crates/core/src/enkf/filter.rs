//! Perturbed-observation ensemble Kalman filter, independent of the model.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::covariance::{Covariance, Sampler};
use super::rng::{NoiseStreams, Purpose};
use crate::error::{Error, Result};

/// Right-hand side `f(x, t)` of the forecast model.
///
/// `origin` is the member state at `window_start`, the last time the
/// ensemble was updated (or initialized).
pub trait Dynamics: Sync {
    fn dim(&self) -> usize;

    fn derivative(&self, state: &[f64], origin: &[f64], window_start: f64, t: f64, out: &mut [f64]) -> Result<()>;
}

/// Measurement function `h(x)`.
pub trait Measurement: Sync {
    fn dim(&self) -> usize;

    fn measure(&self, state: &[f64]) -> Vec<f64>;
}

/// Observed values with a mask; masked entries take no part in the update.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationVector {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl ObservationVector {
    pub fn unmasked(values: Vec<f64>) -> Self {
        let mask = vec![false; values.len()];
        ObservationVector { values, mask }
    }

    pub fn active(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, m)| !**m)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    members: Vec<Vec<f64>>,
    origins: Vec<Vec<f64>>,
    time: f64,
    window_start: f64,
    forecast_steps: u64,
    updates: u64,
}

impl Ensemble {
    pub fn from_members(members: Vec<Vec<f64>>, time: f64) -> Result<Self> {
        let dim = members.first().map(|m| m.len()).unwrap_or(0);
        if members.len() < 2 {
            return Err(Error::config("an ensemble needs at least 2 members"));
        }
        if members.iter().any(|m| m.len() != dim) {
            return Err(Error::config("ensemble members differ in length"));
        }
        Ok(Ensemble {
            origins: members.clone(),
            members,
            time,
            window_start: time,
            forecast_steps: 0,
            updates: 0,
        })
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn dim(&self) -> usize {
        self.members[0].len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn window_start(&self) -> f64 {
        self.window_start
    }

    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.members
    }

    pub fn origins(&self) -> &[Vec<f64>] {
        &self.origins
    }

    /// Starts a new forecast window at the current time from the current members.
    pub fn restart_window(&mut self) {
        self.origins.clone_from(&self.members);
        self.window_start = self.time;
    }

    /// Moves the clock without touching members; used to repeat a cycle.
    pub fn set_time(&mut self, time: f64) {
        self.time = time;
        self.window_start = time;
        self.origins.clone_from(&self.members);
    }

    pub fn mean(&self) -> Vec<f64> {
        ensemble_mean(&self.members)
    }

    /// Diagonal of the ensemble covariance.
    pub fn variance(&self) -> Vec<f64> {
        let mean = self.mean();
        let m = self.size() as f64;
        let mut var = vec![0.0; self.dim()];
        for x in &self.members {
            for (v, (xi, mi)) in var.iter_mut().zip(x.iter().zip(mean.iter())) {
                *v += (xi - mi) * (xi - mi);
            }
        }
        var.iter_mut().for_each(|v| *v /= m - 1.0);
        var
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        ensemble_covariance(&self.members)
    }
}

pub fn ensemble_mean(members: &[Vec<f64>]) -> Vec<f64> {
    let m = members.len() as f64;
    let mut mean = vec![0.0; members[0].len()];
    for x in members {
        for (acc, v) in mean.iter_mut().zip(x) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    mean
}

fn anomalies(members: &[Vec<f64>]) -> DMatrix<f64> {
    let mean = ensemble_mean(members);
    DMatrix::from_fn(mean.len(), members.len(), |i, k| members[k][i] - mean[i])
}

/// `1/(M-1) Σ (x - x̄)(x - x̄)ᵀ`.
pub fn ensemble_covariance(members: &[Vec<f64>]) -> DMatrix<f64> {
    let a = anomalies(members);
    &a * a.transpose() / (members.len() as f64 - 1.0)
}

/// `1/(M-1) Σ (x - x̄)(y - ȳ)ᵀ` over paired members.
pub fn ensemble_cross_covariance(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> DMatrix<f64> {
    let a = anomalies(xs);
    let b = anomalies(ys);
    &a * b.transpose() / (xs.len() as f64 - 1.0)
}

/// Draws `size` members from `N(x0, p0)`, then applies `project` to each.
pub fn init_ensemble(
    size: usize,
    x0: &[f64],
    p0: &Covariance,
    time: f64,
    streams: &NoiseStreams,
    project: impl Fn(&mut [f64]) + Sync,
) -> Result<Ensemble> {
    if p0.dim() != x0.len() {
        return Err(Error::config(format!(
            "initial covariance has dimension {} for a state of length {}",
            p0.dim(),
            x0.len()
        )));
    }
    let sampler = p0.sampler()?;
    let members = (0..size as u64)
        .into_par_iter()
        .map(|i| {
            let mut x = x0.to_vec();
            sampler.add_draw(&mut streams.stream(Purpose::Initial, i, 0), &mut x);
            project(&mut x);
            x
        })
        .collect();
    Ensemble::from_members(members, time)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForecastReport {
    /// Members whose derivative was not finite and were redrawn around the mean.
    pub resampled: Vec<usize>,
}

/// One Euler step `χ ← χ + Δt f(χ, t) + ε`, `ε ~ N(0, Q)`, for every member.
pub fn forecast_step(
    ens: &mut Ensemble,
    dynamics: &dyn Dynamics,
    dt: f64,
    process_noise: &Sampler,
    streams: &NoiseStreams,
) -> Result<ForecastReport> {
    if dynamics.dim() != ens.dim() || process_noise.dim() != ens.dim() {
        return Err(Error::config("dynamics, noise and ensemble dimensions differ"));
    }
    let t = ens.time;
    let window_start = ens.window_start;
    let step = ens.forecast_steps;
    let dim = ens.dim();
    let outcomes: Vec<bool> = ens
        .members
        .par_iter_mut()
        .zip(ens.origins.par_iter())
        .enumerate()
        .map(|(i, (x, origin))| {
            let mut f = vec![0.0; dim];
            let ok = dynamics.derivative(x, origin, window_start, t, &mut f).is_ok()
                && f.iter().all(|v| v.is_finite());
            if ok {
                for (xi, fi) in x.iter_mut().zip(&f) {
                    *xi += dt * fi;
                }
                process_noise.add_draw(&mut streams.stream(Purpose::Process, i as u64, step), x);
            }
            ok
        })
        .collect();

    let resampled: Vec<usize> = outcomes.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i).collect();
    if !resampled.is_empty() {
        let healthy: Vec<Vec<f64>> = ens
            .members
            .iter()
            .zip(&outcomes)
            .filter(|(_, ok)| **ok)
            .map(|(x, _)| x.clone())
            .collect();
        if healthy.is_empty() {
            return Err(Error::Numerical("every ensemble member produced a non-finite derivative".into()));
        }
        let mean = ensemble_mean(&healthy);
        for &i in &resampled {
            let mut x = mean.clone();
            process_noise.add_draw(&mut streams.stream(Purpose::Resample, i as u64, step), &mut x);
            ens.members[i] = x;
            ens.origins[i].clone_from(&ens.members[i]);
        }
        warn!("resampled {} degenerate ensemble members at t={t}", resampled.len());
    }
    ens.time = t + dt;
    ens.forecast_steps += 1;
    Ok(ForecastReport { resampled })
}

/// Quantities computed during an update, for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct UpdateReport {
    /// Indices of the observation entries that were used.
    pub active: Vec<usize>,
    pub prior_mean: Vec<f64>,
    pub predicted_mean: Vec<f64>,
    pub p_zz: DMatrix<f64>,
    pub p_xz: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub pseudo_inverse: bool,
}

impl UpdateReport {
    /// `P⁻ - K P_zz Kᵀ` given the prior covariance.
    pub fn posterior_covariance(&self, prior: &DMatrix<f64>) -> DMatrix<f64> {
        prior - &self.gain * &self.p_zz * self.gain.transpose()
    }
}

/// Solves `X P = B` for symmetric `P`, falling back to a thresholded
/// eigen pseudo-inverse when `P` is not positive definite.
fn solve_symmetric_right(p: &DMatrix<f64>, b: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    if let Some(ch) = p.clone().cholesky() {
        // X P = B  <=>  P Xᵀ = Bᵀ
        return (ch.solve(&b.transpose()).transpose(), false);
    }
    let eig = p.clone().symmetric_eigen();
    let threshold = 1e-12 * p.trace().abs();
    let inv_vals = eig.eigenvalues.map(|l| if l > threshold { 1.0 / l } else { 0.0 });
    let pinv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
    warn!("innovation covariance is singular; using pseudo-inverse");
    (b * pinv, true)
}

/// Perturbed-observation update `χ ← χ + K (z + η - h(χ))`.
///
/// Observation noise is drawn for every entry of `z` (masked or not) so the
/// random numbers do not depend on the mask.
pub fn update_step(
    ens: &mut Ensemble,
    z: &ObservationVector,
    observation_noise: &Covariance,
    h: &dyn Measurement,
    streams: &NoiseStreams,
) -> Result<UpdateReport> {
    let l_full = h.dim();
    if z.values.len() != l_full || z.mask.len() != l_full || observation_noise.dim() != l_full {
        return Err(Error::config(format!(
            "observation length {} does not match measurement dimension {l_full}",
            z.values.len()
        )));
    }
    let active = z.active();
    let prior_mean = ens.mean();
    let predicted_full: Vec<Vec<f64>> = ens.members.par_iter().map(|x| h.measure(x)).collect();
    let predicted: Vec<Vec<f64>> = predicted_full
        .iter()
        .map(|p| active.iter().map(|&i| p[i]).collect())
        .collect();
    let predicted_mean = if active.is_empty() { Vec::new() } else { ensemble_mean(&predicted) };

    let step = ens.updates;
    ens.updates += 1;
    if active.is_empty() {
        return Ok(UpdateReport {
            active,
            prior_mean,
            predicted_mean,
            p_zz: DMatrix::zeros(0, 0),
            p_xz: DMatrix::zeros(ens.dim(), 0),
            gain: DMatrix::zeros(ens.dim(), 0),
            pseudo_inverse: false,
        });
    }

    let r = observation_noise.select(&active);
    let p_zz = ensemble_covariance(&predicted) + &r;
    let p_xz = ensemble_cross_covariance(&ens.members, &predicted);
    let (gain, pseudo_inverse) = solve_symmetric_right(&p_zz, &p_xz);
    if gain.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("Kalman gain is not finite".into()));
    }

    let noise = observation_noise.sampler()?;
    let z_active = DVector::from_iterator(active.len(), active.iter().map(|&i| z.values[i]));
    ens.members
        .par_iter_mut()
        .zip(predicted.par_iter())
        .enumerate()
        .for_each(|(i, (x, hx))| {
            let eta = noise.draw(&mut streams.stream(Purpose::Observation, i as u64, step));
            let innovation = DVector::from_fn(active.len(), |k, _| z_active[k] + eta[active[k]] - hx[k]);
            let dx = &gain * innovation;
            for (xi, d) in x.iter_mut().zip(dx.iter()) {
                *xi += d;
            }
        });

    Ok(UpdateReport {
        active,
        prior_mean,
        predicted_mean,
        p_zz,
        p_xz,
        gain,
        pseudo_inverse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear(DMatrix<f64>);

    impl Dynamics for Linear {
        fn dim(&self) -> usize {
            self.0.nrows()
        }

        fn derivative(&self, state: &[f64], _: &[f64], _: f64, _: f64, out: &mut [f64]) -> Result<()> {
            let y = &self.0 * DVector::from_column_slice(state);
            out.copy_from_slice(y.as_slice());
            Ok(())
        }
    }

    struct Identity(usize);

    impl Measurement for Identity {
        fn dim(&self) -> usize {
            self.0
        }

        fn measure(&self, state: &[f64]) -> Vec<f64> {
            state[..self.0].to_vec()
        }
    }

    fn streams() -> NoiseStreams {
        NoiseStreams::new(99)
    }

    #[test]
    fn degenerate_initial_covariance_copies_mean() {
        let x0 = vec![1.0, -2.0, 3.5];
        let ens = init_ensemble(7, &x0, &Covariance::zeros(3), 0.0, &streams(), |_| {}).unwrap();
        assert_eq!(ens.size(), 7);
        assert!(ens.members().iter().all(|m| *m == x0));
    }

    #[test]
    fn initial_mean_within_standard_error() {
        let x0 = vec![5.0, -1.0];
        let m = 4000;
        let ens = init_ensemble(m, &x0, &Covariance::Diagonal(vec![4.0, 1.0]), 0.0, &streams(), |_| {}).unwrap();
        let mean = ens.mean();
        assert!((mean[0] - 5.0).abs() < 4.0 * 2.0 / (m as f64).sqrt());
        assert!((mean[1] + 1.0).abs() < 4.0 * 1.0 / (m as f64).sqrt());
    }

    #[test]
    fn zero_dynamics_without_noise_is_identity() {
        let x0 = vec![1.0, 2.0];
        let mut ens = init_ensemble(5, &x0, &Covariance::Diagonal(vec![1.0, 1.0]), 0.0, &streams(), |_| {}).unwrap();
        let before = ens.members().to_vec();
        let q = Covariance::zeros(2).sampler().unwrap();
        forecast_step(&mut ens, &Linear(DMatrix::zeros(2, 2)), 0.1, &q, &streams()).unwrap();
        assert_eq!(ens.members(), &before[..]);
        assert!((ens.time() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn linear_euler_step_is_exact() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.5, 0.1, 0.2, -0.3]);
        let mut ens = init_ensemble(6, &[1.0, 2.0], &Covariance::Diagonal(vec![1.0, 1.0]), 0.0, &streams(), |_| {}).unwrap();
        let before = ens.members().to_vec();
        let q = Covariance::zeros(2).sampler().unwrap();
        forecast_step(&mut ens, &Linear(a.clone()), 0.1, &q, &streams()).unwrap();
        for (x, x0) in ens.members().iter().zip(&before) {
            let v = DVector::from_column_slice(x0);
            let expected = &v + &a * &v * 0.1;
            for (p, e) in x.iter().zip(expected.iter()) {
                assert_eq!(*p, *e);
            }
        }
    }

    #[test]
    fn huge_observation_noise_leaves_prior() {
        let mut ens = init_ensemble(50, &[0.0, 1.0], &Covariance::Diagonal(vec![1.0, 1.0]), 0.0, &streams(), |_| {}).unwrap();
        let before = ens.mean();
        let z = ObservationVector::unmasked(vec![10.0]);
        let report = update_step(&mut ens, &z, &Covariance::Diagonal(vec![1e30]), &Identity(1), &streams()).unwrap();
        assert!(report.gain.abs().max() < 1e-20);
        for (a, b) in ens.mean().iter().zip(&before) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_observation_of_degenerate_prior() {
        // tiny prior spread, exact observation: the posterior collapses onto z
        let mut ens = init_ensemble(200, &[3.0], &Covariance::Diagonal(vec![1e-2]), 0.0, &streams(), |_| {}).unwrap();
        let z = ObservationVector::unmasked(vec![7.0]);
        update_step(&mut ens, &z, &Covariance::Diagonal(vec![0.0]), &Identity(1), &streams()).unwrap();
        for x in ens.members() {
            assert!((x[0] - 7.0).abs() < 1e-9);
        }
    }

    #[test]
    fn masked_entries_have_no_influence() {
        let base = init_ensemble(40, &[1.0, 2.0, 3.0], &Covariance::Diagonal(vec![1.0, 1.0, 1.0]), 0.0, &streams(), |_| {}).unwrap();
        let run = |masked_value: f64| {
            let mut ens = base.clone();
            let z = ObservationVector {
                values: vec![1.5, masked_value, 2.5],
                mask: vec![false, true, false],
            };
            update_step(&mut ens, &z, &Covariance::Diagonal(vec![0.1, 0.1, 0.1]), &Identity(3), &streams()).unwrap();
            ens.members().to_vec()
        };
        assert_eq!(run(0.0), run(1e6));
    }

    #[test]
    fn scalar_update_matches_kalman_filter() {
        // prior N(2, 1.5), observation z = 3.1 with R = 0.5
        let m = 100_000;
        let (m0, p0, r, z) = (2.0, 1.5, 0.5, 3.1);
        let mut ens = init_ensemble(m, &[m0], &Covariance::Diagonal(vec![p0]), 0.0, &streams(), |_| {}).unwrap();
        update_step(&mut ens, &ObservationVector::unmasked(vec![z]), &Covariance::Diagonal(vec![r]), &Identity(1), &streams()).unwrap();
        let k = p0 / (p0 + r);
        let mean = m0 + k * (z - m0);
        let var = (1.0 - k) * p0;
        let tol = 3.0 / (m as f64).sqrt();
        assert!((ens.mean()[0] - mean).abs() < tol * mean.abs());
        assert!((ens.variance()[0] - var).abs() < tol * var);
    }

    #[test]
    fn posterior_covariance_formula() {
        let mut ens = init_ensemble(500, &[0.0, 0.0], &Covariance::Diagonal(vec![2.0, 1.0]), 0.0, &streams(), |_| {}).unwrap();
        let prior = ens.covariance();
        let report = update_step(&mut ens, &ObservationVector::unmasked(vec![1.0]), &Covariance::Diagonal(vec![0.3]), &Identity(1), &streams()).unwrap();
        let post = report.posterior_covariance(&prior);
        // scalar observation of the first component: P11 (1 - K1)
        let k1 = prior[(0, 0)] / (prior[(0, 0)] + 0.3);
        assert!((post[(0, 0)] - prior[(0, 0)] * (1.0 - k1)).abs() < 1e-12);
    }

    #[test]
    fn singular_innovation_covariance_uses_pseudo_inverse() {
        let members = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        let mut ens = Ensemble::from_members(members, 0.0).unwrap();
        let z = ObservationVector::unmasked(vec![2.5, 2.5]);
        let report = update_step(&mut ens, &z, &Covariance::zeros(2), &Identity(2), &streams()).unwrap();
        assert!(report.pseudo_inverse);
        assert!(ens.members().iter().all(|x| x.iter().all(|v| v.is_finite())));
    }
}
