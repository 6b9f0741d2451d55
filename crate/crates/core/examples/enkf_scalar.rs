//! Ensemble Kalman filter on a scalar linear-Gaussian system, against the
//! exact Kalman filter.

use od_assim::enkf::*;

struct Decay(f64);

impl Dynamics for Decay {
    fn dim(&self) -> usize {
        1
    }

    fn derivative(&self, x: &[f64], _: &[f64], _: f64, _: f64, out: &mut [f64]) -> od_assim::Result<()> {
        out[0] = self.0 * x[0];
        Ok(())
    }
}

struct Identity;

impl Measurement for Identity {
    fn dim(&self) -> usize {
        1
    }

    fn measure(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

fn main() -> od_assim::Result<()> {
    let (m0, p0, k, dt, q, r, z) = (1.0, 2.0, -0.5, 0.2, 0.1, 0.5, 0.3);

    let phi = 1.0 + dt * k;
    let prior = (phi * m0, phi * phi * p0 + q);
    let gain = prior.1 / (prior.1 + r);
    let exact = (prior.0 + gain * (z - prior.0), (1.0 - gain) * prior.1);
    println!("Kalman filter: mean {:.5}, variance {:.5}", exact.0, exact.1);

    println!("M\tmean\tvariance");
    for m in [10, 100, 1_000, 10_000, 100_000] {
        let streams = NoiseStreams::new(1);
        let mut ens = init_ensemble(m, &[m0], &Covariance::Diagonal(vec![p0]), 0.0, &streams, |_| {})?;
        forecast_step(&mut ens, &Decay(k), dt, &Covariance::Diagonal(vec![q]).sampler()?, &streams)?;
        update_step(&mut ens, &ObservationVector::unmasked(vec![z]), &Covariance::Diagonal(vec![r]), &Identity, &streams)?;
        println!("{m}\t{:.5}\t{:.5}", ens.mean()[0], ens.variance()[0]);
    }
    Ok(())
}
