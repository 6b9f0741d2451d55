use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use super::rng::standard_normal;
use crate::error::{Error, Result};

/// Gaussian covariance in the shapes the filter needs.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Diagonal(Vec<f64>),
    /// `scale · J`, with `J` the all-ones matrix: one shared draw for every entry.
    ScaledOnes { dim: usize, scale: f64 },
    Full(DMatrix<f64>),
}

impl Covariance {
    pub fn zeros(dim: usize) -> Self {
        Covariance::Diagonal(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        match self {
            Covariance::Diagonal(d) => d.len(),
            Covariance::ScaledOnes { dim, .. } => *dim,
            Covariance::Full(m) => m.nrows(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            Covariance::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            Covariance::ScaledOnes { dim, scale } => DMatrix::from_element(*dim, *dim, *scale),
            Covariance::Full(m) => m.clone(),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match self {
            Covariance::Diagonal(d) => d.clone(),
            Covariance::ScaledOnes { dim, scale } => vec![*scale; *dim],
            Covariance::Full(m) => m.diagonal().iter().copied().collect(),
        }
    }

    /// Rows and columns `keep` of the matrix.
    pub fn select(&self, keep: &[usize]) -> DMatrix<f64> {
        let full = self.to_matrix();
        DMatrix::from_fn(keep.len(), keep.len(), |i, j| full[(keep[i], keep[j])])
    }

    /// Prepares a square-root factor for sampling; rejects matrices that are
    /// not symmetric positive semidefinite.
    pub fn sampler(&self) -> Result<Sampler> {
        match self {
            Covariance::Diagonal(d) => {
                if let Some(v) = d.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                    return Err(Error::domain(format!("covariance diagonal entry {v} is negative")));
                }
                Ok(Sampler::Diagonal(d.iter().map(|v| v.sqrt()).collect()))
            }
            Covariance::ScaledOnes { dim, scale } => {
                if !(*scale >= 0.0) {
                    return Err(Error::domain(format!("covariance scale {scale} is negative")));
                }
                Ok(Sampler::Shared {
                    dim: *dim,
                    sd: scale.sqrt(),
                })
            }
            Covariance::Full(m) => {
                let n = m.nrows();
                if m.ncols() != n {
                    return Err(Error::domain("covariance matrix is not square"));
                }
                let asym = (m - m.transpose()).abs().max();
                if asym > 1e-12 * m.abs().max().max(1e-300) {
                    return Err(Error::domain("covariance matrix is not symmetric"));
                }
                if let Some(ch) = m.clone().cholesky() {
                    return Ok(Sampler::Factor(ch.l()));
                }
                let eig = m.clone().symmetric_eigen();
                let tol = 1e-12 * m.trace().abs().max(1e-300);
                if eig.eigenvalues.iter().any(|l| *l < -tol) {
                    return Err(Error::domain("covariance matrix is not positive semidefinite"));
                }
                let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
                Ok(Sampler::Factor(&eig.eigenvectors * DMatrix::from_diagonal(&roots)))
            }
        }
    }
}

/// Square-root form of a [`Covariance`] for drawing `N(0, C)` vectors.
#[derive(Debug, Clone)]
pub enum Sampler {
    Diagonal(Vec<f64>),
    Shared { dim: usize, sd: f64 },
    Factor(DMatrix<f64>),
}

impl Sampler {
    pub fn dim(&self) -> usize {
        match self {
            Sampler::Diagonal(d) => d.len(),
            Sampler::Shared { dim, .. } => *dim,
            Sampler::Factor(l) => l.nrows(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Sampler::Diagonal(d) => d.iter().all(|v| *v == 0.0),
            Sampler::Shared { sd, .. } => *sd == 0.0,
            Sampler::Factor(l) => l.iter().all(|v| *v == 0.0),
        }
    }

    /// Adds one draw to `out`.
    pub fn add_draw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            Sampler::Diagonal(sd) => {
                for (o, s) in out.iter_mut().zip(sd) {
                    let z = standard_normal(rng);
                    *o += s * z;
                }
            }
            Sampler::Shared { sd, .. } => {
                let z = sd * standard_normal(rng);
                for o in out.iter_mut() {
                    *o += z;
                }
            }
            Sampler::Factor(l) => {
                let z = DVector::from_fn(l.ncols(), |_, _| standard_normal(rng));
                let x = l * z;
                for (o, v) in out.iter_mut().zip(x.iter()) {
                    *o += v;
                }
            }
        }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.add_draw(rng, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enkf::rng::{NoiseStreams, Purpose};

    #[test]
    fn rejects_indefinite_matrices() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(Covariance::Full(m).sampler().is_err());
        assert!(Covariance::Diagonal(vec![1.0, -1.0]).sampler().is_err());
        let semidefinite = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(Covariance::Full(semidefinite).sampler().is_ok());
    }

    #[test]
    fn shared_draw_moves_every_entry_together() {
        let s = Covariance::ScaledOnes { dim: 5, scale: 4.0 }.sampler().unwrap();
        let mut rng = NoiseStreams::new(1).stream(Purpose::Process, 0, 0);
        let d = s.draw(&mut rng);
        assert!(d.iter().all(|v| *v == d[0]));
    }

    #[test]
    fn full_sampler_reproduces_covariance() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let s = Covariance::Full(m.clone()).sampler().unwrap();
        let streams = NoiseStreams::new(3);
        let n = 40_000;
        let mut acc = DMatrix::zeros(2, 2);
        for i in 0..n {
            let d = s.draw(&mut streams.stream(Purpose::Initial, i, 0));
            let v = DVector::from_vec(d);
            acc += &v * v.transpose();
        }
        acc /= n as f64;
        assert!((acc - m).abs().max() < 0.06);
    }
}
