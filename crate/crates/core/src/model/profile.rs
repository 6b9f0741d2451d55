use super::rates::GammaComponent;
use super::{DensityField, InitialCondition};

/// Density at the start of a characteristic window, with its age derivative.
pub trait InitialProfile: Sync {
    fn density(&self, a: f64) -> f64;
    fn slope(&self, a: f64) -> f64;
}

impl InitialProfile for InitialCondition {
    fn density(&self, a: f64) -> f64 {
        GammaComponent::new(self.prevalence * self.n0_total, self.alpha0, self.beta0).pdf(a)
    }

    fn slope(&self, a: f64) -> f64 {
        GammaComponent::new(self.prevalence * self.n0_total, self.alpha0, self.beta0).slope(a)
    }
}

/// Shape-preserving cubic Hermite (PCHIP) interpolant of a density field.
///
/// Between nodes the interpolant stays within the bracket of the two node
/// values, so a nonnegative field gives a nonnegative profile. Beyond the
/// last node the boundary value is held.
#[derive(Debug, Clone)]
pub struct TabulatedProfile {
    a0: f64,
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl TabulatedProfile {
    pub fn new(field: &DensityField) -> Self {
        let h = field.grid.delta_a();
        let y = &field.values;
        let n = y.len();
        let secants: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        let mut slopes = vec![0.0; n];
        for k in 1..n - 1 {
            let (s0, s1) = (secants[k - 1], secants[k]);
            if s0 * s1 > 0.0 {
                slopes[k] = 2.0 / (1.0 / s0 + 1.0 / s1);
            }
        }
        if n == 2 {
            slopes[0] = secants[0];
            slopes[1] = secants[0];
        } else {
            slopes[0] = end_slope(secants[0], secants[1]);
            slopes[n - 1] = end_slope(secants[n - 2], secants[n - 3]);
        }
        TabulatedProfile {
            a0: field.grid.a0(),
            h,
            values: y.clone(),
            slopes,
        }
    }

    fn locate(&self, a: f64) -> Option<(usize, f64)> {
        let n = self.values.len();
        let u = (a - self.a0) / self.h;
        if u >= (n - 1) as f64 || !u.is_finite() {
            return None;
        }
        let k = u.max(0.0).floor() as usize;
        Some((k, (u - k as f64).clamp(0.0, 1.0)))
    }
}

fn end_slope(s0: f64, s1: f64) -> f64 {
    let d = 0.5 * (3.0 * s0 - s1);
    if d.signum() != s0.signum() {
        0.0
    } else if s0.signum() != s1.signum() && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

impl InitialProfile for TabulatedProfile {
    fn density(&self, a: f64) -> f64 {
        let Some((k, u)) = self.locate(a) else {
            return *self.values.last().unwrap();
        };
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.slopes[k] * self.h, self.slopes[k + 1] * self.h);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * d0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * d1
    }

    fn slope(&self, a: f64) -> f64 {
        let Some((k, u)) = self.locate(a) else {
            return 0.0;
        };
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.slopes[k] * self.h, self.slopes[k + 1] * self.h);
        let u2 = u * u;
        ((6.0 * u2 - 6.0 * u) * y0
            + (3.0 * u2 - 4.0 * u + 1.0) * d0
            + (-6.0 * u2 + 6.0 * u) * y1
            + (3.0 * u2 - 2.0 * u) * d1)
            / self.h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AgeGrid;

    #[test]
    fn reproduces_nodes_and_stays_nonnegative() {
        let grid = AgeGrid::new(0.0, 1.2, 30).unwrap();
        let values: Vec<f64> = (0..30)
            .map(|j| if j % 7 == 0 { 0.0 } else { (j as f64).sin().abs() * 100.0 })
            .collect();
        let field = DensityField::new(grid, values.clone(), 0.0).unwrap();
        let p = TabulatedProfile::new(&field);
        for (j, v) in values.iter().enumerate() {
            assert!((p.density(grid.age(j)) - v).abs() < 1e-9);
        }
        for i in 0..3000 {
            let a = i as f64 * 0.0117;
            assert!(p.density(a) >= -1e-12);
        }
    }

    #[test]
    fn slope_matches_finite_difference() {
        let grid = AgeGrid::new(0.0, 1.0, 40).unwrap();
        let values: Vec<f64> = grid.ages().map(|a| (a * 0.2).sin() + 2.0).collect();
        let p = TabulatedProfile::new(&DensityField::new(grid, values, 0.0).unwrap());
        for a in [3.3, 10.71, 25.05] {
            let fd = (p.density(a + 1e-6) - p.density(a - 1e-6)) / 2e-6;
            assert!((fd - p.slope(a)).abs() < 1e-6);
        }
    }
}
