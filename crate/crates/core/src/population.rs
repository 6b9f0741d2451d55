//! Population surface `N(a, t)` interpolated from an age-by-year table with a
//! tensor-product quadratic B-spline.
//!
//! Knots follow the usual even-degree choice: triple knots at the ends and
//! interior knots at midpoints between data sites, so the collocation
//! problem is well posed and the surface is C¹ in the interior.
//!
//! Outside the data: ages above the last age knot hold the boundary profile;
//! years after the last year extend linearly from the last two annual
//! profiles, up to `max_extrapolation` years.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One evaluation of the surface with both first partials.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PopSample {
    pub value: f64,
    pub d_age: f64,
    pub d_time: f64,
}

/// Anything that can supply `N(a, t)`, `∂N/∂a` and `∂N/∂t`.
pub trait PopulationField: Sync {
    fn sample(&self, a: f64, t: f64) -> Result<PopSample>;
}

/// `N ≡ value` for all ages and times.
#[derive(Debug, Clone, Copy)]
pub struct UniformPopulation(pub f64);

impl PopulationField for UniformPopulation {
    fn sample(&self, _a: f64, _t: f64) -> Result<PopSample> {
        Ok(PopSample {
            value: self.0,
            ..PopSample::default()
        })
    }
}

/// Rectangular single-year-of-age by calendar-year population counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTable {
    ages: Vec<u32>,
    years: Vec<i32>,
    /// `counts[age_index][year_index]`
    counts: Vec<Vec<f64>>,
}

impl PopulationTable {
    /// Assembles `(year, age, count)` rows; duplicates and gaps are errors.
    pub fn from_rows(rows: impl IntoIterator<Item = (i32, u32, f64)>) -> Result<Self> {
        let mut cells: BTreeMap<(u32, i32), f64> = BTreeMap::new();
        for (year, age, count) in rows {
            if !(count >= 0.0) || !count.is_finite() {
                return Err(Error::domain(format!(
                    "population count for age {age}, year {year} must be >= 0, got {count}"
                )));
            }
            if cells.insert((age, year), count).is_some() {
                return Err(Error::domain(format!("duplicate population cell for age {age}, year {year}")));
            }
        }
        let mut ages: Vec<u32> = cells.keys().map(|(a, _)| *a).collect();
        ages.dedup();
        let mut years: Vec<i32> = cells.keys().map(|(_, y)| *y).collect();
        years.sort_unstable();
        years.dedup();
        let mut missing = Vec::new();
        let counts = ages
            .iter()
            .map(|a| {
                years
                    .iter()
                    .map(|y| match cells.get(&(*a, *y)) {
                        Some(c) => *c,
                        None => {
                            missing.push(format!("(year {y}, age {a})"));
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        if !missing.is_empty() {
            return Err(Error::Ragged(missing.join(", ")));
        }
        Ok(PopulationTable { ages, years, counts })
    }

    pub fn ages(&self) -> &[u32] {
        &self.ages
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn count(&self, year: i32, age: u32) -> Option<f64> {
        let ai = self.ages.binary_search(&age).ok()?;
        let yi = self.years.binary_search(&year).ok()?;
        Some(self.counts[ai][yi])
    }

    /// Sum over all ages in `year`.
    pub fn total(&self, year: i32) -> Option<f64> {
        let yi = self.years.binary_search(&year).ok()?;
        Some(self.counts.iter().map(|row| row[yi]).sum())
    }

    /// Rows in `(year, age, count)` order, year-major.
    pub fn rows(&self) -> impl Iterator<Item = (i32, u32, f64)> + '_ {
        self.years.iter().enumerate().flat_map(move |(yi, y)| {
            self.ages
                .iter()
                .enumerate()
                .map(move |(ai, a)| (*y, *a, self.counts[ai][yi]))
        })
    }
}

/// Quadratic B-spline basis interpolating at given sites.
#[derive(Debug, Clone)]
struct QuadraticBasis {
    sites: Vec<f64>,
    /// Distinct breakpoints; spans are `[breaks[k], breaks[k+1]]`.
    breaks: Vec<f64>,
    knots: Vec<f64>,
}

impl QuadraticBasis {
    fn new(sites: Vec<f64>) -> Self {
        let n = sites.len();
        let mut breaks = vec![sites[0]];
        for i in 1..n - 2 {
            breaks.push(0.5 * (sites[i] + sites[i + 1]));
        }
        breaks.push(sites[n - 1]);
        let mut knots = vec![sites[0]; 2];
        knots.extend_from_slice(&breaks);
        knots.extend([sites[n - 1]; 2]);
        QuadraticBasis { sites, breaks, knots }
    }

    fn len(&self) -> usize {
        self.sites.len()
    }

    /// First basis index and the three nonzero values and derivatives at `x`.
    fn eval(&self, x: f64) -> (usize, [f64; 3], [f64; 3]) {
        let span = match self.breaks.partition_point(|b| *b <= x) {
            0 => 0,
            k => (k - 1).min(self.breaks.len() - 2),
        };
        let mu = span + 2;
        let t = &self.knots;
        let n1_lo = (t[mu + 1] - x) / (t[mu + 1] - t[mu]);
        let n1_hi = (x - t[mu]) / (t[mu + 1] - t[mu]);
        let w_lo = t[mu + 1] - t[mu - 1];
        let w_hi = t[mu + 2] - t[mu];
        let values = [
            (t[mu + 1] - x) / w_lo * n1_lo,
            (x - t[mu - 1]) / w_lo * n1_lo + (t[mu + 2] - x) / w_hi * n1_hi,
            (x - t[mu]) / w_hi * n1_hi,
        ];
        let derivs = [
            -2.0 * n1_lo / w_lo,
            2.0 * (n1_lo / w_lo - n1_hi / w_hi),
            2.0 * n1_hi / w_hi,
        ];
        (mu - 2, values, derivs)
    }

    fn collocation(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for (row, x) in self.sites.iter().enumerate() {
            let (first, values, _) = self.eval(*x);
            for (k, v) in values.iter().enumerate() {
                m[(row, first + k)] = *v;
            }
        }
        m
    }
}

/// Interpolated, differentiable population surface.
#[derive(Debug, Clone)]
pub struct PopulationSurface {
    age_basis: QuadraticBasis,
    time_basis: QuadraticBasis,
    coefficients: DMatrix<f64>,
    max_extrapolation: f64,
}

/// Default reach of the linear time extrapolation past the last data year.
pub const DEFAULT_MAX_EXTRAPOLATION: f64 = 4.0;

/// Fits the interpolating surface to `table`.
pub fn fit_surface(table: &PopulationTable) -> Result<PopulationSurface> {
    PopulationSurface::fit(table)
}

impl PopulationSurface {
    pub fn fit(table: &PopulationTable) -> Result<Self> {
        if table.ages.len() < 3 || table.years.len() < 3 {
            return Err(Error::domain(format!(
                "surface fit needs at least 3 ages and 3 years, got {} x {}",
                table.ages.len(),
                table.years.len()
            )));
        }
        let age_basis = QuadraticBasis::new(table.ages.iter().map(|a| *a as f64).collect());
        let time_basis = QuadraticBasis::new(table.years.iter().map(|y| *y as f64).collect());
        let values = DMatrix::from_fn(table.ages.len(), table.years.len(), |i, j| table.counts[i][j]);
        let lu_age = age_basis.collocation().lu();
        let lu_time = time_basis.collocation().lu();
        // Z = A_a C A_t^T  =>  C = A_a^-1 Z A_t^-T
        let left = lu_age
            .solve(&values)
            .ok_or_else(|| Error::Numerical("singular age collocation matrix".into()))?;
        let coefficients = lu_time
            .solve(&left.transpose())
            .ok_or_else(|| Error::Numerical("singular time collocation matrix".into()))?
            .transpose();
        Ok(PopulationSurface {
            age_basis,
            time_basis,
            coefficients,
            max_extrapolation: DEFAULT_MAX_EXTRAPOLATION,
        })
    }

    pub fn with_max_extrapolation(mut self, years: f64) -> Self {
        self.max_extrapolation = years.max(0.0);
        self
    }

    pub fn age_range(&self) -> (f64, f64) {
        (self.age_basis.sites[0], *self.age_basis.sites.last().unwrap())
    }

    pub fn time_range(&self) -> (f64, f64) {
        (self.time_basis.sites[0], *self.time_basis.sites.last().unwrap())
    }

    /// Unclamped spline value and partials inside the data rectangle.
    fn spline(&self, a: f64, t: f64) -> PopSample {
        let (ia, va, da) = self.age_basis.eval(a);
        let (it, vt, dt) = self.time_basis.eval(t);
        let mut out = PopSample::default();
        for p in 0..3 {
            for q in 0..3 {
                let c = self.coefficients[(ia + p, it + q)];
                out.value += va[p] * vt[q] * c;
                out.d_age += da[p] * vt[q] * c;
                out.d_time += va[p] * dt[q] * c;
            }
        }
        out
    }

    fn raw(&self, a: f64, t: f64) -> Result<PopSample> {
        let (a_lo, a_hi) = self.age_range();
        let (t_lo, t_hi) = self.time_range();
        const SLACK: f64 = 1e-9;
        if !(a >= a_lo - SLACK) || !a.is_finite() {
            return Err(Error::domain(format!("age {a} below population data range")));
        }
        if !(t >= t_lo - SLACK) || !(t <= t_hi + self.max_extrapolation + SLACK) {
            return Err(Error::domain(format!(
                "time {t} outside population range [{t_lo}, {}]",
                t_hi + self.max_extrapolation
            )));
        }
        let held_age = a > a_hi;
        let a = a.clamp(a_lo, a_hi);
        let mut s = if t <= t_hi {
            self.spline(a, t.max(t_lo))
        } else {
            let sites = &self.time_basis.sites;
            let prev = sites[sites.len() - 2];
            let last = self.spline(a, t_hi);
            let before = self.spline(a, prev);
            let span = t_hi - prev;
            let slope = (last.value - before.value) / span;
            let slope_da = (last.d_age - before.d_age) / span;
            let dt = t - t_hi;
            PopSample {
                value: last.value + dt * slope,
                d_age: last.d_age + dt * slope_da,
                d_time: slope,
            }
        };
        if held_age {
            s.d_age = 0.0;
        }
        Ok(s)
    }

    /// Value and partials, clamped at zero from below.
    pub fn sample_at(&self, a: f64, t: f64) -> Result<PopSample> {
        let s = self.raw(a, t)?;
        if s.value < 0.0 {
            return Ok(PopSample::default());
        }
        Ok(s)
    }

    pub fn eval(&self, a: f64, t: f64) -> Result<f64> {
        Ok(self.sample_at(a, t)?.value)
    }

    pub fn eval_da(&self, a: f64, t: f64) -> Result<f64> {
        Ok(self.sample_at(a, t)?.d_age)
    }

    pub fn eval_dt(&self, a: f64, t: f64) -> Result<f64> {
        Ok(self.sample_at(a, t)?.d_time)
    }
}

impl PopulationField for PopulationSurface {
    fn sample(&self, a: f64, t: f64) -> Result<PopSample> {
        self.sample_at(a, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(f: impl Fn(f64, f64) -> f64, ages: u32, years: std::ops::RangeInclusive<i32>) -> PopulationTable {
        let mut rows = Vec::new();
        for y in years {
            for a in 0..ages {
                rows.push((y, a, f(a as f64, y as f64)));
            }
        }
        PopulationTable::from_rows(rows).unwrap()
    }

    #[test]
    fn constant_table_is_reproduced() {
        let s = fit_surface(&table(|_, _| 5000.0, 20, 2000..=2005)).unwrap();
        for (a, t) in [(0.0, 2000.0), (3.3, 2001.7), (19.0, 2005.0), (11.2, 2003.3)] {
            let p = s.sample(a, t).unwrap();
            assert!((p.value - 5000.0).abs() < 1e-8);
            assert!(p.d_age.abs() < 1e-8 && p.d_time.abs() < 1e-8);
        }
    }

    #[test]
    fn bilinear_table_is_reproduced() {
        let f = |a: f64, t: f64| 1000.0 + 30.0 * a + 12.0 * (t - 2000.0);
        let s = fit_surface(&table(f, 15, 2000..=2006)).unwrap();
        for (a, t) in [(0.5, 2000.2), (7.7, 2004.9), (13.9, 2006.0)] {
            let p = s.sample(a, t).unwrap();
            assert!((p.value - f(a, t)).abs() < 1e-8);
            assert!((p.d_age - 30.0).abs() < 1e-8);
            assert!((p.d_time - 12.0).abs() < 1e-8);
        }
    }

    #[test]
    fn interpolates_knots() {
        let f = |a: f64, t: f64| 1e5 * (1.0 + 0.3 * (a / 7.0).sin()) * (1.0 + 0.01 * (t - 2000.0));
        let tab = table(f, 30, 2000..=2008);
        let s = fit_surface(&tab).unwrap();
        for (y, a, c) in tab.rows() {
            let v = s.eval(a as f64, y as f64).unwrap();
            assert!((v - c).abs() <= 1e-6 * c);
        }
    }

    #[test]
    fn extrapolates_linearly_and_holds_old_ages() {
        let f = |a: f64, t: f64| 2e4 + 100.0 * a + (t - 2000.0).powi(2) * 10.0;
        let tab = table(f, 86, 2000..=2010);
        let s = fit_surface(&tab).unwrap();
        for a in [20u32, 50, 85] {
            let last = tab.count(2010, a).unwrap();
            let prev = tab.count(2009, a).unwrap();
            let manual = last + 2.0 * (last - prev);
            assert!((s.eval(a as f64, 2012.0).unwrap() - manual).abs() < 1e-6 * manual);
            assert!((s.eval_dt(a as f64, 2012.0).unwrap() - (last - prev)).abs() < 1e-6 * manual);
        }
        let boundary = s.eval(85.0, 2004.0).unwrap();
        assert!((boundary - tab.count(2004, 85).unwrap()).abs() < 1e-6 * boundary);
        assert_eq!(s.eval(100.0, 2004.0).unwrap(), boundary);
        assert_eq!(s.eval_da(100.0, 2004.0).unwrap(), 0.0);
        assert!(s.eval(30.0, 1999.0).is_err());
        assert!(s.eval(30.0, 2010.0 + DEFAULT_MAX_EXTRAPOLATION + 0.5).is_err());
        assert!(s.eval(-1.0, 2004.0).is_err());
    }

    #[test]
    fn table_rejects_duplicates_and_gaps() {
        assert!(PopulationTable::from_rows(vec![(2000, 1, 1.0), (2000, 1, 2.0)]).is_err());
        let err = PopulationTable::from_rows(vec![(2000, 1, 1.0), (2001, 2, 2.0)]).unwrap_err();
        assert!(matches!(err, Error::Ragged(_)));
        let small = table(|_, _| 1.0, 2, 2000..=2005);
        assert!(fit_surface(&small).is_err());
    }
}
