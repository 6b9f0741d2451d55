//! Synthetic inputs for runs without exported CDC tables: a smooth
//! United-States-like population table and model-generated death counts.

use crate::enkf::sud::SudParams;
use crate::population::PopulationTable;

/// Ages 0–85 population of the United States in 1999.
pub const US_POPULATION_1999: f64 = 274_886_150.0;

fn age_shape(a: f64) -> f64 {
    // flat through working ages, tapering after 55, with an 85+ accumulation
    let taper = 1.0 / (1.0 + ((a - 72.0) / 7.0).exp());
    let bump = 1.0 + 0.08 * (-((a - 40.0) / 9.0).powi(2)).exp();
    if a >= 85.0 {
        3.2 * taper.max(0.05)
    } else {
        taper * bump
    }
}

/// Single-year ages 0–85 for `first_year..=last_year`, scaled so that the
/// first year sums to `total_first_year` and growing by `annual_growth`
/// (fraction of the first-year total) per year.
pub fn population_table(first_year: i32, last_year: i32, total_first_year: f64, annual_growth: f64) -> PopulationTable {
    let raw: f64 = (0..=85).map(|a| age_shape(a as f64)).sum();
    let scale = total_first_year / raw;
    let mut rows = Vec::new();
    for year in first_year..=last_year {
        let dy = (year - first_year) as f64;
        for age in 0..=85u32 {
            // older ages grow faster than younger ones
            let tilt = 1.0 + annual_growth * dy * (0.6 + 0.8 * age as f64 / 85.0);
            rows.push((year, age, (scale * age_shape(age as f64) * tilt).round()));
        }
    }
    PopulationTable::from_rows(rows).expect("synthetic table is rectangular")
}

/// Nationwide-like table for 1999–2021.
pub fn us_like_population() -> PopulationTable {
    population_table(1999, 2021, US_POPULATION_1999, 0.0085)
}

/// Parameter truth for twin experiments: `μ_d` and the peak age of the first
/// influx component move linearly between the end points over
/// `first_year..=last_year` and are held outside that range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drift {
    pub first_year: i32,
    pub last_year: i32,
    pub mu_d: (f64, f64),
    pub a1_max: (f64, f64),
}

impl Drift {
    pub fn nationwide() -> Self {
        Drift {
            first_year: 1999,
            last_year: 2021,
            mu_d: (0.002, 0.015),
            a1_max: (30.0, 20.0),
        }
    }

    /// `base` with the drifting entries replaced; `β1` is kept and `α1`
    /// follows from the peak age.
    pub fn params(&self, base: SudParams, year: i32) -> SudParams {
        let span = (self.last_year - self.first_year).max(1) as f64;
        let k = ((year - self.first_year) as f64 / span).clamp(0.0, 1.0);
        let lerp = |(a, b): (f64, f64)| a + (b - a) * k;
        SudParams {
            mu_d: lerp(self.mu_d),
            alpha1: 1.0 + lerp(self.a1_max) * base.beta1,
            ..base
        }
    }
}
