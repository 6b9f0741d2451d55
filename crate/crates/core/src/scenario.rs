//! Region presets: initial condition, starting parameters and filter settings.

use std::fmt;
use std::str::FromStr;

use crate::enkf::sud::SudParams;
use crate::enkf::FilterConfig;
use crate::error::{Error, Result};
use crate::ingest::AgeBinScheme;
use crate::model::{InitialCondition, MortalityParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Nationwide,
    LaCounty,
    CookCounty,
    Nyc,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nationwide" => Ok(Preset::Nationwide),
            "la-county" => Ok(Preset::LaCounty),
            "cook-county" => Ok(Preset::CookCounty),
            "nyc" => Ok(Preset::Nyc),
            other => Err(Error::config(format!(
                "unknown preset `{other}` (expected nationwide, la-county, cook-county or nyc)"
            ))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Nationwide => "nationwide",
            Preset::LaCounty => "la-county",
            Preset::CookCounty => "cook-county",
            Preset::Nyc => "nyc",
        })
    }
}

/// Everything a run needs besides data and a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub region: Preset,
    pub initial: InitialCondition,
    pub params: SudParams,
    pub baseline: MortalityParams,
    pub scheme: AgeBinScheme,
    pub start_year: i32,
    /// Last simulated calendar year, inclusive.
    pub end_year: i32,
    pub filter: FilterConfig,
}

const BETA: f64 = 1.0 / 3.0;
const PREVALENCE: f64 = 0.015;

fn params(mu_d: f64, r: f64, alpha1: f64, alpha2: f64) -> SudParams {
    SudParams {
        mu_d,
        r1: r,
        r2: r,
        alpha1,
        beta1: BETA,
        alpha2,
        beta2: BETA,
    }
}

impl Scenario {
    pub fn preset(region: Preset) -> Self {
        let initial = |n0_total: f64, alpha0: f64| InitialCondition {
            n0_total,
            prevalence: PREVALENCE,
            alpha0,
            beta0: BETA,
        };
        let county_filter = |m: usize| FilterConfig {
            ensemble_size: m,
            process_noise: 1e-8,
            observation_noise: 1e-7,
            ..FilterConfig::default()
        };
        let (initial, params, start_year, filter, scheme) = match region {
            Preset::Nationwide => (
                initial(274_886_150.0, 12.0),
                params(2e-3, 2e-2, 10.0, 15.0),
                1999,
                FilterConfig::default(),
                AgeBinScheme::nationwide(),
            ),
            Preset::LaCounty => (
                initial(9_437_290.0, 17.0),
                params(2.5e-3, 2e-2, 17.0, 17.0),
                1999,
                county_filter(1000),
                AgeBinScheme::ten_year(),
            ),
            Preset::CookCounty => (
                initial(5_240_700.0, 12.0),
                params(5e-3, 6e-2, 8.0, 15.0),
                2013,
                county_filter(100),
                AgeBinScheme::ten_year(),
            ),
            Preset::Nyc => (
                initial(8_405_837.0, 12.0),
                params(5e-3, 6e-2, 8.0, 17.0),
                2013,
                county_filter(100),
                AgeBinScheme::ten_year(),
            ),
        };
        Scenario {
            region,
            initial,
            params,
            baseline: MortalityParams::us_males(0.0),
            scheme,
            start_year,
            end_year: 2024,
            filter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.initial.validate()?;
        self.params.model(&self.baseline).validate()?;
        self.filter.validate()?;
        if self.end_year < self.start_year {
            return Err(Error::config(format!(
                "end year {} precedes start year {}",
                self.end_year, self.start_year
            )));
        }
        self.scheme.node_sets(&self.filter.grid, self.filter.measurement_window)?;
        Ok(())
    }
}
