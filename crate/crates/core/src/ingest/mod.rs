//! Canonical tab-separated input files and the adapter for raw WONDER exports.
//!
//! ```text
//! population.tsv        year  age  population
//! population_bands.tsv  year  age_lo  age_hi  population
//! fatalities.tsv        year  age_lo  age_hi  deaths  flag
//! counties.tsv          county_id  county_name  year  deaths  population  crude_rate  flag
//! ```
//!
//! `flag` is one of `ok`, `unreliable`, `suppressed`. Suppressed counts are
//! written `Suppressed` and never replaced by a number.

use std::fmt;
use std::str::FromStr;

pub mod county;
pub mod fatalities;
pub mod population_file;
pub mod scheme;
mod tsv;
pub mod wonder;

pub use county::{parse_county, parse_county_text, serialize_county, CountyRecord, CountyTable};
pub use fatalities::{
    parse_fatalities, parse_fatalities_text, parse_fatality_table, parse_fatality_table_text, serialize_fatalities,
    FatalityRecord, FatalityTable, ObservationSeries, YearObservation,
};
pub use population_file::{
    county_population_profile, parse_population, parse_population_bands, parse_population_bands_text,
    parse_population_text, serialize_population, BandedPopulation,
};
pub use scheme::{parse_age_label, AgeBinScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reliability {
    Ok,
    Unreliable,
    Suppressed,
}

impl FromStr for Reliability {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ok" => Ok(Reliability::Ok),
            "unreliable" => Ok(Reliability::Unreliable),
            "suppressed" => Ok(Reliability::Suppressed),
            other => Err(format!("unknown flag `{other}` (expected ok, unreliable or suppressed)")),
        }
    }
}

impl fmt::Display for Reliability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reliability::Ok => "ok",
            Reliability::Unreliable => "unreliable",
            Reliability::Suppressed => "suppressed",
        })
    }
}
