use std::fmt::Write as _;
use std::path::Path;

use super::scheme::AgeBinScheme;
use super::tsv::{cell, parse_num, read_file, split};
use crate::error::{Error, Result};
use crate::population::PopulationTable;

pub const POPULATION_HEADER: [&str; 3] = ["year", "age", "population"];
pub const BAND_HEADER: [&str; 4] = ["year", "age_lo", "age_hi", "population"];

/// Last single-year age in population tables; it stands for that age and above.
pub const TOP_SINGLE_AGE: u32 = 85;

pub fn parse_population_text(text: &str, source: &str) -> Result<PopulationTable> {
    let rows = split(text, source)?;
    rows.expect_header(&POPULATION_HEADER)?;
    let mut parsed = Vec::with_capacity(rows.rows.len());
    for (line, cells) in &rows.rows {
        let line = *line;
        if cells.len() != POPULATION_HEADER.len() {
            return Err(rows.error(line, format!("expected 3 cells, found {}", cells.len())));
        }
        let year: i32 = parse_num(&rows, line, cell(&rows, line, cells, 0, "year")?, "a year")?;
        let age: u32 = parse_num(&rows, line, &cells[1], "an age")?;
        let count: u64 = parse_num(&rows, line, &cells[2], "a population count")?;
        parsed.push((year, age, count as f64));
    }
    let mut seen = std::collections::HashSet::new();
    for ((year, age, _), (line, _)) in parsed.iter().zip(&rows.rows) {
        if !seen.insert((*year, *age)) {
            return Err(rows.error(*line, format!("duplicate cell for year {year}, age {age}")));
        }
    }
    PopulationTable::from_rows(parsed)
}

pub fn parse_population(path: &Path) -> Result<PopulationTable> {
    parse_population_text(&read_file(path)?, &path.display().to_string())
}

pub fn serialize_population(table: &PopulationTable) -> String {
    let mut out = POPULATION_HEADER.join("\t");
    out.push('\n');
    for (year, age, count) in table.rows() {
        let _ = writeln!(out, "{year}\t{age}\t{count}");
    }
    out
}

/// Population counts in age bands `[age_lo, age_hi)` by year.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BandedPopulation {
    pub rows: Vec<(i32, u32, u32, u64)>,
}

pub fn parse_population_bands_text(text: &str, source: &str) -> Result<BandedPopulation> {
    let rows = split(text, source)?;
    rows.expect_header(&BAND_HEADER)?;
    let mut out = BandedPopulation::default();
    for (line, cells) in &rows.rows {
        let line = *line;
        if cells.len() != BAND_HEADER.len() {
            return Err(rows.error(line, format!("expected 4 cells, found {}", cells.len())));
        }
        out.rows.push((
            parse_num(&rows, line, &cells[0], "a year")?,
            parse_num(&rows, line, &cells[1], "an age")?,
            parse_num(&rows, line, &cells[2], "an age")?,
            parse_num(&rows, line, &cells[3], "a population count")?,
        ));
    }
    Ok(out)
}

pub fn parse_population_bands(path: &Path) -> Result<BandedPopulation> {
    parse_population_bands_text(&read_file(path)?, &path.display().to_string())
}

/// Spreads each band's count uniformly over its single-year ages.
///
/// Ages run `0..=85`; a band reaching past 85 contributes all of its count
/// to the open-ended age 85 beyond the ages it covers below it.
pub fn county_population_profile(bands: &BandedPopulation, scheme: &AgeBinScheme) -> Result<PopulationTable> {
    let mut years: Vec<i32> = bands.rows.iter().map(|r| r.0).collect();
    years.sort_unstable();
    years.dedup();
    let mut out = Vec::new();
    for year in years {
        for (lo, hi) in scheme.bins() {
            let count = bands
                .rows
                .iter()
                .find(|r| r.0 == year && r.1 == lo && r.2 == hi)
                .map(|r| r.3)
                .ok_or_else(|| Error::Ragged(format!("(year {year}, band [{lo}, {hi}))")))?;
            let top = hi.min(TOP_SINGLE_AGE + 1);
            if lo > TOP_SINGLE_AGE {
                return Err(Error::config(format!("band [{lo}, {hi}) starts above age {TOP_SINGLE_AGE}")));
            }
            let width = (top - lo) as f64;
            for age in lo..top {
                out.push((year, age, count as f64 / width));
            }
        }
    }
    PopulationTable::from_rows(out)
}
