use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use super::tsv::{parse_num, read_file, split};
use super::Reliability;
use crate::error::Result;

pub const COUNTY_HEADER: [&str; 7] = ["county_id", "county_name", "year", "deaths", "population", "crude_rate", "flag"];

/// Largest gap between a published crude rate and `1e5 · deaths / population`
/// that rounding to one decimal can explain.
pub const CRUDE_RATE_TOLERANCE: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct CountyRecord {
    pub county_id: String,
    pub county_name: String,
    pub year: i32,
    pub deaths: Option<u64>,
    pub population: u64,
    /// Deaths per 100,000 as published.
    pub crude_rate: Option<f64>,
    pub reliability: Reliability,
}

impl CountyRecord {
    pub fn computed_rate(&self) -> Option<f64> {
        let d = self.deaths? as f64;
        (self.population > 0).then(|| 1e5 * d / self.population as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountyTable {
    pub records: Vec<CountyRecord>,
    /// Rows whose crude rate disagrees with deaths and population.
    pub warnings: Vec<String>,
}

impl CountyTable {
    pub fn years(&self) -> Vec<i32> {
        let mut years: Vec<i32> = self.records.iter().map(|r| r.year).collect();
        years.sort_unstable();
        years.dedup();
        years
    }

    pub fn year(&self, year: i32) -> impl Iterator<Item = &CountyRecord> {
        self.records.iter().filter(move |r| r.year == year)
    }
}

/// Reads a canonical county file. With `strict`, rows not flagged `ok` are dropped.
pub fn parse_county_text(text: &str, source: &str, strict: bool) -> Result<CountyTable> {
    let rows = split(text, source)?;
    rows.expect_header(&COUNTY_HEADER)?;
    let mut table = CountyTable::default();
    for (line, cells) in &rows.rows {
        let line = *line;
        if cells.len() != COUNTY_HEADER.len() {
            return Err(rows.error(line, format!("expected {} cells, found {}", COUNTY_HEADER.len(), cells.len())));
        }
        let reliability: Reliability = cells[6].parse().map_err(|e: String| rows.error(line, e))?;
        let deaths = match (reliability, cells[3].as_str()) {
            (Reliability::Suppressed, "" | "Suppressed") => None,
            (Reliability::Suppressed, other) => {
                return Err(rows.error(line, format!("suppressed row carries a count `{other}`")));
            }
            (_, text) => Some(parse_num(&rows, line, text, "a death count")?),
        };
        let crude_rate = match cells[5].as_str() {
            "" | "Unreliable" | "Suppressed" => None,
            text => Some(parse_num(&rows, line, text, "a crude rate")?),
        };
        let record = CountyRecord {
            county_id: cells[0].clone(),
            county_name: cells[1].clone(),
            year: parse_num(&rows, line, &cells[2], "a year")?,
            deaths,
            population: parse_num(&rows, line, &cells[4], "a population count")?,
            crude_rate,
            reliability,
        };
        if let (Some(published), Some(computed)) = (record.crude_rate, record.computed_rate()) {
            if reliability == Reliability::Ok && (published - computed).abs() > CRUDE_RATE_TOLERANCE {
                let msg = format!(
                    "{source}:{line}: crude rate {published} disagrees with deaths/population = {computed:.2}"
                );
                warn!("{msg}");
                table.warnings.push(msg);
            }
        }
        if strict && reliability != Reliability::Ok {
            continue;
        }
        table.records.push(record);
    }
    Ok(table)
}

pub fn parse_county(path: &Path, strict: bool) -> Result<CountyTable> {
    parse_county_text(&read_file(path)?, &path.display().to_string(), strict)
}

pub fn serialize_county(table: &CountyTable) -> String {
    let mut out = COUNTY_HEADER.join("\t");
    out.push('\n');
    for r in &table.records {
        let deaths = r.deaths.map_or_else(|| "Suppressed".to_string(), |d| d.to_string());
        let rate = match (r.crude_rate, r.reliability) {
            (Some(c), _) => format!("{c:.1}"),
            (None, Reliability::Suppressed) => "Suppressed".to_string(),
            (None, _) => "Unreliable".to_string(),
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.county_id, r.county_name, r.year, deaths, r.population, rate, r.reliability
        );
    }
    out
}
