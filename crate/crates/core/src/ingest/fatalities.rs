use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use super::scheme::AgeBinScheme;
use super::tsv::{cell, parse_num, read_file, split};
use super::Reliability;
use crate::enkf::ObservationVector;
use crate::error::{Error, Result};

pub const FATALITY_HEADER: [&str; 5] = ["year", "age_lo", "age_hi", "deaths", "flag"];

#[derive(Debug, Clone, PartialEq)]
pub struct FatalityRecord {
    pub year: i32,
    pub age_lo: u32,
    pub age_hi: u32,
    /// Absent exactly when the cell is suppressed.
    pub deaths: Option<u64>,
    pub reliability: Reliability,
}

/// Rows of a canonical fatalities file, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FatalityTable {
    pub records: Vec<FatalityRecord>,
    /// Per-year `Total` rows, when the file has them.
    pub totals: BTreeMap<i32, u64>,
}

fn parse_deaths(text: &str, flag: Reliability) -> std::result::Result<Option<u64>, String> {
    match flag {
        Reliability::Suppressed => {
            if text.is_empty() || text.eq_ignore_ascii_case("suppressed") {
                Ok(None)
            } else {
                Err(format!("suppressed row carries a count `{text}`"))
            }
        }
        _ => text
            .parse()
            .map(Some)
            .map_err(|_| format!("cannot read `{text}` as a death count")),
    }
}

pub fn parse_fatality_table_text(text: &str, source: &str) -> Result<FatalityTable> {
    let rows = split(text, source)?;
    rows.expect_header(&FATALITY_HEADER)?;
    let mut table = FatalityTable::default();
    for (line, cells) in &rows.rows {
        let line = *line;
        let year: i32 = parse_num(&rows, line, cell(&rows, line, cells, 0, "year")?, "a year")?;
        let lo = cell(&rows, line, cells, 1, "age_lo")?;
        if lo.eq_ignore_ascii_case("total") {
            let total = parse_num(&rows, line, cell(&rows, line, cells, 3, "deaths")?, "a death count")?;
            if table.totals.insert(year, total).is_some() {
                return Err(rows.error(line, format!("second Total row for {year}")));
            }
            continue;
        }
        if cells.len() != FATALITY_HEADER.len() {
            return Err(rows.error(line, format!("expected {} cells, found {}", FATALITY_HEADER.len(), cells.len())));
        }
        let age_lo: u32 = parse_num(&rows, line, lo, "an age")?;
        let age_hi: u32 = parse_num(&rows, line, &cells[2], "an age")?;
        if age_hi <= age_lo {
            return Err(rows.error(line, format!("empty age range [{age_lo}, {age_hi})")));
        }
        let reliability: Reliability = cells[4].parse().map_err(|e: String| rows.error(line, e))?;
        let deaths = parse_deaths(&cells[3], reliability).map_err(|e| rows.error(line, e))?;
        table.records.push(FatalityRecord {
            year,
            age_lo,
            age_hi,
            deaths,
            reliability,
        });
    }
    for (&year, &total) in &table.totals {
        let in_year: Vec<&FatalityRecord> = table.records.iter().filter(|r| r.year == year).collect();
        let sum: u64 = in_year.iter().filter_map(|r| r.deaths).sum();
        let complete = in_year.iter().all(|r| r.deaths.is_some());
        if (complete && sum != total) || sum > total {
            return Err(Error::Ingest {
                path: source.to_string(),
                line: 0,
                message: format!("{year}: bins sum to {sum} deaths but the Total row says {total}"),
            });
        }
    }
    Ok(table)
}

pub fn parse_fatality_table(path: &Path) -> Result<FatalityTable> {
    parse_fatality_table_text(&read_file(path)?, &path.display().to_string())
}

/// Canonical text of `table`: header, records in order, then `Total` rows.
pub fn serialize_fatalities(table: &FatalityTable) -> String {
    let mut out = FATALITY_HEADER.join("\t");
    out.push('\n');
    for r in &table.records {
        let deaths = r.deaths.map_or_else(|| "Suppressed".to_string(), |d| d.to_string());
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", r.year, r.age_lo, r.age_hi, deaths, r.reliability);
    }
    for (year, total) in &table.totals {
        let _ = writeln!(out, "{year}\tTotal\t\t{total}\tok");
    }
    out
}

/// Annual deaths of one year aligned to a scheme; `None` where suppressed or absent.
#[derive(Debug, Clone, PartialEq)]
pub struct YearObservation {
    pub deaths: Vec<Option<u64>>,
    pub flags: Vec<Reliability>,
}

impl YearObservation {
    pub fn total(&self) -> u64 {
        self.deaths.iter().flatten().sum()
    }
}

/// Fatalities by year on a fixed bin scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    pub scheme: AgeBinScheme,
    pub years: BTreeMap<i32, YearObservation>,
}

impl ObservationSeries {
    pub fn from_table(table: &FatalityTable, scheme: &AgeBinScheme) -> Result<Self> {
        let mut years: BTreeMap<i32, YearObservation> = BTreeMap::new();
        for r in &table.records {
            let k = scheme.position(r.age_lo, r.age_hi).ok_or_else(|| {
                Error::config(format!(
                    "{}: age group [{}, {}) is not a bin of the scheme {:?}",
                    r.year,
                    r.age_lo,
                    r.age_hi,
                    scheme.edges()
                ))
            })?;
            let year = years.entry(r.year).or_insert_with(|| YearObservation {
                deaths: vec![None; scheme.len()],
                flags: vec![Reliability::Suppressed; scheme.len()],
            });
            if year.deaths[k].is_some() || year.flags[k] != Reliability::Suppressed {
                return Err(Error::config(format!("{}: age group [{}, {}) appears twice", r.year, r.age_lo, r.age_hi)));
            }
            year.deaths[k] = r.deaths;
            year.flags[k] = r.reliability;
        }
        let series = ObservationSeries {
            scheme: scheme.clone(),
            years,
        };
        let gaps = series.gaps();
        if !gaps.is_empty() {
            warn!("fatality series has no rows for years {gaps:?}");
        }
        Ok(series)
    }

    /// Years between the first and last observed year with no rows.
    pub fn gaps(&self) -> Vec<i32> {
        match (self.first_year(), self.last_year()) {
            (Some(a), Some(b)) => (a..=b).filter(|y| !self.years.contains_key(y)).collect(),
            _ => Vec::new(),
        }
    }

    pub fn first_year(&self) -> Option<i32> {
        self.years.keys().next().copied()
    }

    pub fn last_year(&self) -> Option<i32> {
        self.years.keys().next_back().copied()
    }

    pub fn get(&self, year: i32) -> Option<&YearObservation> {
        self.years.get(&year)
    }

    /// Copy with every bin flagged unreliable treated as missing.
    pub fn without_unreliable(&self) -> Self {
        let mut out = self.clone();
        for obs in out.years.values_mut() {
            for (d, f) in obs.deaths.iter_mut().zip(&obs.flags) {
                if *f == Reliability::Unreliable {
                    *d = None;
                }
            }
        }
        out
    }

    /// Observation vector in deaths per 1,000, masking suppressed or absent
    /// bins and bins outside the measured age window.
    pub fn observation(&self, year: i32, window: (f64, f64)) -> Option<ObservationVector> {
        let obs = self.years.get(&year)?;
        let outside = self.scheme.outside(window);
        let values = obs.deaths.iter().map(|d| d.map_or(0.0, |d| d as f64 / 1000.0)).collect();
        let mask = obs.deaths.iter().zip(outside).map(|(d, out)| d.is_none() || out).collect();
        Some(ObservationVector { values, mask })
    }
}

/// Reads a canonical fatalities file onto `scheme`.
pub fn parse_fatalities(path: &Path, scheme: &AgeBinScheme) -> Result<ObservationSeries> {
    ObservationSeries::from_table(&parse_fatality_table(path)?, scheme)
}

pub fn parse_fatalities_text(text: &str, source: &str, scheme: &AgeBinScheme) -> Result<ObservationSeries> {
    ObservationSeries::from_table(&parse_fatality_table_text(text, source)?, scheme)
}
