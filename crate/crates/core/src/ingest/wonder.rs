//! Normalizes raw CDC WONDER "Export Results" text into canonical tables.
//!
//! Exports are tab-separated with quoted cells, a leading `Notes` column that
//! reads `Total` on subtotal rows, and a footnote block after a `---` line.
//! Column names depend on the query; the adapter looks them up by name.

use std::path::Path;

use log::warn;

use super::county::{CountyRecord, CountyTable};
use super::fatalities::{FatalityRecord, FatalityTable};
use super::population_file::TOP_SINGLE_AGE;
use super::scheme::parse_age_label;
use super::tsv::{parse_num, read_file, split, Rows};
use super::Reliability;
use crate::error::Result;
use crate::population::PopulationTable;

fn notes_total(rows: &Rows, cells: &[String]) -> bool {
    rows.column("Notes")
        .ok()
        .and_then(|i| cells.get(i))
        .is_some_and(|c| c == "Total")
}

fn age_group_column(rows: &Rows) -> Result<usize> {
    rows.header
        .iter()
        .position(|h| h.ends_with("Age Groups") || h == "Single-Year Ages")
        .ok_or_else(|| rows.error(1, "no age-group column"))
}

fn get(cells: &[String], i: usize) -> &str {
    cells.get(i).map_or("", String::as_str)
}

/// Single-year-of-age population. Ages above 85 are folded into 85.
pub fn population_from_export(text: &str, source: &str) -> Result<PopulationTable> {
    let rows = split(text, source)?;
    let year_col = rows.column("Year")?;
    let age_col = rows.column("Single-Year Ages")?;
    let pop_col = rows.column("Population")?;
    let mut cells_out: std::collections::BTreeMap<(i32, u32), f64> = Default::default();
    for (line, cells) in &rows.rows {
        if notes_total(&rows, cells) || get(cells, year_col).is_empty() {
            continue;
        }
        let label = get(cells, age_col);
        let Some((lo, _)) = parse_age_label(label).or_else(|| label.parse().ok().map(|a: u32| (a, a + 1))) else {
            warn!("{source}:{line}: skipping age `{label}`");
            continue;
        };
        let year: i32 = parse_num(&rows, *line, get(cells, year_col), "a year")?;
        let count: u64 = parse_num(&rows, *line, get(cells, pop_col), "a population count")?;
        *cells_out.entry((year, lo.min(TOP_SINGLE_AGE))).or_default() += count as f64;
    }
    PopulationTable::from_rows(cells_out.into_iter().map(|((y, a), c)| (y, a, c)))
}

/// Deaths by age group and year; `Total` rows become per-year totals.
pub fn fatalities_from_export(text: &str, source: &str) -> Result<FatalityTable> {
    let rows = split(text, source)?;
    let year_col = rows.column("Year")?;
    let age_col = age_group_column(&rows)?;
    let deaths_col = rows.column("Deaths")?;
    let rate_col = rows.column("Crude Rate").ok();
    let mut table = FatalityTable::default();
    for (line, cells) in &rows.rows {
        let line = *line;
        let year_text = get(cells, year_col);
        if year_text.is_empty() {
            continue;
        }
        let year: i32 = parse_num(&rows, line, year_text, "a year")?;
        let deaths_text = get(cells, deaths_col);
        if notes_total(&rows, cells) {
            if get(cells, age_col).is_empty() {
                table.totals.insert(year, parse_num(&rows, line, deaths_text, "a death count")?);
            }
            continue;
        }
        let label = get(cells, age_col);
        let Some((age_lo, age_hi)) = parse_age_label(label) else {
            warn!("{source}:{line}: skipping age group `{label}`");
            continue;
        };
        let (deaths, reliability) = if deaths_text == "Suppressed" {
            (None, Reliability::Suppressed)
        } else {
            let d: u64 = parse_num(&rows, line, deaths_text, "a death count")?;
            let unreliable = rate_col.is_some_and(|c| get(cells, c) == "Unreliable");
            (Some(d), if unreliable { Reliability::Unreliable } else { Reliability::Ok })
        };
        table.records.push(FatalityRecord {
            year,
            age_lo,
            age_hi,
            deaths,
            reliability,
        });
    }
    Ok(table)
}

/// County deaths, population and crude rate by year.
pub fn counties_from_export(text: &str, source: &str) -> Result<CountyTable> {
    let rows = split(text, source)?;
    let name_col = rows.column("County")?;
    let id_col = rows.column("County Code")?;
    let year_col = rows.column("Year")?;
    let deaths_col = rows.column("Deaths")?;
    let pop_col = rows.column("Population")?;
    let rate_col = rows.column("Crude Rate")?;
    let mut table = CountyTable::default();
    for (line, cells) in &rows.rows {
        let line = *line;
        if notes_total(&rows, cells) || get(cells, id_col).is_empty() || get(cells, year_col).is_empty() {
            continue;
        }
        let pop_text = get(cells, pop_col);
        let Ok(population) = pop_text.parse::<u64>() else {
            warn!("{source}:{line}: skipping row with population `{pop_text}`");
            continue;
        };
        let deaths_text = get(cells, deaths_col);
        let rate_text = get(cells, rate_col);
        let deaths = if deaths_text == "Suppressed" {
            None
        } else {
            Some(parse_num(&rows, line, deaths_text, "a death count")?)
        };
        let crude_rate = rate_text.parse::<f64>().ok();
        let reliability = match (deaths, rate_text) {
            (None, _) => Reliability::Suppressed,
            (_, "Unreliable") => Reliability::Unreliable,
            _ => Reliability::Ok,
        };
        table.records.push(CountyRecord {
            county_id: get(cells, id_col).to_string(),
            county_name: get(cells, name_col).to_string(),
            year: parse_num(&rows, line, get(cells, year_col), "a year")?,
            deaths,
            population,
            crude_rate,
            reliability,
        });
    }
    Ok(table)
}

pub fn read_export(path: &Path) -> Result<String> {
    read_file(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEATHS: &str = "\"Notes\"\t\"Year\"\t\"Year Code\"\t\"Five-Year Age Groups\"\t\"Five-Year Age Groups Code\"\t\"Deaths\"\t\"Population\"\t\"Crude Rate\"\n\
\t\"2021\"\t\"2021\"\t\"< 1 year\"\t\"1\"\t\"Suppressed\"\t\"3600000\"\t\"Suppressed\"\n\
\t\"2021\"\t\"2021\"\t\"15-19 years\"\t\"15-19\"\t\"12\"\t\"21000000\"\t\"Unreliable\"\n\
\t\"2021\"\t\"2021\"\t\"25-29 years\"\t\"25-29\"\t\"9000\"\t\"23000000\"\t\"39.1\"\n\
\t\"2021\"\t\"2021\"\t\"Not Stated\"\t\"NS\"\t\"3\"\t\"Not Applicable\"\t\"Not Applicable\"\n\
\"Total\"\t\"2021\"\t\"2021\"\t\t\t\"9015\"\t\"331000000\"\t\"2.7\"\n\
\"---\"\n\
\"Dataset: Multiple Cause of Death, 1999-2021\"\n\
\"Query Parameters:\"\n";

    #[test]
    fn fatality_export() {
        let table = fatalities_from_export(DEATHS, "export").unwrap();
        assert_eq!(table.records.len(), 3);
        assert_eq!(table.records[0].reliability, Reliability::Suppressed);
        assert_eq!(table.records[0].deaths, None);
        assert_eq!((table.records[1].age_lo, table.records[1].age_hi), (15, 20));
        assert_eq!(table.records[1].reliability, Reliability::Unreliable);
        assert_eq!(table.records[2].deaths, Some(9000));
        assert_eq!(table.totals.get(&2021), Some(&9015));
    }

    #[test]
    fn county_export() {
        let text = "\"Notes\"\t\"County\"\t\"County Code\"\t\"Year\"\t\"Year Code\"\t\"Deaths\"\t\"Population\"\t\"Crude Rate\"\n\
\t\"Cook County, IL\"\t\"17031\"\t\"2020\"\t\"2020\"\t\"1900\"\t\"5150233\"\t\"36.9\"\n\
\t\"Loving County, TX\"\t\"48301\"\t\"2020\"\t\"2020\"\t\"Suppressed\"\t\"64\"\t\"Suppressed\"\n";
        let table = counties_from_export(text, "export").unwrap();
        assert_eq!(table.records.len(), 2);
        assert_eq!(table.records[0].county_name, "Cook County, IL");
        assert_eq!(table.records[0].crude_rate, Some(36.9));
        assert_eq!(table.records[1].reliability, Reliability::Suppressed);
    }
}
