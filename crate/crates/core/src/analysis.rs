//! County-level summaries: crude rates, significance filtering, rankings,
//! histograms and the Gini index of death concentration.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::ingest::{CountyTable, Reliability};

/// Deaths per 100,000 persons.
pub fn crude_rate(deaths: f64, population: f64) -> Result<f64> {
    if !(population > 0.0) {
        return Err(Error::domain(format!("crude rate needs a positive population, got {population}")));
    }
    Ok(1e5 * deaths / population)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountyEntry {
    pub county_id: String,
    pub county_name: String,
    pub deaths: u64,
    pub population: u64,
    pub crude_rate: f64,
}

/// Which county rows count as usable for a year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceFilter {
    pub min_deaths: u64,
    /// Drop rows flagged unreliable.
    pub strict: bool,
}

impl SliceFilter {
    pub const SIGNIFICANT: SliceFilter = SliceFilter { min_deaths: 10, strict: true };
    /// The stricter screen behind the county figures, where the smallest
    /// remaining count is 20.
    pub const FIGURE: SliceFilter = SliceFilter { min_deaths: 20, strict: true };

    pub fn label(&self) -> String {
        format!("min_deaths={} strict={}", self.min_deaths, self.strict)
    }
}

impl Default for SliceFilter {
    fn default() -> Self {
        SliceFilter::SIGNIFICANT
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountyYearSlice {
    pub year: i32,
    pub entries: Vec<CountyEntry>,
}

impl CountyYearSlice {
    /// Counties of `year` that pass `filter`. Suppressed rows and rows with a
    /// zero population never enter. Rates are recomputed from the counts.
    pub fn from_table(table: &CountyTable, year: i32, filter: SliceFilter) -> CountyYearSlice {
        let entries = table
            .year(year)
            .filter(|r| r.reliability != Reliability::Suppressed)
            .filter(|r| !(filter.strict && r.reliability == Reliability::Unreliable))
            .filter(|r| r.population > 0)
            .filter_map(|r| {
                let deaths = r.deaths?;
                (deaths >= filter.min_deaths).then(|| CountyEntry {
                    county_id: r.county_id.clone(),
                    county_name: r.county_name.clone(),
                    deaths,
                    population: r.population,
                    crude_rate: 1e5 * deaths as f64 / r.population as f64,
                })
            })
            .collect();
        CountyYearSlice { year, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Unweighted mean of the county crude rates.
    pub fn mean_crude_rate(&self) -> Result<f64> {
        if self.entries.is_empty() {
            return Err(Error::domain(format!("no counties in {}", self.year)));
        }
        Ok(self.entries.iter().map(|e| e.crude_rate).sum::<f64>() / self.entries.len() as f64)
    }

    pub fn crude_rates(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.crude_rate).collect()
    }

    pub fn deaths(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.deaths as f64).collect()
    }

    pub fn gini(&self) -> Result<f64> {
        let deaths = self.deaths();
        let population: Vec<f64> = self.entries.iter().map(|e| e.population as f64).collect();
        gini_index(&deaths, &population)
    }
}

/// Points (population fraction, death fraction) of the Lorenz curve, counties
/// taken in ascending order of crude rate, starting at (0, 0).
pub fn lorenz_curve(deaths: &[f64], population: &[f64]) -> Result<Vec<(f64, f64)>> {
    if deaths.len() != population.len() {
        return Err(Error::domain("deaths and population differ in length"));
    }
    if deaths.is_empty() {
        return Err(Error::domain("empty county slice"));
    }
    if let Some(p) = population.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(Error::domain(format!("county population must be positive, got {p}")));
    }
    if let Some(d) = deaths.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(Error::domain(format!("county deaths must be nonnegative, got {d}")));
    }
    let total_d: f64 = deaths.iter().sum();
    let total_p: f64 = population.iter().sum();
    if total_d <= 0.0 {
        return Err(Error::domain("no deaths in slice"));
    }

    let mut order: Vec<usize> = (0..deaths.len()).collect();
    order.sort_by(|&i, &j| (deaths[i] / population[i]).total_cmp(&(deaths[j] / population[j])));

    let mut points = Vec::with_capacity(order.len() + 1);
    points.push((0.0, 0.0));
    let (mut cum_p, mut cum_d) = (0.0, 0.0);
    for &i in &order {
        cum_p += population[i];
        cum_d += deaths[i];
        points.push((cum_p / total_p, cum_d / total_d));
    }
    *points.last_mut().unwrap() = (1.0, 1.0);
    Ok(points)
}

/// One minus twice the trapezoid area under the Lorenz curve.
pub fn gini_index(deaths: &[f64], population: &[f64]) -> Result<f64> {
    let points = lorenz_curve(deaths, population)?;
    let twice_area: f64 = points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1)).sum();
    Ok((1.0 - twice_area).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankBy {
    Deaths,
    CrudeRate,
}

/// The `k` largest counties by `by`, ties broken by ascending county id.
pub fn top_counties(slice: &CountyYearSlice, k: usize, by: RankBy) -> Vec<&CountyEntry> {
    let mut ranked: Vec<&CountyEntry> = slice.entries.iter().collect();
    ranked.sort_by(|a, b| {
        let primary = match by {
            RankBy::Deaths => b.deaths.cmp(&a.deaths),
            RankBy::CrudeRate => b.crude_rate.total_cmp(&a.crude_rate),
        };
        match primary {
            Ordering::Equal => a.county_id.cmp(&b.county_id),
            other => other,
        }
    });
    ranked.truncate(k);
    ranked
}

/// Counts per half-open bin `[edges[i], edges[i+1])`. Values outside the
/// edges are not counted.
///
/// # Panics
/// If the edges are not strictly increasing.
pub fn histogram(values: &[f64], edges: &[f64]) -> Vec<usize> {
    assert!(
        edges.windows(2).all(|w| w[0] < w[1]),
        "histogram edges must be strictly increasing"
    );
    let bins = edges.len().saturating_sub(1);
    let mut counts = vec![0; bins];
    if bins == 0 {
        return counts;
    }
    for &v in values {
        if v >= edges[0] && v < edges[bins] {
            let i = edges.partition_point(|e| *e <= v) - 1;
            counts[i] += 1;
        }
    }
    counts
}

/// `n + 1` equally spaced edges from `lo` to `hi`.
pub fn uniform_edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::CountyRecord;

    fn record(id: &str, year: i32, deaths: Option<u64>, population: u64, flag: Reliability) -> CountyRecord {
        CountyRecord {
            county_id: id.into(),
            county_name: format!("County {id}"),
            year,
            deaths,
            population,
            crude_rate: None,
            reliability: flag,
        }
    }

    #[test]
    fn crude_rate_arithmetic() {
        assert_eq!(crude_rate(20.0, 1_000_000.0).unwrap(), 2.0);
        assert!(crude_rate(1.0, 0.0).is_err());
    }

    #[test]
    fn slice_filter_drops_small_unreliable_and_suppressed() {
        let table = CountyTable {
            records: vec![
                record("01", 2000, Some(9), 1000, Reliability::Ok),
                record("02", 2000, Some(10), 1000, Reliability::Ok),
                record("03", 2000, Some(15), 1000, Reliability::Unreliable),
                record("04", 2000, None, 1000, Reliability::Suppressed),
                record("05", 2001, Some(50), 1000, Reliability::Ok),
            ],
            warnings: vec![],
        };
        let strict = CountyYearSlice::from_table(&table, 2000, SliceFilter::SIGNIFICANT);
        assert_eq!(strict.entries.iter().map(|e| e.county_id.as_str()).collect::<Vec<_>>(), ["02"]);
        let loose = CountyYearSlice::from_table(&table, 2000, SliceFilter { min_deaths: 10, strict: false });
        assert_eq!(loose.len(), 2);
        assert!(CountyYearSlice::from_table(&table, 2000, SliceFilter::FIGURE).is_empty());
    }

    #[test]
    fn equal_rates_give_zero() {
        let g = gini_index(&[5.0, 10.0, 20.0], &[500.0, 1000.0, 2000.0]).unwrap();
        assert!(g.abs() < 1e-15);
    }

    #[test]
    fn one_county_takes_everything() {
        for n in 2..10 {
            let mut deaths = vec![0.0; n];
            deaths[n / 2] = 7.0;
            let g = gini_index(&deaths, &vec![100.0; n]).unwrap();
            assert!((g - (1.0 - 1.0 / n as f64)).abs() < 1e-14);
        }
    }

    #[test]
    fn gini_rejects_degenerate_input() {
        assert!(gini_index(&[], &[]).is_err());
        assert!(gini_index(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(gini_index(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn ranking_breaks_ties_by_id() {
        let entry = |id: &str, deaths: u64, population: u64| CountyEntry {
            county_id: id.into(),
            county_name: id.into(),
            deaths,
            population,
            crude_rate: 1e5 * deaths as f64 / population as f64,
        };
        let slice = CountyYearSlice {
            year: 2020,
            entries: vec![entry("b", 30, 1000), entry("a", 30, 3000), entry("c", 10, 100)],
        };
        let ids = |v: Vec<&CountyEntry>| v.iter().map(|e| e.county_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(top_counties(&slice, 3, RankBy::Deaths)), ["a", "b", "c"]);
        assert_eq!(ids(top_counties(&slice, 2, RankBy::CrudeRate)), ["c", "b"]);
    }

    #[test]
    fn histogram_conventions() {
        let edges = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(histogram(&[], &edges), vec![0, 0, 0]);
        assert_eq!(histogram(&[1.0], &edges), vec![0, 1, 0]);
        assert_eq!(histogram(&[-0.5, 0.0, 2.5, 3.0, 9.0], &edges), vec![1, 0, 1]);
    }
}
