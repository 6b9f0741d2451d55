//! Crude rates, Gini index, top counties and a rate histogram for a made-up
//! set of counties whose rates converge over time.

use od_assim::analysis::*;
use od_assim::ingest::{CountyRecord, CountyTable, Reliability};

fn main() -> od_assim::Result<()> {
    let mut table = CountyTable::default();
    for year in [2000, 2010, 2020] {
        // spread shrinks from 2000 to 2020
        let spread = 1.0 - (year - 2000) as f64 / 25.0;
        for i in 0..40u64 {
            let population = 60_000 + (i * 7919 % 37) * 40_000;
            let level = 5.0 + (year - 2000) as f64 * 1.3;
            let rate = level * (1.0 + spread * ((i as f64 * 0.9).sin()));
            let deaths = (rate * population as f64 / 1e5).round() as u64;
            table.records.push(CountyRecord {
                county_id: format!("{:05}", 1001 + 2 * i),
                county_name: format!("County {i}, XX"),
                year,
                deaths: Some(deaths),
                population,
                crude_rate: Some(1e5 * deaths as f64 / population as f64),
                reliability: if deaths < 20 { Reliability::Unreliable } else { Reliability::Ok },
            });
        }
    }

    let edges = uniform_edges(0.0, 60.0, 6);
    for year in [2000, 2010, 2020] {
        let slice = CountyYearSlice::from_table(&table, year, SliceFilter::default());
        println!(
            "{year}: {} counties ({}), mean crude rate {:.1}, gini {:.3}",
            slice.len(),
            SliceFilter::default().label(),
            slice.mean_crude_rate()?,
            slice.gini()?
        );
        for e in top_counties(&slice, 3, RankBy::CrudeRate) {
            println!("  {} {}: {:.1} per 100,000", e.county_id, e.county_name, e.crude_rate);
        }
        println!("  rate histogram {:?} over {edges:?}", histogram(&slice.crude_rates(), &edges));
    }

    let slice = CountyYearSlice::from_table(&table, 2000, SliceFilter::FIGURE);
    let d: Vec<f64> = slice.entries.iter().map(|e| e.deaths as f64).collect();
    let p: Vec<f64> = slice.entries.iter().map(|e| e.population as f64).collect();
    println!("Lorenz curve 2000 ({}):", SliceFilter::FIGURE.label());
    for (x, y) in lorenz_curve(&d, &p)?.iter().step_by(8) {
        println!("  {x:.3}\t{y:.3}");
    }
    Ok(())
}
