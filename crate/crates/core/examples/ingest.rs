//! Writes synthetic canonical files to a directory and reads them back.
//!
//! ```text
//! cargo run --example ingest -- /tmp/od-data
//! ```
//!
//! The directory then works as input for the `od-assim` binary.

use std::path::PathBuf;

use od_assim::enkf::{simulate, synthetic_observations};
use od_assim::ingest::*;
use od_assim::population::fit_surface;
use od_assim::scenario::{Preset, Scenario};
use od_assim::synthetic::{us_like_population, Drift};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "od-assim-data".into()));
    std::fs::create_dir_all(&dir)?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text)?;
        Ok::<_, std::io::Error>(p)
    };

    let table = us_like_population();
    let pop_path = write("population.tsv", serialize_population(&table))?;

    let mut sc = Scenario::preset(Preset::Nationwide);
    sc.end_year = 2021;
    let base = sc.params;
    let drift = Drift::nationwide();
    let truth = simulate(&sc, &fit_surface(&table)?, Some(&move |y| drift.params(base, y)))?;
    let mut deaths = synthetic_observations(&sc, &truth)?;
    // the youngest bins are suppressed in the real exports
    for r in deaths.records.iter_mut().filter(|r| r.age_hi <= 5) {
        r.deaths = None;
        r.reliability = Reliability::Suppressed;
    }
    let fat_path = write("fatalities.tsv", serialize_fatalities(&deaths))?;

    let population = parse_population(&pop_path)?;
    let series = parse_fatalities(&fat_path, &AgeBinScheme::nationwide())?;
    println!("{}: years {:?}..{:?}", pop_path.display(), population.years().first(), population.years().last());
    println!("{}: {} years, gaps {:?}", fat_path.display(), series.years.len(), series.gaps());
    for year in [1999, 2010, 2021] {
        let z = series.observation(year, (10.0, 70.0)).ok_or("year not observed")?;
        // observation vectors count deaths in thousands
        let used: f64 = z.values.iter().zip(&z.mask).filter(|(_, m)| !**m).map(|(v, _)| v * 1000.0).sum();
        println!("{year}: {:.0} deaths in bins inside 10-70, {} bins masked", used, z.mask.iter().filter(|m| **m).count());
    }
    Ok(())
}
