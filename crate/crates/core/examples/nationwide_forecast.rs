//! Assimilates synthetic nationwide deaths through 2021 and forecasts
//! 2022-2024 with growing uncertainty.

use od_assim::enkf::*;
use od_assim::ingest::ObservationSeries;
use od_assim::population::fit_surface;
use od_assim::scenario::{Preset, Scenario};
use od_assim::synthetic::{us_like_population, Drift};

fn main() -> od_assim::Result<()> {
    let m: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let population = fit_surface(&us_like_population())?.with_max_extrapolation(4.0);
    let mut sc = Scenario::preset(Preset::Nationwide);
    sc.filter.ensemble_size = m;
    sc.end_year = 2024;

    let base = sc.params;
    let drift = Drift::nationwide();
    let mut observed = sc.clone();
    observed.end_year = drift.last_year;
    let truth = simulate(&observed, &population, Some(&move |y| drift.params(base, y)))?;
    let obs = ObservationSeries::from_table(&synthetic_observations(&observed, &truth)?, &sc.scheme)?;
    let run = run_assimilation(&sc, &population, Some(&obs), 3)?;

    let window = sc.filter.measurement_window;
    let bins: Vec<usize> = (0..sc.scheme.len())
        .filter(|&k| {
            let (lo, hi) = sc.scheme.bin(k);
            f64::from(lo) >= window.0 && f64::from(hi) <= window.1
        })
        .collect();
    println!("year\tkind\ttotal 10-70\t3sigma of bin 30-35");
    let k30 = bins.iter().copied().find(|&k| sc.scheme.bin(k).0 == 30).unwrap();
    for r in run.records.iter().filter(|r| r.year >= 2018) {
        let total: f64 = bins.iter().map(|&k| r.predicted[k].mean).sum();
        let kind = if r.forecast_only { "forecast" } else { "fit" };
        println!("{}\t{kind}\t{total:.0}\t{:.0}", r.year, 3.0 * r.predicted[k30].sd);
    }
    Ok(())
}
