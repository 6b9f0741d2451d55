//! Twin experiment: synthetic deaths from a drifting truth, then recovery of
//! mu_d and a1_max by the filter.
//!
//! ```text
//! cargo run --release --example twin_experiment -- 500
//! ```

use od_assim::enkf::*;
use od_assim::ingest::ObservationSeries;
use od_assim::population::fit_surface;
use od_assim::scenario::{Preset, Scenario};
use od_assim::synthetic::{us_like_population, Drift};

fn main() -> od_assim::Result<()> {
    let m: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let population = fit_surface(&us_like_population())?;
    let mut sc = Scenario::preset(Preset::Nationwide);
    sc.end_year = 2021;
    sc.filter.ensemble_size = m;

    let base = sc.params;
    let drift = Drift::nationwide();
    let truth = simulate(&sc, &population, Some(&move |y| drift.params(base, y)))?;
    let table = synthetic_observations(&sc, &truth)?;
    let obs = ObservationSeries::from_table(&table, &sc.scheme)?;
    let run = run_assimilation(&sc, &population, Some(&obs), 7)?;

    println!("year\tmu_d\testimate\t3sigma\ta1_max\testimate");
    let mut inside = 0;
    for (r, t) in run.records.iter().zip(&truth) {
        let mu = r.params.mu_d();
        let a1 = (t.params.alpha1 - 1.0) / t.params.beta1;
        inside += usize::from((mu.mean - t.params.mu_d).abs() <= 3.0 * mu.sd);
        println!(
            "{}\t{:.4}\t{:.4}\t{:.4}\t{a1:.1}\t{:.1}",
            r.year,
            t.params.mu_d,
            mu.mean,
            3.0 * mu.sd,
            r.params.a1_max.mean
        );
    }
    println!("mu_d within 3 sigma in {inside}/{} years (M = {m})", run.records.len());
    Ok(())
}
