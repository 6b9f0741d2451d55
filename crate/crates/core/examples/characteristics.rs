//! Solves the SUD density along characteristics and accumulates a year of deaths.

use od_assim::model::*;
use od_assim::population::fit_surface;
use od_assim::synthetic::us_like_population;

fn main() -> od_assim::Result<()> {
    let population = fit_surface(&us_like_population())?;
    let ic = InitialCondition {
        n0_total: 274_886_150.0,
        prevalence: 0.015,
        alpha0: 12.0,
        beta0: 1.0 / 3.0,
    };
    let params = ModelParams {
        mortality: MortalityParams::us_males(0.004),
        influx: InfluxParams {
            r1: 0.02,
            r2: 0.02,
            alpha1: 10.0,
            beta1: 1.0 / 3.0,
            alpha2: 15.0,
            beta2: 1.0 / 3.0,
        },
    };
    let origin = 1999.0;

    let years = [1999.0, 2002.0, 2006.0, 2010.0];
    print!("age");
    for t in years {
        print!("\tn({t})");
    }
    println!();
    for a in (0..=100).step_by(10).map(f64::from) {
        print!("{a}");
        for t in years {
            print!("\t{:.0}", characteristic_solution(a, t, &params, &ic, origin, &population, 0.1)?);
        }
        println!();
    }

    let grid = AgeGrid::standard();
    let field = DensityField::sample(grid, &ic, origin);
    let deaths = accumulate_deaths_along_characteristics(&field, &params, &population, (origin, origin + 1.0), 0.1)?;
    let total: f64 = deaths.iter().sum::<f64>() * DEATH_SCALE;
    println!();
    println!("SUD persons in {origin}: {:.0}", field.total());
    println!("overdose deaths in {origin}: {total:.0}");
    Ok(())
}
