//! Fits the smooth population surface N(a, t) and reads values, slopes and
//! extrapolated years from it.

use od_assim::population::fit_surface;
use od_assim::synthetic::us_like_population;

fn main() -> od_assim::Result<()> {
    let table = us_like_population();
    let surface = fit_surface(&table)?.with_max_extrapolation(4.0);
    let (a_lo, a_hi) = surface.age_range();
    let (t_lo, t_hi) = surface.time_range();
    println!("ages {a_lo}..{a_hi}, years {t_lo}..{t_hi}");

    println!("age\tyear\tcount\tN\tdN/da\tdN/dt");
    for (a, t) in [(0.5f64, 2000.5f64), (30.0, 2010.0), (30.5, 2010.5), (60.0, 2015.0), (85.0, 2020.0), (95.0, 2020.0)] {
        let count = table.count(t as i32, a.min(85.0) as u32).unwrap_or(f64::NAN);
        println!(
            "{a}\t{t}\t{count:.0}\t{:.0}\t{:.0}\t{:.0}",
            surface.eval(a, t)?,
            surface.eval_da(a, t)?,
            surface.eval_dt(a, t)?,
        );
    }

    for t in [2022.0, 2024.0, 2025.0, 2026.5] {
        match surface.eval(40.0, t) {
            Ok(v) => println!("N(40, {t}) = {v:.0} (extrapolated)"),
            Err(e) => println!("N(40, {t}): {e}"),
        }
    }
    Ok(())
}
