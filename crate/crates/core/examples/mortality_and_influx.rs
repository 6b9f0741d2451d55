//! Baseline mortality, the SUD influx mixture and where each component peaks.

use od_assim::model::*;

fn main() -> od_assim::Result<()> {
    let mortality = MortalityParams::us_males(0.002);
    let influx = InfluxParams {
        r1: 0.02,
        r2: 0.02,
        alpha1: 10.0,
        beta1: 1.0 / 3.0,
        alpha2: 15.0,
        beta2: 1.0 / 3.0,
    };
    influx.validate()?;

    println!("age\tmu0\tmu\tr\tdr/da");
    for a in [0.5, 5.0, 15.0, 25.0, 35.0, 45.0, 55.0, 65.0, 75.0, 85.0, 100.0] {
        println!(
            "{a}\t{:.5}\t{:.5}\t{:.6}\t{:+.2e}",
            baseline_mortality(a, &mortality)?,
            total_mortality(a, &mortality)?,
            influx_rate(a, &influx)?,
            influx_rate_derivative(a, &influx)?,
        );
    }

    println!();
    println!("a1_max = {:.1}", gamma_mode(influx.alpha1, influx.beta1)?);
    println!("a2_max = {:.1}", gamma_mode(influx.alpha2, influx.beta2)?);
    // chance of surviving from 20 to 60 without drug deaths vs with them
    let s0 = (-mortality_integral(20.0, 60.0, &MortalityParams { mu_d: 0.0, ..mortality })?).exp();
    let s = (-mortality_integral(20.0, 60.0, &mortality)?).exp();
    println!("survival 20 -> 60: {s0:.4} baseline, {s:.4} with mu_d = {}", mortality.mu_d);
    Ok(())
}
