use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use od_assim::analysis::{top_counties, CountyYearSlice, RankBy, SliceFilter};
use od_assim::enkf::{simulate, synthetic_observations};
use od_assim::ingest::{parse_county_text, serialize_fatalities, serialize_population};
use od_assim::population::fit_surface;
use od_assim::scenario::{Preset, Scenario};
use od_assim::synthetic::us_like_population;

const BIN: &str = env!("CARGO_BIN_EXE_od-assim");

struct Run {
    code: i32,
    stderr: String,
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Workspace {
            dir: tempfile::tempdir().unwrap(),
        };
        ws.write("population.tsv", &serialize_population(&us_like_population()));
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn run(&self, args: &[&str]) -> Run {
        let out = Command::new(BIN)
            .args(args)
            .env("OD_ASSIM_THREADS", "2")
            .current_dir(self.dir.path())
            .output()
            .unwrap();
        Run {
            code: out.status.code().unwrap_or(-1),
            stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        }
    }

    fn read(&self, rel: &str) -> String {
        std::fs::read_to_string(self.path(rel)).unwrap()
    }
}

/// Data rows of a TSV, header line included, comments dropped.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

fn column(table: &[Vec<String>], name: &str) -> usize {
    table[0].iter().position(|h| h == name).unwrap()
}

fn county_file(rows: &[(&str, &str, i32, u64, u64)]) -> String {
    let mut s = String::from("county_id\tcounty_name\tyear\tdeaths\tpopulation\tcrude_rate\tflag\n");
    for (id, name, year, d, p) in rows {
        let _ = writeln!(s, "{id}\t{name}\t{year}\t{d}\t{p}\t{:.1}\tok", 1e5 * *d as f64 / *p as f64);
    }
    s
}

/// Synthetic nationwide fatalities for 2015..=2018 from the model itself.
fn fatalities_2015_2018() -> String {
    let pop = fit_surface(&us_like_population()).unwrap();
    let mut sc = Scenario::preset(Preset::Nationwide);
    sc.start_year = 2015;
    sc.end_year = 2018;
    let truth = simulate(&sc, &pop, None).unwrap();
    serialize_fatalities(&synthetic_observations(&sc, &truth).unwrap())
}

fn assimilation_config(ws: &Workspace) -> PathBuf {
    ws.write("fatalities.tsv", &fatalities_2015_2018());
    ws.write(
        "run.conf",
        "# short nationwide run\n\
         population = population.tsv\n\
         fatalities = fatalities.tsv\n\
         start_year = 2015\n\
         ensemble_size = 8\n",
    )
}

#[test]
fn missing_population_is_a_config_error() {
    let ws = Workspace::new();
    let r = ws.run(&["--mode", "simulate", "--out", "out"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("population"), "{}", r.stderr);

    let conf = ws.write("c.conf", "population = nowhere.tsv\n");
    let r = ws.run(&["--mode", "simulate", "--config", conf.to_str().unwrap(), "--out", "out"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("nowhere.tsv"), "{}", r.stderr);
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let ws = Workspace::new();
    let conf = ws.write("c.conf", "population = population.tsv\nensemble = 3\n");
    let r = ws.run(&["--mode", "simulate", "--config", conf.to_str().unwrap()]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn simulate_is_deterministic_fast_and_annotated() {
    let ws = Workspace::new();
    let conf = ws.write("c.conf", "population = population.tsv\n");
    let conf = conf.to_str().unwrap();
    let start = Instant::now();
    let r = ws.run(&["--mode", "simulate", "--config", conf, "--out", "a"]);
    let elapsed = start.elapsed();
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(elapsed.as_secs_f64() < 60.0, "nationwide simulate took {elapsed:?}");
    eprintln!("nationwide simulate: {elapsed:?}");
    assert_eq!(ws.run(&["--mode", "simulate", "--config", conf, "--out", "b"]).code, 0);
    let a = ws.read("a/simulation.tsv");
    assert_eq!(a, ws.read("b/simulation.tsv"));

    let header: Vec<&str> = a.lines().take_while(|l| l.starts_with('#')).collect();
    for key in ["# od-assim ", "# config_sha256\t", "# seed\t", "# data\tpopulation\tpopulation.tsv\tsha256="] {
        assert!(header.iter().any(|l| l.starts_with(key)), "missing {key:?} in {header:?}");
    }
    let table = rows(&a);
    assert_eq!(table[0], ["year", "age", "n", "annual_deaths"]);
    let years: Vec<i32> = table[1..].iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(years.first(), Some(&1999));
    assert_eq!(years.last(), Some(&2024));
}

#[test]
fn zero_rates_give_an_all_zero_simulation() {
    let ws = Workspace::new();
    let conf = ws.write(
        "c.conf",
        "population = population.tsv\nmu_d = 0\nr1 = 0\nr2 = 0\nprevalence = 0\nend_year = 2005\n",
    );
    let r = ws.run(&["--mode", "simulate", "--config", conf.to_str().unwrap(), "--out", "o"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let table = rows(&ws.read("o/simulation.tsv"));
    assert!(table.len() > 1);
    for row in &table[1..] {
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.0, "{row:?}");
        assert_eq!(row[3].parse::<f64>().unwrap(), 0.0, "{row:?}");
    }
}

#[test]
fn without_mortality_the_sud_population_never_shrinks() {
    let ws = Workspace::new();
    let conf = ws.write(
        "c.conf",
        "population = population.tsv\nmu_d = 0\ngamma1 = 0\ngamma2 = 0\nlambda2 = 0\nend_year = 2012\n",
    );
    let r = ws.run(&["--mode", "simulate", "--config", conf.to_str().unwrap(), "--out", "o"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let table = rows(&ws.read("o/simulation.tsv"));
    let mut totals: Vec<(i32, f64)> = Vec::new();
    for row in &table[1..] {
        let year: i32 = row[0].parse().unwrap();
        let n: f64 = row[2].parse().unwrap();
        match totals.last_mut() {
            Some((y, t)) if *y == year => *t += n,
            _ => totals.push((year, n)),
        }
        assert_eq!(row[3].parse::<f64>().unwrap(), 0.0);
    }
    for w in totals.windows(2) {
        // rows carry one decimal per bin
        assert!(w[1].1 >= w[0].1 - 0.05 * 25.0, "{:?} -> {:?}", w[0], w[1]);
    }
    assert!(totals.last().unwrap().1 > totals[0].1);
}

#[test]
fn forecast_horizon_rules() {
    let ws = Workspace::new();
    let conf = assimilation_config(&ws);
    let conf = conf.to_str().unwrap();

    let r = ws.run(&["--mode", "forecast", "--config", conf, "--horizon", "2018", "--out", "f"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let forecast = rows(&ws.read("f/forecast.tsv"));
    assert_eq!(forecast.len(), 1, "{forecast:?}");
    assert_eq!(forecast[0][..3], ["year", "bin_lo", "bin_hi"]);
    assert!(ws.read("f/forecast.tsv").starts_with("# od-assim "));

    let r = ws.run(&["--mode", "forecast", "--config", conf, "--horizon", "2017", "--out", "g"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn assimilation_writes_params_and_fit_reproducibly() {
    let ws = Workspace::new();
    let conf = assimilation_config(&ws);
    let conf = conf.to_str().unwrap();
    for out in ["a", "b"] {
        let r = ws.run(&["--mode", "forecast", "--config", conf, "--horizon", "2020", "--seed", "5", "--out", out]);
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    for file in ["params.tsv", "fit.tsv", "forecast.tsv"] {
        assert_eq!(ws.read(&format!("a/{file}")), ws.read(&format!("b/{file}")), "{file}");
    }
    let params = rows(&ws.read("a/params.tsv"));
    assert_eq!(&params[0][..3], ["year", "mu_d", "sigma_mu_d"]);
    assert_eq!(params.len(), 1 + 6);
    let fit = rows(&ws.read("a/fit.tsv"));
    assert_eq!(
        fit[0],
        ["year", "bin_lo", "bin_hi", "predicted_deaths", "sigma", "observed_deaths"]
    );
    let forecast = rows(&ws.read("a/forecast.tsv"));
    let years: Vec<&str> = forecast[1..].iter().map(|r| r[0].as_str()).collect();
    assert!(years.iter().all(|y| *y == "2019" || *y == "2020"), "{years:?}");
    assert!(years.contains(&"2019") && years.contains(&"2020"));

    let r = ws.run(&["--mode", "forecast", "--config", conf, "--horizon", "2020", "--seed", "6", "--out", "c"]);
    assert_eq!(r.code, 0);
    assert_ne!(ws.read("a/params.tsv"), ws.read("c/params.tsv"));
}

#[test]
fn equal_rates_have_zero_gini() {
    let ws = Workspace::new();
    let mut data = Vec::new();
    for year in [2000, 2001] {
        for (i, scale) in [1u64, 3, 7, 20].into_iter().enumerate() {
            data.push((["06037", "17031", "36061", "48201"][i], "Some County, XX", year, 15 * scale, 100_000 * scale));
        }
    }
    let conf = ws.write("c.conf", "counties = counties.tsv\n");
    ws.write("counties.tsv", &county_file(&data));
    let r = ws.run(&["--mode", "county-stats", "--config", conf.to_str().unwrap(), "--out", "o"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let gini = rows(&ws.read("o/gini.tsv"));
    let g = column(&gini, "gini");
    assert_eq!(gini.len(), 3);
    for row in &gini[1..] {
        assert_eq!(row[g].parse::<f64>().unwrap(), 0.0, "{row:?}");
        assert_eq!(row[column(&gini, "n_counties")], "4");
    }
}

#[test]
fn empty_filtered_slices_exit_three() {
    let ws = Workspace::new();
    let conf = ws.write("c.conf", "counties = counties.tsv\n");
    ws.write(
        "counties.tsv",
        &county_file(&[("01001", "A County, AL", 2000, 3, 50_000), ("01003", "B County, AL", 2000, 9, 90_000)]),
    );
    let r = ws.run(&["--mode", "county-stats", "--config", conf.to_str().unwrap(), "--out", "o"]);
    assert_eq!(r.code, 3, "{}", r.stderr);
}

#[test]
fn top_table_matches_the_library_ranking() {
    let ws = Workspace::new();
    let mut data = Vec::new();
    let names = ["A County, AL", "B County, AK", "C County, AZ", "D County, AR", "E County, CA", "F County, CO"];
    for year in [2019, 2020] {
        for (i, name) in names.iter().enumerate() {
            let d = 10 + ((i as u64 * 37 + year as u64) % 11) * 13;
            let p = 40_000 + (i as u64 * 7919 % 13) * 25_000;
            data.push((["01001", "02013", "04001", "05001", "06001", "08001"][i], *name, year, d, p));
        }
    }
    let text = county_file(&data);
    ws.write("counties.tsv", &text);
    let conf = ws.write("c.conf", "counties = counties.tsv\ntop_k = 4\n");
    let r = ws.run(&["--mode", "county-stats", "--config", conf.to_str().unwrap(), "--out", "o"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let top = rows(&ws.read("o/top.tsv"));

    let table = parse_county_text(&text, "c", false).unwrap();
    let mut expect = Vec::new();
    for year in [2019, 2020] {
        let slice = CountyYearSlice::from_table(&table, year, SliceFilter::default());
        for (by, name) in [(RankBy::Deaths, "deaths"), (RankBy::CrudeRate, "crude_rate")] {
            for (i, e) in top_counties(&slice, 4, by).into_iter().enumerate() {
                expect.push(vec![
                    year.to_string(),
                    name.to_string(),
                    (i + 1).to_string(),
                    e.county_id.clone(),
                    e.county_name.clone(),
                    e.deaths.to_string(),
                    e.population.to_string(),
                ]);
            }
        }
    }
    let got: Vec<Vec<String>> = top[1..].iter().map(|r| r[..7].to_vec()).collect();
    assert_eq!(got, expect);
}

#[test]
fn twin_experiment_flag_needs_no_data_files() {
    let ws = Workspace::new();
    let conf = ws.write("c.conf", "ensemble_size = 6\nend_year = 2003\n");
    let r = ws.run(&[
        "--mode",
        "assimilate",
        "--twin-experiment",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        "t",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(Path::new(&ws.path("t/truth.tsv")).exists());
    assert!(ws.read("t/params.tsv").lines().any(|l| l.starts_with("# twin")));
}
