//! Command-line runs: simulation, assimilation, forecasting and county
//! statistics, each writing tab-separated tables under `--out`.
//!
//! Exit codes: 0 success, 2 configuration or data error, 3 empty result,
//! 4 numerical failure.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use log::{info, warn};
use sha2::{Digest, Sha256};

use crate::analysis::{histogram, top_counties, CountyYearSlice, RankBy};
use crate::enkf::sud::SudParams;
use crate::enkf::{run_assimilation, simulate, synthetic_observations, Assimilation, SimulatedYear};
use crate::error::{Error, Result};
use crate::ingest::{
    county_population_profile, parse_county, parse_fatalities, parse_population, parse_population_bands,
    AgeBinScheme, ObservationSeries,
};
use crate::population::{fit_surface, PopulationSurface, PopulationTable};
use crate::synthetic::{population_table, Drift};

pub mod config;

pub use config::{parse_key_values, DataPaths, Overrides, RunConfig};

pub const THREADS_ENV: &str = "OD_ASSIM_THREADS";

/// Last year of synthetic observations in twin experiments.
pub const TWIN_LAST_YEAR: i32 = 2021;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Simulate,
    Assimilate,
    Forecast,
    CountyStats,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Simulate => "simulate",
            Mode::Assimilate => "assimilate",
            Mode::Forecast => "forecast",
            Mode::CountyStats => "county-stats",
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "od-assim", version, about = "Overdose mortality model with ensemble Kalman filter assimilation")]
pub struct Args {
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// nationwide, la-county, cook-county or nyc.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Last year to simulate or forecast.
    #[arg(long)]
    pub horizon: Option<i32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Drop records flagged unreliable.
    #[arg(long)]
    pub strict_reliability: bool,
    /// Assimilate synthetic observations generated from a drifting truth.
    #[arg(long)]
    pub twin_experiment: bool,
}

impl Args {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            preset: self.preset.clone(),
            seed: self.seed,
            horizon: self.horizon,
            out: self.out.clone(),
            strict_reliability: self.strict_reliability,
            twin: self.twin_experiment,
        }
    }
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Empty(_) => 3,
        Error::Numerical(_) => 4,
        Error::Domain(_) | Error::Ingest { .. } | Error::Ragged(_) | Error::Config(_) | Error::Io { .. } => 2,
    }
}

/// Entry point of the binary: parses nothing itself, reports errors on stderr.
pub fn main_with(args: Args) -> ExitCode {
    match run_args(&args) {
        Ok(files) => {
            for f in files {
                info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("od-assim: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn run_args(args: &Args) -> Result<Vec<PathBuf>> {
    let cfg = RunConfig::resolve(args.mode, args.config.as_deref(), &args.overrides())?;
    run(&cfg)
}

fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

/// Runs one mode and writes its tables. Returns the paths written.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::config(format!("cannot start worker threads: {e}")))?;
    let tables = pool.install(|| match cfg.mode {
        Mode::Simulate => cmd_simulate(cfg),
        Mode::Assimilate | Mode::Forecast => cmd_assimilate(cfg),
        Mode::CountyStats => cmd_county_stats(cfg),
    })?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let mut written = Vec::new();
    for (name, text) in tables {
        let path = cfg.out.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// `#` lines shared by every output of a run.
struct Metadata {
    lines: String,
}

impl Metadata {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let mut lines = String::new();
        let _ = writeln!(lines, "# od-assim {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(lines, "# mode\t{}", cfg.mode);
        let _ = writeln!(lines, "# preset\t{}", cfg.scenario.region);
        let _ = writeln!(lines, "# config_sha256\t{}", sha256_hex(cfg.canonical().as_bytes()));
        let _ = writeln!(lines, "# seed\t{}", cfg.seed);
        let data = &cfg.data;
        for (role, path) in [
            ("population", &data.population),
            ("population_bands", &data.population_bands),
            ("fatalities", &data.fatalities),
            ("counties", &data.counties),
        ] {
            if let Some(p) = path {
                let name = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into());
                let _ = writeln!(lines, "# data\t{role}\t{name}\tsha256={}", file_hash(p)?);
            }
        }
        if cfg.twin {
            let _ = writeln!(lines, "# twin_experiment\tsynthetic observations through {TWIN_LAST_YEAR}");
        }
        Ok(Metadata { lines })
    }

    fn with(&self, extra: &[(&str, String)]) -> String {
        let mut s = self.lines.clone();
        for (k, v) in extra {
            let _ = writeln!(s, "# {k}\t{v}");
        }
        s
    }
}

fn population(cfg: &RunConfig) -> Result<PopulationSurface> {
    let sc = &cfg.scenario;
    let table: PopulationTable = match (&cfg.data.population, &cfg.data.population_bands) {
        (Some(p), _) => parse_population(p)?,
        (None, Some(p)) => county_population_profile(&parse_population_bands(p)?, &sc.scheme)?,
        (None, None) if cfg.twin => {
            warn!("no population file; twin experiment uses a synthetic population");
            population_table(sc.start_year, TWIN_LAST_YEAR.max(sc.start_year + 1), sc.initial.n0_total, 0.0085)
        }
        (None, None) => {
            return Err(Error::config(format!(
                "mode {} needs a population file (`population` or `population_bands` in the config)",
                cfg.mode
            )))
        }
    };
    Ok(fit_surface(&table)?.with_max_extrapolation(cfg.max_extrapolation))
}

fn twin_drift(cfg: &RunConfig) -> Drift {
    Drift {
        first_year: cfg.scenario.start_year,
        last_year: TWIN_LAST_YEAR,
        mu_d: (cfg.scenario.params.mu_d, Drift::nationwide().mu_d.1),
        ..Drift::nationwide()
    }
}

fn display_scheme(cfg: &RunConfig) -> AgeBinScheme {
    let step = if cfg.scenario.scheme == AgeBinScheme::nationwide() { 5 } else { 10 };
    let top = 85 - 85 % step;
    let mut edges: Vec<u32> = (0..=top).step_by(step as usize).collect();
    edges.push(crate::ingest::scheme::MAX_AGE);
    AgeBinScheme::new(edges).expect("display bins are increasing")
}

fn age_label((lo, hi): (u32, u32)) -> String {
    if hi == crate::ingest::scheme::MAX_AGE {
        format!("{lo}+")
    } else {
        format!("{lo}-{}", hi - 1)
    }
}

fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<(&'static str, String)>> {
    let pop = population(cfg)?;
    let sc = &cfg.scenario;
    let drift = twin_drift(cfg);
    let base = sc.params;
    let schedule = move |y: i32| drift.params(base, y);
    let run = simulate(sc, &pop, cfg.twin.then_some(&schedule as &dyn Fn(i32) -> SudParams))?;

    let grid = sc.filter.grid;
    let scheme = display_scheme(cfg);
    let sets = scheme.node_sets(&grid, (0.0, f64::from(crate::ingest::scheme::MAX_AGE)))?;
    let meta = Metadata::new(cfg)?;
    let mut out = meta.with(&[
        ("n", "SUD persons in the age bin at the start of the year".into()),
        ("annual_deaths", "overdose deaths in the age bin during the year".into()),
    ]);
    out.push_str("year\tage\tn\tannual_deaths\n");
    for y in &run {
        for (bin, nodes) in scheme.bins().zip(&sets) {
            let n: f64 = nodes.iter().map(|&j| y.densities[j] * grid.delta_a()).sum();
            let d: f64 = nodes.iter().map(|&j| y.deaths[j]).sum();
            let _ = writeln!(out, "{}\t{}\t{:.1}\t{:.3}", y.year, age_label(bin), n, d);
        }
    }
    Ok(vec![("simulation.tsv", out)])
}

fn observations(cfg: &RunConfig, pop: &PopulationSurface) -> Result<(ObservationSeries, Option<Vec<SimulatedYear>>)> {
    let sc = &cfg.scenario;
    if cfg.twin {
        let drift = twin_drift(cfg);
        let base = sc.params;
        let schedule = move |y: i32| drift.params(base, y);
        let mut truth_sc = sc.clone();
        truth_sc.end_year = TWIN_LAST_YEAR.min(sc.end_year).max(sc.start_year);
        let truth = simulate(&truth_sc, pop, Some(&schedule))?;
        let table = synthetic_observations(&truth_sc, &truth)?;
        return Ok((ObservationSeries::from_table(&table, &sc.scheme)?, Some(truth)));
    }
    let path = cfg
        .data
        .fatalities
        .as_ref()
        .ok_or_else(|| Error::config(format!("mode {} needs a fatalities file", cfg.mode)))?;
    let mut series = parse_fatalities(path, &sc.scheme)?;
    if cfg.strict_reliability {
        series = series.without_unreliable();
    }
    let gaps = series.gaps();
    if !gaps.is_empty() {
        warn!("fatality years missing: {gaps:?}");
    }
    Ok((series, None))
}

fn cmd_assimilate(cfg: &RunConfig) -> Result<Vec<(&'static str, String)>> {
    let pop = population(cfg)?;
    let (obs, truth) = observations(cfg, &pop)?;
    let mut sc = cfg.scenario.clone();
    let last = obs
        .years
        .range(sc.start_year..)
        .next_back()
        .map(|(y, _)| *y)
        .ok_or_else(|| Error::config(format!("no observations from {} on", sc.start_year)))?;
    match cfg.mode {
        Mode::Forecast => {
            if sc.end_year < last {
                return Err(Error::config(format!(
                    "horizon {} precedes the last observed year {last}",
                    sc.end_year
                )));
            }
        }
        _ => sc.end_year = last,
    }
    let result = run_assimilation(&sc, &pop, Some(&obs), cfg.seed)?;
    for r in &result.records {
        if r.state_mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite ensemble mean in {}", r.year)));
        }
    }

    let meta = Metadata::new(cfg)?;
    let mut files = vec![
        ("params.tsv", params_table(&meta, &result)),
        ("fit.tsv", fit_table(&meta, &sc.scheme, &result)),
    ];
    if cfg.mode == Mode::Forecast {
        files.push(("forecast.tsv", forecast_table(cfg, &meta, &sc.scheme, &result)));
    }
    if let Some(truth) = truth {
        files.push(("truth.tsv", truth_table(&meta, &truth)));
    }
    Ok(files)
}

fn params_table(meta: &Metadata, result: &Assimilation) -> String {
    let mut out = meta.with(&[(
        "estimates",
        "exp of the ensemble-mean log parameter; sigmas are one standard deviation".into(),
    )]);
    out.push_str("year\tmu_d\tsigma_mu_d\tr1\tr2\ta1max\ta2max\tsigma_r1\tsigma_r2\tsigma_a1max\tsigma_a2max\n");
    for r in &result.records {
        let p = &r.params;
        let _ = writeln!(
            out,
            "{}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.4}\t{:.4}\t{:.6e}\t{:.6e}\t{:.4}\t{:.4}",
            r.year,
            p.mu_d().mean,
            p.mu_d().sd,
            p.r1().mean,
            p.r2().mean,
            p.a1_max.mean,
            p.a2_max.mean,
            p.r1().sd,
            p.r2().sd,
            p.a1_max.sd,
            p.a2_max.sd,
        );
    }
    out
}

fn fit_table(meta: &Metadata, scheme: &AgeBinScheme, result: &Assimilation) -> String {
    let mut out = meta.with(&[("predicted_deaths", "ensemble forecast before the year's update".into())]);
    out.push_str("year\tbin_lo\tbin_hi\tpredicted_deaths\tsigma\tobserved_deaths\n");
    for r in result.records.iter().filter(|r| !r.forecast_only) {
        for (k, (lo, hi)) in scheme.bins().enumerate() {
            let observed = match &r.observed {
                Some(o) => o[k].map_or_else(|| "Suppressed".to_string(), |d| d.to_string()),
                None => "NA".into(),
            };
            let p = r.predicted[k];
            let _ = writeln!(out, "{}\t{lo}\t{hi}\t{:.1}\t{:.1}\t{observed}", r.year, p.mean, p.sd);
        }
    }
    out
}

/// Forecast-only years, restricted to the bins the filter measures: outside
/// the window the state carries no information and its spread is the process
/// noise alone.
fn forecast_table(cfg: &RunConfig, meta: &Metadata, scheme: &AgeBinScheme, result: &Assimilation) -> String {
    let (window_lo, window_hi) = cfg.scenario.filter.measurement_window;
    let mut out = meta.with(&[
        (
            "population_extrapolation",
            format!(
                "linear in t beyond the last population year, up to {} years; ages above 85 hold N(85, t)",
                cfg.max_extrapolation
            ),
        ),
        ("three_sigma", "three ensemble standard deviations".into()),
        (
            "bins",
            format!("inside the measured age window [{window_lo}, {window_hi}]"),
        ),
    ]);
    out.push_str("year\tbin_lo\tbin_hi\tmean\tsigma\tthree_sigma\n");
    let outside = scheme.outside(cfg.scenario.filter.measurement_window);
    for r in result.records.iter().filter(|r| r.forecast_only) {
        for (k, (lo, hi)) in scheme.bins().enumerate().filter(|(k, _)| !outside[*k]) {
            let p = r.predicted[k];
            let _ = writeln!(out, "{}\t{lo}\t{hi}\t{:.1}\t{:.1}\t{:.1}", r.year, p.mean, p.sd, 3.0 * p.sd);
        }
    }
    out
}

fn truth_table(meta: &Metadata, truth: &[SimulatedYear]) -> String {
    let mut out = meta.with(&[]);
    out.push_str("year\tmu_d\tr1\tr2\ta1max\ta2max\ttotal_deaths\n");
    for y in truth {
        let p = &y.params;
        let _ = writeln!(
            out,
            "{}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.4}\t{:.4}\t{:.1}",
            y.year,
            p.mu_d,
            p.r1,
            p.r2,
            p.a1_max(),
            p.a2_max(),
            y.deaths.iter().sum::<f64>()
        );
    }
    out
}

fn cmd_county_stats(cfg: &RunConfig) -> Result<Vec<(&'static str, String)>> {
    let path = cfg
        .data
        .counties
        .as_ref()
        .ok_or_else(|| Error::config("mode county-stats needs a counties file"))?;
    let table = parse_county(path, false)?;
    for w in &table.warnings {
        warn!("{w}");
    }
    let filter = cfg.slice_filter();
    let slices: Vec<CountyYearSlice> = table
        .years()
        .into_iter()
        .map(|y| CountyYearSlice::from_table(&table, y, filter))
        .collect();
    if slices.iter().all(|s| s.is_empty()) {
        return Err(Error::Empty(format!("no county passes the filter ({})", filter.label())));
    }

    let meta = Metadata::new(cfg)?;
    let header = meta.with(&[("filter", filter.label())]);

    let mut gini = header.clone();
    gini.push_str("year\tn_counties\tgini\tmean_crude_rate\n");
    for s in &slices {
        let g = s.gini().map_or_else(|_| "NA".into(), |g| format!("{g:.6}"));
        let m = s.mean_crude_rate().map_or_else(|_| "NA".into(), |m| format!("{m:.4}"));
        let _ = writeln!(gini, "{}\t{}\t{g}\t{m}", s.year, s.len());
    }

    let mut top = header.clone();
    top.push_str("year\tby\trank\tcounty_id\tcounty_name\tdeaths\tpopulation\tcrude_rate\n");
    for s in &slices {
        for (by, name) in [(RankBy::Deaths, "deaths"), (RankBy::CrudeRate, "crude_rate")] {
            for (i, e) in top_counties(s, cfg.top_k, by).into_iter().enumerate() {
                let _ = writeln!(
                    top,
                    "{}\t{name}\t{}\t{}\t{}\t{}\t{}\t{:.4}",
                    s.year,
                    i + 1,
                    e.county_id,
                    e.county_name,
                    e.deaths,
                    e.population,
                    e.crude_rate
                );
            }
        }
    }

    let mut hist = header;
    hist.push_str("year\tmeasure\tbin_lo\tbin_hi\tcount\n");
    for s in &slices {
        for (name, values, edges) in [
            ("deaths", s.deaths(), &cfg.hist_deaths_edges),
            ("crude_rate", s.crude_rates(), &cfg.hist_rate_edges),
        ] {
            for (w, c) in edges.windows(2).zip(histogram(&values, edges)) {
                let _ = writeln!(hist, "{}\t{name}\t{}\t{}\t{c}", s.year, w[0], w[1]);
            }
        }
    }
    Ok(vec![("gini.tsv", gini), ("top.tsv", top), ("hist.tsv", hist)])
}
