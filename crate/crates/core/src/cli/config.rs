//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::{uniform_edges, SliceFilter};
use crate::enkf::{Exposure, NoiseStructure, Reanchor};
use crate::error::{Error, Result};
use crate::population::DEFAULT_MAX_EXTRAPOLATION;
use crate::scenario::{Preset, Scenario};

use super::Mode;

/// Reads `key = value` lines. `#` starts a comment; blank lines are skipped;
/// a repeated key is an error.
pub fn parse_key_values(text: &str, source: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Ingest {
            path: source.to_string(),
            line: i + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(err("empty key".into()));
        }
        if out.insert(key.clone(), (i + 1, value.trim().to_string())).is_some() {
            return Err(err(format!("key `{key}` given twice")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataPaths {
    /// Single-year-of-age population.
    pub population: Option<PathBuf>,
    /// Population in age bands, spread over single ages on load.
    pub population_bands: Option<PathBuf>,
    pub fatalities: Option<PathBuf>,
    pub counties: Option<PathBuf>,
}

/// Everything a run reads, after preset, config file and flags are merged.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub scenario: Scenario,
    pub seed: u64,
    /// Last year to simulate or forecast; the preset's end year otherwise.
    pub horizon: Option<i32>,
    pub out: PathBuf,
    pub data: DataPaths,
    pub max_extrapolation: f64,
    pub strict_reliability: bool,
    pub min_deaths: u64,
    pub top_k: usize,
    pub hist_deaths_edges: Vec<f64>,
    pub hist_rate_edges: Vec<f64>,
    pub twin: bool,
}

/// Values given on the command line; they win over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub horizon: Option<i32>,
    pub out: Option<PathBuf>,
    pub strict_reliability: bool,
    pub twin: bool,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("`{key}`: cannot read `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(Error::config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn render_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn new(mode: Mode, preset: Preset) -> Self {
        RunConfig {
            mode,
            scenario: Scenario::preset(preset),
            seed: 0,
            horizon: None,
            out: PathBuf::from("."),
            data: DataPaths::default(),
            max_extrapolation: DEFAULT_MAX_EXTRAPOLATION,
            strict_reliability: mode == Mode::CountyStats,
            min_deaths: SliceFilter::SIGNIFICANT.min_deaths,
            top_k: 3,
            hist_deaths_edges: vec![10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0, 5000.0, 1e7],
            hist_rate_edges: {
                let mut e = uniform_edges(0.0, 100.0, 20);
                e.push(1e5);
                e
            },
            twin: false,
        }
    }

    /// Merges the optional config file and the command-line overrides.
    pub fn resolve(mode: Mode, config: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let (entries, base) = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (parse_key_values(&text, &path.display().to_string())?, base)
            }
            None => (BTreeMap::new(), PathBuf::new()),
        };
        let preset_name = overrides
            .preset
            .clone()
            .or_else(|| entries.get("preset").map(|(_, v)| v.clone()))
            .unwrap_or_else(|| "nationwide".into());
        let mut cfg = RunConfig::new(mode, preset_name.parse()?);
        for (key, (line, value)) in &entries {
            if key == "preset" {
                continue;
            }
            cfg.set(key, value, &base)
                .map_err(|e| Error::config(format!("config line {line}: {e}")))?;
        }
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(h) = overrides.horizon {
            cfg.horizon = Some(h);
        }
        if let Some(out) = &overrides.out {
            cfg.out = out.clone();
        }
        cfg.strict_reliability |= overrides.strict_reliability;
        cfg.twin |= overrides.twin;
        if let Some(h) = cfg.horizon {
            cfg.scenario.end_year = h;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        for (name, edges) in [("hist_deaths_edges", &self.hist_deaths_edges), ("hist_rate_edges", &self.hist_rate_edges)] {
            if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::config(format!("{name} must hold at least two increasing edges")));
            }
        }
        if !(self.max_extrapolation >= 0.0) {
            return Err(Error::config("max_extrapolation must be >= 0"));
        }
        Ok(())
    }

    pub fn slice_filter(&self) -> SliceFilter {
        SliceFilter {
            min_deaths: self.min_deaths,
            strict: self.strict_reliability,
        }
    }

    /// Applies one setting. Relative paths resolve against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || {
            let p = PathBuf::from(value);
            if p.is_absolute() { p } else { base.join(p) }
        };
        let sc = &mut self.scenario;
        let f = &mut sc.filter;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "horizon" => self.horizon = Some(parse(key, value)?),
            "out" => self.out = path(),
            "population" => self.data.population = Some(path()),
            "population_bands" => self.data.population_bands = Some(path()),
            "fatalities" => self.data.fatalities = Some(path()),
            "counties" => self.data.counties = Some(path()),
            "max_extrapolation" => self.max_extrapolation = parse(key, value)?,
            "strict_reliability" => self.strict_reliability = parse_bool(key, value)?,
            "min_deaths" => self.min_deaths = parse(key, value)?,
            "top_k" => self.top_k = parse(key, value)?,
            "hist_deaths_edges" => self.hist_deaths_edges = parse_list(key, value)?,
            "hist_rate_edges" => self.hist_rate_edges = parse_list(key, value)?,
            "twin_experiment" => self.twin = parse_bool(key, value)?,

            "start_year" => sc.start_year = parse(key, value)?,
            "end_year" => sc.end_year = parse(key, value)?,
            "n0_total" => sc.initial.n0_total = parse(key, value)?,
            "prevalence" => sc.initial.prevalence = parse(key, value)?,
            "alpha0" => sc.initial.alpha0 = parse(key, value)?,
            "beta0" => sc.initial.beta0 = parse(key, value)?,
            "mu_d" => sc.params.mu_d = parse(key, value)?,
            "r1" => sc.params.r1 = parse(key, value)?,
            "r2" => sc.params.r2 = parse(key, value)?,
            "alpha1" => sc.params.alpha1 = parse(key, value)?,
            "beta1" => sc.params.beta1 = parse(key, value)?,
            "alpha2" => sc.params.alpha2 = parse(key, value)?,
            "beta2" => sc.params.beta2 = parse(key, value)?,
            "gamma1" => sc.baseline.gamma1 = parse(key, value)?,
            "gamma2" => sc.baseline.gamma2 = parse(key, value)?,
            "lambda1" => sc.baseline.lambda1 = parse(key, value)?,
            "lambda2" => sc.baseline.lambda2 = parse(key, value)?,
            "m_shift" => sc.baseline.m_shift = parse(key, value)?,

            "ensemble_size" => f.ensemble_size = parse(key, value)?,
            "dt" => f.dt = parse(key, value)?,
            "initial_state_variance" => f.initial_state_variance = parse(key, value)?,
            "initial_param_variance" => f.initial_param_variance = parse(key, value)?,
            "process_noise" => f.process_noise = parse(key, value)?,
            "process_noise_structure" => {
                f.process_noise_structure = match value {
                    "ones" => NoiseStructure::Ones,
                    "diagonal" => NoiseStructure::Diagonal,
                    _ => return Err(Error::config(format!("`{key}`: expected ones or diagonal, got `{value}`"))),
                }
            }
            "observation_noise" => f.observation_noise = parse(key, value)?,
            "first_year_cycles" => f.first_year_cycles = parse(key, value)?,
            "measurement_window" => {
                let v = parse_list(key, value)?;
                if v.len() != 2 {
                    return Err(Error::config(format!("`{key}`: expected `lo,hi`, got `{value}`")));
                }
                f.measurement_window = (v[0], v[1]);
            }
            "quad_step" => f.quad_step = parse(key, value)?,
            "reanchor" => {
                f.reanchor = match value {
                    "off" => Reanchor::Off,
                    "before_gain" => Reanchor::BeforeGain,
                    "after_gain" => Reanchor::AfterGain,
                    _ => {
                        return Err(Error::config(format!(
                            "`{key}`: expected off, before_gain or after_gain, got `{value}`"
                        )))
                    }
                }
            }
            "reanchor_exposure" => {
                f.reanchor_exposure = match value {
                    "member" => Exposure::Member,
                    "ensemble_mean" => Exposure::EnsembleMean,
                    _ => {
                        return Err(Error::config(format!(
                            "`{key}`: expected member or ensemble_mean, got `{value}`"
                        )))
                    }
                }
            }
            "order_components" => f.order_components = parse_bool(key, value)?,
            _ => return Err(Error::config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Every resolved setting, one `key = value` per line in a fixed order.
    /// Hashing this text identifies a run.
    pub fn canonical(&self) -> String {
        let sc = &self.scenario;
        let f = &sc.filter;
        let opt_path = |p: &Option<PathBuf>| p.as_ref().map_or("-".to_string(), |p| p.display().to_string());
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("mode", self.mode.to_string());
        put("preset", sc.region.to_string());
        put("seed", self.seed.to_string());
        put("horizon", self.horizon.map_or("-".into(), |h| h.to_string()));
        put("population", opt_path(&self.data.population));
        put("population_bands", opt_path(&self.data.population_bands));
        put("fatalities", opt_path(&self.data.fatalities));
        put("counties", opt_path(&self.data.counties));
        put("max_extrapolation", self.max_extrapolation.to_string());
        put("strict_reliability", self.strict_reliability.to_string());
        put("min_deaths", self.min_deaths.to_string());
        put("top_k", self.top_k.to_string());
        put("hist_deaths_edges", render_list(&self.hist_deaths_edges));
        put("hist_rate_edges", render_list(&self.hist_rate_edges));
        put("twin_experiment", self.twin.to_string());
        put("start_year", sc.start_year.to_string());
        put("end_year", sc.end_year.to_string());
        put("n0_total", sc.initial.n0_total.to_string());
        put("prevalence", sc.initial.prevalence.to_string());
        put("alpha0", sc.initial.alpha0.to_string());
        put("beta0", sc.initial.beta0.to_string());
        for (k, v) in crate::enkf::sud::PARAM_NAMES.iter().zip(sc.params.as_array()) {
            put(k, v.to_string());
        }
        let b = &sc.baseline;
        put("gamma1", b.gamma1.to_string());
        put("gamma2", b.gamma2.to_string());
        put("lambda1", b.lambda1.to_string());
        put("lambda2", b.lambda2.to_string());
        put("m_shift", b.m_shift.to_string());
        put("ensemble_size", f.ensemble_size.to_string());
        put("dt", f.dt.to_string());
        put("initial_state_variance", f.initial_state_variance.to_string());
        put("initial_param_variance", f.initial_param_variance.to_string());
        put("process_noise", f.process_noise.to_string());
        put("process_noise_structure", format!("{:?}", f.process_noise_structure).to_lowercase());
        put("observation_noise", f.observation_noise.to_string());
        put("first_year_cycles", f.first_year_cycles.to_string());
        put("measurement_window", format!("{},{}", f.measurement_window.0, f.measurement_window.1));
        put("quad_step", f.quad_step.to_string());
        put(
            "reanchor",
            match f.reanchor {
                Reanchor::Off => "off",
                Reanchor::BeforeGain => "before_gain",
                Reanchor::AfterGain => "after_gain",
            }
            .into(),
        );
        put(
            "reanchor_exposure",
            match f.reanchor_exposure {
                Exposure::Member => "member",
                Exposure::EnsembleMean => "ensemble_mean",
            }
            .into(),
        );
        put("order_components", f.order_components.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_values_skip_comments_and_reject_repeats() {
        let kv = parse_key_values("# run\nseed = 4  # trailing\n\nmu_d=0.003\n", "cfg").unwrap();
        assert_eq!(kv["seed"], (2, "4".to_string()));
        assert_eq!(kv["mu_d"].1, "0.003");
        assert!(parse_key_values("a = 1\na = 2\n", "cfg").is_err());
        assert!(parse_key_values("no equals sign\n", "cfg").is_err());
    }

    #[test]
    fn canonical_text_round_trips() {
        let mut cfg = RunConfig::new(Mode::Assimilate, Preset::CookCounty);
        cfg.set("reanchor", "after_gain", Path::new("")).unwrap();
        cfg.set("ensemble_size", "40", Path::new("")).unwrap();
        cfg.set("hist_rate_edges", "0,5,10", Path::new("")).unwrap();
        let text = cfg.canonical();
        let mut again = RunConfig::new(Mode::Assimilate, Preset::CookCounty);
        for (key, (_, value)) in parse_key_values(&text, "canonical").unwrap() {
            if matches!(key.as_str(), "mode" | "preset") {
                continue;
            }
            if value == "-" {
                continue;
            }
            again.set(&key, &value, Path::new("")).unwrap();
        }
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        let mut cfg = RunConfig::new(Mode::Simulate, Preset::Nationwide);
        assert!(cfg.set("ensemble", "3", Path::new("")).is_err());
        assert!(cfg.set("dt", "fast", Path::new("")).is_err());
        assert!(cfg.set("reanchor", "sometimes", Path::new("")).is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = RunConfig::new(Mode::Simulate, Preset::Nationwide);
        cfg.set("population", "data/pop.tsv", Path::new("/runs/a")).unwrap();
        assert_eq!(cfg.data.population.unwrap(), PathBuf::from("/runs/a/data/pop.tsv"));
    }
}
