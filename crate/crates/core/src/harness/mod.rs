//! Scenario runner: reproduces the built-in experiments and writes CSV
//! data, SVG plots, a machine-readable metrics summary and the resolved
//! configuration (with its hash) for every run.

pub mod config;
pub mod metrics;
mod scenarios;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ekf::EkfError;
use crate::freq::FreqError;
use crate::observer::ObserverError;
use crate::poly::PolyError;
use crate::quadrotor::QuadError;
use crate::record::{RecordError, RunRecord};
use crate::signals::SignalError;
use config::{ConfigReader, ResolvedConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown scenario {name:?}; available: {available}")]
    UnknownScenario { name: String, available: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown config keys: {0}")]
    UnknownKeys(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Observer(#[from] ObserverError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Ekf(#[from] EkfError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Freq(#[from] FreqError),
}

/// Name and one-line description of every built-in scenario.
pub const SCENARIOS: &[(&str, &str)] = &[
    (
        "integ1-100s",
        "onefold integrator vs Kalman chain on a noisy cosine, 100 s",
    ),
    (
        "integ1-2000s",
        "onefold integrator drift comparison over 2000 s",
    ),
    (
        "integ2-100s",
        "double integrator vs Kalman chain on a noisy -sin, 100 s",
    ),
    (
        "integ2-2000s",
        "double integrator drift comparison over 2000 s",
    ),
    (
        "bode-diffint",
        "Bode sweep of the differentiation-integration observer",
    ),
    (
        "bode-diffdouble",
        "Bode sweep of the differentiation and double-integration observer",
    ),
    ("quad-50s", "quadrotor climb-and-hold tracking run, 50 s"),
    (
        "quad-1000s",
        "quadrotor long-horizon run for attitude-drift comparison",
    ),
];

pub fn scenario_names() -> Vec<&'static str> {
    SCENARIOS.iter().map(|(n, _)| *n).collect()
}

/// A scenario invocation: the name, override values and output directory.
#[derive(Debug, Clone, Default)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub overrides: toml::Table,
    pub out_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn new(scenario: &str) -> Self {
        Self {
            scenario: scenario.to_string(),
            overrides: toml::Table::new(),
            out_dir: None,
        }
    }

    /// Deep-merges override text (later calls win on conflicts).
    pub fn with_overrides_str(mut self, text: &str) -> Result<Self, HarnessError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| HarnessError::Config(format!("TOML parse error: {e}")))?;
        merge_tables(&mut self.overrides, table);
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.overrides
            .insert("seed".to_string(), toml::Value::Integer(seed as i64));
        self
    }

    pub fn with_out_dir(mut self, dir: &Path) -> Self {
        self.out_dir = Some(dir.to_path_buf());
        self
    }
}

fn merge_tables(base: &mut toml::Table, incoming: toml::Table) {
    for (k, v) in incoming {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(bt)), toml::Value::Table(it)) => merge_tables(bt, it),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Everything a run produced: the record, scalar metrics, the resolved
/// configuration and the files written (empty when no output directory was
/// given).
#[derive(Debug)]
pub struct ScenarioOutcome {
    pub record: RunRecord<f64>,
    pub metrics: BTreeMap<String, f64>,
    pub config: ResolvedConfig,
    pub files: Vec<PathBuf>,
}

/// Runs one scenario: resolves the configuration (rejecting unknown keys),
/// simulates, computes metrics, and writes `run.csv`, SVG plots,
/// `metrics.txt` and `config.toml` when an output directory is set.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome, HarnessError> {
    let mut reader = ConfigReader::new(&cfg.overrides)?;
    let result = match cfg.scenario.as_str() {
        "integ1-100s" => scenarios::integ(&mut reader, scenarios::IntegKind::Onefold, 100.0)?,
        "integ1-2000s" => scenarios::integ(&mut reader, scenarios::IntegKind::Onefold, 2000.0)?,
        "integ2-100s" => scenarios::integ(&mut reader, scenarios::IntegKind::Double, 100.0)?,
        "integ2-2000s" => scenarios::integ(&mut reader, scenarios::IntegKind::Double, 2000.0)?,
        "bode-diffint" => scenarios::bode(&mut reader, scenarios::BodeKind::DiffInt)?,
        "bode-diffdouble" => scenarios::bode(&mut reader, scenarios::BodeKind::DiffDouble)?,
        "quad-50s" => scenarios::quad(&mut reader, 50.0)?,
        "quad-1000s" => scenarios::quad(&mut reader, 1000.0)?,
        other => {
            return Err(HarnessError::UnknownScenario {
                name: other.to_string(),
                available: scenario_names().join(", "),
            })
        }
    };
    let resolved = reader.finish()?;

    let mut record = result.record;
    record
        .metadata
        .insert("scenario".into(), cfg.scenario.clone());
    record
        .metadata
        .insert("config_hash".into(), resolved.hash.clone());
    record
        .metadata
        .insert("seed".into(), result.seed.to_string());

    let mut files = Vec::new();
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join("run.csv");
        record.write_csv(&csv_path)?;
        files.push(csv_path);

        let config_path = dir.join("config.toml");
        std::fs::write(&config_path, &resolved.text)?;
        files.push(config_path);

        let metrics_path = dir.join("metrics.txt");
        std::fs::write(&metrics_path, render_metrics(&result.metrics))?;
        files.push(metrics_path);

        for (name, plot) in &result.plots {
            let path = dir.join(name);
            std::fs::write(&path, plot.render())?;
            files.push(path);
        }
        for (name, content) in &result.extra_csvs {
            let path = dir.join(name);
            std::fs::write(&path, content)?;
            files.push(path);
        }
    }

    Ok(ScenarioOutcome {
        record,
        metrics: result.metrics,
        config: resolved,
        files,
    })
}

fn render_metrics(metrics: &BTreeMap<String, f64>) -> String {
    let mut out = String::new();
    for (k, v) in metrics {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

/// Writes the record as CSV.
pub fn export_csv(record: &RunRecord<f64>, path: &Path) -> Result<(), HarnessError> {
    record.write_csv(path)?;
    Ok(())
}

/// Plots the named columns against the record's time axis into a
/// self-contained SVG.
pub fn export_svg_plot(
    record: &RunRecord<f64>,
    columns: &[&str],
    path: &Path,
) -> Result<(), HarnessError> {
    let times = record.times();
    let mut plot = svg::Plot::new(
        path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot"),
        "t",
        "value",
    );
    for name in columns {
        let values = record.column(name)?;
        plot = plot.with(svg::Series::solid(
            name,
            times.iter().copied().zip(values).collect(),
        ));
    }
    std::fs::write(path, plot.render())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(scenario: &str) -> ScenarioConfig {
        ScenarioConfig::new(scenario)
            .with_overrides_str("duration = 2.0\nrecord_every = 100")
            .unwrap()
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        let err = run_scenario(&ScenarioConfig::new("nope")).unwrap_err();
        assert!(matches!(err, HarnessError::UnknownScenario { .. }));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let cfg = ScenarioConfig::new("integ1-100s")
            .with_overrides_str("duration = 2.0\nobserver.k9 = 1.0")
            .unwrap();
        match run_scenario(&cfg) {
            Err(HarnessError::UnknownKeys(keys)) => assert!(keys.contains("observer.k9")),
            other => panic!("expected unknown-keys error, got {other:?}"),
        }
    }

    #[test]
    fn integ1_defaults_match_the_documented_setup() {
        let out = run_scenario(&short("integ1-100s")).unwrap();
        let text = &out.config.text;
        assert!(text.contains("observer.k1 = 2.0"), "{text}");
        assert!(text.contains("observer.k2 = 2.7783"));
        assert!(text.contains("observer.eps = 0.1667"));
        assert!(text.contains("observer.x0 = [0.5, 2.0]"));
        assert!(text.contains("noise.pulse.amplitude = 0.5"));
        assert!(text.contains("noise.pulse.period = 2.0"));
        assert!(text.contains("noise.pulse.width_s = 1.0"));
    }

    #[test]
    fn bode_defaults_sweep_two_eps_values() {
        let out = run_scenario(&ScenarioConfig::new("bode-diffint")).unwrap();
        assert!(out.config.text.contains("bode.eps = [0.1, 0.2]"));
        assert!(out.config.text.contains("bode.gains = [0.1, 3.0, 2.0]"));
        assert!(out.record.columns().iter().any(|c| c == "mag_db_j2_eps0.1"));
        assert!(out.metrics.contains_key("bandwidth_j2_eps0.1"));
        // narrower eps means wider usable bandwidth
        assert!(out.metrics["bandwidth_j2_eps0.1"] > out.metrics["bandwidth_j2_eps0.2"]);
    }

    #[test]
    fn quad_defaults_match_the_documented_initial_state() {
        let cfg = ScenarioConfig::new("quad-50s")
            .with_overrides_str("duration = 0.5")
            .unwrap();
        let out = run_scenario(&cfg).unwrap();
        let text = &out.config.text;
        for needle in [
            "quad.init.x = 0.5",
            "quad.init.vx = -0.5",
            "quad.init.y = -0.5",
            "quad.init.vy = 0.5",
            "quad.init.z = 0.5",
            "quad.init.vz = -1.0",
            "quad.init.psi = 0.2",
            "quad.init.psi_rate = 0.3",
            "quad.init.theta = 0.3",
            "quad.init.theta_rate = -0.1",
            "quad.init.phi = 0.2",
            "quad.init.phi_rate = -0.2",
        ] {
            assert!(text.contains(needle), "missing {needle} in\n{text}");
        }
        let first = out.record.row(0);
        let idx = out.record.column_index("x").unwrap();
        assert_eq!(first[idx], 0.5);
    }

    #[test]
    fn determinism_identical_config_identical_csv_bytes() {
        let a = run_scenario(&short("integ1-100s")).unwrap();
        let b = run_scenario(&short("integ1-100s")).unwrap();
        assert_eq!(a.record.to_csv(), b.record.to_csv());
        assert_eq!(a.config.hash, b.config.hash);

        // different seed, different bytes
        let c = run_scenario(&short("integ1-100s").with_seed(7)).unwrap();
        assert_ne!(a.record.to_csv(), c.record.to_csv());
    }

    #[test]
    fn files_are_written_and_stamped() {
        let dir = std::env::temp_dir().join(format!("obsint-test-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let cfg = short("integ2-100s").with_out_dir(&dir);
        let out = run_scenario(&cfg).unwrap();
        assert!(out.files.iter().any(|f| f.ends_with("run.csv")));
        assert!(out.files.iter().any(|f| f.ends_with("config.toml")));
        assert!(out.files.iter().any(|f| f.ends_with("metrics.txt")));
        for f in &out.files {
            assert!(f.exists(), "missing output file {f:?}");
        }
        let csv = std::fs::read_to_string(dir.join("run.csv")).unwrap();
        let reparsed = RunRecord::<f64>::from_csv(&csv).unwrap();
        assert_eq!(reparsed.columns(), out.record.columns());
        assert_eq!(reparsed.len(), out.record.len());
        assert_eq!(out.record.metadata["config_hash"], out.config.hash);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn bode_svg_has_solid_and_dashed_paths() {
        let dir = std::env::temp_dir().join(format!("obsint-bode-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let cfg = ScenarioConfig::new("bode-diffint").with_out_dir(&dir);
        run_scenario(&cfg).unwrap();
        let svg = std::fs::read_to_string(dir.join("bode_mag.svg")).unwrap();
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("ideal"));
        let _ = std::fs::remove_dir_all(&dir);
    }
}
