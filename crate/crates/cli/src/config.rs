//! Run configuration: strict JSON parsing with positional diagnostics,
//! and the fully resolved form echoed into every manifest.
//!
//! Precedence for each setting, highest first:
//! command-line flag, then `QTRAJ_OUTPUT_DIR` (output directory only),
//! then the config file, then the built-in default.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::CliError;
use crate::scenarios::{self, Params};

pub const OUTPUT_DIR_ENV: &str = "QTRAJ_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_ROOT: &str = "qtraj-output";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Polarization,
    ModalPointer,
    DecayCounting,
    DecayHomodyne,
    HyperionClassical,
    HyperionQuantum,
    EhrenfestSweep,
    Ising,
    Thermalization,
    TqHeadline,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 10] = [
        ScenarioKind::Polarization,
        ScenarioKind::ModalPointer,
        ScenarioKind::DecayCounting,
        ScenarioKind::DecayHomodyne,
        ScenarioKind::HyperionClassical,
        ScenarioKind::HyperionQuantum,
        ScenarioKind::EhrenfestSweep,
        ScenarioKind::Ising,
        ScenarioKind::Thermalization,
        ScenarioKind::TqHeadline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Polarization => "polarization",
            ScenarioKind::ModalPointer => "modal_pointer",
            ScenarioKind::DecayCounting => "decay_counting",
            ScenarioKind::DecayHomodyne => "decay_homodyne",
            ScenarioKind::HyperionClassical => "hyperion_classical",
            ScenarioKind::HyperionQuantum => "hyperion_quantum",
            ScenarioKind::EhrenfestSweep => "ehrenfest_sweep",
            ScenarioKind::Ising => "ising",
            ScenarioKind::Thermalization => "thermalization",
            ScenarioKind::TqHeadline => "tq_headline",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioKind::Polarization => "photon through a (leaky) polarizing splitter: Born frequencies and environment overlap",
            ScenarioKind::ModalPointer => "Bell jump paths of the two-outcome pointer model",
            ScenarioKind::DecayCounting => "photon-counting unraveling of a decaying two-level atom",
            ScenarioKind::DecayHomodyne => "homodyne unraveling with local-oscillator amplitude beta",
            ScenarioKind::HyperionClassical => "classical spin-orbit rotor trajectory and Lyapunov exponent",
            ScenarioKind::HyperionQuantum => "split-step rotor wave packet against its classical orbit, with a final Husimi map",
            ScenarioKind::EhrenfestSweep => "packet breakdown times over a sweep of hbar_eff and the log/power comparison",
            ScenarioKind::Ising => "Glauber dynamics of the 2D Ising model",
            ScenarioKind::Thermalization => "sector weights and Bell ergodicity for a random micro-canonical Hamiltonian",
            ScenarioKind::TqHeadline => "order-of-magnitude classicality time of a tumbling moon (SI units)",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        self != OutputFormat::Json
    }

    pub fn json(self) -> bool {
        self != OutputFormat::Csv
    }
}

/// A configuration with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub params: Params,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig<'a> {
    scenario: ScenarioKind,
    #[serde(borrow, default)]
    params: Option<&'a RawValue>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    format: Option<OutputFormat>,
}

#[derive(Deserialize)]
struct ManifestProbe<'a> {
    #[serde(borrow)]
    config: &'a RawValue,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

/// Parses a config file, or the `config` object of a run manifest.
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<ScenarioConfig, CliError> {
    let top: serde_json::Value = serde_json::from_str(text).map_err(|e| json_error(text, 0, &e, None))?;
    let (body, base) = if top.get(crate::manifest::MANIFEST_KEY).is_some() {
        let probe: ManifestProbe = serde_json::from_str(text).map_err(|e| json_error(text, 0, &e, None))?;
        (probe.config.get(), offset_in(text, probe.config.get()))
    } else {
        (text, 0)
    };
    let file: FileConfig = serde_json::from_str(body).map_err(|e| json_error(text, base, &e, None))?;
    let params = match file.params {
        Some(raw) => scenarios::parse_params(file.scenario, raw.get())
            .map_err(|e| json_error(text, offset_in(text, raw.get()), &e, Some("params")))?,
        None => scenarios::parse_params(file.scenario, "{}").expect("every scenario has full defaults"),
    };
    let output_dir = overrides
        .output_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or(file.output_dir)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT).join(file.scenario.name()));
    let config = ScenarioConfig {
        scenario: file.scenario,
        params,
        seed: overrides.seed.or(file.seed).unwrap_or(0),
        output_dir,
        format: overrides.format.or(file.format).unwrap_or_default(),
    };
    config.params.validate().map_err(CliError::from_validation)?;
    Ok(config)
}

fn offset_in(text: &str, slice: &str) -> usize {
    (slice.as_ptr() as usize).saturating_sub(text.as_ptr() as usize).min(text.len())
}

/// Maps an error inside a sub-document back to a line and column of the whole file.
fn json_error(text: &str, base: usize, e: &serde_json::Error, field_prefix: Option<&str>) -> CliError {
    let before = &text[..base];
    let base_line = before.matches('\n').count() + 1;
    let base_col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    let (line, column) = if e.line() <= 1 { (base_line, base_col + e.column().saturating_sub(1)) } else { (base_line + e.line() - 1, e.column()) };
    let mut message = strip_position(&e.to_string());
    if let Some(prefix) = field_prefix {
        message = format!("in `{prefix}`: {message}");
    }
    CliError::Config { location: format!("line {line}, column {column}"), message }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioConfig, CliError> {
        parse_config(text, &Overrides { output_dir: Some("out".into()), ..Default::default() })
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse(r#"{"scenario": "ising"}"#).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.format, OutputFormat::Both);
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn unknown_top_level_key_is_rejected_with_position() {
        let err = parse("{\n  \"scenario\": \"ising\",\n  \"sed\": 3\n}").unwrap_err();
        let CliError::Config { location, message } = err else { panic!("{err:?}") };
        assert!(message.contains("unknown field `sed`"), "{message}");
        assert!(location.starts_with("line 3"), "{location}");
    }

    #[test]
    fn unknown_param_reports_its_own_line() {
        let text = "{\n  \"scenario\": \"ising\",\n  \"params\": {\n    \"l\": 8,\n    \"temprature\": 2.0\n  }\n}";
        let CliError::Config { location, message } = parse(text).unwrap_err() else { panic!() };
        assert!(message.contains("temprature") && message.contains("params"), "{message}");
        assert!(location.starts_with("line 5"), "{location}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let CliError::Config { location, .. } = parse(r#"{"scenario": "ising", "params": {"temperature": -1}}"#).unwrap_err() else { panic!() };
        assert_eq!(location, "params.temperature");
    }

    #[test]
    fn flags_beat_file_values() {
        let text = r#"{"scenario": "ising", "seed": 4, "format": "csv", "output_dir": "file"}"#;
        let o = Overrides { seed: Some(9), output_dir: Some("flag".into()), format: Some(OutputFormat::Json) };
        let c = parse_config(text, &o).unwrap();
        assert_eq!((c.seed, c.format, c.output_dir), (9, OutputFormat::Json, PathBuf::from("flag")));
    }

    #[test]
    fn manifest_config_round_trips() {
        let c = parse(r#"{"scenario": "tq_headline", "seed": 3}"#).unwrap();
        let manifest = serde_json::json!({ crate::manifest::MANIFEST_KEY: 1, "config": c, "artifacts": [] });
        let back = parse(&serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
