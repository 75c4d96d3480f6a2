//! Network configuration files: a TOML schema with bus, line, filter, and
//! simulation sections, validated into core models.
//!
//! The schema is strict — unknown keys are rejected — and every quantity is
//! SI-normalized (rad/s, seconds, per-unit power). A minimal two-bus file:
//!
//! ```toml
//! [h]
//! omega0 = 30.0
//!
//! [[buses]]
//! id = "a"
//! M = 1.0
//! D = 0.1
//! tau = 0.5
//! controller = { type = "idroop", K = 0.65, Knu = 1.3, Kdelta = 8.0 }
//!
//! [[buses]]
//! id = "b"
//! M = 1.0
//! D = 0.1
//! controller = { type = "droop", K = 1.0 }
//!
//! [[lines]]
//! from = "a"
//! to = "b"
//! B = 1.0
//!
//! [sim]
//! dt = 0.001
//! t_end = 20.0
//! disturbance = { a = 1.0 }
//! ```

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use gridcert_core::{BusModel, Controller, HFilter, Line, NetworkModel, SimConfig};
use serde::{Deserialize, Serialize};

/// Everything that can go wrong between a file path and a validated model.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    /// The file could not be read at all.
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// The document is not well-formed TOML or misses/mistypes a key; the
    /// message carries the line and column.
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    /// The document is well-formed but describes an invalid model.
    #[error("invalid config: {0}")]
    Validation(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

// ---------------------------------------------------------------------------
// Raw document schema
// ---------------------------------------------------------------------------

/// Top-level document: `buses`, `lines`, `h`, and an optional `sim` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Certification filter parameters.
    pub h: HSection,
    /// Bus table, one entry per machine or load.
    pub buses: Vec<BusSection>,
    /// Line table; may be empty for a single isolated bus.
    #[serde(default)]
    pub lines: Vec<LineSection>,
    /// Optional simulation scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
}

/// `[h]`: the canonical first-order filter is parameterized by its corner
/// frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HSection {
    /// Corner frequency of the canonical filter, rad/s.
    pub omega0: f64,
}

/// One `[[buses]]` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusSection {
    /// Unique name; used in CSV column headers and disturbance maps.
    pub id: String,
    /// Rotational inertia, s²·pu.
    #[serde(rename = "M")]
    pub m: f64,
    /// Damping, s·pu.
    #[serde(rename = "D")]
    pub d: f64,
    /// Frequency-measurement delay, s.
    #[serde(default)]
    pub tau: f64,
    /// Controller; omitting it means no frequency control.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerSection>,
}

/// The `controller` table of a bus: a type tag plus the gains that type
/// uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    /// One of `none`, `droop`, `virtual_inertia`, `idroop`.
    #[serde(rename = "type")]
    pub kind: String,
    /// Proportional (steady-state droop) gain.
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// Derivative / high-frequency gain.
    #[serde(rename = "Knu", default, skip_serializing_if = "Option::is_none")]
    pub knu: Option<f64>,
    /// Lead-lag corner frequency.
    #[serde(rename = "Kdelta", default, skip_serializing_if = "Option::is_none")]
    pub kdelta: Option<f64>,
}

/// One `[[lines]]` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSection {
    /// Id of one endpoint.
    pub from: String,
    /// Id of the other endpoint.
    pub to: String,
    /// Susceptance sensitivity, pu.
    #[serde(rename = "B")]
    pub b: f64,
}

/// `[sim]`: step, horizon, and the step-disturbance map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    /// Integration step, s.
    pub dt: f64,
    /// Horizon, s.
    pub t_end: f64,
    /// Per-bus step power injected at t = 0; omitted buses get zero.
    #[serde(default)]
    pub disturbance: BTreeMap<String, f64>,
    /// Derivative-filter time constant for delayed virtual inertia, s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative_filter_eta: Option<f64>,
}

// ---------------------------------------------------------------------------
// Validated model
// ---------------------------------------------------------------------------

/// A parsed and validated configuration: core models plus the id table
/// that maps bus names to model indices.
#[derive(Debug, Clone)]
pub struct LoadedNetwork {
    /// The electrical network.
    pub network: NetworkModel,
    /// Bus ids, index-aligned with the network's buses.
    pub ids: Vec<String>,
    /// Certification filter.
    pub h: HFilter,
    /// Corner frequency the filter was built from.
    pub omega0: f64,
    /// Simulation scenario, when the file has a `[sim]` section.
    pub sim: Option<SimConfig>,
    /// The normalized document (defaults applied), for emission and report
    /// echoing.
    pub file: ConfigFile,
}

impl LoadedNetwork {
    /// Index of a bus id.
    ///
    /// # Errors
    ///
    /// [`ConfigError::Validation`] when the id is unknown.
    pub fn index_of(&self, id: &str) -> Result<usize, ConfigError> {
        self.ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| invalid(format!("unknown bus id '{id}'")))
    }
}

fn controller_from(section: Option<&ControllerSection>, id: &str) -> Result<Controller, ConfigError> {
    let Some(c) = section else {
        return Ok(Controller::None);
    };
    let gain = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| {
            invalid(format!(
                "bus '{id}': controller type '{}' requires {name}",
                c.kind
            ))
        })
    };
    let forbid = |v: Option<f64>, name: &str| {
        if v.is_some() {
            Err(invalid(format!(
                "bus '{id}': controller type '{}' does not take {name}",
                c.kind
            )))
        } else {
            Ok(())
        }
    };
    match c.kind.as_str() {
        "none" => {
            forbid(c.k, "K")?;
            forbid(c.knu, "Knu")?;
            forbid(c.kdelta, "Kdelta")?;
            Ok(Controller::None)
        }
        "droop" => {
            forbid(c.knu, "Knu")?;
            forbid(c.kdelta, "Kdelta")?;
            Ok(Controller::Droop {
                k: gain(c.k, "K")?,
            })
        }
        "virtual_inertia" => {
            forbid(c.kdelta, "Kdelta")?;
            Ok(Controller::VirtualInertia {
                k: gain(c.k, "K")?,
                k_nu: gain(c.knu, "Knu")?,
            })
        }
        "idroop" => Ok(Controller::IDroop {
            k: gain(c.k, "K")?,
            k_nu: gain(c.knu, "Knu")?,
            k_delta: gain(c.kdelta, "Kdelta")?,
        }),
        other => Err(invalid(format!(
            "bus '{id}': unknown controller type '{other}' \
             (expected none, droop, virtual_inertia, or idroop)"
        ))),
    }
}

/// Parse and validate a configuration document.
///
/// # Errors
///
/// [`ConfigError::Parse`] for malformed TOML or schema violations;
/// [`ConfigError::Validation`] for well-formed documents that describe an
/// invalid model (duplicate ids, dangling references, out-of-range
/// physics).
pub fn parse_config_str(text: &str) -> Result<LoadedNetwork, ConfigError> {
    let file: ConfigFile = toml::from_str(text)?;

    if file.buses.is_empty() {
        return Err(invalid("at least one bus is required"));
    }
    let mut index = HashMap::new();
    for (i, bus) in file.buses.iter().enumerate() {
        if bus.id.is_empty() || bus.id.contains(',') || bus.id.chars().any(char::is_whitespace) {
            return Err(invalid(format!(
                "bus id '{}' must be nonempty and free of commas and whitespace",
                bus.id
            )));
        }
        if index.insert(bus.id.clone(), i).is_some() {
            return Err(invalid(format!("duplicate bus id '{}'", bus.id)));
        }
    }

    let mut buses = Vec::with_capacity(file.buses.len());
    for bus in &file.buses {
        let controller = controller_from(bus.controller.as_ref(), &bus.id)?;
        let model = BusModel::new(bus.m, bus.d, bus.tau, controller)
            .map_err(|e| invalid(format!("bus '{}': {e}", bus.id)))?;
        buses.push(model);
    }

    let mut lines = Vec::with_capacity(file.lines.len());
    for line in &file.lines {
        let i = *index
            .get(&line.from)
            .ok_or_else(|| invalid(format!("line references unknown bus '{}'", line.from)))?;
        let j = *index
            .get(&line.to)
            .ok_or_else(|| invalid(format!("line references unknown bus '{}'", line.to)))?;
        let l = Line::new(i, j, line.b).map_err(|e| {
            invalid(format!("line {} -- {}: {e}", line.from, line.to))
        })?;
        lines.push(l);
    }

    let network = NetworkModel::new(buses, lines).map_err(|e| invalid(e.to_string()))?;

    let h = HFilter::canonical(file.h.omega0)
        .map_err(|e| invalid(format!("h.omega0: {e}")))?;

    let sim = match &file.sim {
        None => None,
        Some(s) => {
            let mut disturbance = vec![0.0; file.buses.len()];
            for (id, power) in &s.disturbance {
                let i = *index.get(id).ok_or_else(|| {
                    invalid(format!("disturbance references unknown bus '{id}'"))
                })?;
                disturbance[i] = *power;
            }
            let mut cfg = SimConfig::new(s.dt, s.t_end, disturbance)
                .map_err(|e| invalid(format!("sim: {e}")))?;
            if let Some(eta) = s.derivative_filter_eta {
                cfg = cfg
                    .with_derivative_filter_eta(eta)
                    .map_err(|e| invalid(format!("sim.derivative_filter_eta: {e}")))?;
            }
            Some(cfg)
        }
    };

    let ids = file.buses.iter().map(|b| b.id.clone()).collect();
    Ok(LoadedNetwork {
        network,
        ids,
        h,
        omega0: file.h.omega0,
        sim,
        file,
    })
}

/// Read and validate a configuration file.
///
/// # Errors
///
/// [`ConfigError::Io`] when the file cannot be read, plus everything
/// [`parse_config_str`] raises.
pub fn parse_config(path: &Path) -> Result<LoadedNetwork, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

/// Serialize a loaded configuration back to TOML.
///
/// Emission is deterministic and round-trips: parsing the emitted text
/// reproduces the same models.
#[must_use]
pub fn emit(loaded: &LoadedNetwork) -> String {
    toml::to_string_pretty(&loaded.file).expect("validated config always serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = r#"
        [h]
        omega0 = 30.0

        [[buses]]
        id = "north"
        M = 1.0
        D = 0.1
        tau = 0.5
        controller = { type = "idroop", K = 0.65, Knu = 1.3, Kdelta = 8.0 }

        [[buses]]
        id = "south"
        M = 1.0
        D = 0.1
        controller = { type = "droop", K = 1.0 }

        [[lines]]
        from = "north"
        to = "south"
        B = 1.0

        [sim]
        dt = 0.001
        t_end = 20.0
        disturbance = { north = 1.0 }
    "#;

    #[test]
    fn two_bus_file_parses_into_the_expected_models() {
        let loaded = parse_config_str(TWO_BUS).unwrap();
        assert_eq!(loaded.ids, vec!["north", "south"]);
        assert_eq!(loaded.network.len(), 2);
        let bus = &loaded.network.buses()[0];
        assert_eq!(bus.m(), 1.0);
        assert_eq!(bus.tau(), 0.5);
        assert_eq!(
            *bus.controller(),
            Controller::IDroop {
                k: 0.65,
                k_nu: 1.3,
                k_delta: 8.0
            }
        );
        // Defaulted delay.
        assert_eq!(loaded.network.buses()[1].tau(), 0.0);
        let line = loaded.network.lines()[0];
        assert_eq!((line.i(), line.j(), line.b()), (0, 1, 1.0));
        let sim = loaded.sim.unwrap();
        assert_eq!(sim.disturbance(), &[1.0, 0.0]);
        assert_eq!(loaded.omega0, 30.0);
    }

    #[test]
    fn round_trip_reproduces_the_model_exactly() {
        let loaded = parse_config_str(TWO_BUS).unwrap();
        let text = emit(&loaded);
        let again = parse_config_str(&text).unwrap();
        assert_eq!(loaded.network, again.network);
        assert_eq!(loaded.ids, again.ids);
        assert_eq!(loaded.omega0, again.omega0);
        assert_eq!(loaded.file, again.file);
        assert_eq!(
            loaded.sim.as_ref().map(SimConfig::disturbance),
            again.sim.as_ref().map(SimConfig::disturbance)
        );
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = parse_config_str(&TWO_BUS.replace("omega0", "omega")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("parse error"), "got: {msg}");
    }

    #[test]
    fn zero_damping_is_rejected() {
        let err = parse_config_str(&TWO_BUS.replace("D = 0.1", "D = 0.0")).unwrap_err();
        assert!(matches!(err, ConfigError::Validation(_)), "got: {err}");
        assert!(err.to_string().contains('D'), "got: {err}");
    }

    #[test]
    fn dangling_line_reference_is_rejected() {
        let err = parse_config_str(&TWO_BUS.replace("to = \"south\"", "to = \"west\"")).unwrap_err();
        assert!(err.to_string().contains("unknown bus 'west'"), "got: {err}");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = parse_config_str(&TWO_BUS.replace("id = \"south\"", "id = \"north\"")).unwrap_err();
        assert!(err.to_string().contains("duplicate bus id"), "got: {err}");
    }

    #[test]
    fn controller_gain_sets_must_match_the_type() {
        // Missing a required gain.
        let err = parse_config_str(
            &TWO_BUS.replace("{ type = \"droop\", K = 1.0 }", "{ type = \"droop\" }"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("requires K"), "got: {err}");

        // A gain the type does not take.
        let err = parse_config_str(&TWO_BUS.replace(
            "{ type = \"droop\", K = 1.0 }",
            "{ type = \"droop\", K = 1.0, Kdelta = 2.0 }",
        ))
        .unwrap_err();
        assert!(err.to_string().contains("does not take Kdelta"), "got: {err}");

        // An unknown type.
        let err = parse_config_str(&TWO_BUS.replace(
            "{ type = \"droop\", K = 1.0 }",
            "{ type = \"pid\", K = 1.0 }",
        ))
        .unwrap_err();
        assert!(err.to_string().contains("unknown controller type"), "got: {err}");
    }

    #[test]
    fn disturbance_must_reference_existing_buses() {
        let err =
            parse_config_str(&TWO_BUS.replace("{ north = 1.0 }", "{ ghost = 1.0 }")).unwrap_err();
        assert!(err.to_string().contains("unknown bus 'ghost'"), "got: {err}");
    }

    #[test]
    fn omitted_controller_means_uncontrolled() {
        let text = r#"
            [h]
            omega0 = 10.0
            [[buses]]
            id = "solo"
            M = 2.0
            D = 0.3
        "#;
        let loaded = parse_config_str(text).unwrap();
        assert_eq!(*loaded.network.buses()[0].controller(), Controller::None);
        assert!(loaded.sim.is_none());
        assert!(loaded.network.lines().is_empty());
    }
}
