//! Machine-readable result documents.
//!
//! Every command can emit a JSON report carrying the tool version, the
//! exact grid and tolerances the numbers were computed under, and the
//! command-specific results. Keys are sorted, so a report is a
//! deterministic function of config, flags, and tool version.

use gridcert_core::FrequencyGrid;
use serde_json::{json, Map, Value};

/// Report assembler: fixed envelope plus command-specific payload.
#[derive(Debug, Clone)]
pub struct Report {
    doc: Map<String, Value>,
}

impl Report {
    /// Start a report for one command invocation.
    #[must_use]
    pub fn new(command: &str) -> Self {
        let mut doc = Map::new();
        doc.insert(
            "tool".into(),
            json!({
                "name": "gridcert",
                "version": env!("CARGO_PKG_VERSION"),
            }),
        );
        doc.insert("command".into(), Value::String(command.into()));
        Report { doc }
    }

    /// Echo the frequency grid the results were swept on.
    pub fn grid(&mut self, grid: &FrequencyGrid) -> &mut Self {
        self.doc.insert(
            "grid".into(),
            json!({
                "min": grid.min(),
                "max": grid.max(),
                "points": grid.len(),
            }),
        );
        self
    }

    /// Record the tolerances the numeric results were computed under.
    pub fn tolerances(&mut self, tolerances: Value) -> &mut Self {
        self.doc.insert("tolerances".into(), tolerances);
        self
    }

    /// Attach a command-specific field.
    pub fn field(&mut self, key: &str, value: Value) -> &mut Self {
        self.doc.insert(key.into(), value);
        self
    }

    /// Close the report with its verdict and the exit code it implies.
    pub fn finish(&mut self, verdict: &str, exit_code: i32) -> &mut Self {
        self.doc
            .insert("verdict".into(), Value::String(verdict.into()));
        self.doc
            .insert("exit_code".into(), Value::Number(exit_code.into()));
        self
    }

    /// Render as pretty-printed JSON (trailing newline included).
    #[must_use]
    pub fn render(&self) -> String {
        let mut text = serde_json::to_string_pretty(&Value::Object(self.doc.clone()))
            .expect("report values are always serializable");
        text.push('\n');
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_is_deterministic_and_carries_the_envelope() {
        let grid = FrequencyGrid::log_spaced(1e-2, 1e2, 10).unwrap();
        let build = || {
            let mut r = Report::new("certify");
            r.grid(&grid)
                .tolerances(json!({"gamma_tol": 1e-4}))
                .field("buses", json!([{"id": "a", "gamma_min": 0.5}]))
                .finish("certified", 0);
            r.render()
        };
        let a = build();
        assert_eq!(a, build());
        let doc: Value = serde_json::from_str(&a).unwrap();
        assert_eq!(doc["tool"]["name"], "gridcert");
        assert_eq!(doc["command"], "certify");
        assert_eq!(doc["grid"]["points"], 10);
        assert_eq!(doc["tolerances"]["gamma_tol"], 1e-4);
        assert_eq!(doc["verdict"], "certified");
        assert_eq!(doc["exit_code"], 0);
    }
}
