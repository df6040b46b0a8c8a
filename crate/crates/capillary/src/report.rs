//! Run reports: the deterministic JSON document a scenario run produces and
//! the plot-ready CSV projection of it. Timing is kept out of the JSON so
//! that identical (config, seed) runs are byte-identical regardless of the
//! job count.

use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct LevelRow {
    pub level: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub id: String,
    pub kind: String,
    pub surface: String,
    pub family: String,
    pub curvature: f64,
    pub theta: Option<f64>,
    pub direction: Option<Vec<f64>>,
    pub residual: Option<f64>,
    pub order: Option<f64>,
    pub pass: bool,
    pub levels: Vec<LevelRow>,
    /// Full inner report (identity / spectrum / HKR / ...), already JSON.
    pub detail: serde_json::Value,
    pub error: Option<String>,
    /// Timing is diagnostic only; excluded from the serialized report to
    /// keep the JSON deterministic.
    #[serde(skip)]
    pub wall_clock_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tool_version: String,
    pub schema_version: u32,
    pub scenario_hash: String,
    pub seed: u64,
    pub checks: Vec<CheckReport>,
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub overall_pass: bool,
}

impl RunReport {
    pub fn new(scenario_hash: String, seed: u64, checks: Vec<CheckReport>) -> RunReport {
        let total = checks.len();
        let passed = checks.iter().filter(|c| c.pass).count();
        RunReport {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: crate::scenario::SCHEMA_VERSION,
            scenario_hash,
            seed,
            checks,
            total,
            passed,
            failed: total - passed,
            overall_pass: passed == total,
        }
    }

    /// Canonical JSON: struct fields serialize in declaration order, floats
    /// use the shortest round-trip form, trailing newline included.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One CSV row per (check, level); checks without level data emit a
    /// single row with their scalar residual.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,family,K,theta,a,residual,order,pass\n");
        let fmt_opt = |v: Option<f64>| v.map(|v| format!("{v}")).unwrap_or_default();
        for c in &self.checks {
            let a = c
                .direction
                .as_ref()
                .map(|d| {
                    d.iter()
                        .map(|v| format!("{v}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .unwrap_or_default();
            let tail = |id: &str, residual: String| {
                format!(
                    "{},{},{},{},{},{},{},{}\n",
                    id,
                    c.family,
                    c.curvature,
                    fmt_opt(c.theta),
                    a,
                    residual,
                    fmt_opt(c.order),
                    c.pass
                )
            };
            if c.levels.is_empty() {
                out.push_str(&tail(&c.id, fmt_opt(c.residual)));
            } else {
                for row in &c.levels {
                    out.push_str(&tail(
                        &format!("{}#L{}", c.id, row.level),
                        format!("{}", row.residual),
                    ));
                }
            }
        }
        out
    }

    /// Writes `report.json` and `report.csv` under `dir`.
    pub fn emit(&self, dir: &std::path::Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        std::fs::write(dir.join("report.csv"), self.to_csv())?;
        Ok(())
    }
}
