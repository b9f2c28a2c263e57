//! Audit report types with stable CSV / JSON renderings.

use serde::Serialize;

/// One measured row of an audit table.
#[derive(Debug, Clone, Serialize)]
pub struct AuditRow {
    pub label: String,
    /// The scale the row was measured at (n, block length, ...).
    pub scale: f64,
    pub measured: f64,
    /// The bound or target the measurement is held against, when one exists.
    pub bound: Option<f64>,
    pub std_error: Option<f64>,
    pub pass: bool,
}

/// A named constant fitted from the rows.
#[derive(Debug, Clone, Serialize)]
pub struct FittedConstant {
    pub name: String,
    pub value: f64,
}

/// A full audit outcome: rows, fitted constants, verdict.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub name: String,
    pub seed: u64,
    pub rows: Vec<AuditRow>,
    pub fitted: Vec<FittedConstant>,
    pub pass: bool,
}

impl AuditReport {
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        Self { name: name.into(), seed, rows: Vec::new(), fitted: Vec::new(), pass: true }
    }

    pub fn push_row(&mut self, row: AuditRow) {
        self.pass &= row.pass;
        self.rows.push(row);
    }

    pub fn push_fitted(&mut self, name: impl Into<String>, value: f64) {
        self.fitted.push(FittedConstant { name: name.into(), value });
    }

    /// CSV rendering: header plus one line per row, then one `fitted:` line
    /// per constant. Column order is fixed.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,scale,measured,bound,std_error,pass\n");
        for r in &self.rows {
            let bound = r.bound.map(|b| b.to_string()).unwrap_or_default();
            let se = r.std_error.map(|s| s.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.label, r.scale, r.measured, bound, se, r.pass
            ));
        }
        for f in &self.fitted {
            out.push_str(&format!("fitted:{},,{},,,\n", f.name, f.value));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        format!(
            "{}: {} ({} rows{})",
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.rows.len(),
            self.fitted
                .iter()
                .map(|f| format!(", {}={:.4}", f.name, f.value))
                .collect::<String>()
        )
    }
}
