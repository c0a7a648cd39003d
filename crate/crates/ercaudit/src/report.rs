//! Audit report records and rendering.

use crate::rule_ir::Severity;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Violating,
    Clean,
    Unknown,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViolationReport {
    pub rule_id: String,
    pub source_text: String,
    pub severity: Severity,
    pub contract: String,
    /// Function the verdict applies to; empty for contract-level checks.
    pub function: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub line: Option<u32>,
    /// Solver witness (symbol -> decimal value), present iff violating came
    /// from a satisfiable constraint query.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<BTreeMap<String, String>>,
    /// Source lines touched on the witnessing path.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub reports: Vec<ViolationReport>,
    /// Per-file problems that did not stop the run (parse errors etc.).
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub errors: Vec<String>,
}

impl AuditReport {
    pub fn new(mut reports: Vec<ViolationReport>, errors: Vec<String>) -> AuditReport {
        sort_reports(&mut reports);
        AuditReport {
            schema_version: SCHEMA_VERSION,
            reports,
            errors,
        }
    }

    pub fn has_violations(&self) -> bool {
        self.reports.iter().any(|r| r.verdict == Verdict::Violating)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.reports {
            let verdict = match r.verdict {
                Verdict::Violating => "VIOLATION",
                Verdict::Clean => "clean",
                Verdict::Unknown => "unknown",
            };
            let sev = match r.severity {
                Severity::High => "High",
                Severity::Medium => "Medium",
                Severity::Low => "Low",
            };
            let loc = match (r.function.is_empty(), r.line) {
                (false, Some(l)) => format!("{}.{} (line {})", r.contract, r.function, l),
                (false, None) => format!("{}.{}", r.contract, r.function),
                (true, _) => r.contract.clone(),
            };
            out.push_str(&format!("[{verdict}] {sev} {} at {loc}\n", r.rule_id));
            if r.verdict == Verdict::Violating {
                out.push_str(&format!("  rule: {}\n", r.source_text.trim()));
                if let Some(w) = &r.witness {
                    let pairs: Vec<String> =
                        w.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    out.push_str(&format!("  witness: {}\n", pairs.join(", ")));
                }
            }
            if let Some(n) = &r.note {
                out.push_str(&format!("  note: {n}\n"));
            }
        }
        for e in &self.errors {
            out.push_str(&format!("[error] {e}\n"));
        }
        out
    }
}

/// Stable report order: contract, function, rule id.
pub fn sort_reports(reports: &mut [ViolationReport]) {
    reports.sort_by(|a, b| {
        (&a.contract, &a.function, &a.rule_id).cmp(&(&b.contract, &b.function, &b.rule_id))
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mk(contract: &str, function: &str, rule: &str, verdict: Verdict) -> ViolationReport {
        ViolationReport {
            rule_id: rule.into(),
            source_text: "some rule text".into(),
            severity: Severity::High,
            contract: contract.into(),
            function: function.into(),
            verdict,
            line: None,
            witness: None,
            trace: vec![],
            note: None,
        }
    }

    #[test]
    fn reports_are_sorted_and_versioned() {
        let r = AuditReport::new(
            vec![
                mk("B", "f", "r1", Verdict::Clean),
                mk("A", "g", "r2", Verdict::Violating),
                mk("A", "f", "r9", Verdict::Clean),
            ],
            vec![],
        );
        assert_eq!(r.schema_version, 1);
        let order: Vec<&str> = r.reports.iter().map(|x| x.rule_id.as_str()).collect();
        assert_eq!(order, vec!["r9", "r2", "r1"]);
        assert!(r.has_violations());
    }

    #[test]
    fn json_round_trips() {
        let r = AuditReport::new(vec![mk("C", "f", "r", Verdict::Unknown)], vec!["oops".into()]);
        let j = r.to_json();
        let back: AuditReport = serde_json::from_str(&j).unwrap();
        assert_eq!(back.reports.len(), 1);
        assert_eq!(back.errors, vec!["oops"]);
    }
}
