//! End-to-end rule pipeline: ERC document → extracted rule records →
//! formalized rules. Declaration rules are generated directly from parsed
//! signatures; behavioral rules go through the LLM bridge (or its fixture
//! store).

use crate::erc_ingest::{isolate_spec_section, segment_by_declaration, ErcSection, IngestError, SectionKind};
use crate::llm::{
    build_extraction_prompt, build_translation_prompt, complete, groups_for, ExtractedEntry,
    LlmConfig, PatternGroup, Validity,
};
use crate::rule_ir::{
    check_rule_shape, FormalRule, RuleBody, RuleKind, Severity, Signature, TargetKind, TargetRef,
};
use serde::{Deserialize, Serialize};

/// An extracted natural-language rule awaiting translation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PendingRule {
    pub id: String,
    pub erc: String,
    /// Pattern group the rule was extracted under (TP/CP/EP/AP/OP).
    pub group: String,
    pub target: TargetRef,
    pub declaration: String,
    pub rule_text: String,
    #[serde(default)]
    pub args: String,
    pub severity: Severity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleSet {
    pub schema_version: u32,
    pub erc: String,
    /// Formalized rules (declarations immediately, behavioral after translate).
    pub rules: Vec<FormalRule>,
    /// Extracted but not yet (or not) formalized.
    pub pending: Vec<PendingRule>,
    /// Per-section / per-rule problems that did not stop the run.
    pub failures: Vec<String>,
}

impl RuleSet {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("rule set serializes");
        s.push('\n');
        s
    }
}

fn default_severity(group: PatternGroup) -> Severity {
    match group {
        // throw/call rules guard privileges; emissions are logging
        PatternGroup::Tp | PatternGroup::Cp => Severity::High,
        PatternGroup::Ep => Severity::Low,
        PatternGroup::Ap | PatternGroup::Op => Severity::Medium,
    }
}

fn parse_severity(s: &str) -> Option<Severity> {
    match s {
        "high" => Some(Severity::High),
        "medium" => Some(Severity::Medium),
        "low" => Some(Severity::Low),
        _ => None,
    }
}

fn decl_rule(erc: &str, sig: &Signature, source: &str) -> FormalRule {
    let (kind, target_kind) = if sig.is_event {
        (RuleKind::EventDecl, TargetKind::Event)
    } else {
        (RuleKind::ApiDecl, TargetKind::Function)
    };
    FormalRule {
        id: format!("{erc}.{}.decl", sig.name),
        erc: erc.to_string(),
        target: TargetRef { kind: target_kind, name: sig.name.clone() },
        kind,
        severity: Severity::Medium,
        source_text: source.to_string(),
        body: RuleBody::Decl { signature: sig.clone() },
    }
}

fn pending_from_entry(
    erc: &str,
    section: &ErcSection,
    group: PatternGroup,
    index: usize,
    entry: &ExtractedEntry,
) -> PendingRule {
    let sig_name = section
        .parsed
        .as_ref()
        .map(|s| s.name.clone())
        .unwrap_or_else(|| "unknown".into());
    // event-section rules constrain the whole contract, not one function
    let contract_wide = section.kind == SectionKind::Event
        || entry.target.as_deref() == Some("contract");
    let target = if contract_wide {
        TargetRef { kind: TargetKind::Contract, name: erc.to_string() }
    } else {
        TargetRef { kind: TargetKind::Function, name: sig_name.clone() }
    };
    PendingRule {
        id: format!("{erc}.{sig_name}.{}.{index}", group.id()),
        erc: erc.to_string(),
        group: group.id().to_string(),
        target,
        declaration: section.declaration_source.clone(),
        rule_text: entry.rule.clone(),
        args: entry.args.clone(),
        severity: entry
            .severity
            .as_deref()
            .and_then(parse_severity)
            .unwrap_or_else(|| default_severity(group)),
    }
}

/// `extract`: split the document, emit declaration rules directly, and run
/// every (section, group) extraction prompt through the bridge.
pub fn extract(doc: &str, erc: &str, cfg: &LlmConfig) -> Result<RuleSet, IngestError> {
    let (spec, warnings) = isolate_spec_section(doc)?;
    let (sections, diags) = segment_by_declaration(spec);
    let mut out = RuleSet {
        schema_version: crate::report::SCHEMA_VERSION,
        erc: erc.to_string(),
        rules: Vec::new(),
        pending: Vec::new(),
        failures: warnings.into_iter().chain(diags).collect(),
    };
    for section in &sections {
        match &section.parsed {
            Some(sig) => out.rules.push(decl_rule(erc, sig, &section.declaration_source)),
            None => {
                out.failures.push(format!(
                    "declaration skipped: {}",
                    section.diagnostic.as_deref().unwrap_or("unparsable")
                ));
                continue;
            }
        }
        for &group in groups_for(section.kind) {
            let job = build_extraction_prompt(section, group);
            let resp = complete(&job, cfg);
            match resp.validity {
                Validity::Ok => {
                    let entries: Vec<ExtractedEntry> =
                        serde_json::from_value(resp.parsed_json.unwrap_or_default())
                            .unwrap_or_default();
                    for (i, entry) in entries.iter().enumerate() {
                        out.pending.push(pending_from_entry(erc, section, group, i, entry));
                    }
                }
                Validity::SchemaError | Validity::TransportError => {
                    out.failures.push(format!(
                        "{}/{}: {}",
                        section
                            .parsed
                            .as_ref()
                            .map(|s| s.name.as_str())
                            .unwrap_or("?"),
                        group.id(),
                        resp.diagnostic.unwrap_or_default()
                    ));
                }
            }
        }
    }
    Ok(out)
}

/// `translate`: formalize each pending rule through the bridge. Translated
/// rules move to `rules`; rules that cannot be translated stay pending with a
/// recorded failure. Re-running on fully translated input is a no-op.
pub fn translate(mut set: RuleSet, cfg: &LlmConfig) -> RuleSet {
    let anchors: Vec<Signature> = set
        .rules
        .iter()
        .filter_map(|r| match &r.body {
            RuleBody::Decl { signature } if !signature.is_event => Some(signature.clone()),
            _ => None,
        })
        .collect();
    let mut still_pending = Vec::new();
    for pending in std::mem::take(&mut set.pending) {
        let job = match build_translation_prompt(
            &pending.declaration,
            &pending.rule_text,
            &pending.args,
            &pending.group,
            &anchors,
        ) {
            Ok(j) => j,
            Err(e) => {
                set.failures.push(format!("{}: {e}", pending.id));
                still_pending.push(pending);
                continue;
            }
        };
        let resp = complete(&job, cfg);
        if resp.validity != Validity::Ok {
            set.failures.push(format!(
                "{}: {}",
                pending.id,
                resp.diagnostic.unwrap_or_default()
            ));
            still_pending.push(pending);
            continue;
        }
        let body: RuleBody = match serde_json::from_value(resp.parsed_json.unwrap()) {
            Ok(b) => b,
            Err(e) => {
                set.failures.push(format!("{}: bad body: {e}", pending.id));
                still_pending.push(pending);
                continue;
            }
        };
        let kind = match &body {
            RuleBody::Throw { .. } => RuleKind::Throw,
            RuleBody::Call { .. } => RuleKind::Call,
            RuleBody::Emit { .. } => RuleKind::Emit,
            RuleBody::Assign { .. } => RuleKind::Assign,
            RuleBody::Follow { .. } => RuleKind::Follow,
            RuleBody::Decl { .. } => {
                set.failures.push(format!("{}: declaration body not expected", pending.id));
                still_pending.push(pending);
                continue;
            }
        };
        let rule = FormalRule {
            id: pending.id.clone(),
            erc: pending.erc.clone(),
            target: pending.target.clone(),
            kind,
            severity: pending.severity,
            source_text: pending.rule_text.clone(),
            body,
        };
        match check_rule_shape(&rule, set.rules.len()) {
            Ok(()) => set.rules.push(rule),
            Err(e) => {
                set.failures.push(format!("{}: {e}", pending.id));
                still_pending.push(pending);
            }
        }
    }
    set.pending = still_pending;
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::store_fixture;

    fn doc() -> String {
        std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../fixtures/erc20.md"
        ))
        .unwrap()
    }

    #[test]
    fn declarations_come_without_llm() {
        // empty fixture dir: every extraction prompt misses, but decl rules
        // are still produced
        let dir = tempfile::tempdir().unwrap();
        let set = extract(&doc(), "ERC20", &LlmConfig::replay(dir.path())).unwrap();
        assert_eq!(set.rules.len(), 11);
        assert_eq!(
            set.rules.iter().filter(|r| r.kind == RuleKind::ApiDecl).count(),
            9
        );
        assert_eq!(
            set.rules.iter().filter(|r| r.kind == RuleKind::EventDecl).count(),
            2
        );
        assert!(set.pending.is_empty());
        // 9 function sections x 5 groups + 2 event sections x 1 group misses
        assert_eq!(set.failures.len(), 47);
    }

    #[test]
    fn extraction_entries_become_pending_rules() {
        let dir = tempfile::tempdir().unwrap();
        let d = doc();
        let (spec, _) = isolate_spec_section(&d).unwrap();
        let (sections, _) = segment_by_declaration(spec);
        let tf = sections
            .iter()
            .find(|s| s.declaration_source.contains("transferFrom"))
            .unwrap();
        let job = build_extraction_prompt(tf, PatternGroup::Tp);
        store_fixture(
            dir.path(),
            &job.cache_key,
            r#"[{"rule":"SHOULD throw unless authorized","args":"_from","severity":"high"}]"#,
        )
        .unwrap();
        let set = extract(&d, "ERC20", &LlmConfig::replay(dir.path())).unwrap();
        assert_eq!(set.pending.len(), 1);
        let p = &set.pending[0];
        assert_eq!(p.id, "ERC20.transferFrom.TP.0");
        assert_eq!(p.severity, Severity::High);
        assert_eq!(p.target.kind, TargetKind::Function);
    }

    #[test]
    fn translation_moves_pending_to_rules() {
        let dir = tempfile::tempdir().unwrap();
        let pending = PendingRule {
            id: "ERC20.transferFrom.TP.0".into(),
            erc: "ERC20".into(),
            group: "TP".into(),
            target: TargetRef { kind: TargetKind::Function, name: "transferFrom".into() },
            declaration: "function transferFrom(address _from, address _to, uint256 _value) public returns (bool success)".into(),
            rule_text: "SHOULD throw unless authorized".into(),
            args: "_from, _value".into(),
            severity: Severity::High,
        };
        let set = RuleSet {
            schema_version: 1,
            erc: "ERC20".into(),
            rules: vec![],
            pending: vec![pending.clone()],
            failures: vec![],
        };
        let job = build_translation_prompt(
            &pending.declaration,
            &pending.rule_text,
            &pending.args,
            "TP",
            &[],
        )
        .unwrap();
        store_fixture(
            dir.path(),
            &job.cache_key,
            r#"{"throw":{"condition":{"not":{"cmp":{"lhs":{"get_field_value":{"field":{"anchor":{"function":"allowance"}},"keys":[{"param":0},"msg_sender"]}},"op":">=","rhs":{"param":2}}}},"expect_throw":true}}"#,
        )
        .unwrap();
        let cfg = LlmConfig::replay(dir.path());
        let out = translate(set, &cfg);
        assert_eq!(out.rules.len(), 1);
        assert_eq!(out.rules[0].kind, RuleKind::Throw);
        assert!(out.pending.is_empty());
        // idempotence
        let again = translate(out.clone(), &cfg);
        assert_eq!(again.to_json(), out.to_json());
    }

    #[test]
    fn missing_translation_fixture_keeps_rule_pending() {
        let dir = tempfile::tempdir().unwrap();
        let set = RuleSet {
            schema_version: 1,
            erc: "ERC20".into(),
            rules: vec![],
            pending: vec![PendingRule {
                id: "ERC20.x.OP.0".into(),
                erc: "ERC20".into(),
                group: "OP".into(),
                target: TargetRef { kind: TargetKind::Function, name: "x".into() },
                declaration: "function x() ".into(),
                rule_text: "must follow some order".into(),
                args: String::new(),
                severity: Severity::Medium,
            }],
            failures: vec![],
        };
        let out = translate(set, &LlmConfig::replay(dir.path()));
        assert!(out.rules.is_empty());
        assert_eq!(out.pending.len(), 1);
        assert!(out.failures[0].contains("fixture missing"));
    }
}
