//! Prompt construction and chat-completion plumbing.
//!
//! Rule extraction and translation both go through a chat-completion
//! endpoint. Because model output is not reproducible, the bridge supports a
//! content-addressed fixture store: `record` persists every response keyed by
//! a hash of the prompt, and `replay` (the default) serves only from that
//! store, fully offline and deterministic.

use crate::erc_ingest::ErcSection;
use crate::rule_ir::{RuleBody, Signature};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const LLM_KEY_ENV: &str = "ERCAUDIT_LLM_KEY";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("rules about return-value generation cannot be translated")]
    UntranslatableGroup,
    #[error("unknown pattern group `{0}`")]
    UnknownGroup(String),
}

/// Linguistic pattern groups used for extraction; each group's patterns are
/// embedded in its prompt. (`[x]` required slot, `{x}` optional slot.)
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternGroup {
    Tp,
    Cp,
    Ep,
    Ap,
    Op,
}

impl PatternGroup {
    pub const ALL: [PatternGroup; 5] = [
        PatternGroup::Tp,
        PatternGroup::Cp,
        PatternGroup::Ep,
        PatternGroup::Ap,
        PatternGroup::Op,
    ];

    pub fn id(self) -> &'static str {
        match self {
            PatternGroup::Tp => "TP",
            PatternGroup::Cp => "CP",
            PatternGroup::Ep => "EP",
            PatternGroup::Ap => "AP",
            PatternGroup::Op => "OP",
        }
    }

    pub fn from_id(s: &str) -> Result<PatternGroup, LlmError> {
        match s {
            "TP" => Ok(PatternGroup::Tp),
            "CP" => Ok(PatternGroup::Cp),
            "EP" => Ok(PatternGroup::Ep),
            "AP" => Ok(PatternGroup::Ap),
            "OP" => Ok(PatternGroup::Op),
            other => Err(LlmError::UnknownGroup(other.to_string())),
        }
    }

    pub fn patterns(self) -> &'static [&'static str] {
        match self {
            PatternGroup::Tp => &[
                "TP1: {sub} [must] [throw] [condition]",
                "TP2: [action] [must] [throw]",
                "TP3: caller [must] be approved to [action]",
                "TP4: [action] are considered invalid",
            ],
            PatternGroup::Cp => {
                &["CP1: [condition] [sub] [must] call [sub] {, [var] [must] be [value]}"]
            }
            PatternGroup::Ep => &[
                "EP1: {event} {must} [emit] {condition} {, [var] {must} [assign] {prep} [value]}",
                "EP2: {action} {must} [emit] [event] {with [var] set to [value] [condition]}",
            ],
            PatternGroup::Ap => &[
                "AP1: [sub] {must} [assign] [value] {prep} {value}",
                "AP2: [value] {must} [assign] [prep] [value]",
            ],
            PatternGroup::Op => &["OP1: [action] [must] follow [order]"],
        }
    }

    /// Kind of formal body a translated rule of this group carries.
    pub fn body_schema_id(self) -> &'static str {
        match self {
            PatternGroup::Tp => "body_throw",
            PatternGroup::Cp => "body_call",
            PatternGroup::Ep => "body_emit",
            PatternGroup::Ap => "body_assign",
            PatternGroup::Op => "body_follow",
        }
    }
}

/// Event sections only carry emission rules; function sections may match any
/// group.
pub fn groups_for(kind: crate::erc_ingest::SectionKind) -> &'static [PatternGroup] {
    match kind {
        crate::erc_ingest::SectionKind::Event => &[PatternGroup::Ep],
        crate::erc_ingest::SectionKind::Function => &PatternGroup::ALL,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlmMode {
    Live,
    Replay,
    Record,
}

impl std::str::FromStr for LlmMode {
    type Err = String;
    fn from_str(s: &str) -> Result<LlmMode, String> {
        match s {
            "live" => Ok(LlmMode::Live),
            "replay" => Ok(LlmMode::Replay),
            "record" => Ok(LlmMode::Record),
            other => Err(format!("unknown llm mode `{other}` (live|replay|record)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LlmConfig {
    pub mode: LlmMode,
    pub endpoint: String,
    pub model: String,
    pub fixtures_dir: PathBuf,
    /// Read from `ERCAUDIT_LLM_KEY`; only needed for live/record.
    pub api_key: Option<String>,
}

impl LlmConfig {
    pub fn replay(fixtures_dir: impl Into<PathBuf>) -> LlmConfig {
        LlmConfig {
            mode: LlmMode::Replay,
            endpoint: String::new(),
            model: String::new(),
            fixtures_dir: fixtures_dir.into(),
            api_key: None,
        }
    }

    /// Configuration problems that must stop the run before any network or
    /// filesystem traffic.
    pub fn validate(&self) -> Result<(), String> {
        if matches!(self.mode, LlmMode::Live | LlmMode::Record) {
            if self.endpoint.is_empty() {
                return Err("live/record mode needs an endpoint URL".into());
            }
            if self.api_key.is_none() {
                return Err(format!("live/record mode needs the {LLM_KEY_ENV} environment variable"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptJob {
    pub template_id: String,
    pub rendered_text: String,
    pub expected_schema_id: String,
    /// Content hash of template id + rendered text; fixture-store key.
    pub cache_key: String,
}

fn cache_key(template_id: &str, rendered: &str) -> String {
    let mut h = Sha256::new();
    h.update(template_id.as_bytes());
    h.update([0u8]);
    h.update(rendered.as_bytes());
    hex::encode(h.finalize())
}

pub fn build_extraction_prompt(section: &ErcSection, group: PatternGroup) -> PromptJob {
    let template_id = format!("extract_{}", group.id());
    let patterns = group.patterns().join("\n");
    let rendered = format!(
        "You analyze one section of an ERC token standard and extract every rule \
         matching the given linguistic patterns. Report each rule's verbatim text and \
         the arguments it mentions; ignore text matching none of the patterns.\n\n\
         Linguistic patterns ([x] required slot, {{x}} optional slot):\n{patterns}\n\n\
         Description:\n{desc}\n\n\
         API:\n{decl}\n\n\
         Answer with a JSON array, one object per rule:\n\
         [{{\"rule\": \"<verbatim rule text>\", \"args\": \"<referenced parameters/values>\", \
         \"severity\": \"high|medium|low\", \"target\": \"function|contract\"}}]\n\
         Answer [] if no rule matches.",
        desc = section.description,
        decl = section.declaration_source,
    );
    let cache_key = cache_key(&template_id, &rendered);
    PromptJob {
        template_id,
        rendered_text: rendered,
        expected_schema_id: "extracted_rules".into(),
        cache_key,
    }
}

pub fn build_translation_prompt(
    declaration: &str,
    rule_text: &str,
    args: &str,
    group_id: &str,
    anchors: &[Signature],
) -> Result<PromptJob, LlmError> {
    if group_id == "RP" {
        return Err(LlmError::UntranslatableGroup);
    }
    let group = PatternGroup::from_id(group_id)?;
    let schema_id = group.body_schema_id();
    let schema_hint = match group {
        PatternGroup::Tp => {
            r#"{"throw": {"condition": <b_exp>, "expect_throw": <bool>}}"#
        }
        PatternGroup::Cp => {
            r#"{"call": {"condition": <b_exp>, "callee": "<function>", "with": <b_exp or null>}}"#
        }
        PatternGroup::Ep => {
            r#"{"emit": {"condition": <b_exp>, "event": "<event>", "with": <b_exp or null>}}"#
        }
        PatternGroup::Ap => r#"{"assign": {"value1": <value>, "value2": <value>}}"#,
        PatternGroup::Op => {
            r#"{"follow": {"op1": <op>, "op2": <op>, "order_op1": <op>, "order_op2": <op>}}"#
        }
    };
    let anchor_list = anchors
        .iter()
        .map(|s| s.pretty())
        .collect::<Vec<_>>()
        .join("\n");
    let rendered = format!(
        "Translate one natural-language ERC rule into the formal rule grammar.\n\n\
         Declaration:\n{declaration}\n\n\
         Rule:\n{rule_text}\n\n\
         Arguments:\n{args}\n\n\
         Answer with exactly one JSON object of this shape:\n{schema_hint}\n\n\
         Refer to contract fields only through these anchor functions:\n{anchor_list}\n"
    );
    let template_id = "translate".to_string();
    let cache_key = cache_key(&template_id, &rendered);
    Ok(PromptJob {
        template_id,
        rendered_text: rendered,
        expected_schema_id: schema_id.into(),
        cache_key,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validity {
    Ok,
    SchemaError,
    TransportError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Live,
    Replay,
}

#[derive(Debug, Clone)]
pub struct LlmResponse {
    pub raw_text: String,
    pub parsed_json: Option<serde_json::Value>,
    pub validity: Validity,
    pub provenance: Provenance,
    pub diagnostic: Option<String>,
}

impl LlmResponse {
    fn transport(provenance: Provenance, diag: String) -> LlmResponse {
        LlmResponse {
            raw_text: String::new(),
            parsed_json: None,
            validity: Validity::TransportError,
            provenance,
            diagnostic: Some(diag),
        }
    }
}

/// One entry of the extraction answer array.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractedEntry {
    pub rule: String,
    #[serde(default)]
    pub args: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

/// Check a raw response against the schema named by the job. Returns parsed
/// JSON on success.
fn validate_schema(schema_id: &str, raw: &str) -> Result<serde_json::Value, String> {
    let trimmed = strip_fences(raw);
    let value: serde_json::Value =
        serde_json::from_str(trimmed).map_err(|e| format!("not JSON: {e}"))?;
    match schema_id {
        "extracted_rules" => {
            let arr = value
                .as_array()
                .ok_or_else(|| "expected a JSON array of rules".to_string())?;
            for (i, entry) in arr.iter().enumerate() {
                serde_json::from_value::<ExtractedEntry>(entry.clone())
                    .map_err(|e| format!("entry {i}: {e}"))?;
            }
            Ok(value)
        }
        body => {
            let parsed: RuleBody = serde_json::from_value(value.clone())
                .map_err(|e| format!("not a rule body: {e}"))?;
            let tag = match parsed {
                RuleBody::Throw { .. } => "body_throw",
                RuleBody::Call { .. } => "body_call",
                RuleBody::Emit { .. } => "body_emit",
                RuleBody::Assign { .. } => "body_assign",
                RuleBody::Follow { .. } => "body_follow",
                RuleBody::Decl { .. } => "body_decl",
            };
            if tag != body {
                return Err(format!("expected {body}, got {tag}"));
            }
            Ok(value)
        }
    }
}

/// Strip a single surrounding markdown code fence if present.
fn strip_fences(raw: &str) -> &str {
    let t = raw.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphanumeric());
        if let Some(inner) = rest.strip_suffix("```") {
            return inner.trim();
        }
    }
    t
}

fn fixture_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.json"))
}

#[derive(Serialize, Deserialize)]
struct FixtureRecord {
    raw_text: String,
}

/// Persist a response under its cache key (atomic write via temp + rename).
pub fn store_fixture(dir: &Path, key: &str, raw_text: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let body = serde_json::to_string_pretty(&FixtureRecord {
        raw_text: raw_text.to_string(),
    })
    .expect("fixture serializes");
    let tmp = dir.join(format!(".{key}.tmp"));
    std::fs::write(&tmp, body)?;
    std::fs::rename(&tmp, fixture_path(dir, key))
}

fn load_fixture(dir: &Path, key: &str) -> Option<String> {
    let body = std::fs::read_to_string(fixture_path(dir, key)).ok()?;
    serde_json::from_str::<FixtureRecord>(&body).ok().map(|r| r.raw_text)
}

/// Resolve one prompt job: replay from the fixture store, or call the
/// endpoint (temperature 0, one retry with backoff) and optionally record.
pub fn complete(job: &PromptJob, cfg: &LlmConfig) -> LlmResponse {
    let (raw, provenance) = match cfg.mode {
        LlmMode::Replay => match load_fixture(&cfg.fixtures_dir, &job.cache_key) {
            Some(raw) => (raw, Provenance::Replay),
            None => {
                return LlmResponse::transport(
                    Provenance::Replay,
                    format!("fixture missing {}", job.cache_key),
                )
            }
        },
        LlmMode::Live | LlmMode::Record => {
            let raw = match request_with_retry(job, cfg) {
                Ok(r) => r,
                Err(e) => return LlmResponse::transport(Provenance::Live, e),
            };
            if cfg.mode == LlmMode::Record {
                if let Err(e) = store_fixture(&cfg.fixtures_dir, &job.cache_key, &raw) {
                    return LlmResponse::transport(
                        Provenance::Live,
                        format!("failed to record fixture: {e}"),
                    );
                }
            }
            (raw, Provenance::Live)
        }
    };
    match validate_schema(&job.expected_schema_id, &raw) {
        Ok(parsed) => LlmResponse {
            raw_text: raw,
            parsed_json: Some(parsed),
            validity: Validity::Ok,
            provenance,
            diagnostic: None,
        },
        Err(e) => LlmResponse {
            raw_text: raw,
            parsed_json: None,
            validity: Validity::SchemaError,
            provenance,
            diagnostic: Some(e),
        },
    }
}

fn request_with_retry(job: &PromptJob, cfg: &LlmConfig) -> Result<String, String> {
    let mut last = String::new();
    for attempt in 0..2 {
        if attempt > 0 {
            std::thread::sleep(std::time::Duration::from_millis(500));
        }
        match request_once(job, cfg) {
            Ok(raw) => return Ok(raw),
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn request_once(job: &PromptJob, cfg: &LlmConfig) -> Result<String, String> {
    #[derive(Serialize)]
    struct Msg<'a> {
        role: &'a str,
        content: &'a str,
    }
    #[derive(Serialize)]
    struct Req<'a> {
        model: &'a str,
        temperature: f64,
        messages: Vec<Msg<'a>>,
    }
    let key = cfg.api_key.as_deref().ok_or("missing API credential")?;
    let client = reqwest::blocking::Client::builder()
        .timeout(std::time::Duration::from_secs(120))
        .build()
        .map_err(|e| e.to_string())?;
    let resp = client
        .post(&cfg.endpoint)
        .bearer_auth(key)
        .json(&Req {
            model: &cfg.model,
            temperature: 0.0,
            messages: vec![Msg { role: "user", content: &job.rendered_text }],
        })
        .send()
        .map_err(|e| format!("request failed: {e}"))?;
    let status = resp.status();
    if !status.is_success() {
        return Err(format!("HTTP {status}"));
    }
    let body: serde_json::Value = resp.json().map_err(|e| format!("bad response body: {e}"))?;
    body.pointer("/choices/0/message/content")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| "response missing choices[0].message.content".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erc_ingest::{isolate_spec_section, segment_by_declaration, SectionKind};

    fn transfer_from_section() -> ErcSection {
        let doc = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../fixtures/erc20.md"
        ))
        .unwrap();
        let (spec, _) = isolate_spec_section(&doc).unwrap();
        let (sections, _) = segment_by_declaration(spec);
        sections
            .into_iter()
            .find(|s| s.declaration_source.contains("transferFrom"))
            .unwrap()
    }

    #[test]
    fn extraction_prompt_embeds_patterns_text_and_schema() {
        let sec = transfer_from_section();
        let job = build_extraction_prompt(&sec, PatternGroup::Tp);
        assert_eq!(job.template_id, "extract_TP");
        assert!(job.rendered_text.contains("{sub} [must] [throw] [condition]"));
        assert!(job.rendered_text.contains("SHOULD `throw` unless the `_from` account"));
        assert!(job.rendered_text.contains("function transferFrom"));
        assert!(job.rendered_text.contains("\"rule\""));
        // determinism of the cache key
        let again = build_extraction_prompt(&sec, PatternGroup::Tp);
        assert_eq!(job.cache_key, again.cache_key);
        let other = build_extraction_prompt(&sec, PatternGroup::Ep);
        assert_ne!(job.cache_key, other.cache_key);
    }

    #[test]
    fn event_sections_only_get_emission_patterns() {
        assert_eq!(groups_for(SectionKind::Event), &[PatternGroup::Ep]);
        assert_eq!(groups_for(SectionKind::Function).len(), 5);
    }

    #[test]
    fn translation_prompt_carries_schema_and_anchors() {
        let sec = transfer_from_section();
        let anchors = vec![sec.parsed.clone().unwrap()];
        let job = build_translation_prompt(
            &sec.declaration_source,
            "SHOULD throw unless the _from account has deliberately authorized the sender",
            "_from, _value",
            "TP",
            &anchors,
        )
        .unwrap();
        assert_eq!(job.expected_schema_id, "body_throw");
        assert!(job.rendered_text.contains("\"throw\""));
        assert!(job.rendered_text.contains("transferFrom"));
        assert!(matches!(
            build_translation_prompt("d", "r", "", "RP", &[]),
            Err(LlmError::UntranslatableGroup)
        ));
    }

    #[test]
    fn replay_round_trip_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let sec = transfer_from_section();
        let job = build_extraction_prompt(&sec, PatternGroup::Tp);
        let cfg = LlmConfig::replay(dir.path());

        let miss = complete(&job, &cfg);
        assert_eq!(miss.validity, Validity::TransportError);
        assert!(miss.diagnostic.unwrap().contains("fixture missing"));

        store_fixture(dir.path(), &job.cache_key, r#"[{"rule":"x","args":"y"}]"#).unwrap();
        let hit = complete(&job, &cfg);
        assert_eq!(hit.validity, Validity::Ok);
        assert_eq!(hit.provenance, Provenance::Replay);
        assert_eq!(hit.parsed_json.unwrap().as_array().unwrap().len(), 1);
    }

    #[test]
    fn schema_errors_are_flagged_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let sec = transfer_from_section();
        let job = build_extraction_prompt(&sec, PatternGroup::Tp);
        store_fixture(dir.path(), &job.cache_key, r#"{"not":"an array"}"#).unwrap();
        let r = complete(&job, &LlmConfig::replay(dir.path()));
        assert_eq!(r.validity, Validity::SchemaError);
        assert!(r.raw_text.contains("not"));
    }

    #[test]
    fn body_schema_validation_checks_kind() {
        let ok = validate_schema(
            "body_throw",
            r#"{"throw": {"condition": "true", "expect_throw": true}}"#,
        );
        assert!(ok.is_ok(), "{ok:?}");
        let wrong = validate_schema(
            "body_emit",
            r#"{"throw": {"condition": "true", "expect_throw": true}}"#,
        );
        assert!(wrong.unwrap_err().contains("expected body_emit"));
    }

    #[test]
    fn fenced_json_is_accepted() {
        let v = validate_schema("extracted_rules", "```json\n[]\n```");
        assert!(v.is_ok());
    }

    #[test]
    fn live_without_credential_fails_validation() {
        let cfg = LlmConfig {
            mode: LlmMode::Live,
            endpoint: "http://localhost:1/v1".into(),
            model: "m".into(),
            fixtures_dir: PathBuf::from("/tmp"),
            api_key: None,
        };
        assert!(cfg.validate().unwrap_err().contains(LLM_KEY_ENV));
        assert!(LlmConfig::replay("/tmp").validate().is_ok());
    }
}
