//! C ABI over the audit engine: load a rule set, check contract source, and
//! read the report back as JSON. All handles are opaque; every entry point
//! returns a status code and never unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ercaudit::frontend::model::build_model;
use ercaudit::frontend::parser::parse_file;
use ercaudit::report::AuditReport;
use ercaudit::rule_ir::{parse_rule_json, FormalRule};
use ercaudit::static_checks::collect_facts;
use ercaudit::symexec::{audit_contract, ExecConfig};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErcauditStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArg = 1,
    /// A string argument was not valid UTF-8.
    BadUtf8 = 2,
    /// The rules document did not parse or failed validation.
    BadRules = 3,
    /// The contract source did not parse or could not be modeled.
    BadContract = 4,
    /// The engine panicked; details via `ercaudit_last_error`.
    Internal = 5,
}

/// Opaque handle to a loaded rule set.
pub struct ErcauditRules {
    rules: Vec<FormalRule>,
}

/// Opaque handle to the result of a contract check.
pub struct ErcauditReport {
    report: AuditReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn utf8_arg<'a>(p: *const c_char) -> Result<&'a str, ErcauditStatus> {
    if p.is_null() {
        return Err(ErcauditStatus::NullArg);
    }
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| {
        set_error("argument is not valid UTF-8".into());
        ErcauditStatus::BadUtf8
    })
}

/// Message describing the most recent failure on this thread. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ercaudit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Crate version as a static string.
#[no_mangle]
pub extern "C" fn ercaudit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parse a rules document (either a full rule-set document or a bare rule
/// array) into a handle. On success `*out` owns the handle; release it with
/// `ercaudit_rules_free`.
#[no_mangle]
pub extern "C" fn ercaudit_rules_parse(
    json: *const c_char,
    out: *mut *mut ErcauditRules,
) -> ErcauditStatus {
    if out.is_null() {
        return ErcauditStatus::NullArg;
    }
    let text = match utf8_arg(json) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let parsed = if text.trim_start().starts_with('[') {
        parse_rule_json(text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str::<ercaudit::pipeline::RuleSet>(text)
            .map(|s| s.rules)
            .map_err(|e| e.to_string())
    };
    match parsed {
        Ok(rules) => {
            unsafe { *out = Box::into_raw(Box::new(ErcauditRules { rules })) };
            ErcauditStatus::Ok
        }
        Err(e) => {
            set_error(e);
            ErcauditStatus::BadRules
        }
    }
}

/// Number of formal rules held by the handle; 0 for a null handle.
#[no_mangle]
pub extern "C" fn ercaudit_rules_count(rules: *const ErcauditRules) -> usize {
    if rules.is_null() {
        return 0;
    }
    unsafe { &*rules }.rules.len()
}

#[no_mangle]
pub extern "C" fn ercaudit_rules_free(rules: *mut ErcauditRules) {
    if !rules.is_null() {
        drop(unsafe { Box::from_raw(rules) });
    }
}

/// Check contract source against the rule set. `loop_bound` of 0 selects the
/// default bound. On success `*out` owns a report handle.
#[no_mangle]
pub extern "C" fn ercaudit_check(
    rules: *const ErcauditRules,
    source: *const c_char,
    loop_bound: u32,
    out: *mut *mut ErcauditReport,
) -> ErcauditStatus {
    if rules.is_null() || out.is_null() {
        return ErcauditStatus::NullArg;
    }
    let src = match utf8_arg(source) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let rules = unsafe { &*rules };
    let result = catch_unwind(AssertUnwindSafe(|| run_check(&rules.rules, src, loop_bound)));
    match result {
        Ok(Ok(report)) => {
            unsafe { *out = Box::into_raw(Box::new(ErcauditReport { report })) };
            ErcauditStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(e);
            ErcauditStatus::BadContract
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "engine panicked".into());
            set_error(msg);
            ErcauditStatus::Internal
        }
    }
}

fn run_check(rules: &[FormalRule], src: &str, loop_bound: u32) -> Result<AuditReport, String> {
    let contracts = parse_file(src).map_err(|e| e.to_string())?;
    let model = build_model(&contracts, None).map_err(|e| e.to_string())?;
    let facts = collect_facts(&model, rules);
    let mut cfg = ExecConfig::default();
    if loop_bound > 0 {
        cfg.loop_bound = loop_bound as usize;
    }
    let reports = audit_contract(&model, rules, &facts, &cfg);
    Ok(AuditReport::new(reports, vec![]))
}

/// True when the report contains at least one violating verdict.
#[no_mangle]
pub extern "C" fn ercaudit_report_has_violations(report: *const ErcauditReport) -> bool {
    if report.is_null() {
        return false;
    }
    unsafe { &*report }.report.has_violations()
}

/// Report serialized as JSON. The returned string is owned by the caller and
/// must be released with `ercaudit_string_free`; null on null input.
#[no_mangle]
pub extern "C" fn ercaudit_report_to_json(report: *const ErcauditReport) -> *mut c_char {
    if report.is_null() {
        return ptr::null_mut();
    }
    let json = unsafe { &*report }.report.to_json();
    CString::new(json)
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

#[no_mangle]
pub extern "C" fn ercaudit_report_free(report: *mut ErcauditReport) {
    if !report.is_null() {
        drop(unsafe { Box::from_raw(report) });
    }
}

/// Release a string returned by this library.
#[no_mangle]
pub extern "C" fn ercaudit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    const RULES: &str = r#"[
      {
        "id": "T.move.guard",
        "erc": "T",
        "target": { "kind": "function", "name": "move" },
        "kind": "throw",
        "severity": "high",
        "source_text": "must check the balance",
        "body": {
          "throw": {
            "condition": {
              "not": {
                "cmp": {
                  "lhs": {
                    "get_field_value": {
                      "field": { "literal": { "name": "funds" } },
                      "keys": ["msg_sender"]
                    }
                  },
                  "op": ">=",
                  "rhs": { "param": 1 }
                }
              }
            },
            "expect_throw": true
          }
        }
      }
    ]"#;

    const BAD_SRC: &str = r#"contract V {
        mapping(address => uint256) funds;
        function move(address dst, uint256 amt) public {
            unchecked { funds[msg.sender] -= amt; funds[dst] += amt; }
        }
    }"#;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    #[test]
    fn round_trip_through_the_c_abi() {
        let mut rules: *mut ErcauditRules = ptr::null_mut();
        let st = ercaudit_rules_parse(cstr(RULES).as_ptr(), &mut rules);
        assert_eq!(st, ErcauditStatus::Ok);
        assert_eq!(ercaudit_rules_count(rules), 1);

        let mut report: *mut ErcauditReport = ptr::null_mut();
        let st = ercaudit_check(rules, cstr(BAD_SRC).as_ptr(), 0, &mut report);
        assert_eq!(st, ErcauditStatus::Ok);
        assert!(ercaudit_report_has_violations(report));

        let json = ercaudit_report_to_json(report);
        assert!(!json.is_null());
        let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap();
        assert!(text.contains("T.move.guard"));
        ercaudit_string_free(json);

        ercaudit_report_free(report);
        ercaudit_rules_free(rules);
    }

    #[test]
    fn errors_come_back_as_status_codes() {
        let mut rules: *mut ErcauditRules = ptr::null_mut();
        assert_eq!(
            ercaudit_rules_parse(cstr("not json").as_ptr(), &mut rules),
            ErcauditStatus::BadRules
        );
        let msg = unsafe { CStr::from_ptr(ercaudit_last_error()) };
        assert!(!msg.to_bytes().is_empty());

        assert_eq!(
            ercaudit_rules_parse(ptr::null(), &mut rules),
            ErcauditStatus::NullArg
        );

        let st = ercaudit_rules_parse(cstr("[]").as_ptr(), &mut rules);
        assert_eq!(st, ErcauditStatus::Ok);
        let mut report: *mut ErcauditReport = ptr::null_mut();
        assert_eq!(
            ercaudit_check(rules, cstr("contract {").as_ptr(), 0, &mut report),
            ErcauditStatus::BadContract
        );
        ercaudit_rules_free(rules);
    }

    #[test]
    fn version_and_null_handles_are_safe() {
        let v = unsafe { CStr::from_ptr(ercaudit_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
        assert_eq!(ercaudit_rules_count(ptr::null()), 0);
        assert!(!ercaudit_report_has_violations(ptr::null()));
        assert!(ercaudit_report_to_json(ptr::null()).is_null());
        ercaudit_rules_free(ptr::null_mut());
        ercaudit_report_free(ptr::null_mut());
        ercaudit_string_free(ptr::null_mut());
    }
}
