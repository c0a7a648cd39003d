//! Acceptance gate: one test per headline capability, each printing a single
//! PASS line on success (run with `--nocapture` to see them). A failing
//! criterion fails its test.

mod support;

use std::collections::BTreeSet;
use std::time::Instant;

use ercaudit::constraint::{CExpr, CValue, StateVar, Tag, VarBase};
use ercaudit::frontend::model::build_model;
use ercaudit::frontend::parser::parse_file;
use ercaudit::frontend::ssa::lower_function;
use ercaudit::inject::inject;
use ercaudit::llm::LlmConfig;
use ercaudit::pipeline::{extract, translate, RuleSet};
use ercaudit::report::{Verdict, ViolationReport};
use ercaudit::rule_ir::{
    parse_rule_json, BExp, CmpOp, FieldRef, FormalRule, RuleBody, RuleKind, Severity, TargetKind,
    TargetRef, Value,
};
use ercaudit::static_checks::collect_facts;
use ercaudit::symexec::{audit_contract, explore_paths, ExecConfig};
use ercaudit::synth::{compose_validation, compose_violation, synth_triple, ConstraintTriple};
use primitive_types::U256;

fn fixture(rel: &str) -> String {
    let path = format!("{}/../../fixtures/{}", env!("CARGO_MANIFEST_DIR"), rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {path}: {e}"))
}

/// Rules files are either a full rule-set document or a bare rule array.
fn load_rules(rel: &str) -> Vec<FormalRule> {
    let text = fixture(rel);
    if text.trim_start().starts_with('[') {
        parse_rule_json(&text).expect("rule array parses")
    } else {
        serde_json::from_str::<RuleSet>(&text)
            .expect("rule set parses")
            .rules
    }
}

fn audit(source: &str, rules: &[FormalRule]) -> Vec<ViolationReport> {
    let model = build_model(&parse_file(source).expect("source parses"), None).expect("model");
    let facts = collect_facts(&model, rules);
    audit_contract(&model, rules, &facts, &ExecConfig::default())
}

fn violating_ids(reports: &[ViolationReport]) -> BTreeSet<String> {
    reports
        .iter()
        .filter(|r| r.verdict == Verdict::Violating)
        .map(|r| r.rule_id.clone())
        .collect()
}

// ---------------------------------------------------------------------------
// 1. missing-allowance-check detection on a vulnerable ERC-20 token

#[test]
fn criterion_1_vulnerable_erc20_flags_transfer_from_with_witness() {
    let rules = load_rules("rules/erc20.json");
    let start = Instant::now();
    let reports = audit(&fixture("contracts/erc20_vulnerable.sol"), &rules);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "audit took {elapsed:?}");

    let violating: Vec<&ViolationReport> = reports
        .iter()
        .filter(|r| r.verdict == Verdict::Violating)
        .collect();
    assert_eq!(
        violating.len(),
        1,
        "expected exactly the missing-allowance violation, got {:?}",
        violating.iter().map(|r| &r.rule_id).collect::<Vec<_>>()
    );
    let v = violating[0];
    assert_eq!(v.rule_id, "ERC20.transferFrom.TP.0");
    assert_eq!(v.function, "transferFrom");
    assert_eq!(v.severity, Severity::High);
    let witness = v.witness.as_ref().expect("violation carries a witness");
    assert!(!witness.is_empty());

    // the patched token must come back fully clean
    let patched = audit(&fixture("contracts/erc20_compliant.sol"), &rules);
    assert!(violating_ids(&patched).is_empty(), "{patched:#?}");
    assert!(patched.iter().all(|r| r.verdict == Verdict::Clean));

    println!(
        "ACCEPTANCE PASS [1/9] vulnerable ERC-20: high-severity transferFrom violation \
         with witness in {elapsed:?}; patched token clean"
    );
}

// ---------------------------------------------------------------------------
// 2. multi-token (ERC-1155) audit: three high-severity defects, no false hits

#[test]
fn criterion_2_erc1155_defects_found_without_false_positives() {
    let rules = load_rules("rules/erc1155.json");
    let reports = audit(&fixture("contracts/erc1155_vulnerable.sol"), &rules);
    let violating = violating_ids(&reports);
    for id in [
        "ERC1155.safeTransferFrom.approval",
        "ERC1155.safeTransferFrom.zeroaddr",
        "ERC1155.safeTransferFrom.receiver",
    ] {
        assert!(violating.contains(id), "missing verdict for {id}: {violating:?}");
    }
    let high = reports
        .iter()
        .filter(|r| r.verdict == Verdict::Violating && r.severity == Severity::High)
        .count();
    assert!(high >= 3, "only {high} high-severity verdicts");

    let patched = audit(&fixture("contracts/erc1155_compliant.sol"), &rules);
    assert!(
        violating_ids(&patched).is_empty(),
        "false verdicts on patched contract: {patched:#?}"
    );

    println!(
        "ACCEPTANCE PASS [2/9] ERC-1155: {high} high-severity verdicts on the vulnerable \
         contract, zero verdicts on the patched one"
    );
}

// ---------------------------------------------------------------------------
// 3. violation-composition truth tables

fn marker(name: &str) -> CExpr {
    CExpr::State { var: StateVar::Em(name.into()), expected: true }
}

/// Evaluate a composed constraint treating the marker atoms as propositional
/// variables.
fn eval_marked(e: &CExpr, fi: bool, fc: bool, fw: bool) -> bool {
    match e {
        CExpr::True => true,
        CExpr::False => false,
        CExpr::And(a, b) => eval_marked(a, fi, fc, fw) && eval_marked(b, fi, fc, fw),
        CExpr::Or(a, b) => eval_marked(a, fi, fc, fw) || eval_marked(b, fi, fc, fw),
        CExpr::Not(a) => !eval_marked(a, fi, fc, fw),
        CExpr::State { var: StateVar::Em(name), .. } => match name.as_str() {
            "IF" => fi,
            "CHECK" => fc,
            "WITH" => fw,
            other => panic!("unexpected marker {other}"),
        },
        other => panic!("unexpected node {other:?}"),
    }
}

#[test]
fn criterion_3_composition_truth_tables() {
    let with_clause = ConstraintTriple {
        phi_if: marker("IF"),
        phi_check: marker("CHECK"),
        phi_with: Some(marker("WITH")),
    };
    let without = ConstraintTriple {
        phi_if: marker("IF"),
        phi_check: marker("CHECK"),
        phi_with: None,
    };
    let no_throw_rule = mk_rule(
        RuleKind::Throw,
        RuleBody::Throw { condition: BExp::True, expect_throw: false },
    );
    let throw_rule = mk_rule(
        RuleKind::Throw,
        RuleBody::Throw { condition: BExp::True, expect_throw: true },
    );
    let mut rows = 0usize;
    for fi in [false, true] {
        for fc in [false, true] {
            for fw in [false, true] {
                // throw: IF and not CHECK
                let v = compose_violation(RuleKind::Throw, &without);
                assert_eq!(eval_marked(&v, fi, fc, fw), fi && !fc);
                rows += 1;
                // call/emit with a with-clause: (IF and not CHECK) or
                // (IF and CHECK and not WITH); without one the second
                // disjunct drops
                for kind in [RuleKind::Call, RuleKind::Emit] {
                    let v = compose_violation(kind, &with_clause);
                    assert_eq!(
                        eval_marked(&v, fi, fc, fw),
                        (fi && !fc) || (fi && fc && !fw),
                        "{kind:?} {fi}{fc}{fw}"
                    );
                    let v = compose_violation(kind, &without);
                    assert_eq!(eval_marked(&v, fi, fc, fw), fi && !fc);
                    rows += 1;
                }
                // assign/follow: not CHECK
                for kind in [RuleKind::Assign, RuleKind::Follow] {
                    let v = compose_violation(kind, &without);
                    assert_eq!(eval_marked(&v, fi, fc, fw), !fc);
                    rows += 1;
                }
                // validation only exists for no-throw rules: not IF and not CHECK
                let val = compose_validation(&no_throw_rule, &without).unwrap();
                assert_eq!(eval_marked(&val, fi, fc, fw), !fi && !fc);
                assert!(compose_validation(&throw_rule, &without).is_none());
            }
        }
    }
    assert_eq!(rows, 8 * 5);
    println!(
        "ACCEPTANCE PASS [3/9] composition truth tables: {rows} rows across five rule \
         kinds plus the no-throw validation form"
    );
}

// ---------------------------------------------------------------------------
// 4. rule-utility lowering shapes

fn mk_rule(kind: RuleKind, body: RuleBody) -> FormalRule {
    FormalRule {
        id: "acc".into(),
        erc: "ERC20".into(),
        target: TargetRef { kind: TargetKind::Function, name: "transferFrom".into() },
        kind,
        severity: Severity::High,
        source_text: String::new(),
        body,
    }
}

#[test]
fn criterion_4_lowering_shapes() {
    // anchors resolve against a real getter-bearing contract
    let anchor_src = r#"contract Anchors {
        uint256 _totalSupply;
        mapping(address => uint256) _balances;
        function totalSupply() public view returns (uint256) { return _totalSupply; }
        function balanceOf(address owner) public view returns (uint256) { return _balances[owner]; }
    }"#;
    let model = build_model(&parse_file(anchor_src).unwrap(), None).unwrap();
    let anchor = |f: &str| FieldRef::Anchor { function: f.into() };
    let lit = |f: &str| FieldRef::Literal { name: f.into() };

    let rules = [
        // 1-2: expected-throw flag, both polarities
        mk_rule(RuleKind::Throw, RuleBody::Throw { condition: BExp::True, expect_throw: true }),
        mk_rule(RuleKind::Throw, RuleBody::Throw { condition: BExp::True, expect_throw: false }),
        // 3: call obligation
        mk_rule(
            RuleKind::Call,
            RuleBody::Call { condition: BExp::True, callee: "onERC1155Received".into(), with: None },
        ),
        // 4: emit obligation
        mk_rule(
            RuleKind::Emit,
            RuleBody::Emit { condition: BExp::True, event: "Transfer".into(), with: None },
        ),
        // 5: end-value equality over last snapshots
        mk_rule(
            RuleKind::Assign,
            RuleBody::Assign {
                value1: Value::GetFieldValue { field: anchor("totalSupply"), keys: vec![] },
                value2: Value::Const("0".into()),
            },
        ),
        // 6: relative-order agreement
        mk_rule(
            RuleKind::Follow,
            RuleBody::Follow {
                op1: op_write("a"),
                op2: op_write("b"),
                order_op1: op_write("c"),
                order_op2: op_write("d"),
            },
        ),
        // 7: balance-changed predicate
        mk_rule(
            RuleKind::Emit,
            RuleBody::Emit {
                condition: BExp::CheckChange { field: lit("_balances"), keys: vec![] },
                event: "Transfer".into(),
                with: None,
            },
        ),
        // 8: mint = increased and not decreased
        mk_rule(
            RuleKind::Emit,
            RuleBody::Emit {
                condition: BExp::CheckMint { field: lit("_balances") },
                event: "Transfer".into(),
                with: None,
            },
        ),
        // 9: burn = decreased and not increased
        mk_rule(
            RuleKind::Emit,
            RuleBody::Emit {
                condition: BExp::CheckBurn { field: lit("_balances") },
                event: "Transfer".into(),
                with: None,
            },
        ),
        // 10: mapping element reached through a parameter (entry snapshot)
        mk_rule(
            RuleKind::Throw,
            RuleBody::Throw {
                condition: BExp::Cmp {
                    lhs: Value::GetFieldValue {
                        field: anchor("balanceOf"),
                        keys: vec![Value::Param(1)],
                    },
                    op: CmpOp::Ge,
                    rhs: Value::Param(2),
                },
                expect_throw: true,
            },
        ),
        // 11: scalar field (final snapshot)
        mk_rule(
            RuleKind::Throw,
            RuleBody::Throw {
                condition: BExp::Cmp {
                    lhs: Value::GetFieldValue { field: anchor("totalSupply"), keys: vec![] },
                    op: CmpOp::Eq,
                    rhs: Value::Const("0".into()),
                },
                expect_throw: true,
            },
        ),
        // 12: argument of a performed action
        mk_rule(
            RuleKind::Emit,
            RuleBody::Emit {
                condition: BExp::True,
                event: "Transfer".into(),
                with: Some(BExp::Cmp {
                    lhs: Value::GetPara { target: "Transfer".into(), index: 0 },
                    op: CmpOp::Eq,
                    rhs: Value::ZeroAddress,
                }),
            },
        ),
    ];
    let facts = collect_facts(&model, &rules);
    let t = |r: &FormalRule| synth_triple(r, &facts).unwrap();

    assert_eq!(t(&rules[0]).phi_check, CExpr::State { var: StateVar::Th, expected: true });
    assert_eq!(t(&rules[1]).phi_check, CExpr::State { var: StateVar::Th, expected: false });
    assert_eq!(
        t(&rules[2]).phi_check,
        CExpr::State { var: StateVar::Ca("onERC1155Received".into()), expected: true }
    );
    assert_eq!(
        t(&rules[3]).phi_check,
        CExpr::State { var: StateVar::Em("Transfer".into()), expected: true }
    );
    assert_eq!(
        t(&rules[4]).phi_check,
        CExpr::Cmp {
            op: CmpOp::Eq,
            lhs: CValue::Var { base: VarBase::Field("_totalSupply".into()), tag: Tag::Last },
            rhs: CValue::Lit(U256::zero()),
        }
    );
    assert_eq!(
        t(&rules[5]).phi_check.to_string(),
        "(((O[write(a)] < O[write(b)]) and (O[write(c)] < O[write(d)])) or \
         ((O[write(b)] < O[write(a)]) and (O[write(d)] < O[write(c)])))"
    );
    assert_eq!(
        t(&rules[6]).phi_if,
        CExpr::State { var: StateVar::Bc("_balances".into()), expected: true }
    );
    assert_eq!(
        t(&rules[7]).phi_if,
        CExpr::and(
            CExpr::State { var: StateVar::Bi("_balances".into()), expected: true },
            CExpr::State { var: StateVar::Bd("_balances".into()), expected: false },
        )
    );
    assert_eq!(
        t(&rules[8]).phi_if,
        CExpr::and(
            CExpr::State { var: StateVar::Bi("_balances".into()), expected: false },
            CExpr::State { var: StateVar::Bd("_balances".into()), expected: true },
        )
    );
    assert_eq!(
        t(&rules[9]).phi_if.to_string(),
        "(_balances[para1_first]_first >= para2_first)"
    );
    assert_eq!(t(&rules[10]).phi_if.to_string(), "(_totalSupply_last = 0)");
    assert_eq!(
        t(&rules[11]).phi_with.unwrap().to_string(),
        "(Transfer.para0_last = 0)"
    );

    println!("ACCEPTANCE PASS [4/9] rule-utility lowering: 12 constraint shapes verified");
}

fn op_write(f: &str) -> ercaudit::rule_ir::OpRef {
    ercaudit::rule_ir::OpRef::FieldWrite { field: FieldRef::Literal { name: f.into() }, keys: vec![] }
}

// ---------------------------------------------------------------------------
// 5. differential oracle over generated contracts

#[test]
fn criterion_5_symbolic_matches_exhaustive_concrete_execution() {
    let stats = support::differential_sweep(200);
    assert!(stats.checked >= 200);
    assert!(stats.violating > 0 && stats.violating < stats.checked);
    println!(
        "ACCEPTANCE PASS [5/9] differential oracle: {}/{} generated contracts agree \
         between symbolic and exhaustive concrete verdicts ({} violating)",
        stats.checked, stats.checked, stats.violating
    );
}

// ---------------------------------------------------------------------------
// 6. fault-injection study: 10 contracts x 3 rules, every fault found

/// Variants of a small escrow-ish contract; all comply with the three rules
/// below, and each compliance point is syntactically deletable.
fn vault_source(i: usize) -> (String, usize) {
    // amt parameter position (contract 7 flips the parameter order)
    let (params, amt_idx) = if i == 7 {
        ("uint256 amt, address dst", 0)
    } else {
        ("address dst, uint256 amt", 1)
    };
    let guard = match i {
        2 => "assert(funds[msg.sender] >= amt);",
        3 => "require(amt <= funds[msg.sender]);",
        _ => "require(funds[msg.sender] >= amt);",
    };
    let extra_field = if (4..=6).contains(&i) { "    uint256 opsCount;\n" } else { "" };
    let extra_stmt = match i {
        1 => "        require(dst != address(0));\n",
        4 => "        unchecked { opsCount += 1; }\n",
        5 => "        if (amt > 2) { opsCount = 1; } else { opsCount = 2; }\n",
        6 => "        for (uint256 i = 0; i < 2; i++) { unchecked { opsCount += 1; } }\n",
        _ => "",
    };
    let extra_fn = match i {
        8 => concat!(
            "    function peek(address a) public view returns (uint256) {\n",
            "        return funds[a];\n    }\n"
        ),
        9 => concat!(
            "    function grant(address s, uint256 v) public {\n",
            "        grants[msg.sender][s] = v;\n    }\n"
        ),
        _ => "",
    };
    let extra_map = if i == 9 {
        "    mapping(address => mapping(address => uint256)) grants;\n"
    } else {
        ""
    };
    let src = format!(
        "contract Vault{i} {{\n\
         \x20   mapping(address => uint256) funds;\n\
         {extra_map}{extra_field}\
         \x20   event Moved(address indexed src, address indexed dst, uint256 amt);\n\
         \x20   function getFunds(address a) public view returns (uint256) {{\n\
         \x20       return funds[a];\n\
         \x20   }}\n\
         {extra_fn}\
         \x20   function move({params}) public returns (bool) {{\n\
         \x20       {guard}\n\
         {extra_stmt}\
         \x20       unchecked {{\n\
         \x20           funds[msg.sender] -= amt;\n\
         \x20           funds[dst] += amt;\n\
         \x20       }}\n\
         \x20       emit Moved(msg.sender, dst, amt);\n\
         \x20       uint256 sent = amt;\n\
         \x20       require(dst.onFundsReceived(sent) == 1);\n\
         \x20       return true;\n\
         \x20   }}\n\
         }}\n"
    );
    (src, amt_idx)
}

fn vault_rules(amt_idx: usize) -> Vec<FormalRule> {
    let mut throw = mk_rule(
        RuleKind::Throw,
        RuleBody::Throw {
            condition: BExp::Not(Box::new(BExp::Cmp {
                lhs: Value::GetFieldValue {
                    field: FieldRef::Literal { name: "funds".into() },
                    keys: vec![Value::MsgSender],
                },
                op: CmpOp::Ge,
                rhs: Value::Param(amt_idx),
            })),
            expect_throw: true,
        },
    );
    throw.id = "VAULT.move.balance".into();
    throw.target.name = "move".into();
    let mut emit = mk_rule(
        RuleKind::Emit,
        RuleBody::Emit { condition: BExp::True, event: "Moved".into(), with: None },
    );
    emit.id = "VAULT.move.event".into();
    emit.target.name = "move".into();
    let mut call = mk_rule(
        RuleKind::Call,
        RuleBody::Call { condition: BExp::True, callee: "onFundsReceived".into(), with: None },
    );
    call.id = "VAULT.move.receiver".into();
    call.target.name = "move".into();
    vec![throw, emit, call]
}

#[test]
fn criterion_6_injected_faults_are_each_found_exactly() {
    let mut detected = 0usize;
    let mut false_positives = 0usize;
    for i in 0..10 {
        let (src, amt_idx) = vault_source(i);
        let rules = vault_rules(amt_idx);
        // the unmodified contract must satisfy all three rules
        let clean = violating_ids(&audit(&src, &rules));
        assert!(clean.is_empty(), "contract {i} not clean before injection: {clean:?}");
        for rule in &rules {
            let mutated = inject(&src, rule, i as u64)
                .unwrap_or_else(|e| panic!("inject {} into contract {i}: {e}", rule.id));
            let flagged = violating_ids(&audit(&mutated, &rules));
            if flagged.contains(&rule.id) {
                detected += 1;
            }
            false_positives += flagged.iter().filter(|f| **f != rule.id).count();
            assert_eq!(
                flagged,
                BTreeSet::from([rule.id.clone()]),
                "contract {i}, injected {}:\n{mutated}",
                rule.id
            );
        }
    }
    assert_eq!(detected, 30);
    assert_eq!(false_positives, 0);
    println!(
        "ACCEPTANCE PASS [6/9] fault injection: 30/30 injected defects detected across \
         10 contracts, 0 false positives"
    );
}

// ---------------------------------------------------------------------------
// 7. byte-identical reruns

#[test]
fn criterion_7_reruns_are_byte_identical() {
    // audit twice
    let rules = load_rules("rules/erc20.json");
    let src = fixture("contracts/erc20_vulnerable.sol");
    let a = ercaudit::report::AuditReport::new(audit(&src, &rules), vec![]).to_json();
    let b = ercaudit::report::AuditReport::new(audit(&src, &rules), vec![]).to_json();
    assert_eq!(a, b, "audit reruns differ");

    // extract + translate twice against the fixture store
    let doc = fixture("erc20.md");
    let cfg = LlmConfig::replay(format!("{}/../../fixtures/llm", env!("CARGO_MANIFEST_DIR")));
    let run = || translate(extract(&doc, "ERC20", &cfg).expect("extract"), &cfg).to_json();
    let x = run();
    let y = run();
    assert_eq!(x, y, "extraction reruns differ");

    println!(
        "ACCEPTANCE PASS [7/9] determinism: repeated audits and repeated rule \
         extraction produce byte-identical output"
    );
}

// ---------------------------------------------------------------------------
// 8. bounded loop exploration

#[test]
fn criterion_8_single_loop_yields_the_three_unrollings() {
    let src = r#"contract Looper {
        function count(uint256 n) public pure returns (uint256) {
            uint256 i = 0;
            while (i < n) { i = i + 1; }
            return i;
        }
    }"#;
    let model = build_model(&parse_file(src).unwrap(), None).unwrap();
    let facts = collect_facts(&model, &[]);
    let ssa = lower_function(&model, "count").unwrap();
    let cfg = ExecConfig::default();
    assert_eq!(cfg.loop_bound, 2);
    let paths = explore_paths(&ssa, &facts, &cfg).unwrap();
    assert_eq!(paths.len(), 3, "expected exactly the 0/1/2-iteration paths");
    assert!(paths.iter().all(|p| !p.throw));
    assert!(paths.iter().all(|p| p.unknown.is_none()));
    // each extra iteration contributes one extra branch condition
    let mut lens: Vec<usize> = paths.iter().map(|p| p.pc.len()).collect();
    lens.sort_unstable();
    assert_eq!(lens[1], lens[0] + 1);
    assert_eq!(lens[2], lens[0] + 2);

    println!(
        "ACCEPTANCE PASS [8/9] loop bound 2: a single-loop function explores exactly \
         the 0-, 1-, and 2-iteration paths"
    );
}

// ---------------------------------------------------------------------------
// 9. results that require external resources and are not reproduced here

#[test]
fn criterion_9_non_reproducible_results_are_listed() {
    let items = [
        "large-scale audit aggregates (5,783 reported violations / 1,510 manually \
         confirmed false positives) — requires the original 9,000+ contract corpus",
        "head-to-head totals against third-party auditing tools — requires those \
         tools and the same corpus",
        "wall-clock and dollar-cost figures for live model usage — requires metered \
         API access",
        "live-model rule extraction counts (32/60/40 per standard) — this repository \
         replays a recorded fixture store instead of calling a hosted model",
    ];
    for it in &items {
        println!("    not reproduced: {it}");
    }
    println!(
        "ACCEPTANCE PASS [9/9] non-reproducible scope: {} external-resource results \
         explicitly listed",
        items.len()
    );
}
