//! Shared differential-oracle harness: generates mini-contracts plus random
//! rules, decides each rule symbolically and by exhaustive concrete
//! interpretation over the same small input domain, and panics on any
//! disagreement.
//!
//! Both sides quantify over the same free variables (parameters and initial
//! scalar field values, each drawn from {0..3}); the symbolic side uses the
//! bounded-enumeration backend restricted to exactly that domain, so any
//! verdict disagreement is an engine bug, not a domain artifact.

use ercaudit::frontend::model::{build_model, ContractModel};
use ercaudit::frontend::parser::parse_file;
use ercaudit::interp::{run_function, ArgValue, CallInput, Outcome, Store};
use ercaudit::report::Verdict;
use ercaudit::rule_ir::{
    BExp, CmpOp, FieldRef, FormalRule, RuleBody, RuleKind, Severity, TargetKind, TargetRef, Value,
};
use ercaudit::smt::Backend;
use ercaudit::static_checks::collect_facts;
use ercaudit::symexec::{analyze_function, ExecConfig};
use primitive_types::U256;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIELDS: [&str; 2] = ["f0", "f1"];
const DOMAIN: [u64; 4] = [0, 1, 2, 3];

// ---------------------------------------------------------------------------
// contract generation

struct Gen {
    rng: ChaCha8Rng,
    nparams: usize,
    loop_seq: usize,
}

impl Gen {
    fn atom(&mut self) -> String {
        match self.rng.gen_range(0..3) {
            0 => format!("p{}", self.rng.gen_range(0..self.nparams)),
            1 => FIELDS[self.rng.gen_range(0..FIELDS.len())].to_string(),
            _ => self.rng.gen_range(0..4u64).to_string(),
        }
    }

    fn cmp(&mut self) -> String {
        let op = ["==", "!=", "<", "<=", ">", ">="][self.rng.gen_range(0..6)];
        format!("{} {} {}", self.atom(), op, self.atom())
    }

    fn write_stmt(&mut self) -> String {
        let f = FIELDS[self.rng.gen_range(0..FIELDS.len())];
        let op = ["=", "+=", "-="][self.rng.gen_range(0..3)];
        let rhs = self.atom();
        if op != "=" && self.rng.gen_bool(0.3) {
            format!("unchecked {{ {f} {op} {rhs}; }}")
        } else {
            format!("{f} {op} {rhs};")
        }
    }

    fn simple_stmt(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 => format!("require({});", self.cmp()),
            1 => format!("emit E({});", self.atom()),
            2 => "revert();".to_string(),
            _ => self.write_stmt(),
        }
    }

    fn stmt(&mut self, depth: usize) -> String {
        if depth > 0 {
            match self.rng.gen_range(0..3) {
                0 => {
                    let cond = self.cmp();
                    let then = self.stmt(depth - 1);
                    if self.rng.gen_bool(0.5) {
                        let els = self.stmt(depth - 1);
                        return format!("if ({cond}) {{ {then} }} else {{ {els} }}");
                    }
                    return format!("if ({cond}) {{ {then} }}");
                }
                1 => {
                    let bound = self.rng.gen_range(1..=2);
                    let v = format!("i{}", self.loop_seq);
                    self.loop_seq += 1;
                    let body = self.write_stmt();
                    return format!(
                        "for (uint256 {v} = 0; {v} < {bound}; {v}++) {{ {body} }}"
                    );
                }
                _ => {}
            }
        }
        self.simple_stmt()
    }
}

fn gen_contract(seed: u64) -> (String, usize) {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        nparams: 0,
        loop_seq: 0,
    };
    g.nparams = g.rng.gen_range(1..=3);
    let params: Vec<String> = (0..g.nparams).map(|i| format!("uint256 p{i}")).collect();
    let nstmts = g.rng.gen_range(2..=5);
    let body: Vec<String> = (0..nstmts).map(|_| g.stmt(1)).collect();
    let src = format!(
        "contract Mini {{\n    uint256 f0;\n    uint256 f1;\n    event E(uint256 a);\n    \
         function probe({}) public {{\n        {}\n    }}\n}}\n",
        params.join(", "),
        body.join("\n        ")
    );
    (src, g.nparams)
}

fn gen_value(rng: &mut ChaCha8Rng, nparams: usize) -> Value {
    match rng.gen_range(0..3) {
        0 => Value::Param(rng.gen_range(0..nparams)),
        1 => Value::GetFieldValue {
            field: FieldRef::Literal { name: FIELDS[rng.gen_range(0..FIELDS.len())].into() },
            keys: vec![],
        },
        _ => Value::Const(rng.gen_range(0..4u64).to_string()),
    }
}

fn gen_cond(rng: &mut ChaCha8Rng, nparams: usize) -> BExp {
    let op = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge]
        [rng.gen_range(0..6)];
    BExp::Cmp {
        lhs: gen_value(rng, nparams),
        op,
        rhs: gen_value(rng, nparams),
    }
}

fn gen_rule(seed: u64, nparams: usize) -> FormalRule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let (kind, body) = match rng.gen_range(0..3) {
        0 => (
            RuleKind::Throw,
            RuleBody::Throw { condition: gen_cond(&mut rng, nparams), expect_throw: true },
        ),
        1 => (
            RuleKind::Emit,
            RuleBody::Emit {
                condition: gen_cond(&mut rng, nparams),
                event: "E".into(),
                with: None,
            },
        ),
        _ => (
            RuleKind::Assign,
            RuleBody::Assign {
                value1: Value::GetFieldValue {
                    field: FieldRef::Literal {
                        name: FIELDS[rng.gen_range(0..FIELDS.len())].into(),
                    },
                    keys: vec![],
                },
                value2: Value::Param(rng.gen_range(0..nparams)),
            },
        ),
    };
    FormalRule {
        id: format!("mini.{seed}"),
        erc: "MINI".into(),
        target: TargetRef { kind: TargetKind::Function, name: "probe".into() },
        kind,
        severity: Severity::Medium,
        source_text: "generated".into(),
        body,
    }
}

// ---------------------------------------------------------------------------
// concrete oracle

/// Rule-value evaluation mirrors the snapshot-tagging convention: parameters
/// are entry values, while scalar fields not reached through parameters carry
/// their final value, so they are read from the post-state store.
fn eval_value(v: &Value, args: &[U256], fin: &Store) -> U256 {
    match v {
        Value::Param(i) => args[*i],
        Value::Const(c) => U256::from_dec_str(c).unwrap(),
        Value::GetFieldValue { field: FieldRef::Literal { name }, .. } => fin
            .get(&(name.clone(), vec![]))
            .copied()
            .unwrap_or_default(),
        _ => unreachable!("generator emits params, consts, and literal fields only"),
    }
}

fn eval_cond(b: &BExp, args: &[U256], fin: &Store) -> bool {
    match b {
        BExp::True => true,
        BExp::Cmp { lhs, op, rhs } => {
            let (a, b) = (eval_value(lhs, args, fin), eval_value(rhs, args, fin));
            match op {
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
            }
        }
        _ => unreachable!("generator emits comparisons only"),
    }
}

/// Exhaustively decide the rule by running every assignment of parameters and
/// initial field values over the domain.
fn concrete_verdict(model: &ContractModel, rule: &FormalRule, nparams: usize) -> Verdict {
    let nvars = nparams + FIELDS.len();
    let mut idx = vec![0usize; nvars];
    loop {
        let args: Vec<U256> = (0..nparams).map(|i| U256::from(DOMAIN[idx[i]])).collect();
        let mut init = Store::new();
        for (k, f) in FIELDS.iter().enumerate() {
            init.insert((f.to_string(), vec![]), U256::from(DOMAIN[idx[nparams + k]]));
        }
        let input = CallInput {
            args: args.iter().map(|a| ArgValue::Word(*a)).collect(),
            msg_sender: U256::one(),
            msg_value: U256::zero(),
        };
        let out = run_function(model, "probe", &input, &init, vec![]).expect("interpretable");
        let violated = match (&rule.body, &out) {
            // a reverted call discharges every obligation except expected throws
            (RuleBody::Throw { condition, expect_throw: true }, Outcome::Success(st)) => {
                eval_cond(condition, &args, &st.store)
            }
            (RuleBody::Emit { condition, event, .. }, Outcome::Success(st)) => {
                eval_cond(condition, &args, &st.store)
                    && !st.events.iter().any(|(e, _)| e == event)
            }
            (RuleBody::Assign { value1, value2 }, Outcome::Success(st)) => {
                let Value::GetFieldValue { field: FieldRef::Literal { name }, .. } = value1
                else {
                    unreachable!()
                };
                let fin = st
                    .store
                    .get(&(name.clone(), vec![]))
                    .copied()
                    .unwrap_or_default();
                fin != eval_value(value2, &args, &init)
            }
            _ => false,
        };
        if violated {
            return Verdict::Violating;
        }
        // odometer over the assignment space
        let mut k = 0;
        loop {
            if k == nvars {
                return Verdict::Clean;
            }
            idx[k] += 1;
            if idx[k] < DOMAIN.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

// ---------------------------------------------------------------------------

pub struct SweepStats {
    pub checked: usize,
    pub violating: usize,
}

/// Run the differential sweep over `contracts` generated cases; panics on the
/// first symbolic/concrete disagreement or degradation to `unknown`.
pub fn differential_sweep(contracts: usize) -> SweepStats {
    let cfg = ExecConfig {
        backend: Backend::Builtin {
            domain: DOMAIN.iter().map(|d| U256::from(*d)).collect(),
            exhausted_is_unsat: true,
        },
        ..ExecConfig::default()
    };
    let mut stats = SweepStats { checked: 0, violating: 0 };
    let mut seed = 0u64;
    while stats.checked < contracts {
        seed += 1;
        let (src, nparams) = gen_contract(seed);
        let model = build_model(&parse_file(&src).unwrap(), None).unwrap();
        let rule = gen_rule(seed, nparams);
        let facts = collect_facts(&model, std::slice::from_ref(&rule));
        let reps = analyze_function(&model, "probe", &[&rule], &facts, &cfg);
        assert_eq!(reps.len(), 1);
        let symbolic = reps[0].verdict;
        assert_ne!(
            symbolic,
            Verdict::Unknown,
            "seed {seed} degraded to unknown: {:?}\n{src}",
            reps[0].note
        );
        let concrete = concrete_verdict(&model, &rule, nparams);
        assert_eq!(
            symbolic, concrete,
            "verdict mismatch on seed {seed} for rule {:?}\n{src}",
            rule.body
        );
        stats.checked += 1;
        if symbolic == Verdict::Violating {
            stats.violating += 1;
        }
    }
    stats
}
