//! Differential oracle: for hundreds of generated mini-contracts, the
//! symbolic verdict must coincide with exhaustive concrete interpretation
//! over the same small input domain. The harness lives in `support` so the
//! acceptance suite can rerun the same sweep.

mod support;

#[test]
fn symbolic_and_concrete_verdicts_agree_on_generated_contracts() {
    let stats = support::differential_sweep(220);
    assert!(stats.checked >= 200);
    // the corpus must actually exercise both outcomes
    assert!(
        stats.violating > 20,
        "only {} violating of {}",
        stats.violating,
        stats.checked
    );
    assert!(stats.checked - stats.violating > 20);
}
