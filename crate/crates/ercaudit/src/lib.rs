pub mod constraint;
pub mod erc_ingest;
pub mod frontend;
pub mod inject;
pub mod interp;
pub mod llm;
pub mod pipeline;
pub mod report;
pub mod rule_ir;
pub mod smt;
pub mod static_checks;
pub mod symexec;
pub mod synth;
