//! Command-line front end: extract rules from an ERC document, translate
//! them into formal bodies, check contracts against them, and inject rule
//! violations for testing.
//!
//! Exit codes: 0 = ran, 1 = violations found, 2 = internal error.
//! Reports go to stdout; diagnostics go to stderr.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ercaudit::erc_ingest::{isolate_spec_section, sections_json, segment_by_declaration};
use ercaudit::frontend::model::build_model;
use ercaudit::frontend::parser::parse_file;
use ercaudit::frontend::ssa::lower_function;
use ercaudit::inject::inject;
use ercaudit::llm::{LlmConfig, LlmMode, LLM_KEY_ENV};
use ercaudit::pipeline::{extract, translate, RuleSet};
use ercaudit::report::AuditReport;
use ercaudit::rule_ir::{parse_rule_json, FormalRule};
use ercaudit::smt::Backend;
use ercaudit::static_checks::collect_facts;
use ercaudit::symexec::{audit_contract, ExecConfig};
use ercaudit::synth::synth_triple;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ercaudit", version, about = "ERC compliance auditor")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct LlmArgs {
    /// Bridge mode: live, replay, or record.
    #[arg(long, default_value = "replay")]
    llm: String,
    /// Fixture store for replay/record modes.
    #[arg(long, default_value = "fixtures/llm")]
    fixtures: PathBuf,
    /// Chat-completion endpoint (live/record).
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name to request (live/record).
    #[arg(long)]
    model: Option<String>,
}

impl LlmArgs {
    fn config(&self) -> Result<LlmConfig> {
        let mode: LlmMode = self.llm.parse().map_err(|e: String| anyhow::anyhow!(e))?;
        let mut cfg = LlmConfig::replay(&self.fixtures);
        cfg.mode = mode;
        if let Some(e) = &self.endpoint {
            cfg.endpoint = e.clone();
        }
        if let Some(m) = &self.model {
            cfg.model = m.clone();
        }
        cfg.api_key = std::env::var(LLM_KEY_ENV).ok();
        cfg.validate().map_err(|e| anyhow::anyhow!(e))?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// Split an ERC document and extract rule records.
    Extract {
        /// ERC standard document (markdown).
        doc: PathBuf,
        /// Standard name used in rule ids (e.g. ERC20).
        #[arg(long)]
        erc: String,
        #[command(flatten)]
        llm: LlmArgs,
        /// Print the section segmentation instead of extracting.
        #[arg(long)]
        dump_sections: bool,
        /// Write output here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Formalize extracted rules into constraint-ready bodies.
    Translate {
        /// Rule set produced by `extract`.
        rules: PathBuf,
        #[command(flatten)]
        llm: LlmArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Audit contracts against formalized rules.
    Check {
        /// Rule set (translated) or bare rule array.
        #[arg(long)]
        rules: PathBuf,
        /// Contract source files.
        #[arg(required = true)]
        contracts: Vec<PathBuf>,
        /// Loop unrolling bound (>= 1).
        #[arg(long, default_value_t = 2)]
        loop_bound: usize,
        #[arg(long, default_value_t = 4096)]
        max_paths: usize,
        #[arg(long, default_value_t = 5000)]
        solver_timeout_ms: u64,
        /// External SMT-LIB2 solver command (e.g. "z3 -in"); default is the
        /// built-in bounded solver.
        #[arg(long)]
        solver_cmd: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Persist every solver query as an SMT-LIB2 script in this directory.
        #[arg(long)]
        dump_smt: Option<PathBuf>,
        /// Print the lowered instruction form of each entry function to stderr.
        #[arg(long)]
        dump_ssa: bool,
        /// Print each rule's synthesized constraint triple to stderr.
        #[arg(long)]
        dump_constraints: bool,
    },
    /// Delete a rule's guard from a contract, producing a violating variant.
    Inject {
        /// Contract source file.
        contract: PathBuf,
        /// Rule set or bare rule array containing the rule.
        #[arg(long)]
        rules: PathBuf,
        /// Id of the rule to violate.
        #[arg(long)]
        rule_id: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn emit(output: Option<&Path>, content: &str) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Accept either a full rule-set document or a bare array of formal rules.
fn load_rules(path: &Path) -> Result<Vec<FormalRule>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(set) = serde_json::from_str::<RuleSet>(&text) {
        if !set.pending.is_empty() {
            eprintln!(
                "note: {} extracted rules are not formalized and will be skipped",
                set.pending.len()
            );
        }
        return Ok(set.rules);
    }
    parse_rule_json(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

fn cmd_extract(
    doc: &Path,
    erc: &str,
    llm: &LlmArgs,
    dump_sections: bool,
    output: Option<&Path>,
) -> Result<i32> {
    let text =
        std::fs::read_to_string(doc).with_context(|| format!("reading {}", doc.display()))?;
    if dump_sections {
        let (spec, warnings) = isolate_spec_section(&text)?;
        let (sections, diags) = segment_by_declaration(spec);
        let all: Vec<String> = warnings.into_iter().chain(diags).collect();
        emit(output, &sections_json(&sections, &all))?;
        return Ok(0);
    }
    let cfg = llm.config()?;
    let set = extract(&text, erc, &cfg)?;
    for f in &set.failures {
        eprintln!("warning: {f}");
    }
    emit(output, &set.to_json())?;
    Ok(0)
}

fn cmd_translate(rules: &Path, llm: &LlmArgs, output: Option<&Path>) -> Result<i32> {
    let text =
        std::fs::read_to_string(rules).with_context(|| format!("reading {}", rules.display()))?;
    let set: RuleSet = serde_json::from_str(&text)
        .with_context(|| format!("{} is not an extraction output", rules.display()))?;
    let cfg = llm.config()?;
    let out = translate(set, &cfg);
    for f in &out.failures {
        eprintln!("warning: {f}");
    }
    emit(output, &out.to_json())?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_check(
    rules_path: &Path,
    contracts: &[PathBuf],
    cfg: ExecConfig,
    format: Format,
    dump_ssa: bool,
    dump_constraints: bool,
) -> Result<i32> {
    let rules = load_rules(rules_path)?;
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for path in contracts {
        let src = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let parsed = match parse_file(&src) {
            Ok(p) => p,
            Err(e) => {
                errors.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        let model = match build_model(&parsed, None) {
            Ok(m) => m,
            Err(e) => {
                errors.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        let facts = collect_facts(&model, &rules);
        if dump_ssa {
            for f in model.entry_functions() {
                match lower_function(&model, &f.sig.name) {
                    Ok(ssa) => eprintln!("; ssa {}::{}\n{ssa:#?}", model.name, f.sig.name),
                    Err(e) => eprintln!("; ssa {}::{}: {e}", model.name, f.sig.name),
                }
            }
        }
        if dump_constraints {
            for r in &rules {
                match synth_triple(r, &facts) {
                    Ok(t) => {
                        eprintln!("; rule {}", r.id);
                        eprintln!(";   if:    {}", t.phi_if);
                        eprintln!(";   check: {}", t.phi_check);
                        if let Some(w) = &t.phi_with {
                            eprintln!(";   with:  {w}");
                        }
                    }
                    Err(e) => eprintln!("; rule {}: {e}", r.id),
                }
            }
        }
        reports.extend(audit_contract(&model, &rules, &facts, &cfg));
    }
    let report = AuditReport::new(reports, errors);
    match format {
        Format::Json => print!("{}", report.to_json()),
        Format::Text => print!("{}", report.to_text()),
    }
    Ok(if report.has_violations() { 1 } else { 0 })
}

fn cmd_inject(
    contract: &Path,
    rules_path: &Path,
    rule_id: &str,
    seed: u64,
    output: Option<&Path>,
) -> Result<i32> {
    let src = std::fs::read_to_string(contract)
        .with_context(|| format!("reading {}", contract.display()))?;
    let rules = load_rules(rules_path)?;
    let Some(rule) = rules.iter().find(|r| r.id == rule_id) else {
        bail!("rule `{rule_id}` not found in {}", rules_path.display());
    };
    let mutated = inject(&src, rule, seed)?;
    emit(output, &mutated)?;
    Ok(0)
}

fn run(cli: Cli) -> Result<i32> {
    match &cli.cmd {
        Cmd::Extract { doc, erc, llm, dump_sections, output } => {
            cmd_extract(doc, erc, llm, *dump_sections, output.as_deref())
        }
        Cmd::Translate { rules, llm, output } => cmd_translate(rules, llm, output.as_deref()),
        Cmd::Check {
            rules,
            contracts,
            loop_bound,
            max_paths,
            solver_timeout_ms,
            solver_cmd,
            format,
            dump_smt,
            dump_ssa,
            dump_constraints,
        } => {
            if *loop_bound < 1 {
                bail!("--loop-bound must be at least 1");
            }
            let backend = match solver_cmd {
                Some(cmd) => Backend::External {
                    cmd: cmd.split_whitespace().map(String::from).collect(),
                },
                None => Backend::default_builtin(),
            };
            let cfg = ExecConfig {
                loop_bound: *loop_bound,
                max_paths: *max_paths,
                solver_timeout_ms: *solver_timeout_ms,
                backend,
                dump_smt: dump_smt.clone(),
            };
            cmd_check(rules, contracts, cfg, *format, *dump_ssa, *dump_constraints)
        }
        Cmd::Inject { contract, rules, rule_id, seed, output } => {
            cmd_inject(contract, rules, rule_id, *seed, output.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
