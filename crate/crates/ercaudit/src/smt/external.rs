//! External solver driver: spawns a child process, feeds it an SMT-LIB2
//! script on stdin, and parses the check-sat answer plus model.

use crate::smt::{emit::emit_smtlib, Model, SolverQuery, SolverVerdict, Status};
use primitive_types::U256;
use regex::Regex;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::rc::Rc;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

pub fn solve(q: &SolverQuery, cmd: &[String]) -> SolverVerdict {
    let Some((program, args)) = cmd.split_first() else {
        return SolverVerdict::unknown("empty solver command");
    };
    let script = emit_smtlib(q);
    let mut child = match Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => return SolverVerdict::unknown(format!("failed to spawn `{program}`: {e}")),
    };

    if let Some(mut stdin) = child.stdin.take() {
        // a solver that exits early (or crashes) breaks the pipe; that case
        // is diagnosed from its output, not from the write error
        let _ = stdin.write_all(script.as_bytes());
    }
    // drain output on helper threads so a chatty solver cannot fill the pipe
    // and deadlock against our wait loop
    let stdout = child.stdout.take();
    let stderr = child.stderr.take();
    let out_handle = std::thread::spawn(move || {
        let mut buf = String::new();
        if let Some(mut s) = stdout {
            let _ = s.read_to_string(&mut buf);
        }
        buf
    });
    let err_handle = std::thread::spawn(move || {
        let mut buf = String::new();
        if let Some(mut s) = stderr {
            let _ = s.read_to_string(&mut buf);
        }
        buf
    });

    let deadline = Instant::now() + Duration::from_millis(q.timeout_ms);
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    return SolverVerdict::unknown(format!(
                        "solver timed out after {} ms",
                        q.timeout_ms
                    ));
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => {
                let _ = child.kill();
                return SolverVerdict::unknown(format!("wait failed: {e}"));
            }
        }
    }
    let stdout = out_handle.join().unwrap_or_default();
    let stderr = err_handle.join().unwrap_or_default();
    parse_output(&stdout, &stderr)
}

fn parse_output(stdout: &str, stderr: &str) -> SolverVerdict {
    let status = stdout
        .lines()
        .map(str::trim)
        .find(|l| matches!(*l, "sat" | "unsat" | "unknown"));
    match status {
        Some("unsat") => SolverVerdict {
            status: Status::Unsat,
            model: None,
            diagnostic: stderr.to_string(),
        },
        Some("sat") => match parse_model(stdout) {
            Some(model) => SolverVerdict {
                status: Status::Sat,
                model: Some(model),
                diagnostic: stderr.to_string(),
            },
            None => SolverVerdict::unknown(format!("sat answer with unparsable model; stderr: {stderr}")),
        },
        Some(_) => SolverVerdict::unknown(format!("solver answered unknown; stderr: {stderr}")),
        None => SolverVerdict::unknown(format!(
            "no check-sat answer in solver output; stderr: {stderr}"
        )),
    }
}

/// Accepts `define-fun` entries with hex (`#x…`) or `(_ bvN 256)` values.
fn parse_model(stdout: &str) -> Option<Model> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(
            r"\(define-fun\s+(\|[^|]+\||[^\s()|]+)\s*\(\)\s*\(_\s*BitVec\s*256\)\s*(#x[0-9a-fA-F]+|\(_\s*bv(\d+)\s*256\s*\))",
        )
        .expect("model regex")
    });
    let mut model = Model::new();
    for cap in re.captures_iter(stdout) {
        let name = cap[1].trim_matches('|').to_string();
        let value = if let Some(dec) = cap.get(3) {
            U256::from_dec_str(dec.as_str()).ok()?
        } else {
            let hex = cap[2].trim_start_matches("#x");
            U256::from_str_radix(hex, 16).ok()?
        };
        model.insert(Rc::from(name.as_str()), value);
    }
    Some(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{BoolExpr, Term};
    use crate::rule_ir::CmpOp;
    use std::fs;
    use std::os::unix::fs::PermissionsExt;

    fn mock_solver(dir: &std::path::Path, body: &str) -> Vec<String> {
        let path = dir.join("mock-solver.sh");
        fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
        fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
        vec![path.to_string_lossy().into_owned()]
    }

    fn sample_query(timeout_ms: u64) -> SolverQuery {
        SolverQuery::new(
            vec![BoolExpr::cmp(
                CmpOp::Eq,
                Term::sym("x"),
                Term::constant(U256::from(2)),
            )],
            timeout_ms,
        )
    }

    #[test]
    fn parses_sat_with_hex_model() {
        let dir = tempfile::tempdir().unwrap();
        let cmd = mock_solver(
            dir.path(),
            r#"cat > /dev/null
echo sat
echo '(model'
echo '  (define-fun x () (_ BitVec 256) #x0000000000000000000000000000000000000000000000000000000000000002)'
echo ')'"#,
        );
        let v = solve(&sample_query(5000), &cmd);
        assert_eq!(v.status, Status::Sat);
        assert_eq!(v.model.unwrap()[&Rc::from("x")], U256::from(2));
    }

    #[test]
    fn parses_unsat_and_decimal_models() {
        let dir = tempfile::tempdir().unwrap();
        let cmd = mock_solver(dir.path(), "cat > /dev/null\necho unsat");
        assert_eq!(solve(&sample_query(5000), &cmd).status, Status::Unsat);

        let m = parse_model("(define-fun y () (_ BitVec 256) (_ bv42 256))").unwrap();
        assert_eq!(m[&Rc::from("y")], U256::from(42));
        let m = parse_model("(define-fun |a b| () (_ BitVec 256) #x01)").unwrap();
        assert_eq!(m[&Rc::from("a b")], U256::one());
    }

    #[test]
    fn garbage_output_is_unknown() {
        let dir = tempfile::tempdir().unwrap();
        let cmd = mock_solver(dir.path(), "cat > /dev/null\necho flubber");
        assert_eq!(solve(&sample_query(5000), &cmd).status, Status::Unknown);
    }

    #[test]
    fn missing_binary_is_unknown_not_crash() {
        let v = solve(
            &sample_query(5000),
            &["/nonexistent/solver-binary".to_string()],
        );
        assert_eq!(v.status, Status::Unknown);
        assert!(v.diagnostic.contains("failed to spawn"));
    }

    #[test]
    fn slow_solver_times_out() {
        let dir = tempfile::tempdir().unwrap();
        let cmd = mock_solver(dir.path(), "sleep 30\necho sat");
        let start = std::time::Instant::now();
        let v = solve(&sample_query(200), &cmd);
        assert_eq!(v.status, Status::Unknown);
        assert!(v.diagnostic.contains("timed out"));
        assert!(start.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn validated_sat_through_check_sat() {
        // full path through check_sat: the mock must return a model that
        // actually satisfies the query, otherwise validation demotes it
        let dir = tempfile::tempdir().unwrap();
        let good = mock_solver(
            dir.path(),
            r#"cat > /dev/null
echo sat
echo '(define-fun x () (_ BitVec 256) (_ bv2 256))'"#,
        );
        let v = crate::smt::check_sat(&sample_query(5000), &crate::smt::Backend::External { cmd: good });
        assert_eq!(v.status, Status::Sat);

        let lying = mock_solver(
            dir.path(),
            r#"cat > /dev/null
echo sat
echo '(define-fun x () (_ BitVec 256) (_ bv9 256))'"#,
        );
        let v = crate::smt::check_sat(&sample_query(5000), &crate::smt::Backend::External { cmd: lying });
        assert_eq!(v.status, Status::Unknown);
    }
}
