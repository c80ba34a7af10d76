//! Batch validation of task candidates.

use std::io;
use std::path::Path;
use std::time::Duration;

use crate::config::TaskSpec;
use crate::sandbox::{execute, gen_candidate_sandbox, Origin, SandboxDir};
use crate::source_scan::{signature_params, FunctionSpan, ImportStmt, SourceDoc};
use crate::value::canonical_eq;

use super::{CaseResult, ValidationResult};

/// Run `candidate` once per input tuple of `spec`, each in a fresh sandbox,
/// and compare the result lines canonically with the expected values.
#[allow(clippy::too_many_arguments)]
pub fn validate_candidate(
    doc: &SourceDoc,
    span: &FunctionSpan,
    imports: &[ImportStmt],
    spec: &TaskSpec,
    candidate: &str,
    temp: &SandboxDir,
    interpreter: &Path,
    timeout: Duration,
) -> io::Result<ValidationResult> {
    let fallback = signature_params(doc, span).unwrap_or_default();
    let origin = Origin {
        path: doc.path.clone(),
        span: span.clone(),
    };
    let per_case = std::thread::scope(|scope| {
        let handles: Vec<_> = spec
            .inputs
            .iter()
            .zip(&spec.expected)
            .map(|(input, expected)| {
                let origin = origin.clone();
                let fallback = &fallback;
                scope.spawn(move || -> io::Result<CaseResult> {
                    let mut case = CaseResult {
                        input: input.clone(),
                        expected: expected.clone(),
                        actual: None,
                        error: None,
                        passed: false,
                    };
                    let mut sb = match gen_candidate_sandbox(
                        origin, candidate, &span.name, fallback, imports, input,
                    ) {
                        Ok(sb) => sb,
                        Err(e) => {
                            case.error = Some(e.to_string());
                            return Ok(case);
                        }
                    };
                    let path = temp.materialize(&mut sb)?;
                    let run = execute(interpreter, &path, timeout);
                    temp.dispose(&mut sb)?;
                    let run = run?;
                    match run.result {
                        Some(actual) => {
                            case.passed = canonical_eq(&actual, expected);
                            case.actual = Some(actual);
                        }
                        None => case.error = run.error_text().or(Some("no result".into())),
                    }
                    Ok(case)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("validation worker panicked"))
            .collect::<io::Result<Vec<_>>>()
    })?;

    let failed: Vec<(usize, &CaseResult)> = per_case.iter().enumerate().filter(|(_, c)| !c.passed).collect();
    let message = match failed.first() {
        None => "success".to_owned(),
        Some((i, c)) => {
            let got = match (&c.actual, &c.error) {
                (Some(a), _) => format!("got {a}"),
                (None, Some(e)) => format!("raised {e}"),
                (None, None) => "no result".to_owned(),
            };
            format!(
                "{} of {} cases failed; case {i} ({}): expected {}, {got}",
                failed.len(),
                per_case.len(),
                c.input.join(", "),
                c.expected
            )
        }
    };
    Ok(ValidationResult {
        passed: failed.is_empty(),
        per_case,
        message,
    })
}
