//! Scores from an external program: SMILES lines in, one decimal per line out.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::MetricError;

/// Default limit for one batch.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalScores {
    pub scores: Vec<f64>,
    pub mean: f64,
}

/// Runs `command` through `sh -c`, writes one SMILES per line to its stdin,
/// and reads one score per input line from its stdout.
pub fn external_metric(
    smiles: &[String],
    command: &str,
    timeout: Duration,
) -> Result<ExternalScores, MetricError> {
    if command.trim().is_empty() {
        return Err(MetricError::ProcessFailure("empty command".into()));
    }
    if smiles.is_empty() {
        return Err(MetricError::EmptyBatch);
    }
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| MetricError::ProcessFailure(format!("cannot start `{command}`: {e}")))?;

    let mut stdin = child.stdin.take().unwrap();
    let input: String = smiles.iter().map(|s| format!("{s}\n")).collect();
    // A child that exits early closes the pipe; that surfaces below as a
    // count mismatch or exit status, so write errors are ignored here.
    let writer = thread::spawn(move || {
        let _ = stdin.write_all(input.as_bytes());
    });
    let mut stdout = child.stdout.take().unwrap();
    let reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let mut stderr = child.stderr.take().unwrap();
    let err_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });

    let start = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if start.elapsed() >= timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(MetricError::Timeout(timeout));
            }
            Ok(None) => thread::sleep(Duration::from_millis(5)),
            Err(e) => return Err(MetricError::ProcessFailure(e.to_string())),
        }
    };
    let _ = writer.join();
    let out = reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();
    if !status.success() {
        return Err(MetricError::ProcessFailure(format!(
            "`{command}` exited with {status}: {}",
            err.trim()
        )));
    }
    let lines: Vec<&str> = out.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != smiles.len() {
        return Err(MetricError::ProtocolError(format!(
            "expected {} scores, got {}",
            smiles.len(),
            lines.len()
        )));
    }
    let scores = lines
        .iter()
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| MetricError::ProtocolError(format!("not a number: {l:?}")))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(ExternalScores { scores, mean })
}
