use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::{SolveResult, SolveStatus};
use crate::wcnf::{parse_solver_output, verify_solver_output, SolverStatus, WcnfFormula};
use crate::{Error, Result};

const POLL: Duration = Duration::from_millis(5);
const KILL_GRACE: Duration = Duration::from_secs(1);

/// Writes `f` to a temporary WDIMACS file and runs `command <file>`.
///
/// `command` is split on whitespace. On timeout the process is killed and
/// whatever it printed so far is used. The returned assignment is always
/// re-checked against `f`.
pub fn solve_external(
    f: &WcnfFormula,
    command: &str,
    timeout: Option<Duration>,
) -> Result<SolveResult> {
    let launch = |message: String| Error::SolverLaunch {
        command: command.to_string(),
        message,
    };
    let mut words = command.split_whitespace();
    let program = words.next().ok_or_else(|| launch("empty command".into()))?;

    let mut file = tempfile::Builder::new()
        .suffix(".wcnf")
        .tempfile()
        .map_err(|e| launch(e.to_string()))?;
    file.write_all(f.to_wdimacs().as_bytes())
        .and_then(|_| file.flush())
        .map_err(|e| launch(e.to_string()))?;

    let start = Instant::now();
    let mut child = Command::new(program)
        .args(words)
        .arg(file.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| launch(e.to_string()))?;
    // Drain stdout on a thread so a chatty solver cannot block on a full pipe.
    let mut stdout = child.stdout.take().expect("stdout is piped");
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let mut text = String::new();
        let _ = tx.send(stdout.read_to_string(&mut text).map(|_| text));
    });

    let mut timed_out = false;
    loop {
        if child
            .try_wait()
            .map_err(|e| launch(e.to_string()))?
            .is_some()
        {
            break;
        }
        if timeout.is_some_and(|t| start.elapsed() >= t) {
            timed_out = true;
            let _ = child.kill();
            let _ = child.wait();
            break;
        }
        std::thread::sleep(POLL);
    }
    // A killed solver may leave children holding the pipe open.
    let text = match rx.recv_timeout(KILL_GRACE) {
        Ok(read) => read.map_err(|e| launch(e.to_string()))?,
        Err(_) if timed_out => return Err(Error::NoIncumbent),
        Err(_) => return Err(launch("solver output was not closed".into())),
    };

    let out = match parse_solver_output(&text, f.num_vars()) {
        Ok(out) => out,
        Err(_) if timed_out => return Err(Error::NoIncumbent),
        Err(e) => return Err(e),
    };
    if out.status == SolverStatus::Unsatisfiable {
        return Err(Error::HardUnsat);
    }
    if out.assignment.is_none() && (timed_out || out.status == SolverStatus::Unknown) {
        return Err(Error::NoIncumbent);
    }
    let (assignment, cost) = verify_solver_output(f, &out)?;
    let status = if out.status == SolverStatus::Optimal && !timed_out {
        SolveStatus::Optimal
    } else {
        SolveStatus::BestEffort
    };
    Ok(SolveResult {
        assignment,
        cost,
        status,
        elapsed: start.elapsed(),
        nodes: 0,
        trace: vec![cost],
    })
}
