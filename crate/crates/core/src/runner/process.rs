//! Child processes under a wall-clock limit, and solver output parsing.

use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::process::{Command, ExitStatus, Stdio};
use std::time::{Duration, Instant};

use crate::cnf::SatModel;
use crate::csp::{Assignment, CspInstance};
use crate::selector::Answer;

#[derive(Debug)]
pub(crate) struct ProcessRun {
    pub exit: Option<ExitStatus>,
    pub timed_out: bool,
    pub elapsed: f64,
    pub stdout: String,
    pub stderr_tail: String,
}

#[cfg(unix)]
fn confine(cmd: &mut Command, memory_mb: Option<u64>) {
    use std::os::unix::process::CommandExt;
    cmd.process_group(0);
    if let Some(mb) = memory_mb {
        let bytes = mb.saturating_mul(1024 * 1024) as libc::rlim_t;
        // SAFETY: only async-signal-safe calls between fork and exec.
        unsafe {
            cmd.pre_exec(move || {
                let lim = libc::rlimit { rlim_cur: bytes, rlim_max: bytes };
                libc::setrlimit(libc::RLIMIT_AS, &lim);
                Ok(())
            });
        }
    }
}

#[cfg(not(unix))]
fn confine(_cmd: &mut Command, _memory_mb: Option<u64>) {}

#[cfg(unix)]
fn kill_tree(child: &mut std::process::Child) {
    // SAFETY: plain syscall; the group id is the child's pid.
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
    let _ = child.kill();
}

#[cfg(not(unix))]
fn kill_tree(child: &mut std::process::Child) {
    let _ = child.kill();
}

fn read_lossy(path: &Path) -> String {
    let mut buf = Vec::new();
    if let Ok(mut f) = File::open(path) {
        let _ = f.read_to_end(&mut buf);
    }
    String::from_utf8_lossy(&buf).into_owned()
}

/// Runs `argv` with output captured in `dir`, killing the whole process
/// group once `timeout` seconds have passed.
pub(crate) fn run_with_limit(
    argv: &[String],
    dir: &Path,
    timeout: f64,
    memory_mb: Option<u64>,
) -> std::io::Result<ProcessRun> {
    let out_path = dir.join("stdout");
    let err_path = dir.join("stderr");
    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .current_dir(dir)
        .stdin(Stdio::null())
        .stdout(File::create(&out_path)?)
        .stderr(File::create(&err_path)?);
    confine(&mut cmd, memory_mb);

    let start = Instant::now();
    let limit = Duration::from_secs_f64(timeout);
    let mut child = cmd.spawn()?;
    let mut pause = Duration::from_millis(1);
    let (exit, timed_out) = loop {
        if let Some(status) = child.try_wait()? {
            break (Some(status), start.elapsed() > limit);
        }
        if start.elapsed() >= limit {
            kill_tree(&mut child);
            let _ = child.wait();
            break (None, true);
        }
        std::thread::sleep(pause.min(limit.saturating_sub(start.elapsed())));
        pause = (pause * 2).min(Duration::from_millis(20));
    };
    let elapsed = start.elapsed().as_secs_f64();
    let stderr = read_lossy(&err_path);
    let tail_start = stderr.len().saturating_sub(400);
    let tail_start = (tail_start..stderr.len()).find(|&i| stderr.is_char_boundary(i)).unwrap_or(stderr.len());
    Ok(ProcessRun {
        exit,
        timed_out,
        elapsed,
        stdout: read_lossy(&out_path),
        stderr_tail: stderr[tail_start..].trim().to_string(),
    })
}

fn status_line(text: &str) -> Result<Answer, String> {
    let line = text
        .lines()
        .map(str::trim)
        .find(|l| l.starts_with("s ") || *l == "s")
        .ok_or("no status line in solver output")?;
    match line[1..].trim() {
        "SATISFIABLE" => Ok(Answer::Sat),
        "UNSATISFIABLE" => Ok(Answer::Unsat),
        other => Err(format!("solver reported `{other}`")),
    }
}

fn value_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| l.starts_with("v ") || *l == "v").flat_map(|l| l[1..].split_whitespace())
}

/// Reads the status and, for satisfiable answers, the model over `n_vars`
/// variables. Variables the solver leaves out default to false.
pub fn parse_sat_output(text: &str, n_vars: usize) -> Result<(Answer, Option<SatModel>), String> {
    let answer = status_line(text)?;
    if answer == Answer::Unsat {
        return Ok((answer, None));
    }
    let mut model = vec![false; n_vars];
    let mut terminated = false;
    for tok in value_tokens(text) {
        let lit: i64 = tok.parse().map_err(|_| format!("bad literal `{tok}` in model"))?;
        if lit == 0 {
            terminated = true;
            break;
        }
        let var = lit.unsigned_abs() as usize;
        if var > n_vars {
            return Err(format!("model mentions variable {var} of {n_vars}"));
        }
        model[var - 1] = lit > 0;
    }
    if !terminated {
        return Err("model is missing or not terminated by 0".into());
    }
    Ok((answer, Some(SatModel(model))))
}

/// Reads the status and, for satisfiable answers, a full assignment given as
/// `NAME=value` tokens.
pub fn parse_csp_output(text: &str, instance: &CspInstance) -> Result<(Answer, Option<Assignment>), String> {
    let answer = status_line(text)?;
    if answer == Answer::Unsat {
        return Ok((answer, None));
    }
    let mut a = Assignment::default();
    for tok in value_tokens(text) {
        let (name, value) = tok.split_once('=').ok_or_else(|| format!("expected NAME=value, found `{tok}`"))?;
        let var = instance.var_by_name(name).ok_or_else(|| format!("unknown variable `{name}`"))?;
        let value: i64 = value.parse().map_err(|_| format!("bad value in `{tok}`"))?;
        a.set(var, value);
    }
    if a.len() != instance.n_vars() {
        return Err(format!("assignment covers {} of {} variables", a.len(), instance.n_vars()));
    }
    Ok((answer, Some(a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sat_output() {
        let (a, m) = parse_sat_output("c hi\ns SATISFIABLE\nv 1 -2\nv 3 0\n", 4).unwrap();
        assert_eq!(a, Answer::Sat);
        assert_eq!(m.unwrap().0, vec![true, false, true, false]);
        assert_eq!(parse_sat_output("s UNSATISFIABLE\n", 3).unwrap(), (Answer::Unsat, None));
        assert!(parse_sat_output("s UNKNOWN\n", 3).is_err());
        assert!(parse_sat_output("", 3).is_err());
        assert!(parse_sat_output("s SATISFIABLE\nv 1 2\n", 3).is_err());
        assert!(parse_sat_output("s SATISFIABLE\nv 9 0\n", 3).is_err());
    }

    #[test]
    fn csp_output() {
        let inst = crate::csp::alldifferent_example();
        let names: Vec<String> = inst.variables.iter().map(|v| v.name.clone()).collect();
        let text = format!("s SATISFIABLE\nv {}=1 {}=2\nv {}=3\n", names[0], names[1], names[2]);
        let (a, asg) = parse_csp_output(&text, &inst).unwrap();
        assert_eq!(a, Answer::Sat);
        assert!(inst.is_solution(&asg.unwrap()));
        assert!(parse_csp_output("s SATISFIABLE\nv Q=1\n", &inst).is_err());
    }
}
