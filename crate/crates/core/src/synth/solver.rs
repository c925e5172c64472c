//! Satisfiability backends.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::Command;

use varisat::{ExtendFormula, Lit, Solver};

use super::cnf::Cnf;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatOutcome {
    /// Value of every variable; index 0 is DIMACS variable 1.
    Sat(Vec<bool>),
    Unsat,
}

impl SatOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatOutcome::Sat(_))
    }

    /// Competition-style solver output (`s` and `v` lines).
    pub fn to_solver_output(&self) -> String {
        match self {
            SatOutcome::Unsat => "s UNSATISFIABLE\n".into(),
            SatOutcome::Sat(model) => {
                let mut s = String::from("s SATISFIABLE\nv");
                for (i, &v) in model.iter().enumerate() {
                    let lit = i as i64 + 1;
                    s.push_str(&format!(" {}", if v { lit } else { -lit }));
                }
                s.push_str(" 0\n");
                s
            }
        }
    }
}

pub trait SatBackend: Send + Sync {
    fn solve(&self, cnf: &Cnf) -> Result<SatOutcome>;
}

/// The pure-Rust varisat CDCL solver, run in-process.
#[derive(Debug, Clone, Copy, Default)]
pub struct Varisat;

impl SatBackend for Varisat {
    fn solve(&self, cnf: &Cnf) -> Result<SatOutcome> {
        let mut solver = Solver::new();
        let mut lits = Vec::new();
        for cl in &cnf.clauses {
            lits.clear();
            lits.extend(cl.iter().map(|&l| Lit::from_dimacs(l as isize)));
            solver.add_clause(&lits);
        }
        if cnf.clauses.iter().any(|c| c.is_empty()) {
            return Ok(SatOutcome::Unsat);
        }
        match solver.solve() {
            Ok(true) => {
                let mut model = vec![false; cnf.var_count];
                for l in solver.model().unwrap_or_default() {
                    let v = l.var().to_dimacs() as usize;
                    if v >= 1 && v <= model.len() {
                        model[v - 1] = l.is_positive();
                    }
                }
                Ok(SatOutcome::Sat(model))
            }
            Ok(false) => Ok(SatOutcome::Unsat),
            Err(e) => Err(Error::Backend(e.to_string())),
        }
    }
}

/// CaDiCaL linked in-process.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cadical;

impl SatBackend for Cadical {
    fn solve(&self, cnf: &Cnf) -> Result<SatOutcome> {
        if cnf.clauses.iter().any(|c| c.is_empty()) {
            return Ok(SatOutcome::Unsat);
        }
        let mut solver: cadical::Solver = cadical::Solver::new();
        for cl in &cnf.clauses {
            solver.add_clause(cl.iter().copied());
        }
        match solver.solve() {
            Some(true) => Ok(SatOutcome::Sat(
                (1..=cnf.var_count as i32).map(|v| solver.value(v).unwrap_or(false)).collect(),
            )),
            Some(false) => Ok(SatOutcome::Unsat),
            None => Err(Error::Backend("cadical gave no answer".into())),
        }
    }
}

/// Any DIMACS solver executable: it receives the formula file path as its
/// last argument and must print an `s` line plus `v` lines.
#[derive(Debug, Clone)]
pub struct Subprocess {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl Subprocess {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Subprocess { program: program.into(), args: Vec::new() }
    }
}

impl SatBackend for Subprocess {
    fn solve(&self, cnf: &Cnf) -> Result<SatOutcome> {
        let mut file = tempfile::Builder::new().suffix(".cnf").tempfile()?;
        file.write_all(cnf.to_dimacs().as_bytes())?;
        file.flush()?;
        let out = Command::new(&self.program)
            .args(&self.args)
            .arg(file.path())
            .output()
            .map_err(|e| Error::Backend(format!("cannot run {}: {e}", self.program.display())))?;
        let stdout = String::from_utf8_lossy(&out.stdout);
        parse_solver_output(&stdout, cnf.var_count).map_err(|e| match e {
            Error::Backend(msg) => Error::Backend(format!(
                "{msg} (exit status {}, stderr: {})",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )),
            e => e,
        })
    }
}

pub fn parse_solver_output(text: &str, var_count: usize) -> Result<SatOutcome> {
    let mut status = None;
    let mut model = vec![false; var_count];
    for line in text.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("s ") {
            status = Some(match rest.trim() {
                "SATISFIABLE" => true,
                "UNSATISFIABLE" => false,
                other => return Err(Error::Backend(format!("solver reported `{other}`"))),
            });
        } else if let Some(rest) = line.strip_prefix('v') {
            for tok in rest.split_whitespace() {
                let lit: i64 = tok.parse().map_err(|_| Error::Backend(format!("bad model literal `{tok}`")))?;
                let v = lit.unsigned_abs() as usize;
                if v >= 1 && v <= var_count {
                    model[v - 1] = lit > 0;
                }
            }
        }
    }
    match status {
        Some(true) => Ok(SatOutcome::Sat(model)),
        Some(false) => Ok(SatOutcome::Unsat),
        None => Err(Error::Backend("no status line in solver output".into())),
    }
}
