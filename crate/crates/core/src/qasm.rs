//! OpenQASM 2.0 reader and writer for the supported gate subset.

use std::collections::BTreeSet;

use crate::circuit::{Circuit, GateKind};
use crate::error::{Error, Result};

/// Gates declared by `qelib1.inc` that may appear as opaque single-qubit calls.
const QELIB_NAMES: &[&str] = &[
    "u3", "u2", "u1", "u0", "u", "p", "id", "y", "z", "sx", "sxdg", "rx", "ry", "U",
];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Sym(char),
    Arrow,
    Eq2,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: &str| Error::Parse { line, col, msg: msg.to_string() };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let adv = |i: &mut usize, n: usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => adv(&mut i, 1, &mut col),
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                i += 2;
                col += 2;
                loop {
                    match chars.get(i) {
                        None => return Err(err(l0, c0, "unterminated comment")),
                        Some('*') if chars.get(i + 1) == Some(&'/') => {
                            adv(&mut i, 2, &mut col);
                            break;
                        }
                        Some('\n') => {
                            i += 1;
                            line += 1;
                            col = 1;
                        }
                        _ => adv(&mut i, 1, &mut col),
                    }
                }
            }
            '"' => {
                let mut j = i + 1;
                while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                    j += 1;
                }
                if chars.get(j) != Some(&'"') {
                    return Err(err(l0, c0, "unterminated string"));
                }
                out.push(Token { tok: Tok::Str(chars[i + 1..j].iter().collect()), line: l0, col: c0 });
                let n = j + 1 - i;
                adv(&mut i, n, &mut col);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                out.push(Token { tok: Tok::Ident(chars[i..j].iter().collect()), line: l0, col: c0 });
                let n = j - i;
                adv(&mut i, n, &mut col);
            }
            c if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                out.push(Token { tok: Tok::Number(chars[i..j].iter().collect()), line: l0, col: c0 });
                let n = j - i;
                adv(&mut i, n, &mut col);
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push(Token { tok: Tok::Arrow, line: l0, col: c0 });
                adv(&mut i, 2, &mut col);
            }
            '=' if chars.get(i + 1) == Some(&'=') => {
                out.push(Token { tok: Tok::Eq2, line: l0, col: c0 });
                adv(&mut i, 2, &mut col);
            }
            ';' | ',' | '(' | ')' | '[' | ']' | '{' | '}' | '+' | '-' | '*' | '/' | '^' => {
                out.push(Token { tok: Tok::Sym(c), line: l0, col: c0 });
                adv(&mut i, 1, &mut col);
            }
            _ => return Err(err(l0, c0, &format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
    reg: Option<(String, usize)>,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map_or(self.eof, |t| (t.line, t.col))
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (line, col) = self.here();
        Err(Error::Parse { line, col, msg: msg.into() })
    }

    fn next(&mut self) -> Result<Token> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => self.fail("unexpected end of input"),
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        match self.peek() {
            Some(Token { tok: Tok::Sym(s), .. }) if *s == c => {
                self.pos += 1;
                Ok(())
            }
            _ => self.fail(format!("expected `{c}`")),
        }
    }

    fn at_sym(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Sym(s), .. }) if *s == c)
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.fail("expected identifier"),
        }
    }

    fn index(&mut self) -> Result<usize> {
        match self.peek() {
            Some(Token { tok: Tok::Number(s), .. }) if s.chars().all(|c| c.is_ascii_digit()) => {
                let v = s.parse().map_err(|_| ());
                match v {
                    Ok(v) => {
                        self.pos += 1;
                        Ok(v)
                    }
                    Err(()) => self.fail("index too large"),
                }
            }
            _ => self.fail("expected integer"),
        }
    }

    /// Raw text of a parenthesized parameter list, whitespace removed.
    fn params(&mut self) -> Result<Vec<String>> {
        self.expect_sym('(')?;
        let mut params = Vec::new();
        let mut cur = String::new();
        let mut depth = 0usize;
        loop {
            let t = self.next()?;
            match t.tok {
                Tok::Sym('(') => {
                    depth += 1;
                    cur.push('(');
                }
                Tok::Sym(')') if depth == 0 => {
                    if cur.is_empty() {
                        if !params.is_empty() {
                            return self.fail("empty parameter");
                        }
                    } else {
                        params.push(std::mem::take(&mut cur));
                    }
                    return Ok(params);
                }
                Tok::Sym(')') => {
                    depth -= 1;
                    cur.push(')');
                }
                Tok::Sym(',') if depth == 0 => {
                    if cur.is_empty() {
                        return self.fail("empty parameter");
                    }
                    params.push(std::mem::take(&mut cur));
                }
                Tok::Sym(c) if "+-*/^".contains(c) => cur.push(c),
                Tok::Ident(s) | Tok::Number(s) => cur.push_str(&s),
                _ => {
                    self.pos -= 1;
                    return self.fail("invalid parameter expression");
                }
            }
        }
    }

    /// `q[i]` or a bare register (only meaningful for barriers).
    fn argument(&mut self) -> Result<Option<usize>> {
        let (line, col) = self.here();
        let name = self.ident()?;
        match &self.reg {
            Some((r, _)) if *r == name => {}
            _ => return Err(Error::Parse { line, col, msg: format!("unknown register `{name}`") }),
        }
        if !self.at_sym('[') {
            return Ok(None);
        }
        self.expect_sym('[')?;
        let idx = self.index()?;
        self.expect_sym(']')?;
        let n = self.reg.as_ref().map_or(0, |r| r.1);
        if idx >= n {
            return Err(Error::QubitOutOfRange { index: idx, num_qubits: n });
        }
        Ok(Some(idx))
    }

    fn arguments(&mut self) -> Result<Vec<Option<usize>>> {
        let mut args = vec![self.argument()?];
        while self.at_sym(',') {
            self.pos += 1;
            args.push(self.argument()?);
        }
        self.expect_sym(';')?;
        Ok(args)
    }
}

/// Parses OpenQASM 2.0 restricted to a single quantum register.
pub fn parse_qasm(text: &str) -> Result<Circuit> {
    let toks = lex(text)?;
    let eof = toks.last().map_or((1, 1), |t| (t.line, t.col + 1));
    let mut p = Parser { toks, pos: 0, eof, reg: None };
    let mut circuit: Option<Circuit> = None;

    if let Some(Token { tok: Tok::Ident(s), .. }) = p.peek() {
        if s == "OPENQASM" {
            p.pos += 1;
            match p.next()?.tok {
                Tok::Number(v) if v == "2.0" || v == "2" => {}
                _ => {
                    p.pos -= 1;
                    return p.fail("only OpenQASM 2.0 is supported");
                }
            }
            p.expect_sym(';')?;
        }
    }

    while let Some(tok) = p.peek().cloned() {
        let line = tok.line;
        let name = match tok.tok {
            Tok::Ident(s) => s,
            _ => return p.fail("expected statement"),
        };
        p.pos += 1;
        match name.as_str() {
            "include" => {
                match p.next()?.tok {
                    Tok::Str(_) => {}
                    _ => {
                        p.pos -= 1;
                        return p.fail("expected file name");
                    }
                }
                p.expect_sym(';')?;
            }
            "qreg" => {
                if p.reg.is_some() {
                    return Err(Error::Parse { line, col: tok.col, msg: "only one qreg is supported".into() });
                }
                let r = p.ident()?;
                p.expect_sym('[')?;
                let n = p.index()?;
                p.expect_sym(']')?;
                p.expect_sym(';')?;
                p.reg = Some((r, n));
                circuit = Some(Circuit::new(n));
            }
            "opaque" => {
                // declarations of opaque single-qubit gates carry no semantics here
                p.ident()?;
                if p.at_sym('(') {
                    p.params()?;
                }
                let mut args = 1;
                p.ident()?;
                while p.at_sym(',') {
                    p.pos += 1;
                    p.ident()?;
                    args += 1;
                }
                p.expect_sym(';')?;
                if args != 1 {
                    return Err(Error::UnsupportedGate { name: "opaque multi-qubit gate".into(), line });
                }
            }
            "barrier" => {
                if p.reg.is_none() {
                    return p.fail("barrier before qreg");
                }
                p.arguments()?;
            }
            "creg" | "measure" | "reset" | "if" | "gate" => {
                return Err(Error::UnsupportedGate { name, line });
            }
            _ => {
                let params = if p.at_sym('(') { Some(p.params()?) } else { None };
                let Some(c) = circuit.as_mut() else {
                    return Err(Error::Parse { line, col: tok.col, msg: "gate before qreg".into() });
                };
                let args = p.arguments()?;
                let mut qubits = Vec::with_capacity(args.len());
                for a in args {
                    match a {
                        Some(q) => qubits.push(q),
                        None => {
                            return Err(Error::Parse {
                                line,
                                col: tok.col,
                                msg: "register broadcast is not supported".into(),
                            })
                        }
                    }
                }
                let kind = gate_kind(&name, params.as_deref(), qubits.len(), line)?;
                c.push(kind, &qubits).map_err(|e| match e {
                    Error::InvalidGate(msg) => Error::Parse { line, col: tok.col, msg },
                    e => e,
                })?;
            }
        }
    }
    circuit.ok_or(Error::Parse { line: eof.0, col: eof.1, msg: "missing qreg declaration".into() })
}

fn gate_kind(name: &str, params: Option<&[String]>, arity: usize, line: usize) -> Result<GateKind> {
    let unsupported = || Error::UnsupportedGate { name: name.to_string(), line };
    let kind = match (name, params) {
        ("h", None) => GateKind::H,
        ("x", None) => GateKind::X,
        ("t", None) => GateKind::T,
        ("tdg", None) => GateKind::Tdg,
        ("s", None) => GateKind::S,
        ("sdg", None) => GateKind::Sdg,
        ("cx" | "CX", None) => GateKind::Cnot,
        ("swap", None) => GateKind::Swap,
        ("rz", Some([angle])) => GateKind::rz(angle),
        ("rz" | "h" | "x" | "t" | "tdg" | "s" | "sdg" | "cx" | "CX" | "swap", _) => return Err(unsupported()),
        (_, None) if arity == 1 => GateKind::u(name),
        (_, Some(ps)) if arity == 1 => GateKind::u(&format!("{name}({})", ps.join(","))),
        _ => return Err(unsupported()),
    };
    if kind.arity() != arity {
        return Err(unsupported());
    }
    Ok(kind)
}

/// Writes the circuit as OpenQASM 2.0. Opaque gates outside `qelib1.inc`
/// get an `opaque` declaration.
pub fn emit_qasm(c: &Circuit) -> String {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let mut opaque = BTreeSet::new();
    for g in c.gates() {
        if let GateKind::U(label) = &g.kind {
            let (name, nparams) = match label.find('(') {
                Some(i) => (&label[..i], label[i..].split(',').count()),
                None => (&label[..], 0),
            };
            if !QELIB_NAMES.contains(&name) {
                opaque.insert((name.to_string(), nparams));
            }
        }
    }
    for (name, nparams) in opaque {
        if nparams == 0 {
            out.push_str(&format!("opaque {name} a;\n"));
        } else {
            let ps: Vec<String> = (0..nparams).map(|i| format!("p{i}")).collect();
            out.push_str(&format!("opaque {name}({}) a;\n", ps.join(",")));
        }
    }
    out.push_str(&format!("qreg q[{}];\n", c.num_qubits));
    for g in c.gates() {
        let q = g.qubits();
        let line = match &g.kind {
            GateKind::H => format!("h q[{}];", q[0]),
            GateKind::X => format!("x q[{}];", q[0]),
            GateKind::T => format!("t q[{}];", q[0]),
            GateKind::Tdg => format!("tdg q[{}];", q[0]),
            GateKind::S => format!("s q[{}];", q[0]),
            GateKind::Sdg => format!("sdg q[{}];", q[0]),
            GateKind::Rz(a) => format!("rz({a}) q[{}];", q[0]),
            GateKind::U(l) => format!("{l} q[{}];", q[0]),
            GateKind::Cnot => format!("cx q[{}],q[{}];", q[0], q[1]),
            GateKind::Swap => format!("swap q[{}],q[{}];", q[0], q[1]),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}
