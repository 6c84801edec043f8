//! Circuit representation in the `{H, Rz, CRz}` gateset, plus a small set of
//! accepted input gates that `rebase` lowers into it.
//!
//! Phases are stored in half-turns (units of pi): `Rz(1)` is Z, `CRz(1)` is CZ.
//! Phase comparisons are made mod 2 half-turns with tolerance [`crate::PHASE_TOL`].

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Gate {
    H { q: usize },
    Rz { q: usize, phase: f64 },
    CRz { q0: usize, q1: usize, phase: f64 },
    X { q: usize },
    Z { q: usize },
    S { q: usize },
    Sdg { q: usize },
    T { q: usize },
    Tdg { q: usize },
    Rx { q: usize, phase: f64 },
    CZ { q0: usize, q1: usize },
    CX { q0: usize, q1: usize },
}

impl Gate {
    /// Qubits the gate acts on, in declaration order.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H { q }
            | Gate::Rz { q, .. }
            | Gate::X { q }
            | Gate::Z { q }
            | Gate::S { q }
            | Gate::Sdg { q }
            | Gate::T { q }
            | Gate::Tdg { q }
            | Gate::Rx { q, .. } => vec![q],
            Gate::CRz { q0, q1, .. } | Gate::CZ { q0, q1 } | Gate::CX { q0, q1 } => {
                vec![q0, q1]
            }
        }
    }

    pub fn is_rebased(&self) -> bool {
        matches!(self, Gate::H { .. } | Gate::Rz { .. } | Gate::CRz { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::H { .. } => "H",
            Gate::Rz { .. } => "Rz",
            Gate::CRz { .. } => "CRz",
            Gate::X { .. } => "X",
            Gate::Z { .. } => "Z",
            Gate::S { .. } => "S",
            Gate::Sdg { .. } => "Sdg",
            Gate::T { .. } => "T",
            Gate::Tdg { .. } => "Tdg",
            Gate::Rx { .. } => "Rx",
            Gate::CZ { .. } => "CZ",
            Gate::CX { .. } => "CX",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub qubits: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(qubits: usize) -> Self {
        Circuit { qubits, gates: Vec::new() }
    }

    pub fn with_gates(qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let c = Circuit { qubits, gates };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.gates {
            let qs = g.qubits();
            for &q in &qs {
                if q >= self.qubits {
                    return Err(Error::InvalidParams(format!(
                        "gate {} addresses qubit {} but circuit has {}",
                        g.name(),
                        q,
                        self.qubits
                    )));
                }
            }
            if qs.len() == 2 && qs[0] == qs[1] {
                return Err(Error::InvalidParams(format!(
                    "two-qubit gate {} addresses the same qubit twice",
                    g.name()
                )));
            }
        }
        Ok(())
    }

    pub fn push(&mut self, g: Gate) {
        self.gates.push(g);
    }

    pub fn is_rebased(&self) -> bool {
        self.gates.iter().all(Gate::is_rebased)
    }

    /// Lower every gate into `{H, Rz, CRz}`. The result is unitarily equal to
    /// the input up to global phase; `H`, `Rz` and `CRz` pass through verbatim.
    pub fn rebase(&self) -> Circuit {
        let mut out = Circuit::new(self.qubits);
        for g in &self.gates {
            match *g {
                Gate::H { .. } | Gate::Rz { .. } | Gate::CRz { .. } => out.push(*g),
                Gate::Z { q } => out.push(Gate::Rz { q, phase: 1.0 }),
                Gate::S { q } => out.push(Gate::Rz { q, phase: 0.5 }),
                Gate::Sdg { q } => out.push(Gate::Rz { q, phase: -0.5 }),
                Gate::T { q } => out.push(Gate::Rz { q, phase: 0.25 }),
                Gate::Tdg { q } => out.push(Gate::Rz { q, phase: -0.25 }),
                Gate::X { q } => {
                    out.push(Gate::H { q });
                    out.push(Gate::Rz { q, phase: 1.0 });
                    out.push(Gate::H { q });
                }
                Gate::Rx { q, phase } => {
                    out.push(Gate::H { q });
                    out.push(Gate::Rz { q, phase });
                    out.push(Gate::H { q });
                }
                Gate::CZ { q0, q1 } => out.push(Gate::CRz { q0, q1, phase: 1.0 }),
                Gate::CX { q0, q1 } => {
                    out.push(Gate::H { q: q1 });
                    out.push(Gate::CRz { q0, q1, phase: 1.0 });
                    out.push(Gate::H { q: q1 });
                }
            }
        }
        out
    }

    /// Indices of the gates acting on qubit `q`, in circuit order.
    pub fn timeline(&self, q: usize) -> Vec<usize> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| g.qubits().contains(&q))
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices of `CRz` gates, in circuit order.
    pub fn crz_positions(&self) -> Vec<usize> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| matches!(g, Gate::CRz { .. }))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn crz_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::CRz { .. })).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Circuit = serde_json::from_str(s).map_err(|e| match classify_unknown_kind(s, &e) {
            Some(kind) => Error::UnsupportedGate(kind),
            None => Error::Json(e),
        })?;
        c.validate()?;
        Ok(c)
    }
}

fn classify_unknown_kind(_s: &str, e: &serde_json::Error) -> Option<String> {
    let msg = e.to_string();
    msg.strip_prefix("unknown variant `")
        .and_then(|rest| rest.split('`').next())
        .map(|k| k.to_string())
}

// --- minimal OpenQASM 2 reader -------------------------------------------

/// Parse a minimal OpenQASM 2 program. Supported statements: `OPENQASM`,
/// `include`, `qreg`, `creg` (ignored), `barrier` (ignored) and applications
/// of `h, x, z, s, sdg, t, tdg, rz, rx, cz, cx, crz`. Angle expressions may
/// use numbers, `pi`, parentheses and `+ - * /`; angles are radians and are
/// converted to half-turns.
pub fn parse_qasm(src: &str) -> Result<Circuit> {
    let mut regs: Vec<(String, usize)> = Vec::new();
    let mut gates: Vec<Gate> = Vec::new();

    let cleaned: String = src
        .lines()
        .map(|l| match l.find("//") {
            Some(i) => &l[..i],
            None => l,
        })
        .collect::<Vec<_>>()
        .join("\n");

    let offset = |regs: &[(String, usize)], name: &str, idx: usize| -> Result<usize> {
        let mut base = 0usize;
        for (rname, size) in regs {
            if rname == name {
                if idx >= *size {
                    return Err(Error::Parse(format!("index {idx} out of range for qreg {name}")));
                }
                return Ok(base + idx);
            }
            base += size;
        }
        Err(Error::Parse(format!("unknown qreg {name}")))
    };

    for stmt in cleaned.split(';') {
        let stmt = stmt.trim();
        if stmt.is_empty() {
            continue;
        }
        let lower = stmt.to_ascii_lowercase();
        if lower.starts_with("openqasm") || lower.starts_with("include") {
            continue;
        }
        if lower.starts_with("creg") || lower.starts_with("barrier") {
            continue;
        }
        if lower.starts_with("measure") || lower.starts_with("reset") || lower.starts_with("if") {
            return Err(Error::UnsupportedGate(stmt.split_whitespace().next().unwrap().into()));
        }
        if let Some(rest) = stmt.strip_prefix("qreg") {
            let rest = rest.trim();
            let (name, size) = parse_reg_decl(rest)?;
            regs.push((name, size));
            continue;
        }
        // gate application: name[(args)] operand[, operand]
        let (head, operands) = match stmt.find(|c: char| c.is_whitespace()) {
            Some(i) => (&stmt[..i], stmt[i..].trim()),
            None => return Err(Error::Parse(format!("malformed statement: {stmt}"))),
        };
        let (gname, angle) = match head.find('(') {
            Some(i) => {
                let close = head.rfind(')').ok_or_else(|| Error::Parse(format!("unbalanced parens: {head}")))?;
                (&head[..i], Some(parse_angle(&head[i + 1..close])?))
            }
            None => (head, None),
        };
        let ops: Vec<&str> = operands.split(',').map(str::trim).collect();
        let mut qubits: Vec<Vec<usize>> = Vec::new();
        for op in &ops {
            qubits.push(resolve_operand(&regs, op, &offset)?);
        }
        // broadcast un-indexed registers over their width
        let width = qubits.iter().map(Vec::len).max().unwrap_or(1);
        for w in 0..width {
            let pick = |k: usize| -> usize {
                let v = &qubits[k];
                if v.len() == 1 { v[0] } else { v[w] }
            };
            let half_turns = angle.map(|a| a / std::f64::consts::PI);
            let g = match gname.to_ascii_lowercase().as_str() {
                "h" => Gate::H { q: pick(0) },
                "x" => Gate::X { q: pick(0) },
                "z" => Gate::Z { q: pick(0) },
                "s" => Gate::S { q: pick(0) },
                "sdg" => Gate::Sdg { q: pick(0) },
                "t" => Gate::T { q: pick(0) },
                "tdg" => Gate::Tdg { q: pick(0) },
                "rz" => Gate::Rz { q: pick(0), phase: half_turns.ok_or_else(|| Error::Parse("rz needs an angle".into()))? },
                "rx" => Gate::Rx { q: pick(0), phase: half_turns.ok_or_else(|| Error::Parse("rx needs an angle".into()))? },
                "cz" => Gate::CZ { q0: pick(0), q1: pick(1) },
                "cx" => Gate::CX { q0: pick(0), q1: pick(1) },
                "crz" => Gate::CRz { q0: pick(0), q1: pick(1), phase: half_turns.ok_or_else(|| Error::Parse("crz needs an angle".into()))? },
                other => return Err(Error::UnsupportedGate(other.into())),
            };
            gates.push(g);
        }
    }

    let total: usize = regs.iter().map(|(_, s)| s).sum();
    Circuit::with_gates(total, gates)
}

fn parse_reg_decl(s: &str) -> Result<(String, usize)> {
    let open = s.find('[').ok_or_else(|| Error::Parse(format!("malformed qreg: {s}")))?;
    let close = s.find(']').ok_or_else(|| Error::Parse(format!("malformed qreg: {s}")))?;
    let name = s[..open].trim().to_string();
    let size: usize = s[open + 1..close]
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad register size in: {s}")))?;
    Ok((name, size))
}

fn resolve_operand(
    regs: &[(String, usize)],
    op: &str,
    offset: &dyn Fn(&[(String, usize)], &str, usize) -> Result<usize>,
) -> Result<Vec<usize>> {
    if let Some(open) = op.find('[') {
        let close = op.find(']').ok_or_else(|| Error::Parse(format!("malformed operand: {op}")))?;
        let name = op[..open].trim();
        let idx: usize = op[open + 1..close]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad index in operand: {op}")))?;
        Ok(vec![offset(regs, name, idx)?])
    } else {
        let name = op.trim();
        for (rname, size) in regs {
            if rname == name {
                let base = offset(regs, name, 0)?;
                return Ok((base..base + size).collect());
            }
        }
        Err(Error::Parse(format!("unknown qreg {name}")))
    }
}

/// Tiny expression parser for QASM angles: numbers, `pi`, `+ - * /`, parentheses.
pub fn parse_angle(s: &str) -> Result<f64> {
    let tokens = tokenize_angle(s)?;
    let mut pos = 0usize;
    let v = parse_sum(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(Error::Parse(format!("trailing tokens in angle: {s}")));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Pi,
    Plus,
    Minus,
    Star,
    Slash,
    Open,
    Close,
}

fn tokenize_angle(s: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' => i += 1,
            '+' => { out.push(Tok::Plus); i += 1 }
            '-' => { out.push(Tok::Minus); i += 1 }
            '*' => { out.push(Tok::Star); i += 1 }
            '/' => { out.push(Tok::Slash); i += 1 }
            '(' => { out.push(Tok::Open); i += 1 }
            ')' => { out.push(Tok::Close); i += 1 }
            'p' | 'P' => {
                if s[i..].len() >= 2 && s[i..i + 2].eq_ignore_ascii_case("pi") {
                    out.push(Tok::Pi);
                    i += 2;
                } else {
                    return Err(Error::Parse(format!("bad angle token at '{}'", &s[i..])));
                }
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' {
                        i += 1;
                    } else if (d == '+' || d == '-') && i > start && matches!(bytes[i - 1] as char, 'e' | 'E') {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let v: f64 = s[start..i].parse().map_err(|_| Error::Parse(format!("bad number: {}", &s[start..i])))?;
                out.push(Tok::Num(v));
            }
            _ => return Err(Error::Parse(format!("bad angle token at '{}'", &s[i..]))),
        }
    }
    Ok(out)
}

fn parse_sum(t: &[Tok], pos: &mut usize) -> Result<f64> {
    let mut v = parse_product(t, pos)?;
    while *pos < t.len() {
        match t[*pos] {
            Tok::Plus => { *pos += 1; v += parse_product(t, pos)? }
            Tok::Minus => { *pos += 1; v -= parse_product(t, pos)? }
            _ => break,
        }
    }
    Ok(v)
}

fn parse_product(t: &[Tok], pos: &mut usize) -> Result<f64> {
    let mut v = parse_atom(t, pos)?;
    while *pos < t.len() {
        match t[*pos] {
            Tok::Star => { *pos += 1; v *= parse_atom(t, pos)? }
            Tok::Slash => { *pos += 1; v /= parse_atom(t, pos)? }
            _ => break,
        }
    }
    Ok(v)
}

fn parse_atom(t: &[Tok], pos: &mut usize) -> Result<f64> {
    if *pos >= t.len() {
        return Err(Error::Parse("unexpected end of angle expression".into()));
    }
    match t[*pos] {
        Tok::Num(v) => { *pos += 1; Ok(v) }
        Tok::Pi => { *pos += 1; Ok(std::f64::consts::PI) }
        Tok::Minus => { *pos += 1; Ok(-parse_atom(t, pos)?) }
        Tok::Plus => { *pos += 1; parse_atom(t, pos) }
        Tok::Open => {
            *pos += 1;
            let v = parse_sum(t, pos)?;
            if *pos >= t.len() || t[*pos] != Tok::Close {
                return Err(Error::Parse("unbalanced parentheses in angle".into()));
            }
            *pos += 1;
            Ok(v)
        }
        _ => Err(Error::Parse("unexpected token in angle".into())),
    }
}

/// Write a rebased circuit as OpenQASM 2. Fails on non-rebased gates.
pub fn write_qasm(c: &Circuit) -> Result<String> {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    out.push_str(&format!("qreg q[{}];\n", c.qubits));
    for g in &c.gates {
        match *g {
            Gate::H { q } => out.push_str(&format!("h q[{q}];\n")),
            Gate::Rz { q, phase } => out.push_str(&format!("rz({phase:?}*pi) q[{q}];\n")),
            Gate::CRz { q0, q1, phase } => {
                out.push_str(&format!("crz({phase:?}*pi) q[{q0}],q[{q1}];\n"))
            }
            other => return Err(Error::NotRebased(other.name().into())),
        }
    }
    Ok(out)
}
