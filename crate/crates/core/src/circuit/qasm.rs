//! OpenQASM 2.0 subset reader that keeps only the CNOT structure.
//!
//! Registers are flattened in declaration order. Single-qubit gates, barriers,
//! measurements and resets are dropped. `cx`/`CX` statements are kept in program
//! order, user `gate` definitions are inlined, and the two- and three-qubit
//! gates of the standard library are replaced by their CNOT skeletons.

use std::collections::HashMap;

use thiserror::Error;

use super::{CircuitError, LogicalCircuit};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QasmError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: CircuitError,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Sym(char),
    Arrow,
    EqEq,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, QasmError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let src = match raw.find("//") {
            Some(p) => &raw[..p],
            None => raw,
        };
        let chars: Vec<char> = src.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line });
            } else if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || chars[i] == '_')
                {
                    // exponent sign, e.g. 1e-3
                    i += 1;
                    if i < chars.len()
                        && (chars[i] == '-' || chars[i] == '+')
                        && matches!(chars[i - 1], 'e' | 'E')
                    {
                        i += 1;
                    }
                }
                out.push(Token { tok: Tok::Number(chars[start..i].iter().collect()), line });
            } else if c == '"' {
                let start = i + 1;
                i += 1;
                while i < chars.len() && chars[i] != '"' {
                    i += 1;
                }
                if i == chars.len() {
                    return Err(QasmError::Parse { line, message: "unterminated string".into() });
                }
                out.push(Token { tok: Tok::Str(chars[start..i].iter().collect()), line });
                i += 1;
            } else if c == '-' && chars.get(i + 1) == Some(&'>') {
                out.push(Token { tok: Tok::Arrow, line });
                i += 2;
            } else if c == '=' && chars.get(i + 1) == Some(&'=') {
                out.push(Token { tok: Tok::EqEq, line });
                i += 2;
            } else if "()[]{},;+-*/^".contains(c) {
                out.push(Token { tok: Tok::Sym(c), line });
                i += 1;
            } else {
                return Err(QasmError::Parse { line, message: format!("unexpected character {c:?}") });
            }
        }
    }
    Ok(out)
}

/// Operand of a gate application: a whole register or one indexed qubit.
#[derive(Debug, Clone, PartialEq)]
enum Operand {
    Register(String),
    Indexed(String, usize),
}

#[derive(Debug, Clone)]
struct Application {
    name: String,
    operands: Vec<String>,
}

#[derive(Debug, Clone)]
struct GateDef {
    params: Vec<String>,
    body: Vec<Application>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    last_line: usize,
}

impl Parser {
    fn line(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.line).unwrap_or(self.last_line)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, QasmError> {
        Err(QasmError::Parse { line: self.line(), message: message.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect_sym(&mut self, c: char) -> Result<(), QasmError> {
        match self.peek() {
            Some(Tok::Sym(s)) if *s == c => {
                self.pos += 1;
                Ok(())
            }
            other => {
                let found = format!("{other:?}");
                self.err(format!("expected '{c}', found {found}"))
            }
        }
    }

    fn ident(&mut self) -> Result<String, QasmError> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            other => {
                self.pos = self.pos.saturating_sub(1);
                self.err(format!("expected identifier, found {other:?}"))
            }
        }
    }

    fn usize_lit(&mut self) -> Result<usize, QasmError> {
        match self.next() {
            Some(Tok::Number(s)) => match s.parse() {
                Ok(v) => Ok(v),
                Err(_) => {
                    self.pos -= 1;
                    self.err(format!("expected integer, found {s}"))
                }
            },
            other => {
                self.pos = self.pos.saturating_sub(1);
                self.err(format!("expected integer, found {other:?}"))
            }
        }
    }

    fn is_sym(&self, c: char) -> bool {
        matches!(self.peek(), Some(Tok::Sym(s)) if *s == c)
    }

    /// Skips a balanced parenthesised group starting at '('.
    fn skip_parens(&mut self) -> Result<(), QasmError> {
        self.expect_sym('(')?;
        let mut depth = 1;
        while depth > 0 {
            match self.next() {
                Some(Tok::Sym('(')) => depth += 1,
                Some(Tok::Sym(')')) => depth -= 1,
                Some(Tok::Sym(';')) | None => return self.err("unbalanced parentheses"),
                _ => {}
            }
        }
        Ok(())
    }

    fn skip_to_semicolon(&mut self) -> Result<(), QasmError> {
        loop {
            match self.next() {
                Some(Tok::Sym(';')) => return Ok(()),
                Some(_) => {}
                None => return self.err("missing ';'"),
            }
        }
    }

    fn operand(&mut self) -> Result<Operand, QasmError> {
        let name = self.ident()?;
        if self.is_sym('[') {
            self.pos += 1;
            let idx = self.usize_lit()?;
            self.expect_sym(']')?;
            Ok(Operand::Indexed(name, idx))
        } else {
            Ok(Operand::Register(name))
        }
    }

    fn operand_list(&mut self) -> Result<Vec<Operand>, QasmError> {
        let mut ops = vec![self.operand()?];
        while self.is_sym(',') {
            self.pos += 1;
            ops.push(self.operand()?);
        }
        Ok(ops)
    }
}

/// CNOT skeletons (operand positions) of the standard-library gates.
fn builtin_skeleton(name: &str) -> Option<&'static [(usize, usize)]> {
    Some(match name {
        "cx" | "CX" | "cz" | "cy" => &[(0, 1)],
        "swap" => &[(0, 1), (1, 0), (0, 1)],
        "ch" | "crz" | "crx" | "cry" | "cu1" | "cp" | "cu3" | "cu" | "rzz" | "rxx" => {
            &[(0, 1), (0, 1)]
        }
        "ccx" => &[(1, 2), (0, 2), (1, 2), (0, 2), (0, 1), (0, 1)],
        "cswap" => &[(2, 1), (1, 2), (0, 2), (1, 2), (0, 2), (0, 1), (0, 1), (2, 1)],
        _ => return None,
    })
}

const IGNORED_MULTI: &[&str] = &["barrier", "measure", "reset"];

struct Program {
    registers: Vec<(String, usize, usize)>, // name, offset, size
    defs: HashMap<String, GateDef>,
    pairs: Vec<(usize, usize, usize)>, // control, target, line
}

impl Program {
    fn register(&self, name: &str) -> Option<(usize, usize)> {
        self.registers.iter().find(|r| r.0 == name).map(|r| (r.1, r.2))
    }

    fn n(&self) -> usize {
        self.registers.iter().map(|r| r.2).sum()
    }

    /// Expands a named gate on concrete qubits into CNOT pairs.
    fn expand(
        &self,
        name: &str,
        qubits: &[usize],
        line: usize,
        depth: usize,
        out: &mut Vec<(usize, usize, usize)>,
    ) -> Result<(), QasmError> {
        if depth > 64 {
            return Err(QasmError::Parse { line, message: "gate definitions nest too deeply".into() });
        }
        if let Some(def) = self.defs.get(name) {
            if def.params.len() != qubits.len() {
                return Err(QasmError::Parse {
                    line,
                    message: format!(
                        "gate {name} takes {} qubits, got {}",
                        def.params.len(),
                        qubits.len()
                    ),
                });
            }
            for app in &def.body {
                let mut mapped = Vec::with_capacity(app.operands.len());
                for arg in &app.operands {
                    match def.params.iter().position(|p| p == arg) {
                        Some(i) => mapped.push(qubits[i]),
                        None => {
                            return Err(QasmError::Parse {
                                line,
                                message: format!("unknown argument {arg} in gate {name}"),
                            })
                        }
                    }
                }
                self.expand(&app.name, &mapped, line, depth + 1, out)?;
            }
            return Ok(());
        }
        if let Some(skel) = builtin_skeleton(name) {
            let arity = skel.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
            if qubits.len() != arity {
                return Err(QasmError::Parse {
                    line,
                    message: format!("{name} takes {arity} qubits, got {}", qubits.len()),
                });
            }
            for &(a, b) in skel {
                out.push((qubits[a], qubits[b], line));
            }
            return Ok(());
        }
        if qubits.len() >= 2 && !IGNORED_MULTI.contains(&name) {
            return Err(QasmError::Parse {
                line,
                message: format!("unsupported multi-qubit gate {name}"),
            });
        }
        Ok(())
    }

    /// Resolves operands with register broadcasting into per-application qubit lists.
    fn broadcast(&self, ops: &[Operand], line: usize) -> Result<Vec<Vec<usize>>, QasmError> {
        let mut width: Option<usize> = None;
        let mut resolved = Vec::new();
        for op in ops {
            match op {
                Operand::Indexed(name, idx) => {
                    let (off, size) = self.register(name).ok_or_else(|| QasmError::Parse {
                        line,
                        message: format!("unknown quantum register {name}"),
                    })?;
                    if *idx >= size {
                        return Err(QasmError::Invalid {
                            line,
                            source: CircuitError::QubitOutOfRange {
                                gate: self.pairs.len(),
                                qubit: *idx,
                                n: size,
                            },
                        });
                    }
                    resolved.push((off + idx, None));
                }
                Operand::Register(name) => {
                    let (off, size) = self.register(name).ok_or_else(|| QasmError::Parse {
                        line,
                        message: format!("unknown quantum register {name}"),
                    })?;
                    if let Some(w) = width {
                        if w != size {
                            return Err(QasmError::Parse {
                                line,
                                message: "register sizes differ in broadcast".into(),
                            });
                        }
                    }
                    width = Some(size);
                    resolved.push((off, Some(size)));
                }
            }
        }
        let reps = width.unwrap_or(1);
        Ok((0..reps)
            .map(|k| {
                resolved
                    .iter()
                    .map(|&(base, whole)| if whole.is_some() { base + k } else { base })
                    .collect()
            })
            .collect())
    }
}

pub fn parse_qasm(text: &str) -> Result<LogicalCircuit, QasmError> {
    let toks = lex(text)?;
    let last_line = toks.last().map(|t| t.line).unwrap_or(1);
    let mut p = Parser { toks, pos: 0, last_line };
    let mut prog = Program { registers: Vec::new(), defs: HashMap::new(), pairs: Vec::new() };

    while let Some(tok) = p.peek().cloned() {
        let line = p.line();
        let word = match tok {
            Tok::Ident(w) => w,
            Tok::Sym(';') => {
                p.pos += 1;
                continue;
            }
            other => return p.err(format!("unexpected token {other:?}")),
        };
        match word.as_str() {
            "OPENQASM" | "include" | "creg" | "opaque" => {
                p.pos += 1;
                p.skip_to_semicolon()?;
            }
            "qreg" => {
                p.pos += 1;
                let name = p.ident()?;
                p.expect_sym('[')?;
                let size = p.usize_lit()?;
                p.expect_sym(']')?;
                p.expect_sym(';')?;
                if prog.register(&name).is_some() {
                    return Err(QasmError::Parse { line, message: format!("register {name} redeclared") });
                }
                let off = prog.n();
                prog.registers.push((name, off, size));
            }
            "gate" => {
                p.pos += 1;
                let name = p.ident()?;
                if p.is_sym('(') {
                    p.skip_parens()?;
                }
                let mut params = vec![p.ident()?];
                while p.is_sym(',') {
                    p.pos += 1;
                    params.push(p.ident()?);
                }
                p.expect_sym('{')?;
                let mut body = Vec::new();
                while !p.is_sym('}') {
                    if p.peek().is_none() {
                        return p.err("unterminated gate body");
                    }
                    let op = p.ident()?;
                    if p.is_sym('(') {
                        p.skip_parens()?;
                    }
                    let mut operands = vec![p.ident()?];
                    while p.is_sym(',') {
                        p.pos += 1;
                        operands.push(p.ident()?);
                    }
                    p.expect_sym(';')?;
                    body.push(Application { name: op, operands });
                }
                p.pos += 1;
                prog.defs.insert(name, GateDef { params, body });
            }
            "if" => {
                // Conditioned operations keep their CNOT structure.
                p.pos += 1;
                p.skip_parens()?;
            }
            "measure" => {
                p.pos += 1;
                p.operand()?;
                if p.peek() != Some(&Tok::Arrow) {
                    return p.err("expected '->' in measure");
                }
                p.skip_to_semicolon()?;
            }
            _ => {
                p.pos += 1;
                if p.is_sym('(') {
                    p.skip_parens()?;
                }
                let ops = p.operand_list()?;
                p.expect_sym(';')?;
                for qubits in prog.broadcast(&ops, line)? {
                    let mut pairs = Vec::new();
                    prog.expand(&word, &qubits, line, 0, &mut pairs)?;
                    prog.pairs.extend(pairs);
                }
            }
        }
    }

    let n = prog.n();
    for (id, &(c, t, line)) in prog.pairs.iter().enumerate() {
        if c == t {
            return Err(QasmError::Invalid { line, source: CircuitError::SelfLoop { gate: id, qubit: c } });
        }
    }
    LogicalCircuit::new(n, prog.pairs.iter().map(|&(c, t, _)| (c, t)))
        .map_err(|source| QasmError::Invalid { line: 0, source })
}
