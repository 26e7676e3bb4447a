//! Recursive-descent parser for the qasm subset.

use std::f64::consts::PI;

use super::{Circuit, CircuitError, Gate, Instruction, Param};

/// Upper bound on register sizes accepted from text.
const MAX_REGISTER: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64, bool),
    Str(String),
    Semi,
    Comma,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Slash,
    Arrow,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn syntax(line: usize, col: usize, message: impl Into<String>) -> CircuitError {
    CircuitError::Syntax {
        line,
        col,
        message: message.into(),
    }
}

fn advance(n: usize, i: &mut usize, col: &mut usize) {
    *i += n;
    *col += n;
}

fn lex(src: &str) -> Result<Vec<Token>, CircuitError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => advance(1, &mut i, &mut col),
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
                        None => return Err(syntax(tl, tc, "unterminated block comment")),
                        Some('*') if chars.get(i + 1) == Some(&'/') => {
                            i += 2;
                            col += 2;
                            break;
                        }
                        Some('\n') => {
                            i += 1;
                            line += 1;
                            col = 1;
                        }
                        Some(_) => {
                            i += 1;
                            col += 1;
                        }
                    }
                }
            }
            ';' | ',' | '[' | ']' | '(' | ')' | '+' | '*' | '/' => {
                let tok = match c {
                    ';' => Tok::Semi,
                    ',' => Tok::Comma,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '+' => Tok::Plus,
                    '*' => Tok::Star,
                    _ => Tok::Slash,
                };
                out.push(Token { tok, line: tl, col: tc });
                advance(1, &mut i, &mut col);
            }
            '-' => {
                if chars.get(i + 1) == Some(&'>') {
                    out.push(Token { tok: Tok::Arrow, line: tl, col: tc });
                    advance(2, &mut i, &mut col);
                } else {
                    out.push(Token { tok: Tok::Minus, line: tl, col: tc });
                    advance(1, &mut i, &mut col);
                }
            }
            '"' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                    j += 1;
                }
                if chars.get(j) != Some(&'"') {
                    return Err(syntax(tl, tc, "unterminated string"));
                }
                let s: String = chars[start..j].iter().collect();
                out.push(Token { tok: Tok::Str(s), line: tl, col: tc });
                let n = j + 1 - i;
                advance(n, &mut i, &mut col);
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                let mut j = i;
                let mut is_int = true;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if chars.get(j) == Some(&'.') {
                    is_int = false;
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if matches!(chars.get(j), Some('e') | Some('E')) {
                    let mut k = j + 1;
                    if matches!(chars.get(k), Some('+') | Some('-')) {
                        k += 1;
                    }
                    if chars.get(k).is_some_and(|c| c.is_ascii_digit()) {
                        is_int = false;
                        j = k;
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let text: String = chars[start..j].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| syntax(tl, tc, format!("malformed number `{text}`")))?;
                if !value.is_finite() {
                    return Err(syntax(tl, tc, format!("number `{text}` is not finite")));
                }
                out.push(Token {
                    tok: Tok::Number(value, is_int),
                    line: tl,
                    col: tc,
                });
                advance(j - start, &mut i, &mut col);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let s: String = chars[start..j].iter().collect();
                out.push(Token { tok: Tok::Ident(s), line: tl, col: tc });
                advance(j - start, &mut i, &mut col);
            }
            other => return Err(syntax(tl, tc, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

/// `coef * symbol + constant`, the only shape a parameter expression may take.
#[derive(Debug, Clone)]
struct Linear {
    symbol: Option<String>,
    constant: f64,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    qreg: Option<(String, usize)>,
    creg: Option<(String, usize)>,
    circuit: Circuit,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, message: impl Into<String>) -> CircuitError {
        let t = self.peek();
        syntax(t.line, t.col, message)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, CircuitError> {
        if self.peek().tok == want {
            Ok(self.next())
        } else {
            Err(self.err_here(format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Token), CircuitError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                Ok((s, self.next()))
            }
            _ => Err(self.err_here(format!("expected {what}"))),
        }
    }

    fn integer(&mut self) -> Result<usize, CircuitError> {
        let t = self.next();
        match t.tok {
            Tok::Number(v, true) if v <= (u32::MAX as f64) => Ok(v as usize),
            _ => Err(syntax(t.line, t.col, "expected integer index")),
        }
    }

    fn program(mut self) -> Result<Circuit, CircuitError> {
        if matches!(&self.peek().tok, Tok::Ident(s) if s == "OPENQASM") {
            self.next();
            match self.next().tok {
                Tok::Number(..) => {}
                _ => return Err(self.err_here("expected version number")),
            }
            self.expect(Tok::Semi, "`;`")?;
        }
        while self.peek().tok != Tok::Eof {
            self.statement()?;
        }
        Ok(self.circuit)
    }

    fn statement(&mut self) -> Result<(), CircuitError> {
        let (word, tok) = self.ident("statement")?;
        match word.as_str() {
            "include" => {
                match self.next().tok {
                    Tok::Str(_) => {}
                    _ => return Err(syntax(tok.line, tok.col, "include expects a string")),
                }
                self.expect(Tok::Semi, "`;`")?;
            }
            "qreg" | "creg" => self.register(&word, &tok)?,
            "input" => self.input()?,
            "measure" => self.measure(&tok)?,
            "OPENQASM" => {
                return Err(syntax(tok.line, tok.col, "OPENQASM header must come first"));
            }
            name => self.gate(name, &tok)?,
        }
        Ok(())
    }

    fn register(&mut self, kind: &str, at: &Token) -> Result<(), CircuitError> {
        let (name, _) = self.ident("register name")?;
        self.expect(Tok::LBracket, "`[`")?;
        let size = self.integer()?;
        self.expect(Tok::RBracket, "`]`")?;
        self.expect(Tok::Semi, "`;`")?;
        if size > MAX_REGISTER {
            return Err(semantic_at(at, format!("register size {size} exceeds {MAX_REGISTER}")));
        }
        let slot = if kind == "qreg" { &mut self.qreg } else { &mut self.creg };
        if slot.is_some() {
            return Err(semantic_at(at, format!("only one {kind} is supported")));
        }
        if self.qreg.as_ref().is_some_and(|(n, _)| *n == name)
            || self.creg.as_ref().is_some_and(|(n, _)| *n == name)
        {
            return Err(semantic_at(at, format!("register `{name}` already declared")));
        }
        if kind == "qreg" {
            self.qreg = Some((name, size));
            self.circuit.num_qubits = size;
        } else {
            self.creg = Some((name, size));
            self.circuit.num_clbits = size;
        }
        Ok(())
    }

    fn input(&mut self) -> Result<(), CircuitError> {
        let (ty, t) = self.ident("type")?;
        if ty != "float" && ty != "angle" {
            return Err(syntax(t.line, t.col, format!("unsupported input type `{ty}`")));
        }
        if self.peek().tok == Tok::LBracket {
            self.next();
            self.integer()?;
            self.expect(Tok::RBracket, "`]`")?;
        }
        let (name, nt) = self.ident("parameter name")?;
        if name == "pi" || Gate::from_name(&name).is_some() {
            return Err(semantic_at(&nt, format!("`{name}` is reserved")));
        }
        self.expect(Tok::Semi, "`;`")?;
        if !self.circuit.symbols.insert(name.clone()) {
            return Err(semantic_at(&nt, format!("parameter `{name}` declared twice")));
        }
        Ok(())
    }

    /// Parses `reg` or `reg[i]` and resolves it against the declared register.
    fn operand(&mut self, quantum: bool) -> Result<(Vec<usize>, Token), CircuitError> {
        let (name, t) = self.ident("register operand")?;
        let reg = if quantum { &self.qreg } else { &self.creg };
        let (reg_name, size) = match reg {
            Some((n, s)) => (n.clone(), *s),
            None => {
                let kind = if quantum { "qreg" } else { "creg" };
                return Err(semantic_at(&t, format!("no {kind} declared before use")));
            }
        };
        if name != reg_name {
            return Err(semantic_at(&t, format!("unknown register `{name}`")));
        }
        if self.peek().tok == Tok::LBracket {
            self.next();
            let idx = self.integer()?;
            self.expect(Tok::RBracket, "`]`")?;
            if idx >= size {
                return Err(semantic_at(
                    &t,
                    format!("index {idx} out of range for `{name}[{size}]`"),
                ));
            }
            Ok((vec![idx], t))
        } else {
            Ok(((0..size).collect(), t))
        }
    }

    fn measure(&mut self, at: &Token) -> Result<(), CircuitError> {
        let (qs, _) = self.operand(true)?;
        self.expect(Tok::Arrow, "`->`")?;
        let (cs, _) = self.operand(false)?;
        self.expect(Tok::Semi, "`;`")?;
        if qs.len() != cs.len() {
            return Err(semantic_at(at, "measure operands differ in size"));
        }
        for (q, c) in qs.into_iter().zip(cs) {
            self.circuit.instructions.push(Instruction::measure(q, c));
        }
        Ok(())
    }

    fn gate(&mut self, name: &str, at: &Token) -> Result<(), CircuitError> {
        let gate = Gate::from_name(name)
            .filter(|g| *g != Gate::Measure)
            .ok_or_else(|| semantic_at(at, format!("unknown gate `{name}`")))?;
        let mut params = Vec::new();
        if self.peek().tok == Tok::LParen {
            self.next();
            if self.peek().tok != Tok::RParen {
                loop {
                    params.push(self.param()?);
                    if self.peek().tok == Tok::Comma {
                        self.next();
                    } else {
                        break;
                    }
                }
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        let mut operands = Vec::new();
        loop {
            operands.push(self.operand(true)?.0);
            if self.peek().tok == Tok::Comma {
                self.next();
            } else {
                break;
            }
        }
        self.expect(Tok::Semi, "`;`")?;

        let want = usize::from(gate.is_rotation());
        if params.len() != want {
            return Err(semantic_at(
                at,
                format!("gate `{name}` expects {want} parameter(s), got {}", params.len()),
            ));
        }

        if gate == Gate::Barrier {
            let mut qubits: Vec<usize> = operands.into_iter().flatten().collect();
            let mut seen = std::collections::BTreeSet::new();
            qubits.retain(|q| seen.insert(*q));
            self.circuit.instructions.push(Instruction::new(gate, qubits));
            return Ok(());
        }

        let arity = gate.arity().unwrap_or(1);
        if operands.len() != arity {
            return Err(semantic_at(
                at,
                format!("gate `{name}` expects {arity} operand(s), got {}", operands.len()),
            ));
        }
        // Register-wide operands broadcast; all broadcast operands must agree in size.
        let width = operands.iter().map(Vec::len).max().unwrap_or(0);
        if operands.iter().any(|o| o.len() != 1 && o.len() != width) {
            return Err(semantic_at(at, "operand sizes do not match"));
        }
        for k in 0..width {
            let qubits: Vec<usize> = operands
                .iter()
                .map(|o| if o.len() == 1 { o[0] } else { o[k] })
                .collect();
            if arity == 2 && qubits[0] == qubits[1] {
                return Err(semantic_at(at, format!("gate `{name}` needs two distinct qubits")));
            }
            self.circuit.instructions.push(Instruction {
                gate,
                qubits,
                params: params.clone(),
                clbits: Vec::new(),
            });
        }
        Ok(())
    }

    fn param(&mut self) -> Result<Param, CircuitError> {
        let start = self.peek().clone();
        let lin = self.sum()?;
        match lin.symbol {
            None => Ok(Param::Literal(lin.constant)),
            Some(symbol) => {
                if !self.circuit.symbols.contains(&symbol) {
                    return Err(semantic_at(&start, format!("undeclared parameter `{symbol}`")));
                }
                Ok(Param::Symbol {
                    symbol,
                    offset: lin.constant,
                })
            }
        }
    }

    fn sum(&mut self) -> Result<Linear, CircuitError> {
        let mut acc = self.product()?;
        loop {
            let op = self.peek().clone();
            let sign = match op.tok {
                Tok::Plus => 1.0,
                Tok::Minus => -1.0,
                _ => return Ok(acc),
            };
            self.next();
            let rhs = self.product()?;
            if rhs.symbol.is_some() && (sign < 0.0 || acc.symbol.is_some()) {
                return Err(unsupported(&op));
            }
            acc = Linear {
                symbol: acc.symbol.or(rhs.symbol),
                constant: acc.constant + sign * rhs.constant,
            };
        }
    }

    fn product(&mut self) -> Result<Linear, CircuitError> {
        let mut acc = self.factor()?;
        loop {
            let op = self.peek().clone();
            let div = match op.tok {
                Tok::Star => false,
                Tok::Slash => true,
                _ => return Ok(acc),
            };
            self.next();
            let rhs = self.factor()?;
            if acc.symbol.is_some() || rhs.symbol.is_some() {
                return Err(unsupported(&op));
            }
            let v = if div {
                if rhs.constant == 0.0 {
                    return Err(semantic_at(&op, "division by zero"));
                }
                acc.constant / rhs.constant
            } else {
                acc.constant * rhs.constant
            };
            if !v.is_finite() {
                return Err(semantic_at(&op, "parameter value is not finite"));
            }
            acc = Linear { symbol: None, constant: v };
        }
    }

    fn factor(&mut self) -> Result<Linear, CircuitError> {
        let t = self.next();
        match t.tok {
            Tok::Number(v, _) => Ok(Linear { symbol: None, constant: v }),
            Tok::Minus => {
                let inner = self.factor()?;
                if inner.symbol.is_some() {
                    return Err(unsupported(&t));
                }
                Ok(Linear {
                    symbol: None,
                    constant: -inner.constant,
                })
            }
            Tok::LParen => {
                let inner = self.sum()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(ref s) if s == "pi" => Ok(Linear {
                symbol: None,
                constant: PI,
            }),
            Tok::Ident(s) => Ok(Linear {
                symbol: Some(s),
                constant: 0.0,
            }),
            _ => Err(syntax(t.line, t.col, "expected parameter expression")),
        }
    }
}

fn semantic_at(t: &Token, message: impl Into<String>) -> CircuitError {
    CircuitError::Semantic {
        line: t.line,
        col: t.col,
        message: message.into(),
    }
}

fn unsupported(t: &Token) -> CircuitError {
    semantic_at(
        t,
        "unsupported parameter expression (allowed: literal, symbol, symbol ± literal)",
    )
}

/// Parses qasm-subset text into a validated [`Circuit`].
pub fn parse(text: &str) -> Result<Circuit, CircuitError> {
    let toks = lex(text)?;
    let parser = Parser {
        toks,
        pos: 0,
        qreg: None,
        creg: None,
        circuit: Circuit::default(),
    };
    let circuit = parser.program()?;
    circuit.check()?;
    Ok(circuit)
}
