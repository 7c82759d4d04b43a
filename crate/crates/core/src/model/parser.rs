//! Recursive-descent parser for expressions and model files.
//!
//! Expression grammar, loosest binding first:
//!
//! ```text
//! sum     := signed (('+' | '-') signed)*
//! signed  := '-' signed | product
//! product := power (('*' | '/') factor)*
//! factor  := '-' factor | power
//! power   := atom ('^' exponent)?          exponent: positive integer, right-assoc
//! atom    := number | name | func '(' sum ')' | '(' sum ')'
//! ```
//!
//! A leading minus negates the whole product that follows it, so
//! `-0.5*x1^3` reads as `-(0.5 * x1^3)`.

use std::collections::BTreeMap;

use crate::ibox::IntervalBox;
use crate::model::expr::{BinaryOp, Expr, Literal, UnaryOp, Var};
use crate::model::system::SwitchedSystem;
use crate::model::ModelError;

/// Names visible to an expression.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    pub n_states: usize,
    pub n_dists: usize,
    pub constants: BTreeMap<String, Expr>,
}

impl Scope {
    pub fn new(n_states: usize, n_dists: usize) -> Self {
        Self {
            n_states,
            n_dists,
            constants: BTreeMap::new(),
        }
    }

    fn resolve(&self, name: &str) -> Option<Expr> {
        if let Some(c) = self.constants.get(name) {
            return Some(c.clone());
        }
        let indexed = |prefix: char, bound: usize| -> Option<usize> {
            let digits = name.strip_prefix(prefix)?;
            if digits.starts_with('0') {
                return None;
            }
            let k: usize = digits.parse().ok()?;
            (1..=bound).contains(&k).then_some(k - 1)
        };
        if let Some(i) = indexed('x', self.n_states) {
            return Some(Expr::Var(Var::State(i)));
        }
        indexed('d', self.n_dists).map(|j| Expr::Var(Var::Dist(j)))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer;

impl Lexer {
    fn tokenize(src: &str, line: usize, col0: usize) -> Result<Vec<(Tok, usize)>, ModelError> {
        let chars: Vec<char> = src.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = col0 + i;
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                out.push((Tok::Num(chars[start..i].iter().collect()), col));
            } else if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            } else {
                let tok = match c {
                    '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    _ => {
                        return Err(ModelError::Syntax {
                            line,
                            col,
                            message: format!("unexpected character '{c}'"),
                        })
                    }
                };
                out.push((tok, col));
                i += 1;
            }
        }
        out.push((Tok::End, col0 + chars.len()));
        Ok(out)
    }
}

struct ExprParser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    scope: &'a Scope,
}

impl<'a> ExprParser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn col(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ModelError {
        ModelError::Syntax {
            line: self.line,
            col: self.col(),
            message: message.into(),
        }
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Num(s) | Tok::Ident(s) => format!("'{s}'"),
            Tok::Op(c) => format!("'{c}'"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of expression".into(),
        }
    }

    fn sum(&mut self) -> Result<Expr, ModelError> {
        let mut lhs = self.signed()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinaryOp::Add,
                Tok::Op('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.signed()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn signed(&mut self) -> Result<Expr, ModelError> {
        if self.peek() == &Tok::Op('-') {
            self.bump();
            return Ok(Expr::unary(UnaryOp::Neg, self.signed()?));
        }
        self.product()
    }

    fn product(&mut self) -> Result<Expr, ModelError> {
        let mut lhs = self.power()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinaryOp::Mul,
                Tok::Op('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Expr, ModelError> {
        if self.peek() == &Tok::Op('-') {
            self.bump();
            return Ok(Expr::unary(UnaryOp::Neg, self.factor()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ModelError> {
        let base = self.atom()?;
        if self.peek() == &Tok::Op('^') {
            self.bump();
            let n = self.exponent()?;
            return Ok(Expr::pow(base, n));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<u32, ModelError> {
        let parenthesized = self.peek() == &Tok::LParen;
        if parenthesized {
            self.bump();
        }
        let col = self.col();
        let n = match self.bump() {
            Tok::Num(s) => s.parse::<u32>().ok().filter(|&n| n >= 1),
            _ => None,
        }
        .ok_or(ModelError::Syntax {
            line: self.line,
            col,
            message: "exponent must be a positive integer literal".into(),
        })?;
        if parenthesized {
            self.expect(Tok::RParen)?;
        }
        if self.peek() == &Tok::Op('^') {
            self.bump();
            let m = self.exponent()?;
            return n.checked_pow(m).ok_or_else(|| self.error("exponent overflow"));
        }
        Ok(n)
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ModelError> {
        if self.peek() == &tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!(
                "expected {}, found {}",
                Self::describe(&tok),
                Self::describe(self.peek())
            )))
        }
    }

    fn atom(&mut self) -> Result<Expr, ModelError> {
        let col = self.col();
        match self.bump() {
            Tok::Num(s) => Literal::parse(&s).map(Expr::Const).ok_or(ModelError::Syntax {
                line: self.line,
                col,
                message: format!("malformed number '{s}'"),
            }),
            Tok::Ident(name) => {
                if let Some(op) = UnaryOp::from_function_name(&name) {
                    self.expect(Tok::LParen)?;
                    let arg = self.sum()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Expr::unary(op, arg));
                }
                self.scope.resolve(&name).ok_or(ModelError::UndeclaredVariable {
                    name,
                    line: self.line,
                    col,
                })
            }
            Tok::LParen => {
                let e = self.sum()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            other => Err(ModelError::Syntax {
                line: self.line,
                col,
                message: format!("expected an operand, found {}", Self::describe(&other)),
            }),
        }
    }
}

/// Parses a single expression. `line`/`col` locate `src` for diagnostics
/// (1-based).
pub fn parse_expr_at(src: &str, scope: &Scope, line: usize, col: usize) -> Result<Expr, ModelError> {
    let toks = Lexer::tokenize(src, line, col)?;
    let mut p = ExprParser {
        toks,
        pos: 0,
        line,
        scope,
    };
    let e = p.sum()?;
    if p.peek() != &Tok::End {
        return Err(p.error(format!("unexpected {}", ExprParser::describe(p.peek()))));
    }
    Ok(e)
}

pub fn parse_expr(src: &str, scope: &Scope) -> Result<Expr, ModelError> {
    parse_expr_at(src, scope, 1, 1)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_') && chars.all(|c| c.is_alphanumeric() || c == '_')
}

/// Parses the line-oriented model file format.
pub fn parse_model(text: &str) -> Result<SwitchedSystem, ModelError> {
    let mut name: Option<String> = None;
    let mut dim: Option<usize> = None;
    let mut dist: Option<IntervalBox<f64>> = None;
    let mut tau: Option<f64> = None;
    let mut constants: BTreeMap<String, Expr> = BTreeMap::new();
    let mut modes: Vec<Vec<Option<Expr>>> = Vec::new();
    let mut mode_lines: Vec<usize> = Vec::new();

    let syntax = |line: usize, col: usize, message: String| ModelError::Syntax { line, col, message };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let col0 = content[..indent].chars().count() + 1;
        let (keyword, rest) = trimmed
            .split_once(char::is_whitespace)
            .map(|(k, r)| (k, r.trim()))
            .unwrap_or((trimmed, ""));
        let rest_col = col0 + trimmed.find(rest).unwrap_or(trimmed.len());

        let header_done = |what: &str| -> Result<(), ModelError> {
            if !modes.is_empty() {
                return Err(syntax(
                    line,
                    col0,
                    format!("'{what}' must appear before the first mode"),
                ));
            }
            Ok(())
        };

        match keyword {
            "system" => {
                header_done("system")?;
                if rest.is_empty() {
                    return Err(syntax(line, rest_col, "missing system name".into()));
                }
                name = Some(rest.to_string());
            }
            "dim" => {
                header_done("dim")?;
                let n: usize = rest
                    .parse()
                    .ok()
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| syntax(line, rest_col, format!("invalid dimension '{rest}'")))?;
                dim = Some(n);
            }
            "dist" => {
                header_done("dist")?;
                let (count, literal) = rest
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| syntax(line, rest_col, "expected 'dist <m> in <box>'".into()))?;
                let m: usize = count
                    .parse()
                    .map_err(|_| syntax(line, rest_col, format!("invalid disturbance count '{count}'")))?;
                let literal = literal
                    .trim()
                    .strip_prefix("in")
                    .ok_or_else(|| syntax(line, rest_col, "expected 'in' after disturbance count".into()))?;
                let b: IntervalBox<f64> = literal.parse().map_err(|e| syntax(line, rest_col, format!("{e}")))?;
                if b.dim() != m {
                    return Err(syntax(
                        line,
                        rest_col,
                        format!("disturbance box has {} dimensions, expected {m}", b.dim()),
                    ));
                }
                dist = Some(b);
            }
            "tau" => {
                header_done("tau")?;
                let t: f64 = rest
                    .parse()
                    .ok()
                    .filter(|t: &f64| t.is_finite() && *t > 0.0)
                    .ok_or_else(|| syntax(line, rest_col, format!("tau must be a positive number, got '{rest}'")))?;
                tau = Some(t);
            }
            "const" => {
                header_done("const")?;
                let (cname, value) = rest
                    .split_once('=')
                    .ok_or_else(|| syntax(line, rest_col, "expected 'const <name> = <real>'".into()))?;
                let cname = cname.trim();
                if !is_identifier(cname) || UnaryOp::from_function_name(cname).is_some() {
                    return Err(syntax(line, rest_col, format!("invalid constant name '{cname}'")));
                }
                let value = value.trim();
                let (negative, digits) = match value.strip_prefix('-') {
                    Some(d) => (true, d.trim_start()),
                    None => (false, value),
                };
                let lit = Literal::parse(digits)
                    .ok_or_else(|| syntax(line, rest_col, format!("invalid constant value '{value}'")))?;
                let constant = if negative {
                    Expr::unary(UnaryOp::Neg, Expr::Const(lit))
                } else {
                    Expr::Const(lit)
                };
                let probe = Scope::new(dim.unwrap_or(0), dist.as_ref().map_or(0, |b| b.dim()));
                if probe.resolve(cname).is_some() || constants.contains_key(cname) {
                    return Err(syntax(line, rest_col, format!("'{cname}' is already declared")));
                }
                constants.insert(cname.to_string(), constant);
            }
            "mode" => {
                let label = rest.strip_suffix(':').unwrap_or(rest).trim();
                if !rest.ends_with(':') {
                    return Err(syntax(line, rest_col, "expected ':' after mode number".into()));
                }
                let k: usize = label
                    .parse()
                    .map_err(|_| syntax(line, rest_col, format!("invalid mode number '{label}'")))?;
                if k != modes.len() + 1 {
                    return Err(syntax(
                        line,
                        rest_col,
                        format!(
                            "modes must be numbered contiguously from 1; expected {}, found {k}",
                            modes.len() + 1
                        ),
                    ));
                }
                let n = dim.ok_or_else(|| syntax(line, col0, "'dim' must be declared before modes".into()))?;
                modes.push(vec![None; n]);
                mode_lines.push(line);
            }
            _ => {
                // right-hand side line: x<i>' = expr
                let Some(current) = modes.last_mut() else {
                    return Err(syntax(line, col0, format!("unknown keyword '{keyword}'")));
                };
                let (lhs, rhs) = trimmed
                    .split_once('=')
                    .ok_or_else(|| syntax(line, col0, "expected \"x<i>' = <expr>\"".into()))?;
                let lhs = lhs.trim();
                let var = lhs
                    .strip_suffix('\'')
                    .ok_or_else(|| syntax(line, col0, format!("expected a derivative like x1', found '{lhs}'")))?;
                let n = current.len();
                let i = var
                    .strip_prefix('x')
                    .and_then(|s| s.parse::<usize>().ok())
                    .filter(|&i| (1..=n).contains(&i))
                    .ok_or_else(|| ModelError::UndeclaredVariable {
                        name: var.to_string(),
                        line,
                        col: col0,
                    })?;
                if current[i - 1].is_some() {
                    return Err(syntax(line, col0, format!("x{i}' is defined twice in this mode")));
                }
                let eq = trimmed.find('=').unwrap();
                let rhs_col = col0 + trimmed[..eq + 1].chars().count();
                let scope = Scope {
                    n_states: n,
                    n_dists: dist.as_ref().map_or(0, |b| b.dim()),
                    constants: constants.clone(),
                };
                let e = parse_expr_at(rhs, &scope, line, rhs_col)?;
                current[i - 1] = Some(e);
            }
        }
    }

    let n = dim.ok_or_else(|| ModelError::Invalid("missing 'dim' line".into()))?;
    let tau = tau.ok_or_else(|| ModelError::Invalid("missing 'tau' line".into()))?;
    if modes.is_empty() {
        return Err(ModelError::Invalid("model declares no modes".into()));
    }
    let mut rhs = Vec::with_capacity(modes.len());
    for (k, mode) in modes.into_iter().enumerate() {
        let found = mode.iter().filter(|e| e.is_some()).count();
        if found != n {
            return Err(ModelError::ArityMismatch {
                mode: k + 1,
                expected: n,
                found,
            });
        }
        rhs.push(mode.into_iter().map(Option::unwrap).collect());
    }
    SwitchedSystem::new(name.unwrap_or_else(|| "unnamed".into()), n, tau, dist, constants, rhs)
}
