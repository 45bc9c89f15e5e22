//! Coefficient expression language.
//!
//! A closed little grammar over the variables `t` and `zeta`, used for
//! Hamiltonian densities, perturbation fields and initial data in config
//! files. Supported: decimal literals with optional exponent, `+ - * / ^`,
//! unary minus, `sin cos exp sqrt abs min max`, and
//! `piecewise(cond : value ; ... ; default)` with comparisons `< <= > >=`.
//!
//! Precedence, tightest first: `^`, unary `-`, `* /`, `+ -`, comparisons.
//! All binary operators associate to the left, including `^`, so
//! `2^3^2 = (2^3)^2 = 64`. Comparisons only appear inside `piecewise`
//! conditions; branches are tried left to right and the first match wins,
//! which pins down values on half-open intervals like `t in [0, 1/2)`
//! written `piecewise(t < 0.5 : 2 ; 1)`.
//!
//! ASTs are immutable after parsing and evaluation is reentrant.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset} (variables are `t` and `zeta`)")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{name}` takes {expected} argument(s), got {got} (at byte {offset})")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
        offset: usize,
    },
    #[error("piecewise needs at least one `cond : value` branch and exactly one trailing default (at byte {offset})")]
    MalformedPiecewise { offset: usize },
    #[error("division by zero in `{subexpr}`")]
    DivisionByZero { subexpr: String },
    #[error("square root of negative value in `{subexpr}`")]
    SqrtOfNegative { subexpr: String },
    #[error("non-finite result in `{subexpr}`")]
    NonFinite { subexpr: String },
}

pub type Result<T> = std::result::Result<T, ExprError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    Zeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// A comparison of two sub-expressions, usable only as a piecewise condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub lhs: ExprAst,
    pub op: CmpOp,
    pub rhs: ExprAst,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Constant(f64),
    Var(Var),
    Neg(Box<ExprAst>),
    Binary(BinOp, Box<ExprAst>, Box<ExprAst>),
    Call(Func, Vec<ExprAst>),
    Piecewise {
        branches: Vec<(Condition, ExprAst)>,
        default: Box<ExprAst>,
    },
}

/// Expression tree node with the byte span it was parsed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    pub kind: ExprKind,
    pub span: (usize, usize),
}

impl ExprAst {
    fn new(kind: ExprKind, span: (usize, usize)) -> Self {
        ExprAst { kind, span }
    }

    /// Evaluate at `(t, zeta)`. Deterministic and total on finite inputs,
    /// except for the reported domain errors.
    pub fn eval(&self, t: f64, zeta: f64) -> Result<f64> {
        let v = match &self.kind {
            ExprKind::Constant(c) => *c,
            ExprKind::Var(Var::T) => t,
            ExprKind::Var(Var::Zeta) => zeta,
            ExprKind::Neg(e) => -e.eval(t, zeta)?,
            ExprKind::Binary(op, a, b) => {
                let x = a.eval(t, zeta)?;
                let y = b.eval(t, zeta)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(ExprError::DivisionByZero {
                                subexpr: self.to_string(),
                            });
                        }
                        x / y
                    }
                    BinOp::Pow => x.powf(y),
                }
            }
            ExprKind::Call(f, args) => {
                let mut vals = [0.0; 2];
                for (i, a) in args.iter().enumerate() {
                    vals[i] = a.eval(t, zeta)?;
                }
                match f {
                    Func::Sin => vals[0].sin(),
                    Func::Cos => vals[0].cos(),
                    Func::Exp => vals[0].exp(),
                    Func::Sqrt => {
                        if vals[0] < 0.0 {
                            return Err(ExprError::SqrtOfNegative {
                                subexpr: self.to_string(),
                            });
                        }
                        vals[0].sqrt()
                    }
                    Func::Abs => vals[0].abs(),
                    Func::Min => vals[0].min(vals[1]),
                    Func::Max => vals[0].max(vals[1]),
                }
            }
            ExprKind::Piecewise { branches, default } => {
                let mut chosen: Option<&ExprAst> = None;
                for (cond, value) in branches {
                    let l = cond.lhs.eval(t, zeta)?;
                    let r = cond.rhs.eval(t, zeta)?;
                    if cond.op.holds(l, r) {
                        chosen = Some(value);
                        break;
                    }
                }
                match chosen {
                    Some(e) => e.eval(t, zeta)?,
                    None => default.eval(t, zeta)?,
                }
            }
        };
        if !v.is_finite() {
            return Err(ExprError::NonFinite {
                subexpr: self.to_string(),
            });
        }
        Ok(v)
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match &self.kind {
            ExprKind::Constant(_) => false,
            ExprKind::Var(v) => *v == var,
            ExprKind::Neg(e) => e.depends_on(var),
            ExprKind::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
            ExprKind::Call(_, args) => args.iter().any(|a| a.depends_on(var)),
            ExprKind::Piecewise { branches, default } => {
                branches.iter().any(|(c, v)| {
                    c.lhs.depends_on(var) || c.rhs.depends_on(var) || v.depends_on(var)
                }) || default.depends_on(var)
            }
        }
    }

    /// Constant value when the expression uses neither variable.
    pub fn as_constant(&self) -> Option<f64> {
        if self.depends_on(Var::T) || self.depends_on(Var::Zeta) {
            None
        } else {
            self.eval(0.0, 0.0).ok()
        }
    }

    pub fn constant(v: f64) -> ExprAst {
        ExprAst::new(ExprKind::Constant(v), (0, 0))
    }
}

/// Re-emits a parseable form; parentheses are inserted around every compound
/// node so the round-trip `eval(parse(print(ast))) == eval(ast)` holds
/// structurally.
impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Constant(c) => {
                if *c < 0.0 || c.is_sign_negative() {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            ExprKind::Var(Var::T) => write!(f, "t"),
            ExprKind::Var(Var::Zeta) => write!(f, "zeta"),
            ExprKind::Neg(e) => write!(f, "(-{e})"),
            ExprKind::Binary(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a}{s}{b})")
            }
            ExprKind::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            ExprKind::Piecewise { branches, default } => {
                write!(f, "piecewise(")?;
                for (cond, value) in branches {
                    write!(
                        f,
                        "{}{}{} : {} ; ",
                        cond.lhs,
                        cond.op.symbol(),
                        cond.rhs,
                        value
                    )?;
                }
                write!(f, "{default})")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Colon,
    Semi,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next_token(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::Eof, start));
        }
        let b = self.src[self.pos];
        let tok = match b {
            b'+' => {
                self.pos += 1;
                Tok::Plus
            }
            b'-' => {
                self.pos += 1;
                Tok::Minus
            }
            b'*' => {
                self.pos += 1;
                Tok::Star
            }
            b'/' => {
                self.pos += 1;
                Tok::Slash
            }
            b'^' => {
                self.pos += 1;
                Tok::Caret
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            b':' => {
                self.pos += 1;
                Tok::Colon
            }
            b';' => {
                self.pos += 1;
                Tok::Semi
            }
            b'<' => {
                self.pos += 1;
                if self.src.get(self.pos) == Some(&b'=') {
                    self.pos += 1;
                    Tok::Le
                } else {
                    Tok::Lt
                }
            }
            b'>' => {
                self.pos += 1;
                if self.src.get(self.pos) == Some(&b'=') {
                    self.pos += 1;
                    Tok::Ge
                } else {
                    Tok::Gt
                }
            }
            b'0'..=b'9' | b'.' => {
                return self.lex_number(start);
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let s = std::str::from_utf8(&self.src[start..self.pos])
                    .expect("ASCII identifier bytes")
                    .to_string();
                Tok::Ident(s)
            }
            other => {
                return Err(ExprError::Syntax {
                    offset: start,
                    expected: "a number, identifier, operator or parenthesis".into(),
                    found: format!("byte 0x{other:02x}"),
                });
            }
        };
        Ok((tok, start))
    }

    /// Base-10 decimal with optional fraction and exponent. No hex, no
    /// underscores.
    fn lex_number(&mut self, start: usize) -> Result<(Tok, usize)> {
        let mut saw_digit = false;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
            saw_digit = true;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
                saw_digit = true;
            }
        }
        if !saw_digit {
            return Err(ExprError::Syntax {
                offset: start,
                expected: "a digit".into(),
                found: "`.`".into(),
            });
        }
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len()
                && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            let mut exp_digits = false;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
                exp_digits = true;
            }
            if !exp_digits {
                // not an exponent after all (e.g. `2*exp(t)` tokenizes `2`, `*`, `exp`)
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ASCII number bytes");
        let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
            offset: start,
            expected: "a valid decimal number".into(),
            found: format!("`{text}`"),
        })?;
        Ok((Tok::Num(v), start))
    }
}

// ---------------------------------------------------------------------------
// Pratt parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

const BP_CMP: u8 = 1;
const BP_ADD: u8 = 3;
const BP_MUL: u8 = 5;
const BP_NEG: u8 = 7;
const BP_POW: u8 = 9;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_offset(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let out = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        out
    }

    fn expect(&mut self, want: Tok, expected: &str) -> Result<usize> {
        if *self.peek() == want {
            Ok(self.bump().1)
        } else {
            Err(ExprError::Syntax {
                offset: self.peek_offset(),
                expected: expected.into(),
                found: self.peek().describe(),
            })
        }
    }

    fn parse_expr(&mut self, min_bp: u8) -> Result<ExprAst> {
        let (tok, start) = self.bump();
        let mut lhs = match tok {
            Tok::Num(v) => ExprAst::new(ExprKind::Constant(v), (start, self.prev_end())),
            Tok::Minus => {
                let operand = self.parse_expr(BP_NEG)?;
                let end = operand.span.1;
                ExprAst::new(ExprKind::Neg(Box::new(operand)), (start, end))
            }
            Tok::LParen => {
                let inner = self.parse_expr(0)?;
                self.expect(Tok::RParen, "`)`")?;
                ExprAst::new(inner.kind, (start, self.prev_end()))
            }
            Tok::Ident(name) => self.parse_ident(name, start)?,
            other => {
                return Err(ExprError::Syntax {
                    offset: start,
                    expected: "a number, variable, function call, `-` or `(`".into(),
                    found: other.describe(),
                });
            }
        };

        loop {
            let op = match self.peek() {
                Tok::Plus => (BinOp::Add, BP_ADD),
                Tok::Minus => (BinOp::Sub, BP_ADD),
                Tok::Star => (BinOp::Mul, BP_MUL),
                Tok::Slash => (BinOp::Div, BP_MUL),
                Tok::Caret => (BinOp::Pow, BP_POW),
                _ => break,
            };
            let (binop, l_bp) = op;
            if l_bp < min_bp {
                break;
            }
            self.bump();
            // left associativity: the right side binds one level tighter
            let rhs = self.parse_expr(l_bp + 1)?;
            let span = (lhs.span.0, rhs.span.1);
            lhs = ExprAst::new(ExprKind::Binary(binop, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn prev_end(&self) -> usize {
        self.toks[self.at].1
    }

    fn parse_ident(&mut self, name: String, start: usize) -> Result<ExprAst> {
        match name.as_str() {
            "t" => Ok(ExprAst::new(ExprKind::Var(Var::T), (start, start + 1))),
            "zeta" => Ok(ExprAst::new(ExprKind::Var(Var::Zeta), (start, start + 4))),
            "piecewise" => self.parse_piecewise(start),
            _ => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let mut args = vec![self.parse_expr(0)?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.parse_expr(0)?);
                    }
                    self.expect(Tok::RParen, "`)` or `,`")?;
                    if args.len() != func.arity() {
                        return Err(ExprError::ArityMismatch {
                            name: name.clone(),
                            expected: func.arity(),
                            got: args.len(),
                            offset: start,
                        });
                    }
                    Ok(ExprAst::new(
                        ExprKind::Call(func, args),
                        (start, self.prev_end()),
                    ))
                } else {
                    Err(ExprError::UnknownIdentifier {
                        name,
                        offset: start,
                    })
                }
            }
        }
    }

    /// `piecewise(cond : value ; cond : value ; default)` - comparisons are
    /// only legal here; branches first-match left to right.
    fn parse_piecewise(&mut self, start: usize) -> Result<ExprAst> {
        self.expect(Tok::LParen, "`(` after `piecewise`")?;
        let mut branches: Vec<(Condition, ExprAst)> = Vec::new();
        let default;
        loop {
            let lhs = self.parse_expr(BP_CMP + 1)?;
            let cmp = match self.peek() {
                Tok::Lt => Some(CmpOp::Lt),
                Tok::Le => Some(CmpOp::Le),
                Tok::Gt => Some(CmpOp::Gt),
                Tok::Ge => Some(CmpOp::Ge),
                _ => None,
            };
            match cmp {
                Some(op) => {
                    self.bump();
                    let rhs = self.parse_expr(BP_CMP + 1)?;
                    self.expect(Tok::Colon, "`:` after piecewise condition")?;
                    let value = self.parse_expr(0)?;
                    branches.push((Condition { lhs, op, rhs }, value));
                    self.expect(Tok::Semi, "`;` before the next piecewise branch or default")?;
                }
                None => {
                    // a bare expression must be the trailing default
                    if *self.peek() != Tok::RParen {
                        return Err(ExprError::Syntax {
                            offset: self.peek_offset(),
                            expected: "a comparison operator or `)` closing the default".into(),
                            found: self.peek().describe(),
                        });
                    }
                    default = lhs;
                    self.bump();
                    break;
                }
            }
        }
        if branches.is_empty() {
            return Err(ExprError::MalformedPiecewise { offset: start });
        }
        Ok(ExprAst::new(
            ExprKind::Piecewise {
                branches,
                default: Box::new(default),
            },
            (start, self.prev_end()),
        ))
    }
}

/// Parse a coefficient expression. Pure: identical sources yield
/// structurally identical ASTs.
pub fn parse(source: &str) -> Result<ExprAst> {
    let mut lexer = Lexer::new(source);
    let mut toks = Vec::new();
    loop {
        let (tok, off) = lexer.next_token()?;
        let done = tok == Tok::Eof;
        toks.push((tok, off));
        if done {
            break;
        }
    }
    let mut p = Parser { toks, at: 0 };
    let ast = p.parse_expr(0)?;
    if *p.peek() != Tok::Eof {
        return Err(ExprError::Syntax {
            offset: p.peek_offset(),
            expected: "end of input or a binary operator".into(),
            found: p.peek().describe(),
        });
    }
    Ok(ast)
}
