//! Recursive-descent parser for `|`-separated algebraic skeletons.
//!
//! ```text
//! system  := expr ('|' expr)*
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary (('^' | '**') unary)?
//! primary := NUMBER | 'x_' INT | 'c' | 'c_' INT | FUNC '(' expr ')' | '(' expr ')'
//! ```

use super::alg::{AlgExpr, AlgebraicSystem, Func};
use super::ExprError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Pow,
    LParen,
    RParen,
    Eof,
}

fn syntax(pos: usize, msg: impl Into<String>) -> ExprError {
    ExprError::Syntax {
        pos,
        msg: msg.into(),
    }
}

fn tokenize(src: &str, base: usize) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let pos = base + i;
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
            }
            b'+' => {
                out.push((Tok::Plus, pos));
                i += 1;
            }
            b'-' => {
                out.push((Tok::Minus, pos));
                i += 1;
            }
            b'*' if bytes.get(i + 1) == Some(&b'*') => {
                out.push((Tok::Pow, pos));
                i += 2;
            }
            b'*' => {
                out.push((Tok::Star, pos));
                i += 1;
            }
            b'/' => {
                out.push((Tok::Slash, pos));
                i += 1;
            }
            b'^' => {
                out.push((Tok::Pow, pos));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LParen, pos));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, pos));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| syntax(pos, format!("malformed number `{text}`")))?;
                out.push((Tok::Num(v), pos));
            }
            b if b.is_ascii_alphabetic() || b == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), pos));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(syntax(pos, format!("unexpected character `{ch}`")));
            }
        }
    }
    out.push((Tok::Eof, base + src.len()));
    Ok(out)
}

/// Placeholder label before normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
enum CoefLabel {
    Explicit(usize),
    Bare,
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    at: usize,
    dim: usize,
    labels: &'a mut Vec<CoefLabel>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<AlgExpr, ExprError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    terms.push(self.term()?.negate());
                }
                _ => break,
            }
        }
        Ok(AlgExpr::sum(terms))
    }

    fn term(&mut self) -> Result<AlgExpr, ExprError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let rhs = self.unary()?;
                    acc = AlgExpr::product(false, [acc, rhs]);
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    acc = AlgExpr::div(acc, rhs);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<AlgExpr, ExprError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(self.unary()?.negate())
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<AlgExpr, ExprError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Pow {
            self.bump();
            let exp = self.unary()?;
            return Ok(AlgExpr::pow(base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<AlgExpr, ExprError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(AlgExpr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => self.identifier(&name, pos),
            Tok::Eof => Err(syntax(pos, "unexpected end of expression")),
            t => Err(syntax(pos, format!("unexpected token {t:?}"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        let pos = self.pos();
        match self.bump() {
            Tok::RParen => Ok(()),
            _ => Err(syntax(pos, "expected `)`")),
        }
    }

    fn identifier(&mut self, name: &str, pos: usize) -> Result<AlgExpr, ExprError> {
        if name == "c" {
            self.labels.push(CoefLabel::Bare);
            return Ok(AlgExpr::Coef(self.labels.len() - 1));
        }
        if let Some(k) = indexed(name, "c_") {
            let k = k.ok_or_else(|| syntax(pos, format!("bad coefficient name `{name}`")))?;
            self.labels.push(CoefLabel::Explicit(k));
            return Ok(AlgExpr::Coef(self.labels.len() - 1));
        }
        if let Some(k) = indexed(name, "x_") {
            let k = k.ok_or_else(|| syntax(pos, format!("bad variable name `{name}`")))?;
            if k >= self.dim {
                return Err(ExprError::VariableOutOfRange {
                    index: k,
                    dim: self.dim,
                    pos,
                });
            }
            return Ok(AlgExpr::Var(k));
        }
        if *self.peek() == Tok::LParen {
            let f = Func::from_name(name).ok_or_else(|| ExprError::UnknownFunction(name.into()))?;
            self.bump();
            let arg = self.expr()?;
            self.expect_rparen()?;
            return Ok(AlgExpr::unary(f, arg));
        }
        Err(syntax(pos, format!("unknown identifier `{name}`")))
    }
}

fn indexed(name: &str, prefix: &str) -> Option<Option<usize>> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return Some(None);
    }
    Some(rest.parse().ok())
}

fn parse_one(
    src: &str,
    base: usize,
    dim: usize,
    labels: &mut Vec<CoefLabel>,
) -> Result<AlgExpr, ExprError> {
    let toks = tokenize(src, base)?;
    if toks.len() == 1 {
        return Err(syntax(base, "empty equation"));
    }
    let mut p = Parser {
        toks: &toks,
        at: 0,
        dim,
        labels,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(syntax(p.pos(), "unexpected trailing input"));
    }
    Ok(e)
}

/// Parses a `|`-separated system of `dim` equations.
///
/// Explicitly indexed placeholders `c_k` are renumbered densely in ascending
/// order of `k` (so an already-dense set keeps its indices); every bare `c`
/// then receives a fresh index, left to right.
pub fn parse_algebraic(text: &str, dim: usize) -> Result<AlgebraicSystem, ExprError> {
    let mut labels = Vec::new();
    let mut equations = Vec::new();
    let mut base = 0;
    for part in text.split('|') {
        equations.push(parse_one(part, base, dim, &mut labels)?);
        base += part.len() + 1;
    }
    if equations.len() != dim {
        return Err(ExprError::DimensionMismatch {
            expected: dim,
            found: equations.len(),
        });
    }
    assign_placeholders(&mut equations, &labels);
    AlgebraicSystem::new(equations)
}

/// Parses a single expression over variables `x_0..x_{dim-1}`, with the
/// same placeholder normalization as [`parse_algebraic`].
pub fn parse_expression(text: &str, dim: usize) -> Result<AlgExpr, ExprError> {
    let mut labels = Vec::new();
    let mut eq = [parse_one(text, 0, dim, &mut labels)?];
    assign_placeholders(&mut eq, &labels);
    let [e] = eq;
    Ok(e)
}

fn assign_placeholders(equations: &mut [AlgExpr], labels: &[CoefLabel]) {
    let mut explicit: Vec<usize> = labels
        .iter()
        .filter_map(|l| match l {
            CoefLabel::Explicit(k) => Some(*k),
            CoefLabel::Bare => None,
        })
        .collect();
    explicit.sort_unstable();
    explicit.dedup();
    let mut next_fresh = explicit.len();
    let final_index: Vec<usize> = labels
        .iter()
        .map(|l| match l {
            CoefLabel::Explicit(k) => explicit.binary_search(k).unwrap(),
            CoefLabel::Bare => {
                next_fresh += 1;
                next_fresh - 1
            }
        })
        .collect();
    for eq in equations.iter_mut() {
        eq.map_coefficients(&mut |tmp| final_index[tmp]);
    }
}
