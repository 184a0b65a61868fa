//! Boolean update rules: `x<i> = <expr>` over AND / OR / NOT.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ted::LabeledTree;
use super::ExprError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoolExpr {
    Var(usize),
    Not(Box<BoolExpr>),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
}

impl BoolExpr {
    pub fn not(e: BoolExpr) -> BoolExpr {
        BoolExpr::Not(Box::new(e))
    }

    pub fn and(items: impl IntoIterator<Item = BoolExpr>) -> BoolExpr {
        let mut out = Vec::new();
        for it in items {
            match it {
                BoolExpr::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            BoolExpr::And(out)
        }
    }

    pub fn or(items: impl IntoIterator<Item = BoolExpr>) -> BoolExpr {
        let mut out = Vec::new();
        for it in items {
            match it {
                BoolExpr::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            BoolExpr::Or(out)
        }
    }

    pub fn normalized(self) -> BoolExpr {
        match self {
            BoolExpr::Not(a) => BoolExpr::not(a.normalized()),
            BoolExpr::And(xs) => BoolExpr::and(xs.into_iter().map(BoolExpr::normalized)),
            BoolExpr::Or(xs) => BoolExpr::or(xs.into_iter().map(BoolExpr::normalized)),
            v => v,
        }
    }

    pub fn child_refs(&self) -> Vec<&BoolExpr> {
        match self {
            BoolExpr::Var(_) => Vec::new(),
            BoolExpr::Not(a) => vec![a],
            BoolExpr::And(xs) | BoolExpr::Or(xs) => xs.iter().collect(),
        }
    }

    pub fn eval(&self, state: &[u8]) -> bool {
        match self {
            BoolExpr::Var(i) => state[*i] != 0,
            BoolExpr::Not(a) => !a.eval(state),
            BoolExpr::And(xs) => xs.iter().all(|x| x.eval(state)),
            BoolExpr::Or(xs) => xs.iter().any(|x| x.eval(state)),
        }
    }

    /// NOT counts 1, an n-ary AND/OR counts arity − 1.
    pub fn complexity(&self) -> usize {
        match self {
            BoolExpr::Var(_) => 0,
            BoolExpr::Not(a) => 1 + a.complexity(),
            BoolExpr::And(xs) | BoolExpr::Or(xs) => {
                xs.len() - 1 + xs.iter().map(BoolExpr::complexity).sum::<usize>()
            }
        }
    }

    pub fn depth(&self) -> usize {
        1 + self
            .child_refs()
            .iter()
            .map(|c| c.depth())
            .max()
            .unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .child_refs()
            .iter()
            .map(|c| c.node_count())
            .sum::<usize>()
    }

    pub fn collect_variables(&self, out: &mut BTreeSet<usize>) {
        match self {
            BoolExpr::Var(i) => {
                out.insert(*i);
            }
            _ => self
                .child_refs()
                .into_iter()
                .for_each(|c| c.collect_variables(out)),
        }
    }

    pub fn canonical_key(&self) -> String {
        match self {
            BoolExpr::Var(i) => format!("x{}", i + 1),
            BoolExpr::Not(a) => format!("(! {})", a.canonical_key()),
            BoolExpr::And(xs) | BoolExpr::Or(xs) => {
                let mut keys: Vec<String> = xs.iter().map(BoolExpr::canonical_key).collect();
                keys.sort();
                let op = if matches!(self, BoolExpr::And(_)) { "&" } else { "|" };
                format!("({op} {})", keys.join(" "))
            }
        }
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolExpr::Var(i) => write!(f, "x{}", i + 1),
            BoolExpr::Not(a) => match **a {
                BoolExpr::And(_) | BoolExpr::Or(_) => write!(f, "NOT ({a})"),
                _ => write!(f, "NOT {a}"),
            },
            BoolExpr::And(xs) => {
                for (k, x) in xs.iter().enumerate() {
                    if k > 0 {
                        f.write_str(" AND ")?;
                    }
                    match x {
                        BoolExpr::Or(_) => write!(f, "({x})")?,
                        _ => write!(f, "{x}")?,
                    }
                }
                Ok(())
            }
            BoolExpr::Or(xs) => {
                for (k, x) in xs.iter().enumerate() {
                    if k > 0 {
                        f.write_str(" OR ")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoolLabel {
    Var(usize),
    Not,
    And,
    Or,
}

impl LabeledTree for BoolExpr {
    type Label = BoolLabel;

    fn label(&self) -> BoolLabel {
        match self {
            BoolExpr::Var(i) => BoolLabel::Var(*i),
            BoolExpr::Not(_) => BoolLabel::Not,
            BoolExpr::And(_) => BoolLabel::And,
            BoolExpr::Or(_) => BoolLabel::Or,
        }
    }

    fn child_nodes(&self) -> Vec<&Self> {
        self.child_refs()
    }
}

/// Synchronous Boolean network; rule `i` gives x_i at t+1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BooleanNetwork {
    rules: Vec<BoolExpr>,
}

impl BooleanNetwork {
    pub fn new(rules: Vec<BoolExpr>) -> Result<Self, ExprError> {
        let dim = rules.len();
        for r in &rules {
            let mut vars = BTreeSet::new();
            r.collect_variables(&mut vars);
            if let Some(&v) = vars.last() {
                if v >= dim {
                    return Err(ExprError::VariableOutOfRange {
                        index: v + 1,
                        dim,
                        pos: 0,
                    });
                }
            }
        }
        Ok(BooleanNetwork { rules })
    }

    pub fn parse<S: AsRef<str>>(lines: &[S], dim: usize) -> Result<Self, ExprError> {
        parse_boolean(lines, dim)
    }

    pub fn dim(&self) -> usize {
        self.rules.len()
    }

    pub fn rules(&self) -> &[BoolExpr] {
        &self.rules
    }

    pub fn rules_mut(&mut self) -> &mut [BoolExpr] {
        &mut self.rules
    }

    pub fn step(&self, state: &[u8]) -> Vec<u8> {
        self.rules.iter().map(|r| r.eval(state) as u8).collect()
    }

    pub fn complexity(&self) -> usize {
        self.rules.iter().map(BoolExpr::complexity).sum()
    }

    pub fn depth(&self) -> usize {
        self.rules.iter().map(BoolExpr::depth).max().unwrap_or(0)
    }

    pub fn free_variables(&self) -> BTreeSet<usize> {
        let mut s = BTreeSet::new();
        for r in &self.rules {
            r.collect_variables(&mut s);
        }
        s
    }

    pub fn canonical_key(&self) -> String {
        self.rules
            .iter()
            .map(BoolExpr::canonical_key)
            .collect::<Vec<_>>()
            .join(" ; ")
    }

    /// One `x<i> = <expr>` line per rule.
    pub fn rule_lines(&self) -> Vec<String> {
        self.rules
            .iter()
            .enumerate()
            .map(|(i, r)| format!("x{} = {r}", i + 1))
            .collect()
    }
}

impl fmt::Display for BooleanNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rule_lines().join("; "))
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkWire {
    rules: Vec<String>,
}

impl Serialize for BooleanNetwork {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        NetworkWire {
            rules: self.rule_lines(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BooleanNetwork {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = NetworkWire::deserialize(d)?;
        let dim = w.rules.len();
        parse_boolean(&w.rules, dim).map_err(serde::de::Error::custom)
    }
}

// ----------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Var(usize),
    And,
    Or,
    Not,
    LParen,
    RParen,
    Eq,
    Eof,
}

fn syntax(pos: usize, msg: impl Into<String>) -> ExprError {
    ExprError::Syntax {
        pos,
        msg: msg.into(),
    }
}

fn tokenize(line: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = line.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            b'=' => {
                out.push((Tok::Eq, i));
                i += 1;
            }
            b if b.is_ascii_alphanumeric() || b == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &line[start..i];
                let tok = match word.to_ascii_uppercase().as_str() {
                    "AND" => Tok::And,
                    "OR" => Tok::Or,
                    "NOT" => Tok::Not,
                    _ => {
                        let digits = word
                            .strip_prefix('x')
                            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                            .ok_or_else(|| syntax(start, format!("unknown word `{word}`")))?;
                        Tok::Var(
                            digits
                                .parse()
                                .map_err(|_| syntax(start, "variable index too large"))?,
                        )
                    }
                };
                out.push((tok, start));
            }
            _ => {
                let ch = line[i..].chars().next().unwrap_or('?');
                return Err(syntax(i, format!("unexpected character `{ch}`")));
            }
        }
    }
    out.push((Tok::Eof, line.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    at: usize,
    dim: usize,
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

    fn var(&self, one_based: usize, pos: usize) -> Result<usize, ExprError> {
        if one_based == 0 || one_based > self.dim {
            return Err(ExprError::VariableOutOfRange {
                index: one_based,
                dim: self.dim,
                pos,
            });
        }
        Ok(one_based - 1)
    }

    fn or_expr(&mut self) -> Result<BoolExpr, ExprError> {
        let mut items = vec![self.and_expr()?];
        while *self.peek() == Tok::Or {
            self.bump();
            items.push(self.and_expr()?);
        }
        Ok(BoolExpr::or(items))
    }

    fn and_expr(&mut self) -> Result<BoolExpr, ExprError> {
        let mut items = vec![self.not_expr()?];
        while *self.peek() == Tok::And {
            self.bump();
            items.push(self.not_expr()?);
        }
        Ok(BoolExpr::and(items))
    }

    fn not_expr(&mut self) -> Result<BoolExpr, ExprError> {
        if *self.peek() == Tok::Not {
            self.bump();
            return Ok(BoolExpr::not(self.not_expr()?));
        }
        let pos = self.pos();
        match self.bump() {
            Tok::Var(k) => Ok(BoolExpr::Var(self.var(k, pos)?)),
            Tok::LParen => {
                let e = self.or_expr()?;
                let p = self.pos();
                match self.bump() {
                    Tok::RParen => Ok(e),
                    _ => Err(syntax(p, "expected `)`")),
                }
            }
            Tok::Eof => Err(syntax(pos, "unexpected end of rule")),
            t => Err(syntax(pos, format!("unexpected token {t:?}"))),
        }
    }
}

/// Parses one `x<i> = <expr>` line, returning the 0-based target and rule.
pub fn parse_rule(line: &str, dim: usize) -> Result<(usize, BoolExpr), ExprError> {
    let toks = tokenize(line)?;
    let mut p = Parser {
        toks: &toks,
        at: 0,
        dim,
    };
    let pos = p.pos();
    let target = match p.bump() {
        Tok::Var(k) => p.var(k, pos)?,
        _ => return Err(syntax(pos, "rule must start with a variable name")),
    };
    let pos = p.pos();
    if p.bump() != Tok::Eq {
        return Err(syntax(pos, "expected `=`"));
    }
    let e = p.or_expr()?;
    if *p.peek() != Tok::Eof {
        return Err(syntax(p.pos(), "unexpected trailing input"));
    }
    Ok((target, e))
}

/// Parses one rule per variable. Variable names are 1-based (`x1`..`xD`);
/// each rule is stored at its left-hand-side index.
pub fn parse_boolean<S: AsRef<str>>(lines: &[S], dim: usize) -> Result<BooleanNetwork, ExprError> {
    let mut slots: Vec<Option<BoolExpr>> = vec![None; dim];
    for line in lines {
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        let (target, e) = parse_rule(line, dim)?;
        if slots[target].is_some() {
            return Err(ExprError::DuplicateRule(target + 1));
        }
        slots[target] = Some(e);
    }
    let rules = slots
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or(ExprError::MissingRule(i + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    BooleanNetwork::new(rules)
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::catalog::CORTICAL_RULES as CORTICAL;

    #[test]
    fn identity_network() {
        let n = parse_boolean(&["x1 = x1"], 1).unwrap();
        assert_eq!(n.rules(), &[BoolExpr::Var(0)]);
        assert_eq!(n.step(&[1]), vec![1]);
    }

    #[test]
    fn cortical_network_parses() {
        let n = parse_boolean(&CORTICAL, 5).unwrap();
        assert_eq!(n.dim(), 5);
        assert_eq!(
            n.rules()[4],
            BoolExpr::and([BoolExpr::Var(2), BoolExpr::not(BoolExpr::Var(1))])
        );
        // x1: 2 NOT + OR + 2 inner OR
        assert_eq!(n.rules()[0].complexity(), 5);
        let again = parse_boolean(&n.rule_lines(), 5).unwrap();
        assert_eq!(n, again);
    }

    #[test]
    fn out_of_range_and_missing() {
        assert!(matches!(
            parse_boolean(&["x1 = x9"], 1),
            Err(ExprError::VariableOutOfRange { index: 9, .. })
        ));
        assert_eq!(
            parse_boolean(&["x1 = x2"], 2),
            Err(ExprError::MissingRule(2))
        );
        assert_eq!(
            parse_boolean(&["x1 = x1", "x1 = x1"], 1),
            Err(ExprError::DuplicateRule(1))
        );
        assert!(matches!(
            parse_boolean(&["x1 = (x1 AND"], 1),
            Err(ExprError::Syntax { .. })
        ));
    }

    #[test]
    fn precedence_not_and_or() {
        let (_, e) = parse_rule("x1 = NOT x1 AND x2 OR x3", 3).unwrap();
        assert_eq!(
            e,
            BoolExpr::or([
                BoolExpr::and([BoolExpr::not(BoolExpr::Var(0)), BoolExpr::Var(1)]),
                BoolExpr::Var(2)
            ])
        );
    }
}
