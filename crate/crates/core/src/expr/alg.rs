//! Algebraic expression trees for coupled differential equation skeletons.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ted::LabeledTree;
use super::ExprError;

/// Unary functions allowed in algebraic skeletons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Cot,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Cot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Cot => "cot",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Domain errors surface as non-finite values; nothing is clamped.
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
            Func::Cot => v.cos() / v.sin(),
        }
    }
}

/// A node of an algebraic skeleton.
///
/// Sums and products are n-ary and kept flat. Unary minus is folded into the
/// sign of a product (or into the value of a literal), so `-c*x_0` is a
/// single negated product with two factors.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgExpr {
    Const(f64),
    /// Coefficient placeholder with its normalized index.
    Coef(usize),
    Var(usize),
    Sum(Vec<AlgExpr>),
    Product {
        negated: bool,
        factors: Vec<AlgExpr>,
    },
    Div(Box<AlgExpr>, Box<AlgExpr>),
    Pow(Box<AlgExpr>, Box<AlgExpr>),
    Unary(Func, Box<AlgExpr>),
}

impl AlgExpr {
    /// Flattening n-ary sum constructor.
    pub fn sum(terms: impl IntoIterator<Item = AlgExpr>) -> AlgExpr {
        let mut out = Vec::new();
        for t in terms {
            match t {
                AlgExpr::Sum(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => AlgExpr::Const(0.0),
            1 => out.pop().unwrap(),
            _ => AlgExpr::Sum(out),
        }
    }

    /// Flattening n-ary product constructor. A pending sign is absorbed by the
    /// first literal factor when one exists.
    pub fn product(negated: bool, factors: impl IntoIterator<Item = AlgExpr>) -> AlgExpr {
        let mut neg = negated;
        let mut out = Vec::new();
        for f in factors {
            match f {
                AlgExpr::Product {
                    negated: inner_neg,
                    factors: inner,
                } => {
                    neg ^= inner_neg;
                    out.extend(inner);
                }
                other => out.push(other),
            }
        }
        if neg {
            if let Some(v) = out.iter_mut().find_map(|f| match f {
                AlgExpr::Const(v) => Some(v),
                _ => None,
            }) {
                *v = -*v;
                neg = false;
            }
        }
        match (out.len(), neg) {
            (0, n) => AlgExpr::Const(if n { -1.0 } else { 1.0 }),
            (1, false) => out.pop().unwrap(),
            _ => AlgExpr::Product {
                negated: neg,
                factors: out,
            },
        }
    }

    pub fn div(num: AlgExpr, den: AlgExpr) -> AlgExpr {
        AlgExpr::Div(Box::new(num), Box::new(den))
    }

    pub fn pow(base: AlgExpr, exp: AlgExpr) -> AlgExpr {
        AlgExpr::Pow(Box::new(base), Box::new(exp))
    }

    pub fn unary(f: Func, arg: AlgExpr) -> AlgExpr {
        AlgExpr::Unary(f, Box::new(arg))
    }

    pub fn negate(self) -> AlgExpr {
        match self {
            AlgExpr::Const(v) => AlgExpr::Const(-v),
            AlgExpr::Product { negated, factors } => AlgExpr::product(!negated, factors),
            other => AlgExpr::product(true, [other]),
        }
    }

    /// Rebuilds the tree through the smart constructors.
    pub fn normalized(self) -> AlgExpr {
        match self {
            AlgExpr::Sum(ts) => AlgExpr::sum(ts.into_iter().map(AlgExpr::normalized)),
            AlgExpr::Product { negated, factors } => {
                AlgExpr::product(negated, factors.into_iter().map(AlgExpr::normalized))
            }
            AlgExpr::Div(a, b) => AlgExpr::div(a.normalized(), b.normalized()),
            AlgExpr::Pow(a, b) => AlgExpr::pow(a.normalized(), b.normalized()),
            AlgExpr::Unary(f, a) => AlgExpr::unary(f, a.normalized()),
            leaf => leaf,
        }
    }

    /// Children in order, including both operands of binary nodes.
    pub fn child_refs(&self) -> Vec<&AlgExpr> {
        match self {
            AlgExpr::Sum(ts) => ts.iter().collect(),
            AlgExpr::Product { factors, .. } => factors.iter().collect(),
            AlgExpr::Div(a, b) | AlgExpr::Pow(a, b) => vec![a, b],
            AlgExpr::Unary(_, a) => vec![a],
            _ => Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, AlgExpr::Const(_) | AlgExpr::Coef(_) | AlgExpr::Var(_))
    }

    pub fn node_count(&self) -> usize {
        1 + self.child_refs().iter().map(|c| c.node_count()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self
            .child_refs()
            .iter()
            .map(|c| c.depth())
            .max()
            .unwrap_or(0)
    }

    /// Operation count: n-ary sums/products contribute arity − 1 (a folded
    /// sign is free); divide, power and unary functions contribute 1.
    pub fn complexity(&self) -> usize {
        let own = match self {
            AlgExpr::Sum(ts) => ts.len() - 1,
            AlgExpr::Product { factors, .. } => factors.len() - 1,
            AlgExpr::Div(..) | AlgExpr::Pow(..) | AlgExpr::Unary(..) => 1,
            _ => 0,
        };
        own + self
            .child_refs()
            .iter()
            .map(|c| c.complexity())
            .sum::<usize>()
    }

    pub fn collect_variables(&self, out: &mut BTreeSet<usize>) {
        match self {
            AlgExpr::Var(i) => {
                out.insert(*i);
            }
            _ => self.child_refs().into_iter().for_each(|c| c.collect_variables(out)),
        }
    }

    pub fn max_variable(&self) -> Option<usize> {
        let mut s = BTreeSet::new();
        self.collect_variables(&mut s);
        s.last().copied()
    }

    /// Placeholder indices in left-to-right order of occurrence.
    pub fn coefficient_occurrences(&self, out: &mut Vec<usize>) {
        match self {
            AlgExpr::Coef(i) => out.push(*i),
            _ => self
                .child_refs()
                .into_iter()
                .for_each(|c| c.coefficient_occurrences(out)),
        }
    }

    pub fn map_coefficients(&mut self, f: &mut impl FnMut(usize) -> usize) {
        match self {
            AlgExpr::Coef(i) => *i = f(*i),
            AlgExpr::Sum(ts) => ts.iter_mut().for_each(|t| t.map_coefficients(f)),
            AlgExpr::Product { factors, .. } => {
                factors.iter_mut().for_each(|t| t.map_coefficients(f))
            }
            AlgExpr::Div(a, b) | AlgExpr::Pow(a, b) => {
                a.map_coefficients(f);
                b.map_coefficients(f);
            }
            AlgExpr::Unary(_, a) => a.map_coefficients(f),
            _ => {}
        }
    }

    /// Reference evaluation by recursion.
    pub fn eval(&self, x: &[f64], coefs: &[f64]) -> f64 {
        match self {
            AlgExpr::Const(v) => *v,
            AlgExpr::Coef(i) => coefs[*i],
            AlgExpr::Var(i) => x[*i],
            AlgExpr::Sum(ts) => ts.iter().map(|t| t.eval(x, coefs)).sum(),
            AlgExpr::Product { negated, factors } => {
                let p: f64 = factors.iter().map(|t| t.eval(x, coefs)).product();
                if *negated {
                    -p
                } else {
                    p
                }
            }
            AlgExpr::Div(a, b) => a.eval(x, coefs) / b.eval(x, coefs),
            AlgExpr::Pow(a, b) => a.eval(x, coefs).powf(b.eval(x, coefs)),
            AlgExpr::Unary(f, a) => f.apply(a.eval(x, coefs)),
        }
    }

    /// Commutation- and index-insensitive key.
    pub fn canonical_key(&self) -> String {
        match self {
            AlgExpr::Const(v) => format!("{v}"),
            AlgExpr::Coef(_) => "c".to_string(),
            AlgExpr::Var(i) => format!("x_{i}"),
            AlgExpr::Sum(ts) => sorted_group("+", ts.iter().map(AlgExpr::canonical_key)),
            AlgExpr::Product { negated, factors } => sorted_group(
                if *negated { "*-" } else { "*" },
                factors.iter().map(AlgExpr::canonical_key),
            ),
            AlgExpr::Div(a, b) => format!("(/ {} {})", a.canonical_key(), b.canonical_key()),
            AlgExpr::Pow(a, b) => format!("(^ {} {})", a.canonical_key(), b.canonical_key()),
            AlgExpr::Unary(f, a) => format!("({} {})", f.name(), a.canonical_key()),
        }
    }

    /// Prints with every placeholder shown as a bare `c`.
    pub fn skeleton_string(&self) -> String {
        let mut s = String::new();
        write_expr(self, &mut s, false).expect("writing to a String cannot fail");
        s
    }
}

fn sorted_group(op: &str, keys: impl Iterator<Item = String>) -> String {
    let mut keys: Vec<String> = keys.collect();
    keys.sort();
    format!("({op} {})", keys.join(" "))
}

/// Label used by tree edit distance: kind plus function name or variable
/// index. All placeholders share one label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AlgLabel {
    Const(u64),
    Coef,
    Var(usize),
    Sum,
    Product(bool),
    Div,
    Pow,
    Func(Func),
}

impl LabeledTree for AlgExpr {
    type Label = AlgLabel;

    fn label(&self) -> AlgLabel {
        match self {
            AlgExpr::Const(v) => AlgLabel::Const(v.to_bits()),
            AlgExpr::Coef(_) => AlgLabel::Coef,
            AlgExpr::Var(i) => AlgLabel::Var(*i),
            AlgExpr::Sum(_) => AlgLabel::Sum,
            AlgExpr::Product { negated, .. } => AlgLabel::Product(*negated),
            AlgExpr::Div(..) => AlgLabel::Div,
            AlgExpr::Pow(..) => AlgLabel::Pow,
            AlgExpr::Unary(f, _) => AlgLabel::Func(*f),
        }
    }

    fn child_nodes(&self) -> Vec<&Self> {
        self.child_refs()
    }
}

// ----------------------------------------------------------------------------
// Printing

fn is_negative_const(e: &AlgExpr) -> bool {
    matches!(e, AlgExpr::Const(v) if v.is_sign_negative())
}

/// Operands that can sit next to `**` or on the right of `/` unparenthesized.
fn is_atomic(e: &AlgExpr) -> bool {
    match e {
        AlgExpr::Const(v) => !v.is_sign_negative(),
        AlgExpr::Coef(_) | AlgExpr::Var(_) | AlgExpr::Unary(..) => true,
        _ => false,
    }
}

fn write_coef(i: usize, out: &mut String, indexed: bool) -> fmt::Result {
    if indexed {
        write!(out, "c_{i}")
    } else {
        out.push('c');
        Ok(())
    }
}

fn write_paren(e: &AlgExpr, out: &mut String, indexed: bool) -> fmt::Result {
    out.push('(');
    write_expr(e, out, indexed)?;
    out.push(')');
    Ok(())
}

/// Writes factors of a product without its sign.
fn write_factors(
    factors: &[AlgExpr],
    negated: bool,
    out: &mut String,
    indexed: bool,
) -> fmt::Result {
    for (k, f) in factors.iter().enumerate() {
        if k > 0 {
            out.push('*');
        }
        let paren = match f {
            AlgExpr::Sum(_) => true,
            AlgExpr::Div(..) => k > 0 || negated,
            AlgExpr::Const(_) => k > 0 && is_negative_const(f),
            _ => false,
        };
        if paren {
            write_paren(f, out, indexed)?;
        } else {
            write_expr(f, out, indexed)?;
        }
    }
    Ok(())
}

/// Splits a sum term into (is_negative, unsigned text).
fn signed_term(e: &AlgExpr, indexed: bool) -> Result<(bool, String), fmt::Error> {
    let mut s = String::new();
    match e {
        AlgExpr::Product {
            negated: true,
            factors,
        } => {
            write_factors(factors, true, &mut s, indexed)?;
            Ok((true, s))
        }
        AlgExpr::Product {
            negated: false,
            factors,
        } if is_negative_const(&factors[0]) => {
            let mut fs = factors.clone();
            if let AlgExpr::Const(v) = &mut fs[0] {
                *v = -*v;
            }
            write_factors(&fs, false, &mut s, indexed)?;
            Ok((true, s))
        }
        AlgExpr::Const(v) if v.is_sign_negative() => {
            write!(s, "{}", -v)?;
            Ok((true, s))
        }
        other => {
            write_expr(other, &mut s, indexed)?;
            Ok((false, s))
        }
    }
}

pub(crate) fn write_expr(e: &AlgExpr, out: &mut String, indexed: bool) -> fmt::Result {
    match e {
        AlgExpr::Const(v) => write!(out, "{v}"),
        AlgExpr::Coef(i) => write_coef(*i, out, indexed),
        AlgExpr::Var(i) => write!(out, "x_{i}"),
        AlgExpr::Sum(ts) => {
            for (k, t) in ts.iter().enumerate() {
                let (neg, text) = signed_term(t, indexed)?;
                match (k, neg) {
                    (0, true) => {
                        out.push('-');
                    }
                    (0, false) => {}
                    (_, true) => out.push_str(" - "),
                    (_, false) => out.push_str(" + "),
                }
                out.push_str(&text);
            }
            Ok(())
        }
        AlgExpr::Product { negated, factors } => {
            if *negated {
                out.push('-');
            }
            write_factors(factors, *negated, out, indexed)
        }
        AlgExpr::Div(a, b) => {
            if matches!(**a, AlgExpr::Sum(_)) {
                write_paren(a, out, indexed)?;
            } else {
                write_expr(a, out, indexed)?;
            }
            out.push('/');
            if is_atomic(b) {
                write_expr(b, out, indexed)
            } else {
                write_paren(b, out, indexed)
            }
        }
        AlgExpr::Pow(a, b) => {
            for (k, side) in [a, b].into_iter().enumerate() {
                if k == 1 {
                    out.push_str("**");
                }
                if is_atomic(side) {
                    write_expr(side, out, indexed)?;
                } else {
                    write_paren(side, out, indexed)?;
                }
            }
            Ok(())
        }
        AlgExpr::Unary(f, a) => {
            out.push_str(f.name());
            write_paren(a, out, indexed)
        }
    }
}

impl fmt::Display for AlgExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(self, &mut s, true)?;
        f.write_str(&s)
    }
}

// ----------------------------------------------------------------------------
// Systems

/// `dim` right-hand sides, equation `i` giving dx_i/dt.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicSystem {
    dim: usize,
    equations: Vec<AlgExpr>,
}

impl AlgebraicSystem {
    pub fn new(equations: Vec<AlgExpr>) -> Result<Self, ExprError> {
        let dim = equations.len();
        if dim == 0 {
            return Err(ExprError::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        for eq in &equations {
            if let Some(v) = eq.max_variable() {
                if v >= dim {
                    return Err(ExprError::VariableOutOfRange {
                        index: v,
                        dim,
                        pos: 0,
                    });
                }
            }
        }
        Ok(AlgebraicSystem { dim, equations })
    }

    pub fn parse(text: &str, dim: usize) -> Result<Self, ExprError> {
        super::parse::parse_algebraic(text, dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn equations(&self) -> &[AlgExpr] {
        &self.equations
    }

    pub fn equations_mut(&mut self) -> &mut [AlgExpr] {
        &mut self.equations
    }

    pub fn into_equations(self) -> Vec<AlgExpr> {
        self.equations
    }

    /// Number of distinct placeholder indices.
    pub fn num_coefficients(&self) -> usize {
        let mut occ = Vec::new();
        for eq in &self.equations {
            eq.coefficient_occurrences(&mut occ);
        }
        occ.into_iter().collect::<BTreeSet<_>>().len()
    }

    /// Renumbers placeholders densely in order of first occurrence.
    pub fn renumber_coefficients(&mut self) {
        let mut seen: Vec<usize> = Vec::new();
        for eq in &mut self.equations {
            eq.map_coefficients(&mut |i| match seen.iter().position(|&s| s == i) {
                Some(p) => p,
                None => {
                    seen.push(i);
                    seen.len() - 1
                }
            });
        }
    }

    /// Gives every placeholder occurrence its own index, left to right.
    pub fn unshare_coefficients(&mut self) {
        let mut next = 0;
        for eq in &mut self.equations {
            eq.map_coefficients(&mut |_| {
                next += 1;
                next - 1
            });
        }
    }

    pub fn complexity(&self) -> usize {
        self.equations.iter().map(AlgExpr::complexity).sum()
    }

    pub fn depth(&self) -> usize {
        self.equations.iter().map(AlgExpr::depth).max().unwrap_or(0)
    }

    pub fn free_variables(&self) -> BTreeSet<usize> {
        let mut s = BTreeSet::new();
        for eq in &self.equations {
            eq.collect_variables(&mut s);
        }
        s
    }

    pub fn canonical_key(&self) -> String {
        self.equations
            .iter()
            .map(AlgExpr::canonical_key)
            .collect::<Vec<_>>()
            .join(" | ")
    }

    /// Bare-`c` rendering used when presenting skeletons to a model.
    pub fn skeleton_string(&self) -> String {
        self.equations
            .iter()
            .map(AlgExpr::skeleton_string)
            .collect::<Vec<_>>()
            .join(" | ")
    }

    pub fn compile(&self) -> CompiledSystem {
        CompiledSystem::new(self)
    }
}

impl fmt::Display for AlgebraicSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, eq) in self.equations.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{eq}")?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct SystemWire {
    eq: String,
    dim: usize,
}

impl Serialize for AlgebraicSystem {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SystemWire {
            eq: self.to_string(),
            dim: self.dim,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AlgebraicSystem {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = SystemWire::deserialize(d)?;
        AlgebraicSystem::parse(&w.eq, w.dim).map_err(serde::de::Error::custom)
    }
}

// ----------------------------------------------------------------------------
// Compiled evaluation

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Coef(usize),
    Var(usize),
    Add(usize),
    Mul(usize, bool),
    Div,
    Pow,
    Func(Func),
}

/// Postfix program for fast repeated evaluation of one expression.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    ops: Vec<Op>,
}

impl CompiledExpr {
    pub fn new(e: &AlgExpr) -> Self {
        let mut ops = Vec::new();
        emit(e, &mut ops);
        CompiledExpr { ops }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], coefs: &[f64], stack: &mut Vec<f64>) -> f64 {
        stack.clear();
        for op in &self.ops {
            match *op {
                Op::Const(v) => stack.push(v),
                Op::Coef(i) => stack.push(coefs[i]),
                Op::Var(i) => stack.push(x[i]),
                Op::Add(n) => {
                    let at = stack.len() - n;
                    let s: f64 = stack[at..].iter().sum();
                    stack.truncate(at);
                    stack.push(s);
                }
                Op::Mul(n, neg) => {
                    let at = stack.len() - n;
                    let p: f64 = stack[at..].iter().product();
                    stack.truncate(at);
                    stack.push(if neg { -p } else { p });
                }
                Op::Div => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    stack.push(a / b);
                }
                Op::Pow => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    stack.push(a.powf(b));
                }
                Op::Func(f) => {
                    let a = stack.pop().unwrap();
                    stack.push(f.apply(a));
                }
            }
        }
        stack[0]
    }
}

fn emit(e: &AlgExpr, ops: &mut Vec<Op>) {
    match e {
        AlgExpr::Const(v) => ops.push(Op::Const(*v)),
        AlgExpr::Coef(i) => ops.push(Op::Coef(*i)),
        AlgExpr::Var(i) => ops.push(Op::Var(*i)),
        AlgExpr::Sum(ts) => {
            ts.iter().for_each(|t| emit(t, ops));
            ops.push(Op::Add(ts.len()));
        }
        AlgExpr::Product { negated, factors } => {
            factors.iter().for_each(|t| emit(t, ops));
            ops.push(Op::Mul(factors.len(), *negated));
        }
        AlgExpr::Div(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Div);
        }
        AlgExpr::Pow(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Pow);
        }
        AlgExpr::Unary(f, a) => {
            emit(a, ops);
            ops.push(Op::Func(*f));
        }
    }
}

/// All right-hand sides of a system compiled together.
#[derive(Debug, Clone)]
pub struct CompiledSystem {
    equations: Vec<CompiledExpr>,
    num_coefficients: usize,
}

impl CompiledSystem {
    pub fn new(system: &AlgebraicSystem) -> Self {
        CompiledSystem {
            equations: system.equations.iter().map(CompiledExpr::new).collect(),
            num_coefficients: system.num_coefficients(),
        }
    }

    pub fn dim(&self) -> usize {
        self.equations.len()
    }

    pub fn num_coefficients(&self) -> usize {
        self.num_coefficients
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], coefs: &[f64], out: &mut [f64], stack: &mut Vec<f64>) {
        for (o, eq) in out.iter_mut().zip(&self.equations) {
            *o = eq.eval(x, coefs, stack);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_folds_sign_into_literal() {
        let e = AlgExpr::product(true, [AlgExpr::Const(2.0), AlgExpr::Var(0)]);
        assert_eq!(
            e,
            AlgExpr::Product {
                negated: false,
                factors: vec![AlgExpr::Const(-2.0), AlgExpr::Var(0)]
            }
        );
        assert_eq!(AlgExpr::Var(0).negate().negate(), AlgExpr::Var(0));
    }

    #[test]
    fn nested_products_and_sums_flatten() {
        let inner = AlgExpr::product(true, [AlgExpr::Var(0), AlgExpr::Var(1)]);
        let e = AlgExpr::product(false, [AlgExpr::Coef(0), inner]);
        match e {
            AlgExpr::Product { negated, factors } => {
                assert!(negated);
                assert_eq!(factors.len(), 3);
            }
            _ => panic!("expected product"),
        }
        let s = AlgExpr::sum([AlgExpr::sum([AlgExpr::Var(0), AlgExpr::Var(1)]), AlgExpr::Var(2)]);
        assert_eq!(s.child_refs().len(), 3);
    }

    #[test]
    fn compiled_matches_reference() {
        let sys = AlgebraicSystem::parse("c*x_0*(1 - x_0/c) + sin(x_1)**2 | -exp(x_0)/c", 2).unwrap();
        let prog = sys.compile();
        let x = [0.7, -1.3];
        let c = [0.5, 3.0, 1.5];
        let mut out = [0.0; 2];
        let mut stack = Vec::new();
        prog.eval_into(&x, &c, &mut out, &mut stack);
        for (o, eq) in out.iter().zip(sys.equations()) {
            assert_eq!(*o, eq.eval(&x, &c));
        }
    }

    #[test]
    fn guarded_functions_return_non_finite() {
        let e = AlgebraicSystem::parse("log(x_0) + sqrt(x_0)", 1).unwrap();
        assert!(!e.equations()[0].eval(&[-1.0], &[]).is_finite());
        let d = AlgebraicSystem::parse("1/x_0", 1).unwrap();
        assert!(!d.equations()[0].eval(&[0.0], &[]).is_finite());
    }
}
