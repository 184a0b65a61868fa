use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{pick, GpConfig, Genome, Operator};
use crate::expr::{AlgExpr, AlgebraicSystem, Func, Structure};

const SUBTREE_DEPTH: usize = 3;

fn children_mut(e: &mut AlgExpr) -> Vec<&mut AlgExpr> {
    match e {
        AlgExpr::Sum(ts) => ts.iter_mut().collect(),
        AlgExpr::Product { factors, .. } => factors.iter_mut().collect(),
        AlgExpr::Div(a, b) | AlgExpr::Pow(a, b) => vec![a.as_mut(), b.as_mut()],
        AlgExpr::Unary(_, a) => vec![a.as_mut()],
        _ => Vec::new(),
    }
}

/// Node `idx` in preorder together with its depth (root = 1).
fn node_at(e: &mut AlgExpr, idx: usize) -> (&mut AlgExpr, usize) {
    fn walk<'a>(e: &'a mut AlgExpr, idx: &mut usize, depth: usize) -> Option<(&'a mut AlgExpr, usize)> {
        if *idx == 0 {
            return Some((e, depth));
        }
        *idx -= 1;
        for c in children_mut(e) {
            let n = c.node_count();
            if *idx < n {
                return walk(c, idx, depth + 1);
            }
            *idx -= n;
        }
        None
    }
    let mut i = idx;
    walk(e, &mut i, 1).expect("node index within tree")
}

fn terminal(dim: usize, rng: &mut ChaCha8Rng) -> AlgExpr {
    let r: f64 = rng.gen();
    if r < 0.5 {
        AlgExpr::Var(rng.gen_range(0..dim))
    } else if r < 0.9 {
        AlgExpr::Coef(0)
    } else {
        AlgExpr::Const(1.0)
    }
}

pub(super) fn random_expr(
    dim: usize,
    depth: usize,
    full: bool,
    ops: &[Operator],
    rng: &mut ChaCha8Rng,
) -> AlgExpr {
    let leaf_prob = 0.3;
    if depth <= 1 || (!full && rng.gen::<f64>() < leaf_prob) {
        return terminal(dim, rng);
    }
    let sub = |rng: &mut ChaCha8Rng| random_expr(dim, depth - 1, full, ops, rng);
    match *pick(ops, rng) {
        Operator::Add => AlgExpr::sum([sub(rng), sub(rng)]),
        Operator::Sub => {
            let a = sub(rng);
            AlgExpr::sum([a, sub(rng).negate()])
        }
        Operator::Mul => AlgExpr::product(false, [sub(rng), sub(rng)]),
        Operator::Div => AlgExpr::div(sub(rng), sub(rng)),
        Operator::Pow => {
            let exp = if rng.gen_bool(0.5) { 2.0 } else { 3.0 };
            AlgExpr::pow(sub(rng), AlgExpr::Const(exp))
        }
        op => AlgExpr::unary(op.func().expect("unary operator"), sub(rng)),
    }
}

fn unary_funcs(ops: &[Operator]) -> Vec<Func> {
    ops.iter().filter_map(|o| o.func()).collect()
}

fn relabel(node: &mut AlgExpr, dim: usize, ops: &[Operator], rng: &mut ChaCha8Rng) {
    let replacement = match std::mem::replace(node, AlgExpr::Const(0.0)) {
        AlgExpr::Var(i) if dim > 1 && rng.gen_bool(0.5) => {
            let j = (i + rng.gen_range(1..dim)) % dim;
            AlgExpr::Var(j)
        }
        AlgExpr::Var(_) | AlgExpr::Const(_) => AlgExpr::Coef(0),
        AlgExpr::Coef(_) => AlgExpr::Var(rng.gen_range(0..dim)),
        AlgExpr::Sum(ts) => AlgExpr::product(false, ts),
        AlgExpr::Product { negated, factors } => {
            let terms = factors.into_iter();
            let s = AlgExpr::sum(terms);
            if negated {
                s.negate()
            } else {
                s
            }
        }
        AlgExpr::Div(a, b) => AlgExpr::product(false, [*a, *b]),
        AlgExpr::Pow(a, b) => AlgExpr::div(*a, *b),
        AlgExpr::Unary(f, a) => {
            let others: Vec<Func> = unary_funcs(ops).into_iter().filter(|&g| g != f).collect();
            if others.is_empty() {
                *a
            } else {
                AlgExpr::unary(*pick(&others, rng), *a)
            }
        }
    };
    *node = replacement;
}

fn toggle_coefficient(eq: &mut AlgExpr, idx: usize, rng: &mut ChaCha8Rng) {
    // removal: drop a placeholder operand of a sum or product
    if rng.gen_bool(0.5) {
        let n = eq.node_count();
        let mut holders = Vec::new();
        for i in 0..n {
            let (node, _) = node_at(eq, i);
            let has = match node {
                AlgExpr::Sum(ts) => ts.iter().any(|t| matches!(t, AlgExpr::Coef(_))),
                AlgExpr::Product { factors, .. } => {
                    factors.iter().any(|t| matches!(t, AlgExpr::Coef(_)))
                }
                _ => false,
            };
            if has {
                holders.push(i);
            }
        }
        if !holders.is_empty() {
            let at = *pick(&holders, rng);
            let (node, _) = node_at(eq, at);
            let items = match node {
                AlgExpr::Sum(ts) => ts,
                AlgExpr::Product { factors, .. } => factors,
                _ => unreachable!(),
            };
            let coefs: Vec<usize> = (0..items.len())
                .filter(|&k| matches!(items[k], AlgExpr::Coef(_)))
                .collect();
            items.remove(*pick(&coefs, rng));
            return;
        }
    }
    let (node, _) = node_at(eq, idx);
    let inner = std::mem::replace(node, AlgExpr::Const(0.0));
    *node = if rng.gen_bool(0.5) {
        AlgExpr::product(false, [AlgExpr::Coef(0), inner])
    } else {
        AlgExpr::sum([inner, AlgExpr::Coef(0)])
    };
}

/// Restores the invariants every genome carries: flattened operators and
/// one fresh placeholder index per occurrence.
fn tidy(mut eqs: Vec<AlgExpr>) -> AlgebraicSystem {
    for e in &mut eqs {
        repair(e);
        *e = std::mem::replace(e, AlgExpr::Const(0.0)).normalized();
    }
    let mut s = AlgebraicSystem::new(eqs).expect("operators keep variables in range");
    s.unshare_coefficients();
    s
}

/// Replaces operators that lost all operands after a removal.
fn repair(e: &mut AlgExpr) {
    for c in children_mut(e) {
        repair(c);
    }
    let empty = match e {
        AlgExpr::Sum(ts) => ts.is_empty(),
        AlgExpr::Product { factors, .. } => factors.is_empty(),
        _ => false,
    };
    if empty {
        *e = AlgExpr::Coef(0);
    } else if let AlgExpr::Sum(ts) = e {
        if ts.len() == 1 {
            *e = ts.pop().unwrap();
        }
    } else if let AlgExpr::Product { negated, factors } = e {
        if factors.len() == 1 {
            let f = factors.pop().unwrap();
            *e = if *negated { f.negate() } else { f };
        }
    }
}

impl Genome for AlgebraicSystem {
    fn dim(&self) -> usize {
        AlgebraicSystem::dim(self)
    }

    fn key(&self) -> String {
        self.canonical_key()
    }

    fn complexity(&self) -> usize {
        AlgebraicSystem::complexity(self)
    }

    fn depth(&self) -> usize {
        AlgebraicSystem::depth(self)
    }

    fn random(dim: usize, depth: usize, full: bool, cfg: &GpConfig, rng: &mut ChaCha8Rng) -> Self {
        let eqs = (0..dim)
            .map(|_| random_expr(dim, depth, full, &cfg.operators, rng))
            .collect();
        tidy(eqs)
    }

    fn mutate(&self, cfg: &GpConfig, rng: &mut ChaCha8Rng) -> Self {
        let dim = self.dim();
        let mut eqs = self.equations().to_vec();
        let e = rng.gen_range(0..dim);
        let idx = rng.gen_range(0..eqs[e].node_count());
        match rng.gen_range(0..3) {
            0 => {
                let (node, depth) = node_at(&mut eqs[e], idx);
                let room = cfg.depth_cap.saturating_sub(depth) + 1;
                let d = rng.gen_range(1..=room.clamp(1, SUBTREE_DEPTH));
                *node = random_expr(dim, d, false, &cfg.operators, rng);
            }
            1 => relabel(node_at(&mut eqs[e], idx).0, dim, &cfg.operators, rng),
            _ => toggle_coefficient(&mut eqs[e], idx, rng),
        }
        let child = tidy(eqs);
        if child.depth() > cfg.depth_cap {
            self.clone()
        } else {
            child
        }
    }

    fn crossover(&self, other: &Self, cfg: &GpConfig, rng: &mut ChaCha8Rng) -> (Self, Self) {
        let e = rng.gen_range(0..self.dim());
        let mut a = self.equations().to_vec();
        let mut b = other.equations().to_vec();
        let ia = rng.gen_range(0..a[e].node_count());
        let ib = rng.gen_range(0..b[e].node_count());
        std::mem::swap(node_at(&mut a[e], ia).0, node_at(&mut b[e], ib).0);
        let (ca, cb) = (tidy(a), tidy(b));
        // an oversized child cancels the exchange so node material is conserved
        if ca.depth() > cfg.depth_cap || cb.depth() > cfg.depth_cap {
            return (self.clone(), other.clone());
        }
        (ca, cb)
    }

    fn to_structure(&self) -> Structure {
        Structure::Cde(self.clone())
    }
}
