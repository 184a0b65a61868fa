use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{GpConfig, Genome};
use crate::expr::{BoolExpr, BooleanNetwork, Structure};

const SUBTREE_DEPTH: usize = 3;

fn children_mut(e: &mut BoolExpr) -> Vec<&mut BoolExpr> {
    match e {
        BoolExpr::Var(_) => Vec::new(),
        BoolExpr::Not(a) => vec![a.as_mut()],
        BoolExpr::And(xs) | BoolExpr::Or(xs) => xs.iter_mut().collect(),
    }
}

fn node_at(e: &mut BoolExpr, idx: usize) -> (&mut BoolExpr, usize) {
    fn walk<'a>(e: &'a mut BoolExpr, idx: &mut usize, depth: usize) -> Option<(&'a mut BoolExpr, usize)> {
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

pub(super) fn random_rule(dim: usize, depth: usize, full: bool, rng: &mut ChaCha8Rng) -> BoolExpr {
    if depth <= 1 || (!full && rng.gen::<f64>() < 0.3) {
        return BoolExpr::Var(rng.gen_range(0..dim));
    }
    let sub = |rng: &mut ChaCha8Rng| random_rule(dim, depth - 1, full, rng);
    match rng.gen_range(0..3) {
        0 => BoolExpr::not(sub(rng)),
        1 => BoolExpr::and([sub(rng), sub(rng)]),
        _ => BoolExpr::or([sub(rng), sub(rng)]),
    }
}

fn relabel(node: &mut BoolExpr, dim: usize, rng: &mut ChaCha8Rng) {
    *node = match std::mem::replace(node, BoolExpr::Var(0)) {
        BoolExpr::Var(i) if dim > 1 => BoolExpr::Var((i + rng.gen_range(1..dim)) % dim),
        BoolExpr::And(xs) => BoolExpr::Or(xs),
        BoolExpr::Or(xs) => BoolExpr::And(xs),
        other => other,
    };
}

fn toggle_not(node: &mut BoolExpr) {
    *node = match std::mem::replace(node, BoolExpr::Var(0)) {
        BoolExpr::Not(a) => *a,
        other => BoolExpr::not(other),
    };
}

fn tidy(rules: Vec<BoolExpr>) -> BooleanNetwork {
    let rules = rules.into_iter().map(BoolExpr::normalized).collect();
    BooleanNetwork::new(rules).expect("operators keep variables in range")
}

impl Genome for BooleanNetwork {
    fn dim(&self) -> usize {
        BooleanNetwork::dim(self)
    }

    fn key(&self) -> String {
        self.canonical_key()
    }

    fn complexity(&self) -> usize {
        BooleanNetwork::complexity(self)
    }

    fn depth(&self) -> usize {
        BooleanNetwork::depth(self)
    }

    fn random(dim: usize, depth: usize, full: bool, _cfg: &GpConfig, rng: &mut ChaCha8Rng) -> Self {
        tidy((0..dim).map(|_| random_rule(dim, depth, full, rng)).collect())
    }

    fn mutate(&self, cfg: &GpConfig, rng: &mut ChaCha8Rng) -> Self {
        let dim = self.dim();
        let mut rules = self.rules().to_vec();
        let r = rng.gen_range(0..dim);
        let idx = rng.gen_range(0..rules[r].node_count());
        let (node, depth) = node_at(&mut rules[r], idx);
        match rng.gen_range(0..3) {
            0 => {
                let room = cfg.depth_cap.saturating_sub(depth) + 1;
                let d = rng.gen_range(1..=room.clamp(1, SUBTREE_DEPTH));
                *node = random_rule(dim, d, false, rng);
            }
            1 => relabel(node, dim, rng),
            _ => toggle_not(node),
        }
        let child = tidy(rules);
        if child.depth() > cfg.depth_cap {
            self.clone()
        } else {
            child
        }
    }

    fn crossover(&self, other: &Self, cfg: &GpConfig, rng: &mut ChaCha8Rng) -> (Self, Self) {
        let r = rng.gen_range(0..self.dim());
        let mut a = self.rules().to_vec();
        let mut b = other.rules().to_vec();
        let ia = rng.gen_range(0..a[r].node_count());
        let ib = rng.gen_range(0..b[r].node_count());
        std::mem::swap(node_at(&mut a[r], ia).0, node_at(&mut b[r], ib).0);
        let (ca, cb) = (tidy(a), tidy(b));
        // an oversized child cancels the exchange so node material is conserved
        if ca.depth() > cfg.depth_cap || cb.depth() > cfg.depth_cap {
            return (self.clone(), other.clone());
        }
        (ca, cb)
    }

    fn to_structure(&self) -> Structure {
        Structure::Bn(self.clone())
    }
}
