//! Zhang–Shasha ordered tree edit distance with unit costs.

/// An ordered, labeled tree.
pub trait LabeledTree {
    type Label: PartialEq + Clone;

    fn label(&self) -> Self::Label;
    fn child_nodes(&self) -> Vec<&Self>;
}

/// Postorder layout with leftmost-leaf descendants and keyroots.
#[derive(Debug, Clone)]
pub struct Postorder<L> {
    labels: Vec<L>,
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<L: PartialEq + Clone> Postorder<L> {
    pub fn from_tree<T: LabeledTree<Label = L>>(root: &T) -> Self {
        let mut labels = Vec::new();
        let mut leftmost = Vec::new();
        fn walk<T: LabeledTree>(
            node: &T,
            labels: &mut Vec<T::Label>,
            leftmost: &mut Vec<usize>,
        ) -> usize {
            let mut first_leaf = None;
            for child in node.child_nodes() {
                let idx = walk(child, labels, leftmost);
                first_leaf.get_or_insert(leftmost[idx]);
            }
            labels.push(node.label());
            let me = labels.len() - 1;
            leftmost.push(first_leaf.unwrap_or(me));
            me
        }
        walk(root, &mut labels, &mut leftmost);
        Self::finish(labels, leftmost)
    }

    /// Builds from postorder labels and leftmost-leaf indices directly.
    pub fn from_parts(labels: Vec<L>, leftmost: Vec<usize>) -> Self {
        assert_eq!(labels.len(), leftmost.len());
        Self::finish(labels, leftmost)
    }

    fn finish(labels: Vec<L>, leftmost: Vec<usize>) -> Self {
        let n = labels.len();
        let mut keyroots: Vec<usize> = (0..n)
            .filter(|&i| !(i + 1..n).any(|j| leftmost[j] == leftmost[i]))
            .collect();
        keyroots.sort_unstable();
        Postorder {
            labels,
            leftmost,
            keyroots,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Minimal number of unit-cost insertions, deletions and relabelings.
pub fn zhang_shasha<L: PartialEq + Clone>(a: &Postorder<L>, b: &Postorder<L>) -> usize {
    let (na, nb) = (a.len(), b.len());
    if na == 0 || nb == 0 {
        return na + nb;
    }
    let mut td = vec![0usize; na * nb];
    let mut fd = vec![0usize; (na + 1) * (nb + 1)];
    let w = nb + 1;
    for &i in &a.keyroots {
        for &j in &b.keyroots {
            let li = a.leftmost[i];
            let lj = b.leftmost[j];
            let m = i - li + 2;
            let n = j - lj + 2;
            fd[0] = 0;
            for x in 1..m {
                fd[x * w] = fd[(x - 1) * w] + 1;
            }
            for y in 1..n {
                fd[y] = fd[y - 1] + 1;
            }
            for x in 1..m {
                let ai = li + x - 1;
                for y in 1..n {
                    let bj = lj + y - 1;
                    let del = fd[(x - 1) * w + y] + 1;
                    let ins = fd[x * w + y - 1] + 1;
                    if a.leftmost[ai] == li && b.leftmost[bj] == lj {
                        let cost = usize::from(a.labels[ai] != b.labels[bj]);
                        let sub = fd[(x - 1) * w + y - 1] + cost;
                        let v = del.min(ins).min(sub);
                        fd[x * w + y] = v;
                        td[ai * nb + bj] = v;
                    } else {
                        let p = a.leftmost[ai] - li;
                        let q = b.leftmost[bj] - lj;
                        let sub = fd[p * w + q] + td[ai * nb + bj];
                        fd[x * w + y] = del.min(ins).min(sub);
                    }
                }
            }
        }
    }
    td[(na - 1) * nb + (nb - 1)]
}

pub fn tree_edit_distance<T: LabeledTree>(a: &T, b: &T) -> usize {
    zhang_shasha(&Postorder::from_tree(a), &Postorder::from_tree(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct N(char, Vec<N>);

    impl LabeledTree for N {
        type Label = char;
        fn label(&self) -> char {
            self.0
        }
        fn child_nodes(&self) -> Vec<&Self> {
            self.1.iter().collect()
        }
    }

    fn leaf(c: char) -> N {
        N(c, vec![])
    }

    #[test]
    fn classic_example() {
        // f(d(a, c(b)), e) vs f(c(d(a, b)), e): distance 2
        let a = N(
            'f',
            vec![N('d', vec![leaf('a'), N('c', vec![leaf('b')])]), leaf('e')],
        );
        let b = N(
            'f',
            vec![N('c', vec![N('d', vec![leaf('a'), leaf('b')])]), leaf('e')],
        );
        assert_eq!(tree_edit_distance(&a, &b), 2);
        assert_eq!(tree_edit_distance(&b, &a), 2);
        assert_eq!(tree_edit_distance(&a, &a), 0);
    }

    #[test]
    fn single_relabel_and_growth() {
        assert_eq!(tree_edit_distance(&leaf('a'), &leaf('b')), 1);
        assert_eq!(tree_edit_distance(&leaf('a'), &N('b', vec![leaf('a')])), 1);
        assert_eq!(
            tree_edit_distance(&N('a', vec![leaf('b'), leaf('c')]), &leaf('b')),
            2
        );
    }
}
