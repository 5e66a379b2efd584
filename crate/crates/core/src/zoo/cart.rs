//! Greedy regression tree with Poisson-deviance splits.

use super::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::estimators::FitAlgorithm;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

fn xlogx(v: f64) -> f64 {
    if v > 0.0 {
        v * v.ln()
    } else {
        0.0
    }
}

/// Deviance of a node with count sum `s`, `Σ y log y = sylogy` and size `m`,
/// fitted by its own mean.
fn node_deviance(s: f64, sylogy: f64, m: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        2.0 * (sylogy - s * (s / m).ln())
    }
}

struct Builder<'a> {
    x: &'a DesignMatrix,
    y: &'a [u64],
    max_depth: usize,
    min_leaf: usize,
}

impl Builder<'_> {
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let m = idx.len();
        if m < 2 * self.min_leaf {
            return None;
        }
        let total_s: f64 = idx.iter().map(|&i| self.y[i] as f64).sum();
        let total_l: f64 = idx.iter().map(|&i| xlogx(self.y[i] as f64)).sum();
        let parent = node_deviance(total_s, total_l, m as f64);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for j in 0..self.x.cols() {
            order.sort_by(|&a, &b| self.x.get(a, j).total_cmp(&self.x.get(b, j)));
            let (mut s, mut l) = (0.0, 0.0);
            for k in 0..m - 1 {
                let yi = self.y[order[k]] as f64;
                s += yi;
                l += xlogx(yi);
                let left_n = k + 1;
                let (lo, hi) = (self.x.get(order[k], j), self.x.get(order[k + 1], j));
                if lo == hi || left_n < self.min_leaf || m - left_n < self.min_leaf {
                    continue;
                }
                let child = node_deviance(s, l, left_n as f64)
                    + node_deviance(total_s - s, total_l - l, (m - left_n) as f64);
                let gain = parent - child;
                let threshold = 0.5 * (lo + hi);
                // strict improvement only, so earlier features and smaller thresholds win ties
                if gain > 1e-12 * parent.max(1.0) && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, j, threshold));
                }
            }
        }
        best.map(|(_, j, t)| (j, t))
    }

    fn build(&self, idx: &[usize], depth: usize) -> Node {
        let mean = idx.iter().map(|&i| self.y[i] as f64).sum::<f64>() / idx.len() as f64;
        if depth >= self.max_depth {
            return Node::Leaf(mean);
        }
        match self.best_split(idx) {
            None => Node::Leaf(mean),
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx
                    .iter()
                    .partition(|&&i| self.x.get(i, feature) <= threshold);
                Node::Split {
                    feature,
                    threshold,
                    left: Box::new(self.build(&l, depth + 1)),
                    right: Box::new(self.build(&r, depth + 1)),
                }
            }
        }
    }
}

fn predict(node: &Node, row: &[f64]) -> f64 {
    match node {
        Node::Leaf(v) => *v,
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if row[*feature] <= *threshold {
                predict(left, row)
            } else {
                predict(right, row)
            }
        }
    }
}

fn count_leaves(node: &Node) -> usize {
    match node {
        Node::Leaf(_) => 1,
        Node::Split { left, right, .. } => count_leaves(left) + count_leaves(right),
    }
}

/// Regression tree on a fixed design; each fit grows a fresh tree.
#[derive(Debug, Clone)]
pub struct PoissonTree {
    pub x: DesignMatrix,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl PoissonTree {
    pub fn new(x: DesignMatrix, max_depth: usize, min_leaf: usize) -> Result<Self> {
        if max_depth < 1 {
            return Err(Error::param("max_depth", "must be at least 1"));
        }
        Ok(Self {
            x,
            max_depth,
            min_leaf: min_leaf.max(1),
        })
    }

    /// Fitted means and the number of leaves.
    pub fn fit_with_leaves(&self, y: &[u64]) -> (Vec<f64>, usize) {
        let b = Builder {
            x: &self.x,
            y,
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
        };
        let idx: Vec<usize> = (0..y.len()).collect();
        let tree = b.build(&idx, 0);
        let fit = (0..y.len())
            .map(|r| predict(&tree, self.x.row(r)))
            .collect();
        (fit, count_leaves(&tree))
    }
}

impl FitAlgorithm for PoissonTree {
    fn name(&self) -> String {
        format!(
            "cart_poisson(depth={}, min_leaf={})",
            self.max_depth, self.min_leaf
        )
    }

    fn fit(&self, y: &[u64]) -> Vec<f64> {
        self.fit_with_leaves(y).0
    }
}

pub fn cart_poisson(
    x: &DesignMatrix,
    y: &[u64],
    max_depth: usize,
    min_leaf: usize,
) -> Result<Vec<f64>> {
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: x.rows(),
        });
    }
    Ok(PoissonTree::new(x.clone(), max_depth, min_leaf)?.fit(y))
}
