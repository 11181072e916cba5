//! CART-style decision tree with sample weights (axis-aligned splits,
//! weighted Gini impurity, midpoint thresholds).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::row_slice;
use crate::error::{IflError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        /// Goes left when `x[feature] <= threshold`.
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Normalized class-weight distribution, length = class count.
        distribution: Vec<f64>,
    },
}

impl TreeNode {
    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    root: TreeNode,
    n_features: usize,
    n_classes: usize,
}

impl DecisionTree {
    /// Fit with uniform sample weights.
    pub fn fit(
        x: &Array2<f64>,
        y: &[usize],
        n_classes: usize,
        max_depth: usize,
        min_leaf: usize,
    ) -> Result<DecisionTree> {
        DecisionTree::fit_weighted(x, y, n_classes, max_depth, min_leaf, None)
    }

    /// Fit with per-sample weights (used by boosting). Weights must be
    /// non-negative with a positive sum; `None` means uniform.
    ///
    /// Deterministic: candidate thresholds are midpoints between distinct
    /// consecutive sorted values, and among equally good splits the lowest
    /// feature index, then the lowest threshold, wins.
    pub fn fit_weighted(
        x: &Array2<f64>,
        y: &[usize],
        n_classes: usize,
        max_depth: usize,
        min_leaf: usize,
        weights: Option<&[f64]>,
    ) -> Result<DecisionTree> {
        let n = x.nrows();
        let h = x.ncols();
        if n == 0 || h == 0 {
            return Err(IflError::invalid_parameter(
                "tree fitting needs at least one sample and one feature",
            ));
        }
        if y.len() != n {
            return Err(IflError::invalid_parameter(
                "one label per sample is required",
            ));
        }
        if n_classes < 2 {
            return Err(IflError::invalid_parameter("n_classes must be >= 2"));
        }
        if let Some(bad) = y.iter().find(|&&c| c >= n_classes) {
            return Err(IflError::invalid_parameter(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        if min_leaf < 1 {
            return Err(IflError::invalid_parameter("min_leaf must be >= 1"));
        }
        let w: Vec<f64> = match weights {
            Some(w) => {
                if w.len() != n {
                    return Err(IflError::invalid_parameter(
                        "one weight per sample is required",
                    ));
                }
                if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(IflError::invalid_parameter(
                        "weights must be non-negative and finite",
                    ));
                }
                if w.iter().sum::<f64>() <= 0.0 {
                    return Err(IflError::invalid_parameter("weights must not all be zero"));
                }
                w.to_vec()
            }
            None => vec![1.0 / n as f64; n],
        };

        // Row ids sorted per feature once; partitions inherit sortedness.
        let sorted: Vec<Vec<u32>> = (0..h)
            .map(|f| {
                let mut ids: Vec<u32> = (0..n as u32).collect();
                ids.sort_by(|&a, &b| {
                    x[[a as usize, f]]
                        .total_cmp(&x[[b as usize, f]])
                        .then(a.cmp(&b))
                });
                ids
            })
            .collect();

        let ctx = FitCtx {
            x,
            y,
            w: &w,
            n_classes,
            max_depth,
            min_leaf,
        };
        let root = build_node(&ctx, sorted, 0);
        Ok(DecisionTree {
            root,
            n_features: h,
            n_classes,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Leaf class distribution for one row.
    pub fn predict_row(&self, row: &[f64]) -> Result<&[f64]> {
        if row.len() != self.n_features {
            return Err(IflError::invalid_parameter(format!(
                "row has {} features, tree expects {}",
                row.len(),
                self.n_features
            )));
        }
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { distribution } => return Ok(distribution),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Predicted class per row (argmax of the leaf distribution, ties to
    /// the lowest class id).
    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        (0..x.nrows())
            .map(|i| Ok(argmax(self.predict_row(row_slice(x, i))?)))
            .collect()
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for i in 0..x.nrows() {
            let dist = self.predict_row(row_slice(x, i))?;
            for (c, v) in dist.iter().enumerate() {
                out[[i, c]] = *v;
            }
        }
        Ok(out)
    }
}

/// Lowest index of the maximum value.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

struct FitCtx<'a> {
    x: &'a Array2<f64>,
    y: &'a [usize],
    w: &'a [f64],
    n_classes: usize,
    max_depth: usize,
    min_leaf: usize,
}

fn class_weights(ctx: &FitCtx, ids: &[u32]) -> (Vec<f64>, f64) {
    let mut dist = vec![0.0; ctx.n_classes];
    for &i in ids {
        dist[ctx.y[i as usize]] += ctx.w[i as usize];
    }
    let total = dist.iter().sum();
    (dist, total)
}

fn gini(dist: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let mut g = 1.0;
    for v in dist {
        let p = v / total;
        g -= p * p;
    }
    g
}

fn leaf(ctx: &FitCtx, ids: &[u32]) -> TreeNode {
    let (mut dist, total) = class_weights(ctx, ids);
    if total > 0.0 {
        for v in &mut dist {
            *v /= total;
        }
    } else {
        // All-zero weights in this node: fall back to counts.
        dist.fill(0.0);
        for &i in ids {
            dist[ctx.y[i as usize]] += 1.0;
        }
        let count = ids.len() as f64;
        for v in &mut dist {
            *v /= count;
        }
    }
    TreeNode::Leaf { distribution: dist }
}

fn build_node(ctx: &FitCtx, sorted: Vec<Vec<u32>>, depth: usize) -> TreeNode {
    let ids = &sorted[0];
    let n = ids.len();
    let (dist, total) = class_weights(ctx, ids);
    let pure = ids
        .iter()
        .all(|&i| ctx.y[i as usize] == ctx.y[ids[0] as usize]);
    if depth >= ctx.max_depth || n < 2 * ctx.min_leaf || pure || total <= 0.0 {
        return leaf(ctx, ids);
    }

    // Best split: (weighted child gini, feature, threshold); first-found
    // wins on exact ties, and we scan features then thresholds ascending.
    let mut best: Option<(f64, usize, f64)> = None;
    for (f, ids_f) in sorted.iter().enumerate() {
        let mut left = vec![0.0; ctx.n_classes];
        let mut left_total = 0.0;
        for pos in 1..n {
            let prev = ids_f[pos - 1] as usize;
            left[ctx.y[prev]] += ctx.w[prev];
            left_total += ctx.w[prev];
            let (v_prev, v_here) = (ctx.x[[prev, f]], ctx.x[[ids_f[pos] as usize, f]]);
            if v_prev >= v_here {
                continue; // not a value boundary
            }
            if pos < ctx.min_leaf || n - pos < ctx.min_leaf {
                continue;
            }
            let right_total = total - left_total;
            let mut right_gini = 1.0;
            if right_total > 0.0 {
                for (c, lv) in left.iter().enumerate() {
                    let p = (dist[c] - lv) / right_total;
                    right_gini -= p * p;
                }
            } else {
                right_gini = 0.0;
            }
            let left_gini = gini(&left, left_total);
            let score = (left_total * left_gini + right_total * right_gini) / total;
            if best.is_none_or(|(s, _, _)| score < s) {
                let threshold = v_prev + (v_here - v_prev) / 2.0;
                best = Some((score, f, threshold));
            }
        }
    }

    // A zero-gain best split is still taken (mirrors common CART
    // implementations); deeper levels may recover structure an axis-aligned
    // first cut cannot see, e.g. parity patterns.
    let (_score, feature, threshold) = match best {
        Some(b) => b,
        None => return leaf(ctx, ids),
    };

    // Stable partition of every per-feature list keeps them sorted.
    let mut left_sorted = Vec::with_capacity(sorted.len());
    let mut right_sorted = Vec::with_capacity(sorted.len());
    for ids_f in &sorted {
        let (mut l, mut r) = (Vec::new(), Vec::new());
        for &i in ids_f {
            if ctx.x[[i as usize, feature]] <= threshold {
                l.push(i);
            } else {
                r.push(i);
            }
        }
        left_sorted.push(l);
        right_sorted.push(r);
    }
    drop(sorted);

    TreeNode::Split {
        feature,
        threshold,
        left: Box::new(build_node(ctx, left_sorted, depth + 1)),
        right: Box::new(build_node(ctx, right_sorted, depth + 1)),
    }
}
