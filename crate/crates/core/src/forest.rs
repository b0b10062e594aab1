//! Regression forests used as adaptive neighbourhood generators.
//!
//! A fitted forest turns a query point into weights over the training
//! samples: each tree contributes `1 / |leaf|` to every sample sharing the
//! query's leaf, and the contributions are averaged over trees. Those weights
//! drive both the conditional density estimator and the local linear forest.
//!
//! Randomness is keyed on a canonical ordering of the training rows, so the
//! fitted model does not depend on the order in which samples are supplied.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};
use crate::linalg::least_squares;
use crate::seed::RngSeed;

/// Ridge added when the local linear system is singular.
const RIDGE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
    /// Grow on one half-sample and populate leaves with the other.
    pub honest: bool,
    /// Bootstrap resampling when not honest; otherwise every tree sees all rows.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            min_leaf: 5,
            mtry: None,
            honest: true,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        samples: Vec<u32>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf_id(&self, x: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    id = if x[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                Node::Leaf { .. } => return id,
            }
        }
    }

    fn leaf_samples(&self, id: usize) -> &[u32] {
        match &self.nodes[id] {
            Node::Leaf { samples } => samples,
            Node::Split { .. } => unreachable!("leaf_id always ends on a leaf"),
        }
    }

    fn leaves(&self) -> impl Iterator<Item = &[u32]> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { samples } => Some(samples.as_slice()),
            Node::Split { .. } => None,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_trees: usize,
    pub min_leaf: usize,
    pub mtry: usize,
    pub honest: bool,
    n_features: usize,
    n_samples: usize,
    trees: Vec<Tree>,
}

/// Forest weights over the training samples for one query point.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborWeights {
    pub weights: Vec<f64>,
}

impl NeighborWeights {
    /// Kish effective sample size `1 / sum(w^2)`.
    pub fn effective_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

pub fn fit_forest(
    features: &[Vec<f64>],
    response: &[f64],
    config: &ForestConfig,
    seed: RngSeed,
) -> Result<ForestModel> {
    let n = response.len();
    if features.len() != n {
        return Err(EwsError::DimensionMismatch(format!(
            "{} feature rows for {n} responses",
            features.len()
        )));
    }
    if config.n_trees == 0 || config.min_leaf == 0 {
        return Err(EwsError::InvalidConfig(
            "n_trees and min_leaf must be positive".into(),
        ));
    }
    // Honest trees split one half-sample and populate leaves with the other.
    let needed = if config.honest {
        2 * config.min_leaf
    } else {
        config.min_leaf
    };
    if n < needed {
        return Err(EwsError::InvalidConfig(format!(
            "{n} samples too few for min_leaf {} (honest: {})",
            config.min_leaf, config.honest
        )));
    }
    let p = features[0].len();
    if p == 0 || features.iter().any(|r| r.len() != p) {
        return Err(EwsError::DimensionMismatch(
            "feature rows must share a positive width".into(),
        ));
    }
    let mtry = config
        .mtry
        .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
        .clamp(1, p);

    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|&a, &b| canonical_cmp(features, response, a as usize, b as usize));
    let mut rank = vec![0u32; n];
    for (pos, &i) in order.iter().enumerate() {
        rank[i as usize] = pos as u32;
    }

    // Position of each row when sorted by one feature, ties by canonical rank.
    let feature_rank: Vec<Vec<u32>> = (0..p)
        .map(|f| {
            let mut by_f = order.clone();
            by_f.sort_by(|&a, &b| {
                features[a as usize][f]
                    .total_cmp(&features[b as usize][f])
                    .then(rank[a as usize].cmp(&rank[b as usize]))
            });
            let mut pos = vec![0u32; n];
            for (k, &i) in by_f.iter().enumerate() {
                pos[i as usize] = k as u32;
            }
            pos
        })
        .collect();

    let grower = Grower {
        features,
        response,
        feature_rank: &feature_rank,
        min_leaf: config.min_leaf,
        mtry,
        p,
    };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.derive(t as u64).rng();
            let (split, estimate) = draw_samples(&order, config, &mut rng);
            grower.grow(split, estimate, config.honest, &mut rng)
        })
        .collect();

    Ok(ForestModel {
        n_trees: config.n_trees,
        min_leaf: config.min_leaf,
        mtry,
        honest: config.honest,
        n_features: p,
        n_samples: n,
        trees,
    })
}

fn canonical_cmp(features: &[Vec<f64>], response: &[f64], a: usize, b: usize) -> Ordering {
    features[a]
        .iter()
        .zip(&features[b])
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| response[a].total_cmp(&response[b]))
}

fn draw_samples(order: &[u32], config: &ForestConfig, rng: &mut impl Rng) -> (Vec<u32>, Vec<u32>) {
    let n = order.len();
    if config.honest {
        let mut shuffled = order.to_vec();
        shuffled.shuffle(rng);
        let estimate = shuffled.split_off(n / 2);
        (shuffled, estimate)
    } else if config.bootstrap {
        let draw: Vec<u32> = (0..n).map(|_| order[rng.gen_range(0..n)]).collect();
        (draw.clone(), draw)
    } else {
        (order.to_vec(), order.to_vec())
    }
}

struct Grower<'a> {
    features: &'a [Vec<f64>],
    response: &'a [f64],
    feature_rank: &'a [Vec<u32>],
    min_leaf: usize,
    mtry: usize,
    p: usize,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_> {
    fn grow(&self, split: Vec<u32>, estimate: Vec<u32>, honest: bool, rng: &mut impl Rng) -> Tree {
        let mut nodes = vec![Node::Leaf {
            samples: Vec::new(),
        }];
        let mut stack = vec![(0usize, split, estimate)];
        while let Some((id, split, estimate)) = stack.pop() {
            match self.best_split(&split, &estimate, honest, rng) {
                Some(c) => {
                    let (sl, sr) = self.partition(&split, &c);
                    let (el, er) = self.partition(&estimate, &c);
                    let left = nodes.len();
                    nodes.push(Node::Leaf {
                        samples: Vec::new(),
                    });
                    nodes.push(Node::Leaf {
                        samples: Vec::new(),
                    });
                    nodes[id] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left: left as u32,
                        right: left as u32 + 1,
                    };
                    stack.push((left + 1, sr, er));
                    stack.push((left, sl, el));
                }
                None => {
                    let mut samples = estimate;
                    samples.sort_unstable();
                    nodes[id] = Node::Leaf { samples };
                }
            }
        }
        Tree { nodes }
    }

    fn partition(&self, rows: &[u32], c: &Candidate) -> (Vec<u32>, Vec<u32>) {
        let mut left = Vec::with_capacity(rows.len());
        let mut right = Vec::with_capacity(rows.len());
        for &i in rows {
            if self.features[i as usize][c.feature] <= c.threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        (left, right)
    }

    fn best_split(
        &self,
        split: &[u32],
        estimate: &[u32],
        honest: bool,
        rng: &mut impl Rng,
    ) -> Option<Candidate> {
        let n = split.len();
        if n < 2 * self.min_leaf || (honest && estimate.len() < 2 * self.min_leaf) {
            return None;
        }
        let y = |i: u32| self.response[i as usize];
        let total: f64 = split.iter().map(|&i| y(i)).sum();
        let mean = total / n as f64;
        let sse: f64 = split.iter().map(|&i| (y(i) - mean).powi(2)).sum();
        if sse <= 0.0 {
            return None;
        }

        let mut best: Option<Candidate> = None;
        let mut sorted = split.to_vec();
        let mut est_values: Vec<f64> = Vec::with_capacity(estimate.len());
        let mut est_sorted: Vec<u32> = Vec::with_capacity(estimate.len());
        for feature in index::sample(rng, self.p, self.mtry).into_iter() {
            let x = |i: u32| self.features[i as usize][feature];
            let key = &self.feature_rank[feature];
            sorted.sort_unstable_by_key(|&i| key[i as usize]);
            if honest {
                est_sorted.clear();
                est_sorted.extend_from_slice(estimate);
                est_sorted.sort_unstable_by_key(|&i| key[i as usize]);
                est_values.clear();
                est_values.extend(est_sorted.iter().map(|&i| x(i)));
            }
            let mut left_sum = 0.0;
            for pos in 0..n - 1 {
                left_sum += y(sorted[pos]);
                let n_left = pos + 1;
                let (lo, hi) = (x(sorted[pos]), x(sorted[pos + 1]));
                if n_left < self.min_leaf || n - n_left < self.min_leaf || lo >= hi {
                    continue;
                }
                let mut threshold = 0.5 * (lo + hi);
                if threshold >= hi {
                    threshold = lo;
                }
                if honest {
                    let est_left = est_values.partition_point(|v| *v <= threshold);
                    if est_left < self.min_leaf || estimate.len() - est_left < self.min_leaf {
                        continue;
                    }
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / n_left as f64
                    + right_sum * right_sum / (n - n_left) as f64
                    - total * total / n as f64;
                if gain > 1e-12 * sse && best.as_ref().map_or(true, |b| gain > b.gain) {
                    best = Some(Candidate {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(EwsError::DimensionMismatch(format!(
                "query has {} features, forest was trained on {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(())
    }

    /// Leaf reached in every tree; equal signatures imply equal weights.
    pub fn leaf_signature(&self, x: &[f64]) -> Result<Vec<u32>> {
        self.check_dim(x)?;
        Ok(self.trees.iter().map(|t| t.leaf_id(x) as u32).collect())
    }

    pub fn query_weights(&self, x: &[f64]) -> Result<NeighborWeights> {
        self.check_dim(x)?;
        let mut weights = vec![0.0; self.n_samples];
        let per_tree = 1.0 / self.n_trees as f64;
        for tree in &self.trees {
            let samples = tree.leaf_samples(tree.leaf_id(x));
            let share = per_tree / samples.len() as f64;
            for &i in samples {
                weights[i as usize] += share;
            }
        }
        Ok(NeighborWeights { weights })
    }

    /// Plain forest prediction: the weighted mean of the response.
    pub fn predict_mean(&self, response: &[f64], x: &[f64]) -> Result<f64> {
        let w = self.query_weights(x)?;
        Ok(w.weights.iter().zip(response).map(|(w, y)| w * y).sum())
    }

    /// Smallest populated leaf across all trees.
    pub fn min_leaf_size(&self) -> usize {
        self.trees
            .iter()
            .flat_map(|t| t.leaves().map(<[u32]>::len))
            .min()
            .unwrap_or(0)
    }

    /// Checks that each tree's leaves partition its estimation sample.
    #[doc(hidden)]
    pub fn leaves_partition_samples(&self) -> bool {
        self.trees.iter().all(|t| {
            let mut seen = vec![false; self.n_samples];
            t.leaves()
                .flatten()
                .all(|&i| !std::mem::replace(&mut seen[i as usize], true))
        })
    }
}

/// Local linear forest estimate of `E[response | x]`.
///
/// Minimises `sum_i w_i(x) (y_i - a - b'(x_i - x))^2 + ridge |b|^2` under the
/// forest weights at `x` and returns the intercept `a`. A singular system is
/// retried with a ridge of at least 1e-8.
pub fn llf_predict(
    model: &ForestModel,
    features: &[Vec<f64>],
    response: &[f64],
    x: &[f64],
    ridge: f64,
) -> Result<f64> {
    if ridge < 0.0 || !ridge.is_finite() {
        return Err(EwsError::InvalidConfig(format!(
            "ridge must be a finite non-negative number, got {ridge}"
        )));
    }
    if features.len() != model.n_samples || response.len() != model.n_samples {
        return Err(EwsError::DimensionMismatch(
            "training data does not match the forest".into(),
        ));
    }
    let w = model.query_weights(x)?;
    let active: Vec<usize> = (0..model.n_samples)
        .filter(|&i| w.weights[i] > 0.0)
        .collect();
    let p = model.n_features;
    let solve = |ridge: f64| {
        let rows = active.len() + if ridge > 0.0 { p } else { 0 };
        let mut design = DMatrix::zeros(rows, p + 1);
        let mut rhs = vec![0.0; rows];
        for (r, &i) in active.iter().enumerate() {
            let sw = w.weights[i].sqrt();
            design[(r, 0)] = sw;
            for j in 0..p {
                design[(r, j + 1)] = sw * (features[i][j] - x[j]);
            }
            rhs[r] = sw * response[i];
        }
        if ridge > 0.0 {
            let sr = ridge.sqrt();
            for j in 0..p {
                design[(active.len() + j, j + 1)] = sr;
            }
        }
        least_squares(&design, &rhs)
    };
    let mut fit = solve(ridge);
    if fit.rank < p + 1 {
        fit = solve(ridge.max(RIDGE_FLOOR));
    }
    Ok(fit.coefficients[0])
}
