use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use super::TrainingExample;
use crate::error::{Error, Result};
use crate::rng;
use crate::space::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub num_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            num_trees: 50,
            max_depth: 4,
            learning_rate: 0.3,
            min_samples_leaf: 2,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 || self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(Error::InvalidParams(
                "gbt: num_trees, max_depth and min_samples_leaf must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "gbt: learning_rate must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        value: f64,
    },
}

impl Node {
    fn eval(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }
}

/// Axis-aligned regression tree with constant leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub root: Node,
}

impl RegressionTree {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.root.eval(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub trees: Vec<RegressionTree>,
    pub base_prediction: f64,
    pub learning_rate: f64,
    pub num_features: usize,
}

struct Builder<'a> {
    xs: &'a [&'a [f64]],
    residuals: &'a [f64],
    params: &'a GbtParams,
    rng: &'a mut rng::StreamRng,
}

#[derive(Clone, Copy)]
struct SplitChoice {
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn build(&mut self, mut idx: Vec<usize>, depth: usize) -> Node {
        let n = idx.len();
        let sum: f64 = idx.iter().map(|&i| self.residuals[i]).sum();
        let leaf = Node::Leaf { value: sum / n as f64 };
        let min_leaf = self.params.min_samples_leaf;
        if depth >= self.params.max_depth || n < 2 * min_leaf {
            return leaf;
        }
        let parent_score = sum * sum / n as f64;
        let num_features = self.xs[0].len();

        let mut best_gain = 0.0f64;
        let mut ties: Vec<SplitChoice> = Vec::new();
        for feature in 0..num_features {
            idx.sort_by(|&a, &b| {
                self.xs[a][feature]
                    .total_cmp(&self.xs[b][feature])
                    .then(a.cmp(&b))
            });
            let mut left_sum = 0.0;
            for pos in 1..n {
                left_sum += self.residuals[idx[pos - 1]];
                let lo = self.xs[idx[pos - 1]][feature];
                let hi = self.xs[idx[pos]][feature];
                if lo == hi || pos < min_leaf || n - pos < min_leaf {
                    continue;
                }
                let right_sum = sum - left_sum;
                let gain = left_sum * left_sum / pos as f64
                    + right_sum * right_sum / (n - pos) as f64
                    - parent_score;
                let tol = 1e-12 * best_gain.abs().max(1e-300);
                let choice = SplitChoice {
                    feature,
                    threshold: 0.5 * (lo + hi),
                };
                if gain > best_gain + tol {
                    best_gain = gain;
                    ties.clear();
                    ties.push(choice);
                } else if !ties.is_empty() && (gain - best_gain).abs() <= tol {
                    ties.push(choice);
                }
            }
        }
        // Zero-gain splits only occur when residuals are already constant on the node.
        if ties.is_empty() || best_gain <= 1e-12 * parent_score.abs().max(1e-24) {
            return leaf;
        }
        let chosen = if ties.len() == 1 {
            ties[0]
        } else {
            *ties.choose(self.rng).expect("non-empty ties")
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.xs[i][chosen.feature] <= chosen.threshold);
        Node::Split {
            feature: chosen.feature,
            threshold: chosen.threshold,
            left: Box::new(self.build(left, depth + 1)),
            right: Box::new(self.build(right, depth + 1)),
        }
    }
}

impl GbtModel {
    /// Greedy squared-error boosting from the mean. `seed` only breaks exact split ties.
    pub fn fit(examples: &[TrainingExample], params: &GbtParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let first = examples.first().ok_or(Error::EmptyTrainingSet)?;
        let num_features = first.features.len();
        if let Some(bad) = examples.iter().find(|e| e.features.len() != num_features) {
            return Err(Error::FeatureDimension {
                expected: num_features,
                got: bad.features.len(),
            });
        }
        let xs: Vec<&[f64]> = examples.iter().map(|e| e.features.as_slice()).collect();
        let n = examples.len();
        let base = examples.iter().map(|e| e.fitness).sum::<f64>() / n as f64;
        let mut pred = vec![base; n];
        let mut residuals = vec![0.0; n];
        let mut rng = rng::rng_from(seed);
        let mut trees = Vec::with_capacity(params.num_trees);
        for _ in 0..params.num_trees {
            for i in 0..n {
                residuals[i] = examples[i].fitness - pred[i];
            }
            let tree = RegressionTree {
                root: Builder {
                    xs: &xs,
                    residuals: &residuals,
                    params,
                    rng: &mut rng,
                }
                .build((0..n).collect(), 0),
            };
            for i in 0..n {
                pred[i] += params.learning_rate * tree.eval(xs[i]);
            }
            trees.push(tree);
        }
        Ok(Self {
            trees,
            base_prediction: base,
            learning_rate: params.learning_rate,
            num_features,
        })
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.base_prediction
            + self.learning_rate * self.trees.iter().map(|t| t.eval(x)).sum::<f64>()
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<f64> {
        if x.len() != self.num_features {
            return Err(Error::FeatureDimension {
                expected: self.num_features,
                got: x.len(),
            });
        }
        Ok(self.predict_one(x.as_slice()))
    }

    pub fn predict_batch(&self, features: &[FeatureVector]) -> Result<Vec<f64>> {
        features.iter().map(|f| self.predict(f)).collect()
    }

    /// Debug dump of the tree ensemble; not a stable format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}
