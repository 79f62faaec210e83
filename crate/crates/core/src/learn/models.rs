use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Label, LearnError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Nb,
    Svm,
    Rf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Nb, ModelKind::Svm, ModelKind::Rf];
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Nb => "nb",
            ModelKind::Svm => "svm",
            ModelKind::Rf => "rf",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nb" => Ok(ModelKind::Nb),
            "svm" => Ok(ModelKind::Svm),
            "rf" => Ok(ModelKind::Rf),
            _ => Err(format!("unknown model `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub nb_alpha: f64,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub rf_trees: usize,
    pub rf_max_depth: usize,
    pub rf_min_samples_split: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            nb_alpha: 1.0,
            svm_lambda: 1e-4,
            svm_epochs: 50,
            rf_trees: 100,
            rf_max_depth: 16,
            rf_min_samples_split: 2,
        }
    }
}

fn check_classes(x: &[Vec<f64>], y: &[Label]) -> Result<(), LearnError> {
    assert_eq!(x.len(), y.len(), "row/label count mismatch");
    let f = y.iter().filter(|l| l.is_failure()).count();
    if f == 0 || f == y.len() {
        return Err(LearnError::SingleClass);
    }
    Ok(())
}

/// Multinomial naive Bayes with additive smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    /// `[normal, failure]`.
    pub log_prior: [f64; 2],
    pub log_theta: [Vec<f64>; 2],
}

impl NaiveBayes {
    pub fn train(x: &[Vec<f64>], y: &[Label], alpha: f64) -> Result<NaiveBayes, LearnError> {
        check_classes(x, y)?;
        let dims = x[0].len();
        let mut counts = [vec![0.0; dims], vec![0.0; dims]];
        let mut docs = [0.0f64; 2];
        for (row, label) in x.iter().zip(y) {
            let c = label.is_failure() as usize;
            docs[c] += 1.0;
            for (acc, v) in counts[c].iter_mut().zip(row) {
                *acc += v;
            }
        }
        let n = docs[0] + docs[1];
        let theta = |c: &Vec<f64>| {
            let total: f64 = c.iter().sum::<f64>() + alpha * dims as f64;
            c.iter().map(|v| ((v + alpha) / total).ln()).collect::<Vec<f64>>()
        };
        Ok(NaiveBayes {
            log_prior: [(docs[0] / n).ln(), (docs[1] / n).ln()],
            log_theta: [theta(&counts[0]), theta(&counts[1])],
        })
    }

    fn log_joint(&self, row: &[f64], c: usize) -> f64 {
        self.log_prior[c] + row.iter().zip(&self.log_theta[c]).map(|(v, t)| v * t).sum::<f64>()
    }

    /// Log-odds of failure.
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.log_joint(row, 1) - self.log_joint(row, 0)
    }
}

/// Linear hinge-loss classifier trained by stochastic subgradient descent
/// (Pegasos step sizes). The bias is a weight on a constant feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvm {
    pub fn train(x: &[Vec<f64>], y: &[Label], lambda: f64, epochs: usize, seed: u64) -> Result<LinearSvm, LearnError> {
        check_classes(x, y)?;
        let dims = x[0].len();
        let mut w = vec![0.0; dims + 1];
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radius = 1.0 / lambda.sqrt();
        let mut t = 0u64;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let yi = if y[i].is_failure() { 1.0 } else { -1.0 };
                let margin = yi * (dot(&w[..dims], &x[i]) + w[dims]);
                let shrink = 1.0 - eta * lambda;
                w.iter_mut().for_each(|v| *v *= shrink);
                if margin < 1.0 {
                    for (wj, xj) in w.iter_mut().zip(&x[i]) {
                        *wj += eta * yi * xj;
                    }
                    w[dims] += eta * yi;
                }
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > radius {
                    let s = radius / norm;
                    w.iter_mut().for_each(|v| *v *= s);
                }
            }
        }
        let bias = w.pop().unwrap();
        Ok(LinearSvm { weights: w, bias })
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        /// Fraction of failure samples reaching the leaf.
        p_failure: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn p_failure(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { p_failure } => return *p_failure,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

/// Bagged Gini trees with random feature subsets at every split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
    /// Unnormalized total impurity decrease per feature.
    pub impurity_decrease: Vec<f64>,
}

fn gini(failures: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = failures / total;
    2.0 * p * (1.0 - p)
}

struct TreeBuilder<'a> {
    cols: &'a [Vec<f64>],
    y: &'a [bool],
    max_depth: usize,
    min_split: usize,
    mtry: usize,
    root_size: f64,
    nodes: Vec<TreeNode>,
    importance: Vec<f64>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, samples: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let n = samples.len() as f64;
        let fails = samples.iter().filter(|&&i| self.y[i]).count() as f64;
        self.nodes.push(TreeNode::Leaf { p_failure: fails / n });
        let parent = gini(fails, n);
        if depth >= self.max_depth || samples.len() < self.min_split || parent == 0.0 {
            return id;
        }
        let Some((feature, threshold, decrease)) = self.best_split(&samples, fails, parent, rng) else {
            return id;
        };
        self.importance[feature] += n / self.root_size * decrease;
        let (l, r): (Vec<usize>, Vec<usize>) = samples.into_iter().partition(|&i| self.cols[feature][i] <= threshold);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Examines up to `mtry` features that vary within the node, in random order.
    fn best_split(
        &self,
        samples: &[usize],
        fails: f64,
        parent: f64,
        rng: &mut ChaCha8Rng,
    ) -> Option<(usize, f64, f64)> {
        let n = samples.len() as f64;
        let mut features: Vec<usize> = (0..self.cols.len()).collect();
        let mut tried = 0;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(samples.len());
        for k in 0..features.len() {
            if tried == self.mtry {
                break;
            }
            let pick = rng.gen_range(k..features.len());
            features.swap(k, pick);
            let f = features[k];
            let col = &self.cols[f];
            let first = col[samples[0]];
            if samples.iter().all(|&i| col[i] == first) {
                continue;
            }
            tried += 1;
            pairs.clear();
            pairs.extend(samples.iter().map(|&i| (col[i], self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut ln, mut lf) = (0.0, 0.0);
            for w in 0..pairs.len() - 1 {
                ln += 1.0;
                lf += pairs[w].1 as u8 as f64;
                if pairs[w].0 == pairs[w + 1].0 {
                    continue;
                }
                let rn = n - ln;
                let rf = fails - lf;
                let child = (ln * gini(lf, ln) + rn * gini(rf, rn)) / n;
                let decrease = parent - child;
                if decrease > 1e-12 && best.is_none_or(|b| decrease > b.2) {
                    best = Some((f, (pairs[w].0 + pairs[w + 1].0) / 2.0, decrease));
                }
            }
        }
        best
    }
}

impl RandomForest {
    pub fn train(x: &[Vec<f64>], y: &[Label], params: &Hyperparams, seed: u64) -> Result<RandomForest, LearnError> {
        check_classes(x, y)?;
        let dims = x[0].len();
        let cols: Vec<Vec<f64>> = (0..dims).map(|j| x.iter().map(|r| r[j]).collect()).collect();
        let labels: Vec<bool> = y.iter().map(|l| l.is_failure()).collect();
        let mtry = ((dims as f64).sqrt().floor() as usize).max(1);
        let grown: Vec<(Tree, Vec<f64>)> = (0..params.rf_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64 + 1);
                let sample: Vec<usize> = (0..x.len()).map(|_| rng.gen_range(0..x.len())).collect();
                let mut b = TreeBuilder {
                    cols: &cols,
                    y: &labels,
                    max_depth: params.rf_max_depth,
                    min_split: params.rf_min_samples_split.max(2),
                    mtry,
                    root_size: sample.len() as f64,
                    nodes: Vec::new(),
                    importance: vec![0.0; dims],
                };
                b.build(sample, 0, &mut rng);
                (Tree { nodes: b.nodes }, b.importance)
            })
            .collect();
        let mut impurity_decrease = vec![0.0; dims];
        let mut trees = Vec::with_capacity(grown.len());
        for (tree, imp) in grown {
            for (acc, v) in impurity_decrease.iter_mut().zip(imp) {
                *acc += v;
            }
            trees.push(tree);
        }
        Ok(RandomForest {
            trees,
            impurity_decrease,
        })
    }

    /// Mean leaf failure fraction minus one half.
    pub fn decision(&self, row: &[f64]) -> f64 {
        let p: f64 = self.trees.iter().map(|t| t.p_failure(row)).sum::<f64>() / self.trees.len() as f64;
        p - 0.5
    }

    /// Impurity decrease per feature, normalized to sum 1 (all zero if the
    /// forest never split).
    pub fn importances(&self) -> Vec<f64> {
        let total: f64 = self.impurity_decrease.iter().sum();
        if total <= 0.0 {
            return vec![0.0; self.impurity_decrease.len()];
        }
        self.impurity_decrease.iter().map(|v| v / total).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Nb(NaiveBayes),
    Svm(LinearSvm),
    Rf(RandomForest),
}

impl Model {
    pub fn train(
        kind: ModelKind,
        x: &[Vec<f64>],
        y: &[Label],
        params: &Hyperparams,
        seed: u64,
    ) -> Result<Model, LearnError> {
        if x.is_empty() {
            return Err(LearnError::EmptyCorpus);
        }
        Ok(match kind {
            ModelKind::Nb => Model::Nb(NaiveBayes::train(x, y, params.nb_alpha)?),
            ModelKind::Svm => Model::Svm(LinearSvm::train(x, y, params.svm_lambda, params.svm_epochs, seed)?),
            ModelKind::Rf => Model::Rf(RandomForest::train(x, y, params, seed)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Nb(_) => ModelKind::Nb,
            Model::Svm(_) => ModelKind::Svm,
            Model::Rf(_) => ModelKind::Rf,
        }
    }

    /// Positive means failure.
    pub fn decision(&self, row: &[f64]) -> f64 {
        match self {
            Model::Nb(m) => m.decision(row),
            Model::Svm(m) => m.decision(row),
            Model::Rf(m) => m.decision(row),
        }
    }

    pub fn predict(&self, row: &[f64]) -> Label {
        if self.decision(row) > 0.0 {
            Label::Failure
        } else {
            Label::Normal
        }
    }

    pub fn predict_all(&self, x: &[Vec<f64>]) -> Vec<Label> {
        x.iter().map(|r| self.predict(r)).collect()
    }
}
