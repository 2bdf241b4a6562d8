//! Random forest of CART classification trees (Gini impurity).
//!
//! Each tree is grown on a bootstrap sample drawn with a generator seeded by
//! `seed + tree_index`, so trees can be trained in parallel and still come out
//! identical on every run. At each node `max_features` candidate features are
//! drawn without replacement and every midpoint between consecutive distinct
//! values is tried. Split quality is compared in exact integer arithmetic;
//! equal-quality splits go to the lowest feature index, then the lowest
//! threshold. A node becomes a leaf at `max_depth`, when it is pure, or when
//! none of its candidate features can separate its samples.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::rng::SeededRng;

pub const MODEL_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

impl TreeNode {
    /// Number of training samples that reached this node.
    pub fn cover(&self) -> u64 {
        match self {
            TreeNode::Leaf { counts } => counts.iter().map(|&c| c as u64).sum(),
            TreeNode::Split { left, right, .. } => left.cover() + right.cover(),
        }
    }

    /// Root-to-deepest-leaf edge count (a single leaf has depth 0).
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_for(&self, row: &[f64]) -> &[u32] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { counts } => return counts,
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

    /// Leaf class frequencies for `row`.
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let counts = self.leaf_for(row);
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    pub fn features_used(&self, out: &mut Vec<usize>) {
        if let TreeNode::Split {
            feature,
            left,
            right,
            ..
        } = self
        {
            out.push(*feature);
            left.features_used(out);
            right.features_used(out);
        }
    }

    fn check(&self, n_features: usize, n_classes: usize) -> std::result::Result<(), String> {
        match self {
            TreeNode::Leaf { counts } => {
                if counts.len() != n_classes {
                    return Err(format!(
                        "leaf with {} counts for {n_classes} classes",
                        counts.len()
                    ));
                }
                if counts.iter().all(|&c| c == 0) {
                    return Err("empty leaf".into());
                }
                Ok(())
            }
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if *feature >= n_features {
                    return Err(format!("split on feature {feature} of {n_features}"));
                }
                if !threshold.is_finite() {
                    return Err("non-finite threshold".into());
                }
                left.check(n_features, n_classes)?;
                right.check(n_features, n_classes)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// `floor(sqrt(d))`, at least 1.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            max_depth: 60,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: 10,
        }
    }
}

impl ForestParams {
    /// A single deterministic CART: no bootstrap, every feature considered.
    pub fn exhaustive_tree(max_depth: usize) -> Self {
        ForestParams {
            n_trees: 1,
            max_depth,
            max_features: MaxFeatures::All,
            bootstrap: false,
            ..ForestParams::default()
        }
    }
}

/// Column-major training data.
#[derive(Debug, Clone)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Dataset {
    pub fn from_rows(rows: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Arity(format!(
                "{} rows for {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let d = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(rows.len()); d];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Arity(format!(
                    "row {i} has {} values, expected {d}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("row {i}, feature {j}")));
                }
                columns[j].push(v);
            }
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::InvalidArgument(format!(
                "label index {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(Dataset {
            columns,
            labels: labels.to_vec(),
            n_classes,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature][row]
    }

    pub fn label(&self, row: usize) -> usize {
        self.labels[row]
    }

    fn class_counts(&self, sample: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_classes];
        for &i in sample {
            counts[self.labels[i]] += 1;
        }
        counts
    }
}

/// Chosen split of a node. `gain` is the weighted Gini decrease.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// `sum_c count_c^2` over a node, the integer core of its Gini impurity:
/// `gini = 1 - sq / n^2`.
fn sum_sq(counts: &[u64]) -> u64 {
    counts.iter().map(|&c| c * c).sum()
}

/// Threshold strictly between `lo` and `hi` (or `lo` itself when the two are
/// adjacent floats), so `lo` goes left and `hi` right.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo / 2.0 + hi / 2.0;
    if m >= lo && m < hi {
        m
    } else {
        lo
    }
}

/// Best Gini split of `sample` (row indices, repeats allowed) over
/// `features`. Returns `None` when every candidate feature is constant on the
/// sample or no split leaves `min_leaf` samples on both sides.
pub fn best_split(
    data: &Dataset,
    sample: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let n = sample.len() as u64;
    if n < 2 {
        return None;
    }
    let total: Vec<u64> = data
        .class_counts(sample)
        .into_iter()
        .map(u64::from)
        .collect();
    let parent_sq = sum_sq(&total);

    let mut features = features.to_vec();
    features.sort_unstable();
    features.dedup();

    // best score is (num / den) with score = sq_left / n_left + sq_right / n_right
    let mut best: Option<(u128, u128, usize, f64)> = None;
    let mut order = sample.to_vec();
    for &f in &features {
        let col = &data.columns[f];
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        let mut left = vec![0u64; data.n_classes];
        let mut right = total.clone();
        let (mut sq_left, mut sq_right) = (0u64, parent_sq);
        for i in 1..order.len() {
            let c = data.labels[order[i - 1]];
            sq_left += 2 * left[c] + 1;
            left[c] += 1;
            sq_right -= 2 * right[c] - 1;
            right[c] -= 1;

            let (lo, hi) = (col[order[i - 1]], col[order[i]]);
            if lo == hi {
                continue;
            }
            let (n_left, n_right) = (i as u64, n - i as u64);
            if (n_left as usize) < min_leaf || (n_right as usize) < min_leaf {
                continue;
            }
            let num = sq_left as u128 * n_right as u128 + sq_right as u128 * n_left as u128;
            let den = n_left as u128 * n_right as u128;
            let better = match best {
                None => true,
                Some((bn, bd, _, _)) => num * bd > bn * den,
            };
            if better {
                best = Some((num, den, f, midpoint(lo, hi)));
            }
        }
    }
    best.map(|(num, den, feature, threshold)| {
        let nf = n as f64;
        let gain = (num as f64 / den as f64 - parent_sq as f64 / nf) / nf;
        Split {
            feature,
            threshold,
            gain: gain.max(0.0),
        }
    })
}

struct Grower<'a> {
    data: &'a Dataset,
    params: &'a ForestParams,
    n_candidates: usize,
    rng: SeededRng,
}

impl Grower<'_> {
    fn grow(&mut self, sample: Vec<usize>, depth: usize) -> TreeNode {
        let counts = self.data.class_counts(&sample);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if depth >= self.params.max_depth
            || pure
            || sample.len() < 2 * self.params.min_samples_leaf.max(1)
        {
            return TreeNode::Leaf { counts };
        }
        let d = self.data.n_features();
        let features = if self.n_candidates >= d {
            (0..d).collect()
        } else {
            self.rng.sample_indices(d, self.n_candidates)
        };
        let Some(split) = best_split(self.data, &sample, &features, self.params.min_samples_leaf)
        else {
            return TreeNode::Leaf { counts };
        };
        let col = &self.data.columns[split.feature];
        let (left, right): (Vec<usize>, Vec<usize>) =
            sample.into_iter().partition(|&i| col[i] <= split.threshold);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(self.grow(left, depth + 1)),
            right: Box::new(self.grow(right, depth + 1)),
        }
    }
}

/// Grows one tree; `tree_seed` drives the bootstrap and feature sampling.
pub fn grow_tree(data: &Dataset, params: &ForestParams, tree_seed: u64) -> TreeNode {
    let mut rng = SeededRng::new(tree_seed);
    let n = data.n_rows();
    let sample: Vec<usize> = if params.bootstrap {
        (0..n).map(|_| rng.below(n)).collect()
    } else {
        (0..n).collect()
    };
    let mut grower = Grower {
        data,
        params,
        n_candidates: params.max_features.resolve(data.n_features()),
        rng,
    };
    grower.grow(sample, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub params: ForestParams,
    pub feature_names: Vec<String>,
    pub classes: Vec<String>,
    pub trees: Vec<TreeNode>,
}

impl Forest {
    /// Trains on `matrix` with `labels[i]` the class index of row `i`.
    pub fn fit(
        matrix: &FeatureMatrix,
        labels: &[usize],
        classes: &[String],
        params: ForestParams,
    ) -> Result<Forest> {
        if params.n_trees == 0 {
            return Err(Error::InvalidArgument(
                "forest needs at least one tree".into(),
            ));
        }
        if matrix.n_features() == 0 {
            return Err(Error::InvalidArgument("no features".into()));
        }
        if matrix.n_rows() < 2 {
            return Err(Error::InvalidArgument(
                "training needs at least two rows".into(),
            ));
        }
        let data = Dataset::from_rows(matrix.rows(), labels, classes.len())?;
        let mut present = labels.to_vec();
        present.sort_unstable();
        present.dedup();
        if present.len() < 2 {
            return Err(Error::SingleClass);
        }
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| grow_tree(&data, &params, params.seed.wrapping_add(t as u64)))
            .collect();
        Ok(Forest {
            params,
            feature_names: matrix.feature_names().to_vec(),
            classes: classes.to_vec(),
            trees,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features() {
            return Err(Error::Arity(format!(
                "row has {} values, model expects {}",
                row.len(),
                self.n_features()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prediction input".into()));
        }
        Ok(())
    }

    /// Mean over trees of the leaf class frequencies.
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_row(row)?;
        let mut proba = vec![0.0; self.n_classes()];
        for tree in &self.trees {
            for (p, q) in proba.iter_mut().zip(tree.predict_proba(row)) {
                *p += q;
            }
        }
        let n = self.trees.len() as f64;
        proba.iter_mut().for_each(|p| *p /= n);
        Ok(proba)
    }

    /// Most probable class index; ties go to the lower index.
    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(row)?))
    }

    pub fn predict_matrix(&self, matrix: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        self.check_names(matrix)?;
        matrix
            .rows()
            .par_iter()
            .map(|row| self.predict_proba(row))
            .collect()
    }

    /// Fails unless `matrix` has exactly the model's feature columns.
    pub fn check_names(&self, matrix: &FeatureMatrix) -> Result<()> {
        if matrix.feature_names() != self.feature_names.as_slice() {
            return Err(Error::Arity(format!(
                "feature columns differ from the model's ({} vs {})",
                matrix.n_features(),
                self.n_features()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            forest: self.clone(),
        };
        serde_json::to_string(&file).expect("forest serializes")
    }

    pub fn from_json(source: &str) -> Result<Forest> {
        let value: serde_json::Value =
            serde_json::from_str(source).map_err(|e| Error::CorruptModel(e.to_string()))?;
        let version = value
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::CorruptModel("missing version".into()))?;
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| Error::CorruptModel(e.to_string()))?;
        let forest = file.forest;
        if forest.trees.is_empty() {
            return Err(Error::CorruptModel("no trees".into()));
        }
        for (i, tree) in forest.trees.iter().enumerate() {
            tree.check(forest.n_features(), forest.n_classes())
                .map_err(|e| Error::CorruptModel(format!("tree {i}: {e}")))?;
            if tree.depth() > forest.params.max_depth {
                return Err(Error::CorruptModel(format!("tree {i} exceeds max depth")));
            }
        }
        Ok(forest)
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u64,
    #[serde(flatten)]
    forest: Forest,
}

pub fn save_model(forest: &Forest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, forest.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Forest> {
    let path = path.as_ref();
    let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Forest::from_json(&source)
}
