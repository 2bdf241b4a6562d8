//! Exact path-dependent TreeSHAP for the forest's class probabilities.
//!
//! The value of a feature coalition `S` is the tree output when features in
//! `S` follow the row's branch and every other split is averaged over both
//! children, weighted by the number of training samples that reached each
//! child. Attributions are computed for every class at once, and a forest's
//! attributions are the mean of its trees'.
//!
//! The recursion follows Lundberg, Erion and Lee, "Consistent Individualized
//! Feature Attribution for Tree Ensembles" (Algorithm 2), with leaf values
//! generalized from scalars to per-class probability vectors.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forest::{Forest, TreeNode};
use crate::matrix::FeatureMatrix;

const NO_FEATURE: usize = usize::MAX;

#[derive(Debug, Clone)]
struct FlatNode {
    feature: usize,
    threshold: f64,
    left: usize,
    right: usize,
    cover: f64,
    /// Class distribution; empty for internal nodes.
    value: Vec<f64>,
}

/// Array form of a [`TreeNode`] with per-node training cover.
#[derive(Debug, Clone)]
struct FlatTree {
    nodes: Vec<FlatNode>,
    depth: usize,
    n_classes: usize,
}

impl FlatTree {
    fn new(root: &TreeNode) -> Self {
        let mut nodes = Vec::new();
        let n_classes = flatten(root, &mut nodes);
        FlatTree {
            nodes,
            depth: root.depth(),
            n_classes,
        }
    }

    /// Cover-weighted mean leaf distribution, the value of the empty coalition.
    fn expected_value(&self, node: usize) -> Vec<f64> {
        let n = &self.nodes[node];
        if n.feature == NO_FEATURE {
            return n.value.clone();
        }
        let (l, r) = (&self.nodes[n.left], &self.nodes[n.right]);
        let el = self.expected_value(n.left);
        let er = self.expected_value(n.right);
        el.iter()
            .zip(&er)
            .map(|(a, b)| (l.cover * a + r.cover * b) / n.cover)
            .collect()
    }

    fn shap_into(&self, row: &[f64], phi: &mut [f64]) {
        let size = (self.depth + 2) * (self.depth + 3) / 2;
        let mut path = vec![PathElement::default(); size];
        self.recurse(row, phi, &mut path, 0, 0, 0, 1.0, 1.0, NO_FEATURE);
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &self,
        row: &[f64],
        phi: &mut [f64],
        buf: &mut [PathElement],
        node: usize,
        parent_offset: usize,
        mut depth: usize,
        zero_fraction: f64,
        one_fraction: f64,
        feature: usize,
    ) {
        // each level works on its own copy of the path, stacked in `buf`
        let offset = if node == 0 { 0 } else { parent_offset + depth };
        if node != 0 {
            buf.copy_within(parent_offset..parent_offset + depth, offset);
        }
        let path = &mut buf[offset..];
        extend_path(path, depth, zero_fraction, one_fraction, feature);

        let n = &self.nodes[node];
        if n.feature == NO_FEATURE {
            let c = self.n_classes;
            for i in 1..=depth {
                let w = unwound_path_sum(path, depth, i);
                let el = path[i];
                let scale = w * (el.one_fraction - el.zero_fraction);
                let out = &mut phi[el.feature * c..(el.feature + 1) * c];
                for (o, v) in out.iter_mut().zip(&n.value) {
                    *o += scale * v;
                }
            }
            return;
        }

        let (hot, cold) = if row[n.feature] <= n.threshold {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        let hot_zero = self.nodes[hot].cover / n.cover;
        let cold_zero = self.nodes[cold].cover / n.cover;
        let (mut incoming_zero, mut incoming_one) = (1.0, 1.0);

        if let Some(k) = (1..=depth).find(|&k| path[k].feature == n.feature) {
            incoming_zero = path[k].zero_fraction;
            incoming_one = path[k].one_fraction;
            unwind_path(path, depth, k);
            depth -= 1;
        }

        self.recurse(
            row,
            phi,
            buf,
            hot,
            offset,
            depth + 1,
            hot_zero * incoming_zero,
            incoming_one,
            n.feature,
        );
        self.recurse(
            row,
            phi,
            buf,
            cold,
            offset,
            depth + 1,
            cold_zero * incoming_zero,
            0.0,
            n.feature,
        );
    }
}

/// Appends `root` and its subtree to `out`, returning the class count.
fn flatten(root: &TreeNode, out: &mut Vec<FlatNode>) -> usize {
    let index = out.len();
    out.push(FlatNode {
        feature: NO_FEATURE,
        threshold: 0.0,
        left: 0,
        right: 0,
        cover: root.cover() as f64,
        value: Vec::new(),
    });
    match root {
        TreeNode::Leaf { .. } => {
            let proba = root.predict_proba(&[]);
            let c = proba.len();
            out[index].value = proba;
            c
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let l = out.len();
            let c = flatten(left, out);
            let r = out.len();
            flatten(right, out);
            let node = &mut out[index];
            node.feature = *feature;
            node.threshold = *threshold;
            node.left = l;
            node.right = r;
            c
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: usize,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

impl Default for PathElement {
    fn default() -> Self {
        PathElement {
            feature: NO_FEATURE,
            zero_fraction: 0.0,
            one_fraction: 0.0,
            weight: 0.0,
        }
    }
}

fn extend_path(path: &mut [PathElement], depth: usize, zero: f64, one: f64, feature: usize) {
    path[depth] = PathElement {
        feature,
        zero_fraction: zero,
        one_fraction: one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    };
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind_path(path: &mut [PathElement], depth: usize, index: usize) {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d1 = (depth + 1) as f64;
    let mut next_one_portion = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next_one_portion * d1 / ((i + 1) as f64 * one);
            next_one_portion = tmp - path[i].weight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

fn unwound_path_sum(path: &[PathElement], depth: usize, index: usize) -> f64 {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d1 = (depth + 1) as f64;
    let mut next_one_portion = path[depth].weight;
    let mut total = 0.0;
    if one != 0.0 {
        for i in (0..depth).rev() {
            let tmp = next_one_portion * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next_one_portion = path[i].weight - tmp * zero * (depth - i) as f64 / d1;
        }
    } else {
        for i in (0..depth).rev() {
            total += path[i].weight / (zero * (depth - i) as f64 / d1);
        }
    }
    total
}

/// Per-class baseline and attributions; `phi[c][j]` is feature `j`'s share of
/// class `c`'s probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeShap {
    pub baseline: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
}

impl TreeShap {
    /// `baseline + sum(phi)` per class; equals the model output.
    pub fn reconstruct(&self) -> Vec<f64> {
        self.baseline
            .iter()
            .zip(&self.phi)
            .map(|(b, p)| b + p.iter().sum::<f64>())
            .collect()
    }
}

fn unflatten_phi(flat: &[f64], d: usize, c: usize) -> Vec<Vec<f64>> {
    (0..c)
        .map(|k| (0..d).map(|j| flat[j * c + k]).collect())
        .collect()
}

/// Attributions for a single tree over `n_features` features.
pub fn shap_tree(tree: &TreeNode, row: &[f64], n_features: usize) -> Result<TreeShap> {
    if row.len() != n_features {
        return Err(Error::Arity(format!(
            "row has {} values, expected {n_features}",
            row.len()
        )));
    }
    let flat = FlatTree::new(tree);
    let c = flat.n_classes;
    let mut phi = vec![0.0; n_features * c];
    flat.shap_into(row, &mut phi);
    Ok(TreeShap {
        baseline: flat.expected_value(0),
        phi: unflatten_phi(&phi, n_features, c),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub doc_id: String,
    pub classes: Vec<String>,
    pub baseline: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
}

/// Forest explainer with trees flattened once up front.
pub struct TreeExplainer<'a> {
    forest: &'a Forest,
    trees: Vec<FlatTree>,
    baseline: Vec<f64>,
}

impl<'a> TreeExplainer<'a> {
    pub fn new(forest: &'a Forest) -> Self {
        let trees: Vec<FlatTree> = forest.trees.iter().map(FlatTree::new).collect();
        let c = forest.n_classes();
        let mut baseline = vec![0.0; c];
        for t in &trees {
            for (b, e) in baseline.iter_mut().zip(t.expected_value(0)) {
                *b += e;
            }
        }
        let n = trees.len() as f64;
        baseline.iter_mut().for_each(|b| *b /= n);
        TreeExplainer {
            forest,
            trees,
            baseline,
        }
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn shap(&self, row: &[f64]) -> Result<TreeShap> {
        let d = self.forest.n_features();
        if row.len() != d {
            return Err(Error::Arity(format!(
                "row has {} values, expected {d}",
                row.len()
            )));
        }
        let c = self.forest.n_classes();
        let mut phi = vec![0.0; d * c];
        for t in &self.trees {
            t.shap_into(row, &mut phi);
        }
        let n = self.trees.len() as f64;
        phi.iter_mut().for_each(|p| *p /= n);
        Ok(TreeShap {
            baseline: self.baseline.clone(),
            phi: unflatten_phi(&phi, d, c),
        })
    }

    pub fn explain(&self, doc_id: &str, row: &[f64]) -> Result<Explanation> {
        let s = self.shap(row)?;
        Ok(Explanation {
            doc_id: doc_id.to_string(),
            classes: self.forest.classes.clone(),
            baseline: s.baseline,
            phi: s.phi,
        })
    }
}

pub fn shap_forest(forest: &Forest, doc_id: &str, row: &[f64]) -> Result<Explanation> {
    TreeExplainer::new(forest).explain(doc_id, row)
}

/// Label used for the ranking averaged over all classes.
pub const ALL_CLASSES: &str = "__all__";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_abs_shap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRanking {
    pub class: String,
    pub features: Vec<FeatureImportance>,
}

/// Mean |phi| per feature and class, ranked descending (ties by name).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceReport {
    pub n_rows: usize,
    /// Where the explained rows came from (e.g. `validation`).
    pub source: String,
    pub per_class: Vec<ClassRanking>,
    /// Mean over classes of the per-class scores.
    pub overall: ClassRanking,
}

fn rank(names: &[String], scores: &[f64]) -> Vec<FeatureImportance> {
    let mut out: Vec<FeatureImportance> = names
        .iter()
        .zip(scores)
        .map(|(n, &s)| FeatureImportance {
            feature: n.clone(),
            mean_abs_shap: s,
        })
        .collect();
    out.sort_by(|a, b| {
        b.mean_abs_shap
            .total_cmp(&a.mean_abs_shap)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    out
}

pub fn importance_report(
    forest: &Forest,
    matrix: &FeatureMatrix,
    source: &str,
) -> Result<ImportanceReport> {
    if matrix.n_rows() == 0 {
        return Err(Error::NoRows);
    }
    forest.check_names(matrix)?;
    let explainer = TreeExplainer::new(forest);
    let (d, c) = (forest.n_features(), forest.n_classes());
    let sums = matrix
        .rows()
        .par_iter()
        .map(|row| {
            explainer.shap(row).map(|s| {
                s.phi
                    .iter()
                    .flat_map(|p| p.iter().map(|v| v.abs()))
                    .collect::<Vec<f64>>()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![0.0; c * d];
    for s in &sums {
        for (t, v) in total.iter_mut().zip(s) {
            *t += v;
        }
    }
    let n = matrix.n_rows() as f64;
    total.iter_mut().for_each(|t| *t /= n);

    let names = forest.feature_names.clone();
    let per_class = (0..c)
        .map(|k| ClassRanking {
            class: forest.classes[k].clone(),
            features: rank(&names, &total[k * d..(k + 1) * d]),
        })
        .collect();
    let overall_scores: Vec<f64> = (0..d)
        .map(|j| (0..c).map(|k| total[k * d + j]).sum::<f64>() / c as f64)
        .collect();
    Ok(ImportanceReport {
        n_rows: matrix.n_rows(),
        source: source.to_string(),
        per_class,
        overall: ClassRanking {
            class: ALL_CLASSES.to_string(),
            features: rank(&names, &overall_scores),
        },
    })
}

impl ImportanceReport {
    pub fn rankings(&self) -> impl Iterator<Item = &ClassRanking> {
        self.per_class.iter().chain(std::iter::once(&self.overall))
    }

    /// `class,feature,mean_abs_shap` rows, per-class blocks then the overall block.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(["class", "feature", "mean_abs_shap"])
            .expect("in-memory write");
        for ranking in self.rankings() {
            for f in &ranking.features {
                w.write_record([
                    ranking.class.as_str(),
                    f.feature.as_str(),
                    &format!("{:.16e}", f.mean_abs_shap),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn top_k_table(&self, k: usize) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "mean |SHAP| over {} rows ({})",
            self.n_rows, self.source
        );
        for ranking in self.rankings() {
            let _ = writeln!(out, "\nclass {}", ranking.class);
            for (i, f) in ranking.features.iter().take(k).enumerate() {
                let _ = writeln!(
                    out,
                    "{:>3}. {:<28} {:.6}",
                    i + 1,
                    f.feature,
                    f.mean_abs_shap
                );
            }
        }
        out
    }

    /// 1-based rank of `feature` in the overall ranking.
    pub fn overall_rank(&self, feature: &str) -> Option<usize> {
        self.overall
            .features
            .iter()
            .position(|f| f.feature == feature)
            .map(|i| i + 1)
    }
}

/// Sorting helper for callers comparing importance values.
pub fn compare_importance(a: &FeatureImportance, b: &FeatureImportance) -> Ordering {
    b.mean_abs_shap
        .total_cmp(&a.mean_abs_shap)
        .then_with(|| a.feature.cmp(&b.feature))
}
