//! Gradient-boosted trees on the log-odds scale with second-order split
//! gain, tuned by a grid search with stratified cross-validation.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{log_loss, logistic, logit, stratified_folds, ColumnSchema, Dataset};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub eta: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub gamma: f64,
    pub subsample: f64,
    pub nround: usize,
    pub lambda_reg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtOptions {
    pub eta_grid: Vec<f64>,
    pub max_depth_grid: Vec<usize>,
    pub min_child_weight_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub subsample: f64,
    pub max_round: usize,
    pub lambda_reg: f64,
    pub cv_folds: usize,
}

impl Default for GbtOptions {
    fn default() -> Self {
        GbtOptions {
            eta_grid: vec![0.1, 0.125, 0.15, 0.2],
            max_depth_grid: vec![5, 10, 20],
            min_child_weight_grid: vec![2.0, 4.0, 6.0],
            gamma_grid: vec![2.0, 5.0, 10.0],
            subsample: 0.5,
            max_round: 20,
            lambda_reg: 1.0,
            cv_folds: 10,
        }
    }
}

impl GbtOptions {
    /// Cartesian product of the four tuned axes (108 combinations at the
    /// defaults), in a fixed enumeration order.
    pub fn grid_combinations(&self) -> Vec<GbtParams> {
        let mut out = Vec::new();
        for &eta in &self.eta_grid {
            for &max_depth in &self.max_depth_grid {
                for &min_child_weight in &self.min_child_weight_grid {
                    for &gamma in &self.gamma_grid {
                        out.push(GbtParams {
                            eta,
                            max_depth,
                            min_child_weight,
                            gamma,
                            subsample: self.subsample,
                            nround: self.max_round,
                            lambda_reg: self.lambda_reg,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "node")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict_row(&self, x: &[Vec<f64>], row: usize) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature][row] < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_splits(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Split { .. }))
            .count()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbtModel {
    pub schema: ColumnSchema,
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub params: GbtParams,
    /// true when no tree ever found an admissible split
    pub stump_only: bool,
}

impl GbtModel {
    pub fn margins(&self, x: &[Vec<f64>]) -> Vec<f64> {
        let n = x.first().map_or(0, |c| c.len());
        let mut eta = vec![self.base_score; n];
        for tree in &self.trees {
            for (i, e) in eta.iter_mut().enumerate() {
                *e += self.params.eta * tree.predict_row(x, i);
            }
        }
        eta
    }

    pub fn predict_standardized(&self, x: &[Vec<f64>]) -> Vec<f64> {
        self.margins(x).into_iter().map(logistic).collect()
    }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    g: &'a [f64],
    h: &'a [f64],
    params: &'a GbtParams,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    /// Recursively grows the tree; `sorted` holds per-feature row lists
    /// pre-sorted by feature value and is partitioned on each split so no
    /// re-sorting happens below the root.
    fn grow(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let rows = &sorted[0];
        let lambda = self.params.lambda_reg;
        let gsum: f64 = rows.iter().map(|&i| self.g[i]).sum();
        let hsum: f64 = rows.iter().map(|&i| self.h[i]).sum();

        let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, gain)
        if depth < self.params.max_depth {
            let parent_score = gsum * gsum / (hsum + lambda);
            for (j, order) in sorted.iter().enumerate() {
                let col = &self.x[j];
                let mut gl = 0.0;
                let mut hl = 0.0;
                for w in 0..order.len().saturating_sub(1) {
                    let i = order[w];
                    gl += self.g[i];
                    hl += self.h[i];
                    let v = col[i];
                    let vnext = col[order[w + 1]];
                    if vnext <= v {
                        continue; // no boundary between equal values
                    }
                    let hr = hsum - hl;
                    if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                        continue;
                    }
                    let gr = gsum - gl;
                    let gain = 0.5
                        * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_score)
                        - self.params.gamma;
                    if gain > 0.0 && best.map_or(true, |(_, _, bg)| gain > bg) {
                        best = Some((j, 0.5 * (v + vnext), gain));
                    }
                }
            }
        }

        match best {
            None => {
                self.nodes.push(TreeNode::Leaf {
                    weight: -gsum / (hsum + lambda),
                });
                self.nodes.len() - 1
            }
            Some((feature, threshold, _)) => {
                let col = &self.x[feature];
                let mut left_sorted = Vec::with_capacity(sorted.len());
                let mut right_sorted = Vec::with_capacity(sorted.len());
                for order in &sorted {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        order.iter().partition(|&&i| col[i] < threshold);
                    left_sorted.push(l);
                    right_sorted.push(r);
                }
                drop(sorted);
                let at = self.nodes.len();
                // placeholder rewritten once the children exist
                self.nodes.push(TreeNode::Leaf { weight: f64::NAN });
                let left = self.grow(left_sorted, depth + 1);
                let right = self.grow(right_sorted, depth + 1);
                self.nodes[at] = TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                at
            }
        }
    }
}

fn build_tree(x: &[Vec<f64>], rows: &[usize], g: &[f64], h: &[f64], params: &GbtParams) -> Tree {
    let sorted: Vec<Vec<usize>> = x
        .iter()
        .map(|col| {
            let mut order = rows.to_vec();
            order.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap().then(a.cmp(&b)));
            order
        })
        .collect();
    let mut builder = TreeBuilder {
        x,
        g,
        h,
        params,
        nodes: Vec::new(),
    };
    builder.grow(sorted, 0);
    Tree {
        nodes: builder.nodes,
    }
}

/// Boosts for `params.nround` rounds on the whole dataset. `on_round` sees
/// the model after each round (used to score held-out data during CV).
fn boost(
    data: &Dataset,
    params: &GbtParams,
    seed: u64,
    mut on_round: impl FnMut(&Tree),
) -> GbtModel {
    let n = data.n_rows();
    let base_score = logit(data.positive_rate());
    let mut margin = vec![base_score; n];
    let mut trees = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stump_only = false;

    for _round in 0..params.nround {
        let rows: Vec<usize> = if params.subsample >= 1.0 {
            (0..n).collect()
        } else {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(&mut rng);
            let take = ((n as f64) * params.subsample).round().max(1.0) as usize;
            let mut sub = all[..take.min(n)].to_vec();
            sub.sort_unstable();
            sub
        };
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        for &i in &rows {
            let p = logistic(margin[i]);
            g[i] = p - data.y[i] as f64;
            h[i] = p * (1.0 - p);
        }
        let tree = build_tree(&data.x, &rows, &g, &h, params);
        if tree.n_splits() == 0 {
            if trees.is_empty() {
                stump_only = true;
            }
            break;
        }
        for i in 0..n {
            margin[i] += params.eta * tree.predict_row(&data.x, i);
        }
        on_round(&tree);
        trees.push(tree);
    }

    GbtModel {
        schema: data.schema.clone(),
        base_score,
        trees,
        params: *params,
        stump_only,
    }
}

/// Single fit at fixed parameters, no tuning.
pub fn fit_gbt_single(data: &Dataset, params: &GbtParams, seed: u64) -> Result<GbtModel> {
    if !data.both_classes_present() {
        return Err(Error::Estimation("single-class response; cannot boost".into()));
    }
    Ok(boost(data, params, seed, |_| {}))
}

/// Grid search: stratified CV over every parameter combination, selecting
/// the (combination, round) pair with the lowest mean out-of-fold log loss,
/// then a refit on all rows.
pub fn fit_gbt(data: &Dataset, opts: &GbtOptions, seed: u64) -> Result<GbtModel> {
    if !data.both_classes_present() {
        return Err(Error::Estimation("single-class response; cannot boost".into()));
    }
    let combos = opts.grid_combinations();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let folds = stratified_folds(&data.y, opts.cv_folds, &mut rng);
    let n = data.n_rows();

    // (combo index, best round, mean held-out logloss at that round)
    let scored: Vec<(usize, usize, f64)> = combos
        .par_iter()
        .enumerate()
        .map(|(ci, params)| {
            let mut loss_sum = vec![0.0; opts.max_round];
            let mut rounds_seen = vec![0usize; opts.max_round];
            for fold in 0..opts.cv_folds {
                let train: Vec<usize> = (0..n).filter(|i| folds[*i] != fold).collect();
                let test: Vec<usize> = (0..n).filter(|i| folds[*i] == fold).collect();
                if test.is_empty() {
                    continue;
                }
                let dtrain = data.subset(&train);
                let xtest: Vec<Vec<f64>> = data
                    .x
                    .iter()
                    .map(|col| test.iter().map(|&i| col[i]).collect())
                    .collect();
                let ytest: Vec<u8> = test.iter().map(|&i| data.y[i]).collect();
                let fold_seed =
                    seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul((ci * 1000 + fold + 1) as u64);
                let mut test_margin = vec![logit(dtrain.positive_rate()); test.len()];
                let mut round = 0usize;
                boost(&dtrain, params, fold_seed, |tree| {
                    for (ti, m) in test_margin.iter_mut().enumerate() {
                        *m += params.eta * tree.predict_row(&xtest, ti);
                    }
                    let p: Vec<f64> = test_margin.iter().map(|&m| logistic(m)).collect();
                    loss_sum[round] += log_loss(&p, &ytest) * test.len() as f64;
                    rounds_seen[round] += test.len();
                    round += 1;
                });
            }
            let mut best = (0usize, f64::INFINITY);
            for r in 0..opts.max_round {
                // only rounds every fold reached are comparable
                if rounds_seen[r] == n {
                    let mean = loss_sum[r] / n as f64;
                    if mean < best.1 {
                        best = (r, mean);
                    }
                }
            }
            (ci, best.0, best.1)
        })
        .collect();

    let (ci, round, loss) = scored
        .into_iter()
        .min_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(a.0.cmp(&b.0)))
        .unwrap();
    if !loss.is_finite() {
        return Err(Error::Estimation(
            "no parameter combination produced a scorable boosting round".into(),
        ));
    }
    let chosen = GbtParams {
        nround: round + 1,
        ..combos[ci]
    };
    let refit_seed = seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul((combos.len() * 1000 + 1) as u64);
    Ok(boost(data, &chosen, refit_seed, |_| {}))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_params() -> GbtParams {
        GbtParams {
            eta: 0.3,
            max_depth: 4,
            min_child_weight: 0.0,
            gamma: 0.0,
            subsample: 1.0,
            nround: 20,
            lambda_reg: 1.0,
        }
    }

    fn xor_free_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let y: Vec<u8> = a
            .iter()
            .zip(&b)
            .map(|(&ai, &bi)| u8::from(rng.gen::<f64>() < logistic(2.0 * ai - 1.5 * bi)))
            .collect();
        Dataset::new(vec!["a".into(), "b".into()], vec![a, b], y).unwrap()
    }

    #[test]
    fn grid_holds_108_combinations() {
        let combos = GbtOptions::default().grid_combinations();
        assert_eq!(combos.len(), 108);
        let uniq: std::collections::BTreeSet<String> =
            combos.iter().map(|c| format!("{c:?}")).collect();
        assert_eq!(uniq.len(), 108);
    }

    #[test]
    fn training_logloss_non_increasing_full_batch() {
        let d = xor_free_dataset(600, 1);
        let model = fit_gbt_single(&d, &simple_params(), 7).unwrap();
        assert!(!model.trees.is_empty());
        let mut margin = vec![model.base_score; d.n_rows()];
        let mut prev = f64::INFINITY;
        for tree in &model.trees {
            for (i, m) in margin.iter_mut().enumerate() {
                *m += model.params.eta * tree.predict_row(&d.x, i);
            }
            let p: Vec<f64> = margin.iter().map(|&m| logistic(m)).collect();
            let loss = log_loss(&p, &d.y);
            assert!(loss <= prev + 1e-12, "loss rose {prev} -> {loss}");
            prev = loss;
        }
    }

    #[test]
    fn two_leaf_weights_match_closed_form() {
        // feature separates rows {0,1} from {2,3}; y = [1,1,0,1]
        let x = vec![vec![0.0, 0.0, 1.0, 1.0]];
        let y = vec![1u8, 1, 0, 1];
        let d = Dataset::new(vec!["f".into()], x, y.clone()).unwrap();
        let params = GbtParams {
            max_depth: 1,
            ..simple_params()
        };
        let model = fit_gbt_single(&d, &params, 0).unwrap();
        let tree = &model.trees[0];
        assert_eq!(tree.n_splits(), 1);

        let p0 = logistic(model.base_score);
        let h = p0 * (1.0 - p0);
        // left rows 0,1 (y=1): G = 2(p0-1); right rows 2,3: G = (p0-0)+(p0-1)
        let wl = -(2.0 * (p0 - 1.0)) / (2.0 * h + 1.0);
        let wr = -((p0 - 0.0) + (p0 - 1.0)) / (2.0 * h + 1.0);
        let got_l = tree.predict_row(&d.x, 0);
        let got_r = tree.predict_row(&d.x, 2);
        assert!((got_l - wl).abs() < 1e-10, "{got_l} vs {wl}");
        assert!((got_r - wr).abs() < 1e-10, "{got_r} vs {wr}");
    }

    #[test]
    fn separable_covariate_learned_perfectly() {
        let f: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let y: Vec<u8> = f.iter().map(|&v| u8::from(v >= 100.0)).collect();
        let d = Dataset::new(vec!["f".into()], vec![f], y.clone()).unwrap();
        let model = fit_gbt_single(&d, &simple_params(), 3).unwrap();
        match model.trees[0].nodes[0] {
            TreeNode::Split { feature, .. } => assert_eq!(feature, 0),
            _ => panic!("first tree should split"),
        }
        let p = model.predict_standardized(&d.x);
        for (pi, yi) in p.iter().zip(&y) {
            assert_eq!(u8::from(*pi > 0.5), *yi, "training row misclassified");
        }
    }

    #[test]
    fn huge_gamma_yields_base_rate_only() {
        let d = xor_free_dataset(300, 2);
        let params = GbtParams {
            gamma: 1e12,
            ..simple_params()
        };
        let model = fit_gbt_single(&d, &params, 1).unwrap();
        assert!(model.stump_only);
        assert!(model.trees.is_empty());
        let p = model.predict_standardized(&d.x);
        assert!(p.iter().all(|&v| (v - d.positive_rate()).abs() < 1e-12));
    }

    #[test]
    fn min_child_weight_respected() {
        let d = xor_free_dataset(400, 4);
        let params = GbtParams {
            min_child_weight: 4.0,
            subsample: 1.0,
            ..simple_params()
        };
        let model = fit_gbt_single(&d, &params, 5).unwrap();
        // replay hessian sums down the first tree
        let tree = &model.trees[0];
        let p0 = logistic(model.base_score);
        let h: Vec<f64> = vec![p0 * (1.0 - p0); d.n_rows()];
        fn check(tree: &Tree, at: usize, rows: &[usize], x: &[Vec<f64>], h: &[f64], mcw: f64) {
            if let TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } = &tree.nodes[at]
            {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| x[*feature][i] < *threshold);
                let hl: f64 = l.iter().map(|&i| h[i]).sum();
                let hr: f64 = r.iter().map(|&i| h[i]).sum();
                assert!(hl >= mcw && hr >= mcw, "child hessian below min_child_weight");
                check(tree, *left, &l, x, h, mcw);
                check(tree, *right, &r, x, h, mcw);
            }
        }
        let rows: Vec<usize> = (0..d.n_rows()).collect();
        check(tree, 0, &rows, &d.x, &h, params.min_child_weight);
    }

    #[test]
    fn grid_search_deterministic_and_reasonable() {
        let d = xor_free_dataset(400, 9);
        let opts = GbtOptions {
            eta_grid: vec![0.1, 0.2],
            max_depth_grid: vec![3],
            min_child_weight_grid: vec![2.0],
            gamma_grid: vec![0.5, 2.0],
            cv_folds: 4,
            max_round: 10,
            ..Default::default()
        };
        let a = fit_gbt(&d, &opts, 11).unwrap();
        let b = fit_gbt(&d, &opts, 11).unwrap();
        assert_eq!(
            serde_json::to_string(&a.trees).unwrap(),
            serde_json::to_string(&b.trees).unwrap()
        );
        let p = a.predict_standardized(&d.x);
        let acc = p
            .iter()
            .zip(&d.y)
            .filter(|(pi, &yi)| u8::from(**pi > 0.5) == yi)
            .count() as f64
            / d.n_rows() as f64;
        assert!(acc > 0.7, "in-sample accuracy {acc}");
    }
}
