//! Random forest of CART trees with Gini impurity, bootstrap resampling and
//! per-split feature subsampling.
//!
//! Trees are stored as flat node arrays. Each tree draws its bootstrap
//! sample and feature subsets from its own stream derived from
//! `(seed, tree index)`, so a forest does not depend on how trees are
//! scheduled across workers.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

/// Number of features drawn at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeaturesPerSplit {
    /// `ceil(sqrt(d))`.
    Sqrt,
    All,
    Count(usize),
}

impl FeaturesPerSplit {
    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            FeaturesPerSplit::Sqrt => (n_features as f64).sqrt().ceil() as usize,
            FeaturesPerSplit::All => n_features,
            FeaturesPerSplit::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

impl std::str::FromStr for FeaturesPerSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(FeaturesPerSplit::Sqrt),
            "all" => Ok(FeaturesPerSplit::All),
            n => n
                .parse()
                .ok()
                .filter(|&k| k >= 1)
                .map(FeaturesPerSplit::Count)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "features_per_split must be 'sqrt', 'all' or a positive integer, got '{n}'"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: FeaturesPerSplit,
    pub seed: u64,
    /// Worker threads for training; 0 uses the global pool. The trained
    /// forest is identical for every value.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 2,
            features_per_split: FeaturesPerSplit::Sqrt,
            seed: 1,
            workers: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("forest.n_trees must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config(
                "forest.min_samples_leaf must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// `1 - sum_k p_k^2` over the two class counts.
pub fn gini(counts: [usize; 2]) -> Result<f64> {
    let n = counts[0] + counts[1];
    if n == 0 {
        return Err(Error::invalid("gini impurity of an empty node"));
    }
    Ok(gini_unchecked(counts, n))
}

fn gini_unchecked(counts: [usize; 2], n: usize) -> f64 {
    let p0 = counts[0] as f64 / n as f64;
    let p1 = counts[1] as f64 / n as f64;
    1.0 - (p0 * p0 + p1 * p1)
}

/// Size-weighted impurity of a candidate split.
fn weighted_impurity(left: [usize; 2], right: [usize; 2]) -> f64 {
    let nl = left[0] + left[1];
    let nr = right[0] + right[1];
    let n = (nl + nr) as f64;
    nl as f64 / n * gini_unchecked(left, nl) + nr as f64 / n * gini_unchecked(right, nr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted child impurity.
    pub impurity: f64,
}

fn class_counts(y: &[u8], idx: &[usize]) -> [usize; 2] {
    let mut c = [0; 2];
    for &i in idx {
        c[usize::from(y[i])] += 1;
    }
    c
}

/// Exhaustive search over `features` (visited in ascending order) and the
/// midpoints between consecutive distinct values. Ties go to the lower
/// feature, then the lower threshold. Splits with zero impurity decrease
/// are allowed; `None` means no candidate separates the samples.
fn best_split_idx(
    x: &[Vec<f64>],
    y: &[u8],
    idx: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let n = idx.len();
    if n < 2 {
        return None;
    }
    let parent = class_counts(y, idx);
    let parent_impurity = gini_unchecked(parent, n);
    let mut order = idx.to_vec();
    let mut best: Option<Split> = None;
    let mut sorted_features = features.to_vec();
    sorted_features.sort_unstable();
    for &f in &sorted_features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left = [0usize; 2];
        for k in 1..n {
            left[usize::from(y[order[k - 1]])] += 1;
            let lo = x[order[k - 1]][f];
            let hi = x[order[k]][f];
            if lo >= hi || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let right = [parent[0] - left[0], parent[1] - left[1]];
            let impurity = weighted_impurity(left, right);
            if best.is_none_or(|b| impurity < b.impurity) {
                let mut threshold = (lo + hi) / 2.0;
                if !(threshold >= lo && threshold < hi) {
                    threshold = lo;
                }
                best = Some(Split {
                    feature: f,
                    threshold,
                    impurity,
                });
            }
        }
    }
    best.filter(|b| b.impurity <= parent_impurity)
}

/// Best split of `(x, y)` over `feature_subset`.
pub fn best_split(x: &[Vec<f64>], y: &[u8], feature_subset: &[usize]) -> Option<Split> {
    let idx: Vec<usize> = (0..x.len()).collect();
    best_split_idx(x, y, &idx, feature_subset, 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: [usize; 2],
        class: u8,
    },
}

/// A decision tree; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// The leaf reached by `x`.
    pub fn leaf(&self, x: &[f64]) -> (&[usize; 2], u8) {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { counts, class } => return (counts, *class),
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        self.leaf(x).1
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

fn leaf(counts: [usize; 2]) -> Node {
    Node::Leaf {
        counts,
        class: u8::from(counts[1] > counts[0]),
    }
}

fn grow_idx(
    x: &[Vec<f64>],
    y: &[u8],
    idx: Vec<usize>,
    config: &ForestConfig,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let n_features = x.first().map_or(0, Vec::len);
    let k = config.features_per_split.resolve(n_features);
    let mut nodes = vec![leaf([0, 0])];
    // Depth-first, left subtree first, so the stream is consumed in a fixed order.
    let mut stack = vec![(0usize, idx, 0usize)];
    while let Some((id, idx, depth)) = stack.pop() {
        let counts = class_counts(y, &idx);
        let stop = config.max_depth.is_some_and(|d| depth >= d)
            || counts[0] == 0
            || counts[1] == 0
            || idx.len() < 2 * config.min_samples_leaf;
        let split = if stop {
            None
        } else {
            let features = if k >= n_features {
                (0..n_features).collect()
            } else {
                sample(rng, n_features, k).into_vec()
            };
            best_split_idx(x, y, &idx, &features, config.min_samples_leaf)
        };
        match split {
            None => nodes[id] = leaf(counts),
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| x[i][s.feature] <= s.threshold);
                let left = nodes.len();
                nodes.push(leaf([0, 0]));
                nodes.push(leaf([0, 0]));
                nodes[id] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right: left + 1,
                };
                stack.push((left + 1, r, depth + 1));
                stack.push((left, l, depth + 1));
            }
        }
    }
    Tree { nodes }
}

/// Grows one tree on all of `(x, y)`. Leaves predict the majority class,
/// ties going to class 0.
pub fn grow_tree(
    x: &[Vec<f64>],
    y: &[u8],
    config: &ForestConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Tree> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::invalid(format!(
            "{} feature rows for {} labels",
            x.len(),
            y.len()
        )));
    }
    Ok(grow_idx(x, y, (0..x.len()).collect(), config, rng))
}

/// The random stream of tree `t`.
pub fn tree_stream(seed: u64, t: usize) -> ChaCha8Rng {
    rng::indexed(rng::derive_seed(seed, rng::BOOTSTRAP), t as u64)
}

/// `n` indices drawn uniformly with replacement.
pub fn bootstrap_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub config: ForestConfig,
    pub feature_names: Vec<String>,
}

pub fn train_forest(
    x: &[Vec<f64>],
    y: &[u8],
    feature_names: &[&str],
    config: &ForestConfig,
) -> Result<Forest> {
    config.validate()?;
    if x.len() < 2 || x.len() != y.len() {
        return Err(Error::invalid(format!(
            "need at least 2 aligned samples, got {} rows and {} labels",
            x.len(),
            y.len()
        )));
    }
    if let Some(row) = x.iter().find(|r| r.len() != feature_names.len()) {
        return Err(Error::invalid(format!(
            "feature row of length {}, expected {}",
            row.len(),
            feature_names.len()
        )));
    }
    let counts = class_counts(y, &(0..y.len()).collect::<Vec<_>>());
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::invalid(
            "cannot train a forest on single-class labels",
        ));
    }
    let grow = |t: usize| {
        let mut rng = tree_stream(config.seed, t);
        let idx = bootstrap_indices(x.len(), &mut rng);
        grow_idx(x, y, idx, config, &mut rng)
    };
    let trees: Vec<Tree> = if config.workers == 0 {
        (0..config.n_trees).into_par_iter().map(grow).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(|| (0..config.n_trees).into_par_iter().map(grow).collect())
    };
    Ok(Forest {
        trees,
        config: config.clone(),
        feature_names: feature_names.iter().map(|s| s.to_string()).collect(),
    })
}

impl Forest {
    /// Majority vote, ties to class 0. Returns the class and per-class votes.
    pub fn predict(&self, x: &[f64]) -> (u8, [usize; 2]) {
        let mut votes = [0usize; 2];
        for t in &self.trees {
            votes[usize::from(t.predict(x))] += 1;
        }
        (u8::from(votes[1] > votes[0]), votes)
    }
}

pub fn predict_forest(forest: &Forest, x: &[f64]) -> (u8, [usize; 2]) {
    forest.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rows(v: &[&[f64]]) -> Vec<Vec<f64>> {
        v.iter().map(|r| r.to_vec()).collect()
    }

    fn full(min_leaf: usize) -> ForestConfig {
        ForestConfig {
            features_per_split: FeaturesPerSplit::All,
            min_samples_leaf: min_leaf,
            ..ForestConfig::default()
        }
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini([10, 0]).unwrap(), 0.0);
        assert_eq!(gini([5, 5]).unwrap(), 0.5);
        assert_eq!(gini([3, 1]).unwrap(), 0.375);
        assert!(gini([0, 0]).is_err());
    }

    #[test]
    fn two_point_split() {
        let s = best_split(&rows(&[&[0.0], &[1.0]]), &[0, 1], &[0]).unwrap();
        assert_eq!((s.feature, s.threshold, s.impurity), (0, 0.5, 0.0));
        assert!(best_split(
            &rows(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]),
            &[0, 1, 0],
            &[0, 1]
        )
        .is_none());
    }

    #[test]
    fn xor_needs_two_levels() {
        let x = rows(&[&[0.0, 0.0], &[1.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]]);
        let y = [0, 0, 1, 1];
        let tree = grow_tree(&x, &y, &full(1), &mut rng::indexed(0, 0)).unwrap();
        assert_eq!(tree.depth(), 2);
        for (r, &label) in x.iter().zip(&y) {
            assert_eq!(tree.predict(r), label);
        }
    }

    #[test]
    fn stopping_rules() {
        let x = rows(&[&[0.0], &[1.0], &[2.0]]);
        let pure = grow_tree(&x, &[1, 1, 1], &full(1), &mut rng::indexed(0, 0)).unwrap();
        assert_eq!(
            pure.nodes,
            vec![Node::Leaf {
                counts: [0, 3],
                class: 1
            }]
        );

        let stump = ForestConfig {
            max_depth: Some(0),
            ..full(1)
        };
        let t = grow_tree(&x, &[0, 1, 1], &stump, &mut rng::indexed(0, 0)).unwrap();
        assert_eq!(
            t.nodes,
            vec![Node::Leaf {
                counts: [1, 2],
                class: 1
            }]
        );
        let t = grow_tree(
            &rows(&[&[0.0], &[1.0]]),
            &[1, 0],
            &stump,
            &mut rng::indexed(0, 0),
        )
        .unwrap();
        assert_eq!(t.predict(&[0.0]), 0, "ties go to class 0");
    }

    #[test]
    fn leaves_respect_min_samples() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![f64::from(i), f64::from(i % 7)])
            .collect();
        let y: Vec<u8> = (0..30).map(|i| u8::from(i % 3 == 0)).collect();
        let t = grow_tree(&x, &y, &full(3), &mut rng::indexed(0, 0)).unwrap();
        for n in &t.nodes {
            if let Node::Leaf { counts, .. } = n {
                assert!(counts[0] + counts[1] >= 3);
            }
        }
    }

    #[test]
    fn single_tree_forest_is_grow_tree_on_bootstrap() {
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![f64::from(i % 11), f64::from(i * 7 % 13)])
            .collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from(i % 11 > 4)).collect();
        let config = ForestConfig {
            n_trees: 1,
            seed: 99,
            ..ForestConfig::default()
        };
        let forest = train_forest(&x, &y, &["a", "b"], &config).unwrap();
        let mut rng = tree_stream(99, 0);
        let boot = bootstrap_indices(x.len(), &mut rng);
        let bx: Vec<Vec<f64>> = boot.iter().map(|&i| x[i].clone()).collect();
        let by: Vec<u8> = boot.iter().map(|&i| y[i]).collect();
        let tree = grow_tree(&bx, &by, &config, &mut rng).unwrap();
        assert_eq!(forest.trees, vec![tree]);
    }

    #[test]
    fn forest_errors() {
        let x = rows(&[&[0.0], &[1.0]]);
        assert!(train_forest(&x, &[1, 1], &["a"], &ForestConfig::default()).is_err());
        let zero = ForestConfig {
            n_trees: 0,
            ..ForestConfig::default()
        };
        assert!(train_forest(&x, &[0, 1], &["a"], &zero).is_err());
    }

    #[test]
    fn votes_and_ties() {
        let one = Tree {
            nodes: vec![Node::Leaf {
                counts: [0, 1],
                class: 1,
            }],
        };
        let zero = Tree {
            nodes: vec![Node::Leaf {
                counts: [1, 0],
                class: 0,
            }],
        };
        let mut forest = Forest {
            trees: vec![one.clone(); 3],
            config: ForestConfig::default(),
            feature_names: vec!["a".into()],
        };
        assert_eq!(forest.predict(&[0.0]), (1, [0, 3]));
        forest.trees = vec![zero.clone()];
        assert_eq!(forest.predict(&[0.0]).0, 0);
        forest.trees = [vec![one; 50], vec![zero; 50]].concat();
        assert_eq!(forest.predict(&[0.0]), (0, [50, 50]));
    }

    #[test]
    fn features_per_split_parsing() {
        assert_eq!(FeaturesPerSplit::Sqrt.resolve(4), 2);
        assert_eq!(FeaturesPerSplit::Sqrt.resolve(5), 3);
        assert_eq!(
            "sqrt".parse::<FeaturesPerSplit>().unwrap(),
            FeaturesPerSplit::Sqrt
        );
        assert_eq!(
            "3".parse::<FeaturesPerSplit>().unwrap(),
            FeaturesPerSplit::Count(3)
        );
        assert!("0".parse::<FeaturesPerSplit>().is_err());
    }

    proptest! {
        #[test]
        fn routing_is_total(x in proptest::collection::vec(proptest::collection::vec(-5f64..5.0, 3), 4..30),
                            probe in proptest::collection::vec(-10f64..10.0, 3),
                            seed in any::<u64>()) {
            let y: Vec<u8> = (0..x.len()).map(|i| (i % 2) as u8).collect();
            let config = ForestConfig { n_trees: 5, seed, ..ForestConfig::default() };
            let f = train_forest(&x, &y, &["a", "b", "c"], &config).unwrap();
            let (_, votes) = f.predict(&probe);
            prop_assert_eq!(votes[0] + votes[1], 5);
        }

        #[test]
        fn unlimited_tree_fits_training_data(x in proptest::collection::vec(proptest::collection::vec(0u8..6, 2), 2..40), seed in any::<u64>()) {
            let x: Vec<Vec<f64>> = x.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
            // Labels as a function of the row, so identical rows never conflict.
            let y: Vec<u8> = x.iter().map(|r| ((r[0] * 3.0 + r[1] * 5.0) as u64 % 2) as u8).collect();
            let tree = grow_tree(&x, &y, &full(1), &mut rng::indexed(seed, 0)).unwrap();
            for (r, &label) in x.iter().zip(&y) {
                prop_assert_eq!(tree.predict(r), label);
            }
        }
    }
}
