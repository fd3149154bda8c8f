use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};

use crate::data::{Dataset, Features};
use crate::error::{Error, Result};
use crate::seed;

/// Tree growth controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitConfig {
    /// Minimum structure units per leaf.
    pub min_leaf: usize,
    /// `None` grows until no valid split remains.
    pub max_depth: Option<usize>,
    /// Candidate axes per node; `None` means `⌈dim/3⌉`.
    pub mtry: Option<usize>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            min_leaf: 5,
            max_depth: None,
            mtry: None,
        }
    }
}

impl SplitConfig {
    fn axes(&self, dim: usize) -> usize {
        self.mtry.unwrap_or(dim.div_ceil(3)).clamp(1, dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// `x` goes left iff `x[axis] <= threshold`.
    Split {
        axis: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(usize),
}

/// One honest tree: the structure half placed the splits, the estimation half
/// populates the leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct HonestPartition {
    structure_half: Vec<usize>,
    estimation_half: Vec<usize>,
    nodes: Vec<Node>,
    leaves: Vec<Vec<usize>>,
}

impl HonestPartition {
    /// Assemble from stored parts; validates node links and leaf ids.
    pub fn from_parts(
        structure_half: Vec<usize>,
        estimation_half: Vec<usize>,
        nodes: Vec<Node>,
        leaves: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidData("tree has no nodes".into()));
        }
        for node in &nodes {
            match *node {
                Node::Split {
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if !threshold.is_finite() || left >= nodes.len() || right >= nodes.len() {
                        return Err(Error::InvalidData("malformed split node".into()));
                    }
                }
                Node::Leaf(id) => {
                    if id >= leaves.len() {
                        return Err(Error::InvalidData("leaf id out of range".into()));
                    }
                }
            }
        }
        Ok(HonestPartition {
            structure_half,
            estimation_half,
            nodes,
            leaves,
        })
    }

    pub fn structure_half(&self) -> &[usize] {
        &self.structure_half
    }

    pub fn estimation_half(&self) -> &[usize] {
        &self.estimation_half
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaves(&self) -> &[Vec<usize>] {
        &self.leaves
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Split {
                    axis,
                    threshold,
                    left,
                    right,
                } => at = if x[axis] <= threshold { left } else { right },
                Node::Leaf(id) => return id,
            }
        }
    }

    /// Estimation units sharing `x`'s leaf.
    pub fn leaf_members(&self, x: &[f64]) -> &[usize] {
        &self.leaves[self.leaf_of(x)]
    }

    /// Largest axis index referenced by a split, if any.
    pub fn max_axis(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { axis, .. } => Some(*axis),
                Node::Leaf(_) => None,
            })
            .max()
    }
}

/// Grow on `subsample` using the rows of `data.x()`.
pub fn grow_honest_tree(
    data: &Dataset,
    subsample: &[usize],
    pseudo_outcome: &[f64],
    config: &SplitConfig,
    seed: u64,
) -> Result<HonestPartition> {
    grow_tree(data.x(), pseudo_outcome, subsample, config, seed)
}

/// Seeded 50/50 honesty split of `subsample`, then growth on the halves.
pub fn grow_tree(
    features: Features<'_>,
    pseudo_outcome: &[f64],
    subsample: &[usize],
    config: &SplitConfig,
    seed: u64,
) -> Result<HonestPartition> {
    let min_leaf = config.min_leaf.max(1);
    if subsample.len() < 2 * min_leaf {
        return Err(Error::TooSmall {
            size: subsample.len(),
            min_leaf,
        });
    }
    let mut units = subsample.to_vec();
    units.shuffle(&mut seed::rng(seed::derive(seed, 1)));
    let estimation = units.split_off(subsample.len().div_ceil(2));
    grow_with_halves(features, pseudo_outcome, units, estimation, config, seed)
}

struct Pending {
    node: usize,
    depth: usize,
    structure: Vec<usize>,
    estimation: Vec<usize>,
}

struct Candidate {
    axis: usize,
    threshold: f64,
    gain: f64,
}

/// Grow with explicitly given halves. Pseudo-outcomes of estimation units are
/// never read.
pub fn grow_with_halves(
    features: Features<'_>,
    pseudo_outcome: &[f64],
    mut structure: Vec<usize>,
    mut estimation: Vec<usize>,
    config: &SplitConfig,
    seed: u64,
) -> Result<HonestPartition> {
    let min_leaf = config.min_leaf.max(1);
    if structure.len() < min_leaf || estimation.is_empty() {
        return Err(Error::TooSmall {
            size: structure.len() + estimation.len(),
            min_leaf,
        });
    }
    structure.sort_unstable();
    estimation.sort_unstable();
    let dim = features.dim();
    let n_axes = config.axes(dim);
    let mut axis_rng = seed::rng(seed::derive(seed, 2));

    let mut nodes = alloc::vec![Node::Leaf(0)];
    let mut leaves = Vec::new();
    let mut stack = alloc::vec![Pending {
        node: 0,
        depth: 0,
        structure: structure.clone(),
        estimation: estimation.clone(),
    }];
    let mut scratch = Scratch::default();

    while let Some(p) = stack.pop() {
        let depth_ok = config.max_depth.is_none_or(|d| p.depth < d);
        let best = if depth_ok && p.structure.len() >= 2 * min_leaf {
            let axes = index::sample(&mut axis_rng, dim, n_axes);
            let mut best: Option<Candidate> = None;
            for axis in axes.iter() {
                if let Some(c) = best_split(
                    features,
                    pseudo_outcome,
                    &p.structure,
                    &p.estimation,
                    axis,
                    min_leaf,
                    &mut scratch,
                ) {
                    if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                        best = Some(c);
                    }
                }
            }
            best
        } else {
            None
        };

        match best {
            Some(c) => {
                let goes_left = |i: &usize| features.get(*i, c.axis) <= c.threshold;
                let (sl, sr): (Vec<usize>, Vec<usize>) = p.structure.iter().partition(|i| goes_left(i));
                let (el, er): (Vec<usize>, Vec<usize>) = p.estimation.iter().partition(|i| goes_left(i));
                let left = nodes.len();
                nodes.push(Node::Leaf(0));
                nodes.push(Node::Leaf(0));
                nodes[p.node] = Node::Split {
                    axis: c.axis,
                    threshold: c.threshold,
                    left,
                    right: left + 1,
                };
                // Right pushed first so the left subtree is numbered first.
                stack.push(Pending {
                    node: left + 1,
                    depth: p.depth + 1,
                    structure: sr,
                    estimation: er,
                });
                stack.push(Pending {
                    node: left,
                    depth: p.depth + 1,
                    structure: sl,
                    estimation: el,
                });
            }
            None => {
                nodes[p.node] = Node::Leaf(leaves.len());
                leaves.push(p.estimation);
            }
        }
    }

    Ok(HonestPartition {
        structure_half: structure,
        estimation_half: estimation,
        nodes,
        leaves,
    })
}

#[derive(Default)]
struct Scratch {
    order: Vec<(f64, f64)>,
    est: Vec<f64>,
}

/// Best variance-reduction split of the structure units on one axis, subject
/// to `min_leaf` structure units and one estimation unit per side.
fn best_split(
    features: Features<'_>,
    y: &[f64],
    structure: &[usize],
    estimation: &[usize],
    axis: usize,
    min_leaf: usize,
    scratch: &mut Scratch,
) -> Option<Candidate> {
    let m = structure.len();
    let order = &mut scratch.order;
    order.clear();
    order.extend(structure.iter().map(|&i| (features.get(i, axis), y[i])));
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let est = &mut scratch.est;
    est.clear();
    est.extend(estimation.iter().map(|&i| features.get(i, axis)));
    est.sort_by(f64::total_cmp);

    let total: f64 = order.iter().map(|v| v.1).sum();
    let mean = total / m as f64;
    let sse: f64 = order.iter().map(|v| (v.1 - mean) * (v.1 - mean)).sum();
    if sse <= 0.0 {
        return None;
    }
    let base = total * total / m as f64;
    let mut best: Option<Candidate> = None;
    let mut left_sum = 0.0;
    for k in 0..m - 1 {
        left_sum += order[k].1;
        let n_left = k + 1;
        if n_left < min_leaf {
            continue;
        }
        if m - n_left < min_leaf {
            break;
        }
        let (lo, hi) = (order[k].0, order[k + 1].0);
        if lo >= hi {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let threshold = if mid < hi { mid } else { lo };
        let est_left = est.partition_point(|&v| v <= threshold);
        if est_left == 0 || est_left == est.len() {
            continue;
        }
        let right_sum = total - left_sum;
        let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (m - n_left) as f64 - base;
        if gain > 1e-10 * sse && best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(Candidate {
                axis,
                threshold,
                gain,
            });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::Rng as _;

    fn cfg(min_leaf: usize) -> SplitConfig {
        SplitConfig {
            min_leaf,
            ..SplitConfig::default()
        }
    }

    #[test]
    fn exhaustive_scan_picks_midpoint() {
        // Units 0..4 structure, 4..6 estimation.
        let x = [0.1, 0.2, 0.8, 0.9, 0.15, 0.85];
        let y = [0.0, 0.0, 1.0, 1.0, 7.0, -3.0];
        let t = grow_with_halves(Features::new(&x, 1), &y, vec![0, 1, 2, 3], vec![4, 5], &cfg(1), 0).unwrap();
        assert_eq!(t.n_leaves(), 2);
        match t.nodes()[0] {
            Node::Split { axis, threshold, .. } => {
                assert_eq!(axis, 0);
                assert_eq!(threshold, 0.5);
            }
            Node::Leaf(_) => panic!("expected a split"),
        }
        assert_eq!(t.leaf_members(&[0.0]), &[4]);
        assert_eq!(t.leaf_members(&[1.0]), &[5]);
    }

    #[test]
    fn estimation_side_constraint() {
        // All estimation units on the left of every useful threshold: no split.
        let x = [0.1, 0.2, 0.8, 0.9, 0.05, 0.06];
        let y = [0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let t = grow_with_halves(Features::new(&x, 1), &y, vec![0, 1, 2, 3], vec![4, 5], &cfg(1), 0).unwrap();
        assert_eq!(t.n_leaves(), 1);
    }

    #[test]
    fn identical_x_gives_single_leaf() {
        let x = vec![0.3; 40];
        let y: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let sub: Vec<usize> = (0..40).collect();
        let t = grow_tree(Features::new(&x, 1), &y, &sub, &cfg(5), 9).unwrap();
        assert_eq!(t.n_leaves(), 1);
        assert_eq!(t.leaves()[0].len(), 20);
    }

    #[test]
    fn too_small() {
        let x = [0.0; 9];
        let sub: Vec<usize> = (0..9).collect();
        assert_eq!(
            grow_tree(Features::new(&x, 1), &x, &sub, &cfg(5), 0),
            Err(Error::TooSmall { size: 9, min_leaf: 5 })
        );
    }

    fn random_problem(seed: u64, n: usize, dim: usize) -> (Vec<f64>, Vec<f64>) {
        let mut rng = seed::rng(seed);
        let x: Vec<f64> = (0..n * dim).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|i| x[i * dim] * 3.0 + rng.random::<f64>()).collect();
        (x, y)
    }

    #[test]
    fn leaves_respect_minimums() {
        let (x, y) = random_problem(4, 400, 3);
        let sub: Vec<usize> = (0..400).collect();
        let t = grow_tree(Features::new(&x, 3), &y, &sub, &cfg(5), 11).unwrap();
        assert!(t.n_leaves() > 1);
        let f = Features::new(&x, 3);
        let mut counts = vec![0usize; t.n_leaves()];
        for &i in t.structure_half() {
            counts[t.leaf_of(f.row(i))] += 1;
        }
        for (leaf, members) in t.leaves().iter().enumerate() {
            assert!(counts[leaf] >= 5);
            assert!(!members.is_empty());
            for &i in members {
                assert_eq!(t.leaf_of(f.row(i)), leaf);
            }
        }
        let total: usize = t.leaves().iter().map(Vec::len).sum();
        assert_eq!(total, t.estimation_half().len());
    }

    #[test]
    fn max_depth_limits_growth() {
        let (x, y) = random_problem(5, 200, 1);
        let sub: Vec<usize> = (0..200).collect();
        let config = SplitConfig {
            max_depth: Some(1),
            ..cfg(5)
        };
        let t = grow_tree(Features::new(&x, 1), &y, &sub, &config, 1).unwrap();
        assert!(t.n_leaves() <= 2);
    }
}
