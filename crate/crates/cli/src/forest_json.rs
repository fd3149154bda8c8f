//! JSON form of a [`ForestKernel`].
//!
//! ```json
//! {
//!   "format": "localband-forest", "version": 1,
//!   "kind": {"type": "tree", "min_leaf": 5, "max_depth": null, "mtry": null},
//!   "plan": {"n": 2000, "b": 100, "master_seed": 1, "seeds": [..], "subsets": [[..], ..]},
//!   "groups": {"trees_per_group": 10, "halves": [[..], ..]},
//!   "kernels": [
//!     {"type": "tree", "structure_half": [..], "estimation_half": [..],
//!      "root": {"id": 0, "axis": 1, "threshold": 0.41,
//!               "left": {"id": 1, "leaf": 0, "members": [..]},
//!               "right": {..}}},
//!     {"type": "knn", "k": 10, "subsample": [..]}
//!   ]
//! }
//! ```
//!
//! Split nodes go left when `x[axis] <= threshold`. Node and leaf ids are
//! kept so a stored forest reassembles to an identical value.

use serde::{Deserialize, Serialize};

use localband::kernels::{
    ForestKernel, GroupLayout, HonestPartition, KernelKind, KnnKernel, Node, SplitConfig, SubKernel, SubsamplePlan,
};

use crate::error::CliError;

pub const FORMAT: &str = "localband-forest";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestDoc {
    pub format: String,
    pub version: u32,
    pub kind: KindDoc,
    pub plan: PlanDoc,
    pub groups: Option<GroupsDoc>,
    pub kernels: Vec<KernelDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KindDoc {
    Tree {
        min_leaf: usize,
        max_depth: Option<usize>,
        mtry: Option<usize>,
    },
    Knn {
        k: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDoc {
    pub n: usize,
    pub b: usize,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub subsets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupsDoc {
    pub trees_per_group: usize,
    pub halves: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelDoc {
    Tree {
        structure_half: Vec<usize>,
        estimation_half: Vec<usize>,
        root: NodeDoc,
    },
    Knn {
        k: usize,
        subsample: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeDoc {
    Split {
        id: usize,
        axis: usize,
        threshold: f64,
        left: Box<NodeDoc>,
        right: Box<NodeDoc>,
    },
    Leaf {
        id: usize,
        leaf: usize,
        members: Vec<usize>,
    },
}

fn node_doc(tree: &HonestPartition, at: usize) -> NodeDoc {
    match tree.nodes()[at] {
        Node::Split {
            axis,
            threshold,
            left,
            right,
        } => NodeDoc::Split {
            id: at,
            axis,
            threshold,
            left: Box::new(node_doc(tree, left)),
            right: Box::new(node_doc(tree, right)),
        },
        Node::Leaf(leaf) => NodeDoc::Leaf {
            id: at,
            leaf,
            members: tree.leaves()[leaf].clone(),
        },
    }
}

fn collect(node: &NodeDoc, nodes: &mut Vec<Option<Node>>, leaves: &mut Vec<Option<Vec<usize>>>) -> Result<(), CliError> {
    let place = |v: &mut Vec<Option<Node>>, id: usize, n: Node| -> Result<(), CliError> {
        if v.len() <= id {
            v.resize(id + 1, None);
        }
        if v[id].replace(n).is_some() {
            return Err(CliError::config(format!("forest json: node id {id} repeated")));
        }
        Ok(())
    };
    match node {
        NodeDoc::Split {
            id,
            axis,
            threshold,
            left,
            right,
        } => {
            let (l, r) = (node_id(left), node_id(right));
            place(
                nodes,
                *id,
                Node::Split {
                    axis: *axis,
                    threshold: *threshold,
                    left: l,
                    right: r,
                },
            )?;
            collect(left, nodes, leaves)?;
            collect(right, nodes, leaves)
        }
        NodeDoc::Leaf { id, leaf, members } => {
            place(nodes, *id, Node::Leaf(*leaf))?;
            if leaves.len() <= *leaf {
                leaves.resize(leaf + 1, None);
            }
            if leaves[*leaf].replace(members.clone()).is_some() {
                return Err(CliError::config(format!("forest json: leaf id {leaf} repeated")));
            }
            Ok(())
        }
    }
}

fn node_id(node: &NodeDoc) -> usize {
    match node {
        NodeDoc::Split { id, .. } | NodeDoc::Leaf { id, .. } => *id,
    }
}

impl ForestDoc {
    pub fn from_forest(forest: &ForestKernel) -> Self {
        let kind = match *forest.kind() {
            KernelKind::Tree(c) => KindDoc::Tree {
                min_leaf: c.min_leaf,
                max_depth: c.max_depth,
                mtry: c.mtry,
            },
            KernelKind::Knn(k) => KindDoc::Knn { k },
        };
        let plan = forest.plan();
        let kernels = forest
            .kernels()
            .iter()
            .map(|k| match k {
                SubKernel::Tree(t) => KernelDoc::Tree {
                    structure_half: t.structure_half().to_vec(),
                    estimation_half: t.estimation_half().to_vec(),
                    root: node_doc(t, 0),
                },
                SubKernel::Knn(k) => KernelDoc::Knn {
                    k: k.k(),
                    subsample: k.subsample().to_vec(),
                },
            })
            .collect();
        ForestDoc {
            format: FORMAT.into(),
            version: VERSION,
            kind,
            plan: PlanDoc {
                n: plan.n,
                b: plan.b,
                master_seed: plan.master_seed,
                seeds: plan.seeds.clone(),
                subsets: plan.subsets.clone(),
            },
            groups: forest.groups().map(|g| GroupsDoc {
                trees_per_group: g.trees_per_group,
                halves: g.halves.clone(),
            }),
            kernels,
        }
    }

    pub fn to_forest(&self) -> Result<ForestKernel, CliError> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(CliError::config(format!(
                "forest json: expected {FORMAT} version {VERSION}, found {} version {}",
                self.format, self.version
            )));
        }
        let kind = match self.kind {
            KindDoc::Tree {
                min_leaf,
                max_depth,
                mtry,
            } => KernelKind::Tree(SplitConfig {
                min_leaf,
                max_depth,
                mtry,
            }),
            KindDoc::Knn { k } => KernelKind::Knn(k),
        };
        let plan = SubsamplePlan::from_parts(
            self.plan.n,
            self.plan.b,
            self.plan.master_seed,
            self.plan.seeds.clone(),
            self.plan.subsets.clone(),
        )?;
        let kernels = self
            .kernels
            .iter()
            .map(|k| -> Result<SubKernel, CliError> {
                match k {
                    KernelDoc::Tree {
                        structure_half,
                        estimation_half,
                        root,
                    } => {
                        let (mut nodes, mut leaves) = (Vec::new(), Vec::new());
                        collect(root, &mut nodes, &mut leaves)?;
                        if node_id(root) != 0 {
                            return Err(CliError::config("forest json: root node must have id 0"));
                        }
                        let nodes = nodes
                            .into_iter()
                            .collect::<Option<Vec<_>>>()
                            .ok_or_else(|| CliError::config("forest json: node ids are not contiguous"))?;
                        let leaves = leaves
                            .into_iter()
                            .collect::<Option<Vec<_>>>()
                            .ok_or_else(|| CliError::config("forest json: leaf ids are not contiguous"))?;
                        Ok(SubKernel::Tree(HonestPartition::from_parts(
                            structure_half.clone(),
                            estimation_half.clone(),
                            nodes,
                            leaves,
                        )?))
                    }
                    KernelDoc::Knn { k, subsample } => Ok(SubKernel::Knn(KnnKernel::new(subsample.clone(), *k)?)),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let groups = self.groups.as_ref().map(|g| GroupLayout {
            halves: g.halves.clone(),
            trees_per_group: g.trees_per_group,
        });
        Ok(ForestKernel::from_parts(plan, kernels, kind, groups)?)
    }
}

pub fn to_json(forest: &ForestKernel) -> Result<String, CliError> {
    Ok(serde_json::to_string(&ForestDoc::from_forest(forest))?)
}

pub fn from_json(text: &str) -> Result<ForestKernel, CliError> {
    let doc: ForestDoc = serde_json::from_str(text)?;
    doc.to_forest()
}

#[cfg(test)]
mod tests {
    use super::*;
    use localband::data::Features;
    use localband::kernels::draw_subsamples;

    fn points(n: usize, p: usize) -> (Vec<f64>, Vec<f64>) {
        let z: Vec<f64> = (0..n * p).map(|i| ((i * 7919 + 13) % 1009) as f64 / 1009.0).collect();
        let y: Vec<f64> = (0..n).map(|i| z[i * p] + ((i * 31) % 17) as f64 / 17.0).collect();
        (z, y)
    }

    #[test]
    fn tree_and_knn_forests_round_trip() {
        let (z, y) = points(200, 2);
        let features = Features::new(&z, 2);
        let plan = draw_subsamples(200, 40, 12, 5).unwrap();
        for kind in [KernelKind::Tree(SplitConfig::default()), KernelKind::Knn(4)] {
            let forest = ForestKernel::grow(features, &y, plan.clone(), kind).unwrap();
            let text = to_json(&forest).unwrap();
            assert_eq!(from_json(&text).unwrap(), forest);
            assert_eq!(to_json(&from_json(&text).unwrap()).unwrap(), text);
        }
    }

    #[test]
    fn grouped_forest_round_trips() {
        let (z, y) = points(120, 3);
        let features = Features::new(&z, 3);
        let halves = vec![(0..60).collect::<Vec<_>>(), (60..120).collect()];
        let forest = ForestKernel::grow_grouped(120, features, &y, halves, &[1, 2], 20, 3, KernelKind::Tree(SplitConfig::default()), 9).unwrap();
        assert_eq!(from_json(&to_json(&forest).unwrap()).unwrap(), forest);
    }

    #[test]
    fn malformed_documents_are_rejected() {
        let (z, y) = points(100, 2);
        let plan = draw_subsamples(100, 30, 2, 1).unwrap();
        let forest = ForestKernel::grow(Features::new(&z, 2), &y, plan, KernelKind::Knn(3)).unwrap();
        let mut doc = ForestDoc::from_forest(&forest);
        doc.version = 99;
        assert!(doc.to_forest().is_err());
        let mut doc = ForestDoc::from_forest(&forest);
        doc.kernels.pop();
        assert!(doc.to_forest().is_err());
        assert_eq!(from_json("{").unwrap_err().exit_code(), 2);
    }
}
