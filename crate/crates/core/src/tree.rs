//! Fitted classification trees: routing, accuracy and the JSON model format.
//!
//! Datapoints with `x_j = 0` go to the left child and those with `x_j = 1`
//! to the right child. Node 0 is the root and ids are breadth-first.

use std::collections::HashMap;
use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::{BinarizationSchema, BinaryDataset, RawDataset};
use crate::loss::majority;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        left: usize,
        right: usize,
        depth: usize,
        class_counts: Vec<usize>,
    },
    Leaf {
        label: usize,
        class_counts: Vec<usize>,
        depth: usize,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Split { depth, .. } | TreeNode::Leaf { depth, .. } => *depth,
        }
    }

    pub fn class_counts(&self) -> &[usize] {
        match self {
            TreeNode::Split { class_counts, .. } | TreeNode::Leaf { class_counts, .. } => {
                class_counts
            }
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    class_names: Vec<String>,
    feature_names: Vec<String>,
    schema: Option<BinarizationSchema>,
}

impl DecisionTree {
    /// Validates and wraps a node arena rooted at node 0.
    pub fn from_nodes(
        nodes: Vec<TreeNode>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::MalformedModel("tree has no nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![(0usize, 0usize)];
        seen[0] = true;
        while let Some((id, depth)) = stack.pop() {
            let node = &nodes[id];
            if node.depth() != depth {
                return Err(Error::MalformedModel(format!(
                    "node {id} has depth {} but sits at depth {depth}",
                    node.depth()
                )));
            }
            if node.class_counts().len() != class_names.len() {
                return Err(Error::MalformedModel(format!(
                    "node {id} has {} class counts for {} classes",
                    node.class_counts().len(),
                    class_names.len()
                )));
            }
            match node {
                TreeNode::Split {
                    feature,
                    left,
                    right,
                    ..
                } => {
                    if *feature >= feature_names.len() {
                        return Err(Error::MalformedModel(format!(
                            "node {id} splits on unknown feature {feature}"
                        )));
                    }
                    for &c in [left, right] {
                        if c >= nodes.len() || seen[c] {
                            return Err(Error::MalformedModel(format!(
                                "node {id} has invalid child {c}"
                            )));
                        }
                        seen[c] = true;
                        stack.push((c, depth + 1));
                    }
                }
                TreeNode::Leaf { label, .. } => {
                    if *label >= class_names.len() {
                        return Err(Error::MalformedModel(format!(
                            "node {id} has unknown label {label}"
                        )));
                    }
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::MalformedModel(format!(
                "node {orphan} is unreachable"
            )));
        }
        Ok(DecisionTree {
            nodes,
            class_names,
            feature_names,
            schema: None,
        })
    }

    pub fn with_schema(mut self, schema: Option<BinarizationSchema>) -> Self {
        self.schema = schema;
        self
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn schema(&self) -> Option<&BinarizationSchema> {
        self.schema.as_ref()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(TreeNode::depth).max().unwrap_or(0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn is_single_leaf(&self) -> bool {
        self.nodes.len() == 1
    }

    /// Training misclassifications implied by the stored leaf counts.
    pub fn leaf_misclassified(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Leaf {
                    class_counts,
                    label,
                    ..
                } => {
                    let total: usize = class_counts.iter().sum();
                    Some(total - class_counts[*label])
                }
                _ => None,
            })
            .sum()
    }

    fn leaf_by(&self, value: impl Fn(usize) -> bool) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                TreeNode::Split {
                    feature,
                    left,
                    right,
                    ..
                } => id = if value(*feature) { *right } else { *left },
                TreeNode::Leaf { .. } => return id,
            }
        }
    }

    fn label_of(&self, leaf: usize) -> usize {
        match &self.nodes[leaf] {
            TreeNode::Leaf { label, .. } => *label,
            TreeNode::Split { .. } => unreachable!("routing ends at a leaf"),
        }
    }

    pub fn predict(&self, x: &[bool]) -> Result<usize> {
        if x.len() != self.feature_names.len() {
            return Err(Error::FeatureLength {
                found: x.len(),
                expected: self.feature_names.len(),
            });
        }
        Ok(self.label_of(self.leaf_by(|j| x[j])))
    }

    /// Leaf reached by datapoint `i` of `ds`.
    pub fn leaf_of_row(&self, ds: &BinaryDataset, i: usize) -> usize {
        self.leaf_by(|j| ds.value(i, j))
    }

    pub fn predict_row(&self, ds: &BinaryDataset, i: usize) -> usize {
        self.label_of(self.leaf_of_row(ds, i))
    }

    /// Fraction of `subset` predicted correctly; 1.0 for an empty subset.
    pub fn accuracy(&self, ds: &BinaryDataset, subset: &[usize]) -> f64 {
        if subset.is_empty() {
            warn!("accuracy of an empty subset defined as 1.0");
            return 1.0;
        }
        let correct = subset
            .iter()
            .filter(|&&i| self.predict_row(ds, i) == ds.label(i))
            .count();
        correct as f64 / subset.len() as f64
    }

    /// Scores raw (unbinarized) records through the stored schema.
    pub fn predict_raw(&self, raw: &RawDataset) -> Result<Vec<usize>> {
        let schema = self
            .schema
            .as_ref()
            .ok_or_else(|| Error::SchemaMismatch("model carries no binarization schema".into()))?;
        if schema.n_columns != self.feature_names.len() {
            return Err(Error::SchemaMismatch(format!(
                "schema emits {} columns, tree expects {}",
                schema.n_columns,
                self.feature_names.len()
            )));
        }
        let cols = schema.encode(raw)?;
        Ok((0..raw.n_rows())
            .map(|i| self.label_of(self.leaf_by(|j| cols[j].contains(i))))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            format_version: FORMAT_VERSION,
            classes: self.class_names.clone(),
            features: self.feature_names.clone(),
            schema: self.schema.clone(),
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(id, node)| match node {
                    TreeNode::Split {
                        feature,
                        left,
                        right,
                        depth,
                        class_counts,
                    } => NodeDoc {
                        id,
                        kind: NodeKind::Split,
                        depth: *depth,
                        split_feature: Some(self.feature_names[*feature].clone()),
                        label: None,
                        counts: class_counts.clone(),
                        children: vec![*left, *right],
                    },
                    TreeNode::Leaf {
                        label,
                        class_counts,
                        depth,
                    } => NodeDoc {
                        id,
                        kind: NodeKind::Leaf,
                        depth: *depth,
                        split_feature: None,
                        label: Some(self.class_names[*label].clone()),
                        counts: class_counts.clone(),
                        children: vec![],
                    },
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut doc: ModelDoc = serde_json::from_str(s)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::MalformedModel(format!(
                "unsupported format_version {}",
                doc.format_version
            )));
        }
        doc.nodes.sort_by_key(|n| n.id);
        if doc.nodes.iter().enumerate().any(|(i, n)| n.id != i) {
            return Err(Error::MalformedModel("node ids must be 0..n".into()));
        }
        let feature_idx: HashMap<&str, usize> = doc
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.as_str(), i))
            .collect();
        let class_idx: HashMap<&str, usize> = doc
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let nodes = doc
            .nodes
            .iter()
            .map(|n| match n.kind {
                NodeKind::Split => {
                    let name = n.split_feature.as_deref().ok_or_else(|| {
                        Error::MalformedModel(format!("split node {} lacks split_feature", n.id))
                    })?;
                    let feature = *feature_idx.get(name).ok_or_else(|| {
                        Error::MalformedModel(format!("unknown feature `{name}`"))
                    })?;
                    let [left, right] = n.children[..] else {
                        return Err(Error::MalformedModel(format!(
                            "split node {} needs two children",
                            n.id
                        )));
                    };
                    Ok(TreeNode::Split {
                        feature,
                        left,
                        right,
                        depth: n.depth,
                        class_counts: n.counts.clone(),
                    })
                }
                NodeKind::Leaf => {
                    let name = n.label.as_deref().ok_or_else(|| {
                        Error::MalformedModel(format!("leaf {} lacks label", n.id))
                    })?;
                    let label = *class_idx
                        .get(name)
                        .ok_or_else(|| Error::MalformedModel(format!("unknown class `{name}`")))?;
                    Ok(TreeNode::Leaf {
                        label,
                        class_counts: n.counts.clone(),
                        depth: n.depth,
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DecisionTree::from_nodes(nodes, doc.classes, doc.features)?.with_schema(doc.schema))
    }
}

impl fmt::Display for DecisionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn walk(t: &DecisionTree, id: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let node = &t.nodes[id];
            let pad = "  ".repeat(node.depth());
            match node {
                TreeNode::Split {
                    feature,
                    left,
                    right,
                    ..
                } => {
                    let name = &t.feature_names[*feature];
                    writeln!(f, "{pad}[{id}] not {name}:")?;
                    walk(t, *left, f)?;
                    writeln!(f, "{pad}[{id}] {name}:")?;
                    walk(t, *right, f)
                }
                TreeNode::Leaf {
                    label,
                    class_counts,
                    ..
                } => writeln!(
                    f,
                    "{pad}[{id}] -> {} {:?}",
                    t.class_names[*label], class_counts
                ),
            }
        }
        walk(self, 0, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum NodeKind {
    Split,
    Leaf,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDoc {
    id: usize,
    kind: NodeKind,
    depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split_feature: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    counts: Vec<usize>,
    #[serde(default)]
    children: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    classes: Vec<String>,
    features: Vec<String>,
    #[serde(default)]
    schema: Option<BinarizationSchema>,
    nodes: Vec<NodeDoc>,
}

/// Leaf for a node holding `counts`; empty nodes inherit `fallback`.
pub(crate) fn leaf_label(counts: &[usize], fallback: usize) -> usize {
    if counts.iter().all(|&c| c == 0) {
        fallback
    } else {
        majority(counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::table1;
    use proptest::prelude::*;

    /// x1 at the root; x3 under x1 = 1, separating datapoints 1 and 2 only
    /// partially; leaves labeled by majority.
    fn small_tree() -> DecisionTree {
        let nodes = vec![
            TreeNode::Split {
                feature: 0,
                left: 1,
                right: 2,
                depth: 0,
                class_counts: vec![1, 3],
            },
            TreeNode::Leaf {
                label: 1,
                class_counts: vec![0, 1],
                depth: 1,
            },
            TreeNode::Split {
                feature: 2,
                left: 3,
                right: 4,
                depth: 1,
                class_counts: vec![1, 2],
            },
            TreeNode::Leaf {
                label: 1,
                class_counts: vec![0, 1],
                depth: 2,
            },
            TreeNode::Leaf {
                label: 0,
                class_counts: vec![1, 1],
                depth: 2,
            },
        ];
        DecisionTree::from_nodes(
            nodes,
            vec!["A".into(), "B".into()],
            vec!["x1".into(), "x2".into(), "x3".into()],
        )
        .unwrap()
    }

    #[test]
    fn routes_and_scores() {
        let ds = table1();
        let t = small_tree();
        assert_eq!(t.predict(&[true, false, true]).unwrap(), 0);
        assert_eq!(t.predict(&[false, false, false]).unwrap(), 1);
        assert!(matches!(
            t.predict(&[true]),
            Err(Error::FeatureLength { .. })
        ));
        assert_eq!(t.accuracy(&ds, &ds.all_indices()), 0.75);
        assert_eq!(t.accuracy(&ds, &[]), 1.0);
        assert_eq!(
            1.0 - t.leaf_misclassified() as f64 / 4.0,
            t.accuracy(&ds, &ds.all_indices())
        );
        assert_eq!(t.depth(), 2);
        assert_eq!(t.n_leaves(), 3);
    }

    #[test]
    fn single_leaf_predicts_constant() {
        let t = DecisionTree::from_nodes(
            vec![TreeNode::Leaf {
                label: 1,
                class_counts: vec![1, 3],
                depth: 0,
            }],
            vec!["A".into(), "B".into()],
            vec!["x1".into()],
        )
        .unwrap();
        assert_eq!(t.predict(&[true]).unwrap(), 1);
        assert_eq!(t.predict(&[false]).unwrap(), 1);
        assert_eq!(t.accuracy(&table1(), &[0, 1, 2, 3]), 0.75);
    }

    #[test]
    fn rejects_malformed_arenas() {
        let names = || (vec!["A".to_string()], vec!["f".to_string()]);
        let (c, f) = names();
        let cyc = vec![TreeNode::Split {
            feature: 0,
            left: 0,
            right: 0,
            depth: 0,
            class_counts: vec![1],
        }];
        assert!(DecisionTree::from_nodes(cyc, c, f).is_err());
        let (c, f) = names();
        let orphan = vec![
            TreeNode::Leaf {
                label: 0,
                class_counts: vec![1],
                depth: 0,
            },
            TreeNode::Leaf {
                label: 0,
                class_counts: vec![1],
                depth: 1,
            },
        ];
        assert!(DecisionTree::from_nodes(orphan, c, f).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let t = small_tree();
        let s = t.to_json().unwrap();
        assert!(s.contains("\"split_feature\": \"x1\""));
        let back = DecisionTree::from_json(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn corrupt_documents() {
        assert!(DecisionTree::from_json("").is_err());
        assert!(DecisionTree::from_json("{\"nodes\": 3}").is_err());
        let s = small_tree().to_json().unwrap().replace("\"x3\"", "\"zz\"");
        // the feature list and the node reference are both renamed; break only the node
        let s = s.replacen("\"zz\",", "\"x3\",", 1);
        assert!(matches!(
            DecisionTree::from_json(&s),
            Err(Error::MalformedModel(_))
        ));
    }

    proptest! {
        #[test]
        fn roundtrip_preserves_predictions(bits in proptest::collection::vec(any::<bool>(), 3)) {
            let t = small_tree();
            let back = DecisionTree::from_json(&t.to_json().unwrap()).unwrap();
            prop_assert_eq!(t.predict(&bits).unwrap(), back.predict(&bits).unwrap());
        }
    }
}
