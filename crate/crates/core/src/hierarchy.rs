//! Top-down hierarchical classification.
//!
//! Every internal node of the taxonomy gets a one-versus-all model over
//! its children, trained on the instances of its subtree. Prediction
//! starts at a virtual root and greedily follows the best child until it
//! reaches a leaf, so an error high in the tree cannot be recovered below.
//!
//! Levels can be pruned: a pruned level disappears from the decision path
//! and its parent decides directly among the grandchildren. Pruning level
//! 1 makes the root choose among all level-2 nodes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::corpus::{LeafLabel, NodeRef, Taxonomy};
use crate::features::SparseVector;
use crate::linear::train_ova_on;
use crate::linear::{LinearError, OvaModel, Problem, TrainConfig, TrainReport};
use crate::textfmt::{check_name, FormatError, LineReader};

const MAGIC: &str = "prodcat-hierarchy";
const VERSION: &str = "v1";

/// Fingerprint recorded by models whose nodes each use their own
/// vocabulary; every node model then carries its vocabulary fingerprint.
pub const PER_NODE_VOCAB: &str = "per-node";

#[derive(Debug, thiserror::Error)]
pub enum HierarchyError {
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("training label {0:?} is not a leaf of the taxonomy")]
    UnknownLabel(String),
    #[error("cannot prune level {level} of a {depth}-level taxonomy")]
    BadPruning { level: u8, depth: usize },
    #[error("expected {expected} labels, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{0}")]
    Io(String),
}

/// A decision point: the virtual root or an internal taxonomy node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DecisionNode {
    Root,
    Node(NodeRef),
}

/// Set of collapsed levels. Only `{}` and `{1}` are used in practice.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PruneLevels(BTreeSet<u8>);

impl PruneLevels {
    pub fn none() -> Self {
        PruneLevels(BTreeSet::new())
    }

    pub fn first_level() -> Self {
        PruneLevels([1].into())
    }

    pub fn new<I: IntoIterator<Item = u8>>(levels: I) -> Self {
        PruneLevels(levels.into_iter().collect())
    }

    pub fn contains(&self, level: u8) -> bool {
        self.0.contains(&level)
    }

    pub fn levels(&self) -> impl Iterator<Item = u8> + '_ {
        self.0.iter().copied()
    }

    fn validate(&self, depth: usize) -> Result<(), HierarchyError> {
        match self.0.iter().find(|&&l| l == 0 || l as usize >= depth) {
            Some(&level) => Err(HierarchyError::BadPruning { level, depth }),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeModel {
    Classifier(OvaModel),
    /// Always picks this child; used for single-child nodes and nodes
    /// without training data.
    Constant(NodeRef),
}

#[derive(Clone, Debug, PartialEq)]
struct DecisionEntry {
    children: Vec<NodeRef>,
    model: NodeModel,
}

#[derive(Debug)]
pub struct HierarchicalModel {
    taxonomy: Taxonomy,
    prune: PruneLevels,
    nodes: BTreeMap<DecisionNode, DecisionEntry>,
    dim: usize,
    vocab_fingerprint: String,
    classifier_calls: AtomicU64,
}

impl Clone for HierarchicalModel {
    fn clone(&self) -> Self {
        HierarchicalModel {
            taxonomy: self.taxonomy.clone(),
            prune: self.prune.clone(),
            nodes: self.nodes.clone(),
            dim: self.dim,
            vocab_fingerprint: self.vocab_fingerprint.clone(),
            classifier_calls: AtomicU64::new(self.classifier_calls()),
        }
    }
}

impl PartialEq for HierarchicalModel {
    fn eq(&self, other: &Self) -> bool {
        self.taxonomy == other.taxonomy
            && self.prune == other.prune
            && self.nodes == other.nodes
            && self.dim == other.dim
            && self.vocab_fingerprint == other.vocab_fingerprint
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopDownPrediction {
    pub leaf: LeafLabel,
    /// Chosen node at every step, ending with the leaf.
    pub path: Vec<NodeRef>,
    /// Node classifiers evaluated (constant nodes are not counted).
    pub classifier_calls: usize,
}

#[derive(Clone, Debug, Default)]
pub struct TopDownReport {
    pub node_reports: BTreeMap<DecisionNode, Vec<TrainReport>>,
    pub warnings: Vec<String>,
}

/// Levels that remain on the decision path, top to bottom.
fn kept_levels(taxonomy: &Taxonomy, prune: &PruneLevels) -> Vec<u8> {
    (1..=taxonomy.depth() as u8).filter(|l| !prune.contains(*l)).collect()
}

fn descendants_at(taxonomy: &Taxonomy, node: NodeRef, level: u8) -> Vec<NodeRef> {
    let mut frontier = vec![node];
    while frontier.first().is_some_and(|n| n.level < level) {
        frontier = frontier.iter().flat_map(|&n| taxonomy.children(n)).collect();
    }
    frontier
}

/// Decision nodes with their children after pruning.
fn decision_structure(taxonomy: &Taxonomy, prune: &PruneLevels) -> Vec<(DecisionNode, Vec<NodeRef>)> {
    let levels = kept_levels(taxonomy, prune);
    let mut out = vec![(DecisionNode::Root, taxonomy.nodes_at(levels[0]).collect())];
    for pair in levels.windows(2) {
        for node in taxonomy.nodes_at(pair[0]) {
            out.push((DecisionNode::Node(node), descendants_at(taxonomy, node, pair[1])));
        }
    }
    out
}

fn class_name(taxonomy: &Taxonomy, node: NodeRef) -> LeafLabel {
    LeafLabel::new(taxonomy.name(node))
}

/// Training instances of one decision node: the records below it, each
/// tagged with the child it falls under.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSlice {
    pub node: DecisionNode,
    pub children: Vec<NodeRef>,
    /// Positions in the training set, ascending.
    pub rows: Vec<usize>,
    /// Child name per row.
    pub targets: Vec<LeafLabel>,
}

impl NodeSlice {
    /// False for single-child nodes and nodes without data; those become
    /// constant and need no features.
    pub fn needs_classifier(&self) -> bool {
        self.children.len() > 1 && !self.rows.is_empty()
    }
}

/// Outcome of training one decision node.
#[derive(Clone, Debug)]
pub struct TrainedNode {
    pub model: NodeModel,
    pub reports: Vec<TrainReport>,
    pub warning: Option<String>,
}

/// Splits the training set over the decision nodes.
pub fn decision_slices(
    labels: &[LeafLabel],
    taxonomy: &Taxonomy,
    prune: &PruneLevels,
) -> Result<Vec<NodeSlice>, HierarchyError> {
    prune.validate(taxonomy.depth())?;
    let leaves: Vec<NodeRef> = labels
        .iter()
        .map(|l| {
            taxonomy
                .leaf(l)
                .ok_or_else(|| HierarchyError::UnknownLabel(l.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let slices = decision_structure(taxonomy, prune)
        .into_iter()
        .map(|(node, children)| {
            let child_level = children[0].level;
            let mut rows = Vec::new();
            let mut targets = Vec::new();
            for (i, &leaf) in leaves.iter().enumerate() {
                let inside = match node {
                    DecisionNode::Root => true,
                    DecisionNode::Node(n) => taxonomy.ancestor_at(leaf, n.level) == Some(n),
                };
                if inside {
                    let child = taxonomy
                        .ancestor_at(leaf, child_level)
                        .expect("leaf lies below its ancestors");
                    rows.push(i);
                    targets.push(class_name(taxonomy, child));
                }
            }
            NodeSlice {
                node,
                children,
                rows,
                targets,
            }
        })
        .collect();
    Ok(slices)
}

/// Trains the model of one node from the vectors of its rows (in row
/// order). Constant nodes ignore `vectors`.
pub fn train_slice<'a, I>(
    taxonomy: &Taxonomy,
    slice: &NodeSlice,
    vectors: I,
    dim: usize,
    config: &TrainConfig,
    vocab_fingerprint: &str,
) -> Result<TrainedNode, HierarchyError>
where
    I: IntoIterator<Item = &'a SparseVector>,
{
    let children = &slice.children;
    if children.len() == 1 {
        return Ok(TrainedNode {
            model: NodeModel::Constant(children[0]),
            reports: Vec::new(),
            warning: None,
        });
    }
    if slice.rows.is_empty() {
        let warning = format!(
            "node {} has no training instances; it will always predict {}",
            describe(taxonomy, slice.node),
            taxonomy.name(children[0])
        );
        return Ok(TrainedNode {
            model: NodeModel::Constant(children[0]),
            reports: Vec::new(),
            warning: Some(warning),
        });
    }
    let problem = Problem::new(vectors, dim, config.bias)?;
    if problem.len() != slice.rows.len() {
        return Err(HierarchyError::LengthMismatch {
            expected: slice.rows.len(),
            found: problem.len(),
        });
    }
    let classes: Vec<LeafLabel> = children.iter().map(|&c| class_name(taxonomy, c)).collect();
    let (ova, reports) = train_ova_on(&problem, &slice.targets, &classes, config, vocab_fingerprint)?;
    // OVA sorts its classes by name, as `Taxonomy::children` already does
    debug_assert_eq!(ova.classes(), classes.as_slice());
    Ok(TrainedNode {
        model: NodeModel::Classifier(ova),
        reports,
        warning: None,
    })
}

/// Trains one classifier per decision node, nodes in parallel.
///
/// `vectors` are not bias-augmented; `dim` is the feature dimension.
pub fn train_topdown(
    vectors: &[SparseVector],
    labels: &[LeafLabel],
    taxonomy: &Taxonomy,
    prune: &PruneLevels,
    dim: usize,
    config: &TrainConfig,
    vocab_fingerprint: &str,
) -> Result<(HierarchicalModel, TopDownReport), HierarchyError> {
    config.validate()?;
    if vectors.len() != labels.len() {
        return Err(HierarchyError::LengthMismatch {
            expected: vectors.len(),
            found: labels.len(),
        });
    }
    let slices = decision_slices(labels, taxonomy, prune)?;
    // validates dimensions once for every node
    Problem::new(vectors, dim, config.bias)?;
    let trained: Vec<TrainedNode> = slices
        .par_iter()
        .map(|s| {
            let rows = s.rows.iter().map(|&i| &vectors[i]);
            train_slice(taxonomy, s, rows, dim, config, vocab_fingerprint)
        })
        .collect::<Result<_, _>>()?;
    Ok(HierarchicalModel::assemble(
        taxonomy,
        prune,
        slices.into_iter().zip(trained),
        dim,
        vocab_fingerprint,
    ))
}

fn describe(taxonomy: &Taxonomy, node: DecisionNode) -> String {
    match node {
        DecisionNode::Root => "root".to_string(),
        DecisionNode::Node(n) => format!("{} (level {})", taxonomy.name(n), n.level),
    }
}

/// Greedy root-to-leaf descent.
pub fn predict_topdown(
    model: &HierarchicalModel,
    v: &SparseVector,
    vocab_fingerprint: &str,
) -> Result<TopDownPrediction, HierarchyError> {
    if vocab_fingerprint != model.vocab_fingerprint {
        return Err(LinearError::FingerprintMismatch {
            expected: model.vocab_fingerprint.clone(),
            found: vocab_fingerprint.to_string(),
        }
        .into());
    }
    descend(model, |_, ova| Ok(ova.best_class(v)?))
}

/// Greedy descent where `choose` returns the child index picked by the
/// classifier of a node. Used directly when every node reads its own
/// features.
pub fn descend<F>(model: &HierarchicalModel, mut choose: F) -> Result<TopDownPrediction, HierarchyError>
where
    F: FnMut(DecisionNode, &OvaModel) -> Result<usize, HierarchyError>,
{
    let mut current = DecisionNode::Root;
    let mut path = Vec::with_capacity(model.taxonomy.depth());
    let mut calls = 0;
    loop {
        let entry = &model.nodes[&current];
        let chosen = match &entry.model {
            NodeModel::Constant(child) => *child,
            NodeModel::Classifier(ova) => {
                calls += 1;
                entry.children[choose(current, ova)?]
            }
        };
        path.push(chosen);
        if model.taxonomy.is_leaf(chosen) {
            break;
        }
        current = DecisionNode::Node(chosen);
    }
    model.classifier_calls.fetch_add(calls as u64, Ordering::Relaxed);
    Ok(TopDownPrediction {
        leaf: class_name(&model.taxonomy, *path.last().expect("path has a leaf")),
        path,
        classifier_calls: calls,
    })
}

impl HierarchicalModel {
    /// Builds a model from trained nodes, logging their warnings. With
    /// per-node vocabularies, pass `dim` 0 and [`PER_NODE_VOCAB`].
    pub fn assemble<I>(
        taxonomy: &Taxonomy,
        prune: &PruneLevels,
        trained: I,
        dim: usize,
        vocab_fingerprint: &str,
    ) -> (HierarchicalModel, TopDownReport)
    where
        I: IntoIterator<Item = (NodeSlice, TrainedNode)>,
    {
        let mut report = TopDownReport::default();
        let mut nodes = BTreeMap::new();
        for (slice, node) in trained {
            if let Some(w) = node.warning {
                log::warn!("{w}");
                report.warnings.push(w);
            }
            if !node.reports.is_empty() {
                report.node_reports.insert(slice.node, node.reports);
            }
            let entry = DecisionEntry {
                children: slice.children,
                model: node.model,
            };
            nodes.insert(slice.node, entry);
        }
        let model = HierarchicalModel {
            taxonomy: taxonomy.clone(),
            prune: prune.clone(),
            nodes,
            dim,
            vocab_fingerprint: vocab_fingerprint.to_string(),
            classifier_calls: AtomicU64::new(0),
        };
        (model, report)
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn prune_levels(&self) -> &PruneLevels {
        &self.prune
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_fingerprint(&self) -> &str {
        &self.vocab_fingerprint
    }

    pub fn decision_nodes(&self) -> impl Iterator<Item = DecisionNode> + '_ {
        self.nodes.keys().copied()
    }

    pub fn node_model(&self, node: DecisionNode) -> Option<&NodeModel> {
        self.nodes.get(&node).map(|e| &e.model)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Node classifiers evaluated by all predictions so far.
    pub fn classifier_calls(&self) -> u64 {
        self.classifier_calls.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.classifier_calls.store(0, Ordering::Relaxed);
    }

    /// Decision steps per prediction: the number of levels kept.
    pub fn path_length(&self) -> usize {
        kept_levels(&self.taxonomy, &self.prune).len()
    }

    /// Text form: a header, the taxonomy as root-to-leaf paths, then one
    /// block per decision node (`constant` with its child, or `ova`
    /// followed by a one-versus-all model block).
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), HierarchyError> {
        let io = |e: std::io::Error| HierarchyError::Io(format!("write failed: {e}"));
        let tax = &self.taxonomy;
        let pruned: Vec<String> = self.prune.levels().map(|l| l.to_string()).collect();
        writeln!(w, "{MAGIC}\t{VERSION}").map_err(io)?;
        writeln!(
            w,
            "depth\t{}\tpruned\t{}\tleaves\t{}\tnodes\t{}\tdim\t{}\tvocab\t{}",
            tax.depth(),
            if pruned.is_empty() {
                "-".to_string()
            } else {
                pruned.join(",")
            },
            tax.leaf_count(),
            self.nodes.len(),
            self.dim,
            self.vocab_fingerprint
        )
        .map_err(io)?;
        for leaf in tax.leaves() {
            let mut path: Vec<&str> = (1..=leaf.level)
                .map(|l| tax.name(tax.ancestor_at(leaf, l).expect("ancestor exists")))
                .collect();
            for name in &path {
                check_name(name).map_err(HierarchyError::Io)?;
            }
            path.insert(0, "path");
            writeln!(w, "{}", path.join("\t")).map_err(io)?;
        }
        for (node, entry) in &self.nodes {
            let key = match node {
                DecisionNode::Root => "root".to_string(),
                DecisionNode::Node(n) => format!("{}:{}", n.level, tax.name(*n)),
            };
            match &entry.model {
                NodeModel::Constant(child) => writeln!(w, "node\t{key}\tconstant\t{}", tax.name(*child)).map_err(io)?,
                NodeModel::Classifier(ova) => {
                    writeln!(w, "node\t{key}\tova").map_err(io)?;
                    ova.write_to(&mut w)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, HierarchyError> {
        let mut lines = LineReader::new(r);
        let magic = lines.next_line("magic line")?;
        if magic != format!("{MAGIC}\t{VERSION}") {
            return Err(lines.error(format!("not a hierarchical model: {magic:?}")).into());
        }
        let h = lines.key_values(&["depth", "pruned", "leaves", "nodes", "dim", "vocab"])?;
        let depth: usize = lines.parse(&h[0], "depth")?;
        let prune = if h[1] == "-" {
            PruneLevels::none()
        } else {
            PruneLevels::new(
                h[1].split(',')
                    .map(|p| lines.parse::<u8>(p, "pruned level"))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        };
        let n_leaves: usize = lines.parse(&h[2], "leaf count")?;
        let n_nodes: usize = lines.parse(&h[3], "node count")?;
        let dim: usize = lines.parse(&h[4], "dim")?;
        let fingerprint = h[5].clone();
        if !(1..=3).contains(&depth) {
            return Err(lines.error(format!("unsupported depth {depth}")).into());
        }

        let mut paths = Vec::with_capacity(n_leaves);
        for _ in 0..n_leaves {
            let p = lines.tagged("path")?;
            if p.len() != depth {
                return Err(lines.error(format!("path needs {depth} names")).into());
            }
            paths.push(p);
        }
        let taxonomy = Taxonomy::from_paths(depth, &paths).map_err(|e| lines.error(format!("bad taxonomy: {e}")))?;
        prune.validate(depth)?;

        let expected: BTreeMap<DecisionNode, Vec<NodeRef>> =
            decision_structure(&taxonomy, &prune).into_iter().collect();
        let mut nodes = BTreeMap::new();
        for _ in 0..n_nodes {
            let f = lines.tagged("node")?;
            let node = if f.first().map(String::as_str) == Some("root") {
                DecisionNode::Root
            } else {
                let key = f.first().ok_or_else(|| lines.error("node line without key"))?;
                let (level, name) = key
                    .split_once(':')
                    .ok_or_else(|| lines.error(format!("bad node key {key:?}")))?;
                let level: u8 = lines.parse(level, "node level")?;
                DecisionNode::Node(
                    taxonomy
                        .find(level, name)
                        .ok_or_else(|| lines.error(format!("unknown node {key:?}")))?,
                )
            };
            let children = expected
                .get(&node)
                .cloned()
                .ok_or_else(|| lines.error("node is not a decision point"))?;
            let model = match (f.get(1).map(String::as_str), f.get(2)) {
                (Some("constant"), Some(child)) => {
                    let c = children
                        .iter()
                        .copied()
                        .find(|&c| taxonomy.name(c) == child)
                        .ok_or_else(|| lines.error(format!("{child:?} is not a child")))?;
                    NodeModel::Constant(c)
                }
                (Some("ova"), None) => {
                    let ova = OvaModel::read_block(&mut lines)?;
                    let names: Vec<LeafLabel> = children.iter().map(|&c| class_name(&taxonomy, c)).collect();
                    let dim_ok = fingerprint == PER_NODE_VOCAB || ova.dim() == dim;
                    if ova.classes() != names.as_slice() || !dim_ok {
                        return Err(lines.error("node model does not match its children").into());
                    }
                    NodeModel::Classifier(ova)
                }
                _ => return Err(lines.error("bad node line").into()),
            };
            nodes.insert(node, DecisionEntry { children, model });
        }
        if nodes.len() != expected.len() {
            return Err(lines.error("missing decision nodes").into());
        }
        if !lines.at_end()? {
            return Err(lines.error("trailing data after model").into());
        }
        Ok(HierarchicalModel {
            taxonomy,
            prune,
            nodes,
            dim,
            vocab_fingerprint: fingerprint,
            classifier_calls: AtomicU64::new(0),
        })
    }
}
