//! Tree → network mapping.
//!
//! A tree with branch depth `D_b` becomes a network with `D_b` hidden layers.
//! Hidden layer `l` copies every neuron of layer `l - 1` and appends one new
//! neuron per branch on tree level `l`, so neuron `i < n_in` of every hidden
//! layer is the carrier of input `i`.
//!
//! Weights start at zero and are filled in three passes:
//!
//! 1. passthrough: `W^l[i][i] = 1` while `l < L_max(i)`, so an input stays
//!    available until the deepest level the tree tests it on;
//! 2. decision paths, walked depth-first with the left child first. A branch
//!    on level `l` claims the next new neuron of layer `l` and receives
//!    sampled weights from its parent's neuron and from its split feature's
//!    carrier. A leaf chains its parent's neuron forward along the diagonal
//!    to the last hidden layer and connects it to its class output
//!    (classification) or every output (regression). Entries that are
//!    already set keep their first value;
//! 3. every bias is sampled.
//!
//! Sampled values come from `N(0, 3 / (n_prev + n_cur))` for the layer they
//! sit in. Leaf values and thresholds are not encoded; training learns them.

use ndarray::{Array1, Array2, Axis};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Layer, Network};
use crate::rng::{rng, Stream};
use crate::tree::{analyze_topology, DecisionTree, LeafValue, Node, TreeTopology};
use crate::Task;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub n_in: usize,
    pub hidden: Vec<usize>,
    pub n_out: usize,
}

impl Architecture {
    /// Full width chain `[n_in, hidden.., n_out]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.n_in);
        w.extend_from_slice(&self.hidden);
        w.push(self.n_out);
        w
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_in == 0 || self.n_out == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "architecture {:?} has an empty layer",
                self.widths()
            )));
        }
        Ok(())
    }
}

/// Hidden widths `n(l) = n(l - 1) + N_b(l)` for `l = 1..=D_b`, with
/// `n(0) = n_in`. A stump (`D_b = 0`) gets one passthrough layer of width
/// `n_in`.
pub fn architecture_from_topology(topology: &TreeTopology, n_in: usize, n_out: usize) -> Result<Architecture> {
    if topology.tree_depth == 0 || topology.branches_per_level.len() != topology.tree_depth + 1 {
        return Err(Error::InconsistentTopology(format!(
            "{} branch counts for tree depth {}",
            topology.branches_per_level.len(),
            topology.tree_depth
        )));
    }
    if n_out == 0 {
        return Err(Error::InvalidParameter("network needs at least one output".into()));
    }
    let split_on = topology
        .feature_max_level
        .iter()
        .rposition(Option::is_some)
        .map_or(0, |i| i + 1);
    if n_in < split_on || n_in == 0 {
        return Err(Error::InvalidParameter(format!(
            "{n_in} inputs cannot carry a tree that splits on feature {}",
            split_on.saturating_sub(1)
        )));
    }
    let depth = topology.branch_depth();
    if depth == 0 {
        return Ok(Architecture {
            n_in,
            hidden: vec![n_in],
            n_out,
        });
    }
    let mut hidden = Vec::with_capacity(depth);
    let mut width = n_in;
    for l in 1..=depth {
        width += topology.branches_per_level[l];
        hidden.push(width);
    }
    Ok(Architecture { n_in, hidden, n_out })
}

/// Standard deviation `sqrt(3 / (n_prev + n_cur))`.
pub fn xavier_sigma(n_prev: usize, n_cur: usize) -> Result<f64> {
    if n_prev == 0 || n_cur == 0 {
        return Err(Error::InvalidParameter(format!(
            "layer widths must be positive, got ({n_prev}, {n_cur})"
        )));
    }
    Ok((3.0 / (n_prev + n_cur) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuronRole {
    /// Receives a unity weight carrying an input forward.
    Passthrough,
    /// Receives sampled weights from a decision path.
    Decision,
    /// No incoming weights; trainable only through a non-negative bias.
    Free,
}

/// A network straight out of an initializer, before any training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitializedNetwork {
    pub architecture: Architecture,
    pub network: Network,
    /// Per hidden layer, per neuron.
    pub roles: Vec<Vec<NeuronRole>>,
    pub pruned: usize,
}

impl InitializedNetwork {
    pub fn new(network: Network) -> Self {
        let widths = network.widths();
        let architecture = Architecture {
            n_in: widths[0],
            hidden: widths[1..widths.len() - 1].to_vec(),
            n_out: widths[widths.len() - 1],
        };
        let roles = classify_roles(&network);
        InitializedNetwork {
            architecture,
            network,
            roles,
            pruned: 0,
        }
    }
}

fn classify_roles(net: &Network) -> Vec<Vec<NeuronRole>> {
    let layers = net.layers();
    layers[..layers.len() - 1]
        .iter()
        .map(|layer| {
            layer
                .weights
                .outer_iter()
                .map(|row| {
                    if row.iter().any(|&w| w == 1.0) {
                        NeuronRole::Passthrough
                    } else if row.iter().any(|&w| w != 0.0) {
                        NeuronRole::Decision
                    } else {
                        NeuronRole::Free
                    }
                })
                .collect()
        })
        .collect()
}

struct Writer {
    weights: Vec<Array2<f64>>,
    set: Vec<Array2<bool>>,
    normals: Vec<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl Writer {
    /// `layer` is the 1-based weight-matrix index; first writer wins.
    fn sample(&mut self, layer: usize, to: usize, from: usize) {
        let m = layer - 1;
        if !self.set[m][[to, from]] {
            self.weights[m][[to, from]] = self.normals[m].sample(&mut self.rng);
            self.set[m][[to, from]] = true;
        }
    }

    fn unity(&mut self, layer: usize, i: usize) {
        let m = layer - 1;
        self.weights[m][[i, i]] = 1.0;
        self.set[m][[i, i]] = true;
    }
}

/// Builds the tree-informed network for one tree. Hidden neurons are not
/// pruned here; see [`prune_dead_neurons`].
pub fn map_tree(
    tree: &DecisionTree,
    topology: &TreeTopology,
    n_in: usize,
    n_out: usize,
    seed: u64,
) -> Result<InitializedNetwork> {
    let actual = analyze_topology(tree)?;
    if &actual != topology {
        return Err(Error::InconsistentTopology(format!(
            "expected {topology:?}, tree has {actual:?}"
        )));
    }
    if tree.n_features != n_in {
        return Err(Error::DimensionMismatch {
            what: "tree features vs network inputs",
            expected: n_in,
            found: tree.n_features,
        });
    }
    let arch = architecture_from_topology(topology, n_in, n_out)?;
    let widths = arch.widths();
    let n_hidden = arch.hidden.len();
    let normals = widths
        .windows(2)
        .map(|w| Ok(Normal::new(0.0, xavier_sigma(w[0], w[1])?).expect("finite sigma")))
        .collect::<Result<Vec<_>>>()?;
    let mut writer = Writer {
        weights: widths.windows(2).map(|w| Array2::zeros((w[1], w[0]))).collect(),
        set: widths
            .windows(2)
            .map(|w| Array2::from_elem((w[1], w[0]), false))
            .collect(),
        normals,
        rng: rng(seed, Stream::Mapping),
    };

    if topology.branch_depth() == 0 {
        for i in 0..n_in {
            writer.unity(1, i);
        }
    } else {
        for (i, max_level) in topology.feature_max_level.iter().enumerate() {
            if let Some(max_level) = *max_level {
                for l in 1..max_level {
                    writer.unity(l, i);
                }
            }
        }
    }

    let Node::Branch {
        feature, left, right, ..
    } = &tree.root
    else {
        return Err(Error::NoBranches);
    };
    // next_new[l] is the next unclaimed new-neuron slot in hidden layer l.
    let mut next_new = vec![0; n_hidden + 1];
    next_new[1..].copy_from_slice(&widths[..n_hidden]);
    let mut paths = PathMapper {
        writer: &mut writer,
        next_new: &mut next_new,
        hidden_widths: &widths,
        n_hidden,
        n_out,
        task: tree.task,
    };
    paths.visit(left, *feature)?;
    paths.visit(right, *feature)?;

    let mut layers = Vec::with_capacity(n_hidden + 1);
    for (m, weights) in writer.weights.into_iter().enumerate() {
        let bias = Array1::from_shape_fn(weights.nrows(), |_| writer.normals[m].sample(&mut writer.rng));
        layers.push(Layer { weights, bias });
    }
    let network = Network::new(layers)?;
    let roles = classify_roles(&network);
    Ok(InitializedNetwork {
        architecture: arch,
        network,
        roles,
        pruned: 0,
    })
}

struct PathMapper<'a> {
    writer: &'a mut Writer,
    next_new: &'a mut [usize],
    hidden_widths: &'a [usize],
    n_hidden: usize,
    n_out: usize,
    task: Task,
}

impl PathMapper<'_> {
    /// `parent` indexes the neuron, in layer `level - 1`, created by the
    /// node's parent branch.
    fn visit(&mut self, node: &Node, parent: usize) -> Result<()> {
        match node {
            Node::Branch {
                level,
                feature,
                left,
                right,
                ..
            } => {
                let l = *level;
                if l > self.n_hidden {
                    return Err(Error::InconsistentTopology(format!(
                        "branch on level {l} past the last hidden layer"
                    )));
                }
                let new = self.next_new[l];
                if new >= self.hidden_widths[l] {
                    return Err(Error::InconsistentTopology(format!(
                        "more branches than new neurons on level {l}"
                    )));
                }
                self.next_new[l] += 1;
                self.writer.sample(l, new, parent);
                self.writer.sample(l, new, *feature);
                self.visit(left, new)?;
                self.visit(right, new)
            }
            Node::Leaf { level, value } => {
                // A stump's leaves sit on level 1 of a one-hidden-layer net,
                // so the chain below covers that case too.
                for m in *level..=self.n_hidden {
                    self.writer.sample(m, parent, parent);
                }
                let out_layer = self.n_hidden + 1;
                match (self.task, value) {
                    (Task::Classification, LeafValue::Class(c)) => {
                        if *c >= self.n_out {
                            return Err(Error::InvalidParameter(format!(
                                "leaf class {c} outside {} outputs",
                                self.n_out
                            )));
                        }
                        self.writer.sample(out_layer, *c, parent);
                    }
                    _ => {
                        for o in 0..self.n_out {
                            self.writer.sample(out_layer, o, parent);
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

/// Removes hidden neurons with no incoming weights and a negative bias,
/// layer by layer from the input side.
pub fn prune_dead_neurons(net: InitializedNetwork) -> Result<InitializedNetwork> {
    let InitializedNetwork {
        network,
        mut roles,
        pruned,
        ..
    } = net;
    let mut layers = network.into_layers();
    let n_hidden = layers.len() - 1;
    let mut removed = 0;
    for h in 0..n_hidden {
        let keep: Vec<usize> = (0..layers[h].weights.nrows())
            .filter(|&j| layers[h].bias[j] >= 0.0 || layers[h].weights.row(j).iter().any(|&w| w != 0.0))
            .collect();
        if keep.is_empty() {
            return Err(Error::EmptyLayer { layer: h + 1 });
        }
        if keep.len() == layers[h].weights.nrows() {
            continue;
        }
        removed += layers[h].weights.nrows() - keep.len();
        let weights = layers[h].weights.select(Axis(0), &keep);
        let bias = layers[h].bias.select(Axis(0), &keep);
        layers[h] = Layer { weights, bias };
        let next = layers[h + 1].weights.select(Axis(1), &keep);
        layers[h + 1].weights = next;
        roles[h] = keep.iter().map(|&j| roles[h][j]).collect();
    }
    let mut out = InitializedNetwork::new(Network::new(layers)?);
    out.roles = roles;
    out.pruned = pruned + removed;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitStats {
    /// Nonzero weights per weight matrix, input side first.
    pub nonzero: Vec<usize>,
    /// Entries exactly equal to 1 per weight matrix.
    pub unity: Vec<usize>,
    pub pruned: usize,
}

pub fn init_stats(net: &InitializedNetwork) -> InitStats {
    let layers = net.network.layers();
    InitStats {
        nonzero: layers
            .iter()
            .map(|l| l.weights.iter().filter(|&&w| w != 0.0).count())
            .collect(),
        unity: layers
            .iter()
            .map(|l| l.weights.iter().filter(|&&w| w == 1.0).count())
            .collect(),
        pruned: net.pruned,
    }
}

/// Topology → architecture → weights → pruning, for one tree.
pub fn map_and_prune(tree: &DecisionTree, n_out: usize, seed: u64) -> Result<InitializedNetwork> {
    let topology = analyze_topology(tree)?;
    prune_dead_neurons(map_tree(tree, &topology, tree.n_features, n_out, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{fit_tree, TreeConfig};
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    pub(crate) fn figure_tree() -> DecisionTree {
        let root = Node::branch(
            0,
            0.5,
            Node::class_leaf(0),
            Node::branch(
                1,
                0.5,
                Node::branch(0, 0.25, Node::class_leaf(0), Node::class_leaf(1)),
                Node::branch(2, 0.5, Node::class_leaf(0), Node::class_leaf(1)),
            ),
        );
        DecisionTree::from_root(root, 3, Task::Classification).unwrap()
    }

    fn nonzero_cells(m: &Array2<f64>) -> Vec<(usize, usize)> {
        m.indexed_iter().filter(|(_, &v)| v != 0.0).map(|(ij, _)| ij).collect()
    }

    #[test]
    fn architecture_arithmetic() {
        let top = analyze_topology(&figure_tree()).unwrap();
        assert_eq!(architecture_from_topology(&top, 3, 2).unwrap().hidden, vec![4, 6]);
        let shallow = TreeTopology {
            tree_depth: 2,
            branches_per_level: vec![1, 0, 0],
            feature_max_level: vec![Some(0), None, None, None],
        };
        assert_eq!(architecture_from_topology(&shallow, 4, 1).unwrap().hidden, vec![4]);
        let xor = TreeTopology {
            tree_depth: 2,
            branches_per_level: vec![1, 2, 0],
            feature_max_level: vec![Some(0), Some(1)],
        };
        assert_eq!(architecture_from_topology(&xor, 2, 2).unwrap().hidden, vec![4]);
        assert!(architecture_from_topology(&xor, 1, 2).is_err());
        assert!(architecture_from_topology(&xor, 2, 0).is_err());
    }

    #[test]
    fn sigma_values() {
        assert!((xavier_sigma(3, 3).unwrap().powi(2) - 0.5).abs() < 1e-15);
        assert_eq!(xavier_sigma(1, 2).unwrap(), 1.0);
        assert!((xavier_sigma(4, 6).unwrap() - 0.547_722_557_505_166).abs() < 1e-12);
        assert!(xavier_sigma(0, 2).is_err());
    }

    #[test]
    fn figure_tree_sparsity_pattern() {
        let tree = figure_tree();
        let top = analyze_topology(&tree).unwrap();
        let net = map_tree(&tree, &top, 3, 2, 11).unwrap();
        let w = net.network.layers();
        assert_eq!(net.architecture.hidden, vec![4, 6]);
        assert_eq!(w[0].weights[[0, 0]], 1.0);
        assert_eq!(w[0].weights[[2, 2]], 1.0);
        assert_eq!(nonzero_cells(&w[0].weights), vec![(0, 0), (2, 2), (3, 0), (3, 1)]);
        assert_eq!(
            nonzero_cells(&w[1].weights),
            vec![(0, 0), (4, 0), (4, 3), (5, 2), (5, 3)]
        );
        assert_eq!(
            nonzero_cells(&w[2].weights),
            vec![(0, 0), (0, 4), (0, 5), (1, 4), (1, 5)]
        );
        let stats = init_stats(&net);
        assert_eq!(stats.nonzero, vec![4, 5, 5]);
        assert_eq!(stats.unity, vec![2, 0, 0]);
        use NeuronRole::*;
        assert_eq!(net.roles[0], vec![Passthrough, Free, Passthrough, Decision]);
        assert_eq!(net.roles[1], vec![Decision, Free, Free, Free, Decision, Decision]);
    }

    #[test]
    fn if_gate_stump_connects_input_to_both_outputs() {
        let x = array![[0.0], [1.0]];
        let y = array![[0.0], [1.0]];
        let tree = fit_tree(x.view(), y.view(), Task::Classification, &TreeConfig::new(1), 0).unwrap();
        let top = analyze_topology(&tree).unwrap();
        let net = map_tree(&tree, &top, 1, 2, 0).unwrap();
        let w = net.network.layers();
        assert_eq!(w[0].weights, array![[1.0]]);
        assert_eq!(nonzero_cells(&w[1].weights), vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn mapping_is_deterministic() {
        let tree = figure_tree();
        let top = analyze_topology(&tree).unwrap();
        let a = map_tree(&tree, &top, 3, 2, 5).unwrap();
        let b = map_tree(&tree, &top, 3, 2, 5).unwrap();
        assert_eq!(a, b);
        let c = map_tree(&tree, &top, 3, 2, 6).unwrap();
        assert_ne!(a.network, c.network);
    }

    #[test]
    fn inconsistent_topology_is_rejected() {
        let tree = figure_tree();
        let mut top = analyze_topology(&tree).unwrap();
        top.branches_per_level[1] = 3;
        assert!(matches!(
            map_tree(&tree, &top, 3, 2, 0),
            Err(Error::InconsistentTopology(_))
        ));
    }

    fn one_hidden(weights: Array2<f64>, bias: Vec<f64>) -> InitializedNetwork {
        let out = Array2::from_elem((1, weights.nrows()), 0.5);
        let net = Network::new(vec![
            Layer {
                weights,
                bias: Array1::from(bias),
            },
            Layer {
                weights: out,
                bias: Array1::zeros(1),
            },
        ])
        .unwrap();
        InitializedNetwork::new(net)
    }

    #[test]
    fn pruning_rules() {
        // neuron 0 connected with negative bias, 1 unconnected negative,
        // 2 unconnected positive.
        let net = one_hidden(array![[0.7, 0.0], [0.0, 0.0], [0.0, 0.0]], vec![-0.5, -0.3, 0.2]);
        let pruned = prune_dead_neurons(net).unwrap();
        assert_eq!(pruned.architecture.hidden, vec![2]);
        assert_eq!(pruned.pruned, 1);
        assert_eq!(pruned.network.layers()[0].bias.to_vec(), vec![-0.5, 0.2]);
        assert_eq!(pruned.network.layers()[1].weights.dim(), (1, 2));
        assert_eq!(pruned.roles[0], vec![NeuronRole::Decision, NeuronRole::Free]);

        let dead = one_hidden(Array2::zeros((2, 2)), vec![-0.1, -0.2]);
        assert!(matches!(prune_dead_neurons(dead), Err(Error::EmptyLayer { layer: 1 })));
    }

    #[test]
    fn stats_of_zero_layer() {
        let net = one_hidden(Array2::zeros((2, 2)), vec![0.1, 0.2]);
        let s = init_stats(&net);
        assert_eq!(s.nonzero, vec![0, 2]);
        assert_eq!(s.unity, vec![0, 0]);
    }

    #[test]
    fn sampled_weights_follow_layer_sigma() {
        // A regression stump on 1 input: all sampled output weights share
        // sigma = xavier_sigma(1, n_out). Use a wide output layer to get many
        // draws per tree.
        let tree = DecisionTree::from_root(
            Node::branch(
                0,
                0.5,
                Node::value_leaf(vec![0.0; 400]),
                Node::value_leaf(vec![1.0; 400]),
            ),
            1,
            Task::Regression,
        )
        .unwrap();
        let top = analyze_topology(&tree).unwrap();
        let sigma = xavier_sigma(1, 400).unwrap();
        let mut draws = Vec::new();
        for seed in 0..250 {
            let net = map_tree(&tree, &top, 1, 400, seed).unwrap();
            draws.extend(net.network.layers()[1].weights.iter().copied());
        }
        assert_eq!(draws.len(), 100_000);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!(
            (var / sigma.powi(2) - 1.0).abs() < 0.05,
            "variance {var} vs {}",
            sigma.powi(2)
        );
    }

    fn random_tree() -> impl Strategy<Value = DecisionTree> {
        (6usize..40, 1usize..5, 1usize..6, any::<u64>(), any::<bool>()).prop_map(|(n, d, depth, seed, cls)| {
            let mut s = seed;
            let mut next = move || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 33) as f64 / (1u64 << 31) as f64
            };
            let x = Array2::from_shape_fn((n, d), |_| (next() * 8.0).floor());
            let task = if cls { Task::Classification } else { Task::Regression };
            let y = Array2::from_shape_fn((n, 1), |_| (next() * 3.0).floor());
            fit_tree(x.view(), y.view(), task, &TreeConfig::new(depth), 0).unwrap()
        })
    }

    /// Replays each decision path and returns, per branch, its (level,
    /// parent neuron, feature) triple in claim order.
    fn replay(tree: &DecisionTree, widths: &[usize]) -> Vec<(usize, usize, usize, usize)> {
        fn go(n: &Node, parent: usize, next: &mut Vec<usize>, out: &mut Vec<(usize, usize, usize, usize)>) {
            if let Node::Branch {
                level,
                feature,
                left,
                right,
                ..
            } = n
            {
                let new = next[*level];
                next[*level] += 1;
                out.push((*level, parent, *feature, new));
                go(left, new, next, out);
                go(right, new, next, out);
            }
        }
        let mut out = Vec::new();
        let mut next: Vec<usize> = (0..widths.len())
            .map(|l| if l == 0 { 0 } else { widths[l - 1] })
            .collect();
        if let Node::Branch {
            feature, left, right, ..
        } = &tree.root
        {
            go(left, *feature, &mut next, &mut out);
            go(right, *feature, &mut next, &mut out);
        }
        out
    }

    proptest! {
        #[test]
        fn widths_equal_inputs_plus_cumulative_branches(tree in random_tree()) {
            if let Ok(top) = analyze_topology(&tree) {
                let arch = architecture_from_topology(&top, tree.n_features, 2).unwrap();
                let mut counts = vec![0usize; top.tree_depth + 1];
                tree.root.walk(&mut |n| if !n.is_leaf() { counts[n.level()] += 1 });
                for (l, w) in arch.hidden.iter().enumerate() {
                    if top.branch_depth() == 0 {
                        prop_assert_eq!(*w, tree.n_features);
                    } else {
                        prop_assert_eq!(*w, tree.n_features + counts[1..=l + 1].iter().sum::<usize>());
                    }
                }
            }
        }

        #[test]
        fn every_branch_owns_a_decision_neuron(tree in random_tree(), seed in any::<u64>()) {
            let Ok(top) = analyze_topology(&tree) else { return Ok(()) };
            let n_out = if tree.task == Task::Classification { 3 } else { 1 };
            let net = map_tree(&tree, &top, tree.n_features, n_out, seed).unwrap();
            let widths = net.architecture.widths();
            let layers = net.network.layers();
            for (level, parent, feature, new) in replay(&tree, &widths) {
                let row = layers[level - 1].weights.row(new);
                prop_assert!(row[parent] != 0.0 && row[parent] != 1.0);
                prop_assert!(row[feature] != 0.0 && row[feature] != 1.0);
                let others = row.iter().enumerate().filter(|(j, &w)| *j != parent && *j != feature && w != 0.0).count();
                prop_assert_eq!(others, 0);
            }
            // Structural checks after pruning: decision neurons survive.
            let before: usize = net.roles.iter().flatten().filter(|r| **r != NeuronRole::Free).count();
            let pruned = prune_dead_neurons(net).unwrap();
            let after: usize = pruned.roles.iter().flatten().filter(|r| **r != NeuronRole::Free).count();
            prop_assert_eq!(before, after);
            for layer in &pruned.roles {
                prop_assert!(!layer.is_empty());
            }
            let stats = init_stats(&pruned);
            for (nz, u) in stats.nonzero.iter().zip(&stats.unity) {
                prop_assert!(nz >= u);
            }
        }

        #[test]
        fn passthrough_carries_inputs(tree in random_tree(), inputs in proptest::collection::vec(0.0f64..1.0, 4)) {
            let Ok(top) = analyze_topology(&tree) else { return Ok(()) };
            let n_out = if tree.task == Task::Classification { 3 } else { 1 };
            let net = map_tree(&tree, &top, tree.n_features, n_out, 1).unwrap();
            let mut h: Vec<f64> = inputs[..tree.n_features].to_vec();
            for (m, layer) in net.network.layers().iter().enumerate().take(net.architecture.hidden.len()) {
                let z = layer.weights.dot(&Array1::from(h.clone()));
                let next: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
                let l = m + 1;
                for (i, max_level) in top.feature_max_level.iter().enumerate() {
                    if matches!(max_level, Some(ml) if l < *ml) {
                        prop_assert_eq!(next[i], inputs[i]);
                    }
                }
                h = next;
            }
        }
    }
}
