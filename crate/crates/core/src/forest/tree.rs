//! Tree representation and growth.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::split::{best_split, TargetView};
use super::SplitRule;

/// One node of a flattened tree. Children are indices into the node array;
/// rows with `value < threshold` descend left.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf(LeafValue),
}

/// Leaf payload: training class counts, or the training mean target.
#[derive(Debug, Clone, PartialEq)]
pub enum LeafValue {
    Counts(Vec<u32>),
    Mean { value: f64, count: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Walk the tree for a row whose encoded feature values come from
    /// `value_at`.
    pub fn leaf_for(&self, value_at: &dyn Fn(usize) -> f64) -> &LeafValue {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf(leaf) => return leaf,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if value_at(*feature as usize) < *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }
}

pub(crate) struct GrowContext<'a> {
    pub columns: &'a [Vec<f64>],
    pub target: TargetView<'a>,
    pub rule: &'a SplitRule,
    pub mtry: usize,
    pub min_node_size: usize,
    pub max_depth: Option<usize>,
}

pub(crate) fn grow_tree(ctx: &GrowContext, bag: Vec<u32>, rng: &mut ChaCha8Rng) -> Tree {
    let mut nodes = Vec::new();
    grow_node(ctx, bag, 0, rng, &mut nodes);
    Tree { nodes }
}

fn grow_node(
    ctx: &GrowContext,
    rows: Vec<u32>,
    depth: usize,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<Node>,
) -> u32 {
    // A node is split-eligible while it is strictly larger than the node-size
    // floor; children may end up smaller and then stay terminal.
    let eligible =
        rows.len() > ctx.min_node_size && ctx.max_depth.map_or(true, |cap| depth < cap);
    if eligible {
        let candidates = draw_candidates(ctx.columns.len(), ctx.mtry, rng);
        if let Some(split) = best_split(ctx.columns, &rows, &ctx.target, &candidates, ctx.rule, rng)
        {
            let idx = nodes.len();
            nodes.push(Node::Split {
                feature: split.feature as u32,
                threshold: split.threshold,
                left: 0,
                right: 0,
            });
            let col = &ctx.columns[split.feature];
            let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows
                .iter()
                .partition(|&&r| col[r as usize] < split.threshold);
            let left = grow_node(ctx, left_rows, depth + 1, rng, nodes);
            let right = grow_node(ctx, right_rows, depth + 1, rng, nodes);
            if let Node::Split {
                left: l, right: r, ..
            } = &mut nodes[idx]
            {
                *l = left;
                *r = right;
            }
            return idx as u32;
        }
    }
    let idx = nodes.len();
    nodes.push(Node::Leaf(leaf_value(&ctx.target, &rows)));
    idx as u32
}

fn leaf_value(target: &TargetView, rows: &[u32]) -> LeafValue {
    match target {
        TargetView::Classes { codes, num_classes } => {
            let mut counts = vec![0u32; *num_classes];
            for &r in rows {
                counts[codes[r as usize] as usize] += 1;
            }
            LeafValue::Counts(counts)
        }
        TargetView::Reals(values) => {
            let sum: f64 = rows.iter().map(|&r| values[r as usize]).sum();
            LeafValue::Mean {
                value: sum / rows.len() as f64,
                count: rows.len() as u32,
            }
        }
    }
}

/// Draw `mtry` distinct feature indices (partial Fisher-Yates), returned
/// sorted ascending so the split scan visits features in index order.
fn draw_candidates(p: usize, mtry: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..p).collect();
    let take = mtry.min(p);
    for i in 0..take {
        let j = rng.gen_range(i..p);
        indices.swap(i, j);
    }
    indices.truncate(take);
    indices.sort_unstable();
    indices
}
