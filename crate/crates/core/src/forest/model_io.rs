//! Versioned, self-describing text model files.
//!
//! The layout is documented byte-exactly in `docs/model_format.md`: a magic
//! line, the task block, the hyperparameters, the feature schema with
//! category orders, then per tree the flattened node array and the in-bag
//! row indices, closed by an `end` line. Floats are printed in Rust's
//! shortest round-trip form, so save/load/save reproduces files bit for bit.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::data::ColumnType;
use crate::error::{Error, Result};

use super::tree::{LeafValue, Node, Tree};
use super::{FeatureSchema, Forest, HyperParams, SplitRule, TaskInfo};

pub const MODEL_MAGIC: &str = "FORESTTUNE-MODEL v1";

pub fn save_model(forest: &Forest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::FileWrite {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = BufWriter::new(file);
    write_model(forest, &mut writer)?;
    writer.flush().map_err(|e| Error::Forest(format!("write model: {e}")))
}

pub fn write_model<W: Write>(forest: &Forest, w: &mut W) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Forest(format!("write model: {e}"));
    writeln!(w, "{MODEL_MAGIC}").map_err(io_err)?;
    match &forest.task {
        TaskInfo::Classification { classes } => {
            writeln!(w, "task classification {}", classes.len()).map_err(io_err)?;
            for label in classes {
                writeln!(w, "label {label}").map_err(io_err)?;
            }
        }
        TaskInfo::Regression => writeln!(w, "task regression").map_err(io_err)?,
    }
    let p = &forest.params;
    let rule = match &p.split_rule {
        SplitRule::GiniImpurity => "gini".to_string(),
        SplitRule::WeightedVariance => "variance".to_string(),
        SplitRule::ExtraRandom { num_random_cuts } => format!("extra:{num_random_cuts}"),
    };
    let depth = match p.max_depth {
        Some(d) => d.to_string(),
        None => "none".to_string(),
    };
    writeln!(
        w,
        "params mtry={} sample_fraction={} replace={} min_node_size={} num_trees={} split_rule={} max_depth={}",
        p.mtry, p.sample_fraction, p.replace, p.min_node_size, p.num_trees, rule, depth
    )
    .map_err(io_err)?;
    writeln!(w, "seed {}", forest.master_seed).map_err(io_err)?;
    writeln!(w, "n {}", forest.n_train).map_err(io_err)?;
    writeln!(w, "features {}", forest.features.len()).map_err(io_err)?;
    for (schema, order) in forest.features.iter().zip(&forest.category_orders) {
        match &schema.ty {
            ColumnType::Numeric => {
                writeln!(w, "feature numeric {}", schema.name).map_err(io_err)?;
            }
            ColumnType::Categorical { levels } => {
                writeln!(w, "feature categorical {} {}", levels.len(), schema.name)
                    .map_err(io_err)?;
                for level in levels {
                    writeln!(w, "level {level}").map_err(io_err)?;
                }
                let ranks = order.as_ref().expect("categorical feature has an order");
                let joined: Vec<String> = ranks.iter().map(|r| r.to_string()).collect();
                writeln!(w, "order {}", joined.join(" ")).map_err(io_err)?;
            }
        }
    }
    writeln!(w, "trees {}", forest.trees.len()).map_err(io_err)?;
    for (t, (tree, bag)) in forest.trees.iter().zip(&forest.bags).enumerate() {
        writeln!(w, "tree {t} nodes {}", tree.nodes.len()).map_err(io_err)?;
        for node in &tree.nodes {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => writeln!(w, "node split {feature} {threshold} {left} {right}")
                    .map_err(io_err)?,
                Node::Leaf(LeafValue::Counts(counts)) => {
                    let joined: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
                    writeln!(w, "node leaf counts {}", joined.join(" ")).map_err(io_err)?;
                }
                Node::Leaf(LeafValue::Mean { value, count }) => {
                    writeln!(w, "node leaf mean {value} {count}").map_err(io_err)?;
                }
            }
        }
        let joined: Vec<String> = bag.iter().map(|i| i.to_string()).collect();
        writeln!(w, "bag {}", joined.join(" ")).map_err(io_err)?;
    }
    writeln!(w, "end").map_err(io_err)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Forest> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|source| Error::FileRead {
        path: path.to_path_buf(),
        source,
    })?;
    let mut text = String::new();
    file.read_to_string(&mut text)
        .map_err(|e| Error::ModelCorrupt(format!("not valid utf-8 text: {e}")))?;
    read_model(&text)
}

pub fn read_model(text: &str) -> Result<Forest> {
    let mut lines = Cursor {
        iter: text.lines(),
        line_no: 0,
    };

    let magic = lines.next()?;
    if magic != MODEL_MAGIC {
        return match magic.strip_prefix("FORESTTUNE-MODEL ") {
            Some(version) => Err(Error::ModelVersion(version.to_string())),
            None => Err(Error::ModelCorrupt("missing magic header".into())),
        };
    }

    // task
    let line = lines.next()?;
    let task = if let Some(rest) = line.strip_prefix("task classification ") {
        let k: usize = parse_num(rest, lines.line_no)?;
        let mut classes = Vec::with_capacity(k);
        for _ in 0..k {
            classes.push(lines.field("label ")?.to_string());
        }
        TaskInfo::Classification { classes }
    } else if line == "task regression" {
        TaskInfo::Regression
    } else {
        return Err(corrupt(lines.line_no, "expected task line"));
    };

    let params = parse_params(lines.field("params ")?, lines.line_no)?;
    let master_seed: u64 = parse_num(lines.field("seed ")?, lines.line_no)?;
    let n_train: usize = parse_num(lines.field("n ")?, lines.line_no)?;
    let num_features: usize = parse_num(lines.field("features ")?, lines.line_no)?;

    let mut features = Vec::with_capacity(num_features);
    let mut category_orders = Vec::with_capacity(num_features);
    for _ in 0..num_features {
        let line = lines.next()?;
        if let Some(name) = line.strip_prefix("feature numeric ") {
            features.push(FeatureSchema {
                name: name.to_string(),
                ty: ColumnType::Numeric,
            });
            category_orders.push(None);
        } else if let Some(rest) = line.strip_prefix("feature categorical ") {
            let (count_text, name) = rest
                .split_once(' ')
                .ok_or_else(|| corrupt(lines.line_no, "expected level count and name"))?;
            let num_levels: usize = parse_num(count_text, lines.line_no)?;
            let mut levels = Vec::with_capacity(num_levels);
            for _ in 0..num_levels {
                levels.push(lines.field("level ")?.to_string());
            }
            let order_line = lines.field("order ")?;
            let ranks: Vec<u32> = order_line
                .split_whitespace()
                .map(|t| parse_num(t, lines.line_no))
                .collect::<Result<_>>()?;
            if ranks.len() != num_levels {
                return Err(corrupt(lines.line_no, "order length differs from levels"));
            }
            features.push(FeatureSchema {
                name: name.to_string(),
                ty: ColumnType::Categorical { levels },
            });
            category_orders.push(Some(ranks));
        } else {
            return Err(corrupt(lines.line_no, "expected feature line"));
        }
    }

    let num_trees: usize = parse_num(lines.field("trees ")?, lines.line_no)?;
    let mut trees = Vec::with_capacity(num_trees);
    let mut bags = Vec::with_capacity(num_trees);
    for t in 0..num_trees {
        let header = lines.field("tree ")?;
        let mut parts = header.split_whitespace();
        let index: usize = parse_num(
            parts.next().ok_or_else(|| corrupt(lines.line_no, "tree header"))?,
            lines.line_no,
        )?;
        if index != t || parts.next() != Some("nodes") {
            return Err(corrupt(lines.line_no, "malformed tree header"));
        }
        let num_nodes: usize = parse_num(
            parts.next().ok_or_else(|| corrupt(lines.line_no, "tree header"))?,
            lines.line_no,
        )?;
        let mut nodes = Vec::with_capacity(num_nodes);
        for _ in 0..num_nodes {
            let line = lines.field("node ")?;
            let node = if let Some(rest) = line.strip_prefix("split ") {
                let fields: Vec<&str> = rest.split_whitespace().collect();
                if fields.len() != 4 {
                    return Err(corrupt(lines.line_no, "split node needs 4 fields"));
                }
                Node::Split {
                    feature: parse_num(fields[0], lines.line_no)?,
                    threshold: parse_float(fields[1], lines.line_no)?,
                    left: parse_num(fields[2], lines.line_no)?,
                    right: parse_num(fields[3], lines.line_no)?,
                }
            } else if let Some(rest) = line.strip_prefix("leaf counts ") {
                let counts: Vec<u32> = rest
                    .split_whitespace()
                    .map(|f| parse_num(f, lines.line_no))
                    .collect::<Result<_>>()?;
                Node::Leaf(LeafValue::Counts(counts))
            } else if let Some(rest) = line.strip_prefix("leaf mean ") {
                let fields: Vec<&str> = rest.split_whitespace().collect();
                if fields.len() != 2 {
                    return Err(corrupt(lines.line_no, "mean leaf needs 2 fields"));
                }
                Node::Leaf(LeafValue::Mean {
                    value: parse_float(fields[0], lines.line_no)?,
                    count: parse_num(fields[1], lines.line_no)?,
                })
            } else {
                return Err(corrupt(lines.line_no, "unknown node kind"));
            };
            if let Node::Split { left, right, .. } = &node {
                if *left as usize >= num_nodes || *right as usize >= num_nodes {
                    return Err(corrupt(lines.line_no, "child index out of range"));
                }
            }
            nodes.push(node);
        }
        trees.push(Tree { nodes });
        let bag: Vec<u32> = lines
            .field("bag ")?
            .split_whitespace()
            .map(|f| parse_num(f, lines.line_no))
            .collect::<Result<_>>()?;
        if bag.iter().any(|&i| i as usize >= n_train) {
            return Err(corrupt(lines.line_no, "bag index out of range"));
        }
        bags.push(bag);
    }

    if lines.next()? != "end" {
        return Err(corrupt(lines.line_no, "expected end marker"));
    }
    if lines.iter.any(|l| !l.trim().is_empty()) {
        return Err(Error::ModelCorrupt("trailing data after end marker".into()));
    }

    Ok(Forest {
        params,
        master_seed,
        n_train,
        task,
        features,
        category_orders,
        trees,
        bags,
    })
}

struct Cursor<'a> {
    iter: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.line_no += 1;
        self.iter
            .next()
            .ok_or_else(|| Error::ModelCorrupt(format!("unexpected end of file at line {}", self.line_no)))
    }

    /// Next line stripped of a required prefix.
    fn field(&mut self, prefix: &str) -> Result<&'a str> {
        let line = self.next()?;
        line.strip_prefix(prefix)
            .ok_or_else(|| corrupt(self.line_no, &format!("expected {prefix:?} line")))
    }
}

fn corrupt(line_no: usize, message: &str) -> Error {
    Error::ModelCorrupt(format!("line {line_no}: {message}"))
}

fn parse_num<T: std::str::FromStr>(text: &str, line_no: usize) -> Result<T> {
    text.parse()
        .map_err(|_| corrupt(line_no, &format!("invalid number {text:?}")))
}

fn parse_float(text: &str, line_no: usize) -> Result<f64> {
    text.parse()
        .map_err(|_| corrupt(line_no, &format!("invalid float {text:?}")))
}

fn parse_params(text: &str, line_no: usize) -> Result<HyperParams> {
    let mut mtry = None;
    let mut sample_fraction = None;
    let mut replace = None;
    let mut min_node_size = None;
    let mut num_trees = None;
    let mut split_rule = None;
    let mut max_depth = None;
    for pair in text.split_whitespace() {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| corrupt(line_no, "params entries are key=value"))?;
        match key {
            "mtry" => mtry = Some(parse_num(value, line_no)?),
            "sample_fraction" => sample_fraction = Some(parse_float(value, line_no)?),
            "replace" => {
                replace = Some(match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(corrupt(line_no, "replace must be true or false")),
                })
            }
            "min_node_size" => min_node_size = Some(parse_num(value, line_no)?),
            "num_trees" => num_trees = Some(parse_num(value, line_no)?),
            "split_rule" => {
                split_rule = Some(match value {
                    "gini" => SplitRule::GiniImpurity,
                    "variance" => SplitRule::WeightedVariance,
                    other => match other.strip_prefix("extra:") {
                        Some(k) => SplitRule::ExtraRandom {
                            num_random_cuts: parse_num(k, line_no)?,
                        },
                        None => return Err(corrupt(line_no, "unknown split rule")),
                    },
                })
            }
            "max_depth" => {
                max_depth = Some(match value {
                    "none" => None,
                    d => Some(parse_num(d, line_no)?),
                })
            }
            _ => return Err(corrupt(line_no, &format!("unknown params key {key:?}"))),
        }
    }
    Ok(HyperParams {
        mtry: mtry.ok_or_else(|| corrupt(line_no, "params missing mtry"))?,
        sample_fraction: sample_fraction
            .ok_or_else(|| corrupt(line_no, "params missing sample_fraction"))?,
        replace: replace.ok_or_else(|| corrupt(line_no, "params missing replace"))?,
        min_node_size: min_node_size
            .ok_or_else(|| corrupt(line_no, "params missing min_node_size"))?,
        num_trees: num_trees.ok_or_else(|| corrupt(line_no, "params missing num_trees"))?,
        split_rule: split_rule.ok_or_else(|| corrupt(line_no, "params missing split_rule"))?,
        max_depth: max_depth.ok_or_else(|| corrupt(line_no, "params missing max_depth"))?,
    })
}
