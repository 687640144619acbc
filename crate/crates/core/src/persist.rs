//! Forest documents: versioned JSON, trees as preorder node arrays, every
//! real written with 17 significant digits so a reload reproduces each
//! value bit for bit.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde_json::{json, Map, Number, Value};

use crate::error::{Error, Result};
use crate::feature::{Axis, Feature, FeatureFamily, SplitTest};
use crate::forest::{Forest, Mode};
use crate::leaf::{JointLeaf, LeafModel};
use crate::scalar::Scalar;
use crate::train::TrainParams;
use crate::tree::{Node, Tree};

pub const FORMAT_NAME: &str = "discforest";
pub const FORMAT_VERSION: u32 = 1;

fn real<T: Scalar>(x: T) -> Value {
    let x = x.as_f64();
    assert!(x.is_finite(), "non-finite value in forest");
    Value::Number(Number::from_str(&format!("{x:.16e}")).expect("formatted float parses"))
}

fn reals<T: Scalar>(xs: &[T]) -> Value {
    Value::Array(xs.iter().map(|&x| real(x)).collect())
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Corrupt(msg.into())
}

fn get<'a>(obj: &'a Value, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| corrupt(format!("missing field `{key}`")))
}

fn parse_real<T: Scalar>(v: &Value) -> Result<T> {
    let n = v.as_number().ok_or_else(|| corrupt("expected a number"))?;
    let x: f64 = n.as_str().parse().map_err(|_| corrupt(format!("bad number {n}")))?;
    T::from_f64(x).ok_or_else(|| corrupt("number out of range"))
}

fn parse_reals<T: Scalar>(v: &Value) -> Result<Vec<T>> {
    v.as_array()
        .ok_or_else(|| corrupt("expected an array"))?
        .iter()
        .map(parse_real)
        .collect()
}

fn parse_usize(v: &Value) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| corrupt("expected a non-negative integer"))
}

fn parse_bool(v: &Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| corrupt("expected a boolean"))
}

fn parse_vec3<T: Scalar>(v: &Value) -> Result<[T; 3]> {
    let xs = parse_reals::<T>(v)?;
    xs.try_into().map_err(|_| corrupt("expected three components"))
}

fn family_value<T: Scalar>(f: &FeatureFamily<T>) -> Value {
    match f {
        FeatureFamily::Axis2D => json!({"kind": "axis2d"}),
        FeatureFamily::DepthOffset { max_offset } => json!({"kind": "depth-offset", "maxOffset": real(*max_offset)}),
    }
}

fn parse_family<T: Scalar>(v: &Value) -> Result<FeatureFamily<T>> {
    match get(v, "kind")?.as_str() {
        Some("axis2d") => Ok(FeatureFamily::Axis2D),
        Some("depth-offset") => Ok(FeatureFamily::DepthOffset {
            max_offset: parse_real(get(v, "maxOffset")?)?,
        }),
        _ => Err(corrupt("unknown feature family")),
    }
}

fn params_value<T: Scalar>(p: &TrainParams<T>) -> Value {
    json!({
        "numTrees": p.num_trees,
        "candidates": p.candidates,
        "leafCapacity": p.leaf_capacity,
        "maxLevels": p.max_levels,
        "thresholdsPerFeature": p.thresholds_per_feature,
        "radii": reals(&p.radii),
        "eigenBound": real(p.eigen_bound),
        "leafWeight": real(p.leaf_weight),
        "family": family_value(&p.family),
        "bootstrap": p.bootstrap,
        "seed": p.seed,
    })
}

fn parse_params<T: Scalar>(v: &Value) -> Result<TrainParams<T>> {
    Ok(TrainParams {
        num_trees: parse_usize(get(v, "numTrees")?)?,
        candidates: parse_usize(get(v, "candidates")?)?,
        leaf_capacity: parse_usize(get(v, "leafCapacity")?)?,
        max_levels: parse_usize(get(v, "maxLevels")?)?,
        thresholds_per_feature: parse_usize(get(v, "thresholdsPerFeature")?)?,
        radii: parse_reals(get(v, "radii")?)?,
        eigen_bound: parse_real(get(v, "eigenBound")?)?,
        leaf_weight: parse_real(get(v, "leafWeight")?)?,
        family: parse_family(get(v, "family")?)?,
        bootstrap: parse_bool(get(v, "bootstrap")?)?,
        seed: get(v, "seed")?.as_u64().ok_or_else(|| corrupt("bad seed"))?,
    })
}

fn feature_value<T: Scalar>(f: &Feature<T>) -> Value {
    match f {
        Feature::Axis2D(Axis::X) => json!({"axis": "x"}),
        Feature::Axis2D(Axis::Y) => json!({"axis": "y"}),
        Feature::DepthOffset { u } => json!({"u": reals(u)}),
    }
}

fn parse_feature<T: Scalar>(v: &Value) -> Result<Feature<T>> {
    if let Some(a) = v.get("axis") {
        return match a.as_str() {
            Some("x") => Ok(Feature::Axis2D(Axis::X)),
            Some("y") => Ok(Feature::Axis2D(Axis::Y)),
            _ => Err(corrupt("bad axis")),
        };
    }
    let u = parse_reals::<T>(get(v, "u")?)?;
    let u: [T; 2] = u.try_into().map_err(|_| corrupt("offset needs two components"))?;
    Ok(Feature::DepthOffset { u })
}

fn leaf_value<T: Scalar>(m: &LeafModel<T>) -> Value {
    match m {
        LeafModel::Class { histogram, label } => json!({
            "node": "leaf",
            "histogram": reals(histogram),
            "label": label,
        }),
        LeafModel::Regression { joints } => json!({
            "node": "leaf",
            "joints": joints.iter().map(|j| json!({
                "mean": reals(&j.mean_offset),
                "low": j.low_confidence,
                "support": j.support,
            })).collect::<Vec<_>>(),
        }),
    }
}

fn parse_leaf<T: Scalar>(v: &Value, mode: Mode) -> Result<LeafModel<T>> {
    match mode {
        Mode::Classification => Ok(LeafModel::Class {
            histogram: parse_reals(get(v, "histogram")?)?,
            label: parse_usize(get(v, "label")?)?,
        }),
        Mode::Regression => {
            let joints = get(v, "joints")?
                .as_array()
                .ok_or_else(|| corrupt("joints must be an array"))?
                .iter()
                .map(|j| {
                    Ok(JointLeaf {
                        mean_offset: parse_vec3(get(j, "mean")?)?,
                        low_confidence: parse_bool(get(j, "low")?)?,
                        support: parse_usize(get(j, "support")?)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(LeafModel::Regression { joints })
        }
    }
}

fn tree_value<T: Scalar>(tree: &Tree<T>) -> Value {
    let nodes: Vec<Value> = tree
        .preorder()
        .into_iter()
        .map(|n| match tree.node(n) {
            Node::Split { test, .. } => json!({
                "node": "split",
                "feature": feature_value(&test.feature),
                "threshold": real(test.threshold),
            }),
            Node::Leaf(m) => leaf_value(m),
        })
        .collect();
    json!({
        "maxLevels": tree.max_levels,
        "leafCapacity": tree.leaf_capacity,
        "nodes": nodes,
    })
}

fn parse_tree<T: Scalar>(v: &Value, mode: Mode) -> Result<Tree<T>> {
    let items = get(v, "nodes")?
        .as_array()
        .ok_or_else(|| corrupt("nodes must be an array"))?;
    let mut nodes: Vec<Node<T>> = Vec::with_capacity(items.len());
    // Rebuild the preorder arena: a split's left child follows it directly,
    // its right child follows the end of the left subtree.
    fn build<T: Scalar>(items: &[Value], pos: &mut usize, mode: Mode, nodes: &mut Vec<Node<T>>, depth: usize) -> Result<usize> {
        if depth > 4096 {
            return Err(corrupt("tree too deep"));
        }
        let item = items.get(*pos).ok_or_else(|| corrupt("node array ends inside a subtree"))?;
        let id = nodes.len();
        *pos += 1;
        match get(item, "node")?.as_str() {
            Some("leaf") => {
                nodes.push(Node::Leaf(parse_leaf(item, mode)?));
            }
            Some("split") => {
                let test = SplitTest::new(parse_feature(get(item, "feature")?)?, parse_real(get(item, "threshold")?)?);
                nodes.push(Node::Split { test, left: 0, right: 0 });
                let left = build(items, pos, mode, nodes, depth + 1)?;
                let right = build(items, pos, mode, nodes, depth + 1)?;
                nodes[id] = Node::Split { test, left, right };
            }
            _ => return Err(corrupt("unknown node kind")),
        }
        Ok(id)
    }
    let mut pos = 0;
    build(items, &mut pos, mode, &mut nodes, 0)?;
    if pos != items.len() {
        return Err(corrupt("trailing nodes after the root subtree"));
    }
    Ok(Tree::from_nodes(
        nodes,
        parse_usize(get(v, "maxLevels")?)?,
        parse_usize(get(v, "leafCapacity")?)?,
    ))
}

fn scalar_name<T: Scalar>() -> &'static str {
    if std::mem::size_of::<T>() == 4 {
        "f32"
    } else {
        "f64"
    }
}

/// Canonical text of `forest`; equal forests give identical text.
pub fn to_document<T: Scalar>(forest: &Forest<T>) -> String {
    let mut header = Map::new();
    header.insert("format".into(), json!(FORMAT_NAME));
    header.insert("formatVersion".into(), json!(FORMAT_VERSION));
    header.insert("mode".into(), json!(forest.mode.name()));
    header.insert("scalar".into(), json!(scalar_name::<T>()));
    header.insert("params".into(), params_value(&forest.params));
    let trees: Vec<Value> = forest.trees.iter().map(tree_value).collect();
    let mut out = serde_json::to_string(&Value::Object(header)).expect("header serialises");
    // One tree per line after the header line keeps diffs readable.
    out.pop();
    out.push_str(",\"trees\":[\n");
    for (k, t) in trees.iter().enumerate() {
        out.push_str(&serde_json::to_string(t).expect("tree serialises"));
        if k + 1 < trees.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("]}\n");
    out
}

pub fn from_document<T: Scalar>(text: &str) -> Result<Forest<T>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    if get(&doc, "format")?.as_str() != Some(FORMAT_NAME) {
        return Err(corrupt("not a forest document"));
    }
    let version = get(&doc, "formatVersion")?
        .as_u64()
        .ok_or_else(|| corrupt("bad formatVersion"))? as u32;
    if version == 0 || version > FORMAT_VERSION {
        return Err(Error::Version(version));
    }
    let mode = match get(&doc, "mode")?.as_str() {
        Some("classification") => Mode::Classification,
        Some("regression") => Mode::Regression,
        _ => return Err(corrupt("unknown mode")),
    };
    let params = parse_params(get(&doc, "params")?)?;
    let trees = get(&doc, "trees")?
        .as_array()
        .ok_or_else(|| corrupt("trees must be an array"))?
        .iter()
        .map(|t| parse_tree(t, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest::new(trees, mode, params))
}

pub fn save_forest<T: Scalar>(forest: &Forest<T>, path: &Path) -> Result<()> {
    fs::write(path, to_document(forest))?;
    Ok(())
}

pub fn load_forest<T: Scalar>(path: &Path) -> Result<Forest<T>> {
    from_document(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Forest<f64> {
        let leaf = |h: [f64; 2]| {
            Node::Leaf(LeafModel::Class {
                histogram: h.to_vec(),
                label: usize::from(h[1] > h[0]),
            })
        };
        let t = Tree::from_nodes(
            vec![
                Node::Split {
                    test: SplitTest::new(Feature::Axis2D(Axis::X), 0.1 + 0.2),
                    left: 1,
                    right: 2,
                },
                leaf([1.0 / 3.0, 2.0 / 3.0]),
                leaf([0.9, 0.1]),
            ],
            20,
            60,
        );
        Forest::new(vec![t], Mode::Classification, TrainParams::axis_classification(5))
    }

    #[test]
    fn document_round_trip_is_exact() {
        let f = tiny();
        let doc = to_document(&f);
        assert!(doc.contains("3.0000000000000004e-1"));
        let back: Forest<f64> = from_document(&doc).unwrap();
        assert_eq!(back, f);
        assert_eq!(to_document(&back), doc);
    }

    #[test]
    fn truncated_document_is_corrupt() {
        let doc = to_document(&tiny());
        let cut = &doc[..doc.len() / 2];
        assert!(matches!(from_document::<f64>(cut), Err(Error::Corrupt(_))));
    }

    #[test]
    fn future_version_is_rejected() {
        let doc = to_document(&tiny()).replace("\"formatVersion\":1", "\"formatVersion\":9");
        assert!(matches!(from_document::<f64>(&doc), Err(Error::Version(9))));
    }
}
