//! Tree and point-process JSON, contour and point CSV.
//!
//! Trees are nested records: a branch is `{"length": x, "children": [l, r]}`
//! and a leaf `{"length": x, "leaf": "extant" | "extinct", "marked": true}`
//! (`marked` omitted when false). The horizon sits at the top level as `"t"`.
//! Writers and readers walk trees with explicit stacks, so tree depth is not
//! bounded by recursion.

use std::fmt::Write as _;
use std::path::Path;

use genea_core::contour::{ContourPath, Direction};
use genea_core::continuum::{ContinuumGenealogyPP, ContinuumHistoricalPP};
use genea_core::genealogy::{Attachment, GenealogyPP, HistoricalPP};
use genea_core::tree::{LeafKind, LeafTag, Node, NodeKind, PlanarTree};
use serde::Deserialize;
use serde_json::Value;

use crate::{Error, Result};

/// Shortest decimal form that parses back to the same float.
fn num(x: f64) -> String {
    serde_json::to_string(&x).unwrap_or_else(|_| "null".to_string())
}

/// Writes the nested record of the subtree rooted at `tree.root()`.
fn write_node(out: &mut String, tree: &PlanarTree) {
    enum Item {
        Node(usize),
        Text(&'static str),
    }
    let mut stack = vec![Item::Node(tree.root())];
    while let Some(item) = stack.pop() {
        let id = match item {
            Item::Text(s) => {
                out.push_str(s);
                continue;
            }
            Item::Node(id) => id,
        };
        let node = tree.node(id);
        let _ = write!(out, "{{\"length\":{},", num(node.length));
        match node.kind {
            NodeKind::Leaf(tag) => {
                let kind = if tag.is_extant() { "extant" } else { "extinct" };
                let _ = write!(out, "\"leaf\":\"{kind}\"");
                if tag.marked {
                    out.push_str(",\"marked\":true");
                }
                out.push('}');
            }
            NodeKind::Branch { left, right } => {
                out.push_str("\"children\":[");
                stack.push(Item::Text("]}"));
                stack.push(Item::Node(right));
                stack.push(Item::Text(","));
                stack.push(Item::Node(left));
            }
        }
    }
}

pub fn tree_to_json(tree: &PlanarTree) -> String {
    let mut out = String::from("{");
    if let Some(t) = tree.horizon() {
        let _ = write!(out, "\"t\":{},", num(t));
    }
    out.push_str("\"root\":");
    write_node(&mut out, tree);
    out.push('}');
    out
}

fn parse_value(text: &str) -> Result<Value> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let v = Value::deserialize(&mut de)?;
    de.end()?;
    Ok(v)
}

fn field_f64(obj: &serde_json::Map<String, Value>, key: &str) -> Result<f64> {
    obj.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Format(format!("missing or non-numeric \"{key}\"")))
}

/// Builds a tree from a nested node record.
fn node_from_value(root: &Value, horizon: Option<f64>) -> Result<PlanarTree> {
    let mut nodes: Vec<Node> = Vec::new();
    let mut built: Vec<usize> = Vec::new();
    let mut stack = vec![(root, false)];
    while let Some((v, expanded)) = stack.pop() {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Format("tree node is not an object".into()))?;
        let length = field_f64(obj, "length")?;
        if let Some(children) = obj.get("children") {
            let children = children
                .as_array()
                .filter(|c| c.len() == 2)
                .ok_or_else(|| Error::Format("\"children\" must hold exactly two nodes".into()))?;
            if !expanded {
                stack.push((v, true));
                stack.push((&children[1], false));
                stack.push((&children[0], false));
                continue;
            }
            let right = built.pop().expect("right child built");
            let left = built.pop().expect("left child built");
            nodes.push(Node {
                length,
                kind: NodeKind::Branch { left, right },
            });
        } else {
            let kind = match obj.get("leaf").and_then(Value::as_str) {
                Some("extant") => LeafKind::Extant,
                Some("extinct") => LeafKind::Extinct,
                _ => return Err(Error::Format("leaf must be \"extant\" or \"extinct\"".into())),
            };
            let marked = match obj.get("marked") {
                None => false,
                Some(m) => m
                    .as_bool()
                    .ok_or_else(|| Error::Format("\"marked\" must be a boolean".into()))?,
            };
            nodes.push(Node {
                length,
                kind: NodeKind::Leaf(LeafTag { kind, marked }),
            });
        }
        built.push(nodes.len() - 1);
    }
    let root = built.pop().expect("root built");
    Ok(PlanarTree::from_nodes(nodes, root, horizon)?)
}

pub fn tree_from_json(text: &str) -> Result<PlanarTree> {
    let v = parse_value(text)?;
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Format("tree document is not an object".into()))?;
    let horizon = match obj.get("t") {
        None | Some(Value::Null) => None,
        Some(t) => Some(t.as_f64().ok_or_else(|| Error::Format("\"t\" is not a number".into()))?),
    };
    let root = obj
        .get("root")
        .ok_or_else(|| Error::Format("missing \"root\"".into()))?;
    node_from_value(root, horizon)
}

fn write_attachments(out: &mut String, set: &[Attachment]) {
    out.push('[');
    for (k, a) in set.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        let _ = write!(out, "{{\"attach\":{},\"height\":{},\"subtree\":", num(a.attach), num(a.height));
        write_node(out, &a.subtree);
        out.push('}');
    }
    out.push(']');
}

pub fn historical_to_json(pp: &HistoricalPP) -> String {
    let mut out = String::new();
    let _ = write!(out, "{{\"t\":{},\"entries\":[", num(pp.t));
    for (k, e) in pp.entries.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        let _ = write!(out, "{{\"l\":{},\"depth\":{},\"left\":", e.index, num(e.depth));
        write_attachments(&mut out, &e.left);
        out.push_str(",\"right\":");
        write_attachments(&mut out, &e.right);
        out.push('}');
    }
    out.push_str("]}");
    out
}

pub fn continuum_historical_to_json(pp: &ContinuumHistoricalPP) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{{\"t\":{},\"p\":{},\"delta\":{},\"kappa_min\":{},\"entries\":[",
        num(pp.t),
        num(pp.p),
        num(pp.delta),
        num(pp.kappa_min)
    );
    for (k, e) in pp.entries.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        let _ = write!(out, "{{\"l\":{},\"depth\":{},\"left\":", num(e.ell), num(e.depth));
        write_attachments(&mut out, &e.left);
        out.push_str(",\"right\":");
        write_attachments(&mut out, &e.right);
        out.push('}');
    }
    out.push_str("]}");
    out
}

/// Attachment sets of a historical JSON document, as
/// `(l, depth, left, right)` with subtrees rebuilt.
pub type ParsedEntry = (f64, f64, Vec<Attachment>, Vec<Attachment>);

pub fn historical_entries_from_json(text: &str) -> Result<(f64, Vec<ParsedEntry>)> {
    let v = parse_value(text)?;
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Format("document is not an object".into()))?;
    let t = field_f64(obj, "t")?;
    let entries = obj
        .get("entries")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Format("missing \"entries\"".into()))?;
    let side = |e: &serde_json::Map<String, Value>, key: &str| -> Result<Vec<Attachment>> {
        let list = e
            .get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Format(format!("missing \"{key}\"")))?;
        list.iter()
            .map(|a| {
                let a = a
                    .as_object()
                    .ok_or_else(|| Error::Format("attachment is not an object".into()))?;
                Ok(Attachment {
                    attach: field_f64(a, "attach")?,
                    height: field_f64(a, "height")?,
                    subtree: node_from_value(
                        a.get("subtree").ok_or_else(|| Error::Format("missing \"subtree\"".into()))?,
                        None,
                    )?,
                })
            })
            .collect()
    };
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let e = e
            .as_object()
            .ok_or_else(|| Error::Format("entry is not an object".into()))?;
        out.push((field_f64(e, "l")?, field_f64(e, "depth")?, side(e, "left")?, side(e, "right")?));
    }
    Ok((t, out))
}

/// Rows `direction,length,cumulative_u,height_after`.
pub fn contour_to_csv(path: &ContourPath) -> String {
    let mut out = String::from("direction,length,cumulative_u,height_after\n");
    let mut u = 0.0;
    let mut h = path.start();
    for s in path.segments() {
        u += s.length;
        let d = match s.direction {
            Direction::Up => {
                h += s.length;
                'U'
            }
            Direction::Down => {
                h -= s.length;
                'D'
            }
        };
        let _ = writeln!(out, "{d},{:.16e},{:.16e},{:.16e}", s.length, u, h);
    }
    out
}

/// Rows `index,depth`.
pub fn genealogy_to_csv(pp: &GenealogyPP) -> String {
    let mut out = String::from("index,depth\n");
    for p in pp.points() {
        let _ = writeln!(out, "{},{:.16e}", p.index, p.depth);
    }
    out
}

pub fn genealogy_from_csv(text: &str, t: f64) -> Result<GenealogyPP> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("index,depth") {
        return Err(Error::Format("expected header \"index,depth\"".into()));
    }
    let mut points = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::Format(format!("row {}: expected \"index,depth\"", k + 1));
        let (i, d) = line.split_once(',').ok_or_else(bad)?;
        points.push(genea_core::genealogy::GenealogyPoint {
            index: i.trim().parse().map_err(|_| bad())?,
            depth: d.trim().parse().map_err(|_| bad())?,
        });
    }
    Ok(GenealogyPP::new(t, points)?)
}

/// Rows `ell,depth`.
pub fn continuum_to_csv(pp: &ContinuumGenealogyPP) -> String {
    let mut out = String::from("ell,depth\n");
    for p in &pp.points {
        let _ = writeln!(out, "{:.16e},{:.16e}", p.ell, p.depth);
    }
    out
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKED: &str = r#"{"t":1.0,"root":{"length":0.5,"children":[{"length":0.5,"leaf":"extant"},{"length":0.3,"children":[{"length":0.2,"leaf":"extant"},{"length":0.1,"leaf":"extinct","marked":true}]}]}}"#;

    #[test]
    fn worked_document_round_trips() {
        let tree = tree_from_json(WORKED).unwrap();
        assert_eq!(tree.extant_count(), 2);
        assert_eq!(tree.mark_count(), 1);
        assert_eq!(tree.horizon(), Some(1.0));
        assert_eq!(tree_to_json(&tree), WORKED);
    }

    #[test]
    fn malformed_trees_are_rejected() {
        assert!(tree_from_json("[").is_err());
        assert!(tree_from_json(r#"{"t":1.0}"#).is_err());
        assert!(tree_from_json(r#"{"root":{"length":1.0,"leaf":"alive"}}"#).is_err());
        assert!(tree_from_json(r#"{"root":{"length":1.0,"children":[{"length":1.0,"leaf":"extinct"}]}}"#).is_err());
        // extant leaf short of the horizon
        assert!(tree_from_json(r#"{"t":2.0,"root":{"length":1.0,"leaf":"extant"}}"#).is_err());
    }

    #[test]
    fn deep_trees_do_not_recurse() {
        let mut tree = PlanarTree::leaf(1.0, LeafTag::EXTINCT);
        for _ in 0..20_000 {
            tree = PlanarTree::join(1.0, tree, PlanarTree::leaf(1.0, LeafTag::EXTINCT));
        }
        let text = tree_to_json(&tree);
        let back = std::thread::Builder::new()
            .stack_size(256 << 20)
            .spawn(move || tree_from_json(&text).unwrap())
            .unwrap()
            .join()
            .unwrap();
        assert!(back.approx_eq(&tree, 0.0));
    }

    #[test]
    fn contour_rows() {
        let path = ContourPath::from_heights(vec![0.0, 1.0, 0.5, 1.5, 0.0]).unwrap();
        let csv = contour_to_csv(&path);
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 5);
        assert!(rows[1].starts_with("U,1.0000000000000000e0,1.0000000000000000e0,1.0"));
        assert!(rows[4].starts_with("D,1.5"));
    }

    #[test]
    fn genealogy_csv_round_trip() {
        let pp = GenealogyPP::from_depths(1.0, vec![0.25, 0.5, 0.125]).unwrap();
        let back = genealogy_from_csv(&genealogy_to_csv(&pp), 1.0).unwrap();
        assert_eq!(back, pp);
    }
}
