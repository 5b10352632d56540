//! JSON model documents.
//!
//! ```text
//! {"version": 1, "num_vars": N, "root": id,
//!  "nodes": [
//!   {"id": 0, "kind": "indicator", "var": 0, "value": 1},
//!   {"id": 4, "kind": "sum", "children": [0, 1], "logits": [0.5, -0.5], "block": 0},
//!   {"id": 5, "kind": "product", "children": [2, 4]},
//!   {"id": 6, "kind": "quotient", "num": 5, "den": 4}],
//!  "cmos": [{"root": 6, "a": [[2]], "b": [[4]]}]}
//! ```
//!
//! Logits are written with 17 significant digits, so a write/read cycle
//! reproduces them exactly. `block` (sums sharing a logit block carry the
//! same id and identical logits), `frozen` and `cmos` are optional; a sum
//! without `block` gets a block of its own.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::{Map, Number, Value};
use spqn_core::graph::BlockSpec;
use spqn_core::{BlockId, CmoAnnotation, Model, Network, Node, NodeId, ParamVector};

use crate::number::fmt17;
use crate::{FormatError, Result};

pub const VERSION: u64 = 1;

fn bad(msg: impl Into<String>) -> FormatError {
    FormatError::Model(msg.into())
}

fn node_json(net: &Network, params: &ParamVector, id: NodeId) -> Value {
    let mut m = Map::new();
    m.insert("id".into(), id.0.into());
    match net.node(id) {
        Node::Indicator { var, value } => {
            m.insert("kind".into(), "indicator".into());
            m.insert("var".into(), (*var).into());
            m.insert("value".into(), u8::from(*value).into());
        }
        Node::Sum { children, block } => {
            m.insert("kind".into(), "sum".into());
            m.insert("children".into(), children.iter().map(|c| c.0).collect());
            let logits = params
                .block_logits(net, *block)
                .iter()
                .map(|&l| Value::Number(fmt17(l).parse::<Number>().expect("finite logit")))
                .collect();
            m.insert("logits".into(), Value::Array(logits));
            m.insert("block".into(), block.0.into());
            if net.block(*block).frozen {
                m.insert("frozen".into(), true.into());
            }
        }
        Node::Product { children } => {
            m.insert("kind".into(), "product".into());
            m.insert("children".into(), children.iter().map(|c| c.0).collect());
        }
        Node::Quotient { numerator, denominator } => {
            m.insert("kind".into(), "quotient".into());
            m.insert("num".into(), numerator.0.into());
            m.insert("den".into(), denominator.0.into());
        }
    }
    Value::Object(m)
}

/// Serializes a model, one node per line.
pub fn model_to_string(model: &Model) -> Result<String> {
    let net = &model.network;
    model.params.check_layout(net)?;
    let mut out = String::new();
    write!(out, "{{\"version\": {VERSION}, \"num_vars\": {}, \"root\": {},\n\"nodes\": [", net.num_vars(), net.root().0).unwrap();
    for i in 0..net.len() {
        out.push_str(if i == 0 { "\n" } else { ",\n" });
        out.push_str(&serde_json::to_string(&node_json(net, &model.params, NodeId(i as u32)))?);
    }
    out.push_str("\n]");
    if !model.cmos.is_empty() {
        out.push_str(",\n\"cmos\": [");
        for (k, a) in model.cmos.iter().enumerate() {
            out.push_str(if k == 0 { "\n" } else { ",\n" });
            let rows = |r: &Vec<Vec<NodeId>>| -> Value { r.iter().map(|row| row.iter().map(|n| n.0).collect::<Value>()).collect() };
            let v = serde_json::json!({"root": a.root.0, "a": rows(&a.a), "b": rows(&a.b)});
            out.push_str(&serde_json::to_string(&v)?);
        }
        out.push_str("\n]");
    }
    out.push_str("}\n");
    Ok(out)
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, ctx: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| bad(format!("{ctx}: missing field `{key}`")))
}

fn uint(v: &Value, ctx: &str) -> Result<u64> {
    v.as_u64().ok_or_else(|| bad(format!("{ctx}: expected a non-negative integer, found {v}")))
}

fn node_id(v: &Value, ctx: &str) -> Result<NodeId> {
    let n = uint(v, ctx)?;
    u32::try_from(n).map(NodeId).map_err(|_| bad(format!("{ctx}: node id {n} out of range")))
}

fn id_list(v: &Value, ctx: &str) -> Result<Vec<NodeId>> {
    v.as_array()
        .ok_or_else(|| bad(format!("{ctx}: expected an array of node ids")))?
        .iter()
        .map(|c| node_id(c, ctx))
        .collect()
}

fn real(v: &Value, ctx: &str) -> Result<f64> {
    match v {
        // Parse the literal text so the value is correctly rounded.
        Value::Number(n) => n.to_string().parse().map_err(|_| bad(format!("{ctx}: bad number {n}"))),
        _ => Err(bad(format!("{ctx}: expected a number, found {v}"))),
    }
}

struct PendingSum {
    logits: Vec<f64>,
    frozen: bool,
}

pub fn parse_model(text: &str) -> Result<Model> {
    let doc: Value = serde_json::from_str(text)?;
    let top = doc.as_object().ok_or_else(|| bad("top level must be an object"))?;
    let version = uint(field(top, "version", "model")?, "version")?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let num_vars = uint(field(top, "num_vars", "model")?, "num_vars")? as usize;
    let root = node_id(field(top, "root", "model")?, "root")?;
    let raw_nodes = field(top, "nodes", "model")?.as_array().ok_or_else(|| bad("`nodes` must be an array"))?;

    let mut nodes = Vec::with_capacity(raw_nodes.len());
    // Explicit block id -> (logits, frozen, first user); implicit blocks are
    // numbered after the explicit ones.
    let mut explicit: BTreeMap<u32, (PendingSum, usize)> = BTreeMap::new();
    let mut implicit: Vec<(usize, PendingSum)> = Vec::new();
    for (i, raw) in raw_nodes.iter().enumerate() {
        let ctx = format!("node {i}");
        let obj = raw.as_object().ok_or_else(|| bad(format!("{ctx}: expected an object")))?;
        let id = uint(field(obj, "id", &ctx)?, &ctx)?;
        if id != i as u64 {
            return Err(bad(format!("{ctx}: nodes must be listed in id order, found id {id}")));
        }
        let kind = field(obj, "kind", &ctx)?.as_str().ok_or_else(|| bad(format!("{ctx}: `kind` must be a string")))?;
        let node = match kind {
            "indicator" => {
                let var = uint(field(obj, "var", &ctx)?, &ctx)? as usize;
                let value = match field(obj, "value", &ctx)? {
                    Value::Bool(b) => *b,
                    v => match uint(v, &ctx)? {
                        0 => false,
                        1 => true,
                        other => return Err(bad(format!("{ctx}: indicator value must be 0 or 1, found {other}"))),
                    },
                };
                Node::Indicator { var, value }
            }
            "sum" => {
                let children = id_list(field(obj, "children", &ctx)?, &ctx)?;
                let logits = field(obj, "logits", &ctx)?
                    .as_array()
                    .ok_or_else(|| bad(format!("{ctx}: `logits` must be an array")))?
                    .iter()
                    .map(|l| real(l, &ctx))
                    .collect::<Result<Vec<_>>>()?;
                if logits.len() != children.len() {
                    return Err(FormatError::Core(spqn_core::Error::Structure {
                        node: NodeId(i as u32),
                        detail: format!("{} logits for {} children", logits.len(), children.len()),
                    }));
                }
                let frozen = match obj.get("frozen") {
                    None => false,
                    Some(v) => v.as_bool().ok_or_else(|| bad(format!("{ctx}: `frozen` must be a boolean")))?,
                };
                let pending = PendingSum { logits, frozen };
                let block = match obj.get("block") {
                    Some(b) => {
                        let b = u32::try_from(uint(b, &ctx)?).map_err(|_| bad(format!("{ctx}: block id out of range")))?;
                        match explicit.get(&b) {
                            Some((first, user)) => {
                                if first.logits != pending.logits || first.frozen != pending.frozen {
                                    return Err(bad(format!("{ctx}: block {b} differs from its use at node {user}")));
                                }
                            }
                            None => {
                                explicit.insert(b, (pending, i));
                            }
                        }
                        BlockId(b)
                    }
                    None => {
                        implicit.push((i, pending));
                        BlockId(u32::MAX)
                    }
                };
                Node::Sum { children, block }
            }
            "product" => Node::Product {
                children: id_list(field(obj, "children", &ctx)?, &ctx)?,
            },
            "quotient" => Node::Quotient {
                numerator: node_id(field(obj, "num", &ctx)?, &ctx)?,
                denominator: node_id(field(obj, "den", &ctx)?, &ctx)?,
            },
            other => return Err(bad(format!("{ctx}: unknown kind {other:?}"))),
        };
        nodes.push(node);
    }

    if let Some((k, b)) = explicit.keys().enumerate().find(|(k, b)| **b as usize != *k) {
        return Err(bad(format!("block ids must be 0..{}; block {k} is missing (next id is {b})", explicit.len())));
    }
    let mut blocks = Vec::new();
    let mut logits = Vec::new();
    let mut push_block = |p: &PendingSum| {
        blocks.push(BlockSpec {
            offset: logits.len(),
            len: p.logits.len(),
            frozen: p.frozen,
        });
        logits.extend_from_slice(&p.logits);
    };
    for (p, _) in explicit.values() {
        push_block(p);
    }
    let first_implicit = explicit.len() as u32;
    for (k, (i, p)) in implicit.iter().enumerate() {
        push_block(p);
        if let Node::Sum { block, .. } = &mut nodes[*i] {
            *block = BlockId(first_implicit + k as u32);
        }
    }

    let network = Network::from_parts(num_vars, nodes, root, blocks)?;
    let params = ParamVector::new(logits);
    params.check_layout(&network)?;

    let mut cmos = Vec::new();
    if let Some(raw) = top.get("cmos") {
        let list = raw.as_array().ok_or_else(|| bad("`cmos` must be an array"))?;
        for (k, c) in list.iter().enumerate() {
            let ctx = format!("cmo {k}");
            let obj = c.as_object().ok_or_else(|| bad(format!("{ctx}: expected an object")))?;
            let rows = |key: &str| -> Result<Vec<Vec<NodeId>>> {
                field(obj, key, &ctx)?
                    .as_array()
                    .ok_or_else(|| bad(format!("{ctx}: `{key}` must be an array of rows")))?
                    .iter()
                    .map(|r| id_list(r, &ctx))
                    .collect()
            };
            let ann = CmoAnnotation {
                root: node_id(field(obj, "root", &ctx)?, &ctx)?,
                a: rows("a")?,
                b: rows("b")?,
            };
            let mut ids = vec![ann.root];
            ids.extend(ann.a.iter().chain(&ann.b).flatten().copied());
            if let Some(bad_id) = ids.iter().find(|id| id.index() >= network.len()) {
                return Err(bad(format!("{ctx}: node {bad_id} does not exist")));
            }
            cmos.push(ann);
        }
    }
    Ok(Model::new(network, params).with_cmos(cmos))
}

pub fn read_model(path: &Path) -> Result<Model> {
    parse_model(&crate::read_file(path)?)
}

pub fn write_model(path: &Path, model: &Model) -> Result<()> {
    crate::write_file(path, &model_to_string(model)?)
}
