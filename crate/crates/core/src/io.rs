//! CSV serialization.
//!
//! * functions: `leaf_id,value`, one row per leaf, where `leaf_id` is the
//!   left-to-right leaf index;
//! * sign sequences: `node_id,eps`, internal nodes only, missing rows read as 0;
//! * sparse collections: `node_id`;
//! * Carleson families: a directory of `<node_id>.csv` files, each holding
//!   `b_Q` in the function format.

use std::collections::BTreeSet;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::CellFunction;
use crate::operators::{CarlesonFamily, SignSequence, SparseCollection};
use crate::tree::{MeasureTree, NodeId};

#[derive(Debug, Serialize, Deserialize)]
struct LeafRow {
    leaf_id: usize,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct EpsRow {
    node_id: usize,
    eps: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MemberRow {
    node_id: usize,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input)
}

fn check_headers<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers()?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::InvalidArgument(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

pub fn read_cell_function<R: Read>(tree: Arc<MeasureTree>, input: R) -> Result<CellFunction> {
    let mut rdr = reader(input);
    check_headers(&mut rdr, &["leaf_id", "value"])?;
    let n = tree.num_leaves();
    let mut values = vec![None; n];
    for row in rdr.deserialize() {
        let row: LeafRow = row?;
        let slot = values.get_mut(row.leaf_id).ok_or_else(|| {
            Error::InvalidArgument(format!("leaf_id {} out of range 0..{n}", row.leaf_id))
        })?;
        if slot.replace(row.value).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate leaf_id {}", row.leaf_id)));
        }
    }
    let got = values.iter().filter(|v| v.is_some()).count();
    if got != n {
        return Err(Error::LengthMismatch { expected: n, got });
    }
    CellFunction::new(tree, values.into_iter().map(Option::unwrap).collect())
}

pub fn write_cell_function<W: Write>(f: &CellFunction, output: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(output);
    for (leaf_id, &value) in f.values().iter().enumerate() {
        wtr.serialize(LeafRow { leaf_id, value })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_sign_sequence<R: Read>(tree: Arc<MeasureTree>, input: R) -> Result<SignSequence> {
    let mut rdr = reader(input);
    check_headers(&mut rdr, &["node_id", "eps"])?;
    let mut eps = vec![0.0; tree.len()];
    let mut seen = BTreeSet::new();
    for row in rdr.deserialize() {
        let row: EpsRow = row?;
        let node = tree.check(NodeId(row.node_id))?;
        if tree.is_leaf(node) {
            return Err(Error::LeafNode(node));
        }
        if !seen.insert(node) {
            return Err(Error::InvalidArgument(format!("duplicate node_id {node}")));
        }
        eps[node.0] = row.eps;
    }
    SignSequence::new(tree, eps)
}

pub fn write_sign_sequence<W: Write>(eps: &SignSequence, output: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(output);
    for q in eps.tree().internal_nodes() {
        wtr.serialize(EpsRow {
            node_id: q.0,
            eps: eps.get(q),
        })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_sparse_collection<R: Read>(
    tree: Arc<MeasureTree>,
    input: R,
) -> Result<SparseCollection> {
    let mut rdr = reader(input);
    check_headers(&mut rdr, &["node_id"])?;
    let mut members = Vec::new();
    for row in rdr.deserialize() {
        let row: MemberRow = row?;
        members.push(NodeId(row.node_id));
    }
    SparseCollection::new(tree, members)
}

pub fn write_sparse_collection<W: Write>(s: &SparseCollection, output: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(output);
    wtr.write_record(["node_id"])?;
    for m in s.members() {
        wtr.write_record([m.0.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads every `<node_id>.csv` in `dir` as `b_Q`. Other files are ignored.
pub fn read_carleson_dir(tree: Arc<MeasureTree>, dir: &Path) -> Result<CarlesonFamily> {
    let mut functions = Vec::new();
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.sort();
    for path in paths {
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let Some(id) = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<usize>().ok())
        else {
            continue;
        };
        let b = read_cell_function(tree.clone(), fs::File::open(&path)?)?;
        functions.push((NodeId(id), b));
    }
    CarlesonFamily::from_functions(tree, functions)
}

pub fn write_carleson_dir(b: &CarlesonFamily, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for q in b.nodes() {
        let f = b.function(q).expect("listed node carries a function");
        let file = fs::File::create(dir.join(format!("{}.csv", q.0)))?;
        write_cell_function(&f, file)?;
    }
    Ok(())
}
