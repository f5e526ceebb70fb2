//! Text dataset directory format.
//!
//! ```text
//! manifest          layers=M / nodes=N_1,..,N_M / classes=K_1,..,K_M / attributes=identity|file
//! edges_k_l.txt     "i j" per line, 0-based nodes, 1-based layers k <= l
//! labels_k.txt      "i c" per line; nodes not listed are unlabeled
//! attrs_k.txt       line i holds the C_k attribute values of node i
//! ```
//!
//! Lines starting with `#` and blank lines are ignored. Within-layer edges
//! are symmetrized on load, so each undirected edge may be listed once.
//! A missing within-layer edge file means no edges; a missing between-layer
//! file means the pair is not stored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{Attributes, MultiLayerGraph, SparseBinaryMatrix};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

pub const MANIFEST: &str = "manifest";

pub fn edges_file(k: usize, l: usize) -> String {
    format!("edges_{}_{}.txt", k + 1, l + 1)
}

pub fn labels_file(k: usize) -> String {
    format!("labels_{}.txt", k + 1)
}

pub fn attrs_file(k: usize) -> String {
    format!("attrs_{}.txt", k + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AttrSource {
    Identity,
    File,
}

struct Manifest {
    sizes: Vec<usize>,
    classes: Vec<usize>,
    attrs: Vec<AttrSource>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_optional(path: &Path) -> Result<Option<String>> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_list(path: &Path, line: usize, key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| parse_err(path, line, format!("`{key}` expects integers, got `{v}`")))
        })
        .collect()
}

fn parse_manifest(path: &Path, text: &str) -> Result<Manifest> {
    let mut layers = None;
    let mut sizes = None;
    let mut classes = None;
    let mut attrs = None;
    let mut last_line = 0;
    for (line, l) in content_lines(text) {
        last_line = line;
        let (key, value) = l
            .split_once('=')
            .ok_or_else(|| parse_err(path, line, "expected key=value"))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "layers" => {
                layers = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| parse_err(path, line, "`layers` expects an integer"))?,
                )
            }
            "nodes" => sizes = Some(parse_list(path, line, key, value)?),
            "classes" => classes = Some(parse_list(path, line, key, value)?),
            "attributes" => {
                let list = value
                    .split(',')
                    .map(|v| match v.trim() {
                        "identity" => Ok(AttrSource::Identity),
                        "file" => Ok(AttrSource::File),
                        other => Err(parse_err(
                            path,
                            line,
                            format!("`attributes` expects identity or file, got `{other}`"),
                        )),
                    })
                    .collect::<Result<Vec<_>>>()?;
                attrs = Some((line, list));
            }
            other => {
                return Err(parse_err(
                    path,
                    line,
                    format!("unknown manifest key `{other}`"),
                ))
            }
        }
    }
    let missing = |k: &str| parse_err(path, last_line, format!("manifest is missing `{k}`"));
    let layers = layers.ok_or_else(|| missing("layers"))?;
    let sizes = sizes.ok_or_else(|| missing("nodes"))?;
    if layers == 0 {
        return Err(parse_err(path, last_line, "`layers` must be at least 1"));
    }
    if sizes.len() != layers {
        return Err(parse_err(
            path,
            last_line,
            format!("`nodes` lists {} sizes for {layers} layers", sizes.len()),
        ));
    }
    let classes = classes.unwrap_or_else(|| vec![0; layers]);
    if classes.len() != layers {
        return Err(parse_err(
            path,
            last_line,
            format!(
                "`classes` lists {} values for {layers} layers",
                classes.len()
            ),
        ));
    }
    let attrs = match attrs {
        None => vec![AttrSource::Identity; layers],
        Some((_, list)) if list.len() == 1 => vec![list[0]; layers],
        Some((line, list)) if list.len() != layers => {
            return Err(parse_err(
                path,
                line,
                "`attributes` needs one value or one per layer",
            ))
        }
        Some((_, list)) => list,
    };
    Ok(Manifest {
        sizes,
        classes,
        attrs,
    })
}

fn parse_pairs(
    path: &Path,
    text: &str,
    rows: (usize, usize),
    cols: (usize, usize),
) -> Result<Vec<(usize, usize, usize)>> {
    let mut out = Vec::new();
    for (line, l) in content_lines(text) {
        let mut it = l.split_whitespace();
        let (a, b) = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(parse_err(
                    path,
                    line,
                    "expected two whitespace-separated integers",
                ))
            }
        };
        let a: usize = a
            .parse()
            .map_err(|_| parse_err(path, line, format!("invalid integer `{a}`")))?;
        let b: usize = b
            .parse()
            .map_err(|_| parse_err(path, line, format!("invalid integer `{b}`")))?;
        for (idx, (layer, size)) in [(a, rows), (b, cols)] {
            if idx >= size {
                return Err(Error::Bounds {
                    path: path.to_path_buf(),
                    line,
                    layer: layer + 1,
                    index: idx,
                    size,
                });
            }
        }
        out.push((line, a, b));
    }
    Ok(out)
}

fn parse_attrs(path: &Path, text: &str, n: usize) -> Result<DenseMatrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, l) in content_lines(text) {
        let values = l
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(path, line, format!("invalid real `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        match cols {
            None => cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected {c} values, found {}", values.len()),
                ))
            }
            _ => {}
        }
        rows += 1;
        if rows > n {
            return Err(parse_err(
                path,
                line,
                format!("more than {n} attribute rows"),
            ));
        }
        data.extend(values);
    }
    if rows != n {
        return Err(parse_err(
            path,
            text.lines().count(),
            format!("expected {n} attribute rows, found {rows}"),
        ));
    }
    DenseMatrix::from_vec(n, cols.unwrap_or(0), data)
}

/// Reads and validates a dataset directory.
pub fn load_graph(dir: impl AsRef<Path>) -> Result<MultiLayerGraph> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST);
    let manifest = parse_manifest(&manifest_path, &read(&manifest_path)?)?;
    let m = manifest.sizes.len();

    let mut relations = BTreeMap::new();
    for k in 0..m {
        for l in k..m {
            let path = dir.join(edges_file(k, l));
            let text = match read_optional(&path)? {
                Some(t) => t,
                None if k == l => String::new(),
                None => continue,
            };
            let (nk, nl) = (manifest.sizes[k], manifest.sizes[l]);
            let pairs = parse_pairs(&path, &text, (k, nk), (l, nl))?;
            if k == l {
                if let Some(&(line, i, _)) = pairs.iter().find(|&&(_, i, j)| i == j) {
                    return Err(parse_err(&path, line, format!("self-loop on node {i}")));
                }
            }
            let mat = SparseBinaryMatrix::new(nk, nl, pairs.into_iter().map(|(_, i, j)| (i, j)));
            relations.insert((k, l), if k == l { mat.symmetrized() } else { mat });
        }
    }

    let mut attributes = Vec::with_capacity(m);
    for k in 0..m {
        attributes.push(match manifest.attrs[k] {
            AttrSource::Identity => Attributes::Identity(manifest.sizes[k]),
            AttrSource::File => {
                let path = dir.join(attrs_file(k));
                Attributes::Dense(parse_attrs(&path, &read(&path)?, manifest.sizes[k])?)
            }
        });
    }

    let mut labels = Vec::with_capacity(m);
    for k in 0..m {
        let n = manifest.sizes[k];
        let mut layer = vec![None; n];
        let classes = manifest.classes[k];
        let path = dir.join(labels_file(k));
        if classes > 0 {
            let text = read_optional(&path)?.unwrap_or_default();
            for (line, i, c) in parse_pairs(&path, &text, (k, n), (k, usize::MAX))? {
                if c >= classes {
                    return Err(parse_err(
                        &path,
                        line,
                        format!("class {c} out of range for {classes} classes"),
                    ));
                }
                match layer[i] {
                    Some(prev) if prev != c => {
                        return Err(parse_err(&path, line, format!("node {i} labeled twice")))
                    }
                    _ => layer[i] = Some(c),
                }
            }
        }
        labels.push(layer);
    }

    MultiLayerGraph::new(
        manifest.sizes,
        relations,
        attributes,
        labels,
        manifest.classes,
    )
}

/// Files making up the on-disk form of `graph`, in write order.
fn render(graph: &MultiLayerGraph) -> Vec<(String, String)> {
    let m = graph.num_layers();
    let mut files = Vec::new();

    let join = |v: &[usize]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let attr_kinds: Vec<&str> = graph
        .attributes
        .iter()
        .map(|a| match a {
            Attributes::Identity(_) => "identity",
            Attributes::Dense(_) => "file",
        })
        .collect();
    let attr_value = if attr_kinds.iter().all(|&a| a == attr_kinds[0]) {
        attr_kinds[0].to_string()
    } else {
        attr_kinds.join(",")
    };
    files.push((
        MANIFEST.to_string(),
        format!(
            "# mgcn dataset v1\nlayers={m}\nnodes={}\nclasses={}\nattributes={attr_value}\n",
            join(&graph.layer_sizes),
            join(&graph.num_classes)
        ),
    ));

    for (&(k, l), mat) in &graph.relations {
        let mut s = format!("# mgcn edges v1 layers {} {}\n", k + 1, l + 1);
        for &(i, j) in mat.entries() {
            if k != l || i < j {
                let _ = writeln!(s, "{i} {j}");
            }
        }
        files.push((edges_file(k, l), s));
    }

    for k in 0..m {
        if graph.has_labels(k) {
            let mut s = format!("# mgcn labels v1 layer {}\n", k + 1);
            for (i, y) in graph.labels[k].iter().enumerate() {
                if let Some(c) = y {
                    let _ = writeln!(s, "{i} {c}");
                }
            }
            files.push((labels_file(k), s));
        }
        if let Attributes::Dense(x) = &graph.attributes[k] {
            let mut s = format!("# mgcn attributes v1 layer {}\n", k + 1);
            for i in 0..x.rows() {
                let row: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
            files.push((attrs_file(k), s));
        }
    }
    files
}

/// Writes `graph` into `dir`, creating it if needed.
pub fn save_graph(graph: &MultiLayerGraph, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (name, body) in render(graph) {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// SHA-256 of the canonical on-disk form, hex encoded.
pub fn graph_digest(graph: &MultiLayerGraph) -> String {
    let mut h = Sha256::new();
    for (name, body) in render(graph) {
        h.update(name.as_bytes());
        h.update([0u8]);
        h.update(body.as_bytes());
        h.update([0u8]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
