//! Reading and writing the portable text bundle format.
//!
//! A bundle directory contains five UTF-8 files:
//!
//! - `meta.json` — `{"num_nodes": N, "num_features": D, "num_classes": C}`
//! - `edges.tsv` — one `src<TAB>dst` pair per line, 0-based, undirected
//! - `features.tsv` — per node: `node_id<TAB>dim:value<TAB>dim:value…`
//!   (omitted dims are zero; a line may carry just the node id)
//! - `labels.tsv` — `node_id<TAB>label` per line, one line per node
//! - `split.json` — `{"train": [...], "val": [...], "test": [...]}`

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dense::Dense;
use crate::graph::{DataSplit, Graph};
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleMeta {
    pub num_nodes: usize,
    pub num_features: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SplitFile {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

fn read_file(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_usize(tok: &str, file: &str, line: usize, what: &str) -> Result<usize> {
    tok.trim().parse::<usize>().map_err(|_| Error::Parse {
        file: file.into(),
        line,
        msg: format!("invalid {what}: {tok:?}"),
    })
}

/// Load a split file (`split.json` schema).
pub fn load_split(path: &Path) -> Result<DataSplit> {
    let text = read_file(path)?;
    let parsed: SplitFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    Ok(DataSplit {
        train: parsed.train,
        val: parsed.val,
        test: parsed.test,
    })
}

/// Write a split file (`split.json` schema).
pub fn save_split(path: &Path, split: &DataSplit) -> Result<()> {
    let file = SplitFile {
        train: split.train.clone(),
        val: split.val.clone(),
        test: split.test.clone(),
    };
    let text = serde_json::to_string_pretty(&file).expect("split serializes");
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Load a graph bundle directory.
pub fn load_graph_bundle<T: Scalar>(dir: &Path) -> Result<Graph<T>> {
    let meta_text = read_file(&dir.join("meta.json"))?;
    let meta: BundleMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
        file: "meta.json".into(),
        line: e.line(),
        msg: e.to_string(),
    })?;

    // edges.tsv
    let edges_text = read_file(&dir.join("edges.tsv"))?;
    let mut edges = Vec::new();
    for (lineno, line) in edges_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
            return Err(Error::Parse {
                file: "edges.tsv".into(),
                line: lineno + 1,
                msg: "expected src<TAB>dst".into(),
            });
        };
        let src = parse_usize(a, "edges.tsv", lineno + 1, "source id")?;
        let dst = parse_usize(b, "edges.tsv", lineno + 1, "target id")?;
        if src >= meta.num_nodes || dst >= meta.num_nodes {
            return Err(Error::Parse {
                file: "edges.tsv".into(),
                line: lineno + 1,
                msg: format!("edge ({src},{dst}) outside [0, {})", meta.num_nodes),
            });
        }
        edges.push((src, dst));
    }

    // features.tsv
    let feat_text = read_file(&dir.join("features.tsv"))?;
    let mut features = Dense::<T>::zeros(meta.num_nodes, meta.num_features);
    for (lineno, line) in feat_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let id_tok = parts.next().unwrap();
        let node = parse_usize(id_tok, "features.tsv", lineno + 1, "node id")?;
        if node >= meta.num_nodes {
            return Err(Error::Parse {
                file: "features.tsv".into(),
                line: lineno + 1,
                msg: format!("node id {node} outside [0, {})", meta.num_nodes),
            });
        }
        for pair in parts {
            let Some((dim_tok, val_tok)) = pair.split_once(':') else {
                return Err(Error::Parse {
                    file: "features.tsv".into(),
                    line: lineno + 1,
                    msg: format!("expected dim:value, got {pair:?}"),
                });
            };
            let dim = parse_usize(dim_tok, "features.tsv", lineno + 1, "feature dim")?;
            if dim >= meta.num_features {
                return Err(Error::Parse {
                    file: "features.tsv".into(),
                    line: lineno + 1,
                    msg: format!("feature dim {dim} outside [0, {})", meta.num_features),
                });
            }
            let val: f64 = val_tok.trim().parse().map_err(|_| Error::Parse {
                file: "features.tsv".into(),
                line: lineno + 1,
                msg: format!("invalid feature value: {val_tok:?}"),
            })?;
            features.set(node, dim, T::from_f64_lossy(val));
        }
    }

    // labels.tsv
    let label_text = read_file(&dir.join("labels.tsv"))?;
    let mut labels = vec![usize::MAX; meta.num_nodes];
    for (lineno, line) in label_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
            return Err(Error::Parse {
                file: "labels.tsv".into(),
                line: lineno + 1,
                msg: "expected node_id<TAB>label".into(),
            });
        };
        let node = parse_usize(a, "labels.tsv", lineno + 1, "node id")?;
        let label = parse_usize(b, "labels.tsv", lineno + 1, "label")?;
        if node >= meta.num_nodes {
            return Err(Error::Parse {
                file: "labels.tsv".into(),
                line: lineno + 1,
                msg: format!("node id {node} outside [0, {})", meta.num_nodes),
            });
        }
        if label >= meta.num_classes {
            return Err(Error::Validation(format!(
                "node {node} has label {label} outside [0, {})",
                meta.num_classes
            )));
        }
        labels[node] = label;
    }
    if let Some(missing) = labels.iter().position(|&y| y == usize::MAX) {
        return Err(Error::Validation(format!(
            "node {missing} has no label in labels.tsv"
        )));
    }

    let split = load_split(&dir.join("split.json"))?;

    Graph::from_edges(
        meta.num_nodes,
        meta.num_classes,
        &edges,
        features,
        labels,
        split,
    )
}

/// Write a graph as a bundle directory (creates the directory if needed).
pub fn save_graph_bundle<T: Scalar>(dir: &Path, graph: &Graph<T>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let io_err = |source, path: &Path| Error::Io {
        path: path.to_path_buf(),
        source,
    };

    let meta = BundleMeta {
        num_nodes: graph.num_nodes,
        num_features: graph.features.cols(),
        num_classes: graph.num_classes,
    };
    let meta_path = dir.join("meta.json");
    fs::write(
        &meta_path,
        serde_json::to_string_pretty(&meta).expect("meta serializes"),
    )
    .map_err(|e| io_err(e, &meta_path))?;

    let edges_path = dir.join("edges.tsv");
    let mut edges = String::new();
    for (i, j, _) in graph.adjacency.iter_entries() {
        if i < j {
            edges.push_str(&format!("{i}\t{j}\n"));
        }
    }
    fs::write(&edges_path, edges).map_err(|e| io_err(e, &edges_path))?;

    let feat_path = dir.join("features.tsv");
    let mut f = std::io::BufWriter::new(
        fs::File::create(&feat_path).map_err(|e| io_err(e, &feat_path))?,
    );
    for i in 0..graph.num_nodes {
        let mut line = format!("{i}");
        for (j, &v) in graph.features.row(i).iter().enumerate() {
            if v != T::zero() {
                line.push_str(&format!("\t{j}:{}", v.to_f64_lossy()));
            }
        }
        line.push('\n');
        f.write_all(line.as_bytes())
            .map_err(|e| io_err(e, &feat_path))?;
    }
    f.flush().map_err(|e| io_err(e, &feat_path))?;

    let labels_path = dir.join("labels.tsv");
    let mut labels = String::new();
    for (i, &y) in graph.labels.iter().enumerate() {
        labels.push_str(&format!("{i}\t{y}\n"));
    }
    fs::write(&labels_path, labels).map_err(|e| io_err(e, &labels_path))?;

    save_split(&dir.join("split.json"), &graph.split)
}
