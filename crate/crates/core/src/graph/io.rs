//! Plain-text dataset format.
//!
//! ```text
//! # comment
//! N F C
//! <node_id> <label | -1 | l1,l2,...> f_0 ... f_{F-1}     (N lines)
//! EDGES
//! <i> <j>                                                 (any number)
//! SPLIT                                                   (optional)
//! train|val|test|none                                     (N lines)
//! ```
//!
//! A dataset is multi-label when any label field contains a comma.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Graph, Labels, Split};
use crate::error::{DgiError, Result};
use crate::tensor::DenseMatrix;

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_dataset(&text, path)
}

enum RawLabel {
    None,
    One(usize),
    Many(Vec<usize>),
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Iterator for Lines<'a> {
    type Item = (usize, &'a str);

    fn next(&mut self) -> Option<Self::Item> {
        for (i, raw) in self.inner.by_ref() {
            let content = raw.split('#').next().unwrap_or("").trim();
            if !content.is_empty() {
                return Some((i + 1, content));
            }
        }
        None
    }
}

pub fn parse_dataset(text: &str, source: &Path) -> Result<Graph> {
    let err = |line: usize, message: String| DgiError::Parse {
        path: PathBuf::from(source),
        line,
        message,
    };
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };

    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| err(hline, format!("header `{t}`: {e}"))))
        .collect::<Result<_>>()?;
    let [n, f, c] = dims[..] else {
        return Err(err(hline, format!("header must be `N F C`, got `{header}`")));
    };

    let mut features = DenseMatrix::zeros(n, f);
    let mut raw_labels: Vec<Option<RawLabel>> = (0..n).map(|_| None).collect();
    for _ in 0..n {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| err(0, format!("expected {n} node lines, file ended early")))?;
        let mut tokens = line.split_whitespace();
        let id_tok = tokens.next().unwrap_or_default();
        let id: usize = id_tok
            .parse()
            .map_err(|e| err(ln, format!("node id `{id_tok}`: {e}")))?;
        if id >= n {
            return Err(err(ln, format!("node id {id} out of range (N = {n})")));
        }
        if raw_labels[id].is_some() {
            return Err(err(ln, format!("node {id} defined twice")));
        }
        let label_tok = tokens
            .next()
            .ok_or_else(|| err(ln, "missing label field".into()))?;
        let parse_id = |t: &str| -> Result<usize> {
            let v: usize = t.parse().map_err(|e| err(ln, format!("label `{t}`: {e}")))?;
            if v >= c {
                return Err(err(ln, format!("label {v} out of range (C = {c})")));
            }
            Ok(v)
        };
        let label = if label_tok == "-1" {
            RawLabel::None
        } else if label_tok.contains(',') {
            let mut set = label_tok
                .split(',')
                .filter(|t| !t.is_empty())
                .map(parse_id)
                .collect::<Result<Vec<_>>>()?;
            set.sort_unstable();
            set.dedup();
            RawLabel::Many(set)
        } else {
            RawLabel::One(parse_id(label_tok)?)
        };
        raw_labels[id] = Some(label);

        let row = features.row_mut(id);
        let mut count = 0;
        for tok in tokens {
            if count == f {
                return Err(err(ln, format!("more than {f} feature values")));
            }
            row[count] = tok
                .parse()
                .map_err(|e| err(ln, format!("feature `{tok}`: {e}")))?;
            if !row[count].is_finite() {
                return Err(err(ln, format!("non-finite feature `{tok}`")));
            }
            count += 1;
        }
        if count != f {
            return Err(err(ln, format!("expected {f} feature values, found {count}")));
        }
    }

    match lines.next() {
        Some((_, "EDGES")) => {}
        Some((ln, other)) => return Err(err(ln, format!("expected `EDGES`, found `{other}`"))),
        None => return Err(err(0, "missing `EDGES` section".into())),
    }

    let mut edges = Vec::new();
    let mut split_lines = None;
    for (ln, line) in lines.by_ref() {
        if line == "SPLIT" {
            split_lines = Some(ln);
            break;
        }
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(err(ln, format!("edge line must be `i j`, got `{line}`")));
        };
        let parse = |t: &str| -> Result<usize> {
            let v: usize = t.parse().map_err(|e| err(ln, format!("edge endpoint `{t}`: {e}")))?;
            if v >= n {
                return Err(err(ln, format!("edge endpoint {v} out of range (N = {n})")));
            }
            Ok(v)
        };
        edges.push((parse(a)?, parse(b)?));
    }

    let mut graph = Graph::new(features, edges)?;

    let any_multi = raw_labels.iter().any(|l| matches!(l, Some(RawLabel::Many(_))));
    if c > 0 {
        let labels = if any_multi {
            Labels::Multi {
                num_classes: c,
                sets: raw_labels
                    .into_iter()
                    .map(|l| match l {
                        Some(RawLabel::One(v)) => vec![v],
                        Some(RawLabel::Many(s)) => s,
                        _ => Vec::new(),
                    })
                    .collect(),
            }
        } else {
            Labels::Single {
                num_classes: c,
                ids: raw_labels
                    .into_iter()
                    .map(|l| match l {
                        Some(RawLabel::One(v)) => Some(v),
                        _ => None,
                    })
                    .collect(),
            }
        };
        graph = graph.with_labels(labels)?;
    }

    if let Some(start) = split_lines {
        let mut split = Split::default();
        for node in 0..n {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| err(start, format!("SPLIT section needs {n} lines")))?;
            match line {
                "train" => split.train.push(node),
                "val" => split.val.push(node),
                "test" => split.test.push(node),
                "none" => {}
                other => return Err(err(ln, format!("unknown split tag `{other}`"))),
            }
        }
        if let Some((ln, extra)) = lines.next() {
            return Err(err(ln, format!("unexpected content after SPLIT: `{extra}`")));
        }
        graph = graph.with_split(split)?;
    }
    Ok(graph)
}

/// Serializes a graph in the dataset format. Feature values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_dataset(graph: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let n = graph.node_count();
    let c = graph.labels().map_or(0, Labels::num_classes);
    let mut out = String::new();
    let _ = writeln!(out, "{n} {} {c}", graph.feature_dim());
    for i in 0..n {
        let label = match graph.labels() {
            None => "-1".to_string(),
            Some(Labels::Single { ids, .. }) => ids[i].map_or("-1".into(), |v| v.to_string()),
            Some(Labels::Multi { sets, .. }) => {
                if sets[i].is_empty() {
                    "-1".into()
                } else {
                    // trailing comma keeps single-element sets multi-label
                    let mut s = sets[i].iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
                    if sets[i].len() == 1 {
                        s.push(',');
                    }
                    s
                }
            }
        };
        let _ = write!(out, "{i} {label}");
        for v in graph.features().row(i) {
            let _ = write!(out, " {v:?}");
        }
        out.push('\n');
    }
    out.push_str("EDGES\n");
    for (i, list) in graph.adjacency().iter().enumerate() {
        for &j in list.iter().filter(|&&j| j > i) {
            let _ = writeln!(out, "{i} {j}");
        }
    }
    if let Some(split) = graph.split() {
        let mut tags = vec!["none"; n];
        for &i in &split.train {
            tags[i] = "train";
        }
        for &i in &split.val {
            tags[i] = "val";
        }
        for &i in &split.test {
            tags[i] = "test";
        }
        out.push_str("SPLIT\n");
        for t in tags {
            out.push_str(t);
            out.push('\n');
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Graph> {
        parse_dataset(text, Path::new("inline"))
    }

    #[test]
    fn smallest_graph() {
        let g = parse("2 1 0\n0 -1 1.5\n1 -1 2\nEDGES\n0 1\n").unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert!(g.labels().is_none());
        assert_eq!(g.features().as_slice(), &[1.5, 2.0]);
    }

    #[test]
    fn out_of_range_edge_reports_line() {
        let e = parse("3 1 0\n0 -1 0\n1 -1 0\n2 -1 0\nEDGES\n0 5\n").unwrap_err();
        match e {
            DgiError::Parse { line, message, .. } => {
                assert_eq!(line, 6);
                assert!(message.contains("out of range"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_feature_reports_line() {
        let e = parse("# hi\n1 2 0\n0 -1 0 x\nEDGES\n").unwrap_err();
        assert!(matches!(e, DgiError::Parse { line: 3, .. }), "{e}");
    }

    #[test]
    fn duplicates_and_one_directional_edges() {
        let g = parse("3 1 2\n0 0 0\n1 1 0\n2 -1 0\nEDGES\n0 1\n1 0\n0 1\n2 1 # tail comment\n").unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(
            g.labels(),
            Some(&Labels::Single {
                num_classes: 2,
                ids: vec![Some(0), Some(1), None]
            })
        );
    }

    #[test]
    fn multi_label_and_split() {
        let text = "3 1 3\n0 0,2 1\n1 1 0\n2 -1 0\nEDGES\nSPLIT\ntrain\ntest\nnone\n";
        let g = parse(text).unwrap();
        assert_eq!(
            g.labels(),
            Some(&Labels::Multi {
                num_classes: 3,
                sets: vec![vec![0, 2], vec![1], vec![]]
            })
        );
        let s = g.split().unwrap();
        assert_eq!((s.train.clone(), s.val.clone(), s.test.clone()), (vec![0], vec![], vec![1]));
    }

    #[test]
    fn rejects_missing_sections() {
        assert!(parse("1 1 0\n0 -1 0\n").is_err());
        assert!(parse("2 1 0\n0 -1 0\n").is_err());
        assert!(parse("1 1 0\n0 -1 0\nEDGES\nSPLIT\nbogus\n").is_err());
        assert!(parse("1 1 1\n0 3 0\nEDGES\n").is_err());
    }

    #[test]
    fn write_then_read_is_lossless() {
        let text = "3 2 3\n0 0,2 0.1 -3e-9\n1 1, 2.5 0\n2 -1 0 1\nEDGES\n0 1\n1 2\nSPLIT\ntrain\nval\ntest\n";
        let g = parse(text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        write_dataset(&g, &p).unwrap();
        assert_eq!(load_dataset(&p).unwrap(), g);
    }
}
