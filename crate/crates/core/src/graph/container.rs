//! Line-oriented text container for datasets.
//!
//! ```text
//! GRAPHS <count> FDIM <d_f> TASKS <M>
//! G <num_nodes> <num_edges>
//! S <train|val|test>          (optional, defaults to train)
//! E <u> <v> [gt flag per task] (num_edges lines)
//! X <d_f reals>                (num_nodes lines)
//! Y <node labels>              (optional)
//! L <graph labels>             (optional)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use diffnum::Tensor;

use super::{Dataset, Graph, Split};
use crate::error::{Result, TageError};

pub fn write_container_string(dataset: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "GRAPHS {} FDIM {} TASKS {}",
        dataset.len(),
        dataset.feature_dim(),
        dataset.num_tasks()
    );
    for (g, split) in dataset.graphs().iter().zip(dataset.splits()) {
        let _ = writeln!(out, "G {} {}", g.num_nodes(), g.num_edges());
        let _ = writeln!(out, "S {}", split.as_str());
        for (e, &(u, v)) in g.edges().iter().enumerate() {
            let _ = write!(out, "E {u} {v}");
            for task in g.ground_truth() {
                let _ = write!(out, " {}", u8::from(task[e]));
            }
            out.push('\n');
        }
        for i in 0..g.num_nodes() {
            out.push('X');
            for v in g.features().row_slice(i) {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        if let Some(labels) = g.node_labels() {
            out.push('Y');
            for l in labels {
                let _ = write!(out, " {l}");
            }
            out.push('\n');
        }
        if let Some(labels) = g.graph_labels() {
            out.push('L');
            for l in labels {
                let _ = write!(out, " {l}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_container(dataset: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, write_container_string(dataset))?;
    Ok(())
}

pub fn read_container(path: &Path) -> Result<Dataset> {
    read_container_str(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate().peekable(),
            last: 0,
        }
    }

    fn skip_blank(&mut self) {
        while let Some((_, l)) = self.inner.peek() {
            if l.trim().is_empty() {
                self.inner.next();
            } else {
                break;
            }
        }
    }

    fn peek_tag(&mut self) -> Option<&'a str> {
        self.skip_blank();
        self.inner.peek().and_then(|(_, l)| l.split_whitespace().next())
    }

    fn next_record(&mut self, tag: &str) -> Result<(usize, Vec<&'a str>)> {
        self.skip_blank();
        let Some((idx, line)) = self.inner.next() else {
            return Err(err(self.last + 1, format!("unexpected end of file, expected `{tag}`")));
        };
        let lineno = idx + 1;
        self.last = lineno;
        let mut parts = line.split_whitespace();
        let found = parts.next().unwrap_or("");
        if found != tag {
            return Err(err(lineno, format!("expected `{tag}`, found `{found}`")));
        }
        Ok((lineno, parts.collect()))
    }
}

fn err(line: usize, message: String) -> TageError {
    TageError::Parse { line, message }
}

fn int(line: usize, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| err(line, format!("expected non-negative integer, found `{s}`")))
}

fn real(line: usize, s: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| err(line, format!("expected real, found `{s}`")))?;
    if !v.is_finite() {
        return Err(err(line, format!("non-finite value `{s}`")));
    }
    Ok(v)
}

pub fn read_container_str(text: &str) -> Result<Dataset> {
    let mut lines = Lines::new(text);
    let (ln, header) = lines.next_record("GRAPHS")?;
    if header.len() != 5 || header[1] != "FDIM" || header[3] != "TASKS" {
        return Err(err(ln, "malformed header, expected `GRAPHS <n> FDIM <d> TASKS <m>`".into()));
    }
    let count = int(ln, header[0])?;
    let fdim = int(ln, header[2])?;
    let tasks = int(ln, header[4])?;

    let mut graphs = Vec::with_capacity(count);
    let mut splits = Vec::with_capacity(count);
    for _ in 0..count {
        let (gl, head) = lines.next_record("G")?;
        if head.len() != 2 {
            return Err(err(gl, "expected `G <num_nodes> <num_edges>`".into()));
        }
        let n = int(gl, head[0])?;
        let m = int(gl, head[1])?;

        let mut split = Split::Train;
        if lines.peek_tag() == Some("S") {
            let (sl, s) = lines.next_record("S")?;
            split = s
                .first()
                .and_then(|s| Split::parse(s))
                .ok_or_else(|| err(sl, "expected split train|val|test".into()))?;
        }

        let mut edges = Vec::with_capacity(m);
        let mut truth: Vec<Vec<bool>> = Vec::new();
        for e in 0..m {
            let (el, parts) = lines.next_record("E")?;
            if parts.len() < 2 {
                return Err(err(el, "expected `E <u> <v> [flags]`".into()));
            }
            let (u, v) = (int(el, parts[0])?, int(el, parts[1])?);
            if u >= n || v >= n {
                return Err(err(el, format!("edge endpoint out of range for {n} nodes")));
            }
            let flags = &parts[2..];
            if e == 0 && !flags.is_empty() {
                truth = vec![Vec::with_capacity(m); flags.len()];
            }
            if flags.len() != truth.len() || (!flags.is_empty() && flags.len() != tasks) {
                return Err(err(el, format!("expected {} ground-truth flags", truth.len().max(tasks))));
            }
            for (t, f) in flags.iter().enumerate() {
                truth[t].push(match *f {
                    "0" => false,
                    "1" => true,
                    other => return Err(err(el, format!("flag must be 0 or 1, found `{other}`"))),
                });
            }
            edges.push((u, v));
        }

        let mut features = Vec::with_capacity(n * fdim);
        for _ in 0..n {
            let (xl, parts) = lines.next_record("X")?;
            if parts.len() != fdim {
                return Err(err(xl, format!("expected {fdim} feature values, found {}", parts.len())));
            }
            for p in parts {
                features.push(real(xl, p)?);
            }
        }
        let features = Tensor::new(n, fdim, features)?;
        let mut graph = Graph::new(n, edges, features).map_err(|e| err(gl, e.to_string()))?;
        graph = graph.with_ground_truth(truth)?;

        if lines.peek_tag() == Some("Y") {
            let (yl, parts) = lines.next_record("Y")?;
            let labels = parts.iter().map(|p| int(yl, p)).collect::<Result<Vec<_>>>()?;
            graph = graph.with_node_labels(labels).map_err(|e| err(yl, e.to_string()))?;
        }
        if lines.peek_tag() == Some("L") {
            let (ll, parts) = lines.next_record("L")?;
            let labels = parts.iter().map(|p| int(ll, p)).collect::<Result<Vec<_>>>()?;
            graph = graph.with_graph_labels(labels);
        }
        graphs.push(graph);
        splits.push(split);
    }
    if let Some(tag) = lines.peek_tag() {
        let line = lines.inner.peek().map_or(0, |(i, _)| i + 1);
        return Err(err(line, format!("unexpected trailing record `{tag}`")));
    }
    Dataset::new(graphs, splits, tasks, fdim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dataset_round_trip() {
        let ds = Dataset::new(vec![], vec![], 2, 3).unwrap();
        let text = write_container_string(&ds);
        assert_eq!(text, "GRAPHS 0 FDIM 3 TASKS 2\n");
        assert_eq!(read_container_str(&text).unwrap(), ds);
    }

    #[test]
    fn endpoint_out_of_range_names_line() {
        let text = "GRAPHS 1 FDIM 1 TASKS 0\nG 2 1\nE 0 5\nX 1\nX 1\n";
        match read_container_str(text) {
            Err(TageError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_file() {
        let text = "GRAPHS 1 FDIM 1 TASKS 0\nG 2 1\nE 0 1\nX 1\n";
        assert!(matches!(read_container_str(text), Err(TageError::Parse { line: 5, .. })));
    }

    #[test]
    fn malformed_header() {
        assert!(matches!(
            read_container_str("GRAPHS 1 FEAT 2\n"),
            Err(TageError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn scientific_notation_features() {
        let text = "GRAPHS 1 FDIM 2 TASKS 1\nG 2 1\nS test\nE 0 1 1\nX 1e-3 -2.5E2\nX 0 1\nY 0 1\nL 1\n";
        let ds = read_container_str(text).unwrap();
        let g = &ds.graphs()[0];
        assert_eq!(g.features().get(0, 0), 1e-3);
        assert_eq!(g.features().get(0, 1), -250.0);
        assert_eq!(ds.splits(), &[Split::Test]);
        assert_eq!(g.ground_truth_for(0).unwrap(), &[true]);
        assert_eq!(g.node_labels().unwrap(), &[0, 1]);
        assert_eq!(g.graph_labels().unwrap(), &[1]);
    }
}
