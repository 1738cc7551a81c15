use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Graph, MAX_NODES};
use crate::error::{Error, Result};

/// Reads a tab-separated edge list (`src<TAB>dst[<TAB>epoch_seconds]`).
///
/// Lines starting with `#` and blank lines are skipped. The result is always
/// symmetrized; `directed_hint` only changes what gets logged. Activation
/// starts all-inactive.
pub fn load_edge_list(path: impl AsRef<Path>, directed_hint: bool) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut stamps: Vec<(usize, usize, i64)> = Vec::new();

    let mut intern = |id: &str, ids: &mut Vec<String>| -> Result<usize> {
        if let Some(&i) = index.get(id) {
            return Ok(i);
        }
        if ids.len() >= MAX_NODES {
            return Err(Error::NodeOverflow(MAX_NODES));
        }
        let i = ids.len();
        index.insert(id.to_string(), i);
        ids.push(id.to_string());
        Ok(i)
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        if fields.len() < 2 || fields.len() > 3 {
            return Err(bad(format!(
                "expected 2 or 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let (src, dst) = (fields[0].trim(), fields[1].trim());
        if src.is_empty() || dst.is_empty() {
            return Err(bad("empty node id".into()));
        }
        let u = intern(src, &mut ids)?;
        let v = intern(dst, &mut ids)?;
        if let Some(ts) = fields.get(2) {
            let ts: i64 = ts
                .trim()
                .parse()
                .map_err(|_| bad(format!("timestamp {ts:?} is not an integer")))?;
            stamps.push((u, v, ts));
        }
        edges.push((u, v));
    }
    if edges.is_empty() {
        return Err(Error::EmptyInput(path.to_path_buf()));
    }
    if directed_hint {
        log::info!("{}: directed input symmetrized", path.display());
    }
    let mut g = Graph::with_ids(ids, &edges)?;
    if !stamps.is_empty() {
        let mut ts: Vec<Option<i64>> = vec![None; g.node_count()];
        for (u, v, t) in stamps {
            for w in [u, v] {
                ts[w] = Some(ts[w].map_or(t, |cur: i64| cur.min(t)));
            }
        }
        g.set_timestamps(ts);
    }
    Ok(g)
}

/// Writes each undirected edge once as `id_u<TAB>id_v`. Isolated nodes are
/// not representable in this format and are dropped.
pub fn write_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (u, v) in g.edges() {
        writeln!(w, "{}\t{}", g.id(u), g.id(v)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads an activation file: one external id per line, `#` comments allowed.
pub fn load_activation_ids(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_simple_edge_lists() {
        let dir = tempfile::tempdir().unwrap();
        let g = load_edge_list(write(&dir, "a", "0\t1\n1\t2"), false).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert_eq!(g.active_count(), 0);

        let g = load_edge_list(write(&dir, "b", "0\t1\n1\t0"), true).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);

        let g = load_edge_list(write(&dir, "c", "# tri\na\tb\nb\tc\nc\ta\n"), false).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.ids(), &["a", "b", "c"]);
    }

    #[test]
    fn timestamps_take_earliest_incident_edge() {
        let dir = tempfile::tempdir().unwrap();
        let g = load_edge_list(write(&dir, "t", "x\ty\t50\ny\tz\t20\n"), false).unwrap();
        assert_eq!(g.timestamps().unwrap(), &[Some(50), Some(20), Some(20)]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "bad", "0\t1\n# ok\n1 2\n");
        match load_edge_list(&p, false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let p = write(&dir, "ts", "0\t1\tnoon\n");
        assert!(matches!(load_edge_list(&p, false), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "e", "# nothing here\n\n");
        assert!(matches!(load_edge_list(&p, false), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn write_then_reload_preserves_adjacency() {
        let dir = tempfile::tempdir().unwrap();
        let g = Graph::with_ids(
            ["p", "q", "r", "s"].map(String::from).to_vec(),
            &[(0, 2), (1, 3), (1, 2), (0, 3)],
        )
        .unwrap();
        let p = dir.path().join("rt.tsv");
        write_edge_list(&g, &p).unwrap();
        let h = load_edge_list(&p, false).unwrap();
        let as_ids = |g: &Graph| -> BTreeSet<(String, String)> {
            g.edges()
                .map(|(u, v)| {
                    let (a, b) = (g.id(u).to_string(), g.id(v).to_string());
                    if a < b { (a, b) } else { (b, a) }
                })
                .collect()
        };
        assert_eq!(as_ids(&g), as_ids(&h));
    }

    #[test]
    fn activation_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "act", "# active\na\n\nc\n");
        assert_eq!(load_activation_ids(&p).unwrap(), vec!["a", "c"]);
    }
}
