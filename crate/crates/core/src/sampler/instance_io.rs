//! JSON-lines container for instance sets: one header line carrying the
//! provenance, then one self-contained record per instance.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{EgoInstance, InstanceSet, Provenance, Split};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph};

const FORMAT: &str = "ppinf-instances";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    count: usize,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Record {
    ego_index: usize,
    edges: Vec<[usize; 2]>,
    activation: Vec<u8>,
    features: Vec<Vec<f64>>,
    label: u8,
    split: Split,
}

impl Record {
    fn from_instance(inst: &EgoInstance, split: Split) -> Self {
        Record {
            ego_index: inst.ego_index,
            edges: inst.edges.iter().map(|&(u, v)| [u, v]).collect(),
            activation: inst.neighbor_activation.iter().map(|&a| a as u8).collect(),
            features: (0..inst.features.nrows())
                .map(|r| inst.features.row(r).iter().copied().collect())
                .collect(),
            label: inst.label as u8,
            split,
        }
    }

    fn into_instance(self) -> std::result::Result<(EgoInstance, Split), String> {
        let m = self.activation.len();
        if self.ego_index >= m {
            return Err(format!("ego_index {} out of range for {m} nodes", self.ego_index));
        }
        if self.features.len() != m {
            return Err(format!("{} feature rows for {m} nodes", self.features.len()));
        }
        let width = self.features.first().map_or(0, Vec::len);
        if self.features.iter().any(|r| r.len() != width) {
            return Err("ragged feature rows".into());
        }
        if self.label > 1 || self.activation.iter().any(|&a| a > 1) {
            return Err("flags must be 0 or 1".into());
        }
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let sub = Graph::from_edges(m, &edges).map_err(|e| e.to_string())?;
        let flat: Vec<f64> = self.features.into_iter().flatten().collect();
        Ok((
            EgoInstance {
                edges: sub.edges().collect(),
                adjacency: normalize_adjacency(&sub),
                ego_index: self.ego_index,
                neighbor_activation: self.activation.iter().map(|&a| a == 1).collect(),
                features: DMatrix::from_row_slice(m, width, &flat),
                label: self.label == 1,
            },
            self.split,
        ))
    }
}

pub fn write_instances(set: &InstanceSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        count: set.len(),
        provenance: set.provenance.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    for (inst, &split) in set.instances.iter().zip(&set.splits) {
        serde_json::to_writer(&mut w, &Record::from_instance(inst, split))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_instances(path: impl AsRef<Path>) -> Result<InstanceSet> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let header: Header = match lines.next() {
        Some((_, l)) => {
            let l = l.map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&l).map_err(|e| parse_err(1, e.to_string()))?
        }
        None => return Err(Error::EmptyInput(path.to_path_buf())),
    };
    if header.format != FORMAT || header.version != VERSION {
        return Err(parse_err(
            1,
            format!("unsupported container {:?} version {}", header.format, header.version),
        ));
    }
    let mut instances = Vec::with_capacity(header.count);
    let mut splits = Vec::with_capacity(header.count);
    for (i, l) in lines {
        let l = l.map_err(|e| Error::io(path, e))?;
        if l.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&l).map_err(|e| parse_err(i + 1, e.to_string()))?;
        let (inst, split) = rec.into_instance().map_err(|m| parse_err(i + 1, m))?;
        instances.push(inst);
        splits.push(split);
    }
    if instances.len() != header.count {
        return Err(parse_err(
            1,
            format!("header promises {} records, found {}", header.count, instances.len()),
        ));
    }
    Ok(InstanceSet {
        instances,
        splits,
        provenance: header.provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::vertex_features;
    use crate::sampler::{generate_dataset, simulate_cascade, DatasetConfig};

    fn sample_set(seed: u64) -> InstanceSet {
        let mut e = Vec::new();
        for i in 0..80 {
            e.push((i, (i + 1) % 80));
            e.push((i, (i + 11) % 80));
        }
        let g = Graph::from_edges(80, &e).unwrap();
        let c = simulate_cascade(&g, &[0, 40], 0.4, 10, seed).unwrap();
        let f = vertex_features(&g, 1e-12).unwrap();
        let cfg = DatasetConfig {
            sample_size: 8,
            seed,
            ..DatasetConfig::default()
        };
        generate_dataset(&c.snapshot(&g, 1), &c.snapshot(&g, 2), &f, &cfg).unwrap()
    }

    #[test]
    fn reload_is_bit_exact_and_rewrite_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let set = sample_set(4);
        let p = dir.path().join("a.jsonl");
        write_instances(&set, &p).unwrap();
        let back = read_instances(&p).unwrap();
        assert_eq!(back, set);
        let q = dir.path().join("b.jsonl");
        write_instances(&back, &q).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap());
    }

    #[test]
    fn same_seed_same_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let (p, q) = (dir.path().join("a"), dir.path().join("b"));
        write_instances(&sample_set(9), &p).unwrap();
        write_instances(&sample_set(9), &q).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap());
    }

    #[test]
    fn corrupt_record_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.jsonl");
        write_instances(&sample_set(1), &p).unwrap();
        let mut text = fs::read_to_string(&p).unwrap();
        text.push_str("{\"ego_index\": 3}\n");
        fs::write(&p, text).unwrap();
        assert!(matches!(read_instances(&p), Err(Error::Parse { .. })));
    }
}
