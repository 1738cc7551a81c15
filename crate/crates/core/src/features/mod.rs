//! Per-node feature catalog: structural vertex features, ego activation
//! features and random-walk embeddings, plus the matrix that carries them.

mod centrality;
mod deepwalk;
mod ego;
mod structure;

pub use centrality::{
    components, eigenvector_centrality, eigenvector_centrality_with_cap, hits, hits_with_cap,
    pagerank, pagerank_with_cap, DEFAULT_DAMPING, DEFAULT_MAX_ITER, EIGEN_MAX_ITER,
};
pub use deepwalk::{deepwalk_embed, DeepWalkConfig};
pub use ego::{ego_activation_features, ego_activation_features_of, EgoActivationFeatures};
pub use structure::{clustering_coefficient, coreness, degree_reciprocal, triangles};

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph};

/// Column names of [`vertex_features`], in order.
pub const VERTEX_FEATURES: [&str; 8] = [
    "pagerank",
    "eigenvector",
    "degree_reciprocal",
    "coreness",
    "clustering",
    "hub",
    "authority",
    "degree",
];

/// Per-column `(mean, std)` applied by standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    column_names: Vec<String>,
    standardization: Option<Standardization>,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        if values.ncols() != column_names.len() {
            return Err(Error::Dimension(format!(
                "{} columns but {} names",
                values.ncols(),
                column_names.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::InvalidParameter(format!(
                "non-finite feature at row {r}, column {:?}",
                column_names[c]
            )));
        }
        Ok(FeatureMatrix {
            values,
            column_names,
            standardization: None,
        })
    }

    /// Single column built from per-node scores.
    pub fn column(name: &str, scores: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(scores.len(), 1, scores), vec![name.to_string()])
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Fits per-column mean and population std on `rows`. A std below 1e-12
    /// is clamped to 1 so constant columns map to zero.
    pub fn fit_standardization(&self, rows: &[usize]) -> Result<Standardization> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter("standardization needs at least one row".into()));
        }
        let k = rows.len() as f64;
        let mut mean = Vec::with_capacity(self.ncols());
        let mut std = Vec::with_capacity(self.ncols());
        for c in 0..self.ncols() {
            let m = rows.iter().map(|&r| self.values[(r, c)]).sum::<f64>() / k;
            let var = rows.iter().map(|&r| (self.values[(r, c)] - m).powi(2)).sum::<f64>() / k;
            let s = var.sqrt();
            mean.push(m);
            std.push(if s < 1e-12 { 1.0 } else { s });
        }
        Ok(Standardization { mean, std })
    }

    pub fn apply_standardization(&self, stats: Standardization) -> Result<FeatureMatrix> {
        if stats.mean.len() != self.ncols() || stats.std.len() != self.ncols() {
            return Err(Error::Dimension(format!(
                "standardization has {} columns, matrix has {}",
                stats.mean.len(),
                self.ncols()
            )));
        }
        let mut values = self.values.clone();
        for c in 0..self.ncols() {
            for r in 0..self.nrows() {
                values[(r, c)] = (values[(r, c)] - stats.mean[c]) / stats.std[c];
            }
        }
        Ok(FeatureMatrix {
            values,
            column_names: self.column_names.clone(),
            standardization: Some(stats),
        })
    }

    /// Writes a CSV keyed by external id: header `id,<column names>`.
    pub fn write_csv(&self, g: &Graph, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if g.node_count() != self.nrows() {
            return Err(Error::Dimension(format!(
                "graph has {} nodes, features have {} rows",
                g.node_count(),
                self.nrows()
            )));
        }
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        let header: Vec<String> = std::iter::once("id".to_string())
            .chain(self.column_names.iter().cloned())
            .map(|s| csv_field(&s))
            .collect();
        writeln!(w, "{}", header.join(",")).map_err(io)?;
        for r in 0..self.nrows() {
            write!(w, "{}", csv_field(g.id(r))).map_err(io)?;
            for c in 0..self.ncols() {
                write!(w, ",{}", self.values[(r, c)]).map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// RFC 4180 quoting: fields with commas, quotes or newlines are quoted.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Horizontal concatenation of per-node blocks. When `standardize_on` is
/// given, each column is standardized with statistics fit on those rows only.
pub fn assemble_features(parts: &[FeatureMatrix], standardize_on: Option<&[usize]>) -> Result<FeatureMatrix> {
    let Some(first) = parts.first() else {
        return Err(Error::InvalidParameter("no feature blocks to assemble".into()));
    };
    let n = first.nrows();
    if let Some(bad) = parts.iter().find(|p| p.nrows() != n) {
        return Err(Error::Dimension(format!(
            "feature block {:?} has {} rows, expected {n}",
            bad.column_names.first().map(String::as_str).unwrap_or(""),
            bad.nrows()
        )));
    }
    let width: usize = parts.iter().map(FeatureMatrix::ncols).sum();
    let mut values = DMatrix::zeros(n, width);
    let mut names = Vec::with_capacity(width);
    let mut c0 = 0;
    for p in parts {
        values.view_mut((0, c0), (n, p.ncols())).copy_from(&p.values);
        names.extend(p.column_names.iter().cloned());
        c0 += p.ncols();
    }
    let out = FeatureMatrix::new(values, names)?;
    match standardize_on {
        Some(rows) => {
            let stats = out.fit_standardization(rows)?;
            out.apply_standardization(stats)
        }
        None => Ok(out),
    }
}

/// The eight structural vertex features, in [`VERTEX_FEATURES`] order.
pub fn vertex_features(g: &Graph, tol: f64) -> Result<FeatureMatrix> {
    let adj = normalize_adjacency(g);
    let pr = pagerank(&adj, DEFAULT_DAMPING, tol)?;
    let eig = eigenvector_centrality(g, tol)?;
    let rec = degree_reciprocal(g);
    let core: Vec<f64> = coreness(g).into_iter().map(|c| c as f64).collect();
    let clus = clustering_coefficient(g);
    let (hub, auth): (Vec<f64>, Vec<f64>) = hits(g, tol)?.into_iter().unzip();
    let deg: Vec<f64> = (0..g.node_count()).map(|i| g.degree(i) as f64).collect();
    let cols = [pr, eig, rec, core, clus, hub, auth, deg];
    let parts = VERTEX_FEATURES
        .iter()
        .zip(cols.iter())
        .map(|(name, col)| FeatureMatrix::column(name, col))
        .collect::<Result<Vec<_>>>()?;
    assemble_features(&parts, None)
}

/// Loaded embedding matrix plus the non-fatal issues met while reading.
#[derive(Debug, Clone)]
pub struct LoadedEmbeddings {
    pub features: FeatureMatrix,
    pub warnings: Vec<String>,
}

/// Reads `id<TAB>v1<TAB>...<TAB>vd` rows and aligns them to `g`'s dense
/// order. Unknown ids are skipped and missing nodes get zero rows; both are
/// reported as warnings.
pub fn load_embeddings(path: impl AsRef<Path>, g: &Graph) -> Result<LoadedEmbeddings> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut dim: Option<usize> = None;
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; g.node_count()];
    let mut warnings = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or("").trim();
        let vals = fields
            .map(|f| f.trim().parse::<f64>().map_err(|_| bad(format!("{f:?} is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.is_empty() {
            return Err(bad("row has no values".into()));
        }
        match dim {
            None => dim = Some(vals.len()),
            Some(d) if d != vals.len() => {
                return Err(bad(format!("row has {} values, earlier rows have {d}", vals.len())))
            }
            _ => {}
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite value".into()));
        }
        match g.index_of(id) {
            Some(i) => rows[i] = Some(vals),
            None => warnings.push(format!("line {}: unknown node id {id:?} skipped", lineno + 1)),
        }
    }
    let dim = dim.ok_or_else(|| Error::EmptyInput(path.to_path_buf()))?;
    let mut values = DMatrix::zeros(g.node_count(), dim);
    for (i, row) in rows.into_iter().enumerate() {
        match row {
            Some(v) => values.row_mut(i).copy_from_slice(&v),
            None => warnings.push(format!("node {:?} missing; filled with zeros", g.id(i))),
        }
    }
    for w in &warnings {
        log::warn!("{}: {w}", path.display());
    }
    let names = (0..dim).map(|d| format!("emb_{d}")).collect();
    Ok(LoadedEmbeddings {
        features: FeatureMatrix::new(values, names)?,
        warnings,
    })
}
