use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::{GatHead, Head, PropagationConfig};
use crate::rng::stream_rng;

/// Number of output classes (inactive, active).
pub const CLASSES: usize = 2;

/// Shape of a model: everything the parameter count depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_width: usize,
    pub hidden: usize,
    pub classes: usize,
    pub head: Head,
    pub gat_heads: usize,
}

/// One named tensor inside the flat parameter vector, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

impl ModelSpec {
    pub fn new(input_width: usize, hidden: usize, pcfg: &PropagationConfig) -> Result<Self> {
        pcfg.validate()?;
        if input_width == 0 || hidden == 0 {
            return Err(Error::InvalidParameter("input width and hidden width must be >= 1".into()));
        }
        let gat_heads = if pcfg.head == Head::Gat { pcfg.gat_heads } else { 1 };
        if pcfg.head == Head::Gat && !hidden.is_multiple_of(gat_heads) {
            return Err(Error::InvalidParameter(format!(
                "hidden width {hidden} is not divisible by {gat_heads} attention heads"
            )));
        }
        Ok(ModelSpec {
            input_width,
            hidden,
            classes: CLASSES,
            head: pcfg.head,
            gat_heads,
        })
    }

    /// Per-head width of the first attention layer.
    pub fn head_width(&self) -> usize {
        self.hidden / self.gat_heads
    }

    /// Tensors in flat-view order.
    ///
    /// Dense heads: `w1 (F x h)`, `b1`, `w2 (h x c)`, `b2`.
    /// GAT: `w1_k (F x d)`, `a1_k (2d)` per head, `b1 (h)`, then
    /// `w2_k (h x c)`, `a2_k (2c)` per head, `b2 (c)`.
    pub fn segments(&self) -> Vec<Segment> {
        let (f, h, c) = (self.input_width, self.hidden, self.classes);
        let mut shapes: Vec<(String, usize, usize)> = Vec::new();
        if self.head == Head::Gat {
            let d = self.head_width();
            for k in 0..self.gat_heads {
                shapes.push((format!("w1_{k}"), f, d));
                shapes.push((format!("a1_{k}"), 1, 2 * d));
            }
            shapes.push(("b1".into(), 1, h));
            for k in 0..self.gat_heads {
                shapes.push((format!("w2_{k}"), h, c));
                shapes.push((format!("a2_{k}"), 1, 2 * c));
            }
            shapes.push(("b2".into(), 1, c));
        } else {
            shapes.push(("w1".into(), f, h));
            shapes.push(("b1".into(), 1, h));
            shapes.push(("w2".into(), h, c));
            shapes.push(("b2".into(), 1, c));
        }
        let mut offset = 0;
        shapes
            .into_iter()
            .map(|(name, rows, cols)| {
                let s = Segment { name, rows, cols, offset };
                offset += rows * cols;
                s
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.segments().iter().map(Segment::len).sum()
    }
}

/// All trainable values behind one contiguous vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    spec: ModelSpec,
    values: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(spec: ModelSpec) -> Self {
        ModelParams { values: vec![0.0; spec.param_count()], spec }
    }

    pub fn from_flat(spec: ModelSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.param_count() {
            return Err(Error::Dimension(format!(
                "model expects {} parameters, got {}",
                spec.param_count(),
                values.len()
            )));
        }
        Ok(ModelParams { spec, values })
    }

    /// Weights uniform in `+-1/sqrt(fan_in)`, biases zero.
    pub fn init(spec: ModelSpec, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 0);
        let mut p = ModelParams::zeros(spec);
        for seg in spec.segments() {
            if seg.name.starts_with('b') {
                continue;
            }
            let fan_in = if seg.name.starts_with('a') { seg.cols } else { seg.rows };
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in &mut p.values[seg.range()] {
                *v = rng.gen_range(-bound..bound);
            }
        }
        p
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn flat_view(&self) -> &[f64] {
        &self.values
    }

    pub fn flat_view_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.values
    }

    pub fn segment(&self, name: &str) -> Option<DMatrix<f64>> {
        self.spec
            .segments()
            .into_iter()
            .find(|s| s.name == name)
            .map(|s| DMatrix::from_row_slice(s.rows, s.cols, &self.values[s.range()]))
    }

    /// Errors unless the model was built for `width` input features.
    pub fn check_input_width(&self, width: usize) -> Result<()> {
        if width != self.spec.input_width {
            return Err(Error::Dimension(format!(
                "model expects {} input features, data has {}",
                self.spec.input_width, width
            )));
        }
        Ok(())
    }

    pub(crate) fn unpack(&self) -> Weights {
        Weights::unpack(&self.spec, &self.values)
    }
}

/// Parameters (or gradients) as matrices.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Weights {
    Dense {
        w1: DMatrix<f64>,
        b1: DMatrix<f64>,
        w2: DMatrix<f64>,
        b2: DMatrix<f64>,
    },
    Gat {
        l1: Vec<GatHead>,
        b1: DMatrix<f64>,
        l2: Vec<GatHead>,
        b2: DMatrix<f64>,
    },
}

impl Weights {
    pub(crate) fn unpack(spec: &ModelSpec, values: &[f64]) -> Self {
        let segs = spec.segments();
        let mat = |s: &Segment| DMatrix::from_row_slice(s.rows, s.cols, &values[s.range()]);
        if spec.head == Head::Gat {
            let k = spec.gat_heads;
            let head = |w: &Segment, a: &Segment| GatHead {
                w: mat(w),
                a: values[a.range()].to_vec(),
            };
            let l1 = (0..k).map(|i| head(&segs[2 * i], &segs[2 * i + 1])).collect();
            let b1 = mat(&segs[2 * k]);
            let base = 2 * k + 1;
            let l2 = (0..k).map(|i| head(&segs[base + 2 * i], &segs[base + 2 * i + 1])).collect();
            let b2 = mat(&segs[base + 2 * k]);
            Weights::Gat { l1, b1, l2, b2 }
        } else {
            Weights::Dense {
                w1: mat(&segs[0]),
                b1: mat(&segs[1]),
                w2: mat(&segs[2]),
                b2: mat(&segs[3]),
            }
        }
    }

    /// Flat vector in segment order.
    pub(crate) fn pack(&self) -> Vec<f64> {
        fn push(out: &mut Vec<f64>, m: &DMatrix<f64>) {
            out.extend(m.transpose().iter());
        }
        let mut out = Vec::new();
        match self {
            Weights::Dense { w1, b1, w2, b2 } => {
                for m in [w1, b1, w2, b2] {
                    push(&mut out, m);
                }
            }
            Weights::Gat { l1, b1, l2, b2 } => {
                for h in l1 {
                    push(&mut out, &h.w);
                    out.extend_from_slice(&h.a);
                }
                push(&mut out, b1);
                for h in l2 {
                    push(&mut out, &h.w);
                    out.extend_from_slice(&h.a);
                }
                push(&mut out, b2);
            }
        }
        out
    }
}
