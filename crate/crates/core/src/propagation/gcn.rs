use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative at a pre-activation value; ReLU uses 0 at the kink.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn apply_matrix(self, m: &mut DMatrix<f64>) {
        if self != Activation::Identity {
            m.iter_mut().for_each(|v| *v = self.apply(*v));
        }
    }
}

/// `act(A H W)`.
pub fn gcn_layer(
    adj: &NormalizedAdjacency,
    h: &DMatrix<f64>,
    w: &DMatrix<f64>,
    activation: Activation,
) -> Result<DMatrix<f64>> {
    if h.nrows() != adj.dim() {
        return Err(Error::Dimension(format!(
            "features have {} rows, adjacency is {}x{}",
            h.nrows(),
            adj.dim(),
            adj.dim()
        )));
    }
    if h.ncols() != w.nrows() {
        return Err(Error::Dimension(format!(
            "features are {} wide, weight expects {}",
            h.ncols(),
            w.nrows()
        )));
    }
    let mut out = adj.mul_dense(&(h * w));
    activation.apply_matrix(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, Graph};

    #[test]
    fn examples() {
        let adj = normalize_adjacency(&Graph::from_edges(2, &[(0, 1)]).unwrap());
        let h = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let out = gcn_layer(&adj, &h, &DMatrix::identity(1, 1), Activation::Identity).unwrap();
        assert_eq!(out.as_slice(), &[0.5, 0.5]);

        let adj = normalize_adjacency(&Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap());
        let h = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 3.0, -1.0, 0.0]);
        let out = gcn_layer(&adj, &h, &DMatrix::identity(2, 2), Activation::Identity).unwrap();
        assert_eq!(out, adj.to_dense() * &h);
        let zero = gcn_layer(&adj, &DMatrix::zeros(3, 2), &h.transpose(), Activation::Relu).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let relu = gcn_layer(&adj, &h, &DMatrix::identity(2, 2), Activation::Relu).unwrap();
        assert!(relu.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let adj = normalize_adjacency(&Graph::from_edges(2, &[(0, 1)]).unwrap());
        let h = DMatrix::zeros(2, 3);
        assert!(matches!(
            gcn_layer(&adj, &h, &DMatrix::zeros(2, 1), Activation::Identity),
            Err(Error::Dimension(_))
        ));
        assert!(gcn_layer(&adj, &DMatrix::zeros(3, 1), &DMatrix::zeros(1, 1), Activation::Identity).is_err());
    }
}
