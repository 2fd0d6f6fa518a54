//! Gauss-Legendre nodes and weights on [-1, 1].
//!
//! Nodes are the zeros of P_n, found by Newton iteration from the Chebyshev
//! initial guess; weights are 2 / ((1-x²) P_n'(x)²). An m-point rule is
//! exact for polynomials of degree 2m-1.

use crate::specfn::legendre_p_and_deriv;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1);
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        for i in 0..m {
            // i-th root, counted from x = 1 downwards
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_p_and_deriv(m, x).expect("node stays in [-1,1]");
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_p_and_deriv(m, x).expect("node stays in [-1,1]");
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Zeros of P_n in (-1, 1), i.e. the n-point Gauss-Legendre nodes. Used as
/// the zonal-field oracle: P_n(cos θ) vanishes exactly on these latitudes.
pub fn legendre_zeros(n: usize) -> Vec<f64> {
    GaussLegendre::new(n).nodes
}
