//! One-dimensional Gaussian quadrature rules (Golub–Welsch construction).
//!
//! Two weight functions are supported:
//!
//! * **Gauss–Legendre** on a finite interval `[a, b]` with weight `1`, used for
//!   time integrals such as `∫₀^{t_max} 𝓔(P_t f) dt`.
//! * **Gauss–Hermite** for the *standard normal* weight `(2π)^{-1/2} e^{-x²/2}`
//!   (probabilists' normalization, total mass 1), used for Gaussian
//!   expectations of polynomials.
//!
//! Nodes and weights are obtained from the symmetric tridiagonal Jacobi matrix
//! of the orthonormal recurrence: the nodes are its eigenvalues and the weights
//! are `μ₀ · v₀²` where `v₀` is the first component of the corresponding
//! normalized eigenvector and `μ₀` is the total mass of the weight function.
//! An order-`m` rule integrates polynomials of degree `≤ 2m − 1` exactly.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Nodes and weights of a one-dimensional quadrature rule.
///
/// Nodes are sorted ascending; weights are positive and sum to the total mass
/// of the underlying weight function (1 for Gauss–Hermite, `b − a` for
/// Gauss–Legendre on `[a, b]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature1d {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature1d {
    /// Quadrature nodes, ascending.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Quadrature weights, aligned with [`Self::nodes`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of nodes.
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `Σ_i w_i f(x_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// The `k`-th moment `Σ_i w_i x_i^k` of the discrete rule.
    pub fn moment(&self, k: u32) -> f64 {
        self.integrate(|x| x.powi(k as i32))
    }
}

/// Eigen-decomposes a symmetric tridiagonal Jacobi matrix given by its
/// diagonal and off-diagonal and returns `(nodes, first eigenvector rows)`.
fn golub_welsch(diag: &[f64], offdiag: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = diag.len();
    debug_assert_eq!(offdiag.len(), m.saturating_sub(1));
    let mut jacobi = DMatrix::<f64>::zeros(m, m);
    for (i, &a) in diag.iter().enumerate() {
        jacobi[(i, i)] = a;
    }
    for (i, &b) in offdiag.iter().enumerate() {
        jacobi[(i, i + 1)] = b;
        jacobi[(i + 1, i)] = b;
    }
    let eigen = jacobi.symmetric_eigen();
    // nalgebra does not promise sorted eigenvalues; sort nodes and carry the
    // squared first components along.
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|j| (eigen.eigenvalues[j], eigen.eigenvectors[(0, j)]))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let nodes = pairs.iter().map(|p| p.0).collect();
    let first_rows = pairs.iter().map(|p| p.1).collect();
    (nodes, first_rows)
}

/// Gauss–Hermite rule of the given order for the standard normal weight.
///
/// Weights sum to 1; the rule is exact for polynomial degree `≤ 2·order − 1`.
/// The Jacobi matrix of the orthonormal (probabilists') Hermite recurrence has
/// zero diagonal and off-diagonal `√k`.
pub fn gauss_hermite(order: usize) -> Result<Quadrature1d> {
    if order == 0 {
        return Err(Error::validation("quadrature order must be at least 1"));
    }
    let diag = vec![0.0; order];
    let offdiag: Vec<f64> = (1..order).map(|k| (k as f64).sqrt()).collect();
    let (nodes, first_rows) = golub_welsch(&diag, &offdiag);
    let weights = first_rows.iter().map(|&v0| v0 * v0).collect();
    Ok(Quadrature1d { nodes, weights })
}

/// Gauss–Legendre rule of the given order on `[a, b]` (weight 1, mass `b−a`).
///
/// Exact for polynomial degree `≤ 2·order − 1`. The Jacobi matrix of the
/// orthonormal Legendre recurrence on `[−1, 1]` has zero diagonal and
/// off-diagonal `k/√(4k² − 1)`; nodes and weights are affinely mapped onto
/// `[a, b]`.
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Result<Quadrature1d> {
    if order == 0 {
        return Err(Error::validation("quadrature order must be at least 1"));
    }
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::validation(format!(
            "invalid integration interval [{a}, {b}]: endpoints must be finite with a < b"
        )));
    }
    let diag = vec![0.0; order];
    let offdiag: Vec<f64> = (1..order)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let (ref_nodes, first_rows) = golub_welsch(&diag, &offdiag);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let nodes = ref_nodes.iter().map(|&x| mid + half * x).collect();
    // Mass on [−1, 1] is 2; the affine map scales it by (b−a)/2.
    let weights = first_rows.iter().map(|&v0| 2.0 * v0 * v0 * half).collect();
    Ok(Quadrature1d { nodes, weights })
}
