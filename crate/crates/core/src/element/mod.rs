//! Lagrange reference elements of degree 1 and 2 on triangles and tetrahedra.

mod affine;
mod quadrature;

pub use affine::AffineMap;
pub use quadrature::{QuadratureRule, MAX_DEGREE as MAX_QUADRATURE_DEGREE};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElementError {
    #[error("unsupported element degree {0}, expected 1 or 2")]
    Degree(usize),
    #[error("unsupported dimension {0}, expected 2 or 3")]
    Dimension(usize),
    #[error("quadrature degree {0} not supported (max {max})", max = quadrature::MAX_DEGREE)]
    QuadratureDegree(usize),
    #[error("degenerate cell, det J = {0:e}")]
    Degenerate(f64),
}

const EDGES_2D: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
const EDGES_3D: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Nodal Lagrange basis on the reference simplex. Degree-2 nodes are the
/// vertices followed by the edge midpoints.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    dim: usize,
    degree: usize,
    /// Multi-index `alpha` of each node, `|alpha| = degree`; the node sits at
    /// barycentric coordinates `alpha / degree`.
    nodes: Vec<[usize; 4]>,
}

impl ReferenceElement {
    pub fn new(dim: usize, degree: usize) -> Result<Self, ElementError> {
        if dim != 2 && dim != 3 {
            return Err(ElementError::Dimension(dim));
        }
        let mut nodes = Vec::new();
        for i in 0..=dim {
            let mut a = [0; 4];
            a[i] = degree;
            nodes.push(a);
        }
        match degree {
            1 => {}
            2 => {
                let edges: &[(usize, usize)] = if dim == 2 { &EDGES_2D } else { &EDGES_3D };
                for &(a, b) in edges {
                    let mut m = [0; 4];
                    m[a] = 1;
                    m[b] = 1;
                    nodes.push(m);
                }
            }
            r => return Err(ElementError::Degree(r)),
        }
        Ok(Self { dim, degree, nodes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_multi_indices(&self) -> &[[usize; 4]] {
        &self.nodes
    }

    pub fn node_barycentric(&self, i: usize) -> [f64; 4] {
        let r = self.degree as f64;
        let a = self.nodes[i];
        [
            a[0] as f64 / r,
            a[1] as f64 / r,
            a[2] as f64 / r,
            a[3] as f64 / r,
        ]
    }

    /// Basis values and gradients (with respect to the reference coordinates
    /// `xi_k = lambda_{k+1}`) at a barycentric point.
    pub fn eval(&self, bary: &[f64]) -> (Vec<f64>, Vec<[f64; 3]>) {
        let mut values = vec![0.0; self.n_nodes()];
        let mut grads = vec![[0.0; 3]; self.n_nodes()];
        self.eval_into(bary, &mut values, &mut grads);
        (values, grads)
    }

    pub fn eval_into(&self, bary: &[f64], values: &mut [f64], grads: &mut [[f64; 3]]) {
        let d = self.dim;
        let lam = |i: usize| bary[i];
        let dlam = |i: usize| -> [f64; 3] {
            let mut g = [0.0; 3];
            if i == 0 {
                g[..d].iter_mut().for_each(|x| *x = -1.0);
            } else {
                g[i - 1] = 1.0;
            }
            g
        };
        match self.degree {
            1 => {
                for i in 0..=d {
                    values[i] = lam(i);
                    grads[i] = dlam(i);
                }
            }
            _ => {
                for i in 0..=d {
                    let l = lam(i);
                    values[i] = l * (2.0 * l - 1.0);
                    let s = 4.0 * l - 1.0;
                    let g = dlam(i);
                    grads[i] = [s * g[0], s * g[1], s * g[2]];
                }
                let edges: &[(usize, usize)] = if d == 2 { &EDGES_2D } else { &EDGES_3D };
                for (e, &(a, b)) in edges.iter().enumerate() {
                    let k = d + 1 + e;
                    let (la, lb) = (lam(a), lam(b));
                    let (ga, gb) = (dlam(a), dlam(b));
                    values[k] = 4.0 * la * lb;
                    for c in 0..3 {
                        grads[k][c] = 4.0 * (lb * ga[c] + la * gb[c]);
                    }
                }
            }
        }
    }
}

/// Free-function form of [`ReferenceElement::eval`].
pub fn reference_basis(
    dim: usize,
    degree: usize,
    bary: &[f64],
) -> Result<(Vec<f64>, Vec<[f64; 3]>), ElementError> {
    Ok(ReferenceElement::new(dim, degree)?.eval(bary))
}

/// Basis values and reference gradients tabulated at every point of a rule.
#[derive(Debug, Clone)]
pub struct Tabulation {
    n_basis: usize,
    values: Vec<f64>,
    grads: Vec<[f64; 3]>,
    rule: QuadratureRule,
}

impl Tabulation {
    pub fn new(element: &ReferenceElement, rule: QuadratureRule) -> Self {
        let nb = element.n_nodes();
        let mut values = vec![0.0; nb * rule.len()];
        let mut grads = vec![[0.0; 3]; nb * rule.len()];
        for (q, p) in rule.points().iter().enumerate() {
            element.eval_into(
                p,
                &mut values[q * nb..(q + 1) * nb],
                &mut grads[q * nb..(q + 1) * nb],
            );
        }
        Self {
            n_basis: nb,
            values,
            grads,
            rule,
        }
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn values(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_basis..(q + 1) * self.n_basis]
    }

    pub fn ref_grads(&self, q: usize) -> &[[f64; 3]] {
        &self.grads[q * self.n_basis..(q + 1) * self.n_basis]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_bary(dim: usize, seed: u64) -> [f64; 4] {
        // small LCG, enough for spreading points around
        let mut s = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut b = [0.0; 4];
        let mut total = 0.0;
        for x in b.iter_mut().take(dim + 1) {
            *x = -next().ln();
            total += *x;
        }
        for x in b.iter_mut().take(dim + 1) {
            *x /= total;
        }
        b
    }

    #[test]
    fn node_counts() {
        assert_eq!(ReferenceElement::new(2, 1).unwrap().n_nodes(), 3);
        assert_eq!(ReferenceElement::new(2, 2).unwrap().n_nodes(), 6);
        assert_eq!(ReferenceElement::new(3, 1).unwrap().n_nodes(), 4);
        assert_eq!(ReferenceElement::new(3, 2).unwrap().n_nodes(), 10);
        assert_eq!(
            ReferenceElement::new(3, 3).unwrap_err(),
            ElementError::Degree(3)
        );
        assert!(reference_basis(2, 0, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn kronecker_at_nodes() {
        for dim in [2, 3] {
            for r in [1, 2] {
                let el = ReferenceElement::new(dim, r).unwrap();
                for i in 0..el.n_nodes() {
                    let (vals, _) = el.eval(&el.node_barycentric(i));
                    for (j, v) in vals.iter().enumerate() {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!(
                            (v - want).abs() < 1e-15,
                            "dim {dim} r {r} node {i} basis {j}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_and_zero_gradient_sum() {
        for dim in [2, 3] {
            for r in [1, 2] {
                let el = ReferenceElement::new(dim, r).unwrap();
                for s in 0..50 {
                    let (vals, grads) = el.eval(&random_bary(dim, s));
                    assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-14);
                    for c in 0..dim {
                        let g: f64 = grads.iter().map(|g| g[c]).sum();
                        assert!(g.abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let el = ReferenceElement::new(3, 2).unwrap();
        let b = random_bary(3, 7);
        let (_, grads) = el.eval(&b);
        let eps = 1e-6;
        for k in 0..3 {
            // moving xi_k shifts lambda_{k+1} up and lambda_0 down
            let mut bp = b;
            bp[k + 1] += eps;
            bp[0] -= eps;
            let mut bm = b;
            bm[k + 1] -= eps;
            bm[0] += eps;
            let (vp, _) = el.eval(&bp);
            let (vm, _) = el.eval(&bm);
            for i in 0..el.n_nodes() {
                let fd = (vp[i] - vm[i]) / (2.0 * eps);
                assert!((fd - grads[i][k]).abs() < 1e-8);
            }
        }
    }
}
