//! Lagrange finite element spaces on a structured mesh.
//!
//! Scalar spaces carry homogeneous Dirichlet constraints (`H^1_0`); vector
//! spaces are componentwise Lagrange with vanishing tangential trace
//! (`A x n = 0`): on a face with normal `±e_i` every component except `i` is
//! constrained, and masks from several faces are unioned at shared nodes.
//! Constrained unknowns are eliminated; a [`FieldVector`] stores only the free
//! ones.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use thiserror::Error;

use crate::element::{AffineMap, ElementError, ReferenceElement};
use crate::mesh::{Mesh, Point};
use crate::sparse::{Pattern, Scalar};

/// Marks a constrained `(node, component)` slot in the dof map.
const CONSTRAINED: usize = usize::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error("value {value:e} at constrained node {node} (component {component}) violates the boundary condition")]
    BoundaryViolation {
        node: usize,
        component: usize,
        value: f64,
    },
    #[error("field lives on a different mesh")]
    MeshMismatch,
    #[error("{0}")]
    KindMismatch(&'static str),
    #[error("coefficient vector has length {got}, space has {expected} dofs")]
    Length { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    ScalarReal,
    ScalarComplex,
    Vector,
}

/// Whether the boundary constraints are imposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// `u = 0` for scalar spaces, `u x n = 0` for vector spaces.
    Constrained,
    /// No constraints; used by tests that need the full nodal space.
    Free,
}

/// How [`FeSpace`] interpolation treats nonzero values at constrained nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCheck {
    /// Report values above `1e-10` as [`SpaceError::BoundaryViolation`].
    Strict,
    /// Skip the check; exact manufactured solutions satisfy the constraints
    /// up to roundoff.
    Trusted,
}

pub const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    element: ReferenceElement,
    kind: FieldKind,
    boundary: Boundary,
    n_comp: usize,
    nodes: Vec<Point>,
    /// Node indices per cell, `element.n_nodes()` per cell.
    cell_nodes: Vec<usize>,
    /// Per node, bit `c` set when component `c` is constrained.
    masks: Vec<u8>,
    /// `node * n_comp + c` -> dof, or [`CONSTRAINED`].
    dof_map: Vec<usize>,
    free: Vec<(usize, usize)>,
    pattern: OnceLock<Arc<Pattern>>,
}

impl FeSpace {
    pub fn scalar(
        mesh: Arc<Mesh>,
        degree: usize,
        complex: bool,
        boundary: Boundary,
    ) -> Result<Arc<Self>, SpaceError> {
        let kind = if complex {
            FieldKind::ScalarComplex
        } else {
            FieldKind::ScalarReal
        };
        Self::build(mesh, degree, kind, boundary)
    }

    pub fn vector(
        mesh: Arc<Mesh>,
        degree: usize,
        boundary: Boundary,
    ) -> Result<Arc<Self>, SpaceError> {
        Self::build(mesh, degree, FieldKind::Vector, boundary)
    }

    fn build(
        mesh: Arc<Mesh>,
        degree: usize,
        kind: FieldKind,
        boundary: Boundary,
    ) -> Result<Arc<Self>, SpaceError> {
        let dim = mesh.dim();
        let element = ReferenceElement::new(dim, degree)?;
        let n_comp = if kind == FieldKind::Vector { dim } else { 1 };
        let lattice_max = degree * mesh.subdivisions();
        let side = lattice_max + 1;

        // Nodes are keyed by their position on the degree-refined lattice,
        // `sum_i alpha_i g_i` for node multi-index alpha and vertex grid g.
        let nl = element.n_nodes();
        let mut keys: Vec<[usize; 3]> = Vec::with_capacity(mesh.n_cells() * nl);
        for c in 0..mesh.n_cells() {
            let verts = mesh.cell(c);
            for alpha in element.node_multi_indices() {
                let mut lat = [0usize; 3];
                for (k, &v) in verts.iter().enumerate() {
                    let g = mesh.grid_coords(v);
                    for i in 0..dim {
                        lat[i] += alpha[k] * g[i];
                    }
                }
                keys.push(lat);
            }
        }
        let linear = |l: &[usize; 3]| l[0] + side * (l[1] + side * l[2]);
        let mut unique: Vec<usize> = keys.iter().map(linear).collect();
        unique.sort_unstable();
        unique.dedup();
        let id_of: HashMap<usize, usize> =
            unique.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let cell_nodes: Vec<usize> = keys.iter().map(|l| id_of[&linear(l)]).collect();

        let mut nodes = vec![[0.0; 3]; unique.len()];
        let mut masks = vec![0u8; unique.len()];
        for (l, &id) in keys.iter().zip(&cell_nodes) {
            let mut p = [0.0; 3];
            let mut mask = 0u8;
            for i in 0..dim {
                p[i] = l[i] as f64 / lattice_max as f64;
                let on_face = l[i] == 0 || l[i] == lattice_max;
                if on_face && boundary == Boundary::Constrained {
                    mask |= match kind {
                        FieldKind::Vector => ((1u8 << dim) - 1) & !(1u8 << i),
                        _ => 1,
                    };
                }
            }
            nodes[id] = p;
            masks[id] = mask;
        }

        let mut dof_map = vec![CONSTRAINED; nodes.len() * n_comp];
        let mut free = Vec::new();
        for node in 0..nodes.len() {
            for c in 0..n_comp {
                if masks[node] & (1 << c) == 0 {
                    dof_map[node * n_comp + c] = free.len();
                    free.push((node, c));
                }
            }
        }

        Ok(Arc::new(Self {
            mesh,
            element,
            kind,
            boundary,
            n_comp,
            nodes,
            cell_nodes,
            masks,
            dof_map,
            free,
            pattern: OnceLock::new(),
        }))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn element(&self) -> &ReferenceElement {
        &self.element
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// 1 for scalar spaces, `dim` for vector spaces.
    pub fn n_components(&self) -> usize {
        self.n_comp
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, n: usize) -> &Point {
        &self.nodes[n]
    }

    pub fn n_dofs(&self) -> usize {
        self.free.len()
    }

    /// Local nodes per cell.
    pub fn n_local_nodes(&self) -> usize {
        self.element.n_nodes()
    }

    /// Local unknown slots per cell (`nodes * components`).
    pub fn n_local(&self) -> usize {
        self.element.n_nodes() * self.n_comp
    }

    pub fn cell_nodes(&self, c: usize) -> &[usize] {
        let nl = self.element.n_nodes();
        &self.cell_nodes[c * nl..(c + 1) * nl]
    }

    pub fn is_constrained(&self, node: usize, component: usize) -> bool {
        self.masks[node] & (1 << component) != 0
    }

    /// The constrained-component bit mask of a node.
    pub fn constraint_mask(&self, node: usize) -> u8 {
        self.masks[node]
    }

    pub fn dof(&self, node: usize, component: usize) -> Option<usize> {
        let d = self.dof_map[node * self.n_comp + component];
        (d != CONSTRAINED).then_some(d)
    }

    /// The `(node, component)` pair of a free dof.
    pub fn dof_owner(&self, dof: usize) -> (usize, usize) {
        self.free[dof]
    }

    /// Global dofs of the local slots `node_local * n_comp + c` of a cell.
    pub fn cell_dofs(&self, c: usize) -> impl Iterator<Item = Option<usize>> + '_ {
        self.cell_nodes(c)
            .iter()
            .flat_map(move |&n| (0..self.n_comp).map(move |k| self.dof(n, k)))
    }

    /// Free-dof coupling pattern (dofs sharing a cell).
    pub fn pattern(&self) -> Arc<Pattern> {
        self.pattern
            .get_or_init(|| {
                let mut rows: Vec<Vec<usize>> = vec![Vec::new(); self.n_dofs()];
                let mut local = Vec::with_capacity(self.n_local());
                for c in 0..self.mesh.n_cells() {
                    local.clear();
                    local.extend(self.cell_dofs(c).flatten());
                    for &r in &local {
                        rows[r].extend_from_slice(&local);
                    }
                }
                Arc::new(Pattern::from_rows(self.n_dofs(), rows))
            })
            .clone()
    }

    pub fn affine_map(&self, c: usize) -> AffineMap {
        AffineMap::new(self.dim(), &self.mesh.cell_points(c))
            .expect("structured cells are never degenerate")
    }

    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    fn expect_scalar<T: Scalar>(&self) -> Result<(), SpaceError> {
        match (self.kind, T::IS_COMPLEX) {
            (FieldKind::Vector, _) => {
                Err(SpaceError::KindMismatch("scalar field on a vector space"))
            }
            (FieldKind::ScalarReal, true) => Err(SpaceError::KindMismatch(
                "complex coefficients on a real space",
            )),
            (FieldKind::ScalarComplex, false) => Err(SpaceError::KindMismatch(
                "real coefficients on a complex space",
            )),
            _ => Ok(()),
        }
    }
}

/// Nodal interpolant of a scalar function.
pub fn interpolate_scalar<T: Scalar>(
    space: &Arc<FeSpace>,
    f: impl Fn(&Point) -> T,
    check: BoundaryCheck,
) -> Result<FieldVector<T>, SpaceError> {
    space.expect_scalar::<T>()?;
    let mut coeffs = vec![T::zero(); space.n_dofs()];
    for node in 0..space.n_nodes() {
        let v = f(space.node(node));
        match space.dof(node, 0) {
            Some(d) => coeffs[d] = v,
            None => check_boundary(check, node, 0, v.abs())?,
        }
    }
    Ok(FieldVector {
        space: space.clone(),
        coeffs,
    })
}

/// Componentwise nodal interpolant of a vector function.
pub fn interpolate_vector(
    space: &Arc<FeSpace>,
    f: impl Fn(&Point) -> Point,
    check: BoundaryCheck,
) -> Result<FieldVector<f64>, SpaceError> {
    if space.kind != FieldKind::Vector {
        return Err(SpaceError::KindMismatch("vector field on a scalar space"));
    }
    let mut coeffs = vec![0.0; space.n_dofs()];
    for node in 0..space.n_nodes() {
        let v = f(space.node(node));
        for (c, &vc) in v.iter().enumerate().take(space.n_comp) {
            match space.dof(node, c) {
                Some(d) => coeffs[d] = vc,
                None => check_boundary(check, node, c, vc.abs())?,
            }
        }
    }
    Ok(FieldVector {
        space: space.clone(),
        coeffs,
    })
}

fn check_boundary(
    check: BoundaryCheck,
    node: usize,
    component: usize,
    value: f64,
) -> Result<(), SpaceError> {
    if check == BoundaryCheck::Strict && value > BOUNDARY_TOL {
        return Err(SpaceError::BoundaryViolation {
            node,
            component,
            value,
        });
    }
    Ok(())
}

/// Value and gradient of a (possibly vector) field at a point;
/// `grad[c][i] = d u_c / d x_i`. Unused components are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue<T> {
    pub value: [T; 3],
    pub grad: [[T; 3]; 3],
}

/// Coefficients over the free dofs of a space. Constrained slots evaluate
/// as zero.
#[derive(Debug, Clone)]
pub struct FieldVector<T> {
    space: Arc<FeSpace>,
    coeffs: Vec<T>,
}

impl<T: Scalar> FieldVector<T> {
    pub fn zeros(space: &Arc<FeSpace>) -> Self {
        Self {
            space: space.clone(),
            coeffs: vec![T::zero(); space.n_dofs()],
        }
    }

    pub fn from_coefficients(space: &Arc<FeSpace>, coeffs: Vec<T>) -> Result<Self, SpaceError> {
        if coeffs.len() != space.n_dofs() {
            return Err(SpaceError::Length {
                got: coeffs.len(),
                expected: space.n_dofs(),
            });
        }
        if space.kind != FieldKind::Vector {
            space.expect_scalar::<T>()?;
        }
        Ok(Self {
            space: space.clone(),
            coeffs,
        })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn into_coefficients(self) -> Vec<T> {
        self.coeffs
    }

    /// `a * self + b * other`, both on the same space.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        assert!(
            Arc::ptr_eq(&self.space, &other.space),
            "combine: different spaces"
        );
        Self {
            space: self.space.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        }
    }

    /// Local coefficients of a cell, slot `node_local * n_comp + c`, with
    /// constrained slots set to zero.
    pub fn cell_coefficients(&self, cell: usize, out: &mut Vec<T>) {
        out.clear();
        out.extend(
            self.space
                .cell_dofs(cell)
                .map(|d| d.map_or(T::zero(), |d| self.coeffs[d])),
        );
    }

    /// Evaluates the field at a barycentric point of a cell.
    pub fn evaluate(&self, cell: usize, bary: &[f64]) -> PointValue<T> {
        let space = &*self.space;
        let (vals, ref_grads) = space.element.eval(bary);
        let map = space.affine_map(cell);
        let mut local = Vec::new();
        self.cell_coefficients(cell, &mut local);
        let mut out = PointValue {
            value: [T::zero(); 3],
            grad: [[T::zero(); 3]; 3],
        };
        let nc = space.n_comp;
        for (a, (phi, g)) in vals.iter().zip(&ref_grads).enumerate() {
            let gp = map.push_gradient(g);
            for c in 0..nc {
                let u = local[a * nc + c];
                out.value[c] += u * T::from_real(*phi);
                for i in 0..space.dim() {
                    out.grad[c][i] += u * T::from_real(gp[i]);
                }
            }
        }
        out
    }
}

impl FieldVector<Complex64> {
    /// Squared modulus of the coefficients; used for field checksums.
    pub fn coefficient_norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(dim: usize, m: usize) -> Arc<Mesh> {
        Arc::new(Mesh::build_structured(dim, m).unwrap())
    }

    #[test]
    fn dirichlet_free_counts() {
        let s = FeSpace::scalar(mesh(2, 2), 1, false, Boundary::Constrained).unwrap();
        assert_eq!(s.n_dofs(), 1);
        let s = FeSpace::scalar(mesh(3, 2), 1, true, Boundary::Constrained).unwrap();
        assert_eq!(s.n_dofs(), 1);
        let s = FeSpace::scalar(mesh(2, 2), 2, false, Boundary::Constrained).unwrap();
        assert_eq!(s.n_dofs(), 9);
        for (dim, m, r) in [(2, 5, 1), (2, 3, 2), (3, 3, 2), (3, 4, 1)] {
            let s = FeSpace::scalar(mesh(dim, m), r, false, Boundary::Constrained).unwrap();
            assert_eq!(s.n_dofs(), (r * m - 1).pow(dim as u32));
            assert_eq!(s.n_nodes(), (r * m + 1).pow(dim as u32));
        }
    }

    #[test]
    fn vector_masks() {
        let s = FeSpace::vector(mesh(3, 2), 1, Boundary::Constrained).unwrap();
        let find = |p: Point| (0..s.n_nodes()).find(|&n| *s.node(n) == p).unwrap();
        let interior = find([0.5, 0.5, 0.5]);
        assert_eq!(s.constraint_mask(interior), 0);
        let face = find([0.0, 0.5, 0.5]);
        assert!(!s.is_constrained(face, 0));
        assert!(s.is_constrained(face, 1) && s.is_constrained(face, 2));
        let edge = find([0.0, 0.0, 0.5]);
        assert_eq!(s.constraint_mask(edge), 0b111);

        let s2 = FeSpace::vector(mesh(2, 2), 1, Boundary::Constrained).unwrap();
        let n = (0..s2.n_nodes())
            .find(|&n| *s2.node(n) == [1.0, 0.5, 0.0])
            .unwrap();
        assert!(!s2.is_constrained(n, 0) && s2.is_constrained(n, 1));
    }

    #[test]
    fn dof_numbering_is_a_bijection() {
        let s = FeSpace::vector(mesh(3, 2), 2, Boundary::Constrained).unwrap();
        let mut seen = vec![false; s.n_dofs()];
        for node in 0..s.n_nodes() {
            for c in 0..3 {
                if let Some(d) = s.dof(node, c) {
                    assert!(!seen[d]);
                    seen[d] = true;
                    assert_eq!(s.dof_owner(d), (node, c));
                }
            }
        }
        assert!(seen.iter().all(|&x| x));
    }

    #[test]
    fn strict_interpolation_flags_boundary_values() {
        let s = FeSpace::scalar(mesh(2, 2), 1, false, Boundary::Constrained).unwrap();
        let err = interpolate_scalar(&s, |_| 1.0, BoundaryCheck::Strict).unwrap_err();
        assert!(matches!(err, SpaceError::BoundaryViolation { .. }));
        assert!(interpolate_scalar(&s, |_| 1.0, BoundaryCheck::Trusted).is_ok());
        let bubble = |p: &Point| p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]);
        let f = interpolate_scalar(&s, bubble, BoundaryCheck::Strict).unwrap();
        assert_eq!(f.coefficients(), &[1.0 / 16.0]);
    }

    #[test]
    fn kind_mismatch_is_reported() {
        let s = FeSpace::scalar(mesh(2, 2), 1, true, Boundary::Free).unwrap();
        assert!(interpolate_scalar(&s, |_| 1.0f64, BoundaryCheck::Strict).is_err());
        let v = FeSpace::vector(mesh(2, 2), 1, Boundary::Free).unwrap();
        assert!(interpolate_scalar(&v, |_| 1.0f64, BoundaryCheck::Strict).is_err());
        assert!(interpolate_vector(&s, |_| [0.0; 3], BoundaryCheck::Strict).is_err());
    }

    #[test]
    fn zero_field_evaluates_to_zero() {
        let s = FeSpace::vector(mesh(3, 2), 2, Boundary::Constrained).unwrap();
        let f = FieldVector::<f64>::zeros(&s);
        let pv = f.evaluate(3, &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(pv.value, [0.0; 3]);
        assert_eq!(pv.grad, [[0.0; 3]; 3]);
    }

    #[test]
    fn p1_reproduces_linear_functions() {
        let s = FeSpace::scalar(mesh(2, 3), 1, false, Boundary::Free).unwrap();
        let f = interpolate_scalar(&s, |p| p[0], BoundaryCheck::Strict).unwrap();
        for c in 0..s.mesh().n_cells() {
            let b = [0.2, 0.5, 0.3, 0.0];
            let x = s.affine_map(c).map_bary(&b);
            let pv = f.evaluate(c, &b);
            assert!((pv.value[0] - x[0]).abs() < 1e-13);
            assert!((pv.grad[0][0] - 1.0).abs() < 1e-12 && pv.grad[0][1].abs() < 1e-12);
        }
    }

    #[test]
    fn p2_gradient_of_square_at_centroid() {
        let s = FeSpace::scalar(mesh(3, 2), 2, false, Boundary::Free).unwrap();
        let f = interpolate_scalar(&s, |p| p[0] * p[0], BoundaryCheck::Strict).unwrap();
        let b = [0.25; 4];
        for c in 0..s.mesh().n_cells() {
            let x = s.affine_map(c).map_bary(&b);
            let pv = f.evaluate(c, &b);
            assert!((pv.value[0] - x[0] * x[0]).abs() < 1e-12);
            assert!((pv.grad[0][0] - 2.0 * x[0]).abs() < 1e-12);
            assert!(pv.grad[0][1].abs() < 1e-12 && pv.grad[0][2].abs() < 1e-12);
        }
    }
}
