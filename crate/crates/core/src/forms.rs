//! Assembly of the bilinear forms and load vectors of the scheme.
//!
//! Every matrix is assembled over the free dofs of one space and shares that
//! space's sparsity pattern, so matrices of the same space can be combined
//! entrywise. Nonlinear coefficients (`|psi_h|^2`, `|A_h|^2`, the current
//! `f(psi_h, psi_h)`) are evaluated pointwise at quadrature points.
//!
//! Cells are processed in fixed-size chunks in parallel; each chunk produces
//! its own contribution list and the lists are merged in chunk order, so the
//! result does not depend on the number of worker threads.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::element::{ElementError, QuadratureRule, Tabulation};
use crate::mesh::Point;
use crate::space::{FeSpace, FieldKind, FieldVector, PointValue};
use crate::sparse::{CsrMatrix, Scalar};

const CHUNK: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("spaces or fields are defined on different meshes")]
    MeshMismatch,
    #[error("wrong field kind: {0}")]
    Kind(&'static str),
    #[error(transparent)]
    Element(#[from] ElementError),
}

/// `2r + 2`: enough for products of degree-`r` bases with interpolated
/// nonlinear coefficients.
pub fn default_quadrature_degree(degree: usize) -> usize {
    2 * degree + 2
}

/// An assembled matrix together with a description of what produced it.
#[derive(Debug, Clone)]
pub struct AssembledOperator<T> {
    pub matrix: CsrMatrix<T>,
    pub form: &'static str,
    pub coefficients: Vec<&'static str>,
}

impl<T> AssembledOperator<T> {
    fn new(matrix: CsrMatrix<T>, form: &'static str, coefficients: Vec<&'static str>) -> Self {
        Self {
            matrix,
            form,
            coefficients,
        }
    }
}

/// Per-cell quadrature data: physical points, `|det J| w_q`, basis values and
/// physical basis gradients.
pub struct CellGeometry<'a> {
    pub cell: usize,
    pub n_basis: usize,
    pub tab: &'a Tabulation,
    pub points: Vec<Point>,
    pub jxw: Vec<f64>,
    grads: Vec<[f64; 3]>,
}

impl<'a> CellGeometry<'a> {
    pub(crate) fn new(space: &FeSpace, tab: &'a Tabulation, cell: usize) -> Self {
        let map = space.affine_map(cell);
        let rule = tab.rule();
        let nb = tab.n_basis();
        let mut grads = Vec::with_capacity(nb * rule.len());
        for q in 0..rule.len() {
            grads.extend(tab.ref_grads(q).iter().map(|g| map.push_gradient(g)));
        }
        Self {
            cell,
            n_basis: nb,
            tab,
            points: rule.points().iter().map(|b| map.map_bary(b)).collect(),
            jxw: rule.weights().iter().map(|w| w * map.abs_det()).collect(),
            grads,
        }
    }

    pub fn n_points(&self) -> usize {
        self.jxw.len()
    }

    #[inline]
    pub fn phi(&self, q: usize) -> &[f64] {
        self.tab.values(q)
    }

    #[inline]
    pub fn grad(&self, q: usize) -> &[[f64; 3]] {
        &self.grads[q * self.n_basis..(q + 1) * self.n_basis]
    }
}

/// A field tabulated on the quadrature rule of an assembly loop.
pub(crate) struct QpField<'f, T> {
    field: &'f FieldVector<T>,
    tab: Tabulation,
}

impl<'f, T: Scalar> QpField<'f, T> {
    pub(crate) fn new(field: &'f FieldVector<T>, rule: &QuadratureRule) -> Self {
        Self {
            field,
            tab: Tabulation::new(field.space().element(), rule.clone()),
        }
    }

    pub(crate) fn eval_cell(&self, cell: usize, out: &mut Vec<PointValue<T>>) {
        let space = self.field.space();
        let map = space.affine_map(cell);
        let nc = space.n_components();
        let dim = space.dim();
        let mut local = Vec::with_capacity(space.n_local());
        self.field.cell_coefficients(cell, &mut local);
        out.clear();
        for q in 0..self.tab.rule().len() {
            let mut pv = PointValue {
                value: [T::zero(); 3],
                grad: [[T::zero(); 3]; 3],
            };
            for (a, (phi, g)) in self
                .tab
                .values(q)
                .iter()
                .zip(self.tab.ref_grads(q))
                .enumerate()
            {
                let gp = map.push_gradient(g);
                for c in 0..nc {
                    let u = local[a * nc + c];
                    pv.value[c] += u * T::from_real(*phi);
                    for i in 0..dim {
                        pv.grad[c][i] += u * T::from_real(gp[i]);
                    }
                }
            }
            out.push(pv);
        }
    }
}

pub(crate) fn tabulate(space: &FeSpace, degree: usize) -> Result<Tabulation, FormError> {
    let rule = QuadratureRule::new(space.dim(), degree)?;
    Ok(Tabulation::new(space.element(), rule))
}

/// Generic cell loop for a matrix on `space x space`. The kernel fills the
/// dense local matrix, row = test slot, column = trial slot, slot =
/// `node_local * n_comp + component`.
pub fn assemble_matrix_with<T, K>(space: &FeSpace, tab: &Tabulation, kernel: K) -> CsrMatrix<T>
where
    T: Scalar,
    K: Fn(&CellGeometry, &mut [T]) + Sync,
{
    let pattern = space.pattern();
    let nl = space.n_local();
    let n_cells = space.mesh().n_cells();
    let chunks: Vec<Vec<(usize, T)>> = (0..n_cells.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut out = Vec::new();
            let mut local = vec![T::zero(); nl * nl];
            let mut dofs = Vec::with_capacity(nl);
            for cell in chunk * CHUNK..((chunk + 1) * CHUNK).min(n_cells) {
                local.iter_mut().for_each(|v| *v = T::zero());
                let geo = CellGeometry::new(space, tab, cell);
                kernel(&geo, &mut local);
                dofs.clear();
                dofs.extend(space.cell_dofs(cell));
                for (i, row) in dofs.iter().enumerate() {
                    let Some(row) = row else { continue };
                    for (j, col) in dofs.iter().enumerate() {
                        let Some(col) = col else { continue };
                        let pos = pattern
                            .find(*row, *col)
                            .expect("cell couplings are in the pattern");
                        out.push((pos, local[i * nl + j]));
                    }
                }
            }
            out
        })
        .collect();
    let mut matrix = CsrMatrix::zeros(pattern);
    let values = matrix.values_mut();
    for chunk in chunks {
        for (pos, v) in chunk {
            values[pos] += v;
        }
    }
    matrix
}

/// Generic cell loop for a load vector; the kernel fills one entry per
/// local slot.
pub fn assemble_vector_with<T, K>(space: &FeSpace, tab: &Tabulation, kernel: K) -> Vec<T>
where
    T: Scalar,
    K: Fn(&CellGeometry, &mut [T]) + Sync,
{
    let nl = space.n_local();
    let n_cells = space.mesh().n_cells();
    let chunks: Vec<Vec<(usize, T)>> = (0..n_cells.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut out = Vec::new();
            let mut local = vec![T::zero(); nl];
            for cell in chunk * CHUNK..((chunk + 1) * CHUNK).min(n_cells) {
                local.iter_mut().for_each(|v| *v = T::zero());
                let geo = CellGeometry::new(space, tab, cell);
                kernel(&geo, &mut local);
                for (i, d) in space.cell_dofs(cell).enumerate() {
                    if let Some(d) = d {
                        out.push((d, local[i]));
                    }
                }
            }
            out
        })
        .collect();
    let mut load = vec![T::zero(); space.n_dofs()];
    for chunk in chunks {
        for (d, v) in chunk {
            load[d] += v;
        }
    }
    load
}

/// `(u, v)`; block diagonal over components for vector spaces.
pub fn assemble_mass(
    space: &FeSpace,
    quad_degree: usize,
) -> Result<AssembledOperator<f64>, FormError> {
    assemble_weighted_mass(space, &Weight::Constant(1.0), quad_degree).map(|mut op| {
        op.form = "mass";
        op.coefficients.clear();
        op
    })
}

/// `(grad u, grad v)` on a scalar space.
pub fn assemble_stiffness(
    space: &FeSpace,
    quad_degree: usize,
) -> Result<AssembledOperator<f64>, FormError> {
    if space.kind() == FieldKind::Vector {
        return Err(FormError::Kind("stiffness expects a scalar space"));
    }
    let tab = tabulate(space, quad_degree)?;
    let nb = tab.n_basis();
    let m = assemble_matrix_with(space, &tab, |geo, local: &mut [f64]| {
        for q in 0..geo.n_points() {
            let w = geo.jxw[q];
            let g = geo.grad(q);
            for a in 0..nb {
                for b in 0..nb {
                    local[a * nb + b] += w * dot3(&g[a], &g[b]);
                }
            }
        }
    });
    Ok(AssembledOperator::new(m, "stiffness", vec![]))
}

/// `D(A, v) = (div A, div v) + (curl A, curl v)` on a vector space. In 2D the
/// curl is the scalar `d1 A2 - d2 A1`.
pub fn assemble_d(
    space: &FeSpace,
    quad_degree: usize,
) -> Result<AssembledOperator<f64>, FormError> {
    if space.kind() != FieldKind::Vector {
        return Err(FormError::Kind("D expects a vector space"));
    }
    let tab = tabulate(space, quad_degree)?;
    let nb = tab.n_basis();
    let d = space.dim();
    let nl = nb * d;
    let m = assemble_matrix_with(space, &tab, |geo, local: &mut [f64]| {
        for q in 0..geo.n_points() {
            let w = geo.jxw[q];
            let g = geo.grad(q);
            for a in 0..nb {
                for b in 0..nb {
                    let gg = dot3(&g[a], &g[b]);
                    for i in 0..d {
                        for j in 0..d {
                            // test phi_a e_i, trial phi_b e_j:
                            // div-div d_j phi_b d_i phi_a, curl-curl
                            // delta_ij grad.grad - d_i phi_b d_j phi_a
                            let mut v = g[b][j] * g[a][i] - g[b][i] * g[a][j];
                            if i == j {
                                v += gg;
                            }
                            local[(a * d + i) * nl + b * d + j] += w * v;
                        }
                    }
                }
            }
        }
    });
    Ok(AssembledOperator::new(m, "D", vec![]))
}

/// `B(A; psi, phi) = (grad psi, grad phi) + (|A|^2 psi, phi)
///   + i (phi^* grad psi - psi grad phi^*, A)` on a complex scalar space.
pub fn assemble_b(
    space: &FeSpace,
    a_field: &FieldVector<f64>,
    quad_degree: usize,
) -> Result<AssembledOperator<Complex64>, FormError> {
    if space.kind() != FieldKind::ScalarComplex {
        return Err(FormError::Kind("B expects a complex scalar space"));
    }
    if a_field.space().kind() != FieldKind::Vector {
        return Err(FormError::Kind("B expects a vector coefficient field"));
    }
    if !space.same_mesh(a_field.space()) {
        return Err(FormError::MeshMismatch);
    }
    let tab = tabulate(space, quad_degree)?;
    let nb = tab.n_basis();
    let a_qp = QpField::new(a_field, tab.rule());
    let m = assemble_matrix_with(space, &tab, |geo, local: &mut [Complex64]| {
        let mut avals = Vec::with_capacity(geo.n_points());
        a_qp.eval_cell(geo.cell, &mut avals);
        for q in 0..geo.n_points() {
            let w = geo.jxw[q];
            let phi = geo.phi(q);
            let g = geo.grad(q);
            let av = avals[q].value;
            let a2 = dot3(&av, &av);
            for a in 0..nb {
                let a_dot_ga = dot3(&av, &g[a]);
                for b in 0..nb {
                    let a_dot_gb = dot3(&av, &g[b]);
                    let re = dot3(&g[a], &g[b]) + a2 * phi[a] * phi[b];
                    let im = phi[a] * a_dot_gb - phi[b] * a_dot_ga;
                    local[a * nb + b] += Complex64::new(w * re, w * im);
                }
            }
        }
    });
    Ok(AssembledOperator::new(m, "B", vec!["A"]))
}

/// Pointwise weight of a weighted mass matrix.
pub enum Weight<'a> {
    Constant(f64),
    /// `|psi_h|^2`.
    Density(&'a FieldVector<Complex64>),
    /// `shift + phi_h`, e.g. `V0 + phi_bar`.
    ShiftedPotential {
        shift: f64,
        field: &'a FieldVector<f64>,
    },
    Function(&'a (dyn Fn(&Point) -> f64 + Sync)),
}

impl Weight<'_> {
    fn name(&self) -> &'static str {
        match self {
            Weight::Constant(_) => "constant",
            Weight::Density(_) => "|psi|^2",
            Weight::ShiftedPotential { .. } => "V0 + phi",
            Weight::Function(_) => "function",
        }
    }

    fn check(&self, space: &FeSpace) -> Result<(), FormError> {
        let other = match self {
            Weight::Density(f) => f.space(),
            Weight::ShiftedPotential { field, .. } => {
                if field.space().kind() != FieldKind::ScalarReal {
                    return Err(FormError::Kind(
                        "potential weight must be a real scalar field",
                    ));
                }
                field.space()
            }
            _ => return Ok(()),
        };
        if !space.same_mesh(other) {
            return Err(FormError::MeshMismatch);
        }
        Ok(())
    }
}

/// Weight values at the quadrature points of one cell.
struct WeightEval<'w> {
    weight: &'w Weight<'w>,
    density: Option<QpField<'w, Complex64>>,
    potential: Option<QpField<'w, f64>>,
}

impl<'w> WeightEval<'w> {
    fn new(weight: &'w Weight<'w>, rule: &QuadratureRule) -> Self {
        Self {
            weight,
            density: match weight {
                Weight::Density(f) => Some(QpField::new(f, rule)),
                _ => None,
            },
            potential: match weight {
                Weight::ShiftedPotential { field, .. } => Some(QpField::new(field, rule)),
                _ => None,
            },
        }
    }

    fn eval(&self, geo: &CellGeometry, out: &mut Vec<f64>) {
        out.clear();
        match self.weight {
            Weight::Constant(c) => out.extend(std::iter::repeat_n(*c, geo.n_points())),
            Weight::Function(f) => out.extend(geo.points.iter().map(|p| f(p))),
            Weight::Density(_) => {
                let mut vals = Vec::new();
                self.density
                    .as_ref()
                    .unwrap()
                    .eval_cell(geo.cell, &mut vals);
                out.extend(vals.iter().map(|v| v.value[0].norm_sqr()));
            }
            Weight::ShiftedPotential { shift, .. } => {
                let mut vals = Vec::new();
                self.potential
                    .as_ref()
                    .unwrap()
                    .eval_cell(geo.cell, &mut vals);
                out.extend(vals.iter().map(|v| shift + v.value[0]));
            }
        }
    }
}

/// `(w u, v)`; block diagonal over components for vector spaces.
pub fn assemble_weighted_mass(
    space: &FeSpace,
    weight: &Weight,
    quad_degree: usize,
) -> Result<AssembledOperator<f64>, FormError> {
    weight.check(space)?;
    let tab = tabulate(space, quad_degree)?;
    let nb = tab.n_basis();
    let nc = space.n_components();
    let nl = nb * nc;
    let eval = WeightEval::new(weight, tab.rule());
    let m = assemble_matrix_with(space, &tab, |geo, local: &mut [f64]| {
        let mut wq = Vec::with_capacity(geo.n_points());
        eval.eval(geo, &mut wq);
        for q in 0..geo.n_points() {
            let w = geo.jxw[q] * wq[q];
            let phi = geo.phi(q);
            for a in 0..nb {
                for b in 0..nb {
                    let v = w * phi[a] * phi[b];
                    for c in 0..nc {
                        local[(a * nc + c) * nl + b * nc + c] += v;
                    }
                }
            }
        }
    });
    Ok(AssembledOperator::new(
        m,
        "weighted mass",
        vec![weight.name()],
    ))
}

/// `(f(psi, psi), v)` with `f(psi, psi) = (i/2)(psi^* grad psi - psi grad psi^*)
/// = -Im(psi^* grad psi)`, a real vector field.
pub fn assemble_current_load(
    space: &FeSpace,
    psi: &FieldVector<Complex64>,
    quad_degree: usize,
) -> Result<Vec<f64>, FormError> {
    if space.kind() != FieldKind::Vector {
        return Err(FormError::Kind("current load expects a vector space"));
    }
    if !space.same_mesh(psi.space()) {
        return Err(FormError::MeshMismatch);
    }
    let tab = tabulate(space, quad_degree)?;
    let nb = tab.n_basis();
    let d = space.dim();
    let psi_qp = QpField::new(psi, tab.rule());
    Ok(assemble_vector_with(
        space,
        &tab,
        |geo, local: &mut [f64]| {
            let mut vals = Vec::with_capacity(geo.n_points());
            psi_qp.eval_cell(geo.cell, &mut vals);
            for q in 0..geo.n_points() {
                let u = vals[q].value[0];
                let cur = current_density(u, &vals[q].grad[0]);
                let phi = geo.phi(q);
                for a in 0..nb {
                    for c in 0..d {
                        local[a * d + c] += geo.jxw[q] * cur[c] * phi[a];
                    }
                }
            }
        },
    ))
}

/// `f(psi, psi)` at a point from the value and gradient of `psi`.
pub fn current_density(psi: Complex64, grad: &[Complex64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = -(psi.conj() * grad[i]).im;
    }
    out
}

/// `(|psi|^2, eta)` on a real scalar space.
pub fn assemble_density_load(
    space: &FeSpace,
    psi: &FieldVector<Complex64>,
    quad_degree: usize,
) -> Result<Vec<f64>, FormError> {
    if space.kind() != FieldKind::ScalarReal {
        return Err(FormError::Kind("density load expects a real scalar space"));
    }
    if !space.same_mesh(psi.space()) {
        return Err(FormError::MeshMismatch);
    }
    let tab = tabulate(space, quad_degree)?;
    let nb = tab.n_basis();
    let psi_qp = QpField::new(psi, tab.rule());
    Ok(assemble_vector_with(
        space,
        &tab,
        |geo, local: &mut [f64]| {
            let mut vals = Vec::with_capacity(geo.n_points());
            psi_qp.eval_cell(geo.cell, &mut vals);
            for q in 0..geo.n_points() {
                let rho = vals[q].value[0].norm_sqr();
                let phi = geo.phi(q);
                for a in 0..nb {
                    local[a] += geo.jxw[q] * rho * phi[a];
                }
            }
        },
    ))
}

/// `(s, v)` for a scalar source `s(x)` (real or complex).
pub fn assemble_source_load<T, F>(
    space: &FeSpace,
    source: F,
    quad_degree: usize,
) -> Result<Vec<T>, FormError>
where
    T: Scalar,
    F: Fn(&Point) -> T + Sync,
{
    if space.kind() == FieldKind::Vector {
        return Err(FormError::Kind("scalar source on a vector space"));
    }
    let tab = tabulate(space, quad_degree)?;
    let nb = tab.n_basis();
    Ok(assemble_vector_with(space, &tab, |geo, local: &mut [T]| {
        for q in 0..geo.n_points() {
            let s = source(&geo.points[q]);
            let phi = geo.phi(q);
            for a in 0..nb {
                local[a] += s * T::from_real(geo.jxw[q] * phi[a]);
            }
        }
    }))
}

/// `(g, v)` for a vector source `g(x)`.
pub fn assemble_vector_source_load<F>(
    space: &FeSpace,
    source: F,
    quad_degree: usize,
) -> Result<Vec<f64>, FormError>
where
    F: Fn(&Point) -> Point + Sync,
{
    if space.kind() != FieldKind::Vector {
        return Err(FormError::Kind("vector source on a scalar space"));
    }
    let tab = tabulate(space, quad_degree)?;
    let nb = tab.n_basis();
    let d = space.dim();
    Ok(assemble_vector_with(
        space,
        &tab,
        |geo, local: &mut [f64]| {
            for q in 0..geo.n_points() {
                let s = source(&geo.points[q]);
                let phi = geo.phi(q);
                for a in 0..nb {
                    for c in 0..d {
                        local[a * d + c] += geo.jxw[q] * s[c] * phi[a];
                    }
                }
            }
        },
    ))
}

/// `u^H M u` for a field and a mass matrix of its space.
pub fn mass_norm_sqr<T: Scalar>(mass: &CsrMatrix<f64>, u: &[T]) -> f64 {
    mass.triplets()
        .map(|(r, c, m)| (u[r].conj() * u[c]).re() * m)
        .sum()
}

#[inline]
pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::mesh::Mesh;
    use crate::space::{interpolate_scalar, interpolate_vector, Boundary, BoundaryCheck};

    fn mesh(dim: usize, m: usize) -> Arc<Mesh> {
        Arc::new(Mesh::build_structured(dim, m).unwrap())
    }

    #[test]
    fn single_triangle_p1_mass() {
        // Entries touching (1,0) come from a single triangle of area 1/2,
        // local matrix |T|/12 [[2,1,1],[1,2,1],[1,1,2]].
        let s = FeSpace::scalar(mesh(2, 1), 1, false, Boundary::Free).unwrap();
        let m = assemble_mass(&s, 2).unwrap().matrix;
        let area = 0.5;
        let v = (0..s.n_nodes())
            .find(|&n| *s.node(n) == [1.0, 0.0, 0.0])
            .unwrap();
        let d = s.dof(v, 0).unwrap();
        assert!((m.get(d, d) - area / 12.0 * 2.0).abs() < 1e-15);
        let w = (0..s.n_nodes())
            .find(|&n| *s.node(n) == [0.0, 0.0, 0.0])
            .unwrap();
        assert!((m.get(d, s.dof(w, 0).unwrap()) - area / 12.0).abs() < 1e-15);
    }

    #[test]
    fn constant_weight_reproduces_mass() {
        let s = FeSpace::vector(mesh(3, 2), 2, Boundary::Constrained).unwrap();
        let m = assemble_mass(&s, 6).unwrap().matrix;
        let w = assemble_weighted_mass(&s, &Weight::Constant(1.0), 6)
            .unwrap()
            .matrix;
        for (a, b) in m.values().iter().zip(w.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        let z = assemble_weighted_mass(&s, &Weight::Constant(0.0), 6)
            .unwrap()
            .matrix;
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn b_with_zero_field_is_stiffness() {
        let m = mesh(2, 3);
        let s = FeSpace::scalar(m.clone(), 2, true, Boundary::Constrained).unwrap();
        let v = FeSpace::vector(m, 2, Boundary::Constrained).unwrap();
        let b = assemble_b(&s, &FieldVector::zeros(&v), 6).unwrap().matrix;
        let k = assemble_stiffness(&s, 6).unwrap().matrix;
        for (x, y) in b.values().iter().zip(k.values()) {
            assert!((x.re - y).abs() < 1e-13 && x.im == 0.0);
        }
    }

    #[test]
    fn b_rejects_other_mesh() {
        let s = FeSpace::scalar(mesh(2, 3), 1, true, Boundary::Constrained).unwrap();
        let v = FeSpace::vector(mesh(2, 3), 1, Boundary::Constrained).unwrap();
        assert_eq!(
            assemble_b(&s, &FieldVector::zeros(&v), 4).unwrap_err(),
            FormError::MeshMismatch
        );
    }

    #[test]
    fn constants_are_in_the_kernel_of_d() {
        let s = FeSpace::vector(mesh(3, 2), 1, Boundary::Free).unwrap();
        let d = assemble_d(&s, 4).unwrap().matrix;
        let x = vec![1.0; s.n_dofs()];
        assert!(d.matvec(&x).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn real_psi_carries_no_current() {
        let m = mesh(2, 4);
        let s = FeSpace::scalar(m.clone(), 1, true, Boundary::Constrained).unwrap();
        let v = FeSpace::vector(m, 1, Boundary::Constrained).unwrap();
        let psi = interpolate_scalar(
            &s,
            |p| {
                Complex64::new(
                    (std::f64::consts::PI * p[0]).sin() * p[1] * (1.0 - p[1]),
                    0.0,
                )
            },
            BoundaryCheck::Trusted,
        )
        .unwrap();
        let load = assemble_current_load(&v, &psi, 4).unwrap();
        assert!(load.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn current_load_is_quadratic() {
        let m = mesh(2, 4);
        let s = FeSpace::scalar(m.clone(), 2, true, Boundary::Constrained).unwrap();
        let v = FeSpace::vector(m, 2, Boundary::Constrained).unwrap();
        let f = |p: &Point| {
            let b = p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]);
            Complex64::from_polar(b, 3.0 * p[0] + p[1])
        };
        let psi = interpolate_scalar(&s, f, BoundaryCheck::Trusted).unwrap();
        let psi2 = interpolate_scalar(&s, |p| f(p) * 2.0, BoundaryCheck::Trusted).unwrap();
        let l1 = assemble_current_load(&v, &psi, 6).unwrap();
        let l2 = assemble_current_load(&v, &psi2, 6).unwrap();
        for (a, b) in l1.iter().zip(&l2) {
            assert!((4.0 * a - b).abs() < 1e-14);
        }
        assert!(l1.iter().any(|x| x.abs() > 1e-6));
    }

    #[test]
    fn unit_source_sums_to_domain_measure() {
        for dim in [2, 3] {
            let s = FeSpace::scalar(mesh(dim, 3), 1, false, Boundary::Free).unwrap();
            let l: Vec<f64> = assemble_source_load(&s, |_| 1.0, 4).unwrap();
            assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let z: Vec<f64> = assemble_source_load(&s, |_| 0.0, 4).unwrap();
            assert!(z.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn density_weighted_vector_mass_is_psd() {
        let m = mesh(2, 3);
        let s = FeSpace::scalar(m.clone(), 1, true, Boundary::Constrained).unwrap();
        let v = FeSpace::vector(m, 1, Boundary::Constrained).unwrap();
        let psi = interpolate_scalar(
            &s,
            |p| Complex64::new(p[0] * (1.0 - p[0]), p[1] * (1.0 - p[1])),
            BoundaryCheck::Trusted,
        )
        .unwrap();
        let w = assemble_weighted_mass(&v, &Weight::Density(&psi), 4)
            .unwrap()
            .matrix;
        assert!(w.hermitian_deviation() < 1e-15);
        let a = interpolate_vector(&v, |p| [p[1], -p[0], 0.0], BoundaryCheck::Trusted).unwrap();
        assert!(mass_norm_sqr(&w, a.coefficients()) >= 0.0);
    }
}
