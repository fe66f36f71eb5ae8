use std::fmt::Write as _;

use rayon::prelude::*;

use super::{ExactSolution, MmsError};
use crate::element::QuadratureRule;
use crate::forms::{tabulate, CellGeometry, FormError, QpField};
use crate::mesh::{Mesh, Point};
use crate::space::{FieldKind, FieldVector};
use crate::sparse::Scalar;

const CHUNK: usize = 256;

/// Error of one field. `grad` is the full gradient seminorm; `div` and
/// `curl` are only reported for vector fields. `h1` is
/// `sqrt(l2^2 + grad^2)` for scalars and `sqrt(l2^2 + div^2 + curl^2)` for
/// vectors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldErrors {
    pub l2: f64,
    pub grad: f64,
    pub div: Option<f64>,
    pub curl: Option<f64>,
    pub h1: f64,
}

/// Sums `kernel` over all quadrature points of all cells in fixed chunk order.
fn integrate<T, K, const N: usize>(
    field: &FieldVector<T>,
    quad_degree: usize,
    kernel: K,
) -> Result<[f64; N], FormError>
where
    T: Scalar,
    K: Fn(&Point, &crate::space::PointValue<T>) -> [f64; N] + Sync,
{
    let space = field.space();
    let tab = tabulate(space, quad_degree)?;
    let qp = QpField::new(field, tab.rule());
    let n_cells = space.mesh().n_cells();
    let partial: Vec<[f64; N]> = (0..n_cells.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut acc = [0.0; N];
            let mut vals = Vec::new();
            for cell in chunk * CHUNK..((chunk + 1) * CHUNK).min(n_cells) {
                let geo = CellGeometry::new(space, &tab, cell);
                qp.eval_cell(cell, &mut vals);
                for (q, pv) in vals.iter().enumerate() {
                    let e = kernel(&geo.points[q], pv);
                    for k in 0..N {
                        acc[k] += geo.jxw[q] * e[k];
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = [0.0; N];
    for p in partial {
        for k in 0..N {
            total[k] += p[k];
        }
    }
    Ok(total)
}

/// L2 and gradient errors of a scalar field against an exact function and
/// its gradient.
pub fn scalar_errors<T, F, G>(
    field: &FieldVector<T>,
    exact: F,
    exact_grad: G,
    quad_degree: usize,
) -> Result<FieldErrors, FormError>
where
    T: Scalar,
    F: Fn(&Point) -> T + Sync,
    G: Fn(&Point) -> [T; 3] + Sync,
{
    if field.space().kind() == FieldKind::Vector {
        return Err(FormError::Kind("scalar error of a vector field"));
    }
    let dim = field.space().dim();
    let [l2, grad] = integrate(field, quad_degree, |x, pv| {
        let g = exact_grad(x);
        let gsum: f64 = (0..dim).map(|i| (pv.grad[0][i] - g[i]).abs2()).sum();
        [(pv.value[0] - exact(x)).abs2(), gsum]
    })?;
    Ok(FieldErrors {
        l2: l2.sqrt(),
        grad: grad.sqrt(),
        div: None,
        curl: None,
        h1: (l2 + grad).sqrt(),
    })
}

/// L2, divergence, curl and gradient errors of a vector field.
pub fn vector_errors<F, G>(
    field: &FieldVector<f64>,
    exact: F,
    exact_grad: G,
    quad_degree: usize,
) -> Result<FieldErrors, FormError>
where
    F: Fn(&Point) -> Point + Sync,
    G: Fn(&Point) -> [[f64; 3]; 3] + Sync,
{
    if field.space().kind() != FieldKind::Vector {
        return Err(FormError::Kind("vector error of a scalar field"));
    }
    let dim = field.space().dim();
    let [l2, grad, div, curl] = integrate(field, quad_degree, |x, pv| {
        let u = exact(x);
        let g = exact_grad(x);
        let mut e = [[0.0; 3]; 3];
        let (mut l2, mut gr) = (0.0, 0.0);
        for c in 0..dim {
            l2 += (pv.value[c] - u[c]).powi(2);
            for i in 0..dim {
                e[c][i] = pv.grad[c][i] - g[c][i];
                gr += e[c][i] * e[c][i];
            }
        }
        let div: f64 = (0..dim).map(|c| e[c][c]).sum();
        let curl = if dim == 2 {
            (e[1][0] - e[0][1]).powi(2)
        } else {
            (e[2][1] - e[1][2]).powi(2) + (e[0][2] - e[2][0]).powi(2) + (e[1][0] - e[0][1]).powi(2)
        };
        [l2, gr, div * div, curl]
    })?;
    Ok(FieldErrors {
        l2: l2.sqrt(),
        grad: grad.sqrt(),
        div: Some(div.sqrt()),
        curl: Some(curl.sqrt()),
        h1: (l2 + div + curl).sqrt(),
    })
}

/// `log2(coarse / fine)`, the order of one mesh halving.
pub fn observed_order(coarse: f64, fine: f64) -> Result<f64, MmsError> {
    if !(coarse > 0.0 && fine > 0.0) {
        return Err(MmsError::NonPositive { coarse, fine });
    }
    Ok((coarse / fine).log2())
}

/// Mean order per halving between the first and last of a sequence of
/// errors on successively halved meshes.
pub fn mean_order(errors: &[f64]) -> Result<f64, MmsError> {
    match errors {
        [] | [_] => Err(MmsError::NonPositive {
            coarse: errors.first().copied().unwrap_or(0.0),
            fine: 0.0,
        }),
        [first, .., last] => {
            if let Some(bad) = errors.iter().find(|e| !(**e > 0.0)) {
                return Err(MmsError::NonPositive {
                    coarse: *first,
                    fine: *bad,
                });
            }
            Ok(observed_order(*first, *last)? / (errors.len() - 1) as f64)
        }
    }
}

/// Scientific notation with five significant digits and a two-digit
/// exponent, e.g. `4.9855e-01`.
pub fn format_sci(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.4e}");
    let (mant, exp) = s.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

/// Two decimals, e.g. `1.03`.
pub fn format_order(x: f64) -> String {
    format!("{x:.2}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldId {
    Psi,
    A,
    Phi,
}

impl FieldId {
    pub const ALL: [FieldId; 3] = [FieldId::Psi, FieldId::A, FieldId::Phi];

    pub fn name(self) -> &'static str {
        match self {
            FieldId::Psi => "psi",
            FieldId::A => "A",
            FieldId::Phi => "phi",
        }
    }
}

/// Errors of all three fields at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotErrors {
    pub time: f64,
    pub psi: FieldErrors,
    pub a: FieldErrors,
    pub phi: FieldErrors,
}

impl SnapshotErrors {
    pub fn get(&self, field: FieldId) -> &FieldErrors {
        match field {
            FieldId::Psi => &self.psi,
            FieldId::A => &self.a,
            FieldId::Phi => &self.phi,
        }
    }
}

/// All snapshots of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelErrors {
    pub subdivisions: usize,
    pub h: f64,
    pub dt: f64,
    pub snapshots: Vec<SnapshotErrors>,
}

impl LevelErrors {
    fn at(&self, time: f64) -> Option<&SnapshotErrors> {
        self.snapshots.iter().find(|s| (s.time - time).abs() < 1e-9)
    }
}

/// Errors of a convergence study, one [`LevelErrors`] per mesh level in
/// increasing order of `M`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    pub levels: Vec<LevelErrors>,
}

impl ErrorReport {
    /// Snapshot times of the coarsest level.
    pub fn times(&self) -> Vec<f64> {
        self.levels
            .first()
            .map(|l| l.snapshots.iter().map(|s| s.time).collect())
            .unwrap_or_default()
    }

    /// H1 errors of one field at one time across levels; `None` where a
    /// level is missing that snapshot.
    pub fn h1_series(&self, field: FieldId, time: f64) -> Vec<Option<f64>> {
        self.levels
            .iter()
            .map(|l| l.at(time).map(|s| s.get(field).h1))
            .collect()
    }

    /// Per-halving H1 orders between consecutive levels.
    pub fn orders(&self, field: FieldId, time: f64) -> Result<Vec<f64>, MmsError> {
        let series = self.h1_series(field, time);
        series
            .windows(2)
            .map(|w| match (w[0], w[1]) {
                (Some(a), Some(b)) => observed_order(a, b),
                _ => Err(MmsError::NonPositive {
                    coarse: w[0].unwrap_or(0.0),
                    fine: w[1].unwrap_or(0.0),
                }),
            })
            .collect()
    }

    /// Table with one row per snapshot time and one column per level, plus
    /// the mean per-halving order. Missing entries are left blank.
    pub fn table_csv(&self, field: FieldId) -> String {
        let mut out = String::from("t");
        for l in &self.levels {
            let _ = write!(out, ",M={}", l.subdivisions);
        }
        out.push_str(",order\n");
        for t in self.times() {
            let series = self.h1_series(field, t);
            let _ = write!(out, "{t:.1}");
            for e in &series {
                out.push(',');
                if let Some(e) = e {
                    out.push_str(&format_sci(*e));
                }
            }
            out.push(',');
            let complete: Option<Vec<f64>> = series.iter().copied().collect();
            if let Some(Ok(order)) = complete.map(|s| mean_order(&s)) {
                out.push_str(&format_order(order));
            }
            out.push('\n');
        }
        out
    }

    /// Long format: one row per level, time and field.
    pub fn long_csv(&self) -> String {
        let mut out = String::from("time,field,M,L2,H1_total,H1_grad,H1_div,H1_curl,h,dt,order\n");
        let opt = |v: Option<f64>| v.map(format_sci).unwrap_or_default();
        for (k, level) in self.levels.iter().enumerate() {
            for snap in &level.snapshots {
                for field in FieldId::ALL {
                    let e = snap.get(field);
                    let order = k
                        .checked_sub(1)
                        .and_then(|p| self.levels[p].at(snap.time))
                        .and_then(|prev| observed_order(prev.get(field).h1, e.h1).ok())
                        .map(format_order)
                        .unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "{:.1},{},{},{},{},{},{},{},{},{},{}",
                        snap.time,
                        field.name(),
                        level.subdivisions,
                        format_sci(e.l2),
                        format_sci(e.h1),
                        format_sci(e.grad),
                        opt(e.div),
                        opt(e.curl),
                        format_sci(level.h),
                        format_sci(level.dt),
                        order
                    );
                }
            }
        }
        out
    }
}

/// L2 norms of the two initial gauge conditions
/// `div A_1 + lap phi_0 + |psi_0|^2` and `div A_0 + phi_1` at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeResiduals {
    pub potential: f64,
    pub velocity: f64,
}

/// Evaluates the initial gauge residuals of an exact solution by quadrature
/// on `mesh`.
pub fn gauge_residuals(
    case: &dyn ExactSolution,
    mesh: &Mesh,
    quad_degree: usize,
) -> Result<GaugeResiduals, FormError> {
    let dim = mesh.dim();
    let rule = QuadratureRule::new(dim, quad_degree)?;
    let (mut potential, mut velocity) = (0.0, 0.0);
    for c in 0..mesh.n_cells() {
        let map = crate::element::AffineMap::new(dim, &mesh.cell_points(c)[..=dim])?;
        for (b, w) in rule.points().iter().zip(rule.weights()) {
            let x = map.map_bary(b);
            let ga = case.grad_a(&x, 0.0);
            let gat = case.grad_a_t(&x, 0.0);
            let div_a: f64 = (0..dim).map(|i| ga[i][i]).sum();
            let div_at: f64 = (0..dim).map(|i| gat[i][i]).sum();
            let r1 = div_a + case.phi_t(&x, 0.0);
            let r2 = div_at + case.laplacian_phi(&x, 0.0) + case.psi(&x, 0.0).norm_sqr();
            potential += w * map.abs_det() * r1 * r1;
            velocity += w * map.abs_det() * r2 * r2;
        }
    }
    Ok(GaugeResiduals {
        potential: potential.sqrt(),
        velocity: velocity.sqrt(),
    })
}
