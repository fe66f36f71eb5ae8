//! Forms, spaces and error norms against closed-form integrals.

use std::f64::consts::PI;
use std::sync::Arc;

use msfem::element::QuadratureRule;
use msfem::forms::{
    assemble_b, assemble_current_load, assemble_d, assemble_mass, assemble_weighted_mass, Weight,
};
use msfem::mesh::{Mesh, Point};
use msfem::mms::{analogue_2d, paper_case, scalar_errors, vector_errors, ExactSolution};
use msfem::space::{
    interpolate_scalar, interpolate_vector, Boundary, BoundaryCheck, FeSpace, FieldVector,
};
use msfem::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mesh(dim: usize, m: usize) -> Arc<Mesh> {
    Arc::new(Mesh::build_structured(dim, m).unwrap())
}

fn quad_form(mat: &msfem::sparse::CsrMatrix<f64>, x: &[f64]) -> f64 {
    x.iter().zip(mat.matvec(x)).map(|(a, b)| a * b).sum()
}

/// Barycentric sample points on the facet opposite local vertex `opp`.
fn facet_points(dim: usize, opp: usize) -> Vec<[f64; 4]> {
    let weights: &[&[f64]] = if dim == 2 {
        &[&[0.5, 0.5], &[0.1, 0.9], &[0.77, 0.23], &[1.0, 0.0]]
    } else {
        &[
            &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            &[0.6, 0.3, 0.1],
            &[0.05, 0.15, 0.8],
            &[0.0, 0.5, 0.5],
        ]
    };
    weights
        .iter()
        .map(|w| {
            let mut b = [0.0; 4];
            let mut k = 0;
            for (i, slot) in b.iter_mut().enumerate().take(dim + 1) {
                if i != opp {
                    *slot = w[k];
                    k += 1;
                }
            }
            b
        })
        .collect()
}

#[test]
fn d_of_a_divergence_free_field_is_its_curl_energy() {
    // A = curl b for b = sin^2(pi x) sin^2(pi y): div A = 0, curl A = -lap b,
    // and the integral of (lap b)^2 over the square is 2 pi^4.
    let s = |t: f64| (PI * t).sin().powi(2);
    let ds = |t: f64| PI * (2.0 * PI * t).sin();
    let vs = FeSpace::vector(mesh(2, 8), 2, Boundary::Constrained).unwrap();
    let a = interpolate_vector(
        &vs,
        |x| [s(x[0]) * ds(x[1]), -ds(x[0]) * s(x[1]), 0.0],
        BoundaryCheck::Strict,
    )
    .unwrap();
    let d = assemble_d(&vs, 6).unwrap().matrix;
    let energy = quad_form(&d, a.coefficients());
    let exact = 2.0 * PI.powi(4);
    assert!((energy - exact).abs() / exact < 0.02, "{energy} vs {exact}");
}

#[test]
fn b_matches_independent_magnetic_energy() {
    // For P1 fields every term of |(i grad + A) psi|^2 is a polynomial of
    // degree <= 4, so a degree-10 rule evaluates the integral exactly.
    let m = mesh(2, 8);
    let cs = FeSpace::scalar(m.clone(), 1, true, Boundary::Constrained).unwrap();
    let vs = FeSpace::vector(m.clone(), 1, Boundary::Constrained).unwrap();
    let case = analogue_2d();
    let psi = interpolate_scalar(
        &cs,
        |x| case.psi(x, 0.4) * Complex64::from_polar(1.0, 2.0 * x[1]),
        BoundaryCheck::Trusted,
    )
    .unwrap();
    let a = interpolate_vector(
        &vs,
        |x| case.a(x, 0.2).map(|v| 2.0 * v),
        BoundaryCheck::Trusted,
    )
    .unwrap();
    let b = assemble_b(&cs, &a, 4).unwrap().matrix;
    let bu = b.matvec(psi.coefficients());
    let form: Complex64 = psi
        .coefficients()
        .iter()
        .zip(&bu)
        .map(|(u, v)| u.conj() * v)
        .sum();

    let rule = QuadratureRule::new(2, 10).unwrap();
    let i = Complex64::new(0.0, 1.0);
    let mut energy = 0.0;
    for c in 0..m.n_cells() {
        let map = cs.affine_map(c);
        for (p, w) in rule.points().iter().zip(rule.weights()) {
            let pv = psi.evaluate(c, p);
            let av = a.evaluate(c, p);
            for k in 0..2 {
                energy +=
                    w * map.abs_det() * (i * pv.grad[0][k] + av.value[k] * pv.value[0]).norm_sqr();
            }
        }
    }
    assert!(form.im.abs() < 1e-12 * form.re.abs());
    assert!(
        (form.re - energy).abs() < 1e-10 * energy,
        "{} vs {energy}",
        form.re
    );
}

#[test]
fn density_weight_integrates_the_probability() {
    let case = paper_case();
    let mut gaps = Vec::new();
    for m in [4, 8] {
        let grid = mesh(3, m);
        let rs = FeSpace::scalar(grid.clone(), 1, false, Boundary::Free).unwrap();
        let cs = FeSpace::scalar(grid, 1, true, Boundary::Free).unwrap();
        let psi = interpolate_scalar(&cs, |x| case.psi(x, 0.0), BoundaryCheck::Trusted).unwrap();
        let w = assemble_weighted_mass(&rs, &Weight::Density(&psi), 4)
            .unwrap()
            .matrix;
        let total = quad_form(&w, &vec![1.0; rs.n_dofs()]);

        // The same integral of |psi_h|^2 through the mass matrix.
        let mass = assemble_mass(&cs, 4).unwrap().matrix;
        let c = psi.coefficients();
        let mc = mass.matvec(&c.iter().map(|v| v.re).collect::<Vec<_>>());
        let ms = mass.matvec(&c.iter().map(|v| v.im).collect::<Vec<_>>());
        let norm2: f64 = c
            .iter()
            .zip(mc.iter().zip(&ms))
            .map(|(v, (a, b))| v.re * a + v.im * b)
            .sum();
        assert!((total - norm2).abs() < 1e-12 * norm2, "{total} vs {norm2}");
        gaps.push((total - 0.125).abs());
    }
    assert!(gaps[1] < 0.5 * gaps[0], "{gaps:?}");
}

#[test]
fn current_load_sign_convention() {
    // psi = e^{i pi x} b: f(psi, psi) = -Im(psi^* grad psi) = -pi b^2 e_1,
    // so the load against (b^2, 0) is -pi int b^4 = -pi / 630^2.
    let bump = |x: &Point| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
    let m = mesh(2, 16);
    let cs = FeSpace::scalar(m.clone(), 2, true, Boundary::Constrained).unwrap();
    let vs = FeSpace::vector(m, 2, Boundary::Constrained).unwrap();
    let psi = interpolate_scalar(
        &cs,
        |x| Complex64::from_polar(bump(x), PI * x[0]),
        BoundaryCheck::Strict,
    )
    .unwrap();
    let v =
        interpolate_vector(&vs, |x| [bump(x).powi(2), 0.0, 0.0], BoundaryCheck::Strict).unwrap();
    let load = assemble_current_load(&vs, &psi, 6).unwrap();
    let got: f64 = load.iter().zip(v.coefficients()).map(|(l, v)| l * v).sum();
    let expected = -PI / 630.0f64.powi(2);
    assert!(
        (got - expected).abs() / expected.abs() < 0.05,
        "{got} vs {expected}"
    );
}

#[test]
fn paper_case_is_boundary_compatible() {
    let case = paper_case();
    let m = Mesh::build_structured(3, 4).unwrap();
    for t in [0.0, 0.3, 1.7, 4.0] {
        let mut worst: f64 = 0.0;
        for f in m.boundary_facets() {
            let pts = m.cell_points(f.cell);
            for b in facet_points(3, f.opposite) {
                let mut x = [0.0; 3];
                for (k, p) in pts.iter().enumerate() {
                    for i in 0..3 {
                        x[i] += b[k] * p[i];
                    }
                }
                worst = worst.max(case.psi(&x, t).norm()).max(case.phi(&x, t).abs());
                let a = case.a(&x, t);
                for c in (0..3).filter(|&c| c != f.axis) {
                    worst = worst.max(a[c].abs());
                }
            }
        }
        assert!(worst <= 1e-12, "t = {t}: {worst:e}");
    }
}

#[test]
fn constrained_fields_have_zero_tangential_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (dim, r) in [(2, 1), (2, 2), (3, 1), (3, 2)] {
        let m = mesh(dim, 3);
        let vs = FeSpace::vector(m.clone(), r, Boundary::Constrained).unwrap();
        let rs = FeSpace::scalar(m.clone(), r, false, Boundary::Constrained).unwrap();
        let a = FieldVector::from_coefficients(
            &vs,
            (0..vs.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let u = FieldVector::from_coefficients(
            &rs,
            (0..rs.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        for f in m.boundary_facets() {
            for b in facet_points(dim, f.opposite) {
                let av = a.evaluate(f.cell, &b[..=dim]);
                for c in (0..dim).filter(|&c| c != f.axis) {
                    assert!(av.value[c].abs() <= 1e-13);
                }
                assert!(u.evaluate(f.cell, &b[..=dim]).value[0].abs() <= 1e-13);
            }
        }
    }
}

#[test]
fn polynomial_interpolants_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (dim, r) in [(2, 1), (2, 2), (3, 1), (3, 2)] {
        let m = mesh(dim, 3);
        let rs = FeSpace::scalar(m.clone(), r, false, Boundary::Free).unwrap();
        let p = move |x: &Point| {
            let lin = 0.5 + x[0] - 2.0 * x[1] + 3.0 * x[2];
            if r == 2 {
                lin + x[0] * x[1] - x[2] * x[2] + 0.25 * x[0] * x[0]
            } else {
                lin
            }
        };
        let grad = move |x: &Point| {
            let mut g = [1.0, -2.0, 3.0];
            if r == 2 {
                g[0] += x[1] + 0.5 * x[0];
                g[1] += x[0];
                g[2] -= 2.0 * x[2];
            }
            g
        };
        let u = interpolate_scalar(&rs, p, BoundaryCheck::Strict).unwrap();
        let e = scalar_errors(&u, p, grad, 6).unwrap();
        assert!(e.l2 < 1e-12 && e.h1 < 1e-12, "{e:?}");
        for _ in 0..100 {
            let cell = rng.gen_range(0..m.n_cells());
            let mut b: Vec<f64> = (0..=dim).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = b.iter().sum();
            b.iter_mut().for_each(|v| *v /= s);
            let x = rs.affine_map(cell).map_bary(&b);
            assert!((u.evaluate(cell, &b).value[0] - p(&x)).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_field_error_is_the_norm_of_psi0() {
    let cs = FeSpace::scalar(mesh(3, 8), 1, true, Boundary::Constrained).unwrap();
    let case = paper_case();
    let zero = FieldVector::<Complex64>::zeros(&cs);
    let e = scalar_errors(&zero, |x| case.psi(x, 0.0), |x| case.grad_psi(x, 0.0), 8).unwrap();
    assert!((e.l2 - 0.125f64.sqrt()).abs() < 1e-6, "{}", e.l2);
}

#[test]
fn vanishing_vector_potential_interpolates_to_zero() {
    let vs = FeSpace::vector(mesh(3, 4), 2, Boundary::Constrained).unwrap();
    let case = paper_case();
    let a = interpolate_vector(&vs, |x| case.a(x, 0.5), BoundaryCheck::Strict).unwrap();
    assert!(a.coefficients().iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn error_quadrature_is_converged_at_m8() {
    let case = paper_case();
    let t = 1.0;
    for r in [1, 2] {
        let m = mesh(3, 8);
        let cs = FeSpace::scalar(m.clone(), r, true, Boundary::Constrained).unwrap();
        let rs = FeSpace::scalar(m.clone(), r, false, Boundary::Constrained).unwrap();
        let vs = FeSpace::vector(m, r, Boundary::Constrained).unwrap();
        let psi = interpolate_scalar(&cs, |x| case.psi(x, t), BoundaryCheck::Trusted).unwrap();
        let phi = interpolate_scalar(&rs, |x| case.phi(x, t), BoundaryCheck::Trusted).unwrap();
        let a = interpolate_vector(&vs, |x| case.a(x, t), BoundaryCheck::Trusted).unwrap();
        let q = 2 * r + 2;
        let errors = |q: usize| {
            [
                scalar_errors(&psi, |x| case.psi(x, t), |x| case.grad_psi(x, t), q).unwrap(),
                vector_errors(&a, |x| case.a(x, t), |x| case.grad_a(x, t), q).unwrap(),
                scalar_errors(&phi, |x| case.phi(x, t), |x| case.grad_phi(x, t), q).unwrap(),
            ]
        };
        for (lo, hi) in errors(q).iter().zip(errors(q + 2)) {
            assert!(
                (lo.h1 - hi.h1).abs() / hi.h1 < 1e-3,
                "r={r}: {} vs {}",
                lo.h1,
                hi.h1
            );
            assert!(
                (lo.l2 - hi.l2).abs() / hi.l2 < 1e-3,
                "r={r}: {} vs {}",
                lo.l2,
                hi.l2
            );
        }
    }
}
