use std::f64::consts::PI;

use msfem::forms::{assemble_b, assemble_mass, assemble_stiffness, assemble_weighted_mass, Weight};
use msfem::mms::{analogue_2d, observed_order, paper_case, ExactSolution};
use msfem::scheme::{
    run, steps_to, FieldState, InitialData, Mode, SchemeConfig, SchemeError, StartUp, Stepper,
};
use msfem::space::{interpolate_scalar, interpolate_vector, Boundary, BoundaryCheck, FieldVector};
use msfem::sparse::{CsrMatrix, Scalar};
use msfem::Complex64;
use nalgebra::{DMatrix, DVector};

fn relative_residual<T: Scalar>(a: &CsrMatrix<T>, x: &[T], b: &[T]) -> f64 {
    let ax = a.matvec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (*p - *q).abs2()).sum();
    let n: f64 = b.iter().map(|v| v.abs2()).sum();
    (r / n).sqrt()
}

fn zero_data<'a>() -> InitialData<'a> {
    InitialData {
        psi0: Box::new(|_| Complex64::new(0.0, 0.0)),
        a0: Box::new(|_| [0.0; 3]),
        a1: Box::new(|_| [0.0; 3]),
        phi0: Box::new(|_| 0.0),
        phi1: Box::new(|_| 0.0),
        a2: None,
        phi2: None,
    }
}

#[test]
fn zero_velocity_gives_equal_levels() {
    let case = paper_case();
    let stepper = Stepper::new(SchemeConfig::new(3, 3, 1, 0.1), Some(&case)).unwrap();
    let mut data = InitialData::from_exact(&case);
    data.a0 = Box::new(|x| paper_case().a(x, 0.0));
    data.a1 = Box::new(|_| [0.0; 3]);
    let state = stepper.initialize(&data).unwrap();
    assert_eq!(state.a.coefficients(), state.a_prev.coefficients());
}

#[test]
fn initial_psi_is_nodal() {
    let case = paper_case();
    let stepper = Stepper::new(SchemeConfig::new(3, 4, 2, 0.1), Some(&case)).unwrap();
    let state = stepper.initialize(&InitialData::from_exact(&case)).unwrap();
    let space = stepper.psi_space();
    for d in 0..space.n_dofs() {
        let (node, _) = space.dof_owner(d);
        let x = space.node(node);
        let expect: f64 = (0..3).map(|i| (2.0 * PI * x[i]).sin()).product();
        assert!((state.psi.coefficients()[d] - expect).norm() < 1e-14);
    }
}

#[test]
fn constant_potential_velocity_shifts_every_node() {
    let mut cfg = SchemeConfig::new(2, 3, 2, 0.05);
    cfg.mode = Mode::Free;
    cfg.boundary = Boundary::Free;
    let stepper = Stepper::new(cfg, None).unwrap();
    let mut data = zero_data();
    data.phi0 = Box::new(|x| x[0] + 2.0 * x[1]);
    data.phi1 = Box::new(|_| 3.0);
    let state = stepper.initialize(&data).unwrap();
    for (p, p0) in state
        .phi_prev
        .coefficients()
        .iter()
        .zip(state.phi.coefficients())
    {
        assert!((p - (p0 - 0.05 * 3.0)).abs() < 1e-15);
    }
}

#[test]
fn second_order_start_needs_accelerations() {
    let mut cfg = SchemeConfig::new(2, 2, 1, 0.1);
    cfg.mode = Mode::Free;
    cfg.start = StartUp::SecondOrder;
    let stepper = Stepper::new(cfg, None).unwrap();
    assert!(matches!(
        stepper.initialize(&zero_data()),
        Err(SchemeError::Config(_))
    ));
}

#[test]
fn zero_state_stays_zero() {
    for dim in [2, 3] {
        let mut cfg = SchemeConfig::new(dim, 3, 1, 0.1);
        cfg.mode = Mode::Free;
        cfg.v0 = -7.5;
        let stepper = Stepper::new(cfg, None).unwrap();
        let mut state = stepper.initialize(&zero_data()).unwrap();
        for _ in 0..5 {
            stepper.advance(&mut state).unwrap();
            assert!(state.psi.coefficients().iter().all(|v| v.norm() == 0.0));
            assert!(state.a.coefficients().iter().all(|v| *v == 0.0));
            assert!(state.phi.coefficients().iter().all(|v| *v == 0.0));
        }
    }
}

#[test]
fn manufactured_step_residuals() {
    let case = paper_case();
    let stepper = Stepper::new(SchemeConfig::new(3, 4, 1, 0.1), Some(&case)).unwrap();
    let mut state = stepper.initialize(&InitialData::from_exact(&case)).unwrap();
    for _ in 0..2 {
        let sys = stepper.wave_a_system(&state).unwrap();
        let (a, _) = stepper.step_wave_a(&state).unwrap();
        assert!(relative_residual(&sys.matrix, a.coefficients(), &sys.rhs) <= 1e-10);
        let sys = stepper.wave_phi_system(&state).unwrap();
        let (phi, _) = stepper.step_wave_phi(&state).unwrap();
        assert!(relative_residual(&sys.matrix, phi.coefficients(), &sys.rhs) <= 1e-10);
        let sys = stepper.schrodinger_system(&state, &a, &phi).unwrap();
        let (psi, _) = stepper.step_schrodinger(&state, &a, &phi).unwrap();
        assert!(relative_residual(&sys.matrix, psi.coefficients(), &sys.rhs) <= 1e-10);
        stepper.advance(&mut state).unwrap();
    }
}

#[test]
fn schrodinger_hermitian_part_has_no_time_term() {
    let case = paper_case();
    let cfg = SchemeConfig::new(3, 3, 1, 0.1);
    let (q, v0) = (cfg.quad_degree, cfg.v0);
    let stepper = Stepper::new(cfg, Some(&case)).unwrap();
    let state = stepper.initialize(&InitialData::from_exact(&case)).unwrap();
    let (a, _) = stepper.step_wave_a(&state).unwrap();
    let (phi, _) = stepper.step_wave_phi(&state).unwrap();
    let s = stepper.schrodinger_system(&state, &a, &phi).unwrap().matrix;
    let a_bar = a.combine(0.5, &state.a, 0.5);
    let phi_bar = phi.combine(0.5, &state.phi, 0.5);
    let kb = assemble_b(stepper.psi_space(), &a_bar, q).unwrap().matrix;
    let mw = assemble_weighted_mass(
        stepper.psi_space(),
        &Weight::ShiftedPotential {
            shift: v0,
            field: &phi_bar,
        },
        q,
    )
    .unwrap()
    .matrix;
    for (r, c, v) in s.triplets() {
        let herm = v + s.get(c, r).conj();
        let expect = 0.5 * kb.get(r, c) + Complex64::new(mw.get(r, c), 0.0);
        assert!((herm - expect).norm() <= 1e-12);
    }
}

#[test]
fn constant_density_drives_phi_like_a_dense_solve() {
    let c: f64 = 0.7;
    let dt = 0.1;
    let mut cfg = SchemeConfig::new(2, 4, 1, dt);
    cfg.mode = Mode::Free;
    cfg.boundary = Boundary::Free;
    let q = cfg.quad_degree;
    let stepper = Stepper::new(cfg, None).unwrap();
    let mut data = zero_data();
    data.psi0 = Box::new(move |_| Complex64::new(c.sqrt(), 0.0));
    let state = stepper.initialize(&data).unwrap();
    let (phi, _) = stepper.step_wave_phi(&state).unwrap();

    let space = stepper.phi_space();
    let n = space.n_dofs();
    assert!(n <= 200);
    let m = assemble_mass(space, q).unwrap().matrix;
    let k = assemble_stiffness(space, q).unwrap().matrix;
    let dense = DMatrix::from_fn(n, n, |i, j| m.get(i, j) / (dt * dt) + 0.5 * k.get(i, j));
    let load = DVector::from_vec(m.matvec(&vec![c; n]));
    let exact = dense.lu().solve(&load).unwrap();
    for i in 0..n {
        assert!((phi.coefficients()[i] - exact[i]).abs() <= 1e-10);
    }
}

#[test]
fn free_mode_conserves_the_norm_over_fifty_steps() {
    let case = paper_case();
    let mut cfg = SchemeConfig::new(3, 4, 1, 0.05);
    cfg.mode = Mode::Free;
    cfg.t_final = 2.5;
    let out = run(&cfg, None, &InitialData::wave_packet(&case), &[]).unwrap();
    assert_eq!(out.steps_done, 50);
    assert!(out.max_norm_drift() <= 1e-9, "{}", out.max_norm_drift());
    // The potentials move: the norm is conserved, not the state.
    assert!(out.norm_log.len() == 51);
}

#[test]
fn snapshots_land_on_whole_times() {
    let case = analogue_2d();
    let mut cfg = SchemeConfig::new(2, 4, 1, 1.0 / 3.0);
    cfg.t_final = 2.0;
    let out = run(
        &cfg,
        Some(&case),
        &InitialData::from_exact(&case),
        &[1.0, 2.0],
    )
    .unwrap();
    let steps: Vec<usize> = out.snapshots.iter().map(|s| s.step).collect();
    assert_eq!(steps, [3, 6]);
    assert_eq!(steps_to(2.0, 1.0 / 3.0), Some(6));
    assert_eq!(steps_to(1.0, 0.3), None);
    assert!(run(&cfg, Some(&case), &InitialData::from_exact(&case), &[0.5]).is_err());
}

#[test]
fn errors_decrease_under_refinement() {
    let case = paper_case();
    let errors: Vec<[f64; 3]> = [(8, 0.125), (16, 0.0625)]
        .iter()
        .map(|&(m, dt)| {
            let mut cfg = SchemeConfig::new(3, m, 1, dt);
            cfg.t_final = 1.0;
            let out = run(&cfg, Some(&case), &InitialData::from_exact(&case), &[1.0]).unwrap();
            let e = out.snapshots[0].errors.unwrap();
            [e.psi.h1, e.a.h1, e.phi.h1]
        })
        .collect();
    for f in 0..3 {
        assert!(errors[1][f] < errors[0][f], "field {f}: {:?}", errors);
    }
    let psi_order = observed_order(errors[0][0], errors[1][0]).unwrap();
    assert!(psi_order >= 0.85, "psi order {psi_order}");
}

/// The A-step residual of interpolated exact fields shrinks under
/// simultaneous refinement of h and dt.
#[test]
fn wave_step_is_consistent() {
    let case = analogue_2d();
    let residual = |m: usize| {
        let dt = 1.0 / m as f64;
        let cfg = SchemeConfig::new(2, m, 2, dt);
        let stepper = Stepper::new(cfg, Some(&case)).unwrap();
        let t1 = 0.25;
        let vs = stepper.a_space();
        let a_at =
            |t: f64| interpolate_vector(vs, |x| case.a(x, t), BoundaryCheck::Trusted).unwrap();
        let phi_at = |t: f64| {
            interpolate_scalar(
                stepper.phi_space(),
                |x| case.phi(x, t),
                BoundaryCheck::Trusted,
            )
            .unwrap()
        };
        let psi = interpolate_scalar(
            stepper.psi_space(),
            |x| case.psi(x, t1),
            BoundaryCheck::Trusted,
        )
        .unwrap();
        let state = FieldState {
            step: (t1 / dt).round() as usize,
            dt,
            psi_prev: psi.clone(),
            psi,
            a: a_at(t1),
            a_prev: a_at(t1 - dt),
            a_prev2: a_at(t1 - 2.0 * dt),
            phi: phi_at(t1),
            phi_prev: phi_at(t1 - dt),
            phi_prev2: phi_at(t1 - 2.0 * dt),
        };
        assert!((state.time() - t1).abs() < 1e-12);
        let sys = stepper.wave_a_system(&state).unwrap();
        let exact: FieldVector<f64> = a_at(t1 + dt);
        relative_residual(&sys.matrix, exact.coefficients(), &sys.rhs)
    };
    let (coarse, fine) = (residual(4), residual(8));
    assert!(fine < 0.5 * coarse, "{coarse:e} -> {fine:e}");
}
