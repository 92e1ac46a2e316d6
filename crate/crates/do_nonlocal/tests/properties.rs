use do_nonlocal::cli::{Preset, RunConfig, Solver};
use do_nonlocal::donet::{self, RodProblem};
use do_nonlocal::fractional_ops::{self, Mesh1D};
use do_nonlocal::lattice2d::{LatticeSpec, LayeredLattice};
use do_nonlocal::mslm::{self, BodyLoad, BoundaryCondition};
use do_nonlocal::order_distributions::{Kind, OrderDistribution};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = Kind> {
    prop_oneof![
        Just(Kind::Uniform),
        Just(Kind::Linear),
        (0.5f64..6.0, 0.5f64..6.0).prop_map(|(a, b)| Kind::Beta { a, b }),
        (0.0f64..1.0, 0.05f64..1.0).prop_map(|(loc, scale)| Kind::TruncNormal { loc, scale }),
        (0.05f64..0.95).prop_map(|alpha| Kind::Dirac { alpha }),
    ]
}

fn smooth_kind() -> impl Strategy<Value = Kind> {
    prop_oneof![
        Just(Kind::Uniform),
        Just(Kind::Linear),
        (1.0f64..6.0, 1.0f64..6.0).prop_map(|(a, b)| Kind::Beta { a, b }),
        (0.0f64..1.0, 0.1f64..1.0).prop_map(|(loc, scale)| Kind::TruncNormal { loc, scale }),
    ]
}

fn bc() -> impl Strategy<Value = BoundaryCondition> {
    prop_oneof![
        (-5.0f64..5.0).prop_map(BoundaryCondition::dbc),
        (-20.0f64..20.0).prop_map(BoundaryCondition::tbc),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn pair_forces_obey_third_law(k in smooth_kind(), n_r in 0usize..6, p in -20i64..20, off in 1i64..20, c in -2.0f64..2.0) {
        let lat = LayeredLattice::new(k, LatticeSpec::default(), n_r, 0.125).unwrap();
        let u = |x: f64| (3.0 * x).sin() + c * x * x;
        for r in 0..=n_r {
            let f = lat.pair_force(r, p, p + off, &u).unwrap();
            let g = lat.pair_force(r, p + off, p, &u).unwrap();
            prop_assert!((f + g).abs() <= 1e-12 * f.abs().max(1.0));
        }
    }

    #[test]
    fn homogenized_force_is_linear(k in smooth_kind(), s in -3.0f64..3.0, p in -10i64..10) {
        let lat = LayeredLattice::new(k, LatticeSpec::default(), 3, 0.25).unwrap();
        let u = |x: f64| x.cos();
        let v = |x: f64| x * x * x;
        let w = |x: f64| s * x.cos() + x * x * x;
        let lhs = lat.homogenized_force(p, &w);
        let rhs = s * lat.homogenized_force(p, &u) + lat.homogenized_force(p, &v);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        // Rigid shifts carry no force.
        prop_assert!(lat.homogenized_force(p, &|_| s).abs() < 1e-12);
    }

    #[test]
    fn springs_symmetric_and_positive(k in kind(), n in 4usize..30, n_alpha in 2usize..40) {
        let mesh = Mesh1D::new(1.0, n).unwrap();
        let dist = OrderDistribution::new(k, n_alpha).unwrap();
        if let Ok(model) = mslm::assemble(&mesh, 2.0, &dist) {
            for i in 0..=n {
                for j in 0..=n {
                    prop_assert_eq!(model.stiffness(i, j), model.stiffness(j, i));
                    if i != j {
                        prop_assert!(model.stiffness(i, j) >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn stencils_annihilate_constants(alpha in 0.01f64..0.99, n in 4usize..40, c in -10.0f64..10.0) {
        let mesh = Mesh1D::new(1.0, n).unwrap();
        let u = vec![c; n + 1];
        for st in [
            fractional_ops::caputo_left_stencil(&mesh, alpha).unwrap(),
            fractional_ops::caputo_right_stencil(&mesh, alpha).unwrap(),
            fractional_ops::riesz_stress_stencil(&mesh, alpha).unwrap(),
            fractional_ops::marchaud_stress_stencil(&mesh, alpha).unwrap(),
        ] {
            prop_assert!(st.apply(&u).iter().all(|v| v.abs() <= 1e-9 * (1.0 + c.abs())));
        }
    }

    #[test]
    fn config_round_trips(
        preset in prop_oneof![Just(Preset::Custom), Just(Preset::Case1), Just(Preset::Case2)],
        n in 4usize..300,
        n_alpha in 1usize..300,
        k in proptest::option::of(kind()),
        b in proptest::option::of(bc()),
        f in -10.0f64..10.0,
        solver in prop_oneof![Just(Solver::Donet), Just(Solver::Mslm), Just(Solver::Both)],
        stiff in any::<bool>(),
        dx0 in 0.01f64..0.5,
    ) {
        let mut c = RunConfig::for_preset(preset);
        if preset == Preset::Custom {
            c.load = BodyLoad::Constant { f };
            c.length = 1.0 + f.abs();
        }
        c.n = n;
        c.n_alpha = n_alpha;
        c.dist = k;
        c.bc = b;
        c.solver = solver;
        c.stiffness_report = stiff;
        c.lattice.dx0 = dx0;
        let text = c.to_config_string();
        let back = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_config_string(), text);
    }

    #[test]
    fn solvers_are_linear_in_data(k in smooth_kind(), b in bc(), f in -5.0f64..5.0, s in -3.0f64..3.0) {
        let mesh = Mesh1D::new(1.0, 16).unwrap();
        let dist = OrderDistribution::new(k, 20).unwrap();
        let base = RodProblem::new(mesh, 1.0, 1.0, dist, b, BodyLoad::Constant { f }).unwrap();
        let scaled_bc = match b.is_traction() {
            true => BoundaryCondition::tbc(s * b.value()),
            false => BoundaryCondition::dbc(s * b.value()),
        };
        let scaled = base.with_bc(scaled_bc).with_load(BodyLoad::Constant { f: s * f });
        let u = donet::solve_static(&base).unwrap();
        let v = donet::solve_static(&scaled).unwrap();
        let scale = u.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        prop_assert!(u.iter().zip(&v).all(|(a, b)| (s * a - b).abs() <= 1e-9 * scale * (1.0 + s.abs())));

        let model = mslm::assemble(&mesh, 1.0, &base.dist).unwrap();
        let um = mslm::solve_static(&model, &b, &base.load).unwrap();
        let vm = mslm::solve_static(&model, &scaled_bc, &scaled.load).unwrap();
        prop_assert!(um.iter().zip(&vm).all(|(a, b)| (s * a - b).abs() <= 1e-9 * scale * (1.0 + s.abs())));
    }
}
