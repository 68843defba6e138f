use nalgebra::DMatrix;
use proptest::prelude::*;
use sparse_omm::energy::{e0, e0_increment, e_mu, grad_e0, line_coefficients};
use sparse_omm::metrics::{distance_to_s0, make_reference, orthogonality_error};
use sparse_omm::operator::{eigendecomposition, HermitianOperator};
use sparse_omm::solvers::{shrink, soft_threshold, solve, SolverConfig, Variant};

fn operator(n: usize, seed: u64) -> HermitianOperator {
    use rand::{Rng, SeedableRng};
    let mut g = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| g.gen_range(-1.0..1.0));
    let q = a.qr().q();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| -g.gen_range(0.5..3.0)));
    let mut h = &q * d * q.transpose();
    for i in 0..n {
        for j in 0..i {
            h[(i, j)] = h[(j, i)];
        }
    }
    HermitianOperator::from_dense(h).unwrap()
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_matches_directional_difference(seed in 0u64..1000, x in matrix(6, 2), d in matrix(6, 2)) {
        let h = operator(6, seed);
        let g = grad_e0(&h, &x).unwrap();
        let eps = 1e-6;
        let fd = (e0(&h, &(&x + &d * eps)).unwrap() - e0(&h, &(&x - &d * eps)).unwrap()) / (2.0 * eps);
        prop_assert!((fd - g.dot(&d)).abs() <= 1e-6 * (1.0 + g.norm() * d.norm()));
    }

    #[test]
    fn energy_is_rotation_invariant(seed in 0u64..1000, x in matrix(6, 3), a in matrix(3, 3)) {
        let h = operator(6, seed);
        let q = a.qr().q();
        let e = e0(&h, &x).unwrap();
        prop_assert!((e0(&h, &(&x * &q)).unwrap() - e).abs() <= 1e-10 * e.abs().max(1.0));
    }

    #[test]
    fn increment_matches_difference(seed in 0u64..1000, x in matrix(5, 2), d in matrix(5, 2)) {
        let h = operator(5, seed);
        let y = &x + &d;
        let direct = e0(&h, &y).unwrap() - e0(&h, &x).unwrap();
        prop_assert!((e0_increment(&h, &x, &y).unwrap() - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
    }

    #[test]
    fn energy_along_a_ray_is_even_quartic(seed in 0u64..1000, u in matrix(5, 2), t in -3.0f64..3.0) {
        prop_assume!(u.norm() > 1e-3);
        let u = &u / u.norm();
        let h = operator(5, seed);
        let (c1, c2) = line_coefficients(&h, &u).unwrap();
        let direct = e0(&h, &(&u * t)).unwrap();
        prop_assert!((direct - (c1 * t.powi(4) + c2 * t * t)).abs() <= 1e-10 * direct.abs().max(1.0));
        prop_assert!(c1 >= -1e-12 && c2 <= 1e-12);
    }

    #[test]
    fn shrinkage_is_nonexpansive(y in matrix(4, 3), z in matrix(4, 3), alpha in 0.0f64..1.0) {
        let a = shrink(&y, alpha).unwrap().into_matrix();
        let b = shrink(&z, alpha).unwrap().into_matrix();
        prop_assert!((&a - &b).norm() <= (&y - &z).norm() + 1e-15);
        for (v, s) in y.iter().zip(a.iter()) {
            prop_assert_eq!(*s, soft_threshold(*v, alpha));
            prop_assert!(s.abs() <= v.abs());
        }
    }

    #[test]
    fn penalized_runs_descend_and_are_reproducible(seed in 0u64..1000, x0 in matrix(8, 2), mu in 0.0f64..0.2, block in any::<bool>()) {
        let h = operator(8, seed);
        let variant = if block { Variant::BlockDynamic } else { Variant::IstaDynamic };
        let cfg = SolverConfig { variant, tol: 1e-9, max_iters: 5000, ..SolverConfig::default() }.with_mu(mu);
        let start = x0 * 0.5;
        let a = solve(&h, &start, &cfg).unwrap();
        let b = solve(&h, &start, &cfg).unwrap();
        prop_assert!(a.trace.worst_increase() <= 1e-12);
        prop_assert_eq!(a.x.matrix(), b.x.matrix());
        prop_assert_eq!(a.iterations, b.iterations);
        prop_assert!(a.final_emu() <= e_mu(&h, &start, mu).unwrap() + 1e-12);
    }

    #[test]
    fn unpenalized_runs_reach_the_eigenspace(seed in 0u64..1000, x0 in matrix(7, 2)) {
        let h = operator(7, seed);
        let spec = eigendecomposition(&h).unwrap();
        let reference = make_reference(&spec, 2).unwrap();
        let cfg = SolverConfig { tol: 1e-12, max_iters: 50_000, ..SolverConfig::default() };
        let r = solve(&h, &(x0 * 0.5), &cfg).unwrap();
        prop_assert!(r.converged);
        prop_assert!((r.final_e0() - spec.lowest_sum(2)).abs() <= 1e-9);
        prop_assert!(distance_to_s0(r.x.matrix(), &reference).unwrap() <= 1e-5);
        prop_assert!(orthogonality_error(r.x.matrix()) <= 1e-5);
    }
}
