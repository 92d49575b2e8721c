use leo_ris::conic::*;
use leo_ris::C64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(rng: &mut impl Rng, n: usize) -> DMatrix<C64> {
    let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&a + a.adjoint()) * C64::from(0.5)
}

#[test]
fn imaginary_parts_survive_realification() {
    let mut p = SdpProblem::new();
    let x = p.add_variable(2);
    p.add_constraint(vec![(x, Coefficient::Diagonal(vec![(0, 1.0)]))], Relation::Eq, 1.0);
    p.add_constraint(vec![(x, Coefficient::Diagonal(vec![(1, 1.0)]))], Relation::Eq, 1.0);
    let i = C64::new(0.0, 1.0);
    let c = DMatrix::from_row_slice(2, 2, &[C64::from(0.0), i, -i, C64::from(0.0)]);
    p.set_objective(vec![(x, Coefficient::Dense(c))]);
    let out = p.solve(&SolverSettings::default());
    assert_eq!(out.status, SolveStatus::Optimal);
    assert!((out.objective + 2.0).abs() < 1e-6, "{}", out.objective);
    let x = &out.values[0];
    assert!((x[(0, 1)] - C64::new(0.0, -1.0)).norm() < 1e-4, "{x}");
    assert!((x[(1, 0)] - x[(0, 1)].conj()).norm() < 1e-12);
}

#[test]
fn random_problems_with_an_injected_feasible_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..8 {
        let n = 2 + trial % 4;
        let factor = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let x0 = &factor * factor.adjoint() + DMatrix::identity(n, n) * C64::from(0.1);
        let mut p = SdpProblem::new();
        let x = p.add_variable(n);
        let y = p.add_variable(1);
        for j in 0..3 {
            let a = random_hermitian(&mut rng, n);
            let val = (&a * &x0).trace().re;
            let rel = [Relation::Eq, Relation::Le, Relation::Ge][j];
            let y_term = (y, Coefficient::Diagonal(vec![(0, 1.0)]));
            p.add_constraint(vec![(x, Coefficient::Dense(a)), y_term], rel, val + 0.5);
        }
        let c = {
            let b = random_hermitian(&mut rng, n);
            &b * b.adjoint() + DMatrix::identity(n, n) * C64::from(1.0)
        };
        let witness = (&c * &x0).trace().re + 0.5;
        p.set_objective(vec![(x, Coefficient::Dense(c)), (y, Coefficient::Diagonal(vec![(0, 1.0)]))]);
        let mut one = DMatrix::zeros(1, 1);
        one[(0, 0)] = C64::from(0.5);
        let feasible = vec![x0.clone(), one];
        assert!(p.violations(&feasible).iter().all(|&v| v < 1e-10));
        assert!((p.objective_value(&feasible) - witness).abs() < 1e-9);

        let out = p.solve(&SolverSettings::default());
        assert_eq!(out.status, SolveStatus::Optimal, "trial {trial}");
        assert!(out.max_violation < 1e-6, "trial {trial}: {}", out.max_violation);
        assert!(out.objective <= witness + 1e-6, "trial {trial}");
        for v in &out.values {
            let eig = nalgebra::SymmetricEigen::new(v.clone()).eigenvalues;
            assert!(eig.min() > -1e-7, "trial {trial}");
        }
    }
}

#[test]
fn negative_trace_is_infeasible() {
    let mut p = SdpProblem::new();
    let x = p.add_variable(3);
    let id: Vec<(usize, f64)> = (0..3).map(|i| (i, 1.0)).collect();
    p.add_constraint(vec![(x, Coefficient::Diagonal(id.clone()))], Relation::Le, -1.0);
    p.set_objective(vec![(x, Coefficient::Diagonal(id))]);
    assert_eq!(p.solve(&SolverSettings::default()).status, SolveStatus::Infeasible);
}

#[test]
fn eigen_utilities() {
    let v = DVector::from_vec(vec![C64::new(1.0, 1.0), C64::new(0.0, -2.0), C64::new(0.5, 0.0)]);
    let rank_one = &v * v.adjoint();
    let (lambda, u) = max_eigpair(&rank_one);
    assert!((lambda - v.norm_squared()).abs() < 1e-10);
    assert!((u.dotc(&v).norm() - v.norm()).abs() < 1e-10);
    assert!(rank_one_residual(&rank_one).abs() < 1e-10);
    let id = DMatrix::<C64>::identity(3, 3);
    assert!((rank_one_residual(&id) - 2.0).abs() < 1e-10);
}
