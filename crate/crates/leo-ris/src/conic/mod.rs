//! Hermitian semidefinite programs and eigen utilities.
//!
//! Complex Hermitian variables are realified with the embedding
//! `X -> [[Re X, -Im X], [Im X, Re X]]` and handed to a homogeneous
//! self-dual interior point method. Inequalities become scalar slack blocks.

mod ipm;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::C64;
use ipm::{RealProblem, RealStatus, SymMat};

#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    /// Hermitian matrix.
    Dense(DMatrix<C64>),
    /// Real diagonal entries `(index, value)`.
    Diagonal(Vec<(usize, f64)>),
}

impl Coefficient {
    fn trace_with(&self, x: &DMatrix<C64>) -> f64 {
        match self {
            Coefficient::Dense(c) => c.iter().zip(x.transpose().iter()).map(|(a, b)| (a * b).re).sum(),
            Coefficient::Diagonal(d) => d.iter().map(|&(i, v)| v * x[(i, i)].re).sum(),
        }
    }

    fn norm(&self) -> f64 {
        match self {
            Coefficient::Dense(c) => c.norm(),
            Coefficient::Diagonal(d) => d.iter().map(|x| x.1 * x.1).sum::<f64>().sqrt(),
        }
    }

    fn realify(&self, n: usize) -> SymMat {
        match self {
            Coefficient::Dense(c) => {
                let mut r = DMatrix::zeros(2 * n, 2 * n);
                for i in 0..n {
                    for j in 0..n {
                        let z = c[(i, j)] * 0.5;
                        r[(i, j)] = z.re;
                        r[(i + n, j + n)] = z.re;
                        r[(i + n, j)] = z.im;
                        r[(i, j + n)] = -z.im;
                    }
                }
                SymMat::Dense(r)
            }
            Coefficient::Diagonal(d) => SymMat::Sparse(
                d.iter().flat_map(|&(i, v)| [(i, i, 0.5 * v), (i + n, i + n, 0.5 * v)]).collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// `Σ_t Re tr{C_t X_t} (relation) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, Coefficient)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub values: Vec<DMatrix<C64>>,
    pub objective: f64,
    /// Largest violation over constraints, each relative to its coefficient norm.
    pub max_violation: f64,
    pub iterations: usize,
}

/// Minimize `Σ Re tr{C_t X_t}` over Hermitian PSD variables subject to linear
/// trace constraints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SdpProblem {
    sizes: Vec<usize>,
    objective: Vec<(usize, Coefficient)>,
    constraints: Vec<LinearConstraint>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an `n x n` Hermitian PSD variable and returns its handle.
    pub fn add_variable(&mut self, n: usize) -> usize {
        self.sizes.push(n);
        self.sizes.len() - 1
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, Coefficient)>, relation: Relation, rhs: f64) {
        self.constraints.push(LinearConstraint { terms, relation, rhs });
    }

    pub fn set_objective(&mut self, terms: Vec<(usize, Coefficient)>) {
        self.objective = terms;
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn objective_value(&self, values: &[DMatrix<C64>]) -> f64 {
        self.objective.iter().map(|(v, c)| c.trace_with(&values[*v])).sum()
    }

    /// Relative violation of every constraint at `values`.
    pub fn violations(&self, values: &[DMatrix<C64>]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|con| {
                let lhs: f64 = con.terms.iter().map(|(v, c)| c.trace_with(&values[*v])).sum();
                let scale = con.terms.iter().map(|(_, c)| c.norm().powi(2)).sum::<f64>().sqrt().max(1e-300);
                let raw = match con.relation {
                    Relation::Le => (lhs - con.rhs).max(0.0),
                    Relation::Ge => (con.rhs - lhs).max(0.0),
                    Relation::Eq => (lhs - con.rhs).abs(),
                };
                raw / scale
            })
            .collect()
    }

    pub fn solve(&self, settings: &SolverSettings) -> SolveOutcome {
        let nvar = self.sizes.len();
        let mut blocks: Vec<usize> = self.sizes.iter().map(|n| 2 * n).collect();
        let mut rows = Vec::with_capacity(self.constraints.len());
        let mut rhs = Vec::with_capacity(self.constraints.len());
        for con in &self.constraints {
            let mut row: Vec<(usize, SymMat)> =
                con.terms.iter().map(|(v, c)| (*v, c.realify(self.sizes[*v]))).collect();
            let norm = row.iter().map(|(_, a)| a.norm_squared()).sum::<f64>().sqrt();
            let scale = if norm > 0.0 { 1.0 / norm } else { 1.0 };
            row.iter_mut().for_each(|(_, a)| a.scale(scale));
            let slack = match con.relation {
                Relation::Le => Some(1.0),
                Relation::Ge => Some(-1.0),
                Relation::Eq => None,
            };
            if let Some(sign) = slack {
                blocks.push(1);
                row.push((blocks.len() - 1, SymMat::Sparse(vec![(0, 0, sign)])));
            }
            rows.push(row);
            rhs.push(con.rhs * scale);
        }
        let mut objective: Vec<Option<SymMat>> = vec![None; blocks.len()];
        for (v, c) in &self.objective {
            let r = c.realify(self.sizes[*v]);
            objective[*v] = Some(match (objective[*v].take(), r) {
                (None, r) => r,
                (Some(SymMat::Dense(mut a)), SymMat::Dense(b)) => {
                    a += b;
                    SymMat::Dense(a)
                }
                (Some(a), b) => {
                    let n = blocks[*v];
                    let mut d = DMatrix::zeros(n, n);
                    for m in [a, b] {
                        match m {
                            SymMat::Dense(x) => d += x,
                            SymMat::Sparse(e) => e.iter().for_each(|&(p, q, val)| d[(p, q)] += val),
                        }
                    }
                    SymMat::Dense(d)
                }
            });
        }
        let c_norm = objective.iter().flatten().map(|c| c.norm_squared()).sum::<f64>().sqrt();
        let c_scale = if c_norm > 0.0 { 1.0 / c_norm } else { 1.0 };
        objective.iter_mut().flatten().for_each(|c| c.scale(c_scale));

        let real = RealProblem { blocks, objective, rows, rhs: DVector::from_vec(rhs) };
        let sol = ipm::solve(&real, settings.tolerance, settings.max_iterations);
        let values: Vec<DMatrix<C64>> = (0..nvar)
            .map(|v| {
                let n = self.sizes[v];
                let y = &sol.x[v];
                DMatrix::from_fn(n, n, |i, j| {
                    C64::new(
                        0.5 * (y[(i, j)] + y[(i + n, j + n)]),
                        0.5 * (y[(i + n, j)] - y[(i, j + n)]),
                    )
                })
            })
            .collect();
        let max_violation = self.violations(&values).into_iter().fold(0.0, f64::max);
        let status = match sol.status {
            RealStatus::Optimal => SolveStatus::Optimal,
            RealStatus::Infeasible => SolveStatus::Infeasible,
            RealStatus::Failure => SolveStatus::NumericalFailure,
        };
        SolveOutcome {
            status,
            objective: self.objective_value(&values),
            values,
            max_violation,
            iterations: sol.iterations,
        }
    }
}

/// Largest eigenvalue of a Hermitian matrix with a unit eigenvector.
pub fn max_eigpair(h: &DMatrix<C64>) -> (f64, DVector<C64>) {
    let herm = (h + h.adjoint()) * C64::from(0.5);
    let eig = SymmetricEigen::new(herm);
    let idx = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(idx).into_owned();
    let norm = v.norm();
    (eig.eigenvalues[idx], v / C64::from(norm))
}

/// `tr{X} - λ_max{X}`.
pub fn rank_one_residual(x: &DMatrix<C64>) -> f64 {
    let tr: f64 = x.diagonal().iter().map(|z| z.re).sum();
    tr - max_eigpair(x).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_minimization_with_pinned_corner() {
        let mut p = SdpProblem::new();
        let x = p.add_variable(2);
        p.set_objective(vec![(x, Coefficient::Diagonal(vec![(0, 1.0), (1, 1.0)]))]);
        p.add_constraint(vec![(x, Coefficient::Diagonal(vec![(0, 1.0)]))], Relation::Eq, 1.0);
        let out = p.solve(&SolverSettings::default());
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.objective - 1.0).abs() < 1e-7);
        assert!(out.values[0][(1, 1)].re.abs() < 1e-7);
    }

    #[test]
    fn contradiction_is_infeasible() {
        let mut p = SdpProblem::new();
        let x = p.add_variable(2);
        p.add_constraint(vec![(x, Coefficient::Diagonal(vec![(0, 1.0), (1, 1.0)]))], Relation::Le, 0.0);
        p.add_constraint(vec![(x, Coefficient::Diagonal(vec![(0, 1.0)]))], Relation::Eq, 1.0);
        assert_eq!(p.solve(&SolverSettings::default()).status, SolveStatus::Infeasible);
    }
}
