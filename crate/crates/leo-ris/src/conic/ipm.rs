//! Primal-dual interior point method for real block SDPs in standard form
//!
//! ```text
//! min <C, X>  s.t.  <A_i, X> = b_i,  X = diag(X_1, ..., X_J) ⪰ 0
//! ```
//!
//! solved through the homogeneous self-dual embedding with the HKM search
//! direction and a Mehrotra predictor-corrector. Scalar cones are just 1x1
//! blocks.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

#[derive(Debug, Clone)]
pub(crate) enum SymMat {
    Dense(DMatrix<f64>),
    /// Full symmetric entry list (both triangles listed).
    Sparse(Vec<(usize, usize, f64)>),
}

impl SymMat {
    fn dot(&self, g: &DMatrix<f64>) -> f64 {
        match self {
            SymMat::Dense(a) => a.dot(g),
            SymMat::Sparse(e) => e.iter().map(|&(p, q, v)| v * g[(p, q)]).sum(),
        }
    }

    fn add_scaled(&self, target: &mut DMatrix<f64>, s: f64) {
        match self {
            SymMat::Dense(a) => *target += a * s,
            SymMat::Sparse(e) => {
                for &(p, q, v) in e {
                    target[(p, q)] += s * v;
                }
            }
        }
    }

    pub(crate) fn norm_squared(&self) -> f64 {
        match self {
            SymMat::Dense(a) => a.norm_squared(),
            SymMat::Sparse(e) => e.iter().map(|x| x.2 * x.2).sum(),
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        match self {
            SymMat::Dense(a) => *a *= s,
            SymMat::Sparse(e) => e.iter_mut().for_each(|x| x.2 *= s),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct RealProblem {
    pub blocks: Vec<usize>,
    pub objective: Vec<Option<SymMat>>,
    /// Row `i`: `(block, A_ij)` pairs.
    pub rows: Vec<Vec<(usize, SymMat)>>,
    pub rhs: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RealStatus {
    Optimal,
    Infeasible,
    Failure,
}

#[derive(Debug, Clone)]
pub(crate) struct RealSolution {
    pub status: RealStatus,
    pub x: Vec<DMatrix<f64>>,
    pub iterations: usize,
}

/// Items acting on one block: constraint rows, with the objective last.
struct BlockTerms<'a> {
    items: Vec<(usize, &'a SymMat)>,
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    s: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    ds: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Largest `a` with `x + a dx ⪰ 0` (infinite when `dx ⪰ 0`).
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    if x.nrows() == 1 {
        let d = dx[(0, 0)];
        return Some(if d < 0.0 { -x[(0, 0)] / d } else { f64::INFINITY });
    }
    let l = Cholesky::new(x.clone())?.unpack();
    let w1 = l.solve_lower_triangular(dx)?;
    let w = l.solve_lower_triangular(&w1.transpose())?;
    let lmin = sym(w).symmetric_eigenvalues().min();
    Some(if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY })
}

pub(crate) fn solve(p: &RealProblem, tol: f64, max_iter: usize) -> RealSolution {
    let m = p.rows.len();
    let nb = p.blocks.len();
    let mut per_block: Vec<BlockTerms> = (0..nb).map(|_| BlockTerms { items: Vec::new() }).collect();
    for (i, row) in p.rows.iter().enumerate() {
        for (j, a) in row {
            per_block[*j].items.push((i, a));
        }
    }
    for (j, c) in p.objective.iter().enumerate() {
        if let Some(c) = c {
            per_block[j].items.push((m, c));
        }
    }
    let nu: f64 = p.blocks.iter().sum::<usize>() as f64;
    let b = &p.rhs;
    let b_norm = b.norm();
    let c_norm = p.objective.iter().flatten().map(|c| c.norm_squared()).sum::<f64>().sqrt();

    let a_of = |z: &[DMatrix<f64>]| -> (DVector<f64>, f64) {
        let mut out = DVector::zeros(m);
        let mut cz = 0.0;
        for (j, bt) in per_block.iter().enumerate() {
            for &(i, a) in &bt.items {
                let v = a.dot(&z[j]);
                if i == m {
                    cz += v;
                } else {
                    out[i] += v;
                }
            }
        }
        (out, cz)
    };
    // Σ_i w_i A_ij + wc C_j
    let at_of = |w: &DVector<f64>, wc: f64| -> Vec<DMatrix<f64>> {
        per_block
            .iter()
            .zip(&p.blocks)
            .map(|(bt, &n)| {
                let mut out = DMatrix::zeros(n, n);
                for &(i, a) in &bt.items {
                    let s = if i == m { wc } else { w[i] };
                    if s != 0.0 {
                        a.add_scaled(&mut out, s);
                    }
                }
                out
            })
            .collect()
    };

    let mut it = Iterate {
        x: p.blocks.iter().map(|&n| DMatrix::identity(n, n)).collect(),
        s: p.blocks.iter().map(|&n| DMatrix::identity(n, n)).collect(),
        y: DVector::zeros(m),
        tau: 1.0,
        kappa: 1.0,
    };
    let fail = |it: &Iterate, k| RealSolution {
        status: RealStatus::Failure,
        x: it.x.iter().map(|x| x / it.tau).collect(),
        iterations: k,
    };

    let mut stalls = 0;
    for iter in 0..max_iter {
        // residuals
        let (ax, cx) = a_of(&it.x);
        let aty = at_of(&it.y, 0.0);
        let by = b.dot(&it.y);
        let r_p: DVector<f64> = b * it.tau - &ax;
        let r_d: Vec<DMatrix<f64>> = (0..nb)
            .map(|j| {
                let mut r = -&aty[j] - &it.s[j];
                if let Some(c) = &p.objective[j] {
                    c.add_scaled(&mut r, it.tau);
                }
                r
            })
            .collect();
        let r_g = by - cx - it.kappa;
        let xs: f64 = it.x.iter().zip(&it.s).map(|(x, s)| x.dot(s)).sum();
        let mu = (xs + it.tau * it.kappa) / (nu + 1.0);

        // termination
        let pres = r_p.norm() / it.tau / (1.0 + b_norm);
        let dres = r_d.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() / it.tau / (1.0 + c_norm);
        let (pobj, dobj) = (cx / it.tau, by / it.tau);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        if pres <= tol && dres <= tol && gap <= tol {
            return RealSolution {
                status: RealStatus::Optimal,
                x: it.x.iter().map(|x| x / it.tau).collect(),
                iterations: iter,
            };
        }
        if by > 0.0 {
            let ray: f64 = aty.iter().zip(&it.s).map(|(a, s)| (a + s).norm_squared()).sum::<f64>().sqrt();
            if ray / by <= tol {
                return RealSolution { status: RealStatus::Infeasible, x: it.x.clone(), iterations: iter };
            }
        }
        if cx < 0.0 && ax.norm() / -cx <= tol {
            // unbounded below; not expected for the problems built here
            return fail(&it, iter);
        }

        // Schur complement
        let mut s_inv = Vec::with_capacity(nb);
        for s in &it.s {
            match Cholesky::new(s.clone()) {
                Some(ch) => s_inv.push(ch.inverse()),
                None => return fail(&it, iter),
            }
        }
        let mut big = DMatrix::<f64>::zeros(m + 1, m + 1);
        for (j, bt) in per_block.iter().enumerate() {
            let x = &it.x[j];
            let si = &s_inv[j];
            let prods: Vec<Option<DMatrix<f64>>> = bt
                .items
                .iter()
                .map(|&(_, a)| match a {
                    SymMat::Dense(a) => Some(x * a * si),
                    SymMat::Sparse(_) => None,
                })
                .collect();
            for (u, &(i1, a1)) in bt.items.iter().enumerate() {
                for (w, &(i2, a2)) in bt.items.iter().enumerate().skip(u) {
                    let v = match (&prods[u], &prods[w], a1, a2) {
                        (_, Some(p2), _, _) => a1.dot(p2),
                        (Some(p1), None, _, _) => a2.dot(p1),
                        (None, None, SymMat::Sparse(e1), SymMat::Sparse(e2)) => {
                            let mut acc = 0.0;
                            for &(pp, q, v1) in e1 {
                                for &(r, s, v2) in e2 {
                                    acc += v1 * v2 * x[(pp, r)] * si[(s, q)];
                                }
                            }
                            acc
                        }
                        _ => unreachable!(),
                    };
                    big[(i1, i2)] += v;
                    if i1 != i2 {
                        big[(i2, i1)] += v;
                    }
                }
            }
        }
        let schur = big.view((0, 0), (m, m)).into_owned();
        let h = big.view((0, m), (m, 1)).column(0).into_owned();
        let cxx = big[(m, m)];
        let diag_max = schur.diagonal().max().max(1e-300);
        let mut chol: Option<Cholesky<f64, Dyn>> = None;
        let mut reg = 0.0;
        for _ in 0..6 {
            let mut trial = schur.clone();
            for i in 0..m {
                trial[(i, i)] += reg;
            }
            if let Some(c) = Cholesky::new(trial) {
                chol = Some(c);
                break;
            }
            reg = if reg == 0.0 { 1e-14 * diag_max } else { reg * 100.0 };
        }
        let Some(chol) = chol else { return fail(&it, iter) };
        let q = chol.solve(&(&h + b));
        let bh = b - &h;
        let denom_base = bh.dot(&q) + cxx + it.kappa / it.tau;

        let direction = |eta: f64, rhs: &[DMatrix<f64>], r_kappa: f64| -> Direction {
            let z: Vec<DMatrix<f64>> = (0..nb)
                .map(|j| {
                    if eta == 0.0 {
                        rhs[j].clone()
                    } else {
                        &rhs[j] - (&it.x[j] * &r_d[j] * &s_inv[j]) * eta
                    }
                })
                .collect();
            let (az, cz) = a_of(&z);
            let r1 = &r_p * eta - az;
            let r2 = -eta * r_g + cz + r_kappa / it.tau;
            let pv = chol.solve(&r1);
            let dtau = (r2 - bh.dot(&pv)) / denom_base;
            let dy = pv + &q * dtau;
            let w = at_of(&(-&dy), dtau);
            let ds: Vec<DMatrix<f64>> = (0..nb).map(|j| &r_d[j] * eta + &w[j]).collect();
            let dx: Vec<DMatrix<f64>> =
                (0..nb).map(|j| sym(&z[j] - &it.x[j] * &w[j] * &s_inv[j])).collect();
            let dkappa = (r_kappa - it.kappa * dtau) / it.tau;
            Direction { dx, ds, dy, dtau, dkappa }
        };
        let step_len = |d: &Direction| -> Option<f64> {
            let mut a = f64::INFINITY;
            for j in 0..nb {
                a = a.min(max_step(&it.x[j], &d.dx[j])?);
                a = a.min(max_step(&it.s[j], &d.ds[j])?);
            }
            if d.dtau < 0.0 {
                a = a.min(-it.tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                a = a.min(-it.kappa / d.dkappa);
            }
            Some(a)
        };

        // predictor
        let neg_x: Vec<DMatrix<f64>> = it.x.iter().map(|x| -x).collect();
        let aff = direction(1.0, &neg_x, -it.tau * it.kappa);
        let Some(a_aff) = step_len(&aff) else { return fail(&it, iter) };
        let a_aff = a_aff.min(1.0);
        let xs_aff: f64 = (0..nb)
            .map(|j| (&it.x[j] + &aff.dx[j] * a_aff).dot(&(&it.s[j] + &aff.ds[j] * a_aff)))
            .sum();
        let mu_aff =
            (xs_aff + (it.tau + a_aff * aff.dtau) * (it.kappa + a_aff * aff.dkappa)) / (nu + 1.0);
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let rhs: Vec<DMatrix<f64>> = (0..nb)
            .map(|j| &s_inv[j] * (sigma * mu) - &it.x[j] - &aff.dx[j] * &aff.ds[j] * &s_inv[j])
            .collect();
        let r_kappa = sigma * mu - it.tau * it.kappa - aff.dtau * aff.dkappa;
        let d = direction(1.0 - sigma, &rhs, r_kappa);
        let Some(a_max) = step_len(&d) else { return fail(&it, iter) };
        let alpha = (0.98 * a_max).min(1.0);
        if alpha < 1e-10 {
            stalls += 1;
            if stalls > 3 {
                return fail(&it, iter);
            }
        }
        for j in 0..nb {
            it.x[j] += &d.dx[j] * alpha;
            it.s[j] += &d.ds[j] * alpha;
        }
        it.y += &d.dy * alpha;
        it.tau += alpha * d.dtau;
        it.kappa += alpha * d.dkappa;
    }
    fail(&it, max_iter)
}
