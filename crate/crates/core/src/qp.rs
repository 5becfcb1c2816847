//! Dense convex quadratic programming with an implicit-differentiation
//! backward pass.
//!
//! Problems are stated as
//!
//! ```text
//!     minimize    z' H z + g' z          (note: no 1/2 factor)
//!     subject to  A_eq z  = b_eq
//!                 A_in z <= b_in
//! ```
//!
//! with `H` symmetric positive semidefinite, so the stationarity condition
//! reads `2 H z + g + A_eq' nu + A_in' lambda = 0`. The forward solver is a
//! Mehrotra predictor-corrector interior-point method followed by an
//! active-set polish step that drives the KKT residual to machine precision
//! on non-degenerate problems. The backward pass differentiates the KKT
//! system at the polished solution.

use nalgebra::{DMatrix, DVector};
use std::fmt;

/// Complementarity margin below which a constraint with both small
/// multiplier and small slack is treated as degenerate for differentiation.
pub const COMPLEMENTARITY_MARGIN: f64 = 1e-7;

const MAX_ITERATIONS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub enum QpError {
    DimensionMismatch(String),
    /// `H` is not symmetric within 1e-12.
    NotSymmetric,
    /// `H` has an eigenvalue below the PSD tolerance.
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    /// Backward pass requested on a non-optimal solution.
    NotOptimal,
    InvalidInput(String),
}

impl fmt::Display for QpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QpError::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            QpError::NotSymmetric => write!(f, "cost matrix is not symmetric"),
            QpError::NotPositiveSemidefinite { min_eigenvalue } => {
                write!(f, "cost matrix is not PSD (min eigenvalue {min_eigenvalue:e})")
            }
            QpError::NotOptimal => write!(f, "backward pass requires an optimal-status solution"),
            QpError::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl std::error::Error for QpError {}

/// Stacked problem data. Inequalities are rows `a · z <= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        h: DMatrix<f64>,
        g: DVector<f64>,
        a_eq: DMatrix<f64>,
        b_eq: DVector<f64>,
        a_in: DMatrix<f64>,
        b_in: DVector<f64>,
    ) -> Result<Self, QpError> {
        let n = h.nrows();
        if h.ncols() != n || g.len() != n {
            return Err(QpError::DimensionMismatch(format!(
                "H is {}x{}, g has length {}",
                h.nrows(),
                h.ncols(),
                g.len()
            )));
        }
        if a_eq.nrows() != b_eq.len() || (a_eq.nrows() > 0 && a_eq.ncols() != n) {
            return Err(QpError::DimensionMismatch("equality block".into()));
        }
        if a_in.nrows() != b_in.len() || (a_in.nrows() > 0 && a_in.ncols() != n) {
            return Err(QpError::DimensionMismatch("inequality block".into()));
        }
        for block in [
            h.as_slice(),
            g.as_slice(),
            a_eq.as_slice(),
            b_eq.as_slice(),
            a_in.as_slice(),
            b_in.as_slice(),
        ] {
            if !block.iter().all(|v| v.is_finite()) {
                return Err(QpError::InvalidInput("non-finite problem data".into()));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (h[(i, j)] - h[(j, i)]).abs() > 1e-12 {
                    return Err(QpError::NotSymmetric);
                }
            }
        }
        Ok(QpProblem {
            h,
            g,
            a_eq,
            b_eq,
            a_in,
            b_in,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.h.nrows()
    }

    pub fn num_eq(&self) -> usize {
        self.a_eq.nrows()
    }

    pub fn num_in(&self) -> usize {
        self.a_in.nrows()
    }

    fn check_psd(&self) -> Result<(), QpError> {
        let eig = self.h.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.min();
        let scale = eig.eigenvalues.amax().max(1.0);
        if min_eig < -1e-9 * scale {
            return Err(QpError::NotPositiveSemidefinite {
                min_eigenvalue: min_eig,
            });
        }
        Ok(())
    }

    /// Objective value `z' H z + g' z`.
    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        (z.transpose() * &self.h * z)[(0, 0)] + self.g.dot(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    SoftFallback,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// Equality multipliers.
    pub nu: DVector<f64>,
    /// Inequality multipliers, nonnegative at optimality.
    pub lambda: DVector<f64>,
    pub status: QpStatus,
    /// Max-norm KKT residual (stationarity, feasibility, complementarity),
    /// recorded for every status.
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Residuals of the KKT system at `(z, nu, lambda)`.
pub fn kkt_residual(p: &QpProblem, z: &DVector<f64>, nu: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    let mut stat = 2.0 * &p.h * z + &p.g;
    if p.num_eq() > 0 {
        stat += p.a_eq.transpose() * nu;
    }
    if p.num_in() > 0 {
        stat += p.a_in.transpose() * lambda;
    }
    let mut res = stat.amax();
    if p.num_eq() > 0 {
        res = res.max((&p.a_eq * z - &p.b_eq).amax());
    }
    if p.num_in() > 0 {
        let slack = &p.b_in - &p.a_in * z;
        for i in 0..p.num_in() {
            res = res.max(-slack[i]); // primal violation
            res = res.max(-lambda[i]); // dual violation
            res = res.max((lambda[i] * slack[i]).abs());
        }
    }
    res
}

fn solve_saddle(
    m: &DMatrix<f64>,
    a_eq: &DMatrix<f64>,
    rhs_top: &DVector<f64>,
    rhs_bot: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = m.nrows();
    let me = a_eq.nrows();
    let mut kkt = DMatrix::zeros(n + me, n + me);
    kkt.view_mut((0, 0), (n, n)).copy_from(m);
    if me > 0 {
        kkt.view_mut((0, n), (n, me)).copy_from(&a_eq.transpose());
        kkt.view_mut((n, 0), (me, n)).copy_from(a_eq);
    }
    let mut rhs = DVector::zeros(n + me);
    rhs.rows_mut(0, n).copy_from(rhs_top);
    if me > 0 {
        rhs.rows_mut(n, me).copy_from(rhs_bot);
    }
    let solved = solve_linear(&kkt, &rhs)?;
    Some((solved.rows(0, n).into(), solved.rows(n, me).into()))
}

fn regularized_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, QpError> {
    let n = a.nrows();
    let reg = a + DMatrix::identity(n, n) * 1e-9;
    reg.lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| QpError::InvalidInput("singular KKT system".into()))
}

/// LU solve with a regularized retry for near-singular systems.
fn solve_linear(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(x) = a.clone().lu().solve(b) {
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let n = a.nrows();
    let reg = a + DMatrix::identity(n, n) * 1e-11;
    let x = reg.lu().solve(b)?;
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

fn max_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    let mut alpha: f64 = 1.0;
    for i in 0..x.len() {
        if dx[i] < 0.0 {
            alpha = alpha.min(-x[i] / dx[i]);
        }
    }
    alpha
}

/// Solve the QP to the requested KKT tolerance.
///
/// Infeasible problems come back with `QpStatus::Failed` so the caller can
/// escalate to [`solve_soft`]; structurally invalid problems (asymmetric or
/// indefinite `H`) are errors.
pub fn solve(p: &QpProblem, tol: f64) -> Result<QpSolution, QpError> {
    if !(tol > 0.0) {
        return Err(QpError::InvalidInput(format!("tol={tol} must be > 0")));
    }
    p.check_psd()?;
    let n = p.num_vars();
    let mi = p.num_in();

    if mi == 0 {
        return Ok(solve_equality_only(p, tol));
    }

    // interior-point iteration on (z, nu, lambda, s)
    let mut z = DVector::zeros(n);
    let mut nu = DVector::zeros(p.num_eq());
    let mut lambda = DVector::from_element(mi, 1.0);
    let mut s = DVector::from_fn(mi, |i, _| {
        let viol = (p.a_in.row(i) * &z)[(0, 0)] - p.b_in[i];
        (viol + 1.0).max(1.0)
    });

    let mut best_residual = f64::INFINITY;
    for iter in 0..MAX_ITERATIONS {
        let residual = kkt_residual(p, &z, &nu, &lambda);
        best_residual = best_residual.min(residual);
        if residual <= tol {
            return Ok(finish_optimal(p, z, nu, lambda, tol, iter));
        }
        if !residual.is_finite() || lambda.amax() > 1e12 || z.amax() > 1e12 {
            break;
        }

        let r_d = 2.0 * &p.h * &z
            + &p.g
            + if p.num_eq() > 0 {
                p.a_eq.transpose() * &nu
            } else {
                DVector::zeros(n)
            }
            + p.a_in.transpose() * &lambda;
        let r_e = if p.num_eq() > 0 {
            &p.a_eq * &z - &p.b_eq
        } else {
            DVector::zeros(0)
        };
        let r_i = &p.a_in * &z + &s - &p.b_in;
        let mu = s.dot(&lambda) / mi as f64;

        // scaling matrix D = diag(lambda / s)
        let d = DVector::from_fn(mi, |i, _| lambda[i] / s[i]);
        let mut m = 2.0 * p.h.clone();
        for i in 0..mi {
            let row = p.a_in.row(i);
            for a in 0..n {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                for b in 0..n {
                    m[(a, b)] += d[i] * ra * row[b];
                }
            }
        }

        type Direction = (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>);
        let solve_direction = |r_c: &DVector<f64>| -> Option<Direction> {
            // eliminate (ds, dlambda), solve the saddle system in (dz, dnu)
            let mut rhs_top = -&r_d;
            for i in 0..mi {
                let coeff = (lambda[i] * r_i[i] - r_c[i]) / s[i];
                for a in 0..n {
                    rhs_top[a] -= p.a_in[(i, a)] * coeff;
                }
            }
            let rhs_bot = -&r_e;
            let (dz, dnu) = solve_saddle(&m, &p.a_eq, &rhs_top, &rhs_bot)?;
            let ds = -&r_i - &p.a_in * &dz;
            let dlambda = DVector::from_fn(mi, |i, _| -(r_c[i] + lambda[i] * ds[i]) / s[i]);
            Some((dz, dnu, ds, dlambda))
        };

        // predictor
        let r_c_aff = DVector::from_fn(mi, |i, _| s[i] * lambda[i]);
        let Some((_dz_a, _dnu_a, ds_a, dl_a)) = solve_direction(&r_c_aff) else {
            break;
        };
        let alpha_p_aff = max_step(&s, &ds_a).min(1.0);
        let alpha_d_aff = max_step(&lambda, &dl_a).min(1.0);
        let mu_aff = (0..mi)
            .map(|i| (s[i] + alpha_p_aff * ds_a[i]) * (lambda[i] + alpha_d_aff * dl_a[i]))
            .sum::<f64>()
            / mi as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // corrector
        let r_c = DVector::from_fn(mi, |i, _| {
            s[i] * lambda[i] + ds_a[i] * dl_a[i] - sigma * mu
        });
        let Some((dz, dnu, ds, dlambda)) = solve_direction(&r_c) else {
            break;
        };

        let alpha_p = (0.995 * max_step(&s, &ds)).min(1.0);
        let alpha_d = (0.995 * max_step(&lambda, &dlambda)).min(1.0);
        z += alpha_p * dz;
        s += alpha_p * ds;
        nu += alpha_d * dnu;
        lambda += alpha_d * dlambda;
    }

    let final_residual = kkt_residual(p, &z, &nu, &lambda);
    if final_residual <= tol {
        return Ok(finish_optimal(p, z, nu, lambda, tol, MAX_ITERATIONS));
    }
    Ok(QpSolution {
        z,
        nu,
        lambda,
        status: QpStatus::Failed,
        kkt_residual: final_residual,
        iterations: MAX_ITERATIONS,
    })
}

fn solve_equality_only(p: &QpProblem, tol: f64) -> QpSolution {
    let n = p.num_vars();
    let me = p.num_eq();
    let m = 2.0 * p.h.clone();
    let rhs_top = -p.g.clone();
    match solve_saddle(&m, &p.a_eq, &rhs_top, &p.b_eq) {
        Some((z, nu)) => {
            let lambda = DVector::zeros(0);
            let residual = kkt_residual(p, &z, &nu, &lambda);
            QpSolution {
                status: if residual <= tol {
                    QpStatus::Optimal
                } else {
                    QpStatus::Failed
                },
                kkt_residual: residual,
                z,
                nu,
                lambda,
                iterations: 1,
            }
        }
        None => QpSolution {
            z: DVector::zeros(n),
            nu: DVector::zeros(me),
            lambda: DVector::zeros(0),
            status: QpStatus::Failed,
            kkt_residual: f64::INFINITY,
            iterations: 1,
        },
    }
}

/// Refine a converged interior-point iterate by solving the KKT system of
/// the guessed active set exactly. Falls back to the iterate when the guess
/// is invalid.
fn finish_optimal(
    p: &QpProblem,
    z: DVector<f64>,
    nu: DVector<f64>,
    mut lambda: DVector<f64>,
    tol: f64,
    iterations: usize,
) -> QpSolution {
    let mi = p.num_in();
    let slack = &p.b_in - &p.a_in * &z;
    let active: Vec<usize> = (0..mi).filter(|&i| lambda[i] > slack[i]).collect();

    if let Some((pz, pnu, plambda_act)) = solve_active_kkt(p, &active) {
        let mut plambda = DVector::zeros(mi);
        for (k, &i) in active.iter().enumerate() {
            plambda[i] = plambda_act[k].max(0.0);
        }
        let valid_duals = active.iter().enumerate().all(|(k, _)| plambda_act[k] >= -1e-9);
        let feasible = if mi > 0 {
            (&p.a_in * &pz - &p.b_in).max() <= tol.max(1e-9)
        } else {
            true
        };
        let p_res = kkt_residual(p, &pz, &pnu, &plambda);
        if valid_duals && feasible && p_res <= kkt_residual(p, &z, &nu, &lambda) {
            return QpSolution {
                z: pz,
                nu: pnu,
                lambda: plambda,
                status: QpStatus::Optimal,
                kkt_residual: p_res,
                iterations,
            };
        }
    }

    for i in 0..mi {
        lambda[i] = lambda[i].max(0.0);
    }
    let residual = kkt_residual(p, &z, &nu, &lambda);
    QpSolution {
        z,
        nu,
        lambda,
        status: if residual <= tol {
            QpStatus::Optimal
        } else {
            QpStatus::Failed
        },
        kkt_residual: residual,
        iterations,
    }
}

/// Solve the equality-form KKT system treating `active` rows as equalities.
fn solve_active_kkt(
    p: &QpProblem,
    active: &[usize],
) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let n = p.num_vars();
    let me = p.num_eq();
    let ma = active.len();
    let dim = n + me + ma;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(2.0 * p.h.clone()));
    if me > 0 {
        kkt.view_mut((0, n), (n, me)).copy_from(&p.a_eq.transpose());
        kkt.view_mut((n, 0), (me, n)).copy_from(&p.a_eq);
    }
    for (k, &i) in active.iter().enumerate() {
        for a in 0..n {
            kkt[(a, n + me + k)] = p.a_in[(i, a)];
            kkt[(n + me + k, a)] = p.a_in[(i, a)];
        }
    }
    let mut rhs = DVector::zeros(dim);
    for a in 0..n {
        rhs[a] = -p.g[a];
    }
    for e in 0..me {
        rhs[n + e] = p.b_eq[e];
    }
    for (k, &i) in active.iter().enumerate() {
        rhs[n + me + k] = p.b_in[i];
    }
    let sol = kkt.clone().lu().solve(&rhs)?;
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    // one step of iterative refinement
    let resid = &rhs - &kkt * &sol;
    let sol = match kkt.clone().lu().solve(&resid) {
        Some(corr) => sol + corr,
        None => sol,
    };
    Some((
        sol.rows(0, n).into(),
        sol.rows(n, me).into(),
        sol.rows(n + me, ma).into(),
    ))
}

/// Solve the slack-relaxed QP: each selected inequality row `a · z <= b`
/// becomes `a · z <= b + s_i` with `s_i >= 0` penalized by
/// `slack_weight * ||s||^2`. Rows outside `slack_rows` stay hard.
///
/// Successful solves report `QpStatus::SoftFallback`; the returned `z` and
/// `lambda` are restricted to the original variables and rows.
pub fn solve_soft(
    p: &QpProblem,
    slack_rows: &[usize],
    slack_weight: f64,
    tol: f64,
) -> Result<QpSolution, QpError> {
    if !(slack_weight > 0.0) {
        return Err(QpError::InvalidInput(format!(
            "slack_weight={slack_weight} must be > 0"
        )));
    }
    if let Some(&bad) = slack_rows.iter().find(|&&i| i >= p.num_in()) {
        return Err(QpError::InvalidInput(format!(
            "slack row {bad} out of range ({} inequality rows)",
            p.num_in()
        )));
    }
    let n = p.num_vars();
    let k = slack_rows.len();
    let n_ext = n + k;
    let mi = p.num_in();

    let mut h = DMatrix::zeros(n_ext, n_ext);
    h.view_mut((0, 0), (n, n)).copy_from(&p.h);
    for j in 0..k {
        h[(n + j, n + j)] = slack_weight;
    }
    let mut g = DVector::zeros(n_ext);
    g.rows_mut(0, n).copy_from(&p.g);

    let mut a_eq = DMatrix::zeros(p.num_eq(), n_ext);
    if p.num_eq() > 0 {
        a_eq.view_mut((0, 0), (p.num_eq(), n)).copy_from(&p.a_eq);
    }

    // original rows (slacked rows gain a -s_j term) plus s >= 0 rows
    let mut a_in = DMatrix::zeros(mi + k, n_ext);
    let mut b_in = DVector::zeros(mi + k);
    if mi > 0 {
        a_in.view_mut((0, 0), (mi, n)).copy_from(&p.a_in);
        b_in.rows_mut(0, mi).copy_from(&p.b_in);
    }
    for (j, &row) in slack_rows.iter().enumerate() {
        a_in[(row, n + j)] = -1.0;
        a_in[(mi + j, n + j)] = -1.0;
        b_in[mi + j] = 0.0;
    }

    let ext = QpProblem::new(h, g, a_eq, p.b_eq.clone(), a_in, b_in)?;
    let sol = solve(&ext, tol)?;
    let status = match sol.status {
        QpStatus::Optimal => QpStatus::SoftFallback,
        other => other,
    };
    Ok(QpSolution {
        z: sol.z.rows(0, n).into(),
        nu: sol.nu,
        lambda: sol.lambda.rows(0, mi).into(),
        status,
        kkt_residual: sol.kkt_residual,
        iterations: sol.iterations,
    })
}

/// Gradients of a scalar loss with respect to the QP data, given the loss
/// gradient in the primal solution.
#[derive(Debug, Clone, PartialEq)]
pub struct QpGradients {
    pub dl_dh: DMatrix<f64>,
    pub dl_dg: DVector<f64>,
    pub dl_da_in: DMatrix<f64>,
    pub dl_db_in: DVector<f64>,
    pub dl_da_eq: DMatrix<f64>,
    pub dl_db_eq: DVector<f64>,
    /// Set when strict complementarity was violated (active set thresholded
    /// on the multipliers) or the active rows were linearly dependent
    /// (multipliers not unique, gradients taken from a regularized system).
    pub degenerate: bool,
}

/// Implicit differentiation of the KKT conditions at an optimal solution.
///
/// Rows with multipliers above [`COMPLEMENTARITY_MARGIN`] are treated as
/// active equalities; inactive rows receive exactly zero gradients. When a
/// row has both multiplier and slack inside the margin, the gradients are
/// still produced from the thresholded active set but flagged `degenerate`.
///
/// `dl_dh` uses the symmetric-pair convention: entry `(j, k)` is the
/// sensitivity to perturbing `H[j][k]` and `H[k][j]` together, so diagonal
/// entries are directly comparable with finite differences.
pub fn backward(
    p: &QpProblem,
    sol: &QpSolution,
    dl_dz: &DVector<f64>,
) -> Result<QpGradients, QpError> {
    if sol.status != QpStatus::Optimal {
        return Err(QpError::NotOptimal);
    }
    let n = p.num_vars();
    if dl_dz.len() != n {
        return Err(QpError::DimensionMismatch(format!(
            "dl_dz has length {}, expected {n}",
            dl_dz.len()
        )));
    }
    let me = p.num_eq();
    let mi = p.num_in();
    let slack = if mi > 0 {
        &p.b_in - &p.a_in * &sol.z
    } else {
        DVector::zeros(0)
    };
    let mut degenerate = false;
    let mut active = Vec::new();
    for i in 0..mi {
        if sol.lambda[i] > COMPLEMENTARITY_MARGIN {
            active.push(i);
        } else if slack[i] < COMPLEMENTARITY_MARGIN {
            degenerate = true;
        }
    }
    let ma = active.len();

    // symmetric KKT Jacobian of the active-set equality form
    let dim = n + me + ma;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(2.0 * p.h.clone()));
    if me > 0 {
        kkt.view_mut((0, n), (n, me)).copy_from(&p.a_eq.transpose());
        kkt.view_mut((n, 0), (me, n)).copy_from(&p.a_eq);
    }
    for (k, &i) in active.iter().enumerate() {
        for a in 0..n {
            kkt[(a, n + me + k)] = p.a_in[(i, a)];
            kkt[(n + me + k, a)] = p.a_in[(i, a)];
        }
    }
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, n).copy_from(dl_dz);
    // Full pivoting exposes rank deficiency (for example linearly dependent
    // active rows, where the multipliers are not unique and the solution
    // map is only piecewise differentiable); such gradients are computed
    // from a regularized system and flagged.
    let lu = kkt.clone().full_piv_lu();
    let pivot_max = lu.u().diagonal().amax();
    let pivot_min = lu
        .u()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let rank_ok = pivot_max > 0.0 && pivot_min > 1e-10 * pivot_max;
    let w = if rank_ok {
        match lu.solve(&rhs) {
            Some(w) if w.iter().all(|v| v.is_finite()) => w,
            _ => {
                degenerate = true;
                regularized_solve(&kkt, &rhs)?
            }
        }
    } else {
        degenerate = true;
        regularized_solve(&kkt, &rhs)?
    };
    let w_z: DVector<f64> = w.rows(0, n).into();
    let w_nu: DVector<f64> = w.rows(n, me).into();
    let w_act: DVector<f64> = w.rows(n + me, ma).into();

    let z = &sol.z;
    let mut dl_dh = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            dl_dh[(j, k)] = -(w_z[j] * z[k] + w_z[k] * z[j]);
        }
    }
    let dl_dg = -w_z.clone();
    let mut dl_db_in = DVector::zeros(mi);
    let mut dl_da_in = DMatrix::zeros(mi, n);
    for (k, &i) in active.iter().enumerate() {
        dl_db_in[i] = w_act[k];
        for a in 0..n {
            dl_da_in[(i, a)] = -(sol.lambda[i] * w_z[a] + w_act[k] * z[a]);
        }
    }
    let dl_db_eq = w_nu.clone();
    let mut dl_da_eq = DMatrix::zeros(me, n);
    for e in 0..me {
        for a in 0..n {
            dl_da_eq[(e, a)] = -(sol.nu[e] * w_z[a] + w_nu[e] * z[a]);
        }
    }

    Ok(QpGradients {
        dl_dh,
        dl_dg,
        dl_da_in,
        dl_db_in,
        dl_da_eq,
        dl_db_eq,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn empty_eq(n: usize) -> (DMatrix<f64>, DVector<f64>) {
        (DMatrix::zeros(0, n), DVector::zeros(0))
    }

    #[test]
    fn unconstrained_quadratic_recovers_target() {
        // min z'z - 2 r'z  ->  z = r
        let r = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let (ae, be) = empty_eq(3);
        let p = QpProblem::new(
            DMatrix::identity(3, 3),
            -2.0 * r.clone(),
            ae,
            be,
            DMatrix::zeros(0, 3),
            DVector::zeros(0),
        )
        .unwrap();
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.z, r, epsilon = 1e-8);
    }

    #[test]
    fn scalar_bound_active() {
        // min (z-2)^2 s.t. z <= 1  ->  z = 1, lambda = 2
        let (ae, be) = empty_eq(1);
        let p = QpProblem::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, -4.0),
            ae,
            be,
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.z[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(sol.lambda[0], 2.0, epsilon = 1e-7);
        assert!(sol.kkt_residual < 1e-8);
    }

    #[test]
    fn equality_constrained_symmetric() {
        // min ||z||^2 s.t. z1 + z2 = 2  ->  z = (1, 1), nu = -2
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_element(1, 2.0),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        )
        .unwrap();
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.z[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(sol.z[1], 1.0, epsilon = 1e-10);
        assert_relative_eq!(sol.nu[0], -2.0, epsilon = 1e-10);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let (ae, be) = empty_eq(2);
        let asym = QpProblem::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
            DVector::zeros(2),
            ae,
            be,
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        );
        assert!(matches!(asym, Err(QpError::NotSymmetric)));

        let (ae, be) = empty_eq(2);
        let indef = QpProblem::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            DVector::zeros(2),
            ae,
            be,
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        )
        .unwrap();
        assert!(matches!(
            solve(&indef, 1e-8),
            Err(QpError::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn infeasible_problem_fails() {
        // z <= 0 and -z <= -1 cannot hold together
        let (ae, be) = empty_eq(1);
        let p = QpProblem::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            ae,
            be,
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![0.0, -1.0]),
        )
        .unwrap();
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Failed);
    }

    #[test]
    fn soft_solve_matches_hard_on_feasible_problem() {
        let (ae, be) = empty_eq(1);
        let p = QpProblem::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, -4.0),
            ae,
            be,
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let hard = solve(&p, 1e-8).unwrap();
        let soft = solve_soft(&p, &[0], 1e6, 1e-8).unwrap();
        assert_eq!(soft.status, QpStatus::SoftFallback);
        assert_relative_eq!(soft.z[0], hard.z[0], epsilon = 1e-4);
    }

    #[test]
    fn soft_solve_balances_contradictory_rows() {
        // z <= 0 and z >= 1, both slacked with symmetric weight -> z = 0.5
        let (ae, be) = empty_eq(1);
        let p = QpProblem::new(
            DMatrix::zeros(1, 1),
            DVector::zeros(1),
            ae,
            be,
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![0.0, -1.0]),
        )
        .unwrap();
        let sol = solve_soft(&p, &[0, 1], 1e4, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::SoftFallback);
        assert_relative_eq!(sol.z[0], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn soft_solve_keeps_hard_rows_hard() {
        // hard rows z <= 0, z >= 1 (not slacked) stay contradictory
        let (ae, be) = empty_eq(1);
        let p = QpProblem::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            ae,
            be,
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![0.0, -1.0]),
        )
        .unwrap();
        let sol = solve_soft(&p, &[], 1e3, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Failed);
    }

    #[test]
    fn soft_solution_approaches_hard_with_weight() {
        // feasible problem with a mildly active constraint
        let (ae, be) = empty_eq(2);
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![-4.0, -2.0]),
            ae,
            be,
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let hard = solve(&p, 1e-10).unwrap();
        let mut prev = f64::INFINITY;
        for w in [1e2, 1e4, 1e6] {
            let soft = solve_soft(&p, &[0], w, 1e-10).unwrap();
            let dist = (&soft.z - &hard.z).amax();
            assert!(dist < prev);
            prev = dist;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn backward_inactive_bound() {
        // min (z-r)^2 s.t. z <= b with r < b: dz/dr = 1, dz/db = 0
        let r = 0.5;
        let (ae, be) = empty_eq(1);
        let p = QpProblem::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, -2.0 * r),
            ae,
            be,
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 2.0),
        )
        .unwrap();
        let sol = solve(&p, 1e-10).unwrap();
        let grads = backward(&p, &sol, &DVector::from_element(1, 1.0)).unwrap();
        // dl/dr = dl/dg * dg/dr = dl_dg * (-2)
        assert_relative_eq!(grads.dl_dg[0] * -2.0, 1.0, epsilon = 1e-8);
        assert_eq!(grads.dl_db_in[0], 0.0);
        assert!(!grads.degenerate);
    }

    #[test]
    fn backward_active_bound() {
        // same with r > b: dz/db = 1, dz/dr = 0
        let r = 3.0;
        let (ae, be) = empty_eq(1);
        let p = QpProblem::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, -2.0 * r),
            ae,
            be,
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 2.0),
        )
        .unwrap();
        let sol = solve(&p, 1e-10).unwrap();
        let grads = backward(&p, &sol, &DVector::from_element(1, 1.0)).unwrap();
        assert_relative_eq!(grads.dl_db_in[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(grads.dl_dg[0], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn backward_refuses_soft_solutions() {
        let (ae, be) = empty_eq(1);
        let p = QpProblem::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            ae,
            be,
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let soft = solve_soft(&p, &[0], 1e3, 1e-8).unwrap();
        assert!(matches!(
            backward(&p, &soft, &DVector::from_element(1, 1.0)),
            Err(QpError::NotOptimal)
        ));
    }

    #[test]
    fn duals_are_nonnegative_and_tight() {
        let (ae, be) = empty_eq(2);
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![-6.0, -6.0]),
            ae,
            be,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            DVector::from_vec(vec![1.0, 10.0]),
        )
        .unwrap();
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        for i in 0..2 {
            assert!(sol.lambda[i] >= -1e-9);
            if sol.lambda[i] > 1e-8 {
                let slack = sol.z[i] - p.b_in[i];
                assert!(slack.abs() < 1e-8);
            }
        }
    }
}
