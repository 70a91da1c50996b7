//! Best fixed DRC in hindsight.

use drc_core::drc::{project_class, response_jacobian, Drc, DrcClass, Loss};
use drc_core::lds::MarkovOperator;
use drc_core::linalg::{block_diag, sym_max_eig, Mat, Vector};
use serde::{Deserialize, Serialize};

pub const REL_TOL: f64 = 1e-8;
/// Iterates must also settle: `|x_{k+1} - x_k| <= STEP_TOL (1 + |x_{k+1}|)`.
pub const STEP_TOL: f64 = 1e-10;

/// Counterfactual data: `v_t(M) = v_nat_t + J_t vec(M)`.
pub struct Counterfactual<'a> {
    /// `u_ex -> (y, u)` including the direct `[0; I]` block at lag 0.
    pub g_out: &'a MarkovOperator,
    /// Signals the DRC acts on (Nature's y or eta).
    pub signals: &'a [Vector],
    /// Stacked `(y, u)` under zero exogenous input.
    pub v_nat: &'a [Vector],
    pub dy: usize,
    pub loss: &'a dyn Loss,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Hindsight {
    pub drc: Drc,
    /// `sum_t f_t(M*)`.
    pub objective: f64,
    /// `f_t(M*)` per step.
    #[serde(skip)]
    pub per_step: Vec<f64>,
    pub iters: usize,
}

impl Counterfactual<'_> {
    fn jacobians(&self, m: usize, ds: usize) -> Vec<Mat> {
        let h = self.g_out.horizon();
        (1..=self.v_nat.len())
            .map(|t| response_jacobian(self.g_out, 0, h, m, ds, self.signals, t))
            .collect()
    }

    fn split<'v>(&self, v: &'v Vector) -> (Vector, Vector) {
        let du = v.len() - self.dy;
        (v.rows(0, self.dy).into_owned(), v.rows(self.dy, du).into_owned())
    }

    fn per_step(&self, jac: &[Mat], theta: &Vector) -> Vec<f64> {
        jac.iter()
            .enumerate()
            .map(|(i, j)| {
                let (y, u) = self.split(&(&self.v_nat[i] + j * theta));
                self.loss.value(i + 1, &y, &u)
            })
            .collect()
    }

    fn value_grad(&self, jac: &[Mat], theta: &Vector) -> (f64, Vector) {
        let mut f = 0.0;
        let mut g = Vector::zeros(theta.len());
        for (i, j) in jac.iter().enumerate() {
            let (y, u) = self.split(&(&self.v_nat[i] + j * theta));
            f += self.loss.value(i + 1, &y, &u);
            let (gy, gu) = self.loss.gradient(i + 1, &y, &u);
            let gv = drc_core::linalg::vcat(&[&gy, &gu]);
            g.gemv_tr(1.0, j, &gv, 1.0);
        }
        (f, g)
    }
}

/// Projected gradient descent (FISTA when every loss is quadratic) on the
/// summed counterfactual loss over the class, from `M = 0`.
pub fn best_in_hindsight(class: &DrcClass, problem: &Counterfactual, ds: usize, max_iters: usize) -> Hindsight {
    let du = problem.g_out.d_in;
    let m = class.m;
    let n = m * du * ds;
    let proj = |v: Vector| project_class(&Drc::from_vector(&v, m, du, ds), class).to_vector();
    let t_len = problem.v_nat.len();
    if t_len == 0 {
        let drc = proj(Vector::zeros(n));
        return Hindsight { drc: Drc::from_vector(&drc, m, du, ds), objective: 0.0, per_step: vec![], iters: 0 };
    }
    let jac = problem.jacobians(m, ds);

    let hess: Option<Vec<Mat>> = (1..=t_len)
        .map(|t| problem.loss.hessian(t, problem.dy, du).map(|(a, b)| block_diag(&[&a, &b])))
        .collect();
    let (theta, iters) = match hess {
        Some(hs) => {
            // f(theta) = c + b' theta + theta' Q theta / 2
            let mut q = Mat::zeros(n, n);
            let mut b = Vector::zeros(n);
            let mut c = 0.0;
            for (i, j) in jac.iter().enumerate() {
                let (y, u) = problem.split(&problem.v_nat[i]);
                c += problem.loss.value(i + 1, &y, &u);
                let (gy, gu) = problem.loss.gradient(i + 1, &y, &u);
                b.gemv_tr(1.0, j, &drc_core::linalg::vcat(&[&gy, &gu]), 1.0);
                let hj = &hs[i] * j;
                q.gemm_tr(1.0, j, &hj, 1.0);
            }
            q = (&q + q.transpose()) * 0.5;
            let lip = sym_max_eig(&q).max(1e-300);
            let f = |x: &Vector| c + b.dot(x) + 0.5 * x.dot(&(&q * x));
            fista(n, |x| (f(x), &b + &q * x), proj, 1.0 / lip, max_iters)
        }
        None => pgd_backtracking(n, |x| problem.value_grad(&jac, x), proj, max_iters),
    };
    let per_step = problem.per_step(&jac, &theta);
    Hindsight { drc: Drc::from_vector(&theta, m, du, ds), objective: per_step.iter().sum(), per_step, iters }
}

fn converged(prev: f64, cur: f64, x: &Vector, xn: &Vector) -> bool {
    (prev - cur).abs() <= REL_TOL * prev.abs().max(1e-300) && (xn - x).norm() <= STEP_TOL * (1.0 + xn.norm())
}

fn fista<F, P>(n: usize, fg: F, proj: P, step: f64, max_iters: usize) -> (Vector, usize)
where
    F: Fn(&Vector) -> (f64, Vector),
    P: Fn(Vector) -> Vector,
{
    let mut x = proj(Vector::zeros(n));
    let mut z = x.clone();
    let mut tk: f64 = 1.0;
    let mut prev = fg(&x).0;
    for k in 1..=max_iters {
        let (_, g) = fg(&z);
        let xn = proj(&z - g * step);
        let fx = fg(&xn).0;
        // monotone restart
        if fx > prev {
            z = x.clone();
            tk = 1.0;
            continue;
        }
        let tn = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
        z = &xn + (&xn - &x) * ((tk - 1.0) / tn);
        tk = tn;
        let done = converged(prev, fx, &x, &xn);
        x = xn;
        if done {
            return (x, k);
        }
        prev = fx;
    }
    (x, max_iters)
}

fn pgd_backtracking<F, P>(n: usize, fg: F, proj: P, max_iters: usize) -> (Vector, usize)
where
    F: Fn(&Vector) -> (f64, Vector),
    P: Fn(Vector) -> Vector,
{
    let mut x = proj(Vector::zeros(n));
    let (mut f, mut g) = fg(&x);
    let mut step = 1.0;
    for k in 1..=max_iters {
        loop {
            let xn = proj(&x - &g * step);
            let d = &xn - &x;
            let (fn_, gn) = fg(&xn);
            if fn_ <= f + g.dot(&d) + d.norm_squared() / (2.0 * step) || step < 1e-16 {
                let done = converged(f, fn_, &x, &xn);
                x = xn;
                f = fn_;
                g = gn;
                step *= 2.0;
                if done {
                    return (x, k);
                }
                break;
            }
            step /= 2.0;
        }
    }
    (x, max_iters)
}
