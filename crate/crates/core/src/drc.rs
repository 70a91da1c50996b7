//! The DRC class, counterfactual losses and their gradients.
//!
//! A DRC `M = (M^[0], ..., M^[m-1])` plays `u_t = sum_i M^[i] s_{t-i}` where
//! `s` is an estimate of Nature's y (or Nature's eta). Signal histories are
//! 0-based slices: `signals[t - 1]` is the signal at time `t`.

use crate::lds::{closed_loop_of, transfer_of, Ldc, MarkovOperator, StateSpaceSystem};
use crate::linalg::{self, op_norm, Mat, Vector};
use crate::projection::project_l1_linf;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Drc {
    #[serde(rename = "M_blocks", with = "linalg::rowmajor_list")]
    pub blocks: Vec<Mat>,
}

impl Drc {
    pub fn zeros(m: usize, du: usize, ds: usize) -> Self {
        Drc { blocks: vec![Mat::zeros(du, ds); m] }
    }

    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    pub fn du(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn ds(&self) -> usize {
        self.blocks[0].ncols()
    }

    pub fn n_params(&self) -> usize {
        self.m() * self.du() * self.ds()
    }

    pub fn l1op_norm(&self) -> f64 {
        self.blocks.iter().map(op_norm).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
    }

    /// Parameters block by block, each block column-major.
    pub fn to_vector(&self) -> Vector {
        let mut v = Vec::with_capacity(self.n_params());
        for b in &self.blocks {
            v.extend_from_slice(b.as_slice());
        }
        Vector::from_vec(v)
    }

    pub fn from_vector(v: &Vector, m: usize, du: usize, ds: usize) -> Self {
        let k = du * ds;
        let blocks = (0..m)
            .map(|j| Mat::from_column_slice(du, ds, &v.as_slice()[j * k..(j + 1) * k]))
            .collect();
        Drc { blocks }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Drc) -> Drc {
        Drc { blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b * s).collect() }
    }

    pub fn as_ldc_blocks(&self) -> MarkovOperator {
        MarkovOperator::new(self.blocks.clone()).expect("DRC blocks share a shape")
    }
}

/// The ball `{M : |M|_{l1,op} <= radius}` with memory `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrcClass {
    pub m: usize,
    pub radius: f64,
}

impl DrcClass {
    pub fn new(m: usize, radius: f64) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidParameter("memory m must be at least 1".into()));
        }
        if radius.is_nan() || radius < 1.0 {
            return Err(Error::InvalidParameter(format!("radius {radius} below 1")));
        }
        Ok(DrcClass { m, radius })
    }
}

/// Curvature and Lipschitz tags of a loss; `None` when the loss has none.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossConstants {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub lipschitz: Option<f64>,
}

pub trait Loss: Send + Sync {
    fn value(&self, t: usize, y: &Vector, u: &Vector) -> f64;
    fn gradient(&self, t: usize, y: &Vector, u: &Vector) -> (Vector, Vector);
    /// Constant Hessian blocks `(d2/dy2, d2/du2)` when the loss is quadratic
    /// with no `y`/`u` cross term.
    fn hessian(&self, _t: usize, _dy: usize, _du: usize) -> Option<(Mat, Mat)> {
        None
    }
    fn constants(&self) -> LossConstants {
        LossConstants::default()
    }
}

/// `y'Qy + u'Ru`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Quadratic {
    #[serde(with = "linalg::rowmajor")]
    pub q: Mat,
    #[serde(with = "linalg::rowmajor")]
    pub r: Mat,
}

impl Quadratic {
    pub fn identity(dy: usize, du: usize) -> Self {
        Quadratic { q: Mat::identity(dy, dy), r: Mat::identity(du, du) }
    }
}

impl Loss for Quadratic {
    fn value(&self, _t: usize, y: &Vector, u: &Vector) -> f64 {
        y.dot(&(&self.q * y)) + u.dot(&(&self.r * u))
    }

    fn gradient(&self, _t: usize, y: &Vector, u: &Vector) -> (Vector, Vector) {
        ((&self.q + self.q.transpose()) * y, (&self.r + self.r.transpose()) * u)
    }

    fn hessian(&self, _t: usize, _dy: usize, _du: usize) -> Option<(Mat, Mat)> {
        Some((&self.q + self.q.transpose(), &self.r + self.r.transpose()))
    }

    fn constants(&self) -> LossConstants {
        let (hq, hr) = self.hessian(0, 0, 0).unwrap();
        let lo = linalg::sym_min_eig(&hq).min(linalg::sym_min_eig(&hr));
        let hi = linalg::sym_max_eig(&hq).max(linalg::sym_max_eig(&hr));
        LossConstants { alpha: (lo > 0.0).then_some(lo), beta: Some(hi), lipschitz: Some(hi / 2.0) }
    }
}

/// `|y - r_t|^2 + lambda |u|^2` with a reference fixed before the run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tracking {
    pub reference: Vec<Vec<f64>>,
    pub lambda: f64,
}

impl Tracking {
    fn target(&self, t: usize, dy: usize) -> Vector {
        match self.reference.get(t.wrapping_sub(1)) {
            Some(r) => Vector::from_column_slice(r),
            None => Vector::zeros(dy),
        }
    }
}

impl Loss for Tracking {
    fn value(&self, t: usize, y: &Vector, u: &Vector) -> f64 {
        (y - self.target(t, y.len())).norm_squared() + self.lambda * u.norm_squared()
    }

    fn gradient(&self, t: usize, y: &Vector, u: &Vector) -> (Vector, Vector) {
        ((y - self.target(t, y.len())) * 2.0, u * (2.0 * self.lambda))
    }

    fn hessian(&self, _t: usize, dy: usize, du: usize) -> Option<(Mat, Mat)> {
        Some((Mat::identity(dy, dy) * 2.0, Mat::identity(du, du) * (2.0 * self.lambda)))
    }

    fn constants(&self) -> LossConstants {
        let lo = 2.0 * self.lambda.min(1.0);
        let hi = 2.0 * self.lambda.max(1.0);
        LossConstants { alpha: (lo > 0.0).then_some(lo), beta: Some(hi), lipschitz: None }
    }
}

/// Smoothed Huber `H(|y|) + lambda H(|u|)` with `H(r) = d^2 (sqrt(1 + r^2/d^2) - 1)`.
/// Lipschitz and smooth, not strongly convex.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PseudoHuber {
    pub delta: f64,
    pub lambda: f64,
}

impl PseudoHuber {
    fn h(&self, r2: f64) -> f64 {
        let d2 = self.delta * self.delta;
        d2 * ((1.0 + r2 / d2).sqrt() - 1.0)
    }

    fn dh(&self, v: &Vector) -> Vector {
        let d2 = self.delta * self.delta;
        v / (1.0 + v.norm_squared() / d2).sqrt()
    }
}

impl Loss for PseudoHuber {
    fn value(&self, _t: usize, y: &Vector, u: &Vector) -> f64 {
        self.h(y.norm_squared()) + self.lambda * self.h(u.norm_squared())
    }

    fn gradient(&self, _t: usize, y: &Vector, u: &Vector) -> (Vector, Vector) {
        (self.dh(y), self.dh(u) * self.lambda)
    }

    fn constants(&self) -> LossConstants {
        let w = self.lambda.max(1.0);
        LossConstants { alpha: None, beta: Some(w), lipschitz: Some(w * self.delta) }
    }
}

fn signal(signals: &[Vector], s: isize) -> Option<&Vector> {
    if s < 1 {
        None
    } else {
        signals.get(s as usize - 1)
    }
}

/// `u_t(M) = sum_i M^[i] s_{t-i}`, zero-padded before time 1.
pub fn control_input(m: &Drc, signals: &[Vector], t: usize) -> Vector {
    let mut u = Vector::zeros(m.du());
    for (i, b) in m.blocks.iter().enumerate() {
        if let Some(s) = signal(signals, t as isize - i as isize) {
            u.gemv(1.0, b, s, 1.0);
        }
    }
    u
}

/// `base + sum_{i=first..=h} G^[i] u_{t-i}(M_{t-i})` with `window[i] = M_{t-i}`.
pub fn response(
    window: &[&Drc],
    g: &MarkovOperator,
    first_lag: usize,
    h: usize,
    base: &Vector,
    signals: &[Vector],
    t: usize,
) -> Vector {
    let mut v = base.clone();
    for i in first_lag..=h.min(g.horizon()) {
        if i >= t {
            break;
        }
        let u = control_input(window[i.min(window.len() - 1)], signals, t - i);
        v.gemv(1.0, &g.blocks[i], &u, 1.0);
    }
    v
}

/// Add the gradient of `<gv, response(M, ...)>` in the unary slot to `grad`.
pub fn accumulate_pullback(
    grad: &mut Drc,
    g: &MarkovOperator,
    first_lag: usize,
    h: usize,
    gv: &Vector,
    signals: &[Vector],
    t: usize,
) {
    let mut a = Vector::zeros(g.d_in);
    for i in first_lag..=h.min(g.horizon()) {
        if i >= t {
            break;
        }
        a.gemv_tr(1.0, &g.blocks[i], gv, 0.0);
        for (j, b) in grad.blocks.iter_mut().enumerate() {
            if let Some(s) = signal(signals, t as isize - i as isize - j as isize) {
                b.ger(1.0, &a, s, 1.0);
            }
        }
    }
}

/// Jacobian of the unary response with respect to `M.to_vector()`.
pub fn response_jacobian(
    g: &MarkovOperator,
    first_lag: usize,
    h: usize,
    m: usize,
    ds: usize,
    signals: &[Vector],
    t: usize,
) -> Mat {
    let du = g.d_in;
    let mut jac = Mat::zeros(g.d_out, m * du * ds);
    for i in first_lag..=h.min(g.horizon()) {
        if i >= t {
            break;
        }
        let gi = &g.blocks[i];
        for j in 0..m {
            let Some(s) = signal(signals, t as isize - i as isize - j as isize) else { continue };
            for c in 0..ds {
                if s[c] == 0.0 {
                    continue;
                }
                for r in 0..du {
                    let col = j * du * ds + c * du + r;
                    let mut dst = jac.column_mut(col);
                    dst.axpy(s[c], &gi.column(r), 1.0);
                }
            }
        }
    }
    jac
}

/// Counterfactual `(y, u)` at time `t` for the window `M_t, ..., M_{t-h}`.
pub fn counterfactual_vu(window: &[&Drc], g: &MarkovOperator, signals: &[Vector], t: usize) -> (Vector, Vector) {
    let h = window.len() - 1;
    let y = response(window, g, 1, h, &signals[t - 1], signals, t);
    (y, control_input(window[0], signals, t))
}

pub fn counterfactual_loss(window: &[&Drc], g: &MarkovOperator, signals: &[Vector], t: usize, loss: &dyn Loss) -> f64 {
    let (y, u) = counterfactual_vu(window, g, signals, t);
    loss.value(t, &y, &u)
}

/// Unary loss `f_t(M)`: the counterfactual loss with every slot equal to `M`.
pub fn unary_loss(m: &Drc, g: &MarkovOperator, h: usize, signals: &[Vector], t: usize, loss: &dyn Loss) -> f64 {
    counterfactual_loss(&vec![m; h + 1], g, signals, t, loss)
}

/// Exact gradient of [`unary_loss`].
pub fn unary_gradient(m: &Drc, g: &MarkovOperator, h: usize, signals: &[Vector], t: usize, loss: &dyn Loss) -> Drc {
    let window = vec![m; h + 1];
    let (y, u) = counterfactual_vu(&window, g, signals, t);
    let (gy, gu) = loss.gradient(t, &y, &u);
    let mut grad = Drc::zeros(m.m(), m.du(), m.ds());
    accumulate_pullback(&mut grad, g, 1, h, &gy, signals, t);
    for (j, b) in grad.blocks.iter_mut().enumerate() {
        if let Some(s) = signal(signals, t as isize - j as isize) {
            b.ger(1.0, &gu, s, 1.0);
        }
    }
    grad
}

/// Frobenius projection onto the class ball: per-block SVD, then the mixed
/// l1/linf projection of the singular values.
pub fn project_class(m: &Drc, class: &DrcClass) -> Drc {
    if m.l1op_norm() <= class.radius {
        return m.clone();
    }
    let svds: Vec<_> = m.blocks.iter().map(|b| b.clone().svd(true, true)).collect();
    let groups: Vec<Vec<f64>> = svds.iter().map(|s| s.singular_values.iter().copied().collect()).collect();
    let shrunk = project_l1_linf(&groups, class.radius);
    let blocks = svds
        .iter()
        .zip(&shrunk)
        .map(|(s, y)| {
            let u = s.u.as_ref().unwrap();
            let vt = s.v_t.as_ref().unwrap();
            let d = Mat::from_diagonal(&Vector::from_column_slice(y));
            u * d * vt
        })
        .collect();
    Drc { blocks }
}

/// Truncate the `e -> u` response of the closed loop `(sys, pi)` to `m` blocks.
pub fn drc_from_ldc(pi: &Ldc, sys: &StateSpaceSystem, m: usize) -> Result<Drc> {
    let cl = closed_loop_of(sys, pi)?;
    let rho = cl.system.spectral_radius();
    if rho >= 1.0 {
        return Err(Error::Unstable { rho, context: "closed loop of plant and controller".into() });
    }
    Ok(Drc { blocks: transfer_of(&cl.e_to_u, m.saturating_sub(1)).blocks })
}

/// `L_f = L sqrt(m) R_nat^2 R_G^2 R_M`.
pub fn lipschitz_constant(l: f64, m: usize, r_nat: f64, r_g: f64, r_m: f64) -> f64 {
    l * (m as f64).sqrt() * r_nat * r_nat * r_g * r_g * r_m
}
