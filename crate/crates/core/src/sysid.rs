//! Gaussian exploration and least-squares estimates of the Markov operator.

use crate::lds::{recover_natures, MarkovOperator, NoiseSequence, SignalTrace, StateSpaceSystem};
use crate::linalg::{singular_values, Mat, Vector};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Condition number above which the regressor is treated as singular.
const MAX_COND: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub n: usize,
    pub h: usize,
    pub seed: u64,
}

impl EstimationConfig {
    pub fn new(n: usize, h: usize, seed: u64) -> Result<Self> {
        if h < 1 || n <= h {
            return Err(Error::InvalidParameter(format!("need N > h >= 1, got N = {n}, h = {h}")));
        }
        Ok(EstimationConfig { n, h, seed })
    }
}

/// i.i.d. `N(0, I)` inputs.
pub fn gaussian_inputs<R: Rng + ?Sized>(rng: &mut R, du: usize, n: usize) -> Vec<Vector> {
    (0..n).map(|_| Vector::from_fn(du, |_, _| rng.sample(StandardNormal))).collect()
}

/// Play Gaussian inputs for `n` steps of the given noise.
pub fn explore<R: Rng + ?Sized>(sys: &StateSpaceSystem, noise: &NoiseSequence, n: usize, rng: &mut R) -> Result<SignalTrace> {
    let inputs = gaussian_inputs(rng, sys.du(), n);
    let mut policy = |obs: &crate::lds::Observation| inputs[obs.t - 1].clone();
    crate::lds::simulate(sys, &mut policy, noise, n, None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatedMarkov {
    /// Lag 0 is zero (no feedthrough), lags above `h` are zero.
    pub g: MarkovOperator,
    pub n: usize,
    pub h: usize,
    /// Root-mean-square regression residual.
    pub residual: f64,
    /// `|G_hat^[1:h] - G^[1:h]|_{l1,op}` when the truth is supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_g: Option<f64>,
}

impl EstimatedMarkov {
    pub fn with_truth(mut self, truth: &MarkovOperator) -> Self {
        self.eps_g = Some(estimation_error(&self.g, truth, self.h));
        self
    }
}

pub fn estimation_error(est: &MarkovOperator, truth: &MarkovOperator, h: usize) -> f64 {
    (1..=h)
        .map(|i| {
            let z = Mat::zeros(truth.d_out, truth.d_in);
            let a = est.get(i).unwrap_or(&z);
            let b = truth.get(i).unwrap_or(&z);
            crate::linalg::op_norm(&(a - b))
        })
        .sum()
}

/// Least squares of `y_t` on `(u_{t-1}, ..., u_{t-h})` over `t = h+1..N`.
pub fn fit_markov(y: &[Vector], u: &[Vector], h: usize) -> Result<EstimatedMarkov> {
    let n = y.len().min(u.len());
    if h < 1 || n <= h {
        return Err(Error::InvalidParameter(format!("need N > h >= 1, got N = {n}, h = {h}")));
    }
    let (dy, du) = (y[0].len(), u[0].len());
    let rows = n - h;
    let cols = h * du;
    if rows < cols {
        return Err(Error::IllConditioned { cond: f64::INFINITY });
    }
    let x = Mat::from_fn(rows, cols, |r, c| {
        let t = r + h + 1;
        let (lag, k) = (c / du + 1, c % du);
        u[t - lag - 1][k]
    });
    let yy = Mat::from_fn(rows, dy, |r, c| y[r + h][c]);

    let qr = x.clone().qr();
    let rmat = qr.r();
    let sv = singular_values(&rmat);
    let cond = sv[0] / sv[sv.len() - 1];
    if !cond.is_finite() || cond > MAX_COND {
        return Err(Error::IllConditioned { cond });
    }
    let qty = qr.q().transpose() * &yy;
    let theta = rmat
        .solve_upper_triangular(&qty)
        .ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
    let resid = (&yy - &x * &theta).norm() / (rows as f64).sqrt();

    let mut g = MarkovOperator::zeros(dy, du, h);
    for i in 1..=h {
        let blk = theta.rows((i - 1) * du, du).transpose();
        g.blocks[i] = blk;
    }
    Ok(EstimatedMarkov { g, n, h, residual: resid, eps_g: None })
}

/// `y_t - sum_i G_hat^[i] u_{t-i}`.
pub fn estimated_natures(y: &[Vector], u: &[Vector], g: &MarkovOperator) -> Vec<Vector> {
    recover_natures(y, u, g)
}

/// `sqrt(d_max + log(1/delta) + log(1 + R_nat))`.
pub fn c_delta(d_max: usize, delta: f64, r_nat: f64) -> f64 {
    (d_max as f64 + (1.0 / delta).ln() + (1.0 + r_nat).ln()).sqrt()
}

/// High-probability bound on exploration inputs, `5 sqrt(d_u + 2 log(3/delta))`.
pub fn r_u_est(du: usize, delta: f64) -> f64 {
    5.0 * (du as f64 + 2.0 * (3.0 / delta).ln()).sqrt()
}

pub const C_EST: f64 = 14.0;

/// Plug-in estimation error `C_est h^2 R_nat C_delta / sqrt(N)`.
pub fn eps_plugin(h: usize, r_nat: f64, c_delta: f64, n: usize) -> f64 {
    C_EST * (h * h) as f64 * r_nat * c_delta / (n as f64).sqrt()
}

/// `(T h^2 R_M R_nat C_delta)^(2/3)` clipped to `[h+1, T/2]`.
pub fn default_exploration_length(t: usize, h: usize, r_m: f64, r_nat: f64, c_delta: f64) -> usize {
    let raw = (t as f64 * (h * h) as f64 * r_m * r_nat * c_delta).powf(2.0 / 3.0);
    let hi = (t / 2).max(h + 1);
    (raw.round() as usize).clamp(h + 1, hi)
}

/// Warn (and return true) when `psi_G(h+1)` exceeds the weakest cited
/// requirement `1/10`.
pub fn tail_warning(g: &MarkovOperator, h: usize) -> bool {
    let psi = g.decay_tail().at(h + 1) + g.tail;
    if psi > 0.1 {
        log::warn!("psi_G({}) = {psi:.3e} exceeds 1/10; estimates of lags 1..={h} are biased", h + 1);
        return true;
    }
    false
}
