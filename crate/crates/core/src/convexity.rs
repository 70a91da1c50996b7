//! Toeplitz constructions, torus functionals and strong-convexity certificates.

use crate::drc_ex::ExTransferSet;
use crate::lds::{MarkovOperator, StateSpaceSystem};
use crate::linalg::{op_norm, psd_sqrt, sigma_k, sigma_min, singular_values, sym_min_eig, Mat};
use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

type CMat = DMatrix<Complex<f64>>;

pub const DEFAULT_GRID: usize = 4096;

fn block_or_zero(g: &MarkovOperator, i: isize) -> Option<&Mat> {
    if i < 0 {
        None
    } else {
        g.get(i as usize)
    }
}

/// Lower block-Toeplitz operator: `(k+1) x (h+1)` blocks, block `(r, c)` is
/// `G^[r-c]` when `0 <= r - c <= l`.
pub fn toep_op(g: &MarkovOperator, h: usize, k: usize, l: usize) -> Mat {
    let (dout, din) = (g.d_out, g.d_in);
    let mut out = Mat::zeros((k + 1) * dout, (h + 1) * din);
    for r in 0..=k {
        for c in 0..=h.min(r) {
            let lag = r - c;
            if lag > l {
                continue;
            }
            if let Some(b) = g.get(lag) {
                out.view_mut((r * dout, c * din), (dout, din)).copy_from(b);
            }
        }
    }
    out
}

/// Upper block-Toeplitz matrix with `m` block rows and `k` block columns,
/// block `(r, c)` equal to `G^[i + c - r]` for `c >= r`.
pub fn toep_window(g: &MarkovOperator, i: usize, m: usize, k: usize) -> Mat {
    let (dout, din) = (g.d_out, g.d_in);
    let mut out = Mat::zeros(m * dout, k * din);
    for r in 0..m {
        for c in r..k {
            if let Some(b) = block_or_zero(g, (i + c - r) as isize) {
                out.view_mut((r * dout, c * din), (dout, din)).copy_from(b);
            }
        }
    }
    out
}

/// `[I A A^2 ...; 0 I A ...; ...]` with `m` block rows.
pub fn pow_toeplitz(a: &Mat, m: usize) -> Mat {
    let d = a.nrows();
    let mut powers = vec![Mat::identity(d, d)];
    for j in 1..m {
        powers.push(a * &powers[j - 1]);
    }
    let mut out = Mat::zeros(m * d, m * d);
    for r in 0..m {
        for c in r..m {
            out.view_mut((r * d, c * d), (d, d)).copy_from(&powers[c - r]);
        }
    }
    out
}

/// Nilpotent dilation of square blocks: first block row `[0, I, G^[m], ..., G^[1]]`,
/// block row `j` (2..=m+1) has `I` in block column `j+1`.
pub fn nilpotent_dilation(g: &MarkovOperator, m: usize) -> Mat {
    let d = g.d_out;
    assert_eq!(d, g.d_in, "nilpotent dilation needs square blocks");
    let n = m + 2;
    let mut out = Mat::zeros(n * d, n * d);
    let id = Mat::identity(d, d);
    out.view_mut((0, d), (d, d)).copy_from(&id);
    for i in 1..=m {
        let col = n - i; // G^[1] sits in the last block column
        if let Some(b) = g.get(i) {
            out.view_mut((0, col * d), (d, d)).copy_from(b);
        }
    }
    for j in 1..=m {
        out.view_mut((j * d, (j + 1) * d), (d, d)).copy_from(&id);
    }
    out
}

/// The selectors `(L, R)` with `L Nilp^i R = G^[i]` for `1 <= i <= m` and `I` at `i = 0`.
pub fn nilpotent_selectors(d: usize, m: usize) -> (Mat, Mat) {
    let n = m + 2;
    let mut l = Mat::zeros(d, n * d);
    l.view_mut((0, 0), (d, d)).fill_with_identity();
    let mut r = Mat::zeros(n * d, d);
    r.view_mut((0, 0), (d, d)).fill_with_identity();
    r.view_mut(((n - 1) * d, 0), (d, d)).fill_with_identity();
    (l, r)
}

/// `sigma_min(C) / (1 + |A|)` with `sigma_min(C)` counted as `sigma_{d_y}`.
pub fn toeplitz_w_bound(sys: &StateSpaceSystem) -> f64 {
    sigma_k(&sys.c, sys.dy()) / (1.0 + op_norm(&sys.a))
}

/// The noise-to-output operator `(0, C, CA, CA^2, ...)`.
pub fn noise_operator(sys: &StateSpaceSystem, horizon: usize) -> MarkovOperator {
    let mut g = MarkovOperator::zeros(sys.dy(), sys.dx(), horizon);
    let mut p = sys.c.clone();
    for i in 1..=horizon {
        g.blocks[i] = p.clone();
        p = &p * &sys.a;
    }
    g
}

/// `sigma_{d_y m}(Toep_{1,m,k}(G_w))` by SVD; needs `k >= m`.
pub fn toeplitz_w_actual(sys: &StateSpaceSystem, m: usize, k: usize) -> f64 {
    let g = noise_operator(sys, k + 1);
    sigma_k(&toep_window(&g, 1, m, k), sys.dy() * m)
}

/// `1 / (2 + sum_{i=1}^m |G^[i]|)` for `G^[0] = I`.
pub fn toeplitz_zero_bound(g: &MarkovOperator, m: usize) -> f64 {
    let s: f64 = (1..=m).filter_map(|i| g.get(i)).map(op_norm).sum();
    1.0 / (2.0 + s)
}

/// `1 / sum_{j=0}^m s^j` with `s = sum_{i=1}^m |G^[i]|`. The square window is
/// block unitriangular, so its inverse is a Neumann sum of order `m`.
pub fn toeplitz_zero_bound_neumann(g: &MarkovOperator, m: usize) -> f64 {
    let s: f64 = (1..=m).filter_map(|i| g.get(i)).map(op_norm).sum();
    let total: f64 = (0..=m as i32).map(|j| s.powi(j)).sum();
    1.0 / total
}

/// Z-transform `sum_i G^[i] z^-i` on the unit circle.
pub enum ZSource<'a> {
    Markov(&'a MarkovOperator),
    StateSpace(&'a StateSpaceSystem),
}

pub fn z_transform(src: &ZSource, theta: f64) -> CMat {
    let z = Complex::from_polar(1.0, theta);
    match src {
        ZSource::Markov(g) => {
            let zi = z.inv();
            let mut acc = CMat::zeros(g.d_out, g.d_in);
            let mut p = Complex::new(1.0, 0.0);
            for b in &g.blocks {
                acc += b.map(|v| Complex::new(v, 0.0)) * p;
                p *= zi;
            }
            acc
        }
        ZSource::StateSpace(s) => {
            let n = s.dx();
            let cz = |m: &Mat| m.map(|v| Complex::new(v, 0.0));
            let lhs = CMat::identity(n, n) * z - cz(&s.a);
            let x = lhs.lu().solve(&cz(&s.b)).expect("z on the unit circle is not an eigenvalue");
            cz(&s.d) + cz(&s.c) * x
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HFunctionals {
    /// Certified lower bound on `min_theta sigma_{d_in}(G(e^{i theta}))`.
    pub h_min: f64,
    /// Upper bound on `max_theta |G(e^{i theta})|`.
    pub h_inf: f64,
    /// Change between the coarse and fine grids.
    pub refinement_gap: f64,
}

fn grid_extremes(src: &ZSource, din: usize, dout: usize, n: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for j in 0..n {
        let th = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        let g = z_transform(src, th);
        let mut sv: Vec<f64> = g.svd(false, false).singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        hi = hi.max(sv.first().copied().unwrap_or(0.0));
        let s = if din > dout { 0.0 } else { sv.get(din - 1).copied().unwrap_or(0.0) };
        lo = lo.min(s);
    }
    (lo, hi)
}

/// `H_min` and `H_inf` on a uniform grid of `n_theta` points, refined once;
/// the refinement gap (and the stored truncation tail) is subtracted from
/// `H_min` and added to `H_inf`.
pub fn h_functionals(src: &ZSource, n_theta: usize) -> HFunctionals {
    let (din, dout, tail) = match src {
        ZSource::Markov(g) => (g.d_in, g.d_out, g.tail),
        ZSource::StateSpace(s) => (s.du(), s.dy(), 0.0),
    };
    let (lo1, hi1) = grid_extremes(src, din, dout, n_theta);
    let (lo2, hi2) = grid_extremes(src, din, dout, 2 * n_theta);
    let gap = (lo1 - lo2).abs().max((hi1 - hi2).abs());
    HFunctionals { h_min: (lo2 - gap - tail).max(0.0), h_inf: hi2 + gap + tail, refinement_gap: gap }
}

/// Squared `H_[h]` functional: the least eigenvalue of the Gram matrix of the
/// full Toeplitz operator on windows of length `h+1`, less the truncation tail.
pub fn h_block_functional(g: &MarkovOperator, h: usize) -> f64 {
    if g.d_in > g.d_out * (g.horizon() + h + 1) {
        return 0.0;
    }
    let t = toep_op(g, h, g.horizon() + h, g.horizon());
    let lam = sym_min_eig(&(t.transpose() * &t)).max(0.0);
    (lam.sqrt() - g.tail).max(0.0).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    StableFormula,
    StaticFeedbackFormula,
    HFunctional,
    ToeplitzProduct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideConditions {
    pub psi_ex: f64,
    pub bound_ex: f64,
    pub psi_noise: f64,
    pub bound_noise: f64,
    /// Both conditions with the tail taken at `h`.
    pub satisfied_at_h: bool,
    /// Both conditions with the tail taken at `h + 1`.
    pub satisfied_at_h1: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCertificate {
    pub alpha_f: f64,
    pub provenance: Provenance,
    pub m: usize,
    pub h: usize,
    pub k: usize,
    pub sigma_w: f64,
    pub sigma_e: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_conditions: Option<SideConditions>,
}

impl ConvexityCertificate {
    fn simple(alpha_f: f64, provenance: Provenance, sigma_w: f64, sigma_e: f64) -> Self {
        ConvexityCertificate { alpha_f: alpha_f.max(0.0), provenance, m: 0, h: 0, k: 0, sigma_w, sigma_e, side_conditions: None }
    }

    pub fn better(self, other: Self) -> Self {
        if other.alpha_f > self.alpha_f {
            other
        } else {
            self
        }
    }
}

/// `alpha_loss (sigma_e^2 + sigma_w^2 sigma_min(C)^2 / (1 + |A|)^2)`.
pub fn alpha_stable(sys: &StateSpaceSystem, sigma_w: f64, sigma_e: f64, alpha_loss: f64) -> ConvexityCertificate {
    let sc = toeplitz_w_bound(sys);
    let a = alpha_loss * (sigma_e * sigma_e + sigma_w * sigma_w * sc * sc);
    ConvexityCertificate::simple(a, Provenance::StableFormula, sigma_w, sigma_e)
}

/// Closed-form bounds for a static output feedback `u = K y` nominal; the
/// largest applicable case is returned.
pub fn alpha_static_feedback(sys: &StateSpaceSystem, k: &Mat, sigma_w: f64, sigma_e: f64, alpha_loss: f64) -> ConvexityCertificate {
    let inv2 = |x: f64| if x == 0.0 { 1.0 } else { (x * x).recip().min(1.0) };
    let (sw2, se2) = (sigma_w * sigma_w, sigma_e * sigma_e);
    let nk = op_norm(k);
    let mut best: f64 = 0.0;
    let s2 = sw2.min(se2);
    if s2 > 0.0 {
        best = best.max(s2 / 32.0 * inv2(nk) * inv2(op_norm(&(&sys.b * k))));
    }
    let ak = &sys.a + &sys.b * k * &sys.c;
    let sc = sigma_k(&sys.c, sys.dy());
    best = best.max(sw2 / 16.0 * inv2(nk) * sc * sc / (1.0 + op_norm(&ak)).powi(2));
    if nk == 0.0 {
        best = best.max(se2 / 2.0 + sw2 / 2.0 * sc * sc / (1.0 + op_norm(&sys.a)).powi(2));
    }
    ConvexityCertificate::simple(alpha_loss * best, Provenance::StaticFeedbackFormula, sigma_w, sigma_e)
}

/// `G_noise = G_{(w,e) -> eta} Sigma^{1/2}`.
pub fn noise_operator_scaled(set: &ExTransferSet, sigma_noise: &Mat) -> MarkovOperator {
    set.noise_to_eta.mul_right(&psd_sqrt(sigma_noise))
}

/// `alpha_loss / 2 * H_[m](G_ex)^2 * H_[m+h](G_noise^T)^2` with its side conditions.
pub fn alpha_general(set: &ExTransferSet, sigma_noise: &Mat, alpha_loss: f64, m: usize, h: usize) -> ConvexityCertificate {
    let gex = &set.ex_to_out;
    let gn = noise_operator_scaled(set, sigma_noise);
    let gnt = gn.transpose();
    let a = 0.5 * h_block_functional(gex, m) * h_block_functional(&gnt, m + h);
    let psi_ex = |n: usize| gex.decay_tail().at(n) + gex.tail;
    let psi_n = |n: usize| gn.decay_tail().at(n) + gn.tail;
    let bound_ex = h_block_functional(gex, h).sqrt() / (8.0 * (m + h) as f64);
    let bound_noise = h_block_functional(&gnt, (m + h).saturating_sub(1)).sqrt() / (2.0 * (m + h) as f64);
    let side = SideConditions {
        psi_ex: psi_ex(h),
        bound_ex,
        psi_noise: psi_n(h),
        bound_noise,
        satisfied_at_h: psi_ex(h) <= bound_ex && psi_n(h) <= bound_noise,
        satisfied_at_h1: psi_ex(h + 1) <= bound_ex && psi_n(h + 1) <= bound_noise,
    };
    if !side.satisfied_at_h {
        log::warn!("curvature side conditions fail at h = {h} (psi_ex {:.2e} vs {:.2e}, psi_noise {:.2e} vs {:.2e})", side.psi_ex, bound_ex, side.psi_noise, bound_noise);
    }
    let diag = sigma_noise.diagonal();
    let n = diag.len();
    let dx = n - set.noise_to_eta.d_out.min(n);
    let sw = diag.rows(0, dx).min().max(0.0).sqrt();
    let se = diag.rows(dx, n - dx).min().max(0.0).sqrt();
    ConvexityCertificate {
        alpha_f: alpha_loss * a,
        provenance: Provenance::HFunctional,
        m,
        h,
        k: m + 2 * h,
        sigma_w: sw,
        sigma_e: se,
        side_conditions: Some(side),
    }
}

/// `sigma_{d_u m}(Toep_{m-1;m+h-1,h}(G_ex))^2 * sigma_{d_eta(m+h)}(Toep_{m+h-1;k}(G_noise^T))^2`.
pub fn toeplitz_alpha(set: &ExTransferSet, sigma_noise: &Mat, m: usize, h: usize, k: usize) -> f64 {
    let gex = &set.ex_to_out;
    let t1 = toep_op(gex, m - 1, m + h - 1, h);
    let s1 = sigma_k(&t1, gex.d_in * m);
    let gnt = noise_operator_scaled(set, sigma_noise).transpose();
    let t2 = toep_op(&gnt, m + h - 1, k, k);
    let s2 = sigma_k(&t2, gnt.d_in * (m + h));
    s1 * s1 * s2 * s2
}

pub fn sigma_min_pow_toeplitz(a: &Mat, m: usize) -> f64 {
    sigma_min(&pow_toeplitz(a, m))
}

/// Largest singular value (used in norm checks).
pub fn top_singular(m: &Mat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}
