//! Linear dynamical systems, Markov operators, simulation and Nature's y.
//!
//! Time starts at `t = 1` with `x_1 = 0`. Sequences are stored 0-based, so
//! `y[t - 1]` is the output at time `t`; anything at `t <= 0` is zero.

use crate::drc::Loss;
use crate::linalg::{self, block, op_norm, spectral_radius, Mat, Vector};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default tolerance on the spectral radius margin.
pub const EPS_RHO: f64 = 1e-6;
/// Default truncation tolerance for Markov operators.
pub const TAIL_TOL: f64 = 1e-12;
const MAX_HORIZON: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceSystem {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

impl StateSpaceSystem {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        let s = StateSpaceSystem { a, b, c, d };
        s.validate()?;
        Ok(s)
    }

    /// Plant without feedthrough (`D = 0`).
    pub fn plant(a: Mat, b: Mat, c: Mat) -> Result<Self> {
        let d = Mat::zeros(c.nrows(), b.ncols());
        Self::new(a, b, c, d)
    }

    fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        let bad = |msg: String| Err(Error::InvalidSystem(msg));
        if self.a.ncols() != n {
            return bad(format!("A is {}x{}", n, self.a.ncols()));
        }
        if self.b.nrows() != n {
            return bad(format!("B has {} rows, A has {}", self.b.nrows(), n));
        }
        if self.c.ncols() != n {
            return bad(format!("C has {} cols, A has {}", self.c.ncols(), n));
        }
        if self.d.nrows() != self.c.nrows() || self.d.ncols() != self.b.ncols() {
            return bad(format!(
                "D is {}x{}, expected {}x{}",
                self.d.nrows(),
                self.d.ncols(),
                self.c.nrows(),
                self.b.ncols()
            ));
        }
        Ok(())
    }

    pub fn dx(&self) -> usize {
        self.a.nrows()
    }
    pub fn du(&self) -> usize {
        self.b.ncols()
    }
    pub fn dy(&self) -> usize {
        self.c.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.a)
    }

    pub fn is_stable(&self) -> bool {
        self.is_stable_with(EPS_RHO)
    }

    pub fn is_stable_with(&self, eps: f64) -> bool {
        self.spectral_radius() < 1.0 - eps
    }

    /// Markov operator `(D, CB, CAB, ...)` up to `horizon`.
    pub fn markov(&self, horizon: usize) -> MarkovOperator {
        transfer_of(self, horizon)
    }
}

#[derive(Serialize, Deserialize)]
struct RawQuad {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
}

impl RawQuad {
    fn from_mats(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Self {
        RawQuad {
            a: linalg::rows_of(a),
            b: linalg::rows_of(b),
            c: linalg::rows_of(c),
            d: linalg::rows_of(d),
        }
    }

    /// Rebuild the four matrices. Shapes that cannot be read off empty rows
    /// (a memoryless controller) are taken from the other blocks.
    fn to_mats(&self) -> std::result::Result<(Mat, Mat, Mat, Mat), String> {
        let n = self.a.len();
        let n_out = self.d.len().max(self.c.len());
        let n_in = self
            .d
            .first()
            .map(|r| r.len())
            .or_else(|| self.b.first().map(|r| r.len()))
            .unwrap_or(0);
        let a = linalg::fix_shape(linalg::from_rows(&self.a, n)?, n, n)?;
        let b = linalg::fix_shape(linalg::from_rows(&self.b, n_in)?, n, n_in)?;
        let c = linalg::fix_shape(linalg::from_rows(&self.c, n)?, n_out, n)?;
        let d = linalg::fix_shape(linalg::from_rows(&self.d, n_in)?, n_out, n_in)?;
        Ok((a, b, c, d))
    }
}

impl Serialize for StateSpaceSystem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawQuad::from_mats(&self.a, &self.b, &self.c, &self.d).serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateSpaceSystem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawQuad::deserialize(d)?;
        let (a, b, c, dd) = raw.to_mats().map_err(serde::de::Error::custom)?;
        StateSpaceSystem::new(a, b, c, dd).map_err(serde::de::Error::custom)
    }
}

/// Linear dynamic controller `s' = A s + B y`, `u = C s + D y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ldc {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

impl Ldc {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        // same conformability rules as a plant, with d_pi allowed to be zero
        let sys = StateSpaceSystem::new(a, b, c, d)?;
        Ok(Ldc { a: sys.a, b: sys.b, c: sys.c, d: sys.d })
    }

    /// Static feedback `u = K y`.
    pub fn static_gain(k: Mat) -> Self {
        let (du, dy) = k.shape();
        Ldc { a: Mat::zeros(0, 0), b: Mat::zeros(0, dy), c: Mat::zeros(du, 0), d: k }
    }

    pub fn zero(du: usize, dy: usize) -> Self {
        Self::static_gain(Mat::zeros(du, dy))
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn du(&self) -> usize {
        self.d.nrows()
    }
    pub fn dy(&self) -> usize {
        self.d.ncols()
    }

    pub fn as_system(&self) -> StateSpaceSystem {
        StateSpaceSystem { a: self.a.clone(), b: self.b.clone(), c: self.c.clone(), d: self.d.clone() }
    }
}

impl Serialize for Ldc {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawQuad::from_mats(&self.a, &self.b, &self.c, &self.d).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ldc {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawQuad::deserialize(d)?;
        let (a, b, c, dd) = raw.to_mats().map_err(serde::de::Error::custom)?;
        Ldc::new(a, b, c, dd).map_err(serde::de::Error::custom)
    }
}

/// Truncated impulse response `G^[0..=horizon]`.
///
/// `tail` bounds the l1,op distance between the stored blocks and the
/// operator they were truncated from (zero for finite operators).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovOperator {
    #[serde(with = "linalg::rowmajor_list")]
    pub blocks: Vec<Mat>,
    pub d_out: usize,
    pub d_in: usize,
    #[serde(default)]
    pub tail: f64,
}

impl MarkovOperator {
    pub fn new(blocks: Vec<Mat>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::Dimension("Markov operator needs at least one block".into()))?;
        let (d_out, d_in) = first.shape();
        if blocks.iter().any(|b| b.shape() != (d_out, d_in)) {
            return Err(Error::Dimension("Markov blocks differ in shape".into()));
        }
        Ok(MarkovOperator { blocks, d_out, d_in, tail: 0.0 })
    }

    pub fn zeros(d_out: usize, d_in: usize, horizon: usize) -> Self {
        MarkovOperator { blocks: vec![Mat::zeros(d_out, d_in); horizon + 1], d_out, d_in, tail: 0.0 }
    }

    /// Identity at lag `k`, zero elsewhere.
    pub fn delay(d: usize, k: usize) -> Self {
        let mut g = Self::zeros(d, d, k);
        g.blocks[k] = Mat::identity(d, d);
        g
    }

    pub fn horizon(&self) -> usize {
        self.blocks.len() - 1
    }

    /// Block `i`, or `None` beyond the stored horizon (where it is zero).
    pub fn get(&self, i: usize) -> Option<&Mat> {
        self.blocks.get(i)
    }

    pub fn block_norms(&self) -> Vec<f64> {
        self.blocks.iter().map(op_norm).collect()
    }

    pub fn l1op_norm(&self) -> f64 {
        self.block_norms().iter().sum()
    }

    pub fn decay_tail(&self) -> DecayProfile {
        DecayProfile::from_norms(&self.block_norms())
    }

    /// Keep blocks `0..=h`; dropped mass is added to `tail`.
    pub fn truncate(&self, h: usize) -> MarkovOperator {
        if h >= self.horizon() {
            let mut g = self.clone();
            g.blocks.resize(h + 1, Mat::zeros(self.d_out, self.d_in));
            return g;
        }
        let dropped: f64 = self.blocks[h + 1..].iter().map(op_norm).sum();
        MarkovOperator {
            blocks: self.blocks[..=h].to_vec(),
            d_out: self.d_out,
            d_in: self.d_in,
            tail: self.tail + dropped,
        }
    }

    /// Drop trailing blocks while the accumulated tail stays below `tol`.
    pub fn trim(&self, tol: f64) -> MarkovOperator {
        let norms = self.block_norms();
        let mut tail = self.tail;
        let mut keep = norms.len();
        while keep > 1 && tail + norms[keep - 1] <= tol {
            tail += norms[keep - 1];
            keep -= 1;
        }
        MarkovOperator {
            blocks: self.blocks[..keep].to_vec(),
            d_out: self.d_out,
            d_in: self.d_in,
            tail,
        }
    }

    pub fn transpose(&self) -> MarkovOperator {
        MarkovOperator {
            blocks: self.blocks.iter().map(|b| b.transpose()).collect(),
            d_out: self.d_in,
            d_in: self.d_out,
            tail: self.tail,
        }
    }

    /// Right-multiply every block by a fixed matrix.
    pub fn mul_right(&self, m: &Mat) -> MarkovOperator {
        let blocks: Vec<Mat> = self.blocks.iter().map(|b| b * m).collect();
        MarkovOperator { d_out: self.d_out, d_in: m.ncols(), tail: self.tail * op_norm(m), blocks }
    }

    /// Stack two operators with the same input vertically.
    pub fn vstack(&self, other: &MarkovOperator) -> Result<MarkovOperator> {
        if self.d_in != other.d_in {
            return Err(Error::Dimension("vstack needs equal input dimension".into()));
        }
        let n = self.blocks.len().max(other.blocks.len());
        let blocks = (0..n)
            .map(|i| {
                let a = self.get(i).cloned().unwrap_or_else(|| Mat::zeros(self.d_out, self.d_in));
                let b = other.get(i).cloned().unwrap_or_else(|| Mat::zeros(other.d_out, other.d_in));
                linalg::vstack(&[&a, &b])
            })
            .collect();
        Ok(MarkovOperator {
            blocks,
            d_out: self.d_out + other.d_out,
            d_in: self.d_in,
            tail: self.tail + other.tail,
        })
    }

    /// Sum over lags `i in lags` with `i < t` of `G^[i] u_{t-i}`.
    pub fn apply_at(&self, inputs: &[Vector], t: usize, lags: std::ops::RangeInclusive<usize>) -> Vector {
        let mut out = Vector::zeros(self.d_out);
        let hi = (*lags.end()).min(self.horizon());
        for i in *lags.start()..=hi {
            if i >= t {
                break;
            }
            out.gemv(1.0, &self.blocks[i], &inputs[t - i - 1], 1.0);
        }
        out
    }

    /// Truncated convolution `G1 ⊙ G2` with the error of the inputs
    /// propagated into `tail`.
    pub fn convolve(&self, other: &MarkovOperator) -> Result<MarkovOperator> {
        if self.d_in != other.d_out {
            return Err(Error::Dimension(format!(
                "convolve: inner dimensions {} and {}",
                self.d_in, other.d_out
            )));
        }
        let n = self.horizon() + other.horizon();
        let mut blocks = vec![Mat::zeros(self.d_out, other.d_in); n + 1];
        for (i, a) in self.blocks.iter().enumerate() {
            for (j, b) in other.blocks.iter().enumerate() {
                blocks[i + j].gemm(1.0, a, b, 1.0);
            }
        }
        let (n1, n2) = (self.l1op_norm(), other.l1op_norm());
        let tail = self.tail * (n2 + other.tail) + other.tail * n1;
        Ok(MarkovOperator { blocks, d_out: self.d_out, d_in: other.d_in, tail })
    }
}

/// Nonincreasing tail sums `psi(n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub values: Vec<f64>,
}

impl DecayProfile {
    pub fn from_norms(norms: &[f64]) -> Self {
        let mut values = vec![0.0; norms.len()];
        let mut acc = 0.0;
        for i in (0..norms.len()).rev() {
            acc += norms[i];
            values[i] = acc;
        }
        DecayProfile { values }
    }

    /// `psi(n)`, zero past the stored range.
    pub fn at(&self, n: usize) -> f64 {
        self.values.get(n).copied().unwrap_or(0.0)
    }
}

/// `transfer_of` for an explicit horizon.
pub fn transfer_of(sys: &StateSpaceSystem, horizon: usize) -> MarkovOperator {
    let mut blocks = Vec::with_capacity(horizon + 1);
    blocks.push(sys.d.clone());
    let mut p = sys.b.clone();
    for _ in 1..=horizon {
        blocks.push(&sys.c * &p);
        p = &sys.a * &p;
    }
    MarkovOperator { blocks, d_out: sys.dy(), d_in: sys.du(), tail: 0.0 }
}

/// `transfer_of` truncated at the first horizon whose certified tail is at
/// most `tol`. The bound is `|C A^l| |B| sum_k |A^k|`, with the geometric sum
/// controlled through a power `p` where `|A^p| <= 1/2`.
pub fn transfer_auto(sys: &StateSpaceSystem, tol: f64) -> Result<MarkovOperator> {
    let rho = sys.spectral_radius();
    if rho >= 1.0 {
        return Err(Error::Unstable { rho, context: "transfer truncation".into() });
    }
    let power_sum = geometric_power_sum(&sys.a)?;
    let nb = op_norm(&sys.b);
    let mut blocks = vec![sys.d.clone()];
    let mut ca = sys.c.clone();
    loop {
        let bound = op_norm(&ca) * nb * power_sum;
        if bound <= tol {
            return Ok(MarkovOperator { blocks, d_out: sys.dy(), d_in: sys.du(), tail: bound });
        }
        if blocks.len() > MAX_HORIZON {
            return Err(Error::NoConvergence { iters: MAX_HORIZON, context: "transfer truncation".into() });
        }
        blocks.push(&ca * &sys.b);
        ca = &ca * &sys.a;
    }
}

/// Upper bound on `sum_{k >= 0} |A^k|`.
pub fn geometric_power_sum(a: &Mat) -> Result<f64> {
    let n = a.nrows();
    let mut p = Mat::identity(n, n);
    let mut partial: f64 = 0.0;
    for _ in 0..MAX_HORIZON {
        let np = op_norm(&p);
        if np <= 0.5 {
            return Ok(2.0 * partial.max(1.0));
        }
        partial += np;
        p = a * &p;
    }
    Err(Error::NoConvergence { iters: MAX_HORIZON, context: "power sum".into() })
}

/// Process and measurement noise, indexed like every other sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSequence {
    #[serde(with = "linalg::vector_list")]
    pub w: Vec<Vector>,
    #[serde(with = "linalg::vector_list")]
    pub e: Vec<Vector>,
}

impl NoiseSequence {
    pub fn zeros(dx: usize, dy: usize, t: usize) -> Self {
        NoiseSequence { w: vec![Vector::zeros(dx); t], e: vec![Vector::zeros(dy); t] }
    }

    pub fn len(&self) -> usize {
        self.w.len().min(self.e.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stacked `(w_t; e_t)` for 1-based `t`.
    pub fn stacked(&self, t: usize) -> Vector {
        linalg::vcat(&[&self.w[t - 1], &self.e[t - 1]])
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SignalTrace {
    pub x: Vec<Vector>,
    pub y: Vec<Vector>,
    pub u: Vec<Vector>,
    pub w: Vec<Vector>,
    pub e: Vec<Vector>,
    pub loss: Vec<f64>,
    pub y_nat_hat: Option<Vec<Vector>>,
    pub eta_nat_hat: Option<Vec<Vector>>,
}

impl SignalTrace {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn total_loss(&self) -> f64 {
        self.loss.iter().sum()
    }
}

/// What a policy sees at time `t`: outputs up to `t`, inputs and losses up
/// to `t - 1`.
pub struct Observation<'a> {
    pub t: usize,
    pub y: &'a [Vector],
    pub u: &'a [Vector],
    pub loss: &'a [f64],
}

pub trait Policy {
    fn act(&mut self, obs: &Observation) -> Vector;
}

impl<F: FnMut(&Observation) -> Vector> Policy for F {
    fn act(&mut self, obs: &Observation) -> Vector {
        self(obs)
    }
}

/// Runs an LDC as a policy.
pub struct LdcPolicy<'a> {
    pi: &'a Ldc,
    s: Vector,
}

impl<'a> LdcPolicy<'a> {
    pub fn new(pi: &'a Ldc) -> Self {
        LdcPolicy { pi, s: Vector::zeros(pi.dim()) }
    }
}

impl Policy for LdcPolicy<'_> {
    fn act(&mut self, obs: &Observation) -> Vector {
        let y = &obs.y[obs.t - 1];
        let u = &self.pi.c * &self.s + &self.pi.d * y;
        self.s = &self.pi.a * &self.s + &self.pi.b * y;
        u
    }
}

/// Simulate the plant for `t_max` steps under `policy`.
pub fn simulate(
    sys: &StateSpaceSystem,
    policy: &mut dyn Policy,
    noise: &NoiseSequence,
    t_max: usize,
    loss: Option<&dyn Loss>,
) -> Result<SignalTrace> {
    if sys.d.iter().any(|v| *v != 0.0) {
        return Err(Error::InvalidSystem("plant feedthrough D must be zero".into()));
    }
    if noise.len() < t_max {
        return Err(Error::LengthMismatch(noise.len(), t_max));
    }
    let mut tr = SignalTrace::default();
    let mut x = Vector::zeros(sys.dx());
    for t in 1..=t_max {
        let y = &sys.c * &x + &noise.e[t - 1];
        tr.x.push(x.clone());
        tr.y.push(y);
        let u = policy.act(&Observation { t, y: &tr.y, u: &tr.u, loss: &tr.loss });
        if u.len() != sys.du() {
            return Err(Error::Dimension(format!("policy returned {} inputs, plant takes {}", u.len(), sys.du())));
        }
        let l = loss.map_or(0.0, |l| l.value(t, &tr.y[t - 1], &u));
        x = &sys.a * &x + &sys.b * &u + &noise.w[t - 1];
        tr.u.push(u);
        tr.loss.push(l);
    }
    tr.w = noise.w[..t_max].to_vec();
    tr.e = noise.e[..t_max].to_vec();
    Ok(tr)
}

/// Zero-input outputs `y^nat_t`.
pub fn natures_signal(sys: &StateSpaceSystem, noise: &NoiseSequence) -> Vec<Vector> {
    let mut x = Vector::zeros(sys.dx());
    let mut out = Vec::with_capacity(noise.len());
    for t in 0..noise.len() {
        out.push(&sys.c * &x + &noise.e[t]);
        x = &sys.a * &x + &noise.w[t];
    }
    out
}

/// `y_t - sum_{i=1}^{t-1} G^[i] u_{t-i}` for every `t`, using all stored lags.
pub fn recover_natures(y: &[Vector], u: &[Vector], g: &MarkovOperator) -> Vec<Vector> {
    recover_natures_upto(y, u, g, g.horizon())
}

/// As [`recover_natures`] but only lags `1..=h`.
pub fn recover_natures_upto(y: &[Vector], u: &[Vector], g: &MarkovOperator, h: usize) -> Vec<Vector> {
    (1..=y.len()).map(|t| &y[t - 1] - g.apply_at(u, t, 1..=h)).collect()
}

/// Closed loop of a plant and an LDC driven by `(w, e)` with output `(y, u)`.
#[derive(Clone, Debug)]
pub struct ClosedLoop {
    pub system: StateSpaceSystem,
    /// `(A_cl, B_cl_e, C_cl_u, D_pi)`: the `e -> u` channel.
    pub e_to_u: StateSpaceSystem,
}

pub fn closed_loop_of(sys: &StateSpaceSystem, pi: &Ldc) -> Result<ClosedLoop> {
    if pi.dy() != sys.dy() || pi.du() != sys.du() {
        return Err(Error::Dimension(format!(
            "controller maps {} -> {}, plant has d_y = {}, d_u = {}",
            pi.dy(),
            pi.du(),
            sys.dy(),
            sys.du()
        )));
    }
    let (dx, dy, dp) = (sys.dx(), sys.dy(), pi.dim());
    let bd = &sys.b * &pi.d;
    let a11 = &sys.a + &bd * &sys.c;
    let a12 = &sys.b * &pi.c;
    let a21 = &pi.b * &sys.c;
    let a_cl = block(&[vec![&a11, &a12], vec![&a21, &pi.a]]);
    let i_x = Mat::identity(dx, dx);
    let z_px = Mat::zeros(dp, dx);
    let b_cl = block(&[vec![&i_x, &bd], vec![&z_px, &pi.b]]);
    let dc = &pi.d * &sys.c;
    let z_yp = Mat::zeros(dy, dp);
    let c_cl = block(&[vec![&sys.c, &z_yp], vec![&dc, &pi.c]]);
    let z_yx = Mat::zeros(dy, dx);
    let i_y = Mat::identity(dy, dy);
    let z_ux = Mat::zeros(sys.du(), dx);
    let d_cl = block(&[vec![&z_yx, &i_y], vec![&z_ux, &pi.d]]);
    let b_e = linalg::vstack(&[&bd, &pi.b]);
    let c_u = linalg::hstack(&[&dc, &pi.c]);
    Ok(ClosedLoop {
        system: StateSpaceSystem { a: a_cl.clone(), b: b_cl, c: c_cl, d: d_cl },
        e_to_u: StateSpaceSystem { a: a_cl, b: b_e, c: c_u, d: pi.d.clone() },
    })
}
