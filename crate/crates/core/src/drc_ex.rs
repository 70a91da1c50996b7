//! Plants stabilized by a nominal controller with exogenous inputs.
//!
//! The nominal controller runs `s' = A s + B y + B_u u_ex`, plays
//! `u = C s + D y + u_ex` and reports the control output `eta = C_eta s + D_eta y`.
//! A DRC on Nature's eta supplies `u_ex`.

use crate::drc::{Drc, Loss};
use crate::lds::{closed_loop_of, transfer_auto, transfer_of, Ldc, MarkovOperator, NoiseSequence, StateSpaceSystem, TAIL_TOL};
use crate::linalg::{self, block, hstack, spectral_radius, vstack, Mat, Vector};
use crate::oco::{drive, DrcGdConfig, DrcGdRun, ExModel};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LdcEx {
    #[serde(rename = "A", with = "linalg::rowmajor")]
    pub a: Mat,
    #[serde(rename = "B", with = "linalg::rowmajor")]
    pub b: Mat,
    #[serde(rename = "C", with = "linalg::rowmajor")]
    pub c: Mat,
    #[serde(rename = "D", with = "linalg::rowmajor")]
    pub d: Mat,
    #[serde(rename = "B_u", with = "linalg::rowmajor")]
    pub b_u: Mat,
    #[serde(rename = "C_eta", with = "linalg::rowmajor")]
    pub c_eta: Mat,
    #[serde(rename = "D_eta", with = "linalg::rowmajor")]
    pub d_eta: Mat,
}

impl LdcEx {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat, b_u: Mat, c_eta: Mat, d_eta: Mat) -> Result<Self> {
        let ldc = Ldc::new(a, b, c, d)?;
        let n = ldc.dim();
        let ok = b_u.shape() == (n, ldc.du()) && c_eta.ncols() == n && d_eta.shape() == (c_eta.nrows(), ldc.dy());
        if !ok {
            return Err(Error::Dimension("exogenous or control-output matrices do not conform".into()));
        }
        Ok(LdcEx { a: ldc.a, b: ldc.b, c: ldc.c, d: ldc.d, b_u, c_eta, d_eta })
    }

    /// No nominal controller: `u = u_ex`, `eta = y`.
    pub fn trivial(dy: usize, du: usize) -> Self {
        LdcEx {
            a: Mat::zeros(0, 0),
            b: Mat::zeros(0, dy),
            c: Mat::zeros(du, 0),
            d: Mat::zeros(du, dy),
            b_u: Mat::zeros(0, du),
            c_eta: Mat::zeros(dy, 0),
            d_eta: Mat::identity(dy, dy),
        }
    }

    /// An ordinary LDC as nominal, with `eta = y`.
    pub fn from_ldc(pi: &Ldc) -> Self {
        LdcEx {
            a: pi.a.clone(),
            b: pi.b.clone(),
            c: pi.c.clone(),
            d: pi.d.clone(),
            b_u: Mat::zeros(pi.dim(), pi.du()),
            c_eta: Mat::zeros(pi.dy(), pi.dim()),
            d_eta: Mat::identity(pi.dy(), pi.dy()),
        }
    }

    pub fn ldc(&self) -> Ldc {
        Ldc { a: self.a.clone(), b: self.b.clone(), c: self.c.clone(), d: self.d.clone() }
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

    pub fn d_eta(&self) -> usize {
        self.c_eta.nrows()
    }
}

impl<'de> Deserialize<'de> for LdcEx {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            #[serde(rename = "A")]
            a: Vec<Vec<f64>>,
            #[serde(rename = "B")]
            b: Vec<Vec<f64>>,
            #[serde(rename = "C")]
            c: Vec<Vec<f64>>,
            #[serde(rename = "D")]
            d: Vec<Vec<f64>>,
            #[serde(rename = "B_u")]
            b_u: Vec<Vec<f64>>,
            #[serde(rename = "C_eta")]
            c_eta: Vec<Vec<f64>>,
            #[serde(rename = "D_eta")]
            d_eta: Vec<Vec<f64>>,
        }
        let r = Raw::deserialize(de)?;
        let build = || -> std::result::Result<LdcEx, String> {
            let n = r.a.len();
            let d = linalg::from_rows(&r.d, 0)?;
            let d_eta = linalg::from_rows(&r.d_eta, 0)?;
            let (du, dy) = d.shape();
            let fix = |rows: &Vec<Vec<f64>>, nr: usize, nc: usize| linalg::fix_shape(linalg::from_rows(rows, nc)?, nr, nc);
            let out = LdcEx::new(
                fix(&r.a, n, n)?,
                fix(&r.b, n, dy)?,
                fix(&r.c, du, n)?,
                d,
                fix(&r.b_u, n, du)?,
                fix(&r.c_eta, d_eta.nrows(), n)?,
                d_eta,
            );
            out.map_err(|e| e.to_string())
        };
        build().map_err(serde::de::Error::custom)
    }
}

/// What the nominal loop shows at time `t` before `u_ex` is chosen.
#[derive(Clone, Debug)]
pub struct ExObservation {
    pub y: Vector,
    pub u_nom: Vector,
    pub eta: Vector,
}

/// Plant and nominal controller stepped together.
pub struct ExLoop<'a> {
    sys: &'a StateSpaceSystem,
    nominal: &'a LdcEx,
    x: Vector,
    s: Vector,
}

impl<'a> ExLoop<'a> {
    pub fn new(sys: &'a StateSpaceSystem, nominal: &'a LdcEx) -> Result<Self> {
        if nominal.dy() != sys.dy() || nominal.du() != sys.du() {
            return Err(Error::Dimension("nominal controller does not match plant".into()));
        }
        if sys.d.iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidSystem("plant feedthrough D must be zero".into()));
        }
        Ok(ExLoop { sys, nominal, x: Vector::zeros(sys.dx()), s: Vector::zeros(nominal.dim()) })
    }

    pub fn state(&self) -> &Vector {
        &self.x
    }

    pub fn controller_state(&self) -> &Vector {
        &self.s
    }

    pub fn observe(&self, e: &Vector) -> ExObservation {
        let n = self.nominal;
        let y = &self.sys.c * &self.x + e;
        let u_nom = &n.c * &self.s + &n.d * &y;
        let eta = &n.c_eta * &self.s + &n.d_eta * &y;
        ExObservation { y, u_nom, eta }
    }

    pub fn advance(&mut self, obs: &ExObservation, u_ex: &Vector, w: &Vector) {
        let n = self.nominal;
        let u = u_ex + &obs.u_nom;
        self.x = &self.sys.a * &self.x + &self.sys.b * u + w;
        self.s = &n.a * &self.s + &n.b * &obs.y + &n.b_u * u_ex;
    }
}

/// The four closed-loop channels as state-space systems sharing `A_cl`.
#[derive(Clone, Debug)]
pub struct ExSystems {
    pub ex_to_out: StateSpaceSystem,
    pub ex_to_eta: StateSpaceSystem,
    pub noise_to_eta: StateSpaceSystem,
    pub noise_to_out: StateSpaceSystem,
}

pub fn ex_systems(sys: &StateSpaceSystem, nominal: &LdcEx) -> Result<ExSystems> {
    let cl = closed_loop_of(sys, &nominal.ldc())?;
    let StateSpaceSystem { a: a_cl, b: b_cl, c: c_cl, d: d_cl } = cl.system;
    let rho = spectral_radius(&a_cl);
    if rho >= 1.0 {
        return Err(Error::Unstable { rho, context: "nominal closed loop".into() });
    }
    let (dy, du) = (sys.dy(), sys.du());
    let b_ex = vstack(&[&sys.b, &nominal.b_u]);
    let d_ex = vstack(&[&Mat::zeros(dy, du), &Mat::identity(du, du)]);
    let c_eta = hstack(&[&(&nominal.d_eta * &sys.c), &nominal.c_eta]);
    let d_eta = hstack(&[&Mat::zeros(nominal.d_eta(), sys.dx()), &nominal.d_eta]);
    let de = nominal.d_eta();
    Ok(ExSystems {
        ex_to_out: StateSpaceSystem { a: a_cl.clone(), b: b_ex.clone(), c: c_cl.clone(), d: d_ex },
        ex_to_eta: StateSpaceSystem { a: a_cl.clone(), b: b_ex, c: c_eta.clone(), d: Mat::zeros(de, du) },
        noise_to_eta: StateSpaceSystem { a: a_cl.clone(), b: b_cl.clone(), c: c_eta, d: d_eta },
        noise_to_out: StateSpaceSystem { a: a_cl, b: b_cl, c: c_cl, d: d_cl },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExTransferSet {
    pub ex_to_out: MarkovOperator,
    pub ex_to_eta: MarkovOperator,
    pub noise_to_eta: MarkovOperator,
    pub noise_to_out: MarkovOperator,
}

impl ExTransferSet {
    pub fn model(&self) -> ExModel {
        ExModel { g_out: self.ex_to_out.clone(), g_eta: self.ex_to_eta.clone() }
    }
}

/// The four transfer operators truncated at `horizon`.
pub fn ex_transfers(sys: &StateSpaceSystem, nominal: &LdcEx, horizon: usize) -> Result<ExTransferSet> {
    let s = ex_systems(sys, nominal)?;
    Ok(ExTransferSet {
        ex_to_out: transfer_of(&s.ex_to_out, horizon),
        ex_to_eta: transfer_of(&s.ex_to_eta, horizon),
        noise_to_eta: transfer_of(&s.noise_to_eta, horizon),
        noise_to_out: transfer_of(&s.noise_to_out, horizon),
    })
}

/// As [`ex_transfers`], each truncated where its certified tail is below `tol`.
pub fn ex_transfers_auto(sys: &StateSpaceSystem, nominal: &LdcEx, tol: f64) -> Result<ExTransferSet> {
    let s = ex_systems(sys, nominal)?;
    Ok(ExTransferSet {
        ex_to_out: transfer_auto(&s.ex_to_out, tol)?,
        ex_to_eta: transfer_auto(&s.ex_to_eta, tol)?,
        noise_to_eta: transfer_auto(&s.noise_to_eta, tol)?,
        noise_to_out: transfer_auto(&s.noise_to_out, tol)?,
    })
}

/// Zero-exogenous-input rollout.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NaturesEx {
    pub eta: Vec<Vector>,
    pub y: Vec<Vector>,
    pub u: Vec<Vector>,
}

impl NaturesEx {
    /// Stacked `(y, u)` at 1-based `t`.
    pub fn v(&self, t: usize) -> Vector {
        linalg::vcat(&[&self.y[t - 1], &self.u[t - 1]])
    }
}

pub fn natures_eta(sys: &StateSpaceSystem, nominal: &LdcEx, noise: &NoiseSequence) -> Result<NaturesEx> {
    play_exogenous(sys, nominal, noise, |_, _| Vector::zeros(sys.du()))
}

/// Roll out the nominal loop with `u_ex_t = policy(t, eta history)`.
pub fn play_exogenous<P>(sys: &StateSpaceSystem, nominal: &LdcEx, noise: &NoiseSequence, mut policy: P) -> Result<NaturesEx>
where
    P: FnMut(usize, &[Vector]) -> Vector,
{
    let mut lp = ExLoop::new(sys, nominal)?;
    let mut out = NaturesEx::default();
    for t in 1..=noise.len() {
        let obs = lp.observe(&noise.e[t - 1]);
        out.eta.push(obs.eta.clone());
        let u_ex = policy(t, &out.eta);
        out.y.push(obs.y.clone());
        out.u.push(&obs.u_nom + &u_ex);
        lp.advance(&obs, &u_ex, &noise.w[t - 1]);
    }
    Ok(out)
}

/// Observer gain `L`, feedback gain `F` and, for the approximate
/// construction, the estimated plant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YoulaConfig {
    #[serde(rename = "L", with = "linalg::rowmajor")]
    pub l: Mat,
    #[serde(rename = "F", with = "linalg::rowmajor")]
    pub f: Mat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<StateSpaceSystem>,
}

fn require_stable(m: &Mat, what: &str) -> Result<()> {
    let rho = spectral_radius(m);
    if rho >= 1.0 {
        return Err(Error::Unstable { rho, context: what.into() });
    }
    Ok(())
}

fn check_gains(sys: &StateSpaceSystem, cfg: &YoulaConfig) -> Result<()> {
    if cfg.l.shape() != (sys.dx(), sys.dy()) || cfg.f.shape() != (sys.du(), sys.dx()) {
        return Err(Error::Dimension("observer or feedback gain has the wrong shape".into()));
    }
    require_stable(&(&sys.a + &sys.b * &cfg.f), "A + BF")?;
    require_stable(&(&sys.a + &cfg.l * &sys.c), "A + LC")
}

fn observer_ldcex(sys: &StateSpaceSystem, cfg: &YoulaConfig) -> LdcEx {
    let (dy, du) = (sys.dy(), sys.du());
    LdcEx {
        a: &sys.a + &cfg.l * &sys.c + &sys.b * &cfg.f,
        b: -&cfg.l,
        c: cfg.f.clone(),
        d: Mat::zeros(du, dy),
        b_u: sys.b.clone(),
        c_eta: sys.c.clone(),
        d_eta: -Mat::identity(dy, dy),
    }
}

/// Observer feedback built on the true plant.
pub fn exact_observer_ldcex(sys: &StateSpaceSystem, cfg: &YoulaConfig) -> Result<LdcEx> {
    check_gains(sys, cfg)?;
    Ok(observer_ldcex(sys, cfg))
}

/// Observer feedback built on an estimate, together with the coupled
/// `(x, delta = x_hat - x)` dynamics it induces on the true plant.
#[derive(Clone, Debug)]
pub struct ApproxObserver {
    pub nominal: LdcEx,
    /// Input `(w, e, u_ex)`, output `(y, eta, u)`.
    pub coupled: StateSpaceSystem,
}

pub fn approx_observer_ldcex(sys: &StateSpaceSystem, est: &StateSpaceSystem, cfg: &YoulaConfig) -> Result<ApproxObserver> {
    if est.a.shape() != sys.a.shape() || est.b.shape() != sys.b.shape() || est.c.shape() != sys.c.shape() {
        return Err(Error::Dimension("estimate does not match plant".into()));
    }
    check_gains(sys, cfg)?;
    check_gains(est, cfg)?;
    let (l, f) = (&cfg.l, &cfg.f);
    let (dx, dy, du) = (sys.dx(), sys.dy(), sys.du());
    let db = &est.b - &sys.b;
    let delta = &est.a - &sys.a + l * (&est.c - &sys.c);
    let a11 = &sys.a + &sys.b * f;
    let a12 = &sys.b * f;
    let a21 = delta + &db * f;
    let a22 = &est.a + l * &est.c + &db * f;
    let a = block(&[vec![&a11, &a12], vec![&a21, &a22]]);
    let ix = Mat::identity(dx, dx);
    let b = block(&[vec![&ix, &Mat::zeros(dx, dy), &sys.b], vec![&(-&ix), &(-l), &db]]);
    let z_yx = Mat::zeros(dy, dx);
    let c = block(&[vec![&sys.c, &z_yx], vec![&(&est.c - &sys.c), &est.c], vec![f, f]]);
    let iy = Mat::identity(dy, dy);
    let iu = Mat::identity(du, du);
    let d = block(&[
        vec![&z_yx, &iy, &Mat::zeros(dy, du)],
        vec![&z_yx, &(-&iy), &Mat::zeros(dy, du)],
        vec![&Mat::zeros(du, dx), &Mat::zeros(du, dy), &iu],
    ]);
    Ok(ApproxObserver { nominal: observer_ldcex(est, cfg), coupled: StateSpaceSystem { a, b, c, d } })
}

/// Weights for the two Riccati equations.
#[derive(Clone, Debug, PartialEq)]
pub struct DareWeights {
    pub q: Mat,
    pub r: Mat,
    pub w: Mat,
    pub v: Mat,
}

impl DareWeights {
    pub fn identity(sys: &StateSpaceSystem) -> Self {
        let (dx, dy, du) = (sys.dx(), sys.dy(), sys.du());
        DareWeights { q: Mat::identity(dx, dx), r: Mat::identity(du, du), w: Mat::identity(dx, dx), v: Mat::identity(dy, dy) }
    }
}

const DARE_TOL: f64 = 1e-10;
const DARE_ITERS: usize = 10_000;

/// Fixed point of `P = Q + A'PA - A'PB (R + B'PB)^-1 B'PA`, started at `Q`.
pub fn solve_dare(a: &Mat, b: &Mat, q: &Mat, r: &Mat) -> Result<Mat> {
    let mut p = q.clone();
    for _ in 0..DARE_ITERS {
        let bp = b.transpose() * &p;
        let s = r + &bp * b;
        let k = s
            .clone()
            .lu()
            .solve(&(&bp * a))
            .ok_or_else(|| Error::IllConditioned { cond: f64::INFINITY })?;
        let next = q + a.transpose() * &p * a - a.transpose() * &p * b * k;
        let next = (&next + next.transpose()) * 0.5;
        let diff = (&next - &p).norm();
        p = next;
        if !p.iter().all(|v| v.is_finite()) {
            break;
        }
        if diff <= DARE_TOL * p.norm().max(1.0) {
            return Ok(p);
        }
    }
    Err(Error::NoConvergence { iters: DARE_ITERS, context: "Riccati iteration".into() })
}

/// LQR feedback `F` and steady-state observer gain `L` from the two DAREs.
pub fn dare_gains_with(sys: &StateSpaceSystem, wts: &DareWeights) -> Result<YoulaConfig> {
    let (a, b, c) = (&sys.a, &sys.b, &sys.c);
    let p = solve_dare(a, b, &wts.q, &wts.r)?;
    let f = -(&wts.r + b.transpose() * &p * b)
        .lu()
        .solve(&(b.transpose() * &p * a))
        .ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
    let at = a.transpose();
    let ct = c.transpose();
    let sig = solve_dare(&at, &ct, &wts.w, &wts.v)?;
    let inner = &wts.v + c * &sig * &ct;
    let lt = inner
        .lu()
        .solve(&(c * &sig * &at))
        .ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
    let cfg = YoulaConfig { l: -lt.transpose(), f, estimate: None };
    check_gains(sys, &cfg)?;
    Ok(cfg)
}

pub fn dare_gains(sys: &StateSpaceSystem) -> Result<YoulaConfig> {
    dare_gains_with(sys, &DareWeights::identity(sys))
}

/// The nominal controller a comparator is expressed against.
#[derive(Clone, Debug)]
pub enum NominalKind {
    /// Stable plant, no nominal controller.
    Zero,
    /// An internally stable LDC with `eta = y`.
    InternallyStable(Ldc),
    /// Observer feedback on the true plant.
    ExactYoula(YoulaConfig),
    /// Observer feedback on `YoulaConfig::estimate`.
    ApproxYoula(YoulaConfig),
}

impl NominalKind {
    pub fn ldcex(&self, sys: &StateSpaceSystem) -> Result<LdcEx> {
        match self {
            NominalKind::Zero => {
                require_stable(&sys.a, "plant without nominal controller")?;
                Ok(LdcEx::trivial(sys.dy(), sys.du()))
            }
            NominalKind::InternallyStable(pi0) => {
                require_stable(&pi0.a, "nominal controller state")?;
                Ok(LdcEx::from_ldc(pi0))
            }
            NominalKind::ExactYoula(cfg) => exact_observer_ldcex(sys, cfg),
            NominalKind::ApproxYoula(cfg) => {
                let est = cfg
                    .estimate
                    .as_ref()
                    .ok_or_else(|| Error::Unsupported("approximate Youla needs an estimated plant".into()))?;
                Ok(approx_observer_ldcex(sys, est, cfg)?.nominal)
            }
        }
    }
}

/// State-space realization of the map from Nature's eta to the exogenous
/// input that makes `nominal + u_ex` play exactly like `pi`.
///
/// The state is `(z, s_nom, s_pi)`: the exogenous part of the nominal closed
/// loop, the nominal controller and the comparator. Needs `D_eta` invertible.
pub fn conversion_system(sys: &StateSpaceSystem, nominal: &LdcEx, pi: &Ldc) -> Result<StateSpaceSystem> {
    if pi.dy() != sys.dy() || pi.du() != sys.du() {
        return Err(Error::Dimension("comparator does not match plant".into()));
    }
    if nominal.d_eta() != sys.dy() {
        return Err(Error::Unsupported("control output must have the dimension of y".into()));
    }
    let di = nominal
        .d_eta
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Unsupported("D_eta is not invertible".into()))?;
    let ex = ex_systems(sys, nominal)?.ex_to_eta;
    let (nz, np) = (ex.a.nrows(), pi.dim());
    let (dy, du) = (sys.dy(), sys.du());

    // y = Cy xi + Dy eta_nat, u_ex = Cu xi + Du eta_nat
    let cy = hstack(&[&(&di * &ex.c), &(-(&di * &nominal.c_eta)), &Mat::zeros(dy, np)]);
    let dyn_ = di.clone();
    let k = &pi.d - &nominal.d;
    let cu = &k * &cy + hstack(&[&Mat::zeros(du, nz), &(-&nominal.c), &pi.c]);
    let du_ = &k * &di;

    let a0 = linalg::block_diag(&[&ex.a, &nominal.a, &pi.a]);
    let by = vstack(&[&Mat::zeros(nz, dy), &nominal.b, &pi.b]);
    let bu = vstack(&[&ex.b, &nominal.b_u, &Mat::zeros(np, du)]);
    let a = a0 + &by * &cy + &bu * &cu;
    let b = &by * &dyn_ + &bu * &du_;
    Ok(StateSpaceSystem { a, b, c: cu, d: du_ })
}

/// `G_{pi0 -> pi}` truncated where its certified tail is below `tol`.
pub fn conversion_operator(sys: &StateSpaceSystem, kind: &NominalKind, pi: &Ldc, tol: f64) -> Result<MarkovOperator> {
    let cl = closed_loop_of(sys, pi)?;
    require_stable(&cl.system.a, "comparator closed loop")?;
    match kind {
        NominalKind::Zero => {
            require_stable(&sys.a, "plant without nominal controller")?;
            transfer_auto(&cl.e_to_u, tol)
        }
        NominalKind::ExactYoula(cfg) => {
            check_gains(sys, cfg)?;
            transfer_auto(&youla_system(sys, cfg, pi)?, tol)
        }
        _ => {
            let nominal = kind.ldcex(sys)?;
            transfer_auto(&conversion_system(sys, &nominal, pi)?, tol)
        }
    }
}

/// Closed form of the exact-observer conversion, on the comparator's
/// closed-loop state.
pub fn youla_system(sys: &StateSpaceSystem, cfg: &YoulaConfig, pi: &Ldc) -> Result<StateSpaceSystem> {
    let cl = closed_loop_of(sys, pi)?;
    let b = vstack(&[&(&cfg.l - &sys.b * &pi.d), &(-&pi.b)]);
    let c = hstack(&[&(&pi.d * &sys.c - &cfg.f), &pi.c]);
    Ok(StateSpaceSystem { a: cl.system.a, b, c, d: -&pi.d })
}

/// Truncate a conversion operator to a DRC with `m` blocks.
pub fn conversion_drc(g: &MarkovOperator, m: usize) -> Drc {
    Drc { blocks: g.truncate(m.saturating_sub(1)).blocks }
}

/// Roll out the nominal loop with `u_ex_t = sum_i G^[i] eta_nat_{t-i}`.
pub fn play_operator(sys: &StateSpaceSystem, nominal: &LdcEx, g: &MarkovOperator, noise: &NoiseSequence) -> Result<NaturesEx> {
    let nat = natures_eta(sys, nominal, noise)?;
    play_exogenous(sys, nominal, noise, |t, _| g.apply_at(&nat.eta, t, 0..=g.horizon()))
}

/// DRC gradient descent around `nominal`, with the learner's transfer model.
pub fn run_drc_gd_ex(
    sys: &StateSpaceSystem,
    nominal: &LdcEx,
    cfg: DrcGdConfig,
    loss: &dyn Loss,
    noise: &NoiseSequence,
    t_max: usize,
    model: ExModel,
) -> Result<DrcGdRun> {
    drive(sys, nominal, cfg, loss, noise, t_max, model)
}

/// Transfers for the learner when the plant is known exactly.
pub fn exact_model(sys: &StateSpaceSystem, nominal: &LdcEx) -> Result<ExModel> {
    Ok(ex_transfers_auto(sys, nominal, TAIL_TOL)?.model())
}
