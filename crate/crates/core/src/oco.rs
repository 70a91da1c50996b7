//! Online gradient descent with memory and the DRC control driver.

use crate::drc::{accumulate_pullback, control_input, project_class, response, Drc, DrcClass, Loss};
use crate::drc_ex::{ExLoop, LdcEx};
use crate::lds::{MarkovOperator, NoiseSequence, SignalTrace, StateSpaceSystem};
use crate::linalg::{vcat, Vector};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepKind {
    Constant { eta: f64 },
    /// `eta_t = c / (alpha t)`.
    StronglyConvex { c: f64, alpha: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub kind: StepKind,
    /// Updates start at `t = t0` (iterates before it stay at the initial point).
    #[serde(default)]
    pub t0: usize,
}

impl StepSchedule {
    pub fn constant(eta: f64) -> Self {
        StepSchedule { kind: StepKind::Constant { eta }, t0: 0 }
    }

    pub fn strongly_convex(c: f64, alpha: f64) -> Self {
        StepSchedule { kind: StepKind::StronglyConvex { c, alpha }, t0: 0 }
    }

    pub fn delayed(mut self, t0: usize) -> Self {
        self.t0 = t0;
        self
    }

    pub fn eta(&self, t: usize) -> f64 {
        match self.kind {
            StepKind::Constant { eta } => eta,
            StepKind::StronglyConvex { c, alpha } => c / (alpha * t.max(1) as f64),
        }
    }

    pub fn updates_at(&self, t: usize) -> bool {
        t >= self.t0
    }
}

/// Constant step for a known system:
/// `sqrt(d_min) / (4 L h R_nat^2 R_G^2 sqrt(2 m T))`.
pub fn known_system_step(d_min: usize, l: f64, h: usize, r_nat: f64, r_g: f64, m: usize, t: usize) -> f64 {
    (d_min as f64).sqrt() / (4.0 * l * h.max(1) as f64 * r_nat * r_nat * r_g * r_g * (2.0 * (m * t) as f64).sqrt())
}

/// `Proj(M - eta grad)`.
pub fn ogd_step(m: &Drc, grad: &Drc, eta: f64, class: &DrcClass) -> Drc {
    project_class(&m.axpy(-eta, grad), class)
}

/// OGD on a vector sequence where the learner sees `grad(t, z_t) + errors[t-1]`.
/// Returns the played iterates `z_1, ..., z_T`.
pub fn perturbed_ogd<G, P>(
    z0: Vector,
    rounds: usize,
    mut grad: G,
    errors: &[Vector],
    schedule: &StepSchedule,
    project: P,
) -> Vec<Vector>
where
    G: FnMut(usize, &Vector) -> Vector,
    P: Fn(Vector) -> Vector,
{
    let mut z = z0;
    let mut out = Vec::with_capacity(rounds);
    for t in 1..=rounds {
        out.push(z.clone());
        if !schedule.updates_at(t) {
            continue;
        }
        let mut g = grad(t, &z);
        if let Some(e) = errors.get(t - 1) {
            g += e;
        }
        z = project(&z - g * schedule.eta(t));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub loss_alg: Vec<f64>,
    pub loss_cmp: Vec<f64>,
    pub regret: Vec<f64>,
    pub comparator: String,
    /// Regret against the comparator's counterfactual (unary) losses.
    pub regret_counterfactual: Option<Vec<f64>>,
}

impl RegretReport {
    pub fn final_regret(&self) -> f64 {
        self.regret.last().copied().unwrap_or(0.0)
    }

    pub fn with_counterfactual(mut self, unary_losses: &[f64]) -> Result<Self> {
        if unary_losses.len() != self.loss_alg.len() {
            return Err(Error::LengthMismatch(unary_losses.len(), self.loss_alg.len()));
        }
        self.regret_counterfactual = Some(cumulative_diff(&self.loss_alg, unary_losses));
        Ok(self)
    }
}

fn cumulative_diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            acc += x - y;
            acc
        })
        .collect()
}

pub fn policy_regret(loss_alg: &[f64], loss_cmp: &[f64], comparator: &str) -> Result<RegretReport> {
    if loss_alg.len() != loss_cmp.len() {
        return Err(Error::LengthMismatch(loss_alg.len(), loss_cmp.len()));
    }
    Ok(RegretReport {
        loss_alg: loss_alg.to_vec(),
        loss_cmp: loss_cmp.to_vec(),
        regret: cumulative_diff(loss_alg, loss_cmp),
        comparator: comparator.to_string(),
        regret_counterfactual: None,
    })
}

/// How Nature's signals are recovered from the learner's model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recovery {
    /// Subtract every stored lag of the model.
    #[default]
    Full,
    /// Subtract lags `1..=h` only.
    Truncated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrcGdConfig {
    pub class: DrcClass,
    pub h: usize,
    pub schedule: StepSchedule,
    #[serde(default)]
    pub recovery: Recovery,
}

/// The learner's model of the exogenous-input responses.
///
/// `g_out` maps `u_ex` to the stacked `(y, u)` and carries the direct
/// `[0; I]` block at lag 0; `g_eta` maps `u_ex` to the control output.
#[derive(Clone, Debug, PartialEq)]
pub struct ExModel {
    pub g_out: MarkovOperator,
    pub g_eta: MarkovOperator,
}

impl ExModel {
    /// Model for a stable plant with no nominal controller, from `G: u -> y`.
    pub fn from_plant_markov(g: &MarkovOperator) -> Result<Self> {
        let mut id = MarkovOperator::zeros(g.d_in, g.d_in, 0);
        id.blocks[0] = nalgebra::DMatrix::identity(g.d_in, g.d_in);
        let mut gy = g.clone();
        gy.blocks[0].fill(0.0);
        Ok(ExModel { g_out: gy.vstack(&id)?, g_eta: gy })
    }
}

/// Everything recorded by one run of the driver.
#[derive(Clone, Debug, Default)]
pub struct DrcGdRun {
    pub trace: SignalTrace,
    /// `M_t` played at each step.
    pub iterates: Vec<Drc>,
    pub u_ex: Vec<Vector>,
    pub eta_alg: Vec<Vector>,
    pub eta_hat: Vec<Vector>,
    pub v_hat: Vec<Vector>,
}

/// Online DRC with gradient descent around a nominal controller.
///
/// A stable plant without a nominal controller is the special case
/// `LdcEx::trivial`; the stable-setting entry point [`run_drc_gd`] uses it.
pub struct DrcGd<'a> {
    sys: &'a StateSpaceSystem,
    looped: ExLoop<'a>,
    loss: &'a dyn Loss,
    noise: &'a NoiseSequence,
    cfg: DrcGdConfig,
    model: Option<ExModel>,
    m: Drc,
    t: usize,
    run: DrcGdRun,
}

impl<'a> DrcGd<'a> {
    pub fn new(
        sys: &'a StateSpaceSystem,
        nominal: &'a LdcEx,
        loss: &'a dyn Loss,
        noise: &'a NoiseSequence,
        cfg: DrcGdConfig,
    ) -> Result<Self> {
        let m = Drc::zeros(cfg.class.m, sys.du(), nominal.d_eta());
        Ok(DrcGd { sys, looped: ExLoop::new(sys, nominal)?, loss, noise, cfg, model: None, m, t: 0, run: DrcGdRun::default() })
    }

    pub fn with_initial(mut self, m: Drc) -> Self {
        self.m = m;
        self
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn run(&self) -> &DrcGdRun {
        &self.run
    }

    fn lag_cap(&self, g: &MarkovOperator) -> usize {
        match self.cfg.recovery {
            Recovery::Full => g.horizon(),
            Recovery::Truncated => self.cfg.h.min(g.horizon()),
        }
    }

    fn recover(&self, model: &ExModel, s: usize) -> (Vector, Vector) {
        let r = &self.run;
        let eta = &r.eta_alg[s - 1] - model.g_eta.apply_at(&r.u_ex, s, 1..=self.lag_cap(&model.g_eta));
        let v_alg = vcat(&[&r.trace.y[s - 1], &r.trace.u[s - 1]]);
        let v = v_alg - model.g_out.apply_at(&r.u_ex, s, 0..=self.lag_cap(&model.g_out));
        (eta, v)
    }

    /// Install (or replace) the learner's model; recovered signals for past
    /// steps are recomputed with it.
    pub fn set_model(&mut self, model: ExModel) -> Result<()> {
        if model.g_out.d_out != self.sys.dy() + self.sys.du() || model.g_eta.d_out != self.m.ds() {
            return Err(Error::Dimension("model does not match plant and nominal".into()));
        }
        for s in 1..=self.t {
            let (eta, v) = self.recover(&model, s);
            self.run.eta_hat[s - 1] = eta;
            self.run.v_hat[s - 1] = v;
        }
        self.model = Some(model);
        Ok(())
    }

    /// Advance one step. `forced` overrides the exogenous input (used for
    /// exploration); otherwise the current DRC plays and, if a model is set,
    /// takes a projected gradient step.
    pub fn step(&mut self, forced: Option<Vector>) -> Result<()> {
        let t = self.t + 1;
        if t > self.noise.len() {
            return Err(Error::LengthMismatch(self.noise.len(), t));
        }
        let obs = self.looped.observe(&self.noise.e[t - 1]);
        self.run.trace.x.push(self.looped.state().clone());
        self.run.trace.y.push(obs.y.clone());
        self.run.eta_alg.push(obs.eta.clone());
        self.run.eta_hat.push(obs.eta.clone());
        if let Some(model) = &self.model {
            let eta = &obs.eta - model.g_eta.apply_at(&self.run.u_ex, t, 1..=self.lag_cap(&model.g_eta));
            self.run.eta_hat[t - 1] = eta;
        }

        let learning = forced.is_none();
        let u_ex = match forced {
            Some(u) => {
                if u.len() != self.sys.du() {
                    return Err(Error::Dimension("forced input has wrong size".into()));
                }
                u
            }
            None => control_input(&self.m, &self.run.eta_hat, t),
        };
        let u = &u_ex + &obs.u_nom;
        let loss = self.loss.value(t, &obs.y, &u);
        self.run.u_ex.push(u_ex.clone());
        self.run.trace.u.push(u.clone());
        self.run.trace.loss.push(loss);
        self.run.trace.w.push(self.noise.w[t - 1].clone());
        self.run.trace.e.push(self.noise.e[t - 1].clone());
        self.run.iterates.push(self.m.clone());
        self.t = t;

        let v_hat = match &self.model {
            Some(model) => self.recover(model, t).1,
            None => vcat(&[&obs.y, &u]),
        };
        self.run.v_hat.push(v_hat);

        if learning && self.cfg.schedule.updates_at(t) {
            if let Some(model) = &self.model {
                let h = self.cfg.h;
                let window = vec![&self.m; h + 1];
                let v = response(&window, &model.g_out, 0, h, &self.run.v_hat[t - 1], &self.run.eta_hat, t);
                let dy = self.sys.dy();
                let y = v.rows(0, dy).into_owned();
                let uu = v.rows(dy, self.sys.du()).into_owned();
                let (gy, gu) = self.loss.gradient(t, &y, &uu);
                let gv = vcat(&[&gy, &gu]);
                let mut grad = Drc::zeros(self.m.m(), self.m.du(), self.m.ds());
                accumulate_pullback(&mut grad, &model.g_out, 0, h, &gv, &self.run.eta_hat, t);
                self.m = ogd_step(&self.m, &grad, self.cfg.schedule.eta(t), &self.cfg.class);
            }
        }
        self.looped.advance(&obs, &u_ex, &self.noise.w[t - 1]);
        Ok(())
    }

    pub fn finish(mut self) -> DrcGdRun {
        self.run.trace.y_nat_hat = Some(self.run.v_hat.iter().map(|v| v.rows(0, self.sys.dy()).into_owned()).collect());
        self.run.trace.eta_nat_hat = Some(self.run.eta_hat.clone());
        self.run
    }
}

/// Online gradient descent over DRCs on a stable plant with the learner's Markov model `g_hat`.
pub fn run_drc_gd(
    sys: &StateSpaceSystem,
    g_hat: &MarkovOperator,
    cfg: DrcGdConfig,
    loss: &dyn Loss,
    noise: &NoiseSequence,
    t_max: usize,
) -> Result<DrcGdRun> {
    let nominal = LdcEx::trivial(sys.dy(), sys.du());
    let model = ExModel::from_plant_markov(g_hat)?;
    drive(sys, &nominal, cfg, loss, noise, t_max, model)
}

pub(crate) fn drive(
    sys: &StateSpaceSystem,
    nominal: &LdcEx,
    cfg: DrcGdConfig,
    loss: &dyn Loss,
    noise: &NoiseSequence,
    t_max: usize,
    model: ExModel,
) -> Result<DrcGdRun> {
    let mut d = DrcGd::new(sys, nominal, loss, noise, cfg)?;
    d.set_model(model)?;
    for _ in 0..t_max {
        d.step(None)?;
    }
    Ok(d.finish())
}
