//! End-to-end runs: known system, explore-then-commit, and nominal-controller modes.

use crate::config::{ComparatorSpec, ExperimentConfig, LossSpec, Mode, NominalSpec, ScheduleSpec, SystemSource};
use crate::error::{HarnessError, Result};
use crate::hindsight::{best_in_hindsight, Counterfactual, Hindsight};
use drc_core::convexity::{alpha_general, alpha_stable, alpha_static_feedback, ConvexityCertificate};
use drc_core::drc::{control_input, Drc, DrcClass, Loss, PseudoHuber, Quadratic, Tracking};
use drc_core::drc_ex::{dare_gains, ex_transfers_auto, natures_eta, play_exogenous, ExTransferSet, LdcEx, NaturesEx, NominalKind, YoulaConfig};
use drc_core::gen;
use drc_core::lds::{Ldc, NoiseSequence, StateSpaceSystem, TAIL_TOL};
use drc_core::linalg::{from_rows, Mat};
use drc_core::oco::{known_system_step, policy_regret, DrcGd, DrcGdConfig, DrcGdRun, ExModel, RegretReport, StepSchedule};
use drc_core::sysid::{self, EstimatedMarkov};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub system: StateSpaceSystem,
    pub run: DrcGdRun,
    pub report: RegretReport,
    pub comparator: Option<Hindsight>,
    pub estimate: Option<EstimatedMarkov>,
    pub certificate: Option<ConvexityCertificate>,
    pub schedule: StepSchedule,
    /// `max_t |eta_nat_t|` on the instance.
    pub r_nat: f64,
    pub n_explore: Option<usize>,
}

fn mat(rows: &[Vec<f64>], what: &str) -> Result<Mat> {
    let ncols = rows.first().map_or(0, |r| r.len());
    from_rows(rows, ncols).map_err(|e| HarnessError::Config(format!("{what}: {e}")))
}

pub fn build_system(src: &SystemSource) -> Result<StateSpaceSystem> {
    match src {
        SystemSource::Random { dx, du, dy, rho, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok(gen::plant(&mut rng, *dx, *du, *dy, *rho))
        }
        SystemSource::Explicit { a, b, c } => Ok(StateSpaceSystem::plant(mat(a, "A")?, mat(b, "B")?, mat(c, "C")?)?),
    }
}

pub fn nominal_kind(spec: &NominalSpec, sys: &StateSpaceSystem) -> Result<NominalKind> {
    Ok(match spec {
        NominalSpec::None => NominalKind::Zero,
        NominalSpec::StaticGain { k } => NominalKind::InternallyStable(Ldc::static_gain(mat(k, "K")?)),
        NominalSpec::DareYoula => NominalKind::ExactYoula(dare_gains(sys)?),
        NominalSpec::ApproxDareYoula { perturbation, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let est = StateSpaceSystem::plant(
                gen::perturb(&mut rng, &sys.a, *perturbation),
                gen::perturb(&mut rng, &sys.b, *perturbation),
                gen::perturb(&mut rng, &sys.c, *perturbation),
            )?;
            let g = dare_gains(&est)?;
            NominalKind::ApproxYoula(YoulaConfig { estimate: Some(est), ..g })
        }
    })
}

pub fn build_loss(spec: &LossSpec, dy: usize, du: usize, t: usize) -> Box<dyn Loss> {
    match *spec {
        LossSpec::Quadratic { q, r } => Box::new(Quadratic { q: Mat::identity(dy, dy) * q, r: Mat::identity(du, du) * r }),
        LossSpec::Tracking { amplitude, period, lambda } => {
            let reference = (1..=t)
                .map(|s| vec![amplitude * (2.0 * std::f64::consts::PI * s as f64 / period).sin(); dy])
                .collect();
            Box::new(Tracking { reference, lambda })
        }
        LossSpec::PseudoHuber { delta, lambda } => Box::new(PseudoHuber { delta, lambda }),
    }
}

/// Per-run noise seed mixed from the model seed and the trial seed.
pub fn noise_for(cfg: &ExperimentConfig, sys: &StateSpaceSystem) -> Result<NoiseSequence> {
    let seed = cfg.noise.seed ^ cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    cfg.noise.clone().with_seed(seed).generate(sys.dx(), sys.dy(), cfg.t)
}

/// The strongest available certificate for the instance.
pub fn certify(cfg: &ExperimentConfig, sys: &StateSpaceSystem, kind: &NominalKind, set: &ExTransferSet, alpha_loss: f64) -> ConvexityCertificate {
    let (sw, se) = cfg.noise.stochastic.sigmas();
    let sigma = Mat::from_diagonal(&drc_core::linalg::Vector::from_fn(sys.dx() + sys.dy(), |i, _| {
        if i < sys.dx() {
            sw * sw
        } else {
            se * se
        }
    }));
    let general = alpha_general(set, &sigma, alpha_loss, cfg.m, cfg.h());
    match kind {
        NominalKind::Zero => alpha_stable(sys, sw, se, alpha_loss).better(general),
        NominalKind::InternallyStable(pi) if pi.dim() == 0 => alpha_static_feedback(sys, &pi.d, sw, se, alpha_loss).better(general),
        _ => general,
    }
}

fn resolve_schedule(
    cfg: &ExperimentConfig,
    loss: &dyn Loss,
    model: &ExModel,
    r_nat: f64,
    du: usize,
    certificate: Option<&ConvexityCertificate>,
) -> Result<StepSchedule> {
    Ok(match cfg.schedule {
        ScheduleSpec::Constant { eta } => StepSchedule::constant(eta),
        ScheduleSpec::InverseSqrtT { c } => StepSchedule::constant(c / (cfg.t.max(1) as f64).sqrt()),
        ScheduleSpec::Theory { scale } => {
            let r_g = model.g_out.l1op_norm().max(1.0);
            let k = loss.constants();
            // Lipschitz constant over the ball the counterfactual (y, u) lives in
            let l = match (k.lipschitz, k.beta) {
                (Some(l), _) if matches!(cfg.loss, LossSpec::PseudoHuber { .. }) => l,
                (_, Some(b)) => b * r_nat * (1.0 + r_g * cfg.radius),
                (Some(l), None) => l,
                (None, None) => return Err(HarnessError::Config("loss has no Lipschitz or smoothness constant".into())),
            };
            let d_min = du.min(model.g_eta.d_out);
            StepSchedule::constant(scale * known_system_step(d_min, l, cfg.h(), r_nat.max(1.0), r_g, cfg.m, cfg.t.max(1)))
        }
        ScheduleSpec::StronglyConvex { c, alpha } => {
            let a = match (alpha, certificate) {
                (Some(a), _) => a,
                (None, Some(cert)) if cert.alpha_f > 0.0 => cert.alpha_f,
                _ => return Err(HarnessError::Config("no positive curvature certificate for the strongly convex schedule".into())),
            };
            StepSchedule::strongly_convex(c, a)
        }
    })
}

/// Realized losses of the fixed DRC `m` played on Nature's eta.
pub fn rollout_fixed(sys: &StateSpaceSystem, nominal: &LdcEx, noise: &NoiseSequence, nat: &NaturesEx, m: &Drc, loss: &dyn Loss) -> Result<Vec<f64>> {
    let played = play_exogenous(sys, nominal, noise, |t, _| control_input(m, &nat.eta, t))?;
    Ok((1..=played.y.len()).map(|t| loss.value(t, &played.y[t - 1], &played.u[t - 1])).collect())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let sys = build_system(&cfg.system)?;
    let kind = nominal_kind(&cfg.nominal, &sys)?;
    let nominal = kind.ldcex(&sys)?;
    let noise = noise_for(cfg, &sys)?;
    let loss = build_loss(&cfg.loss, sys.dy(), sys.du(), cfg.t);
    let set = ex_transfers_auto(&sys, &nominal, TAIL_TOL)?;
    let exact = set.model();
    let nat = natures_eta(&sys, &nominal, &noise)?;
    let r_nat = nat.eta.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if let Some(bound) = cfg.r_nat {
        let bad = nat.eta.iter().filter(|v| v.norm() > bound).count();
        if bad > 0 {
            log::warn!("Nature's signal exceeds the declared bound {bound} at {bad} steps (max {r_nat:.3})");
        }
    }

    let class = DrcClass::new(cfg.m, cfg.radius)?;
    let certificate = match cfg.schedule {
        ScheduleSpec::StronglyConvex { alpha: None, .. } => {
            let a = loss
                .constants()
                .alpha
                .ok_or_else(|| HarnessError::Config("strongly convex schedule needs a strongly convex loss".into()))?;
            Some(certify(cfg, &sys, &kind, &set, a))
        }
        _ => None,
    };
    let schedule = resolve_schedule(cfg, loss.as_ref(), &exact, r_nat, sys.du(), certificate.as_ref())?;
    let dcfg = DrcGdConfig { class, h: cfg.h(), schedule, recovery: cfg.recovery };

    let mut driver = DrcGd::new(&sys, &nominal, loss.as_ref(), &noise, dcfg)?;
    let mut estimate = None;
    let mut n_explore = None;
    match cfg.mode {
        Mode::Known | Mode::Ex => driver.set_model(exact.clone())?,
        Mode::Unknown => {
            let h = cfg.h();
            let n = cfg.n.unwrap_or_else(|| {
                let cd = sysid::c_delta(sys.dx().max(sys.du()).max(sys.dy()), cfg.delta, r_nat);
                sysid::default_exploration_length(cfg.t, h, cfg.radius, r_nat.max(1.0), cd)
            });
            let n = n.min(cfg.t);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_0F_E7A1);
            for u in sysid::gaussian_inputs(&mut rng, sys.du(), n) {
                driver.step(Some(u))?;
            }
            let tr = &driver.run().trace;
            let est = sysid::fit_markov(&tr.y, &tr.u, h)?.with_truth(&sys.markov(h));
            sysid::tail_warning(&sys.markov(4 * h + 50), h);
            driver.set_model(ExModel::from_plant_markov(&est.g)?)?;
            estimate = Some(est);
            n_explore = Some(n);
        }
    }
    while driver.time() < cfg.t {
        driver.step(None)?;
    }
    let run = driver.finish();

    let (loss_cmp, comparator, name) = match cfg.comparator {
        ComparatorSpec::Zero => {
            let zero = Drc::zeros(cfg.m, sys.du(), nominal.d_eta());
            (rollout_fixed(&sys, &nominal, &noise, &nat, &zero, loss.as_ref())?, None, "nominal")
        }
        ComparatorSpec::BestInHindsight { iters } => {
            let v_nat: Vec<_> = (1..=cfg.t).map(|t| nat.v(t)).collect();
            let problem = Counterfactual { g_out: &set.ex_to_out, signals: &nat.eta, v_nat: &v_nat, dy: sys.dy(), loss: loss.as_ref() };
            let best = best_in_hindsight(&class, &problem, nominal.d_eta(), iters);
            let realized = rollout_fixed(&sys, &nominal, &noise, &nat, &best.drc, loss.as_ref())?;
            (realized, Some(best), "best_in_hindsight")
        }
    };
    let mut report = policy_regret(&run.trace.loss, &loss_cmp, name)?;
    if let Some(best) = &comparator {
        report = report.with_counterfactual(&best.per_step)?;
    }
    Ok(ExperimentOutput {
        config: cfg.clone(),
        system: sys,
        run,
        report,
        comparator,
        estimate,
        certificate,
        schedule,
        r_nat,
        n_explore,
    })
}
