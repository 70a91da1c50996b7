//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when a criterion outside `KNOWN_FAILING` fails.

use drc_core::convexity::{
    alpha_stable, alpha_static_feedback, sigma_min_pow_toeplitz, toep_window, toeplitz_w_actual, toeplitz_w_bound,
    toeplitz_zero_bound, toeplitz_zero_bound_neumann,
};
use drc_core::drc::{control_input, drc_from_ldc, response_jacobian, unary_gradient, unary_loss, Drc, Loss, PseudoHuber, Quadratic};
use drc_core::drc_ex::{
    approx_observer_ldcex, conversion_operator, dare_gains, ex_transfers, exact_observer_ldcex, natures_eta, play_exogenous,
    play_operator, NominalKind, YoulaConfig,
};
use drc_core::gen;
use drc_core::lds::{closed_loop_of, natures_signal, recover_natures, simulate, transfer_of, Ldc, LdcPolicy, MarkovOperator, NoiseSequence, Observation, StateSpaceSystem};
use drc_core::linalg::{op_norm, sigma_k, spectral_radius, sym_min_eig, Mat, Vector};
use drc_core::oco::{perturbed_ogd, StepSchedule};
use drc_core::sysid::{explore, fit_markov, r_u_est};
use drc_harness::config::ExperimentConfig;
use drc_harness::scaling::{loglog_slope, scaling_study, ScalingReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::time::{Duration, Instant};

/// The stated Toeplitz_zero bound is false; see the counterexample in core's
/// convexity tests. Criterion 8 reports it but does not fail the run.
const KNOWN_FAILING: &[usize] = &[8];

struct Outcome {
    pass: bool,
    detail: String,
    /// Part of the criterion that must hold even when it is known failing.
    hard: bool,
}

fn gauss(rng: &mut ChaCha8Rng, d: usize, s: f64) -> Vector {
    Vector::from_fn(d, |_, _| s * rng.sample::<f64, _>(StandardNormal))
}

fn noise(rng: &mut ChaCha8Rng, dx: usize, dy: usize, t: usize, sw: f64, se: f64) -> NoiseSequence {
    let w = (0..t).map(|_| gauss(rng, dx, sw)).collect();
    let e = (0..t).map(|_| gauss(rng, dy, se)).collect();
    NoiseSequence { w, e }
}

fn max_gap(a: &[Vector], b: &[Vector]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn max_norm(a: &[Vector]) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

// 1. Nature's y is recovered exactly under arbitrary (nonlinear) policies.
fn c1() -> Outcome {
    const TOL: f64 = 1e-9;
    const T: usize = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let dx = rng.gen_range(1..=4);
        let du = rng.gen_range(1..=4);
        let dy = rng.gen_range(1..=4);
        let rho = rng.gen_range(0.1..0.95);
        let sys = gen::plant(&mut rng, dx, du, dy, rho);
        let nz = noise(&mut rng, dx, dy, T, 1.0, 1.0);
        let inputs: Vec<Vector> = (0..T).map(|_| gauss(&mut rng, du, 1.0)).collect();
        let mix = gen::gaussian(&mut rng, du, dy);
        let mut pol = |o: &Observation| &inputs[o.t - 1] + (&mix * &o.y[o.t - 1]).map(f64::tanh) * 2.0;
        let tr = simulate(&sys, &mut pol, &nz, T, None).unwrap();
        let rec = recover_natures(&tr.y, &tr.u, &sys.markov(T));
        worst = worst.max(max_gap(&rec, &natures_signal(&sys, &nz)));
    }
    Outcome { pass: worst <= TOL, detail: format!("max error {worst:.2e} (tol {TOL:.0e})"), hard: true }
}

// 2. DRC approximation of a stabilizing LDC: within psi(m) max|y_nat|, and
// geometric decay across m.
fn c2() -> Outcome {
    const RATIO: f64 = 0.9;
    const FLOOR: f64 = 1e-12;
    const T: usize = 400;
    let ms = [4usize, 8, 16, 32];
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut bound_ok, mut worst_ratio, mut pairs) = (true, 0.0f64, 0);
    while pairs < 20 {
        let d = rng.gen_range(1..=2);
        let sys = gen::plant(&mut rng, 3, d, d, 0.7);
        let pi = gen::controller(&mut rng, 2, d, d, 0.5, 0.3);
        let cl = match closed_loop_of(&sys, &pi) {
            Ok(c) if c.system.spectral_radius() < 0.9 => c,
            _ => continue,
        };
        pairs += 1;
        let nz = noise(&mut rng, 3, d, T, 1.0, 1.0);
        let y_nat = natures_signal(&sys, &nz);
        let tr = simulate(&sys, &mut LdcPolicy::new(&pi), &nz, T, None).unwrap();
        let full = transfer_of(&cl.e_to_u, T + 1);
        let ynat = max_norm(&y_nat);
        let mut gaps = Vec::new();
        for &m in &ms {
            let drc = drc_from_ldc(&pi, &sys, m).unwrap();
            let u: Vec<Vector> = (1..=T).map(|t| control_input(&drc, &y_nat, t)).collect();
            let gap = max_gap(&u, &tr.u);
            let psi: f64 = full.blocks[m..].iter().map(op_norm).sum();
            bound_ok &= gap <= psi * ynat + 1e-12;
            gaps.push(gap);
        }
        for w in gaps.windows(2) {
            if w[0] > FLOOR && w[1] > FLOOR {
                worst_ratio = worst_ratio.max(w[1] / w[0]);
            }
        }
    }
    Outcome {
        pass: bound_ok && worst_ratio <= RATIO,
        detail: format!("bound held: {bound_ok}, worst successive gap ratio {worst_ratio:.3} (max {RATIO})"),
        hard: true,
    }
}

fn config(json: serde_json::Value) -> ExperimentConfig {
    serde_json::from_value(json).expect("valid config")
}

fn family(mode: &str, h: usize, schedule: serde_json::Value, amp: f64) -> ExperimentConfig {
    config(serde_json::json!({
        "system": {"kind": "random", "dx": 2, "du": 2, "dy": 2, "rho": 0.7, "seed": 1},
        "mode": mode, "t": 1000, "m": 6, "h": h, "radius": 1.0,
        "schedule": schedule,
        "loss": {"kind": "quadratic", "q": 1.0, "r": 1.0},
        "noise": {
            "adversarial": {"kind": "sinusoid", "amplitude": amp, "periods": [37.0]},
            "stochastic": {"kind": "gaussian", "sigma_w": amp, "sigma_e": amp},
            "seed": 0
        },
        "plot": false
    }))
}

const HORIZONS: [usize; 3] = [1000, 4000, 16000];
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn slope_outcome(rep: &ScalingReport, lo: f64, hi: f64) -> Outcome {
    let means: Vec<String> = rep.means.iter().map(|(t, r)| format!("{t}:{r:.1}")).collect();
    Outcome {
        pass: (lo..=hi).contains(&rep.slope),
        detail: format!("slope {:.3} +- {:.3} in [{lo}, {hi}], mean regret {}", rep.slope, rep.stderr, means.join(" ")),
        hard: true,
    }
}

// 3. Known system, general convex: regret ~ sqrt(T).
fn c3() -> Outcome {
    let cfg = family("known", 6, serde_json::json!({"kind": "theory", "scale": 1e4}), 0.5);
    slope_outcome(&scaling_study(&cfg, &HORIZONS, &SEEDS).unwrap(), 0.35, 0.65)
}

// 4. Unknown system: explore, estimate, then learn; regret ~ T^(2/3).
fn c4() -> Outcome {
    let cfg = family("unknown", 2, serde_json::json!({"kind": "theory", "scale": 1e4}), 0.2);
    slope_outcome(&scaling_study(&cfg, &HORIZONS, &SEEDS).unwrap(), 0.5, 0.85)
}

// 5. Strongly convex, eta_t = 3 / (alpha_f t): regret / log^2 T nonincreasing.
fn c5() -> Outcome {
    const SLACK: f64 = 1.2;
    let cfg = family("known", 6, serde_json::json!({"kind": "strongly_convex", "c": 3.0}), 0.5);
    let rep = scaling_study(&cfg, &HORIZONS, &SEEDS).unwrap();
    let ratios: Vec<f64> = rep.means.iter().map(|(t, r)| r / (*t as f64).ln().powi(2)).collect();
    let pass = ratios.iter().all(|r| r.is_finite() && *r > 0.0) && ratios.windows(2).all(|w| w[1] <= SLACK * w[0]);
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    Outcome { pass, detail: format!("regret/log^2 T = [{}] (each <= {SLACK} x previous)", shown.join(", ")), hard: true }
}

// 6. OGD with injected gradient errors: excess regret is quadratic in the
// error magnitude.
fn c6() -> Outcome {
    const T: usize = 10_000;
    const D: usize = 4;
    let mags = [1e-2, 3e-2, 1e-1, 3e-1];
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let c0 = gauss(&mut rng, D, 1.0);
    let (a, b) = (gauss(&mut rng, D, 0.5), gauss(&mut rng, D, 0.5));
    let dir = gauss(&mut rng, D, 1.0).normalize();
    let target = |t: usize| {
        let s = t as f64 * std::f64::consts::TAU;
        &c0 + &a * (s / 37.0).sin() + &b * (s / 91.0).cos()
    };
    let loss = |zs: &[Vector]| -> f64 { zs.iter().enumerate().map(|(i, z)| 0.5 * (z - target(i + 1)).norm_squared()).sum() };
    let sched = StepSchedule::strongly_convex(1.0, 1.0);
    let proj = |z: Vector| {
        let n = z.norm();
        if n > 5.0 { z * (5.0 / n) } else { z }
    };
    let run = |errs: &[Vector]| perturbed_ogd(Vector::zeros(D), T, |t, z| z - target(t), errs, &sched, proj);
    let clean = loss(&run(&[]));
    let excess: Vec<f64> = mags
        .iter()
        .map(|&eps| {
            let errs = vec![&dir * eps; T];
            loss(&run(&errs)) - clean
        })
        .collect();
    let (slope, _) = loglog_slope(&mags, &excess);
    let shown: Vec<String> = excess.iter().map(|e| format!("{e:.3e}")).collect();
    let pass = excess.iter().all(|e| *e > 0.0) && (1.6..=2.4).contains(&slope);
    Outcome { pass, detail: format!("slope {slope:.3} in [1.6, 2.4], excess [{}]", shown.join(", ")), hard: true }
}

// 7. Least-squares Markov estimation error ~ N^(-1/2); exploration inputs bounded.
fn c7() -> Outcome {
    const DELTA: f64 = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let sys = gen::plant(&mut rng, 3, 2, 2, 0.5);
    let h = 8;
    let truth = sys.markov(h);
    let ns: Vec<usize> = (10..=16).map(|k| 1usize << k).collect();
    let bound = r_u_est(2, DELTA);
    let mut u_max: f64 = 0.0;
    let mut errs = Vec::new();
    for &n in &ns {
        let mut e = 0.0;
        for seed in 0..10 {
            let mut r = ChaCha8Rng::seed_from_u64(1000 * n as u64 + seed);
            let nz = noise(&mut r, 3, 2, n, 0.5, 0.5);
            let tr = explore(&sys, &nz, n, &mut r).unwrap();
            u_max = u_max.max(max_norm(&tr.u));
            e += fit_markov(&tr.y, &tr.u, h).unwrap().with_truth(&truth).eps_g.unwrap();
        }
        errs.push(e / 10.0);
    }
    let xs: Vec<f64> = ns.iter().map(|n| *n as f64).collect();
    let (slope, _) = loglog_slope(&xs, &errs);
    Outcome {
        pass: (slope + 0.5).abs() <= 0.15 && u_max <= bound,
        detail: format!("slope {slope:.3} (target -0.5 +- 0.15), max |u| {u_max:.2} <= {bound:.2}"),
        hard: true,
    }
}

// 8. Toeplitz lower bounds against direct SVD.
fn c8() -> Outcome {
    const N: usize = 1000;
    const REL: f64 = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut pow_bad = 0;
    for _ in 0..N {
        let d = rng.gen_range(1..=4);
        let a = gen::gaussian(&mut rng, d, d) * rng.gen_range(0.0..2.0);
        let m = rng.gen_range(1..=6);
        if sigma_min_pow_toeplitz(&a, m) < (1.0 + op_norm(&a)).recip() * (1.0 - REL) {
            pow_bad += 1;
        }
    }
    let mut w_bad = 0;
    for _ in 0..N {
        let dx = rng.gen_range(1..=4);
        let dy = rng.gen_range(1..=dx);
        let rho = rng.gen_range(0.0..1.5);
        let sys = gen::plant(&mut rng, dx, 1, dy, rho);
        let m = rng.gen_range(1..=5);
        let k = m + rng.gen_range(0..=3);
        if toeplitz_w_actual(&sys, m, k) < toeplitz_w_bound(&sys) * (1.0 - REL) {
            w_bad += 1;
        }
    }
    let (mut zero_bad, mut neumann_bad) = (0, 0);
    for _ in 0..N {
        let d = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=5);
        let scale = rng.gen_range(0.1..3.0);
        let mut blocks = vec![Mat::identity(d, d)];
        blocks.extend((0..m).map(|_| gen::gaussian(&mut rng, d, d) * scale));
        let g = MarkovOperator::new(blocks).unwrap();
        let k = m + 1 + rng.gen_range(0..=3);
        let s = sigma_k(&toep_window(&g, 0, m + 1, k), (m + 1) * d);
        if s < toeplitz_zero_bound(&g, m) * (1.0 - REL) {
            zero_bad += 1;
        }
        if s < toeplitz_zero_bound_neumann(&g, m) * (1.0 - REL) {
            neumann_bad += 1;
        }
    }
    Outcome {
        pass: pow_bad + w_bad + zero_bad == 0,
        detail: format!(
            "violations of {N}: PowToep {pow_bad}, Toeplitz_w {w_bad}, Toeplitz_zero (stated) {zero_bad}, Toeplitz_zero (Neumann) {neumann_bad}"
        ),
        hard: pow_bad + w_bad + neumann_bad == 0,
    }
}

fn observer_comparator(rng: &mut ChaCha8Rng, sys: &StateSpaceSystem, cfg: &YoulaConfig) -> Ldc {
    loop {
        let f = gen::perturb(rng, &cfg.f, 0.05);
        let l = gen::perturb(rng, &cfg.l, 0.05);
        let pi = Ldc::new(&sys.a + &l * &sys.c + &sys.b * &f, -l, f, Mat::zeros(sys.du(), sys.dy())).unwrap();
        if spectral_radius(&closed_loop_of(sys, &pi).unwrap().system.a) < 0.98 {
            return pi;
        }
    }
}

// 9. Observer nominal: eta ignores the exogenous input; conversion operators
// reproduce comparator trajectories.
fn c9() -> Outcome {
    const ETA_TOL: f64 = 1e-8;
    const CONV_TOL: f64 = 1e-6;
    const T: usize = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let (mut eta_gap, mut conv_gap): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let sys = gen::plant(&mut rng, 3, 2, 2, 1.1);
        let cfg = dare_gains(&sys).unwrap();
        let nom = exact_observer_ldcex(&sys, &cfg).unwrap();
        let nz = noise(&mut rng, 3, 2, T, 1.0, 1.0);
        let nat = natures_eta(&sys, &nom, &nz).unwrap();
        let mut r2 = ChaCha8Rng::seed_from_u64(rng.gen());
        let alg = play_exogenous(&sys, &nom, &nz, |_, _| gauss(&mut r2, 2, 3.0)).unwrap();
        eta_gap = eta_gap.max(max_gap(&alg.eta, &nat.eta));

        let pi = observer_comparator(&mut rng, &sys, &cfg);
        let est = StateSpaceSystem::plant(
            gen::perturb(&mut rng, &sys.a, 0.01),
            gen::perturb(&mut rng, &sys.b, 0.01),
            gen::perturb(&mut rng, &sys.c, 0.01),
        )
        .unwrap();
        let approx = YoulaConfig { estimate: Some(est.clone()), ..cfg.clone() };
        let direct = simulate(&sys, &mut LdcPolicy::new(&pi), &nz, T, None).unwrap();
        let scale = 1.0 + max_norm(&direct.y);
        for (kind, nominal) in [
            (NominalKind::ExactYoula(cfg.clone()), nom.clone()),
            (NominalKind::ApproxYoula(approx.clone()), approx_observer_ldcex(&sys, &est, &approx).unwrap().nominal),
        ] {
            let g = conversion_operator(&sys, &kind, &pi, 1e-12).unwrap();
            let conv = play_operator(&sys, &nominal, &g, &nz).unwrap();
            conv_gap = conv_gap.max(max_gap(&direct.y, &conv.y).max(max_gap(&direct.u, &conv.u)) / scale);
        }
    }
    Outcome {
        pass: eta_gap <= ETA_TOL && conv_gap <= CONV_TOL,
        detail: format!("eta gap {eta_gap:.2e} (tol {ETA_TOL:.0e}), relative conversion gap {conv_gap:.2e} (tol {CONV_TOL:.0e})"),
        hard: true,
    }
}

// 10. Monte-Carlo conditional curvature against the certified modulus.
fn c10() -> Outcome {
    const SAMPLES: usize = 100_000;
    const FRAC: f64 = 0.9;
    let (m, h) = (2usize, 1usize);
    // noise before t - K is conditioned on (zero); the last K steps are drawn
    let k = m + h;
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let mut worst = f64::INFINITY;
    for inst in 0..10 {
        let rho = rng.gen_range(0.3..0.9);
        let sys = gen::plant(&mut rng, 2, 2, 2, rho);
        let (sw, se) = (rng.gen_range(0.2..1.0), rng.gen_range(0.2..1.0));
        let (kind, cert) = if inst % 2 == 0 {
            (NominalKind::Zero, alpha_stable(&sys, sw, se, 1.0))
        } else {
            let gain = gen::gaussian(&mut rng, 2, 2) * 0.1;
            let c = alpha_static_feedback(&sys, &gain, sw, se, 1.0);
            (NominalKind::InternallyStable(Ldc::static_gain(gain)), c)
        };
        let nom = kind.ldcex(&sys).unwrap();
        let set = ex_transfers(&sys, &nom, h).unwrap();
        let ds = nom.d_eta();
        let n = m * 2 * ds;
        let mut q = Mat::zeros(n, n);
        for _ in 0..SAMPLES {
            let nz = noise(&mut rng, 2, 2, k, sw, se);
            let nat = natures_eta(&sys, &nom, &nz).unwrap();
            let j = response_jacobian(&set.ex_to_out, 0, h, m, ds, &nat.eta, k);
            q.gemm_tr(1.0 / SAMPLES as f64, &j, &j, 1.0);
        }
        let lam = sym_min_eig(&((&q + q.transpose()) * 0.5));
        worst = worst.min(lam / cert.alpha_f.max(1e-300));
    }
    Outcome { pass: worst >= FRAC, detail: format!("min lambda_min / certified alpha {worst:.3} (>= {FRAC})"), hard: true }
}

// 11. Unary gradient against central differences.
fn c11() -> Outcome {
    const TOL: f64 = 1e-5;
    const STEP: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (dx, du, dy) = (rng.gen_range(1..=4), rng.gen_range(1..=3), rng.gen_range(1..=3));
        let rho = rng.gen_range(0.1..0.95);
        let sys = gen::plant(&mut rng, dx, du, dy, rho);
        let h = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=5);
        let g = sys.markov(h);
        let t = rng.gen_range(1..=20);
        let s: Vec<Vector> = (0..20).map(|_| gauss(&mut rng, dy, 1.0)).collect();
        let drc = Drc { blocks: (0..m).map(|_| gen::gaussian(&mut rng, du, dy) * 0.3).collect() };
        let quad = Quadratic::identity(dy, du);
        let ph = PseudoHuber { delta: rng.gen_range(0.2..2.0), lambda: rng.gen_range(0.1..1.0) };
        let loss: &dyn Loss = if rng.gen_bool(0.5) { &quad } else { &ph };
        let grad = unary_gradient(&drc, &g, h, &s, t, loss).to_vector();
        let x0 = drc.to_vector();
        let mut fd = Vector::zeros(x0.len());
        for i in 0..x0.len() {
            let (mut xp, mut xm) = (x0.clone(), x0.clone());
            xp[i] += STEP;
            xm[i] -= STEP;
            let fp = unary_loss(&Drc::from_vector(&xp, m, du, dy), &g, h, &s, t, loss);
            let fm = unary_loss(&Drc::from_vector(&xm, m, du, dy), &g, h, &s, t, loss);
            fd[i] = (fp - fm) / (2.0 * STEP);
        }
        // gradients that vanish identically (t too small to see any signal)
        let scale = grad.norm().max(1e-8);
        worst = worst.max((&grad - &fd).norm() / scale);
    }
    Outcome { pass: worst <= TOL, detail: format!("max relative error {worst:.2e} (tol {TOL:.0e})"), hard: true }
}

fn main() {
    let criteria: [(usize, &str, Duration, fn() -> Outcome); 11] = [
        (1, "natures-y exactness", Duration::from_secs(10), c1),
        (2, "policy approximation", Duration::from_secs(30), c2),
        (3, "known-system sqrt(T) scaling", Duration::from_secs(300), c3),
        (4, "unknown-system T^(2/3) scaling", Duration::from_secs(600), c4),
        (5, "strongly-convex polylog regret", Duration::from_secs(300), c5),
        (6, "robust OGD quadratic sensitivity", Duration::from_secs(60), c6),
        (7, "estimation rate", Duration::from_secs(120), c7),
        (8, "Toeplitz bound validity", Duration::from_secs(60), c8),
        (9, "exogenous invariance and conversion", Duration::from_secs(60), c9),
        (10, "convexity certificate soundness", Duration::from_secs(120), c10),
        (11, "gradient fidelity", Duration::from_secs(10), c11),
    ];
    let mut failed = Vec::new();
    for (id, name, budget, f) in criteria {
        let start = Instant::now();
        let out = f();
        let took = start.elapsed();
        let in_time = took <= budget;
        let pass = out.pass && in_time;
        println!(
            "criterion {id:>2} {}: {name}: {} [{:.1}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
        let excused = KNOWN_FAILING.contains(&id) && out.hard && in_time;
        if !pass && !excused {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        eprintln!("unexpected failures: {failed:?}");
        std::process::exit(1);
    }
}
