use drc_core::drc::{drc_from_ldc, Drc, DrcClass, Quadratic};
use drc_core::drc_ex::{dare_gains, ex_transfers_auto, natures_eta, LdcEx};
use drc_core::gen;
use drc_core::lds::{Ldc, MarkovOperator, NoiseSequence, TAIL_TOL};
use drc_core::linalg::{vstack, Mat, Vector};
use drc_harness::config::ExperimentConfig;
use drc_harness::experiment::{rollout_fixed, run_experiment};
use drc_harness::hindsight::{best_in_hindsight, Counterfactual};
use drc_harness::output::{emit_outputs, read_regret, regret_svg, write_regret};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gauss(rng: &mut ChaCha8Rng, d: usize) -> Vector {
    Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn config(t: usize, comparator: serde_json::Value) -> ExperimentConfig {
    serde_json::from_value(serde_json::json!({
        "system": {"kind": "random", "dx": 2, "du": 1, "dy": 1, "rho": 0.6, "seed": 3},
        "mode": "known", "t": t, "m": 4, "h": 4,
        "schedule": {"kind": "constant", "eta": 0.02},
        "loss": {"kind": "quadratic", "q": 1.0, "r": 0.1},
        "noise": {
            "adversarial": {"kind": "sinusoid", "amplitude": 1.0, "periods": [25.0]},
            "stochastic": {"kind": "gaussian", "sigma_w": 0.3, "sigma_e": 0.3},
            "seed": 9
        },
        "comparator": comparator,
        "plot": false
    }))
    .unwrap()
}

#[test]
fn hindsight_is_zero_without_noise() {
    let g = MarkovOperator::new(vec![vstack(&[&Mat::zeros(1, 1), &Mat::identity(1, 1)]), Mat::from_element(2, 1, 0.5)]).unwrap();
    let signals = vec![Vector::zeros(1); 20];
    let v_nat = vec![Vector::zeros(2); 20];
    let loss = Quadratic::identity(1, 1);
    let p = Counterfactual { g_out: &g, signals: &signals, v_nat: &v_nat, dy: 1, loss: &loss };
    let best = best_in_hindsight(&DrcClass::new(3, 1.0).unwrap(), &p, 1, 100);
    assert_eq!(best.objective, 0.0);
    assert_eq!(best.drc, Drc::zeros(3, 1, 1));
}

// One step, y = y0 + G0 u, u = M s: the optimal input is
// -(G0'G0 + I)^-1 G0' y0 with value y0' (I + G0 G0')^-1 y0.
#[test]
fn single_step_quadratic_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (dy, du, ds) = (2, 2, 3);
    let g0 = gen::gaussian(&mut rng, dy, du);
    let g = MarkovOperator::new(vec![vstack(&[&g0, &Mat::identity(du, du)])]).unwrap();
    let y0 = gauss(&mut rng, dy) * 0.2;
    let s = gauss(&mut rng, ds);
    let v0 = drc_core::linalg::vcat(&[&y0, &Vector::zeros(du)]);
    let loss = Quadratic::identity(dy, du);
    let (signals, v_nat) = (vec![s.clone()], vec![v0]);
    let p = Counterfactual { g_out: &g, signals: &signals, v_nat: &v_nat, dy, loss: &loss };
    let best = best_in_hindsight(&DrcClass::new(1, 10.0).unwrap(), &p, ds, 10_000);
    let u_star = -(g0.transpose() * &g0 + Mat::identity(du, du)).try_inverse().unwrap() * g0.transpose() * &y0;
    let value = y0.dot(&((Mat::identity(dy, dy) + &g0 * g0.transpose()).try_inverse().unwrap() * &y0));
    assert!((&best.drc.blocks[0] * &s - u_star).norm() < 1e-6);
    assert!((best.objective - value).abs() < 1e-6);
}

#[test]
fn hindsight_beats_observer_controller() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sys = gen::plant(&mut rng, 3, 1, 1, 0.8);
    let cfg = dare_gains(&sys).unwrap();
    let pi = Ldc::new(&sys.a + &cfg.l * &sys.c + &sys.b * &cfg.f, -&cfg.l, cfg.f.clone(), Mat::zeros(1, 1)).unwrap();
    let m = 8;
    let candidate = drc_from_ldc(&pi, &sys, m).unwrap();
    let class = DrcClass::new(m, candidate.l1op_norm().max(1.0)).unwrap();
    let t = 400;
    let noise = NoiseSequence {
        w: (0..t).map(|_| gauss(&mut rng, 3) * 0.5).collect(),
        e: (0..t).map(|_| gauss(&mut rng, 1) * 0.5).collect(),
    };
    let nom = LdcEx::trivial(1, 1);
    let set = ex_transfers_auto(&sys, &nom, TAIL_TOL).unwrap();
    let nat = natures_eta(&sys, &nom, &noise).unwrap();
    let v_nat: Vec<Vector> = (1..=t).map(|s| nat.v(s)).collect();
    let loss = Quadratic::identity(1, 1);
    let p = Counterfactual { g_out: &set.ex_to_out, signals: &nat.eta, v_nat: &v_nat, dy: 1, loss: &loss };
    let best = best_in_hindsight(&class, &p, 1, 5000);
    let cand: f64 = rollout_fixed(&sys, &nom, &noise, &nat, &candidate, &loss).unwrap().iter().sum();
    let real: f64 = rollout_fixed(&sys, &nom, &noise, &nat, &best.drc, &loss).unwrap().iter().sum();
    assert!(best.objective <= cand * (1.0 + 1e-8), "{} > {cand}", best.objective);
    assert!((real - best.objective).abs() <= 1e-6 * real);
}

#[test]
fn empty_horizon_runs() {
    let out = run_experiment(&config(0, serde_json::json!({"kind": "best_in_hindsight", "iters": 100}))).unwrap();
    assert!(out.report.regret.is_empty());
    assert_eq!(out.report.final_regret(), 0.0);
}

#[test]
fn learner_beats_doing_nothing() {
    let out = run_experiment(&config(3000, serde_json::json!({"kind": "zero"}))).unwrap();
    assert!(out.report.final_regret() < 0.0, "regret vs zero input {}", out.report.final_regret());
}

#[test]
fn regret_csv_round_trips_and_artifacts_are_deterministic() {
    let cfg = config(300, serde_json::json!({"kind": "best_in_hindsight", "iters": 500}));
    let out = run_experiment(&cfg).unwrap();
    let dir = std::env::temp_dir().join(format!("drc-harness-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("regret.csv");
    write_regret(&path, &out.report).unwrap();
    let back = read_regret(&path, &out.report.comparator).unwrap();
    assert_eq!(back.loss_alg, out.report.loss_alg);
    assert_eq!(back.regret, out.report.regret);

    let a = dir.join("a");
    let b = dir.join("b");
    emit_outputs(&out, &a, true).unwrap();
    emit_outputs(&run_experiment(&cfg).unwrap(), &b, true).unwrap();
    for f in ["trace.csv", "regret.csv", "summary.json", "regret.svg"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let svg = std::fs::read_to_string(a.join("regret.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));

    let empty = drc_core::oco::policy_regret(&[], &[], "none").unwrap();
    let p = dir.join("empty.csv");
    write_regret(&p, &empty).unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap().trim(), "t,loss_alg,loss_cmp,regret");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn svg_is_stable_for_fixed_input() {
    let r: Vec<f64> = (1..=500).map(|t| (t as f64).sqrt()).collect();
    assert_eq!(regret_svg(&r), regret_svg(&r));
    assert!(regret_svg(&[]).contains("</svg>"));
}
