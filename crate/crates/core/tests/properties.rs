use drc_core::drc::{control_input, drc_from_ldc, project_class, unary_gradient, unary_loss, Drc, DrcClass, PseudoHuber, Quadratic};
use drc_core::gen;
use drc_core::lds::{natures_signal, recover_natures, simulate, transfer_of, LdcPolicy, NoiseSequence, Observation};
use drc_core::linalg::{op_norm, Vector};
use drc_core::projection::{l1_linf_norm, project_l1_linf};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn vecs(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Vec<Vector> {
    (0..n).map(|_| Vector::from_fn(d, |_, _| rng.sample(StandardNormal))).collect()
}

fn noise(rng: &mut ChaCha8Rng, dx: usize, dy: usize, n: usize) -> NoiseSequence {
    NoiseSequence { w: vecs(rng, dx, n), e: vecs(rng, dy, n) }
}

fn groups_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 1..5), 1..5)
}

fn dist(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_lands_in_ball_and_is_idempotent(z in groups_strategy(), r in 0.0..6.0f64) {
        let p = project_l1_linf(&z, r);
        prop_assert!(l1_linf_norm(&p) <= r + 1e-9);
        let pp = project_l1_linf(&p, r);
        prop_assert!(dist(&p, &pp) <= 1e-9);
    }

    #[test]
    fn projection_is_nonexpansive(z in groups_strategy(), seed in 0u64..1000, r in 0.1..6.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z2: Vec<Vec<f64>> = z.iter().map(|g| g.iter().map(|v| v + rng.gen_range(-1.0..1.0)).collect()).collect();
        let (p1, p2) = (project_l1_linf(&z, r), project_l1_linf(&z2, r));
        prop_assert!(dist(&p1, &p2) <= dist(&z, &z2) + 1e-9);
    }

    // variational inequality <z - p, q - p> <= 0 over random feasible q
    #[test]
    fn projection_is_optimal(z in groups_strategy(), seed in 0u64..1000, r in 0.1..4.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = project_l1_linf(&z, r);
        for _ in 0..20 {
            let q: Vec<Vec<f64>> = z.iter().map(|g| g.iter().map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
            let nq = l1_linf_norm(&q);
            let q: Vec<Vec<f64>> = if nq > r { q.iter().map(|g| g.iter().map(|v| v * r / nq).collect()).collect() } else { q };
            let ip: f64 = z.iter().flatten().zip(p.iter().flatten()).zip(q.iter().flatten())
                .map(|((zz, pp), qq)| (zz - pp) * (qq - pp)).sum();
            prop_assert!(ip <= 1e-8);
        }
    }

    #[test]
    fn class_projection_respects_radius(seed in 0u64..1000, r in 1.0..4.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Drc { blocks: (0..3).map(|_| gen::gaussian(&mut rng, 2, 3)).collect() };
        let p = project_class(&m, &DrcClass::new(3, r).unwrap());
        prop_assert!(p.l1op_norm() <= r * (1.0 + 1e-9));
        if m.l1op_norm() <= r {
            prop_assert_eq!(p, m);
        }
    }

    #[test]
    fn control_input_is_linear(seed in 0u64..1000, a in -2.0..2.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = vecs(&mut rng, 2, 10);
        let m1 = Drc { blocks: (0..4).map(|_| gen::gaussian(&mut rng, 3, 2)).collect() };
        let m2 = Drc { blocks: (0..4).map(|_| gen::gaussian(&mut rng, 3, 2)).collect() };
        let t = rng.gen_range(1..=10);
        let lhs = control_input(&m1.axpy(a, &m2), &s, t);
        let rhs = control_input(&m1, &s, t) + control_input(&m2, &s, t) * a;
        prop_assert!((lhs - rhs).norm() <= 1e-10);
    }

    #[test]
    fn gradient_matches_central_differences(seed in 0u64..1000, huber in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = gen::plant(&mut rng, 3, 2, 2, 0.8);
        let g = sys.markov(4);
        let s = vecs(&mut rng, 2, 12);
        let m = Drc { blocks: (0..3).map(|_| gen::gaussian(&mut rng, 2, 2) * 0.3).collect() };
        let q = Quadratic::identity(2, 2);
        let ph = PseudoHuber { delta: 1.0, lambda: 0.5 };
        let loss: &dyn drc_core::drc::Loss = if huber { &ph } else { &q };
        let t = 10;
        let grad = unary_gradient(&m, &g, 4, &s, t, loss).to_vector();
        let x0 = m.to_vector();
        let hstep = 1e-5;
        let mut fd = Vector::zeros(x0.len());
        for k in 0..x0.len() {
            let mut xp = x0.clone();
            xp[k] += hstep;
            let mut xm = x0.clone();
            xm[k] -= hstep;
            let fp = unary_loss(&Drc::from_vector(&xp, 3, 2, 2), &g, 4, &s, t, loss);
            let fm = unary_loss(&Drc::from_vector(&xm, 3, 2, 2), &g, 4, &s, t, loss);
            fd[k] = (fp - fm) / (2.0 * hstep);
        }
        prop_assert!((&grad - &fd).norm() <= 1e-5 * grad.norm().max(1.0));
    }

    #[test]
    fn natures_y_is_recovered_under_any_policy(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = gen::plant(&mut rng, 3, 2, 2, 1.05);
        let n = noise(&mut rng, 3, 2, 60);
        let inputs = vecs(&mut rng, 2, 60);
        let mut pol = |o: &Observation| &inputs[o.t - 1] + o.y[o.t - 1].clone() * 0.1;
        let tr = simulate(&sys, &mut pol, &n, 60, None).unwrap();
        let rec = recover_natures(&tr.y, &tr.u, &sys.markov(60));
        let truth = natures_signal(&sys, &n);
        for (a, b) in rec.iter().zip(&truth) {
            prop_assert!((a - b).norm() <= 1e-8 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn markov_blocks_are_impulse_responses(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = gen::plant(&mut rng, 3, 2, 2, 0.9);
        let g = transfer_of(&sys, 8);
        for j in 0..2 {
            let mut pol = |o: &Observation| if o.t == 1 { Vector::from_fn(2, |i, _| if i == j { 1.0 } else { 0.0 }) } else { Vector::zeros(2) };
            let tr = simulate(&sys, &mut pol, &NoiseSequence::zeros(3, 2, 9), 9, None).unwrap();
            for i in 0..=8 {
                let col = g.blocks[i].column(j).clone_owned();
                prop_assert!((&tr.y[i] - col).norm() <= 1e-12);
            }
        }
    }
}

// A DRC built from a stabilizing LDC, played on Nature's y, tracks the LDC's
// inputs up to the truncated tail of its e -> u response.
#[test]
fn drc_from_ldc_tracks_controller() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut tested = 0;
    while tested < 10 {
        let sys = gen::plant(&mut rng, 3, 1, 1, 0.7);
        let pi = gen::controller(&mut rng, 2, 1, 1, 0.5, 0.3);
        let cl = match drc_core::lds::closed_loop_of(&sys, &pi) {
            Ok(c) if c.system.spectral_radius() < 0.9 => c,
            _ => continue,
        };
        tested += 1;
        let n = noise(&mut rng, 3, 1, 300);
        let y_nat = natures_signal(&sys, &n);
        let full = transfer_of(&cl.e_to_u, 400);
        let mut pol = LdcPolicy::new(&pi);
        let tr = simulate(&sys, &mut pol, &n, 300, None).unwrap();
        let ynat_max = y_nat.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for m in [4usize, 16] {
            let drc = drc_from_ldc(&pi, &sys, m).unwrap();
            let tail: f64 = full.blocks[m..].iter().map(op_norm).sum();
            for t in 1..=300 {
                let err = (control_input(&drc, &y_nat, t) - &tr.u[t - 1]).norm();
                assert!(err <= tail * ynat_max + 1e-9, "m {m} t {t}: {err} > {}", tail * ynat_max);
            }
        }
    }
}
