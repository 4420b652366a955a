mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_gains, random_mdp, random_policy};
use pidrl::analysis::{noise_bound_pid, noise_bound_scalar, prop1_ratio_pid, prop1_ratio_td, spectral_report};
use pidrl::gain_adaptation::{adapter_commit, AdapterState};
use pidrl::learning::{pid_q_step, pid_td_step, LearningRateSchedule, ScheduleTriple, VisitCounts};
use pidrl::linalg::sup_norm;
use pidrl::planning::{pid_vi_step_control, pid_vi_step_pe};
use pidrl::{Gains, MarkovRewardProcess, PeState, QState, TransitionSample};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn vector(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-scale..scale)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn policy_kernel_rows_are_distributions(seed: u64, n in 1usize..12, m in 1usize..4) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, n, m, 0.9);
        let k = mdp.policy_kernel(&random_policy(&mut r, n, m)).unwrap();
        for x in 0..n {
            let row = k.row(x);
            prop_assert!(row.iter().all(|&p| p >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pid_vi_step_is_affine(seed: u64, n in 1usize..10, t in 0.0f64..1.0) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, n, 2, 0.95);
        let mrp = MarkovRewardProcess::new(&mdp, &random_policy(&mut r, n, 2)).unwrap();
        let g = random_gains(&mut r);
        let x = vector(&mut r, 3 * n, 10.0);
        let y = vector(&mut r, 3 * n, 10.0);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let step = |s: &[f64]| pid_vi_step_pe(&mrp, &g, &PeState::from_stacked(s).unwrap()).unwrap().stacked();
        let (fx, fy, fm) = (step(&x), step(&y), step(&mix));
        let expect: Vec<f64> = fx.iter().zip(&fy).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        prop_assert!(sup_dist(&fm, &expect) < 1e-9);
    }

    #[test]
    fn exact_value_is_a_pid_fixed_point(seed: u64, n in 1usize..10) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, n, 3, 0.9);
        let policy = random_policy(&mut r, n, 3);
        let mrp = MarkovRewardProcess::new(&mdp, &policy).unwrap();
        let v = mdp.exact_value_pe(&policy).unwrap();
        let g = random_gains(&mut r);
        let next = pid_vi_step_pe(&mrp, &g, &PeState::from_value(v.clone())).unwrap();
        prop_assert!(sup_dist(&next.v, &v) < 1e-10);
        prop_assert!(sup_norm(&next.z) < 1e-10);

        let q = mdp.exact_value_control(1e-12).unwrap();
        let next = pid_vi_step_control(&mdp, &g, &QState::from_value(3, q.clone())).unwrap();
        prop_assert!(sup_dist(&next.q, &q) < 1e-9);
    }

    #[test]
    fn bellman_operators_contract(seed: u64, n in 1usize..10, m in 1usize..4, gamma in 0.0f64..0.999) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, n, m, gamma);
        let policy = random_policy(&mut r, n, m);
        let (v1, v2) = (vector(&mut r, n, 5.0), vector(&mut r, n, 5.0));
        let d = sup_dist(&mdp.bellman_pe(&policy, &v1).unwrap(), &mdp.bellman_pe(&policy, &v2).unwrap());
        prop_assert!(d <= gamma * sup_dist(&v1, &v2) + 1e-12);
        let (q1, q2) = (vector(&mut r, n * m, 5.0), vector(&mut r, n * m, 5.0));
        let d = sup_dist(&mdp.bellman_control(&q1).unwrap(), &mdp.bellman_control(&q2).unwrap());
        prop_assert!(d <= gamma * sup_dist(&q1, &q2) + 1e-12);
    }

    #[test]
    fn bellman_optimality_is_monotone(seed: u64, n in 1usize..10, m in 1usize..4) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, n, m, 0.9);
        let lo = vector(&mut r, n * m, 5.0);
        let hi: Vec<f64> = lo.iter().map(|q| q + r.gen_range(0.0..2.0)).collect();
        let (tlo, thi) = (mdp.bellman_control(&lo).unwrap(), mdp.bellman_control(&hi).unwrap());
        prop_assert!(tlo.iter().zip(&thi).all(|(a, b)| a <= b));
    }

    #[test]
    fn vi_convergent_implies_td_convergent(seed: u64, n in 1usize..8) {
        let mut r = rng(seed);
        let gamma = r.gen_range(0.1..0.99);
        let mdp = random_mdp(&mut r, n, 2, gamma);
        let mrp = MarkovRewardProcess::new(&mdp, &random_policy(&mut r, n, 2)).unwrap();
        let rep = spectral_report(&mrp, &random_gains(&mut r)).unwrap();
        prop_assert!(rep.max_real_part <= rep.spectral_radius + 1e-12);
        prop_assert!(!rep.vi_convergent || rep.td_convergent);
    }

    #[test]
    fn running_residual_stays_nonnegative(deltas in prop::collection::vec(-1e3f64..1e3, 1..50), lambda in 0.0f64..=1.0) {
        let mut a = AdapterState::new(2);
        for (k, d) in deltas.iter().enumerate() {
            adapter_commit(&mut a, k % 2, *d, *d, lambda).unwrap();
            prop_assert!(a.running_br.iter().all(|&b| b >= 0.0));
        }
    }

    #[test]
    fn stochastic_steps_touch_one_entry(seed: u64, n in 2usize..10, m in 1usize..4) {
        let mut r = rng(seed);
        let g = random_gains(&mut r);
        let sched = ScheduleTriple::shared(LearningRateSchedule::CountCap { epsilon: 0.5, cap: 10.0 });
        let s = TransitionSample {
            state: r.gen_range(0..n),
            action: r.gen_range(0..m),
            reward: r.gen_range(-1.0..1.0),
            next_state: r.gen_range(0..n),
        };
        let before = PeState::from_stacked(&vector(&mut r, 3 * n, 3.0)).unwrap();
        let mut after = before.clone();
        let mut counts = VisitCounts::new(n);
        pid_td_step(&mut after, &mut counts, &s, 0.9, &g, &sched).unwrap();
        for x in (0..n).filter(|&x| x != s.state) {
            prop_assert_eq!((after.v[x], after.z[x], after.v_prev[x]), (before.v[x], before.z[x], before.v_prev[x]));
            prop_assert_eq!(counts.get(x), 0);
        }
        prop_assert_eq!(counts.get(s.state), 1);

        let stacked = vector(&mut r, 3 * n * m, 3.0);
        let (q, rest) = stacked.split_at(n * m);
        let (z, qp) = rest.split_at(n * m);
        let before = QState { n_actions: m, q: q.to_vec(), z: z.to_vec(), q_prev: qp.to_vec() };
        let mut after = before.clone();
        let mut counts = VisitCounts::new(n * m);
        pid_q_step(&mut after, &mut counts, &s, 0.9, &g, &sched).unwrap();
        let i = s.state * m + s.action;
        for j in (0..n * m).filter(|&j| j != i) {
            prop_assert_eq!((after.q[j], after.z[j], after.q_prev[j]), (before.q[j], before.z[j], before.q_prev[j]));
        }
    }

    #[test]
    fn schedules_stay_in_range(eps in 0.0f64..1.0, cap in 0.1f64..100.0, offset in 1.0f64..100.0, k in 0u64..10_000) {
        let cc = LearningRateSchedule::CountCap { epsilon: eps, cap };
        prop_assert!((0.0..=eps).contains(&cc.value(k)));
        prop_assert!(cc.value(k + 1) <= cc.value(k));
        let poly = LearningRateSchedule::Polynomial { epsilon: eps, offset };
        prop_assert!((0.0..=1.0).contains(&poly.value(k)));
        prop_assert!(poly.value(k + 1) <= poly.value(k));
    }

    #[test]
    fn bounds_are_monotone(d1 in 0.0f64..1.0, d2 in 0.0f64..1.0, v1 in 0.0f64..50.0, v2 in 0.0f64..50.0, gamma in 0.0f64..0.999) {
        let (dl, dh) = (d1.min(d2), d1.max(d2));
        let (vl, vh) = (v1.min(v2), v1.max(v2));
        prop_assert!(noise_bound_scalar(dh, gamma, vl).unwrap() <= noise_bound_scalar(dl, gamma, vl).unwrap());
        prop_assert!(noise_bound_scalar(dl, gamma, vl).unwrap() <= noise_bound_scalar(dl, gamma, vh).unwrap());
        let g = Gains::new(1.2, 0.3, 0.1, 0.05, 0.9).unwrap();
        prop_assert!(noise_bound_pid(dh, 5, gamma, &g, vl).unwrap() <= noise_bound_pid(dl, 5, gamma, &g, vl).unwrap());
        let (e0, vinf) = (1.0 + v1, 1.0 + v2);
        prop_assert!(prop1_ratio_td(e0, vinf, 10, gamma, dl).unwrap() <= prop1_ratio_td(e0, vinf, 10, gamma, dh).unwrap());
        prop_assert!(prop1_ratio_pid(e0, vinf, 10, gamma, dl, &g).unwrap() <= prop1_ratio_pid(e0, vinf, 10, gamma, dh, &g).unwrap());
    }
}
