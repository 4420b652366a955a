mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pidrl::environments::{chain_walk, cliff_walk, garnet, GarnetSpec};
use pidrl::learning::sync_dataset;

/// Empirical transition frequencies and mean rewards agree with the model.
#[test]
fn sampled_transitions_follow_the_model() {
    let (chain, _) = chain_walk(0.9).unwrap();
    let (cliff, _) = cliff_walk(0.9).unwrap();
    let (g, _) = garnet(&GarnetSpec { seed: 3, ..Default::default() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 40_000;
    for mdp in [&chain, &cliff, &g] {
        let n = mdp.n_states();
        for (x, a) in [(0, 0), (n / 2, mdp.n_actions() - 1), (n - 1, 0)] {
            let mut hits = vec![0u32; n];
            let mut reward = 0.0;
            for _ in 0..draws {
                let s = mdp.sample_transition(&mut rng, x, a).unwrap();
                assert_eq!((s.state, s.action), (x, a));
                hits[s.next_state] += 1;
                reward += s.reward / draws as f64;
            }
            for (y, &h) in hits.iter().enumerate() {
                let f = h as f64 / draws as f64;
                let p = mdp.transition_prob(x, a, y);
                // five binomial standard deviations
                assert!((f - p).abs() <= 5.0 * (p * (1.0 - p) / draws as f64).sqrt() + 1e-12, "({x},{a})->{y}: {f} vs {p}");
            }
            let (lo, hi) = mdp.reward_range();
            let tol = 5.0 * (hi - lo) / (2.0 * (draws as f64).sqrt());
            assert!((reward - mdp.mean_reward(x, a)).abs() <= tol + 1e-12);
        }
    }
}

#[test]
fn sync_dataset_has_one_sample_per_state() {
    let (mdp, policy) = garnet(&GarnetSpec { seed: 5, ..Default::default() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = sync_dataset(&mdp, &policy, &mut rng).unwrap();
    assert_eq!(data.len(), mdp.n_states());
    assert!(data.iter().enumerate().all(|(x, s)| s.state == x && mdp.transition_prob(x, s.action, s.next_state) > 0.0));
}

#[test]
fn garnet_generation_is_seeded() {
    let spec = GarnetSpec { seed: 42, ..Default::default() };
    let (a, pa) = garnet(&spec).unwrap();
    let (b, pb) = garnet(&spec).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(pa, pb);
    let (c, _) = garnet(&GarnetSpec { seed: 43, ..spec }).unwrap();
    assert_ne!(a.to_json().unwrap(), c.to_json().unwrap());
}
