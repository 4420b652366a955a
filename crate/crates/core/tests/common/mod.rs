//! Helpers shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use pidrl::{Gains, Policy, TabularMdp};
use rand::Rng;

/// Dense random MDP; each row keeps at least one successor, rewards in [0, 1).
pub fn random_mdp<R: Rng>(rng: &mut R, n: usize, m: usize, gamma: f64) -> TabularMdp {
    let mut p = vec![0.0; n * m * n];
    let mut r = vec![0.0; n * m * n];
    for row in 0..n * m {
        let keep = rng.gen_range(0..n);
        let mut total = 0.0;
        for y in 0..n {
            let w: f64 = if y == keep || rng.gen_bool(0.6) { rng.gen::<f64>() + 1e-3 } else { 0.0 };
            p[row * n + y] = w;
            total += w;
            r[row * n + y] = rng.gen();
        }
        for y in 0..n {
            p[row * n + y] /= total;
        }
    }
    TabularMdp::new(n, m, gamma, p, r).expect("random MDP is valid")
}

pub fn random_policy<R: Rng>(rng: &mut R, n: usize, m: usize) -> Policy {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let w: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let s: f64 = w.iter().sum();
            w.iter().map(|v| v / s).collect()
        })
        .collect();
    Policy::from_rows(&rows).expect("random policy is valid")
}

pub fn random_gains<R: Rng>(rng: &mut R) -> Gains {
    Gains::new(
        rng.gen_range(0.2..2.0),
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.5..0.5),
        rng.gen_range(0.01..0.5),
        rng.gen_range(0.0..1.0),
    )
    .expect("gains in range")
}

/// Coefficients `c[0..=n]` of `det(lambda I - A)` by Faddeev-LeVerrier.
pub fn char_poly(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m = vec![vec![0.0; n]; n];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = (0..n).map(|l| a[i][l] * m[l][j]).sum::<f64>();
            }
            next[i][i] += c[n - k + 1];
        }
        m = next;
        let trace: f64 = (0..n).map(|i| (0..n).map(|l| a[i][l] * m[l][i]).sum::<f64>()).sum();
        c[n - k] = -trace / k as f64;
    }
    c
}

fn horner(c: &[f64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &k| acc * z + k)
}

/// Roots of a monic polynomial by Durand-Kerner iteration.
pub fn poly_roots(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let scale = c.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|i| seed.powu(i as u32) * scale).collect();
    for _ in 0..5000 {
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let step = horner(c, z[i]) / den;
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// Smallest achievable max distance when pairing two multisets.
pub fn match_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    fn go(a: &[Complex64], b: &mut Vec<Complex64>, worst: f64, best: &mut f64) {
        if worst >= *best {
            return;
        }
        let Some((first, rest)) = a.split_first() else {
            *best = worst;
            return;
        };
        for k in 0..b.len() {
            let v = b.swap_remove(k);
            go(rest, b, worst.max((first - v).norm()), best);
            b.push(v);
            let last = b.len() - 1;
            b.swap(k, last);
        }
    }
    let mut best = f64::INFINITY;
    go(a, &mut b.to_vec(), 0.0, &mut best);
    best
}
