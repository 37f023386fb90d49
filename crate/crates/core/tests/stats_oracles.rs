use optiso_core::evaluation::stats::{a12, mann_whitney_u, u_distribution, PValueMethod};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Probability that a draw from `x` beats a draw from `y`, ties counting half.
fn pairwise_a12(x: &[f64], y: &[f64]) -> f64 {
    let mut wins = 0.0;
    for a in x {
        for b in y {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    wins / (x.len() * y.len()) as f64
}

fn random_sample(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let len = rng.gen_range(1..=25);
    // a small value range so ties are common
    (0..len).map(|_| rng.gen_range(1..=12) as f64).collect()
}

#[test]
fn a12_matches_pairwise_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let x = random_sample(&mut rng);
        let y = random_sample(&mut rng);
        let got = a12(&x, &y).unwrap();
        let want = pairwise_a12(&x, &y);
        assert!((got - want).abs() < 1e-12, "{x:?} {y:?}: {got} vs {want}");
        let back = a12(&y, &x).unwrap();
        assert!((got + back - 1.0).abs() < 1e-12);
        let u = mann_whitney_u(&x, &y).unwrap().u;
        assert!((got - u / (x.len() * y.len()) as f64).abs() < 1e-12);
        assert_eq!(a12(&x, &x).unwrap(), 0.5);
    }
}

#[test]
fn a12_small_examples() {
    assert_eq!(a12(&[3.0, 4.0], &[1.0, 2.0]).unwrap(), 1.0);
    let v = a12(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap();
    assert!((v - 2.0 / 9.0).abs() < 1e-12);
}

/// All ways to choose `m` of `m + n` positions, as bit masks.
fn arrangements(m: usize, n: usize) -> Vec<u32> {
    (0u32..1 << (m + n))
        .filter(|mask| mask.count_ones() as usize == m)
        .collect()
}

/// U of x against y when x holds the ranks flagged in `mask`.
fn u_of(mask: u32, total: usize) -> usize {
    let mut u = 0;
    for i in 0..total {
        if mask & (1 << i) == 0 {
            continue;
        }
        u += (0..i).filter(|j| mask & (1 << j) == 0).count();
    }
    u
}

#[test]
fn exact_path_matches_enumeration() {
    for m in 1..=6 {
        for n in 1..=6 {
            let total = m + n;
            let masks = arrangements(m, n);
            let all_u: Vec<usize> = masks.iter().map(|&mask| u_of(mask, total)).collect();
            let count = masks.len() as f64;

            let mut dist = vec![0.0; m * n + 1];
            for &u in &all_u {
                dist[u] += 1.0;
            }
            assert_eq!(u_distribution(m, n), dist, "m={m} n={n}");

            for (&mask, &u_obs) in masks.iter().zip(&all_u) {
                let x: Vec<f64> = (0..total)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| i as f64)
                    .collect();
                let y: Vec<f64> = (0..total)
                    .filter(|i| mask & (1 << i) == 0)
                    .map(|i| i as f64)
                    .collect();
                let lower = all_u.iter().filter(|&&u| u <= u_obs).count() as f64 / count;
                let upper = all_u.iter().filter(|&&u| u >= u_obs).count() as f64 / count;
                let p = (2.0 * lower.min(upper)).min(1.0);

                let got = mann_whitney_u(&x, &y).unwrap();
                assert_eq!(got.method, PValueMethod::Exact);
                assert_eq!(got.u, u_obs as f64);
                assert!(
                    (got.p_value - p).abs() < 1e-12,
                    "m={m} n={n} mask={mask:b}: {} vs {p}",
                    got.p_value
                );
            }
        }
    }
}

#[test]
fn ties_or_large_samples_use_the_normal_path() {
    let tied = mann_whitney_u(&[1.0, 2.0, 2.0], &[2.0, 3.0]).unwrap();
    assert_eq!(tied.method, PValueMethod::Normal);
    let x: Vec<f64> = (0..11).map(f64::from).collect();
    let y: Vec<f64> = (11..21).map(f64::from).collect();
    let big = mann_whitney_u(&x, &y).unwrap();
    assert_eq!(big.method, PValueMethod::Normal);
    assert!(big.p_value < 0.001);
}
