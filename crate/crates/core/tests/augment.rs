use mvga_core::data::{augment, AugmentConfig};
use mvga_core::ViewStack;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 12 × 4 × 145 × 145 = 1,009,200 elements.
fn big_stack(fill: impl FnMut() -> f32) -> ViewStack {
    let n = 12 * 4 * 145 * 145;
    ViewStack::new(12, 4, 145, std::iter::repeat_with(fill).take(n).collect()).unwrap()
}

fn zero_fraction(s: &ViewStack) -> f64 {
    s.data().iter().filter(|&&v| v == 0.0).count() as f64 / s.data().len() as f64
}

fn cfg(p: f64, sigma: f64) -> AugmentConfig {
    AugmentConfig {
        input_dropout_p: p,
        noise_sigma: sigma,
        seed: 31,
    }
}

#[test]
fn zero_fraction_tracks_dropout_probability() {
    let ones = big_stack(|| 1.0);
    assert!(ones.data().len() >= 1_000_000);
    for p in [0.2, 0.5, 0.99] {
        let out = augment(&ones, &cfg(p, 0.0), 0, 1).unwrap();
        let z = zero_fraction(&out);
        assert!((z - p).abs() <= 0.005, "p {p}: zero fraction {z}");
    }
}

#[test]
fn inverted_dropout_preserves_the_mean() {
    let ones = big_stack(|| 1.0);
    let out = augment(&ones, &cfg(0.2, 0.0), 3, 2).unwrap();
    let mean = out.data().iter().map(|&v| v as f64).sum::<f64>() / out.data().len() as f64;
    assert!((mean - 1.0).abs() <= 0.005, "mean {mean}");
    // survivors are exactly 1 / (1 − p)
    assert!(out.data().iter().all(|&v| v == 0.0 || v == 1.25));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let varied = big_stack(|| rng.gen_range(0.5f32..1.5));
    let out = augment(&varied, &cfg(0.2, 0.0), 4, 2).unwrap();
    let sum = |s: &ViewStack| s.data().iter().map(|&v| v as f64).sum::<f64>();
    assert!((sum(&out) / sum(&varied) - 1.0).abs() <= 0.005);
}

/// Monte Carlo over epochs: each element's average stays within three
/// standard errors of its input value.
#[test]
fn elementwise_expectation_is_preserved() {
    let x: Vec<f32> = (0..64).map(|i| 0.1 + i as f32 * 0.05).collect();
    let stack = ViewStack::new(1, 1, 8, x.clone()).unwrap();
    let trials = 4000;
    let p = 0.2;
    let mut sums = vec![0.0f64; 64];
    for epoch in 0..trials {
        let out = augment(&stack, &cfg(p, 0.0), 9, epoch).unwrap();
        for (s, &v) in sums.iter_mut().zip(out.data()) {
            *s += v as f64;
        }
    }
    for (i, &xi) in x.iter().enumerate() {
        let xi = xi as f64;
        let se = xi * (p / (1.0 - p) / trials as f64).sqrt();
        assert!(
            (sums[i] / trials as f64 - xi).abs() <= 3.0 * se + 1e-12,
            "element {i}"
        );
    }
}

/// Masks from different (sample, epoch) triples are independent: a 2×2
/// contingency table of zeroed/kept passes a chi-square test.
#[test]
fn masks_from_different_triples_are_independent() {
    let ones = big_stack(|| 1.0);
    let a = augment(&ones, &cfg(0.3, 0.0), 0, 1).unwrap();
    let b = augment(&ones, &cfg(0.3, 0.0), 1, 1).unwrap();
    let c = augment(&ones, &cfg(0.3, 0.0), 0, 2).unwrap();
    for other in [&b, &c] {
        let mut table = [[0.0f64; 2]; 2];
        for (x, y) in a.data().iter().zip(other.data()) {
            table[(*x == 0.0) as usize][(*y == 0.0) as usize] += 1.0;
        }
        let n: f64 = table.iter().flatten().sum();
        let mut chi2 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let expected = (table[i][0] + table[i][1]) * (table[0][j] + table[1][j]) / n;
                chi2 += (table[i][j] - expected).powi(2) / expected;
            }
        }
        // 1 degree of freedom, p = 0.001
        assert!(chi2 < 10.83, "chi2 {chi2}");
    }
    assert_ne!(a.data(), b.data());
}

#[test]
fn noise_only_touches_survivors() {
    let ones = big_stack(|| 1.0);
    let out = augment(&ones, &cfg(0.2, 0.05), 2, 7).unwrap();
    let survivors: Vec<f64> = out
        .data()
        .iter()
        .filter(|&&v| v != 0.0)
        .map(|&v| v as f64 - 1.25)
        .collect();
    let n = survivors.len() as f64;
    let mean = survivors.iter().sum::<f64>() / n;
    let sd = (survivors.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 1e-3, "noise mean {mean}");
    assert!((sd - 0.05).abs() < 1e-3, "noise sd {sd}");
    assert!((zero_fraction(&out) - 0.2).abs() <= 0.005);
}
