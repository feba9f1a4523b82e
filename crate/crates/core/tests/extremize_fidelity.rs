use lpimprove::extremize::{brute_force_norm, power_iterate};
use lpimprove::kernel::{poly_kernel, prime_kernel};
use lpimprove::{IntPolynomial, Kernel, KernelMeta};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn test_kernels() -> Vec<(String, Kernel)> {
    let mut out = vec![
        ("x^2 N=2".to_string(), poly_kernel(&IntPolynomial::monomial(2).unwrap(), 2).unwrap()),
        ("x^2 N=3".to_string(), poly_kernel(&IntPolynomial::monomial(2).unwrap(), 3).unwrap()),
        ("x^2+x N=2".to_string(), poly_kernel(&IntPolynomial::quadratic(1, 1, 0).unwrap(), 2).unwrap()),
        ("x^3 N=2".to_string(), poly_kernel(&IntPolynomial::monomial(3).unwrap(), 2).unwrap()),
        ("primes N=10".to_string(), prime_kernel(10).unwrap()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for i in 0..4 {
        let pts = (0..rng.gen_range(2..5))
            .map(|_| (rng.gen_range(-6..6), rng.gen_range(0.05..1.0)))
            .collect();
        out.push((format!("random #{i}"), Kernel::from_points(pts, KernelMeta::custom()).unwrap()));
    }
    out
}

/// Dense matrix of `f ↦ K * f` from a window into the full output window.
fn dense_matrix(kernel: &Kernel, window: (i64, i64)) -> DMatrix<f64> {
    let cols = (window.1 - window.0 + 1) as usize;
    let rows = cols + kernel.span() as usize - 1;
    let mut m = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for &(pos, w) in kernel.points() {
            m[(j + (pos - kernel.min_pos()) as usize, j)] += w;
        }
    }
    m
}

#[test]
fn power_iteration_matches_brute_force_on_small_windows() {
    let mut worst = 0.0f64;
    for (name, k) in test_kernels() {
        for len in [1i64, 2, 3, 5, 8, 12] {
            let grid = if len <= 8 { 3 } else { 2 };
            let window = (-len / 2, -len / 2 + len - 1);
            for p in [1.6, 1.75, 2.0] {
                let bf = brute_force_norm(&k, p, window, grid).unwrap();
                let pi = power_iterate(&k, p, window, 1e-13, 20_000).unwrap();
                assert!(bf.lower <= bf.upper);
                let gap = (pi.ratio - bf.lower).abs();
                worst = worst.max(gap);
                assert!(
                    gap < 1e-3,
                    "{name}, window {window:?}, p = {p}: power {} vs brute force {}",
                    pi.ratio,
                    bf.lower
                );
            }
        }
    }
    println!("worst |power - brute force| = {worst:.3e}");
}

#[test]
fn power_iteration_matches_singular_value_at_p2() {
    let mut worst = 0.0f64;
    for (name, k) in test_kernels() {
        for window in [(-64i64, 64i64), (0, 255), (-10, 10)] {
            let svd_top = dense_matrix(&k, window).singular_values().max();
            let pi = power_iterate(&k, 2.0, window, 1e-15, 2_000_000).unwrap();
            let rel = (pi.ratio - svd_top).abs() / svd_top;
            worst = worst.max(rel);
            assert!(rel < 1e-8, "{name} {window:?}: {} vs {svd_top} ({} iterations)", pi.ratio, pi.iterations);
        }
    }
    println!("worst relative gap vs dense SVD = {worst:.3e}");
}

#[test]
fn square_kernel_n2_example() {
    let k = poly_kernel(&IntPolynomial::monomial(2).unwrap(), 2).unwrap();
    let window = (-64, 64);
    let svd_top = dense_matrix(&k, window).singular_values().max();
    let pi = power_iterate(&k, 2.0, window, 1e-15, 2_000_000).unwrap();
    assert!((pi.ratio - svd_top).abs() < 1e-8);

    let four = (0, 3);
    let bf = brute_force_norm(&k, 1.75, four, 4).unwrap();
    let pi = power_iterate(&k, 1.75, four, 1e-13, 20_000).unwrap();
    assert!((bf.lower - pi.ratio).abs() < 1e-3);
}
