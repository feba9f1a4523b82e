//! Near-extremal inputs for `‖K * f‖_{p'} / ‖f‖_p` over nonnegative `f`
//! supported in a window.
//!
//! [`power_iterate`] alternates between the output space and the input space
//! through the duality maps of `ℓ^{p'}` and `ℓ^p`. For a nonnegative kernel
//! each sweep cannot decrease the ratio (two applications of Hölder).
//! [`brute_force_norm`] is an independent grid search with local polish for
//! windows of a dozen points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv::{ConvPath, WindowOperator};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::signal::{lp_norm_slice, ExponentPair, Signal, MAX_WINDOW};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;

/// Relative decrease of the ratio tolerated as rounding before a step
/// counts as non-monotone.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Largest window [`brute_force_norm`] accepts.
pub const BRUTE_FORCE_MAX_POINTS: usize = 12;

const PAR_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremizerResult {
    /// Best input found, nonnegative with `‖f‖_p = 1`.
    pub f: Signal,
    pub ratio: f64,
    pub iterations: usize,
    pub converged: bool,
    pub window: (i64, i64),
    /// Ratio after the initial profile and after every sweep.
    pub trace: Vec<f64>,
    /// Sweeps whose ratio fell by more than [`MONOTONE_SLACK`].
    pub monotone_violations: usize,
}

/// Window `[-2N^d, 2N^d]` used for degree-`d` averages at scale `N`.
pub fn default_window(d: u32, n: u64) -> Result<(i64, i64)> {
    let r = (n as i64)
        .checked_pow(d)
        .and_then(|v| v.checked_mul(2))
        .ok_or_else(|| Error::Overflow(format!("2 * {n}^{d}")))?;
    Ok((-r, r))
}

/// Windows up to this length get a single-point start at every point.
pub const ALL_POINT_STARTS_MAX: usize = 64;

/// Power iteration on `window` from the constant profile and, for `p < 2`,
/// from unit masses; the best run is returned.
///
/// For `p < 2` the iteration can stall at non-maximal fixed points: the
/// constant profile is one for a pure shift, and near the window edges a
/// unit mass cannot spread to the partner points of a better sparse input.
/// Small windows therefore start from a unit mass at every point, larger
/// ones from a unit mass at the center.
pub fn power_iterate(
    kernel: &Kernel,
    p: f64,
    window: (i64, i64),
    tol: f64,
    max_iter: usize,
) -> Result<ExtremizerResult> {
    let mut best = power_iterate_from(kernel, p, window, tol, max_iter, None)?;
    if p >= 2.0 {
        return Ok(best);
    }
    let len = window_len(window)?;
    let starts: Vec<usize> = if len <= ALL_POINT_STARTS_MAX {
        (0..len).collect()
    } else {
        vec![len / 2]
    };
    let mut spike = vec![0.0; len];
    for i in starts {
        spike[i] = 1.0;
        let run = power_iterate_from(kernel, p, window, tol, max_iter, Some(&spike))?;
        spike[i] = 0.0;
        if run.ratio > best.ratio {
            best = run;
        }
    }
    Ok(best)
}

/// As [`power_iterate`], optionally from a given nonnegative start.
pub fn power_iterate_from(
    kernel: &Kernel,
    p: f64,
    window: (i64, i64),
    tol: f64,
    max_iter: usize,
    init: Option<&[f64]>,
) -> Result<ExtremizerResult> {
    let pair = ExponentPair::new(p)?;
    if kernel.nnz() == 0 {
        return Err(Error::ZeroKernel);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol = {tol}")));
    }
    let len = window_len(window)?;
    let op = WindowOperator::new(kernel, len, ConvPath::Auto)?;
    // both duality maps raise to the power p' - 1 = 1 / (p - 1)
    let power = pair.p_prime - 1.0;

    let mut f = match init {
        Some(v) => {
            if v.len() != len || v.iter().any(|x| !(*x >= 0.0)) || v.iter().all(|x| *x == 0.0) {
                return Err(Error::InvalidParameter(
                    "initial profile must be nonnegative, nonzero and match the window".into(),
                ));
            }
            v.to_vec()
        }
        None => vec![1.0; len],
    };
    normalize(&mut f, pair.p);
    let mut u = op.forward(&f);
    // ‖f‖_p = 1, so the ratio is ‖u‖_{p'}; it falls out of the dual map
    let (max, sum) = dual_map(&mut u, power);
    let mut ratio = max * sum.powf(1.0 / pair.p_prime);
    if ratio == 0.0 {
        return Err(Error::ZeroKernel);
    }
    let mut best = (f.clone(), ratio);
    let mut trace = vec![ratio];
    let mut violations = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let mut w = op.adjoint(&u);
        // for s = (w / max)^{p'-1}, s^p = (w / max)^{p'}, which is the returned sum
        let (max, sum) = dual_map(&mut w, power);
        if max == 0.0 {
            break;
        }
        let inv = sum.powf(-1.0 / pair.p);
        w.iter_mut().for_each(|x| *x *= inv);
        f = w;
        u = op.forward(&f);
        let (max, sum) = dual_map(&mut u, power);
        let next = max * sum.powf(1.0 / pair.p_prime);
        if next < ratio * (1.0 - MONOTONE_SLACK) {
            violations += 1;
        }
        trace.push(next);
        let change = (next - ratio).abs() / next;
        if next > best.1 {
            best = (f.clone(), next);
        }
        ratio = next;
        if change < tol {
            converged = true;
            break;
        }
    }

    Ok(ExtremizerResult {
        f: Signal::new(window.0, best.0),
        ratio: best.1,
        iterations,
        converged,
        window,
        trace,
        monotone_violations: violations,
    })
}

fn window_len(window: (i64, i64)) -> Result<usize> {
    if window.1 < window.0 {
        return Err(Error::InvalidParameter(format!("empty window {window:?}")));
    }
    let len = (window.1 - window.0) as u64 + 1;
    if len > MAX_WINDOW {
        return Err(Error::WindowTooLarge(len, MAX_WINDOW));
    }
    Ok(len as usize)
}

/// Replaces `v` by `(v⁺ / max)^power` and returns `max` together with
/// `Σ (v⁺ / max)^{power + 1}`; negative entries (rounding) become zero.
fn dual_map(v: &mut [f64], power: f64) -> (f64, f64) {
    let max = v.iter().fold(0.0f64, |m, &x| m.max(x));
    if max == 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return (0.0, 0.0);
    }
    let inv = 1.0 / max;
    let map = |c: &mut [f64]| -> f64 {
        let mut sum = 0.0;
        for x in c.iter_mut() {
            if *x > 0.0 {
                let y = *x * inv;
                let t = if power == 1.0 { y } else { y.powf(power) };
                sum += t * y;
                *x = t;
            } else {
                *x = 0.0;
            }
        }
        sum
    };
    let sum = if v.len() > PAR_CHUNK {
        let parts: Vec<f64> = v.par_chunks_mut(PAR_CHUNK).map(map).collect();
        parts.iter().sum()
    } else {
        map(v)
    };
    (max, sum)
}

fn normalize(v: &mut [f64], p: f64) {
    let n = lp_norm_slice(v, p).expect("p > 1");
    if n > 0.0 {
        let inv = 1.0 / n;
        v.iter_mut().for_each(|x| *x *= inv);
    }
}

/// Ratios reached from random positive starts, for judging whether the
/// iteration lands on the same fixed point. Informational only: for
/// `p != 2` distinct fixed points are possible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartReport {
    pub reference: f64,
    pub ratios: Vec<f64>,
    /// `max |ratio - reference| / reference`
    pub max_relative_spread: f64,
}

pub fn restart_report(
    kernel: &Kernel,
    p: f64,
    window: (i64, i64),
    tol: f64,
    max_iter: usize,
    starts: usize,
    seed: u64,
) -> Result<RestartReport> {
    let reference = power_iterate(kernel, p, window, tol, max_iter)?.ratio;
    let len = window_len(window)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ratios = (0..starts)
        .map(|_| {
            let init: Vec<f64> = (0..len).map(|_| rng.gen_range(0.01..1.0)).collect();
            power_iterate_from(kernel, p, window, tol, max_iter, Some(&init)).map(|r| r.ratio)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_relative_spread = ratios.iter().fold(0.0f64, |m, r| m.max((r - reference).abs() / reference));
    Ok(RestartReport { reference, ratios, max_relative_spread })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    /// Best ratio attained by an explicit input (after polish).
    pub lower: f64,
    /// Certified upper bound from the grid spacing.
    pub upper: f64,
    pub argmax: Signal,
    pub grid_points: u64,
}

/// Exhaustive search over nonnegative inputs on a window of at most
/// [`BRUTE_FORCE_MAX_POINTS`] points.
///
/// Inputs are normalized to sup norm one and discretized to `grid` levels
/// per coordinate; the best grid points are then polished by a compass
/// search. The upper bound covers every input within half a grid step of
/// some grid point, using `‖K‖_{p→p'} <= ‖K‖_1`.
pub fn brute_force_norm(kernel: &Kernel, p: f64, window: (i64, i64), grid: u32) -> Result<BruteForceResult> {
    let pair = ExponentPair::new(p)?;
    let len = window_len(window)?;
    if len > BRUTE_FORCE_MAX_POINTS {
        return Err(Error::WindowTooLarge(len as u64, BRUTE_FORCE_MAX_POINTS as u64));
    }
    if grid == 0 {
        return Err(Error::InvalidParameter("grid must be >= 1".into()));
    }
    if kernel.nnz() == 0 {
        return Err(Error::ZeroKernel);
    }
    let op = WindowOperator::new(kernel, len, ConvPath::Direct)?;
    let eval = |f: &[f64]| -> f64 {
        let fnorm = lp_norm_slice(f, pair.p).unwrap();
        if fnorm == 0.0 {
            return 0.0;
        }
        lp_norm_slice(&op.forward(f), pair.p_prime).unwrap() / fnorm
    };

    let levels = grid as u64 + 1;
    let total = levels.pow(len as u32);
    let g = grid as f64;
    let delta = (len as f64).powf(1.0 / pair.p) / (2.0 * g);
    let lipschitz = kernel.mass();
    const KEEP: usize = 8;
    let mut top: Vec<(f64, Vec<f64>)> = Vec::with_capacity(KEEP + 1);
    let mut upper = 0.0f64;
    let mut grid_points = 0;
    let mut f = vec![0.0; len];
    for code in 1..total {
        let mut c = code;
        let mut has_max = false;
        for x in f.iter_mut() {
            let level = c % levels;
            c /= levels;
            has_max |= level == grid as u64;
            *x = level as f64 / g;
        }
        if !has_max {
            continue;
        }
        grid_points += 1;
        let fnorm = lp_norm_slice(&f, pair.p).unwrap();
        let out = lp_norm_slice(&op.forward(&f), pair.p_prime).unwrap();
        let r = out / fnorm;
        upper = upper.max((out + lipschitz * delta) / (fnorm - delta).max(1.0));
        if top.len() < KEEP || r > top[top.len() - 1].0 {
            top.push((r, f.clone()));
            top.sort_by(|a, b| b.0.total_cmp(&a.0));
            top.truncate(KEEP);
        }
    }

    let mut best = (0.0, Vec::new());
    for (_, start) in top {
        let (r, f) = compass_search(&eval, start, 0.5 / g);
        if r > best.0 {
            best = (r, f);
        }
    }
    let n = lp_norm_slice(&best.1, pair.p).unwrap();
    let argmax = Signal::new(window.0, best.1.iter().map(|x| x / n).collect());
    Ok(BruteForceResult {
        lower: best.0,
        upper: upper.max(best.0),
        argmax,
        grid_points,
    })
}

/// Coordinate-wise pattern search on the nonnegative orthant.
fn compass_search(eval: &dyn Fn(&[f64]) -> f64, mut f: Vec<f64>, mut step: f64) -> (f64, Vec<f64>) {
    let mut best = eval(&f);
    while step > 1e-12 {
        let mut improved = false;
        for i in 0..f.len() {
            for dir in [1.0, -1.0] {
                let old = f[i];
                f[i] = (old + dir * step).max(0.0);
                let r = eval(&f);
                if r > best {
                    best = r;
                    improved = true;
                } else {
                    f[i] = old;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{poly_kernel, IntPolynomial, KernelMeta};

    fn custom(points: Vec<(i64, f64)>) -> Kernel {
        Kernel::from_points(points, KernelMeta::custom()).unwrap()
    }

    fn square(n: u64) -> Kernel {
        poly_kernel(&IntPolynomial::monomial(2).unwrap(), n).unwrap()
    }

    #[test]
    fn shift_has_ratio_one() {
        let k = custom(vec![(-1, 1.0)]);
        for p in [1.3, 1.6, 2.0] {
            let r = power_iterate(&k, p, (-5, 5), 1e-12, 2000).unwrap();
            assert!(r.ratio <= 1.0 + 1e-12);
            assert!((r.ratio - 1.0).abs() < 1e-6, "p = {p}: {}", r.ratio);
            assert!(r.f.is_nonnegative());
            assert_eq!(r.monotone_violations, 0);
            let b = brute_force_norm(&k, p, (0, 3), 3).unwrap();
            assert!((b.lower - 1.0).abs() < 1e-12);
        }
        let one = square(1);
        let r = power_iterate(&one, 1.75, (-3, 3), 1e-12, 2000).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-6);
    }

    #[test]
    fn trace_is_monotone() {
        let k = square(6);
        for p in [1.4, 1.6, 1.75, 1.9, 2.0] {
            let r = power_iterate(&k, p, (-72, 72), 1e-10, 300).unwrap();
            assert_eq!(r.monotone_violations, 0);
            for w in r.trace.windows(2) {
                assert!(w[1] >= w[0] * (1.0 - MONOTONE_SLACK));
            }
            assert!((crate::lp_norm(&r.f, p).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_point_window() {
        let k = custom(vec![(0, 0.3), (2, 0.4), (7, 0.5)]);
        for p in [1.5, 2.0] {
            let pp = p / (p - 1.0);
            let col = (0.3f64.powf(pp) + 0.4f64.powf(pp) + 0.5f64.powf(pp)).powf(1.0 / pp);
            let b = brute_force_norm(&k, p, (4, 4), 5).unwrap();
            assert!((b.lower - col).abs() < 1e-12);
            let r = power_iterate(&k, p, (4, 4), 1e-12, 10).unwrap();
            assert!((r.ratio - col).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_on_two_points() {
        let k = custom(vec![(0, 1.0)]);
        let b = brute_force_norm(&k, 1.5, (0, 1), 6).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-12);
        assert!(b.upper >= b.lower);
    }

    #[test]
    fn rejects_bad_input() {
        let k = square(2);
        assert!(power_iterate(&k, 2.5, (0, 4), 1e-8, 10).is_err());
        assert!(power_iterate(&k, 1.0, (0, 4), 1e-8, 10).is_err());
        assert!(power_iterate(&k, 1.5, (4, 0), 1e-8, 10).is_err());
        let empty = custom(vec![]);
        assert!(matches!(power_iterate(&empty, 1.5, (0, 4), 1e-8, 10), Err(Error::ZeroKernel)));
        assert!(brute_force_norm(&k, 1.5, (0, 12), 2).is_err());
    }
}
