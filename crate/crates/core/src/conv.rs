//! Discrete convolution of a dense signal with a sparse nonnegative kernel.
//!
//! Two evaluation paths produce the same result: a direct sparse
//! multiply-add over the kernel points, and a zero-padded real FFT.
//! [`convolution_lp_norm`] streams the output of the direct path in
//! disjoint runs, which lets norms be taken of outputs whose full window
//! would never fit in memory (high-degree kernels at large `N`).

use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::signal::{lp_norm_slice, Signal, MAX_WINDOW};

/// Multiply-add estimate above which `Auto` switches to the FFT path.
pub const AUTO_FFT_THRESHOLD: u64 = 1 << 20;

/// Largest padded FFT length attempted; bigger problems stay on the direct path.
pub const MAX_FFT_LEN: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConvPath {
    Direct,
    Fft,
    #[default]
    Auto,
}

impl std::str::FromStr for ConvPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(ConvPath::Direct),
            "fft" => Ok(ConvPath::Fft),
            "auto" => Ok(ConvPath::Auto),
            other => Err(Error::InvalidParameter(format!("unknown convolution path {other:?}"))),
        }
    }
}

fn fft_len(out_len: usize) -> usize {
    out_len.next_power_of_two()
}

/// Resolves `Auto` using `(|supp f| + |supp K|) * min(|supp f|, |supp K|)`.
pub fn resolve_path(path: ConvPath, signal_len: usize, kernel: &Kernel) -> ConvPath {
    match path {
        ConvPath::Auto => {
            let a = signal_len as u64;
            let b = kernel.nnz() as u64;
            let out_len = signal_len as u64 + kernel.span() - 1;
            if (a + b).saturating_mul(a.min(b)) > AUTO_FFT_THRESHOLD
                && out_len.next_power_of_two() <= MAX_FFT_LEN as u64
            {
                ConvPath::Fft
            } else {
                ConvPath::Direct
            }
        }
        p => p,
    }
}

/// `(f * K)(x) = Σ_y K(y) f(x - y)`.
///
/// The output window is the Minkowski sum of the two windows.
pub fn convolve(f: &Signal, kernel: &Kernel, path: ConvPath) -> Result<Signal> {
    if f.is_empty() || kernel.nnz() == 0 {
        return Ok(Signal::zero());
    }
    let out_len = f.len() as u64 + kernel.span() - 1;
    if out_len > MAX_WINDOW {
        return Err(Error::WindowTooLarge(out_len, MAX_WINDOW));
    }
    let offset = f.offset + kernel.min_pos();
    let values = match resolve_path(path, f.len(), kernel) {
        ConvPath::Fft => fft_convolve(&f.values, &kernel.dense_weights()?),
        _ => direct_convolve(&f.values, kernel, out_len as usize),
    };
    Ok(Signal::new(offset, values))
}

fn direct_convolve(f: &[f64], kernel: &Kernel, out_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_len];
    let base = kernel.min_pos();
    for &(pos, w) in kernel.points() {
        let t = (pos - base) as usize;
        axpy(&mut out[t..t + f.len()], w, f);
    }
    out
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Linear convolution of two dense real sequences via a power-of-two real FFT.
pub(crate) fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let n = fft_len(out_len);
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let sa = spectrum(&*fwd, a, n);
    let mut sb = spectrum(&*fwd, b, n);
    for (x, y) in sb.iter_mut().zip(&sa) {
        *x *= y;
    }
    let mut out = inverse(&*inv, sb, n);
    out.truncate(out_len);
    out
}

fn spectrum(fwd: &dyn RealToComplex<f64>, x: &[f64], n: usize) -> Vec<Complex<f64>> {
    let mut buf = vec![0.0; n];
    buf[..x.len()].copy_from_slice(x);
    let mut out = fwd.make_output_vec();
    fwd.process(&mut buf, &mut out).expect("fft buffer sizes are fixed by the plan");
    out
}

fn inverse(inv: &dyn ComplexToReal<f64>, mut spec: Vec<Complex<f64>>, n: usize) -> Vec<f64> {
    // the DC and Nyquist bins of a real signal are real
    spec[0].im = 0.0;
    let last = spec.len() - 1;
    spec[last].im = 0.0;
    let mut out = inv.make_output_vec();
    inv.process(&mut spec, &mut out).expect("fft buffer sizes are fixed by the plan");
    let scale = 1.0 / n as f64;
    for v in &mut out {
        *v *= scale;
    }
    out
}

/// `‖f * K‖_p` without materializing the whole output window.
///
/// Uses the FFT path when `Auto` would and the padded length fits; otherwise
/// the output is generated run by run, where a run is a maximal union of
/// overlapping translates `supp f + y` over kernel points `y`.
pub fn convolution_lp_norm(f: &Signal, kernel: &Kernel, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Exponent(p, "norm needs p >= 1"));
    }
    if f.is_empty() || kernel.nnz() == 0 {
        return Ok(0.0);
    }
    if resolve_path(ConvPath::Auto, f.len(), kernel) == ConvPath::Fft {
        let out = convolve(f, kernel, ConvPath::Fft)?;
        return lp_norm_slice(&out.values, p);
    }
    let len = f.len() as i64;
    let points = kernel.points();
    let mut acc = NormAccumulator::new(p);
    let mut buf = Vec::new();
    let mut i = 0;
    while i < points.len() {
        let start = points[i].0;
        let mut end = start + len;
        let mut j = i + 1;
        while j < points.len() && points[j].0 < end {
            end = points[j].0 + len;
            j += 1;
        }
        buf.clear();
        buf.resize((end - start) as usize, 0.0);
        for &(pos, w) in &points[i..j] {
            let t = (pos - start) as usize;
            axpy(&mut buf[t..t + f.len()], w, &f.values);
        }
        acc.extend(&buf);
        i = j;
    }
    Ok(acc.finish())
}

struct NormAccumulator {
    p: f64,
    sum: f64,
    max: f64,
}

impl NormAccumulator {
    fn new(p: f64) -> Self {
        NormAccumulator { p, sum: 0.0, max: 0.0 }
    }

    fn extend(&mut self, values: &[f64]) {
        if self.p == f64::INFINITY {
            self.max = values.iter().fold(self.max, |m, v| m.max(v.abs()));
        } else if self.p == 2.0 {
            self.sum += values.iter().map(|v| v * v).sum::<f64>();
        } else {
            let p = self.p;
            self.sum += values.iter().filter(|v| **v != 0.0).map(|v| v.abs().powf(p)).sum::<f64>();
        }
    }

    fn finish(self) -> f64 {
        if self.p == f64::INFINITY {
            self.max
        } else {
            self.sum.powf(1.0 / self.p)
        }
    }
}

/// Convolution by a fixed kernel acting on signals confined to a fixed window,
/// with its adjoint. The forward map sends `len` window samples to the
/// `len + span - 1` samples of the full output; the adjoint goes back.
pub struct WindowOperator {
    input_len: usize,
    output_len: usize,
    engine: Engine,
}

enum Engine {
    Direct {
        // (offset into the output, weight)
        taps: Vec<(usize, f64)>,
    },
    Fft {
        n: usize,
        fwd: Arc<dyn RealToComplex<f64>>,
        inv: Arc<dyn ComplexToReal<f64>>,
        kernel_spec: Vec<Complex<f64>>,
        reversed_spec: Vec<Complex<f64>>,
        span: usize,
    },
}

impl WindowOperator {
    pub fn new(kernel: &Kernel, input_len: usize, path: ConvPath) -> Result<Self> {
        if kernel.nnz() == 0 {
            return Err(Error::ZeroKernel);
        }
        if input_len == 0 {
            return Err(Error::InvalidParameter("empty window".into()));
        }
        let span = kernel.span();
        let output_len = input_len as u64 + span - 1;
        if output_len > MAX_WINDOW {
            return Err(Error::WindowTooLarge(output_len, MAX_WINDOW));
        }
        let output_len = output_len as usize;
        let engine = match resolve_path(path, input_len, kernel) {
            ConvPath::Fft => {
                let n = fft_len(output_len);
                let mut planner = RealFftPlanner::<f64>::new();
                let fwd = planner.plan_fft_forward(n);
                let inv = planner.plan_fft_inverse(n);
                let mut dense = kernel.dense_weights()?;
                let kernel_spec = spectrum(&*fwd, &dense, n);
                dense.reverse();
                let reversed_spec = spectrum(&*fwd, &dense, n);
                Engine::Fft {
                    n,
                    fwd,
                    inv,
                    kernel_spec,
                    reversed_spec,
                    span: span as usize,
                }
            }
            _ => {
                let base = kernel.min_pos();
                let taps = kernel
                    .points()
                    .iter()
                    .map(|&(pos, w)| ((pos - base) as usize, w))
                    .collect();
                Engine::Direct { taps }
            }
        };
        Ok(WindowOperator {
            input_len,
            output_len,
            engine,
        })
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn is_fft(&self) -> bool {
        matches!(self.engine, Engine::Fft { .. })
    }

    pub fn forward(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.input_len);
        match &self.engine {
            Engine::Direct { taps } => {
                let mut out = vec![0.0; self.output_len];
                for &(t, w) in taps {
                    axpy(&mut out[t..t + f.len()], w, f);
                }
                out
            }
            Engine::Fft {
                n,
                fwd,
                inv,
                kernel_spec,
                ..
            } => {
                let mut s = spectrum(&**fwd, f, *n);
                for (x, k) in s.iter_mut().zip(kernel_spec) {
                    *x *= k;
                }
                let mut out = inverse(&**inv, s, *n);
                out.truncate(self.output_len);
                out
            }
        }
    }

    /// `w[i] = Σ_t K[t] u[i + t]`, the transpose of [`forward`](Self::forward).
    pub fn adjoint(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.output_len);
        match &self.engine {
            Engine::Direct { taps } => {
                let mut out = vec![0.0; self.input_len];
                for &(t, w) in taps {
                    axpy(&mut out, w, &u[t..t + self.input_len]);
                }
                out
            }
            Engine::Fft {
                n,
                fwd,
                inv,
                reversed_spec,
                span,
                ..
            } => {
                let mut s = spectrum(&**fwd, u, *n);
                for (x, k) in s.iter_mut().zip(reversed_spec) {
                    *x *= k;
                }
                let full = inverse(&**inv, s, *n);
                full[span - 1..span - 1 + self.input_len].to_vec()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Kernel, KernelMeta};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn custom(points: Vec<(i64, f64)>) -> Kernel {
        Kernel::from_points(points, KernelMeta::custom()).unwrap()
    }

    /// Textbook double loop over both windows.
    fn oracle(f: &Signal, k: &Signal) -> Signal {
        let mut out = vec![0.0; f.len() + k.len() - 1];
        for (i, a) in f.values.iter().enumerate() {
            for (j, b) in k.values.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Signal::new(f.offset + k.offset, out)
    }

    #[test]
    fn shift_and_readout() {
        let d0 = Signal::delta(0);
        let shift = custom(vec![(-1, 1.0)]);
        for path in [ConvPath::Direct, ConvPath::Fft, ConvPath::Auto] {
            let out = convolve(&d0, &shift, path).unwrap().trimmed();
            assert_eq!(out.offset, -1);
            assert!((out.values[0] - 1.0).abs() < 1e-15);
            assert_eq!(out.len(), 1);
        }
        let sq = custom(vec![(-1, 0.5), (-4, 0.5)]);
        let out = convolve(&d0, &sq, ConvPath::Direct).unwrap();
        assert_eq!(out.get(-1), 0.5);
        assert_eq!(out.get(-4), 0.5);
        assert_eq!(out.get(-2), 0.0);
    }

    #[test]
    fn paths_match_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = Signal::new(rng.gen_range(-50..50), (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let pts: Vec<(i64, f64)> = (0..rng.gen_range(1..10))
                .map(|_| (rng.gen_range(-80..80), rng.gen_range(0.0..1.0)))
                .collect();
            let k = custom(pts);
            let want = oracle(&f, &k.to_signal().unwrap());
            for path in [ConvPath::Direct, ConvPath::Fft] {
                let got = convolve(&f, &k, path).unwrap();
                assert_eq!(got.offset, want.offset);
                assert_eq!(got.len(), want.len());
                for (a, b) in got.values.iter().zip(&want.values) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn auto_heuristic() {
        let small = custom(vec![(0, 1.0), (5, 1.0)]);
        assert_eq!(resolve_path(ConvPath::Auto, 100, &small), ConvPath::Direct);
        let many = custom((0..2000).map(|i| (i, 1.0)).collect());
        assert_eq!(resolve_path(ConvPath::Auto, 2000, &many), ConvPath::Fft);
        assert_eq!(resolve_path(ConvPath::Direct, 2000, &many), ConvPath::Direct);
    }

    #[test]
    fn oversized_window_rejected() {
        let k = custom(vec![(0, 1.0), (1 << 32, 1.0)]);
        assert!(matches!(
            convolve(&Signal::delta(0), &k, ConvPath::Direct),
            Err(Error::WindowTooLarge(..))
        ));
        // the streamed norm still works
        let n = convolution_lp_norm(&Signal::new(0, vec![3.0, 4.0]), &k, 2.0).unwrap();
        assert!((n - 50f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn streamed_norm_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let f = Signal::new(0, (0..rng.gen_range(1..40)).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let k = custom((0..rng.gen_range(1..12)).map(|_| (rng.gen_range(-200..200), rng.gen_range(0.0..1.0))).collect());
            let dense = convolve(&f, &k, ConvPath::Direct).unwrap();
            for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
                let a = lp_norm_slice(&dense.values, p).unwrap();
                let b = convolution_lp_norm(&f, &k, p).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.max(1.0), "p = {p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn window_operator_adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = custom((0..300).map(|i| (-(i * i) as i64, rng.gen_range(0.1..1.0))).collect());
        for path in [ConvPath::Direct, ConvPath::Fft] {
            let op = WindowOperator::new(&k, 700, path).unwrap();
            let f: Vec<f64> = (0..700).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..op.output_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let kf = op.forward(&f);
            let ktu = op.adjoint(&u);
            let lhs: f64 = kf.iter().zip(&u).map(|(a, b)| a * b).sum();
            let rhs: f64 = f.iter().zip(&ktu).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
            let direct = convolve(&Signal::new(0, f.clone()), &k, ConvPath::Direct).unwrap();
            for (a, b) in kf.iter().zip(&direct.values) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
