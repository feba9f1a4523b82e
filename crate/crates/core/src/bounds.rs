//! Normalized improving ratios and the pointwise and scalar checks behind
//! them.
//!
//! Every inequality here is either an exact pointwise fact that must hold
//! for every input (the two domination checks) or an asymptotic bound with
//! an unspecified constant, which is tested through the behavior of
//! normalized ratios across scales.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::conv::{convolution_lp_norm, convolve, ConvPath};
use crate::error::{Error, Result};
use crate::kernel::{
    fracint_kernel, fracint_truncation, poly_kernel, prime_fracint_kernel_with, prime_kernel_with,
    IntPolynomial, Kernel, PointwiseReport,
};
use crate::primes::{sieve, PrimeTable};
use crate::signal::{lp_norm, ExponentPair, Signal};
use crate::sweep::regress_exponent;

/// Which averaging operator a ratio refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OperatorSpec {
    /// `A^d_N`, the average along `x^d`.
    Poly { d: u32 },
    /// `A^P_N` with `P = a x^2 + b x + c`.
    Quadratic { a: i64, b: i64, c: i64 },
    /// `𝒜_N`, the log-weighted average along primes.
    Primes,
}

impl OperatorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OperatorSpec::Poly { d: 0 } => Err(Error::InvalidParameter("degree must be >= 1".into())),
            OperatorSpec::Quadratic { a, b, c } if a < 1 || b < 0 || c < 0 => Err(Error::InvalidParameter(
                format!("quadratic needs a >= 1 and b, c >= 0, got ({a}, {b}, {c})"),
            )),
            _ => Ok(()),
        }
    }

    pub fn polynomial(&self) -> Option<IntPolynomial> {
        match *self {
            OperatorSpec::Poly { d } => IntPolynomial::monomial(d).ok(),
            OperatorSpec::Quadratic { a, b, c } => IntPolynomial::quadratic(a, b, c).ok(),
            OperatorSpec::Primes => None,
        }
    }

    pub fn kernel(&self, n: u64) -> Result<Kernel> {
        match self.polynomial() {
            Some(poly) => poly_kernel(&poly, n),
            None => prime_kernel_with(&sieve(n.max(2))?, n),
        }
    }

    /// Kernel at scale `n`, reusing `table` for the prime average.
    pub fn kernel_with(&self, n: u64, table: &PrimeTable) -> Result<Kernel> {
        match self.polynomial() {
            Some(poly) => poly_kernel(&poly, n),
            None => prime_kernel_with(table, n),
        }
    }

    /// The scale factor the improving bound predicts for `‖T f‖_{p'} / ‖f‖_p`.
    pub fn normalizer(&self, pair: &ExponentPair, n: u64) -> f64 {
        let nf = n as f64;
        match *self {
            OperatorSpec::Poly { d } => nf.powf(-pair.gap(d as f64)),
            OperatorSpec::Quadratic { a, b, .. } => {
                let (a, b) = (a as f64, b as f64);
                (2.0 * a + b / nf) * (2.0 * a * nf + b).powf(-pair.gap(2.0))
            }
            OperatorSpec::Primes => nf.powf(-pair.gap(1.0)),
        }
    }

    /// Radius `R` of the natural input scale: `N^d`, `P(N)` or `N`.
    pub fn radius(&self, n: u64) -> Result<i64> {
        let ni = i64::try_from(n).map_err(|_| Error::Overflow(format!("N = {n}")))?;
        match self {
            OperatorSpec::Primes => Ok(ni),
            _ => self.polynomial().unwrap().eval(ni),
        }
    }

    pub fn kind_tag(&self) -> &'static str {
        match self {
            OperatorSpec::Poly { .. } => "poly",
            OperatorSpec::Quadratic { .. } => "quadratic",
            OperatorSpec::Primes => "primes",
        }
    }

    /// `d` for monomials, `a;b;c` for quadratics, empty for primes.
    pub fn params_tag(&self) -> String {
        match *self {
            OperatorSpec::Poly { d } => d.to_string(),
            OperatorSpec::Quadratic { a, b, c } => format!("{a};{b};{c}"),
            OperatorSpec::Primes => String::new(),
        }
    }
}

/// One cell of a ratio sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RatioRecord {
    pub op: OperatorSpec,
    pub p: f64,
    pub p_prime: f64,
    pub n: u64,
    /// `‖T f‖_{p'}`
    pub raw_norm: f64,
    pub normalizer: f64,
    pub input_norm: f64,
    /// `raw_norm / (normalizer · ‖f‖_p)`
    pub ratio: f64,
}

/// `‖T f‖_{p'} / (normalizer · ‖f‖_p)` for the operator `op` at scale `n`.
pub fn improving_ratio(f: &Signal, op: &OperatorSpec, n: u64, p: f64) -> Result<RatioRecord> {
    op.validate()?;
    improving_ratio_with(f, op, &op.kernel(n)?, n, p)
}

/// As [`improving_ratio`] with a prebuilt kernel for `op` at scale `n`.
pub fn improving_ratio_with(f: &Signal, op: &OperatorSpec, kernel: &Kernel, n: u64, p: f64) -> Result<RatioRecord> {
    let pair = ExponentPair::new(p)?;
    let input_norm = lp_norm(f, pair.p)?;
    if input_norm == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let raw_norm = convolution_lp_norm(f, kernel, pair.p_prime)?;
    let normalizer = op.normalizer(&pair, n);
    Ok(RatioRecord {
        op: *op,
        p: pair.p,
        p_prime: pair.p_prime,
        n,
        raw_norm,
        normalizer,
        input_norm,
        ratio: raw_norm / (normalizer * input_norm),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NecessityProbe {
    pub d: u32,
    pub p: f64,
    pub records: Vec<RatioRecord>,
    pub slope: f64,
    pub stderr: f64,
    /// `1/p - d/p'`: growth exponent of the delta ratio.
    pub expected_slope: f64,
}

/// Fits the growth exponent of the normalized ratio of `δ_0` across a
/// geometric grid of scales. Positive slope means the bound fails for this `p`.
pub fn delta_necessity_probe(d: u32, p: f64, n_grid: &[u64]) -> Result<NecessityProbe> {
    if n_grid.len() < 5 {
        return Err(Error::TooFewPoints { needed: 5, got: n_grid.len() });
    }
    let pair = ExponentPair::new(p)?;
    let op = OperatorSpec::Poly { d };
    let f = Signal::delta(0);
    let records = n_grid
        .iter()
        .map(|&n| improving_ratio(&f, &op, n, p))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(f64, f64)> = records.iter().map(|r| (r.n as f64, r.ratio)).collect();
    let (slope, stderr) = regress_exponent(&pairs)?;
    Ok(NecessityProbe {
        d,
        p,
        records,
        slope,
        stderr,
        expected_slope: 1.0 / pair.p - d as f64 / pair.p_prime,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IndicatorProbe {
    pub d: u32,
    pub n: u64,
    pub p: f64,
    /// Points of `[-N^d, 0]` where `A^d_N χ = 1` exactly.
    pub plateau_hits: u64,
    pub plateau_len: u64,
    pub input_norm: f64,
    pub output_norm: f64,
    /// `(N^d + 1)^{1/p'}`
    pub plateau_lower_bound: f64,
    pub ratio: f64,
    /// `3^{-1/p}`
    pub c_lower: f64,
    /// `4^{1/p'} 2^{-1/p}`
    pub c_upper: f64,
    pub passed: bool,
}

/// Rounding allowed when testing `A^d_N χ = 1`: the value is a sum of `N`
/// copies of `1/N`.
pub const PLATEAU_TOL: f64 = 1e-12;

/// `f = χ_{[-N^d, N^d]}`: checks `A^d_N f = 1` on `[-N^d, 0]`, so
/// `‖A^d_N f‖_{p'} >= (N^d + 1)^{1/p'}`, and that the normalized ratio lies
/// in `[3^{-1/p}, 4^{1/p'} 2^{-1/p}]` for every `N`.
///
/// The upper constant follows from `A^d_N f <= 1` on an output window of
/// `3N^d + 1` points.
pub fn indicator_magnitude_probe(d: u32, p: f64, n: u64) -> Result<IndicatorProbe> {
    let pair = ExponentPair::new(p)?;
    let op = OperatorSpec::Poly { d };
    let r = op.radius(n)?;
    let chi = Signal::indicator(-r, r)?;
    let out = convolve(&chi, &op.kernel(n)?, ConvPath::Auto)?;
    let plateau_hits = (-r..=0).filter(|&x| (out.get(x) - 1.0).abs() <= PLATEAU_TOL).count() as u64;
    let rec = improving_ratio(&chi, &op, n, p)?;
    let plateau_lower_bound = ((r + 1) as f64).powf(1.0 / pair.p_prime);
    let c_lower = 3f64.powf(-1.0 / pair.p);
    let c_upper = 4f64.powf(1.0 / pair.p_prime) * 2f64.powf(-1.0 / pair.p);
    let plateau_len = r as u64 + 1;
    Ok(IndicatorProbe {
        d,
        n,
        p,
        plateau_hits,
        plateau_len,
        input_norm: rec.input_norm,
        output_norm: rec.raw_norm,
        plateau_lower_bound,
        ratio: rec.ratio,
        c_lower,
        c_upper,
        passed: plateau_hits == plateau_len
            && rec.raw_norm >= plateau_lower_bound * (1.0 - 1e-12)
            && rec.ratio >= c_lower
            && rec.ratio <= c_upper,
    })
}

/// Checks `A^d_N f(x) <= N^{λ-1} I_{d,λ} g(-x)` with `g(y) = f(-y)` and
/// `λ = 1 - (d/p - d/p')` over the whole output window of `A^d_N f`.
///
/// The right side is computed by convolving `g` with a fractional-integral
/// kernel truncated where further terms only read zeros of `g`.
pub fn domination_check(f: &Signal, d: u32, n: u64, p: f64) -> Result<PointwiseReport> {
    let pair = ExponentPair::new(p)?;
    let lambda = pair.lambda(d as f64);
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda = {lambda} for d = {d}, p = {p} is not in (0, 1)"
        )));
    }
    if !f.is_nonnegative() {
        return Err(Error::InvalidParameter("f must be nonnegative".into()));
    }
    let f = f.clone().trimmed();
    if f.is_empty() {
        return Ok(PointwiseReport::from_pairs((0, -1), std::iter::empty()));
    }
    let lhs = convolve(&f, &poly_kernel(&IntPolynomial::monomial(d)?, n)?, ConvPath::Auto)?;
    let window = (lhs.offset, lhs.end() - 1);
    let g = f.reflect();
    let m = fracint_truncation(d, (-window.1, -window.0), (g.offset, g.end() - 1));
    let ig = convolve(&g, &fracint_kernel(d, lambda, m)?, ConvPath::Auto)?;
    let scale = (n as f64).powf(lambda - 1.0);
    let pairs = lhs.values.iter().enumerate().map(|(i, &l)| {
        let x = lhs.offset + i as i64;
        (x, l, scale * ig.get(-x))
    });
    Ok(PointwiseReport::from_pairs(window, pairs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Thresholds {
    pub d: u32,
    /// `2 - 1/d`, below which the improving bound fails for `δ_0`.
    pub p_d: f64,
    /// `2 - 4 / (2 + d(2^d + 2))`
    pub tilde_p_d: f64,
    /// `1 - 1/(2^{d-1} + 1)`
    pub lambda_d: f64,
    /// `1 - (d/p - d/p')` evaluated at `p = tilde_p_d`; equals `lambda_d`.
    pub lambda_at_tilde: f64,
}

pub fn threshold_exponents(d: u32) -> Result<Thresholds> {
    if !(2..=60).contains(&d) {
        return Err(Error::InvalidParameter(format!("d = {d} outside [2, 60]")));
    }
    let df = d as f64;
    let two_d = 2f64.powi(d as i32);
    let tilde_p_d = 2.0 - 4.0 / (2.0 + df * (two_d + 2.0));
    Ok(Thresholds {
        d,
        p_d: 2.0 - 1.0 / df,
        tilde_p_d,
        lambda_d: 1.0 - 1.0 / (two_d / 2.0 + 1.0),
        lambda_at_tilde: ExponentPair::new(tilde_p_d)?.lambda(df),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WeakTypeValue {
    pub lambda: f64,
    pub n: u64,
    pub p: f64,
    pub q: f64,
    /// `C N^{-1/q} ‖f‖_p`
    pub cap: f64,
    /// `sup_{α <= cap} α^q |{J f > α}|`
    pub value: f64,
    /// `value / ‖f‖_p^q`
    pub normalized: f64,
    pub argmax_alpha: f64,
    pub count_at_argmax: u64,
    pub alphas_evaluated: u64,
}

/// Ratio of successive levels on the geometric part of the `α` grid.
pub const ALPHA_GRID_RATIO: f64 = 1.05;

/// Restricted weak-type functional of `J_{λ,N}`:
/// `sup_{α <= C N^{-1/q} ‖f‖_p} α^q |{x : J_{λ,N} f(x) > α}|` with
/// `1/q = 1/p - (1 - λ)`.
///
/// The level function is a step function, so besides the geometric grid the
/// supremum is evaluated just below every jump (each distinct value of
/// `J f` under the cap) and at the cap itself, which makes it exact.
pub fn weak_type_functional(
    f: &Signal,
    lambda: f64,
    n: u64,
    p: f64,
    c: f64,
    table: &PrimeTable,
) -> Result<WeakTypeValue> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} not in (0, 1)")));
    }
    if !(p > 1.0 && p < 1.0 / (1.0 - lambda)) {
        return Err(Error::Exponent(p, "weak type needs 1 < p < 1/(1 - lambda)"));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("C = {c} must be positive")));
    }
    let q = 1.0 / (1.0 / p - (1.0 - lambda));
    let fnorm = lp_norm(f, p)?;
    let cap = c * (n as f64).powf(-1.0 / q) * fnorm;
    let mut out = WeakTypeValue {
        lambda,
        n,
        p,
        q,
        cap,
        value: 0.0,
        normalized: 0.0,
        argmax_alpha: 0.0,
        count_at_argmax: 0,
        alphas_evaluated: 0,
    };
    if fnorm == 0.0 {
        return Ok(out);
    }
    let jf = convolve(f, &prime_fracint_kernel_with(table, lambda, n)?, ConvPath::Auto)?;
    let mut values: Vec<f64> = jf.values.into_iter().filter(|&v| v > 0.0).collect();
    if values.is_empty() {
        return Ok(out);
    }
    values.sort_by(f64::total_cmp);
    let level = |alpha: f64| -> u64 { (values.len() - values.partition_point(|&v| v <= alpha)) as u64 };
    let mut consider = |alpha: f64| {
        if alpha <= 0.0 || alpha > cap {
            return;
        }
        out.alphas_evaluated += 1;
        let count = level(alpha);
        let v = alpha.powf(q) * count as f64;
        if v > out.value {
            out.value = v;
            out.argmax_alpha = alpha;
            out.count_at_argmax = count;
        }
    };
    let mut alpha = values[0] / 2.0;
    while alpha <= cap {
        consider(alpha);
        alpha *= ALPHA_GRID_RATIO;
    }
    consider(cap);
    let mut prev = f64::NAN;
    for &v in &values {
        if v != prev {
            consider(v.next_down());
            prev = v;
        }
    }
    out.normalized = out.value / fnorm.powf(q);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HolderReport {
    pub n: u64,
    pub p: f64,
    /// `max_x |𝒜_N f(x)|`
    pub max_abs: f64,
    /// `(log N / N)^{1/p} ‖f‖_p`
    pub scale: f64,
    /// `max_abs / scale`
    pub empirical_c: f64,
}

/// Empirical constant in `max_x |𝒜_N f(x)| <= C (log N / N)^{1/p} ‖f‖_p`.
pub fn prime_holder_bound_check(f: &Signal, n: u64, p: f64, table: &PrimeTable) -> Result<HolderReport> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::Exponent(p, "expected 1 < p <= 2"));
    }
    if n < 3 {
        return Err(Error::InvalidParameter(format!("N = {n}: need N >= 3 so that log N / N > 0 is meaningful")));
    }
    let nf = n as f64;
    let scale = (nf.ln() / nf).powf(1.0 / p) * lp_norm(f, p)?;
    let out = convolve(f, &prime_kernel_with(table, n)?, ConvPath::Auto)?;
    let max_abs = lp_norm(&out, f64::INFINITY)?;
    Ok(HolderReport {
        n,
        p,
        max_abs,
        scale,
        empirical_c: if scale > 0.0 { max_abs / scale } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl From<bool> for Verdict {
    fn from(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Common JSON shape for every check: `{check, params, values, verdict, worstCase}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckReport {
    pub check: String,
    pub params: serde_json::Value,
    pub values: Vec<f64>,
    pub verdict: Verdict,
    pub worst_case: serde_json::Value,
}

impl CheckReport {
    pub fn pointwise(check: &str, params: serde_json::Value, r: &PointwiseReport) -> Self {
        CheckReport {
            check: check.into(),
            params,
            values: vec![r.min_slack, r.max_slack, r.points_checked as f64],
            verdict: r.passed().into(),
            worst_case: json!({
                "x": r.worst_x,
                "slack": r.min_slack,
                "window": [r.window.0, r.window.1],
                "violations": r.violations,
            }),
        }
    }

    pub fn ratios(check: &str, params: serde_json::Value, records: &[RatioRecord], passed: bool) -> Self {
        let worst = records.iter().max_by(|a, b| a.ratio.total_cmp(&b.ratio));
        CheckReport {
            check: check.into(),
            params,
            values: records.iter().map(|r| r.ratio).collect(),
            verdict: passed.into(),
            worst_case: worst.map_or(serde_json::Value::Null, |r| json!({ "n": r.n, "ratio": r.ratio })),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
