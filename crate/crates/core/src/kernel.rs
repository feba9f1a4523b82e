//! Convolution kernels for the polynomial averages, the prime averages and
//! the discrete fractional integrals, plus the lattice spreading that
//! reduces a general quadratic average to the average along squares.
//!
//! Kernels are stored sparsely as sorted `(position, weight)` pairs: a
//! degree-`d` average at scale `N` has `N` points spread over a window of
//! length about `N^d`.

use serde::{Deserialize, Serialize};

use crate::conv::{convolve, ConvPath};
use crate::error::{Error, Result};
use crate::primes::{sieve, PrimeTable};
use crate::signal::{Signal, MAX_WINDOW};

/// Integer polynomial, constant term first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct IntPolynomial {
    coefficients: Vec<i64>,
}

impl IntPolynomial {
    pub fn new(coefficients: Vec<i64>) -> Result<Self> {
        match coefficients.last() {
            Some(&c) if c != 0 && coefficients.len() >= 2 => Ok(IntPolynomial { coefficients }),
            _ => Err(Error::InvalidParameter(format!(
                "polynomial {coefficients:?} must have degree >= 1 and a nonzero leading coefficient"
            ))),
        }
    }

    /// `x^d`
    pub fn monomial(d: u32) -> Result<Self> {
        let mut c = vec![0; d as usize + 1];
        c[d as usize] = 1;
        Self::new(c)
    }

    /// `a x^2 + b x + c`
    pub fn quadratic(a: i64, b: i64, c: i64) -> Result<Self> {
        Self::new(vec![c, b, a])
    }

    pub fn coefficients(&self) -> &[i64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, x: i64) -> Result<i64> {
        let overflow = || Error::Overflow(format!("{self} at x = {x}"));
        self.coefficients.iter().rev().try_fold(0i64, |acc, &c| {
            acc.checked_mul(x).and_then(|v| v.checked_add(c)).ok_or_else(overflow)
        })
    }

    pub fn has_nonnegative_coefficients(&self) -> bool {
        self.coefficients.iter().all(|&c| c >= 0)
    }

    /// `(a, b, c)` when this is a quadratic with `a >= 1`, `b, c >= 0`.
    pub fn nonnegative_quadratic(&self) -> Option<(i64, i64, i64)> {
        match self.coefficients[..] {
            [c, b, a] if a >= 1 && b >= 0 && c >= 0 => Some((a, b, c)),
            _ => None,
        }
    }
}

impl TryFrom<Vec<i64>> for IntPolynomial {
    type Error = Error;

    fn try_from(v: Vec<i64>) -> Result<Self> {
        IntPolynomial::new(v)
    }
}

impl From<IntPolynomial> for Vec<i64> {
    fn from(p: IntPolynomial) -> Self {
        p.coefficients
    }
}

impl std::fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for (k, &c) in self.coefficients.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0 { '-' } else { '+' })?;
            } else if c < 0 {
                write!(f, "-")?;
            }
            let m = c.unsigned_abs();
            match (k, m) {
                (0, _) => write!(f, "{m}")?,
                (1, 1) => write!(f, "x")?,
                (1, _) => write!(f, "{m}x")?,
                (_, 1) => write!(f, "x^{k}")?,
                _ => write!(f, "{m}x^{k}")?,
            }
            first = false;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `A^P_N`
    Poly,
    /// `𝒜_N`
    Prime,
    /// `I_{d,λ}` truncated at `m <= M`
    Fracint,
    /// `J_{λ,N}`
    PrimeFracint,
    /// Anything built from explicit points.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub kind: KernelKind,
    /// Scale `N`, or the truncation index `M` for `Fracint`.
    pub n: u64,
    pub lambda: Option<f64>,
    pub poly: Option<IntPolynomial>,
    /// Monomial degree of a `Fracint` kernel.
    pub degree: Option<u32>,
    /// False for polynomial averages outside the nonnegative-coefficient class.
    pub in_theorem_scope: bool,
}

impl KernelMeta {
    pub fn custom() -> Self {
        KernelMeta {
            kind: KernelKind::Custom,
            n: 0,
            lambda: None,
            poly: None,
            degree: None,
            in_theorem_scope: false,
        }
    }
}

/// Nonnegative finitely supported weight function on the integers.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    points: Vec<(i64, f64)>,
    meta: KernelMeta,
}

impl Kernel {
    /// Sorts the points and merges repeated positions. Zero weights are dropped.
    pub fn from_points(mut points: Vec<(i64, f64)>, meta: KernelMeta) -> Result<Self> {
        if let Some(&(x, w)) = points.iter().find(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(format!("kernel weight {w} at {x}")));
        }
        points.sort_by_key(|&(x, _)| x);
        let mut merged: Vec<(i64, f64)> = Vec::with_capacity(points.len());
        for (x, w) in points {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        merged.retain(|&(_, w)| w > 0.0);
        if let (Some(a), Some(b)) = (merged.first(), merged.last()) {
            if b.0.checked_sub(a.0).is_none() {
                return Err(Error::Overflow("kernel span".into()));
            }
        }
        Ok(Kernel { points: merged, meta })
    }

    pub fn from_signal(s: &Signal, meta: KernelMeta) -> Result<Self> {
        Self::from_points(s.points().collect(), meta)
    }

    pub fn points(&self) -> &[(i64, f64)] {
        &self.points
    }

    pub fn meta(&self) -> &KernelMeta {
        &self.meta
    }

    pub fn nnz(&self) -> usize {
        self.points.len()
    }

    pub fn min_pos(&self) -> i64 {
        self.points.first().map_or(0, |p| p.0)
    }

    pub fn max_pos(&self) -> i64 {
        self.points.last().map_or(0, |p| p.0)
    }

    /// Length of the dense window `[min_pos, max_pos]` (1 for an empty kernel).
    pub fn span(&self) -> u64 {
        (self.max_pos() - self.min_pos()) as u64 + 1
    }

    /// Total mass `‖K‖_1`.
    pub fn mass(&self) -> f64 {
        self.points.iter().map(|p| p.1).sum()
    }

    pub fn weight_at(&self, x: i64) -> f64 {
        self.points
            .binary_search_by_key(&x, |p| p.0)
            .map_or(0.0, |i| self.points[i].1)
    }

    /// Dense weights over `[min_pos, max_pos]`.
    pub fn dense_weights(&self) -> Result<Vec<f64>> {
        let span = self.span();
        if span > MAX_WINDOW {
            return Err(Error::WindowTooLarge(span, MAX_WINDOW));
        }
        let mut out = vec![0.0; span as usize];
        let base = self.min_pos();
        for &(x, w) in &self.points {
            out[(x - base) as usize] = w;
        }
        Ok(out)
    }

    pub fn to_signal(&self) -> Result<Signal> {
        if self.points.is_empty() {
            return Ok(Signal::zero());
        }
        Ok(Signal::new(self.min_pos(), self.dense_weights()?))
    }

    /// `K̃(x) = K(-x)`.
    pub fn reflect(&self) -> Kernel {
        let mut points: Vec<_> = self.points.iter().map(|&(x, w)| (-x, w)).collect();
        points.reverse();
        Kernel {
            points,
            meta: self.meta.clone(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Kernel> {
        let points = self.points.iter().map(|&(x, w)| (x, w * factor)).collect();
        Kernel::from_points(points, self.meta.clone())
    }

    /// `{offset, values, meta}` on one line; the signal part matches [`Signal`].
    pub fn to_json(&self) -> Result<String> {
        let s = self.to_signal()?;
        Ok(serde_json::to_string(&KernelJson {
            offset: s.offset,
            values: s.values,
            meta: self.meta.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let k: KernelJson = serde_json::from_str(s.trim())?;
        Kernel::from_signal(&Signal::new(k.offset, k.values), k.meta)
    }
}

#[derive(Serialize, Deserialize)]
struct KernelJson {
    offset: i64,
    values: Vec<f64>,
    meta: KernelMeta,
}

/// Kernel of `A^P_N f(x) = (1/N) Σ_{k=1}^N f(x + P(k))`: weight `1/N` at
/// each `-P(k)`.
pub fn poly_kernel(poly: &IntPolynomial, n: u64) -> Result<Kernel> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    let w = 1.0 / n as f64;
    let mut points = Vec::with_capacity(n as usize);
    for k in 1..=n {
        let k = i64::try_from(k).map_err(|_| Error::Overflow(format!("k = {k}")))?;
        let v = poly.eval(k)?;
        let pos = v.checked_neg().ok_or_else(|| Error::Overflow(format!("-P({k})")))?;
        points.push((pos, w));
    }
    let meta = KernelMeta {
        kind: KernelKind::Poly,
        n,
        lambda: None,
        poly: Some(poly.clone()),
        degree: Some(poly.degree() as u32),
        in_theorem_scope: poly.has_nonnegative_coefficients(),
    };
    Kernel::from_points(points, meta)
}

/// Kernel of `𝒜_N f(x) = (1/N) Σ_{p ≤ N} f(x - p) log p`: weight
/// `log p / N` at `+p`.
pub fn prime_kernel(n: u64) -> Result<Kernel> {
    prime_kernel_with(&sieve(n.max(2))?, n)
}

pub fn prime_kernel_with(table: &PrimeTable, n: u64) -> Result<Kernel> {
    check_prime_scale(table, n)?;
    let points = table
        .up_to(n)
        .iter()
        .map(|&p| (p as i64, (p as f64).ln() / n as f64))
        .collect();
    let meta = KernelMeta {
        kind: KernelKind::Prime,
        n,
        lambda: None,
        poly: None,
        degree: None,
        in_theorem_scope: true,
    };
    Kernel::from_points(points, meta)
}

fn check_prime_scale(table: &PrimeTable, n: u64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("N = {n}: no primes below 2")));
    }
    if n > table.limit() {
        return Err(Error::InvalidParameter(format!(
            "N = {n} beyond prime table limit {}",
            table.limit()
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda = {lambda} not in (0, 1)")))
    }
}

/// `I_{d,λ}` truncated to `m <= M`: weight `m^{-λ}` at `+m^d`.
pub fn fracint_kernel(d: u32, lambda: f64, m: u64) -> Result<Kernel> {
    check_lambda(lambda)?;
    if d == 0 || m == 0 {
        return Err(Error::InvalidParameter("need d >= 1 and M >= 1".into()));
    }
    let mut points = Vec::with_capacity(m as usize);
    for k in 1..=m {
        let pos = i64::try_from(k)
            .ok()
            .and_then(|k| k.checked_pow(d))
            .ok_or_else(|| Error::Overflow(format!("{k}^{d}")))?;
        points.push((pos, (k as f64).powf(-lambda)));
    }
    let meta = KernelMeta {
        kind: KernelKind::Fracint,
        n: m,
        lambda: Some(lambda),
        poly: None,
        degree: Some(d),
        in_theorem_scope: true,
    };
    Kernel::from_points(points, meta)
}

/// Smallest truncation index for which the truncated `I_{d,λ} g` is exact on
/// `eval_window` when `g` vanishes outside `support`: every omitted term
/// reads `g` below its support.
pub fn fracint_truncation(d: u32, eval_window: (i64, i64), support: (i64, i64)) -> u64 {
    let reach = eval_window.1 - support.0;
    if reach < 1 {
        return 1;
    }
    // ceil(reach^{1/d}) + 1
    let mut r = (reach as f64).powf(1.0 / d as f64).ceil() as u64;
    while r > 1 && (r - 1).checked_pow(d).is_some_and(|v| v >= reach as u64) {
        r -= 1;
    }
    while r.checked_pow(d).is_some_and(|v| v < reach as u64) {
        r += 1;
    }
    r + 1
}

/// `J_{λ,N} f(x) = Σ_{p ≤ N} f(x - p) log p / p^λ`: weight `log p / p^λ` at `+p`.
pub fn prime_fracint_kernel(lambda: f64, n: u64) -> Result<Kernel> {
    prime_fracint_kernel_with(&sieve(n.max(2))?, lambda, n)
}

pub fn prime_fracint_kernel_with(table: &PrimeTable, lambda: f64, n: u64) -> Result<Kernel> {
    check_lambda(lambda)?;
    check_prime_scale(table, n)?;
    let points = table
        .up_to(n)
        .iter()
        .map(|&p| {
            let x = p as f64;
            (p as i64, x.ln() * x.powf(-lambda))
        })
        .collect();
    let meta = KernelMeta {
        kind: KernelKind::PrimeFracint,
        n,
        lambda: Some(lambda),
        poly: None,
        degree: None,
        in_theorem_scope: true,
    };
    Kernel::from_points(points, meta)
}

/// Spreads `f` onto the lattice `4aℤ`: `g(4am) = f(m)`, zero off the lattice.
pub fn quadratic_reduction(f: &Signal, a: i64) -> Result<Signal> {
    if a < 1 {
        return Err(Error::InvalidParameter(format!("a = {a} must be >= 1")));
    }
    let f = f.clone().trimmed();
    if f.is_empty() {
        return Ok(Signal::zero());
    }
    let step = 4 * a;
    let len = (f.len() as u64 - 1) * step as u64 + 1;
    if len > MAX_WINDOW {
        return Err(Error::WindowTooLarge(len, MAX_WINDOW));
    }
    let mut values = vec![0.0; len as usize];
    for (i, &v) in f.values.iter().enumerate() {
        values[i * step as usize] = v;
    }
    let offset = f
        .offset
        .checked_mul(step)
        .ok_or_else(|| Error::Overflow("4a * offset".into()))?;
    Ok(Signal::new(offset, values))
}

/// Outcome of a pointwise inequality `lhs(x) <= rhs(x)` over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub window: (i64, i64),
    pub points_checked: u64,
    /// `min_x (rhs - lhs)`
    pub min_slack: f64,
    /// `max_x (rhs - lhs)`
    pub max_slack: f64,
    pub worst_x: Option<i64>,
    pub violations: Vec<i64>,
}

impl PointwiseReport {
    pub(crate) fn empty() -> Self {
        PointwiseReport {
            window: (0, -1),
            points_checked: 0,
            min_slack: 0.0,
            max_slack: 0.0,
            worst_x: None,
            violations: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Folds `(x, lhs, rhs)` triples; a violation is `lhs > rhs` beyond
    /// a relative rounding allowance.
    pub(crate) fn from_pairs(
        window: (i64, i64),
        pairs: impl Iterator<Item = (i64, f64, f64)>,
    ) -> Self {
        let mut r = PointwiseReport::empty();
        r.window = window;
        r.min_slack = f64::INFINITY;
        r.max_slack = f64::NEG_INFINITY;
        for (x, lhs, rhs) in pairs {
            r.points_checked += 1;
            let slack = rhs - lhs;
            if slack < r.min_slack {
                r.min_slack = slack;
                r.worst_x = Some(x);
            }
            r.max_slack = r.max_slack.max(slack);
            if slack < -ROUNDING_ALLOWANCE * lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE) {
                r.violations.push(x);
            }
        }
        if r.points_checked == 0 {
            r.min_slack = 0.0;
            r.max_slack = 0.0;
        }
        r
    }
}

/// Relative slack tolerated before a pointwise inequality counts as violated.
pub const ROUNDING_ALLOWANCE: f64 = 1e-12;

/// Checks `A^P_N f(x) <= (2a + b/N) · A_{2aN+b} g(4a(x + c) - b²)` for every
/// `x` where the left side can be nonzero, `g` being the spread of `f` onto `4aℤ`.
///
/// The right side is evaluated pointwise from its definition, not by convolution.
pub fn reduction_domination_check(f: &Signal, poly: &IntPolynomial, n: u64) -> Result<PointwiseReport> {
    let (a, b, c) = poly.nonnegative_quadratic().ok_or_else(|| {
        Error::InvalidParameter(format!("{poly} is not a quadratic with a >= 1 and b, c >= 0"))
    })?;
    if !f.is_nonnegative() {
        return Err(Error::InvalidParameter("f must be nonnegative".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    let f = f.clone().trimmed();
    if f.is_empty() {
        return Ok(PointwiseReport::empty());
    }
    let kernel = poly_kernel(poly, n)?;
    let lhs = convolve(&f, &kernel, ConvPath::Auto)?;
    let g = quadratic_reduction(&f, a)?;
    let ni = n as i64;
    let m = 2 * a * ni + b;
    let factor = 2.0 * a as f64 + b as f64 / n as f64;
    let average_squares = |y: i64| -> f64 {
        let s: f64 = (1..=m).map(|k| g.get(y + k * k)).sum();
        s / m as f64
    };
    let window = (lhs.offset, lhs.end() - 1);
    let pairs = lhs.values.iter().enumerate().map(|(i, &l)| {
        let x = lhs.offset + i as i64;
        let y = 4 * a * (x + c) - b * b;
        (x, l, factor * average_squares(y))
    });
    Ok(PointwiseReport::from_pairs(window, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::lp_norm;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_basics() {
        let p = IntPolynomial::quadratic(1, 1, 0).unwrap();
        assert_eq!(p.eval(2).unwrap(), 6);
        assert_eq!(p.degree(), 2);
        assert_eq!(p.to_string(), "x^2 + x");
        assert_eq!(IntPolynomial::new(vec![3, -2, 0, 5]).unwrap().to_string(), "5x^3 - 2x + 3");
        assert!(IntPolynomial::new(vec![1, 0]).is_err());
        assert!(IntPolynomial::new(vec![7]).is_err());
        let big = IntPolynomial::monomial(5).unwrap();
        assert!(matches!(big.eval(1 << 20), Err(Error::Overflow(_))));
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[0,1,1]");
        assert!(serde_json::from_str::<IntPolynomial>("[1,0]").is_err());
    }

    #[test]
    fn square_kernel_readout() {
        let k = poly_kernel(&IntPolynomial::monomial(2).unwrap(), 3).unwrap();
        assert_eq!(k.points(), &[(-9, 1.0 / 3.0), (-4, 1.0 / 3.0), (-1, 1.0 / 3.0)]);
        let k = poly_kernel(&IntPolynomial::quadratic(1, 1, 0).unwrap(), 2).unwrap();
        assert_eq!(k.points(), &[(-6, 0.5), (-2, 0.5)]);
        assert!(k.meta().in_theorem_scope);
    }

    #[test]
    fn poly_kernel_mass_and_support() {
        for (coef, n) in [(vec![0, 0, 1], 1000u64), (vec![3, 2, 1], 777), (vec![0, 0, 0, 1], 500), (vec![1, 1, 2], 10_000)] {
            let p = IntPolynomial::new(coef).unwrap();
            let k = poly_kernel(&p, n).unwrap();
            assert_relative_eq!(k.mass(), 1.0, epsilon = 1e-12);
            assert_eq!(k.nnz() as u64, n);
        }
    }

    #[test]
    fn non_injective_polynomial_accumulates() {
        // x^2 - 3x takes the value -2 at x = 1 and x = 2
        let p = IntPolynomial::new(vec![0, -3, 1]).unwrap();
        let k = poly_kernel(&p, 3).unwrap();
        assert_eq!(k.nnz(), 2);
        assert_relative_eq!(k.weight_at(2), 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(k.mass(), 1.0, epsilon = 1e-15);
        assert!(!k.meta().in_theorem_scope);
    }

    #[test]
    fn poly_kernel_reproduces_average() {
        let p = IntPolynomial::quadratic(2, 3, 1).unwrap();
        let n = 7;
        let k = poly_kernel(&p, n).unwrap();
        let f = Signal::new(-60, (0..200).map(|i| ((i * 37) % 11) as f64 - 4.0).collect());
        let out = convolve(&f, &k, ConvPath::Direct).unwrap();
        for x in -300..150 {
            let want: f64 = (1..=n as i64).map(|j| f.get(x + p.eval(j).unwrap())).sum::<f64>() / n as f64;
            assert!((out.get(x) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn prime_kernel_readout() {
        let k = prime_kernel(10).unwrap();
        let pos: Vec<i64> = k.points().iter().map(|p| p.0).collect();
        assert_eq!(pos, vec![2, 3, 5, 7]);
        for &(p, w) in k.points() {
            assert_relative_eq!(w, (p as f64).ln() / 10.0, epsilon = 1e-16);
        }
        let oracle = (2f64.ln() + 3f64.ln() + 5f64.ln() + 7f64.ln()) / 10.0;
        assert_relative_eq!(k.mass(), oracle, epsilon = 1e-15);
        assert!((k.mass() - 0.53471).abs() < 1e-5);
        assert!(prime_kernel(1).is_err());
    }

    #[test]
    fn prime_kernel_reproduces_average_on_delta() {
        let out = convolve(&Signal::delta(0), &prime_kernel(10).unwrap(), ConvPath::Auto).unwrap();
        // 𝒜_N δ_0(x) = (1/N) Σ_p δ_0(x - p) log p, nonzero only at x = p
        for x in -12..12i64 {
            let want: f64 = [2i64, 3, 5, 7]
                .iter()
                .filter(|&&p| x - p == 0)
                .map(|&p| (p as f64).ln() / 10.0)
                .sum();
            assert!((out.get(x) - want).abs() < 1e-15, "x = {x}");
        }
    }

    #[test]
    fn fracint_readout() {
        let k = fracint_kernel(2, 0.5, 3).unwrap();
        assert_eq!(k.points()[0], (1, 1.0));
        assert_eq!(k.points()[1].0, 4);
        assert_relative_eq!(k.points()[1].1, 2f64.powf(-0.5), epsilon = 1e-16);
        assert_eq!(k.points()[2].0, 9);
        let out = convolve(&Signal::delta(0), &k, ConvPath::Direct).unwrap();
        assert!((out.get(4) - 0.70711).abs() < 1e-5);
        assert_eq!(out.get(3), 0.0);
        assert!(fracint_kernel(2, 1.0, 3).is_err());
        assert!(fracint_kernel(2, 0.0, 3).is_err());
        let k = fracint_kernel(3, 0.3, 50).unwrap();
        for w in k.points().windows(2) {
            assert!(w[0].0 < w[1].0 && w[0].1 > w[1].1);
        }
    }

    #[test]
    fn fracint_truncation_is_exact() {
        assert_eq!(fracint_truncation(2, (0, 16), (0, 0)), 5);
        assert_eq!(fracint_truncation(2, (0, 17), (0, 0)), 6);
        assert_eq!(fracint_truncation(3, (-5, 3), (10, 20)), 1);
        // one more term than needed never changes the result
        let g = Signal::new(-7, (0..15).map(|i| (i % 4) as f64).collect());
        let window = (-20i64, 40i64);
        let m = fracint_truncation(2, window, (g.offset, g.end() - 1));
        let a = convolve(&g, &fracint_kernel(2, 0.4, m).unwrap(), ConvPath::Direct).unwrap();
        let b = convolve(&g, &fracint_kernel(2, 0.4, m + 20).unwrap(), ConvPath::Direct).unwrap();
        for x in window.0..=window.1 {
            assert_eq!(a.get(x), b.get(x));
        }
    }

    #[test]
    fn prime_fracint_readout() {
        let k = prime_fracint_kernel(0.5, 5).unwrap();
        let want = [(2i64, 2f64.ln() / 2f64.sqrt()), (3, 3f64.ln() / 3f64.sqrt()), (5, 5f64.ln() / 5f64.sqrt())];
        assert_eq!(k.nnz(), 3);
        for (got, want) in k.points().iter().zip(want) {
            assert_eq!(got.0, want.0);
            assert_relative_eq!(got.1, want.1, epsilon = 1e-15);
        }
        let oracle: f64 = [2.0f64, 3.0, 5.0, 7.0].iter().map(|p| p.ln() / p.sqrt()).sum();
        let k = prime_fracint_kernel(0.5, 10).unwrap();
        assert_relative_eq!(k.mass(), oracle, epsilon = 1e-14);
        assert!((k.mass() - 2.57966).abs() < 1e-5);
    }

    #[test]
    fn reduction_examples() {
        assert_eq!(quadratic_reduction(&Signal::delta(0), 1).unwrap(), Signal::delta(0));
        assert_eq!(quadratic_reduction(&Signal::delta(1), 1).unwrap(), Signal::delta(4));
        let f = Signal::new(-2, vec![1.0, -2.0, 0.5]);
        let g = quadratic_reduction(&f, 3).unwrap();
        for m in -5..5 {
            assert_eq!(g.get(12 * m), f.get(m));
            for r in 1..12 {
                assert_eq!(g.get(12 * m + r), 0.0);
            }
        }
        for p in [1.5, 2.0, 3.0] {
            assert_relative_eq!(lp_norm(&g, p).unwrap(), lp_norm(&f, p).unwrap(), epsilon = 1e-15);
        }
        assert!(quadratic_reduction(&f, 0).is_err());
    }

    #[test]
    fn reduction_domination_examples() {
        // P = x^2 + x, f = δ_0, N = 2: equality at x = -2 and x = -6
        let p = IntPolynomial::quadratic(1, 1, 0).unwrap();
        let r = reduction_domination_check(&Signal::delta(0), &p, 2).unwrap();
        assert!(r.passed());
        assert_eq!(r.window, (-6, -2));
        assert!(r.min_slack.abs() < 1e-15);
        // direct evaluation of both sides
        let rhs = |x: i64| -> f64 {
            let y = 4 * x - 1;
            let hits = (1..=5i64).filter(|k| y + k * k == 0).count();
            2.5 * hits as f64 / 5.0
        };
        assert!((rhs(-2) - 0.5).abs() < 1e-15 && (rhs(-6) - 0.5).abs() < 1e-15 && (rhs(0) - 0.5).abs() < 1e-15);

        let sq = IntPolynomial::monomial(2).unwrap();
        let f = Signal::new(-3, vec![1.0, 0.0, 2.0, 0.5, 3.0]);
        let r = reduction_domination_check(&f, &sq, 6).unwrap();
        assert!(r.passed());
        assert!(r.min_slack >= -1e-15);

        let r = reduction_domination_check(&Signal::zero(), &p, 4).unwrap();
        assert!(r.passed() && r.points_checked == 0);

        assert!(reduction_domination_check(&Signal::new(0, vec![-1.0]), &p, 2).is_err());
        assert!(reduction_domination_check(&f, &IntPolynomial::quadratic(1, -1, 0).unwrap(), 2).is_err());
    }

    #[test]
    fn kernel_json_round_trip() {
        let k = prime_fracint_kernel(0.25, 30).unwrap();
        let s = k.to_json().unwrap();
        let back = Kernel::from_json(&s).unwrap();
        assert_eq!(back.meta(), k.meta());
        assert_eq!(back.nnz(), k.nnz());
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["offset"], 2);
        assert_eq!(v["meta"]["kind"], "prime_fracint");
    }
}
