//! Parameter sweeps of normalized improving ratios over `(p, N)` grids and
//! the log-log regression that classifies them.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{improving_ratio_with, OperatorSpec, RatioRecord};
use crate::error::{Error, Result};
use crate::extremize::{power_iterate, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::kernel::Kernel;
use crate::primes::{sieve, PrimeTable};
use crate::signal::{ExponentPair, Signal};

/// `|slope|` at or below this counts as bounded.
pub const SLOPE_THRESHOLD: f64 = 0.02;

/// Geometric grid `round(start · factor^k)` for `k < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NGrid {
    pub start: u64,
    #[serde(default = "default_factor")]
    pub factor: f64,
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_factor() -> f64 {
    2.0
}

fn default_count() -> usize {
    7
}

impl Default for NGrid {
    fn default() -> Self {
        NGrid { start: 16, factor: 2.0, count: 7 }
    }
}

impl NGrid {
    pub fn new(start: u64, factor: f64, count: usize) -> Self {
        NGrid { start, factor, count }
    }

    pub fn values(&self) -> Result<Vec<u64>> {
        if self.start == 0 {
            return Err(Error::InvalidParameter("N grid must start at N >= 1".into()));
        }
        if !(self.factor > 1.0 && self.factor.is_finite()) {
            return Err(Error::InvalidParameter(format!("N grid factor {} must be > 1", self.factor)));
        }
        if self.count == 0 {
            return Err(Error::InvalidParameter("N grid needs at least one point".into()));
        }
        let values: Vec<u64> = (0..self.count)
            .map(|k| (self.start as f64 * self.factor.powi(k as i32)).round() as u64)
            .collect();
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(format!("N grid {values:?} is not strictly increasing")));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum InputFamily {
    /// `δ_0`
    Delta,
    /// `χ_{[-R, R]}` with `R = N^d`, `P(N)` or `N`.
    Indicator,
    /// Power-iteration extremizer on `[-2R, 2R]`.
    Extremal,
    /// A fixed signal read from a JSON file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExtremalSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ExtremalSettings {
    fn default() -> Self {
        ExtremalSettings { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OutputPaths {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub gnuplot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SweepConfig {
    pub operator: OperatorSpec,
    pub p: Vec<f64>,
    #[serde(default)]
    pub n_grid: NGrid,
    pub input: InputFamily,
    #[serde(default)]
    pub extremal: ExtremalSettings,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_parallelism() -> usize {
    1
}

impl SweepConfig {
    pub fn new(operator: OperatorSpec, p: Vec<f64>, n_grid: NGrid, input: InputFamily) -> Self {
        SweepConfig {
            operator,
            p,
            n_grid,
            input,
            extremal: ExtremalSettings::default(),
            output: OutputPaths::default(),
            parallelism: 1,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let config: SweepConfig = serde_json::from_str(s)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.operator.validate()?;
        if self.p.is_empty() {
            return Err(Error::InvalidParameter("p list is empty".into()));
        }
        for &p in &self.p {
            if !(p > 1.0 && p <= 2.0) {
                return Err(Error::Exponent(p, "sweep exponents must lie in (1, 2]"));
            }
        }
        self.n_grid.values()?;
        if self.parallelism == 0 {
            return Err(Error::InvalidParameter("parallelism must be >= 1".into()));
        }
        if self.input == InputFamily::Extremal && !(self.extremal.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("extremal tol = {}", self.extremal.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlopeVerdict {
    Bounded,
    Growing,
    Shrinking,
}

impl SlopeVerdict {
    pub fn classify(slope: f64) -> Self {
        if slope.abs() <= SLOPE_THRESHOLD {
            SlopeVerdict::Bounded
        } else if slope > 0.0 {
            SlopeVerdict::Growing
        } else {
            SlopeVerdict::Shrinking
        }
    }
}

/// Regression of one exponent's ratios against `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExponentFit {
    pub p: f64,
    pub fitted_slope: f64,
    pub slope_std_err: f64,
    pub max_over_min: f64,
    pub verdict: SlopeVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CellFailure {
    pub p: f64,
    pub n: u64,
    pub error: String,
}

/// Power-iteration bookkeeping for extremal inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExtremalDiagnostics {
    pub p: f64,
    pub n: u64,
    pub iterations: usize,
    pub converged: bool,
    pub monotone_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepReport {
    pub config: SweepConfig,
    /// Sorted by `(p, N)`.
    pub records: Vec<RatioRecord>,
    /// One fit per exponent with at least three successful cells.
    pub fits: Vec<ExponentFit>,
    pub failures: Vec<CellFailure>,
    pub extremal: Vec<ExtremalDiagnostics>,
}

impl SweepReport {
    pub fn fit(&self, p: f64) -> Option<&ExponentFit> {
        self.fits.iter().find(|f| f.p == p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,d_or_abc,p,pPrime,N,rawNorm,normalizer,ratio\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.op.kind_tag(),
                r.op.params_tag(),
                r.p,
                r.p_prime,
                r.n,
                r.raw_norm,
                r.normalizer,
                r.ratio
            );
        }
        s
    }

    /// Whitespace-separated `N ratio` blocks, one per exponent, separated by
    /// two blank lines so gnuplot can address them with `index`.
    pub fn to_gnuplot(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} {}", self.config.operator.kind_tag(), self.config.operator.params_tag());
        for (i, &p) in self.config.p.iter().enumerate() {
            if i > 0 {
                s.push_str("\n\n");
            }
            let _ = writeln!(s, "# p = {p}");
            let _ = writeln!(s, "# N ratio");
            for r in self.records.iter().filter(|r| r.p == p) {
                let _ = writeln!(s, "{} {}", r.n, r.ratio);
            }
        }
        s
    }

    /// Writes every output path named in the config.
    pub fn write_outputs(&self) -> Result<()> {
        let out = &self.config.output;
        let io = |path: &PathBuf, body: String| {
            std::fs::write(path, body).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
        };
        if let Some(path) = &out.json {
            io(path, self.to_json()?)?;
        }
        if let Some(path) = &out.csv {
            io(path, self.to_csv())?;
        }
        if let Some(path) = &out.gnuplot {
            io(path, self.to_gnuplot())?;
        }
        Ok(())
    }
}

/// Ordinary least squares of `log ratio` on `log N`; returns the slope and
/// its standard error.
pub fn regress_exponent(pairs: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pairs.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: pairs.len() });
    }
    for &(n, r) in pairs {
        if !(n > 0.0) || !(r > 0.0) || !n.is_finite() || !r.is_finite() {
            return Err(Error::NonPositiveRatio(n, r));
        }
    }
    let k = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-12 * (1.0 + mx * mx) {
        return Err(Error::DegenerateGrid);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (ssr / (k - 2.0) / sxx).sqrt();
    Ok((slope, stderr))
}

struct CellOutcome {
    p: f64,
    n: u64,
    result: Result<(RatioRecord, Option<ExtremalDiagnostics>)>,
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport> {
    config.validate()?;
    let ns = config.n_grid.values()?;
    let file_input = match &config.input {
        InputFamily::File { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
            Some(Signal::from_json(&text)?)
        }
        _ => None,
    };
    let table = match config.operator {
        OperatorSpec::Primes => Some(sieve(*ns.last().unwrap())?),
        _ => None,
    };
    let cells: Vec<(f64, u64)> = config
        .p
        .iter()
        .flat_map(|&p| ns.iter().map(move |&n| (p, n)))
        .collect();

    let run = |&(p, n): &(f64, u64)| CellOutcome {
        p,
        n,
        result: run_cell(config, p, n, table.as_ref(), file_input.as_ref()),
    };
    let mut outcomes: Vec<CellOutcome> = if config.parallelism == 1 {
        cells.iter().map(run).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallelism)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(|| cells.par_iter().map(run).collect())
    };
    outcomes.sort_by(|a, b| a.p.total_cmp(&b.p).then(a.n.cmp(&b.n)));

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut extremal = Vec::new();
    for o in outcomes {
        match o.result {
            Ok((rec, diag)) => {
                records.push(rec);
                extremal.extend(diag);
            }
            Err(e) => failures.push(CellFailure { p: o.p, n: o.n, error: e.to_string() }),
        }
    }
    let mut ps = config.p.clone();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let fits = ps
        .iter()
        .filter_map(|&p| {
            let pairs: Vec<(f64, f64)> = records.iter().filter(|r| r.p == p).map(|r| (r.n as f64, r.ratio)).collect();
            let (slope, stderr) = regress_exponent(&pairs).ok()?;
            let max = pairs.iter().map(|x| x.1).fold(f64::MIN, f64::max);
            let min = pairs.iter().map(|x| x.1).fold(f64::MAX, f64::min);
            Some(ExponentFit {
                p,
                fitted_slope: slope,
                slope_std_err: stderr,
                max_over_min: max / min,
                verdict: SlopeVerdict::classify(slope),
            })
        })
        .collect();
    Ok(SweepReport { config: config.clone(), records, fits, failures, extremal })
}

fn run_cell(
    config: &SweepConfig,
    p: f64,
    n: u64,
    table: Option<&PrimeTable>,
    file_input: Option<&Signal>,
) -> Result<(RatioRecord, Option<ExtremalDiagnostics>)> {
    let op = &config.operator;
    let kernel = match table {
        Some(t) => op.kernel_with(n, t)?,
        None => op.kernel(n)?,
    };
    let input = match &config.input {
        InputFamily::Delta => Signal::delta(0),
        InputFamily::Indicator => {
            let r = op.radius(n)?;
            Signal::indicator(-r, r)?
        }
        InputFamily::File { .. } => file_input.expect("loaded before the cells run").clone(),
        InputFamily::Extremal => return extremal_cell(op, &kernel, p, n, &config.extremal),
    };
    Ok((improving_ratio_with(&input, op, &kernel, n, p)?, None))
}

/// Window `[-2R, 2R]` for extremal inputs of `op` at scale `n`.
pub fn extremal_window(op: &OperatorSpec, n: u64) -> Result<(i64, i64)> {
    let r = op
        .radius(n)?
        .checked_mul(2)
        .ok_or_else(|| Error::Overflow(format!("2 R at N = {n}")))?;
    Ok((-r, r))
}

fn extremal_cell(
    op: &OperatorSpec,
    kernel: &Kernel,
    p: f64,
    n: u64,
    settings: &ExtremalSettings,
) -> Result<(RatioRecord, Option<ExtremalDiagnostics>)> {
    let pair = ExponentPair::new(p)?;
    let res = power_iterate(kernel, p, extremal_window(op, n)?, settings.tol, settings.max_iter)?;
    let normalizer = op.normalizer(&pair, n);
    let record = RatioRecord {
        op: *op,
        p: pair.p,
        p_prime: pair.p_prime,
        n,
        raw_norm: res.ratio,
        normalizer,
        input_norm: 1.0,
        ratio: res.ratio / normalizer,
    };
    let diag = ExtremalDiagnostics {
        p,
        n,
        iterations: res.iterations,
        converged: res.converged,
        monotone_violations: res.monotone_violations,
    };
    Ok((record, Some(diag)))
}
