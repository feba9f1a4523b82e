use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lpimprove::bounds::{improving_ratio_with, OperatorSpec};
use lpimprove::extremize::{power_iterate, DEFAULT_MAX_ITER, DEFAULT_TOL};
use lpimprove::kernel::{fracint_kernel, poly_kernel, prime_fracint_kernel, prime_kernel};
use lpimprove::primes::{is_prime_trial, nth_prime_bounds_check, sieve};
use lpimprove::suite::{check_all, SuiteOptions, DEFAULT_SEED};
use lpimprove::sweep::{extremal_window, run_sweep, InputFamily, NGrid, SweepConfig};
use lpimprove::{convolve, ConvPath, IntPolynomial, Kernel, KernelMeta, Signal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "lpimprove", version, about = "Polynomial and prime averages on Z and their l^p-improving ratios")]
struct Cli {
    /// Seed for randomized inputs.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel utilities.
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Convolve an input signal with a kernel.
    Apply {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "auto")]
        path: ConvPath,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalized ratio ‖T f‖_{p'} / (normalizer · ‖f‖_p).
    Ratio {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        p: f64,
    },
    /// Sweep ratios over a (p, N) grid; the JSON config is overridden by flags.
    Sweep(SweepArgs),
    /// Near-extremal input by power iteration.
    Extremize {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        p: f64,
        /// Window as LO,HI; defaults to [-2R, 2R].
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        window: Option<(i64, i64)>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prime utilities.
    Primes {
        #[command(subcommand)]
        action: PrimesAction,
    },
    /// Run the acceptance suite; exits nonzero if any criterion fails.
    CheckAll {
        /// Comma-separated criterion numbers; all when absent.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        /// Multiply the Young-check kernel weights (fault injection).
        #[arg(long, default_value_t = 1.0)]
        inject_mass_scale: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum KernelAction {
    /// Print a kernel as JSON or CSV.
    Dump {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PrimesAction {
    /// Sieve against trial division and the two-sided p_n bounds.
    Check {
        #[arg(long, default_value_t = 10_000)]
        limit: u64,
        #[arg(long, default_value_t = 100_000)]
        nth_max: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum KindArg {
    Poly,
    Quadratic,
    Primes,
    Fracint,
    PrimeFracint,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, value_enum, default_value = "poly")]
    kind: KindArg,
    /// Degree for `poly` and `fracint`.
    #[arg(long, default_value_t = 2)]
    d: u32,
    #[arg(long, default_value_t = 1)]
    a: i64,
    #[arg(long, default_value_t = 0)]
    b: i64,
    #[arg(long, default_value_t = 0)]
    c: i64,
    /// Scale N (for `fracint`, the number of terms M).
    #[arg(long, short = 'n')]
    n: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Kernel JSON file ({offset, values}); overrides --kind.
    #[arg(long)]
    kernel_file: Option<PathBuf>,
}

impl KernelArgs {
    fn n(&self) -> Result<u64> {
        self.n.context("--n is required")
    }

    fn lambda(&self) -> Result<f64> {
        self.lambda.context("--lambda is required for fractional integrals")
    }

    fn operator(&self) -> Result<OperatorSpec> {
        if self.kernel_file.is_some() {
            bail!("this needs a named operator (poly, quadratic or primes), not --kernel-file");
        }
        let op = match self.kind {
            KindArg::Poly => OperatorSpec::Poly { d: self.d },
            KindArg::Quadratic => OperatorSpec::Quadratic { a: self.a, b: self.b, c: self.c },
            KindArg::Primes => OperatorSpec::Primes,
            _ => bail!("ratios are defined for poly, quadratic and primes"),
        };
        op.validate()?;
        Ok(op)
    }

    fn build(&self) -> Result<Kernel> {
        if let Some(path) = &self.kernel_file {
            let text = read(path)?;
            let kernel = match Kernel::from_json(&text) {
                Ok(k) => k,
                Err(_) => Kernel::from_signal(&Signal::from_json(&text)?, KernelMeta::custom())?,
            };
            return Ok(kernel);
        }
        Ok(match self.kind {
            KindArg::Poly => poly_kernel(&IntPolynomial::monomial(self.d)?, self.n()?)?,
            KindArg::Quadratic => poly_kernel(&IntPolynomial::quadratic(self.a, self.b, self.c)?, self.n()?)?,
            KindArg::Primes => prime_kernel(self.n()?)?,
            KindArg::Fracint => fracint_kernel(self.d, self.lambda()?, self.n()?)?,
            KindArg::PrimeFracint => prime_fracint_kernel(self.lambda()?, self.n()?)?,
        })
    }
}

#[derive(Args)]
struct InputArgs {
    /// Signal JSON file ({offset, values}).
    #[arg(long, group = "input")]
    signal: Option<PathBuf>,
    /// Unit mass at this point (the default input is δ_0).
    #[arg(long, group = "input", allow_hyphen_values = true)]
    delta: Option<i64>,
    /// Indicator of LO..=HI, given as LO,HI.
    #[arg(long, group = "input", value_parser = parse_pair, allow_hyphen_values = true)]
    indicator: Option<(i64, i64)>,
    /// Uniform [0, 1) values on [0, LEN), drawn with --seed.
    #[arg(long, group = "input")]
    random: Option<usize>,
}

impl InputArgs {
    fn build(&self, seed: u64) -> Result<Signal> {
        if let Some(path) = &self.signal {
            return Ok(Signal::from_json(&read(path)?)?);
        }
        if let Some((lo, hi)) = self.indicator {
            return Ok(Signal::indicator(lo, hi)?);
        }
        if let Some(len) = self.random {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            return Ok(Signal::new(0, (0..len).map(|_| rng.gen_range(0.0..1.0)).collect()));
        }
        Ok(Signal::delta(self.delta.unwrap_or(0)))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InputArg {
    Delta,
    Indicator,
    Extremal,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long)]
    d: Option<u32>,
    /// Quadratic coefficients as A,B,C.
    #[arg(long, value_delimiter = ',')]
    abc: Option<Vec<i64>>,
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long)]
    n_start: Option<u64>,
    #[arg(long)]
    n_factor: Option<f64>,
    #[arg(long)]
    n_count: Option<usize>,
    #[arg(long, value_enum)]
    input: Option<InputArg>,
    /// Signal JSON file used as the input at every N.
    #[arg(long, conflicts_with = "input")]
    input_file: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    gnuplot: Option<PathBuf>,
}

impl SweepArgs {
    fn config(&self) -> Result<SweepConfig> {
        let mut config = match &self.config {
            Some(path) => serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?,
            None => SweepConfig::new(OperatorSpec::Poly { d: 2 }, vec![2.0], NGrid::default(), InputFamily::Delta),
        };
        if let Some(kind) = self.kind {
            config.operator = match kind {
                KindArg::Poly => OperatorSpec::Poly { d: 2 },
                KindArg::Quadratic => OperatorSpec::Quadratic { a: 1, b: 0, c: 0 },
                KindArg::Primes => OperatorSpec::Primes,
                _ => bail!("sweeps run over poly, quadratic or primes"),
            };
        }
        if let Some(d) = self.d {
            match &mut config.operator {
                OperatorSpec::Poly { d: slot } => *slot = d,
                _ => bail!("--d applies to the poly kind"),
            }
        }
        if let Some(abc) = &self.abc {
            if abc.len() != 3 {
                bail!("--abc takes three comma-separated integers, got {}", abc.len());
            }
            match &mut config.operator {
                OperatorSpec::Quadratic { a, b, c } => (*a, *b, *c) = (abc[0], abc[1], abc[2]),
                _ => bail!("--abc applies to the quadratic kind"),
            }
        }
        if let Some(p) = &self.p {
            config.p = p.clone();
        }
        if let Some(v) = self.n_start {
            config.n_grid.start = v;
        }
        if let Some(v) = self.n_factor {
            config.n_grid.factor = v;
        }
        if let Some(v) = self.n_count {
            config.n_grid.count = v;
        }
        if let Some(input) = self.input {
            config.input = match input {
                InputArg::Delta => InputFamily::Delta,
                InputArg::Indicator => InputFamily::Indicator,
                InputArg::Extremal => InputFamily::Extremal,
            };
        }
        if let Some(path) = &self.input_file {
            config.input = InputFamily::File { path: path.clone() };
        }
        if let Some(v) = self.tol {
            config.extremal.tol = v;
        }
        if let Some(v) = self.max_iter {
            config.extremal.max_iter = v;
        }
        if let Some(v) = self.parallelism {
            config.parallelism = v;
        }
        for (slot, flag) in [
            (&mut config.output.json, &self.json),
            (&mut config.output.csv, &self.csv),
            (&mut config.output.gnuplot, &self.gnuplot),
        ] {
            if flag.is_some() {
                *slot = flag.clone();
            }
        }
        config.validate()?;
        Ok(config)
    }
}

fn parse_pair(s: &str) -> std::result::Result<(i64, i64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected LO,HI, got {s:?}"))?;
    let lo = lo.trim().parse::<i64>().map_err(|e| e.to_string())?;
    let hi = hi.trim().parse::<i64>().map_err(|e| e.to_string())?;
    if hi < lo {
        return Err(format!("empty interval {lo},{hi}"));
    }
    Ok((lo, hi))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(body: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{body}");
            if !body.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Kernel { action: KernelAction::Dump { kernel, format, out } } => {
            let k = kernel.build()?;
            let body = match format {
                Format::Json => k.to_json()?,
                Format::Csv => k.to_signal()?.to_csv(),
            };
            emit(&body, out.as_deref())?;
        }
        Command::Apply { kernel, input, path, format, out } => {
            let result = convolve(&input.build(cli.seed)?, &kernel.build()?, path)?;
            let body = match format {
                Format::Json => result.to_json()?,
                Format::Csv => result.to_csv(),
            };
            emit(&body, out.as_deref())?;
        }
        Command::Ratio { kernel, input, p } => {
            let op = kernel.operator()?;
            let n = kernel.n()?;
            let record = improving_ratio_with(&input.build(cli.seed)?, &op, &kernel.build()?, n, p)?;
            emit(&serde_json::to_string_pretty(&record)?, None)?;
        }
        Command::Sweep(args) => {
            let config = args.config()?;
            let report = run_sweep(&config)?;
            report.write_outputs()?;
            if config.output.csv.is_none() {
                emit(&report.to_csv(), None)?;
            }
            for fit in &report.fits {
                eprintln!(
                    "p = {}: slope {:+.4} ± {:.4}, max/min {:.4}, {:?}",
                    fit.p, fit.fitted_slope, fit.slope_std_err, fit.max_over_min, fit.verdict
                );
            }
            for f in &report.failures {
                eprintln!("cell p = {}, N = {} failed: {}", f.p, f.n, f.error);
            }
        }
        Command::Extremize { kernel, p, window, tol, max_iter, out } => {
            let k = kernel.build()?;
            let window = match window {
                Some(w) => w,
                None => extremal_window(&kernel.operator()?, kernel.n()?)?,
            };
            let result = power_iterate(&k, p, window, tol, max_iter)?;
            emit(&serde_json::to_string(&result)?, out.as_deref())?;
            eprintln!(
                "ratio {} after {} iterations (converged: {})",
                result.ratio, result.iterations, result.converged
            );
        }
        Command::Primes { action: PrimesAction::Check { limit, nth_max } } => {
            let table = sieve(limit)?;
            let mismatches = (0..=limit).filter(|&n| table.contains(n) != is_prime_trial(n)).count();
            let bounds = nth_prime_bounds_check(nth_max)?;
            println!("sieve to {limit}: {} primes, {mismatches} mismatches against trial division", table.count());
            println!(
                "p_n bounds for 6 <= n <= {nth_max}: {} failures, min slack {:.3} below / {:.3} above",
                bounds.failures.len(),
                bounds.min_lower_slack,
                bounds.min_upper_slack
            );
            if mismatches > 0 || !bounds.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::CheckAll { only, inject_mass_scale, json } => {
            let opts = SuiteOptions { seed: cli.seed, mass_scale: inject_mass_scale, only };
            let report = check_all(&opts);
            print!("{}", report.table());
            if let Some(path) = json {
                emit(&serde_json::to_string_pretty(&report)?, Some(&path))?;
            }
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
