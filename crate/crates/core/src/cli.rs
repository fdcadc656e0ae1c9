//! Batch front-end: reads a JSON config, runs one computation, writes a
//! JSON or CSV table.
//!
//! Exit codes: 0 success (a failed witness premise inside `simulate` is a
//! finding, not an error), 1 a checked condition does not hold, 2 bad
//! config or I/O, 3 a value outside its mathematical domain.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::BoundError;
use crate::guarantee::{ExpGuarantee, HpGuarantee, WitnessParams};
use crate::markov::{
    exp_to_hp, invert_phi_bound, PhiExpectationBound, PhiTransform, TailThreshold,
};
use crate::parallel::{threads_from_env, with_threads, Execution};
use crate::simulate::zoo::bundled_problem;
use crate::simulate::{
    excess_risk_distribution, validate_expectation_bound_with, validate_markov,
    DiscreteLearningProblem, MarkovReport, SamplingMode, SimulationReport,
};
use crate::transform::{evaluate_at, rate_slope, rate_table, DeltaStar, RateRow};
use crate::witness::{
    min_c_over_class, witness_exact, ClassWitness, ExcessLossDistribution, WitnessCertificate,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "bound-bridge",
    version,
    about = "Convert and check excess-risk guarantees"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// High-probability guarantee to in-expectation bound, optimized over delta.
    Transform {
        #[command(flatten)]
        io: IoArgs,
        /// Replace the config's sample sizes with this one.
        #[arg(long)]
        n: Option<u64>,
        /// Evaluate at this delta instead of optimizing.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// In-expectation bound to (delta, eps) rows via (generalized) Markov.
    Markov {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        n: Option<u64>,
        /// Replace the delta grid with this single value.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Check the witness condition on a distribution or a class.
    Witness {
        #[command(flatten)]
        io: IoArgs,
        /// Losses bounded by B: print the witness parameters (u = B, c = 1).
        #[arg(long, value_name = "B")]
        bounded: Option<f64>,
    },
    /// Validate the transforms on the exact or sampled law of the ERM excess risk.
    Simulate {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        n: Option<u64>,
        /// Replace the delta grid with this single value.
        #[arg(long)]
        delta: Option<f64>,
        /// Seed for Monte Carlo mode.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Optimized bound over a range of sample sizes, with the log-log slope.
    Rates {
        #[command(flatten)]
        io: IoArgs,
        /// Evaluate at this fixed delta instead of optimizing.
        #[arg(long)]
        delta: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct IoArgs {
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Domain(BoundError),
    /// Ran to completion, but a checked condition is false.
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => EXIT_CHECK_FAILED,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Domain(_) => EXIT_DOMAIN,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Domain(e) => write!(f, "domain error: {e}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<BoundError> for CliError {
    fn from(e: BoundError) -> Self {
        CliError::Domain(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// A scalar or a list in the config.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformConfig {
    pub guarantee: HpGuarantee,
    pub witness: WitnessParams,
    pub n: OneOrMany<u64>,
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovConfig {
    /// `gamma(n)`, or `beta(n)` when `phi` is set.
    pub bound: ExpGuarantee,
    /// Absent means plain Markov on `X` itself.
    #[serde(default)]
    pub phi: Option<PhiTransform>,
    pub n: u64,
    pub delta: OneOrMany<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessConfig {
    pub u: f64,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub distribution: Option<ExcessLossDistribution>,
    #[serde(default)]
    pub class: Option<Vec<ExcessLossDistribution>>,
    #[serde(default)]
    pub problem: Option<DiscreteLearningProblem>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeConfig {
    Exact,
    MonteCarlo {
        replications: u64,
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub problem: Option<DiscreteLearningProblem>,
    /// Name of a bundled problem, instead of `problem`.
    #[serde(default)]
    pub bundled: Option<String>,
    pub n: u64,
    pub witness: WitnessParams,
    pub delta: OneOrMany<f64>,
    pub mode: ModeConfig,
    /// Transforms for the Markov check; all five when empty.
    #[serde(default)]
    pub phis: Vec<PhiTransform>,
    /// Thresholds for the Markov check; no check when empty.
    #[serde(default)]
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub guarantee: HpGuarantee,
    pub witness: WitnessParams,
    pub n: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovTailRow {
    pub delta: f64,
    #[serde(flatten)]
    pub threshold: TailThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub u: f64,
    #[serde(default)]
    pub c: Option<f64>,
    pub certificates: Vec<WitnessCertificate>,
    pub class: ClassWitness,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub report: SimulationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub markov: Option<MarkovReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesReport {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `ln bound` on `ln n`; absent for one `n`.
    #[serde(default)]
    pub slope: Option<f64>,
}

/// Runs one command, reporting errors on standard error. Returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Transform { io, n, delta } => cmd_transform(&io, n, delta),
        Command::Markov { io, n, delta } => cmd_markov(&io, n, delta),
        Command::Witness { io, bounded } => cmd_witness(&io, bounded),
        Command::Simulate { io, n, delta, seed } => cmd_simulate(&io, n, delta, seed),
        Command::Rates { io, delta } => cmd_rates(&io, delta),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("bound-bridge: {e}");
            e.exit_code()
        }
    }
}

fn load<T: for<'de> Deserialize<'de>>(io: &IoArgs) -> CliResult<T> {
    let path = io
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn nonempty<T>(v: Vec<T>, what: &str) -> CliResult<Vec<T>> {
    if v.is_empty() {
        Err(CliError::Config(format!("{what} must not be empty")))
    } else {
        Ok(v)
    }
}

fn write_out(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

fn delta_star_cell(d: &DeltaStar) -> String {
    match d {
        DeltaStar::At(x) => fmt_f64(*x),
        DeltaStar::Limit(_) => "infimum-at-zero".into(),
    }
}

fn method_name<T: Serialize>(m: &T) -> String {
    serde_json::to_value(m)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn rate_rows_csv(rows: &[RateRow]) -> String {
    csv_table(
        &["n", "delta_star", "bound", "attained", "method"],
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                delta_star_cell(&r.result.delta_star),
                fmt_f64(r.result.bound),
                r.result.attained.to_string(),
                method_name(&r.result.method),
            ]
        }),
    )
}

fn rows_for(
    g: &HpGuarantee,
    w: &WitnessParams,
    ns: &[u64],
    delta: Option<f64>,
) -> CliResult<Vec<RateRow>> {
    match delta {
        Some(d) => ns
            .iter()
            .map(|&n| {
                Ok(RateRow {
                    n,
                    result: evaluate_at(g, w, d, n)?,
                })
            })
            .collect(),
        None => Ok(rate_table(g, w, ns)?),
    }
}

pub fn cmd_transform(io: &IoArgs, n: Option<u64>, delta: Option<f64>) -> CliResult<()> {
    let cfg: TransformConfig = load(io)?;
    let ns = nonempty(n.map(|n| vec![n]).unwrap_or_else(|| cfg.n.into_vec()), "n")?;
    let rows = rows_for(&cfg.guarantee, &cfg.witness, &ns, delta.or(cfg.delta))?;
    for r in &rows {
        if let Some(res) = r.result.stationarity_residual {
            eprintln!("n={} stationarity residual {:e}", r.n, res);
        }
    }
    let text = match io.format {
        Format::Json => to_json(&rows),
        Format::Csv => rate_rows_csv(&rows),
    };
    write_out(io.out.as_deref(), &text)
}

pub fn cmd_markov(io: &IoArgs, n: Option<u64>, delta: Option<f64>) -> CliResult<()> {
    let cfg: MarkovConfig = load(io)?;
    let n = n.unwrap_or(cfg.n);
    let deltas = nonempty(
        delta
            .map(|d| vec![d])
            .unwrap_or_else(|| cfg.delta.into_vec()),
        "delta",
    )?;
    let rows = deltas
        .iter()
        .map(|&d| {
            let threshold = match cfg.phi {
                None => TailThreshold {
                    epsilon: exp_to_hp(&cfg.bound, d, n)?,
                    vacuous: false,
                },
                Some(phi) => {
                    let b = PhiExpectationBound {
                        beta: cfg.bound.clone(),
                        phi,
                    };
                    invert_phi_bound(&b, d, n)?
                }
            };
            Ok(MarkovTailRow {
                delta: d,
                threshold,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let text = match io.format {
        Format::Json => to_json(&rows),
        Format::Csv => csv_table(
            &["delta", "epsilon", "vacuous"],
            rows.iter().map(|r| {
                vec![
                    fmt_f64(r.delta),
                    fmt_f64(r.threshold.epsilon),
                    r.threshold.vacuous.to_string(),
                ]
            }),
        ),
    };
    write_out(io.out.as_deref(), &text)
}

pub fn cmd_witness(io: &IoArgs, bounded: Option<f64>) -> CliResult<()> {
    if let Some(b) = bounded {
        let w = crate::witness::effective_witness_for_bounded(b)?;
        let text = match io.format {
            Format::Json => to_json(&w),
            Format::Csv => csv_table(&["u", "c"], [vec![fmt_f64(w.u), fmt_f64(w.c)]]),
        };
        return write_out(io.out.as_deref(), &text);
    }

    let cfg: WitnessConfig = load(io)?;
    let sources = [
        cfg.distribution.is_some(),
        cfg.class.is_some(),
        cfg.problem.is_some(),
    ];
    if sources.iter().filter(|s| **s).count() != 1 {
        return Err(CliError::Config(
            "give exactly one of `distribution`, `class`, `problem`".into(),
        ));
    }
    let dists = if let Some(d) = cfg.distribution {
        vec![d]
    } else if let Some(p) = cfg.problem {
        p.excess_loss_distributions()
    } else {
        nonempty(cfg.class.unwrap_or_default(), "class")?
    };
    if let Some(c) = cfg.c {
        WitnessParams::new(cfg.u, c)?;
    }
    let certificates = dists
        .iter()
        .map(|d| witness_exact(d, cfg.u))
        .collect::<crate::error::Result<Vec<_>>>()?;
    let class = min_c_over_class(&dists, cfg.u)?;
    let holds = match (cfg.c, class.c()) {
        (_, None) => false,
        (Some(want), Some(have)) => have >= want,
        (None, Some(_)) => true,
    };
    let report = WitnessReport {
        u: cfg.u,
        c: cfg.c,
        certificates,
        class,
        holds,
    };

    let text = match io.format {
        Format::Json => to_json(&report),
        Format::Csv => csv_table(
            &[
                "index",
                "u",
                "witnessed_mean",
                "mean",
                "ratio",
                "zero_mean",
                "holds_for_c",
            ],
            report.certificates.iter().enumerate().map(|(i, c)| {
                vec![
                    i.to_string(),
                    fmt_f64(c.u),
                    fmt_f64(c.witnessed_mean),
                    fmt_f64(c.mean),
                    fmt_opt(c.ratio),
                    c.zero_mean.to_string(),
                    fmt_opt(c.holds_for_c),
                ]
            }),
        ),
    };
    write_out(io.out.as_deref(), &text)?;
    if holds {
        return Ok(());
    }
    Err(CliError::Check(match class {
        ClassWitness::Fails { index, ratio } => match ratio {
            Some(r) => format!("witness condition fails for distribution {index}, ratio {r}"),
            None => format!("witness condition fails for distribution {index} (zero mean, negative witnessed part)"),
        },
        ClassWitness::Holds { c } => format!("witness condition holds only for c <= {c}"),
    }))
}

fn resolve_mode(mode: ModeConfig, seed: Option<u64>) -> CliResult<SamplingMode> {
    match mode {
        ModeConfig::Exact => Ok(SamplingMode::Exact),
        ModeConfig::MonteCarlo {
            replications,
            seed: cfg_seed,
        } => {
            let seed = seed
                .or(cfg_seed)
                .ok_or_else(|| CliError::Config("monte_carlo mode needs a seed".into()))?;
            if replications == 0 {
                return Err(CliError::Config("replications must be positive".into()));
            }
            Ok(SamplingMode::MonteCarlo { replications, seed })
        }
    }
}

pub fn cmd_simulate(
    io: &IoArgs,
    n: Option<u64>,
    delta: Option<f64>,
    seed: Option<u64>,
) -> CliResult<()> {
    let cfg: SimulateConfig = load(io)?;
    let problem = match (cfg.problem, cfg.bundled) {
        (Some(p), None) => p,
        (None, Some(name)) => {
            bundled_problem(&name)
                .ok_or_else(|| CliError::Config(format!("no bundled problem named `{name}`")))?
                .problem
        }
        _ => {
            return Err(CliError::Config(
                "give exactly one of `problem`, `bundled`".into(),
            ))
        }
    };
    let n = n.unwrap_or(cfg.n);
    let deltas = nonempty(
        delta
            .map(|d| vec![d])
            .unwrap_or_else(|| cfg.delta.into_vec()),
        "delta",
    )?;
    let mode = resolve_mode(cfg.mode, seed)?;
    let phis = if cfg.phis.is_empty() {
        PhiTransform::zoo().to_vec()
    } else {
        cfg.phis
    };
    let eps = cfg.eps;
    let w = cfg.witness;

    let output = with_threads(threads_from_env(), || -> CliResult<SimulateOutput> {
        let exec = Execution::default();
        let report = validate_expectation_bound_with(&problem, n, &w, &deltas, mode, exec)?;
        let markov = if eps.is_empty() {
            None
        } else {
            let d = excess_risk_distribution(&problem, n, mode, exec)?;
            Some(validate_markov(&d, &phis, &eps)?)
        };
        Ok(SimulateOutput { report, markov })
    })?;

    match io.format {
        Format::Json => write_out(io.out.as_deref(), &to_json(&output))?,
        Format::Csv => {
            let main = simulate_csv(&output.report);
            match (&output.markov, io.out.as_deref()) {
                (None, out) => write_out(out, &main)?,
                (Some(m), None) => write_out(None, &format!("{main}\n{}", markov_csv(m)))?,
                (Some(m), Some(out)) => {
                    write_out(Some(out), &main)?;
                    write_out(Some(&out.with_extension("markov.csv")), &markov_csv(m))?;
                }
            }
        }
    }

    let r = &output.report;
    if !r.premise.holds {
        eprintln!(
            "witness premise fails at (u, c) = ({}, {}); bound not asserted",
            w.u, w.c
        );
    } else if !r.all_pass {
        return Err(CliError::Check(
            "expectation bound or proof chain violated".into(),
        ));
    }
    if let Some(m) = &output.markov {
        if m.violations > 0 {
            return Err(CliError::Check(format!(
                "{} Markov tail violations",
                m.violations
            )));
        }
    }
    Ok(())
}

fn simulate_csv(r: &SimulationReport) -> String {
    csv_table(
        &[
            "delta",
            "epsilon_hat",
            "tail_probability",
            "effective_u",
            "bound",
            "expectation",
            "verdict",
            "chain_ok",
            "mean_excess_loss",
            "witnessed",
            "witnessed_split",
            "witnessed_split_sum",
            "capped",
            "tail_mixture",
        ],
        r.bound_checks.iter().map(|b| {
            vec![
                fmt_f64(b.delta),
                fmt_f64(b.epsilon_hat),
                fmt_f64(b.tail_probability),
                fmt_f64(b.effective_u),
                fmt_f64(b.bound),
                fmt_f64(b.expectation),
                method_name(&b.verdict),
                b.chain_ok.to_string(),
                fmt_f64(b.chain.mean_excess_loss),
                fmt_f64(b.chain.witnessed),
                fmt_f64(b.chain.witnessed_split),
                fmt_f64(b.chain.witnessed_split_sum),
                fmt_f64(b.chain.capped),
                fmt_f64(b.chain.tail_mixture),
            ]
        }),
    )
}

fn markov_csv(m: &MarkovReport) -> String {
    csv_table(
        &["phi", "eps", "tail", "phi_mean", "bound", "holds"],
        m.rows.iter().map(|r| {
            vec![
                r.phi.name(),
                fmt_f64(r.check.eps),
                fmt_f64(r.check.tail),
                fmt_f64(r.check.phi_mean),
                fmt_f64(r.check.bound),
                r.check.holds.to_string(),
            ]
        }),
    )
}

pub fn cmd_rates(io: &IoArgs, delta: Option<f64>) -> CliResult<()> {
    let cfg: RatesConfig = load(io)?;
    let ns = nonempty(cfg.n, "n")?;
    let rows = rows_for(&cfg.guarantee, &cfg.witness, &ns, delta)?;
    let report = RatesReport {
        slope: rate_slope(&rows),
        rows,
    };
    let text = match io.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut t = rate_rows_csv(&report.rows);
            if let Some(s) = report.slope {
                t.push_str(&format!("# slope {}\n", fmt_f64(s)));
            }
            t
        }
    };
    write_out(io.out.as_deref(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_cells_round_trip() {
        for &x in &[0.1, 1.0 / 3.0, 2f64.sqrt(), 1e-300, 6.02e23, -0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn one_or_many() {
        let one: OneOrMany<u64> = serde_json::from_str("5").unwrap();
        let many: OneOrMany<u64> = serde_json::from_str("[1,2]").unwrap();
        assert_eq!(one.into_vec(), vec![5]);
        assert_eq!(many.into_vec(), vec![1, 2]);
    }

    #[test]
    fn seed_is_mandatory_for_monte_carlo() {
        let m: ModeConfig =
            serde_json::from_str(r#"{"kind":"monte_carlo","replications":10}"#).unwrap();
        assert!(matches!(
            resolve_mode(m.clone(), None),
            Err(CliError::Config(_))
        ));
        assert_eq!(
            resolve_mode(m, Some(3)).unwrap(),
            SamplingMode::MonteCarlo {
                replications: 10,
                seed: 3
            }
        );
        let e: ModeConfig = serde_json::from_str(r#"{"kind":"exact"}"#).unwrap();
        assert_eq!(resolve_mode(e, None).unwrap(), SamplingMode::Exact);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(
            CliError::Domain(BoundError::SampleSizeTooSmall(0)).exit_code(),
            3
        );
        assert_eq!(CliError::Check(String::new()).exit_code(), 1);
    }
}
