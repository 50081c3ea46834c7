use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fastrate_core::audit::audit_main_theorem;
use fastrate_core::bernstein::{best_B, linearized_margin};
use fastrate_core::bounds::{
    baseline_mi, baseline_pb, cmi_bound, eta_cap, inexpect_bound, inprob_bound, main_bound, BoundConstants, BoundInputs,
};
use fastrate_core::cmi::{cmi, CmiMode};
use fastrate_core::esi::{esi_exact, esi_mc, FiniteRealDistribution};
use fastrate_core::experiment::{
    run_gibbs_experiment, run_rate_experiment, BernsteinSource, ExperimentConfig, GibbsConfig, KlSource,
};
use fastrate_core::learners::{OrderedErm, ThresholdErm};
use fastrate_core::lemma::{c_const, lemma1_sweep, optimal_constant, CRule, Region};
use fastrate_core::plot::{read_rate_csv, render_svg, rate_series, write_rate_csv};
use fastrate_core::priors::{expected_kl_ghost, EnumerationPrior, GhostMode};
use fastrate_core::problem::ProblemSpec;
use fastrate_core::seed::rng_for;
use fastrate_core::{DeterministicAlgorithm, Error, LearningProblem, Sample};

#[derive(Parser)]
#[command(name = "fastrate", version, about = "Fast-rate generalization bound toolkit for finite learning problems")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout if omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustive grid check of the two-point exponential inequality.
    LemmaSweep(LemmaSweepArgs),
    /// The constants C_{A,η} and, given B, η_max.
    Constants(ConstantsArgs),
    /// Exact or Monte-Carlo check of E[exp(η g)] ≤ 1 for a finite law.
    EsiCheck(EsiArgs),
    /// Best Bernstein constant B for each β, and the linearized margin.
    Bernstein(BernsteinArgs),
    /// Expected ghost KL of ERM against the enumeration prior, or the brute-force theorem audit.
    KlAudit(KlAuditArgs),
    /// Conditional mutual information of ERM.
    Cmi(CmiArgs),
    /// Evaluate one bound form.
    Bound(BoundArgs),
    /// ERM rate experiment on label-noise thresholds.
    RateExp(RateArgs),
    /// Gibbs posterior with a compression prior.
    GibbsExp(GibbsArgs),
    /// Log-log SVG from a rate-experiment CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct LemmaSweepArgs {
    #[arg(long, default_value_t = 0.01)]
    r_step: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.1, 0.2, 0.25])]
    etas: Vec<f64>,
    /// Use the closed-form C_{A,η} with this A.
    #[arg(long, default_value_t = 2.0, conflicts_with = "c")]
    a: f64,
    /// Use a fixed C instead.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, value_enum, default_value_t = RegionArg::General)]
    region: RegionArg,
    /// Report the brute-force smallest C per η instead.
    #[arg(long)]
    optimal: bool,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegionArg {
    General,
    SameSign,
    Antipodal,
}

impl From<RegionArg> for Region {
    fn from(r: RegionArg) -> Self {
        match r {
            RegionArg::General => Region::General,
            RegionArg::SameSign => Region::SameSign,
            RegionArg::Antipodal => Region::Antipodal,
        }
    }
}

#[derive(Args)]
struct ConstantsArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [2.0])]
    a: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.25])]
    etas: Vec<f64>,
    /// Bernstein constant; adds η_max.
    #[arg(long = "B")]
    b: Option<f64>,
}

#[derive(Args)]
struct EsiArgs {
    /// Law of g as `value:prob,value:prob,...`.
    #[arg(long, allow_hyphen_values = true)]
    dist: String,
    #[arg(long, value_delimiter = ',', required = true)]
    etas: Vec<f64>,
    /// Monte-Carlo sample count (exact if omitted).
    #[arg(long)]
    mc: Option<usize>,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// JSON problem document; overrides the threshold flags.
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    lo: i64,
    #[arg(long, default_value_t = 10)]
    hi: i64,
    #[arg(long, default_value_t = 5)]
    t_star: i64,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
}

impl ProblemArgs {
    fn build(&self) -> Result<LearningProblem> {
        match &self.problem {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(Error::from).with_context(|| format!("reading {}", path.display()))?;
                Ok(ProblemSpec::from_json(&text)?.build()?)
            }
            None => Ok(LearningProblem::uniform_thresholds(self.lo, self.hi, self.t_star, self.p)?),
        }
    }
}

#[derive(Args)]
struct BernsteinArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0])]
    beta: Vec<f64>,
    /// Rate as a fraction of 1/(2 B C_{1/4}) for the linearized margin.
    #[arg(long, default_value_t = 0.9)]
    eta_frac: f64,
}

#[derive(Args)]
struct KlAuditArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Monte-Carlo ghost samples per trial (exact if omitted).
    #[arg(long)]
    ghosts: Option<usize>,
    /// Enumerate every training sample and check the main ESI instead.
    #[arg(long)]
    theorem: bool,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0])]
    beta: Vec<f64>,
}

#[derive(Args)]
struct CmiArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Monte-Carlo supersample budget (exact if omitted).
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FormArg {
    Main,
    Inprob,
    Inexpect,
    Cmi,
    BaselinePb,
    BaselineMi,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, value_enum)]
    form: FormArg,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long = "B", default_value_t = 1.0)]
    b: f64,
    /// Expected KL (or CMI / MI for those forms), in nats.
    #[arg(long)]
    kl: f64,
    #[arg(long, default_value_t = 0.0)]
    emp_excess: f64,
    /// Rate for the main form (default: the largest admissible).
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Empirical loss for the PAC-Bayes baseline.
    #[arg(long, default_value_t = 0.0)]
    emp_loss: f64,
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 1)]
    lo: i64,
    #[arg(long, default_value_t = 10)]
    hi: i64,
    #[arg(long, default_value_t = 5)]
    t_star: i64,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// Sample sizes (default 2^4..2^14).
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<u64>>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// User β (requires --B); otherwise β = 1 certified.
    #[arg(long, requires = "b")]
    beta: Option<f64>,
    #[arg(long = "B", requires = "beta")]
    b: Option<f64>,
    #[arg(long, value_enum, default_value_t = KlArg::SauerCap)]
    kl: KlArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum KlArg {
    SauerCap,
    Enumeration,
}

impl ExperimentArgs {
    fn config(&self, seed: u64) -> ExperimentConfig {
        let d = ExperimentConfig::default();
        ExperimentConfig {
            x_lo: self.lo,
            x_hi: self.hi,
            t_star: self.t_star,
            noise_p: self.p,
            ns: self.ns.clone().unwrap_or(d.ns),
            trials: self.trials,
            delta: self.delta,
            bernstein: match (self.beta, self.b) {
                (Some(beta), Some(b)) => BernsteinSource::User { beta, b },
                _ => BernsteinSource::Certified,
            },
            kl: match self.kl {
                KlArg::SauerCap => KlSource::SauerCap,
                KlArg::Enumeration => KlSource::Enumeration,
            },
            seed,
        }
    }
}

#[derive(Args)]
struct RateArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Also write the per-n summary and fitted slopes as JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct GibbsArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    eta_hat: f64,
}

#[derive(Args)]
struct PlotArgs {
    /// Rate-experiment CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "bound rates vs n")]
    title: String,
}

/// ERM matching the class: threshold scan or first minimizer in class order.
enum Erm {
    Threshold(ThresholdErm),
    Ordered(OrderedErm),
}

impl Erm {
    fn for_problem(p: &LearningProblem) -> Result<Self> {
        Ok(match p.class().threshold_max() {
            Some(_) => Erm::Threshold(ThresholdErm::for_class(p.class())?),
            None => Erm::Ordered(OrderedErm::new(p.class().clone())),
        })
    }
}

impl DeterministicAlgorithm for Erm {
    fn hypothesis(&self, z: &Sample) -> usize {
        match self {
            Erm::Threshold(a) => a.hypothesis(z),
            Erm::Ordered(a) => a.hypothesis(z),
        }
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(Error::from).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_csv<T: Serialize>(out: &Option<PathBuf>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink(out)?);
    for r in rows {
        w.serialize(r).map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn parse_dist(text: &str) -> Result<FiniteRealDistribution> {
    let atoms = text
        .split(',')
        .map(|pair| {
            let (v, p) = pair
                .split_once(':')
                .ok_or_else(|| Error::InvalidInput(format!("atom {pair:?} is not value:prob")))?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("{s:?}: {e}")));
            Ok((parse(v)?, parse(p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FiniteRealDistribution::new(atoms)?)
}

#[derive(Serialize)]
struct OptimalRow {
    eta: f64,
    optimal_c: Option<f64>,
    closed_c: Option<f64>,
}

#[derive(Serialize)]
struct ConstantRow {
    a: f64,
    eta: f64,
    c_const: Option<f64>,
    #[serde(rename = "B")]
    b: Option<f64>,
    eta_max: Option<f64>,
}

#[derive(Serialize)]
struct BernsteinRow {
    beta: f64,
    #[serde(rename = "B")]
    b: f64,
    valid: bool,
    witnessed_by: Option<usize>,
    violated_by: Option<usize>,
    eta: Option<f64>,
    min_linearized_margin: Option<f64>,
}

#[derive(Serialize)]
struct GhostRow {
    trial: usize,
    n: usize,
    expected_kl: f64,
    std_error: f64,
    exact: bool,
    ln_2n: f64,
    within_cap: bool,
}

#[derive(Serialize)]
struct CmiRow {
    n: usize,
    value: f64,
    exact: bool,
    std_error: f64,
    supersamples_used: u64,
    ln_2n: f64,
}

#[derive(Serialize)]
struct BoundRow {
    form: FormArg,
    excess_term: Option<f64>,
    complexity_term: Option<f64>,
    remainder_term: Option<f64>,
    total: f64,
    eta_max: Option<f64>,
}

fn run(cli: Cli) -> Result<()> {
    let Format::Csv = cli.format;
    let out = &cli.out;
    match cli.command {
        Command::LemmaSweep(a) => {
            let region = Region::from(a.region);
            if a.optimal {
                let rows = a
                    .etas
                    .iter()
                    .map(|&eta| {
                        Ok(OptimalRow {
                            eta,
                            optimal_c: optimal_constant(eta, a.r_step, a.tol, region)?.value(),
                            closed_c: c_const(2.0, eta).ok(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                write_csv(out, &rows)
            } else {
                let rule = a.c.map_or(CRule::Closed { a: a.a }, CRule::Fixed);
                write_csv(out, &lemma1_sweep(a.r_step, &a.etas, rule, region)?.rows)
            }
        }
        Command::Constants(a) => {
            let eta_max = a.b.map(|b| BoundConstants::new(b).map(|k| k.eta_max)).transpose()?;
            let rows: Vec<ConstantRow> = a
                .a
                .iter()
                .flat_map(|&av| a.etas.iter().map(move |&eta| (av, eta)))
                .map(|(av, eta)| ConstantRow { a: av, eta, c_const: c_const(av, eta).ok(), b: a.b, eta_max })
                .collect();
            write_csv(out, &rows)
        }
        Command::EsiCheck(a) => {
            let g = parse_dist(&a.dist)?;
            let rows = a
                .etas
                .iter()
                .map(|&eta| match a.mc {
                    None => Ok(esi_exact(&g, eta)?),
                    Some(m) => {
                        let sampler = |rng: &mut fastrate_core::seed::Rng| {
                            let u: f64 = rand_uniform(rng);
                            let mut acc = 0.0;
                            for &(v, p) in g.atoms() {
                                acc += p;
                                if u < acc {
                                    return v;
                                }
                            }
                            g.max()
                        };
                        Ok(esi_mc(sampler, g.min(), g.max(), eta, m, cli.seed)?)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            write_csv(out, &rows)
        }
        Command::Bernstein(a) => {
            let p = a.problem.build()?;
            let rows = a
                .beta
                .iter()
                .map(|&beta| {
                    let cert = best_B(&p, beta)?;
                    let (eta, margin) = if cert.is_valid() {
                        let k = BoundConstants::new(cert.b)?;
                        let eta = a.eta_frac / (2.0 * cert.b * k.c_quarter);
                        let m = (0..p.class().len())
                            .map(|f| linearized_margin(&p, f, k.c_quarter, eta, beta, cert.b))
                            .collect::<fastrate_core::Result<Vec<f64>>>()?
                            .into_iter()
                            .fold(f64::INFINITY, f64::min);
                        (Some(eta), Some(m))
                    } else {
                        (None, None)
                    };
                    Ok(BernsteinRow {
                        beta,
                        b: cert.b,
                        valid: cert.is_valid(),
                        witnessed_by: cert.witnessed_by,
                        violated_by: cert.violated_by,
                        eta,
                        min_linearized_margin: margin,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            write_csv(out, &rows)
        }
        Command::KlAudit(a) => {
            let p = a.problem.build()?;
            let erm = Erm::for_problem(&p)?;
            if a.theorem {
                let mut rows = Vec::new();
                for &beta in &a.beta {
                    rows.extend(audit_main_theorem(&p, &erm, a.n, beta, None)?);
                }
                return write_csv(out, &rows);
            }
            if a.n == 0 || a.trials == 0 {
                return Err(Error::InvalidInput("need n >= 1 and trials >= 1".into()).into());
            }
            let prior = EnumerationPrior { alg: &erm };
            let ln2n = (2.0 * a.n as f64).ln();
            let rows = (0..a.trials)
                .map(|t| {
                    let mut rng = rng_for(cli.seed, &[a.n as u64, t as u64]);
                    let z0 = p.distribution().draw_sample(a.n, &mut rng)?;
                    let mode = match a.ghosts {
                        None => GhostMode::Exact,
                        Some(g) => GhostMode::MonteCarlo { ghosts: g, seed: fastrate_core::seed::derive_seed(cli.seed, &[t as u64]) },
                    };
                    let r = expected_kl_ghost(&erm, &prior, &z0, p.distribution(), mode)?;
                    Ok(GhostRow {
                        trial: t,
                        n: a.n,
                        expected_kl: r.value,
                        std_error: r.std_error,
                        exact: r.exact,
                        ln_2n: ln2n,
                        within_cap: r.value <= ln2n + 1e-12,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            write_csv(out, &rows)
        }
        Command::Cmi(a) => {
            let p = a.problem.build()?;
            let erm = Erm::for_problem(&p)?;
            let mode = match a.budget {
                None => CmiMode::Exact,
                Some(budget) => CmiMode::MonteCarlo { budget, seed: cli.seed },
            };
            let e = cmi(&erm, p.distribution(), a.n, mode)?;
            write_csv(
                out,
                &[CmiRow {
                    n: a.n,
                    value: e.value,
                    exact: e.exact,
                    std_error: e.std_error,
                    supersamples_used: e.supersamples_used,
                    ln_2n: (2.0 * a.n as f64).ln(),
                }],
            )
        }
        Command::Bound(a) => {
            let row = match a.form {
                FormArg::BaselinePb => BoundRow::total(a.form, baseline_pb(a.kl, a.n, a.delta, a.emp_loss)?),
                FormArg::BaselineMi => BoundRow::total(a.form, baseline_mi(a.kl, a.n)?),
                form => {
                    let k = BoundConstants::new(a.b)?;
                    let inputs = BoundInputs {
                        n: a.n,
                        beta: a.beta,
                        b: a.b,
                        kl_bar: a.kl,
                        emp_excess: a.emp_excess,
                        eta: Some(a.eta.unwrap_or_else(|| eta_cap(a.n, k.eta_max))),
                        delta: Some(a.delta),
                    };
                    let r = match form {
                        FormArg::Main => main_bound(&inputs),
                        FormArg::Inprob => inprob_bound(&inputs),
                        FormArg::Inexpect => inexpect_bound(&inputs),
                        _ => cmi_bound(&inputs),
                    }?;
                    BoundRow {
                        form,
                        excess_term: Some(r.excess_term),
                        complexity_term: Some(r.complexity_term),
                        remainder_term: Some(r.remainder_term),
                        total: r.total,
                        eta_max: Some(r.eta_max),
                    }
                }
            };
            write_csv(out, &[row])
        }
        Command::RateExp(a) => {
            let (rows, summary) = run_rate_experiment(&a.exp.config(cli.seed))?;
            write_rate_csv(&rows, sink(out)?)?;
            if let Some(path) = a.summary {
                let text = serde_json::to_string_pretty(&summary).map_err(Error::from)?;
                write_file(&path, &text)?;
            }
            Ok(())
        }
        Command::GibbsExp(a) => {
            let cfg = GibbsConfig { base: a.exp.config(cli.seed), k: a.k, eta_hat: a.eta_hat };
            write_csv(out, &run_gibbs_experiment(&cfg)?)
        }
        Command::Plot(a) => {
            let file = File::open(&a.input).map_err(Error::from).with_context(|| format!("opening {}", a.input.display()))?;
            let rows = read_rate_csv(io::BufReader::new(file))?;
            let svg = render_svg(&a.title, &rate_series(&rows));
            let mut w = sink(out)?;
            w.write_all(svg.as_bytes()).map_err(Error::from)?;
            w.flush().map_err(Error::from)?;
            Ok(())
        }
    }
}

impl BoundRow {
    fn total(form: FormArg, total: f64) -> Self {
        Self { form, excess_term: None, complexity_term: None, remainder_term: None, total, eta_max: None }
    }
}

fn rand_uniform(rng: &mut fastrate_core::seed::Rng) -> f64 {
    use rand::Rng as _;
    rng.gen::<f64>()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(Error::from).with_context(|| format!("writing {}", path.display()))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::ResourceLimit(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
