//! Command-line front end: dataset fitting, random variate generation,
//! curve evaluation and AIC/KS model comparison for bounded-support
//! distributions built on the reflected Generalized Topp-Leone Power Series
//! family.

mod data;
mod output;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rgtlps::baselines::{Beta, Kumaraswamy, ToppLeone};
use rgtlps::estimation::{fit_em, FitOptions, FitResult};
use rgtlps::gof::{self, CandidateModel, FittedCandidate, GofReport};
use rgtlps::{open_unit, CompoundModel, PsFamily, RgtlParams};

use data::load_dataset;
use output::{fmt17, write_compare, write_eval_rows, write_fit};

/// Exit codes: 0 success, 1 input/configuration error, 2 numerical
/// non-convergence.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    NonConvergence(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::NonConvergence(_) => 2,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::NonConvergence(m) => m,
        }
    }
}

impl From<rgtlps::Error> for CliError {
    fn from(e: rgtlps::Error) -> Self {
        match e {
            rgtlps::Error::NonConvergence(_) | rgtlps::Error::EmLoglikDecreased { .. } => {
                CliError::NonConvergence(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Ml,
    Em,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Tsv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalWhat {
    Pdf,
    Cdf,
    Hazard,
    Quantile,
}

#[derive(Parser)]
#[command(
    name = "rgtlps",
    version,
    about = "Bounded-support distribution modeling with the rGTL Power Series family"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a dataset of observations in (0, 1).
    Fit {
        /// Path to the data file (one observation per line; comma or
        /// whitespace delimiters; optional header line).
        data: String,
        /// Model: rgtl-log | rgtl-geo | rgtl-poi | rgtl-bin | rgtl | tl |
        /// beta | kumaraswamy.
        #[arg(long)]
        model: String,
        /// Binomial size parameter (rgtl-bin only; fixed, not estimated).
        #[arg(long, default_value_t = 2)]
        m: u32,
        /// Estimation method (EM applies to the compound models only).
        #[arg(long, value_enum, default_value_t = Method::Ml)]
        method: Method,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of low-discrepancy optimizer starts.
        #[arg(long)]
        starts: Option<usize>,
        /// Iteration cap (quasi-Newton steps for ml, cycles for em).
        #[arg(long)]
        max_iter: Option<usize>,
        /// Convergence tolerance on the parameter step.
        #[arg(long)]
        tol: Option<f64>,
        /// Clamp out-of-range observations into [eps, 1-eps] instead of
        /// rejecting them.
        #[arg(long)]
        clamp_eps: Option<f64>,
        /// Parametric-bootstrap replicates for the KS p-value.
        #[arg(long)]
        ks_bootstrap: Option<usize>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
        output_format: OutputFormat,
    },
    /// Draw random variates and write one value per line.
    Sample {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 2)]
        m: u32,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        /// First shape for beta/kumaraswamy.
        #[arg(long)]
        a: Option<f64>,
        /// Second shape for beta/kumaraswamy.
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<String>,
    },
    /// Evaluate pdf/cdf/hazard/quantile curves on a grid.
    Eval {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 2)]
        m: u32,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, value_enum)]
        what: EvalWhat,
        /// Grid start (default 0).
        #[arg(long)]
        grid_start: Option<f64>,
        /// Grid stop (default 1; hazard grids exclude 1).
        #[arg(long)]
        grid_stop: Option<f64>,
        #[arg(long, default_value_t = 101)]
        grid_points: usize,
        #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
        output_format: OutputFormat,
    },
    /// Fit several models and emit a comparison table ranked by AIC.
    Compare {
        data: String,
        /// Comma-separated model list, e.g. rgtl-log,beta,kumaraswamy,tl.
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        #[arg(long, default_value_t = 2)]
        m: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        clamp_eps: Option<f64>,
        #[arg(long)]
        ks_bootstrap: Option<usize>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
        output_format: OutputFormat,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {}", err.message());
        std::process::exit(err.code());
    }
}

fn parse_model(name: &str, m: u32) -> Result<CandidateModel, CliError> {
    Ok(match name {
        "rgtl-log" => CandidateModel::RgtlPs(PsFamily::Logarithmic),
        "rgtl-geo" => CandidateModel::RgtlPs(PsFamily::Geometric),
        "rgtl-poi" => CandidateModel::RgtlPs(PsFamily::Poisson),
        "rgtl-bin" => {
            if m < 1 {
                return Err(CliError::Input("--m must be at least 1".into()));
            }
            CandidateModel::RgtlPs(PsFamily::Binomial { m })
        }
        "rgtl" => CandidateModel::Rgtl,
        "tl" => CandidateModel::ToppLeone,
        "beta" => CandidateModel::Beta,
        "kumaraswamy" | "kw" => CandidateModel::Kumaraswamy,
        other => {
            return Err(CliError::Input(format!(
                "unknown model {other:?}; expected rgtl-log, rgtl-geo, rgtl-poi, rgtl-bin, \
                 rgtl, tl, beta or kumaraswamy"
            )))
        }
    })
}

fn fit_options(
    method: Method,
    seed: u64,
    starts: Option<usize>,
    max_iter: Option<usize>,
    tol: Option<f64>,
) -> FitOptions {
    let base = match method {
        Method::Ml => FitOptions::default(),
        Method::Em => FitOptions::default_em(),
    };
    FitOptions {
        starts: starts.unwrap_or(base.starts),
        max_iter: max_iter.unwrap_or(base.max_iter),
        tol: tol.unwrap_or(base.tol),
        seed,
    }
}

/// A fully specified distribution built from CLI parameter flags.
enum EvalTarget {
    Compound(CompoundModel),
    Rgtl(RgtlParams),
    ToppLeone(ToppLeone),
    Beta(Beta),
    Kumaraswamy(Kumaraswamy),
}

impl EvalTarget {
    fn from_flags(
        model: &str,
        m: u32,
        alpha: Option<f64>,
        nu: Option<f64>,
        theta: Option<f64>,
        a: Option<f64>,
        b: Option<f64>,
    ) -> Result<Self, CliError> {
        let need = |flag: Option<f64>, name: &str| {
            flag.ok_or_else(|| CliError::Input(format!("model {model} requires --{name}")))
        };
        Ok(match parse_model(model, m)? {
            CandidateModel::RgtlPs(family) => {
                let base = RgtlParams::new(need(alpha, "alpha")?, need(nu, "nu")?)?;
                EvalTarget::Compound(CompoundModel::new(base, family, need(theta, "theta")?)?)
            }
            CandidateModel::Rgtl => {
                EvalTarget::Rgtl(RgtlParams::new(need(alpha, "alpha")?, need(nu, "nu")?)?)
            }
            CandidateModel::ToppLeone => EvalTarget::ToppLeone(ToppLeone::new(need(nu, "nu")?)?),
            CandidateModel::Beta => EvalTarget::Beta(Beta::new(need(a, "a")?, need(b, "b")?)?),
            CandidateModel::Kumaraswamy => {
                EvalTarget::Kumaraswamy(Kumaraswamy::new(need(a, "a")?, need(b, "b")?)?)
            }
        })
    }

    fn pdf(&self, y: f64) -> Result<f64, rgtlps::Error> {
        Ok(match self {
            EvalTarget::Compound(d) => d.pdf(y)?,
            EvalTarget::Rgtl(d) => d.pdf(y)?,
            EvalTarget::ToppLeone(d) => d.pdf(y),
            EvalTarget::Beta(d) => d.pdf(y),
            EvalTarget::Kumaraswamy(d) => d.pdf(y),
        })
    }

    fn cdf(&self, y: f64) -> Result<f64, rgtlps::Error> {
        Ok(match self {
            EvalTarget::Compound(d) => d.cdf(y)?,
            EvalTarget::Rgtl(d) => d.cdf(y)?,
            EvalTarget::ToppLeone(d) => d.cdf(y),
            EvalTarget::Beta(d) => d.cdf(y),
            EvalTarget::Kumaraswamy(d) => d.cdf(y),
        })
    }

    fn hazard(&self, y: f64) -> Result<f64, rgtlps::Error> {
        match self {
            EvalTarget::Compound(d) => d.hazard(y),
            EvalTarget::Rgtl(d) => d.hazard(y),
            _ => {
                let survival = 1.0 - self.cdf(y)?;
                if survival <= 0.0 {
                    return Err(rgtlps::Error::Domain(format!(
                        "hazard undefined at y = {y}: survival is zero"
                    )));
                }
                Ok(self.pdf(y)? / survival)
            }
        }
    }

    fn quantile(&self, q: f64) -> Result<f64, rgtlps::Error> {
        Ok(match self {
            EvalTarget::Compound(d) => d.quantile(q)?,
            EvalTarget::Rgtl(d) => d.quantile(q)?,
            EvalTarget::ToppLeone(d) => d.quantile(q),
            EvalTarget::Beta(d) => d.quantile(q)?,
            EvalTarget::Kumaraswamy(d) => d.quantile(q),
        })
    }

    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, rgtlps::Error> {
        match self {
            EvalTarget::Compound(d) => d.sample_inverse(n, rng),
            EvalTarget::Rgtl(d) => (0..n).map(|_| d.quantile(open_unit(rng))).collect(),
            EvalTarget::ToppLeone(d) => Ok(d.sample(n, rng)),
            EvalTarget::Beta(d) => d.sample(n, rng),
            EvalTarget::Kumaraswamy(d) => Ok(d.sample(n, rng)),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit {
            data,
            model,
            m,
            method,
            seed,
            starts,
            max_iter,
            tol,
            clamp_eps,
            ks_bootstrap,
            output_format,
        } => {
            let dataset = load_dataset(&data, clamp_eps)?;
            let candidate = parse_model(&model, m)?;
            let opts = fit_options(method, seed, starts, max_iter, tol);

            let (fitted, fit_result): (FittedCandidate, Option<FitResult>) = match method {
                Method::Em => match candidate {
                    CandidateModel::RgtlPs(family) => {
                        let fit = fit_em(family, &dataset.values, &opts)?;
                        let model = fit.model()?;
                        (FittedCandidate::RgtlPs(model, fit.clone()), Some(fit))
                    }
                    _ => {
                        return Err(CliError::Input(format!(
                            "--method em applies to the compound models only, not {model}"
                        )))
                    }
                },
                Method::Ml => {
                    let fitted = gof::fit_candidate(candidate, &dataset.values, &opts)?;
                    let fit = match &fitted {
                        FittedCandidate::RgtlPs(_, f) => Some(f.clone()),
                        _ => None,
                    };
                    (fitted, fit)
                }
            };

            let mut report = gof::report_for(candidate, &fitted, &dataset.values)?;
            if let Some(b) = ks_bootstrap {
                report.ks_bootstrap_pvalue = Some(gof::ks_bootstrap_pvalue(
                    candidate,
                    &fitted,
                    &dataset.values,
                    b,
                    &opts,
                )?);
            }

            write_fit(output_format, &dataset, &report, fit_result.as_ref())
                .map_err(|e| CliError::Input(format!("cannot write output: {e}")))?;
            if !report.converged {
                return Err(CliError::NonConvergence(format!(
                    "fit of {model} did not converge (see diagnostics above)"
                )));
            }
            Ok(())
        }

        Command::Sample { model, m, alpha, nu, theta, a, b, n, seed, out } => {
            let target = EvalTarget::from_flags(&model, m, alpha, nu, theta, a, b)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draws = target.sample(n, &mut rng)?;
            let mut body = String::with_capacity(draws.len() * 24);
            for d in &draws {
                body.push_str(&fmt17(*d));
                body.push('\n');
            }
            match out {
                Some(path) => std::fs::write(&path, body)
                    .map_err(|e| CliError::Input(format!("cannot write {path}: {e}")))?,
                None => print!("{body}"),
            }
            Ok(())
        }

        Command::Eval {
            model,
            m,
            alpha,
            nu,
            theta,
            a,
            b,
            what,
            grid_start,
            grid_stop,
            grid_points,
            output_format,
        } => {
            let target = EvalTarget::from_flags(&model, m, alpha, nu, theta, a, b)?;
            if grid_points < 2 {
                return Err(CliError::Input("--grid-points must be at least 2".into()));
            }
            let start = grid_start.unwrap_or(0.0);
            let stop = grid_stop.unwrap_or(match what {
                EvalWhat::Hazard => 1.0 - 1e-6,
                _ => 1.0,
            });
            if !(start < stop) {
                return Err(CliError::Input(format!("empty grid [{start}, {stop}]")));
            }
            let mut rows = Vec::with_capacity(grid_points);
            for i in 0..grid_points {
                let x = start + (stop - start) * i as f64 / (grid_points - 1) as f64;
                let value = match what {
                    EvalWhat::Pdf => target.pdf(x),
                    EvalWhat::Cdf => target.cdf(x),
                    EvalWhat::Hazard => target.hazard(x),
                    EvalWhat::Quantile => target.quantile(x),
                }
                .map_err(|e| CliError::Input(format!("row {i} (x = {x}): {e}")))?;
                rows.push((x, value));
            }
            write_eval_rows(output_format, &rows)
                .map_err(|e| CliError::Input(format!("cannot write output: {e}")))?;
            Ok(())
        }

        Command::Compare {
            data,
            models,
            m,
            seed,
            starts,
            max_iter,
            tol,
            clamp_eps,
            ks_bootstrap,
            output_format,
        } => {
            if models.is_empty() {
                return Err(CliError::Input("--models needs at least one entry".into()));
            }
            let dataset = load_dataset(&data, clamp_eps)?;
            let candidates: Vec<CandidateModel> = models
                .iter()
                .map(|name| parse_model(name.trim(), m))
                .collect::<Result<_, _>>()?;
            let opts = fit_options(Method::Ml, seed, starts, max_iter, tol);
            let mut rows = gof::compare_models_detailed(&dataset.values, &candidates, &opts)?;
            if let Some(b) = ks_bootstrap {
                for (candidate, fitted, report) in &mut rows {
                    if let Some(fitted) = fitted {
                        report.ks_bootstrap_pvalue = Some(gof::ks_bootstrap_pvalue(
                            *candidate,
                            fitted,
                            &dataset.values,
                            b,
                            &opts,
                        )?);
                    }
                }
            }
            let reports: Vec<GofReport> = rows.into_iter().map(|(_, _, r)| r).collect();
            write_compare(output_format, &dataset, &reports)
                .map_err(|e| CliError::Input(format!("cannot write output: {e}")))?;
            Ok(())
        }
    }
}
