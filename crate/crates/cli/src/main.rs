use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use gmi_core::alpha::{select_alpha, DensityBounds, GTildeForm, RateConstants};
use gmi_core::baselines::{kde_gmi, mc_true_gmi, KdeConfig, TruthOracle};
use gmi_core::divergence::run_property_suite;
use gmi_core::fr::{estimate_gmi_with, EstimateOptions};
use gmi_core::mst::{build_mst, MstBackend, Points};
use gmi_core::samples::{load_csv, load_points_csv, ShuffleMode, SplitShuffleConfig};
use gmi_core::sweep::{run_sweep, SweepPlan};

/// Geometric mutual information: FR estimator, baselines, analytic checks
/// and the alpha selector.
#[derive(Debug, Parser)]
#[command(name = "gmi", version)]
struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output format. Defaults to json, except csv for `simulate` and `mst`.
    #[arg(long, global = true, value_enum)]
    output: Option<Format>,

    /// Suppress diagnostics on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Shuffle {
    /// Random permutation of the shuffled half's y-blocks.
    Perm,
    /// Independent with-replacement draws of x- and y-blocks.
    Indep,
}

impl From<Shuffle> for ShuffleMode {
    fn from(s: Shuffle) -> Self {
        match s {
            Shuffle::Perm => ShuffleMode::Permutation,
            Shuffle::Indep => ShuffleMode::IndependentDraw,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Backend {
    Auto,
    Quadratic,
    Dualtree,
}

impl Backend {
    fn resolve(self, cutoff: usize) -> MstBackend {
        match self {
            Backend::Auto => MstBackend::Auto {
                cutoff,
                max_dim: MstBackend::DEFAULT_MAX_DIM,
            },
            Backend::Quadratic => MstBackend::Quadratic,
            Backend::Dualtree => MstBackend::DualTree,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Form {
    Simplified,
    Direct,
}

#[derive(Debug, Args)]
struct SampleInput {
    /// CSV file, one sample per line: dx x-columns then dy y-columns.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    dx: usize,
    #[arg(long)]
    dy: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// FR estimate of I_alpha from a paired sample.
    Estimate {
        #[command(flatten)]
        sample: SampleInput,
        /// Fraction of the sample kept unshuffled (also the p of I_p).
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "perm")]
        shuffle: Shuffle,
        /// Truncate the estimate into [0, 1].
        #[arg(long)]
        clamp: bool,
        #[arg(long, value_enum, default_value = "auto")]
        backend: Backend,
        /// Auto backend switches to the dual-tree MST above this size.
        #[arg(long, default_value_t = MstBackend::DEFAULT_CUTOFF)]
        mst_cutoff: usize,
    },
    /// KDE plug-in estimate of I_p.
    BaselineKde {
        #[command(flatten)]
        sample: SampleInput,
        #[arg(long, visible_alias = "alpha", default_value_t = 0.5)]
        p: f64,
        /// Gaussian kernel bandwidth; default n^(-1/(d+1)).
        #[arg(long)]
        bandwidth: Option<f64>,
        /// Evaluate each density at a point without that point's own kernel.
        #[arg(long)]
        leave_one_out: bool,
    },
    /// Monte-Carlo I_p of an equicorrelated Gaussian.
    Truth {
        #[arg(long, default_value_t = 1)]
        dx: usize,
        #[arg(long, default_value_t = 1)]
        dy: usize,
        /// Common pairwise correlation.
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        #[arg(long, visible_alias = "alpha", default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
    },
    /// Minimax alpha from density bounds.
    Alpha(AlphaArgs),
    /// Random-instance checks of the HP divergence and GMI inequalities.
    Analytic {
        /// Instances per property.
        #[arg(long, default_value_t = 1000)]
        sweeps: usize,
    },
    /// Run an experiment grid described by a plan file.
    Simulate {
        #[arg(long)]
        plan: PathBuf,
    },
    /// Euclidean MST of a point CSV, as edges i,j,w.
    Mst {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        backend: Backend,
        #[arg(long, default_value_t = MstBackend::DEFAULT_CUTOFF)]
        mst_cutoff: usize,
    },
}

#[derive(Debug, Args)]
struct AlphaArgs {
    /// Lower bound of the joint density.
    #[arg(long)]
    cl_xy: f64,
    /// Upper bound of the joint density.
    #[arg(long)]
    cu_xy: f64,
    #[arg(long)]
    cl_x: f64,
    #[arg(long)]
    cu_x: f64,
    #[arg(long)]
    cl_y: f64,
    #[arg(long)]
    cu_y: f64,
    /// Hölder smoothness, in (0, 1].
    #[arg(long)]
    eta: f64,
    /// Total dimension dx + dy.
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    /// Support volume.
    #[arg(long, default_value_t = 1.0)]
    volume: f64,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    c_prime: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    c_dprime: Option<f64>,
    #[arg(long)]
    c1_prime: Option<f64>,
    /// MST degree constant; default is the kissing number bound for d.
    #[arg(long)]
    c_d: Option<f64>,
    #[arg(long, value_enum, default_value = "simplified")]
    form: Form,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] gmi_core::Error),
    #[error("writing output: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_input_error() => 2,
            _ => 1,
        }
    }
}

struct Ctx {
    seed: u64,
    seed_given: bool,
    format: Option<Format>,
    quiet: bool,
}

impl Ctx {
    fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("gmi: {msg}");
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

/// Writes a one-row CSV from a flat JSON object.
fn print_csv_row(fields: &[(&str, serde_json::Value)]) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    let header: Vec<&str> = fields.iter().map(|f| f.0).collect();
    writeln!(out, "{}", header.join(","))?;
    let row: Vec<String> = fields
        .iter()
        .map(|(_, v)| match v {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Null => String::new(),
            other => other.to_string(),
        })
        .collect();
    writeln!(out, "{}", row.join(","))?;
    Ok(())
}

fn emit(ctx: &Ctx, fields: Vec<(&str, serde_json::Value)>) -> Result<(), CliError> {
    match ctx.format(Format::Json) {
        Format::Json => print_json(&fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect::<serde_json::Map<_, _>>()),
        Format::Csv => print_csv_row(&fields),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx {
        seed: cli.seed.unwrap_or(0),
        seed_given: cli.seed.is_some(),
        format: cli.output,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Estimate {
            sample,
            alpha,
            shuffle,
            clamp,
            backend,
            mst_cutoff,
        } => {
            let data = load_csv(&sample.input, sample.dx, sample.dy)?;
            let cfg = SplitShuffleConfig::new(alpha, ctx.seed).with_mode(shuffle.into());
            let opts = EstimateOptions {
                clamp,
                backend: backend.resolve(mst_cutoff),
            };
            let est = estimate_gmi_with(&data, &cfg, &opts)?;
            emit(
                &ctx,
                vec![
                    ("value", json!(est.value)),
                    ("r", json!(est.r)),
                    ("n_prime", json!(est.n_prime)),
                    ("n_dprime", json!(est.n_dprime)),
                    ("alpha", json!(est.alpha)),
                    ("seed", json!(est.seed)),
                ],
            )
        }
        Command::BaselineKde {
            sample,
            p,
            bandwidth,
            leave_one_out,
        } => {
            let data = load_csv(&sample.input, sample.dx, sample.dy)?;
            let cfg = KdeConfig {
                bandwidth,
                leave_one_out,
            };
            let h = cfg.bandwidth_for(data.n(), data.dim())?;
            let value = kde_gmi(&data, p, &cfg)?;
            emit(
                &ctx,
                vec![
                    ("value", json!(value)),
                    ("p", json!(p)),
                    ("bandwidth", json!(h)),
                    ("n", json!(data.n())),
                    ("leave_one_out", json!(leave_one_out)),
                ],
            )
        }
        Command::Truth {
            dx,
            dy,
            rho,
            p,
            mc_samples,
        } => {
            let oracle = TruthOracle {
                dx,
                dy,
                rho,
                p,
                mc_samples,
                seed: ctx.seed,
            };
            let t = mc_true_gmi(&oracle)?;
            emit(
                &ctx,
                vec![
                    ("value", json!(t.value)),
                    ("std_error", json!(t.std_error)),
                    ("rho", json!(rho)),
                    ("p", json!(p)),
                    ("mc_samples", json!(mc_samples)),
                    ("seed", json!(ctx.seed)),
                ],
            )
        }
        Command::Alpha(a) => run_alpha(&ctx, a),
        Command::Analytic { sweeps } => {
            let report = run_property_suite(sweeps, ctx.seed)?;
            for check in report.checks.iter().filter(|c| !c.passed()) {
                ctx.note(&format!(
                    "{}: {} violations in {} instances (worst excess {:.3e})",
                    check.name, check.violations, check.instances, check.worst_excess
                ));
            }
            match ctx.format(Format::Json) {
                Format::Json => print_json(&report),
                Format::Csv => {
                    let mut out = io::stdout().lock();
                    writeln!(out, "property,instances,violations,worst_excess,passed")?;
                    for c in &report.checks {
                        writeln!(
                            out,
                            "{},{},{},{},{}",
                            c.name,
                            c.instances,
                            c.violations,
                            c.worst_excess,
                            c.passed()
                        )?;
                    }
                    Ok(())
                }
            }
        }
        Command::Simulate { plan } => {
            let mut plan = SweepPlan::from_file(&plan)?;
            if ctx.seed_given {
                plan.seed = ctx.seed;
            }
            let result = run_sweep(&plan)?;
            for r in &result.records {
                if let Some(reason) = &r.skipped {
                    let c = &r.cell;
                    ctx.note(&format!(
                        "skipped {} d={} n={} rho={} alpha={}: {reason}",
                        c.estimator, c.d, c.n, c.rho, c.alpha
                    ));
                }
            }
            match ctx.format(Format::Csv) {
                Format::Json => print_json(&result),
                Format::Csv => Ok(result.write_csv(io::stdout().lock())?),
            }
        }
        Command::Mst {
            input,
            backend,
            mst_cutoff,
        } => {
            let (values, dim) = load_points_csv(&input)?;
            let points = Points::new(&values, dim)?;
            let tree = build_mst(&points, backend.resolve(mst_cutoff))?;
            match ctx.format(Format::Csv) {
                Format::Json => print_json(&tree),
                Format::Csv => {
                    let mut out = io::BufWriter::new(io::stdout().lock());
                    writeln!(out, "i,j,w")?;
                    for e in &tree.edges {
                        writeln!(out, "{},{},{}", e.i, e.j, e.w)?;
                    }
                    out.flush()?;
                    Ok(())
                }
            }
        }
    }
}

fn run_alpha(ctx: &Ctx, a: AlphaArgs) -> Result<(), CliError> {
    let bounds = DensityBounds {
        cl_xy: a.cl_xy,
        cu_xy: a.cu_xy,
        cl_x: a.cl_x,
        cu_x: a.cu_x,
        cl_y: a.cl_y,
        cu_y: a.cu_y,
        eta: a.eta,
        d: a.d,
        volume: a.volume,
        n: a.n,
    };
    if a.d == 0 {
        return Err(CliError::Usage("--d must be positive".into()));
    }
    let mut consts = RateConstants::defaults(a.d);
    let overrides = [
        (&mut consts.c, a.c),
        (&mut consts.c_prime, a.c_prime),
        (&mut consts.c1, a.c1),
        (&mut consts.c2, a.c2),
        (&mut consts.c_dprime, a.c_dprime),
        (&mut consts.c1_prime, a.c1_prime),
        (&mut consts.c_d, a.c_d),
    ];
    for (slot, value) in overrides {
        if let Some(v) = value {
            *slot = v;
        }
    }
    let form = match a.form {
        Form::Simplified => GTildeForm::Simplified,
        Form::Direct => GTildeForm::Direct,
    };
    let sol = select_alpha(&bounds, &consts, form)?;
    if let Some(w) = &sol.warning {
        ctx.note(w);
    }
    let case = serde_json::to_value(sol.case).map_err(io::Error::from)?;
    let form = serde_json::to_value(sol.form).map_err(io::Error::from)?;
    match ctx.format(Format::Json) {
        Format::Json => print_json(&json!({
            "alpha_tilde": sol.alpha_tilde,
            "case": case,
            "interval": [sol.alpha_lo, sol.alpha_hi],
            "xi_endpoints": [sol.xi_lo, sol.xi_hi],
            "form": form,
        })),
        Format::Csv => print_csv_row(&[
            ("alpha_tilde", json!(sol.alpha_tilde)),
            ("case", case),
            ("alpha_lo", json!(sol.alpha_lo)),
            ("alpha_hi", json!(sol.alpha_hi)),
            ("xi_lo", json!(sol.xi_lo)),
            ("xi_hi", json!(sol.xi_hi)),
            ("form", form),
        ]),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gmi: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
