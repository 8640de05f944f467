//! `xover`: plan, construct, verify, simulate and analyze two-treatment
//! crossover trials for patients seen two or three times a week.
//!
//! Exit codes: 0 success, 1 invalid arguments or input files, 2 the
//! computation itself failed (for example the treatment effect is not
//! estimable from the data).

mod output;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crossover::analysis::{export_residuals, fit_model_with_reference, randomization_test};
use crossover::design_file::{design_to_json, read_design};
use crossover::information::verdict;
use crossover::matrices::{build_a, build_b1, build_b2, write_matrix_csv};
use crossover::planning::{plan_trial, PlanInputs};
use crossover::rng::{substream, RngSeed};
use crossover::simulation::{
    simulate_trial, variance_mc, ErrorModel, MissingnessSpec, ModelParams, PatientEffects, TailLoss,
};
use crossover::{
    construct_design, Error, RandomizationScheme, SequenceWeights, Transform, TrialDataset,
};

use output::{emit, snap, Format};

const AFTER_HELP: &str = "\
File formats:
  Design file (JSON):
    {\"weeks\": 2, \"plans\": [{\"patient_id\": \"P1\", \"sessions_per_week\": 3,
                          \"weeks\": [[\"H\",\"A\",\"H\"], [\"A\",\"H\",\"A\"]]}]}
    sessions_per_week is 3 (Mon, Wed, Fri) or 2 (Mon, Fri). Each week lists one
    treatment per session in day order. An optional \"days\" array must repeat
    those labels.
  Trial data (CSV):
    patient_id,week,day,treatment,y
    Weeks count from 1, day is Mon, Wed or Fri, treatment is A or H, and an
    empty y marks a missed observation.

Exit codes: 0 success, 1 invalid arguments or input, 2 computation failed.";

#[derive(Parser)]
#[command(name = "xover", version, about = "Optimal crossover designs for dialysis-schedule trials", after_help = AFTER_HELP)]
struct Cli {
    /// Output format for reports.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Print progress notes to stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Number of observations and weeks needed to detect a given effect.
    Plan(PlanArgs),
    /// Build a randomized optimal design and write it as a design file.
    Construct(ConstructArgs),
    /// Compute the treatment information of a design and whether it is optimal.
    Verify(VerifyArgs),
    /// Simulate trial data on a design, or the variance of the estimate over many trials.
    Simulate(SimulateArgs),
    /// Fit the model to trial data, with an optional randomization test.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Semi-difference to detect (H minus A is twice this).
    #[arg(long)]
    tau0: f64,
    /// Residual standard deviation.
    #[arg(long)]
    sigma: f64,
    /// Two-sided size of the test.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    power: f64,
    /// Thrice-weekly patients.
    #[arg(long)]
    n3: usize,
    /// Twice-weekly patients.
    #[arg(long)]
    n2: usize,
    /// Round the number of weeks up to an even number.
    #[arg(long)]
    even: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightScheme {
    /// AAA, AAH, AHH, AHA with 0.1, 0.2, 0.2, 0.5; AA, AH with 0.2, 0.8.
    Alternating,
    /// Every base sequence equally likely.
    Uniform,
}

impl WeightScheme {
    fn weights(self) -> SequenceWeights {
        match self {
            WeightScheme::Alternating => SequenceWeights::alternating(),
            WeightScheme::Uniform => SequenceWeights::uniform(),
        }
    }
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long)]
    n3: usize,
    #[arg(long)]
    n2: usize,
    /// Trial length in weeks; must be even.
    #[arg(long)]
    weeks: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = WeightScheme::Alternating)]
    weights: WeightScheme,
    /// Write the design here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Design file.
    #[arg(long)]
    design: PathBuf,
    /// Also write A, B1 and B2 as CSV files into this directory.
    #[arg(long)]
    dump_matrices: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    design: PathBuf,
    /// True semi-difference τ.
    #[arg(long)]
    tau: f64,
    /// Error standard deviation.
    #[arg(long)]
    sigma: f64,
    /// Lag-one autocorrelation of errors within a patient.
    #[arg(long)]
    rho: Option<f64>,
    /// Period effects π1..π4 as four comma-separated numbers.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0, 0.0, 0.0])]
    pi: Vec<f64>,
    /// Standard deviation of normal patient effects (fixed zeros when absent).
    #[arg(long)]
    patient_sd: Option<f64>,
    /// Drop the final session of every thrice-weekly patient.
    #[arg(long)]
    miss_final: bool,
    /// Drop each session independently with this probability.
    #[arg(long, default_value_t = 0.0)]
    miss_random: f64,
    /// Drop a patient's last K sessions, given as ID:K; repeatable.
    #[arg(long, value_parser = parse_tail_loss)]
    drop_tail: Vec<TailLoss>,
    /// Number of simulated trials. With 1, the trial data are written as
    /// CSV; with more, a variance summary is reported.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    /// Write trial data here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trial data CSV.
    #[arg(long)]
    data: PathBuf,
    /// Fit log(y + K) instead of y.
    #[arg(long)]
    log_shift: Option<f64>,
    /// Number of re-randomizations for a randomization test.
    #[arg(long, requires = "seed")]
    randomization: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Weights of the scheme used to re-randomize.
    #[arg(long, value_enum, default_value_t = WeightScheme::Alternating)]
    weights: WeightScheme,
    /// Period class (1-4) absorbed into the patient effects.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=4))]
    reference_period: u8,
    /// Write residuals with normal plotting positions to this CSV file.
    #[arg(long)]
    residuals: Option<PathBuf>,
}

fn parse_tail_loss(s: &str) -> std::result::Result<TailLoss, String> {
    let (id, k) = s.rsplit_once(':').ok_or("expected ID:K")?;
    let sessions = k
        .parse()
        .map_err(|e| format!("bad session count `{k}`: {e}"))?;
    if id.is_empty() {
        return Err("empty patient id".into());
    }
    Ok(TailLoss {
        patient_id: id.to_string(),
        sessions,
    })
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("reports are objects"),
    }
}

struct Ctx {
    format: Format,
    verbose: u8,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("xover: {}", msg.as_ref());
        }
    }

    fn report(&self, report: Map<String, Value>) -> Result<()> {
        let mut out = io::stdout().lock();
        emit(&report, self.format, &mut out)?;
        out.flush()?;
        Ok(())
    }
}

fn plan(ctx: &Ctx, args: PlanArgs) -> Result<()> {
    let inputs = PlanInputs {
        tau0: args.tau0,
        sigma: args.sigma,
        alpha: args.alpha,
        power: args.power,
        n3: args.n3,
        n2: args.n2,
    };
    let p = plan_trial(&inputs, args.even)?;
    ctx.report(object(json!({
        "m": p.observations,
        "w": p.weeks,
        "observations_delivered": p.observations_delivered,
        "variance": p.variance,
        "z_alpha": p.z_alpha,
        "z_power": p.z_power,
    })))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn construct(ctx: &Ctx, args: ConstructArgs) -> Result<()> {
    let design = construct_design(
        args.n3,
        args.n2,
        args.weeks,
        &args.weights.weights(),
        RngSeed(args.seed),
    )?;
    ctx.note(format!(
        "constructed {} patients over {} weeks ({} cells)",
        design.plans().len(),
        design.weeks(),
        design.observations()
    ));
    write_or_print(args.out.as_deref(), &design_to_json(&design))
}

fn load_design(path: &Path) -> Result<crossover::Design> {
    read_design(path).map_err(|e| match e {
        Error::Io(io) => {
            anyhow::Error::new(Error::Io(io)).context(format!("reading {}", path.display()))
        }
        other => anyhow::Error::new(other).context(format!("in {}", path.display())),
    })
}

fn verify(ctx: &Ctx, args: VerifyArgs) -> Result<()> {
    let design = load_design(&args.design)?;
    let validation = design.validate();
    for w in &validation.warnings {
        ctx.note(format!("warning: {w}"));
    }
    let r = verdict(&design)?;
    if let Some(dir) = &args.dump_matrices {
        fs::create_dir_all(dir)?;
        write_matrix_csv(&build_a(&design), fs::File::create(dir.join("A.csv"))?)?;
        write_matrix_csv(&build_b1(&design), fs::File::create(dir.join("B1.csv"))?)?;
        write_matrix_csv(&build_b2(&design), fs::File::create(dir.join("B2.csv"))?)?;
        ctx.note(format!("matrices written to {}", dir.display()));
    }
    ctx.report(object(json!({
        "optimal": r.optimal,
        "info": snap(r.info_full),
        "info_full": snap(r.info_full),
        "info_reduced": snap(r.info_reduced),
        "info_closed": snap(r.info_closed),
        "m": r.m,
        "n3": r.n3,
        "n2": r.n2,
        "weeks": r.weeks,
        "q": [r.q.q3_mon, r.q.q3_wed, r.q.q3_fri, r.q.q2_fri, r.q.q2_mon],
        "q_contracted": r.q_contracted,
        "patient_imbalance": r.patient_imbalance,
        "orthogonal": r.orthogonal,
        "patient_balanced": r.patient_balanced,
        "warnings": validation.warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
    })))
}

fn simulate(ctx: &Ctx, args: SimulateArgs) -> Result<()> {
    if args.reps == 0 {
        bail!(Error::InvalidInput("--reps must be at least 1".into()));
    }
    let pi: [f64; 4] =
        args.pi.as_slice().try_into().map_err(|_| {
            Error::InvalidInput(format!("--pi needs 4 values, got {}", args.pi.len()))
        })?;
    let design = load_design(&args.design)?;
    let err = match args.rho {
        Some(rho) => ErrorModel::ar1(args.sigma, rho)?,
        None => ErrorModel::iid(args.sigma)?,
    };
    let params = ModelParams {
        tau: args.tau,
        pi,
        xi: match args.patient_sd {
            Some(sd) => PatientEffects::Normal { sd },
            None => PatientEffects::Fixed(Vec::new()),
        },
    };
    let miss = MissingnessSpec {
        final_period_loss: args.miss_final,
        random_loss_prob: args.miss_random,
        tail_losses: args.drop_tail,
    };
    if args.reps == 1 {
        let mut rng = substream(
            RngSeed(args.seed),
            crossover::rng::domain::SIMULATION_REPLICATE,
            0,
        );
        let data = simulate_trial(&design, &params, &err, &miss, &mut rng)?;
        ctx.note(format!(
            "{} of {} cells observed",
            data.observed(),
            data.records().len()
        ));
        let mut buf = Vec::new();
        data.write_csv_to(&mut buf)?;
        return write_or_print(args.out.as_deref(), std::str::from_utf8(&buf)?);
    }
    if miss != MissingnessSpec::none() {
        bail!(Error::InvalidInput(
            "missingness options apply to a single simulated trial (--reps 1)".into()
        ));
    }
    ctx.note(format!("simulating {} trials", args.reps));
    let s = variance_mc(&design, &params, &err, args.reps, RngSeed(args.seed))?;
    ctx.report(object(json!({
        "replicates": s.replicates,
        "mean_tau_hat": s.mean_tau_hat,
        "mc_se_of_mean": s.mc_standard_error_of_mean(),
        "variance": s.variance,
        "predicted_iid_variance": s.predicted_iid_variance,
        "variance_ratio": s.variance / s.predicted_iid_variance,
    })))
}

fn analyze(ctx: &Ctx, args: AnalyzeArgs) -> Result<()> {
    let data = TrialDataset::read_csv(&args.data)
        .with_context(|| format!("in {}", args.data.display()))?;
    let transform = match args.log_shift {
        Some(k) => Transform::LogShift(k),
        None => Transform::Identity,
    };
    let reference = Some(args.reference_period as usize - 1);
    let fit = fit_model_with_reference(&data, transform, reference)?;
    let mut report = object(json!({
        "tau_hat": fit.tau_hat,
        "se": fit.se,
        "ci95_lo": fit.ci95.0,
        "ci95_hi": fit.ci95.1,
        "t_stat": fit.t_stat,
        "p_value": fit.p_value,
        "dof": fit.dof,
        "sigma2_hat": fit.sigma2_hat,
        "information": fit.information,
        "observations": fit.observations,
        "missing": data.records().len() - data.observed(),
        "reference_distribution": fit.reference_distribution,
        "reference_period": args.reference_period,
        "transform": match transform {
            Transform::Identity => "identity".to_string(),
            Transform::LogShift(k) => format!("log_shift({k})"),
        },
    }));
    if let Some(path) = &args.residuals {
        export_residuals(&fit, path).with_context(|| format!("writing {}", path.display()))?;
        ctx.note(format!("residuals written to {}", path.display()));
    }
    if let Some(n) = args.randomization {
        let seed = args.seed.expect("clap enforces --seed");
        let scheme = RandomizationScheme::from_data(&data, args.weights.weights());
        ctx.note(format!("running {n} re-randomizations"));
        let r = randomization_test(&data, &scheme, transform, n, RngSeed(seed))?;
        report.insert("randomization_replicates".into(), json!(r.replicates));
        report.insert("randomization_failures".into(), json!(r.failures));
        report.insert("randomization_extreme".into(), json!(r.at_least_as_extreme));
        report.insert("randomization_p".into(), json!(r.p_value));
    }
    ctx.report(report)
}

/// 1 for bad arguments or inputs, 2 when a well-formed request cannot be computed.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::NotEstimable
            | Error::NoResidualDof
            | Error::EmptyStratumImbalance { .. }
            | Error::TooManyReplicateFailures { .. },
        ) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        format: cli.format,
        verbose: cli.verbose,
    };
    match cli.command {
        Command::Plan(a) => plan(&ctx, a),
        Command::Construct(a) => construct(&ctx, a),
        Command::Verify(a) => verify(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Analyze(a) => analyze(&ctx, a),
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
            eprintln!("xover: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
