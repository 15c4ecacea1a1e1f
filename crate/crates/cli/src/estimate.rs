use std::fmt::Write as _;
use std::path::PathBuf;

use attacklab::attack::{binary_search_to_boundary, generate_pair_blackbox};
use attacklab::estimator::{cosine_to_truth, estimate, EstimatorConfig, SamplingMode};
use attacklab::numerics::{mean_and_stderr, RngSeed};
use attacklab::projections::ProjectionSpec;
use attacklab::victims::VictimSpec;
use clap::Args;
use serde::Serialize;

use crate::common::{load_projection, parse_list, LiftArg, SamplingArg};
use crate::error::{CliError, Status};
use crate::output::{write_atomic, write_json};
use crate::victim::VictimArgs;

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    victim: VictimArgs,
    #[arg(long)]
    projection: Option<PathBuf>,
    /// Comma-separated query counts, e.g. `4,8,16`.
    #[arg(long = "B-list", alias = "b-list")]
    b_list: String,
    /// Base points (one per trial).
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, env = "ATTACKLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// CSV output; the resolved config goes next to it as `.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "frame")]
    sampling: SamplingArg,
    #[arg(long, value_enum)]
    lift: Option<LiftArg>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    box_lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    box_hi: f64,
    /// Bisection precision used to place each base point on the boundary.
    #[arg(long, default_value_t = 1e-9)]
    theta: f64,
}

#[derive(Debug, Serialize)]
struct Row {
    b: usize,
    mean_cos: f64,
    stderr: f64,
    mean_omega_proxy: f64,
}

#[derive(Debug, Serialize)]
struct ResolvedEstimate<'a> {
    victim: &'a VictimSpec,
    dim: usize,
    projection: &'a ProjectionSpec,
    latent_dim: usize,
    b_list: &'a [usize],
    trials: usize,
    delta: f64,
    seed: u64,
    sampling: SamplingArg,
    lift: Option<LiftArg>,
    box_lo: f64,
    box_hi: f64,
    theta: f64,
}

#[derive(Debug, Serialize)]
struct EstimateReport<'a> {
    command: &'static str,
    config: ResolvedEstimate<'a>,
    rows: Vec<Row>,
}

pub fn run(args: EstimateArgs) -> Result<Status, CliError> {
    let victim = args.victim.prepare()?;
    if victim.is_remote() {
        return Err(CliError::config("cosine to the true gradient needs a local victim"));
    }
    let m = victim.dim;
    let projection = load_projection(args.projection.as_deref())?;
    let factory = projection.factory(m)?;
    let n = factory.latent_dim(m);
    let b_list = parse_list(&args.b_list)?;
    if b_list.is_empty() || b_list.contains(&0) {
        return Err(CliError::config("--B-list needs positive entries"));
    }
    if args.trials < 2 || !(args.delta > 0.0) || !(args.box_lo < args.box_hi) {
        return Err(CliError::config("need trials >= 2, delta > 0 and a non-empty box"));
    }
    if !(args.theta > 0.0 && args.theta < 1.0) {
        return Err(CliError::config("--theta must lie in (0, 1)"));
    }
    let sampling: SamplingMode = args.sampling.into();
    if sampling == SamplingMode::OrthonormalFrame {
        if let Some(&b) = b_list.iter().find(|&&b| b > n) {
            return Err(CliError::Precondition(format!("B = {b} exceeds latent dimension {n} in frame mode")));
        }
    }

    let (oracle, truth) = victim.open()?;
    let truth = truth.expect("local victims come with ground truth");
    let mut cosines = vec![Vec::with_capacity(args.trials); b_list.len()];
    let mut proxies = vec![Vec::with_capacity(args.trials); b_list.len()];
    for t in 0..args.trials {
        let seed = RngSeed(args.seed).child(t as u64);
        let pair = generate_pair_blackbox(oracle.as_ref(), args.box_lo, args.box_hi, None, &mut seed.stream(1))?;
        let base = binary_search_to_boundary(oracle.as_ref(), &pair.x_src, &pair.x_tgt, args.theta)?.point;
        let p = factory.build(&base, Some(&truth))?;
        for (k, &b) in b_list.iter().enumerate() {
            let mut cfg = EstimatorConfig::new(b, args.delta).with_sampling(sampling);
            cfg.lift = args.lift.map(Into::into);
            let e = estimate(p.as_ref(), oracle.as_ref(), &cfg, &mut seed.stream(2 + k as u64))?;
            cosines[k].push(cosine_to_truth(&e, &truth, &base)?);
            proxies[k].push(e.omega_proxy.unwrap_or(f64::NAN));
        }
    }

    let rows: Vec<Row> = b_list
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            let (mean_cos, stderr) = mean_and_stderr(&cosines[k]);
            let mean_omega_proxy = proxies[k].iter().sum::<f64>() / proxies[k].len() as f64;
            Row { b, mean_cos, stderr, mean_omega_proxy }
        })
        .collect();
    let mut csv = String::from("B,mean_cos,stderr,mean_omega_proxy\n");
    for r in &rows {
        writeln!(csv, "{},{:.16e},{:.16e},{:.16e}", r.b, r.mean_cos, r.stderr, r.mean_omega_proxy).unwrap();
    }
    write_atomic(&args.out, csv.as_bytes())?;
    let report = EstimateReport {
        command: "estimate",
        config: ResolvedEstimate {
            victim: &victim.spec,
            dim: m,
            projection: &projection,
            latent_dim: n,
            b_list: &b_list,
            trials: args.trials,
            delta: args.delta,
            seed: args.seed,
            sampling: args.sampling,
            lift: args.lift,
            box_lo: args.box_lo,
            box_hi: args.box_hi,
            theta: args.theta,
        },
        rows,
    };
    write_json(&args.out.with_extension("json"), &report)?;
    Ok(Status::Pass)
}
