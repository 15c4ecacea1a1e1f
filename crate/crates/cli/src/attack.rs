use std::path::{Path, PathBuf};

use attacklab::attack::{generate_pair_blackbox, pair_seed, run_attack, AttackConfig, AttackError, AttackPair};
use attacklab::numerics::{RealVector, RngSeed};
use attacklab::projections::{Projection, ProjectionError, ProjectionSpec};
use attacklab::victims::VictimSpec;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::common::{load_projection, LiftArg, SamplingArg};
use crate::error::{CliError, Status};
use crate::output::{write_atomic, write_json};
use crate::victim::VictimArgs;

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[command(flatten)]
    victim: VictimArgs,
    /// Projection spec; the identity when omitted.
    #[arg(long)]
    projection: Option<PathBuf>,
    /// Query budget per pair.
    #[arg(long, default_value_t = 5000)]
    budget: u64,
    /// Bisection precision on the interpolation weight.
    #[arg(long, default_value_t = 1e-3)]
    theta: f64,
    #[arg(long, env = "ATTACKLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Number of (source, target) pairs.
    #[arg(long, default_value_t = 1)]
    pairs: usize,
    /// Output directory for traces and the summary.
    #[arg(long)]
    out: PathBuf,
    /// JSON list of `{"x_src": [...], "x_tgt": [...]}`; pairs are sampled
    /// from the box when omitted.
    #[arg(long)]
    pairs_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    box_lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    box_hi: f64,
    /// Place sampled targets this far from the boundary.
    #[arg(long)]
    target_margin: Option<f64>,
    #[arg(long, value_enum, default_value = "frame")]
    sampling: SamplingArg,
    #[arg(long, value_enum)]
    lift: Option<LiftArg>,
    /// `B_1`; later iterations use `⌊B_1·√t⌋`.
    #[arg(long, default_value_t = 100)]
    initial_b: usize,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    delta_factor: f64,
    #[arg(long, default_value_t = 1e-4)]
    success_mse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PairFileEntry {
    x_src: Vec<f64>,
    x_tgt: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct ResolvedAttack<'a> {
    victim: &'a VictimSpec,
    dim: usize,
    projection: &'a ProjectionSpec,
    pairs: usize,
    pairs_file: Option<&'a Path>,
    box_lo: f64,
    box_hi: f64,
    target_margin: Option<f64>,
    attack: AttackConfig,
}

#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum PairResult {
    Ok {
        index: usize,
        seed: RngSeed,
        trace: String,
        queries: u64,
        iterations: usize,
        final_mse: Option<f64>,
        success: bool,
        truncated: bool,
    },
    Skipped {
        index: usize,
        reason: String,
    },
}

#[derive(Debug, Serialize)]
struct Checkpoint {
    queries: u64,
    pairs: usize,
    median_mse: Option<f64>,
    mean_mse: Option<f64>,
}

#[derive(Debug, Serialize)]
struct AttackSummary<'a> {
    command: &'static str,
    config: ResolvedAttack<'a>,
    pairs: Vec<PairResult>,
    checkpoints: Vec<Checkpoint>,
    success_rate: f64,
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) })
}

fn read_pairs(path: &Path, m: usize) -> Result<Vec<AttackPair>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let entries: Vec<PairFileEntry> =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            if e.x_src.len() != m || e.x_tgt.len() != m {
                return Err(CliError::config(format!("pair {i} does not have dimension {m}")));
            }
            Ok(AttackPair { x_src: RealVector::from_vec(e.x_src), x_tgt: RealVector::from_vec(e.x_tgt) })
        })
        .collect()
}

pub fn run(args: AttackArgs) -> Result<Status, CliError> {
    let victim = args.victim.prepare()?;
    let m = victim.dim;
    let projection = load_projection(args.projection.as_deref())?;
    if projection.is_whitebox() && victim.is_remote() {
        return Err(CliError::config("constructed_a needs the true gradient and cannot be used with a remote victim"));
    }
    let factory = projection.factory(m)?;
    let mut cfg = AttackConfig::new(args.budget, args.theta, RngSeed(args.seed));
    cfg.initial_b = args.initial_b;
    cfg.max_iterations = args.max_iterations.unwrap_or(usize::MAX);
    cfg.sampling = args.sampling.into();
    cfg.lift = args.lift.map(Into::into);
    cfg.delta_factor = args.delta_factor;
    cfg.success_mse = args.success_mse;
    cfg.validate()?;
    let file_pairs = match &args.pairs_file {
        Some(p) => Some(read_pairs(p, m)?),
        None => None,
    };
    let pairs = file_pairs.as_ref().map_or(args.pairs, Vec::len);
    if pairs == 0 {
        return Err(CliError::config("nothing to attack: zero pairs"));
    }
    if !(args.box_lo < args.box_hi) {
        return Err(CliError::config(format!("empty box [{}, {}]", args.box_lo, args.box_hi)));
    }
    if args.target_margin.is_some_and(|e| !(e > 0.0)) {
        return Err(CliError::config("--target-margin must be positive"));
    }

    let (oracle, truth) = victim.open()?;
    let projection_at =
        |x: &RealVector| -> Result<Box<dyn Projection>, ProjectionError> { factory.build(x, truth.as_ref()) };
    let mut results = Vec::with_capacity(pairs);
    let mut traces = Vec::new();
    for index in 0..pairs {
        let seed = pair_seed(RngSeed(args.seed), index as u64);
        let pair = match &file_pairs {
            Some(list) => Ok(list[index].clone()),
            None => generate_pair_blackbox(
                oracle.as_ref(),
                args.box_lo,
                args.box_hi,
                args.target_margin,
                &mut seed.stream(1),
            ),
        };
        let run = pair.and_then(|pair| {
            let pair_cfg = AttackConfig { seed, ..cfg };
            run_attack(oracle.as_ref(), &projection_at, &pair.x_src, &pair.x_tgt, &pair_cfg)
        });
        let outcome = match run {
            Ok(o) => o,
            Err(e @ (AttackError::Precondition(_) | AttackError::TrivialInstance(_))) => {
                log::warn!("pair {index} skipped: {e}");
                results.push(PairResult::Skipped { index, reason: e.to_string() });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let name = format!("pair_{index:03}.csv");
        write_atomic(&args.out.join(&name), outcome.trace.to_csv().as_bytes())?;
        log::info!(
            "pair {index}: {} queries, final MSE {:.3e}",
            outcome.queries,
            outcome.trace.final_mse().unwrap_or(f64::NAN)
        );
        results.push(PairResult::Ok {
            index,
            seed,
            trace: name,
            queries: outcome.queries,
            iterations: outcome.iterations,
            final_mse: outcome.trace.final_mse(),
            success: outcome.trace.success,
            truncated: outcome.truncated,
        });
        traces.push(outcome.trace);
    }

    let checkpoints = (1..=10u64)
        .map(|k| {
            let queries = args.budget * k / 10;
            let mut mses: Vec<f64> = traces.iter().filter_map(|t| t.mse_at(queries)).collect();
            let mean = (!mses.is_empty()).then(|| mses.iter().sum::<f64>() / mses.len() as f64);
            Checkpoint { queries, pairs: mses.len(), median_mse: median(&mut mses), mean_mse: mean }
        })
        .collect();
    let successes = traces.iter().filter(|t| t.success).count();
    let skipped = results.iter().any(|r| matches!(r, PairResult::Skipped { .. }));
    let summary = AttackSummary {
        command: "attack",
        config: ResolvedAttack {
            victim: &victim.spec,
            dim: m,
            projection: &projection,
            pairs,
            pairs_file: args.pairs_file.as_deref(),
            box_lo: args.box_lo,
            box_hi: args.box_hi,
            target_margin: args.target_margin,
            attack: cfg,
        },
        pairs: results,
        checkpoints,
        success_rate: successes as f64 / pairs as f64,
    };
    write_json(&args.out.join("summary.json"), &summary)?;
    Ok(if skipped { Status::Precondition } else { Status::Pass })
}
