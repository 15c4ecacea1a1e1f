use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use attacklab::numerics::RngSeed;
use attacklab::theory::{
    compute_cn, compute_omega, compute_omega_linear, compute_omega_thm2, fit_query_complexity,
    omega_correlation_sweep, pa_cdf, pa_pdf, theorem1_bounds, verify_lemma1, verify_lemma4,
    verify_theorem1_sandwich, CosineBounds, OmegaSweepConfig, QcConfig, SandwichConfig, SandwichVictim,
    SmoothnessProfile, TheoryError,
};
use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;

use crate::common::{parse_list, SamplingArg};
use crate::error::{CliError, Status};
use crate::output::{emit_json, write_atomic};

#[derive(Debug, Subcommand)]
pub enum TheoryCommand {
    /// Range and monotonicity of the constants c_n.
    Cn(CnArgs),
    /// Density and CDF of one coordinate of a uniform unit vector.
    Pa(PaArgs),
    /// Cosine bounds for a smoothness profile.
    Bounds(BoundsArgs),
    /// Monte Carlo mean cosine against its bounds.
    Sandwich(SandwichArgs),
    /// Fit mean cosine against √B.
    Qcfit(QcArgs),
    /// KS test of sampled inner products against the closed-form law.
    Lemma1(Lemma1Args),
    /// Correlation between the ω-proxy and the cosine over a curvature sweep.
    Omega(OmegaArgs),
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CnArgs {
    #[arg(long, default_value_t = 200)]
    n_max: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
pub struct PaArgs {
    #[arg(long)]
    n: usize,
    /// Grid points on [-1, 1].
    #[arg(long, default_value_t = 101)]
    points: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Smoothness profile (JSON).
    #[arg(long)]
    profile: PathBuf,
    /// Use this ω instead of the one computed from the profile.
    #[arg(long)]
    omega: Option<f64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SandwichKind {
    Linear,
    Quadratic,
}

#[derive(Debug, Args)]
pub struct SandwichArgs {
    #[arg(long, value_enum, default_value = "linear")]
    victim: SandwichKind,
    #[arg(long, default_value_t = 2.0)]
    beta_s: f64,
    /// Target ω / ‖∇fᵀ∇S‖ for the quadratic victim.
    #[arg(long, default_value_t = 0.1)]
    omega_ratio: f64,
    #[arg(long, default_value_t = 256)]
    m: usize,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    b: usize,
    #[arg(long, default_value_t = 0.8)]
    alignment: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, env = "ATTACKLAB_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
pub struct QcArgs {
    #[arg(long, default_value_t = 256)]
    m: usize,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long = "B-list", alias = "b-list", default_value = "4,8,16,32,64")]
    b_list: String,
    #[arg(long, default_value_t = 0.8)]
    alignment: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0.95)]
    min_r_squared: f64,
    #[arg(long, env = "ATTACKLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Also write `(B, mean_cos, stderr)` as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
pub struct Lemma1Args {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, env = "ATTACKLAB_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
pub struct OmegaArgs {
    #[arg(long, default_value_t = 32)]
    m: usize,
    #[arg(long, default_value_t = 32)]
    b: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Comma-separated curvatures β_S.
    #[arg(long, default_value = "0,1,2,5,10,20,50,100")]
    beta_list: String,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, value_enum, default_value = "gaussian")]
    sampling: SamplingArg,
    #[arg(long, default_value_t = -0.3, allow_hyphen_values = true)]
    max_correlation: f64,
    #[arg(long, env = "ATTACKLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Also write the `(omega_proxy, cos)` scatter as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

fn finish<T: Serialize>(out: &OutArg, report: &T, pass: bool) -> Result<Status, CliError> {
    emit_json(out.out.as_deref(), report)?;
    Ok(if pass { Status::Pass } else { Status::CheckFailed })
}

pub fn run(cmd: TheoryCommand) -> Result<Status, CliError> {
    match cmd {
        TheoryCommand::Cn(a) => {
            if a.n_max < 4 {
                return Err(CliError::config("--n-max must be at least 4"));
            }
            let r = verify_lemma4(a.n_max)?;
            finish(&a.out, &r, r.pass)
        }
        TheoryCommand::Pa(a) => pa(a),
        TheoryCommand::Bounds(a) => bounds(a),
        TheoryCommand::Sandwich(a) => {
            let victim = match a.victim {
                SandwichKind::Linear => SandwichVictim::Linear,
                SandwichKind::Quadratic => SandwichVictim::Quadratic { beta_s: a.beta_s, omega_ratio: a.omega_ratio },
            };
            let cfg = SandwichConfig {
                victim,
                m: a.m,
                n: a.n,
                b: a.b,
                alignment: a.alignment,
                delta: a.delta,
                trials: a.trials,
                seed: RngSeed(a.seed),
            };
            let r = verify_theorem1_sandwich(&cfg)?;
            finish(&a.out, &r, r.pass)
        }
        TheoryCommand::Qcfit(a) => {
            let cfg = QcConfig {
                m: a.m,
                n: a.n,
                b_list: parse_list(&a.b_list)?,
                alignment: a.alignment,
                trials: a.trials,
                seed: RngSeed(a.seed),
                min_r_squared: a.min_r_squared,
            };
            let r = fit_query_complexity(&cfg)?;
            if let Some(path) = &a.csv {
                let mut csv = String::from("B,mean_cos,stderr\n");
                for p in &r.points {
                    writeln!(csv, "{},{:.16e},{:.16e}", p.b, p.mean_cos, p.stderr).unwrap();
                }
                write_atomic(path, csv.as_bytes())?;
            }
            finish(&a.out, &r, r.pass)
        }
        TheoryCommand::Lemma1(a) => {
            if a.n < 2 || a.samples == 0 {
                return Err(CliError::config("need --n >= 2 and --samples > 0"));
            }
            let r = verify_lemma1(a.n, a.samples, &mut RngSeed(a.seed).stream(0))?;
            finish(&a.out, &r, r.pass)
        }
        TheoryCommand::Omega(a) => {
            let beta_values = a
                .beta_list
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::config(format!("bad β {s:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let cfg = OmegaSweepConfig {
                m: a.m,
                b: a.b,
                delta: a.delta,
                beta_values,
                trials_per_point: a.trials,
                sampling: a.sampling.into(),
                seed: RngSeed(a.seed),
                max_correlation: a.max_correlation,
            };
            let r = omega_correlation_sweep(&cfg)?;
            if let Some(path) = &a.csv {
                let mut csv = String::from("omega_proxy,cos\n");
                for (p, c) in &r.scatter {
                    writeln!(csv, "{p:.16e},{c:.16e}").unwrap();
                }
                write_atomic(path, csv.as_bytes())?;
            }
            finish(&a.out, &r, r.pass)
        }
    }
}

#[derive(Debug, Serialize)]
struct PaRow {
    x: f64,
    pdf: f64,
    cdf: f64,
}

#[derive(Debug, Serialize)]
struct PaReport {
    check: &'static str,
    n: usize,
    c_n: f64,
    rows: Vec<PaRow>,
    failures: Vec<String>,
    pass: bool,
}

fn pa(a: PaArgs) -> Result<Status, CliError> {
    if a.n < 2 || a.points < 3 {
        return Err(CliError::config("need --n >= 2 and --points >= 3"));
    }
    let mut rows = Vec::with_capacity(a.points);
    for i in 0..a.points {
        let x = (2.0 * i as f64 - (a.points - 1) as f64) / (a.points - 1) as f64;
        rows.push(PaRow { x, pdf: pa_pdf(a.n, x)?, cdf: pa_cdf(a.n, x)? });
    }
    let mut failures = Vec::new();
    for (lo, hi) in rows.iter().zip(rows.iter().rev()) {
        if (lo.pdf - hi.pdf).abs() > 1e-12 * hi.pdf.max(1.0) {
            failures.push(format!("pdf not symmetric at x = {}", hi.x));
        }
        if (lo.cdf + hi.cdf - 1.0).abs() > 1e-9 {
            failures.push(format!("cdf not antisymmetric at x = {}", hi.x));
        }
    }
    if rows.windows(2).any(|w| w[1].cdf < w[0].cdf) {
        failures.push("cdf decreases".into());
    }
    if rows[0].cdf != 0.0 || rows[a.points - 1].cdf != 1.0 {
        failures.push("cdf does not run from 0 to 1".into());
    }
    let report = PaReport {
        check: "pa_distribution",
        n: a.n,
        c_n: compute_cn(a.n)?,
        rows,
        pass: failures.is_empty(),
        failures,
    };
    let pass = report.pass;
    finish(&a.out, &report, pass)
}

#[derive(Debug, Serialize)]
struct BoundsReport {
    check: &'static str,
    parameters: SmoothnessProfile,
    omega: f64,
    omega_linear: f64,
    omega_bent: f64,
    bounds: Option<CosineBounds>,
    reason: Option<&'static str>,
    pass: bool,
}

fn read_profile(path: &Path) -> Result<SmoothnessProfile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let profile: SmoothnessProfile =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    profile.validate()?;
    Ok(profile)
}

fn bounds(a: BoundsArgs) -> Result<Status, CliError> {
    let profile = read_profile(&a.profile)?;
    let omega = a.omega.unwrap_or_else(|| compute_omega(&profile));
    let (bounds, reason) = match theorem1_bounds(&profile, omega) {
        Ok(b) => (Some(b), None),
        Err(TheoryError::AssumptionViolated { .. }) => (None, Some("assumption_violated")),
        Err(e) => return Err(e.into()),
    };
    let report = BoundsReport {
        check: "cosine_bounds",
        parameters: profile,
        omega,
        omega_linear: compute_omega_linear(&profile),
        omega_bent: compute_omega_thm2(&profile),
        pass: bounds.is_some(),
        bounds,
        reason,
    };
    let pass = report.pass;
    finish(&a.out, &report, pass)
}
