use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use attacklab::victims::{
    serve_victim, DifferenceOracle, GroundTruth, LocalOracle, Victim, VictimSpec,
};
use clap::{Args, Subcommand};

use crate::error::{CliError, Status};

#[derive(Debug, Subcommand)]
pub enum VictimCommand {
    /// Answer sign queries for a local victim over TCP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Victim spec (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Address to listen on; port 0 picks a free port.
    #[arg(long, default_value = "127.0.0.1:7070")]
    listen: String,
}

pub fn run(cmd: VictimCommand) -> Result<Status, CliError> {
    match cmd {
        VictimCommand::Serve(args) => serve(args),
    }
}

fn serve(args: ServeArgs) -> Result<Status, CliError> {
    let spec = VictimSpec::from_file(&args.config)?;
    if spec.is_remote() {
        return Err(CliError::config("cannot serve a remote victim"));
    }
    // building here keeps config errors apart from bind errors
    spec.build()?;
    let server = serve_victim(&spec, args.listen.as_str())
        .map_err(|e| CliError::Transport(format!("cannot listen on {}: {e}", args.listen)))?;
    let addr = server.local_addr().map_err(|e| CliError::Transport(e.to_string()))?;
    println!("listening on {addr}");
    std::io::stdout().flush().ok();
    server.run().map_err(|e| CliError::Transport(e.to_string()))?;
    Ok(Status::Pass)
}

/// Victim selection shared by the experiment commands.
#[derive(Debug, Clone, Args)]
pub struct VictimArgs {
    /// Victim spec file, or `tcp://host:port` for a served victim.
    #[arg(long)]
    pub victim: String,
    /// Input dimension of a `tcp://` victim.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Per-query timeout for remote victims, 0 for none.
    #[arg(long, default_value_t = 5000)]
    pub timeout_ms: u64,
}

/// A parsed and validated victim that has not been queried yet.
pub struct PreparedVictim {
    pub spec: VictimSpec,
    pub dim: usize,
    local: Option<Arc<Victim>>,
}

impl VictimArgs {
    pub fn prepare(&self) -> Result<PreparedVictim, CliError> {
        let spec = match self.victim.strip_prefix("tcp://") {
            Some(address) => {
                let dim = self.dim.ok_or_else(|| CliError::config("tcp:// victims need --dim"))?;
                VictimSpec::Remote { address: address.to_string(), dim, timeout_ms: self.timeout_ms }
            }
            None => VictimSpec::from_file(&PathBuf::from(&self.victim))?,
        };
        Ok(match &spec {
            VictimSpec::Remote { dim, .. } => {
                if *dim == 0 {
                    return Err(CliError::config("victim dimension must be positive"));
                }
                PreparedVictim { dim: *dim, local: None, spec }
            }
            _ => {
                let victim = Arc::new(spec.build()?);
                if self.dim.is_some_and(|d| d != victim.dim()) {
                    return Err(CliError::config(format!("--dim disagrees with the victim's {}", victim.dim())));
                }
                PreparedVictim { dim: victim.dim(), local: Some(victim), spec }
            }
        })
    }
}

impl PreparedVictim {
    pub fn is_remote(&self) -> bool {
        self.local.is_none()
    }

    /// Counted oracle, plus ground truth for local victims. Connects to
    /// remote victims.
    pub fn open(&self) -> Result<(Box<dyn DifferenceOracle>, Option<GroundTruth>), CliError> {
        match &self.local {
            Some(v) => Ok((Box::new(LocalOracle::new(v.clone())), Some(GroundTruth::new(v.clone())))),
            None => Ok(self.spec.open()?),
        }
    }
}
