use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mems_bench::endorse::Mode;
use mems_core::baselines::Scheme;
use mems_core::group::Backend;

#[derive(Debug, Parser)]
#[command(
    name = "mems",
    version,
    about = "Two-round Schnorr multi-signatures with a public coordinator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GroupArg {
    /// Group backend: `production` (Ristretto255) or `toy`.
    #[arg(long, default_value = "production")]
    pub group: Backend,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct MessageArg {
    /// Message as a UTF-8 string.
    #[arg(long)]
    pub message: Option<String>,
    /// Read the message bytes from a file.
    #[arg(long)]
    pub message_file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a key pair; prints `<sk-hex> <pk-hex>`.
    Keygen {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the key file here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the aggregated public key of a roster.
    Agg {
        #[command(flatten)]
        group: GroupArg,
        /// One public key per line (the last token of each line is used).
        #[arg(long)]
        roster: PathBuf,
    },
    /// Check a joint signature; exit 1 if it does not verify.
    Verify {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long, required_unless_present = "agg_key", conflicts_with = "agg_key")]
        roster: Option<PathBuf>,
        /// Aggregated key as hex.
        #[arg(long)]
        agg_key: Option<String>,
        #[command(flatten)]
        message: MessageArg,
        /// Signature file holding hex of `U ‖ s`.
        #[arg(long)]
        sig: PathBuf,
    },
    /// Run or talk to the coordinator.
    #[command(subcommand)]
    Ptp(PtpCommand),
    /// Take one roster slot in a session hosted by a remote coordinator.
    Signer {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long, env = "MEMS_PTP_LISTEN", default_value = "127.0.0.1:7400")]
        connect: String,
        /// Key file `<sk-hex> <pk-hex>`.
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        session: String,
        /// Roster slot; found from the key when omitted.
        #[arg(long)]
        slot: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the joint signature here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Attack demonstrations.
    #[command(subcommand)]
    Attack(AttackCommand),
    /// Measure sign, verify and aggregation cost and message counts; writes CSV.
    Bench {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long, value_delimiter = ',', default_value = "mems,musig2")]
        schemes: Vec<Scheme>,
        #[arg(
            long = "n",
            value_delimiter = ',',
            default_value = "2,8,32,128,1000,4000"
        )]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate endorsement of ledger transactions; writes CSV.
    EndorseSim {
        #[command(flatten)]
        group: GroupArg,
        /// Endorser counts: `a..b` (inclusive), a comma list, or one number.
        #[arg(long, default_value = "2..64")]
        endorsers: String,
        /// `mems`, `individual` or `both`.
        #[arg(long, default_value = "both")]
        mode: String,
        #[arg(long, default_value_t = 4)]
        block_size: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 128)]
        header_bytes: usize,
        #[arg(long, default_value_t = 512)]
        proposal_bytes: usize,
        #[arg(long, default_value_t = 256)]
        response_bytes: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum PtpCommand {
    /// Serve the coordinator over TCP. Prints the bound address, then blocks.
    Serve {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long, env = "MEMS_PTP_LISTEN", default_value = "127.0.0.1:7400")]
        listen: String,
        /// Use the bare millisecond timestamp as `t` (no nonce).
        #[arg(long)]
        strict_timestamp: bool,
        /// Check each partial signature before relaying it.
        #[arg(long)]
        verify_partials: bool,
        /// Abort sessions still collecting commitments after this long.
        #[arg(long)]
        commit_deadline_ms: Option<u64>,
        /// How long a connection waits for the rest of its session.
        #[arg(long)]
        wait_ms: Option<u64>,
        /// Seed for session ids and nonces.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Open a session; prints its id.
    Create {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long, env = "MEMS_PTP_LISTEN", default_value = "127.0.0.1:7400")]
        connect: String,
        #[arg(long)]
        roster: PathBuf,
        #[command(flatten)]
        message: MessageArg,
    },
    /// Fetch a session's audit log as JSON.
    Audit {
        #[arg(long, env = "MEMS_PTP_LISTEN", default_value = "127.0.0.1:7400")]
        connect: String,
        #[arg(long)]
        session: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay an exported audit log offline; exit 1 if it does not reproduce.
    Replay {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long)]
        audit: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum AttackCommand {
    /// k-sum forgery against the single-commitment two-round scheme.
    Ksum {
        #[arg(long, default_value = "toy")]
        group: Backend,
        #[arg(long, default_value_t = 8)]
        k: usize,
        /// Challenge width in bits.
        #[arg(long, default_value_t = 16)]
        bits: u32,
        #[arg(long, default_value_t = 256)]
        list_size: usize,
        #[arg(long, default_value_t = 16)]
        retries: usize,
        /// Cap on merged list sizes; 0 for none.
        #[arg(long, default_value_t = 4096)]
        max_merged: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rogue-key forgery under plain key products, and its failure under MEMS.
    RogueKey {
        #[arg(long, default_value = "toy")]
        group: Backend,
        /// Number of honest keys.
        #[arg(long, default_value_t = 3)]
        honest: usize,
        #[arg(long, default_value = "rogue-key demonstration")]
        message: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the k-sum playbook against an in-process coordinator.
    KsumVsMems {
        #[arg(long, default_value = "toy")]
        group: Backend,
        #[arg(long, default_value_t = 8)]
        k: usize,
        /// Honest signers besides the adversary.
        #[arg(long, default_value_t = 1)]
        honest: usize,
        /// Probes for `(t, w, W)` per session before committing.
        #[arg(long, default_value_t = 1000)]
        probes: u64,
        /// Run the coordinator with bare timestamps.
        #[arg(long)]
        strict_timestamp: bool,
        /// Half-width of the timestamp guessing window.
        #[arg(long, default_value_t = 1000)]
        window_ms: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

pub(crate) fn parse_modes(s: &str) -> Result<Vec<Mode>, String> {
    match s {
        "both" => Ok(Mode::ALL.to_vec()),
        other => other
            .parse::<Mode>()
            .map(|m| vec![m])
            .map_err(|e| e.to_string()),
    }
}

pub(crate) fn parse_range(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("bad endorser range {s:?}");
    let ns: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (
            a.trim().parse::<usize>().map_err(|_| bad())?,
            b.trim().parse::<usize>().map_err(|_| bad())?,
        );
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if ns.is_empty() || ns.contains(&0) {
        return Err(bad());
    }
    Ok(ns)
}
