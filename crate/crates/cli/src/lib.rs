//! The `mems` command line.
//!
//! Exit codes: 0 on success, 1 when a signature, replay or session fails,
//! 2 on a usage error or unreadable input. Machine-readable results go to
//! stdout, diagnostics to stderr.

mod args;
mod commands;
mod files;

use std::ffi::OsString;

use clap::Parser;

pub use args::{AttackCommand, Cli, Command, PtpCommand};

/// Subcommand path and the module operations it exposes. Each operation
/// appears under exactly one subcommand.
pub const DISPATCH: &[(&str, &[&str])] = &[
    ("keygen", &["mems::KeyPair::generate"]),
    ("agg", &["mems::aggregate"]),
    ("verify", &["mems::verify"]),
    (
        "ptp serve",
        &["ptp::PtpServer::run", "ptp::Coordinator::new"],
    ),
    ("ptp create", &["ptp::PtpClient::create_session"]),
    ("ptp audit", &["ptp::PtpClient::audit"]),
    ("ptp replay", &["ptp::replay", "ptp::check_ordering"]),
    ("signer", &["ptp::run_signer"]),
    (
        "attack ksum",
        &["attacks::ksum_forge", "attacks::wagner_solve"],
    ),
    ("attack rogue-key", &["attacks::rogue_key_attack"]),
    (
        "attack ksum-vs-mems",
        &[
            "attacks::ksum_attempt_vs_mems",
            "attacks::timestamp_guessing",
        ],
    ),
    (
        "bench",
        &[
            "bench::bench_sign",
            "bench::bench_verify",
            "bench::bench_agg",
            "bench::bench_messages",
        ],
    ),
    (
        "endorse-sim",
        &[
            "endorse::run_endorsement",
            "endorse::signature_proportion",
            "endorse::verify_block_time",
        ],
    ),
];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or unreadable input. Exit code 2.
    #[error("{0}")]
    Usage(String),
    /// A signature, replay or protocol run failed. Exit code 1.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    commands::dispatch(cli.command)
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use std::collections::BTreeSet;

    fn leaves(cmd: &clap::Command, prefix: &str, out: &mut Vec<String>) {
        let subs: Vec<_> = cmd
            .get_subcommands()
            .filter(|c| c.get_name() != "help")
            .collect();
        if subs.is_empty() {
            out.push(prefix.trim().to_string());
        }
        for s in subs {
            leaves(s, &format!("{prefix} {}", s.get_name()), out);
        }
    }

    #[test]
    fn dispatch_table_covers_every_subcommand_once() {
        let mut found = Vec::new();
        leaves(&Cli::command(), "", &mut found);
        let table: Vec<_> = DISPATCH.iter().map(|(c, _)| c.to_string()).collect();
        assert_eq!(
            found.iter().collect::<BTreeSet<_>>(),
            table.iter().collect::<BTreeSet<_>>()
        );
        assert_eq!(table.len(), table.iter().collect::<BTreeSet<_>>().len());
    }

    #[test]
    fn every_operation_reachable_from_exactly_one_subcommand() {
        let ops: Vec<&str> = DISPATCH
            .iter()
            .flat_map(|(_, ops)| ops.iter().copied())
            .collect();
        let unique: BTreeSet<_> = ops.iter().collect();
        assert_eq!(
            ops.len(),
            unique.len(),
            "an operation is listed under two subcommands"
        );
        for required in [
            "mems::KeyPair::generate",
            "mems::aggregate",
            "mems::verify",
            "ptp::PtpServer::run",
            "ptp::replay",
            "ptp::run_signer",
            "attacks::ksum_forge",
            "attacks::rogue_key_attack",
            "attacks::ksum_attempt_vs_mems",
            "bench::bench_sign",
            "bench::bench_verify",
            "bench::bench_messages",
            "endorse::run_endorsement",
            "endorse::signature_proportion",
            "endorse::verify_block_time",
        ] {
            assert!(unique.contains(&required), "{required} is not reachable");
        }
    }

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
