//! Key, roster, message and signature files.

use std::fs;
use std::path::Path;

use mems_core::group::Group;
use mems_core::mems::{KeyPair, Roster, Signature};
use mems_core::oracles::Params;

use crate::args::MessageArg;
use crate::{CliError, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

pub fn read_keypair<G: Group>(params: &Params<G>, path: &Path) -> Result<KeyPair<G>> {
    let text = read_text(path)?;
    let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    KeyPair::from_record(params, line)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// One key per non-empty line; the last whitespace-separated token is the
/// public key, so key files can be concatenated into a roster.
pub fn parse_roster<G: Group>(g: &G, text: &str) -> Result<Roster<G>> {
    let keys = text
        .lines()
        .filter_map(|l| l.split_whitespace().last())
        .map(|tok| g.element_from_hex(tok))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("bad roster entry: {e}")))?;
    Roster::new(keys).map_err(|e| CliError::Usage(format!("bad roster: {e}")))
}

pub fn read_roster<G: Group>(g: &G, path: &Path) -> Result<Roster<G>> {
    parse_roster(g, &read_text(path)?)
}

pub fn read_message(arg: &MessageArg) -> Result<Vec<u8>> {
    match (&arg.message, &arg.message_file) {
        (Some(m), _) => Ok(m.as_bytes().to_vec()),
        (None, Some(p)) => {
            fs::read(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))
        }
        (None, None) => Err(CliError::Usage("a message is required".into())),
    }
}

/// `None` when the file holds no well-formed signature.
pub fn parse_signature<G: Group>(g: &G, text: &str) -> Option<Signature<G>> {
    Signature::from_hex(g, text.trim()).ok()
}
