use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use mems_attacks::ksum::setup as ksum_setup;
use mems_attacks::{
    ksum_attempt_vs_mems, ksum_forge, rogue_key_attack, timestamp_guessing, KSumConfig,
};
use mems_bench::endorse::{simulate, write_endorse_csv, PayloadSizes, SimConfig};
use mems_bench::{bench_grid, write_csv, GridSpec};
use mems_core::group::{Backend, Group, Ristretto, ToyGroup};
use mems_core::mems::{aggregate, verify, KeyPair};
use mems_core::oracles::Params;
use mems_ptp::coordinator::system_clock;
use mems_ptp::{replay, AuditRecord, Coordinator, PtpClient, PtpConfig, PtpServer, SessionId};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use crate::args::{parse_modes, parse_range, AttackCommand, Command, PtpCommand};
use crate::files::{
    parse_signature, read_keypair, read_message, read_roster, read_text, write_text,
};
use crate::{CliError, Result};

/// Runs `$body` with `$params` bound to the parameters of the chosen backend.
macro_rules! with_group {
    ($backend:expr, $params:ident => $body:expr) => {
        match $backend {
            Backend::Production => {
                let $params = Params::new(Ristretto);
                $body
            }
            Backend::Toy => {
                let $params = Params::new(ToyGroup::standard());
                $body
            }
        }
    };
}

fn rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Prints to stdout, or writes the file when `out` is given.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(failed)
        }
    }
}

fn json_line(v: &serde_json::Value) -> String {
    format!("{v}\n")
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Keygen { group, seed, out } => with_group!(group.group, params => {
            let kp = KeyPair::generate(&params, &mut rng(seed));
            emit(out.as_deref(), &format!("{}\n", kp.to_record(&params.group)))
        }),
        Command::Agg { group, roster } => with_group!(group.group, params => {
            let roster = read_roster(&params.group, &roster)?;
            let agg = aggregate(&params, &roster);
            emit(None, &format!("{}\n", params.group.element_to_hex(&agg.key)))
        }),
        Command::Verify {
            group,
            roster,
            agg_key,
            message,
            sig,
        } => with_group!(group.group, params => {
            let g = &params.group;
            let key = match (roster, agg_key) {
                (Some(path), _) => aggregate(&params, &read_roster(g, &path)?).key,
                (None, Some(hex)) => g.element_from_hex(hex.trim()).map_err(usage)?,
                (None, None) => return Err(usage("--roster or --agg-key is required")),
            };
            let m = read_message(&message)?;
            let valid = parse_signature(g, &read_text(&sig)?).is_some_and(|s| verify(&params, &key, &m, &s));
            emit(None, if valid { "valid\n" } else { "invalid\n" })?;
            if valid { Ok(()) } else { Err(failed("signature does not verify")) }
        }),
        Command::Ptp(cmd) => ptp(cmd),
        Command::Signer {
            group,
            connect,
            key,
            session,
            slot,
            seed,
            out,
        } => with_group!(group.group, params => {
            let g = &params.group;
            let kp = read_keypair(&params, &key)?;
            let id: SessionId = session.parse().map_err(usage)?;
            let mut client = PtpClient::connect(connect.as_str()).map_err(failed)?;
            let slot = match slot {
                Some(s) => s,
                None => {
                    let (roster, _) = client.session_info(g, id).map_err(failed)?;
                    roster
                        .keys()
                        .iter()
                        .position(|k| k == kp.public())
                        .ok_or_else(|| usage("key is not in the session roster"))?
                }
            };
            let (sig, agg, m) = mems_ptp::run_signer(&mut client, &params, kp, id, slot, &mut rng(seed)).map_err(failed)?;
            if !verify(&params, &agg.key, &m, &sig) {
                return Err(failed("joint signature does not verify"));
            }
            let hex = format!("{}\n", sig.to_hex(g));
            if let Some(p) = out.as_deref() {
                write_text(p, &hex)?;
            }
            emit(None, &hex)
        }),
        Command::Attack(cmd) => attack(cmd),
        Command::Bench {
            group,
            schemes,
            ns,
            reps,
            seed,
            out,
        } => with_group!(group.group, params => {
            let spec = GridSpec { schemes, ns, reps };
            let records = bench_grid(&params, &spec, &mut rng(seed)).map_err(usage)?;
            let mut buf = Vec::new();
            write_csv(&records, &mut buf).map_err(failed)?;
            emit(out.as_deref(), &String::from_utf8_lossy(&buf))
        }),
        Command::EndorseSim {
            group,
            endorsers,
            mode,
            block_size,
            reps,
            header_bytes,
            proposal_bytes,
            response_bytes,
            seed,
            out,
        } => with_group!(group.group, params => {
            let config = SimConfig {
                ns: parse_range(&endorsers).map_err(usage)?,
                modes: parse_modes(&mode).map_err(usage)?,
                sizes: PayloadSizes { header: header_bytes, proposal: proposal_bytes, response: response_bytes },
                block_size,
                reps,
            };
            let coordinator = Coordinator::new(params, PtpConfig::default());
            let records = simulate(&coordinator, &config, &mut rng(seed)).map_err(failed)?;
            let mut buf = Vec::new();
            write_endorse_csv(&records, &mut buf).map_err(failed)?;
            emit(out.as_deref(), &String::from_utf8_lossy(&buf))
        }),
    }
}

fn ptp(cmd: PtpCommand) -> Result<()> {
    match cmd {
        PtpCommand::Serve {
            group,
            listen,
            strict_timestamp,
            verify_partials,
            commit_deadline_ms,
            wait_ms,
            seed,
        } => {
            let config = PtpConfig {
                strict_timestamp,
                verify_partials,
                commit_deadline: commit_deadline_ms.map(Duration::from_millis),
            };
            with_group!(group.group, params => {
                let mut coordinator = Coordinator::new(params, config);
                if let Some(s) = seed {
                    coordinator = coordinator.with_seed(s);
                }
                let mut server = PtpServer::bind(listen.as_str(), Arc::new(coordinator))
                    .map_err(|e| usage(format!("cannot listen on {listen}: {e}")))?;
                if let Some(ms) = wait_ms {
                    server = server.with_wait(Duration::from_millis(ms));
                }
                emit(None, &format!("{}\n", server.local_addr().map_err(failed)?))?;
                server.run().map_err(failed)
            })
        }
        PtpCommand::Create {
            group,
            connect,
            roster,
            message,
        } => with_group!(group.group, params => {
            let roster = read_roster(&params.group, &roster)?;
            let m = read_message(&message)?;
            let mut client = PtpClient::connect(connect.as_str()).map_err(failed)?;
            let id = client.create_session(&params.group, &roster, &m).map_err(failed)?;
            emit(None, &format!("{id}\n"))
        }),
        PtpCommand::Audit {
            connect,
            session,
            out,
        } => {
            let id: SessionId = session.parse().map_err(usage)?;
            let mut client = PtpClient::connect(connect.as_str()).map_err(failed)?;
            let records = client.audit(id).map_err(failed)?;
            let text = serde_json::to_string_pretty(&records).map_err(failed)?;
            emit(out.as_deref(), &format!("{text}\n"))
        }
        PtpCommand::Replay { group, audit } => with_group!(group.group, params => {
            let records: Vec<AuditRecord> =
                serde_json::from_str(&read_text(&audit)?).map_err(|e| usage(format!("bad audit log: {e}")))?;
            match replay(&params, &records) {
                Ok(r) => emit(None, &json_line(&json!({
                    "replayed": true,
                    "session_id": r.session_id.to_string(),
                    "phase": r.phase,
                    "n": r.n,
                    "message_count": r.message_count,
                    "signature_valid": r.signature_valid,
                }))),
                Err(e) => {
                    emit(None, &json_line(&json!({ "replayed": false, "index": e.index, "reason": e.reason })))?;
                    Err(failed(e))
                }
            }
        }),
    }
}

fn attack(cmd: AttackCommand) -> Result<()> {
    match cmd {
        AttackCommand::Ksum {
            group,
            k,
            bits,
            list_size,
            retries,
            max_merged,
            seed,
        } => with_group!(group, p => {
            let g = p.group.clone();
            let mut rng = rng(seed);
            let (params, oracle, adversary) = ksum_setup(g, bits, &mut rng).map_err(usage)?;
            let config = KSumConfig { k, bits, list_size, retries, max_merged: (max_merged > 0).then_some(max_merged) };
            let report = ksum_forge(&params, &oracle, &adversary, config, &mut rng).map_err(usage)?;
            let gr = &params.group;
            eprintln!(
                "k-sum attack: k={k} b={bits} list={list_size}: {} after {} list draw(s), work {} (predicted {:.0}), {} ms",
                if report.succeeded() { "forgery found" } else { "no forgery" },
                report.attempts,
                report.work,
                report.predicted_cost,
                report.elapsed_ms
            );
            let forgery = report.forgery.as_ref().map(|f| json!({
                "message_hex": hex::encode(&f.message),
                "signature": f.signature.to_hex(gr),
                "aggregated_key": gr.element_to_hex(&f.aggregated_key),
                "challenge": f.challenge,
                "session_challenges": f.transcript.iter().map(|t| t.challenge).collect::<Vec<_>>(),
                "verifies": f.verifies,
                "fresh": f.fresh,
            }));
            emit(None, &json_line(&json!({
                "attack": "ksum",
                "k": k, "bits": bits, "list_size": list_size,
                "succeeded": report.succeeded(),
                "attempts": report.attempts,
                "work": report.work,
                "predicted_cost": report.predicted_cost,
                "elapsed_ms": report.elapsed_ms as u64,
                "forgery": forgery,
                "failure": report.failure,
            })))
        }),
        AttackCommand::RogueKey {
            group,
            honest,
            message,
            seed,
        } => with_group!(group, params => {
            let g = &params.group;
            let mut rng = rng(seed);
            let keys: Vec<_> = (0..honest).map(|_| *KeyPair::generate(&params, &mut rng).public()).collect();
            let d = rogue_key_attack(&params, &keys, message.as_bytes(), &mut rng).map_err(usage)?;
            eprintln!(
                "rogue key: plain-product forgery {}; MEMS aggregate {} to the adversary's key",
                if d.plain_forgery_verifies { "verifies" } else { "fails" },
                if d.mems_key_collapses { "collapses" } else { "does not collapse" }
            );
            emit(None, &json_line(&json!({
                "attack": "rogue-key",
                "honest_keys": honest,
                "rogue_public": g.element_to_hex(&d.rogue_public),
                "plain_key": g.element_to_hex(&d.plain_key),
                "forgery": d.forgery.to_hex(g),
                "plain_forgery_verifies": d.plain_forgery_verifies,
                "mems_key": g.element_to_hex(&d.mems_key),
                "mems_key_collapses": d.mems_key_collapses,
                "mems_forgery_verifies": d.mems_forgery_verifies,
            })))
        }),
        AttackCommand::KsumVsMems {
            group,
            k,
            honest,
            probes,
            strict_timestamp,
            window_ms,
            seed,
        } => {
            with_group!(group, params => {
                let mut rng = rng(seed);
                let config = PtpConfig { strict_timestamp, ..Default::default() };
                let mut coordinator = Coordinator::new(params.clone(), config);
                if let Some(s) = seed {
                    coordinator = coordinator.with_seed(s);
                }
                if honest == 0 {
                    return Err(usage("--honest must be at least 1"));
                }
                let honest: Vec<_> = (0..honest).map(|_| KeyPair::generate(&params, &mut rng)).collect();
                let adversary = KeyPair::generate(&params, &mut rng);
                let attempt = ksum_attempt_vs_mems(&coordinator, &honest, &adversary, k, probes, &mut rng).map_err(usage)?;
                let clock = system_clock();
                let guess = timestamp_guessing(&coordinator, &honest[0], &adversary, window_ms, || clock(), &mut rng)
                    .map_err(failed)?;
                eprintln!("k-sum vs coordinator: {}", attempt.explanation);
                eprintln!(
                    "timestamp guessing over {} candidates: {}",
                    guess.candidates,
                    match guess.matched_offset_ms {
                        Some(off) => format!("w predicted (offset {off} ms)"),
                        None => "no match".to_string(),
                    }
                );
                emit(None, &json_line(&json!({
                    "attack": "ksum-vs-mems",
                    "attempt": attempt,
                    "timestamp_guessing": guess,
                })))
            })
        }
    }
}
