#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mems"));
    c.env_remove("MEMS_PTP_LISTEN");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn mems")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// A `ptp serve` child process, killed on drop.
pub struct Server {
    child: Child,
    pub addr: String,
}

impl Server {
    pub fn start(group: &str) -> Server {
        Server::start_with(group, &[])
    }

    pub fn start_with(group: &str, extra: &[&str]) -> Server {
        let mut child = bin()
            .args(["ptp", "serve", "--listen", "127.0.0.1:0", "--group", group])
            .args(extra)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn server");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        Server {
            child,
            addr: line.trim().to_string(),
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Writes `n` seeded key files and a roster built from them.
pub fn keys(dir: &Path, group: &str, n: usize, seed0: u64) -> (Vec<PathBuf>, PathBuf) {
    let mut roster = String::new();
    let paths: Vec<PathBuf> = (0..n)
        .map(|i| {
            let p = dir.join(format!("key{i}.txt"));
            let o = run(&[
                "keygen",
                "--group",
                group,
                "--seed",
                &(seed0 + i as u64).to_string(),
                "--out",
                p.to_str().unwrap(),
            ]);
            assert!(o.status.success());
            roster.push_str(&std::fs::read_to_string(&p).unwrap());
            p
        })
        .collect();
    let r = dir.join("roster.txt");
    std::fs::write(&r, roster).unwrap();
    (paths, r)
}

/// Runs one session with one signer process per key. Returns the session id
/// and the signature files written by each signer.
pub fn session(
    server: &Server,
    dir: &Path,
    group: &str,
    keys: &[PathBuf],
    roster: &Path,
    message: &str,
) -> (String, Vec<PathBuf>) {
    let o = run(&[
        "ptp",
        "create",
        "--connect",
        &server.addr,
        "--group",
        group,
        "--roster",
        roster.to_str().unwrap(),
        "--message",
        message,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let id = stdout(&o).trim().to_string();
    let children: Vec<(Child, PathBuf)> = keys
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let sig = dir.join(format!("sig{i}.txt"));
            let child = bin()
                .args([
                    "signer",
                    "--connect",
                    &server.addr,
                    "--group",
                    group,
                    "--key",
                    k.to_str().unwrap(),
                ])
                .args([
                    "--session",
                    &id,
                    "--seed",
                    &(100 + i).to_string(),
                    "--out",
                    sig.to_str().unwrap(),
                ])
                .stdout(Stdio::null())
                .spawn()
                .expect("spawn signer");
            (child, sig)
        })
        .collect();
    let sigs = children
        .into_iter()
        .map(|(mut c, sig)| {
            assert!(c.wait().unwrap().success(), "signer failed");
            sig
        })
        .collect();
    (id, sigs)
}
