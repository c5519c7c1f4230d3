//! TCP front end: one thread per connection, requests handled in order.
//!
//! A `COMMIT` is answered with `ACK`, then the connection blocks until the
//! session releases round one and receives `COMMITS_BCAST` and
//! `ROUND1_BCAST`. `PARTIAL` works the same way with `PARTIALS_BCAST`.

use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use mems_core::group::Group;

use crate::coordinator::Coordinator;
use crate::error::{ErrorCode, PtpError};
use crate::session::SessionId;
use crate::wire::{self, bad_frame, read_frame, write_frame, Frame, FrameType};

pub const DEFAULT_WAIT: Duration = Duration::from_secs(120);

pub struct PtpServer<G: Group> {
    coordinator: Arc<Coordinator<G>>,
    listener: TcpListener,
    wait: Duration,
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // unblock accept()
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

impl<G: Group + 'static> PtpServer<G> {
    pub fn bind(addr: impl ToSocketAddrs, coordinator: Arc<Coordinator<G>>) -> io::Result<Self> {
        Ok(PtpServer {
            coordinator,
            listener: TcpListener::bind(addr)?,
            wait: DEFAULT_WAIT,
        })
    }

    /// How long a connection waits for the rest of the session.
    pub fn with_wait(mut self, wait: Duration) -> Self {
        self.wait = wait;
        self
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn coordinator(&self) -> &Arc<Coordinator<G>> {
        &self.coordinator
    }

    /// Serves until the process exits.
    pub fn run(self) -> io::Result<()> {
        self.accept_loop(&AtomicBool::new(false))
    }

    /// Serves on a background thread until the handle is shut down or dropped.
    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = std::thread::spawn(move || {
            if let Err(e) = self.accept_loop(&flag) {
                log::error!("accept loop ended: {e}");
            }
        });
        Ok(ServerHandle {
            addr,
            stop,
            thread: Some(thread),
        })
    }

    fn accept_loop(&self, stop: &AtomicBool) -> io::Result<()> {
        for stream in self.listener.incoming() {
            if stop.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let coordinator = self.coordinator.clone();
            let wait = self.wait;
            std::thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                if let Err(e) = serve_connection(&coordinator, stream, wait) {
                    log::debug!("connection {peer:?} closed: {e}");
                }
            });
        }
        Ok(())
    }
}

fn serve_connection<G: Group>(
    c: &Coordinator<G>,
    stream: TcpStream,
    wait: Duration,
) -> io::Result<()> {
    let _ = stream.set_nodelay(true);
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    while let Some(frame) = read_frame(&mut reader)? {
        let replies = match frame {
            Ok(f) => {
                let sid = f.session_id.clone();
                handle(c, &f, wait).unwrap_or_else(|e| vec![Frame::error(sid, &e)])
            }
            Err(e) => vec![Frame::error("", &e)],
        };
        for r in &replies {
            write_frame(&mut writer, r)?;
        }
    }
    Ok(())
}

fn session_id(f: &Frame) -> Result<SessionId, PtpError> {
    f.session_id.parse()
}

/// Handles one request; the first reply is the immediate answer, any later
/// ones are broadcasts the request waited for.
pub fn handle<G: Group>(
    c: &Coordinator<G>,
    f: &Frame,
    wait: Duration,
) -> Result<Vec<Frame>, PtpError> {
    let g = &c.params().group;
    let slot = f.slot as usize;
    match f.kind {
        FrameType::Create => {
            let (roster, m) = wire::decode_create(g, &f.payload()?)?;
            let id = c.create_session(roster, &m)?;
            Ok(vec![Frame::new(FrameType::Ack, id.to_string(), 0, b"")])
        }
        FrameType::Info => {
            let id = session_id(f)?;
            let (roster, m) = c.session_info(id)?;
            Ok(vec![Frame::new(
                FrameType::Info,
                id.to_string(),
                0,
                &wire::encode_create(g, &roster, &m),
            )])
        }
        FrameType::Commit => {
            let id = session_id(f)?;
            let r = g
                .decode_element(&f.payload()?)
                .map_err(|e| bad_frame(e.to_string()))?;
            c.submit_commitment(id, slot, r)?;
            let ack = Frame::new(FrameType::Ack, id.to_string(), f.slot, b"");
            let bundle = match c.wait_round1(id, wait) {
                Ok(b) => b,
                Err(e) => return Ok(vec![ack, Frame::error(id.to_string(), &e)]),
            };
            let commits = Frame::new(
                FrameType::CommitsBcast,
                id.to_string(),
                f.slot,
                &wire::encode_elements(g, &bundle.commitments),
            );
            let round1 = Frame::new(
                FrameType::Round1Bcast,
                id.to_string(),
                f.slot,
                &wire::encode_round1(
                    g,
                    &bundle.timestamp,
                    &bundle.offset,
                    &bundle.offset_commitment,
                ),
            );
            Ok(vec![ack, commits, round1])
        }
        FrameType::Partial => {
            let id = session_id(f)?;
            let s = g
                .decode_scalar(&f.payload()?)
                .map_err(|e| bad_frame(e.to_string()))?;
            c.submit_partial(id, slot, s)?;
            let ack = Frame::new(FrameType::Ack, id.to_string(), f.slot, b"");
            match c.wait_partials(id, wait) {
                Ok(all) => Ok(vec![
                    ack,
                    Frame::new(
                        FrameType::PartialsBcast,
                        id.to_string(),
                        f.slot,
                        &wire::encode_scalars(g, &all),
                    ),
                ]),
                Err(e) => Ok(vec![ack, Frame::error(id.to_string(), &e)]),
            }
        }
        FrameType::Audit => {
            let id = session_id(f)?;
            let log = c.audit_export(id)?;
            let json = serde_json::to_vec(&log)
                .map_err(|e| PtpError::new(ErrorCode::BadFrame, e.to_string()))?;
            Ok(vec![Frame::new(
                FrameType::AuditLog,
                id.to_string(),
                0,
                &json,
            )])
        }
        other => Err(bad_frame(format!("{other:?} is not a request"))),
    }
}
