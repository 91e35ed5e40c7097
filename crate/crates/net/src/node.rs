use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use thiserror::Error;

use crdtsim::network::Replica;
use crdtsim::trace::render_log;
use crdtsim::{with_datatype, Datatype, LamportId, Message, NodeIndex};

use crate::config::PeerConfig;
use crate::control::Control;
use crate::frame::{encode_frame, read_frame};

const MIN_BACKOFF: Duration = Duration::from_millis(10);
const MAX_BACKOFF: Duration = Duration::from_millis(500);
const CONNECT_TIMEOUT: Duration = Duration::from_secs(1);

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid peer config: {0}")]
    Config(String),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("node has stopped")]
    Stopped,
}

enum AppEvent<Op> {
    Frame(Message<Op>),
    Command(String),
}

enum Outbound {
    Frame(Arc<Vec<u8>>),
    Reconnect,
}

/// A running node: send it control lines, read one response per command.
pub struct NodeHandle {
    index: NodeIndex,
    commands: Sender<String>,
    responses: Receiver<String>,
    app: JoinHandle<Result<(), NetError>>,
}

impl NodeHandle {
    pub fn index(&self) -> NodeIndex {
        self.index
    }

    pub fn send(&self, line: &str) -> Result<(), NetError> {
        self.commands.send(line.to_string()).map_err(|_| NetError::Stopped)
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Result<String, NetError> {
        self.responses.recv_timeout(timeout).map_err(|_| NetError::Stopped)
    }

    /// Sends a command and waits for its response.
    pub fn request(&self, line: &str) -> Result<String, NetError> {
        self.send(line)?;
        self.responses.recv().map_err(|_| NetError::Stopped)
    }

    pub fn join(self) -> Result<(), NetError> {
        drop(self.commands);
        self.app.join().unwrap_or(Err(NetError::Stopped))
    }
}

/// Reads frames from one inbound connection until it closes or misbehaves.
fn reader<D: Datatype>(mut stream: TcpStream, app: Sender<AppEvent<D::Op>>) {
    while let Ok(Some(msg)) = read_frame::<D>(&mut stream) {
        if app.send(AppEvent::Frame(msg)).is_err() {
            return;
        }
    }
}

/// Owns the link to one peer. Every frame ever sent is kept and replayed
/// after each (re)connect, so the link is at-least-once.
fn sender(addr: SocketAddr, rx: Receiver<Outbound>) {
    let mut outbox: Vec<Arc<Vec<u8>>> = Vec::new();
    let mut conn: Option<TcpStream> = None;
    let mut backoff = MIN_BACKOFF;
    loop {
        if conn.is_none() {
            if let Ok(mut s) = TcpStream::connect_timeout(&addr, CONNECT_TIMEOUT) {
                let _ = s.set_nodelay(true);
                if outbox.iter().all(|f| s.write_all(f).is_ok()) {
                    conn = Some(s);
                    backoff = MIN_BACKOFF;
                }
            }
        }
        let wait = if conn.is_some() { Duration::from_secs(60) } else { backoff };
        if conn.is_none() {
            backoff = (backoff * 2).min(MAX_BACKOFF);
        }
        match rx.recv_timeout(wait) {
            Ok(Outbound::Frame(f)) => {
                if let Some(s) = conn.as_mut() {
                    if s.write_all(&f).is_err() {
                        conn = None;
                    }
                }
                outbox.push(f);
            }
            Ok(Outbound::Reconnect) => {
                if let Some(s) = conn.take() {
                    let _ = s.shutdown(Shutdown::Both);
                }
                backoff = MIN_BACKOFF;
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => return,
        }
    }
}

struct App<D: Datatype> {
    replica: Replica<D>,
    holdback: BTreeMap<LamportId, Message<D::Op>>,
    peers: Vec<Sender<Outbound>>,
    log: Option<File>,
    logged: usize,
}

impl<D: Control> App<D> {
    fn receive(&mut self, msg: Message<D::Op>) {
        if self.replica.delivered_ids().contains(&msg.id) || self.holdback.contains_key(&msg.id) {
            return;
        }
        self.holdback.insert(msg.id, msg);
        while let Some(id) = self.holdback.values().find(|m| self.replica.is_ready(m)).map(|m| m.id) {
            let msg = self.holdback.remove(&id).expect("just found");
            if self.replica.deliver(msg).is_err() {
                break;
            }
        }
    }

    /// Handles one control line. `None` means quit.
    fn command(&mut self, line: &str) -> Option<String> {
        let words: Vec<&str> = line.split_whitespace().collect();
        let reply = match words.as_slice() {
            ["quit"] => return None,
            ["state"] => format!(
                "state {} {} {}",
                self.replica.delivered_ids().len(),
                self.holdback.len(),
                D::render(self.replica.state())
            ),
            ["reconnect"] => {
                for p in &self.peers {
                    let _ = p.send(Outbound::Reconnect);
                }
                "ok reconnect".into()
            }
            _ => match self.broadcast(&words) {
                Ok(id) => format!("ok {id}"),
                Err(e) => format!("err {e}"),
            },
        };
        Some(reply)
    }

    fn broadcast(&mut self, words: &[&str]) -> Result<LamportId, String> {
        let id = self.replica.next_id();
        let op = D::parse_op(words, self.replica.state(), id)?;
        let msg = self.replica.broadcast(op, true).map_err(|e| e.to_string())?;
        let frame = Arc::new(encode_frame::<D>(&msg));
        for p in &self.peers {
            let _ = p.send(Outbound::Frame(frame.clone()));
        }
        Ok(msg.id)
    }

    fn flush_log(&mut self) -> io::Result<()> {
        let history = self.replica.history();
        if let Some(f) = self.log.as_mut() {
            if self.logged < history.len() {
                f.write_all(render_log::<D>(&history[self.logged..]).as_bytes())?;
                f.flush()?;
            }
        }
        self.logged = history.len();
        Ok(())
    }
}

/// Binds this node's listener and starts its threads. The node runs until it
/// receives `quit` or its handle is dropped.
pub fn start<D: Control>(config: &PeerConfig, log: Option<PathBuf>) -> Result<NodeHandle, NetError> {
    config.validate()?;
    let me = config.self_index;
    let addr = config.addr_of(me)?;
    let listener = TcpListener::bind(addr).map_err(|source| NetError::Bind { addr, source })?;
    let log = log.map(File::create).transpose()?;

    let (app_tx, app_rx) = mpsc::channel::<AppEvent<D::Op>>();
    let inbound = app_tx.clone();
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let tx = inbound.clone();
            thread::spawn(move || reader::<D>(stream, tx));
        }
    });

    let mut peers = Vec::new();
    for p in config.peers.iter().filter(|p| p.index != me) {
        let peer_addr = config.addr_of(p.index)?;
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || sender(peer_addr, rx));
        peers.push(tx);
    }

    let (cmd_tx, cmd_rx) = mpsc::channel::<String>();
    thread::spawn(move || {
        for line in cmd_rx {
            if app_tx.send(AppEvent::Command(line)).is_err() {
                return;
            }
        }
        let _ = app_tx.send(AppEvent::Command("quit".into()));
    });

    let (resp_tx, resp_rx) = mpsc::channel::<String>();
    let app = thread::spawn(move || -> Result<(), NetError> {
        let mut app = App::<D> { replica: Replica::new(me), holdback: BTreeMap::new(), peers, log, logged: 0 };
        for event in app_rx {
            match event {
                AppEvent::Frame(msg) => app.receive(msg),
                AppEvent::Command(line) if line.trim().is_empty() => continue,
                AppEvent::Command(line) => match app.command(&line) {
                    Some(reply) => {
                        let _ = resp_tx.send(reply);
                    }
                    None => {
                        app.flush_log()?;
                        let _ = resp_tx.send("bye".into());
                        return Ok(());
                    }
                },
            }
            app.flush_log()?;
        }
        Ok(())
    });

    Ok(NodeHandle { index: me, commands: cmd_tx, responses: resp_rx, app })
}

/// Runs a node driven by line-oriented `input`, writing `ready <index>` once
/// the listener is bound and then one response line per command.
pub fn run_interactive<R, W>(
    config: &PeerConfig,
    log: Option<PathBuf>,
    input: R,
    output: &mut W,
) -> Result<(), NetError>
where
    R: BufRead + Send + 'static,
    W: Write,
{
    let handle = with_datatype!(config.datatype, D => start::<D>(config, log)?);
    writeln!(output, "ready {}", handle.index())?;
    output.flush()?;
    let commands = handle.commands.clone();
    thread::spawn(move || {
        for line in input.lines() {
            let Ok(line) = line else { break };
            if commands.send(line).is_err() {
                return;
            }
        }
        let _ = commands.send("quit".into());
    });
    while let Ok(reply) = handle.responses.recv() {
        writeln!(output, "{reply}")?;
        output.flush()?;
        if reply == "bye" {
            break;
        }
    }
    handle.join()
}
