//! Two bindings of the master-worker exchange: a pool of threads in this
//! process, and child processes talking over loopback TCP.
//!
//! Either way the master sends at most one command to each worker per
//! round and receives the replies indexed by machine, so the order in
//! which workers finish never leaks into the results.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command as Process, Stdio};
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::protocol::{Command, Reply};
use super::worker::WorkerState;
use super::RuntimeError;

pub trait Transport: Send {
    fn machines(&self) -> usize;

    fn name(&self) -> &'static str;

    /// Delivers `cmds[m]` to worker m (skipping `None`) and returns the
    /// replies in machine order. Every reply of the round is collected
    /// before a failure is reported.
    fn exchange(&mut self, cmds: Vec<Option<Command>>) -> Result<Vec<Option<Reply>>, RuntimeError>;
}

fn check_round(replies: Vec<Option<Reply>>) -> Result<Vec<Option<Reply>>, RuntimeError> {
    for (index, r) in replies.iter().enumerate() {
        if let Some(Reply::Failed(message)) = r {
            return Err(RuntimeError::WorkerFailed {
                index,
                message: message.clone(),
            });
        }
    }
    Ok(replies)
}

struct ThreadWorker {
    commands: Sender<Command>,
    replies: Receiver<Reply>,
    handle: Option<JoinHandle<()>>,
}

/// Workers as threads of the current process.
pub struct ThreadTransport {
    workers: Vec<ThreadWorker>,
}

impl ThreadTransport {
    pub fn new(machines: usize) -> Self {
        Self::with_delays(vec![Duration::ZERO; machines])
    }

    /// Worker m sleeps `delays[m]` before each reply. Used to shuffle the
    /// order in which workers finish.
    pub fn with_delays(delays: Vec<Duration>) -> Self {
        let workers = delays
            .into_iter()
            .enumerate()
            .map(|(index, delay)| {
                let (cmd_tx, cmd_rx) = mpsc::channel::<Command>();
                let (rep_tx, rep_rx) = mpsc::channel::<Reply>();
                let handle = thread::Builder::new()
                    .name(format!("pgpr-worker-{index}"))
                    .spawn(move || {
                        let mut state = WorkerState::new(index);
                        while let Ok(cmd) = cmd_rx.recv() {
                            let stop = matches!(cmd, Command::Shutdown);
                            let reply = state.handle(cmd);
                            if !delay.is_zero() {
                                thread::sleep(delay);
                            }
                            if rep_tx.send(reply).is_err() || stop {
                                break;
                            }
                        }
                    })
                    .expect("failed to spawn worker thread");
                ThreadWorker {
                    commands: cmd_tx,
                    replies: rep_rx,
                    handle: Some(handle),
                }
            })
            .collect();
        Self { workers }
    }
}

impl Transport for ThreadTransport {
    fn machines(&self) -> usize {
        self.workers.len()
    }

    fn name(&self) -> &'static str {
        "threads"
    }

    fn exchange(&mut self, cmds: Vec<Option<Command>>) -> Result<Vec<Option<Reply>>, RuntimeError> {
        if cmds.len() != self.workers.len() {
            return Err(RuntimeError::Protocol(format!(
                "{} commands for {} workers",
                cmds.len(),
                self.workers.len()
            )));
        }
        let sent: Vec<bool> = cmds
            .into_iter()
            .zip(&self.workers)
            .map(|(c, w)| c.map(|c| w.commands.send(c).is_ok()).unwrap_or(false))
            .collect();
        let mut replies = Vec::with_capacity(sent.len());
        for (index, (was_sent, w)) in sent.into_iter().zip(&self.workers).enumerate() {
            if !was_sent {
                replies.push(None);
                continue;
            }
            match w.replies.recv() {
                Ok(r) => replies.push(Some(r)),
                Err(_) => replies.push(Some(Reply::Failed(format!("worker thread {index} exited")))),
            }
        }
        check_round(replies)
    }
}

impl Drop for ThreadTransport {
    fn drop(&mut self) {
        for w in &self.workers {
            let _ = w.commands.send(Command::Shutdown);
        }
        for w in &mut self.workers {
            let _ = w.replies.recv_timeout(Duration::from_secs(5));
            if let Some(h) = w.handle.take() {
                let _ = h.join();
            }
        }
    }
}

/// Length-prefixed JSON frames. Floats survive the round trip bit for bit.
pub fn write_frame<T: Serialize>(w: &mut impl Write, value: &T) -> io::Result<()> {
    let bytes = serde_json::to_vec(value).map_err(io::Error::other)?;
    w.write_all(&(bytes.len() as u64).to_le_bytes())?;
    w.write_all(&bytes)?;
    w.flush()
}

pub fn read_frame<T: DeserializeOwned>(r: &mut impl Read) -> io::Result<T> {
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = usize::try_from(u64::from_le_bytes(len)).map_err(io::Error::other)?;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    serde_json::from_slice(&buf).map_err(io::Error::other)
}

struct ProcessWorker {
    child: Child,
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

/// Workers as child processes of `exe`, started as
/// `exe worker --connect ADDR --index M`.
pub struct ProcessTransport {
    workers: Vec<ProcessWorker>,
}

const CONNECT_TIMEOUT: Duration = Duration::from_secs(60);

impl ProcessTransport {
    pub fn spawn(machines: usize, exe: &Path) -> Result<Self, RuntimeError> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?.to_string();
        let mut children = Vec::with_capacity(machines);
        for index in 0..machines {
            let child = Process::new(exe)
                .args(["worker", "--connect", &addr, "--index", &index.to_string()])
                .stdin(Stdio::null())
                .spawn()
                .map_err(|e| RuntimeError::Transport(format!("cannot start {}: {e}", exe.display())))?;
            children.push(Some(child));
        }

        listener.set_nonblocking(true)?;
        let mut streams: Vec<Option<TcpStream>> = (0..machines).map(|_| None).collect();
        let deadline = Instant::now() + CONNECT_TIMEOUT;
        let mut connected = 0;
        while connected < machines {
            match listener.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false)?;
                    stream.set_nodelay(true)?;
                    let mut s = stream;
                    let index: usize = read_frame(&mut s)?;
                    if index >= machines || streams[index].is_some() {
                        return Err(RuntimeError::Protocol(format!("unexpected worker index {index}")));
                    }
                    streams[index] = Some(s);
                    connected += 1;
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    for (index, c) in children.iter_mut().enumerate() {
                        if streams[index].is_none() {
                            if let Some(status) = c.as_mut().and_then(|c| c.try_wait().ok().flatten()) {
                                return Err(RuntimeError::WorkerFailed {
                                    index,
                                    message: format!("worker process exited before connecting: {status}"),
                                });
                            }
                        }
                    }
                    if Instant::now() > deadline {
                        return Err(RuntimeError::Transport("timed out waiting for workers".into()));
                    }
                    thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(e.into()),
            }
        }

        let workers = children
            .into_iter()
            .zip(streams)
            .map(|(child, stream)| {
                let stream = stream.expect("all workers connected");
                Ok(ProcessWorker {
                    child: child.expect("spawned above"),
                    reader: BufReader::new(stream.try_clone()?),
                    writer: BufWriter::new(stream),
                })
            })
            .collect::<io::Result<Vec<_>>>()?;
        Ok(Self { workers })
    }
}

impl Transport for ProcessTransport {
    fn machines(&self) -> usize {
        self.workers.len()
    }

    fn name(&self) -> &'static str {
        "processes"
    }

    fn exchange(&mut self, cmds: Vec<Option<Command>>) -> Result<Vec<Option<Reply>>, RuntimeError> {
        if cmds.len() != self.workers.len() {
            return Err(RuntimeError::Protocol(format!(
                "{} commands for {} workers",
                cmds.len(),
                self.workers.len()
            )));
        }
        let mut sent = Vec::with_capacity(cmds.len());
        for (c, w) in cmds.into_iter().zip(&mut self.workers) {
            sent.push(match c {
                Some(c) => Some(write_frame(&mut w.writer, &c).is_ok()),
                None => None,
            });
        }
        let mut replies = Vec::with_capacity(sent.len());
        for (index, (s, w)) in sent.into_iter().zip(&mut self.workers).enumerate() {
            replies.push(match s {
                None => None,
                Some(false) => Some(Reply::Failed(format!("lost connection to worker {index}"))),
                Some(true) => Some(
                    read_frame(&mut w.reader)
                        .unwrap_or_else(|e| Reply::Failed(format!("lost connection to worker {index}: {e}"))),
                ),
            });
        }
        check_round(replies)
    }
}

impl Drop for ProcessTransport {
    fn drop(&mut self) {
        for w in &mut self.workers {
            if write_frame(&mut w.writer, &Command::Shutdown).is_ok() {
                let _ = read_frame::<Reply>(&mut w.reader);
            }
        }
        for w in &mut self.workers {
            let _ = w.child.wait();
        }
    }
}

/// Body of a worker process: connect back to the master, announce the
/// machine index and serve commands until shutdown.
pub fn serve_worker(addr: &str, index: usize) -> io::Result<()> {
    let stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    write_frame(&mut writer, &index)?;
    let mut state = WorkerState::new(index);
    loop {
        let cmd: Command = match read_frame(&mut reader) {
            Ok(c) => c,
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e),
        };
        let stop = matches!(cmd, Command::Shutdown);
        write_frame(&mut writer, &state.handle(cmd))?;
        if stop {
            return Ok(());
        }
    }
}
