//! TCP session host: one thread and one engine per connection.

use std::io::{self, BufReader, BufWriter};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use super::engine::{Engine, EngineConfig};
use super::protocol::{decode_event, encode, read_frame, write_frame, Command, Event, ProtocolError};

/// Source of command arrival timestamps, in seconds from connection start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClockKind {
    System,
    /// Frame `k` (from 0) is stamped `k * dt`; for reproducible sessions.
    Logical { dt: f64 },
}

#[derive(Debug)]
enum Clock {
    System(Instant),
    Logical { frames: u64, dt: f64 },
}

impl Clock {
    fn new(kind: ClockKind) -> Self {
        match kind {
            ClockKind::System => Clock::System(Instant::now()),
            ClockKind::Logical { dt } => Clock::Logical { frames: 0, dt },
        }
    }

    fn stamp(&mut self) -> f64 {
        match self {
            Clock::System(t0) => t0.elapsed().as_secs_f64(),
            Clock::Logical { frames, dt } => {
                let t = *frames as f64 * *dt;
                *frames += 1;
                t
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub engine: EngineConfig,
    pub clock: ClockKind,
    /// If set, each connection's command log is written here on close as
    /// `session-<k>.jsonl`.
    pub log_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            engine: EngineConfig::default(),
            clock: ClockKind::System,
            log_dir: None,
        }
    }
}

pub fn bind<A: ToSocketAddrs>(addr: A) -> io::Result<TcpListener> {
    TcpListener::bind(addr)
}

/// Accepts connections until the listener fails.
pub fn serve(listener: TcpListener, config: ServerConfig) -> io::Result<()> {
    let config = Arc::new(config);
    let counter = Arc::new(AtomicU64::new(0));
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        let config = Arc::clone(&config);
        let id = counter.fetch_add(1, Ordering::Relaxed);
        thread::spawn(move || {
            let _ = handle_connection(stream, &config, id);
        });
    }
    Ok(())
}

/// Runs one session to completion on `stream`.
pub fn handle_connection(stream: TcpStream, config: &ServerConfig, id: u64) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream.try_clone()?);
    let mut engine = Engine::new(config.engine.clone());
    let mut clock = Clock::new(config.clock);
    let result = loop {
        let events = match read_frame(&mut reader) {
            Ok(None) => break Ok(()),
            Ok(Some(payload)) => engine.apply_payload(clock.stamp(), &payload),
            Err(ProtocolError::Io(e)) => break Err(e),
            // the stream cannot be resynchronised after a bad length
            Err(e) => {
                let _ = write_frame(&mut writer, &encode(&Event::from(e)));
                break Ok(());
            }
        };
        if let Err(e) = events
            .iter()
            .try_for_each(|ev| write_frame(&mut writer, &encode(ev)))
        {
            break Err(e);
        }
    };
    if let Some(dir) = &config.log_dir {
        let _ = std::fs::write(dir.join(format!("session-{id}.jsonl")), engine.command_log_jsonl());
    }
    let _ = stream.shutdown(Shutdown::Both);
    result
}

/// Minimal blocking client, used by tests and scripts.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Client {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> io::Result<Self> {
        let s = TcpStream::connect(addr)?;
        s.set_nodelay(true)?;
        Ok(Client {
            reader: BufReader::new(s.try_clone()?),
            writer: BufWriter::new(s),
        })
    }

    pub fn send(&mut self, cmd: &Command) -> io::Result<()> {
        write_frame(&mut self.writer, &encode(cmd))
    }

    pub fn send_raw(&mut self, payload: &[u8]) -> io::Result<()> {
        write_frame(&mut self.writer, payload)
    }

    /// Next event, or `None` once the server has closed the stream.
    pub fn recv(&mut self) -> Result<Option<Event>, ProtocolError> {
        match read_frame(&mut self.reader)? {
            Some(p) => decode_event(&p).map(Some),
            None => Ok(None),
        }
    }
}
