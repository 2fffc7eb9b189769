//! TCP front end: one session per connection, commands queued in arrival
//! order, ticks paced in wall-clock time while running.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use log::{info, warn};

use crate::config::EngineConfig;

use super::protocol::{parse_command, Message};
use super::session::Session;

fn send(out: &mut impl Write, msgs: &[Message]) -> std::io::Result<()> {
    for m in msgs {
        writeln!(out, "{}", m.to_line())?;
    }
    out.flush()
}

/// Runs one session over a connected stream until the client disconnects.
pub fn run_session(stream: TcpStream, config: EngineConfig) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    let (tx, rx) = mpsc::channel::<String>();
    let reader = thread::spawn(move || {
        for line in BufReader::new(stream).lines() {
            match line {
                Ok(l) if l.trim().is_empty() => {}
                Ok(l) => {
                    if tx.send(l).is_err() {
                        break;
                    }
                }
                Err(_) => break,
            }
        }
    });

    let tick_wall = Duration::from_secs_f64(config.tick * config.pacing_ms / 1000.0);
    let mut session = Session::new(config);
    let mut next_tick = Instant::now();
    loop {
        let wait = if session.running {
            next_tick.saturating_duration_since(Instant::now())
        } else {
            Duration::from_millis(200)
        };
        match rx.recv_timeout(wait) {
            Ok(line) => {
                let msgs = match parse_command(&line) {
                    Ok(cmd) => {
                        let was_running = session.running;
                        let out = session.handle(cmd);
                        if session.running && !was_running {
                            next_tick = Instant::now() + tick_wall;
                        }
                        out
                    }
                    Err(e) => vec![Message::error(e)],
                };
                send(&mut writer, &msgs)?;
            }
            Err(RecvTimeoutError::Timeout) => {
                if session.running && Instant::now() >= next_tick {
                    next_tick += tick_wall;
                    let msgs = session.advance();
                    send(&mut writer, &msgs)?;
                }
            }
            Err(RecvTimeoutError::Disconnected) => break,
        }
    }
    let _ = reader.join();
    Ok(())
}

/// Accepts connections forever, one thread per session.
pub fn serve(addr: impl ToSocketAddrs, config: EngineConfig) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr)?;
    serve_on(listener, config)
}

pub fn serve_on(listener: TcpListener, config: EngineConfig) -> std::io::Result<()> {
    info!("panel service listening on {}", listener.local_addr()?);
    for stream in listener.incoming() {
        let stream = stream?;
        let cfg = config.clone();
        thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            if let Err(e) = run_session(stream, cfg) {
                warn!("session {peer:?} ended: {e}");
            }
        });
    }
    Ok(())
}
