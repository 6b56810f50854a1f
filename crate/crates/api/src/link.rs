//! Controller link over TCP: newline-delimited JSON frames in both
//! directions. One controller at a time; a new connection replaces the old.
//!
//! A tick thread drives the server clock work and writes downlink frames to
//! the connected controller. Frames produced while nobody is connected are
//! dropped; heartbeats and resends recover from that.

use std::io::{self, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use fermtwin_core::protocol::{encode_line, LineReader};
use fermtwin_core::server::TwinServer;
use parking_lot::Mutex;

use crate::clock::Clock;

pub const LINK_TICK: Duration = Duration::from_millis(100);
const ACCEPT_POLL: Duration = Duration::from_millis(20);

type Current = Arc<Mutex<Option<(u64, TcpStream)>>>;

pub struct ControllerLink {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    current: Current,
    threads: Vec<JoinHandle<()>>,
}

impl ControllerLink {
    pub fn start(listener: TcpListener, server: Arc<TwinServer>, clock: Clock) -> io::Result<Self> {
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let stop = Arc::new(AtomicBool::new(false));
        let current: Current = Arc::new(Mutex::new(None));

        let accept = {
            let (stop, current, server, clock) =
                (Arc::clone(&stop), Arc::clone(&current), Arc::clone(&server), clock.clone());
            thread::Builder::new()
                .name("controller-accept".into())
                .spawn(move || accept_loop(listener, server, clock, current, stop))?
        };
        let tick = {
            let (stop, current) = (Arc::clone(&stop), Arc::clone(&current));
            thread::Builder::new()
                .name("controller-tick".into())
                .spawn(move || tick_loop(server, clock, current, stop))?
        };
        Ok(Self {
            addr,
            stop,
            current,
            threads: vec![accept, tick],
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stop(self) {
        self.stop.store(true, Ordering::Release);
        if let Some((_, s)) = self.current.lock().take() {
            let _ = s.shutdown(Shutdown::Both);
        }
        for t in self.threads {
            let _ = t.join();
        }
    }
}

fn accept_loop(
    listener: TcpListener,
    server: Arc<TwinServer>,
    clock: Clock,
    current: Current,
    stop: Arc<AtomicBool>,
) {
    let mut next_conn = 0u64;
    while !stop.load(Ordering::Acquire) {
        match listener.accept() {
            Ok((stream, peer)) => {
                next_conn += 1;
                let conn = next_conn;
                tracing::info!(%peer, conn, "controller connected");
                if let Err(err) = attach(stream, conn, &server, &clock, &current) {
                    tracing::warn!(%err, "controller connection setup failed");
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
            Err(err) => {
                tracing::warn!(%err, "accept failed");
                thread::sleep(ACCEPT_POLL);
            }
        }
    }
}

fn attach(
    stream: TcpStream,
    conn: u64,
    server: &Arc<TwinServer>,
    clock: &Clock,
    current: &Current,
) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let writer = stream.try_clone()?;
    if let Some((_, old)) = current.lock().replace((conn, writer)) {
        let _ = old.shutdown(Shutdown::Both);
    }
    let (server, clock, current) = (Arc::clone(server), clock.clone(), Arc::clone(current));
    thread::Builder::new()
        .name(format!("controller-read-{conn}"))
        .spawn(move || {
            let mut lines = LineReader::new(BufReader::new(stream));
            loop {
                match lines.next_line() {
                    Ok(Some(line)) => {
                        server.ingest_line(&line, clock.now());
                    }
                    Ok(None) => break,
                    Err(err) => {
                        tracing::warn!(%err, conn, "controller read failed");
                        break;
                    }
                }
            }
            tracing::info!(conn, "controller disconnected");
            let mut cur = current.lock();
            if cur.as_ref().is_some_and(|(c, _)| *c == conn) {
                *cur = None;
            }
        })?;
    Ok(())
}

fn tick_loop(server: Arc<TwinServer>, clock: Clock, current: Current, stop: Arc<AtomicBool>) {
    while !stop.load(Ordering::Acquire) {
        server.tick(clock.now());
        let frames = server.take_downlink();
        let mut cur = current.lock();
        if let Some((conn, stream)) = cur.as_mut() {
            let mut out = String::new();
            for f in &frames {
                out.push_str(&encode_line(f));
            }
            if let Err(err) = stream.write_all(out.as_bytes()) {
                tracing::warn!(%err, conn = *conn, "controller write failed");
                *cur = None;
            }
        }
        drop(cur);
        thread::sleep(LINK_TICK);
    }
}
