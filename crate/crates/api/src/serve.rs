//! `fermtwin serve`: the HTTP API and live stream, fed either by an
//! in-process simulation or by a controller over TCP.

use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use fermtwin_core::scenario::{Scenario, Speed, SystemSim};
use fermtwin_core::server::{StoreError, TimeSeriesStore, TwinServer};
use fermtwin_core::PressureBar;
use thiserror::Error;
use tokio::sync::oneshot;

use crate::clock::{system_now, Clock};
use crate::config::ServeConfig;
use crate::http::{router, AppState};
use crate::link::ControllerLink;

const FLUSH_PERIOD: Duration = Duration::from_secs(1);

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("store: {0}")]
    Store(#[from] StoreError),
}

/// A started server. Dropping it leaves the threads running; call
/// [`Running::shutdown`].
pub struct Running {
    pub http_addr: SocketAddr,
    pub controller_addr: Option<SocketAddr>,
    pub server: Arc<TwinServer>,
    pub clock: Clock,
    stop: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
    link: Option<ControllerLink>,
    http: tokio::task::JoinHandle<io::Result<()>>,
    http_stop: oneshot::Sender<()>,
}

/// Binds the listeners and starts all workers.
pub async fn start(cfg: &ServeConfig) -> Result<Running, ServeError> {
    let server_cfg = cfg.server();
    let store = match &cfg.store_path {
        Some(path) => TimeSeriesStore::open(path, server_cfg.raw_retention)?,
        None => TimeSeriesStore::new(server_cfg.raw_retention),
    };
    let server = Arc::new(TwinServer::with_store(server_cfg, store));
    server.register_batch(cfg.batch());
    let stop = Arc::new(AtomicBool::new(false));
    let mut workers = Vec::new();

    let (clock, link) = if cfg.simulate {
        let epoch = system_now();
        let clock = Clock::manual(epoch);
        let (cfg, server, clock2, stop) = (cfg.clone(), Arc::clone(&server), clock.clone(), Arc::clone(&stop));
        workers.push(
            thread::Builder::new()
                .name("sim".into())
                .spawn(move || run_sim(&cfg, epoch, server, clock2, stop))?,
        );
        (clock, None)
    } else {
        let listener = std::net::TcpListener::bind(cfg.controller_addr())?;
        let link = ControllerLink::start(listener, Arc::clone(&server), Clock::System)?;
        tracing::info!(addr = %link.local_addr(), "waiting for controller");
        (Clock::System, Some(link))
    };

    {
        let (server, stop) = (Arc::clone(&server), Arc::clone(&stop));
        workers.push(thread::Builder::new().name("store-flush".into()).spawn(move || {
            while !stop.load(Ordering::Acquire) {
                thread::sleep(FLUSH_PERIOD);
                if let Err(err) = server.flush_store() {
                    tracing::error!(%err, "store flush failed");
                }
            }
        })?);
    }

    let listener = tokio::net::TcpListener::bind(cfg.http_addr()).await?;
    let http_addr = listener.local_addr()?;
    let app = router(AppState {
        server: Arc::clone(&server),
        clock: clock.clone(),
    });
    let (http_stop, rx) = oneshot::channel();
    let http = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    tracing::info!(%http_addr, simulate = cfg.simulate, "serving");

    Ok(Running {
        http_addr,
        controller_addr: link.as_ref().map(ControllerLink::local_addr),
        server,
        clock,
        stop,
        workers,
        link,
        http,
        http_stop,
    })
}

impl Running {
    pub async fn shutdown(self) -> Result<(), ServeError> {
        let _ = self.http_stop.send(());
        let served = self.http.await.map_err(io::Error::other)?;
        self.stop.store(true, Ordering::Release);
        if let Some(link) = self.link {
            link.stop();
        }
        for w in self.workers {
            let _ = w.join();
        }
        self.server.flush_store()?;
        Ok(served?)
    }
}

/// Runs until Ctrl-C.
pub async fn serve(cfg: &ServeConfig) -> Result<(), ServeError> {
    let running = start(cfg).await?;
    tokio::signal::ctrl_c().await?;
    tracing::info!("shutting down");
    running.shutdown().await
}

fn run_sim(cfg: &ServeConfig, epoch: i64, server: Arc<TwinServer>, clock: Clock, stop: Arc<AtomicBool>) {
    let mut scenario = Scenario::nominal("serve", u64::MAX);
    scenario.batch = cfg.batch();
    scenario.seed = cfg.seed;
    scenario.epoch_ms = epoch;
    scenario.speed = cfg.sim_speed;
    scenario.plant.relief_threshold = PressureBar(cfg.relief_threshold_bar);
    let mut sim = SystemSim::with_server(scenario, cfg.seed, server);
    let started = Instant::now();
    while !stop.load(Ordering::Acquire) {
        sim.step();
        clock.set(epoch + sim.now_ms() as i64);
        match cfg.sim_speed {
            Speed::Factor(f) => {
                let target = Duration::from_secs_f64(sim.now_ms() as f64 / 1e3 / f);
                if let Some(wait) = target.checked_sub(started.elapsed()) {
                    thread::sleep(wait);
                }
            }
            // Yield so the API stays responsive.
            Speed::Max => thread::yield_now(),
        }
    }
}
