//! Wall clock shared by the HTTP layer and the server loop.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use fermtwin_core::domain::WallMs;

#[derive(Debug, Clone)]
pub enum Clock {
    System,
    /// Driven by a simulation, which may run faster than real time.
    Manual(Arc<AtomicI64>),
}

pub fn system_now() -> WallMs {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as WallMs)
}

impl Clock {
    pub fn manual(start: WallMs) -> Self {
        Clock::Manual(Arc::new(AtomicI64::new(start)))
    }

    pub fn now(&self) -> WallMs {
        match self {
            Clock::System => system_now(),
            Clock::Manual(t) => t.load(Ordering::Acquire),
        }
    }

    /// Sets a manual clock; a no-op on the system clock.
    pub fn set(&self, t: WallMs) {
        if let Clock::Manual(c) = self {
            c.store(t, Ordering::Release);
        }
    }
}
