use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Simulated time in microseconds.
type SimUs = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkParams {
    pub latency_us: u64,
    /// Uniform extra delay in `[0, jitter_us]`.
    pub jitter_us: u64,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            latency_us: 20_000,
            jitter_us: 5_000,
        }
    }
}

/// In-process stand-in for the serial/TCP link. Carries encoded lines with
/// seeded latency and jitter, FIFO per direction. While partitioned, lines
/// are lost at delivery time.
#[derive(Debug, Clone)]
pub struct SimLink {
    params: LinkParams,
    rng: ChaCha8Rng,
    up: VecDeque<(SimUs, String)>,
    down: VecDeque<(SimUs, String)>,
    partitioned: bool,
    lost: [u64; 2],
}

impl SimLink {
    pub fn new(params: LinkParams, seed: u64) -> Self {
        Self {
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            up: VecDeque::new(),
            down: VecDeque::new(),
            partitioned: false,
            lost: [0; 2],
        }
    }

    pub fn set_partitioned(&mut self, on: bool) {
        self.partitioned = on;
    }

    pub fn is_partitioned(&self) -> bool {
        self.partitioned
    }

    pub fn send(&mut self, dir: Direction, line: String, now_us: SimUs) {
        let jitter = if self.params.jitter_us > 0 {
            self.rng.random_range(0..=self.params.jitter_us)
        } else {
            0
        };
        let queue = match dir {
            Direction::Up => &mut self.up,
            Direction::Down => &mut self.down,
        };
        let earliest = queue.back().map_or(0, |(t, _)| *t);
        let at = (now_us + self.params.latency_us + jitter).max(earliest);
        queue.push_back((at, line));
    }

    /// Earliest pending delivery in either direction, if due by `until_us`.
    pub fn next_due(&self, until_us: SimUs) -> Option<(SimUs, Direction)> {
        let up = self.up.front().map(|(t, _)| (*t, Direction::Up));
        let down = self.down.front().map(|(t, _)| (*t, Direction::Down));
        let next = match (up, down) {
            (Some(u), Some(d)) => Some(if d.0 < u.0 { d } else { u }),
            (a, b) => a.or(b),
        };
        next.filter(|(t, _)| *t <= until_us)
    }

    /// Pops the next line in `dir`. Returns `None` for the line itself when it
    /// was lost to a partition.
    pub fn pop(&mut self, dir: Direction) -> Option<(SimUs, Option<String>)> {
        let (queue, lost) = match dir {
            Direction::Up => (&mut self.up, &mut self.lost[0]),
            Direction::Down => (&mut self.down, &mut self.lost[1]),
        };
        let (t, line) = queue.pop_front()?;
        if self.partitioned {
            *lost += 1;
            Some((t, None))
        } else {
            Some((t, Some(line)))
        }
    }

    pub fn lost(&self, dir: Direction) -> u64 {
        match dir {
            Direction::Up => self.lost[0],
            Direction::Down => self.lost[1],
        }
    }

    pub fn in_flight(&self) -> usize {
        self.up.len() + self.down.len()
    }
}
