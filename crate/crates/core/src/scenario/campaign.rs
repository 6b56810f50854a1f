use super::harness::{RunReport, Speed, SystemSim};
use super::model::Scenario;

/// How a campaign spreads its runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Runs on the rayon pool. Without the `parallel` feature this is the
    /// same as `Sequential`.
    Parallel,
}

/// Runs every `(scenario, seed)` pair. Reports come back in input order and
/// are identical under both execution modes.
pub fn run_campaign(runs: &[(Scenario, u64)], exec: Execution) -> Vec<RunReport> {
    let one = |(s, seed): &(Scenario, u64)| SystemSim::with_seed(s.clone(), *seed).run(Speed::Max);
    match exec {
        Execution::Sequential => runs.iter().map(one).collect(),
        Execution::Parallel => parallel_map(runs, one),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Nominal batch at the fastest sampling interval until `cycles` cycles
/// have completed.
pub fn endurance_scenario(cycles: u64, seed: u64) -> Scenario {
    let mut s = Scenario::nominal("endurance", cycles.saturating_mul(200_000).max(1));
    s.stop_after_cycles = Some(cycles);
    s.seed = seed;
    s
}

pub fn endurance(cycles: u64, seed: u64) -> RunReport {
    SystemSim::new(endurance_scenario(cycles, seed)).run(Speed::Max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let runs: Vec<_> = (0..3).map(|i| (Scenario::nominal("c", 20_000), i)).collect();
        let a = run_campaign(&runs, Execution::Sequential);
        let b = run_campaign(&runs, Execution::Parallel);
        assert_eq!(a, b);
        assert_eq!(a[1].seed, 1);
    }
}
