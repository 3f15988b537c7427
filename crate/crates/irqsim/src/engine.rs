//! Discrete-event executor.
//!
//! One virtual CPU runs the user workload; interrupt events preempt it
//! entirely, ISR first and receiver task immediately after. Overlapping
//! events queue FIFO and are serviced serially without nesting. The workload
//! completes once it has accumulated its required compute time in the gaps
//! between services; events firing at or after that instant are still
//! serviced for the statistics but add nothing to the execution time.

use serde::{Deserialize, Serialize};

use crate::nic::{
    isr_duration, moderate, rx_duration, InterruptCause, InterruptEvent, ModerationMode, NicConfig,
};
use crate::trace::{generate_poisson, generate_uniform, PoissonLoadSpec, Trace, UniformLoadSpec};

/// The user code under test, reduced to the uninterrupted CPU time it needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub required_compute_ns: u64,
}

/// Per-cause interrupt counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CauseCounts {
    pub per_packet: u64,
    pub counter_threshold: u64,
    pub timer_expiry: u64,
    pub end_flush: u64,
}

impl CauseCounts {
    pub fn bump(&mut self, cause: InterruptCause) {
        match cause {
            InterruptCause::PerPacket => self.per_packet += 1,
            InterruptCause::CounterThreshold => self.counter_threshold += 1,
            InterruptCause::TimerExpiry => self.timer_expiry += 1,
            InterruptCause::EndFlush => self.end_flush += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.per_packet + self.counter_threshold + self.timer_expiry + self.end_flush
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    /// Instant the workload finishes its required compute.
    pub execution_time_ns: u64,
    pub interrupt_count: u64,
    pub cause_counts: CauseCounts,
    /// Total ISR time over all serviced interrupts.
    pub stolen_isr_ns: u64,
    /// Total receiver-task time over all serviced interrupts.
    pub stolen_rx_ns: u64,
    /// Service time charged before the workload completed; the exact excess
    /// of execution time over required compute.
    pub stolen_before_completion_ns: u64,
    /// Per-packet service-completion latency, in event service order.
    pub latencies_ns: Vec<u64>,
    pub dropped_packets: u64,
    /// Full interrupt timeline, when requested via [`SimOptions`].
    pub events: Option<Vec<InterruptEvent>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    /// Keep the full event timeline in the result.
    pub keep_events: bool,
    /// Discard events firing at or after workload completion instead of
    /// servicing them (their packets count as dropped).
    pub truncate_at_completion: bool,
}

pub fn simulate(trace: &Trace, nic: &NicConfig, workload: WorkloadSpec) -> SimulationResult {
    simulate_with(trace, nic, workload, &SimOptions::default())
}

pub fn simulate_with(
    trace: &Trace,
    nic: &NicConfig,
    workload: WorkloadSpec,
    opts: &SimOptions,
) -> SimulationResult {
    let moderation = moderate(nic.mode, trace, nic.end_policy);
    let mut dropped_packets = moderation.dropped_packets;

    let mut cause_counts = CauseCounts::default();
    let mut stolen_isr_ns = 0u64;
    let mut stolen_rx_ns = 0u64;
    let mut stolen_before_completion_ns = 0u64;
    let mut latencies_ns = Vec::new();
    let mut interrupt_count = 0u64;

    let required = workload.required_compute_ns;
    let mut compute_done = 0u64;
    let mut completion: Option<u64> = None;
    // End of the most recent service interval; user code runs in the gaps.
    let mut service_tail = 0u64;
    let mut serviced_events: Vec<InterruptEvent> = Vec::new();

    for event in moderation.events {
        let start = event.fire_ns.max(service_tail);

        // Let the workload consume the idle gap before this service.
        if completion.is_none() {
            let gap = start - service_tail;
            let need = required - compute_done;
            if need <= gap {
                completion = Some(
                    service_tail
                        .checked_add(need)
                        .expect("virtual time overflow"),
                );
                compute_done = required;
            } else {
                compute_done += gap;
            }
        }

        if opts.truncate_at_completion {
            if let Some(done) = completion {
                if event.fire_ns >= done {
                    dropped_packets += event.batch.len() as u64;
                    continue;
                }
            }
        }

        let isr = isr_duration(&nic.delays, &event.batch);
        let rx = rx_duration(&nic.delays, &event.batch);
        let cost = isr + rx;
        let end = start.checked_add(cost).expect("virtual time overflow");

        stolen_isr_ns += isr;
        stolen_rx_ns += rx;
        if completion.is_none() {
            stolen_before_completion_ns += cost;
        }
        cause_counts.bump(event.cause);
        interrupt_count += 1;
        for p in &event.batch {
            latencies_ns.push(end - p.arrival_ns);
        }
        service_tail = end;
        if opts.keep_events {
            serviced_events.push(event);
        }
    }

    let execution_time_ns = completion.unwrap_or_else(|| {
        service_tail
            .checked_add(required - compute_done)
            .expect("virtual time overflow")
    });

    SimulationResult {
        execution_time_ns,
        interrupt_count,
        cause_counts,
        stolen_isr_ns,
        stolen_rx_ns,
        stolen_before_completion_ns,
        latencies_ns,
        dropped_packets,
        events: opts.keep_events.then_some(serviced_events),
    }
}

/// Parameter lists for a cartesian sweep. Empty lists mean "not swept";
/// iteration order is thresholds, then delays, then lambdas, then seeds
/// (seeds fastest).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    #[serde(default)]
    pub counter_thresholds: Vec<u32>,
    #[serde(default)]
    pub timer_delays_ns: Vec<u64>,
    #[serde(default)]
    pub lambdas_pps: Vec<f64>,
    #[serde(default)]
    pub seeds: Vec<u64>,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.counter_thresholds.is_empty()
            && self.timer_delays_ns.is_empty()
            && self.lambdas_pps.is_empty()
            && self.seeds.is_empty()
    }

    pub fn point_count(&self) -> usize {
        let dim = |n: usize| n.max(1);
        dim(self.counter_thresholds.len())
            * dim(self.timer_delays_ns.len())
            * dim(self.lambdas_pps.len())
            * dim(self.seeds.len())
    }

    /// All grid points in deterministic order.
    pub fn points(&self) -> Vec<GridPoint> {
        fn axis<T: Copy>(values: &[T]) -> Vec<Option<T>> {
            if values.is_empty() {
                vec![None]
            } else {
                values.iter().copied().map(Some).collect()
            }
        }
        let mut points = Vec::with_capacity(self.point_count());
        let mut index = 0;
        for &threshold in &axis(&self.counter_thresholds) {
            for &delay_ns in &axis(&self.timer_delays_ns) {
                for &lambda_pps in &axis(&self.lambdas_pps) {
                    for &seed in &axis(&self.seeds) {
                        points.push(GridPoint {
                            index,
                            threshold,
                            delay_ns,
                            lambda_pps,
                            seed,
                        });
                        index += 1;
                    }
                }
            }
        }
        points
    }
}

/// One cell of the sweep: the axis values applied for this run. `None`
/// fields fall back to the base configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub index: usize,
    pub threshold: Option<u32>,
    pub delay_ns: Option<u64>,
    pub lambda_pps: Option<f64>,
    pub seed: Option<u64>,
}

impl std::fmt::Display for GridPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "grid point {}", self.index)?;
        if let Some(k) = self.threshold {
            write!(f, " threshold={k}")?;
        }
        if let Some(d) = self.delay_ns {
            write!(f, " delay_ns={d}")?;
        }
        if let Some(l) = self.lambda_pps {
            write!(f, " lambda_pps={l}")?;
        }
        if let Some(s) = self.seed {
            write!(f, " seed={s}")?;
        }
        Ok(())
    }
}

/// The load side of a sweep: a fixed trace is shared by every point, a
/// generated load is re-derived per point from the seed/lambda axes.
#[derive(Debug, Clone)]
pub enum SweepLoad {
    Fixed(Trace),
    Uniform(UniformLoadSpec),
    Poisson(PoissonLoadSpec),
}

#[derive(Debug, thiserror::Error)]
#[error("{point}: {reason}")]
pub struct SweepError {
    pub point: GridPoint,
    pub reason: String,
}

fn apply_point(
    base_mode: ModerationMode,
    load: &SweepLoad,
    point: &GridPoint,
) -> Result<(ModerationMode, Option<Trace>), String> {
    let mut mode = base_mode;
    if let Some(k) = point.threshold {
        if k < 1 {
            return Err("counter threshold must be >= 1".into());
        }
        mode = mode
            .with_counter_threshold(k)
            .ok_or("counter threshold axis requires a counter or combined mode")?;
    }
    if let Some(d) = point.delay_ns {
        if d < 1 {
            return Err("timer delay must be >= 1 ns".into());
        }
        mode = mode
            .with_timer_delay(d)
            .ok_or("timer delay axis requires a timer or combined mode")?;
    }
    let trace = match load {
        SweepLoad::Fixed(_) => {
            if point.lambda_pps.is_some() {
                return Err("lambda axis requires a poisson load".into());
            }
            if point.seed.is_some() {
                return Err("seed axis requires a generated load".into());
            }
            None
        }
        SweepLoad::Uniform(spec) => {
            if point.lambda_pps.is_some() {
                return Err("lambda axis requires a poisson load".into());
            }
            if point.seed.is_some() {
                return Err("seed axis requires a poisson load".into());
            }
            Some(generate_uniform(spec))
        }
        SweepLoad::Poisson(spec) => {
            let mut spec = *spec;
            if let Some(lambda) = point.lambda_pps {
                if !lambda.is_finite() || lambda <= 0.0 {
                    return Err("lambda must be positive and finite".into());
                }
                // Scaling count with lambda keeps the observation window
                // fixed, so a larger lambda really is a heavier load.
                spec.count = ((spec.count as f64) * lambda / spec.lambda_pps).round() as u64;
                spec.lambda_pps = lambda;
            }
            if let Some(seed) = point.seed {
                spec.seed = seed;
            }
            Some(generate_poisson(&spec))
        }
    };
    Ok((mode, trace))
}

/// Runs every grid point independently against the base configuration.
/// Points are simulated in parallel when a rayon pool is available; results
/// are always returned in grid order.
pub fn simulate_sweep(
    load: &SweepLoad,
    nic: &NicConfig,
    grid: &SweepGrid,
    workload: WorkloadSpec,
    opts: &SimOptions,
) -> Result<Vec<(GridPoint, SimulationResult)>, SweepError> {
    use rayon::prelude::*;

    let points = grid.points();
    let results: Vec<Result<(GridPoint, SimulationResult), SweepError>> = points
        .into_par_iter()
        .map(|point| {
            let (mode, generated) = apply_point(nic.mode, load, &point)
                .map_err(|reason| SweepError { point, reason })?;
            let nic = NicConfig {
                mode,
                ..nic.clone()
            };
            let trace = match (&generated, load) {
                (Some(t), _) => t,
                (None, SweepLoad::Fixed(t)) => t,
                (None, _) => unreachable!("generated loads always produce a trace"),
            };
            Ok((point, simulate_with(trace, &nic, workload, opts)))
        })
        .collect();
    results.into_iter().collect()
}
