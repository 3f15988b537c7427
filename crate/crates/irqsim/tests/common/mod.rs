//! Test support: a brute-force reference simulator and deterministic
//! instance generation.
//!
//! The reference simulator advances virtual time one nanosecond per loop
//! iteration and re-derives moderation, queueing and time accounting from
//! first principles. It shares nothing with the event engine except the type
//! definitions and the cost formulas, so agreement between the two is a
//! meaningful check.

use std::collections::VecDeque;

use irqsim::engine::{CauseCounts, SimulationResult, WorkloadSpec};
use irqsim::nic::{
    isr_duration, rx_duration, EndPolicy, InterruptCause, ModerationMode, NicConfig,
};
use irqsim::rng::SplitMix64;
use irqsim::trace::{Packet, Trace, TraceSource};

/// Scalar outputs of the reference simulator, comparable with
/// [`SimulationResult`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub execution_time_ns: u64,
    pub interrupt_count: u64,
    pub cause_counts: CauseCounts,
    pub stolen_isr_ns: u64,
    pub stolen_rx_ns: u64,
    pub stolen_before_completion_ns: u64,
    pub latencies_ns: Vec<u64>,
    pub dropped_packets: u64,
}

impl OracleResult {
    pub fn matches(&self, result: &SimulationResult) -> bool {
        self.execution_time_ns == result.execution_time_ns
            && self.interrupt_count == result.interrupt_count
            && self.cause_counts == result.cause_counts
            && self.stolen_isr_ns == result.stolen_isr_ns
            && self.stolen_rx_ns == result.stolen_rx_ns
            && self.stolen_before_completion_ns == result.stolen_before_completion_ns
            && self.latencies_ns == result.latencies_ns
            && self.dropped_packets == result.dropped_packets
    }
}

struct PendingEvent {
    cause: InterruptCause,
    batch: Vec<Packet>,
}

struct ActiveService {
    batch: Vec<Packet>,
    isr_left: u64,
    rx_left: u64,
}

/// Tick-stepped reference simulation at 1 ns resolution.
///
/// Within one tick: packet arrivals first (an arrival at a pending expiry
/// instant re-arms the timer / wins the counter tie), then end-of-trace
/// handling, then timer expiry, then one nanosecond of CPU work (interrupt
/// service before user code).
pub fn tick_simulate(trace: &Trace, nic: &NicConfig, workload: WorkloadSpec) -> OracleResult {
    let packets = trace.packets();
    let last_arrival = packets.last().map(|p| p.arrival_ns);
    let threshold = nic.mode.counter_threshold();
    let delay = nic.mode.timer_delay_ns();

    let mut next_packet = 0usize;
    let mut buffer: Vec<Packet> = Vec::new();
    let mut timer_expiry: Option<u64> = None;
    let mut queue: VecDeque<PendingEvent> = VecDeque::new();
    let mut active: Option<ActiveService> = None;

    let mut user_left = workload.required_compute_ns;
    let mut completion = (user_left == 0).then_some(0u64);

    let mut out = OracleResult {
        execution_time_ns: 0,
        interrupt_count: 0,
        cause_counts: CauseCounts::default(),
        stolen_isr_ns: 0,
        stolen_rx_ns: 0,
        stolen_before_completion_ns: 0,
        latencies_ns: Vec::new(),
        dropped_packets: 0,
    };

    let mut t = 0u64;
    loop {
        let idle = next_packet == packets.len()
            && buffer.is_empty()
            && timer_expiry.is_none()
            && queue.is_empty()
            && active.is_none();
        if idle && user_left == 0 {
            break;
        }
        if idle {
            // Nothing left but user compute; finish without event activity.
            completion = Some(t + user_left);
            break;
        }
        assert!(t < 1_000_000_000_000, "oracle runaway");

        // 1. Arrivals at this instant.
        while next_packet < packets.len() && packets[next_packet].arrival_ns == t {
            let packet = packets[next_packet];
            next_packet += 1;
            match nic.mode {
                ModerationMode::Simple => queue.push_back(PendingEvent {
                    cause: InterruptCause::PerPacket,
                    batch: vec![packet],
                }),
                _ => {
                    buffer.push(packet);
                    if threshold.is_some_and(|k| buffer.len() as u32 >= k) {
                        queue.push_back(PendingEvent {
                            cause: InterruptCause::CounterThreshold,
                            batch: std::mem::take(&mut buffer),
                        });
                        timer_expiry = None;
                    } else if let Some(d) = delay {
                        timer_expiry = Some(t + d);
                    }
                }
            }
        }

        // 2. End of trace.
        if next_packet == packets.len() && last_arrival == Some(t) && !buffer.is_empty() {
            match nic.end_policy {
                EndPolicy::Drop => {
                    out.dropped_packets += buffer.len() as u64;
                    buffer.clear();
                    timer_expiry = None;
                }
                EndPolicy::Flush => {
                    if timer_expiry.is_none() {
                        queue.push_back(PendingEvent {
                            cause: InterruptCause::EndFlush,
                            batch: std::mem::take(&mut buffer),
                        });
                    }
                    // An armed timer is left to expire naturally.
                }
            }
        }

        // 3. Timer expiry.
        if timer_expiry == Some(t) {
            queue.push_back(PendingEvent {
                cause: InterruptCause::TimerExpiry,
                batch: std::mem::take(&mut buffer),
            });
            timer_expiry = None;
        }

        // 4. One nanosecond of CPU.
        if active.is_none() {
            while let Some(event) = queue.pop_front() {
                let isr = isr_duration(&nic.delays, &event.batch);
                let rx = rx_duration(&nic.delays, &event.batch);
                out.interrupt_count += 1;
                out.cause_counts.bump(event.cause);
                if isr + rx == 0 {
                    // Zero-cost service completes at its start instant.
                    for p in &event.batch {
                        out.latencies_ns.push(t - p.arrival_ns);
                    }
                    continue;
                }
                active = Some(ActiveService {
                    batch: event.batch,
                    isr_left: isr,
                    rx_left: rx,
                });
                break;
            }
        }

        if let Some(service) = active.as_mut() {
            if service.isr_left > 0 {
                service.isr_left -= 1;
                out.stolen_isr_ns += 1;
            } else {
                service.rx_left -= 1;
                out.stolen_rx_ns += 1;
            }
            if user_left > 0 {
                out.stolen_before_completion_ns += 1;
            }
            if service.isr_left == 0 && service.rx_left == 0 {
                for p in &service.batch {
                    out.latencies_ns.push(t + 1 - p.arrival_ns);
                }
                active = None;
            }
        } else if user_left > 0 {
            user_left -= 1;
            if user_left == 0 {
                completion = Some(t + 1);
            }
        }

        t += 1;
    }

    out.execution_time_ns = completion.expect("workload never completed");
    out
}

/// One randomized small instance: a short trace plus NIC and workload
/// parameters, drawn deterministically from the given generator.
pub struct RandomInstance {
    pub trace: Trace,
    pub nic: NicConfig,
    pub workload: WorkloadSpec,
}

pub fn random_instance(rng: &mut SplitMix64) -> RandomInstance {
    let count = rng.next_below(21);
    let mut arrival = 0u64;
    let packets: Vec<Packet> = (0..count)
        .map(|_| {
            arrival += rng.next_below(5_000);
            Packet::new(arrival, 1 + rng.next_below(16) as u32)
        })
        .collect();
    let trace = Trace::new(packets, TraceSource::Unspecified);

    let threshold = 1 + rng.next_below(6) as u32;
    let delay_ns = 1 + rng.next_below(10_000);
    let mode = match rng.next_below(4) {
        0 => ModerationMode::Simple,
        1 => ModerationMode::Counter { threshold },
        2 => ModerationMode::Timer { delay_ns },
        _ => ModerationMode::Combined {
            threshold,
            delay_ns,
        },
    };
    let nic = NicConfig {
        mode,
        delays: irqsim::nic::DelayModel {
            isr_per_byte_ns: rng.next_below(51),
            isr_constant_ns: rng.next_below(10_001),
            rx_per_byte_ns: rng.next_below(51),
            rx_constant_ns: rng.next_below(10_001),
        },
        end_policy: if rng.next_below(4) == 0 {
            EndPolicy::Drop
        } else {
            EndPolicy::Flush
        },
    };
    let workload = WorkloadSpec {
        required_compute_ns: rng.next_below(20_001),
    };
    RandomInstance {
        trace,
        nic,
        workload,
    }
}
