//! NIC models: the interrupt cost model and the moderation state machine.
//!
//! Every interrupt is charged twice, once for the ISR and once for the
//! follow-up receiver task, each as a per-interrupt constant plus a per-byte
//! cost over the delivered batch. Moderation decides how arrivals batch into
//! interrupts: per-packet, after a packet counter threshold, after a
//! re-armable delay timer, or both combined.

use serde::{Deserialize, Serialize};

use crate::trace::{Packet, Trace};

/// The four delay coefficients of the interrupt cost model, in integer
/// nanoseconds. The constant term is paid once per interrupt, the per-byte
/// term once per delivered byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayModel {
    pub isr_per_byte_ns: u64,
    pub isr_constant_ns: u64,
    pub rx_per_byte_ns: u64,
    pub rx_constant_ns: u64,
}

impl DelayModel {
    /// An all-zero model steals no time and makes the experiment vacuous;
    /// it is rejected unless explicitly allowed.
    pub fn validate(&self, allow_zero_cost: bool) -> Result<(), String> {
        let all_zero = self.isr_per_byte_ns == 0
            && self.isr_constant_ns == 0
            && self.rx_per_byte_ns == 0
            && self.rx_constant_ns == 0;
        if all_zero && !allow_zero_cost {
            return Err("all four delay coefficients are zero (a zero-cost NIC); \
                 set allow_zero_cost to run anyway"
                .into());
        }
        Ok(())
    }
}

/// Interrupt moderation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModerationMode {
    /// One interrupt per packet, no moderation.
    Simple,
    /// Fire after `threshold` buffered packets.
    Counter { threshold: u32 },
    /// Fire when the delay timer expires; every arrival re-arms it to
    /// arrival + delay.
    Timer { delay_ns: u64 },
    /// Counter and timer active together; whichever triggers first fires and
    /// resets both.
    Combined { threshold: u32, delay_ns: u64 },
}

impl ModerationMode {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            ModerationMode::Simple => Ok(()),
            ModerationMode::Counter { threshold } => {
                if threshold < 1 {
                    Err("counter threshold must be >= 1".into())
                } else {
                    Ok(())
                }
            }
            ModerationMode::Timer { delay_ns } => {
                if delay_ns < 1 {
                    Err("timer delay must be >= 1 ns".into())
                } else {
                    Ok(())
                }
            }
            ModerationMode::Combined {
                threshold,
                delay_ns,
            } => {
                if threshold < 1 {
                    Err("counter threshold must be >= 1".into())
                } else if delay_ns < 1 {
                    Err("timer delay must be >= 1 ns".into())
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn counter_threshold(&self) -> Option<u32> {
        match *self {
            ModerationMode::Counter { threshold } | ModerationMode::Combined { threshold, .. } => {
                Some(threshold)
            }
            _ => None,
        }
    }

    pub fn timer_delay_ns(&self) -> Option<u64> {
        match *self {
            ModerationMode::Timer { delay_ns } | ModerationMode::Combined { delay_ns, .. } => {
                Some(delay_ns)
            }
            _ => None,
        }
    }

    pub fn with_counter_threshold(self, threshold: u32) -> Option<Self> {
        match self {
            ModerationMode::Counter { .. } => Some(ModerationMode::Counter { threshold }),
            ModerationMode::Combined { delay_ns, .. } => Some(ModerationMode::Combined {
                threshold,
                delay_ns,
            }),
            _ => None,
        }
    }

    pub fn with_timer_delay(self, delay_ns: u64) -> Option<Self> {
        match self {
            ModerationMode::Timer { .. } => Some(ModerationMode::Timer { delay_ns }),
            ModerationMode::Combined { threshold, .. } => Some(ModerationMode::Combined {
                threshold,
                delay_ns,
            }),
            _ => None,
        }
    }
}

/// Why an interrupt fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterruptCause {
    PerPacket,
    CounterThreshold,
    TimerExpiry,
    EndFlush,
}

/// One interrupt: when it fired, why, and the packets it delivers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterruptEvent {
    pub fire_ns: u64,
    pub cause: InterruptCause,
    pub batch: Vec<Packet>,
}

/// What happens to packets still buffered when the trace ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndPolicy {
    /// Deliver them: an armed timer expires naturally, a counter residue is
    /// flushed at the last arrival.
    #[default]
    Flush,
    /// Discard them (they are counted as dropped).
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NicConfig {
    pub mode: ModerationMode,
    pub delays: DelayModel,
    #[serde(default)]
    pub end_policy: EndPolicy,
}

impl NicConfig {
    pub fn validate(&self, allow_zero_cost: bool) -> Result<(), String> {
        self.mode.validate()?;
        self.delays.validate(allow_zero_cost)
    }
}

/// ISR time for one interrupt delivering `batch`: the constant once, the
/// per-byte cost for every packet.
pub fn isr_duration(delays: &DelayModel, batch: &[Packet]) -> u64 {
    debug_assert!(!batch.is_empty());
    delays.isr_constant_ns
        + batch
            .iter()
            .map(|p| delays.isr_per_byte_ns * p.len_bytes as u64)
            .sum::<u64>()
}

/// Receiver-task time for one interrupt, same structure as [`isr_duration`]
/// with the rx coefficients.
pub fn rx_duration(delays: &DelayModel, batch: &[Packet]) -> u64 {
    debug_assert!(!batch.is_empty());
    delays.rx_constant_ns
        + batch
            .iter()
            .map(|p| delays.rx_per_byte_ns * p.len_bytes as u64)
            .sum::<u64>()
}

/// Result of running the moderation state machine over a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Moderation {
    /// Interrupts in non-decreasing fire order.
    pub events: Vec<InterruptEvent>,
    /// Packets discarded by [`EndPolicy::Drop`].
    pub dropped_packets: u64,
}

/// Runs the moderation state machine over a sorted trace.
///
/// Tie-break: a packet arriving exactly at a pending timer expiry is
/// processed first (it re-arms the timer, or completes the counter in
/// combined mode — the counter wins the tie). After the last arrival, an
/// armed timer expires naturally (cause `TimerExpiry`); only a timer-less
/// counter residue is flushed with cause `EndFlush`.
pub fn moderate(mode: ModerationMode, trace: &Trace, end_policy: EndPolicy) -> Moderation {
    debug_assert!(mode.validate().is_ok());
    let mut events: Vec<InterruptEvent> = Vec::new();
    let mut buffer: Vec<Packet> = Vec::new();
    let mut timer_expiry_ns: Option<u64> = None;
    let threshold = mode.counter_threshold();
    let delay_ns = mode.timer_delay_ns();

    for &packet in trace.packets() {
        // Pending timer strictly before this arrival fires first.
        if let Some(expiry) = timer_expiry_ns {
            if expiry < packet.arrival_ns {
                events.push(InterruptEvent {
                    fire_ns: expiry,
                    cause: InterruptCause::TimerExpiry,
                    batch: std::mem::take(&mut buffer),
                });
                timer_expiry_ns = None;
            }
        }

        match mode {
            ModerationMode::Simple => {
                events.push(InterruptEvent {
                    fire_ns: packet.arrival_ns,
                    cause: InterruptCause::PerPacket,
                    batch: vec![packet],
                });
            }
            _ => {
                buffer.push(packet);
                if threshold.is_some_and(|k| buffer.len() as u32 >= k) {
                    events.push(InterruptEvent {
                        fire_ns: packet.arrival_ns,
                        cause: InterruptCause::CounterThreshold,
                        batch: std::mem::take(&mut buffer),
                    });
                    timer_expiry_ns = None;
                } else if let Some(d) = delay_ns {
                    timer_expiry_ns = Some(packet.arrival_ns + d);
                }
            }
        }
    }

    if !buffer.is_empty() {
        match end_policy {
            EndPolicy::Flush => {
                let (fire_ns, cause) = match timer_expiry_ns {
                    Some(expiry) => (expiry, InterruptCause::TimerExpiry),
                    None => (buffer.last().unwrap().arrival_ns, InterruptCause::EndFlush),
                };
                events.push(InterruptEvent {
                    fire_ns,
                    cause,
                    batch: std::mem::take(&mut buffer),
                });
            }
            EndPolicy::Drop => {
                return Moderation {
                    events,
                    dropped_packets: buffer.len() as u64,
                };
            }
        }
    }

    Moderation {
        events,
        dropped_packets: 0,
    }
}
