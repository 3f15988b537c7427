//! Analysis views over simulation results: cause ratios, latency summaries
//! and plot-ready sweep tables.

use serde::Serialize;

use crate::engine::{GridPoint, SimulationResult};

/// Fractions of interrupts per trigger cause. Only defined when at least one
/// interrupt fired; the fractions sum to 1 within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CauseRatio {
    pub per_packet_frac: f64,
    pub counter_frac: f64,
    pub timer_frac: f64,
    pub flush_frac: f64,
}

/// `None` is the undefined marker for zero-interrupt results (never NaN).
pub fn cause_ratio(result: &SimulationResult) -> Option<CauseRatio> {
    let total = result.cause_counts.total();
    if total == 0 {
        return None;
    }
    let frac = |n: u64| n as f64 / total as f64;
    Some(CauseRatio {
        per_packet_frac: frac(result.cause_counts.per_packet),
        counter_frac: frac(result.cause_counts.counter_threshold),
        timer_frac: frac(result.cause_counts.timer_expiry),
        flush_frac: frac(result.cause_counts.end_flush),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencySummary {
    pub mean_ns: f64,
    pub p50_ns: u64,
    pub p95_ns: u64,
    pub max_ns: u64,
}

/// Nearest-rank percentile over a sorted slice: the smallest value whose
/// rank is at least `p`/100 of the sample count.
fn nearest_rank(sorted: &[u64], p: f64) -> u64 {
    debug_assert!(!sorted.is_empty());
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// `None` is the undefined marker for packet-less results.
pub fn latency_summary(result: &SimulationResult) -> Option<LatencySummary> {
    if result.latencies_ns.is_empty() {
        return None;
    }
    let mut sorted = result.latencies_ns.clone();
    sorted.sort_unstable();
    let sum: u64 = sorted.iter().sum();
    Some(LatencySummary {
        mean_ns: sum as f64 / sorted.len() as f64,
        p50_ns: nearest_rank(&sorted, 50.0),
        p95_ns: nearest_rank(&sorted, 95.0),
        max_ns: *sorted.last().unwrap(),
    })
}

/// How seeds collapse when tabulating a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedAggregation {
    /// One cell per grid point per seed, scalars copied verbatim.
    #[default]
    None,
    /// One cell per grid point; mean and sample standard deviation over the
    /// seed axis.
    MeanStd,
}

/// Scalar metrics of one sweep cell. With [`SeedAggregation::None`] the
/// values are exact copies of the raw result; aggregated cells carry means
/// plus the execution-time spread.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub threshold: Option<u32>,
    pub delay_ns: Option<u64>,
    pub lambda_pps: Option<f64>,
    /// Absent for aggregated cells.
    pub seed: Option<u64>,
    /// Seeds folded into this cell (1 for raw cells).
    pub samples: usize,
    pub execution_time_ns: f64,
    /// Sample standard deviation of execution time; `None` for raw cells
    /// and singleton aggregates.
    pub execution_time_std_ns: Option<f64>,
    pub interrupt_count: f64,
    pub per_packet_count: f64,
    pub counter_count: f64,
    pub timer_count: f64,
    pub flush_count: f64,
    pub stolen_isr_ns: f64,
    pub stolen_rx_ns: f64,
    pub dropped_count: f64,
    pub counter_frac: Option<f64>,
    pub timer_frac: Option<f64>,
    pub latency_mean_ns: Option<f64>,
    pub latency_p50_ns: Option<f64>,
    pub latency_p95_ns: Option<f64>,
    pub latency_max_ns: Option<f64>,
}

/// A named axis of the sweep, as human-readable values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisDescriptor {
    pub name: &'static str,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub axes: Vec<AxisDescriptor>,
    pub cells: Vec<SweepCell>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TabulateError {
    #[error("sweep results have inconsistent grids: expected {expected} cells, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

fn raw_cell(point: &GridPoint, result: &SimulationResult) -> SweepCell {
    let ratio = cause_ratio(result);
    let latency = latency_summary(result);
    SweepCell {
        threshold: point.threshold,
        delay_ns: point.delay_ns,
        lambda_pps: point.lambda_pps,
        seed: point.seed,
        samples: 1,
        execution_time_ns: result.execution_time_ns as f64,
        execution_time_std_ns: None,
        interrupt_count: result.interrupt_count as f64,
        per_packet_count: result.cause_counts.per_packet as f64,
        counter_count: result.cause_counts.counter_threshold as f64,
        timer_count: result.cause_counts.timer_expiry as f64,
        flush_count: result.cause_counts.end_flush as f64,
        stolen_isr_ns: result.stolen_isr_ns as f64,
        stolen_rx_ns: result.stolen_rx_ns as f64,
        dropped_count: result.dropped_packets as f64,
        counter_frac: ratio.map(|r| r.counter_frac),
        timer_frac: ratio.map(|r| r.timer_frac),
        latency_mean_ns: latency.map(|l| l.mean_ns),
        latency_p50_ns: latency.map(|l| l.p50_ns as f64),
        latency_p95_ns: latency.map(|l| l.p95_ns as f64),
        latency_max_ns: latency.map(|l| l.max_ns as f64),
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    Some(var.sqrt())
}

fn mean_opt(values: Vec<Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.into_iter().flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(mean(&defined))
    }
}

/// Reshapes sweep results into a table. Raw mode is lossless; mean mode
/// folds the seed axis into per-point means with the execution-time spread.
pub fn tabulate(
    results: &[(GridPoint, SimulationResult)],
    axes: &[AxisDescriptor],
    aggregation: SeedAggregation,
) -> Result<SweepTable, TabulateError> {
    let expected: usize = axes
        .iter()
        .map(|a| a.values.len().max(1))
        .product::<usize>()
        .max(1);
    if results.len() != expected {
        return Err(TabulateError::DimensionMismatch {
            expected,
            got: results.len(),
        });
    }

    let cells = match aggregation {
        SeedAggregation::None => results.iter().map(|(p, r)| raw_cell(p, r)).collect(),
        SeedAggregation::MeanStd => {
            let mut groups: Vec<(GridPoint, Vec<SweepCell>)> = Vec::new();
            for (point, result) in results {
                let cell = raw_cell(point, result);
                let same_point = |g: &GridPoint| {
                    g.threshold == point.threshold
                        && g.delay_ns == point.delay_ns
                        && g.lambda_pps == point.lambda_pps
                };
                match groups.last_mut() {
                    // Seeds are the fastest-iterating axis, so a group's
                    // members are adjacent.
                    Some((g, cells)) if same_point(g) => cells.push(cell),
                    _ => groups.push((*point, vec![cell])),
                }
            }
            groups
                .into_iter()
                .map(|(point, cells)| {
                    let pick =
                        |f: fn(&SweepCell) -> f64| -> Vec<f64> { cells.iter().map(f).collect() };
                    let exec = pick(|c| c.execution_time_ns);
                    SweepCell {
                        threshold: point.threshold,
                        delay_ns: point.delay_ns,
                        lambda_pps: point.lambda_pps,
                        seed: None,
                        samples: cells.len(),
                        execution_time_ns: mean(&exec),
                        execution_time_std_ns: sample_std(&exec),
                        interrupt_count: mean(&pick(|c| c.interrupt_count)),
                        per_packet_count: mean(&pick(|c| c.per_packet_count)),
                        counter_count: mean(&pick(|c| c.counter_count)),
                        timer_count: mean(&pick(|c| c.timer_count)),
                        flush_count: mean(&pick(|c| c.flush_count)),
                        stolen_isr_ns: mean(&pick(|c| c.stolen_isr_ns)),
                        stolen_rx_ns: mean(&pick(|c| c.stolen_rx_ns)),
                        dropped_count: mean(&pick(|c| c.dropped_count)),
                        counter_frac: mean_opt(cells.iter().map(|c| c.counter_frac).collect()),
                        timer_frac: mean_opt(cells.iter().map(|c| c.timer_frac).collect()),
                        latency_mean_ns: mean_opt(
                            cells.iter().map(|c| c.latency_mean_ns).collect(),
                        ),
                        latency_p50_ns: mean_opt(cells.iter().map(|c| c.latency_p50_ns).collect()),
                        latency_p95_ns: mean_opt(cells.iter().map(|c| c.latency_p95_ns).collect()),
                        latency_max_ns: mean_opt(cells.iter().map(|c| c.latency_max_ns).collect()),
                    }
                })
                .collect()
        }
    };

    Ok(SweepTable {
        axes: axes.to_vec(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::CauseCounts;
    use proptest::prelude::*;

    fn result_with(cause_counts: CauseCounts, latencies: Vec<u64>) -> SimulationResult {
        SimulationResult {
            execution_time_ns: 0,
            interrupt_count: cause_counts.total(),
            cause_counts,
            stolen_isr_ns: 0,
            stolen_rx_ns: 0,
            stolen_before_completion_ns: 0,
            latencies_ns: latencies,
            dropped_packets: 0,
            events: None,
        }
    }

    #[test]
    fn cause_ratio_examples() {
        let r = result_with(
            CauseCounts {
                counter_threshold: 3,
                timer_expiry: 1,
                ..Default::default()
            },
            vec![],
        );
        let ratio = cause_ratio(&r).unwrap();
        assert_eq!(ratio.counter_frac, 0.75);
        assert_eq!(ratio.timer_frac, 0.25);
        assert_eq!(ratio.per_packet_frac, 0.0);
        assert_eq!(ratio.flush_frac, 0.0);

        let simple = result_with(
            CauseCounts {
                per_packet: 42,
                ..Default::default()
            },
            vec![],
        );
        assert_eq!(cause_ratio(&simple).unwrap().per_packet_frac, 1.0);

        let none = result_with(CauseCounts::default(), vec![]);
        assert!(cause_ratio(&none).is_none());
    }

    #[test]
    fn latency_summary_examples() {
        let r = result_with(CauseCounts::default(), vec![10, 20, 30]);
        let s = latency_summary(&r).unwrap();
        assert_eq!(s.mean_ns, 20.0);
        assert_eq!(s.p50_ns, 20);
        assert_eq!(s.max_ns, 30);

        let single = result_with(CauseCounts::default(), vec![7]);
        let s = latency_summary(&single).unwrap();
        assert_eq!((s.mean_ns, s.p50_ns, s.p95_ns, s.max_ns), (7.0, 7, 7, 7));

        let empty = result_with(CauseCounts::default(), vec![]);
        assert!(latency_summary(&empty).is_none());
    }

    // Nearest-rank definition check on 1..=1000.
    #[test]
    fn p95_of_thousand_uniform_latencies() {
        let r = result_with(CauseCounts::default(), (1..=1000).collect());
        assert_eq!(latency_summary(&r).unwrap().p95_ns, 950);
    }

    fn point(index: usize, seed: Option<u64>) -> GridPoint {
        GridPoint {
            index,
            threshold: Some(2),
            delay_ns: None,
            lambda_pps: None,
            seed,
        }
    }

    #[test]
    fn tabulate_keeps_every_cell() {
        let results: Vec<(GridPoint, SimulationResult)> = (0..9)
            .map(|i| {
                let mut r = result_with(
                    CauseCounts {
                        counter_threshold: 1,
                        ..Default::default()
                    },
                    vec![5],
                );
                r.execution_time_ns = 100 + i as u64;
                (point(i, None), r)
            })
            .collect();
        let axes = vec![AxisDescriptor {
            name: "counter_threshold",
            values: (0..9).map(|i| i.to_string()).collect(),
        }];
        let table = tabulate(&results, &axes, SeedAggregation::None).unwrap();
        assert_eq!(table.cells.len(), 9);
        // Lossless: the raw scalar is recoverable.
        assert_eq!(table.cells[4].execution_time_ns, 104.0);
    }

    #[test]
    fn tabulate_single_point() {
        let mut r = result_with(CauseCounts::default(), vec![]);
        r.execution_time_ns = 777;
        let table = tabulate(&[(point(0, None), r)], &[], SeedAggregation::None).unwrap();
        assert_eq!(table.cells.len(), 1);
        assert_eq!(table.cells[0].execution_time_ns, 777.0);
        assert!(table.cells[0].latency_mean_ns.is_none());
    }

    #[test]
    fn tabulate_mean_mode_averages_seeds() {
        let mut r1 = result_with(CauseCounts::default(), vec![]);
        r1.execution_time_ns = 100;
        let mut r2 = result_with(CauseCounts::default(), vec![]);
        r2.execution_time_ns = 200;
        let results = vec![(point(0, Some(1)), r1), (point(1, Some(2)), r2)];
        let axes = vec![AxisDescriptor {
            name: "seed",
            values: vec!["1".into(), "2".into()],
        }];
        let table = tabulate(&results, &axes, SeedAggregation::MeanStd).unwrap();
        assert_eq!(table.cells.len(), 1);
        let cell = &table.cells[0];
        assert_eq!(cell.execution_time_ns, 150.0);
        assert_eq!(cell.samples, 2);
        let std = cell.execution_time_std_ns.unwrap();
        assert!((std - 70.71067811865476).abs() < 1e-9);
    }

    #[test]
    fn tabulate_rejects_dimension_mismatch() {
        let r = result_with(CauseCounts::default(), vec![]);
        let axes = vec![AxisDescriptor {
            name: "timer_delay_ns",
            values: vec!["1".into(), "2".into()],
        }];
        let err = tabulate(&[(point(0, None), r)], &axes, SeedAggregation::None).unwrap_err();
        assert_eq!(
            err,
            TabulateError::DimensionMismatch {
                expected: 2,
                got: 1
            }
        );
    }

    proptest! {
        #[test]
        fn ratio_fractions_sum_to_one(
            a in 0u64..1000, b in 0u64..1000, c in 0u64..1000, d in 0u64..1000,
        ) {
            let r = result_with(
                CauseCounts {
                    per_packet: a,
                    counter_threshold: b,
                    timer_expiry: c,
                    end_flush: d,
                },
                vec![],
            );
            match cause_ratio(&r) {
                Some(ratio) => {
                    let sum = ratio.per_packet_frac
                        + ratio.counter_frac
                        + ratio.timer_frac
                        + ratio.flush_frac;
                    prop_assert!((sum - 1.0).abs() <= 1e-9);
                }
                None => prop_assert_eq!(a + b + c + d, 0),
            }
        }

        #[test]
        fn percentiles_are_monotone(latencies in proptest::collection::vec(0u64..1_000_000, 1..200)) {
            let r = result_with(CauseCounts::default(), latencies);
            let s = latency_summary(&r).unwrap();
            prop_assert!(s.p50_ns <= s.p95_ns);
            prop_assert!(s.p95_ns <= s.max_ns);
        }
    }
}
