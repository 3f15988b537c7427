//! Packets, traces and synthetic load generation.
//!
//! A trace is the load scenario fed to the simulator: an ordered sequence of
//! packet arrivals, each carrying a virtual-time arrival stamp in integer
//! nanoseconds and a wire length in bytes. Traces come from the uniform or
//! Poisson generators here, from canonical trace files, or from parsed PCAP
//! captures.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;

pub const NS_PER_SEC: f64 = 1e9;

/// A single packet arrival: when it hits the NIC and how long it is on the
/// wire. Lengths are at least one byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Packet {
    pub arrival_ns: u64,
    pub len_bytes: u32,
}

impl Packet {
    pub fn new(arrival_ns: u64, len_bytes: u32) -> Self {
        assert!(len_bytes >= 1, "packet length must be at least 1 byte");
        Self {
            arrival_ns,
            len_bytes,
        }
    }
}

/// Where a trace came from, kept alongside the packets so result files can
/// record the exact generating parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TraceSource {
    Uniform(UniformLoadSpec),
    Poisson(PoissonLoadSpec),
    TraceFile(PathBuf),
    Capture(PathBuf),
    Unspecified,
}

impl fmt::Display for TraceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceSource::Uniform(s) => write!(
                f,
                "uniform period_ns={} count={} length_bytes={} start_offset_ns={}",
                s.period_ns, s.count, s.length_bytes, s.start_offset_ns
            ),
            TraceSource::Poisson(s) => write!(
                f,
                "poisson lambda_pps={} count={} length_bytes={} seed={}",
                s.lambda_pps, s.count, s.length_bytes, s.seed
            ),
            TraceSource::TraceFile(p) => write!(f, "trace-file {}", p.display()),
            TraceSource::Capture(p) => write!(f, "capture {}", p.display()),
            TraceSource::Unspecified => write!(f, "unspecified"),
        }
    }
}

/// An ordered load scenario. Packets are non-decreasing in arrival time;
/// empty traces are legal.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    packets: Vec<Packet>,
    source: TraceSource,
}

impl Trace {
    /// Wraps an already sorted packet sequence.
    ///
    /// Panics if the ordering invariant is violated; generators and parsers
    /// are responsible for producing sorted input.
    pub fn new(packets: Vec<Packet>, source: TraceSource) -> Self {
        assert!(
            packets
                .windows(2)
                .all(|w| w[0].arrival_ns <= w[1].arrival_ns),
            "trace packets must be sorted by arrival time"
        );
        Self { packets, source }
    }

    /// Builds a trace from packets in capture/file order, stably sorting by
    /// arrival time. Returns the number of adjacent out-of-order records seen
    /// in the input.
    pub fn from_file_order(mut packets: Vec<Packet>, source: TraceSource) -> (Self, usize) {
        let reordered = packets
            .windows(2)
            .filter(|w| w[1].arrival_ns < w[0].arrival_ns)
            .count();
        packets.sort_by_key(|p| p.arrival_ns);
        (Self { packets, source }, reordered)
    }

    pub fn packets(&self) -> &[Packet] {
        &self.packets
    }

    pub fn source(&self) -> &TraceSource {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn total_bytes(&self) -> u64 {
        self.packets.iter().map(|p| p.len_bytes as u64).sum()
    }

    /// Consecutive inter-arrival gaps, one per packet pair.
    pub fn gaps_ns(&self) -> Vec<u64> {
        self.packets
            .windows(2)
            .map(|w| w[1].arrival_ns - w[0].arrival_ns)
            .collect()
    }
}

/// Constant-frequency load: `count` packets of `length_bytes`, one every
/// `period_ns` starting at `start_offset_ns`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformLoadSpec {
    pub period_ns: u64,
    pub count: u64,
    pub length_bytes: u32,
    #[serde(default)]
    pub start_offset_ns: u64,
}

impl UniformLoadSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.period_ns < 1 {
            return Err("uniform load: period_ns must be >= 1".into());
        }
        if self.length_bytes < 1 {
            return Err("uniform load: length_bytes must be >= 1".into());
        }
        Ok(())
    }
}

/// Poisson-process load: exponential inter-arrival gaps with rate
/// `lambda_pps` packets per second, drawn from a seeded SplitMix64.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonLoadSpec {
    pub lambda_pps: f64,
    pub count: u64,
    pub length_bytes: u32,
    pub seed: u64,
}

impl PoissonLoadSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !self.lambda_pps.is_finite() || self.lambda_pps <= 0.0 {
            return Err("poisson load: lambda_pps must be positive and finite".into());
        }
        if self.length_bytes < 1 {
            return Err("poisson load: length_bytes must be >= 1".into());
        }
        Ok(())
    }
}

/// Arrivals at `start_offset + i * period` for `i` in `[0, count)`.
pub fn generate_uniform(spec: &UniformLoadSpec) -> Trace {
    debug_assert!(spec.validate().is_ok());
    let packets = (0..spec.count)
        .map(|i| Packet::new(spec.start_offset_ns + i * spec.period_ns, spec.length_bytes))
        .collect();
    Trace::new(packets, TraceSource::Uniform(*spec))
}

/// One exponential inter-arrival gap in integer nanoseconds.
///
/// Inverse transform sampling: gap = -ln(u) / lambda seconds with
/// u in (0, 1], rounded half-up to nanoseconds.
fn gap_ns_from_unit(u: f64, lambda_pps: f64) -> u64 {
    debug_assert!(u > 0.0 && u <= 1.0);
    let seconds = -u.ln() / lambda_pps;
    (seconds * NS_PER_SEC + 0.5) as u64
}

/// Poisson arrivals: arrival_i is the running sum of seeded exponential gaps.
/// Equal seeds give byte-identical traces.
pub fn generate_poisson(spec: &PoissonLoadSpec) -> Trace {
    debug_assert!(spec.validate().is_ok());
    let mut rng = SplitMix64::new(spec.seed);
    let mut now_ns = 0u64;
    let mut packets = Vec::with_capacity(spec.count as usize);
    for _ in 0..spec.count {
        now_ns += gap_ns_from_unit(rng.next_unit(), spec.lambda_pps);
        packets.push(Packet::new(now_ns, spec.length_bytes));
    }
    Trace::new(packets, TraceSource::Poisson(*spec))
}

/// Histogram of inter-arrival gaps over half-open bins `[e_k, e_{k+1})`.
/// Gaps below the first edge and at or above the last are kept in the
/// underflow/overflow buckets so counts always conserve.
#[derive(Debug, Clone, PartialEq)]
pub struct GapHistogram {
    pub edges_ns: Vec<u64>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl GapHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum HistogramError {
    #[error("histogram needs at least two bin edges, got {0}")]
    TooFewEdges(usize),
    #[error("histogram bin edges must be strictly ascending (edge {index})")]
    NonAscendingEdges { index: usize },
}

pub fn interarrival_histogram(
    trace: &Trace,
    edges_ns: &[u64],
) -> Result<GapHistogram, HistogramError> {
    if edges_ns.len() < 2 {
        return Err(HistogramError::TooFewEdges(edges_ns.len()));
    }
    if let Some(i) = edges_ns.windows(2).position(|w| w[0] >= w[1]) {
        return Err(HistogramError::NonAscendingEdges { index: i + 1 });
    }
    let mut hist = GapHistogram {
        edges_ns: edges_ns.to_vec(),
        counts: vec![0; edges_ns.len() - 1],
        underflow: 0,
        overflow: 0,
    };
    for gap in trace.gaps_ns() {
        if gap < edges_ns[0] {
            hist.underflow += 1;
        } else if gap >= *edges_ns.last().unwrap() {
            hist.overflow += 1;
        } else {
            // partition_point gives the first edge > gap; the bin is one left.
            let bin = edges_ns.partition_point(|&e| e <= gap) - 1;
            hist.counts[bin] += 1;
        }
    }
    Ok(hist)
}

/// Errors for the canonical trace file format.
#[derive(Debug, thiserror::Error)]
pub enum TraceFileError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: arrival times must be non-decreasing")]
    Unsorted { line: usize },
}

/// Reads the canonical trace format: one `<arrival_ns>,<length_bytes>` pair
/// per line, `#` comments and blank lines ignored, lines sorted.
pub fn read_trace<R: BufRead>(reader: R, origin: &Path) -> Result<Trace, TraceFileError> {
    let mut packets: Vec<Packet> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let (a, l) = text
            .split_once(',')
            .ok_or_else(|| TraceFileError::Malformed {
                line: line_no,
                reason: "expected `<arrival_ns>,<length_bytes>`".into(),
            })?;
        let arrival_ns: u64 = a.trim().parse().map_err(|e| TraceFileError::Malformed {
            line: line_no,
            reason: format!("bad arrival time: {e}"),
        })?;
        let len_bytes: u32 = l.trim().parse().map_err(|e| TraceFileError::Malformed {
            line: line_no,
            reason: format!("bad length: {e}"),
        })?;
        if len_bytes < 1 {
            return Err(TraceFileError::Malformed {
                line: line_no,
                reason: "length_bytes must be >= 1".into(),
            });
        }
        if let Some(prev) = packets.last() {
            if arrival_ns < prev.arrival_ns {
                return Err(TraceFileError::Unsorted { line: line_no });
            }
        }
        packets.push(Packet::new(arrival_ns, len_bytes));
    }
    Ok(Trace::new(
        packets,
        TraceSource::TraceFile(origin.to_path_buf()),
    ))
}

pub fn read_trace_file(path: &Path) -> Result<Trace, TraceFileError> {
    let file = std::fs::File::open(path)?;
    read_trace(io::BufReader::new(file), path)
}

/// Writes the canonical trace format with a provenance comment header.
pub fn write_trace<W: Write>(trace: &Trace, mut writer: W) -> io::Result<()> {
    writeln!(writer, "# irqsim trace")?;
    writeln!(writer, "# source: {}", trace.source())?;
    for p in trace.packets() {
        writeln!(writer, "{},{}", p.arrival_ns, p.len_bytes)?;
    }
    Ok(())
}

pub fn write_trace_file(trace: &Trace, path: &Path) -> io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    write_trace(trace, &mut file)?;
    file.flush()
}
