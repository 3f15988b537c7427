//! Classic PCAP parsing for replayed load scenarios.
//!
//! Only the classic libpcap layout is supported: a 24-byte global header
//! (magic, version, thiszone, sigfigs, snaplen, linktype) followed by
//! 16-byte record headers (ts_sec, ts_frac, incl_len, orig_len) and captured
//! bytes. Both byte orders and both timestamp resolutions are recognized;
//! pcapng is rejected with a dedicated error.

use std::path::Path;

use crate::trace::{Packet, Trace, TraceSource};

pub const MAGIC_MICROS: u32 = 0xA1B2_C3D4;
pub const MAGIC_NANOS: u32 = 0xA1B2_3C4D;
pub const MAGIC_PCAPNG: u32 = 0x0A0D_0D0A;

const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endianness {
    Little,
    Big,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeResolution {
    Microsecond,
    Nanosecond,
}

/// Capture-level facts from the global header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcapMeta {
    pub endianness: Endianness,
    pub resolution: TimeResolution,
    pub link_type: u32,
    pub snaplen: u32,
}

/// Parse output: metadata, the normalized trace and bookkeeping counters.
#[derive(Debug, Clone)]
pub struct ParsedCapture {
    pub meta: PcapMeta,
    pub trace: Trace,
    /// Records with orig_len = 0, skipped.
    pub zero_length_skipped: usize,
    /// Adjacent out-of-order timestamps seen in file order.
    pub reordered: usize,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PcapError {
    #[error("unknown capture magic 0x{magic:08X}")]
    UnknownMagic { magic: u32 },
    #[error("pcapng unsupported (only classic pcap files can be replayed)")]
    PcapngUnsupported,
    #[error("truncated global header: need {needed} bytes, got {got}")]
    TruncatedHeader { needed: usize, got: usize },
    #[error("truncated record {index} at byte offset {offset}")]
    TruncatedRecord { index: usize, offset: usize },
}

fn read_u32(bytes: &[u8], offset: usize, endianness: Endianness) -> u32 {
    let raw: [u8; 4] = bytes[offset..offset + 4].try_into().unwrap();
    match endianness {
        Endianness::Little => u32::from_le_bytes(raw),
        Endianness::Big => u32::from_be_bytes(raw),
    }
}

fn classify_magic(raw_le: u32) -> Result<(Endianness, TimeResolution), PcapError> {
    match raw_le {
        MAGIC_PCAPNG => Err(PcapError::PcapngUnsupported),
        m if m == MAGIC_MICROS => Ok((Endianness::Little, TimeResolution::Microsecond)),
        m if m == MAGIC_MICROS.swap_bytes() => Ok((Endianness::Big, TimeResolution::Microsecond)),
        m if m == MAGIC_NANOS => Ok((Endianness::Little, TimeResolution::Nanosecond)),
        m if m == MAGIC_NANOS.swap_bytes() => Ok((Endianness::Big, TimeResolution::Nanosecond)),
        m => Err(PcapError::UnknownMagic { magic: m }),
    }
}

/// Parses a complete classic PCAP file image into a replayable trace.
///
/// Arrival times are normalized so the earliest record lands at 0; wire
/// length is taken from orig_len. Out-of-order records are stably sorted
/// into the trace and counted.
pub fn parse_pcap(bytes: &[u8], origin: &Path) -> Result<ParsedCapture, PcapError> {
    if bytes.len() < 4 {
        return Err(PcapError::TruncatedHeader {
            needed: GLOBAL_HEADER_LEN,
            got: bytes.len(),
        });
    }
    let (endianness, resolution) = classify_magic(read_u32(bytes, 0, Endianness::Little))?;
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(PcapError::TruncatedHeader {
            needed: GLOBAL_HEADER_LEN,
            got: bytes.len(),
        });
    }
    let meta = PcapMeta {
        endianness,
        resolution,
        snaplen: read_u32(bytes, 16, endianness),
        link_type: read_u32(bytes, 20, endianness),
    };

    let mut raw: Vec<(u64, u32)> = Vec::new();
    let mut zero_length_skipped = 0usize;
    let mut offset = GLOBAL_HEADER_LEN;
    let mut index = 0usize;
    while offset < bytes.len() {
        if bytes.len() - offset < RECORD_HEADER_LEN {
            return Err(PcapError::TruncatedRecord { index, offset });
        }
        let ts_sec = read_u32(bytes, offset, endianness) as u64;
        let ts_frac = read_u32(bytes, offset + 4, endianness) as u64;
        let incl_len = read_u32(bytes, offset + 8, endianness) as usize;
        let orig_len = read_u32(bytes, offset + 12, endianness);
        if bytes.len() - offset - RECORD_HEADER_LEN < incl_len {
            return Err(PcapError::TruncatedRecord { index, offset });
        }
        let ts_ns = match resolution {
            TimeResolution::Microsecond => ts_sec * 1_000_000_000 + ts_frac * 1_000,
            TimeResolution::Nanosecond => ts_sec * 1_000_000_000 + ts_frac,
        };
        if orig_len == 0 {
            zero_length_skipped += 1;
        } else {
            raw.push((ts_ns, orig_len));
        }
        offset += RECORD_HEADER_LEN + incl_len;
        index += 1;
    }

    let first_ts = raw.iter().map(|&(ts, _)| ts).min().unwrap_or(0);
    let packets: Vec<Packet> = raw
        .into_iter()
        .map(|(ts, len)| Packet::new(ts - first_ts, len))
        .collect();
    let (trace, reordered) =
        Trace::from_file_order(packets, TraceSource::Capture(origin.to_path_buf()));
    Ok(ParsedCapture {
        meta,
        trace,
        zero_length_skipped,
        reordered,
    })
}

pub fn parse_pcap_file(path: &Path) -> Result<ParsedCapture, PcapFileError> {
    let bytes = std::fs::read(path)?;
    Ok(parse_pcap(&bytes, path)?)
}

#[derive(Debug, thiserror::Error)]
pub enum PcapFileError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Parse(#[from] PcapError),
}

/// Knobs for synthesizing capture files (fixtures, round-trip checks).
#[derive(Debug, Clone, Copy)]
pub struct PcapWriteOptions {
    pub endianness: Endianness,
    pub resolution: TimeResolution,
    pub snaplen: u32,
    pub link_type: u32,
}

impl Default for PcapWriteOptions {
    fn default() -> Self {
        Self {
            endianness: Endianness::Little,
            resolution: TimeResolution::Nanosecond,
            snaplen: 64,
            link_type: 1, // LINKTYPE_ETHERNET
        }
    }
}

/// Serializes a trace as a classic PCAP image with zero-filled payloads of
/// min(orig_len, snaplen) bytes. Microsecond resolution truncates arrival
/// times to whole microseconds.
pub fn write_pcap(trace: &Trace, opts: &PcapWriteOptions) -> Vec<u8> {
    let put = |out: &mut Vec<u8>, v: u32| match opts.endianness {
        Endianness::Little => out.extend_from_slice(&v.to_le_bytes()),
        Endianness::Big => out.extend_from_slice(&v.to_be_bytes()),
    };
    let magic = match opts.resolution {
        TimeResolution::Microsecond => MAGIC_MICROS,
        TimeResolution::Nanosecond => MAGIC_NANOS,
    };
    let mut out = Vec::new();
    put(&mut out, magic);
    put(&mut out, 0x0004_0002); // version 2.4: major in low half, minor in high
    put(&mut out, 0); // thiszone
    put(&mut out, 0); // sigfigs
    put(&mut out, opts.snaplen);
    put(&mut out, opts.link_type);
    for p in trace.packets() {
        let (sec, frac) = match opts.resolution {
            TimeResolution::Microsecond => {
                let us = p.arrival_ns / 1_000;
                (us / 1_000_000, us % 1_000_000)
            }
            TimeResolution::Nanosecond => {
                (p.arrival_ns / 1_000_000_000, p.arrival_ns % 1_000_000_000)
            }
        };
        let incl_len = p.len_bytes.min(opts.snaplen);
        put(&mut out, sec as u32);
        put(&mut out, frac as u32);
        put(&mut out, incl_len);
        put(&mut out, p.len_bytes);
        let len = out.len();
        out.resize(len + incl_len as usize, 0);
    }
    out
}

/// Default histogram bin edges for `inspect-pcap`: log-spaced, two per
/// decade from 1 us to 10 s.
pub fn interarrival_edges_default() -> Vec<u64> {
    let mut edges = Vec::new();
    let mut decade = 1_000u64;
    while decade <= 10_000_000_000 {
        edges.push(decade);
        if decade <= 10_000_000_000 / 10 {
            edges.push(decade * 316 / 100);
        }
        decade *= 10;
    }
    edges
}

/// Quick capture statistics for `inspect-pcap`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcapSummary {
    pub packet_count: usize,
    pub duration_ns: u64,
    /// (count - 1) / duration; undefined for fewer than two packets or a
    /// zero-length span.
    pub mean_rate_pps: Option<f64>,
    pub len_min: Option<u32>,
    pub len_mean: Option<f64>,
    pub len_max: Option<u32>,
}

pub fn pcap_summary(trace: &Trace) -> PcapSummary {
    let packets = trace.packets();
    let duration_ns = match (packets.first(), packets.last()) {
        (Some(first), Some(last)) => last.arrival_ns - first.arrival_ns,
        _ => 0,
    };
    let mean_rate_pps = if packets.len() >= 2 && duration_ns > 0 {
        Some((packets.len() as f64 - 1.0) / (duration_ns as f64 / 1e9))
    } else {
        None
    };
    PcapSummary {
        packet_count: packets.len(),
        duration_ns,
        mean_rate_pps,
        len_min: packets.iter().map(|p| p.len_bytes).min(),
        len_mean: if packets.is_empty() {
            None
        } else {
            Some(trace.total_bytes() as f64 / packets.len() as f64)
        },
        len_max: packets.iter().map(|p| p.len_bytes).max(),
    }
}
