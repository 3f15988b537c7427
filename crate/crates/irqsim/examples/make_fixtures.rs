//! Regenerates the capture fixtures under `fixtures/`.
//!
//! Both traces carry 600 packets of 200 bytes over roughly 0.3 s of virtual
//! time, but with opposite arrival patterns:
//!   - bursty.pcap: 30 bursts of 20 packets, 2 us apart inside a burst,
//!     bursts every 10 ms (streaming-style traffic);
//!   - continuous.pcap: one packet every 0.5 ms (conferencing-style
//!     traffic).
//!
//! Run from the workspace root: `cargo run -p irqsim --example make_fixtures`

use std::path::Path;

use irqsim::pcap::{write_pcap, PcapWriteOptions};
use irqsim::trace::{Packet, Trace, TraceSource};

fn main() -> std::io::Result<()> {
    let out_dir = Path::new("fixtures");
    std::fs::create_dir_all(out_dir)?;

    let mut bursty = Vec::new();
    for burst in 0..30u64 {
        for i in 0..20u64 {
            bursty.push(Packet::new(burst * 10_000_000 + i * 2_000, 200));
        }
    }
    let bursty = Trace::new(bursty, TraceSource::Unspecified);

    let continuous: Vec<Packet> = (0..600u64).map(|i| Packet::new(i * 500_000, 200)).collect();
    let continuous = Trace::new(continuous, TraceSource::Unspecified);

    let opts = PcapWriteOptions::default();
    for (name, trace) in [("bursty.pcap", &bursty), ("continuous.pcap", &continuous)] {
        let path = out_dir.join(name);
        std::fs::write(&path, write_pcap(trace, &opts))?;
        println!(
            "{}: {} packets, {} bytes total payload",
            path.display(),
            trace.len(),
            trace.total_bytes()
        );
    }
    Ok(())
}
