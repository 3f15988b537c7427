//! Command implementations behind the `irqsim` binary: configure a load and
//! a NIC, run or sweep the simulation, and emit results for analysis.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{AggregateMode, ConfigError, ExperimentConfig, OutputFormat};
use crate::engine::{
    simulate_sweep, simulate_with, SimOptions, SimulationResult, SweepGrid, SweepLoad,
};
use crate::metrics::{latency_summary, tabulate, AxisDescriptor, SeedAggregation, SweepTable};
use crate::pcap::{interarrival_edges_default, parse_pcap_file, pcap_summary, PcapFileError};
use crate::trace::{
    generate_poisson, generate_uniform, interarrival_histogram, read_trace_file, write_trace_file,
    Trace,
};

/// Values of the global flags, applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct GlobalOpts {
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

/// Command failures mapped onto the exit-code taxonomy: 1 for configuration
/// errors, 2 for load or output file errors.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    LoadFile(String),
    #[error("cannot write {path}: {reason}")]
    OutputFile { path: PathBuf, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::LoadFile(_) | CliError::OutputFile { .. } => 2,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(err: ConfigError) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<PcapFileError> for CliError {
    fn from(err: PcapFileError) -> Self {
        CliError::LoadFile(err.to_string())
    }
}

fn resolve_trace(config: &ExperimentConfig, seed_override: Option<u64>) -> Result<Trace, CliError> {
    if let Some(mut spec) = config.load.poisson {
        if let Some(seed) = seed_override {
            spec.seed = seed;
        }
        return Ok(generate_poisson(&spec));
    }
    if let Some(spec) = &config.load.uniform {
        return Ok(generate_uniform(spec));
    }
    if let Some(path) = &config.load.trace {
        return read_trace_file(path)
            .map_err(|e| CliError::LoadFile(format!("{}: {e}", path.display())));
    }
    if let Some(path) = &config.load.pcap {
        let parsed = parse_pcap_file(path)
            .map_err(|e| CliError::LoadFile(format!("{}: {e}", path.display())))?;
        return Ok(parsed.trace);
    }
    Err(CliError::Config(
        "exactly one load source must be set".into(),
    ))
}

fn output_path(config: &ExperimentConfig, opts: &GlobalOpts, default_name: &str) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| config.output.path.clone())
        .unwrap_or_else(|| PathBuf::from(default_name))
}

fn output_format(config: &ExperimentConfig, opts: &GlobalOpts) -> OutputFormat {
    opts.format.unwrap_or(config.output.format)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::OutputFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn fmt_opt<T: std::fmt::Display>(value: Option<T>) -> String {
    value.map_or_else(String::new, |v| v.to_string())
}

/// Single-run result rows, CSV and JSON.
#[derive(Serialize)]
struct RunReport<'a> {
    execution_time_ns: u64,
    required_compute_ns: u64,
    interrupt_count: u64,
    per_packet_count: u64,
    counter_count: u64,
    timer_count: u64,
    flush_count: u64,
    stolen_isr_ns: u64,
    stolen_rx_ns: u64,
    stolen_before_completion_ns: u64,
    dropped_count: u64,
    latency_mean_ns: Option<f64>,
    latency_p50_ns: Option<u64>,
    latency_p95_ns: Option<u64>,
    latency_max_ns: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    events: Option<&'a [crate::nic::InterruptEvent]>,
}

fn run_report<'a>(result: &'a SimulationResult, required_compute_ns: u64) -> RunReport<'a> {
    let latency = latency_summary(result);
    RunReport {
        execution_time_ns: result.execution_time_ns,
        required_compute_ns,
        interrupt_count: result.interrupt_count,
        per_packet_count: result.cause_counts.per_packet,
        counter_count: result.cause_counts.counter_threshold,
        timer_count: result.cause_counts.timer_expiry,
        flush_count: result.cause_counts.end_flush,
        stolen_isr_ns: result.stolen_isr_ns,
        stolen_rx_ns: result.stolen_rx_ns,
        stolen_before_completion_ns: result.stolen_before_completion_ns,
        dropped_count: result.dropped_packets,
        latency_mean_ns: latency.map(|l| l.mean_ns),
        latency_p50_ns: latency.map(|l| l.p50_ns),
        latency_p95_ns: latency.map(|l| l.p95_ns),
        latency_max_ns: latency.map(|l| l.max_ns),
        events: result.events.as_deref(),
    }
}

fn run_csv(report: &RunReport) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| CliError::OutputFile {
        path: PathBuf::from("<csv>"),
        reason: e.to_string(),
    };
    w.write_record([
        "execution_time_ns",
        "required_compute_ns",
        "interrupt_count",
        "per_packet_count",
        "counter_count",
        "timer_count",
        "flush_count",
        "stolen_isr_ns",
        "stolen_rx_ns",
        "stolen_before_completion_ns",
        "dropped_count",
        "latency_mean_ns",
        "latency_p50_ns",
        "latency_p95_ns",
        "latency_max_ns",
    ])
    .map_err(io_err)?;
    w.write_record([
        report.execution_time_ns.to_string(),
        report.required_compute_ns.to_string(),
        report.interrupt_count.to_string(),
        report.per_packet_count.to_string(),
        report.counter_count.to_string(),
        report.timer_count.to_string(),
        report.flush_count.to_string(),
        report.stolen_isr_ns.to_string(),
        report.stolen_rx_ns.to_string(),
        report.stolen_before_completion_ns.to_string(),
        report.dropped_count.to_string(),
        fmt_opt(report.latency_mean_ns),
        fmt_opt(report.latency_p50_ns),
        fmt_opt(report.latency_p95_ns),
        fmt_opt(report.latency_max_ns),
    ])
    .map_err(io_err)?;
    w.into_inner().map_err(|e| CliError::OutputFile {
        path: PathBuf::from("<csv>"),
        reason: e.to_string(),
    })
}

fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("result serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

/// `irqsim run`: one simulation, result file plus a one-line summary.
pub fn cmd_run(config: &ExperimentConfig, opts: &GlobalOpts) -> Result<(), CliError> {
    let trace = resolve_trace(config, opts.seed)?;
    let nic = config.nic.to_nic_config();
    let sim_opts = SimOptions {
        keep_events: config.output.include_events,
        truncate_at_completion: config.truncate_at_completion,
    };
    let result = simulate_with(&trace, &nic, config.workload, &sim_opts);
    let report = run_report(&result, config.workload.required_compute_ns);

    let path = output_path(config, opts, "result.csv");
    let bytes = match output_format(config, opts) {
        OutputFormat::Csv => run_csv(&report)?,
        OutputFormat::Json => to_json_bytes(&report),
    };
    write_bytes(&path, &bytes)?;

    println!(
        "execution_time_ns={} interrupts={} causes=per_packet:{},counter:{},timer:{},flush:{} out={}",
        result.execution_time_ns,
        result.interrupt_count,
        result.cause_counts.per_packet,
        result.cause_counts.counter_threshold,
        result.cause_counts.timer_expiry,
        result.cause_counts.end_flush,
        path.display()
    );
    Ok(())
}

fn sweep_axes(grid: &SweepGrid) -> Vec<AxisDescriptor> {
    let mut axes = Vec::new();
    if !grid.counter_thresholds.is_empty() {
        axes.push(AxisDescriptor {
            name: "counter_threshold_count",
            values: grid
                .counter_thresholds
                .iter()
                .map(|v| v.to_string())
                .collect(),
        });
    }
    if !grid.timer_delays_ns.is_empty() {
        axes.push(AxisDescriptor {
            name: "timer_delay_ns",
            values: grid.timer_delays_ns.iter().map(|v| v.to_string()).collect(),
        });
    }
    if !grid.lambdas_pps.is_empty() {
        axes.push(AxisDescriptor {
            name: "lambda_pps",
            values: grid.lambdas_pps.iter().map(|v| v.to_string()).collect(),
        });
    }
    if !grid.seeds.is_empty() {
        axes.push(AxisDescriptor {
            name: "seed",
            values: grid.seeds.iter().map(|v| v.to_string()).collect(),
        });
    }
    axes
}

fn sweep_csv(table: &SweepTable, grid: &SweepGrid, aggregated: bool) -> Result<Vec<u8>, CliError> {
    let io_err = |e: csv::Error| CliError::OutputFile {
        path: PathBuf::from("<csv>"),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());

    let mut header: Vec<&str> = Vec::new();
    if !grid.counter_thresholds.is_empty() {
        header.push("counter_threshold_count");
    }
    if !grid.timer_delays_ns.is_empty() {
        header.push("timer_delay_ns");
    }
    if !grid.lambdas_pps.is_empty() {
        header.push("lambda_pps");
    }
    if !grid.seeds.is_empty() && !aggregated {
        header.push("seed");
    }
    if aggregated {
        header.push("samples_count");
    }
    header.push("execution_time_ns");
    if aggregated {
        header.push("execution_time_std_ns");
    }
    header.extend([
        "interrupt_count",
        "per_packet_count",
        "counter_count",
        "timer_count",
        "flush_count",
        "stolen_isr_ns",
        "stolen_rx_ns",
        "dropped_count",
        "latency_mean_ns",
        "latency_p50_ns",
        "latency_p95_ns",
        "latency_max_ns",
    ]);
    w.write_record(&header).map_err(io_err)?;

    for cell in &table.cells {
        let mut row: Vec<String> = Vec::new();
        if !grid.counter_thresholds.is_empty() {
            row.push(fmt_opt(cell.threshold));
        }
        if !grid.timer_delays_ns.is_empty() {
            row.push(fmt_opt(cell.delay_ns));
        }
        if !grid.lambdas_pps.is_empty() {
            row.push(fmt_opt(cell.lambda_pps));
        }
        if !grid.seeds.is_empty() && !aggregated {
            row.push(fmt_opt(cell.seed));
        }
        if aggregated {
            row.push(cell.samples.to_string());
        }
        row.push(cell.execution_time_ns.to_string());
        if aggregated {
            row.push(fmt_opt(cell.execution_time_std_ns));
        }
        row.extend([
            cell.interrupt_count.to_string(),
            cell.per_packet_count.to_string(),
            cell.counter_count.to_string(),
            cell.timer_count.to_string(),
            cell.flush_count.to_string(),
            cell.stolen_isr_ns.to_string(),
            cell.stolen_rx_ns.to_string(),
            cell.dropped_count.to_string(),
            fmt_opt(cell.latency_mean_ns),
            fmt_opt(cell.latency_p50_ns),
            fmt_opt(cell.latency_p95_ns),
            fmt_opt(cell.latency_max_ns),
        ]);
        w.write_record(&row).map_err(io_err)?;
    }
    w.into_inner().map_err(|e| CliError::OutputFile {
        path: PathBuf::from("<csv>"),
        reason: e.to_string(),
    })
}

/// `irqsim sweep`: cartesian parameter grid, one row per point (per seed).
pub fn cmd_sweep(config: &ExperimentConfig, opts: &GlobalOpts) -> Result<(), CliError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep requires a `sweep` section".into()))?;
    let grid = sweep.grid();
    if grid.is_empty() {
        return Err(CliError::Config(
            "sweep requires at least one non-empty axis".into(),
        ));
    }

    let load = if let Some(mut spec) = config.load.poisson {
        if let Some(seed) = opts.seed {
            spec.seed = seed;
        }
        SweepLoad::Poisson(spec)
    } else if let Some(spec) = config.load.uniform {
        SweepLoad::Uniform(spec)
    } else {
        SweepLoad::Fixed(resolve_trace(config, opts.seed)?)
    };

    let nic = config.nic.to_nic_config();
    let sim_opts = SimOptions {
        keep_events: false,
        truncate_at_completion: config.truncate_at_completion,
    };

    let run = || simulate_sweep(&load, &nic, &grid, config.workload, &sim_opts);
    let results = match opts.jobs {
        Some(jobs) if jobs > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?
            .install(run),
        _ => run(),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;

    let aggregation = match sweep.aggregate {
        AggregateMode::None => SeedAggregation::None,
        AggregateMode::Mean => SeedAggregation::MeanStd,
    };
    let axes = sweep_axes(&grid);
    let table =
        tabulate(&results, &axes, aggregation).map_err(|e| CliError::Config(e.to_string()))?;

    let aggregated = aggregation == SeedAggregation::MeanStd;
    let path = output_path(config, opts, "sweep.csv");
    let bytes = match output_format(config, opts) {
        OutputFormat::Csv => sweep_csv(&table, &grid, aggregated)?,
        OutputFormat::Json => to_json_bytes(&table),
    };
    write_bytes(&path, &bytes)?;

    println!(
        "sweep points={} rows={} out={}",
        grid.point_count(),
        table.cells.len(),
        path.display()
    );
    Ok(())
}

/// `irqsim gen`: materialize a synthetic load as a canonical trace file.
pub fn cmd_gen(config: &ExperimentConfig, opts: &GlobalOpts) -> Result<(), CliError> {
    if config.load.uniform.is_none() && config.load.poisson.is_none() {
        return Err(CliError::Config(
            "gen requires a uniform or poisson load".into(),
        ));
    }
    let trace = resolve_trace(config, opts.seed)?;
    let path = output_path(config, opts, "trace.txt");
    write_trace_file(&trace, &path).map_err(|e| CliError::OutputFile {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    println!("packets={} out={}", trace.len(), path.display());
    Ok(())
}

/// `irqsim inspect-pcap`: capture summary plus inter-arrival histogram.
pub fn cmd_inspect_pcap(
    path: &Path,
    edges_ns: Option<&[u64]>,
    opts: &GlobalOpts,
) -> Result<(), CliError> {
    let parsed = parse_pcap_file(path)?;
    let summary = pcap_summary(&parsed.trace);
    let default_edges;
    let edges = match edges_ns {
        Some(e) => e,
        None => {
            default_edges = interarrival_edges_default();
            &default_edges
        }
    };
    let hist = interarrival_histogram(&parsed.trace, edges)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let write_err = |e: std::io::Error| CliError::OutputFile {
        path: PathBuf::from("<stdout>"),
        reason: e.to_string(),
    };
    writeln!(out, "# file: {}", path.display()).map_err(write_err)?;
    writeln!(
        out,
        "# endianness: {:?}  resolution: {:?}  link_type: {}  snaplen: {}",
        parsed.meta.endianness, parsed.meta.resolution, parsed.meta.link_type, parsed.meta.snaplen
    )
    .map_err(write_err)?;
    writeln!(
        out,
        "# packets: {}  zero_length_skipped: {}  reordered: {}",
        summary.packet_count, parsed.zero_length_skipped, parsed.reordered
    )
    .map_err(write_err)?;
    writeln!(
        out,
        "# duration_ns: {}  mean_rate_pps: {}  len_min: {}  len_mean: {}  len_max: {}",
        summary.duration_ns,
        fmt_opt(summary.mean_rate_pps),
        fmt_opt(summary.len_min),
        fmt_opt(summary.len_mean),
        fmt_opt(summary.len_max)
    )
    .map_err(write_err)?;

    let mut csv_bytes = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut csv_bytes);
        let io_err = |e: csv::Error| CliError::OutputFile {
            path: PathBuf::from("<stdout>"),
            reason: e.to_string(),
        };
        w.write_record(["bin_label", "bin_start_ns", "bin_end_ns", "gap_count"])
            .map_err(io_err)?;
        w.write_record([
            "underflow".to_string(),
            String::new(),
            hist.edges_ns[0].to_string(),
            hist.underflow.to_string(),
        ])
        .map_err(io_err)?;
        for (i, count) in hist.counts.iter().enumerate() {
            w.write_record([
                format!("bin{i}"),
                hist.edges_ns[i].to_string(),
                hist.edges_ns[i + 1].to_string(),
                count.to_string(),
            ])
            .map_err(io_err)?;
        }
        w.write_record([
            "overflow".to_string(),
            hist.edges_ns.last().unwrap().to_string(),
            String::new(),
            hist.overflow.to_string(),
        ])
        .map_err(io_err)?;
        w.flush().map_err(|e| CliError::OutputFile {
            path: PathBuf::from("<stdout>"),
            reason: e.to_string(),
        })?;
    }
    out.write_all(&csv_bytes).map_err(write_err)?;

    if let Some(out_path) = &opts.out {
        write_bytes(out_path, &csv_bytes)?;
    }
    Ok(())
}
