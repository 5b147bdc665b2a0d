//! Cycle-level model of the graph generator as a fixed-function block.
//!
//! Events arrive with sensor timestamps, pass a one-cycle normalisation
//! stage and wait in a bounded FIFO. A single edge-generation stage owns the
//! neighbour-matrix memory: a non-duplicate event holds it for one
//! duplicate-check read, `ceil(context_cells / ports)` context reads and one
//! write; a duplicate releases it after the check.
//!
//! Within a cycle, FIFO pushes happen before the dequeue. An event entering
//! an empty FIFO at cycle `c` with the stage idle starts service at `c`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{BuilderParams, EventGraph, GraphBuilder, GraphError, Pushed};
use crate::ingest::RawEvent;
use crate::quantize::{quantize, QuantParams, QuantizeError};

/// Service time of a duplicate: the dequeue plus the single check read.
pub const DUPLICATE_SERVICE_CYCLES: u32 = 2;

#[derive(Debug, Error)]
pub enum HwError {
    #[error("invalid hardware configuration: {0}")]
    InvalidConfig(String),
    #[error("event {index}: arrival time {current} before {previous}")]
    NonMonotonicTime {
        index: usize,
        previous: u64,
        current: u64,
    },
    #[error("event {index}: arrival cycle overflows")]
    CycleOverflow { index: usize },
    #[error("event {index}: {source}")]
    Quantize {
        index: usize,
        #[source]
        source: QuantizeError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HwConfig {
    pub clock_mhz: u32,
    pub fifo_depth: usize,
    pub fifo_word_bits: u32,
    pub ports: u32,
    pub context_cells: u32,
}

impl Default for HwConfig {
    fn default() -> Self {
        Self {
            clock_mhz: 250,
            fifo_depth: 1024,
            fifo_word_bits: crate::coo::EVENT_WORD_BITS,
            ports: 2,
            context_cells: 48,
        }
    }
}

impl HwConfig {
    pub fn validate(&self) -> Result<(), HwError> {
        if self.clock_mhz == 0 {
            return Err(HwError::InvalidConfig("clock_mhz must be > 0".into()));
        }
        if self.fifo_depth == 0 {
            return Err(HwError::InvalidConfig("fifo_depth must be >= 1".into()));
        }
        if !(1..=2).contains(&self.ports) {
            return Err(HwError::InvalidConfig("ports must be 1 or 2".into()));
        }
        if self.context_cells == 0 {
            return Err(HwError::InvalidConfig("context_cells must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleBudget {
    pub reads: u32,
    pub writes: u32,
    pub total: u32,
}

pub fn cycle_budget(cfg: &HwConfig) -> CycleBudget {
    let reads = 1 + cfg.context_cells.div_ceil(cfg.ports);
    CycleBudget {
        reads,
        writes: 1,
        total: reads + 1,
    }
}

/// Events per µs at full occupancy.
pub fn theoretical_throughput(cfg: &HwConfig) -> f64 {
    cfg.clock_mhz as f64 / cycle_budget(cfg).total as f64
}

/// Time between accepted events at full occupancy, in picoseconds. Exact
/// whenever the period is a whole number of picoseconds.
pub fn event_period_ps(cfg: &HwConfig) -> u64 {
    cycle_budget(cfg).total as u64 * 1_000_000 / cfg.clock_mhz as u64
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub events_in: u64,
    pub vertices: u64,
    pub edges: u64,
    pub duplicates_dropped: u64,
    pub fifo_drops: u64,
    pub max_fifo_occupancy: u64,
    /// Service cycles → number of events.
    pub per_event_cycles: BTreeMap<u32, u64>,
    /// Worst arrival-to-completion latency.
    pub max_latency_cycles: u64,
    pub completion_time_cycles: u64,
    /// Events leaving the FIFO per µs of simulated time.
    pub achieved_throughput: f64,
    /// `(cycle, depth)` after every FIFO push or pop.
    pub occupancy_trace: Vec<(u64, u64)>,
}

/// Lifetime of one event that made it through the FIFO.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceSpan {
    pub event: usize,
    pub arrival: u64,
    pub enqueued: u64,
    pub start: u64,
    pub end: u64,
    pub duplicate: bool,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub graph: EventGraph,
    pub report: PipelineReport,
    pub services: Vec<ServiceSpan>,
    /// Indices of events lost to a full FIFO.
    pub dropped: Vec<usize>,
}

struct Queued {
    event: usize,
    arrival: u64,
    enqueued: u64,
    q: crate::quantize::QuantizedEvent,
}

struct Pipeline<'a> {
    cfg: &'a HwConfig,
    budget: CycleBudget,
    builder: GraphBuilder,
    fifo: VecDeque<Queued>,
    free_at: u64,
    report: PipelineReport,
    services: Vec<ServiceSpan>,
}

impl Pipeline<'_> {
    fn record_depth(&mut self, cycle: u64) {
        let depth = self.fifo.len() as u64;
        self.report.max_fifo_occupancy = self.report.max_fifo_occupancy.max(depth);
        self.report.occupancy_trace.push((cycle, depth));
    }

    /// Serves queued events whose start cycle is before `before`.
    fn drain(&mut self, before: u64) -> Result<(), HwError> {
        while let Some(head) = self.fifo.front() {
            let start = self.free_at.max(head.enqueued);
            if start >= before {
                break;
            }
            let item = self.fifo.pop_front().expect("front checked");
            self.record_depth(start);
            let pushed = self.builder.push(&item.q)?;
            let cycles = match pushed {
                Pushed::Duplicate => DUPLICATE_SERVICE_CYCLES.min(self.budget.total),
                Pushed::Vertex { .. } => self.budget.total,
            };
            let end = start + cycles as u64;
            *self.report.per_event_cycles.entry(cycles).or_default() += 1;
            self.report.max_latency_cycles = self.report.max_latency_cycles.max(end - item.arrival);
            self.services.push(ServiceSpan {
                event: item.event,
                arrival: item.arrival,
                enqueued: item.enqueued,
                start,
                end,
                duplicate: matches!(pushed, Pushed::Duplicate),
            });
            self.free_at = end;
        }
        Ok(())
    }
}

/// Runs the stream through the modelled block.
///
/// Arrival µs are measured from `q.t0` and converted to cycles rounding
/// down. The returned graph is the one the block would emit, which equals
/// [`crate::graph::build_graph`] over the events that were not dropped.
pub fn simulate(
    events: &[RawEvent],
    q: &QuantParams,
    b: &BuilderParams,
    cfg: &HwConfig,
) -> Result<Simulation, HwError> {
    cfg.validate()?;
    q.validate()
        .map_err(|source| HwError::Quantize { index: 0, source })?;
    let mut p = Pipeline {
        cfg,
        budget: cycle_budget(cfg),
        builder: GraphBuilder::new(*b)?,
        fifo: VecDeque::with_capacity(cfg.fifo_depth.min(1 << 16)),
        free_at: 0,
        report: PipelineReport::default(),
        services: Vec::with_capacity(events.len()),
    };
    let mut dropped = Vec::new();
    let mut previous_t = None;

    for (index, e) in events.iter().enumerate() {
        if let Some(previous) = previous_t {
            if e.t < previous {
                return Err(HwError::NonMonotonicTime {
                    index,
                    previous,
                    current: e.t,
                });
            }
        }
        previous_t = Some(e.t);
        let qe = quantize(e, q).map_err(|source| HwError::Quantize { index, source })?;
        let arrival = (e.t - q.t0)
            .checked_mul(p.cfg.clock_mhz as u64)
            .ok_or(HwError::CycleOverflow { index })?;
        // normalisation takes one cycle
        let enqueued = arrival + 1;
        p.report.events_in += 1;
        p.drain(enqueued)?;
        if p.fifo.len() >= cfg.fifo_depth {
            p.report.fifo_drops += 1;
            dropped.push(index);
            continue;
        }
        p.fifo.push_back(Queued {
            event: index,
            arrival,
            enqueued,
            q: qe,
        });
        p.record_depth(enqueued);
    }
    p.drain(u64::MAX)?;

    let (graph, stats) = p.builder.finish();
    let mut report = p.report;
    report.vertices = stats.nodes;
    report.edges = stats.edges;
    report.duplicates_dropped = stats.duplicates_dropped;
    report.completion_time_cycles = p.free_at;
    let served = report.events_in - report.fifo_drops;
    report.achieved_throughput = if report.completion_time_cycles == 0 {
        0.0
    } else {
        served as f64 * cfg.clock_mhz as f64 / report.completion_time_cycles as f64
    };
    Ok(Simulation {
        graph,
        report,
        services: p.services,
        dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

/// Deterministic serialisation. CSV carries only the occupancy trace.
pub fn render_report(r: &PipelineReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("report serialises");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = String::from("cycle,fifo_depth\n");
            for (cycle, depth) in &r.occupancy_trace {
                let _ = writeln!(s, "{cycle},{depth}");
            }
            s
        }
        ReportFormat::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "events_in: {}", r.events_in);
            let _ = writeln!(s, "vertices: {}", r.vertices);
            let _ = writeln!(s, "edges: {}", r.edges);
            let _ = writeln!(s, "duplicates_dropped: {}", r.duplicates_dropped);
            let _ = writeln!(s, "fifo_drops: {}", r.fifo_drops);
            let _ = writeln!(s, "max_fifo_occupancy: {}", r.max_fifo_occupancy);
            let _ = writeln!(s, "max_latency_cycles: {}", r.max_latency_cycles);
            let _ = writeln!(s, "completion_time_cycles: {}", r.completion_time_cycles);
            let _ = writeln!(
                s,
                "achieved_throughput_events_per_us: {:.6}",
                r.achieved_throughput
            );
            for (cycles, n) in &r.per_event_cycles {
                let _ = writeln!(s, "service_cycles[{cycles}]: {n}");
            }
            let _ = writeln!(s, "trace_samples: {}", r.occupancy_trace.len());
            s
        }
    }
}

pub fn parse_report_json(text: &str) -> Result<PipelineReport, serde_json::Error> {
    serde_json::from_str(text)
}
