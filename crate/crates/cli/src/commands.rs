use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use evgraph::coo;
use evgraph::graph::stats::{
    graph_for_window, sample_counts, EdgeGen, Preprocessing, SampleConfig, StatsRow,
};
use evgraph::hw::{self, HwConfig, ReportFormat};
use evgraph::ingest::{self, EventWindow};
use evgraph::pointnet::{self, ConvLayer, FeatureMatrix};
use evgraph::{BuilderParams, EventGraph, GraphStats, QuantParams, SensorGeometry};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io::{
    load_input, read_bytes, read_events, read_text, select_windows, to_json, write_output,
    EventFormat, GeometryArgs, InputArgs, WindowSelect,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PreprocessingArg {
    Unique,
    Random,
    Without,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EdgeGenArg {
    Nm,
    RadiusBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphFormat {
    CooText,
    CooBin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormatArg {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvertFormat {
    Csv,
    NcaltechBin,
    CooText,
    CooBin,
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// Side of the normalised cube.
    #[arg(long, default_value_t = 256)]
    pub size: u32,
    /// Edge radius in cube units.
    #[arg(long, default_value_t = 3)]
    pub radius: u16,
    /// Let an event link to the previous event at its own pixel.
    #[arg(long)]
    pub include_center: bool,
    /// Analysis window length in milliseconds.
    #[arg(long, default_value_t = 50)]
    pub window_ms: u64,
    #[arg(long, value_enum, default_value_t = WindowSelect::Densest)]
    pub window_select: WindowSelect,
}

impl GraphArgs {
    fn builder(&self) -> Result<BuilderParams> {
        BuilderParams::new(self.radius, self.size, self.include_center)
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    fn window_us(&self) -> Result<u64> {
        self.window_ms
            .checked_mul(1000)
            .filter(|&us| us > 0)
            .ok_or_else(|| CliError::Usage("--window-ms must be in [1, 2^64/1000)".into()))
    }
}

#[derive(Debug, Clone, Args)]
pub struct PreprocessArgs {
    #[arg(long, value_enum, default_value_t = PreprocessingArg::Unique)]
    pub preprocessing: PreprocessingArg,
    /// Sample size for random preprocessing.
    #[arg(long, default_value_t = 25_000)]
    pub sample_n: usize,
    /// Seed for random preprocessing.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = EdgeGenArg::Nm)]
    pub edge_gen: EdgeGenArg,
    /// Neighbour cap for the radius baseline.
    #[arg(long, default_value_t = 32)]
    pub max_neighbors: usize,
}

impl PreprocessArgs {
    fn preprocessing(&self) -> Preprocessing {
        match self.preprocessing {
            PreprocessingArg::Unique => Preprocessing::Unique,
            PreprocessingArg::Without => Preprocessing::Without,
            PreprocessingArg::Random => Preprocessing::Random {
                n: self.sample_n,
                seed: self.seed,
            },
        }
    }

    fn edge_gen(&self) -> EdgeGen {
        match self.edge_gen {
            EdgeGenArg::Nm => EdgeGen::Nm,
            EdgeGenArg::RadiusBaseline => EdgeGen::Radius {
                max_neighbors: self.max_neighbors,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub pre: PreprocessArgs,
    /// Graph file, or a directory when --window-select all.
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = GraphFormat::CooText)]
    pub output_format: GraphFormat,
    /// Stats JSON path [default: <output>.stats.json, or stats.json inside
    /// the output directory].
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct WindowInfo {
    t_start: u64,
    duration_us: u64,
    events: usize,
}

#[derive(Debug, Serialize)]
struct BuildSummary {
    window: Option<WindowInfo>,
    graph_file: String,
    stats: GraphStats,
}

fn encode_graph(g: &EventGraph, format: GraphFormat) -> Result<Vec<u8>> {
    match format {
        GraphFormat::CooText => Ok(coo::write_text(g).into_bytes()),
        GraphFormat::CooBin => {
            coo::write_binary(g).map_err(|e| CliError::data("coo-bin encoding", e))
        }
    }
}

fn window_graph(
    window: &EventWindow,
    geometry: SensorGeometry,
    builder: &BuilderParams,
    pre: &PreprocessArgs,
) -> Result<(EventGraph, GraphStats)> {
    let q = QuantParams::for_window(window, geometry, builder.size)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let g = graph_for_window(
        &window.events,
        &q,
        pre.preprocessing(),
        pre.edge_gen(),
        builder,
    )
    .map_err(|e| CliError::data(format!("window at t={}", window.t_start), e))?;
    let consumed = match pre.preprocessing() {
        Preprocessing::Random { n, .. } => n.min(window.len()),
        _ => window.len(),
    };
    let stats = GraphStats::from_graph(&g, consumed as u64);
    Ok((g, stats))
}

pub fn build(args: &BuildArgs) -> Result<()> {
    let builder = args.graph.builder()?;
    let window_us = args.graph.window_us()?;
    let (events, geometry) = load_input(&args.input)?;
    let windows = select_windows(&events, window_us, args.graph.window_select)?;
    let ext = match args.output_format {
        GraphFormat::CooText => "coo",
        GraphFormat::CooBin => "coob",
    };

    if args.graph.window_select == WindowSelect::All {
        let mut summaries = Vec::with_capacity(windows.len());
        for (k, w) in windows.iter().enumerate() {
            let (g, stats) = window_graph(w, geometry, &builder, &args.pre)?;
            let name = format!("window_{k:05}.{ext}");
            write_output(
                &args.output.join(&name),
                &encode_graph(&g, args.output_format)?,
            )?;
            summaries.push(BuildSummary {
                window: Some(window_info(w)),
                graph_file: name,
                stats,
            });
        }
        if windows.is_empty() {
            std::fs::create_dir_all(&args.output).map_err(|e| CliError::io(&args.output, e))?;
        }
        let stats_path = args
            .stats
            .clone()
            .unwrap_or_else(|| args.output.join("stats.json"));
        return write_output(&stats_path, &to_json(&summaries));
    }

    let (g, stats, window) = match windows.first() {
        Some(w) => {
            let (g, stats) = window_graph(w, geometry, &builder, &args.pre)?;
            (g, stats, Some(window_info(w)))
        }
        None => {
            let g = EventGraph::new(builder.size, builder.radius);
            let stats = GraphStats::from_graph(&g, 0);
            (g, stats, None)
        }
    };
    write_output(&args.output, &encode_graph(&g, args.output_format)?)?;
    let stats_path = args
        .stats
        .clone()
        .unwrap_or_else(|| with_suffix(&args.output, ".stats.json"));
    let summary = BuildSummary {
        window,
        graph_file: args.output.display().to_string(),
        stats,
    };
    write_output(&stats_path, &to_json(&summary))
}

fn window_info(w: &EventWindow) -> WindowInfo {
    WindowInfo {
        t_start: w.t_start,
        duration_us: w.duration,
        events: w.len(),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 250)]
    pub clock_mhz: u32,
    #[arg(long, default_value_t = 1024)]
    pub fifo_depth: usize,
    /// Context-memory ports usable per cycle (1 or 2).
    #[arg(long, default_value_t = 2)]
    pub ports: u32,
    /// Context reads per event (48 for the full 7x7 square).
    #[arg(long, default_value_t = 48)]
    pub context_cells: u32,
    /// Where to write the emitted graph, if anywhere.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = GraphFormat::CooText)]
    pub output_format: GraphFormat,
    /// Report destination, `-` for stdout.
    #[arg(long, default_value = "-")]
    pub report: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormatArg::Text)]
    pub report_format: ReportFormatArg,
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    if args.graph.window_select == WindowSelect::All {
        return Err(CliError::Usage(
            "simulate runs one window; use --window-select densest or first".into(),
        ));
    }
    let builder = args.graph.builder()?;
    let window_us = args.graph.window_us()?;
    let cfg = HwConfig {
        clock_mhz: args.clock_mhz,
        fifo_depth: args.fifo_depth,
        ports: args.ports,
        context_cells: args.context_cells,
        ..HwConfig::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (events, geometry) = load_input(&args.input)?;
    let windows = select_windows(&events, window_us, args.graph.window_select)?;
    let (window_events, t0) = match windows.first() {
        Some(w) => (&w.events[..], w.t_start),
        None => (&[][..], 0),
    };
    let q = QuantParams::new(builder.size, geometry, t0, window_us)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let sim = hw::simulate(window_events, &q, &builder, &cfg)
        .map_err(|e| CliError::data(args.input.input.display().to_string(), e))?;
    if let Some(path) = &args.output {
        write_output(path, &encode_graph(&sim.graph, args.output_format)?)?;
    }
    let format = match args.report_format {
        ReportFormatArg::Text => ReportFormat::Text,
        ReportFormatArg::Csv => ReportFormat::Csv,
        ReportFormatArg::Json => ReportFormat::Json,
    };
    write_output(
        &args.report,
        hw::render_report(&sim.report, format).as_bytes(),
    )
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// File listing one sample path per line, relative to the manifest.
    #[arg(long, short)]
    pub manifest: PathBuf,
    /// Sample encoding; inferred per file from the extension when omitted.
    #[arg(long)]
    pub format: Option<EventFormat>,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub pre: PreprocessArgs,
    /// Evaluate the full grid: sizes 128 and 256, every preprocessing, both
    /// edge generators.
    #[arg(long)]
    pub table: bool,
    /// Output path, `-` for stdout.
    #[arg(long, short, default_value = "-")]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    pub output_format: TableFormat,
}

#[derive(Debug, Serialize)]
struct StatsReport {
    files: usize,
    skipped: usize,
    rows: Vec<StatsRow>,
}

fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

fn stats_configs(args: &StatsArgs, geometry: SensorGeometry) -> Result<Vec<SampleConfig>> {
    let window_us = args.graph.window_us()?;
    let mk = |size: u32, preprocessing, edge_gen| -> Result<SampleConfig> {
        let builder = BuilderParams::new(args.graph.radius, size, args.graph.include_center)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(SampleConfig {
            geometry,
            window_us,
            preprocessing,
            edge_gen,
            builder,
        })
    };
    if !args.table {
        return Ok(vec![mk(
            args.graph.size,
            args.pre.preprocessing(),
            args.pre.edge_gen(),
        )?]);
    }
    let random = Preprocessing::Random {
        n: args.pre.sample_n,
        seed: args.pre.seed,
    };
    let radius = EdgeGen::Radius {
        max_neighbors: args.pre.max_neighbors,
    };
    let mut out = Vec::new();
    for size in [128, 256] {
        for pre in [Preprocessing::Without, random, Preprocessing::Unique] {
            for eg in [radius, EdgeGen::Nm] {
                out.push(mk(size, pre, eg)?);
            }
        }
    }
    Ok(out)
}

pub fn stats(args: &StatsArgs) -> Result<()> {
    if args.graph.window_select != WindowSelect::Densest {
        return Err(CliError::Usage(
            "stats always uses the densest window".into(),
        ));
    }
    let geometry = args.geometry.geometry()?;
    let configs = stats_configs(args, geometry)?;
    let files = read_manifest(&args.manifest)?;
    let pool = thread_pool()?;

    let per_file: Vec<Result<Vec<(u64, u64)>>> = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let events = read_events(path, args.format)?;
                configs
                    .iter()
                    .map(|cfg| {
                        sample_counts(&events, cfg)
                            .map_err(|e| CliError::data(path.display().to_string(), e))
                    })
                    .collect()
            })
            .collect()
    });

    let mut counts = vec![Vec::new(); configs.len()];
    let mut skipped = 0;
    for result in per_file {
        match result {
            Ok(row) => {
                for (acc, c) in counts.iter_mut().zip(row) {
                    acc.push(c);
                }
            }
            Err(e) => {
                skipped += 1;
                eprintln!("evgraph: warning: skipping sample: {e}");
            }
        }
    }
    if skipped > 0 {
        eprintln!(
            "evgraph: warning: {skipped} of {} samples skipped",
            files.len()
        );
    }
    let report = StatsReport {
        files: files.len(),
        skipped,
        rows: configs
            .iter()
            .zip(&counts)
            .map(|(cfg, c)| StatsRow::from_counts(cfg, c))
            .collect(),
    };
    let bytes = match args.output_format {
        TableFormat::Json => to_json(&report),
        TableFormat::Csv => stats_csv(&report.rows).into_bytes(),
        TableFormat::Text => stats_text(&report).into_bytes(),
    };
    write_output(&args.output, &bytes)
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("EVGRAPH_THREADS") {
        let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Usage(format!("EVGRAPH_THREADS={v:?} is not a positive integer"))
        })?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::data("thread pool", e))
}

fn stats_csv(rows: &[StatsRow]) -> String {
    let mut s = String::from("size,preprocessing,edge_gen,samples,mean_nodes,mean_edges\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.3},{:.3}",
            r.size, r.preprocessing, r.edge_gen, r.samples, r.mean_nodes, r.mean_edges
        );
    }
    s
}

fn stats_text(report: &StatsReport) -> String {
    let mut s = format!(
        "{:>5}  {:<14} {:<7} {:>8} {:>14} {:>14}\n",
        "size", "preprocessing", "edges", "samples", "mean nodes", "mean edges"
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:>5}  {:<14} {:<7} {:>8} {:>14.1} {:>14.1}",
            r.size, r.preprocessing, r.edge_gen, r.samples, r.mean_nodes, r.mean_edges
        );
    }
    let _ = writeln!(s, "files: {}, skipped: {}", report.files, report.skipped);
    s
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub from: ConvertFormat,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub to: ConvertFormat,
}

pub fn convert(args: &ConvertArgs) -> Result<()> {
    use ConvertFormat::*;
    let context = args.input.display().to_string();
    let bytes = match (args.from, args.to) {
        (Csv | NcaltechBin, Csv | NcaltechBin) => {
            let format = if args.from == Csv {
                EventFormat::Csv
            } else {
                EventFormat::NcaltechBin
            };
            let events = read_events(&args.input, Some(format))?;
            if args.to == Csv {
                ingest::write_csv(&events).into_bytes()
            } else {
                ingest::write_ncaltech_bin(&events).map_err(|e| CliError::data(context, e))?
            }
        }
        (CooText | CooBin, CooText | CooBin) => {
            let g = read_graph(&args.input, Some(args.from == CooBin))?;
            let format = if args.to == CooText {
                GraphFormat::CooText
            } else {
                GraphFormat::CooBin
            };
            encode_graph(&g, format)?
        }
        (from, to) => {
            return Err(CliError::Usage(format!(
                "cannot convert {from:?} to {to:?}: events and graphs are different kinds"
            )))
        }
    };
    write_output(&args.output, &bytes)
}

/// Reads a COO graph; `binary = None` sniffs the magic bytes.
fn read_graph(path: &Path, binary: Option<bool>) -> Result<EventGraph> {
    let bytes = read_bytes(path)?;
    let context = path.display().to_string();
    let binary = binary.unwrap_or_else(|| bytes.starts_with(coo::BIN_MAGIC));
    if binary {
        coo::parse_binary(&bytes).map_err(|e| CliError::data(context, e))
    } else {
        let text = String::from_utf8(bytes).map_err(|e| CliError::data(context.clone(), e))?;
        coo::parse_text(&text).map_err(|e| CliError::data(context, e))
    }
}

#[derive(Debug, Args)]
pub struct PointnetArgs {
    /// COO graph (text or binary).
    #[arg(long, short)]
    pub graph: PathBuf,
    /// Weight file; random weights from --seed when omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 8)]
    pub out_dim: usize,
    /// Also write the weights that were used.
    #[arg(long)]
    pub save_weights: Option<PathBuf>,
    /// Feature CSV destination, `-` for stdout.
    #[arg(long, short, default_value = "-")]
    pub output: PathBuf,
}

pub fn pointnet(args: &PointnetArgs) -> Result<()> {
    let g = read_graph(&args.graph, None)?;
    let layer = match &args.weights {
        Some(path) => pointnet::load_weights(&read_bytes(path)?)
            .map_err(|e| CliError::data(path.display().to_string(), e))?,
        None => ConvLayer::random(1, args.hidden, args.out_dim, args.seed),
    };
    if let Some(path) = &args.save_weights {
        write_output(path, &pointnet::save_weights(&layer))?;
    }
    let feats = FeatureMatrix::polarity(&g);
    let out =
        pointnet::conv_forward(&g, &feats, &layer).map_err(|e| CliError::data("pointnet", e))?;
    let mut s = String::from("id");
    for k in 0..out.dim {
        let _ = write!(s, ",f{k}");
    }
    s.push('\n');
    for i in 0..out.rows() {
        let _ = write!(s, "{i}");
        for v in out.row(i) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    write_output(&args.output, s.as_bytes())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Mean event rate in events per millisecond.
    #[arg(long, default_value_t = 3300.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 50_000)]
    pub duration_us: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = EventFormat::Csv)]
    pub format: EventFormat,
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    if !(args.rate.is_finite() && args.rate >= 0.0) {
        return Err(CliError::Usage(
            "--rate must be a non-negative number".into(),
        ));
    }
    let events = ingest::synth_stream(
        args.geometry.geometry()?,
        args.rate,
        args.duration_us,
        args.seed,
    );
    let bytes = match args.format {
        EventFormat::Csv => ingest::write_csv(&events).into_bytes(),
        EventFormat::NcaltechBin => ingest::write_ncaltech_bin(&events)
            .map_err(|e| CliError::data("synthetic stream", e))?,
    };
    write_output(&args.output, &bytes)
}
