//! Per-sample node/edge counts for the preprocessing × edge-generation
//! ablation grid, and their aggregation into a table.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    build_graph, build_graph_keep_duplicates, radius_graph, BuilderParams, EventGraph, GraphError,
    DEFAULT_MAX_NEIGHBORS,
};
use crate::ingest::{densest_window, sample_random, IngestError, RawEvent, SensorGeometry};
use crate::quantize::{quantize_stream, QuantParams, QuantizeError, QuantizedEvent};

pub const DEFAULT_RANDOM_SAMPLES: usize = 25_000;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Preprocessing {
    /// Every event in the window becomes a vertex.
    Without,
    /// Uniform subsample of the raw window.
    Random { n: usize, seed: u64 },
    /// Exact `(x, y, t)` repeats after quantisation are dropped.
    Unique,
}

impl fmt::Display for Preprocessing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preprocessing::Without => f.write_str("without"),
            Preprocessing::Random { n, .. } => write!(f, "random({n})"),
            Preprocessing::Unique => f.write_str("unique"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EdgeGen {
    /// Undirected radius search capped at `max_neighbors` per vertex.
    Radius { max_neighbors: usize },
    /// Neighbour-matrix, time-directed.
    Nm,
}

impl EdgeGen {
    pub fn radius_default() -> Self {
        EdgeGen::Radius {
            max_neighbors: DEFAULT_MAX_NEIGHBORS,
        }
    }
}

impl fmt::Display for EdgeGen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeGen::Radius { .. } => f.write_str("radius"),
            EdgeGen::Nm => f.write_str("nm"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub geometry: SensorGeometry,
    pub window_us: u64,
    pub preprocessing: Preprocessing,
    pub edge_gen: EdgeGen,
    pub builder: BuilderParams,
}

/// Applies preprocessing and edge generation to already-windowed events.
///
/// `q` must cover `events`. Radius-baseline graphs may contain repeated
/// positions unless preprocessing is `Unique`.
pub fn graph_for_window(
    events: &[RawEvent],
    q: &QuantParams,
    preprocessing: Preprocessing,
    edge_gen: EdgeGen,
    builder: &BuilderParams,
) -> Result<EventGraph, StatsError> {
    let picked;
    let raw = match preprocessing {
        Preprocessing::Random { n, seed } => {
            picked = sample_random(events, n, seed);
            &picked[..]
        }
        _ => events,
    };
    let mut quantized = quantize_stream(raw, q)?;
    let graph = match (edge_gen, preprocessing) {
        (EdgeGen::Nm, Preprocessing::Unique) => build_graph(&quantized, builder)?.0,
        (EdgeGen::Nm, _) => build_graph_keep_duplicates(&quantized, builder)?.0,
        (EdgeGen::Radius { max_neighbors }, pre) => {
            if pre == Preprocessing::Unique {
                quantized = unique_positions(&quantized);
            }
            radius_graph(&quantized, builder.size, builder.radius, max_neighbors)
        }
    };
    Ok(graph)
}

/// First arrival of every distinct `(x, y, t)`.
pub fn unique_positions(events: &[QuantizedEvent]) -> Vec<QuantizedEvent> {
    let mut seen = HashSet::with_capacity(events.len());
    events
        .iter()
        .filter(|e| seen.insert(e.pos()))
        .copied()
        .collect()
}

/// Node and edge count for one recording under `cfg`, using its densest
/// window.
pub fn sample_counts(events: &[RawEvent], cfg: &SampleConfig) -> Result<(u64, u64), StatsError> {
    if events.is_empty() {
        return Ok((0, 0));
    }
    let window = densest_window(events, cfg.window_us)?;
    let q = QuantParams::for_window(&window, cfg.geometry, cfg.builder.size)?;
    let g = graph_for_window(
        &window.events,
        &q,
        cfg.preprocessing,
        cfg.edge_gen,
        &cfg.builder,
    )?;
    Ok((g.num_vertices() as u64, g.num_edges() as u64))
}

/// One row of the ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub size: u32,
    pub preprocessing: String,
    pub edge_gen: String,
    pub samples: usize,
    pub mean_nodes: f64,
    pub mean_edges: f64,
}

impl StatsRow {
    /// Means over per-sample `(nodes, edges)` counts, in the given order.
    pub fn from_counts(cfg: &SampleConfig, counts: &[(u64, u64)]) -> Self {
        let n = counts.len();
        let mean = |f: fn(&(u64, u64)) -> u64| {
            if n == 0 {
                0.0
            } else {
                counts.iter().map(f).sum::<u64>() as f64 / n as f64
            }
        };
        StatsRow {
            size: cfg.builder.size,
            preprocessing: cfg.preprocessing.to_string(),
            edge_gen: cfg.edge_gen.to_string(),
            samples: n,
            mean_nodes: mean(|c| c.0),
            mean_edges: mean(|c| c.1),
        }
    }
}
