use serde::{Deserialize, Serialize};

use super::nm::{NeighbourMatrix, Outcome};
use super::{BuilderParams, EventGraph, GraphError, Vertex};
use crate::quantize::QuantizedEvent;

/// Counts describing one built graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub events_consumed: u64,
    pub nodes: u64,
    pub edges: u64,
    pub duplicates_dropped: u64,
    /// `activity[k]` is the number of pixels that received exactly `k`
    /// vertices. Trailing zero buckets are trimmed.
    pub activity: Vec<u64>,
}

/// What happened to one pushed event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pushed {
    Duplicate,
    Vertex { id: u32, in_degree: usize },
}

/// Incremental graph construction over a single stream.
///
/// Sources are resolved to vertex ids through a per-pixel table of the
/// last vertex written at that pixel, which is exactly the vertex whose
/// timestamp the matrix holds.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    params: BuilderParams,
    nm: NeighbourMatrix,
    cell_ids: Vec<u32>,
    dedup: bool,
    graph: EventGraph,
    consumed: u64,
    duplicates: u64,
}

impl GraphBuilder {
    pub fn new(params: BuilderParams) -> Result<Self, GraphError> {
        Self::with_dedup(params, true)
    }

    /// With `dedup = false` every event becomes a vertex, including exact
    /// `(x, y, t)` repeats. Used by the preprocessing ablations.
    pub fn with_dedup(params: BuilderParams, dedup: bool) -> Result<Self, GraphError> {
        params.validate()?;
        let n = params.size as usize * params.size as usize;
        Ok(Self {
            params,
            nm: NeighbourMatrix::new(params.size),
            cell_ids: vec![u32::MAX; n],
            dedup,
            graph: EventGraph::new(params.size, params.radius),
            consumed: 0,
            duplicates: 0,
        })
    }

    pub fn params(&self) -> &BuilderParams {
        &self.params
    }

    pub fn graph(&self) -> &EventGraph {
        &self.graph
    }

    pub fn push(&mut self, e: &QuantizedEvent) -> Result<Pushed, GraphError> {
        let srcs = if self.dedup {
            match self.nm.process_event(e, &self.params)? {
                Outcome::Duplicate => {
                    self.consumed += 1;
                    self.duplicates += 1;
                    return Ok(Pushed::Duplicate);
                }
                Outcome::Record(r) => r.srcs,
            }
        } else {
            self.nm.admit(e, &self.params)?;
            let srcs = self.nm.scan(e, &self.params);
            self.nm.set(e.x, e.y, e.t);
            srcs
        };
        self.consumed += 1;
        let id = self.graph.vertices.len() as u32;
        let size = self.params.size as usize;
        for [x, y, _] in &srcs {
            let src = self.cell_ids[*y as usize * size + *x as usize];
            debug_assert!(src != u32::MAX && src < id);
            self.graph.edges.push((src, id));
        }
        self.cell_ids[e.y as usize * size + e.x as usize] = id;
        self.graph.vertices.push(Vertex {
            id,
            pos: e.pos(),
            p: e.p,
        });
        Ok(Pushed::Vertex {
            id,
            in_degree: srcs.len(),
        })
    }

    pub fn finish(self) -> (EventGraph, GraphStats) {
        let stats = GraphStats::from_graph(&self.graph, self.consumed);
        debug_assert_eq!(stats.duplicates_dropped, self.duplicates);
        (self.graph, stats)
    }
}

impl GraphStats {
    /// Stats for a graph built from `events_consumed` input events; every
    /// event that did not become a vertex counts as a dropped duplicate.
    pub fn from_graph(graph: &EventGraph, events_consumed: u64) -> Self {
        let nodes = graph.vertices.len() as u64;
        GraphStats {
            events_consumed,
            nodes,
            edges: graph.edges.len() as u64,
            duplicates_dropped: events_consumed.saturating_sub(nodes),
            activity: activity_histogram(graph),
        }
    }
}

fn activity_histogram(graph: &EventGraph) -> Vec<u64> {
    let size = graph.size as usize;
    let mut per_pixel = vec![0u32; size * size];
    for v in &graph.vertices {
        per_pixel[v.pos[1] as usize * size + v.pos[0] as usize] += 1;
    }
    let mut hist: Vec<u64> = Vec::new();
    for &c in &per_pixel {
        let c = c as usize;
        if hist.len() <= c {
            hist.resize(c + 1, 0);
        }
        hist[c] += 1;
    }
    while hist.len() > 1 && hist.last() == Some(&0) {
        hist.pop();
    }
    hist
}

/// Folds a quantised, time-sorted stream through a fresh neighbour matrix.
pub fn build_graph(
    events: &[QuantizedEvent],
    params: &BuilderParams,
) -> Result<(EventGraph, GraphStats), GraphError> {
    fold(GraphBuilder::new(*params)?, events)
}

/// [`build_graph`] without duplicate removal.
pub fn build_graph_keep_duplicates(
    events: &[QuantizedEvent],
    params: &BuilderParams,
) -> Result<(EventGraph, GraphStats), GraphError> {
    fold(GraphBuilder::with_dedup(*params, false)?, events)
}

fn fold(
    mut builder: GraphBuilder,
    events: &[QuantizedEvent],
) -> Result<(EventGraph, GraphStats), GraphError> {
    for (i, e) in events.iter().enumerate() {
        builder.push(e).map_err(|err| err.at(i))?;
    }
    Ok(builder.finish())
}
