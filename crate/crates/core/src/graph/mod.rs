//! Neighbour-matrix graph generation and its reference implementations.

mod baseline;
mod builder;
mod nm;
mod oracle;
pub mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Polarity;

pub use baseline::{radius_baseline, radius_graph, DEFAULT_MAX_NEIGHBORS};
pub use builder::{build_graph, build_graph_keep_duplicates, GraphBuilder, GraphStats, Pushed};
pub use nm::{EdgeRecord, NeighbourMatrix, Outcome};
pub use oracle::oracle_edges;

pub const DEFAULT_RADIUS: u16 = 3;

/// Largest cube side for which a dense neighbour matrix is allocated.
pub const MAX_BUILDER_SIZE: u32 = 4096;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("event ({x}, {y}, {t}) outside the {size}³ cube")]
    OutOfRange { x: u16, y: u16, t: u16, size: u32 },
    #[error("quantised time went backwards: {current} after {previous}")]
    TimeRegression { previous: u16, current: u16 },
    #[error("invalid builder parameters: {0}")]
    InvalidParams(String),
    #[error("event {index}: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<GraphError>,
    },
}

impl GraphError {
    pub(crate) fn at(self, index: usize) -> GraphError {
        GraphError::AtIndex {
            index,
            source: Box::new(self),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuilderParams {
    pub radius: u16,
    pub size: u32,
    /// Also consider the prior event at the incoming event's own pixel.
    pub include_center: bool,
}

impl Default for BuilderParams {
    fn default() -> Self {
        Self {
            radius: DEFAULT_RADIUS,
            size: crate::quantize::DEFAULT_SIZE,
            include_center: false,
        }
    }
}

impl BuilderParams {
    pub fn new(radius: u16, size: u32, include_center: bool) -> Result<Self, GraphError> {
        let p = Self {
            radius,
            size,
            include_center,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.radius == 0 {
            return Err(GraphError::InvalidParams("radius must be >= 1".into()));
        }
        if !(2..=MAX_BUILDER_SIZE).contains(&self.size) {
            return Err(GraphError::InvalidParams(format!(
                "size {} outside [2, {MAX_BUILDER_SIZE}]",
                self.size
            )));
        }
        if 2 * self.radius as u32 + 1 >= self.size {
            return Err(GraphError::InvalidParams(format!(
                "context {0}x{0} does not fit a {1}x{1} matrix",
                2 * self.radius + 1,
                self.size
            )));
        }
        Ok(())
    }

    pub fn radius_sq(&self) -> u32 {
        let r = self.radius as u32;
        r * r
    }

    /// Cells read from the context for one event.
    pub fn context_cells(&self) -> usize {
        let side = 2 * self.radius as usize + 1;
        side * side - usize::from(!self.include_center)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: u32,
    /// `(x, y, t)` in the quantised cube.
    pub pos: [u16; 3],
    pub p: Polarity,
}

/// Vertices in arrival order plus directed COO edges `(src, dst)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventGraph {
    pub size: u32,
    pub radius: u16,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<(u32, u32)>,
}

impl EventGraph {
    pub fn new(size: u32, radius: u16) -> Self {
        Self {
            size,
            radius,
            vertices: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// In-neighbour lists indexed by destination id.
    pub fn in_edges(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &(src, dst) in &self.edges {
            adj[dst as usize].push(src);
        }
        adj
    }
}

/// Squared Euclidean distance between two cube positions.
pub fn dist_sq(a: [u16; 3], b: [u16; 3]) -> u32 {
    a.iter()
        .zip(b.iter())
        .map(|(&u, &v)| {
            let d = u.abs_diff(v) as u32;
            d * d
        })
        .sum()
}
