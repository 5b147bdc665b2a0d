//! Graph generation for event-camera streams.
//!
//! The pipeline is: parse raw events ([`ingest`]), pick an analysis window,
//! normalise into a `size³` integer cube ([`quantize`]), then fold the
//! quantised stream through a neighbour matrix to obtain a deduplicated,
//! time-directed, radius-bounded graph ([`graph`]). [`hw`] is a cycle-level
//! model of the same graph generator running as a fixed-function block
//! behind a FIFO, and [`pointnet`] is a reference forward pass of the
//! graph convolution that consumes the result.

pub mod coo;
pub mod graph;
pub mod hw;
pub mod ingest;
pub mod pointnet;
pub mod quantize;

pub use graph::{
    build_graph, oracle_edges, radius_baseline, BuilderParams, EdgeRecord, EventGraph,
    GraphBuilder, GraphError, GraphStats, NeighbourMatrix, Outcome, Vertex,
};
pub use ingest::{EventWindow, IngestError, Polarity, RawEvent, SensorGeometry};
pub use quantize::{quantize, quantize_stream, QuantParams, QuantizeError, QuantizedEvent};
