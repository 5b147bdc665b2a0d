//! Reference forward pass of a single PointNet graph convolution.
//!
//! For vertex `i` with in-neighbours `j`:
//!
//! ```text
//! m_ij  = message([a_j, pos_j - pos_i])     (plus the self message [a_i, 0])
//! out_i = update(max_j m_ij)
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::EventGraph;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"EVGW";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PointNetError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("weight file does not start with EVGW")]
    BadMagic,
    #[error("weight file length mismatch: expected {expected} bytes, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite weight at byte offset {offset}")]
    NonFiniteWeight { offset: usize },
}

/// Dense affine map `y = W x + b`, weights row-major `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl LinearLayer {
    pub fn new(
        out_dim: usize,
        in_dim: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self, PointNetError> {
        if weights.len() != out_dim * in_dim || bias.len() != out_dim {
            return Err(PointNetError::DimensionMismatch(format!(
                "{out_dim}x{in_dim} layer with {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            out_dim,
            in_dim,
            weights,
            bias,
        })
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            out_dim,
            in_dim,
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Ones on the leading diagonal, zero elsewhere.
    pub fn identity(out_dim: usize, in_dim: usize) -> Self {
        let mut l = Self::zeros(out_dim, in_dim);
        for k in 0..out_dim.min(in_dim) {
            l.weights[k * in_dim + k] = 1.0;
        }
        l
    }

    /// Uniform weights in `[-1/sqrt(in), 1/sqrt(in)]`, zero bias.
    pub fn random(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f32).sqrt();
        let mut l = Self::zeros(out_dim, in_dim);
        for w in &mut l.weights {
            *w = rng.random_range(-bound..=bound);
        }
        l
    }

    pub fn apply(&self, input: &[f32], out: &mut [f32]) {
        debug_assert_eq!(input.len(), self.in_dim);
        for (o, (row, b)) in out.iter_mut().zip(
            self.weights
                .chunks_exact(self.in_dim.max(1))
                .zip(&self.bias),
        ) {
            *o = row.iter().zip(input).fold(*b, |acc, (w, x)| acc + w * x);
        }
        if self.in_dim == 0 {
            out.copy_from_slice(&self.bias);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub message: LinearLayer,
    pub update: LinearLayer,
}

impl ConvLayer {
    pub fn new(message: LinearLayer, update: LinearLayer) -> Result<Self, PointNetError> {
        if message.in_dim < 3 {
            return Err(PointNetError::DimensionMismatch(format!(
                "message input {} cannot hold a 3-d position offset",
                message.in_dim
            )));
        }
        if update.in_dim != message.out_dim {
            return Err(PointNetError::DimensionMismatch(format!(
                "update input {} != message output {}",
                update.in_dim, message.out_dim
            )));
        }
        Ok(Self { message, update })
    }

    pub fn random(attr_dim: usize, hidden: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let message = LinearLayer::random(hidden, attr_dim + 3, &mut rng);
        let update = LinearLayer::random(out_dim, hidden, &mut rng);
        Self { message, update }
    }

    pub fn attr_dim(&self) -> usize {
        self.message.in_dim - 3
    }
}

/// Row-major per-vertex feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub dim: usize,
    pub data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self, PointNetError> {
        if dim == 0 && !data.is_empty() || dim != 0 && !data.len().is_multiple_of(dim) {
            return Err(PointNetError::DimensionMismatch(format!(
                "{} values do not split into rows of {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    /// One-dimensional polarity features (`±1`).
    pub fn polarity(g: &EventGraph) -> Self {
        Self {
            dim: 1,
            data: g.vertices.iter().map(|v| v.p.as_i8() as f32).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn conv_forward(
    g: &EventGraph,
    feats: &FeatureMatrix,
    layer: &ConvLayer,
) -> Result<FeatureMatrix, PointNetError> {
    let attr = layer.attr_dim();
    if feats.dim != attr {
        return Err(PointNetError::DimensionMismatch(format!(
            "features have {} columns, layer expects {attr}",
            feats.dim
        )));
    }
    if feats.rows() != g.vertices.len() && !(attr == 0 && g.vertices.is_empty()) {
        return Err(PointNetError::DimensionMismatch(format!(
            "{} feature rows for {} vertices",
            feats.rows(),
            g.vertices.len()
        )));
    }
    let n = g.vertices.len();
    let incoming = g.in_edges();
    let hidden = layer.message.out_dim;
    let out_dim = layer.update.out_dim;
    let mut input = vec![0.0f32; attr + 3];
    let mut msg = vec![0.0f32; hidden];
    let mut agg = vec![0.0f32; hidden];
    let mut out = vec![0.0f32; n * out_dim];

    for i in 0..n {
        let pi = g.vertices[i].pos;
        input[..attr].copy_from_slice(feats_row(feats, i, attr));
        input[attr..].fill(0.0);
        layer.message.apply(&input, &mut agg);
        for &j in &incoming[i] {
            let pj = g.vertices[j as usize].pos;
            input[..attr].copy_from_slice(feats_row(feats, j as usize, attr));
            for k in 0..3 {
                input[attr + k] = (pj[k] as i32 - pi[k] as i32) as f32;
            }
            layer.message.apply(&input, &mut msg);
            for (a, m) in agg.iter_mut().zip(&msg) {
                *a = a.max(*m);
            }
        }
        layer
            .update
            .apply(&agg, &mut out[i * out_dim..(i + 1) * out_dim]);
    }
    Ok(FeatureMatrix {
        dim: out_dim,
        data: out,
    })
}

fn feats_row(f: &FeatureMatrix, i: usize, dim: usize) -> &[f32] {
    if dim == 0 {
        &[]
    } else {
        f.row(i)
    }
}

pub fn save_weights(layer: &ConvLayer) -> Vec<u8> {
    let mut out = WEIGHTS_MAGIC.to_vec();
    for l in [&layer.message, &layer.update] {
        out.extend_from_slice(&(l.out_dim as u32).to_le_bytes());
        out.extend_from_slice(&(l.in_dim as u32).to_le_bytes());
        for v in l.weights.iter().chain(&l.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn load_weights(bytes: &[u8]) -> Result<ConvLayer, PointNetError> {
    if bytes.len() < 4 || &bytes[..4] != WEIGHTS_MAGIC {
        return Err(PointNetError::BadMagic);
    }
    let mut offset = 4;
    let mut layers = Vec::with_capacity(2);
    for _ in 0..2 {
        let dims = read_u32s(bytes, offset, 2)?;
        offset += 8;
        let (out_dim, in_dim) = (dims[0] as usize, dims[1] as usize);
        let count = out_dim
            .checked_mul(in_dim)
            .and_then(|w| w.checked_add(out_dim))
            .ok_or(PointNetError::LengthMismatch {
                expected: usize::MAX,
                found: bytes.len(),
            })?;
        let mut values = Vec::with_capacity(count);
        for k in 0..count {
            let at = offset + 4 * k;
            let v = f32::from_bits(read_u32s(bytes, at, 1)?[0]);
            if !v.is_finite() {
                return Err(PointNetError::NonFiniteWeight { offset: at });
            }
            values.push(v);
        }
        offset += 4 * count;
        let bias = values.split_off(out_dim * in_dim);
        layers.push(LinearLayer::new(out_dim, in_dim, values, bias)?);
    }
    if offset != bytes.len() {
        return Err(PointNetError::LengthMismatch {
            expected: offset,
            found: bytes.len(),
        });
    }
    let update = layers.pop().expect("two layers");
    let message = layers.pop().expect("two layers");
    ConvLayer::new(message, update)
}

fn read_u32s(bytes: &[u8], offset: usize, n: usize) -> Result<Vec<u32>, PointNetError> {
    let end = offset + 4 * n;
    let chunk = bytes
        .get(offset..end)
        .ok_or(PointNetError::LengthMismatch {
            expected: end,
            found: bytes.len(),
        })?;
    Ok(chunk
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Vertex;
    use crate::ingest::Polarity;

    fn vertex(id: u32, pos: [u16; 3]) -> Vertex {
        Vertex {
            id,
            pos,
            p: Polarity::Positive,
        }
    }

    #[test]
    fn single_vertex_identity() {
        let mut g = EventGraph::new(256, 3);
        g.vertices.push(vertex(0, [4, 5, 6]));
        let feats = FeatureMatrix::new(2, vec![0.5, -1.5]).unwrap();
        let layer =
            ConvLayer::new(LinearLayer::identity(5, 5), LinearLayer::identity(5, 5)).unwrap();
        let out = conv_forward(&g, &feats, &layer).unwrap();
        assert_eq!(out.data, vec![0.5, -1.5, 0.0, 0.0, 0.0]);
        let narrow =
            ConvLayer::new(LinearLayer::identity(1, 5), LinearLayer::identity(1, 1)).unwrap();
        assert_eq!(conv_forward(&g, &feats, &narrow).unwrap().data, vec![0.5]);
    }

    #[test]
    fn dimension_errors() {
        let mut g = EventGraph::new(256, 3);
        g.vertices.push(vertex(0, [0, 0, 0]));
        let layer = ConvLayer::random(1, 4, 2, 0);
        let wrong_dim = FeatureMatrix::new(2, vec![1.0, 2.0]).unwrap();
        assert!(conv_forward(&g, &wrong_dim, &layer).is_err());
        let wrong_rows = FeatureMatrix::new(1, vec![1.0, 2.0]).unwrap();
        assert!(conv_forward(&g, &wrong_rows, &layer).is_err());
        assert!(ConvLayer::new(LinearLayer::zeros(2, 2), LinearLayer::zeros(1, 2)).is_err());
        assert!(ConvLayer::new(LinearLayer::zeros(2, 4), LinearLayer::zeros(1, 3)).is_err());
        assert!(LinearLayer::new(2, 2, vec![0.0; 3], vec![0.0; 2]).is_err());
    }

    #[test]
    fn weights_round_trip_and_errors() {
        let layer = ConvLayer::new(
            LinearLayer::new(1, 4, vec![1.0, 2.0, 3.0, 4.0], vec![0.5]).unwrap(),
            LinearLayer::new(1, 1, vec![-1.0], vec![0.25]).unwrap(),
        )
        .unwrap();
        let bytes = save_weights(&layer);
        assert_eq!(bytes.len(), 4 + 8 + 20 + 8 + 8);
        assert_eq!(load_weights(&bytes).unwrap(), layer);

        assert!(matches!(
            load_weights(&bytes[..bytes.len() - 1]),
            Err(PointNetError::LengthMismatch { .. })
        ));
        let mut long = bytes.clone();
        long.extend_from_slice(&[0; 4]);
        assert!(matches!(
            load_weights(&long),
            Err(PointNetError::LengthMismatch { .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(load_weights(&bad), Err(PointNetError::BadMagic));
        let mut nan = bytes.clone();
        nan[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(
            load_weights(&nan),
            Err(PointNetError::NonFiniteWeight { offset: 12 })
        );
        let random = ConvLayer::random(3, 8, 4, 11);
        assert_eq!(load_weights(&save_weights(&random)).unwrap(), random);
    }
}
