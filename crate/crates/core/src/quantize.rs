//! Normalisation of sensor coordinates and time into a `size³` integer cube.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{EventWindow, Polarity, RawEvent, SensorGeometry};

pub const DEFAULT_SIZE: u32 = 256;
pub const DEFAULT_WINDOW_US: u64 = 50_000;
pub const MAX_SIZE: u32 = 65_536;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QuantizeError {
    #[error("event at t={t} outside window [{t0}, {t0}+{t_window})")]
    OutOfWindow { t: u64, t0: u64, t_window: u64 },
    #[error("event at ({x}, {y}) outside {width}x{height} sensor")]
    OutOfGeometry {
        x: u16,
        y: u16,
        width: u32,
        height: u32,
    },
    #[error("event {index}: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<QuantizeError>,
    },
    #[error("invalid quantisation parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantParams {
    pub size: u32,
    pub geometry: SensorGeometry,
    pub t0: u64,
    pub t_window: u64,
}

impl QuantParams {
    pub fn new(
        size: u32,
        geometry: SensorGeometry,
        t0: u64,
        t_window: u64,
    ) -> Result<Self, QuantizeError> {
        let q = Self {
            size,
            geometry,
            t0,
            t_window,
        };
        q.validate()?;
        Ok(q)
    }

    /// Parameters covering `window` on `geometry`.
    pub fn for_window(
        window: &EventWindow,
        geometry: SensorGeometry,
        size: u32,
    ) -> Result<Self, QuantizeError> {
        Self::new(size, geometry, window.t_start, window.duration)
    }

    pub fn validate(&self) -> Result<(), QuantizeError> {
        if !(2..=MAX_SIZE).contains(&self.size) {
            return Err(QuantizeError::InvalidParams(format!(
                "size {} outside [2, {MAX_SIZE}]",
                self.size
            )));
        }
        if self.t_window == 0 {
            return Err(QuantizeError::InvalidParams("t_window must be >= 1".into()));
        }
        if self.geometry.width == 0 || self.geometry.height == 0 {
            return Err(QuantizeError::InvalidParams("empty geometry".into()));
        }
        Ok(())
    }
}

/// An event inside the cube: `0 <= x, y, t <= size - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantizedEvent {
    pub x: u16,
    pub y: u16,
    pub t: u16,
    pub p: Polarity,
}

impl QuantizedEvent {
    pub fn new(x: u16, y: u16, t: u16, p: Polarity) -> Self {
        Self { x, y, t, p }
    }

    pub fn pos(&self) -> [u16; 3] {
        [self.x, self.y, self.t]
    }
}

/// `floor(v * size / extent)` clamped to `size - 1`, in exact integer arithmetic.
fn scale(v: u64, size: u32, extent: u64) -> u16 {
    let scaled = (v as u128 * size as u128) / extent as u128;
    scaled.min(size as u128 - 1) as u16
}

pub fn quantize(e: &RawEvent, q: &QuantParams) -> Result<QuantizedEvent, QuantizeError> {
    if e.t < q.t0 || e.t - q.t0 >= q.t_window {
        return Err(QuantizeError::OutOfWindow {
            t: e.t,
            t0: q.t0,
            t_window: q.t_window,
        });
    }
    if !q.geometry.contains(e) {
        return Err(QuantizeError::OutOfGeometry {
            x: e.x,
            y: e.y,
            width: q.geometry.width,
            height: q.geometry.height,
        });
    }
    Ok(QuantizedEvent {
        x: scale(e.x as u64, q.size, q.geometry.width as u64),
        y: scale(e.y as u64, q.size, q.geometry.height as u64),
        t: scale(e.t - q.t0, q.size, q.t_window),
        p: e.p,
    })
}

pub fn quantize_stream(
    events: &[RawEvent],
    q: &QuantParams,
) -> Result<Vec<QuantizedEvent>, QuantizeError> {
    q.validate()?;
    events
        .iter()
        .enumerate()
        .map(|(index, e)| {
            quantize(e, q).map_err(|source| QuantizeError::AtIndex {
                index,
                source: Box::new(source),
            })
        })
        .collect()
}
