use serde::{Deserialize, Serialize};

use super::{BuilderParams, GraphError};
use crate::quantize::QuantizedEvent;

/// `size × size` grid holding, per pixel, the quantised timestamp of the
/// most recent surviving event.
#[derive(Debug, Clone)]
pub struct NeighbourMatrix {
    size: u32,
    cells: Vec<Option<u16>>,
    latest_t: Option<u16>,
}

/// A surviving event and the absolute positions of its past neighbours.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub dst: QuantizedEvent,
    pub srcs: Vec<[u16; 3]>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Duplicate,
    Record(EdgeRecord),
}

impl NeighbourMatrix {
    pub fn new(size: u32) -> Self {
        let n = size as usize * size as usize;
        Self {
            size,
            cells: vec![None; n],
            latest_t: None,
        }
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn reset(&mut self) {
        self.cells.fill(None);
        self.latest_t = None;
    }

    pub fn get(&self, x: u16, y: u16) -> Option<u16> {
        self.cells[self.index(x, y)]
    }

    /// Stores `t` at `(x, y)` directly, bypassing all checks.
    pub fn set(&mut self, x: u16, y: u16, t: u16) {
        let i = self.index(x, y);
        self.cells[i] = Some(t);
    }

    fn index(&self, x: u16, y: u16) -> usize {
        y as usize * self.size as usize + x as usize
    }

    /// Duplicate check, context scan and write-back for one event.
    pub fn process_event(
        &mut self,
        e: &QuantizedEvent,
        params: &BuilderParams,
    ) -> Result<Outcome, GraphError> {
        self.admit(e, params)?;
        if self.get(e.x, e.y) == Some(e.t) {
            return Ok(Outcome::Duplicate);
        }
        let srcs = self.scan(e, params);
        self.set(e.x, e.y, e.t);
        Ok(Outcome::Record(EdgeRecord { dst: *e, srcs }))
    }

    /// Range and ordering checks; records `e.t` as the latest time seen.
    pub(crate) fn admit(
        &mut self,
        e: &QuantizedEvent,
        params: &BuilderParams,
    ) -> Result<(), GraphError> {
        if params.size != self.size {
            return Err(GraphError::InvalidParams(format!(
                "matrix size {} does not match params size {}",
                self.size, params.size
            )));
        }
        let size = self.size;
        if [e.x, e.y, e.t].iter().any(|&v| v as u32 >= size) {
            return Err(GraphError::OutOfRange {
                x: e.x,
                y: e.y,
                t: e.t,
                size,
            });
        }
        if let Some(previous) = self.latest_t {
            if e.t < previous {
                return Err(GraphError::TimeRegression {
                    previous,
                    current: e.t,
                });
            }
        }
        self.latest_t = Some(e.t);
        Ok(())
    }

    /// Context candidates inside the past hemisphere of radius `R`, in
    /// row-major order over the clipped `(2R+1)²` window.
    pub(crate) fn scan(&self, e: &QuantizedEvent, params: &BuilderParams) -> Vec<[u16; 3]> {
        let r = params.radius as i32;
        let r_sq = params.radius_sq();
        let max = self.size as i32 - 1;
        let (cx, cy) = (e.x as i32, e.y as i32);
        let mut srcs = Vec::new();
        for y in (cy - r).max(0)..=(cy + r).min(max) {
            for x in (cx - r).max(0)..=(cx + r).min(max) {
                if x == cx && y == cy && !params.include_center {
                    continue;
                }
                let Some(tc) = self.cells[y as usize * self.size as usize + x as usize] else {
                    continue;
                };
                let (dx, dy) = ((x - cx).unsigned_abs(), (y - cy).unsigned_abs());
                let dt = e.t.abs_diff(tc) as u32;
                if dx * dx + dy * dy + dt * dt <= r_sq {
                    srcs.push([x as u16, y as u16, tc]);
                }
            }
        }
        srcs
    }
}
