use std::collections::BTreeSet;

use super::{dist_sq, BuilderParams, GraphError};
use crate::quantize::QuantizedEvent;

/// Quadratic reference edge generator.
///
/// Replays the stream keeping every surviving event in a flat list. Exact
/// `(x, y, t)` repeats are dropped. Each new event links from every prior
/// survivor that is still the latest at its pixel and lies within `R`.
/// Shares no code with the neighbour-matrix path.
pub fn oracle_edges(
    events: &[QuantizedEvent],
    params: &BuilderParams,
) -> Result<BTreeSet<(u32, u32)>, GraphError> {
    params.validate()?;
    let size = params.size;
    let r_sq = params.radius_sq();
    let mut survivors: Vec<[u16; 3]> = Vec::new();
    let mut edges = BTreeSet::new();
    let mut latest_t: Option<u16> = None;
    // generation stamp per pixel: "already met a newer survivor here"
    let mut seen = vec![0u32; size as usize * size as usize];
    let mut generation = 0u32;

    for (index, e) in events.iter().enumerate() {
        if [e.x, e.y, e.t].iter().any(|&v| v as u32 >= size) {
            return Err(GraphError::OutOfRange {
                x: e.x,
                y: e.y,
                t: e.t,
                size,
            }
            .at(index));
        }
        if let Some(previous) = latest_t {
            if e.t < previous {
                return Err(GraphError::TimeRegression {
                    previous,
                    current: e.t,
                }
                .at(index));
            }
        }
        latest_t = Some(e.t);

        let pos = e.pos();
        if survivors.contains(&pos) {
            continue;
        }
        let dst = survivors.len() as u32;
        generation += 1;
        for (src, s) in survivors.iter().enumerate().rev() {
            let cell = s[1] as usize * size as usize + s[0] as usize;
            if seen[cell] == generation {
                continue;
            }
            seen[cell] = generation;
            let same_pixel = s[0] == pos[0] && s[1] == pos[1];
            if same_pixel && !params.include_center {
                continue;
            }
            if dist_sq(*s, pos) <= r_sq {
                edges.insert((src as u32, dst));
            }
        }
        survivors.push(pos);
    }
    Ok(edges)
}
