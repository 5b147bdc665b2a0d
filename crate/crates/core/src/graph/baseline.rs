use super::{dist_sq, EventGraph, Vertex};
use crate::quantize::QuantizedEvent;

pub const DEFAULT_MAX_NEIGHBORS: usize = 32;

/// Radius-graph baseline over the raw vertex set.
///
/// Every vertex picks up to `max_neighbors` other vertices within
/// Euclidean distance `radius` over `(x, y, t)`, nearest first, ties going
/// to the earlier arrival. Each pick `j` for vertex `i` yields the COO entry
/// `(j, i)`, so an uncapped pair appears once per direction. Entries are
/// grouped by destination.
pub fn radius_baseline(
    events: &[QuantizedEvent],
    radius: u16,
    max_neighbors: usize,
) -> Vec<(u32, u32)> {
    if events.is_empty() || max_neighbors == 0 {
        return Vec::new();
    }
    let r = radius as i32;
    let r_sq = radius as u32 * radius as u32;

    // per-pixel lists of (t, index), sorted because the input is
    let mut by_pixel: std::collections::HashMap<(u16, u16), Vec<(u16, u32)>> =
        std::collections::HashMap::new();
    for (i, e) in events.iter().enumerate() {
        by_pixel
            .entry((e.x, e.y))
            .or_default()
            .push((e.t, i as u32));
    }
    for list in by_pixel.values_mut() {
        list.sort_unstable();
    }

    let mut out = Vec::new();
    let mut found: Vec<(u32, u32)> = Vec::new();
    for (i, e) in events.iter().enumerate() {
        found.clear();
        for dy in -r..=r {
            for dx in -r..=r {
                let planar = (dx * dx + dy * dy) as u32;
                if planar > r_sq {
                    continue;
                }
                let (x, y) = (e.x as i32 + dx, e.y as i32 + dy);
                if !(0..=u16::MAX as i32).contains(&x) || !(0..=u16::MAX as i32).contains(&y) {
                    continue;
                }
                let Some(list) = by_pixel.get(&(x as u16, y as u16)) else {
                    continue;
                };
                let reach = ((r_sq - planar) as f64).sqrt() as u16;
                let lo = e.t.saturating_sub(reach);
                let start = list.partition_point(|&(t, _)| t < lo);
                for &(t, j) in &list[start..] {
                    if t > e.t.saturating_add(reach) {
                        break;
                    }
                    if j as usize == i {
                        continue;
                    }
                    let d = dist_sq([x as u16, y as u16, t], e.pos());
                    if d <= r_sq {
                        found.push((d, j));
                    }
                }
            }
        }
        found.sort_unstable();
        out.extend(
            found
                .iter()
                .take(max_neighbors)
                .map(|&(_, j)| (j, i as u32)),
        );
    }
    out
}

/// [`radius_baseline`] packaged with one vertex per input event.
pub fn radius_graph(
    events: &[QuantizedEvent],
    size: u32,
    radius: u16,
    max_neighbors: usize,
) -> EventGraph {
    let mut g = EventGraph::new(size, radius);
    g.vertices = events
        .iter()
        .enumerate()
        .map(|(i, e)| Vertex {
            id: i as u32,
            pos: e.pos(),
            p: e.p,
        })
        .collect();
    g.edges = radius_baseline(events, radius, max_neighbors);
    g
}
