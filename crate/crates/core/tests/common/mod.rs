#![allow(dead_code)]

use evgraph::ingest::{densest_window, synth_stream};
use evgraph::{quantize_stream, Polarity, QuantParams, QuantizedEvent, SensorGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Time-sorted quantised events packed into a small patch so that edges and
/// duplicates are frequent.
pub fn dense_stream(seed: u64, n: usize, size: u32, patch: u16) -> Vec<QuantizedEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patch = patch.min(size as u16);
    let ox = rng.random_range(0..=(size as u16 - patch));
    let oy = rng.random_range(0..=(size as u16 - patch));
    let mut t = 0u16;
    (0..n)
        .map(|_| {
            if rng.random_bool(0.1) {
                t = (t + rng.random_range(0..3)).min(size as u16 - 1);
            }
            QuantizedEvent::new(
                ox + rng.random_range(0..patch),
                oy + rng.random_range(0..patch),
                t,
                Polarity::from_bit(rng.random()),
            )
        })
        .collect()
}

/// Synthetic camera stream pushed through window selection and
/// quantisation with a random geometry.
pub fn camera_stream(seed: u64, max_events: usize, size: u32) -> Vec<QuantizedEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let geometry =
        SensorGeometry::new(rng.random_range(16..=346), rng.random_range(16..=260)).unwrap();
    let window_us = rng.random_range(1_000..=50_000u64);
    let target = rng.random_range(1..=max_events) as f64;
    let rate_per_ms = target * 1000.0 / window_us as f64;
    let raw = synth_stream(geometry, rate_per_ms, window_us, seed);
    if raw.is_empty() {
        return Vec::new();
    }
    let w = densest_window(&raw, window_us).unwrap();
    let mut events = w.events;
    events.truncate(max_events);
    let q = QuantParams::new(size, geometry, w.t_start, window_us).unwrap();
    quantize_stream(&events, &q).unwrap()
}
