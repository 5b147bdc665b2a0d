use evgraph::ingest::{densest_window, synth_stream};
use evgraph::SensorGeometry;

#[test]
fn densest_window_matches_exhaustive_search() {
    let g = SensorGeometry::DAVIS240;
    // bursty: two rates glued together
    let mut events = synth_stream(g, 500.0, 10_000, 1);
    events.extend(synth_stream(g, 1500.0, 3_000, 2).into_iter().map(|mut e| {
        e.t += 10_000;
        e
    }));
    assert!(events.len() <= 10_000);
    for duration in [1, 50, 997, 5_000, 50_000] {
        let w = densest_window(&events, duration).unwrap();
        let mut best = (0u64, 0usize);
        for s in &events {
            let n = events
                .iter()
                .filter(|e| e.t >= s.t && e.t < s.t + duration)
                .count();
            if n > best.1 {
                best = (s.t, n);
            }
        }
        assert_eq!((w.t_start, w.len()), best, "duration {duration}");
    }
}
