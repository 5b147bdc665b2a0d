//! Serialisations of an [`EventGraph`].
//!
//! The text form lists vertices then edges:
//!
//! ```text
//! # evgraph-coo v1 size=256 radius=3
//! V <id> <x> <y> <t> <p>
//! E <src_id> <dst_id>
//! ```
//!
//! The packed binary form mirrors the hardware output stream. After a
//! 16-byte header (`EVGB`, then little-endian `u32` size, radius and record
//! count) each vertex is one edge record: a 25-bit event word, a `u32`
//! source count and one 24-bit source word per incoming edge, every word
//! stored as a little-endian `u32`.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{EdgeRecord, EventGraph, Vertex};
use crate::ingest::Polarity;
use crate::quantize::QuantizedEvent;

pub const TEXT_MAGIC: &str = "# evgraph-coo v1";
pub const BIN_MAGIC: &[u8; 4] = b"EVGB";

/// Bits in a packed event word: three 8-bit coordinates and the polarity.
pub const EVENT_WORD_BITS: u32 = 25;
/// Bits in a packed source word: three 8-bit coordinates.
pub const SOURCE_WORD_BITS: u32 = 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CooError {
    #[error("missing or malformed header")]
    BadHeader,
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("coordinate ({x}, {y}, {t}) does not fit 8 bits")]
    Unpackable { x: u16, y: u16, t: u16 },
    #[error("vertex {id} shares its position with an earlier vertex")]
    AmbiguousPosition { id: u32 },
    #[error("edge ({src}, {dst}) is not directed from an earlier vertex")]
    NotTimeDirected { src: u32, dst: u32 },
    #[error("binary graph truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("record {record}: source ({x}, {y}, {t}) matches no earlier vertex")]
    UnknownSource { record: usize, x: u8, y: u8, t: u8 },
    #[error("{0} trailing bytes after last record")]
    TrailingBytes(usize),
}

/// `x:8 | y:8 | t:8 | p:1`, most significant first.
pub fn pack_event(e: &QuantizedEvent) -> Result<u32, CooError> {
    let [x, y, t] = check_8bit(e.pos())?;
    Ok((x << 17) | (y << 9) | (t << 1) | e.p.bit())
}

pub fn unpack_event(word: u32) -> QuantizedEvent {
    QuantizedEvent {
        x: ((word >> 17) & 0xff) as u16,
        y: ((word >> 9) & 0xff) as u16,
        t: ((word >> 1) & 0xff) as u16,
        p: Polarity::from_bit(word & 1 == 1),
    }
}

/// `x:8 | y:8 | t:8`, most significant first.
pub fn pack_source(pos: [u16; 3]) -> Result<u32, CooError> {
    let [x, y, t] = check_8bit(pos)?;
    Ok((x << 16) | (y << 8) | t)
}

pub fn unpack_source(word: u32) -> [u16; 3] {
    [
        ((word >> 16) & 0xff) as u16,
        ((word >> 8) & 0xff) as u16,
        (word & 0xff) as u16,
    ]
}

fn check_8bit(pos: [u16; 3]) -> Result<[u32; 3], CooError> {
    if pos.iter().any(|&v| v > 0xff) {
        return Err(CooError::Unpackable {
            x: pos[0],
            y: pos[1],
            t: pos[2],
        });
    }
    Ok(pos.map(u32::from))
}

pub fn write_text(g: &EventGraph) -> String {
    let mut out = String::with_capacity(64 + g.vertices.len() * 24 + g.edges.len() * 14);
    let _ = writeln!(out, "{TEXT_MAGIC} size={} radius={}", g.size, g.radius);
    for v in &g.vertices {
        let _ = writeln!(
            out,
            "V {} {} {} {} {}",
            v.id,
            v.pos[0],
            v.pos[1],
            v.pos[2],
            v.p.as_i8()
        );
    }
    for (s, d) in &g.edges {
        let _ = writeln!(out, "E {s} {d}");
    }
    out
}

pub fn parse_text(text: &str) -> Result<EventGraph, CooError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(CooError::BadHeader)?;
    let (size, radius) = parse_header(header.trim_end()).ok_or(CooError::BadHeader)?;
    let mut g = EventGraph::new(size, radius);
    for (i, raw) in lines {
        let line = i + 1;
        let err = |reason: &str| CooError::Line {
            line,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = raw.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            ["V", rest @ ..] => {
                if !g.edges.is_empty() {
                    return Err(err("vertex after edges"));
                }
                let [id, x, y, t, p] = rest else {
                    return Err(err("vertex needs 5 fields"));
                };
                let id: u32 = id.parse().map_err(|_| err("bad vertex id"))?;
                if id as usize != g.vertices.len() {
                    return Err(err("vertex ids must be dense and ordered"));
                }
                let coord = |s: &str| s.parse::<u16>().map_err(|_| err("bad coordinate"));
                let pos = [coord(x)?, coord(y)?, coord(t)?];
                let p = p
                    .parse::<i8>()
                    .ok()
                    .and_then(|v| Polarity::try_from(v).ok())
                    .ok_or_else(|| err("bad polarity"))?;
                g.vertices.push(Vertex { id, pos, p });
            }
            ["E", s, d] => {
                let s: u32 = s.parse().map_err(|_| err("bad source id"))?;
                let d: u32 = d.parse().map_err(|_| err("bad destination id"))?;
                let n = g.vertices.len() as u32;
                if s >= n || d >= n {
                    return Err(err("edge references unknown vertex"));
                }
                g.edges.push((s, d));
            }
            _ => return Err(err("unrecognised line")),
        }
    }
    Ok(g)
}

fn parse_header(line: &str) -> Option<(u32, u16)> {
    let rest = line.strip_prefix(TEXT_MAGIC)?;
    let mut size = None;
    let mut radius = None;
    for kv in rest.split_whitespace() {
        match kv.split_once('=')? {
            ("size", v) => size = v.parse().ok(),
            ("radius", v) => radius = v.parse().ok(),
            _ => return None,
        }
    }
    Some((size?, radius?))
}

/// One record per vertex, sources in edge-list order.
pub fn to_records(g: &EventGraph) -> Result<Vec<EdgeRecord>, CooError> {
    let mut seen = HashMap::with_capacity(g.vertices.len());
    for v in &g.vertices {
        if seen.insert(v.pos, v.id).is_some() {
            return Err(CooError::AmbiguousPosition { id: v.id });
        }
    }
    let mut records: Vec<EdgeRecord> = g
        .vertices
        .iter()
        .map(|v| EdgeRecord {
            dst: QuantizedEvent::new(v.pos[0], v.pos[1], v.pos[2], v.p),
            srcs: Vec::new(),
        })
        .collect();
    for &(s, d) in &g.edges {
        if s >= d {
            return Err(CooError::NotTimeDirected { src: s, dst: d });
        }
        records[d as usize].srcs.push(g.vertices[s as usize].pos);
    }
    Ok(records)
}

pub fn encode_records(records: &[EdgeRecord], out: &mut Vec<u8>) -> Result<(), CooError> {
    for r in records {
        out.extend_from_slice(&pack_event(&r.dst)?.to_le_bytes());
        out.extend_from_slice(&(r.srcs.len() as u32).to_le_bytes());
        for s in &r.srcs {
            out.extend_from_slice(&pack_source(*s)?.to_le_bytes());
        }
    }
    Ok(())
}

pub fn write_binary(g: &EventGraph) -> Result<Vec<u8>, CooError> {
    let records = to_records(g)?;
    let mut out = Vec::with_capacity(16 + 8 * records.len() + 4 * g.edges.len());
    out.extend_from_slice(BIN_MAGIC);
    out.extend_from_slice(&g.size.to_le_bytes());
    out.extend_from_slice(&(g.radius as u32).to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    encode_records(&records, &mut out)?;
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl Reader<'_> {
    fn u32(&mut self) -> Result<u32, CooError> {
        let end = self.offset + 4;
        let chunk = self
            .bytes
            .get(self.offset..end)
            .ok_or(CooError::Truncated {
                offset: self.offset,
            })?;
        self.offset = end;
        Ok(u32::from_le_bytes(chunk.try_into().expect("4 bytes")))
    }
}

pub fn parse_binary(bytes: &[u8]) -> Result<EventGraph, CooError> {
    if bytes.len() < 4 || &bytes[..4] != BIN_MAGIC {
        return Err(CooError::BadHeader);
    }
    let mut r = Reader { bytes, offset: 4 };
    let size = r.u32()?;
    let radius = u16::try_from(r.u32()?).map_err(|_| CooError::BadHeader)?;
    let count = r.u32()? as usize;
    let mut g = EventGraph::new(size, radius);
    let mut ids: HashMap<[u16; 3], u32> = HashMap::new();
    for record in 0..count {
        let dst = unpack_event(r.u32()?);
        let n = r.u32()?;
        let id = record as u32;
        for _ in 0..n {
            let pos = unpack_source(r.u32()?);
            let src = *ids.get(&pos).ok_or(CooError::UnknownSource {
                record,
                x: pos[0] as u8,
                y: pos[1] as u8,
                t: pos[2] as u8,
            })?;
            g.edges.push((src, id));
        }
        ids.insert(dst.pos(), id);
        g.vertices.push(Vertex {
            id,
            pos: dst.pos(),
            p: dst.p,
        });
    }
    if r.offset != bytes.len() {
        return Err(CooError::TrailingBytes(bytes.len() - r.offset));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, BuilderParams};
    use proptest::prelude::*;

    fn qe(x: u16, y: u16, t: u16, p: Polarity) -> QuantizedEvent {
        QuantizedEvent::new(x, y, t, p)
    }

    #[test]
    fn event_word_layout() {
        assert_eq!(pack_event(&qe(0, 0, 0, Polarity::Positive)).unwrap(), 1);
        assert_eq!(
            pack_event(&qe(0, 0, 1, Polarity::Negative)).unwrap(),
            1 << 1
        );
        assert_eq!(
            pack_event(&qe(0, 1, 0, Polarity::Negative)).unwrap(),
            1 << 9
        );
        assert_eq!(
            pack_event(&qe(1, 0, 0, Polarity::Negative)).unwrap(),
            1 << 17
        );
        let full = pack_event(&qe(255, 255, 255, Polarity::Positive)).unwrap();
        assert_eq!(full, (1 << EVENT_WORD_BITS) - 1);
        assert_eq!(
            pack_event(&qe(0xAB, 0xCD, 0xEF, Polarity::Positive)).unwrap(),
            0x0157_9BDF
        );
        assert_eq!(
            unpack_event(0x0157_9BDF),
            qe(0xAB, 0xCD, 0xEF, Polarity::Positive)
        );
    }

    #[test]
    fn source_word_layout() {
        assert_eq!(pack_source([0xAB, 0xCD, 0xEF]).unwrap(), 0x00AB_CDEF);
        assert_eq!(
            pack_source([255, 255, 255]).unwrap(),
            (1 << SOURCE_WORD_BITS) - 1
        );
        assert_eq!(unpack_source(0x00AB_CDEF), [0xAB, 0xCD, 0xEF]);
        assert!(matches!(
            pack_source([256, 0, 0]),
            Err(CooError::Unpackable { .. })
        ));
    }

    #[test]
    fn empty_graph_text() {
        let g = EventGraph::new(256, 3);
        let text = write_text(&g);
        assert_eq!(text, "# evgraph-coo v1 size=256 radius=3\n");
        assert_eq!(parse_text(&text).unwrap(), g);
    }

    #[test]
    fn text_layout() {
        let evs = [
            qe(1, 1, 0, Polarity::Positive),
            qe(2, 1, 1, Polarity::Negative),
        ];
        let (g, _) = build_graph(&evs, &BuilderParams::default()).unwrap();
        assert_eq!(
            write_text(&g),
            "# evgraph-coo v1 size=256 radius=3\nV 0 1 1 0 1\nV 1 2 1 1 -1\nE 0 1\n"
        );
    }

    #[test]
    fn text_errors() {
        assert_eq!(parse_text(""), Err(CooError::BadHeader));
        assert_eq!(parse_text("# other\n"), Err(CooError::BadHeader));
        let h = "# evgraph-coo v1 size=8 radius=1\n";
        assert!(matches!(
            parse_text(&format!("{h}V 1 0 0 0 1\n")),
            Err(CooError::Line { line: 2, .. })
        ));
        assert!(matches!(
            parse_text(&format!("{h}V 0 0 0 0 1\nE 0 1\n")),
            Err(CooError::Line { line: 3, .. })
        ));
        assert!(matches!(
            parse_text(&format!("{h}V 0 0 0 0 2\n")),
            Err(CooError::Line { line: 2, .. })
        ));
    }

    #[test]
    fn binary_layout() {
        let evs = [
            qe(1, 2, 3, Polarity::Positive),
            qe(2, 2, 3, Polarity::Negative),
        ];
        let (g, _) = build_graph(&evs, &BuilderParams::default()).unwrap();
        let bin = write_binary(&g).unwrap();
        let mut expected = b"EVGB".to_vec();
        for w in [256u32, 3, 2] {
            expected.extend_from_slice(&w.to_le_bytes());
        }
        let w0 = (1 << 17) | (2 << 9) | (3 << 1) | 1;
        let w1 = (2 << 17) | (2 << 9) | (3 << 1);
        let s0 = (1 << 16) | (2 << 8) | 3;
        for w in [w0, 0u32, w1, 1, s0] {
            expected.extend_from_slice(&w.to_le_bytes());
        }
        assert_eq!(bin, expected);
        assert_eq!(parse_binary(&bin).unwrap(), g);
    }

    #[test]
    fn binary_errors() {
        assert_eq!(parse_binary(b"XXXX"), Err(CooError::BadHeader));
        let mut g = EventGraph::new(256, 3);
        let v = Vertex {
            id: 0,
            pos: [1, 1, 1],
            p: Polarity::Positive,
        };
        g.vertices = vec![v, Vertex { id: 1, ..v }];
        assert_eq!(write_binary(&g), Err(CooError::AmbiguousPosition { id: 1 }));
        g.vertices[1].pos = [2, 1, 1];
        g.edges = vec![(1, 0)];
        assert_eq!(
            write_binary(&g),
            Err(CooError::NotTimeDirected { src: 1, dst: 0 })
        );
        g.edges = vec![(0, 1)];
        let bin = write_binary(&g).unwrap();
        assert!(matches!(
            parse_binary(&bin[..bin.len() - 1]),
            Err(CooError::Truncated { .. })
        ));
        let mut long = bin.clone();
        long.push(0);
        assert_eq!(parse_binary(&long), Err(CooError::TrailingBytes(1)));
    }

    proptest! {
        #[test]
        fn built_graphs_survive_both_formats(
            raw in prop::collection::vec((0u16..32, 0u16..32, 0u16..3, any::<bool>()), 0..300)
        ) {
            let mut t = 0u16;
            let evs: Vec<_> = raw
                .into_iter()
                .map(|(x, y, dt, p)| {
                    t = (t + dt).min(255);
                    qe(x, y, t, Polarity::from_bit(p))
                })
                .collect();
            let (g, _) = build_graph(&evs, &BuilderParams::default()).unwrap();
            prop_assert_eq!(&parse_text(&write_text(&g)).unwrap(), &g);
            prop_assert_eq!(&parse_binary(&write_binary(&g).unwrap()).unwrap(), &g);
        }
    }
}
