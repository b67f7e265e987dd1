//! Genome file formats: the canonical `.gnm` binary (magic `EVFG`,
//! length-prefixed gene tables, bit-exact weights) and a JSON text export
//! mirroring the same fields.

use crate::error::{Error, Result};
use crate::genome::{EdgeGene, Genome, NodeGene, NodeType, RecurrentEdgeGene};

pub const MAGIC: &[u8; 4] = b"EVFG";
pub const FORMAT_VERSION: u16 = 1;

/// Serialize a genome to the canonical binary format.
pub fn to_bytes(g: &Genome) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 64 * g.nodes.len() + 40 * g.edges.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    match g.fitness {
        Some(f) => {
            out.push(1);
            out.extend_from_slice(&f.to_le_bytes());
        }
        None => {
            out.push(0);
            out.extend_from_slice(&0f64.to_le_bytes());
        }
    }
    out.extend_from_slice(&g.generation_id.to_le_bytes());
    out.extend_from_slice(&g.island_of_origin.to_le_bytes());

    out.extend_from_slice(&(g.nodes.len() as u32).to_le_bytes());
    for n in &g.nodes {
        out.extend_from_slice(&n.innovation.to_le_bytes());
        out.push(n.node_type.tag());
        out.extend_from_slice(&n.depth.to_le_bytes());
        out.push(n.enabled as u8);
        out.extend_from_slice(&(n.params.len() as u16).to_le_bytes());
        for p in &n.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    out.extend_from_slice(&(g.edges.len() as u32).to_le_bytes());
    for e in &g.edges {
        out.extend_from_slice(&e.innovation.to_le_bytes());
        out.extend_from_slice(&e.source.to_le_bytes());
        out.extend_from_slice(&e.target.to_le_bytes());
        out.extend_from_slice(&e.weight.to_le_bytes());
        out.push(e.enabled as u8);
    }
    out.extend_from_slice(&(g.rec_edges.len() as u32).to_le_bytes());
    for e in &g.rec_edges {
        out.extend_from_slice(&e.innovation.to_le_bytes());
        out.extend_from_slice(&e.source.to_le_bytes());
        out.extend_from_slice(&e.target.to_le_bytes());
        out.extend_from_slice(&e.time_skip.to_le_bytes());
        out.extend_from_slice(&e.weight.to_le_bytes());
        out.push(e.enabled as u8);
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Parse {
                offset: self.pos,
                reason: format!("truncated stream while reading {what}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn bool(&mut self, what: &str) -> Result<bool> {
        match self.u8(what)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::Parse {
                offset: self.pos - 1,
                reason: format!("invalid boolean byte {v} in {what}"),
            }),
        }
    }
}

/// Parse a genome from the canonical binary format. Errors carry the byte
/// offset of the first malformed field; no partial genome is returned.
pub fn from_bytes(bytes: &[u8]) -> Result<Genome> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Parse {
            offset: 0,
            reason: format!("bad magic {magic:02x?}, expected {MAGIC:02x?}"),
        });
    }
    let version = r.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Parse {
            offset: 4,
            reason: format!("unsupported format version {version}"),
        });
    }
    let has_fitness = r.bool("fitness flag")?;
    let fitness_value = r.f64("fitness")?;
    let generation_id = r.u64("generation_id")?;
    let island_of_origin = r.u32("island_of_origin")?;

    let n_nodes = r.u32("node count")? as usize;
    let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
    for _ in 0..n_nodes {
        let innovation = r.u64("node innovation")?;
        let tag_pos = r.pos;
        let tag = r.u8("node type")?;
        let node_type = NodeType::from_tag(tag).ok_or(Error::Parse {
            offset: tag_pos,
            reason: format!("unknown node type tag {tag}"),
        })?;
        let depth = r.f64("node depth")?;
        let enabled = r.bool("node enabled")?;
        let len_pos = r.pos;
        let n_params = r.u16("param count")? as usize;
        if n_params != node_type.param_len() {
            return Err(Error::Parse {
                offset: len_pos,
                reason: format!(
                    "node {} of type {} has {} params, expected {}",
                    innovation,
                    node_type.name(),
                    n_params,
                    node_type.param_len()
                ),
            });
        }
        let mut params = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            params.push(r.f64("node param")?);
        }
        nodes.push(NodeGene {
            innovation,
            node_type,
            depth,
            enabled,
            params,
        });
    }

    let n_edges = r.u32("edge count")? as usize;
    let mut edges = Vec::with_capacity(n_edges.min(1 << 20));
    for _ in 0..n_edges {
        edges.push(EdgeGene {
            innovation: r.u64("edge innovation")?,
            source: r.u64("edge source")?,
            target: r.u64("edge target")?,
            weight: r.f64("edge weight")?,
            enabled: r.bool("edge enabled")?,
        });
    }

    let n_rec = r.u32("rec edge count")? as usize;
    let mut rec_edges = Vec::with_capacity(n_rec.min(1 << 20));
    for _ in 0..n_rec {
        rec_edges.push(RecurrentEdgeGene {
            innovation: r.u64("rec edge innovation")?,
            source: r.u64("rec edge source")?,
            target: r.u64("rec edge target")?,
            time_skip: r.u32("rec edge time_skip")?,
            weight: r.f64("rec edge weight")?,
            enabled: r.bool("rec edge enabled")?,
        });
    }

    if r.pos != bytes.len() {
        return Err(Error::Parse {
            offset: r.pos,
            reason: format!("{} trailing bytes after genome", bytes.len() - r.pos),
        });
    }

    let genome = Genome {
        nodes,
        edges,
        rec_edges,
        fitness: if has_fitness { Some(fitness_value) } else { None },
        generation_id,
        island_of_origin,
    };
    if let Err(e) = genome.validate() {
        return Err(Error::Parse {
            offset: bytes.len(),
            reason: format!("structurally invalid genome: {e}"),
        });
    }
    Ok(genome)
}

/// Write a genome to a `.gnm` file.
pub fn write_file(g: &Genome, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, to_bytes(g)).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Read a genome from a `.gnm` file.
pub fn read_file(path: &std::path::Path) -> Result<Genome> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    from_bytes(&bytes)
}

/// Human-readable text export mirroring the binary fields.
pub fn to_text(g: &Genome) -> String {
    serde_json::to_string_pretty(g).expect("genome serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{seed_genome, InnovationCounter};

    #[test]
    fn round_trip_seed() {
        let c = InnovationCounter::new();
        let g = seed_genome(2, 1, &c).unwrap();
        let back = from_bytes(&to_bytes(&g)).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn round_trip_preserves_fitness_and_weights_bit_exact() {
        let c = InnovationCounter::new();
        let mut g = seed_genome(3, 2, &c).unwrap();
        for (i, e) in g.edges.iter_mut().enumerate() {
            e.weight = (i as f64 + 1.0) * 0.1 - 0.35;
        }
        g.nodes.last_mut().unwrap().params[0] = -1.0 / 3.0;
        g.fitness = Some(4.25e-3);
        g.generation_id = 17;
        g.island_of_origin = 3;
        let back = from_bytes(&to_bytes(&g)).unwrap();
        assert_eq!(back.fitness, Some(4.25e-3));
        for (a, b) in g.all_parameters().zip(back.all_parameters()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(g, back);
    }

    #[test]
    fn truncated_stream_is_a_parse_error() {
        let c = InnovationCounter::new();
        let g = seed_genome(2, 2, &c).unwrap();
        let bytes = to_bytes(&g);
        for cut in [0, 3, 5, 10, bytes.len() / 2, bytes.len() - 1] {
            match from_bytes(&bytes[..cut]) {
                Err(Error::Parse { offset, .. }) => assert!(offset <= cut),
                other => panic!("expected parse error at cut {cut}, got {other:?}"),
            }
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let err = from_bytes(b"NOPE....").unwrap_err();
        assert!(matches!(err, Error::Parse { offset: 0, .. }));
    }

    #[test]
    fn text_export_contains_tables() {
        let c = InnovationCounter::new();
        let g = seed_genome(1, 1, &c).unwrap();
        let text = to_text(&g);
        assert!(text.contains("nodes"));
        assert!(text.contains("edges"));
        assert!(text.contains("Input"));
    }
}
