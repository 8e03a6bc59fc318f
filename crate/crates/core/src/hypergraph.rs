//! Hypergraph data model, the line-oriented stream format, and energy evaluation.
//!
//! A stream file starts with a header `H <n> [m]` followed by one hyperedge
//! per line, `<w> <v1> <v2> ... <vk>`. Lines starting with `#` and blank lines
//! are ignored. Vertices are 0-based integers below `n`.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{EdgeError, Error, Result};

/// A weighted hyperedge over a sorted set of distinct vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperedge {
    vertices: Vec<usize>,
    weight: f64,
}

impl Hyperedge {
    /// Builds a hyperedge, sorting and deduplicating `vertices`.
    pub fn new(
        vertices: impl IntoIterator<Item = usize>,
        weight: f64,
        n: usize,
    ) -> Result<Self, EdgeError> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(EdgeError::InvalidWeight(weight));
        }
        let mut vertices: Vec<usize> = vertices.into_iter().collect();
        if let Some(&vertex) = vertices.iter().find(|&&v| v >= n) {
            return Err(EdgeError::VertexOutOfRange { vertex, n });
        }
        vertices.sort_unstable();
        vertices.dedup();
        if vertices.len() < 2 {
            return Err(EdgeError::TooFewVertices(vertices.len()));
        }
        Ok(Self { vertices, weight })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Number of vertices, `|e|`.
    pub fn rank(&self) -> usize {
        self.vertices.len()
    }

    /// Number of unordered vertex pairs, `|e|(|e|-1)/2`.
    pub fn num_pairs(&self) -> usize {
        let k = self.vertices.len();
        k * (k - 1) / 2
    }

    /// Unordered vertex pairs `(u, v)` with `u < v`, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let vs = &self.vertices;
        (0..vs.len()).flat_map(move |a| ((a + 1)..vs.len()).map(move |b| (vs[a], vs[b])))
    }

    /// Index pairs `(a, b)` into `vertices()` matching the order of [`Hyperedge::pairs`].
    pub fn local_pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let k = self.vertices.len();
        (0..k).flat_map(move |a| ((a + 1)..k).map(move |b| (a, b)))
    }

    pub fn with_weight(&self, weight: f64) -> Result<Self, EdgeError> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(EdgeError::InvalidWeight(weight));
        }
        Ok(Self {
            vertices: self.vertices.clone(),
            weight,
        })
    }
}

impl fmt::Display for Hyperedge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.weight)?;
        for v in &self.vertices {
            write!(f, " {v}")?;
        }
        Ok(())
    }
}

/// Stream header. `m_hint` is informational and never read by the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub n: usize,
    pub m_hint: Option<usize>,
}

/// A fully materialized hypergraph. Only the verifier and the generator hold one.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredHypergraph {
    pub n: usize,
    pub edges: Vec<Hyperedge>,
}

impl StoredHypergraph {
    pub fn new(n: usize, edges: Vec<Hyperedge>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
        }
        for e in &edges {
            if let Some(&vertex) = e.vertices().last().filter(|&&v| v >= n) {
                return Err(Error::EdgeOutsideStream { vertex, n });
            }
        }
        Ok(Self { n, edges })
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n, Vec::new())
    }

    /// Reads a whole stream into memory.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let (header, edges) = parse_stream(reader)?;
        let edges = edges.collect::<Result<Vec<_>>>()?;
        Ok(Self { n: header.n, edges })
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }

    /// Total weight `W`.
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(Hyperedge::weight).sum()
    }

    /// Maximum hyperedge size, or 0 when there are no edges.
    pub fn rank(&self) -> usize {
        self.edges.iter().map(Hyperedge::rank).max().unwrap_or(0)
    }

    pub fn min_weight(&self) -> Option<f64> {
        self.edges.iter().map(Hyperedge::weight).reduce(f64::min)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        write_stream(out, self.n, Some(self.edges.len()), self.edges.iter())
    }

    pub fn energy(&self, z: &[f64]) -> Result<f64> {
        hypergraph_energy(self, z)
    }
}

/// Writes a header and edge lines in the stream format.
pub fn write_stream<'a, W: Write>(
    mut out: W,
    n: usize,
    m_hint: Option<usize>,
    edges: impl IntoIterator<Item = &'a Hyperedge>,
) -> Result<()> {
    match m_hint {
        Some(m) => writeln!(out, "H {n} {m}")?,
        None => writeln!(out, "H {n}")?,
    }
    for e in edges {
        writeln!(out, "{e}")?;
    }
    out.flush()?;
    Ok(())
}

/// Lazy iterator over the hyperedges of a stream; see [`parse_stream`].
pub struct EdgeReader<R> {
    reader: R,
    n: usize,
    line_no: usize,
    buf: String,
    failed: bool,
}

impl<R: BufRead> EdgeReader<R> {
    pub fn n(&self) -> usize {
        self.n
    }
}

impl<R: BufRead> Iterator for EdgeReader<R> {
    type Item = Result<Hyperedge>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            }
            self.line_no += 1;
            let line = self.buf.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parsed = parse_edge_line(line, self.n).map_err(|source| Error::Parse {
                line: self.line_no,
                source,
            });
            if parsed.is_err() {
                self.failed = true;
            }
            return Some(parsed);
        }
    }
}

fn parse_edge_line(line: &str, n: usize) -> Result<Hyperedge, EdgeError> {
    let mut tokens = line.split_whitespace();
    let w_tok = tokens.next().unwrap_or("");
    let weight: f64 = w_tok
        .parse()
        .map_err(|_| EdgeError::BadWeight(w_tok.to_string()))?;
    let mut vertices = Vec::new();
    for tok in tokens {
        let v: i64 = tok.parse().map_err(|_| EdgeError::BadVertex(tok.to_string()))?;
        if v < 0 {
            return Err(EdgeError::NegativeVertex(v));
        }
        vertices.push(v as usize);
    }
    Hyperedge::new(vertices, weight, n)
}

/// Reads the header of a stream and returns a lazy iterator over its edges.
///
/// Each edge is validated as it is pulled; the iterator stops after the first
/// error. Nothing already yielded is retained.
pub fn parse_stream<R: BufRead>(mut reader: R) -> Result<(StreamHeader, EdgeReader<R>)> {
    let mut buf = String::new();
    let mut line_no = 0;
    let header_line = loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            return Err(Error::MalformedHeader {
                line: line_no + 1,
                reason: "missing `H <n> [m]` header".into(),
            });
        }
        line_no += 1;
        let t = buf.trim();
        if !t.is_empty() && !t.starts_with('#') {
            break t.to_string();
        }
    };
    let header = parse_header(&header_line).map_err(|reason| Error::MalformedHeader {
        line: line_no,
        reason,
    })?;
    Ok((
        header,
        EdgeReader {
            reader,
            n: header.n,
            line_no,
            buf,
            failed: false,
        },
    ))
}

fn parse_header(line: &str) -> std::result::Result<StreamHeader, String> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.first() != Some(&"H") {
        return Err(format!("expected `H <n> [m]`, found {line:?}"));
    }
    let n: usize = match tokens.get(1) {
        Some(t) => t.parse().map_err(|_| format!("bad vertex count {t:?}"))?,
        None => return Err("missing vertex count".into()),
    };
    if n < 2 {
        return Err(format!("vertex count must be at least 2, got {n}"));
    }
    let m_hint = match tokens.get(2) {
        Some(t) => Some(t.parse().map_err(|_| format!("bad edge count {t:?}"))?),
        None => None,
    };
    if tokens.len() > 3 {
        return Err("trailing tokens after `H <n> [m]`".into());
    }
    Ok(StreamHeader { n, m_hint })
}

/// `max_{u,v in e} (z(u) - z(v))^2`, computed as the squared spread of `z` on `e`.
pub fn edge_energy(e: &Hyperedge, z: &[f64]) -> Result<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in e.vertices() {
        let x = *z.get(v).ok_or(Error::DimensionMismatch {
            expected: v + 1,
            got: z.len(),
        })?;
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let spread = hi - lo;
    Ok(spread * spread)
}

/// `sum_i w_i Q_{e_i}(z)`.
pub fn hypergraph_energy(h: &StoredHypergraph, z: &[f64]) -> Result<f64> {
    if z.len() != h.n {
        return Err(Error::DimensionMismatch {
            expected: h.n,
            got: z.len(),
        });
    }
    h.edges
        .iter()
        .try_fold(0.0, |acc, e| Ok(acc + e.weight() * edge_energy(e, z)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_edge_energy(e: &Hyperedge, z: &[f64]) -> f64 {
        let mut best = 0.0f64;
        for (u, v) in e.pairs() {
            best = best.max((z[u] - z[v]).powi(2));
        }
        best
    }

    #[test]
    fn parses_edge_lines() {
        let (h, mut edges) = parse_stream("H 4\n1.5 0 2 3\n2.0 1 1 3\n".as_bytes()).unwrap();
        assert_eq!(h, StreamHeader { n: 4, m_hint: None });
        let e = edges.next().unwrap().unwrap();
        assert_eq!(e.vertices(), &[0, 2, 3]);
        assert_eq!(e.weight(), 1.5);
        let e = edges.next().unwrap().unwrap();
        assert_eq!(e.vertices(), &[1, 3]);
        assert_eq!(e.weight(), 2.0);
        assert!(edges.next().is_none());
    }

    #[test]
    fn header_with_hint_and_comments() {
        let text = "# generated\n\nH 5 2\n# edge\n1 0 1\n\n2 3 4\n";
        let h = StoredHypergraph::parse_str(text).unwrap();
        assert_eq!(h.n, 5);
        assert_eq!(h.edges.len(), 2);
        let (hdr, _) = parse_stream(text.as_bytes()).unwrap();
        assert_eq!(hdr.m_hint, Some(2));
    }

    #[test]
    fn rejects_single_out_of_range_vertex() {
        let err = StoredHypergraph::parse_str("H 4\n1.0 5\n").unwrap_err();
        match err {
            Error::Parse { line, source } => {
                assert_eq!(line, 2);
                assert!(matches!(
                    source,
                    EdgeError::VertexOutOfRange { vertex: 5, n: 4 } | EdgeError::TooFewVertices(_)
                ));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    type ErrorMatcher = fn(&EdgeError) -> bool;

    #[test]
    fn rejects_bad_lines_with_line_numbers() {
        let cases: &[(&str, ErrorMatcher)] = &[
            ("H 4\n# c\n1.0 2\n", |e| matches!(e, EdgeError::TooFewVertices(1))),
            ("H 4\n# c\n1.0 2 2\n", |e| matches!(e, EdgeError::TooFewVertices(1))),
            ("H 4\n# c\n0 1 2\n", |e| matches!(e, EdgeError::InvalidWeight(_))),
            ("H 4\n# c\n-1 1 2\n", |e| matches!(e, EdgeError::InvalidWeight(_))),
            ("H 4\n# c\nNaN 1 2\n", |e| matches!(e, EdgeError::InvalidWeight(_))),
            ("H 4\n# c\ninf 1 2\n", |e| matches!(e, EdgeError::InvalidWeight(_))),
            ("H 4\n# c\nabc 1 2\n", |e| matches!(e, EdgeError::BadWeight(_))),
            ("H 4\n# c\n1 -1 2\n", |e| matches!(e, EdgeError::NegativeVertex(-1))),
            ("H 4\n# c\n1 x 2\n", |e| matches!(e, EdgeError::BadVertex(_))),
        ];
        for (text, check) in cases {
            match StoredHypergraph::parse_str(text).unwrap_err() {
                Error::Parse { line, source } => {
                    assert_eq!(line, 3, "{text:?}");
                    assert!(check(&source), "{text:?}: {source:?}");
                }
                other => panic!("{text:?}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn rejects_bad_headers() {
        for text in ["", "# only comment\n", "G 4\n", "H\n", "H 1\n", "H x\n", "H 4 y\n", "H 4 2 9\n"] {
            assert!(
                matches!(StoredHypergraph::parse_str(text), Err(Error::MalformedHeader { .. })),
                "{text:?}"
            );
        }
    }

    #[test]
    fn edge_energy_examples() {
        let e = Hyperedge::new([0, 1], 1.0, 3).unwrap();
        assert_eq!(edge_energy(&e, &[3.0, 1.0, 0.0]).unwrap(), 4.0);
        let e = Hyperedge::new([0, 1, 2], 1.0, 3).unwrap();
        assert_eq!(edge_energy(&e, &[2.5, 2.5, 2.5]).unwrap(), 0.0);
        // brute force over the three pairs: 1, 25, 16
        assert_eq!(edge_energy(&e, &[0.0, 1.0, 5.0]).unwrap(), 25.0);
        assert!(matches!(
            edge_energy(&e, &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hypergraph_energy_examples() {
        let h = StoredHypergraph::new(
            3,
            vec![
                Hyperedge::new([0, 1], 1.0, 3).unwrap(),
                Hyperedge::new([1, 2], 2.0, 3).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(h.energy(&[0.0, 1.0, 0.0]).unwrap(), 3.0);
        assert_eq!(h.energy(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(StoredHypergraph::empty(3).unwrap().energy(&[0.0, 4.0, 1.0]).unwrap(), 0.0);
        assert!(h.energy(&[0.0; 4]).is_err());
    }

    #[test]
    fn repeated_lines_are_distinct_edges() {
        let h = StoredHypergraph::parse_str("H 3\n1 0 1\n1 0 1\n").unwrap();
        assert_eq!(h.edges.len(), 2);
        assert_eq!(h.energy(&[1.0, 0.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn display_round_trips_through_parser() {
        let e = Hyperedge::new([4, 1, 7], 0.1 + 0.2, 8).unwrap();
        let text = format!("H 8\n{e}\n");
        let h = StoredHypergraph::parse_str(&text).unwrap();
        assert_eq!(h.edges[0], e);
    }

    fn hypergraph_and_vector() -> impl Strategy<Value = (StoredHypergraph, Vec<f64>)> {
        (3usize..9).prop_flat_map(|n| {
            let edge = (prop::collection::vec(0..n, 2..=n), 0.01f64..10.0);
            (
                prop::collection::vec(edge, 0..12),
                prop::collection::vec(-10.0f64..10.0, n),
            )
                .prop_filter_map("degenerate edge", move |(raw, z)| {
                    let edges = raw
                        .into_iter()
                        .map(|(vs, w)| Hyperedge::new(vs, w, n).ok())
                        .collect::<Option<Vec<_>>>()?;
                    Some((StoredHypergraph::new(n, edges).unwrap(), z))
                })
        })
    }

    proptest! {
        #[test]
        fn energy_is_shift_invariant((h, z) in hypergraph_and_vector(), shift in -50.0f64..50.0) {
            let base = h.energy(&z).unwrap();
            let shifted: Vec<f64> = z.iter().map(|x| x + shift).collect();
            let moved = h.energy(&shifted).unwrap();
            prop_assert!((moved - base).abs() <= 1e-12 * base.max(1.0));
        }

        #[test]
        fn energy_scales_quadratically((h, z) in hypergraph_and_vector(), a in -5.0f64..5.0) {
            let base = h.energy(&z).unwrap();
            let scaled: Vec<f64> = z.iter().map(|x| a * x).collect();
            let got = h.energy(&scaled).unwrap();
            prop_assert!((got - a * a * base).abs() <= 1e-12 * (a * a * base).max(1e-300));
        }

        #[test]
        fn spread_matches_pairwise_brute_force((h, z) in hypergraph_and_vector()) {
            for e in &h.edges {
                prop_assert_eq!(edge_energy(e, &z).unwrap(), brute_edge_energy(e, &z));
            }
        }
    }
}
