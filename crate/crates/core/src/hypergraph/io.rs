use std::fmt::Write as _;

use super::{Graph, Hypergraph, HypergraphError};

/// A parse failure with its 1-based line number.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("missing header")]
    MissingHeader,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported fmt token {0:?} (only unweighted hypergraphs are supported)")]
    UnsupportedFormat(String),
    #[error("token {0:?} is not a non-negative integer")]
    NotAnInteger(String),
    #[error("vertex {vertex} out of range 1..={num_vertices}")]
    VertexOutOfRange { vertex: usize, num_vertices: usize },
    #[error("empty hyperedge")]
    EmptyHyperedge,
    #[error("repeated vertex {0} in hyperedge")]
    RepeatedVertex(usize),
    #[error("expected {expected} hyperedges, found {found}")]
    MissingHyperedges { expected: usize, found: usize },
    #[error("unexpected content after the last hyperedge")]
    TrailingContent,
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("edge line must have exactly two vertices")]
    EdgeArity,
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn is_comment(line: &str, markers: &[char]) -> bool {
    line.trim_start().starts_with(markers)
}

fn parse_usize(token: &str, line: usize) -> Result<usize, ParseError> {
    token
        .parse::<usize>()
        .map_err(|_| err(line, ParseErrorKind::NotAnInteger(token.to_string())))
}

/// Parses the hMETIS `.hgr` format.
///
/// The header is `<num_edges> <num_vertices> [fmt]`, where `fmt` may only be
/// `0`. Each following line lists one hyperedge's 1-indexed vertices. Lines
/// starting with `%` (or `#`) are comments.
pub fn parse_hgr(text: &str) -> Result<Hypergraph, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !is_comment(l, &['%', '#']));

    let (header_line, header) = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some(h) => break h,
            None => return Err(err(1, ParseErrorKind::MissingHeader)),
        }
    };
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if !(2..=3).contains(&tokens.len()) {
        return Err(err(
            header_line,
            ParseErrorKind::MalformedHeader(format!("expected 2 or 3 fields, got {}", tokens.len())),
        ));
    }
    let num_edges = parse_usize(tokens[0], header_line)?;
    let num_vertices = parse_usize(tokens[1], header_line)?;
    if let Some(fmt) = tokens.get(2) {
        if !fmt.trim_start_matches('0').is_empty() {
            return Err(err(header_line, ParseErrorKind::UnsupportedFormat(fmt.to_string())));
        }
    }

    let mut edges = Vec::with_capacity(num_edges);
    let mut last_line = header_line;
    for (line_no, line) in lines {
        last_line = line_no;
        if edges.len() == num_edges {
            if line.trim().is_empty() {
                continue;
            }
            return Err(err(line_no, ParseErrorKind::TrailingContent));
        }
        let mut edge = Vec::new();
        for token in line.split_whitespace() {
            let v = parse_usize(token, line_no)?;
            if v == 0 || v > num_vertices {
                return Err(err(
                    line_no,
                    ParseErrorKind::VertexOutOfRange {
                        vertex: v,
                        num_vertices,
                    },
                ));
            }
            if edge.contains(&(v - 1)) {
                return Err(err(line_no, ParseErrorKind::RepeatedVertex(v)));
            }
            edge.push(v - 1);
        }
        if edge.is_empty() {
            return Err(err(line_no, ParseErrorKind::EmptyHyperedge));
        }
        edges.push(edge);
    }
    if edges.len() < num_edges {
        return Err(err(
            last_line,
            ParseErrorKind::MissingHyperedges {
                expected: num_edges,
                found: edges.len(),
            },
        ));
    }
    Hypergraph::new(num_vertices, edges).map_err(|e| err(header_line, ParseErrorKind::MalformedHeader(e.to_string())))
}

/// Writes the `.hgr` form: header `<|E|> <|V|>` then one 1-indexed line per hyperedge.
pub fn serialize_hgr(h: &Hypergraph) -> String {
    let mut out = String::new();
    writeln!(out, "{} {}", h.num_edges(), h.num_vertices()).unwrap();
    for e in h.edges() {
        let line: Vec<String> = e.iter().map(|v| (v + 1).to_string()).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    out
}

/// Parses a 0-indexed edge list of `u v` lines.
///
/// An optional `p <n>` line fixes the vertex count; otherwise it is one more
/// than the largest index seen. `#` and `%` start comment lines. Repeated
/// edges are merged.
pub fn parse_edgelist(text: &str) -> Result<Graph, ParseError> {
    let mut declared: Option<(usize, usize)> = None;
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if is_comment(line, &['#', '%']) || line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens[0] == "p" {
            if tokens.len() != 2 || declared.is_some() {
                return Err(err(
                    line_no,
                    ParseErrorKind::MalformedHeader("expected a single `p <n>` line".into()),
                ));
            }
            declared = Some((parse_usize(tokens[1], line_no)?, line_no));
            continue;
        }
        if tokens.len() != 2 {
            return Err(err(line_no, ParseErrorKind::EdgeArity));
        }
        let u = parse_usize(tokens[0], line_no)?;
        let v = parse_usize(tokens[1], line_no)?;
        if u == v {
            return Err(err(line_no, ParseErrorKind::SelfLoop(u)));
        }
        pairs.push((u, v, line_no));
    }
    let num_vertices = match declared {
        Some((n, _)) => {
            if let Some(&(u, v, line_no)) = pairs.iter().find(|(u, v, _)| u.max(v) >= &n) {
                return Err(err(
                    line_no,
                    ParseErrorKind::VertexOutOfRange {
                        vertex: u.max(v),
                        num_vertices: n,
                    },
                ));
            }
            n
        }
        None => pairs.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0),
    };
    Graph::new(num_vertices, pairs.iter().map(|&(u, v, _)| (u, v))).map_err(|e| match e {
        HypergraphError::SelfLoop { vertex, .. } => err(0, ParseErrorKind::SelfLoop(vertex)),
        other => err(0, ParseErrorKind::MalformedHeader(other.to_string())),
    })
}

/// Writes `p <n>` followed by one `u v` line per edge.
pub fn serialize_edgelist(g: &Graph) -> String {
    let mut out = String::new();
    writeln!(out, "p {}", g.num_vertices()).unwrap();
    for (u, v) in g.edge_pairs() {
        writeln!(out, "{u} {v}").unwrap();
    }
    out
}
