//! Pretrained entity-embedding files parsed into an immutable in-memory store.
//!
//! Two wire formats are supported. The text format is a header line `N D`
//! followed by `N` lines of `token v1 .. vD` with single-space separators.
//! The binary format shares the ASCII header and then carries `N` records of
//! token, one space, `D` little-endian IEEE-754 32-bit floats, and a newline.
//! Coordinates are widened to `f64` on read regardless of the file encoding.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

/// Where in the input an error was found: a text line or a byte offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Offset(u64),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Offset(n) => write!(f, "byte offset {n}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed header: {detail}")]
    MalformedHeader { detail: String },
    #[error("{at}: entry has {found} coordinates, expected {expected}")]
    CoordinateCount {
        at: Location,
        expected: usize,
        found: usize,
    },
    #[error("{at}: coordinate {index} is not a valid float: {text:?}")]
    BadCoordinate {
        at: Location,
        index: usize,
        text: String,
    },
    #[error("{at}: coordinate {index} of {key:?} is not finite")]
    NonFiniteCoordinate {
        at: Location,
        key: String,
        index: usize,
    },
    #[error("{at}: duplicate key {key:?} (first seen at {first})")]
    DuplicateKey {
        at: Location,
        key: String,
        first: Location,
    },
    #[error("header declared {declared} entries but {found} were found")]
    CountMismatch { declared: usize, found: usize },
    #[error("{at}: unexpected content after the declared entries")]
    Trailing { at: Location },
    #[error("{at}: malformed entry: {detail}")]
    MalformedEntry { at: Location, detail: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
#[error("cannot unit-normalize zero vector for key {key:?}")]
pub struct NormalizeError {
    pub key: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Text,
    Binary,
}

/// Immutable map from entity key to a `d`-dimensional vector.
///
/// Keys are opaque exact strings; lookups are case-sensitive and a missing
/// key is reported as `None`, never as a default vector.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dim: usize,
    keys: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    normalized: bool,
}

impl EmbeddingStore {
    /// Build a store directly from `(key, vector)` entries.
    pub fn from_entries(
        dim: usize,
        entries: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, ParseError> {
        let mut store = EmbeddingStore {
            dim,
            keys: Vec::with_capacity(entries.len()),
            index: HashMap::with_capacity(entries.len()),
            data: Vec::with_capacity(entries.len() * dim),
            normalized: false,
        };
        let mut locations = Vec::with_capacity(store.keys.capacity());
        for (n, (key, vector)) in entries.into_iter().enumerate() {
            let at = Location::Line(n + 2);
            store.push_entry(key, &vector, at, &mut locations)?;
        }
        Ok(store)
    }

    fn push_entry(
        &mut self,
        key: String,
        vector: &[f64],
        at: Location,
        locations: &mut Vec<Location>,
    ) -> Result<(), ParseError> {
        if vector.len() != self.dim {
            return Err(ParseError::CoordinateCount {
                at,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if let Some(idx) = vector.iter().position(|v| !v.is_finite()) {
            return Err(ParseError::NonFiniteCoordinate {
                at,
                key,
                index: idx + 1,
            });
        }
        if let Some(&first_idx) = self.index.get(&key) {
            return Err(ParseError::DuplicateKey {
                at,
                key,
                first: locations[first_idx],
            });
        }
        self.index.insert(key.clone(), self.keys.len());
        self.keys.push(key);
        locations.push(at);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Keys in file order.
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.keys.iter().map(String::as_str)
    }

    /// Exact, case-sensitive lookup.
    pub fn get_vector(&self, key: &str) -> Option<&[f64]> {
        self.index
            .get(key)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// A copy of this store with every vector scaled to unit Euclidean norm.
    /// The original store is left untouched.
    pub fn unit_normalize(&self) -> Result<EmbeddingStore, NormalizeError> {
        let mut data = Vec::with_capacity(self.data.len());
        for (i, key) in self.keys.iter().enumerate() {
            let v = &self.data[i * self.dim..(i + 1) * self.dim];
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(NormalizeError { key: key.clone() });
            }
            data.extend(v.iter().map(|x| x / norm));
        }
        Ok(EmbeddingStore {
            dim: self.dim,
            keys: self.keys.clone(),
            index: self.index.clone(),
            data,
            normalized: true,
        })
    }
}

/// Parse an embedding file in the given format.
pub fn parse_embeddings<R: Read>(
    source: R,
    format: EmbeddingFormat,
) -> Result<EmbeddingStore, ParseError> {
    let mut reader = BufReader::new(source);
    match format {
        EmbeddingFormat::Text => parse_text(&mut reader),
        EmbeddingFormat::Binary => parse_binary(&mut reader),
    }
}

fn parse_header(line: &str) -> Result<(usize, usize), ParseError> {
    let mut parts = line.split(' ');
    let bad = |detail: &str| ParseError::MalformedHeader {
        detail: detail.to_string(),
    };
    let n = parts
        .next()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| bad("missing entry count"))?
        .parse::<usize>()
        .map_err(|_| bad("entry count is not an integer"))?;
    let d = parts
        .next()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| bad("missing dimension"))?
        .parse::<usize>()
        .map_err(|_| bad("dimension is not an integer"))?;
    if parts.next().is_some() {
        return Err(bad("expected exactly two fields"));
    }
    if d == 0 {
        return Err(bad("dimension must be positive"));
    }
    Ok((n, d))
}

fn parse_text<R: BufRead>(reader: &mut R) -> Result<EmbeddingStore, ParseError> {
    let mut header = String::new();
    if reader.read_line(&mut header)? == 0 {
        return Err(ParseError::MalformedHeader {
            detail: "empty input".to_string(),
        });
    }
    let (declared, dim) = parse_header(header.trim_end_matches('\n'))?;

    let mut store = EmbeddingStore {
        dim,
        keys: Vec::with_capacity(declared),
        index: HashMap::with_capacity(declared),
        data: Vec::with_capacity(declared * dim),
        normalized: false,
    };
    let mut locations = Vec::with_capacity(declared);
    let mut vector = Vec::with_capacity(dim);
    let mut line = String::new();
    let mut line_no = 1usize;

    loop {
        line.clear();
        line_no += 1;
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let at = Location::Line(line_no);
        let content = line.strip_suffix('\n').unwrap_or(&line);
        if content.is_empty() {
            // A single trailing newline after the last entry is tolerated.
            if store.len() == declared && reader.fill_buf()?.is_empty() {
                break;
            }
            return Err(ParseError::MalformedEntry {
                at,
                detail: "empty line".to_string(),
            });
        }
        if store.len() == declared {
            return Err(ParseError::Trailing { at });
        }
        let mut fields = content.split(' ');
        let token = fields.next().unwrap_or("");
        if token.is_empty() {
            return Err(ParseError::MalformedEntry {
                at,
                detail: "empty token".to_string(),
            });
        }
        vector.clear();
        for (i, field) in fields.enumerate() {
            if field.is_empty() {
                return Err(ParseError::MalformedEntry {
                    at,
                    detail: "empty coordinate field (double space?)".to_string(),
                });
            }
            if vector.len() == dim {
                // Count the rest so the error reports the real field count.
                vector.push(0.0);
                continue;
            }
            let value: f64 = field.parse().map_err(|_| ParseError::BadCoordinate {
                at,
                index: i + 1,
                text: field.to_string(),
            })?;
            vector.push(value);
        }
        if vector.len() != dim {
            return Err(ParseError::CoordinateCount {
                at,
                expected: dim,
                found: vector.len(),
            });
        }
        store.push_entry(token.to_string(), &vector, at, &mut locations)?;
    }

    if store.len() != declared {
        return Err(ParseError::CountMismatch {
            declared,
            found: store.len(),
        });
    }
    Ok(store)
}

fn parse_binary<R: BufRead>(reader: &mut R) -> Result<EmbeddingStore, ParseError> {
    let mut offset = 0u64;
    let mut header = Vec::new();
    let n = reader.read_until(b'\n', &mut header)?;
    if n == 0 {
        return Err(ParseError::MalformedHeader {
            detail: "empty input".to_string(),
        });
    }
    offset += n as u64;
    if header.last() == Some(&b'\n') {
        header.pop();
    }
    let header = String::from_utf8(header).map_err(|_| ParseError::MalformedHeader {
        detail: "header is not valid UTF-8".to_string(),
    })?;
    let (declared, dim) = parse_header(&header)?;

    let mut store = EmbeddingStore {
        dim,
        keys: Vec::with_capacity(declared),
        index: HashMap::with_capacity(declared),
        data: Vec::with_capacity(declared * dim),
        normalized: false,
    };
    let mut locations = Vec::with_capacity(declared);
    let mut vector = vec![0.0f64; dim];

    for _ in 0..declared {
        let record_start = offset;
        let mut token_bytes = Vec::new();
        let n = reader.read_until(b' ', &mut token_bytes)?;
        if n == 0 {
            return Err(ParseError::CountMismatch {
                declared,
                found: store.len(),
            });
        }
        offset += n as u64;
        if token_bytes.last() != Some(&b' ') {
            return Err(ParseError::MalformedEntry {
                at: Location::Offset(record_start),
                detail: "record truncated before the token separator".to_string(),
            });
        }
        token_bytes.pop();
        if token_bytes.is_empty() {
            return Err(ParseError::MalformedEntry {
                at: Location::Offset(record_start),
                detail: "empty token".to_string(),
            });
        }
        let token =
            String::from_utf8(token_bytes).map_err(|_| ParseError::MalformedEntry {
                at: Location::Offset(record_start),
                detail: "token is not valid UTF-8".to_string(),
            })?;
        for slot in vector.iter_mut() {
            *slot = reader
                .read_f32::<LittleEndian>()
                .map_err(|_| ParseError::MalformedEntry {
                    at: Location::Offset(record_start),
                    detail: format!("record for {token:?} truncated inside coordinates"),
                })? as f64;
        }
        offset += 4 * dim as u64;
        let mut terminator = [0u8; 1];
        reader
            .read_exact(&mut terminator)
            .map_err(|_| ParseError::MalformedEntry {
                at: Location::Offset(record_start),
                detail: format!("record for {token:?} missing terminating newline"),
            })?;
        if terminator[0] != b'\n' {
            return Err(ParseError::MalformedEntry {
                at: Location::Offset(offset),
                detail: format!("record for {token:?} missing terminating newline"),
            });
        }
        offset += 1;
        store.push_entry(token, &vector, Location::Offset(record_start), &mut locations)?;
    }

    // Tolerate at most one trailing newline.
    let mut rest = Vec::new();
    reader.read_to_end(&mut rest)?;
    if !(rest.is_empty() || rest == b"\n") {
        return Err(ParseError::Trailing {
            at: Location::Offset(offset),
        });
    }
    Ok(store)
}

/// Write the store in the given format. Text output prints coordinates with
/// the shortest representation that round-trips to the same `f64`; binary
/// output narrows to `f32` as the format requires.
pub fn serialize_embeddings<W: Write>(
    store: &EmbeddingStore,
    mut out: W,
    format: EmbeddingFormat,
) -> std::io::Result<()> {
    writeln!(out, "{} {}", store.len(), store.dimension())?;
    match format {
        EmbeddingFormat::Text => {
            for key in store.keys() {
                let v = store.get_vector(key).expect("key from iterator");
                write!(out, "{key}")?;
                for x in v {
                    write!(out, " {x}")?;
                }
                writeln!(out)?;
            }
        }
        EmbeddingFormat::Binary => {
            for key in store.keys() {
                let v = store.get_vector(key).expect("key from iterator");
                out.write_all(key.as_bytes())?;
                out.write_all(b" ")?;
                for x in v {
                    out.write_f32::<LittleEndian>(*x as f32)?;
                }
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text_store(input: &str) -> Result<EmbeddingStore, ParseError> {
        parse_embeddings(input.as_bytes(), EmbeddingFormat::Text)
    }

    #[test]
    fn parses_three_entries_of_dimension_four() {
        let input = "3 4\na 1 2 3 4\nb 5 6 7 8\nc -1 -2 -3 -4\n";
        let store = text_store(input).unwrap();
        assert_eq!(store.len(), 3);
        assert_eq!(store.dimension(), 4);
        assert_eq!(store.get_vector("b").unwrap(), &[5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn reads_back_exact_vector() {
        let store = text_store("1 2\nENTITY/Nokia 1.0 0.0\n").unwrap();
        assert_eq!(store.get_vector("ENTITY/Nokia").unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn wrong_coordinate_count_names_line() {
        let err = text_store("2 3\na 1 2 3\nb 1 2\n").unwrap_err();
        match err {
            ParseError::CoordinateCount { at, expected, found } => {
                assert_eq!(at, Location::Line(3));
                assert_eq!(expected, 3);
                assert_eq!(found, 2);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn lookup_is_exact_and_case_sensitive() {
        let store = text_store("1 2\nENTITY/Nokia 1.0 0.0\n").unwrap();
        assert!(store.get_vector("ENTITY/nokia").is_none());
        assert!(store.get_vector("ENTITY/Nokia ").is_none());
        assert!(store.get_vector("ENTITY/Nokia").is_some());
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = text_store("2 1\na 1\na 2\n").unwrap_err();
        match err {
            ParseError::DuplicateKey { at, key, first } => {
                assert_eq!(at, Location::Line(3));
                assert_eq!(key, "a");
                assert_eq!(first, Location::Line(2));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn non_finite_coordinate_is_rejected() {
        let err = text_store("1 2\na 1e999 0\n").unwrap_err();
        assert!(matches!(err, ParseError::NonFiniteCoordinate { .. }));
        let err = text_store("1 2\na nan 0\n").unwrap_err();
        assert!(matches!(err, ParseError::NonFiniteCoordinate { .. }));
    }

    #[test]
    fn count_mismatch_is_rejected_both_ways() {
        assert!(matches!(
            text_store("3 1\na 1\nb 2\n").unwrap_err(),
            ParseError::CountMismatch { declared: 3, found: 2 }
        ));
        assert!(matches!(
            text_store("1 1\na 1\nb 2\n").unwrap_err(),
            ParseError::Trailing { at: Location::Line(3) }
        ));
    }

    #[test]
    fn trailing_newline_is_tolerated_nothing_else() {
        assert!(text_store("1 1\na 1\n\n").is_ok());
        assert!(text_store("1 1\na 1").is_ok());
        assert!(text_store("1 1\na 1\n\n\n").is_err());
    }

    #[test]
    fn header_must_be_two_integers() {
        assert!(matches!(
            text_store("x 4\n").unwrap_err(),
            ParseError::MalformedHeader { .. }
        ));
        assert!(matches!(
            text_store("3\n").unwrap_err(),
            ParseError::MalformedHeader { .. }
        ));
        assert!(matches!(
            text_store("3 4 5\n").unwrap_err(),
            ParseError::MalformedHeader { .. }
        ));
    }

    #[test]
    fn binary_roundtrip_preserves_entries() {
        let store = text_store("2 3\nalpha 0.25 -1.5 3.0\nbeta 0.125 2.0 -0.5\n").unwrap();
        let mut buf = Vec::new();
        serialize_embeddings(&store, &mut buf, EmbeddingFormat::Binary).unwrap();
        let back = parse_embeddings(buf.as_slice(), EmbeddingFormat::Binary).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.get_vector("alpha").unwrap(), store.get_vector("alpha").unwrap());
        assert_eq!(back.get_vector("beta").unwrap(), store.get_vector("beta").unwrap());
    }

    #[test]
    fn binary_truncation_names_offset() {
        let store = text_store("2 2\na 1 2\nb 3 4\n").unwrap();
        let mut buf = Vec::new();
        serialize_embeddings(&store, &mut buf, EmbeddingFormat::Binary).unwrap();
        buf.truncate(buf.len() - 3);
        let err = parse_embeddings(buf.as_slice(), EmbeddingFormat::Binary).unwrap_err();
        assert!(matches!(err, ParseError::MalformedEntry { at: Location::Offset(_), .. }));
    }

    #[test]
    fn normalize_three_four_five() {
        let store = EmbeddingStore::from_entries(2, vec![("k".into(), vec![3.0, 4.0])]).unwrap();
        let normed = store.unit_normalize().unwrap();
        assert_eq!(normed.get_vector("k").unwrap(), &[0.6, 0.8]);
        assert!(normed.is_normalized());
        // original untouched
        assert_eq!(store.get_vector("k").unwrap(), &[3.0, 4.0]);
    }

    #[test]
    fn normalize_unit_vector_is_identity() {
        let store = EmbeddingStore::from_entries(2, vec![("k".into(), vec![1.0, 0.0])]).unwrap();
        let normed = store.unit_normalize().unwrap();
        assert_eq!(normed.get_vector("k").unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn normalize_zero_vector_names_key() {
        let store =
            EmbeddingStore::from_entries(2, vec![("zed".into(), vec![0.0, 0.0])]).unwrap();
        let err = store.unit_normalize().unwrap_err();
        assert_eq!(err.key, "zed");
    }

    #[test]
    fn every_declared_key_is_retrievable() {
        let input = "4 2\nw 1 0\nx 0 1\ny 1 1\nz 2 2\n";
        let store = text_store(input).unwrap();
        let hits = store.keys().filter(|k| store.get_vector(k).is_some()).count();
        assert_eq!(hits, 4);
    }
}
