//! The private sidecar file.
//!
//! The key file is the only artifact a counterparty ever sees. The sidecar
//! stays on the owner's machine and carries what score recovery needs: the
//! resolved private set and the inverted index. Text format, one record per
//! line:
//!
//! ```text
//! NSUMIDX 1 <level>
//! E <element> <omega values...>
//! P <key> <posted values...>
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nsum_psi::{ElementId, EncryptError, EncryptedSet, InvertedIndex, MapError, OmegaSet, PrivateSet};
use thiserror::Error;

pub const SIDECAR_MAGIC: &str = "NSUMIDX";
pub const SIDECAR_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error("failed to access sidecar: {0}")]
    Io(#[from] io::Error),
    #[error("not a sidecar file (bad header)")]
    BadHeader,
    #[error("unsupported sidecar version {0}")]
    BadVersion(u32),
    #[error("sidecar line {line}: {problem}")]
    Malformed { line: usize, problem: String },
    #[error(transparent)]
    Element(#[from] MapError),
    #[error(transparent)]
    Set(#[from] EncryptError),
}

/// The owner-side state reloaded from disk.
#[derive(Debug)]
pub struct Sidecar {
    pub level: u8,
    pub set: PrivateSet,
    pub index: InvertedIndex,
}

/// Writes the sidecar. Postings are emitted in ascending key order so the
/// bytes are deterministic for a given encryption.
pub fn write_sidecar<W: Write>(
    mut out: W,
    set: &PrivateSet,
    encrypted: &EncryptedSet,
    index: &InvertedIndex,
) -> io::Result<()> {
    writeln!(out, "{SIDECAR_MAGIC} {SIDECAR_VERSION} {}", encrypted.level())?;
    for (id, omega) in set.iter() {
        write!(out, "E {id}")?;
        for value in omega.values() {
            write!(out, " {value}")?;
        }
        writeln!(out)?;
    }
    for &key in encrypted.keys() {
        write!(out, "P {key}")?;
        for value in index.posting(key).expect("index covers every key") {
            write!(out, " {value}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_sidecar_file(
    path: impl AsRef<Path>,
    set: &PrivateSet,
    encrypted: &EncryptedSet,
    index: &InvertedIndex,
) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_sidecar(&mut out, set, encrypted, index)?;
    out.flush()
}

pub fn read_sidecar_file(path: impl AsRef<Path>) -> Result<Sidecar, SidecarError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines.next().ok_or(SidecarError::BadHeader)?;
    let header = header?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(SIDECAR_MAGIC) {
        return Err(SidecarError::BadHeader);
    }
    let version: u32 = fields
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or(SidecarError::BadHeader)?;
    if version != SIDECAR_VERSION {
        return Err(SidecarError::BadVersion(version));
    }
    let level: u8 = fields
        .next()
        .and_then(|v| v.parse().ok())
        .filter(|&l| l >= 1)
        .ok_or(SidecarError::BadHeader)?;

    let mut elements: Vec<(ElementId, OmegaSet)> = Vec::new();
    let mut postings: HashMap<u64, Vec<u64>> = HashMap::new();
    for (index, line) in lines {
        let line_no = index + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |problem: String| SidecarError::Malformed { line: line_no, problem };
        let mut fields = line.split_whitespace();
        let tag = fields.next().expect("non-empty line has a first field");
        match tag {
            "E" => {
                let token =
                    fields.next().ok_or_else(|| malformed("element record without id".into()))?;
                let id = ElementId::new(token)?;
                let values = parse_values(fields, line_no)?;
                elements.push((id, OmegaSet::new(values)));
            }
            "P" => {
                let key: u64 = fields
                    .next()
                    .and_then(|k| k.parse().ok())
                    .ok_or_else(|| malformed("posting record without key".into()))?;
                let values = parse_values(fields, line_no)?;
                postings.insert(key, values);
            }
            other => return Err(malformed(format!("unknown record tag {other:?}"))),
        }
    }

    Ok(Sidecar {
        level,
        set: PrivateSet::from_resolved(elements)?,
        index: InvertedIndex::from_postings(postings),
    })
}

fn parse_values<'a>(
    fields: impl Iterator<Item = &'a str>,
    line_no: usize,
) -> Result<Vec<u64>, SidecarError> {
    fields
        .map(|field| {
            field.parse().map_err(|_| SidecarError::Malformed {
                line: line_no,
                problem: format!("expected a decimal integer, got {field:?}"),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nsum_psi::{encrypt, sample_synthetic_map};

    #[test]
    fn sidecar_round_trips_set_and_index() {
        let map = sample_synthetic_map(6, (2, 4), 100_000, 5).unwrap();
        let ids: Vec<ElementId> = map.ids().cloned().collect();
        let set = PrivateSet::resolve(&map, &ids);
        let (encrypted, index) = encrypt(&set, 2).unwrap();

        let file = tempfile::NamedTempFile::new().unwrap();
        write_sidecar_file(file.path(), &set, &encrypted, &index).unwrap();
        let sidecar = read_sidecar_file(file.path()).unwrap();

        assert_eq!(sidecar.level, 2);
        assert_eq!(sidecar.set, set);
        assert_eq!(sidecar.index, index);
    }

    #[test]
    fn sidecar_bytes_are_deterministic() {
        let map = sample_synthetic_map(5, (1, 3), 10_000, 9).unwrap();
        let ids: Vec<ElementId> = map.ids().cloned().collect();
        let set = PrivateSet::resolve(&map, &ids);
        let (encrypted, index) = encrypt(&set, 2).unwrap();

        let mut first = Vec::new();
        write_sidecar(&mut first, &set, &encrypted, &index).unwrap();
        let mut second = Vec::new();
        write_sidecar(&mut second, &set, &encrypted, &index).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn sidecar_rejects_garbage() {
        let file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(file.path(), "BOGUS 1 2\n").unwrap();
        assert!(matches!(read_sidecar_file(file.path()).unwrap_err(), SidecarError::BadHeader));

        std::fs::write(file.path(), "NSUMIDX 9 2\n").unwrap();
        assert!(matches!(
            read_sidecar_file(file.path()).unwrap_err(),
            SidecarError::BadVersion(9)
        ));

        std::fs::write(file.path(), "NSUMIDX 1 2\nQ 1 2\n").unwrap();
        assert!(matches!(
            read_sidecar_file(file.path()).unwrap_err(),
            SidecarError::Malformed { .. }
        ));

        std::fs::write(file.path(), "NSUMIDX 1 2\nP notakey 5\n").unwrap();
        assert!(matches!(
            read_sidecar_file(file.path()).unwrap_err(),
            SidecarError::Malformed { line: 2, .. }
        ));
    }
}
