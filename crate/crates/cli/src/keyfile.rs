//! Shareable key files.
//!
//! Two interchangeable encodings of a sorted key list:
//!
//! - text: one decimal key per line, ascending, newline-terminated;
//! - packed: magic `NSUM`, version, level, key width (32 or 64), key count
//!   as little-endian u64, then the keys as fixed-width little-endian
//!   integers.
//!
//! Text files carry no level metadata; packed files do. The writer packs
//! 32-bit keys whenever the largest key allows it.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nsum_psi::{EncryptedSet, EncryptError};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"NSUM";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum KeyFileError {
    #[error("failed to access key file: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: expected a decimal key, got {token:?}")]
    BadKey { line: usize, token: String },
    #[error("keys are not strictly ascending at line {line}")]
    NotAscending { line: usize },
    #[error("not a packed key file (bad magic)")]
    BadMagic,
    #[error("unsupported packed key file version {0}")]
    BadVersion(u8),
    #[error("invalid key width {0} (expected 32 or 64)")]
    BadWidth(u8),
    #[error("packed key file truncated: expected {expected} keys, payload holds {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("packed keys are not strictly ascending at index {0}")]
    PackedNotAscending(usize),
    #[error("packed level must be at least 1")]
    ZeroLevel,
    #[error(transparent)]
    Invalid(#[from] EncryptError),
}

/// Writes the text form: ascending decimal keys, one per line.
pub fn write_text<W: Write>(mut out: W, keys: &[u64]) -> io::Result<()> {
    for key in keys {
        writeln!(out, "{key}")?;
    }
    Ok(())
}

pub fn write_text_file(path: impl AsRef<Path>, keys: &[u64]) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_text(&mut out, keys)?;
    out.flush()
}

/// Reads the text form, enforcing the strictly-ascending contract. The level
/// is not stored in text files and must be supplied by the caller.
pub fn read_text_file(path: impl AsRef<Path>, level: u8) -> Result<EncryptedSet, KeyFileError> {
    let reader = BufReader::new(File::open(path)?);
    let mut keys = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        let key: u64 = token
            .parse()
            .map_err(|_| KeyFileError::BadKey { line: index + 1, token: token.to_string() })?;
        if let Some(&last) = keys.last() {
            if key <= last {
                return Err(KeyFileError::NotAscending { line: index + 1 });
            }
        }
        keys.push(key);
    }
    Ok(EncryptedSet::from_sorted_keys(level, keys)?)
}

fn key_width(keys: &[u64]) -> u8 {
    match keys.last() {
        Some(&max) if max > u32::MAX as u64 => 64,
        _ => 32,
    }
}

/// Writes the packed form, choosing 32-bit keys when provably sufficient.
pub fn write_packed<W: Write>(mut out: W, level: u8, keys: &[u64]) -> io::Result<()> {
    let width = key_width(keys);
    out.write_all(MAGIC)?;
    out.write_all(&[FORMAT_VERSION, level, width])?;
    out.write_all(&(keys.len() as u64).to_le_bytes())?;
    for &key in keys {
        match width {
            32 => out.write_all(&(key as u32).to_le_bytes())?,
            _ => out.write_all(&key.to_le_bytes())?,
        }
    }
    Ok(())
}

pub fn write_packed_file(
    path: impl AsRef<Path>,
    level: u8,
    keys: &[u64],
) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_packed(&mut out, level, keys)?;
    out.flush()
}

/// Reads the packed form, validating magic, version, width, counts and key
/// order.
pub fn read_packed<R: Read>(mut input: R) -> Result<EncryptedSet, KeyFileError> {
    let mut header = [0u8; 7];
    input.read_exact(&mut header).map_err(|_| KeyFileError::BadMagic)?;
    if &header[..4] != MAGIC {
        return Err(KeyFileError::BadMagic);
    }
    let version = header[4];
    if version != FORMAT_VERSION {
        return Err(KeyFileError::BadVersion(version));
    }
    let level = header[5];
    if level == 0 {
        return Err(KeyFileError::ZeroLevel);
    }
    let width = header[6];
    if width != 32 && width != 64 {
        return Err(KeyFileError::BadWidth(width));
    }
    let mut count_bytes = [0u8; 8];
    input
        .read_exact(&mut count_bytes)
        .map_err(|_| KeyFileError::Truncated { expected: 0, found: 0 })?;
    let expected = u64::from_le_bytes(count_bytes);

    let mut payload = Vec::new();
    input.read_to_end(&mut payload)?;
    let stride = (width / 8) as u64;
    let found = payload.len() as u64 / stride;
    if found < expected || !(payload.len() as u64).is_multiple_of(stride) {
        return Err(KeyFileError::Truncated { expected, found });
    }
    let mut keys = Vec::with_capacity(expected as usize);
    for chunk in payload.chunks_exact(stride as usize).take(expected as usize) {
        let key = match width {
            32 => u64::from(u32::from_le_bytes(chunk.try_into().expect("4-byte chunk"))),
            _ => u64::from_le_bytes(chunk.try_into().expect("8-byte chunk")),
        };
        if let Some(&last) = keys.last() {
            if key <= last {
                return Err(KeyFileError::PackedNotAscending(keys.len()));
            }
        }
        keys.push(key);
    }
    Ok(EncryptedSet::from_sorted_keys(level, keys)?)
}

pub fn read_packed_file(path: impl AsRef<Path>) -> Result<EncryptedSet, KeyFileError> {
    read_packed(BufReader::new(File::open(path)?))
}

/// Loads a key file of either format, sniffing the packed magic. Text files
/// take their level from `text_level`.
pub fn read_any_file(
    path: impl AsRef<Path>,
    text_level: u8,
) -> Result<EncryptedSet, KeyFileError> {
    let path = path.as_ref();
    let mut probe = [0u8; 4];
    let mut file = File::open(path)?;
    let is_packed = match file.read_exact(&mut probe) {
        Ok(()) => &probe == MAGIC,
        Err(_) => false,
    };
    drop(file);
    if is_packed {
        read_packed_file(path)
    } else {
        read_text_file(path, text_level)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_preserves_keys_and_contract() {
        let keys = vec![3u64, 17, 99, 4_000_000_000, u64::from(u32::MAX) + 5];
        let file = tempfile::NamedTempFile::new().unwrap();
        write_text_file(file.path(), &keys).unwrap();

        let bytes = std::fs::read(file.path()).unwrap();
        assert!(bytes.ends_with(b"\n"), "text key files are newline-terminated");
        let read = read_text_file(file.path(), 2).unwrap();
        assert_eq!(read.keys(), keys.as_slice());
        assert_eq!(read.level(), 2);
    }

    #[test]
    fn text_reader_rejects_disorder_and_garbage() {
        let file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(file.path(), "5\n4\n").unwrap();
        assert!(matches!(
            read_text_file(file.path(), 2).unwrap_err(),
            KeyFileError::NotAscending { line: 2 }
        ));
        std::fs::write(file.path(), "5\nfive\n").unwrap();
        assert!(matches!(
            read_text_file(file.path(), 2).unwrap_err(),
            KeyFileError::BadKey { line: 2, .. }
        ));
    }

    #[test]
    fn packed_round_trip_chooses_width() {
        let small = vec![1u64, 2, 3, u32::MAX as u64];
        let mut buffer = Vec::new();
        write_packed(&mut buffer, 2, &small).unwrap();
        assert_eq!(buffer[6], 32, "fits in 32 bits");
        assert_eq!(buffer.len(), 15 + 4 * small.len());
        let read = read_packed(buffer.as_slice()).unwrap();
        assert_eq!(read.keys(), small.as_slice());
        assert_eq!(read.level(), 2);

        let wide = vec![1u64, u32::MAX as u64 + 1];
        let mut buffer = Vec::new();
        write_packed(&mut buffer, 3, &wide).unwrap();
        assert_eq!(buffer[6], 64);
        let read = read_packed(buffer.as_slice()).unwrap();
        assert_eq!(read.keys(), wide.as_slice());
        assert_eq!(read.level(), 3);
    }

    #[test]
    fn packed_reader_rejects_corruption() {
        let mut buffer = Vec::new();
        write_packed(&mut buffer, 2, &[1, 2, 3]).unwrap();

        let mut bad_magic = buffer.clone();
        bad_magic[0] = b'X';
        assert!(matches!(read_packed(bad_magic.as_slice()).unwrap_err(), KeyFileError::BadMagic));

        let mut bad_version = buffer.clone();
        bad_version[4] = 9;
        assert!(matches!(
            read_packed(bad_version.as_slice()).unwrap_err(),
            KeyFileError::BadVersion(9)
        ));

        let mut bad_width = buffer.clone();
        bad_width[6] = 16;
        assert!(matches!(
            read_packed(bad_width.as_slice()).unwrap_err(),
            KeyFileError::BadWidth(16)
        ));

        let truncated = &buffer[..buffer.len() - 2];
        assert!(matches!(read_packed(truncated).unwrap_err(), KeyFileError::Truncated { .. }));
    }

    #[test]
    fn sniffing_reader_handles_both_formats() {
        let keys = vec![10u64, 20, 30];
        let text = tempfile::NamedTempFile::new().unwrap();
        write_text_file(text.path(), &keys).unwrap();
        let packed = tempfile::NamedTempFile::new().unwrap();
        write_packed_file(packed.path(), 2, &keys).unwrap();

        assert_eq!(read_any_file(text.path(), 2).unwrap().keys(), keys.as_slice());
        assert_eq!(read_any_file(packed.path(), 7).unwrap().level(), 2);
    }
}
