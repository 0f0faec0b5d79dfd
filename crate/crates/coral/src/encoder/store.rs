//! On-disk formats for embedding tables, encoder checkpoints, and
//! user-vector exchange files.
//!
//! Table file: magic "CORALEMB1", u32 LE dim, u64 LE count, then per record
//! a u16 LE id byte length, the UTF-8 id, and dim f32 LE values.
//! Checkpoint file: a table section followed by a weights section with magic
//! "CORALWTS1", u32 LE buckets, u32 LE dim, then buckets*dim f32 LE values.
//! All numbers little-endian; round trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Embedding, EmbeddingTable, HashedEncoder, UserRepresentation};

pub const TABLE_MAGIC: &[u8; 9] = b"CORALEMB1";
pub const WEIGHTS_MAGIC: &[u8; 9] = b"CORALWTS1";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {message}")]
    Format { message: String },
}

fn format_err(message: impl Into<String>) -> StoreError {
    StoreError::Format {
        message: message.into(),
    }
}

fn read_exact(reader: &mut impl Read, buf: &mut [u8], what: &str) -> Result<(), StoreError> {
    reader
        .read_exact(buf)
        .map_err(|_| format_err(format!("truncated file while reading {what}")))
}

fn read_u16(reader: &mut impl Read, what: &str) -> Result<u16, StoreError> {
    let mut buf = [0u8; 2];
    read_exact(reader, &mut buf, what)?;
    Ok(u16::from_le_bytes(buf))
}

fn read_u32(reader: &mut impl Read, what: &str) -> Result<u32, StoreError> {
    let mut buf = [0u8; 4];
    read_exact(reader, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(reader: &mut impl Read, what: &str) -> Result<u64, StoreError> {
    let mut buf = [0u8; 8];
    read_exact(reader, &mut buf, what)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f32_vec(reader: &mut impl Read, len: usize, what: &str) -> Result<Vec<f32>, StoreError> {
    let mut bytes = vec![0u8; len * 4];
    read_exact(reader, &mut bytes, what)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn expect_magic(reader: &mut impl Read, magic: &[u8; 9]) -> Result<(), StoreError> {
    let mut buf = [0u8; 9];
    read_exact(reader, &mut buf, "magic")?;
    if &buf != magic {
        return Err(format_err(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&buf),
            String::from_utf8_lossy(magic),
        )));
    }
    Ok(())
}

fn expect_eof(reader: &mut impl Read, what: &str) -> Result<(), StoreError> {
    let mut probe = [0u8; 1];
    match reader.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(format_err(format!("trailing bytes after {what}"))),
    }
}

fn write_table_section(writer: &mut impl Write, table: &EmbeddingTable) -> Result<(), StoreError> {
    writer.write_all(TABLE_MAGIC)?;
    writer.write_all(&(table.dim() as u32).to_le_bytes())?;
    writer.write_all(&(table.len() as u64).to_le_bytes())?;
    for (id, row) in table.iter() {
        let id_bytes = id.as_bytes();
        let id_len = u16::try_from(id_bytes.len())
            .map_err(|_| format_err(format!("item id {id:?} exceeds 65535 bytes")))?;
        writer.write_all(&id_len.to_le_bytes())?;
        writer.write_all(id_bytes)?;
        for value in row {
            writer.write_all(&value.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_table_section(reader: &mut impl Read) -> Result<EmbeddingTable, StoreError> {
    expect_magic(reader, TABLE_MAGIC)?;
    let dim = read_u32(reader, "table dim")? as usize;
    let count = read_u64(reader, "table count")?;
    let mut table = EmbeddingTable::new(dim);
    for i in 0..count {
        let id_len = read_u16(reader, "id length")? as usize;
        let mut id_bytes = vec![0u8; id_len];
        read_exact(reader, &mut id_bytes, "item id")?;
        let id = String::from_utf8(id_bytes)
            .map_err(|_| format_err(format!("record {i}: id is not valid UTF-8")))?;
        let row = read_f32_vec(reader, dim, "embedding row")?;
        if table.get(&id).is_some() {
            return Err(format_err(format!("duplicate id {id:?} in table")));
        }
        table.insert(id, row)?;
    }
    Ok(table)
}

/// Writes an embedding table file.
pub fn save_table(path: &Path, table: &EmbeddingTable) -> Result<(), StoreError> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_table_section(&mut writer, table)?;
    writer.flush()?;
    Ok(())
}

/// Reads an embedding table file; rejects trailing bytes.
pub fn load_table(path: &Path) -> Result<EmbeddingTable, StoreError> {
    let mut reader = BufReader::new(File::open(path)?);
    let table = read_table_section(&mut reader)?;
    expect_eof(&mut reader, "table section")?;
    Ok(table)
}

/// Writes a checkpoint: the item table for the stored weights, then the
/// weight matrix. Weights are stored as f32.
pub fn save_checkpoint(
    path: &Path,
    table: &EmbeddingTable,
    encoder: &HashedEncoder,
) -> Result<(), StoreError> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_table_section(&mut writer, table)?;
    writer.write_all(WEIGHTS_MAGIC)?;
    writer.write_all(&(encoder.buckets() as u32).to_le_bytes())?;
    writer.write_all(&(encoder.dim() as u32).to_le_bytes())?;
    for value in encoder.weights() {
        writer.write_all(&(*value as f32).to_le_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a checkpoint back into its table and encoder.
pub fn load_checkpoint(path: &Path) -> Result<(EmbeddingTable, HashedEncoder), StoreError> {
    let mut reader = BufReader::new(File::open(path)?);
    let table = read_table_section(&mut reader)?;
    expect_magic(&mut reader, WEIGHTS_MAGIC)?;
    let buckets = read_u32(&mut reader, "weight buckets")? as usize;
    let dim = read_u32(&mut reader, "weight dim")? as usize;
    if dim != table.dim() {
        return Err(format_err(format!(
            "weights dim {dim} does not match table dim {}",
            table.dim()
        )));
    }
    let weights = read_f32_vec(&mut reader, buckets * dim, "weight matrix")?;
    expect_eof(&mut reader, "weights section")?;
    let encoder =
        HashedEncoder::from_weights(dim, buckets, weights.iter().map(|w| f64::from(*w)).collect());
    Ok((table, encoder))
}

/// One line of the user-vector exchange format: precomputed context, like,
/// and dislike embeddings for a dialogue, e.g. from an external model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserVectorRecord {
    pub dialogue_id: String,
    pub h_c: Vec<f64>,
    pub h_l: Vec<f64>,
    pub h_d: Vec<f64>,
}

pub fn save_user_vectors(path: &Path, users: &[UserRepresentation]) -> Result<(), StoreError> {
    let mut writer = BufWriter::new(File::create(path)?);
    for user in users {
        let record = UserVectorRecord {
            dialogue_id: user.dialogue_id.clone(),
            h_c: user.context.values().to_vec(),
            h_l: user.like.values().to_vec(),
            h_d: user.dislike.values().to_vec(),
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| format_err(format!("serialize user vector: {e}")))?;
        writeln!(writer, "{line}")?;
    }
    writer.flush()?;
    Ok(())
}

/// Loads user vectors, enforcing a consistent dimension across records and
/// fields.
pub fn load_user_vectors(path: &Path) -> Result<Vec<UserRepresentation>, StoreError> {
    use std::io::BufRead;
    let reader = BufReader::new(File::open(path)?);
    let mut users = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: UserVectorRecord = serde_json::from_str(&line)
            .map_err(|e| format_err(format!("line {}: {e}", idx + 1)))?;
        let d = *dim.get_or_insert(record.h_c.len());
        for (name, values) in [
            ("h_c", &record.h_c),
            ("h_l", &record.h_l),
            ("h_d", &record.h_d),
        ] {
            if values.len() != d {
                return Err(format_err(format!(
                    "line {}: {name} has dim {}, expected {d}",
                    idx + 1,
                    values.len()
                )));
            }
        }
        users.push(UserRepresentation {
            dialogue_id: record.dialogue_id,
            context: Embedding::from_values(record.h_c),
            like: Embedding::from_values(record.h_l),
            dislike: Embedding::from_values(record.h_d),
        });
    }
    Ok(users)
}
