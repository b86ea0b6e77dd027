use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{validate_key, AssignmentSeq, FeatureMatrix, ManifestEntry};
use crate::error::{Error, Result};

const BINARY_MARKER: [u8; 2] = [0x00, b'B'];
const FLOAT_MATRIX_TOKEN: &[u8; 3] = b"FM ";
const INT32_SIZE: u8 = 0x04;

/// Appends Kaldi binary records to an archive and reports where each payload
/// starts, so an scp index can address it directly.
pub struct ArkWriter<W> {
    inner: W,
    path: PathBuf,
    pos: u64,
}

impl ArkWriter<BufWriter<File>> {
    /// Creates (truncates) an archive file.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(ArkWriter::new(BufWriter::new(file), path, 0))
    }

    /// Opens an archive for appending at its current end.
    pub fn append(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let pos = file.metadata().map_err(|e| Error::io(path, e))?.len();
        Ok(ArkWriter::new(BufWriter::new(file), path, pos))
    }
}

impl<W: Write> ArkWriter<W> {
    /// Wraps an arbitrary sink. `path` is what returned entries will point at
    /// and `pos` the byte offset at which `inner` starts writing.
    pub fn new(inner: W, path: impl Into<PathBuf>, pos: u64) -> Self {
        ArkWriter {
            inner,
            path: path.into(),
            pos,
        }
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn write_matrix(&mut self, m: &FeatureMatrix) -> Result<ManifestEntry> {
        m.validate()?;
        let rows = dim_i32(m.num_frames)?;
        let cols = dim_i32(m.dim)?;
        let offset = self.write_key(&m.utt_id)?;
        let mut buf = Vec::with_capacity(15 + m.values.len() * 4);
        buf.extend_from_slice(&BINARY_MARKER);
        buf.extend_from_slice(FLOAT_MATRIX_TOKEN);
        buf.push(INT32_SIZE);
        buf.extend_from_slice(&rows.to_le_bytes());
        buf.push(INT32_SIZE);
        buf.extend_from_slice(&cols.to_le_bytes());
        for v in &m.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.put(&buf)?;
        Ok(ManifestEntry {
            utt_id: m.utt_id.clone(),
            source_path: self.path.clone(),
            byte_offset: Some(offset),
            length: m.num_frames as u64,
        })
    }

    pub fn write_ints(&mut self, seq: &AssignmentSeq) -> Result<ManifestEntry> {
        seq.validate()?;
        let count = dim_i32(seq.labels.len())?;
        let offset = self.write_key(&seq.utt_id)?;
        let mut buf = Vec::with_capacity(7 + seq.labels.len() * 5);
        buf.extend_from_slice(&BINARY_MARKER);
        buf.push(INT32_SIZE);
        buf.extend_from_slice(&count.to_le_bytes());
        for &l in &seq.labels {
            buf.push(INT32_SIZE);
            buf.extend_from_slice(&(dim_i32(l as usize)?).to_le_bytes());
        }
        self.put(&buf)?;
        Ok(ManifestEntry {
            utt_id: seq.utt_id.clone(),
            source_path: self.path.clone(),
            byte_offset: Some(offset),
            length: seq.labels.len() as u64,
        })
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }

    pub fn into_inner(mut self) -> Result<W> {
        self.flush()?;
        Ok(self.inner)
    }

    fn write_key(&mut self, key: &str) -> Result<u64> {
        validate_key(key)?;
        self.put(key.as_bytes())?;
        self.put(b" ")?;
        Ok(self.pos)
    }

    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.inner
            .write_all(bytes)
            .map_err(|e| Error::io(&self.path, e))?;
        self.pos += bytes.len() as u64;
        Ok(())
    }
}

fn dim_i32(n: usize) -> Result<i32> {
    i32::try_from(n).map_err(|_| Error::InvalidRecord(format!("{n} exceeds the int32 range of the archive format")))
}

/// Opens `entry`'s archive positioned at the payload, after checking that the
/// key stored in front of the payload is `entry.utt_id`.
fn open_at(entry: &ManifestEntry) -> Result<BufReader<File>> {
    let path = &entry.source_path;
    let offset = entry
        .byte_offset
        .ok_or_else(|| Error::InvalidRecord(format!("{}: entry has no byte offset", entry.utt_id)))?;
    let key_len = entry.utt_id.len() as u64 + 1;
    let mismatch = |found: String| Error::KeyMismatch {
        offset,
        expected: entry.utt_id.clone(),
        found,
    };
    if offset < key_len {
        return Err(mismatch(String::new()));
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    r.seek(SeekFrom::Start(offset - key_len))
        .map_err(|e| Error::io(path, e))?;
    let mut key = vec![0u8; key_len as usize];
    r.read_exact(&mut key).map_err(|e| map_eof(path, e))?;
    if key.last() != Some(&b' ') || &key[..key.len() - 1] != entry.utt_id.as_bytes() {
        return Err(mismatch(String::from_utf8_lossy(&key).trim_end().to_string()));
    }
    Ok(r)
}

fn map_eof(path: &Path, e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::CorruptArchive(format!("{}: unexpected end of archive", path.display()))
    } else {
        Error::io(path, e)
    }
}

pub fn read_ark_matrix(entry: &ManifestEntry) -> Result<FeatureMatrix> {
    let mut r = open_at(entry)?;
    expect_marker(&mut r)?;
    let mut token = [0u8; 3];
    read_payload(&mut r, &mut token)?;
    if &token != FLOAT_MATRIX_TOKEN {
        return Err(bad_token(&token));
    }
    read_matrix_body(&mut r, entry.utt_id.clone())
}

/// Reads an int-vector record as labels for a codebook of size `codebook_size`.
pub fn read_ark_ints(entry: &ManifestEntry, codebook_size: usize) -> Result<AssignmentSeq> {
    let mut r = open_at(entry)?;
    expect_marker(&mut r)?;
    let mut first = [0u8; 1];
    read_payload(&mut r, &mut first)?;
    let ints = read_int_body(&mut r, first[0])?;
    ints_to_assignments(entry.utt_id.clone(), ints, codebook_size)
}

/// Returns `(rows, cols)` of a float-matrix record without reading its payload.
pub fn probe_matrix_header(entry: &ManifestEntry) -> Result<(usize, usize)> {
    let mut r = open_at(entry)?;
    expect_marker(&mut r)?;
    let mut token = [0u8; 3];
    read_payload(&mut r, &mut token)?;
    if &token != FLOAT_MATRIX_TOKEN {
        return Err(bad_token(&token));
    }
    let rows = read_sized_i32(&mut r)?;
    let cols = read_sized_i32(&mut r)?;
    check_dims(rows, cols)
}

pub(crate) fn ints_to_assignments(utt_id: String, ints: Vec<i32>, k: usize) -> Result<AssignmentSeq> {
    let mut labels = Vec::with_capacity(ints.len());
    for v in ints {
        if v < 0 || v as usize >= k {
            return Err(Error::LabelOutOfRange { label: v as i64, k });
        }
        labels.push(v as u32);
    }
    AssignmentSeq::new(utt_id, labels, k)
}

fn bad_token(token: &[u8]) -> Error {
    Error::CorruptArchive(format!(
        "unsupported type token {:?}",
        String::from_utf8_lossy(token)
    ))
}

fn read_payload<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            Error::CorruptArchive("truncated record header".into())
        } else {
            Error::io("<archive>", e)
        }
    })
}

fn expect_marker<R: Read>(r: &mut R) -> Result<()> {
    let mut m = [0u8; 2];
    read_payload(r, &mut m)?;
    if m != BINARY_MARKER {
        return Err(Error::CorruptArchive(format!(
            "expected binary marker \\0B, found {m:02x?}"
        )));
    }
    Ok(())
}

fn read_sized_i32<R: Read>(r: &mut R) -> Result<i32> {
    let mut b = [0u8; 5];
    read_payload(r, &mut b)?;
    if b[0] != INT32_SIZE {
        return Err(Error::CorruptArchive(format!("expected int32 size byte 0x04, found {:#04x}", b[0])));
    }
    Ok(i32::from_le_bytes([b[1], b[2], b[3], b[4]]))
}

fn check_dims(rows: i32, cols: i32) -> Result<(usize, usize)> {
    if rows < 0 || cols < 0 {
        return Err(Error::CorruptArchive(format!("negative matrix dimensions {rows}x{cols}")));
    }
    Ok((rows as usize, cols as usize))
}

fn read_matrix_body<R: Read>(r: &mut R, utt_id: String) -> Result<FeatureMatrix> {
    let rows = read_sized_i32(r)?;
    let cols = read_sized_i32(r)?;
    let (rows, cols) = check_dims(rows, cols)?;
    let mut bytes = vec![0u8; rows * cols * 4];
    r.read_exact(&mut bytes).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            Error::CorruptArchive(format!(
                "{utt_id}: payload shorter than its {rows}x{cols} header"
            ))
        } else {
            Error::io("<archive>", e)
        }
    })?;
    let values = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    FeatureMatrix::new(utt_id, rows, cols, values)
}

/// `first` is the already-consumed byte following the binary marker.
fn read_int_body<R: Read>(r: &mut R, first: u8) -> Result<Vec<i32>> {
    if first != INT32_SIZE {
        return Err(Error::CorruptArchive(format!(
            "expected int32 size byte 0x04 for vector length, found {first:#04x}"
        )));
    }
    let mut b = [0u8; 4];
    read_payload(r, &mut b)?;
    let count = i32::from_le_bytes(b);
    if count < 0 {
        return Err(Error::CorruptArchive(format!("negative vector length {count}")));
    }
    let mut bytes = vec![0u8; count as usize * 5];
    r.read_exact(&mut bytes).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            Error::CorruptArchive(format!("int vector shorter than its length {count}"))
        } else {
            Error::io("<archive>", e)
        }
    })?;
    bytes
        .chunks_exact(5)
        .map(|c| {
            if c[0] != INT32_SIZE {
                return Err(Error::CorruptArchive(format!("bad element size byte {:#04x}", c[0])));
            }
            Ok(i32::from_le_bytes([c[1], c[2], c[3], c[4]]))
        })
        .collect()
}

/// A record read sequentially from an archive.
#[derive(Debug, Clone, PartialEq)]
pub enum ArkRecord {
    Matrix(FeatureMatrix),
    Ints(Vec<i32>),
}

/// Sequential reader over every record of an archive stream.
pub struct ArkReader<R> {
    inner: R,
}

impl ArkReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(ArkReader::new(BufReader::new(file)))
    }
}

impl<R: BufRead> ArkReader<R> {
    pub fn new(inner: R) -> Self {
        ArkReader { inner }
    }

    pub fn next_record(&mut self) -> Result<Option<(String, ArkRecord)>> {
        let mut key = Vec::new();
        let n = self
            .inner
            .read_until(b' ', &mut key)
            .map_err(|e| Error::io("<archive>", e))?;
        if n == 0 {
            return Ok(None);
        }
        if key.pop() != Some(b' ') {
            return Err(Error::CorruptArchive("truncated record key".into()));
        }
        let key = String::from_utf8(key)
            .map_err(|_| Error::CorruptArchive("record key is not UTF-8".into()))?;
        validate_key(&key)?;
        expect_marker(&mut self.inner)?;
        let mut first = [0u8; 1];
        read_payload(&mut self.inner, &mut first)?;
        let record = if first[0] == b'F' {
            let mut rest = [0u8; 2];
            read_payload(&mut self.inner, &mut rest)?;
            if rest != *b"M " {
                return Err(bad_token(&[b'F', rest[0], rest[1]]));
            }
            ArkRecord::Matrix(read_matrix_body(&mut self.inner, key.clone())?)
        } else if first[0] == INT32_SIZE {
            ArkRecord::Ints(read_int_body(&mut self.inner, first[0])?)
        } else {
            let mut rest = [0u8; 2];
            let _ = self.inner.read_exact(&mut rest);
            return Err(bad_token(&[first[0], rest[0], rest[1]]));
        };
        Ok(Some((key, record)))
    }
}

impl<R: BufRead> Iterator for ArkReader<R> {
    type Item = Result<(String, ArkRecord)>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}
