use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::WaveRecord;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

impl WavEncoding {
    fn bytes_per_sample(self) -> usize {
        match self {
            WavEncoding::Pcm16 => 2,
            WavEncoding::Float32 => 4,
        }
    }
}

/// Header facts for a mono WAV file, available without decoding the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavInfo {
    pub sample_rate: u32,
    pub num_samples: u64,
    pub encoding: WavEncoding,
}

/// Streaming mono WAV decoder. The header is parsed on construction; samples
/// are then pulled in caller-sized chunks.
pub struct WavReader<R> {
    inner: R,
    info: WavInfo,
    remaining: u64,
    scratch: Vec<u8>,
}

impl WavReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        WavReader::new(BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }
}

impl<R: Read> WavReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let info = parse_header(&mut inner)?;
        Ok(WavReader {
            inner,
            info,
            remaining: info.num_samples,
            scratch: Vec::new(),
        })
    }

    pub fn info(&self) -> WavInfo {
        self.info
    }

    /// Decodes up to `out.len()` samples; returns how many were written.
    /// Zero means the data chunk is exhausted.
    pub fn read_samples(&mut self, out: &mut [f32]) -> Result<usize> {
        let n = (out.len() as u64).min(self.remaining) as usize;
        if n == 0 {
            return Ok(0);
        }
        let width = self.info.encoding.bytes_per_sample();
        self.scratch.resize(n * width, 0);
        self.inner.read_exact(&mut self.scratch).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                Error::WavHeader("data chunk shorter than its declared size".into())
            } else {
                Error::io("<wav stream>", e)
            }
        })?;
        match self.info.encoding {
            WavEncoding::Pcm16 => {
                for (dst, b) in out.iter_mut().zip(self.scratch.chunks_exact(2)) {
                    *dst = i16::from_le_bytes([b[0], b[1]]) as f32 / 32768.0;
                }
            }
            WavEncoding::Float32 => {
                for (dst, b) in out.iter_mut().zip(self.scratch.chunks_exact(4)) {
                    let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                    if !(-1.0..=1.0).contains(&v) {
                        return Err(Error::InvalidRecord(format!("float sample {v} outside [-1, 1]")));
                    }
                    *dst = v;
                }
            }
        }
        self.remaining -= n as u64;
        Ok(n)
    }
}

/// Reads a whole mono PCM16 or float32 WAV file. The utterance id is the file stem.
pub fn read_wav(path: impl AsRef<Path>) -> Result<WaveRecord> {
    let path = path.as_ref();
    let utt_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("utt")
        .to_string();
    read_wav_as(path, utt_id)
}

pub(crate) fn read_wav_as(path: &Path, utt_id: String) -> Result<WaveRecord> {
    let mut reader = WavReader::open(path)?;
    let info = reader.info();
    let mut samples = vec![0.0f32; info.num_samples as usize];
    let mut filled = 0;
    while filled < samples.len() {
        let n = reader.read_samples(&mut samples[filled..])?;
        if n == 0 {
            break;
        }
        filled += n;
    }
    WaveRecord::new(utt_id, info.sample_rate, samples)
}

pub fn probe_wav(path: impl AsRef<Path>) -> Result<WavInfo> {
    Ok(WavReader::open(path)?.info())
}

fn parse_header<R: Read>(r: &mut R) -> Result<WavInfo> {
    let mut tag = [0u8; 4];
    read_or_header_err(r, &mut tag, "missing RIFF tag")?;
    if &tag != b"RIFF" {
        return Err(Error::WavHeader(format!("expected RIFF, found {:?}", String::from_utf8_lossy(&tag))));
    }
    read_u32(r, "missing RIFF size")?;
    read_or_header_err(r, &mut tag, "missing WAVE tag")?;
    if &tag != b"WAVE" {
        return Err(Error::WavHeader(format!("expected WAVE, found {:?}", String::from_utf8_lossy(&tag))));
    }

    let mut format: Option<(u16, u16, u32, u16, u16)> = None;
    loop {
        read_or_header_err(r, &mut tag, "no data chunk")?;
        let size = read_u32(r, "truncated chunk header")? as u64;
        match &tag {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::WavHeader(format!("fmt chunk of {size} bytes")));
                }
                let mut fmt = vec![0u8; size as usize];
                read_or_header_err(r, &mut fmt, "truncated fmt chunk")?;
                let mut tag_id = u16::from_le_bytes([fmt[0], fmt[1]]);
                let channels = u16::from_le_bytes([fmt[2], fmt[3]]);
                let rate = u32::from_le_bytes([fmt[4], fmt[5], fmt[6], fmt[7]]);
                let block_align = u16::from_le_bytes([fmt[12], fmt[13]]);
                let bits = u16::from_le_bytes([fmt[14], fmt[15]]);
                if tag_id == FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(Error::WavHeader("short WAVE_FORMAT_EXTENSIBLE block".into()));
                    }
                    tag_id = u16::from_le_bytes([fmt[24], fmt[25]]);
                }
                format = Some((tag_id, channels, rate, block_align, bits));
                skip(r, size & 1)?;
            }
            b"data" => {
                let (tag_id, channels, rate, block_align, bits) =
                    format.ok_or_else(|| Error::WavHeader("data chunk before fmt chunk".into()))?;
                if channels == 0 {
                    return Err(Error::WavHeader("zero channels".into()));
                }
                if channels != 1 {
                    return Err(Error::MultiChannel(channels));
                }
                let encoding = match (tag_id, bits) {
                    (FORMAT_PCM, 16) => WavEncoding::Pcm16,
                    (FORMAT_IEEE_FLOAT, 32) => WavEncoding::Float32,
                    _ => {
                        return Err(Error::UnsupportedEncoding {
                            format_tag: tag_id,
                            bits_per_sample: bits,
                        })
                    }
                };
                if rate == 0 {
                    return Err(Error::WavHeader("zero sample rate".into()));
                }
                let width = encoding.bytes_per_sample() as u64;
                if block_align as u64 != width {
                    return Err(Error::WavHeader(format!(
                        "block align {block_align} for a {width}-byte mono sample"
                    )));
                }
                if !size.is_multiple_of(width) {
                    return Err(Error::WavHeader(format!(
                        "data size {size} is not a multiple of {width}"
                    )));
                }
                return Ok(WavInfo {
                    sample_rate: rate,
                    num_samples: size / width,
                    encoding,
                });
            }
            _ => skip(r, size + (size & 1))?,
        }
    }
}

fn read_or_header_err<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            Error::WavHeader(what.to_string())
        } else {
            Error::io("<wav stream>", e)
        }
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_or_header_err(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn skip<R: Read>(r: &mut R, n: u64) -> Result<()> {
    let copied = io::copy(&mut r.by_ref().take(n), &mut io::sink())
        .map_err(|e| Error::io("<wav stream>", e))?;
    if copied != n {
        return Err(Error::WavHeader("truncated chunk".into()));
    }
    Ok(())
}

fn write_header<W: Write>(w: &mut W, tag: u16, sample_rate: u32, width: u16, n: usize) -> io::Result<()> {
    let data_len = (n * width as usize) as u32;
    w.write_all(b"RIFF")?;
    w.write_all(&(36 + data_len).to_le_bytes())?;
    w.write_all(b"WAVEfmt ")?;
    w.write_all(&16u32.to_le_bytes())?;
    w.write_all(&tag.to_le_bytes())?;
    w.write_all(&1u16.to_le_bytes())?;
    w.write_all(&sample_rate.to_le_bytes())?;
    w.write_all(&(sample_rate * width as u32).to_le_bytes())?;
    w.write_all(&width.to_le_bytes())?;
    w.write_all(&(width * 8).to_le_bytes())?;
    w.write_all(b"data")?;
    w.write_all(&data_len.to_le_bytes())
}

/// Writes mono PCM16; each sample is quantized as `round(v * 32768)` clamped to the i16 range.
pub fn write_wav_pcm16(path: impl AsRef<Path>, sample_rate: u32, samples: &[f32]) -> Result<()> {
    let path = path.as_ref();
    let run = || -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_header(&mut w, FORMAT_PCM, sample_rate, 2, samples.len())?;
        for &v in samples {
            let q = (v as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            w.write_all(&q.to_le_bytes())?;
        }
        w.flush()
    };
    run().map_err(|e| Error::io(path, e))
}

pub fn write_wav_f32(path: impl AsRef<Path>, sample_rate: u32, samples: &[f32]) -> Result<()> {
    let path = path.as_ref();
    let run = || -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_header(&mut w, FORMAT_IEEE_FLOAT, sample_rate, 4, samples.len())?;
        for &v in samples {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    };
    run().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(tag: u16, channels: u16, bits: u16, data: &[u8]) -> Vec<u8> {
        let block = channels * bits / 8;
        let mut v = Vec::new();
        v.extend_from_slice(b"RIFF");
        v.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        v.extend_from_slice(b"WAVEfmt ");
        v.extend_from_slice(&16u32.to_le_bytes());
        v.extend_from_slice(&tag.to_le_bytes());
        v.extend_from_slice(&channels.to_le_bytes());
        v.extend_from_slice(&16000u32.to_le_bytes());
        v.extend_from_slice(&(16000 * block as u32).to_le_bytes());
        v.extend_from_slice(&block.to_le_bytes());
        v.extend_from_slice(&bits.to_le_bytes());
        v.extend_from_slice(b"data");
        v.extend_from_slice(&(data.len() as u32).to_le_bytes());
        v.extend_from_slice(data);
        v
    }

    fn decode(bytes: Vec<u8>) -> Result<Vec<f32>> {
        let mut r = WavReader::new(io::Cursor::new(bytes))?;
        let mut out = vec![0.0; r.info().num_samples as usize];
        let n = r.read_samples(&mut out)?;
        assert_eq!(n, out.len());
        Ok(out)
    }

    #[test]
    fn zero_signal_decodes_to_zeros() {
        let out = decode(header(1, 1, 16, &[0u8; 3200])).unwrap();
        assert_eq!(out.len(), 1600);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pcm16_full_scale_scaling() {
        let data: Vec<u8> = [32767i16, -32768, 1]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let out = decode(header(1, 1, 16, &data)).unwrap();
        assert_eq!(out, vec![32767.0 / 32768.0, -1.0, 1.0 / 32768.0]);
    }

    #[test]
    fn errors_are_distinct() {
        let stereo = decode(header(1, 2, 16, &[0u8; 8])).unwrap_err();
        assert!(matches!(stereo, Error::MultiChannel(2)), "{stereo}");

        let pcm24 = decode(header(1, 1, 24, &[0u8; 6])).unwrap_err();
        assert!(matches!(
            pcm24,
            Error::UnsupportedEncoding { format_tag: 1, bits_per_sample: 24 }
        ));

        let alaw = decode(header(6, 1, 8, &[0u8; 4])).unwrap_err();
        assert!(matches!(alaw, Error::UnsupportedEncoding { format_tag: 6, .. }));

        let mut bad = header(1, 1, 16, &[0u8; 4]);
        bad[0] = b'X';
        assert!(matches!(decode(bad).unwrap_err(), Error::WavHeader(_)));

        let truncated = header(1, 1, 16, &[0u8; 4])[..30].to_vec();
        assert!(matches!(decode(truncated).unwrap_err(), Error::WavHeader(_)));
    }

    #[test]
    fn short_payload_is_reported() {
        let mut bytes = header(1, 1, 16, &[0u8; 8]);
        bytes.truncate(bytes.len() - 2);
        assert!(matches!(decode(bytes).unwrap_err(), Error::WavHeader(_)));
    }

    #[test]
    fn skips_unknown_chunks() {
        let mut bytes = header(3, 1, 32, &0.25f32.to_le_bytes());
        // splice a LIST chunk with odd size (plus pad byte) before fmt
        let list = [b"LIST".as_slice(), &3u32.to_le_bytes(), b"abc\0"].concat();
        bytes.splice(12..12, list);
        assert_eq!(decode(bytes).unwrap(), vec![0.25]);
    }

    #[test]
    fn float_out_of_range_rejected() {
        let err = decode(header(3, 1, 32, &1.5f32.to_le_bytes())).unwrap_err();
        assert!(matches!(err, Error::InvalidRecord(_)));
    }

    #[test]
    fn pcm16_write_read_identity_on_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.wav");
        let samples: Vec<f32> = (-5..5).map(|i| i as f32 * 1000.0 / 32768.0).collect();
        write_wav_pcm16(&path, 8000, &samples).unwrap();
        let rec = read_wav(&path).unwrap();
        assert_eq!(rec.utt_id, "g");
        assert_eq!(rec.sample_rate, 8000);
        assert_eq!(rec.samples, samples);
    }
}
