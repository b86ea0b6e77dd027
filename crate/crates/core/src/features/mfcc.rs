use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::config::{MfccConfig, WindowKind};
use super::delta::{DeltaPipeline, BASE_DIM, FULL_DIM};
use crate::corpus_io::{FeatureMatrix, WaveRecord};
use crate::error::{Error, Result};

/// Number of frames produced for `num_samples` input samples (edges snipped:
/// only windows fully inside the signal count).
pub fn frame_count(num_samples: usize, config: &MfccConfig) -> usize {
    let len = config.frame_length_samples();
    let shift = config.frame_shift_samples().max(1);
    if num_samples < len {
        0
    } else {
        1 + (num_samples - len) / shift
    }
}

pub fn mel_scale(hz: f64) -> f64 {
    1127.0 * (1.0 + hz / 700.0).ln()
}

/// Orthonormal DCT-II rows `0..n_out` for inputs of length `n_in`, row-major.
pub fn dct_matrix(n_out: usize, n_in: usize) -> Vec<f64> {
    let mut m = Vec::with_capacity(n_out * n_in);
    for k in 0..n_out {
        let scale = if k == 0 {
            (1.0 / n_in as f64).sqrt()
        } else {
            (2.0 / n_in as f64).sqrt()
        };
        for n in 0..n_in {
            m.push(scale * (PI / n_in as f64 * (n as f64 + 0.5) * k as f64).cos());
        }
    }
    m
}

/// Triangular filter over a contiguous run of FFT bins.
#[derive(Debug, Clone)]
struct MelFilter {
    first_bin: usize,
    weights: Vec<f64>,
}

/// Kaldi-style mel bank: triangles equally spaced on the mel axis between
/// `low_freq` and `high_freq`, evaluated at FFT bin centres `0..fft_size/2`.
fn mel_bank(config: &MfccConfig) -> Vec<MelFilter> {
    let num_fft_bins = config.fft_size / 2;
    let bin_width = config.sample_rate as f64 / config.fft_size as f64;
    let mel_low = mel_scale(config.low_freq);
    let mel_high = mel_scale(config.high_freq);
    let delta = (mel_high - mel_low) / (config.num_mel_bins + 1) as f64;
    (0..config.num_mel_bins)
        .map(|b| {
            let left = mel_low + b as f64 * delta;
            let centre = left + delta;
            let right = centre + delta;
            let mut first_bin = None;
            let mut weights = Vec::new();
            for i in 0..num_fft_bins {
                let mel = mel_scale(bin_width * i as f64);
                let w = ((mel - left) / (centre - left))
                    .min((right - mel) / (right - centre))
                    .max(0.0);
                if w > 0.0 {
                    first_bin.get_or_insert(i);
                    weights.push(w);
                } else if first_bin.is_some() {
                    break;
                }
            }
            MelFilter {
                first_bin: first_bin.unwrap_or(0),
                weights,
            }
        })
        .collect()
}

/// Precomputed window, mel bank, DCT and FFT plan for one configuration.
/// Immutable and shareable across threads; per-stream scratch lives in the
/// streams it hands out.
#[derive(Clone)]
pub struct MfccExtractor {
    config: MfccConfig,
    window: Vec<f64>,
    filters: Vec<MelFilter>,
    dct: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor").field("config", &self.config).finish()
    }
}

struct Scratch {
    buf: Vec<Complex<f64>>,
    fft: Vec<Complex<f64>>,
    log_mel: Vec<f64>,
}

impl MfccExtractor {
    pub fn new(config: MfccConfig) -> Result<Self> {
        config.validate()?;
        let n = config.frame_length_samples();
        let window = (0..n)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / (n - 1) as f64;
                match config.window {
                    WindowKind::Hamming => 0.54 - 0.46 * a.cos(),
                    WindowKind::Hann => 0.5 - 0.5 * a.cos(),
                }
            })
            .collect();
        let filters = mel_bank(&config);
        let dct = dct_matrix(config.num_cepstra, config.num_mel_bins);
        let fft = FftPlanner::new().plan_fft_forward(config.fft_size);
        Ok(MfccExtractor {
            config,
            window,
            filters,
            dct,
            fft,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            buf: vec![Complex::new(0.0, 0.0); self.config.fft_size],
            fft: vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()],
            log_mel: vec![0.0; self.config.num_mel_bins],
        }
    }

    fn cepstra_into(&self, frame: &[f32], s: &mut Scratch, out: &mut [f32]) {
        let n = frame.len();
        let p = self.config.preemphasis;
        for (dst, &x) in s.buf.iter_mut().zip(frame) {
            *dst = Complex::new(x as f64, 0.0);
        }
        for i in (1..n).rev() {
            s.buf[i].re -= p * s.buf[i - 1].re;
        }
        s.buf[0].re -= p * s.buf[0].re;
        for (x, w) in s.buf.iter_mut().zip(&self.window) {
            x.re *= w;
        }
        for x in &mut s.buf[n..] {
            *x = Complex::new(0.0, 0.0);
        }
        self.fft.process_with_scratch(&mut s.buf, &mut s.fft);

        for (lm, f) in s.log_mel.iter_mut().zip(&self.filters) {
            let energy: f64 = f
                .weights
                .iter()
                .zip(&s.buf[f.first_bin..])
                .map(|(w, c)| w * c.norm_sqr())
                .sum();
            *lm = energy.max(self.config.log_floor).ln();
        }
        let m = self.config.num_mel_bins;
        // Non-DC DCT rows sum to zero, so measuring against log_mel[0] leaves
        // them unchanged and makes a flat log spectrum give exact zeros.
        let base = s.log_mel[0];
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.dct[k * m..(k + 1) * m];
            let v: f64 = if k == 0 {
                row.iter().zip(&s.log_mel).map(|(a, b)| a * b).sum()
            } else {
                row.iter().zip(&s.log_mel).map(|(a, b)| a * (b - base)).sum()
            };
            *o = v as f32;
        }
    }

    /// Streams base cepstra (`num_cepstra` per frame).
    pub fn cepstra_stream(&self) -> CepstraStream<'_> {
        CepstraStream {
            ex: self,
            pending: Vec::new(),
            pending_start: 0,
            next_frame: 0,
            scratch: self.scratch(),
            row: vec![0.0; self.config.num_cepstra],
        }
    }

    /// Streams full 39-dimensional rows (cepstra, deltas, delta-deltas).
    pub fn mfcc39_stream(&self) -> Result<Mfcc39Stream<'_>> {
        if self.config.num_cepstra != BASE_DIM {
            return Err(Error::Config(format!(
                "39-dimensional features need num_cepstra = {BASE_DIM}, got {}",
                self.config.num_cepstra
            )));
        }
        Ok(Mfcc39Stream {
            cepstra: self.cepstra_stream(),
            deltas: DeltaPipeline::new(self.config.delta_window),
        })
    }

    fn check_rate(&self, wave: &WaveRecord) -> Result<()> {
        if wave.sample_rate != self.config.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: self.config.sample_rate,
                found: wave.sample_rate,
            });
        }
        Ok(())
    }

    /// `T x num_cepstra` cepstral matrix for a whole utterance.
    pub fn mfcc(&self, wave: &WaveRecord) -> Result<FeatureMatrix> {
        self.check_rate(wave)?;
        let mut stream = self.cepstra_stream();
        let mut values = Vec::with_capacity(frame_count(wave.samples.len(), &self.config) * self.config.num_cepstra);
        stream.push(&wave.samples, &mut |row| values.extend_from_slice(row));
        self.finish_matrix(&wave.utt_id, self.config.num_cepstra, values)
    }

    /// `T x 39` features for a whole utterance via the streaming path.
    pub fn mfcc39(&self, wave: &WaveRecord) -> Result<FeatureMatrix> {
        self.check_rate(wave)?;
        let mut stream = self.mfcc39_stream()?;
        let mut values = Vec::with_capacity(frame_count(wave.samples.len(), &self.config) * FULL_DIM);
        stream.push(&wave.samples, &mut values);
        stream.finish(&mut values);
        self.finish_matrix(&wave.utt_id, FULL_DIM, values)
    }

    fn finish_matrix(&self, utt_id: &str, dim: usize, values: Vec<f32>) -> Result<FeatureMatrix> {
        let t = values.len() / dim;
        Ok(FeatureMatrix::new(utt_id, t, dim, values)?.with_frame_shift(self.config.frame_shift as f32))
    }
}

/// Frames incoming samples and emits one cepstral row per complete window.
/// Buffers at most one window plus the latest pushed chunk.
pub struct CepstraStream<'a> {
    ex: &'a MfccExtractor,
    pending: Vec<f32>,
    pending_start: usize,
    next_frame: usize,
    scratch: Scratch,
    row: Vec<f32>,
}

impl CepstraStream<'_> {
    pub fn push(&mut self, samples: &[f32], emit: &mut impl FnMut(&[f32])) {
        let len = self.ex.config.frame_length_samples();
        let shift = self.ex.config.frame_shift_samples();
        self.pending.extend_from_slice(samples);
        loop {
            let start = self.next_frame * shift;
            let local = start - self.pending_start;
            if local + len > self.pending.len() {
                break;
            }
            self.ex
                .cepstra_into(&self.pending[local..local + len], &mut self.scratch, &mut self.row);
            emit(&self.row);
            self.next_frame += 1;
        }
        let keep_from = (self.next_frame * shift - self.pending_start).min(self.pending.len());
        self.pending.drain(..keep_from);
        self.pending_start += keep_from;
    }

    pub fn frames_emitted(&self) -> usize {
        self.next_frame
    }
}

pub struct Mfcc39Stream<'a> {
    cepstra: CepstraStream<'a>,
    deltas: DeltaPipeline,
}

impl Mfcc39Stream<'_> {
    /// Appends every 39-dim row that became complete to `out`.
    pub fn push(&mut self, samples: &[f32], out: &mut Vec<f32>) {
        let deltas = &mut self.deltas;
        self.cepstra.push(samples, &mut |row| deltas.push(row, out));
    }

    /// Flushes rows held back by the delta look-ahead.
    pub fn finish(&mut self, out: &mut Vec<f32>) {
        self.deltas.finish(out);
    }
}

/// One-shot 39-dimensional MFCC (13 cepstra + deltas + delta-deltas).
pub fn extract_mfcc39(wave: &WaveRecord, config: &MfccConfig) -> Result<FeatureMatrix> {
    MfccExtractor::new(config.clone())?.mfcc39(wave)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::add_deltas;

    fn wave(samples: Vec<f32>) -> WaveRecord {
        WaveRecord::new("w", 16_000, samples).unwrap()
    }

    fn sine(n: usize, hz: f64, amp: f64) -> Vec<f32> {
        (0..n)
            .map(|i| (amp * (2.0 * PI * hz * i as f64 / 16_000.0).sin()) as f32)
            .collect()
    }

    #[test]
    fn frame_count_edges() {
        let c = MfccConfig::default();
        assert_eq!(frame_count(400, &c), 1);
        assert_eq!(frame_count(399, &c), 0);
        assert_eq!(frame_count(16_000, &c), 98);
        assert_eq!(frame_count(0, &c), 0);
    }

    #[test]
    fn dct_is_orthonormal() {
        for n in [13usize, 23, 40] {
            let m = dct_matrix(n, n);
            for i in 0..n {
                for j in 0..n {
                    let dot: f64 = (0..n).map(|k| m[i * n + k] * m[j * n + k]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-6, "n={n} ({i},{j}) = {dot}");
                }
            }
        }
    }

    #[test]
    fn zero_signal_closed_form() {
        let c = MfccConfig::default();
        let m = MfccExtractor::new(c.clone()).unwrap().mfcc(&wave(vec![0.0; 1600])).unwrap();
        assert_eq!(m.num_frames, frame_count(1600, &c));
        let c0 = (c.num_mel_bins as f64).sqrt() * c.log_floor.ln();
        for row in m.rows() {
            assert!((row[0] as f64 - c0).abs() < 1e-5);
            assert!(row[1..].iter().all(|&v| v == 0.0), "{row:?}");
        }
    }

    #[test]
    fn deterministic_bitwise() {
        let ex = MfccExtractor::new(MfccConfig::default()).unwrap();
        let w = wave(sine(8000, 300.0, 0.4));
        let a = ex.mfcc39(&w).unwrap();
        let b = ex.mfcc39(&w).unwrap();
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn chunked_streaming_equals_one_shot() {
        let ex = MfccExtractor::new(MfccConfig::default()).unwrap();
        let samples = sine(12_345, 523.0, 0.3);
        let one = ex.mfcc39(&wave(samples.clone())).unwrap();
        for chunk in [1usize, 7, 160, 399, 1000] {
            let mut s = ex.mfcc39_stream().unwrap();
            let mut out = Vec::new();
            for c in samples.chunks(chunk) {
                s.push(c, &mut out);
            }
            s.finish(&mut out);
            assert_eq!(out, one.values, "chunk={chunk}");
        }
    }

    #[test]
    fn mfcc39_is_cepstra_plus_deltas() {
        let c = MfccConfig::default();
        let ex = MfccExtractor::new(c.clone()).unwrap();
        let w = wave(sine(5000, 700.0, 0.2));
        let base = ex.mfcc(&w).unwrap();
        let full = ex.mfcc39(&w).unwrap();
        assert_eq!(full, add_deltas(&base, c.delta_window).unwrap());
    }

    #[test]
    fn scaling_shifts_only_c0() {
        let c = MfccConfig::default();
        let ex = MfccExtractor::new(c.clone()).unwrap();
        let x = sine(4000, 440.0, 0.2);
        let x2: Vec<f32> = x.iter().map(|v| v * 2.0).collect();
        let a = ex.mfcc(&wave(x)).unwrap();
        let b = ex.mfcc(&wave(x2)).unwrap();
        let shift = (c.num_mel_bins as f64).sqrt() * (4.0f64).ln();
        for (ra, rb) in a.rows().zip(b.rows()) {
            assert!(((rb[0] - ra[0]) as f64 - shift).abs() < 1e-4);
            for k in 1..13 {
                assert!((rb[k] - ra[k]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn sample_rate_mismatch() {
        let ex = MfccExtractor::new(MfccConfig::default()).unwrap();
        let w = WaveRecord::new("w", 8000, vec![0.0; 800]).unwrap();
        assert!(matches!(ex.mfcc39(&w), Err(Error::SampleRateMismatch { expected: 16000, found: 8000 })));
    }

    #[test]
    fn short_input_yields_empty_matrix() {
        let ex = MfccExtractor::new(MfccConfig::default()).unwrap();
        let m = ex.mfcc39(&wave(vec![0.1; 399])).unwrap();
        assert_eq!((m.num_frames, m.dim), (0, 39));
    }
}
