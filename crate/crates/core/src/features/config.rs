use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hamming,
    Hann,
}

impl WindowKind {
    fn name(self) -> &'static str {
        match self {
            WindowKind::Hamming => "hamming",
            WindowKind::Hann => "hann",
        }
    }
}

/// MFCC front-end parameters. Times are in seconds, frequencies in Hz.
///
/// Defaults: 25 ms frames every 10 ms, Hamming window, pre-emphasis 0.97,
/// 23 mel bins from 20 Hz to Nyquist, 13 cepstra with c0 kept, log floor
/// 1e-10, delta window of +/-2 frames, no dither.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub sample_rate: u32,
    pub frame_length: f64,
    pub frame_shift: f64,
    pub fft_size: usize,
    pub num_mel_bins: usize,
    pub num_cepstra: usize,
    pub low_freq: f64,
    pub high_freq: f64,
    pub log_floor: f64,
    pub delta_window: usize,
    pub preemphasis: f64,
    pub window: WindowKind,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig::for_sample_rate(16_000)
    }
}

impl MfccConfig {
    pub fn for_sample_rate(sample_rate: u32) -> Self {
        let frame_length = 0.025;
        let frame_samples = (frame_length * sample_rate as f64).round() as usize;
        MfccConfig {
            sample_rate,
            frame_length,
            frame_shift: 0.010,
            fft_size: frame_samples.max(1).next_power_of_two(),
            num_mel_bins: 23,
            num_cepstra: 13,
            low_freq: 20.0,
            high_freq: sample_rate as f64 / 2.0,
            log_floor: 1e-10,
            delta_window: 2,
            preemphasis: 0.97,
            window: WindowKind::Hamming,
        }
    }

    pub fn frame_length_samples(&self) -> usize {
        (self.frame_length * self.sample_rate as f64).round() as usize
    }

    pub fn frame_shift_samples(&self) -> usize {
        (self.frame_shift * self.sample_rate as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        let len = self.frame_length_samples();
        let shift = self.frame_shift_samples();
        if len < 2 {
            return bad(format!("frame_length {} s is under two samples", self.frame_length));
        }
        if shift == 0 {
            return bad(format!("frame_shift {} s rounds to zero samples", self.frame_shift));
        }
        if self.frame_shift > self.frame_length {
            return bad("frame_shift must not exceed frame_length".into());
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < len {
            return bad(format!(
                "fft_size {} must be a power of two >= {len} frame samples",
                self.fft_size
            ));
        }
        if self.num_mel_bins == 0 || self.num_cepstra == 0 || self.num_cepstra > self.num_mel_bins {
            return bad(format!(
                "need 1 <= num_cepstra ({}) <= num_mel_bins ({})",
                self.num_cepstra, self.num_mel_bins
            ));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(0.0 <= self.low_freq && self.low_freq < self.high_freq && self.high_freq <= nyquist) {
            return bad(format!(
                "need 0 <= low_freq ({}) < high_freq ({}) <= nyquist ({nyquist})",
                self.low_freq, self.high_freq
            ));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return bad("log_floor must be positive and finite".into());
        }
        if self.delta_window == 0 {
            return bad("delta_window must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.preemphasis) {
            return bad("preemphasis must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// `key = value` lines, one per field, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "sample_rate = {}", self.sample_rate);
        let _ = writeln!(s, "frame_length = {}", self.frame_length);
        let _ = writeln!(s, "frame_shift = {}", self.frame_shift);
        let _ = writeln!(s, "fft_size = {}", self.fft_size);
        let _ = writeln!(s, "num_mel_bins = {}", self.num_mel_bins);
        let _ = writeln!(s, "num_cepstra = {}", self.num_cepstra);
        let _ = writeln!(s, "low_freq = {}", self.low_freq);
        let _ = writeln!(s, "high_freq = {}", self.high_freq);
        let _ = writeln!(s, "log_floor = {}", self.log_floor);
        let _ = writeln!(s, "delta_window = {}", self.delta_window);
        let _ = writeln!(s, "preemphasis = {}", self.preemphasis);
        let _ = writeln!(s, "window = {}", self.window.name());
        s
    }

    /// Parses `key = value` lines; `#` starts a comment. Keys not given take
    /// the defaults for the (possibly given) sample rate.
    pub fn from_text(text: &str) -> Result<Self> {
        let pairs = parse_key_values(text)?;
        Self::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub(crate) fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let pairs: BTreeMap<&str, &str> = pairs.into_iter().collect();
        let rate = match pairs.get("sample_rate") {
            Some(v) => parse_num(v, "sample_rate")?,
            None => 16_000,
        };
        let mut c = MfccConfig::for_sample_rate(rate);
        let mut fft_given = false;
        for (&k, &v) in &pairs {
            match k {
                "sample_rate" => {}
                "frame_length" => c.frame_length = parse_num(v, k)?,
                "frame_shift" => c.frame_shift = parse_num(v, k)?,
                "fft_size" => {
                    c.fft_size = parse_num(v, k)?;
                    fft_given = true;
                }
                "num_mel_bins" => c.num_mel_bins = parse_num(v, k)?,
                "num_cepstra" => c.num_cepstra = parse_num(v, k)?,
                "low_freq" => c.low_freq = parse_num(v, k)?,
                "high_freq" => c.high_freq = parse_num(v, k)?,
                "log_floor" => c.log_floor = parse_num(v, k)?,
                "delta_window" => c.delta_window = parse_num(v, k)?,
                "preemphasis" => c.preemphasis = parse_num(v, k)?,
                "window" => {
                    c.window = match v {
                        "hamming" => WindowKind::Hamming,
                        "hann" => WindowKind::Hann,
                        other => return Err(Error::Config(format!("unknown window {other:?}"))),
                    }
                }
                other => return Err(Error::Config(format!("unknown MFCC option {other:?}"))),
            }
        }
        if !fft_given {
            c.fft_size = c.frame_length_samples().max(1).next_power_of_two();
        }
        c.validate()?;
        Ok(c)
    }
}

pub(crate) fn parse_num<T: std::str::FromStr>(v: &str, key: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

/// Splits `key = value` lines, dropping blank lines and `#` comments.
pub(crate) fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = MfccConfig::default();
        c.validate().unwrap();
        assert_eq!(c.frame_length_samples(), 400);
        assert_eq!(c.frame_shift_samples(), 160);
        assert_eq!(c.fft_size, 512);
        assert_eq!(c.high_freq, 8000.0);
    }

    #[test]
    fn text_round_trip() {
        let mut c = MfccConfig::for_sample_rate(8000);
        c.log_floor = 1.2345e-9;
        c.window = WindowKind::Hann;
        assert_eq!(MfccConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn partial_text_uses_rate_defaults() {
        let c = MfccConfig::from_text("# 8k audio\nsample_rate = 8000\nnum_mel_bins=15\n").unwrap();
        assert_eq!(c.high_freq, 4000.0);
        assert_eq!(c.fft_size, 256);
        assert_eq!(c.num_mel_bins, 15);
    }

    #[test]
    fn invariants_enforced() {
        assert!(MfccConfig::from_text("frame_shift = 0.03").is_err());
        assert!(MfccConfig::from_text("num_cepstra = 30").is_err());
        assert!(MfccConfig::from_text("high_freq = 9000").is_err());
        assert!(MfccConfig::from_text("fft_size = 300").is_err());
        assert!(MfccConfig::from_text("bogus = 1").is_err());
    }
}
