//! SUPERB overall score: error rates enter as `100 - x`, everything else
//! (QbE already scaled by 100) as is, averaged over the ten columns.

use crate::error::{Error, Result};

pub const FIELD_NAMES: [&str; 10] = ["pr", "asr", "ks", "qbe", "ic", "sf_f1", "sf_cer", "asv", "sd", "er"];

/// Column is lower-is-better.
const IS_ERROR: [bool; 10] = [true, true, false, false, false, false, true, true, true, false];

/// One model's results, all on a 0-100 scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperbRow {
    pub pr: f64,
    pub asr: f64,
    pub ks: f64,
    pub qbe: f64,
    pub ic: f64,
    pub sf_f1: f64,
    pub sf_cer: f64,
    pub asv: f64,
    pub sd: f64,
    pub er: f64,
}

impl SuperbRow {
    pub fn from_array(v: [f64; 10]) -> Self {
        SuperbRow {
            pr: v[0],
            asr: v[1],
            ks: v[2],
            qbe: v[3],
            ic: v[4],
            sf_f1: v[5],
            sf_cer: v[6],
            asv: v[7],
            sd: v[8],
            er: v[9],
        }
    }

    pub fn to_array(&self) -> [f64; 10] {
        [
            self.pr, self.asr, self.ks, self.qbe, self.ic, self.sf_f1, self.sf_cer, self.asv, self.sd, self.er,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in FIELD_NAMES.iter().zip(self.to_array()) {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::OutOfRange(format!("{name} = {v} outside [0, 100]")));
            }
        }
        Ok(())
    }
}

/// Unrounded mean; see [`round1`] for the printed form.
pub fn superb_score(row: &SuperbRow) -> Result<f64> {
    row.validate()?;
    let sum: f64 = row
        .to_array()
        .iter()
        .zip(IS_ERROR)
        .map(|(&v, err)| if err { 100.0 - v } else { v })
        .sum();
    Ok(sum / 10.0)
}

pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Parses rows of ten comma- or whitespace-separated values in the order of
/// [`FIELD_NAMES`]. An optional leading label column is kept; a header line
/// starting with `pr` and `#` comments are skipped.
pub fn parse_rows(text: &str) -> Result<Vec<(Option<String>, SuperbRow)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|c| !c.is_empty())
            .collect();
        if cells.first().is_some_and(|c| c.eq_ignore_ascii_case("pr")) {
            continue;
        }
        let (label, nums) = match cells.len() {
            10 => (None, &cells[..]),
            11 => (Some(cells[0].to_string()), &cells[1..]),
            k => return Err(Error::Config(format!("line {}: expected 10 values, found {k}", n + 1))),
        };
        let mut v = [0.0; 10];
        for (slot, c) in v.iter_mut().zip(nums) {
            *slot = c
                .parse()
                .map_err(|_| Error::Config(format!("line {}: bad number {c:?}", n + 1)))?;
        }
        out.push((label, SuperbRow::from_array(v)));
    }
    Ok(out)
}
