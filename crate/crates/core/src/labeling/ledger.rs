use std::io::{self, Write};
use std::sync::atomic::{AtomicU64, Ordering};

/// What a counted byte stream carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IoCategory {
    Labels,
    Index,
    Features,
    Other,
}

/// Running totals of bytes persisted per category. Shared by reference
/// between workers.
#[derive(Debug, Default)]
pub struct IoLedger {
    labels: AtomicU64,
    index: AtomicU64,
    features: AtomicU64,
    other: AtomicU64,
}

impl IoLedger {
    pub fn new() -> Self {
        Self::default()
    }

    fn slot(&self, c: IoCategory) -> &AtomicU64 {
        match c {
            IoCategory::Labels => &self.labels,
            IoCategory::Index => &self.index,
            IoCategory::Features => &self.features,
            IoCategory::Other => &self.other,
        }
    }

    pub fn record(&self, c: IoCategory, n: u64) {
        self.slot(c).fetch_add(n, Ordering::Relaxed);
    }

    pub fn bytes(&self, c: IoCategory) -> u64 {
        self.slot(c).load(Ordering::Relaxed)
    }

    pub fn total(&self) -> u64 {
        [IoCategory::Labels, IoCategory::Index, IoCategory::Features, IoCategory::Other]
            .into_iter()
            .map(|c| self.bytes(c))
            .sum()
    }

    pub fn counting<W: Write>(&self, inner: W, category: IoCategory) -> CountingWriter<'_, W> {
        CountingWriter {
            inner,
            ledger: self,
            category,
        }
    }
}

/// Forwards writes and books every accepted byte in an [`IoLedger`].
pub struct CountingWriter<'a, W> {
    inner: W,
    ledger: &'a IoLedger,
    category: IoCategory,
}

impl<W: Write> Write for CountingWriter<'_, W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.ledger.record(self.category, n as u64);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_by_category() {
        let ledger = IoLedger::new();
        let mut w = ledger.counting(Vec::new(), IoCategory::Labels);
        w.write_all(b"hello").unwrap();
        let mut f = ledger.counting(Vec::new(), IoCategory::Features);
        f.write_all(b"xy").unwrap();
        assert_eq!(ledger.bytes(IoCategory::Labels), 5);
        assert_eq!(ledger.bytes(IoCategory::Features), 2);
        assert_eq!(ledger.bytes(IoCategory::Index), 0);
        assert_eq!(ledger.total(), 7);
    }
}
