use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use sha2::{Digest, Sha256};

use crate::Micros;

/// Event trace: every record feeds a running SHA-256; lines are only kept
/// when requested. One record per line: `time<TAB>node<TAB>kind<TAB>details`.
#[derive(Clone)]
pub struct Trace {
    hasher: Sha256,
    lines: Option<Vec<String>>,
    count: u64,
    buf: String,
}

impl Trace {
    pub fn new(keep_lines: bool) -> Self {
        Trace { hasher: Sha256::new(), lines: keep_lines.then(Vec::new), count: 0, buf: String::new() }
    }

    pub fn record(&mut self, time: Micros, node: &str, kind: &str, details: fmt::Arguments<'_>) {
        self.buf.clear();
        let _ = write!(self.buf, "{time}\t{node}\t{kind}\t{details}");
        self.hasher.update(self.buf.as_bytes());
        self.hasher.update(b"\n");
        self.count += 1;
        if let Some(lines) = &mut self.lines {
            lines.push(self.buf.clone());
        }
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn lines(&self) -> &[String] {
        self.lines.as_deref().unwrap_or(&[])
    }

    pub fn digest(&self) -> [u8; 32] {
        self.hasher.clone().finalize().into()
    }

    pub fn digest_hex(&self) -> String {
        let mut s = String::with_capacity(64);
        for b in self.digest() {
            let _ = write!(s, "{b:02x}");
        }
        s
    }
}
