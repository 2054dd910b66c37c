//! Byte-level FM-index over a document collection.
//!
//! The collection is laid out as `doc_0 0x00 doc_1 0x00 …` and the index is
//! built over the *reversed* layout. Backward search on the reversed text
//! extends a pattern to the right, so each decoding step is a single
//! interval refinement.

use std::collections::BTreeMap;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::suffix::suffix_array;
use crate::io_util::write_atomic;
use crate::{Error, Result};

pub const SEPARATOR: u8 = 0x00;
const TERMINATOR: u16 = 0;
const OCC_STEP: usize = 64;
pub const DEFAULT_SA_SAMPLE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occurrence {
    pub doc: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FMIndex {
    doc_ids: Vec<String>,
    /// Forward start of each document in the layout.
    doc_starts: Vec<usize>,
    /// Length of the layout without the terminator.
    text_len: usize,
    /// symbol (0 = terminator, byte b = b + 1) -> dense code, u16::MAX if absent
    dense: Vec<u16>,
    symbols: Vec<u16>,
    /// `c[code]` = number of symbols smaller than `code`.
    c: Vec<u64>,
    bwt: Vec<u16>,
    checkpoints: Vec<u32>,
    sample_rate: usize,
    marked: Vec<u64>,
    marked_rank: Vec<u32>,
    samples: Vec<u32>,
}

impl FMIndex {
    /// Builds over `(doc_id, bytes)` pairs in order.
    pub fn build<I, S, B>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, B)>,
        S: Into<String>,
        B: AsRef<[u8]>,
    {
        Self::build_with_sampling(docs, DEFAULT_SA_SAMPLE)
    }

    pub fn build_with_sampling<I, S, B>(docs: I, sample_rate: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (S, B)>,
        S: Into<String>,
        B: AsRef<[u8]>,
    {
        if sample_rate == 0 {
            return Err(Error::invalid("suffix array sample rate must be positive"));
        }
        let mut doc_ids = Vec::new();
        let mut doc_starts = Vec::new();
        let mut text = Vec::new();
        for (id, bytes) in docs {
            let id = id.into();
            let bytes = bytes.as_ref();
            if bytes.contains(&SEPARATOR) {
                return Err(Error::SentinelInText { doc: id });
            }
            doc_starts.push(text.len());
            doc_ids.push(id);
            text.extend_from_slice(bytes);
            text.push(SEPARATOR);
        }
        if doc_ids.is_empty() {
            return Err(Error::invalid("cannot index an empty collection"));
        }
        let text_len = text.len();

        let mut present = [false; 257];
        present[TERMINATOR as usize] = true;
        for &b in &text {
            present[b as usize + 1] = true;
        }
        let symbols: Vec<u16> = (0..257u16).filter(|&s| present[s as usize]).collect();
        let mut dense = vec![u16::MAX; 257];
        for (code, &s) in symbols.iter().enumerate() {
            dense[s as usize] = code as u16;
        }

        let reversed: Vec<u32> = text
            .iter()
            .rev()
            .map(|&b| u32::from(dense[b as usize + 1]))
            .chain([u32::from(dense[TERMINATOR as usize])])
            .collect();
        let sa = suffix_array(&reversed, symbols.len());
        let n = reversed.len();
        let bwt: Vec<u16> = sa
            .iter()
            .map(|&p| reversed[if p == 0 { n - 1 } else { p as usize - 1 }] as u16)
            .collect();

        let mut marked = vec![0u64; n.div_ceil(64)];
        let mut samples = Vec::new();
        for (row, &p) in sa.iter().enumerate() {
            if p as usize % sample_rate == 0 {
                marked[row / 64] |= 1 << (row % 64);
                samples.push(p);
            }
        }
        let mut index = FMIndex {
            doc_ids,
            doc_starts,
            text_len,
            dense,
            symbols,
            c: Vec::new(),
            bwt,
            checkpoints: Vec::new(),
            sample_rate,
            marked,
            marked_rank: Vec::new(),
            samples,
        };
        index.derive_tables();
        Ok(index)
    }

    fn derive_tables(&mut self) {
        let sigma = self.symbols.len();
        let n = self.bwt.len();
        let mut counts = vec![0u32; sigma];
        let mut checkpoints = Vec::with_capacity((n / OCC_STEP + 1) * sigma);
        for (row, &s) in self.bwt.iter().enumerate() {
            if row % OCC_STEP == 0 {
                checkpoints.extend_from_slice(&counts);
            }
            counts[s as usize] += 1;
        }
        if n % OCC_STEP == 0 {
            checkpoints.extend_from_slice(&counts);
        }
        let mut c = vec![0u64; sigma + 1];
        for code in 0..sigma {
            c[code + 1] = c[code] + u64::from(counts[code]);
        }
        let mut marked_rank = Vec::with_capacity(self.marked.len() + 1);
        let mut acc = 0u32;
        for w in &self.marked {
            marked_rank.push(acc);
            acc += w.count_ones();
        }
        marked_rank.push(acc);
        self.c = c;
        self.checkpoints = checkpoints;
        self.marked_rank = marked_rank;
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_id(&self, doc: usize) -> &str {
        &self.doc_ids[doc]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Length of the indexed layout including separators.
    pub fn text_len(&self) -> usize {
        self.text_len
    }

    fn sigma(&self) -> usize {
        self.symbols.len()
    }

    fn occ(&self, code: usize, row: usize) -> u64 {
        let block = row / OCC_STEP;
        let base = self.checkpoints[block * self.sigma() + code];
        let extra = self.bwt[block * OCC_STEP..row].iter().filter(|&&s| s as usize == code).count();
        u64::from(base) + extra as u64
    }

    /// Occurrence counts of every symbol in `bwt[..row]`.
    fn occ_all(&self, row: usize) -> Vec<u64> {
        let block = row / OCC_STEP;
        let sigma = self.sigma();
        let mut out: Vec<u64> = self.checkpoints[block * sigma..(block + 1) * sigma]
            .iter()
            .map(|&x| u64::from(x))
            .collect();
        for &s in &self.bwt[block * OCC_STEP..row] {
            out[s as usize] += 1;
        }
        out
    }

    fn code_of_byte(&self, b: u8) -> Option<usize> {
        match self.dense[b as usize + 1] {
            u16::MAX => None,
            c => Some(c as usize),
        }
    }

    fn full_range(&self) -> (u64, u64) {
        (0, self.bwt.len() as u64)
    }

    fn step(&self, (lo, hi): (u64, u64), code: usize) -> (u64, u64) {
        let base = self.c[code];
        (base + self.occ(code, lo as usize), base + self.occ(code, hi as usize))
    }

    /// Suffix-array interval of the reversed pattern, i.e. all rows whose
    /// suffix in the reversed layout starts with `pattern` read backwards.
    fn interval(&self, pattern: &[u8]) -> (u64, u64) {
        let mut range = self.full_range();
        for &b in pattern {
            let Some(code) = self.code_of_byte(b) else {
                return (0, 0);
            };
            range = self.step(range, code);
            if range.0 >= range.1 {
                return (0, 0);
            }
        }
        range
    }

    fn check_pattern(pattern: &[u8]) -> Result<()> {
        if pattern.is_empty() {
            return Err(Error::EmptyPattern);
        }
        if pattern.contains(&SEPARATOR) {
            return Err(Error::invalid("pattern contains the document separator"));
        }
        Ok(())
    }

    /// Number of (possibly overlapping) occurrences of `pattern`.
    pub fn count(&self, pattern: &[u8]) -> Result<u64> {
        Self::check_pattern(pattern)?;
        let (lo, hi) = self.interval(pattern);
        Ok(hi - lo)
    }

    /// Up to `limit` occurrences, sorted by position.
    pub fn locate(&self, pattern: &[u8], limit: usize) -> Result<Vec<Occurrence>> {
        Self::check_pattern(pattern)?;
        let (lo, hi) = self.interval(pattern);
        let mut out: Vec<Occurrence> = (lo..hi)
            .take(limit)
            .map(|row| {
                let r = self.resolve(row as usize);
                let forward = self.text_len - r - pattern.len();
                let doc = self.doc_starts.partition_point(|&s| s <= forward) - 1;
                Occurrence {
                    doc,
                    offset: forward - self.doc_starts[doc],
                }
            })
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    fn is_marked(&self, row: usize) -> bool {
        self.marked[row / 64] >> (row % 64) & 1 == 1
    }

    fn sample_at(&self, row: usize) -> u32 {
        let w = self.marked[row / 64] & ((1u64 << (row % 64)) - 1);
        self.samples[(self.marked_rank[row / 64] + w.count_ones()) as usize]
    }

    /// Position in the reversed layout of the suffix at `row`.
    fn resolve(&self, mut row: usize) -> usize {
        let mut steps = 0;
        while !self.is_marked(row) {
            let code = self.bwt[row] as usize;
            row = (self.c[code] + self.occ(code, row)) as usize;
            steps += 1;
        }
        self.sample_at(row) as usize + steps
    }

    /// Every byte `s` with `count(pattern · s) > 0`, mapped to that count.
    /// The empty pattern is the root and yields all bytes present.
    pub fn allowed_extensions(&self, pattern: &[u8]) -> BTreeMap<u8, u64> {
        let mut out = BTreeMap::new();
        if pattern.contains(&SEPARATOR) {
            return out;
        }
        let (lo, hi) = self.interval(pattern);
        if lo >= hi {
            return out;
        }
        let (olo, ohi) = (self.occ_all(lo as usize), self.occ_all(hi as usize));
        for (code, &sym) in self.symbols.iter().enumerate() {
            if sym == TERMINATOR || sym == u16::from(SEPARATOR) + 1 {
                continue;
            }
            let n = ohi[code] - olo[code];
            if n > 0 {
                out.insert((sym - 1) as u8, n);
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.write_u32::<LE>(VERSION).unwrap();
        b.write_u64::<LE>(self.doc_ids.len() as u64).unwrap();
        for (id, &start) in self.doc_ids.iter().zip(&self.doc_starts) {
            b.write_u32::<LE>(id.len() as u32).unwrap();
            b.extend_from_slice(id.as_bytes());
            b.write_u64::<LE>(start as u64).unwrap();
        }
        b.write_u64::<LE>(self.text_len as u64).unwrap();
        b.write_u32::<LE>(self.sample_rate as u32).unwrap();
        b.write_u16::<LE>(self.symbols.len() as u16).unwrap();
        for &s in &self.symbols {
            b.write_u16::<LE>(s).unwrap();
        }
        b.write_u64::<LE>(self.bwt.len() as u64).unwrap();
        for &s in &self.bwt {
            b.write_u16::<LE>(s).unwrap();
        }
        for &w in &self.marked {
            b.write_u64::<LE>(w).unwrap();
        }
        b.write_u64::<LE>(self.samples.len() as u64).unwrap();
        for &s in &self.samples {
            b.write_u32::<LE>(s).unwrap();
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("fm-index: {m}"));
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = r.read_u32::<LE>()?;
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let n_docs = r.read_u64::<LE>()? as usize;
        let mut doc_ids = Vec::with_capacity(n_docs);
        let mut doc_starts = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            let len = r.read_u32::<LE>()? as usize;
            let mut id = vec![0u8; len];
            r.read_exact(&mut id)?;
            doc_ids.push(String::from_utf8(id).map_err(|_| bad("doc id is not utf-8"))?);
            doc_starts.push(r.read_u64::<LE>()? as usize);
        }
        let text_len = r.read_u64::<LE>()? as usize;
        let sample_rate = r.read_u32::<LE>()? as usize;
        let sigma = r.read_u16::<LE>()? as usize;
        let mut symbols = Vec::with_capacity(sigma);
        for _ in 0..sigma {
            symbols.push(r.read_u16::<LE>()?);
        }
        let n = r.read_u64::<LE>()? as usize;
        if n != text_len + 1 || sample_rate == 0 {
            return Err(bad("inconsistent lengths"));
        }
        let mut bwt = Vec::with_capacity(n);
        for _ in 0..n {
            let s = r.read_u16::<LE>()?;
            if s as usize >= sigma {
                return Err(bad("symbol out of range"));
            }
            bwt.push(s);
        }
        let mut marked = Vec::with_capacity(n.div_ceil(64));
        for _ in 0..n.div_ceil(64) {
            marked.push(r.read_u64::<LE>()?);
        }
        let n_samples = r.read_u64::<LE>()? as usize;
        let mut samples = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            samples.push(r.read_u32::<LE>()?);
        }
        let mut dense = vec![u16::MAX; 257];
        for (code, &s) in symbols.iter().enumerate() {
            if s as usize >= 257 {
                return Err(bad("symbol out of range"));
            }
            dense[s as usize] = code as u16;
        }
        let mut index = FMIndex {
            doc_ids,
            doc_starts,
            text_len,
            dense,
            symbols,
            c: Vec::new(),
            bwt,
            checkpoints: Vec::new(),
            sample_rate,
            marked,
            marked_rank: Vec::new(),
            samples,
        };
        index.derive_tables();
        if *index.marked_rank.last().unwrap() as usize != index.samples.len() {
            return Err(bad("sample count does not match marks"));
        }
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

const MAGIC: &[u8; 8] = b"DGRFMIX\0";
const VERSION: u32 = 1;
