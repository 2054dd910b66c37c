use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A window of a document's token sequence, `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub index: usize,
    pub start: usize,
    pub end: usize,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn tokens<'a, T>(&self, doc_tokens: &'a [T]) -> &'a [T] {
        &doc_tokens[self.start..self.end]
    }
}

/// Sliding-window chunking over `n_tokens` tokens.
///
/// Windows start at `0, stride, 2*stride, …` and the walk stops at the first
/// window that reaches the end of the document, so a trailing window is only
/// emitted when it covers tokens the previous one did not.
pub fn chunk_document(n_tokens: usize, window: usize, stride: usize) -> Result<Vec<Chunk>> {
    if window == 0 || stride == 0 || stride > window {
        return Err(Error::invalid(format!(
            "need window >= 1 and 1 <= stride <= window, got window={window} stride={stride}"
        )));
    }
    let mut chunks = Vec::new();
    if n_tokens == 0 {
        return Ok(chunks);
    }
    let mut start = 0;
    loop {
        let end = (start + window).min(n_tokens);
        chunks.push(Chunk {
            index: chunks.len(),
            start,
            end,
        });
        if end == n_tokens {
            break;
        }
        start += stride;
    }
    Ok(chunks)
}
