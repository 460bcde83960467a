// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! Fixed-width document bitsets used for intersection counting.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DocSet {
    words: Vec<u64>,
}

impl DocSet {
    pub fn empty(width: usize) -> Self {
        Self { words: vec![0; width.div_ceil(64)] }
    }

    pub fn full(width: usize) -> Self {
        let mut s = Self::empty(width);
        for i in 0..width {
            s.insert(i);
        }
        s
    }

    pub fn from_positions(width: usize, positions: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(width);
        for p in positions {
            s.insert(p);
        }
        s
    }

    #[inline]
    pub fn insert(&mut self, pos: usize) {
        self.words[pos / 64] |= 1u64 << (pos % 64);
    }

    #[inline]
    pub fn contains(&self, pos: usize) -> bool {
        self.words[pos / 64] & (1u64 << (pos % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersect_with(&mut self, other: &DocSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= *b;
        }
    }

    #[inline]
    pub fn intersection_len(&self, other: &DocSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Number of positions in `0..width` contained in neither set.
    pub fn neither_len(&self, other: &DocSet, width: usize) -> usize {
        width - self.len() - other.len() + self.intersection_len(other)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            core::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + bit)
            })
        })
    }
}
