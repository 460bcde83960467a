// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! Labeled seed derivation. Every random draw in the lab comes from a
//! generator seeded by `derive_seed(root, stage, ordinal)`, so a stage's
//! stream does not depend on how many draws other stages made or on the
//! order in which parallel work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type LabRng = ChaCha12Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// FNV-1a
fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn derive_seed(root: u64, label: &str, ordinal: u64) -> u64 {
    let a = splitmix64(root ^ label_hash(label));
    splitmix64(a ^ splitmix64(ordinal.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn seeded(seed: u64) -> LabRng {
    LabRng::seed_from_u64(seed)
}

pub fn stage_rng(root: u64, label: &str, ordinal: u64) -> LabRng {
    seeded(derive_seed(root, label, ordinal))
}
