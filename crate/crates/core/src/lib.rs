// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! Leakage laboratory for OXT-style conjunctive searchable symmetric encryption.
//!
//! The crate simulates what an honest-but-curious server learns from a
//! conjunctive SSE deployment (access pattern, query equality, s-term volume,
//! s-term equality and s-term combination counts) and implements a three-stage
//! passive query-recovery attack against that leakage:
//!
//! 1. candidate pruning ([`attack::candiprun`]) keeps, per s-term keyword, only
//!    the conjunctions whose auxiliary query frequency clears `frac / rho`;
//! 2. s-term recovery ([`attack::srecover`]) matches observed s-term tokens to
//!    keywords with a maximum-likelihood linear assignment;
//! 3. full recovery ([`attack::fullrecover`]) matches every query token inside an
//!    s-term group to a pruned candidate conjunction with a quadratic
//!    assignment refined by iterative free-set re-solving.
//!
//! Everything here is pure computation over in-memory values and builds under
//! `no_std` with `alloc`. File formats, the experiment runner and the CLI live
//! in the `conjleak` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod assign;
pub mod attack;
pub mod auxknow;
pub mod bitset;
pub mod corpus;
pub mod error;
pub mod freqmodel;
pub mod metrics;
pub mod numeric;
pub mod observe;
pub mod querygen;
pub mod rng;
pub mod sse_sim;

pub use error::{Error, Result};
