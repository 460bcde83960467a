// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! File formats, experiment configuration and the simulate → attack → score
//! runner behind the `conjleak` command.

pub mod config;
pub mod formats;
pub mod instance;
pub mod runner;
