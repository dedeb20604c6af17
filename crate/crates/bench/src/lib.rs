// SPDX-License-Identifier: Apache-2.0

//! Criterion benchmarks for the mulife toolchain; see `benches/throughput.rs`.
