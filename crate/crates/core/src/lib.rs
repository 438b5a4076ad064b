//! Deterministic discrete-event simulation of LoRaWAN Class A/B networks,
//! together with link-layer attacks (wormholes, ADR spoofing, beacon drifting).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! parallel trial execution live in the `lorasim` companion crate.

#![no_std]

extern crate alloc;

pub mod attacker;
pub mod enddevice;
pub mod experiment;
pub mod frames;
pub mod netserver;
pub mod phy;
pub mod simkit;
pub mod world;

/// Virtual time and durations, in microseconds.
pub type Micros = u64;

pub const MICROS_PER_SECOND: Micros = 1_000_000;

pub const fn ms(v: u64) -> Micros {
    v * 1_000
}

pub const fn secs(v: u64) -> Micros {
    v * MICROS_PER_SECOND
}
