//! Core pipeline for training and benchmarking computer-use agents as GUI
//! usability assessors.
//!
//! The crate is organised around the [`trace::Rollout`]: the harness records
//! one, [`nav`] scores its navigation quality, [`reward`] turns predicted
//! usability scores into calibrated rewards, [`export`] converts the selected
//! rollouts into supervised training windows and [`bench`] evaluates scores
//! against preference pairs.

pub mod action;
pub mod bench;
pub mod export;
pub mod harness;
pub mod hash;
pub mod nav;
pub mod principle;
pub mod reward;
pub mod trace;

pub use action::{Action, ActionRecord, ScrollDirection};
pub use hash::ScreenHash;
pub use principle::DefectPrinciple;
pub use trace::{Rollout, Screenshot, Step};

/// Hex-encoded SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    use std::fmt::Write as _;

    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}
