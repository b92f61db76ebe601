//! Check bodies shared by the per-suite test targets and the acceptance report.

#![allow(dead_code)]

pub mod invariants;
pub mod numerics;
pub mod oracles;
