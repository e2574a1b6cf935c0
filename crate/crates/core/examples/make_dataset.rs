//! Writes a synthetic heart-disease CSV in the Cleveland layout to stdout.
//!
//!     cargo run -p medley-core --example make_dataset -- [rows] [seed] > data.csv
//!
//! The generator reproduces the dataset's shape — 13 clinical feature
//! columns, a 0-4 severity target, and a few "?" missing entries — so the
//! pipeline can run end to end without a download. Swap in the real
//! `processed.cleveland.data` file for actual results.

use medley_core::synthetic::cleveland_like_csv;

fn main() {
    let mut args = std::env::args().skip(1);
    let rows: usize = args
        .next()
        .map(|a| a.parse().expect("rows must be an integer"))
        .unwrap_or(303);
    let seed: u64 = args
        .next()
        .map(|a| a.parse().expect("seed must be an integer"))
        .unwrap_or(303);
    print!("{}", cleveland_like_csv(rows, seed));
}
