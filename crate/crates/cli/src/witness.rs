//! Seeded random control batches for the static-support witness
//! experiment.
//!
//! PRNG contract (reproducible across implementations): a ChaCha8 stream
//! seeded with the config seed via `seed_from_u64`; each control draws
//! `pieces × n` raw `u64` words in row-major order (time piece, then
//! node), and each word maps to a uniform value through
//! `u = -A + 2A·((word >> 11) / 2^53)`.

use mobctrl_core::field::{Field, FieldTable};
use mobctrl_core::grid::SpatialGrid;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn uniform_from_word(word: u64, amplitude: f64) -> f64 {
    let unit = (word >> 11) as f64 / (1u64 << 53) as f64;
    -amplitude + 2.0 * amplitude * unit
}

/// Generate `count` piecewise-constant-in-time, nodewise-uniform controls
/// on `[0, t_final]`.
pub fn control_batch(
    grid: &SpatialGrid,
    t_final: f64,
    amplitude: f64,
    count: usize,
    pieces: usize,
    seed: u64,
) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pieces = pieces.max(1);
    let t_edges: Vec<f64> = (0..=pieces)
        .map(|k| t_final * k as f64 / pieces as f64)
        .collect();
    let nodes = grid.nodes();
    let span = grid.span();
    (0..count)
        .map(|_| {
            let values: Vec<Vec<f64>> = (0..pieces)
                .map(|_| {
                    (0..grid.n)
                        .map(|_| uniform_from_word(rng.next_u64(), amplitude))
                        .collect()
                })
                .collect();
            Field::table(
                FieldTable::new(t_edges.clone(), nodes.clone(), span, values)
                    .expect("witness control table is well-formed"),
            )
        })
        .collect()
}
