//! Seeded, platform-independent random band-limited fields.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::spectral::{Grid, Rank, SpectralField};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Real zero-mean field whose modes satisfy `|k_i| <= band`, with standard
/// normal continuum amplitudes.
///
/// Draws depend only on the lattice vectors `k`, never on `N`, so the same
/// seed yields the same continuous field on every grid that resolves the
/// band.
pub fn random_field(grid: &Grid, rank: Rank, band: usize, seed: u64) -> SpectralField {
    random_field_with(grid, rank, band, &mut rng(seed))
}

pub fn random_field_with<R: Rng>(grid: &Grid, rank: Rank, band: usize, rng: &mut R) -> SpectralField {
    let dim = grid.dim();
    let band = band.min(grid.n() / 2 - 1) as i64;
    let nc = rank.components(dim);
    let scale = grid.n_modes() as f64;
    let mut f = SpectralField::zeros(grid, rank);
    for k in band_vectors(dim, band) {
        let idx = grid.index_of(k).expect("band fits the grid");
        let neg = grid.index_of([-k[0], -k[1], -k[2]]).expect("band fits the grid");
        for c in 0..nc {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = Complex64::new(re, im) * scale;
            f.set(c, idx, z);
            f.set(c, neg, z.conj());
        }
    }
    f
}

/// Lattice vectors in `[-band, band]^d` whose first nonzero entry is
/// positive, in lexicographic order.
pub(crate) fn band_vectors(dim: usize, band: i64) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    let range = || -band..=band;
    let third: Vec<i64> = if dim == 3 { range().collect() } else { vec![0] };
    for k0 in range() {
        for k1 in range() {
            for &k2 in &third {
                let k = [k0, k1, k2];
                if k.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0) {
                    out.push(k);
                }
            }
        }
    }
    out
}
