//! Orthonormal 8x8 DCT-II and its inverse.

use std::f64::consts::PI;
use std::sync::OnceLock;

pub type Block = [[f64; 8]; 8];

/// `basis[k][n] = a(k) * cos((2n + 1) k pi / 16)` with `a(0) = sqrt(1/8)`
/// and `a(k) = 1/2` otherwise.
fn basis() -> &'static Block {
    static BASIS: OnceLock<Block> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (k, row) in m.iter_mut().enumerate() {
            let a = if k == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
            for (n, v) in row.iter_mut().enumerate() {
                *v = a * (((2 * n + 1) * k) as f64 * PI / 16.0).cos();
            }
        }
        m
    })
}

pub fn dct8x8(block: &Block) -> Block {
    let c = basis();
    // rows then columns: out = C * B * C^T
    let mut tmp = [[0.0; 8]; 8];
    for i in 0..8 {
        for v in 0..8 {
            tmp[i][v] = (0..8).map(|j| block[i][j] * c[v][j]).sum();
        }
    }
    let mut out = [[0.0; 8]; 8];
    for u in 0..8 {
        for v in 0..8 {
            out[u][v] = (0..8).map(|i| c[u][i] * tmp[i][v]).sum();
        }
    }
    out
}

pub fn idct8x8(coeffs: &Block) -> Block {
    let c = basis();
    // out = C^T * Y * C
    let mut tmp = [[0.0; 8]; 8];
    for u in 0..8 {
        for j in 0..8 {
            tmp[u][j] = (0..8).map(|v| coeffs[u][v] * c[v][j]).sum();
        }
    }
    let mut out = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            out[i][j] = (0..8).map(|u| c[u][i] * tmp[u][j]).sum();
        }
    }
    out
}

/// Zigzag scan positions as (row, col), lowest frequency first.
pub fn zigzag() -> &'static [(usize, usize); 64] {
    static ORDER: OnceLock<[(usize, usize); 64]> = OnceLock::new();
    ORDER.get_or_init(|| {
        let mut order = [(0, 0); 64];
        let mut i = 0;
        for s in 0..15usize {
            let cells: Vec<(usize, usize)> = (0..=s).filter(|&r| r < 8 && s - r < 8).map(|r| (r, s - r)).collect();
            let iter: Box<dyn Iterator<Item = _>> = if s % 2 == 0 { Box::new(cells.into_iter().rev()) } else { Box::new(cells.into_iter()) };
            for cell in iter {
                order[i] = cell;
                i += 1;
            }
        }
        order
    })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct double sum, independent of the separable implementation.
    fn reference_dct(b: &Block) -> Block {
        let a = |k: usize| if k == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
        let mut out = [[0.0; 8]; 8];
        for u in 0..8 {
            for v in 0..8 {
                let mut s = 0.0;
                for i in 0..8 {
                    for j in 0..8 {
                        s += b[i][j]
                            * (((2 * i + 1) * u) as f64 * PI / 16.0).cos()
                            * (((2 * j + 1) * v) as f64 * PI / 16.0).cos();
                    }
                }
                out[u][v] = a(u) * a(v) * s;
            }
        }
        out
    }

    #[test]
    fn constant_block() {
        let out = dct8x8(&[[100.0; 8]; 8]);
        assert!((out[0][0] - 800.0).abs() < 1e-9);
        for u in 0..8 {
            for v in 0..8 {
                if (u, v) != (0, 0) {
                    assert!(out[u][v].abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn zero_block() {
        assert_eq!(dct8x8(&[[0.0; 8]; 8]), [[0.0; 8]; 8]);
        assert_eq!(idct8x8(&[[0.0; 8]; 8]), [[0.0; 8]; 8]);
    }

    #[test]
    fn random_round_trip_and_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut b = [[0.0; 8]; 8];
            for row in b.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.gen_range(-300.0..300.0);
                }
            }
            let f = dct8x8(&b);
            let r = reference_dct(&b);
            let back = idct8x8(&f);
            for i in 0..8 {
                for j in 0..8 {
                    assert!((f[i][j] - r[i][j]).abs() < 1e-9);
                    assert!((back[i][j] - b[i][j]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn zigzag_is_a_permutation() {
        let z = zigzag();
        assert_eq!(&z[..6], &[(0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2)]);
        assert_eq!(z[63], (7, 7));
        let mut seen = [false; 64];
        for &(r, c) in z.iter() {
            seen[r * 8 + c] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
