//! Solvers for the symmetric positive-definite five-point systems produced by
//! the weighted-least-squares smoother.

use serde::Serialize;

/// `(I + lambda * A)` on a `width` x `height` grid, where `A` is a weighted
/// graph Laplacian over 4-neighbour edges (replicate boundary: no edges leave
/// the grid).
#[derive(Debug, Clone)]
pub struct FivePointSystem {
    width: usize,
    height: usize,
    diag: Vec<f64>,
    /// Coupling between `p` and `p + 1`; zero in the last column.
    east: Vec<f64>,
    /// Coupling between `p` and `p + width`; zero in the last row.
    south: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Identity,
    Direct,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveStats {
    pub method: SolveMethod,
    pub iterations: usize,
    /// `||b - M x|| / ||b||` of the returned solution.
    pub relative_residual: f64,
}

impl FivePointSystem {
    /// `east` and `south` hold the non-negative edge weights, already scaled
    /// by the smoothness factor.
    pub fn new(width: usize, height: usize, east: Vec<f64>, south: Vec<f64>) -> Self {
        let n = width * height;
        assert_eq!(east.len(), n);
        assert_eq!(south.len(), n);
        let mut diag = vec![1.0; n];
        for p in 0..n {
            diag[p] += east[p] + south[p];
            if p % width > 0 {
                diag[p] += east[p - 1];
            }
            if p >= width {
                diag[p] += south[p - width];
            }
        }
        Self {
            width,
            height,
            diag,
            east,
            south,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn east(&self) -> &[f64] {
        &self.east
    }

    pub fn south(&self) -> &[f64] {
        &self.south
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let w = self.width;
        for p in 0..self.len() {
            let mut v = self.diag[p] * x[p];
            if p % w + 1 < w {
                v -= self.east[p] * x[p + 1];
            }
            if p % w > 0 {
                v -= self.east[p - 1] * x[p - 1];
            }
            if p + w < self.len() {
                v -= self.south[p] * x[p + w];
            }
            if p >= w {
                v -= self.south[p - w] * x[p - w];
            }
            out[p] = v;
        }
    }

    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.len()];
        self.apply(x, &mut ax);
        let r: f64 = ax.iter().zip(b).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
        let nb = norm(b);
        if nb == 0.0 {
            r
        } else {
            r / nb
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned conjugate gradient started from `b`.
///
/// On success the true residual (recomputed from scratch) satisfies the
/// tolerance. On failure returns the iteration count and the last true
/// relative residual.
pub fn conjugate_gradient(
    system: &FivePointSystem,
    b: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, SolveStats), (usize, f64)> {
    let n = system.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        let stats = SolveStats {
            method: SolveMethod::ConjugateGradient,
            iterations: 0,
            relative_residual: 0.0,
        };
        return Ok((vec![0.0; n], stats));
    }
    let inv_diag: Vec<f64> = system.diag.iter().map(|d| 1.0 / d).collect();
    let mut x = b.to_vec();
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];

    let restart = |x: &[f64], r: &mut [f64], z: &mut [f64], p: &mut [f64], ap: &mut [f64]| -> (f64, f64) {
        system.apply(x, ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
            z[i] = r[i] * inv_diag[i];
            p[i] = z[i];
        }
        (dot(r, z), norm(r) / b_norm)
    };

    let (mut rz, mut rel) = restart(&x, &mut r, &mut z, &mut p, &mut ap);
    let mut iterations = 0;
    while iterations < max_iterations {
        if rel <= tolerance {
            // Guard against drift of the recurrence residual.
            let true_rel = system.relative_residual(&x, b);
            if true_rel <= tolerance {
                let stats = SolveStats {
                    method: SolveMethod::ConjugateGradient,
                    iterations,
                    relative_residual: true_rel,
                };
                return Ok((x, stats));
            }
            (rz, rel) = restart(&x, &mut r, &mut z, &mut p, &mut ap);
            if rel <= tolerance {
                continue;
            }
        }
        system.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rel = norm(&r) / b_norm;
        iterations += 1;
    }
    let true_rel = system.relative_residual(&x, b);
    if true_rel <= tolerance {
        let stats = SolveStats {
            method: SolveMethod::ConjugateGradient,
            iterations,
            relative_residual: true_rel,
        };
        return Ok((x, stats));
    }
    Err((iterations, true_rel))
}

/// Exact solve by banded Cholesky factorization, bandwidth = grid width.
pub fn banded_cholesky(system: &FivePointSystem, b: &[f64]) -> (Vec<f64>, SolveStats) {
    let n = system.len();
    let bw = system.width.min(n.saturating_sub(1));
    let stride = bw + 1;
    // Row i stores L(i, i - bw ..= i) at offsets 0..=bw.
    let mut band = vec![0.0; n * stride];
    let at = |i: usize, j: usize| i * stride + (j + bw - i);
    let entry = |i: usize, j: usize| -> f64 {
        if i == j {
            system.diag[i]
        } else if i == j + 1 && j % system.width + 1 < system.width {
            -system.east[j]
        } else if i == j + system.width {
            -system.south[j]
        } else {
            0.0
        }
    };
    for i in 0..n {
        let lo = i.saturating_sub(bw);
        for j in lo..=i {
            let mut sum = entry(i, j);
            let k_lo = lo.max(j.saturating_sub(bw));
            for k in k_lo..j {
                sum -= band[at(i, k)] * band[at(j, k)];
            }
            if i == j {
                band[at(i, i)] = sum.sqrt();
            } else {
                band[at(i, j)] = sum / band[at(j, j)];
            }
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        let lo = i.saturating_sub(bw);
        let mut s = y[i];
        for k in lo..i {
            s -= band[at(i, k)] * y[k];
        }
        y[i] = s / band[at(i, i)];
    }
    for i in (0..n).rev() {
        let hi = (i + bw).min(n - 1);
        let mut s = y[i];
        for k in i + 1..=hi {
            s -= band[at(k, i)] * y[k];
        }
        y[i] = s / band[at(i, i)];
    }
    let relative_residual = system.relative_residual(&y, b);
    (
        y,
        SolveStats {
            method: SolveMethod::Direct,
            iterations: 0,
            relative_residual,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_system(w: usize, h: usize, seed: u64) -> (FivePointSystem, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = w * h;
        let east = (0..n).map(|p| if p % w + 1 < w { rng.random_range(0.0..50.0) } else { 0.0 }).collect();
        let south = (0..n).map(|p| if p + w < n { rng.random_range(0.0..50.0) } else { 0.0 }).collect();
        let b = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
        (FivePointSystem::new(w, h, east, south), b)
    }

    #[test]
    fn direct_and_cg_agree() {
        for (w, h) in [(1, 1), (1, 7), (7, 1), (5, 4), (13, 9)] {
            let (sys, b) = random_system(w, h, (w * 31 + h) as u64);
            let (xd, sd) = banded_cholesky(&sys, &b);
            assert!(sd.relative_residual < 1e-12, "{w}x{h}: {}", sd.relative_residual);
            let (xc, sc) = conjugate_gradient(&sys, &b, 1e-12, 10_000).unwrap();
            assert!(sc.relative_residual <= 1e-12);
            for (a, c) in xd.iter().zip(&xc) {
                assert!((a - c).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let (sys, b) = random_system(20, 20, 3);
        let err = conjugate_gradient(&sys, &b, 1e-14, 2).unwrap_err();
        assert_eq!(err.0, 2);
        assert!(err.1 > 1e-14);
    }

    #[test]
    fn zero_rhs() {
        let (sys, _) = random_system(4, 4, 1);
        let (x, stats) = conjugate_gradient(&sys, &[0.0; 16], 1e-6, 10).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
        assert_eq!(stats.iterations, 0);
    }
}
