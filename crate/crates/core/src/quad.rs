//! One-dimensional quadrature helpers: fixed Gauss rules, composite rules on
//! graded partitions, and an adaptive driver used as an oracle for integrals
//! with endpoint singularities.

use crate::error::{Error, Result};

/// 5-point Gauss-Legendre nodes and weights on [-1, 1].
pub const GAUSS5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189),
    (-0.538_469_310_105_683, 0.478_628_670_499_366),
    (0.0, 0.568_888_888_888_889),
    (0.538_469_310_105_683, 0.478_628_670_499_366),
    (0.906_179_845_938_664, 0.236_926_885_056_189),
];

/// 10-point Gauss-Legendre nodes and weights on [-1, 1].
pub const GAUSS10: [(f64, f64); 10] = [
    (-0.973_906_528_517_172, 0.066_671_344_308_688),
    (-0.865_063_366_688_985, 0.149_451_349_150_581),
    (-0.679_409_568_299_024, 0.219_086_362_515_982),
    (-0.433_395_394_129_247, 0.269_266_719_309_996),
    (-0.148_874_338_981_631, 0.295_524_224_714_753),
    (0.148_874_338_981_631, 0.295_524_224_714_753),
    (0.433_395_394_129_247, 0.269_266_719_309_996),
    (0.679_409_568_299_024, 0.219_086_362_515_982),
    (0.865_063_366_688_985, 0.149_451_349_150_581),
    (0.973_906_528_517_172, 0.066_671_344_308_688),
];

pub fn gauss5<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GAUSS5
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

pub fn gauss10<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GAUSS10
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Adaptive quadrature by bisection, comparing 5- and 10-point Gauss values.
/// Intended for integrands with integrable endpoint singularities after the
/// caller has split the interval at interior kinks.
pub fn adaptive_gauss<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn recurse<F: Fn(f64) -> f64 + ?Sized>(
        f: &F,
        a: f64,
        b: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let coarse = gauss5(f, a, b);
        let fine = gauss10(f, a, b);
        // Relative floor: once the disagreement is at rounding level for this
        // piece, further bisection cannot improve it.
        let floor = 1e-14 * (fine.abs() + coarse.abs());
        if (fine - coarse).abs() <= tol.max(floor) || b - a < 1e-15 * (a.abs() + b.abs() + 1.0) {
            if !fine.is_finite() {
                return Err(Error::QuadratureFailure(format!(
                    "non-finite integrand on [{a}, {b}]"
                )));
            }
            return Ok(fine);
        }
        if depth == 0 {
            return Err(Error::QuadratureFailure(format!(
                "adaptive depth exhausted on [{a}, {b}], err {:e}",
                (fine - coarse).abs()
            )));
        }
        let mid = 0.5 * (a + b);
        Ok(recurse(f, a, mid, 0.5 * tol, depth - 1)?
            + recurse(f, mid, b, 0.5 * tol, depth - 1)?)
    }
    recurse(f, a, b, tol, 60)
}

/// A partition of [0, L] graded dyadically toward both endpoints with `n`
/// points (n odd gives a symmetric grid); the cosine map keeps the ratio of
/// adjacent cell widths bounded while clustering like k^2 near the ends.
pub fn graded_grid(length: f64, n: usize) -> Vec<f64> {
    let m = n - 1;
    (0..=m)
        .map(|k| {
            let xi = k as f64 / m as f64;
            length * 0.5 * (1.0 - (std::f64::consts::PI * xi).cos())
        })
        .collect()
}
