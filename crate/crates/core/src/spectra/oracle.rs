//! Durand–Kerner simultaneous root iteration, used only to cross-check the
//! closed-form eigenvalue path.

use num_complex::Complex64;

use super::{ComplexValue, SpectraError};

pub const DK_MAX_ITERATIONS: usize = 500;

/// All complex roots of `coeffs[0]·xᵈ + … + coeffs[d]` (highest degree first, `1 ≤ d ≤ 8`).
///
/// Starts from `R·(0.4 + 0.9i)^k` with `R` the Fujiwara root bound, iterates
/// until the largest update is below `1e-14·(1 + max |root|)`, and reports
/// [`SpectraError::NoConvergence`] after 500 sweeps.
pub fn oracle_roots(coeffs: &[f64]) -> Result<Vec<ComplexValue>, SpectraError> {
    let degree = coeffs.len().saturating_sub(1);
    if !(1..=8).contains(&degree) {
        return Err(SpectraError::UnsupportedDegree(degree));
    }
    let lead = coeffs[0];
    if lead == 0.0 {
        return Err(SpectraError::ZeroLeadingCoefficient);
    }
    let monic: Vec<Complex64> = coeffs
        .iter()
        .map(|&a| Complex64::new(a / lead, 0.0))
        .collect();
    let eval = |z: Complex64| monic.iter().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a);

    // Fujiwara bound: 2·max |a_k|^(1/k), last term halved.
    let mut bound: f64 = 0.0;
    for (k, a) in monic.iter().enumerate().skip(1) {
        let mut m = a.norm();
        if k == degree {
            m /= 2.0;
        }
        bound = bound.max(m.powf(1.0 / k as f64));
    }
    let radius = if bound > 0.0 { 2.0 * bound } else { 1.0 };

    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..degree).map(|k| seed.powu(k as u32) * radius).collect();

    let mut last_update = f64::INFINITY;
    for _ in 0..DK_MAX_ITERATIONS {
        let mut max_update: f64 = 0.0;
        for i in 0..degree {
            let zi = roots[i];
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, &zj) in roots.iter().enumerate() {
                if j != i {
                    denom *= zi - zj;
                }
            }
            if denom.norm() == 0.0 {
                // coincident iterates; nudge apart
                denom = Complex64::new(f64::EPSILON * (1.0 + zi.norm()), 0.0);
            }
            let delta = eval(zi) / denom;
            roots[i] = zi - delta;
            max_update = max_update.max(delta.norm());
        }
        last_update = max_update;
        let size = roots.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !max_update.is_finite() {
            break;
        }
        if max_update < 1e-14 * (1.0 + size) {
            return Ok(roots);
        }
    }
    Err(SpectraError::NoConvergence {
        iterations: DK_MAX_ITERATIONS,
        last_update,
    })
}
