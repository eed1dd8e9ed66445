//! Spectral characteristics of 1×1, 2×2 and 3×3 real kernels.
//!
//! Eigenvalues come from closed forms only (quadratic formula, Cardano /
//! trigonometric cubic). Degree ≤ 3 is where radicals suffice for every
//! matrix, which is why larger kernels are rejected rather than approximated.
//! [`oracle_roots`] is an independent iterative solver kept for validation.

mod oracle;

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

pub use oracle::{oracle_roots, DK_MAX_ITERATIONS};

pub type ComplexValue = Complex64;

/// Pre-scaling floor; keeps `K / s` finite for the all-zero kernel.
pub const SCALE_FLOOR: f64 = 1e-300;

/// Relative tolerance used to call an eigenvalue non-real and to check invariants.
pub const SPECTRAL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("unsupported kernel order {0}; closed forms exist only for n <= 3")]
    UnsupportedOrder(usize),
    #[error("kernel of order {n} needs {expected} entries, got {found}")]
    DimensionMismatch {
        n: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite kernel entry {value} at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize, value: f64 },
    #[error("polynomial degree {0} outside 1..=8")]
    UnsupportedDegree(usize),
    #[error("leading polynomial coefficient is zero")]
    ZeroLeadingCoefficient,
    #[error("Durand-Kerner did not converge in {iterations} iterations (last update {last_update:e})")]
    NoConvergence { iterations: usize, last_update: f64 },
}

/// Square real kernel of order 1, 2 or 3, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    n: usize,
    w: [f64; 9],
}

impl Kernel {
    pub fn new(n: usize, entries: &[f64]) -> Result<Self, SpectraError> {
        if !(1..=3).contains(&n) {
            return Err(SpectraError::UnsupportedOrder(n));
        }
        if entries.len() != n * n {
            return Err(SpectraError::DimensionMismatch {
                n,
                expected: n * n,
                found: entries.len(),
            });
        }
        let mut w = [0.0; 9];
        for (k, &v) in entries.iter().enumerate() {
            if !v.is_finite() {
                return Err(SpectraError::NonFiniteEntry {
                    row: k / n,
                    col: k % n,
                    value: v,
                });
            }
            w[k] = v;
        }
        Ok(Self { n, w })
    }

    pub fn from_rows<const N: usize>(rows: [[f64; N]; N]) -> Result<Self, SpectraError> {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(N, &flat)
    }

    pub fn diagonal(d: &[f64]) -> Result<Self, SpectraError> {
        let n = d.len();
        let mut e = vec![0.0; n * n];
        for (i, &v) in d.iter().enumerate() {
            e[i * n + i] = v;
        }
        Self::new(n, &e)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.w[..self.n * self.n]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    /// max |w_ij|
    pub fn max_abs(&self) -> f64 {
        self.entries().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pre-scaling factor `s = max(1e-300, max |w_ij|)`.
    pub fn scale(&self) -> f64 {
        self.max_abs().max(SCALE_FLOOR)
    }

    /// mean |w_ij|
    pub fn mean_abs(&self) -> f64 {
        self.entries().iter().map(|v| v.abs()).sum::<f64>() / (self.n * self.n) as f64
    }

    fn scaled(&self, s: f64) -> Kernel {
        let mut out = *self;
        for v in out.w.iter_mut() {
            *v /= s;
        }
        out
    }

    /// Explicitly formed Gramian `KᵀK`.
    pub fn gram(&self) -> Kernel {
        let n = self.n;
        let mut g = [0.0; 9];
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] = (0..n).map(|k| self.get(k, i) * self.get(k, j)).sum();
            }
        }
        Kernel { n, w: g }
    }
}

/// Coefficients of `λ³ − trace·λ² + minor_sum·λ − det` (lower orders: see [`characteristic_coeffs`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharPoly {
    pub trace: f64,
    pub minor_sum: f64,
    pub det: f64,
}

impl CharPoly {
    /// Coefficients, highest degree first, of the monic characteristic polynomial of order `n`.
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match n {
            1 => vec![1.0, -self.det],
            2 => vec![1.0, -self.trace, self.det],
            _ => vec![1.0, -self.trace, self.minor_sum, -self.det],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GershgorinDisk {
    pub center: f64,
    pub radius: f64,
}

impl GershgorinDisk {
    /// Signed distance by which `z` lies inside the disk (negative when outside).
    pub fn slack(&self, z: ComplexValue) -> f64 {
        self.radius - (z - Complex64::new(self.center, 0.0)).norm()
    }
}

/// Trace, sum of principal 2×2 minors, and determinant by cofactor expansion.
///
/// For n = 2 the minor sum is the determinant itself; for n = 1 it is 0 and
/// `trace == det == w`.
pub fn characteristic_coeffs(k: &Kernel) -> CharPoly {
    match k.n {
        1 => CharPoly {
            trace: k.w[0],
            minor_sum: 0.0,
            det: k.w[0],
        },
        2 => {
            let det = det2(&k.w);
            CharPoly {
                trace: k.w[0] + k.w[3],
                minor_sum: det,
                det,
            }
        }
        _ => CharPoly {
            trace: k.w[0] + k.w[4] + k.w[8],
            minor_sum: minor_sum3(&k.w),
            det: det3(&k.w),
        },
    }
}

/// Determinant by direct cofactor expansion.
pub fn determinant(k: &Kernel) -> f64 {
    match k.n {
        1 => k.w[0],
        2 => det2(&k.w),
        _ => det3(&k.w),
    }
}

#[inline]
fn det2(a: &[f64; 9]) -> f64 {
    a[0] * a[3] - a[1] * a[2]
}

#[inline]
fn det3(a: &[f64; 9]) -> f64 {
    a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
        + a[2] * (a[3] * a[7] - a[4] * a[6])
}

#[inline]
fn minor_sum3(a: &[f64; 9]) -> f64 {
    (a[0] * a[4] - a[1] * a[3]) + (a[0] * a[8] - a[2] * a[6]) + (a[4] * a[8] - a[5] * a[7])
}

/// Canonical eigenvalue order: modulus descending, then real part, then imaginary part (both descending).
pub fn canonical_order(a: &ComplexValue, b: &ComplexValue) -> Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

/// Eigenvalues in canonical order. Non-real values come in exact conjugate pairs.
pub fn eigenvalues(k: &Kernel) -> Vec<ComplexValue> {
    let mut ev = match k.n {
        1 => vec![Complex64::new(k.w[0], 0.0)],
        2 => eig2(k).to_vec(),
        _ => eig3(k).to_vec(),
    };
    ev.sort_by(canonical_order);
    ev
}

fn eig2(k: &Kernel) -> [ComplexValue; 2] {
    let s = k.scale();
    let a = k.scaled(s).w;
    let half_tr = 0.5 * (a[0] + a[3]);
    let half_diff = 0.5 * (a[0] - a[3]);
    let disc = half_diff * half_diff + a[1] * a[2];
    if disc >= 0.0 {
        let r = disc.sqrt();
        // larger-magnitude root first, the other via the product to avoid cancellation
        let big = half_tr + half_tr.signum() * r;
        let small = if big != 0.0 { det2(&a) / big } else { 0.0 };
        [
            Complex64::new(big * s, 0.0),
            Complex64::new(small * s, 0.0),
        ]
    } else {
        let im = (-disc).sqrt();
        [
            Complex64::new(half_tr * s, im * s),
            Complex64::new(half_tr * s, -im * s),
        ]
    }
}

fn eig3(k: &Kernel) -> [ComplexValue; 3] {
    let s = k.scale();
    let a = k.scaled(s).w;
    let shift = (a[0] + a[4] + a[8]) / 3.0;
    let mut b = a;
    b[0] -= shift;
    b[4] -= shift;
    b[8] -= shift;
    // t³ + p t + q for the traceless matrix B = A − (tr/3) I
    let p = minor_sum3(&b);
    let q = -det3(&b);
    let roots = depressed_cubic_roots(p, q);

    let trace = a[0] + a[4] + a[8];
    let minor = minor_sum3(&a);
    let det = det3(&a);
    roots.map(|t| {
        let lambda = t + shift;
        if t.im == 0.0 {
            Complex64::new(polish_real(lambda.re, trace, minor, det) * s, 0.0)
        } else {
            lambda * s
        }
    })
}

/// Roots of `t³ + p t + q`.
///
/// The discriminant `(q/2)² + (p/3)³` is compared against `1e-14 · σ³`,
/// where `σ = max(|p|/3, |q/2|^(2/3))` is the squared root scale; inside that
/// band the cubic is treated as having a double root and solved with the
/// real repeated-root formulas.
fn depressed_cubic_roots(p: f64, q: f64) -> [ComplexValue; 3] {
    let real = |x: f64| Complex64::new(x, 0.0);
    let sigma = (p.abs() / 3.0).max((q.abs() / 2.0).powf(2.0 / 3.0));
    if sigma == 0.0 {
        return [real(0.0); 3];
    }
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;
    let tol = 1e-14 * sigma * sigma * sigma;

    if disc.abs() <= tol {
        // |disc| small with σ > 0 forces p < 0, so the division is safe.
        let mut simple = 3.0 * q / p;
        for _ in 0..2 {
            let f = simple * simple * simple + p * simple + q;
            let df = 3.0 * simple * simple + p;
            if df == 0.0 {
                break;
            }
            let next = simple - f / df;
            if (next * next * next + p * next + q).abs() >= f.abs() {
                break;
            }
            simple = next;
        }
        let double = -0.5 * simple;
        [real(simple), real(double), real(double)]
    } else if disc > 0.0 {
        // One real root, one conjugate pair. Pick the sign that adds magnitudes.
        let sq = disc.sqrt();
        let u = (-half_q - half_q.signum() * sq).cbrt();
        let v = if u != 0.0 { -third_p / u } else { 0.0 };
        let t1 = if p > 0.0 {
            // u and v have opposite signs; u + v would cancel.
            -q / (u * u + v * v + third_p)
        } else {
            u + v
        };
        let re = -0.5 * t1;
        let im = 0.5 * 3f64.sqrt() * (u - v).abs();
        [real(t1), Complex64::new(re, im), Complex64::new(re, -im)]
    } else {
        // Three distinct real roots (p < 0 here).
        let r = (-third_p).sqrt();
        let cos3 = (-half_q / (r * r * r)).clamp(-1.0, 1.0);
        let phi = cos3.acos() / 3.0;
        [
            real(2.0 * r * phi.cos()),
            real(2.0 * r * (phi - 2.0 * PI / 3.0).cos()),
            real(2.0 * r * (phi + 2.0 * PI / 3.0).cos()),
        ]
    }
}

/// One guarded Newton step on `λ³ − tr λ² + m λ − det`; kept only if the residual drops.
fn polish_real(x: f64, trace: f64, minor: f64, det: f64) -> f64 {
    let f = |x: f64| ((x - trace) * x + minor) * x - det;
    let fx = f(x);
    let df = (3.0 * x - 2.0 * trace) * x + minor;
    if fx == 0.0 || df == 0.0 {
        return x;
    }
    let next = x - fx / df;
    if next.is_finite() && f(next).abs() < fx.abs() {
        next
    } else {
        x
    }
}

/// Eigenvalues of `KᵀK`, descending, clamped at 0.
pub fn gram_eigenvalues(k: &Kernel) -> Vec<f64> {
    let s = k.scale();
    let scaled = k.scaled(s);
    let mut ev = scaled_gram_eigenvalues(&scaled);
    for v in ev.iter_mut() {
        *v *= s * s;
    }
    ev
}

/// Largest singular value, `sqrt(max eig(KᵀK))`.
pub fn spectral_norm(k: &Kernel) -> f64 {
    let s = k.scale();
    let top = scaled_gram_eigenvalues(&k.scaled(s))[0];
    s * top.sqrt()
}

fn scaled_gram_eigenvalues(k: &Kernel) -> Vec<f64> {
    let g = k.gram().w;
    let mut ev = match k.n {
        1 => vec![g[0]],
        2 => {
            let mean = 0.5 * (g[0] + g[3]);
            let r = (0.5 * (g[0] - g[3])).hypot(g[1]);
            let big = mean + r;
            // det(KᵀK) = det(K)², which keeps the small eigenvalue accurate
            let d = det2(&k.w);
            let small = if big > 0.0 { d * d / big } else { 0.0 };
            vec![big, small]
        }
        _ => symmetric3_eigenvalues(&g).to_vec(),
    };
    for v in ev.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Trigonometric solver for a symmetric 3×3 matrix, applied to `(G − qI) / p`.
fn symmetric3_eigenvalues(g: &[f64; 9]) -> [f64; 3] {
    let q = (g[0] + g[4] + g[8]) / 3.0;
    let off = g[1] * g[1] + g[2] * g[2] + g[5] * g[5];
    let (d0, d1, d2) = (g[0] - q, g[4] - q, g[8] - q);
    let p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * off;
    if p2 == 0.0 {
        return [q; 3];
    }
    let p = (p2 / 6.0).sqrt();
    let mut b = *g;
    b[0] = d0;
    b[4] = d1;
    b[8] = d2;
    for v in b.iter_mut() {
        *v /= p;
    }
    let r = (0.5 * det3(&b)).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    [e1, e2, e3]
}

/// Row Gershgorin disks: center `w_ii`, radius `Σ_{j≠i} |w_ij|`.
pub fn gershgorin_disks(k: &Kernel) -> Vec<GershgorinDisk> {
    (0..k.n)
        .map(|i| GershgorinDisk {
            center: k.get(i, i),
            radius: (0..k.n)
                .filter(|&j| j != i)
                .map(|j| k.get(i, j).abs())
                .sum(),
        })
        .collect()
}

/// Everything the compression modes need about one kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSummary {
    pub n: usize,
    /// `max(1e-300, max |w_ij|)`
    pub scale: f64,
    pub eigenvalues: Vec<ComplexValue>,
    pub gram_eigenvalues: Vec<f64>,
    /// Cofactor expansion of `K`.
    pub determinant: f64,
    /// Cofactor expansion of the explicitly formed `KᵀK`.
    pub gram_determinant: f64,
    pub spectral_norm: f64,
    pub disks: Vec<GershgorinDisk>,
}

/// A broken spectral identity; always a bug in this module, never bad input.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("spectral invariant violated: {0}")]
pub struct InvariantViolation(pub String);

impl SpectralSummary {
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Whether `z` counts as non-real: `|im| > 1e-12 · scale`.
    pub fn is_complex(&self, z: &ComplexValue) -> bool {
        z.im.abs() > SPECTRAL_TOL * self.scale
    }

    pub fn complex_count(&self) -> usize {
        self.eigenvalues.iter().filter(|z| self.is_complex(z)).count()
    }

    /// Checks the identities every summary must satisfy.
    ///
    /// Determinant and trace agree with the eigenvalues to `1e-9` relative to
    /// the kernel scale (`s^n` and `n·s`); the norm/radius/Gershgorin
    /// inequalities hold up to `1e-12 · s`.
    pub fn check_invariants(&self, k: &Kernel) -> Result<(), InvariantViolation> {
        let s = self.scale;
        let slack = SPECTRAL_TOL * s;
        let fail = |m: String| Err(InvariantViolation(m));

        let im_sum: f64 = self.eigenvalues.iter().map(|z| z.im).sum();
        if im_sum.abs() > slack {
            return fail(format!("imaginary parts sum to {im_sum:e}"));
        }
        let product = self
            .eigenvalues
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, z| acc * z);
        let det_tol = 1e-9 * self.determinant.abs().max(s.powi(self.n as i32)).max(1e-300);
        if (product.re - self.determinant).abs() > det_tol || product.im.abs() > det_tol {
            return fail(format!(
                "eigenvalue product {product} vs determinant {:e}",
                self.determinant
            ));
        }
        let trace: f64 = (0..k.n).map(|i| k.get(i, i)).sum();
        let sum: Complex64 = self.eigenvalues.iter().sum();
        if (sum.re - trace).abs() > 1e-9 * (self.n as f64 * s) {
            return fail(format!("eigenvalue sum {sum} vs trace {trace:e}"));
        }
        let radius = self.spectral_radius();
        if self.spectral_norm + slack < radius {
            return fail(format!(
                "spectral norm {:e} below spectral radius {radius:e}",
                self.spectral_norm
            ));
        }
        if self.spectral_norm + slack < k.max_abs() {
            return fail(format!(
                "spectral norm {:e} below max |w| {:e}",
                self.spectral_norm,
                k.max_abs()
            ));
        }
        for z in &self.eigenvalues {
            let best = self
                .disks
                .iter()
                .map(|d| d.slack(*z))
                .fold(f64::NEG_INFINITY, f64::max);
            if best < -slack {
                return fail(format!("eigenvalue {z} outside every Gershgorin disk"));
            }
        }
        Ok(())
    }
}

pub fn summarize(k: &Kernel) -> SpectralSummary {
    let gram_eigenvalues = gram_eigenvalues(k);
    SpectralSummary {
        n: k.n,
        scale: k.scale(),
        eigenvalues: eigenvalues(k),
        spectral_norm: spectral_norm(k),
        gram_eigenvalues,
        determinant: determinant(k),
        gram_determinant: determinant(&k.gram()),
        disks: gershgorin_disks(k),
    }
}
