//! One-dimensional adaptive Gauss–Kronrod quadrature and series acceleration.
//!
//! Everything multidimensional in this crate is built by nesting the 1-D
//! integrator, so the error bookkeeping here is deliberately conservative:
//! the QUADPACK rescaling of `|K21 - G10|` is used for the per-panel estimate
//! and the global estimate is the sum over panels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A quadrature result together with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadValue {
    pub value: f64,
    pub abs_error: f64,
}

impl QuadValue {
    pub const ZERO: QuadValue = QuadValue {
        value: 0.0,
        abs_error: 0.0,
    };

    pub fn new(value: f64, abs_error: f64) -> Self {
        Self { value, abs_error }
    }

    pub fn exact(value: f64) -> Self {
        Self {
            value,
            abs_error: 0.0,
        }
    }

    pub fn scale(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            abs_error: self.abs_error * factor.abs(),
        }
    }
}

impl std::ops::Add for QuadValue {
    type Output = QuadValue;
    fn add(self, rhs: QuadValue) -> QuadValue {
        QuadValue {
            value: self.value + rhs.value,
            abs_error: self.abs_error + rhs.abs_error,
        }
    }
}

impl std::ops::Sub for QuadValue {
    type Output = QuadValue;
    fn sub(self, rhs: QuadValue) -> QuadValue {
        QuadValue {
            value: self.value - rhs.value,
            abs_error: self.abs_error + rhs.abs_error,
        }
    }
}

impl std::ops::AddAssign for QuadValue {
    fn add_assign(&mut self, rhs: QuadValue) {
        self.value += rhs.value;
        self.abs_error += rhs.abs_error;
    }
}

impl std::iter::Sum for QuadValue {
    fn sum<I: Iterator<Item = QuadValue>>(iter: I) -> Self {
        iter.fold(QuadValue::ZERO, |a, b| a + b)
    }
}

/// Stopping rule for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self {
            abs: 0.0,
            rel,
            max_panels: 2000,
        }
    }

    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }

    pub fn with_max_panels(mut self, max_panels: usize) -> Self {
        self.max_panels = max_panels;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::relative(1e-10)
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Single 21-point Kronrod panel on `[a, b]`.
pub fn gk21<F>(f: &mut F, a: f64, b: f64) -> Result<QuadValue>
where
    F: FnMut(f64) -> Result<f64>,
{
    Ok(gk21_with_magnitude(f, a, b)?.0)
}

/// Kronrod panel plus the integral of `|f|` (used for the roundoff floor).
fn gk21_with_magnitude<F>(f: &mut F, a: f64, b: f64) -> Result<(QuadValue, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut resabs = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = kronrod * 0.5;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    if !value.is_finite() {
        return Err(Error::NonFinite("integrand"));
    }
    Ok((QuadValue::new(value, err), resabs))
}

struct Panel {
    a: f64,
    b: f64,
    result: QuadValue,
    magnitude: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.result.abs_error == other.result.abs_error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.result
            .abs_error
            .partial_cmp(&other.result.abs_error)
            .unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive integration of a fallible integrand over `[a, b]`.
///
/// Returns [`Error::Quadrature`] carrying the partial estimate when the panel
/// budget is exhausted before the tolerance is met.
pub fn try_integrate<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<QuadValue>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(QuadValue::ZERO);
    }
    let (first, first_mag) = gk21_with_magnitude(&mut f, a, b)?;
    let mut total = first;
    let mut magnitude = first_mag;
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        result: first,
        magnitude: first_mag,
    });
    // nothing below the rounding level of sum |f| can be resolved
    while total.abs_error > tol.target(total.value).max(100.0 * f64::EPSILON * magnitude) {
        if heap.len() >= tol.max_panels {
            return Err(Error::Quadrature {
                estimate: total.value,
                abs_error: total.abs_error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval exhausted at machine precision
            heap.push(worst);
            return Err(Error::Quadrature {
                estimate: total.value,
                abs_error: total.abs_error,
            });
        }
        let (left, left_mag) = gk21_with_magnitude(&mut f, worst.a, mid)?;
        let (right, right_mag) = gk21_with_magnitude(&mut f, mid, worst.b)?;
        total.value += left.value + right.value - worst.result.value;
        total.abs_error += left.abs_error + right.abs_error - worst.result.abs_error;
        magnitude += left_mag + right_mag - worst.magnitude;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            result: left,
            magnitude: left_mag,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            result: right,
            magnitude: right_mag,
        });
    }
    // recompute the sums to shed accumulated rounding from the running totals
    let value = heap.iter().map(|p| p.result.value).sum();
    let abs_error = heap.iter().map(|p| p.result.abs_error).sum();
    Ok(QuadValue { value, abs_error })
}

/// Infallible-integrand convenience wrapper around [`try_integrate`].
pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<QuadValue>
where
    F: FnMut(f64) -> f64,
{
    try_integrate(|x| Ok(f(x)), a, b, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((r.value - 0.0).abs() < 1e-13);
    }

    #[test]
    fn algebraic_endpoint_singularity() {
        let r = integrate(|x| x.powf(-0.5), 0.0, 1.0, Tolerance::relative(1e-10)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn oscillatory_integrand() {
        let r = integrate(|x| (50.0 * x).cos(), 0.0, 1.0, Tolerance::relative(1e-12)).unwrap();
        assert!((r.value - (50.0f64).sin() / 50.0).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_carries_estimate() {
        let tol = Tolerance::relative(1e-15).with_max_panels(3);
        match integrate(|x| (1.0 / x).sin(), 1e-3, 1.0, tol) {
            Err(Error::Quadrature { estimate, .. }) => assert!(estimate.is_finite()),
            other => panic!("expected quadrature failure, got {other:?}"),
        }
    }
}
