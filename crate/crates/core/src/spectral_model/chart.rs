//! Warped polar coordinates on `R^N \ {0}`.
//!
//! With `u_j = sign(lambda_j) |lambda_j|^{H_j}` the anisotropic norm
//! `rho(0, lambda)` becomes the l1 norm of `u`. Writing `u = r * omega` with
//! `omega` on the unit l1 simplex (times a sign pattern) gives
//!
//! ```text
//! lambda_j = s_j omega_j^{1/H_j} r^{1/H_j},   d lambda = J(omega) r^{Q-1} dr d omega
//! ```
//!
//! with `J(omega) = prod_j omega_j^{1/H_j - 1} / H_j`. Every ray is therefore a
//! curve on which `rho(0, lambda) = r` exactly.

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::quadrature::{try_integrate, QuadValue, Tolerance};

use super::radial::Phase;

pub(crate) type Coords = SmallVec<[f64; 4]>;

#[derive(Debug, Clone)]
pub struct WarpedChart {
    hurst: Coords,
    pows: Coords,
    q: f64,
}

/// One ray of the chart: `lambda(r) = coef * r^pow` (component-wise).
#[derive(Debug, Clone)]
pub struct Ray {
    pub coef: Coords,
    /// Angular Jacobian `J(omega)`.
    pub jacobian: f64,
}

impl WarpedChart {
    pub fn new(hurst: &[f64]) -> Self {
        let pows: Coords = hurst.iter().map(|h| 1.0 / h).collect();
        let q = pows.iter().sum();
        Self {
            hurst: hurst.iter().copied().collect(),
            pows,
            q,
        }
    }

    pub fn dims(&self) -> usize {
        self.hurst.len()
    }

    pub fn q_exponent(&self) -> f64 {
        self.q
    }

    pub fn pows(&self) -> &[f64] {
        &self.pows
    }

    pub fn ray(&self, omega: &[f64], signs: &[f64]) -> Ray {
        let mut jacobian = 1.0;
        let coef = omega
            .iter()
            .zip(signs)
            .zip(&self.pows)
            .map(|((&w, &s), &p)| {
                jacobian *= p * w.powf(p - 1.0);
                s * w.powf(p)
            })
            .collect();
        Ray { coef, jacobian }
    }

    /// Point of the ray at radius `r`.
    pub fn point(&self, ray: &Ray, r: f64) -> Coords {
        ray.coef
            .iter()
            .zip(&self.pows)
            .map(|(c, p)| c * r.powf(*p))
            .collect()
    }

    /// `<h, lambda(r)>` along the ray.
    pub fn phase(&self, ray: &Ray, h: &[f64]) -> Phase {
        Phase::new(
            ray.coef
                .iter()
                .zip(h)
                .zip(&self.pows)
                .map(|((c, hj), p)| (c * hj, *p)),
        )
    }

    /// Smallest radius at which the ray leaves the cube `[-a, a]^N`.
    pub fn exit_radius(&self, ray: &Ray, a: f64) -> f64 {
        ray.coef
            .iter()
            .zip(&self.pows)
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, p)| (a / c.abs()).powf(1.0 / p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Integrate `f(ray)` over all directions.
    ///
    /// With `even = true` the integrand is assumed invariant under
    /// `lambda -> -lambda`, and only half of the sign patterns are visited.
    pub fn integrate<F>(&self, even: bool, tol: Tolerance, mut f: F) -> Result<QuadValue>
    where
        F: FnMut(&Ray) -> Result<QuadValue>,
    {
        let n = self.dims();
        if n > 3 {
            return Err(Error::UnsupportedDimension(n));
        }
        let patterns = sign_patterns(n, even);
        let factor = if even { 2.0 } else { 1.0 };
        let mut inner_rel: f64 = 0.0;
        let mut total = QuadValue::ZERO;
        for signs in &patterns {
            let mut eval = |omega: &[f64]| -> Result<f64> {
                let v = f(&self.ray(omega, signs))?;
                if v.value != 0.0 {
                    inner_rel = inner_rel.max(v.abs_error / v.value.abs());
                }
                Ok(v.value)
            };
            let part = match n {
                1 => QuadValue::exact(eval(&[1.0])?),
                2 => try_integrate(|x| eval(&[x, 1.0 - x]), 0.0, 1.0, tol)?,
                _ => try_integrate(
                    |x| {
                        let w = 1.0 - x;
                        let inner = try_integrate(
                            |v| eval(&[x, w * v, w * (1.0 - v)]),
                            0.0,
                            1.0,
                            tol,
                        )?;
                        Ok(w * inner.value)
                    },
                    0.0,
                    1.0,
                    tol,
                )?,
            };
            total += part;
        }
        total.abs_error += inner_rel * total.value.abs();
        Ok(total.scale(factor))
    }
}

fn sign_patterns(n: usize, even: bool) -> Vec<Coords> {
    let free = if even { n - 1 } else { n };
    (0..1usize << free)
        .map(|mask| {
            let mut s: Coords = SmallVec::new();
            if even {
                s.push(1.0);
            }
            for k in 0..free {
                s.push(if mask >> k & 1 == 1 { -1.0 } else { 1.0 });
            }
            s
        })
        .collect()
}
