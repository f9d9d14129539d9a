//! Piecewise Chebyshev interpolation of a smooth function on an interval.
//!
//! Used to tabulate the angular profile of a self-similar variogram so that
//! repeated evaluations (conditioning, covariance assembly) cost a few
//! hundred flops instead of a full two-dimensional quadrature.

use crate::error::Result;

const DEGREE: usize = 16;
const MAX_DEPTH: usize = 48;

#[derive(Debug, Clone)]
struct Piece {
    a: f64,
    b: f64,
    coef: [f64; DEGREE + 1],
}

impl Piece {
    fn eval(&self, x: f64) -> f64 {
        let t = (2.0 * x - self.a - self.b) / (self.b - self.a);
        // Clenshaw
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coef.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coef[0]
    }
}

#[derive(Debug, Clone)]
pub struct Piecewise {
    pieces: Vec<Piece>,
}

impl Piecewise {
    /// Adaptive bisection until the two highest Chebyshev coefficients of
    /// every piece fall below `tol * max|f|`.
    pub fn build<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Self>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mut pieces = Vec::new();
        let mut stack = vec![(a, b, 0usize)];
        let mut scale: f64 = 0.0;
        let mut pending = Vec::new();
        while let Some((lo, hi, depth)) = stack.pop() {
            let (coef, local_max) = fit(&mut f, lo, hi)?;
            scale = scale.max(local_max);
            let tail = coef[DEGREE].abs().max(coef[DEGREE - 1].abs());
            if tail <= tol * scale || depth >= MAX_DEPTH {
                pending.push(Piece { a: lo, b: hi, coef });
            } else {
                let mid = 0.5 * (lo + hi);
                // push right first so pieces come out left to right
                stack.push((mid, hi, depth + 1));
                stack.push((lo, mid, depth + 1));
            }
        }
        pieces.append(&mut pending);
        Ok(Self { pieces })
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let idx = self
            .pieces
            .partition_point(|p| p.b < x)
            .min(self.pieces.len() - 1);
        self.pieces[idx].eval(x)
    }
}

fn fit<F>(f: &mut F, a: f64, b: f64) -> Result<([f64; DEGREE + 1], f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let n = DEGREE + 1;
    let mut values = [0.0; DEGREE + 1];
    let mut local_max: f64 = 0.0;
    for (k, v) in values.iter_mut().enumerate() {
        let theta = std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
        let x = 0.5 * (a + b) + 0.5 * (b - a) * theta.cos();
        *v = f(x)?;
        local_max = local_max.max(v.abs());
    }
    let mut coef = [0.0; DEGREE + 1];
    for (j, c) in coef.iter_mut().enumerate() {
        let mut s = 0.0;
        for (k, v) in values.iter().enumerate() {
            s += v * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / n as f64).cos();
        }
        *c = 2.0 * s / n as f64;
    }
    coef[0] *= 0.5;
    Ok((coef, local_max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_function_single_piece() {
        let p = Piecewise::build(|x: f64| Ok(x.exp()), 0.0, 1.0, 1e-13).unwrap();
        assert_eq!(p.len(), 1);
        for x in [0.0, 0.123, 0.5, 0.999, 1.0] {
            assert!((p.eval(x) - x.exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn endpoint_singularity_is_refined() {
        let f = |x: f64| 1.0 + x * x * x.ln().abs().sqrt();
        let p = Piecewise::build(|x| Ok(f(x)), 0.0, 1.0, 1e-10).unwrap();
        assert!(p.len() > 1);
        for k in 1..200 {
            let x = (k as f64 / 200.0).powi(3);
            assert!((p.eval(x) - f(x)).abs() < 1e-8, "x = {x}");
        }
    }
}
