use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::chart::{Ray, WarpedChart};
use super::hurst::{rho_norm, HurstVector};

/// Isotropic fBm density `c ||lambda||^{-(2H + N)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbmDensity {
    pub hurst: f64,
    pub n_dims: usize,
    pub c_norm: f64,
}

impl FbmDensity {
    /// Density with the constant chosen so that `sigma^2(h) = ||h||^{2H}`.
    pub fn normalized(hurst: f64, n_dims: usize) -> Result<Self> {
        let c_norm = super::fbm_normalizer(hurst, n_dims)?;
        Self::with_constant(hurst, n_dims, c_norm)
    }

    pub fn with_constant(hurst: f64, n_dims: usize, c_norm: f64) -> Result<Self> {
        HurstVector::uniform(hurst, n_dims)?;
        if !(c_norm > 0.0 && c_norm.is_finite()) {
            return Err(Error::InvalidMeasure(format!("normalizing constant {c_norm}")));
        }
        Ok(Self {
            hurst,
            n_dims,
            c_norm,
        })
    }

    pub fn eval(&self, lambda: &[f64]) -> f64 {
        let norm2: f64 = lambda.iter().map(|x| x * x).sum();
        self.c_norm * norm2.powf(-(2.0 * self.hurst + self.n_dims as f64) / 2.0)
    }
}

/// `f(lambda) = rho(0, lambda)^{-(2 + Q)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnisoDensity {
    pub hurst: HurstVector,
}

impl AnisoDensity {
    pub fn new(hurst: HurstVector) -> Self {
        Self { hurst }
    }

    pub fn eval(&self, lambda: &[f64]) -> f64 {
        let q = self.hurst.q_exponent();
        rho_norm(lambda, self.hurst.as_slice()).powf(-(2.0 + q))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContinuousDensity {
    Fbm(FbmDensity),
    Aniso(AnisoDensity),
}

impl ContinuousDensity {
    pub fn dims(&self) -> usize {
        match self {
            ContinuousDensity::Fbm(f) => f.n_dims,
            ContinuousDensity::Aniso(a) => a.hurst.len(),
        }
    }

    pub fn eval(&self, lambda: &[f64]) -> f64 {
        match self {
            ContinuousDensity::Fbm(f) => f.eval(lambda),
            ContinuousDensity::Aniso(a) => a.eval(lambda),
        }
    }

    /// Exponents of the chart in which the density is homogeneous.
    pub fn chart_hurst(&self) -> HurstVector {
        match self {
            ContinuousDensity::Fbm(f) => {
                HurstVector::uniform(f.hurst, f.n_dims).expect("validated at construction")
            }
            ContinuousDensity::Aniso(a) => a.hurst.clone(),
        }
    }

    /// Radial weight of a ray: the ray carries `weight * r^{-3} dr`.
    pub(crate) fn ray_weight(&self, ray: &Ray) -> f64 {
        ray.jacobian * self.eval(&ray.coef)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<i64>,
    pub weight: f64,
}

/// Atoms `a_n^2 = rho(0, n)^{-exponent}` on every nonzero lattice point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawAtoms {
    pub hurst: HurstVector,
    pub exponent: f64,
    /// Atoms with `||n||_inf <= exact_radius` are summed term by term; the
    /// rest of the lattice is replaced by the matching continuum integral.
    #[serde(default = "default_exact_radius")]
    pub exact_radius: u32,
}

fn default_exact_radius() -> u32 {
    64
}

impl PowerLawAtoms {
    pub fn weight(&self, n: &[i64]) -> f64 {
        let r: f64 = n
            .iter()
            .zip(self.hurst.as_slice())
            .map(|(&k, h)| (k.unsigned_abs() as f64).powf(*h))
            .sum();
        r.powf(-self.exponent)
    }

    /// Radial exponent of the continuum density in the matching chart.
    pub(crate) fn tail_q(&self) -> f64 {
        self.exponent - self.hurst.q_exponent() + 1.0
    }
}

/// Symmetric atomic spectral measure on `Z^N \ {0}`.
///
/// Only the half of the lattice whose first nonzero coordinate is positive is
/// stored; every atom there stands for itself and its mirror image.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteAtoms {
    n_dims: usize,
    source: AtomSource,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AtomSource {
    Explicit(Vec<Atom>),
    PowerLaw(PowerLawAtoms),
}

fn canonical(point: &[i64]) -> Option<(Vec<i64>, bool)> {
    let first = point.iter().find(|&&k| k != 0)?;
    if *first > 0 {
        Some((point.to_vec(), false))
    } else {
        Some((point.iter().map(|k| -k).collect(), true))
    }
}

impl DiscreteAtoms {
    /// Builds the measure from atoms given either on one half of the lattice
    /// or in mirrored pairs. Mirrored pairs must carry equal weights.
    pub fn explicit(n_dims: usize, atoms: Vec<Atom>) -> Result<Self> {
        if n_dims == 0 {
            return Err(Error::InvalidMeasure("atoms need at least one dimension".into()));
        }
        // canonical point -> (weight given on the canonical side, on the mirrored side)
        let mut table: BTreeMap<Vec<i64>, (Option<f64>, Option<f64>)> = BTreeMap::new();
        for atom in atoms {
            if atom.point.len() != n_dims {
                return Err(Error::DimensionMismatch {
                    expected: n_dims,
                    got: atom.point.len(),
                });
            }
            if !(atom.weight >= 0.0 && atom.weight.is_finite()) {
                return Err(Error::InvalidMeasure(format!(
                    "atom {:?} has weight {}",
                    atom.point, atom.weight
                )));
            }
            let (key, mirrored) = canonical(&atom.point).ok_or_else(|| {
                Error::InvalidMeasure("atoms at the origin are not allowed".into())
            })?;
            let slot = table.entry(key).or_default();
            let side = if mirrored { &mut slot.1 } else { &mut slot.0 };
            if side.is_some() {
                return Err(Error::InvalidMeasure(format!("duplicate atom {:?}", atom.point)));
            }
            *side = Some(atom.weight);
        }
        let mut half = Vec::with_capacity(table.len());
        for (point, sides) in table {
            let weight = match sides {
                (Some(a), Some(b)) if a != b => {
                    return Err(Error::InvalidMeasure(format!(
                        "atoms at {point:?} and its mirror have weights {a} and {b}"
                    )))
                }
                (Some(w), _) | (None, Some(w)) => w,
                (None, None) => unreachable!(),
            };
            if weight > 0.0 {
                half.push(Atom { point, weight });
            }
        }
        Ok(Self {
            n_dims,
            source: AtomSource::Explicit(half),
        })
    }

    pub fn power_law(hurst: HurstVector, exponent: f64, exact_radius: u32) -> Result<Self> {
        let q = hurst.q_exponent();
        if !(exponent > q) {
            return Err(Error::InvalidMeasure(format!(
                "power-law atoms need exponent > Q = {q} to have finite mass, got {exponent}"
            )));
        }
        Ok(Self {
            n_dims: hurst.len(),
            source: AtomSource::PowerLaw(PowerLawAtoms {
                hurst,
                exponent,
                exact_radius,
            }),
        })
    }

    pub fn dims(&self) -> usize {
        self.n_dims
    }

    pub fn source(&self) -> &AtomSource {
        &self.source
    }

    /// Largest sup-norm of an atom, if the support is finite.
    pub fn support_radius(&self) -> Option<i64> {
        match &self.source {
            AtomSource::Explicit(atoms) => Some(
                atoms
                    .iter()
                    .map(|a| a.point.iter().map(|k| k.abs()).max().unwrap_or(0))
                    .max()
                    .unwrap_or(0),
            ),
            AtomSource::PowerLaw(_) => None,
        }
    }

    /// Visit the stored half of the atoms with `||n||_inf <= radius`.
    pub fn for_each_half<F: FnMut(&[i64], f64)>(&self, radius: i64, mut f: F) {
        match &self.source {
            AtomSource::Explicit(atoms) => {
                for a in atoms {
                    if a.point.iter().all(|k| k.abs() <= radius) {
                        f(&a.point, a.weight);
                    }
                }
            }
            AtomSource::PowerLaw(p) => {
                let lo = vec![-radius; self.n_dims];
                let hi = vec![radius; self.n_dims];
                for_each_lattice_point(&lo, &hi, |n| {
                    if let Some((_, false)) = canonical(n) {
                        f(n, p.weight(n));
                    }
                });
            }
        }
    }

    /// Visit every atom (both halves) inside the box `lo <= n <= hi`.
    pub fn for_each_in_box<F: FnMut(&[i64], f64)>(&self, lo: &[i64], hi: &[i64], mut f: F) {
        match &self.source {
            AtomSource::Explicit(atoms) => {
                let inside = |p: &[i64]| p.iter().zip(lo).zip(hi).all(|((k, a), b)| a <= k && k <= b);
                for a in atoms {
                    if inside(&a.point) {
                        f(&a.point, a.weight);
                    }
                    let mirror: Vec<i64> = a.point.iter().map(|k| -k).collect();
                    if inside(&mirror) {
                        f(&mirror, a.weight);
                    }
                }
            }
            AtomSource::PowerLaw(p) => for_each_lattice_point(lo, hi, |n| {
                if n.iter().any(|&k| k != 0) {
                    f(n, p.weight(n));
                }
            }),
        }
    }

    /// Radius of term-by-term summation for variograms.
    pub(crate) fn exact_radius(&self) -> i64 {
        match &self.source {
            AtomSource::Explicit(_) => self.support_radius().unwrap_or(0),
            AtomSource::PowerLaw(p) => p.exact_radius as i64,
        }
    }

    /// Power-law description and chart for the continuum beyond
    /// [`Self::exact_radius`].
    pub(crate) fn continuum(&self) -> Option<(&PowerLawAtoms, WarpedChart)> {
        match &self.source {
            AtomSource::Explicit(_) => None,
            AtomSource::PowerLaw(p) => Some((p, WarpedChart::new(p.hurst.as_slice()))),
        }
    }
}

/// Row-major iteration over the integer box `lo <= n <= hi`.
pub(crate) fn for_each_lattice_point<F: FnMut(&[i64])>(lo: &[i64], hi: &[i64], mut f: F) {
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return;
    }
    let mut n = lo.to_vec();
    loop {
        f(&n);
        let mut axis = n.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if n[axis] < hi[axis] {
                n[axis] += 1;
                break;
            }
            n[axis] = lo[axis];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralMeasure {
    Fbm(FbmDensity),
    Aniso(AnisoDensity),
    Discrete(DiscreteAtoms),
    Mixed(ContinuousDensity, DiscreteAtoms),
}

impl SpectralMeasure {
    pub fn dims(&self) -> usize {
        match self {
            SpectralMeasure::Fbm(f) => f.n_dims,
            SpectralMeasure::Aniso(a) => a.hurst.len(),
            SpectralMeasure::Discrete(d) => d.dims(),
            SpectralMeasure::Mixed(c, _) => c.dims(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SpectralMeasure::Fbm(_) => "fbm",
            SpectralMeasure::Aniso(_) => "aniso",
            SpectralMeasure::Discrete(_) => "discrete",
            SpectralMeasure::Mixed(..) => "mixed",
        }
    }

    pub fn continuous(&self) -> Option<ContinuousDensity> {
        match self {
            SpectralMeasure::Fbm(f) => Some(ContinuousDensity::Fbm(f.clone())),
            SpectralMeasure::Aniso(a) => Some(ContinuousDensity::Aniso(a.clone())),
            SpectralMeasure::Mixed(c, _) => Some(c.clone()),
            SpectralMeasure::Discrete(_) => None,
        }
    }

    pub fn discrete(&self) -> Option<&DiscreteAtoms> {
        match self {
            SpectralMeasure::Discrete(d) | SpectralMeasure::Mixed(_, d) => Some(d),
            _ => None,
        }
    }

    /// Pointwise density of the absolutely continuous part.
    pub fn density_eval(&self, lambda: &[f64]) -> Result<f64> {
        if lambda.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: lambda.len(),
            });
        }
        let cont = self.continuous().ok_or(Error::Variant {
            op: "density_eval",
            variant: "discrete",
        })?;
        if lambda.iter().all(|&x| x == 0.0) {
            return Err(Error::Singular);
        }
        Ok(cont.eval(lambda))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(point: &[i64], weight: f64) -> Atom {
        Atom {
            point: point.to_vec(),
            weight,
        }
    }

    #[test]
    fn aniso_density_examples() {
        let h = HurstVector::new(vec![0.5, 1.0 / 3.0]).unwrap();
        let f = SpectralMeasure::Aniso(AnisoDensity::new(h));
        assert!((f.density_eval(&[1.0, 1.0]).unwrap() - 1.0 / 128.0).abs() < 1e-15);
        let f1 = SpectralMeasure::Aniso(AnisoDensity::new(HurstVector::new(vec![0.5]).unwrap()));
        assert!((f1.density_eval(&[4.0]).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert!(matches!(f1.density_eval(&[0.0]), Err(Error::Singular)));
    }

    #[test]
    fn fbm_density_at_unit_norm_is_the_constant() {
        let f = FbmDensity::with_constant(0.3, 2, 0.7).unwrap();
        assert!((f.eval(&[0.6, -0.8]) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn atomic_measure_has_no_density() {
        let d = DiscreteAtoms::explicit(1, vec![atom(&[1], 1.0)]).unwrap();
        let f = SpectralMeasure::Discrete(d);
        assert!(matches!(f.density_eval(&[1.0]), Err(Error::Variant { .. })));
    }

    #[test]
    fn atoms_are_mirrored() {
        let d = DiscreteAtoms::explicit(2, vec![atom(&[-1, 2], 0.5), atom(&[0, 3], 1.0)]).unwrap();
        let mut seen = Vec::new();
        d.for_each_in_box(&[-5, -5], &[5, 5], |n, w| seen.push((n.to_vec(), w)));
        seen.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(
            seen,
            vec![
                (vec![-1, 2], 0.5),
                (vec![0, -3], 1.0),
                (vec![0, 3], 1.0),
                (vec![1, -2], 0.5)
            ]
        );
    }

    #[test]
    fn mirrored_pairs_must_agree() {
        assert!(DiscreteAtoms::explicit(1, vec![atom(&[1], 1.0), atom(&[-1], 1.0)]).is_ok());
        assert!(DiscreteAtoms::explicit(1, vec![atom(&[1], 1.0), atom(&[-1], 2.0)]).is_err());
        assert!(DiscreteAtoms::explicit(1, vec![atom(&[0], 1.0)]).is_err());
        assert!(DiscreteAtoms::explicit(1, vec![atom(&[2], -1.0)]).is_err());
    }

    #[test]
    fn power_law_half_enumeration() {
        let h = HurstVector::new(vec![0.5, 0.5]).unwrap();
        let d = DiscreteAtoms::power_law(h, 6.0, 8).unwrap();
        let mut count = 0;
        d.for_each_half(2, |n, w| {
            assert!(w > 0.0);
            assert!(n.iter().find(|&&k| k != 0).unwrap() > &0);
            count += 1;
        });
        assert_eq!(count, (25 - 1) / 2);
        // exponent must exceed Q for a finite measure
        let h = HurstVector::new(vec![0.5, 0.5]).unwrap();
        assert!(DiscreteAtoms::power_law(h, 4.0, 8).is_err());
    }

    #[test]
    fn lattice_iteration_is_row_major() {
        let mut pts = Vec::new();
        for_each_lattice_point(&[0, 0], &[1, 2], |n| pts.push(n.to_vec()));
        assert_eq!(pts, vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![1, 0], vec![1, 1], vec![1, 2]]);
    }
}
