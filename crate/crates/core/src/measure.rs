//! Finite discrete measure spaces and measure-weighted vectors.
//!
//! Every object in this crate lives over a fixed finite atomic measure space
//! (S, μ): S = {0, …, n−1} with strictly positive atom masses μᵢ.  Working at
//! finite scale turns every essential supremum into a maximum and every
//! integral into a weighted sum, so the whole calculus downstream (norms,
//! factorizations, differentials) is exactly computable up to floating-point
//! roundoff.
//!
//! Conventions used throughout the crate:
//!
//! * integrals and pairings are μ-weighted: ∫x dμ = Σ μᵢxᵢ, ⟨x,y⟩ = Σ μᵢxᵢyᵢ;
//! * 0·log 0 = 0 (entropy convention);
//! * the exponent p = ∞ is a separate branch ([`PExp::Inf`]) with norm
//!   sup_i wᵢ|xᵢ| — it is never approximated by a large finite p.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{CalcError, Result};

/// A Lebesgue exponent p ∈ [1, ∞].
///
/// `Finite(p)` requires 1 ≤ p < ∞.  The infinite branch carries its own
/// weight convention: ‖x‖ = sup_i wᵢ|xᵢ| (so the weight enters at power one,
/// not 1/p).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PExp {
    /// p ∈ [1, ∞).
    Finite(f64),
    /// p = ∞, norm sup_i wᵢ|xᵢ|.
    Inf,
}

impl PExp {
    /// Builds an exponent from a float, mapping `f64::INFINITY` to [`PExp::Inf`].
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(CalcError::BadExponent(p));
        }
        if p.is_infinite() {
            Ok(PExp::Inf)
        } else {
            Ok(PExp::Finite(p))
        }
    }

    /// 1/p with the convention 1/∞ = 0.
    pub fn recip(self) -> f64 {
        match self {
            PExp::Finite(p) => 1.0 / p,
            PExp::Inf => 0.0,
        }
    }

    /// The conjugate exponent p′ with 1/p + 1/p′ = 1, handled by branch:
    /// 1 ↔ ∞, and p′ = p/(p−1) for 1 < p < ∞.
    pub fn conjugate(self) -> PExp {
        match self {
            PExp::Inf => PExp::Finite(1.0),
            PExp::Finite(p) => {
                if p == 1.0 {
                    PExp::Inf
                } else {
                    PExp::Finite(p / (p - 1.0))
                }
            }
        }
    }

    /// True for the p = ∞ branch.
    pub fn is_inf(self) -> bool {
        matches!(self, PExp::Inf)
    }

    /// The float value, with ∞ mapped to `f64::INFINITY`.
    pub fn as_f64(self) -> f64 {
        match self {
            PExp::Finite(p) => p,
            PExp::Inf => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for PExp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PExp::Finite(p) => write!(f, "{p}"),
            PExp::Inf => write!(f, "∞"),
        }
    }
}

/// A finite atomic measure space: n atoms with strictly positive masses μᵢ.
#[derive(Clone, Debug)]
pub struct MeasureSpace {
    mu: Vec<f64>,
}

impl MeasureSpace {
    /// Builds a space from per-atom masses; every mass must be positive and
    /// finite and there must be at least one atom.
    pub fn new(mu: Vec<f64>) -> Result<Arc<Self>> {
        if mu.is_empty() {
            return Err(CalcError::EmptySpace);
        }
        for (index, &value) in mu.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(CalcError::BadMeasure { index, value });
            }
        }
        Ok(Arc::new(MeasureSpace { mu }))
    }

    /// The counting space on n atoms (μᵢ = 1).
    pub fn counting(n: usize) -> Result<Arc<Self>> {
        MeasureSpace::new(vec![1.0; n])
    }

    /// Uniform masses summing to `total` over n atoms.
    pub fn uniform(n: usize, total: f64) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(CalcError::EmptySpace);
        }
        MeasureSpace::new(vec![total / n as f64; n])
    }

    /// Number of atoms.
    pub fn n(&self) -> usize {
        self.mu.len()
    }

    /// Per-atom masses.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Total mass μ(S).
    pub fn total_mass(&self) -> f64 {
        self.mu.iter().sum()
    }
}

impl PartialEq for MeasureSpace {
    fn eq(&self, other: &Self) -> bool {
        self.mu == other.mu
    }
}

/// Checks that two values live over the same measure space (pointer equality
/// first, then content), returning [`CalcError::SpaceMismatch`] otherwise.
pub fn require_same_space(a: &Arc<MeasureSpace>, b: &Arc<MeasureSpace>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(CalcError::SpaceMismatch)
    }
}

/// A measurable vector: one complex value per atom of its measure space.
///
/// Arithmetic between vectors over different spaces is a programming error
/// and panics; public entry points validate spaces up front and return
/// [`CalcError::SpaceMismatch`] instead.
#[derive(Clone, Debug, PartialEq)]
pub struct MVec {
    space: Arc<MeasureSpace>,
    vals: Vec<Complex64>,
}

impl MVec {
    /// Wraps complex per-atom values.
    pub fn from_complex(space: Arc<MeasureSpace>, vals: Vec<Complex64>) -> Result<Self> {
        if vals.len() != space.n() {
            return Err(CalcError::DimensionMismatch {
                left: vals.len(),
                right: space.n(),
            });
        }
        for (index, v) in vals.iter().enumerate() {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(CalcError::NonFiniteEntry { index });
            }
        }
        Ok(MVec { space, vals })
    }

    /// Wraps real per-atom values.
    pub fn from_real(space: Arc<MeasureSpace>, vals: Vec<f64>) -> Result<Self> {
        MVec::from_complex(space, vals.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }

    /// The zero vector.
    pub fn zeros(space: Arc<MeasureSpace>) -> Self {
        let n = space.n();
        MVec {
            space,
            vals: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// The underlying measure space.
    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.vals.len()
    }

    /// True when the space is empty (cannot happen for constructed spaces).
    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Per-atom complex values.
    pub fn vals(&self) -> &[Complex64] {
        &self.vals
    }

    /// Pointwise moduli |xᵢ|.
    pub fn abs(&self) -> Vec<f64> {
        self.vals.iter().map(|v| v.norm()).collect()
    }

    /// Real parts.
    pub fn re(&self) -> Vec<f64> {
        self.vals.iter().map(|v| v.re).collect()
    }

    /// Indices of atoms with xᵢ ≠ 0.
    pub fn support(&self) -> Vec<usize> {
        self.vals
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm() > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// True when every entry is zero.
    pub fn is_zero(&self) -> bool {
        self.vals.iter().all(|v| v.norm() == 0.0)
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> MVec {
        MVec {
            space: self.space.clone(),
            vals: self.vals.iter().map(|v| v.conj()).collect(),
        }
    }

    /// sup_i |xᵢ|.
    pub fn sup_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Verifies the vector is (numerically) nonnegative real and returns the
    /// real parts.  Entries with |Im| or negative real part beyond 0 are
    /// rejected.
    pub fn nonneg_real(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.vals.len());
        for (index, v) in self.vals.iter().enumerate() {
            if v.im != 0.0 || v.re < 0.0 {
                return Err(CalcError::NegativeEntry {
                    index,
                    value: format!("{}+{}i", v.re, v.im),
                });
            }
            out.push(v.re);
        }
        Ok(out)
    }

    /// x + y (panics on space mismatch; see type-level contract).
    pub fn add(&self, other: &MVec) -> MVec {
        assert_eq!(self.len(), other.len(), "MVec::add dimension mismatch");
        MVec {
            space: self.space.clone(),
            vals: self
                .vals
                .iter()
                .zip(&other.vals)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// x − y.
    pub fn sub(&self, other: &MVec) -> MVec {
        assert_eq!(self.len(), other.len(), "MVec::sub dimension mismatch");
        MVec {
            space: self.space.clone(),
            vals: self
                .vals
                .iter()
                .zip(&other.vals)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// α·x for complex α.
    pub fn scale(&self, alpha: Complex64) -> MVec {
        MVec {
            space: self.space.clone(),
            vals: self.vals.iter().map(|v| alpha * v).collect(),
        }
    }

    /// Pointwise product x∘y.
    pub fn mul_pointwise(&self, other: &MVec) -> MVec {
        assert_eq!(self.len(), other.len(), "MVec::mul dimension mismatch");
        MVec {
            space: self.space.clone(),
            vals: self
                .vals
                .iter()
                .zip(&other.vals)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    /// Pointwise product with a real vector.
    pub fn mul_real(&self, factors: &[f64]) -> MVec {
        assert_eq!(self.len(), factors.len(), "MVec::mul_real dimension mismatch");
        MVec {
            space: self.space.clone(),
            vals: self
                .vals
                .iter()
                .zip(factors)
                .map(|(a, &b)| a * b)
                .collect(),
        }
    }

    /// μ-weighted integral ∫x dμ = Σ μᵢxᵢ.
    pub fn integral(&self) -> Complex64 {
        self.vals
            .iter()
            .zip(self.space.mu())
            .map(|(v, &m)| v * m)
            .fold(Complex64::new(0.0, 0.0), |acc, v| acc + v)
    }
}

/// μ-weighted bilinear pairing ⟨x,y⟩ = Σ μᵢ xᵢ yᵢ (no conjugation).
pub fn pair(x: &MVec, y: &MVec) -> Result<Complex64> {
    require_same_space(x.space(), y.space())?;
    Ok(x
        .vals()
        .iter()
        .zip(y.vals())
        .zip(x.space().mu())
        .map(|((a, b), &m)| a * b * m)
        .fold(Complex64::new(0.0, 0.0), |acc, v| acc + v))
}

/// Weighted Lᵖ(μ) norm: (Σ μᵢ wᵢ |xᵢ|^p)^{1/p} for p < ∞ and sup_i wᵢ|xᵢ|
/// for p = ∞.
pub fn lp_norm(x: &MVec, p: PExp, w: &[f64]) -> Result<f64> {
    if w.len() != x.len() {
        return Err(CalcError::DimensionMismatch {
            left: w.len(),
            right: x.len(),
        });
    }
    for (index, &value) in w.iter().enumerate() {
        if !(value.is_finite() && value > 0.0) {
            return Err(CalcError::BadWeight { index, value });
        }
    }
    Ok(lp_norm_moduli(x.space().mu(), &x.abs(), p, w))
}

/// Slice-level weighted Lᵖ norm on nonnegative moduli (optimizer hot path;
/// inputs already validated by the caller).
pub(crate) fn lp_norm_moduli(mu: &[f64], moduli: &[f64], p: PExp, w: &[f64]) -> f64 {
    match p {
        PExp::Inf => moduli
            .iter()
            .zip(w)
            .map(|(&a, &wi)| wi * a)
            .fold(0.0, f64::max),
        PExp::Finite(pv) => {
            if pv == 1.0 {
                moduli
                    .iter()
                    .zip(mu)
                    .zip(w)
                    .map(|((&a, &m), &wi)| m * wi * a)
                    .sum()
            } else {
                // Factor out the peak of w^{1/p}·|x| so large exponents cannot
                // overflow: Σ μ w a^p = peak^p · Σ μ ((w^{1/p}a)/peak)^p.
                let peak = moduli
                    .iter()
                    .zip(w)
                    .map(|(&a, &wi)| wi.powf(1.0 / pv) * a)
                    .fold(0.0, f64::max);
                if peak == 0.0 {
                    return 0.0;
                }
                let sum: f64 = moduli
                    .iter()
                    .zip(mu)
                    .zip(w)
                    .map(|((&a, &m), &wi)| {
                        let scaled = wi.powf(1.0 / pv) * a / peak;
                        m * scaled.powf(pv)
                    })
                    .sum();
                peak * sum.powf(1.0 / pv)
            }
        }
    }
}

/// μ-mass of the strict superlevel set {i : |xᵢ| > λ}.
pub fn measure_of_superlevel(x: &MVec, lambda: f64) -> f64 {
    superlevel_measure(x.space().mu(), &x.abs(), lambda)
}

/// Slice-level strict superlevel mass.
pub(crate) fn superlevel_measure(mu: &[f64], moduli: &[f64], lambda: f64) -> f64 {
    moduli
        .iter()
        .zip(mu)
        .filter(|(&a, _)| a > lambda)
        .map(|(_, &m)| m)
        .sum()
}

/// The convergence-in-measure metric dist(x,y) = Σ μᵢ·min(1, |xᵢ−yᵢ|).
pub fn l0_dist(x: &MVec, y: &MVec) -> Result<f64> {
    require_same_space(x.space(), y.space())?;
    Ok(x
        .vals()
        .iter()
        .zip(y.vals())
        .zip(x.space().mu())
        .map(|((a, b), &m)| m * (a - b).norm().min(1.0))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cvec(space: &Arc<MeasureSpace>, vals: &[(f64, f64)]) -> MVec {
        MVec::from_complex(
            space.clone(),
            vals.iter().map(|&(r, i)| Complex64::new(r, i)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn lp_norm_pythagorean() {
        let s = MeasureSpace::counting(2).unwrap();
        let x = MVec::from_real(s, vec![3.0, 4.0]).unwrap();
        let n = lp_norm(&x, PExp::Finite(2.0), &[1.0, 1.0]).unwrap();
        assert!((n - 5.0).abs() < 1e-12, "got {n}");
    }

    #[test]
    fn lp_norm_weighted_l1() {
        let s = MeasureSpace::counting(2).unwrap();
        let x = MVec::from_real(s, vec![1.0, 1.0]).unwrap();
        let n = lp_norm(&x, PExp::Finite(1.0), &[2.0, 3.0]).unwrap();
        assert!((n - 5.0).abs() < 1e-12, "got {n}");
    }

    #[test]
    fn lp_norm_sup_of_moduli() {
        let s = MeasureSpace::counting(2).unwrap();
        let x = cvec(&s, &[(1.0, 0.0), (0.0, -2.0)]);
        let n = lp_norm(&x, PExp::Inf, &[1.0, 1.0]).unwrap();
        assert!((n - 2.0).abs() < 1e-12, "got {n}");
    }

    #[test]
    fn superlevel_counting() {
        let s = MeasureSpace::counting(3).unwrap();
        let x = MVec::from_real(s, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(measure_of_superlevel(&x, 1.5), 2.0);
    }

    #[test]
    fn superlevel_empty() {
        let s = MeasureSpace::counting(2).unwrap();
        let x = MVec::from_real(s, vec![0.0, 0.0]).unwrap();
        assert_eq!(measure_of_superlevel(&x, 0.0), 0.0);
    }

    #[test]
    fn superlevel_strict_inequality() {
        let s = MeasureSpace::new(vec![0.5, 0.5, 1.0]).unwrap();
        let x = MVec::from_real(s, vec![2.0, 2.0, 5.0]).unwrap();
        assert_eq!(measure_of_superlevel(&x, 2.0), 1.0);
    }

    #[test]
    fn l0_metric_axioms_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..1000 {
            let n = rng.gen_range(1..6);
            let mu: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
            let s = MeasureSpace::new(mu).unwrap();
            let rand_vec = |rng: &mut ChaCha8Rng| {
                let vals: Vec<Complex64> = (0..n)
                    .map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
                    .collect();
                MVec::from_complex(s.clone(), vals).unwrap()
            };
            let (x, y, z) = (rand_vec(&mut rng), rand_vec(&mut rng), rand_vec(&mut rng));
            let dxy = l0_dist(&x, &y).unwrap();
            let dyx = l0_dist(&y, &x).unwrap();
            let dxz = l0_dist(&x, &z).unwrap();
            let dzy = l0_dist(&z, &y).unwrap();
            assert!((dxy - dyx).abs() < 1e-14);
            assert!(dxy <= dxz + dzy + 1e-12, "triangle violated");
            assert!(l0_dist(&x, &x).unwrap() < 1e-15);
        }
    }

    #[test]
    fn lp_norm_absolutely_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let n = rng.gen_range(1..7);
            let mu: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
            let s = MeasureSpace::new(mu).unwrap();
            let vals: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
                .collect();
            let x = MVec::from_complex(s, vals).unwrap();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..3.0)).collect();
            let p = if rng.gen_bool(0.25) {
                PExp::Inf
            } else {
                PExp::Finite(rng.gen_range(1.0..6.0))
            };
            let alpha = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let lhs = lp_norm(&x.scale(alpha), p, &w).unwrap();
            let rhs = alpha.norm() * lp_norm(&x, p, &w).unwrap();
            assert!(
                (lhs - rhs).abs() <= 1e-12 * rhs.max(1.0),
                "homogeneity defect {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn lp_norm_is_lattice_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..200 {
            let n = rng.gen_range(1..7);
            let s = MeasureSpace::counting(n).unwrap();
            let smaller: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let bigger: Vec<f64> = smaller.iter().map(|&v| v + rng.gen_range(0.0..1.0)).collect();
            let x = MVec::from_real(s.clone(), smaller).unwrap();
            let y = MVec::from_real(s, bigger).unwrap();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..3.0)).collect();
            for p in [PExp::Finite(1.0), PExp::Finite(2.7), PExp::Inf] {
                assert!(lp_norm(&x, p, &w).unwrap() <= lp_norm(&y, p, &w).unwrap() + 1e-14);
            }
        }
    }

    #[test]
    fn conjugate_exponent_branches() {
        assert!(PExp::Finite(1.0).conjugate().is_inf());
        assert!(matches!(PExp::Inf.conjugate(), PExp::Finite(p) if p == 1.0));
        match PExp::Finite(3.0).conjugate() {
            PExp::Finite(q) => assert!((q - 1.5).abs() < 1e-15),
            PExp::Inf => panic!("expected finite conjugate"),
        }
    }

    #[test]
    fn constructors_reject_bad_input() {
        assert!(MeasureSpace::new(vec![]).is_err());
        assert!(MeasureSpace::new(vec![1.0, 0.0]).is_err());
        assert!(MeasureSpace::new(vec![1.0, -1.0]).is_err());
        assert!(PExp::new(0.5).is_err());
        assert!(PExp::new(f64::NAN).is_err());
        let s = MeasureSpace::counting(2).unwrap();
        assert!(MVec::from_real(s.clone(), vec![1.0]).is_err());
        let x = MVec::from_real(s, vec![1.0, 1.0]).unwrap();
        assert!(lp_norm(&x, PExp::Finite(2.0), &[1.0, -1.0]).is_err());
    }
}
