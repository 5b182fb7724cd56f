//! Seeded random generators for vectors, spaces, and operators.
//!
//! Every stochastic routine in the crate draws from a [`ChaCha8Rng`] created
//! by [`crate::opt::rng_for`], so results are reproducible bit-for-bit for a
//! fixed seed across platforms.  This module holds the shared constructions:
//! standard normals via Box–Muller, complex Gaussian vectors, log-normal mass
//! densities, random weighted Lᵖ spaces, and substochastic operators built as
//! convex combinations of subpermutation matrices (the latter are exactly the
//! extreme points of the set of operators that are simultaneous contractions
//! on equal-weight L¹ and L^∞, hence contractions on every interpolated
//! space between them).

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::measure::{MVec, MeasureSpace, PExp};
use crate::spaces::KotheSpace;
use crate::twisted::LinearOperator;

/// One standard normal draw (Box–Muller; consumes two uniforms).
pub fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-300..1.0f64);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Complex vector with iid standard complex Gaussian entries.
pub fn gaussian_complex_vec(space: &Arc<MeasureSpace>, rng: &mut ChaCha8Rng) -> MVec {
    let vals: Vec<Complex64> = (0..space.n())
        .map(|_| Complex64::new(std_normal(rng), std_normal(rng)) / std::f64::consts::SQRT_2)
        .collect();
    MVec::from_complex(space.clone(), vals).expect("gaussian entries are finite")
}

/// Nonnegative vector with iid log-normal entries e^{σZ}.
pub fn lognormal_vec(space: &Arc<MeasureSpace>, sigma: f64, rng: &mut ChaCha8Rng) -> MVec {
    let vals: Vec<f64> = (0..space.n())
        .map(|_| (sigma * std_normal(rng)).exp())
        .collect();
    MVec::from_real(space.clone(), vals).expect("lognormal entries are finite")
}

/// A random point on the unit sphere of `a` (Gaussian direction, normalized).
/// Redraws in the measure-zero event of a zero vector.
pub fn unit_sphere_sample(a: &KotheSpace, rng: &mut ChaCha8Rng) -> MVec {
    loop {
        let x = gaussian_complex_vec(a.space(), rng);
        if let Ok(n) = a.norm(&x) {
            if n > 1e-9 {
                return x.scale(Complex64::new(1.0 / n, 0.0));
            }
        }
    }
}

/// A random weighted Lᵖ space with p log-uniform in `[p_lo, p_hi]` and
/// weights log-uniform in `[w_lo, w_hi]`.
pub fn random_weighted_lp(
    space: &Arc<MeasureSpace>,
    p_lo: f64,
    p_hi: f64,
    w_lo: f64,
    w_hi: f64,
    rng: &mut ChaCha8Rng,
) -> KotheSpace {
    let p = (rng.gen_range(p_lo.ln()..p_hi.ln())).exp();
    let w: Vec<f64> = (0..space.n())
        .map(|_| (rng.gen_range(w_lo.ln()..w_hi.ln())).exp())
        .collect();
    KotheSpace::weighted_lp(space.clone(), PExp::Finite(p), w).expect("sampled weights valid")
}

/// A random multiplier symbol with ‖b‖_∞ = 1: uniform phases, moduli drawn
/// uniformly then renormalized by the sup.
pub fn random_contraction_symbol(space: &Arc<MeasureSpace>, rng: &mut ChaCha8Rng) -> MVec {
    let raw: Vec<(f64, f64)> = (0..space.n())
        .map(|_| {
            (
                rng.gen_range(0.05..1.0f64),
                rng.gen_range(0.0..2.0 * std::f64::consts::PI),
            )
        })
        .collect();
    let peak = raw.iter().map(|&(r, _)| r).fold(0.0, f64::max);
    let vals: Vec<Complex64> = raw
        .iter()
        .map(|&(r, th)| Complex64::from_polar(r / peak, th))
        .collect();
    MVec::from_complex(space.clone(), vals).expect("symbol entries finite")
}

/// A random substochastic operator: a convex combination of `k`
/// subpermutation matrices with random unimodular phases.  Such operators
/// are contractions on the equal-weight Lᵖ scale for every p.
pub fn random_substochastic(
    space: &Arc<MeasureSpace>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> LinearOperator {
    let n = space.n();
    let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
    let mut weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0f64)).collect();
    let total: f64 = weights.iter().sum();
    for wgt in &mut weights {
        *wgt /= total;
    }
    for &wgt in &weights {
        // Random permutation by Fisher–Yates, then random row dropout.
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        for (row, &col) in perm.iter().enumerate() {
            if rng.gen_bool(0.85) {
                let phase = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                entries[row * n + col] += wgt * Complex64::from_polar(1.0, phase);
            }
        }
    }
    LinearOperator::dense(space.clone(), entries).expect("square entry matrix")
}
