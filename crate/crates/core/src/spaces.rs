//! Köthe function spaces as norm oracles.
//!
//! A [`KotheSpace`] is a lattice norm over a fixed finite measure space,
//! represented by one of three kinds:
//!
//! * `WeightedLp(p, w)` — the closed form (Σ μᵢwᵢ|xᵢ|ᵖ)^{1/p}, with the
//!   p = ∞ branch sup_i wᵢ|xᵢ|;
//! * `CalderonProduct(A₀, A₁, t)` — the interpolated norm obtained from
//!   optimal multiplicative factorizations |x| = u^{1−t}v^t (delegated to
//!   [`crate::interp`]);
//! * `IndicatorInduced(Φ)` — the norm recovered from an indicator functional
//!   by Legendre-type inversion (delegated to [`crate::indicator`]).
//!
//! Beyond plain norm evaluation the type exposes two derived oracles that the
//! optimization engines rely on:
//!
//! * [`KotheSpace::dual_norm`] — the Köthe dual norm under the μ-weighted
//!   pairing ⟨x,y⟩ = Σ μᵢxᵢyᵢ, in closed form for `WeightedLp` (conjugate
//!   exponent p′, weight w^{1−p′}) and by ratio maximization otherwise;
//! * [`KotheSpace::norming_density`] — the normalized logarithmic gradient
//!   D(x)ᵢ = ∂ log‖|x|∘e^y‖ / ∂yᵢ at y = 0, a probability vector supported
//!   on supp(x).  For Lᵖ it is μᵢwᵢ|xᵢ|ᵖ/‖x‖ᵖ; for interpolated and
//!   indicator-induced norms it falls out of the inner optimizations by the
//!   envelope theorem.  Norming densities are what make density-matching
//!   factorization solvers and dual maximizers fast.

use std::sync::Arc;

use crate::error::{CalcError, Result};
use crate::indicator::{self, IndicatorFn};
use crate::interp;
use crate::measure::{lp_norm_moduli, require_same_space, MVec, MeasureSpace, PExp};
use crate::opt::{self, NumOpts};

/// The structural kind of a [`KotheSpace`].
#[derive(Clone, Debug)]
pub enum SpaceKind {
    /// Weighted Lᵖ(μ): (Σ μᵢwᵢ|xᵢ|ᵖ)^{1/p}, or sup_i wᵢ|xᵢ| for p = ∞.
    WeightedLp { p: PExp, w: Vec<f64> },
    /// The interpolation space of a couple at parameter t ∈ [0, 1].
    CalderonProduct {
        a0: Box<KotheSpace>,
        a1: Box<KotheSpace>,
        t: f64,
    },
    /// The space whose norm is recovered from an indicator functional.
    IndicatorInduced { phi: Box<IndicatorFn> },
}

/// A Köthe function space: a lattice norm oracle over a finite measure space.
#[derive(Clone, Debug)]
pub struct KotheSpace {
    space: Arc<MeasureSpace>,
    kind: SpaceKind,
}

impl KotheSpace {
    /// Weighted Lᵖ space; weights must be strictly positive and finite.
    pub fn weighted_lp(space: Arc<MeasureSpace>, p: PExp, w: Vec<f64>) -> Result<Self> {
        if w.len() != space.n() {
            return Err(CalcError::DimensionMismatch {
                left: w.len(),
                right: space.n(),
            });
        }
        for (index, &value) in w.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(CalcError::BadWeight { index, value });
            }
        }
        Ok(KotheSpace {
            space,
            kind: SpaceKind::WeightedLp { p, w },
        })
    }

    /// Unweighted ℓᵖ(μ) (w ≡ 1).
    pub fn lp(space: Arc<MeasureSpace>, p: PExp) -> Result<Self> {
        let n = space.n();
        KotheSpace::weighted_lp(space, p, vec![1.0; n])
    }

    /// The interpolation space [A₀, A₁]_t realized as a norm oracle.
    pub fn calderon_product(a0: KotheSpace, a1: KotheSpace, t: f64) -> Result<Self> {
        require_same_space(a0.space(), a1.space())?;
        if !(0.0..=1.0).contains(&t) || t.is_nan() {
            return Err(CalcError::BadParameter {
                name: "t",
                range: "[0, 1]",
                value: t,
            });
        }
        let space = a0.space.clone();
        Ok(KotheSpace {
            space,
            kind: SpaceKind::CalderonProduct {
                a0: Box::new(a0),
                a1: Box::new(a1),
                t,
            },
        })
    }

    /// The space induced by an indicator functional.
    pub fn indicator_induced(phi: IndicatorFn) -> Self {
        KotheSpace {
            space: phi.space().clone(),
            kind: SpaceKind::IndicatorInduced { phi: Box::new(phi) },
        }
    }

    /// Underlying measure space.
    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    /// Structural kind.
    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    /// Returns `(p, w)` when the space is a weighted Lᵖ.
    pub fn as_weighted_lp(&self) -> Option<(PExp, &[f64])> {
        match &self.kind {
            SpaceKind::WeightedLp { p, w } => Some((*p, w)),
            _ => None,
        }
    }

    /// Norm with default numeric options.
    pub fn norm(&self, x: &MVec) -> Result<f64> {
        self.norm_with(x, &NumOpts::default())
    }

    /// Norm with explicit numeric options (budget/seed for the nested
    /// optimizations of product and indicator-induced kinds).
    pub fn norm_with(&self, x: &MVec, opts: &NumOpts) -> Result<f64> {
        require_same_space(&self.space, x.space())?;
        self.norm_moduli(&x.abs(), opts)
    }

    /// Norm of a vector given by nonnegative moduli (internal fast path; the
    /// slice length must equal the atom count).
    pub(crate) fn norm_moduli(&self, moduli: &[f64], opts: &NumOpts) -> Result<f64> {
        match &self.kind {
            SpaceKind::WeightedLp { p, w } => {
                Ok(lp_norm_moduli(self.space.mu(), moduli, *p, w))
            }
            SpaceKind::CalderonProduct { a0, a1, t } => {
                Ok(interp::solve_moduli(a0, a1, *t, moduli, opts)?.norm)
            }
            SpaceKind::IndicatorInduced { phi } => {
                Ok(indicator::recover_norm_moduli(phi, moduli, opts)?.value)
            }
        }
    }

    /// Norming density D(x): the probability vector with
    /// D(x)ᵢ = ∂ log‖|x|∘e^y‖ / ∂yᵢ at y = 0 (a subgradient selection for
    /// nonsmooth kinds: sup-norm ties share the mass uniformly).
    ///
    /// Errors on x = 0.
    pub fn norming_density(&self, x: &MVec, opts: &NumOpts) -> Result<Vec<f64>> {
        require_same_space(&self.space, x.space())?;
        self.density_moduli(&x.abs(), opts)
    }

    pub(crate) fn density_moduli(&self, moduli: &[f64], opts: &NumOpts) -> Result<Vec<f64>> {
        if moduli.iter().all(|&a| a == 0.0) {
            return Err(CalcError::ZeroInput {
                op: "norming density",
            });
        }
        match &self.kind {
            SpaceKind::WeightedLp { p, w } => {
                Ok(lp_density(self.space.mu(), moduli, *p, w))
            }
            SpaceKind::CalderonProduct { a0, a1, t } => {
                let sol = interp::solve_moduli(a0, a1, *t, moduli, opts)?;
                let d0 = a0.density_moduli(&sol.u, opts)?;
                let d1 = a1.density_moduli(&sol.v, opts)?;
                Ok(d0
                    .iter()
                    .zip(&d1)
                    .map(|(&a, &b)| (1.0 - t) * a + t * b)
                    .collect())
            }
            SpaceKind::IndicatorInduced { phi } => {
                Ok(indicator::recover_norm_moduli(phi, moduli, opts)?.maximizer)
            }
        }
    }

    /// Köthe dual norm sup{ |Σ μᵢxᵢyᵢ| : ‖x‖ ≤ 1 } with default options.
    pub fn dual_norm(&self, y: &MVec) -> Result<f64> {
        self.dual_norm_with(y, &NumOpts::default())
    }

    /// Köthe dual norm; closed form for weighted Lᵖ, ratio maximization with
    /// seeded restarts otherwise.
    pub fn dual_norm_with(&self, y: &MVec, opts: &NumOpts) -> Result<f64> {
        require_same_space(&self.space, y.space())?;
        if let Some(dual) = self.dual_space() {
            return dual.norm_with(y, opts);
        }
        dual_norm_numeric(self, y, opts)
    }

    /// The dual space in closed form (weighted Lᵖ only): exponent p′ with
    /// 1/p + 1/p′ = 1 and weight w^{1−p′}, where the p = 1 ↔ ∞ branches use
    /// the reciprocal weight 1/w.
    pub fn dual_space(&self) -> Option<KotheSpace> {
        match &self.kind {
            SpaceKind::WeightedLp { p, w } => {
                let (pd, wd): (PExp, Vec<f64>) = match p {
                    PExp::Finite(pv) if *pv == 1.0 => {
                        (PExp::Inf, w.iter().map(|wi| 1.0 / wi).collect())
                    }
                    PExp::Inf => (PExp::Finite(1.0), w.iter().map(|wi| 1.0 / wi).collect()),
                    PExp::Finite(pv) => {
                        let pc = pv / (pv - 1.0);
                        (
                            PExp::Finite(pc),
                            w.iter().map(|wi| wi.powf(1.0 - pc)).collect(),
                        )
                    }
                };
                Some(KotheSpace::weighted_lp(self.space.clone(), pd, wd).expect("dual weights"))
            }
            _ => None,
        }
    }

    /// The space with norm r·‖·‖.  For weighted Lᵖ the scale is absorbed into
    /// the weight (w·rᵖ, or w·r on the ∞ branch); products scale both
    /// endpoints; indicator-induced norms absorb the scale into the
    /// functional as Φ − (∫f dμ)·log r.
    pub fn scaled(&self, r: f64) -> Result<KotheSpace> {
        if !(r.is_finite() && r > 0.0) {
            return Err(CalcError::BadParameter {
                name: "scale",
                range: "(0, ∞)",
                value: r,
            });
        }
        match &self.kind {
            SpaceKind::WeightedLp { p, w } => {
                let wd = match p {
                    PExp::Inf => w.iter().map(|wi| wi * r).collect(),
                    PExp::Finite(pv) => w.iter().map(|wi| wi * r.powf(*pv)).collect(),
                };
                KotheSpace::weighted_lp(self.space.clone(), *p, wd)
            }
            SpaceKind::CalderonProduct { a0, a1, t } => {
                KotheSpace::calderon_product(a0.scaled(r)?, a1.scaled(r)?, *t)
            }
            SpaceKind::IndicatorInduced { phi } => {
                let shifted = indicator::IndicatorFn::affine(vec![
                    (1.0, (**phi).clone()),
                    (-r.ln(), indicator::IndicatorFn::mass(self.space.clone())),
                ])?;
                Ok(KotheSpace::indicator_induced(shifted))
            }
        }
    }

    /// Short human-readable description (used by reports).
    pub fn describe(&self) -> String {
        match &self.kind {
            SpaceKind::WeightedLp { p, w } => {
                if w.iter().all(|&wi| wi == 1.0) {
                    format!("L{p}")
                } else {
                    format!("L{p}(w)")
                }
            }
            SpaceKind::CalderonProduct { a0, a1, t } => {
                format!("[{}, {}]_{t}", a0.describe(), a1.describe())
            }
            SpaceKind::IndicatorInduced { .. } => "induced(Φ)".to_string(),
        }
    }
}

/// Norming density of a weighted Lᵖ norm on moduli (must be nonzero).
fn lp_density(mu: &[f64], moduli: &[f64], p: PExp, w: &[f64]) -> Vec<f64> {
    let n = moduli.len();
    match p {
        PExp::Inf => {
            let peak = moduli
                .iter()
                .zip(w)
                .map(|(&a, &wi)| wi * a)
                .fold(0.0, f64::max);
            let cutoff = peak * (1.0 - 1e-12);
            let ties: Vec<usize> = (0..n)
                .filter(|&i| w[i] * moduli[i] >= cutoff && moduli[i] > 0.0)
                .collect();
            let share = 1.0 / ties.len() as f64;
            let mut d = vec![0.0; n];
            for i in ties {
                d[i] = share;
            }
            d
        }
        PExp::Finite(pv) => {
            let peak = moduli
                .iter()
                .zip(w)
                .map(|(&a, &wi)| wi.powf(1.0 / pv) * a)
                .fold(0.0, f64::max);
            let mut d: Vec<f64> = (0..n)
                .map(|i| {
                    if moduli[i] == 0.0 {
                        0.0
                    } else {
                        mu[i] * (w[i].powf(1.0 / pv) * moduli[i] / peak).powf(pv)
                    }
                })
                .collect();
            let sum: f64 = d.iter().sum();
            for di in &mut d {
                *di /= sum;
            }
            d
        }
    }
}

/// Numeric Köthe dual norm: maximizes Σ μᵢ|yᵢ|xᵢ over the unit ball of `a`
/// by log-domain ratio ascent with seeded restarts.
fn dual_norm_numeric(a: &KotheSpace, y: &MVec, opts: &NumOpts) -> Result<f64> {
    let moduli = y.abs();
    let supp: Vec<usize> = (0..moduli.len()).filter(|&i| moduli[i] > 0.0).collect();
    if supp.is_empty() {
        return Ok(0.0);
    }
    let mu = a.space().mu();
    let c: Vec<f64> = supp.iter().map(|&i| mu[i] * moduli[i]).collect();
    let n_full = moduli.len();

    // Ratio in log coordinates: R(θ) = log Σ cᵢe^{θᵢ} − log‖e^θ‖.  Critical
    // points satisfy the Hölder-equality condition (weights of the linear
    // functional match the norming density), which for the lattice norms in
    // this crate pins the global maximum; restarts guard the nonsmooth cases.
    let mut eval = |theta: &[f64]| -> (f64, Vec<f64>) {
        let mut full = vec![0.0; n_full];
        for (k, &i) in supp.iter().enumerate() {
            full[i] = theta[k].exp();
        }
        let lin: f64 = c
            .iter()
            .zip(theta)
            .map(|(&ck, &th)| ck * th.exp())
            .sum();
        let norm = match a.norm_moduli(&full, opts) {
            Ok(v) => v,
            Err(_) => return (f64::NEG_INFINITY, vec![0.0; theta.len()]),
        };
        if norm == 0.0 || lin == 0.0 {
            return (f64::NEG_INFINITY, vec![0.0; theta.len()]);
        }
        let dens = match a.density_moduli(&full, opts) {
            Ok(d) => d,
            Err(_) => return (f64::NEG_INFINITY, vec![0.0; theta.len()]),
        };
        let value = lin.ln() - norm.ln();
        let grad: Vec<f64> = supp
            .iter()
            .enumerate()
            .map(|(k, &i)| c[k] * theta[k].exp() / lin - dens[i])
            .collect();
        (value, grad)
    };

    let mut best = f64::NEG_INFINITY;
    let mut best_converged = false;
    let tries = 1 + opts.restarts.min(4);
    let cap = (opts.max_iter / tries).max(200);
    for r in 0..tries {
        let theta0: Vec<f64> = if r == 0 {
            vec![0.0; supp.len()]
        } else {
            let mut rng = opt::rng_for(opts.seed, 0xD0A1 + r as u64);
            supp.iter()
                .map(|_| crate::sample::std_normal(&mut rng) * 0.7)
                .collect()
        };
        let (_, diag) = opt::ascent_backtracking(&theta0, &mut eval, opts.tol, cap);
        if diag.value > best {
            best = diag.value;
            best_converged = diag.converged;
        }
        if best_converged && r >= 1 {
            break;
        }
    }
    if !best.is_finite() {
        return Ok(0.0);
    }
    if !best_converged {
        return Err(CalcError::NonConvergence {
            op: "dual norm maximizer",
            iterations: opts.max_iter,
            residual: f64::NAN,
        });
    }
    Ok(best.exp())
}

/// A bounded multiplication operator M_b: x ↦ b∘x.
#[derive(Clone, Debug)]
pub struct Multiplier {
    b: MVec,
}

impl Multiplier {
    /// Wraps the symbol b.
    pub fn new(b: MVec) -> Self {
        Multiplier { b }
    }

    /// The symbol.
    pub fn symbol(&self) -> &MVec {
        &self.b
    }

    /// ‖b‖_∞ = sup_i |bᵢ|.
    pub fn norm_inf(&self) -> f64 {
        self.b.sup_abs()
    }

    /// Applies the multiplier: (M_b x)ᵢ = bᵢxᵢ.
    pub fn apply(&self, x: &MVec) -> Result<MVec> {
        multiplier_apply(&self.b, x)
    }
}

/// Pointwise product b∘x with space validation.
pub fn multiplier_apply(b: &MVec, x: &MVec) -> Result<MVec> {
    require_same_space(b.space(), x.space())?;
    Ok(b.mul_pointwise(x))
}

/// Convenience free function mirroring [`KotheSpace::norm`].
pub fn norm(a: &KotheSpace, x: &MVec) -> Result<f64> {
    a.norm(x)
}

/// Convenience free function mirroring [`KotheSpace::dual_norm`].
pub fn dual_norm(a: &KotheSpace, y: &MVec) -> Result<f64> {
    a.dual_norm(y)
}
