//! Centralizers: homogeneous maps with bounded multiplier commutators.
//!
//! A centralizer on a Köthe space A is a map Ω: A → L⁰ with
//! Ω(αx) = αΩ(x) for complex α, Ω bounded on the unit ball into L⁰, and
//! commutators [Ω, M_b] = Ω∘M_b − M_b∘Ω bounded A → A uniformly over
//! contraction symbols ‖b‖_∞ ≤ 1.  The built-in kinds:
//!
//! * `CanonicalOmega(couple, t)` — the derivative of the minimizing
//!   interpolation family ([`crate::interp::canonical_omega`]);
//! * `LogModulus(A)` — x ↦ x·log(|x|/‖x‖_A);
//! * `LogSymbol(g)` — x ↦ x·g, the commuting (bounded-perturbation) case;
//! * `RankLog` — x ↦ x·log μ{|x| > |xᵢ|}, a layout-sensitive kind built from
//!   superlevel measures (atoms achieving the maximum get factor 0, and tied
//!   moduli share one superlevel value);
//! * `Affine` — real-linear combinations of the above.
//!
//! The module also provides the machinery around the correspondence
//! between centralizers and interpolation couples:
//!
//! * [`lift`] — Ω⁽¹⁾(f) = Ω(a)·a* through the Lozanovsky factorization
//!   f = a·a* of the domain; for canonical kinds the lift is independent of
//!   the parameter t of the generating couple;
//! * [`phi_omega`] — Φ^Ω(f) = ∫ Ω⁽¹⁾(f) dμ, an indicator-like functional
//!   (for the canonical kind it equals Φ_{A₁} − Φ_{A₀});
//! * [`fit_equivalence`] — the bounded-equivalence constants (c₁, ĉ₂) with
//!   ‖Ωx − c₁Ω′x‖_A ≤ ĉ₂‖x‖_A over samples;
//! * [`split_centralizer`] — reconstructs a couple (A₀, A₁) from (A, Ω, t)
//!   by perturbing the indicator: Φ₀ = Φ_A − t·c·Φ^Ω,
//!   Φ₁ = Φ_A + (1−t)·c·Φ^Ω, with c from a geometric shrink schedule and the
//!   candidate functionals validated by sampling before materialization.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{CalcError, Result};
use crate::indicator::{self, IndicatorFn};
use crate::interp::{self, Couple};
use crate::measure::{require_same_space, MVec, MeasureSpace};
use crate::opt::{self, NumOpts};
use crate::sample;
use crate::spaces::KotheSpace;

/// Structural kind of a [`Centralizer`].
#[derive(Clone, Debug)]
pub enum CentralizerKind {
    /// Derivative of the minimizing interpolation family of a couple.
    CanonicalOmega { couple: Couple, t: f64 },
    /// x ↦ x·log(|x|/‖x‖_A) on the domain space.
    LogModulus,
    /// x ↦ x·g for a fixed symbol g (commutes with all multipliers).
    LogSymbol { g: MVec },
    /// x ↦ x·log μ{|x| > |xᵢ|}, with factor 0 where the superlevel set is
    /// empty (maximal atoms) and tied moduli sharing one value.
    RankLog,
    /// Real-linear combination Σ cⱼΩⱼ (domains share the measure space).
    Affine { terms: Vec<(f64, Centralizer)> },
}

/// A centralizer together with its domain space.  The constants ρ̂ and Ĉ are
/// cached write-once by the first [`check_axioms`] call.
#[derive(Clone, Debug)]
pub struct Centralizer {
    domain: KotheSpace,
    kind: CentralizerKind,
    constants: OnceLock<(f64, f64)>,
}

impl Centralizer {
    /// The canonical differential of `couple` at t; its domain is the
    /// interpolation space at t.
    pub fn canonical(couple: Couple, t: f64) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) {
            return Err(CalcError::BadParameter {
                name: "t",
                range: "(0, 1)",
                value: t,
            });
        }
        let domain = couple.interpolation_space(t)?;
        Ok(Centralizer {
            domain,
            kind: CentralizerKind::CanonicalOmega { couple, t },
            constants: OnceLock::new(),
        })
    }

    /// x ↦ x·log(|x|/‖x‖_A) on `a`.
    pub fn log_modulus(a: KotheSpace) -> Self {
        Centralizer {
            domain: a,
            kind: CentralizerKind::LogModulus,
            constants: OnceLock::new(),
        }
    }

    /// x ↦ x·g on `a`.
    pub fn log_symbol(a: KotheSpace, g: MVec) -> Result<Self> {
        require_same_space(a.space(), g.space())?;
        Ok(Centralizer {
            domain: a,
            kind: CentralizerKind::LogSymbol { g },
            constants: OnceLock::new(),
        })
    }

    /// The zero centralizer on `a` (log-symbol with symbol 0).
    pub fn zero(a: KotheSpace) -> Self {
        let g = MVec::zeros(a.space().clone());
        Centralizer {
            domain: a,
            kind: CentralizerKind::LogSymbol { g },
            constants: OnceLock::new(),
        }
    }

    /// The superlevel-measure kind on `a`.
    pub fn rank_log(a: KotheSpace) -> Self {
        Centralizer {
            domain: a,
            kind: CentralizerKind::RankLog,
            constants: OnceLock::new(),
        }
    }

    /// Real-linear combination of centralizers over one measure space; the
    /// domain is taken from the first term.
    pub fn affine(terms: Vec<(f64, Centralizer)>) -> Result<Self> {
        let first = terms.first().ok_or(CalcError::EmptySpace)?;
        let domain = first.1.domain.clone();
        for (c, om) in &terms {
            require_same_space(domain.space(), om.domain.space())?;
            if !c.is_finite() {
                return Err(CalcError::BadParameter {
                    name: "coefficient",
                    range: "finite reals",
                    value: *c,
                });
            }
        }
        Ok(Centralizer {
            domain,
            kind: CentralizerKind::Affine { terms },
            constants: OnceLock::new(),
        })
    }

    pub fn domain(&self) -> &KotheSpace {
        &self.domain
    }

    pub fn kind(&self) -> &CentralizerKind {
        &self.kind
    }

    pub fn measure_space(&self) -> &Arc<MeasureSpace> {
        self.domain.space()
    }

    /// (ρ̂, Ĉ) from the first axiom check, if one has run.
    pub fn constants(&self) -> Option<(f64, f64)> {
        self.constants.get().copied()
    }

    /// Applies the centralizer.  All kinds are exactly homogeneous:
    /// Ω(αx) = αΩ(x) for complex α.
    pub fn apply(&self, x: &MVec, opts: &NumOpts) -> Result<MVec> {
        require_same_space(self.measure_space(), x.space())?;
        match &self.kind {
            CentralizerKind::CanonicalOmega { couple, t } => {
                interp::canonical_omega(couple, *t, x, opts)
            }
            CentralizerKind::LogModulus => {
                let n = self.domain.norm_with(x, opts)?;
                if n == 0.0 {
                    return Ok(MVec::zeros(x.space().clone()));
                }
                let factors: Vec<f64> = x
                    .abs()
                    .iter()
                    .map(|&a| if a == 0.0 { 0.0 } else { (a / n).ln() })
                    .collect();
                Ok(x.mul_real(&factors))
            }
            CentralizerKind::LogSymbol { g } => Ok(x.mul_pointwise(g)),
            CentralizerKind::RankLog => {
                let mu = x.space().mu();
                let moduli = x.abs();
                let factors: Vec<f64> = moduli
                    .iter()
                    .map(|&a| {
                        if a == 0.0 {
                            return 0.0;
                        }
                        let m = crate::measure::superlevel_measure(mu, &moduli, a);
                        if m > 0.0 {
                            m.ln()
                        } else {
                            0.0
                        }
                    })
                    .collect();
                Ok(x.mul_real(&factors))
            }
            CentralizerKind::Affine { terms } => {
                let mut acc = MVec::zeros(x.space().clone());
                for (c, om) in terms {
                    let part = om.apply(x, opts)?;
                    acc = acc.add(&part.scale(Complex64::new(*c, 0.0)));
                }
                Ok(acc)
            }
        }
    }
}

/// Report of the sampled centralizer-axiom estimates.  All quantities are
/// lower bounds by nature (maxima over finite samples) and are monotone
/// nondecreasing in the sample count for a fixed seed.
#[derive(Clone, Debug)]
pub struct AxiomReport {
    /// max ‖Ω(bu) − bΩ(u)‖_A / (‖b‖_∞·‖u‖_A) over sampled (b, u).
    pub rho_hat: f64,
    /// max ‖Ω(f+g) − Ωf − Ωg‖_A / (‖f‖_A + ‖g‖_A) over sampled (f, g).
    pub c_hat: f64,
    /// (ε, M(ε)) pairs: the smallest M with μ{|Ωx| > M} ≤ ε, maximized over
    /// unit-ball samples x.
    pub m_table: Vec<(f64, f64)>,
    /// max ‖Ω(αx) − αΩ(x)‖_A / ‖x‖_A over samples and a fixed set of
    /// complex α (0 to machine precision for the built-in kinds).
    pub homogeneity_defect: f64,
    pub samples: usize,
}

/// Thresholds for the L⁰-boundedness table.
const M_EPS_LEVELS: [f64; 4] = [0.25, 0.1, 0.05, 0.01];

/// Estimates the centralizer constants by seeded sampling: the multiplier
/// commutator bound ρ̂, the quasi-additivity constant Ĉ, the L⁰ boundedness
/// table M(ε), and the homogeneity defect.  Draws are made sample-by-sample,
/// so for a fixed seed the estimates with fewer samples are prefixes (hence
/// the monotonicity property).  The first call caches (ρ̂, Ĉ) on the
/// centralizer.
pub fn check_axioms(omega: &Centralizer, samples: usize, opts: &NumOpts) -> Result<AxiomReport> {
    if samples == 0 {
        return Err(CalcError::BadParameter {
            name: "samples",
            range: "[1, ∞)",
            value: 0.0,
        });
    }
    let a = omega.domain();
    let space = omega.measure_space().clone();
    let mu = space.mu().to_vec();
    let mut rng = opt::rng_for(opts.seed, 0xA210);
    let alphas = [
        Complex64::new(0.0, 1.0),
        Complex64::new(-2.5, 0.0),
        Complex64::new(0.5, 1.2),
    ];

    let mut rho: f64 = 0.0;
    let mut c_hat: f64 = 0.0;
    let mut homog: f64 = 0.0;
    let mut m_table: Vec<(f64, f64)> = M_EPS_LEVELS.iter().map(|&e| (e, 0.0)).collect();

    for _ in 0..samples {
        let u = sample::unit_sphere_sample(a, &mut rng);
        let b = sample::random_contraction_symbol(&space, &mut rng);
        let f = sample::gaussian_complex_vec(&space, &mut rng);
        let g = sample::gaussian_complex_vec(&space, &mut rng);

        let omu = omega.apply(&u, opts)?;

        // Multiplier commutator on the unit vector u (‖b‖_∞ = 1).
        let lhs = omega.apply(&b.mul_pointwise(&u), opts)?;
        let rhs = b.mul_pointwise(&omu);
        let comm = a.norm_with(&lhs.sub(&rhs), opts)?;
        rho = rho.max(comm / b.sup_abs());

        // Quasi-additivity.
        let nf = a.norm_with(&f, opts)?;
        let ng = a.norm_with(&g, opts)?;
        if nf + ng > 1e-12 {
            let dev = omega
                .apply(&f.add(&g), opts)?
                .sub(&omega.apply(&f, opts)?)
                .sub(&omega.apply(&g, opts)?);
            c_hat = c_hat.max(a.norm_with(&dev, opts)? / (nf + ng));
        }

        // Homogeneity defect.
        for alpha in alphas {
            let dev = omega
                .apply(&u.scale(alpha), opts)?
                .sub(&omu.scale(alpha));
            homog = homog.max(a.norm_with(&dev, opts)?);
        }

        // L⁰ boundedness table from |Ωu| on the unit ball.
        let moduli = omu.abs();
        for (eps, m_val) in &mut m_table {
            let mut level = 0.0f64;
            for &cand in &moduli {
                let exceed: f64 = moduli
                    .iter()
                    .zip(&mu)
                    .filter(|(&v, _)| v > cand)
                    .map(|(_, &m)| m)
                    .sum();
                if exceed <= *eps {
                    // Smallest admissible threshold among the observed values.
                    if level == 0.0 || cand < level {
                        level = cand;
                    }
                }
            }
            *m_val = m_val.max(level);
        }
    }

    let report = AxiomReport {
        rho_hat: rho,
        c_hat,
        m_table,
        homogeneity_defect: homog,
        samples,
    };
    let _ = omega.constants.set((rho, c_hat));
    Ok(report)
}

/// The lift Ω⁽¹⁾(f) = Ω(a)·a* through the Lozanovsky factorization f = a·a*
/// of the domain space of Ω.  Positively homogeneous of degree one in f by
/// homogeneity of Ω and of the factorization; for canonical kinds the value
/// is independent of the t of the generating couple.
pub fn lift(omega: &Centralizer, f: &MVec, opts: &NumOpts) -> Result<MVec> {
    lift_through(omega, omega.domain(), f, opts)
}

/// The lift through an explicitly chosen factorization space.
pub fn lift_through(
    omega: &Centralizer,
    domain: &KotheSpace,
    f: &MVec,
    opts: &NumOpts,
) -> Result<MVec> {
    require_same_space(omega.measure_space(), f.space())?;
    require_same_space(domain.space(), f.space())?;
    let fv = f.nonneg_real()?;
    if fv.iter().all(|&x| x == 0.0) {
        return Ok(MVec::zeros(f.space().clone()));
    }
    let loz = indicator::lozanovsky_factorize(domain, f, opts)?;
    let omega_a = omega.apply(&loz.a, opts)?;
    Ok(omega_a.mul_pointwise(&loz.a_star))
}

/// Φ^Ω(f) = ∫ Ω⁽¹⁾(f) dμ split into its real value and the modulus of the
/// imaginary residual (which must vanish for real-valued Ω kinds on
/// nonnegative f — reported rather than assumed).
#[derive(Clone, Copy, Debug)]
pub struct PhiOmega {
    pub value: f64,
    pub imag_residual: f64,
}

/// Integrates the lift of Ω through `domain` against μ.
pub fn phi_omega(
    omega: &Centralizer,
    domain: &KotheSpace,
    f: &MVec,
    opts: &NumOpts,
) -> Result<PhiOmega> {
    let lifted = lift_through(omega, domain, f, opts)?;
    let total = lifted.integral();
    Ok(PhiOmega {
        value: total.re,
        imag_residual: total.im.abs(),
    })
}

/// Bounded-equivalence fit between two centralizers on one domain.
#[derive(Clone, Debug)]
pub struct EquivFit {
    /// The scalar minimizing the worst-case residual.
    pub c1: f64,
    /// ĉ₂ = max over samples of ‖Ωx − c₁Ω′x‖_A / ‖x‖_A.
    pub c2_hat: f64,
    pub samples: usize,
}

/// Fits Ω ≈ c₁·Ω′ in the bounded-equivalence sense on unit-sphere samples
/// of the domain of Ω.
///
/// Multiples of the identity are the prototypical bounded perturbations
/// (‖c₀x‖ = |c₀|·‖x‖), so a raw sup-residual minimization over c would be
/// pulled away from the structural constant by any residual that happens to
/// point along x. Instead, c₁ is the least-squares solution of the
/// gauge-extended model Ωx ≈ c₁·Ω′x + c₀·x (both coefficients real, μ-weighted
/// normal equations); c₀ only serves to identify c₁ and is then discarded.
/// ĉ₂ is the full residual sup max‖Ωxᵢ − c₁Ω′xᵢ‖_A over the samples, so an
/// identity-direction residual of size λ reports ĉ₂ = λ exactly.
pub fn fit_equivalence(
    omega: &Centralizer,
    omega_prime: &Centralizer,
    samples: usize,
    opts: &NumOpts,
) -> Result<EquivFit> {
    require_same_space(omega.measure_space(), omega_prime.measure_space())?;
    let a = omega.domain();
    let mu = a.space().mu().to_vec();
    let mut rng = opt::rng_for(opts.seed, 0xE01F);
    let mut triples: Vec<(MVec, MVec, MVec)> = Vec::with_capacity(samples);
    for _ in 0..samples.max(1) {
        let x = sample::unit_sphere_sample(a, &mut rng);
        let o = omega.apply(&x, opts)?;
        let p = omega_prime.apply(&x, opts)?;
        triples.push((x, o, p));
    }

    // μ-weighted real inner product Σᵢ μᵢ·Re(aᵢ·conj(bᵢ)) accumulated over all
    // samples; c₁, c₀ are constrained to be real.
    let dot = |u: &MVec, v: &MVec| -> f64 {
        u.vals()
            .iter()
            .zip(v.vals())
            .zip(&mu)
            .map(|((uz, vz), m)| m * (uz * vz.conj()).re)
            .sum()
    };
    let (mut pp, mut px, mut xx, mut op, mut ox) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (x, o, p) in &triples {
        pp += dot(p, p);
        px += dot(p, x);
        xx += dot(x, x);
        op += dot(o, p);
        ox += dot(o, x);
    }
    if pp <= 1e-30 {
        let mut worst = 0.0f64;
        for (_, o, _) in &triples {
            worst = worst.max(a.norm_with(o, opts)?);
        }
        return Ok(EquivFit {
            c1: 0.0,
            c2_hat: worst,
            samples: triples.len(),
        });
    }
    let det = pp * xx - px * px;
    let c1 = if det > 1e-12 * pp * xx.max(1e-30) {
        (op * xx - ox * px) / det
    } else {
        // Ω′x is (numerically) proportional to x across the samples: the gauge
        // direction is indistinguishable from Ω′, so fit c₁ alone.
        op / pp
    };
    if !c1.is_finite() {
        return Err(CalcError::NonConvergence {
            op: "equivalence least-squares system",
            iterations: triples.len(),
            residual: f64::NAN,
        });
    }
    let mut c2_hat = 0.0f64;
    for (_, o, p) in &triples {
        let r = o.sub(&p.scale(Complex64::new(c1, 0.0)));
        let nr = a.norm_with(&r, opts)?;
        if !nr.is_finite() {
            return Err(CalcError::NonConvergence {
                op: "equivalence residual norm",
                iterations: triples.len(),
                residual: f64::NAN,
            });
        }
        c2_hat = c2_hat.max(nr);
    }
    Ok(EquivFit {
        c1,
        c2_hat,
        samples: triples.len(),
    })
}

/// The default geometric shrink schedule for [`split_centralizer`]:
/// 1, 1/2, …, 2⁻²⁰.
pub fn default_shrink_schedule() -> Vec<f64> {
    (0..=20).map(|k| 0.5f64.powi(k)).collect()
}

/// Margins of the sampled indicator-law checks for one candidate functional.
#[derive(Clone, Copy, Debug)]
pub struct SplitMargins {
    /// min over pairs of Δ_Φ (must be ≥ −tolerance).
    pub min_delta: f64,
    /// max over pairs of Δ_Φ − Δ_{Φ_{L¹}} (must be ≤ tolerance).
    pub domination_defect: f64,
}

/// Outcome of a centralizer split: the recovered couple and its defects.
#[derive(Clone, Debug)]
pub struct SplitOutcome {
    /// The accepted scale c from the shrink schedule.
    pub scale: f64,
    pub phi0: IndicatorFn,
    pub phi1: IndicatorFn,
    pub a0: KotheSpace,
    pub a1: KotheSpace,
    pub couple: Couple,
    /// max |(1−t)Φ₀(f) + tΦ₁(f) − Φ_A(f)| over samples (affine closure —
    /// zero up to float roundoff by construction).
    pub recombination_defect: f64,
    pub margins0: SplitMargins,
    pub margins1: SplitMargins,
    /// max |‖x‖_{[A₀,A₁]_t} / ‖x‖_A − 1| over samples.
    pub interp_defect: f64,
    /// fit_equivalence(c·Ω, canonical differential of the recovered couple).
    pub equivalence: EquivFit,
    pub pairs_checked: usize,
}

/// Reconstructs a couple from (A, Ω, t): perturbs the indicator of A by the
/// lifted functional, Φ₀ = Φ_A − t·c·Φ^Ω and Φ₁ = Φ_A + (1−t)·c·Φ^Ω, taking
/// the largest scale c in the schedule for which both candidates pass the
/// sampled indicator laws (nonnegative superadditivity defect dominated by
/// the L¹ defect).  The endpoints are materialized as indicator-induced
/// spaces; by construction (1−t)Φ₀ + tΦ₁ = Φ_A, so the couple interpolates
/// back to A, and the canonical differential of the recovered couple is
/// equivalent to c·Ω.
pub fn split_centralizer(
    a: &KotheSpace,
    omega: &Centralizer,
    t: f64,
    schedule: &[f64],
    opts: &NumOpts,
) -> Result<SplitOutcome> {
    if !(t > 0.0 && t < 1.0) {
        return Err(CalcError::BadParameter {
            name: "t",
            range: "(0, 1)",
            value: t,
        });
    }
    require_same_space(a.space(), omega.measure_space())?;
    if schedule.is_empty() {
        return Err(CalcError::ScheduleExhausted(
            "empty shrink schedule".to_string(),
        ));
    }
    let space = a.space().clone();
    let phi_a = indicator::indicator_of_space(a);
    let phi_om = IndicatorFn::lifted(omega.clone(), a.clone())?;
    let l1 =
        IndicatorFn::closed_form_lp(space.clone(), crate::measure::PExp::Finite(1.0), vec![
            1.0;
            space.n()
        ])?;

    let pairs = 120usize;
    let mut worst_violation = f64::NEG_INFINITY;
    let mut worst_c = schedule[0];

    for &c in schedule {
        if !(c.is_finite() && c > 0.0) {
            return Err(CalcError::BadParameter {
                name: "schedule entry",
                range: "(0, ∞)",
                value: c,
            });
        }
        let phi0 = IndicatorFn::affine(vec![(1.0, phi_a.clone()), (-t * c, phi_om.clone())])?;
        let phi1 =
            IndicatorFn::affine(vec![(1.0, phi_a.clone()), ((1.0 - t) * c, phi_om.clone())])?;

        // Sampled indicator laws for both candidates.
        let mut rng = opt::rng_for(opts.seed, 0x5B11);
        let mut ok = true;
        let mut viol: f64 = f64::NEG_INFINITY;
        let mut m0 = SplitMargins {
            min_delta: f64::INFINITY,
            domination_defect: f64::NEG_INFINITY,
        };
        let mut m1 = m0;
        for _ in 0..pairs {
            let f = sample::lognormal_vec(&space, 1.0, &mut rng);
            let g = sample::lognormal_vec(&space, 1.0, &mut rng);
            let mass = f.integral().re + g.integral().re;
            let tol = 1e-7 * mass.max(1.0);
            let d_l1 = indicator::delta_phi(&l1, &f, &g, opts)?;
            for (phi, margins) in [(&phi0, &mut m0), (&phi1, &mut m1)] {
                let d = indicator::delta_phi(phi, &f, &g, opts)?;
                margins.min_delta = margins.min_delta.min(d);
                margins.domination_defect = margins.domination_defect.max(d - d_l1);
                viol = viol.max(-d).max(d - d_l1);
                if d < -tol || d - d_l1 > tol {
                    ok = false;
                }
            }
            if !ok {
                break;
            }
        }
        if !ok {
            if viol > worst_violation {
                worst_violation = viol;
                worst_c = c;
            }
            continue;
        }

        // Accepted: materialize and measure the defects.
        let a0 = KotheSpace::indicator_induced(phi0.clone());
        let a1 = KotheSpace::indicator_induced(phi1.clone());
        let couple = Couple::new(a0.clone(), a1.clone())?;

        let mut rng = opt::rng_for(opts.seed, 0x5B12);
        let mut recomb: f64 = 0.0;
        for _ in 0..pairs.min(40) {
            let f = sample::lognormal_vec(&space, 1.0, &mut rng);
            let v0 = phi0.eval(&f, opts)?;
            let v1 = phi1.eval(&f, opts)?;
            let va = phi_a.eval(&f, opts)?;
            recomb = recomb.max(((1.0 - t) * v0 + t * v1 - va).abs());
        }

        let mut interp_defect: f64 = 0.0;
        let x_samples = 6usize;
        for _ in 0..x_samples {
            let x = sample::gaussian_complex_vec(&space, &mut rng);
            let na = a.norm_with(&x, opts)?;
            if na <= 1e-9 {
                continue;
            }
            let nt = interp::calderon_norm(&couple, t, &x, opts)?.norm;
            interp_defect = interp_defect.max((nt / na - 1.0).abs());
        }

        let scaled_omega = Centralizer::affine(vec![(c, omega.clone())])?;
        let canonical_new = Centralizer::canonical(couple.clone(), t)?;
        let equivalence = fit_equivalence(&scaled_omega, &canonical_new, x_samples, opts)?;

        return Ok(SplitOutcome {
            scale: c,
            phi0,
            phi1,
            a0,
            a1,
            couple,
            recombination_defect: recomb,
            margins0: m0,
            margins1: m1,
            interp_defect,
            equivalence,
            pairs_checked: pairs,
        });
    }

    Err(CalcError::ScheduleExhausted(format!(
        "no scale passed the indicator checks; largest violation {worst_violation:.3e} at c={worst_c:.3e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{MVec, PExp};
    use rand::Rng;

    fn counting(n: usize) -> Arc<MeasureSpace> {
        MeasureSpace::counting(n).unwrap()
    }

    fn lp(s: &Arc<MeasureSpace>, p: f64) -> KotheSpace {
        KotheSpace::lp(s.clone(), PExp::new(p).unwrap()).unwrap()
    }

    #[test]
    fn log_symbol_commutes_with_multipliers() {
        let s = counting(4);
        let g = MVec::from_real(s.clone(), vec![0.1, -0.4, 0.7, 0.0]).unwrap();
        let om = Centralizer::log_symbol(lp(&s, 2.0), g).unwrap();
        let report = check_axioms(&om, 60, &NumOpts::default()).unwrap();
        assert!(report.rho_hat < 1e-12, "ρ̂ = {}", report.rho_hat);
        assert!(report.homogeneity_defect < 1e-12);
    }

    #[test]
    fn built_in_kinds_have_exact_homogeneity() {
        let s = counting(3);
        let a = lp(&s, 2.0);
        let couple = Couple::new(lp(&s, 1.0), lp(&s, 4.0)).unwrap();
        let kinds = vec![
            Centralizer::log_modulus(a.clone()),
            Centralizer::rank_log(a.clone()),
            Centralizer::canonical(couple, 0.5).unwrap(),
            Centralizer::affine(vec![
                (0.7, Centralizer::log_modulus(a.clone())),
                (-0.2, Centralizer::rank_log(a)),
            ])
            .unwrap(),
        ];
        for om in kinds {
            let report = check_axioms(&om, 25, &NumOpts::default()).unwrap();
            assert!(
                report.homogeneity_defect < 1e-12,
                "{:?}: defect {}",
                om.kind(),
                report.homogeneity_defect
            );
        }
    }

    #[test]
    fn log_modulus_commutator_stable_across_dimension() {
        let mut rhos = Vec::new();
        for n in [4usize, 16, 64] {
            let s = counting(n);
            let om = Centralizer::log_modulus(lp(&s, 2.0));
            let report = check_axioms(&om, 120, &NumOpts::default()).unwrap();
            assert!(report.rho_hat.is_finite() && report.rho_hat > 0.0);
            rhos.push(report.rho_hat);
        }
        let lo = rhos.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = rhos.iter().cloned().fold(0.0, f64::max);
        assert!(hi / lo < 1.5, "ρ̂ unstable across n: {rhos:?}");
    }

    #[test]
    fn estimates_are_monotone_in_sample_count() {
        let s = counting(5);
        let om = Centralizer::log_modulus(lp(&s, 2.5));
        let small = check_axioms(&om, 30, &NumOpts::default()).unwrap();
        let large = check_axioms(&om, 120, &NumOpts::default()).unwrap();
        assert!(large.rho_hat >= small.rho_hat);
        assert!(large.c_hat >= small.c_hat);
    }

    #[test]
    fn lift_of_zero_map_is_zero() {
        let s = counting(3);
        let om = Centralizer::zero(lp(&s, 2.0));
        let f = MVec::from_real(s, vec![0.2, 0.5, 0.3]).unwrap();
        let lifted = lift(&om, &f, &NumOpts::default()).unwrap();
        assert!(lifted.vals().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn lift_is_positively_homogeneous() {
        let s = counting(3);
        let couple = Couple::new(lp(&s, 1.0), lp(&s, 3.0)).unwrap();
        let om = Centralizer::canonical(couple, 0.4).unwrap();
        let f = MVec::from_real(s, vec![0.2, 0.5, 0.3]).unwrap();
        let opts = NumOpts::default();
        let alpha = 2.9;
        let l1 = lift(&om, &f.scale(Complex64::new(alpha, 0.0)), &opts).unwrap();
        let l2 = lift(&om, &f, &opts).unwrap().scale(Complex64::new(alpha, 0.0));
        for i in 0..3 {
            assert!((l1.vals()[i] - l2.vals()[i]).norm() < 1e-9);
        }
    }

    #[test]
    fn canonical_lift_is_t_independent() {
        let s = counting(2);
        let opts = NumOpts::default();
        let x = MVec::from_real(s.clone(), vec![0.2, 0.8]).unwrap();
        let couple = Couple::new(lp(&s, 1.0), lp(&s, f64::INFINITY)).unwrap();
        let om_a = Centralizer::canonical(couple.clone(), 1.0 / 3.0).unwrap();
        let om_b = Centralizer::canonical(couple, 2.0 / 3.0).unwrap();
        let la = lift(&om_a, &x, &opts).unwrap();
        let lb = lift(&om_b, &x, &opts).unwrap();
        for i in 0..2 {
            assert!(
                (la.vals()[i] - lb.vals()[i]).norm() < 1e-6,
                "atom {i}: {} vs {}",
                la.vals()[i],
                lb.vals()[i]
            );
        }
        // The lift for this couple is the entropy kernel −f·log f.
        for i in 0..2 {
            let expect = -x.re()[i] * x.re()[i].ln();
            assert!((la.vals()[i].re - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn canonical_lift_t_independent_on_weighted_couples() {
        let s = MeasureSpace::new(vec![0.8, 1.2, 1.0]).unwrap();
        let mut rng = opt::rng_for(41, 0);
        let opts = NumOpts::default();
        let w0: Vec<f64> = (0..3).map(|_| rng.gen_range(0.4..2.0)).collect();
        let w1: Vec<f64> = (0..3).map(|_| rng.gen_range(0.4..2.0)).collect();
        let a0 = KotheSpace::weighted_lp(s.clone(), PExp::Finite(1.6), w0).unwrap();
        let a1 = KotheSpace::weighted_lp(s.clone(), PExp::Finite(3.4), w1).unwrap();
        let couple = Couple::new(a0, a1).unwrap();
        let f = sample::lognormal_vec(&s, 0.7, &mut rng);
        let la = lift(&Centralizer::canonical(couple.clone(), 0.25).unwrap(), &f, &opts).unwrap();
        let lb = lift(&Centralizer::canonical(couple, 0.75).unwrap(), &f, &opts).unwrap();
        for i in 0..3 {
            assert!((la.vals()[i] - lb.vals()[i]).norm() < 1e-6);
        }
    }

    #[test]
    fn phi_omega_is_entropy_for_l1_linf_couple() {
        let s = counting(3);
        let opts = NumOpts::default();
        let couple = Couple::new(lp(&s, 1.0), lp(&s, f64::INFINITY)).unwrap();
        let om = Centralizer::canonical(couple, 0.5).unwrap();
        let domain = om.domain().clone();
        let f = MVec::from_real(s, vec![0.2, 0.3, 0.5]).unwrap();
        let p = phi_omega(&om, &domain, &f, &opts).unwrap();
        let expect: f64 = f.re().iter().map(|&fi| -fi * fi.ln()).sum();
        assert!((p.value - expect).abs() < 1e-9, "{} vs {expect}", p.value);
        assert!(p.imag_residual <= 1e-8);
    }

    #[test]
    fn phi_omega_single_atom_and_homogeneity() {
        let s = counting(2);
        let opts = NumOpts::default();
        let couple = Couple::new(lp(&s, 1.0), lp(&s, f64::INFINITY)).unwrap();
        let om = Centralizer::canonical(couple, 0.3).unwrap();
        let domain = om.domain().clone();
        let e1 = MVec::from_real(s.clone(), vec![1.0, 0.0]).unwrap();
        let v = phi_omega(&om, &domain, &e1, &opts).unwrap();
        assert!(v.value.abs() < 1e-10, "−1·log 1 = 0, got {}", v.value);
        // The lift kernel is −f·log(f/‖f‖₁), so every single atom maps to zero
        // and Φ^Ω is exactly positively homogeneous: Φ^Ω(αf) = α·Φ^Ω(f).
        let alpha = 3.3;
        let va = phi_omega(&om, &domain, &e1.scale(Complex64::new(alpha, 0.0)), &opts).unwrap();
        assert!(va.value.abs() < 1e-9, "atom stays zero under scaling, got {}", va.value);
        let f = MVec::from_real(s, vec![0.25, 0.75]).unwrap();
        let vf = phi_omega(&om, &domain, &f, &opts).unwrap();
        let vaf = phi_omega(&om, &domain, &f.scale(Complex64::new(alpha, 0.0)), &opts).unwrap();
        assert!(
            (vaf.value - alpha * vf.value).abs() < 1e-9,
            "{} vs {}",
            vaf.value,
            alpha * vf.value
        );
    }

    #[test]
    fn phi_omega_defect_band_on_sampled_pairs() {
        // The lift of the canonical Ω of (A₀, A₁) integrates to Φ_{A₁} − Φ_{A₀}.
        // For (ℓ¹, ℓ^∞) that is −Σ f·log(f/‖f‖₁): a concave-homogeneous
        // functional whose superadditivity defect Δ lies in [−log 2·mass, 0].
        // The mirrored couple (ℓ^∞, ℓ¹) flips the sign and gives the
        // nonnegative band [0, log 2·mass].
        let s = counting(3);
        let opts = NumOpts::default();
        let delta_hat = std::f64::consts::LN_2;
        for flipped in [false, true] {
            let couple = if flipped {
                Couple::new(lp(&s, f64::INFINITY), lp(&s, 1.0)).unwrap()
            } else {
                Couple::new(lp(&s, 1.0), lp(&s, f64::INFINITY)).unwrap()
            };
            let om = Centralizer::canonical(couple, 0.5).unwrap();
            let domain = om.domain().clone();
            let mut rng = opt::rng_for(42, 0);
            for _ in 0..1000 {
                let f = sample::lognormal_vec(&s, 1.0, &mut rng);
                let g = sample::lognormal_vec(&s, 1.0, &mut rng);
                let vf = phi_omega(&om, &domain, &f, &opts).unwrap().value;
                let vg = phi_omega(&om, &domain, &g, &opts).unwrap().value;
                let vfg = phi_omega(&om, &domain, &f.add(&g), &opts).unwrap().value;
                let d = if flipped {
                    vf + vg - vfg
                } else {
                    vfg - vf - vg
                };
                let mass = f.integral().re + g.integral().re;
                assert!(d >= -1e-9 * mass, "Δ = {d} (flipped = {flipped})");
                assert!(
                    d <= (delta_hat + 1e-6) * mass,
                    "Δ = {d} exceeds band (flipped = {flipped})"
                );
            }
        }
    }

    #[test]
    fn fit_equivalence_identity_pair() {
        let s = counting(4);
        let om = Centralizer::log_modulus(lp(&s, 2.0));
        let fit = fit_equivalence(&om, &om, 8, &NumOpts::default()).unwrap();
        assert!((fit.c1 - 1.0).abs() < 1e-6, "c1 = {}", fit.c1);
        assert!(fit.c2_hat < 1e-9, "c2 = {}", fit.c2_hat);
    }

    #[test]
    fn fit_equivalence_of_scaled_couples_gives_log_ratio() {
        let s = counting(3);
        let c = Couple::new(lp(&s, 1.0), lp(&s, 3.0)).unwrap();
        let (r0, r1) = (std::f64::consts::E, 1.0);
        let om_a = Centralizer::canonical(c.clone(), 0.4).unwrap();
        let om_b = Centralizer::canonical(c.scaled(r0, r1).unwrap(), 0.4).unwrap();
        let fit = fit_equivalence(&om_b, &om_a, 10, &NumOpts::default()).unwrap();
        let lambda = (r0 / r1).ln();
        assert!((fit.c1 - 1.0).abs() < 1e-3, "c1 = {}", fit.c1);
        assert!((fit.c2_hat - lambda).abs() < 1e-3 * lambda, "c2 = {}", fit.c2_hat);
    }

    #[test]
    fn fit_equivalence_log_modulus_vs_canonical() {
        let s = counting(4);
        let (p0, p1, t) = (2.0, 4.0, 0.5);
        let c = Couple::new(lp(&s, p0), lp(&s, p1)).unwrap();
        let canonical = Centralizer::canonical(c.clone(), t).unwrap();
        let at = c.weighted_lp_interpolant(t).unwrap();
        let logmod = Centralizer::log_modulus(at);
        let fit = fit_equivalence(&canonical, &logmod, 8, &NumOpts::default()).unwrap();
        let pt = 8.0 / 3.0;
        let expect = pt * (1.0 / p1 - 1.0 / p0);
        assert!((fit.c1 - expect).abs() < 1e-6, "c1 = {} vs {expect}", fit.c1);
        assert!(fit.c2_hat < 1e-6, "c2 = {}", fit.c2_hat);
    }

    #[test]
    fn split_zero_centralizer_returns_original_space() {
        let s = counting(3);
        let a = lp(&s, 2.0);
        let om = Centralizer::zero(a.clone());
        let schedule = default_shrink_schedule();
        let out = split_centralizer(&a, &om, 0.5, &schedule, &NumOpts::default()).unwrap();
        assert_eq!(out.scale, 1.0);
        assert!(out.recombination_defect < 1e-12);
        let mut rng = opt::rng_for(43, 0);
        for _ in 0..5 {
            let x = sample::gaussian_complex_vec(&s, &mut rng);
            let na = a.norm(&x).unwrap();
            let n0 = out.a0.norm(&x).unwrap();
            let n1 = out.a1.norm(&x).unwrap();
            assert!((n0 - na).abs() < 1e-3 * na.max(1e-9));
            assert!((n1 - na).abs() < 1e-3 * na.max(1e-9));
        }
    }

    #[test]
    fn split_log_modulus_on_l2_recovers_l4_couple() {
        let s = counting(3);
        let a = lp(&s, 2.0);
        let om = Centralizer::log_modulus(a.clone());
        let schedule = default_shrink_schedule();
        let opts = NumOpts::default();
        let out = split_centralizer(&a, &om, 0.5, &schedule, &opts).unwrap();
        assert_eq!(out.scale, 1.0, "full scale should pass for this model");
        assert!(out.recombination_defect < 1e-12);
        assert!(out.interp_defect < 1e-3, "interp defect {}", out.interp_defect);
        assert!((out.equivalence.c1 - 1.0).abs() < 2e-2, "c1 = {}", out.equivalence.c1);
        assert!(out.equivalence.c2_hat < 2e-2, "c2 = {}", out.equivalence.c2_hat);

        // With Φ_{ℓ²} − (1/2)·Φ^Ω and Φ^Ω(f) = Σ f·log(f^{1/2}/‖·‖...) the
        // perturbed indicators are those of ℓ⁴ and ℓ^{4/3}: verify against
        // the closed forms.
        let phi4 = IndicatorFn::closed_form_lp(s.clone(), PExp::Finite(4.0), vec![1.0; 3]).unwrap();
        let phi43 =
            IndicatorFn::closed_form_lp(s.clone(), PExp::Finite(4.0 / 3.0), vec![1.0; 3]).unwrap();
        let mut rng = opt::rng_for(44, 0);
        for _ in 0..20 {
            let f = sample::lognormal_vec(&s, 1.0, &mut rng);
            let v0 = out.phi0.eval(&f, &opts).unwrap();
            let v1 = out.phi1.eval(&f, &opts).unwrap();
            let e0 = phi4.eval(&f, &opts).unwrap();
            let e1 = phi43.eval(&f, &opts).unwrap();
            assert!((v0 - e0).abs() < 1e-8 * (1.0 + e0.abs()), "{v0} vs {e0}");
            assert!((v1 - e1).abs() < 1e-8 * (1.0 + e1.abs()), "{v1} vs {e1}");
        }
    }

    #[test]
    fn split_log_symbol_rescales_weights() {
        let s = counting(3);
        let p = 2.0;
        let a = lp(&s, p);
        let g = MVec::from_real(s.clone(), vec![0.2, -0.1, 0.05]).unwrap();
        let om = Centralizer::log_symbol(a.clone(), g.clone()).unwrap();
        let schedule = default_shrink_schedule();
        let opts = NumOpts::default();
        let t = 0.5;
        let out = split_centralizer(&a, &om, t, &schedule, &opts).unwrap();
        let c = out.scale;
        // Φ₀ = Φ_A − t·c·⟨f, g⟩ is the indicator of Lᵖ with weights
        // multiplied by e^{p·t·c·g}.
        let w0: Vec<f64> = g.re().iter().map(|&gi| (p * t * c * gi).exp()).collect();
        let b0 = KotheSpace::weighted_lp(s.clone(), PExp::Finite(p), w0).unwrap();
        let mut rng = opt::rng_for(45, 0);
        for _ in 0..5 {
            let x = sample::gaussian_complex_vec(&s, &mut rng);
            let lhs = out.a0.norm(&x).unwrap();
            let rhs = b0.norm(&x).unwrap();
            assert!((lhs - rhs).abs() < 1e-3 * rhs.max(1e-9), "{lhs} vs {rhs}");
        }
        // Canonical differential of the recovered couple is exactly c·Ω.
        assert!((out.equivalence.c1 - 1.0).abs() < 1e-3);
        assert!(out.equivalence.c2_hat < 1e-3);
    }

    #[test]
    fn rank_log_applies_superlevel_convention() {
        let s = counting(3);
        let om = Centralizer::rank_log(lp(&s, 2.0));
        let x = MVec::from_real(s, vec![2.0, 1.0, 1.0]).unwrap();
        let y = om.apply(&x, &NumOpts::default()).unwrap();
        // Max atom: empty superlevel set → factor 0 by convention.
        assert_eq!(y.vals()[0], Complex64::new(0.0, 0.0));
        // Tied atoms share μ{|x| > 1} = 1 → factor log 1 = 0.
        assert_eq!(y.vals()[1], Complex64::new(0.0, 0.0));
        assert_eq!(y.vals()[2], Complex64::new(0.0, 0.0));
        let x2 = MVec::from_real(counting(4), vec![3.0, 2.0, 2.0, 1.0]).unwrap();
        let om2 = Centralizer::rank_log(lp(&counting(4), 2.0));
        // Different measure-space instances with equal content compare equal.
        let y2 = om2.apply(&x2, &NumOpts::default()).unwrap();
        assert_eq!(y2.vals()[0], Complex64::new(0.0, 0.0));
        let expect = 2.0 * (1.0f64).ln();
        assert!((y2.vals()[1].re - expect).abs() < 1e-12);
        let expect3 = 1.0 * (3.0f64).ln();
        assert!((y2.vals()[3].re - expect3).abs() < 1e-12);
    }
}
