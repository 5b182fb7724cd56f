//! Indicator (entropy) functionals of Köthe spaces.
//!
//! The indicator of a space A is Φ_A(f) = sup{ ∫ f·log|x| dμ : ‖x‖_A ≤ 1 }
//! for nonnegative f.  It is positively homogeneous, superadditive, and
//! determines the norm: ‖x‖_A = exp sup{ ⟨f, log|x|⟩_μ − Φ_A(f) } over the
//! μ-simplex.  Key computable facts realized here:
//!
//! * weighted Lᵖ closed form: Φ(f) = (1/p)·Σ μᵢfᵢ·log(fᵢ/(m·wᵢ)) with
//!   m = ∫f dμ (Lagrange solution; for p = ∞ the maximizer is 1/w and
//!   Φ(f) = −Σ μᵢfᵢ log wᵢ);
//! * interpolation acts affinely: the indicator of the interpolation space
//!   at t is (1−t)Φ_{A₀} + tΦ_{A₁}, so couples can be manipulated through
//!   their indicators by plain linear algebra;
//! * the superadditivity defect Δ_Φ(f,g) = Φ(f)+Φ(g)−Φ(f+g) lies in
//!   [0, δ(Φ)(‖f‖₁+‖g‖₁)] with δ(Φ) ≤ log 2, attained for L¹ on disjoint
//!   equal-mass pairs — the deterministic witnesses used by
//!   [`estimate_delta`];
//! * the maximizer x_f realizing Φ_A(f) gives the Lozanovsky factorization
//!   f = a·a* with ‖a‖_A = 1 and ‖a*‖_{A*} = ∫f dμ, and the complementary
//!   identity Φ_{L¹} = Φ_A + Φ_{A*}.
//!
//! Conventions: 0·log 0 = 0 throughout; in finite dimensions every
//! nonnegative vector is admissible.  All suprema are computed by certified
//! concave maximization ([`crate::opt`]); nonconvergence is reported through
//! flags with the best lower bound retained.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::centralizer::{self, Centralizer};
use crate::error::{CalcError, Result};
use crate::measure::{require_same_space, MVec, MeasureSpace, PExp};
use crate::opt::{self, NumOpts};
use crate::sample;
use crate::spaces::{KotheSpace, SpaceKind};

/// Floor applied inside logarithms of mirror-ascent iterates.
const LOG_FLOOR: f64 = 1e-300;

/// The structural kind of an [`IndicatorFn`].
#[derive(Clone, Debug)]
pub enum IndicatorKind {
    /// Lagrange closed form for a weighted Lᵖ space.
    ClosedFormLp { p: PExp, w: Vec<f64> },
    /// Supremum over the unit ball of an arbitrary space, computed by
    /// concave maximization.
    Numeric { a: Box<KotheSpace> },
    /// Φ(f) = ∫ f dμ — the indicator of the ball of radius e in L^∞ and the
    /// building block for norm-scaling shifts Φ_{rA} = Φ_A − (∫f dμ)·log r.
    Mass,
    /// Finite linear combination Σ cⱼ·Φⱼ with real coefficients.
    Affine { terms: Vec<(f64, IndicatorFn)> },
    /// The functional f ↦ ∫ Ω(a)·a* dμ obtained by lifting a centralizer Ω
    /// through the Lozanovsky factorization f = a·a* of the domain space.
    Lifted {
        omega: Box<Centralizer>,
        domain: Box<KotheSpace>,
    },
}

/// An indicator (entropy) functional over a fixed measure space.
#[derive(Clone, Debug)]
pub struct IndicatorFn {
    space: Arc<MeasureSpace>,
    kind: IndicatorKind,
    delta_cache: OnceLock<f64>,
}

impl IndicatorFn {
    /// The closed-form indicator of a weighted Lᵖ space.
    pub fn closed_form_lp(space: Arc<MeasureSpace>, p: PExp, w: Vec<f64>) -> Result<Self> {
        // Reuse the weight validation of the space constructor.
        KotheSpace::weighted_lp(space.clone(), p, w.clone())?;
        Ok(IndicatorFn {
            space,
            kind: IndicatorKind::ClosedFormLp { p, w },
            delta_cache: OnceLock::new(),
        })
    }

    /// The indicator of an arbitrary space, evaluated by maximization.
    pub fn numeric(a: KotheSpace) -> Self {
        IndicatorFn {
            space: a.space().clone(),
            kind: IndicatorKind::Numeric { a: Box::new(a) },
            delta_cache: OnceLock::new(),
        }
    }

    /// The mass functional f ↦ ∫ f dμ.
    pub fn mass(space: Arc<MeasureSpace>) -> Self {
        IndicatorFn {
            space,
            kind: IndicatorKind::Mass,
            delta_cache: OnceLock::new(),
        }
    }

    /// A real-linear combination of indicators on one measure space.
    pub fn affine(terms: Vec<(f64, IndicatorFn)>) -> Result<Self> {
        let first = terms.first().ok_or(CalcError::EmptySpace)?;
        let space = first.1.space.clone();
        for (c, phi) in &terms {
            require_same_space(&space, &phi.space)?;
            if !c.is_finite() {
                return Err(CalcError::BadParameter {
                    name: "coefficient",
                    range: "finite reals",
                    value: *c,
                });
            }
        }
        Ok(IndicatorFn {
            space,
            kind: IndicatorKind::Affine { terms },
            delta_cache: OnceLock::new(),
        })
    }

    /// The lift of a centralizer through the factorization of `domain`:
    /// f ↦ ∫ Ω(a)·a* dμ where f = a·a* is the optimal factorization.
    /// Only the real part enters indicator arithmetic; the imaginary
    /// residual is available through [`crate::centralizer::phi_omega`].
    pub fn lifted(omega: Centralizer, domain: KotheSpace) -> Result<Self> {
        require_same_space(omega.measure_space(), domain.space())?;
        let space = domain.space().clone();
        Ok(IndicatorFn {
            space,
            kind: IndicatorKind::Lifted {
                omega: Box::new(omega),
                domain: Box::new(domain),
            },
            delta_cache: OnceLock::new(),
        })
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    pub fn kind(&self) -> &IndicatorKind {
        &self.kind
    }

    /// Evaluates Φ(f) for nonnegative real f.
    pub fn eval(&self, f: &MVec, opts: &NumOpts) -> Result<f64> {
        require_same_space(&self.space, f.space())?;
        let fv = f.nonneg_real()?;
        self.eval_slice(&fv, opts)
    }

    /// δ(Φ) when available in closed form: log 2/p for Lᵖ(w), 0 for L^∞ and
    /// Mass, and the triangle bound Σ|cⱼ|δⱼ for affine combinations.
    pub fn known_delta(&self) -> Option<f64> {
        match &self.kind {
            IndicatorKind::ClosedFormLp { p, .. } => match p {
                PExp::Finite(pv) => Some(std::f64::consts::LN_2 / pv),
                PExp::Inf => Some(0.0),
            },
            IndicatorKind::Mass => Some(0.0),
            IndicatorKind::Affine { terms } => {
                let mut total = 0.0;
                for (c, phi) in terms {
                    total += c.abs() * phi.known_delta()?;
                }
                Some(total)
            }
            _ => None,
        }
    }

    /// A cached δ(Φ) estimate: the closed form when known, otherwise the
    /// best sampled lower bound (write-once per functional).
    pub fn delta_estimate(&self, budget: usize, opts: &NumOpts) -> Result<f64> {
        if let Some(d) = self.known_delta() {
            return Ok(d);
        }
        if let Some(&d) = self.delta_cache.get() {
            return Ok(d);
        }
        let est = estimate_delta(self, budget, opts)?;
        Ok(*self.delta_cache.get_or_init(|| est.value))
    }

    pub(crate) fn eval_slice(&self, f: &[f64], opts: &NumOpts) -> Result<f64> {
        let mu = self.space.mu();
        match &self.kind {
            IndicatorKind::ClosedFormLp { p, w } => Ok(closed_form_lp_value(mu, f, *p, w)),
            IndicatorKind::Mass => Ok(mu.iter().zip(f).map(|(&m, &fi)| m * fi).sum()),
            IndicatorKind::Numeric { a } => Ok(numeric_phi(a, f, opts)?.value),
            IndicatorKind::Affine { terms } => {
                let mut acc = 0.0;
                for (c, phi) in terms {
                    acc += c * phi.eval_slice(f, opts)?;
                }
                Ok(acc)
            }
            IndicatorKind::Lifted { omega, domain } => {
                let fv = MVec::from_real(self.space.clone(), f.to_vec())?;
                Ok(centralizer::phi_omega(omega, domain, &fv, opts)?.value)
            }
        }
    }

    /// Partial derivatives ∂Φ/∂mᵢ with respect to the masses mᵢ = μᵢfᵢ
    /// (the natural coordinates of the simplex maximization).  Entries with
    /// fᵢ = 0 are evaluated at the log floor.
    pub(crate) fn grad_m(&self, f: &[f64], opts: &NumOpts) -> Result<Vec<f64>> {
        let mu = self.space.mu();
        match &self.kind {
            IndicatorKind::ClosedFormLp { p, w } => {
                let m: f64 = mu.iter().zip(f).map(|(&m, &fi)| m * fi).sum();
                let m = m.max(LOG_FLOOR);
                Ok(match p {
                    PExp::Finite(pv) => f
                        .iter()
                        .zip(w)
                        .map(|(&fi, &wi)| (fi.max(LOG_FLOOR) / (m * wi)).ln() / pv)
                        .collect(),
                    PExp::Inf => w.iter().map(|&wi| -wi.ln()).collect(),
                })
            }
            IndicatorKind::Mass => Ok(vec![1.0; f.len()]),
            IndicatorKind::Numeric { a } => {
                let sol = numeric_phi(a, f, opts)?;
                Ok(sol
                    .maximizer
                    .iter()
                    .map(|&xi| xi.max(LOG_FLOOR).ln())
                    .collect())
            }
            IndicatorKind::Affine { terms } => {
                let mut acc = vec![0.0; f.len()];
                for (c, phi) in terms {
                    let g = phi.grad_m(f, opts)?;
                    for (ai, gi) in acc.iter_mut().zip(g) {
                        *ai += c * gi;
                    }
                }
                Ok(acc)
            }
            IndicatorKind::Lifted { .. } => {
                // Central finite differences in f-coordinates.
                let mut g = vec![0.0; f.len()];
                let mut fp = f.to_vec();
                for i in 0..f.len() {
                    let h = (1e-6 * f[i].abs()).max(1e-9);
                    let lo = (f[i] - h).max(0.0);
                    let hi = f[i] + h;
                    fp[i] = hi;
                    let vhi = self.eval_slice(&fp, opts)?;
                    fp[i] = lo;
                    let vlo = self.eval_slice(&fp, opts)?;
                    fp[i] = f[i];
                    g[i] = (vhi - vlo) / ((hi - lo) * mu[i]);
                }
                Ok(g)
            }
        }
    }
}

/// Closed-form Φ for weighted Lᵖ on a nonnegative slice.
fn closed_form_lp_value(mu: &[f64], f: &[f64], p: PExp, w: &[f64]) -> f64 {
    match p {
        PExp::Inf => -mu
            .iter()
            .zip(f.iter().zip(w))
            .map(|(&m, (&fi, &wi))| m * fi * wi.ln())
            .sum::<f64>(),
        PExp::Finite(pv) => {
            let mtot: f64 = mu.iter().zip(f).map(|(&m, &fi)| m * fi).sum();
            if mtot == 0.0 {
                return 0.0;
            }
            mu.iter()
                .zip(f.iter().zip(w))
                .filter(|(_, (&fi, _))| fi > 0.0)
                .map(|(&m, (&fi, &wi))| m * fi * (fi / (mtot * wi)).ln() / pv)
                .sum()
        }
    }
}

/// Evaluates Φ(f) (free-function form of [`IndicatorFn::eval`]).
pub fn indicator_eval(phi: &IndicatorFn, f: &MVec, opts: &NumOpts) -> Result<f64> {
    phi.eval(f, opts)
}

/// Result of the ball maximization behind a `Numeric` indicator.
struct NumericPhi {
    value: f64,
    /// Full-length maximizer moduli (unit vector of the space, 0 off supp f).
    maximizer: Vec<f64>,
}

/// Maximizes Σ μᵢfᵢ·log xᵢ over the unit ball of `a`.  In log-coordinates
/// θ = log x the objective G(θ) = Σ mᵢθᵢ − m·log‖e^θ‖ is concave and
/// invariant under θ ↦ θ + c, so plain gradient ascent with backtracking
/// converges from θ = 0.
fn numeric_phi(a: &KotheSpace, f: &[f64], opts: &NumOpts) -> Result<NumericPhi> {
    let n = f.len();
    let mu = a.space().mu();
    let supp: Vec<usize> = (0..n).filter(|&i| f[i] > 0.0).collect();
    if supp.is_empty() {
        return Ok(NumericPhi {
            value: 0.0,
            maximizer: vec![0.0; n],
        });
    }
    let masses: Vec<f64> = supp.iter().map(|&i| mu[i] * f[i]).collect();
    let mtot: f64 = masses.iter().sum();

    let mut full = vec![0.0; n];
    let mut eval = |theta: &[f64]| -> (f64, Vec<f64>) {
        for (k, &i) in supp.iter().enumerate() {
            full[i] = theta[k].exp();
        }
        let norm = match a.norm_moduli(&full, opts) {
            Ok(v) if v > 0.0 => v,
            _ => return (f64::NEG_INFINITY, vec![0.0; theta.len()]),
        };
        let value: f64 = masses
            .iter()
            .zip(theta)
            .map(|(&m, &th)| m * th)
            .sum::<f64>()
            - mtot * norm.ln();
        let dens = match a.density_moduli(&full, opts) {
            Ok(d) => d,
            Err(_) => return (f64::NEG_INFINITY, vec![0.0; theta.len()]),
        };
        let grad: Vec<f64> = supp
            .iter()
            .enumerate()
            .map(|(k, &i)| masses[k] - mtot * dens[i])
            .collect();
        (value, grad)
    };

    let theta0 = vec![0.0; supp.len()];
    let cap = opts.max_iter.min(20_000);
    let (theta, diag) = opt::ascent_backtracking(&theta0, &mut eval, opts.tol, cap);
    if !diag.converged {
        return Err(CalcError::NonConvergence {
            op: "indicator ball maximizer",
            iterations: diag.iterations,
            residual: diag.value,
        });
    }
    let mut x = vec![0.0; n];
    for (k, &i) in supp.iter().enumerate() {
        x[i] = theta[k].exp();
    }
    let norm = a.norm_moduli(&x, opts)?;
    for xi in &mut x {
        *xi /= norm;
    }
    Ok(NumericPhi {
        value: diag.value,
        maximizer: x,
    })
}

/// Extends an indicator to complex f through the positive maximizer:
/// Φ(f) = Σ μᵢ fᵢ log x_{|f|,i}, where x_{|f|} maximizes for the moduli.
/// Requires a space-backed indicator (closed-form Lᵖ or numeric kind).
pub fn indicator_extend(phi: &IndicatorFn, f: &MVec, opts: &NumOpts) -> Result<Complex64> {
    require_same_space(phi.space(), f.space())?;
    let a = space_behind(phi).ok_or_else(|| {
        CalcError::Infeasible("complex extension requires a space-backed indicator".to_string())
    })?;
    let moduli = f.abs();
    if moduli.iter().all(|&m| m == 0.0) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let abs_f = MVec::from_real(phi.space().clone(), moduli)?;
    let loz = lozanovsky_factorize(&a, &abs_f, opts)?;
    let mu = phi.space().mu();
    let mut acc = Complex64::new(0.0, 0.0);
    for ((&m, &fv), av) in mu.iter().zip(f.vals()).zip(loz.a.vals()) {
        let ai = av.re;
        if ai > 0.0 {
            acc += m * fv * ai.ln();
        }
    }
    Ok(acc)
}

/// The space whose unit ball defines `phi`, when one is structurally present.
fn space_behind(phi: &IndicatorFn) -> Option<KotheSpace> {
    match phi.kind() {
        IndicatorKind::ClosedFormLp { p, w } => {
            Some(KotheSpace::weighted_lp(phi.space().clone(), *p, w.clone()).expect("valid"))
        }
        IndicatorKind::Numeric { a } => Some((**a).clone()),
        _ => None,
    }
}

/// Superadditivity defect Δ_Φ(f, g) = Φ(f) + Φ(g) − Φ(f+g) ≥ 0.
pub fn delta_phi(phi: &IndicatorFn, f: &MVec, g: &MVec, opts: &NumOpts) -> Result<f64> {
    require_same_space(f.space(), g.space())?;
    let vf = phi.eval(f, opts)?;
    let vg = phi.eval(g, opts)?;
    let vfg = phi.eval(&f.add(g), opts)?;
    Ok(vf + vg - vfg)
}

/// Outcome of the δ(Φ) lower-bound search.
#[derive(Clone, Debug)]
pub struct DeltaEstimate {
    pub value: f64,
    pub witness_f: MVec,
    pub witness_g: MVec,
    pub evaluated: usize,
}

/// Searches for the superadditivity constant
/// δ(Φ) = sup Δ_Φ(f,g)/(‖f‖₁+‖g‖₁): deterministic disjoint equal-mass atom
/// pairs (the extremal witnesses for L¹) first, then seeded random pairs,
/// disjointly split pairs, and multiplicative local refinement of the best
/// candidate.  Returns a lower bound; it is exact for L¹-like extremals.
pub fn estimate_delta(phi: &IndicatorFn, budget: usize, opts: &NumOpts) -> Result<DeltaEstimate> {
    if budget == 0 {
        return Err(CalcError::BadParameter {
            name: "budget",
            range: "[1, ∞)",
            value: 0.0,
        });
    }
    let space = phi.space().clone();
    let n = space.n();
    let mu = space.mu().to_vec();
    let mut best_ratio = 0.0f64;
    let mut best: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut evaluated = 0usize;

    let consider = |fv: &[f64], gv: &[f64], evaluated: &mut usize| -> Result<f64> {
        let mf: f64 = mu.iter().zip(fv).map(|(&m, &x)| m * x).sum();
        let mg: f64 = mu.iter().zip(gv).map(|(&m, &x)| m * x).sum();
        if mf <= 0.0 || mg <= 0.0 {
            return Ok(0.0);
        }
        let sum: Vec<f64> = fv.iter().zip(gv).map(|(&a, &b)| a + b).collect();
        let d = phi.eval_slice(fv, opts)? + phi.eval_slice(gv, opts)?
            - phi.eval_slice(&sum, opts)?;
        *evaluated += 1;
        Ok(d / (mf + mg))
    };

    // Deterministic extremal candidates: disjoint unit-mass atom pairs.
    'atoms: for i in 0..n {
        for j in (i + 1)..n {
            if evaluated >= budget.min(64) {
                break 'atoms;
            }
            let mut fv = vec![0.0; n];
            let mut gv = vec![0.0; n];
            fv[i] = 1.0 / mu[i];
            gv[j] = 1.0 / mu[j];
            let r = consider(&fv, &gv, &mut evaluated)?;
            if r > best_ratio {
                best_ratio = r;
                best = Some((fv, gv));
            }
        }
    }

    let mut rng = opt::rng_for(opts.seed, 0xDE17A);
    use rand::Rng;
    while evaluated < budget {
        let mode = evaluated % 3;
        let (fv, gv): (Vec<f64>, Vec<f64>) = match mode {
            0 => {
                let f = sample::lognormal_vec(&space, 1.0, &mut rng);
                let g = sample::lognormal_vec(&space, 1.0, &mut rng);
                (f.re(), g.re())
            }
            1 => {
                // Disjoint random split with matched masses.
                let mut fv = vec![0.0; n];
                let mut gv = vec![0.0; n];
                for i in 0..n {
                    let z = (sample::std_normal(&mut rng)).exp();
                    if rng.gen_bool(0.5) {
                        fv[i] = z;
                    } else {
                        gv[i] = z;
                    }
                }
                let mf: f64 = mu.iter().zip(&fv).map(|(&m, &x)| m * x).sum();
                let mg: f64 = mu.iter().zip(&gv).map(|(&m, &x)| m * x).sum();
                if mf > 0.0 && mg > 0.0 {
                    let scale = mf / mg;
                    for x in &mut gv {
                        *x *= scale;
                    }
                }
                (fv, gv)
            }
            _ => match &best {
                Some((bf, bg)) => {
                    let mut fv = bf.clone();
                    let mut gv = bg.clone();
                    let i = rng.gen_range(0..n);
                    let bump = (0.3 * sample::std_normal(&mut rng)).exp();
                    if rng.gen_bool(0.5) {
                        fv[i] *= bump;
                    } else {
                        gv[i] *= bump;
                    }
                    (fv, gv)
                }
                None => {
                    let f = sample::lognormal_vec(&space, 1.0, &mut rng);
                    let g = sample::lognormal_vec(&space, 1.0, &mut rng);
                    (f.re(), g.re())
                }
            },
        };
        let r = consider(&fv, &gv, &mut evaluated)?;
        if r > best_ratio {
            best_ratio = r;
            best = Some((fv, gv));
        }
    }

    let (wf, wg) = best.unwrap_or((vec![0.0; n], vec![0.0; n]));
    Ok(DeltaEstimate {
        value: best_ratio,
        witness_f: MVec::from_real(space.clone(), wf)?,
        witness_g: MVec::from_real(space, wg)?,
        evaluated,
    })
}

/// A Lozanovsky factorization f = a·a* with a the maximizer x_f of the
/// indicator supremum (‖a‖_A = 1) and a* = f/a in the dual (‖a*‖_{A*} = ∫f dμ).
#[derive(Clone, Debug)]
pub struct Lozanovsky {
    pub f: MVec,
    /// The maximizer x_f; unit vector of A, strictly positive on supp f.
    pub a: MVec,
    /// The dual factor f/a, supported on supp f.
    pub a_star: MVec,
    /// ∫ f dμ.
    pub mass: f64,
}

/// Factorizes nonnegative f through the unit ball of `a`: closed form
/// x_f = (f/(m·w))^{1/p} for weighted Lᵖ (p = ∞: x_f = 1/w); interpolation
/// spaces factor multiplicatively through their endpoints,
/// x_f = x_f(A₀)^{1−t}·x_f(A₁)^t (exact: the interpolation inequality keeps
/// the product in the unit ball while the additive splitting of the
/// indicator shows it attains the supremum); numeric ball maximization
/// otherwise.
pub fn lozanovsky_factorize(a: &KotheSpace, f: &MVec, opts: &NumOpts) -> Result<Lozanovsky> {
    require_same_space(a.space(), f.space())?;
    let fv = f.nonneg_real()?;
    let mu = a.space().mu();
    let n = fv.len();
    let mass: f64 = mu.iter().zip(&fv).map(|(&m, &fi)| m * fi).sum();
    if mass <= 0.0 {
        return Err(CalcError::ZeroInput {
            op: "factorization",
        });
    }
    let mut av = vec![0.0; n];
    let mut sv = vec![0.0; n];
    match a.kind() {
        SpaceKind::WeightedLp {
            p: PExp::Finite(p),
            w,
        } => {
            for i in 0..n {
                if fv[i] > 0.0 {
                    let log_a = (fv[i].ln() - (mass * w[i]).ln()) / p;
                    av[i] = log_a.exp();
                    sv[i] = (fv[i].ln() - log_a).exp();
                }
            }
        }
        SpaceKind::WeightedLp { p: PExp::Inf, w } => {
            for i in 0..n {
                if fv[i] > 0.0 {
                    av[i] = 1.0 / w[i];
                    sv[i] = fv[i] * w[i];
                }
            }
        }
        SpaceKind::CalderonProduct { a0, a1, t } => {
            let l0 = lozanovsky_factorize(a0, f, opts)?;
            let l1 = lozanovsky_factorize(a1, f, opts)?;
            for i in 0..n {
                if fv[i] > 0.0 {
                    let log_a =
                        (1.0 - t) * l0.a.vals()[i].re.ln() + t * l1.a.vals()[i].re.ln();
                    av[i] = log_a.exp();
                    sv[i] = (fv[i].ln() - log_a).exp();
                }
            }
        }
        SpaceKind::IndicatorInduced { .. } => {
            let sol = numeric_phi(a, &fv, opts)?;
            for i in 0..n {
                if fv[i] > 0.0 {
                    av[i] = sol.maximizer[i];
                    sv[i] = fv[i] / av[i];
                }
            }
        }
    }
    Ok(Lozanovsky {
        f: f.clone(),
        a: MVec::from_real(a.space().clone(), av)?,
        a_star: MVec::from_real(a.space().clone(), sv)?,
        mass,
    })
}

/// The interpolated indicator (1−t)Φ₀ + tΦ₁.  The cached δ bound is the
/// affine combination of the endpoint constants when both are known.
pub fn indicator_affine(phi0: &IndicatorFn, phi1: &IndicatorFn, t: f64) -> Result<IndicatorFn> {
    if !(0.0..=1.0).contains(&t) || t.is_nan() {
        return Err(CalcError::BadParameter {
            name: "t",
            range: "[0, 1]",
            value: t,
        });
    }
    IndicatorFn::affine(vec![(1.0 - t, phi0.clone()), (t, phi1.clone())])
}

/// The indicator functional of a space, chosen structurally: closed form for
/// weighted Lᵖ, the affine interpolation identity for product spaces, and
/// the stored functional for indicator-induced spaces.
pub fn indicator_of_space(a: &KotheSpace) -> IndicatorFn {
    match a.kind() {
        SpaceKind::WeightedLp { p, w } => {
            IndicatorFn::closed_form_lp(a.space().clone(), *p, w.clone()).expect("valid weights")
        }
        SpaceKind::CalderonProduct { a0, a1, t } => {
            indicator_affine(&indicator_of_space(a0), &indicator_of_space(a1), *t)
                .expect("product endpoints share the space")
        }
        SpaceKind::IndicatorInduced { phi } => (**phi).clone(),
    }
}

/// Outcome of a norm recovery from an indicator.
#[derive(Clone, Debug)]
pub struct NormRecovery {
    pub value: f64,
    /// The maximizing masses m on the μ-simplex (a probability vector,
    /// supported on supp x) — equal to the norming density of the recovered
    /// norm at x by the envelope theorem.
    pub maximizer: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Recovers the norm from an indicator by Legendre-type inversion:
/// ‖x‖ = exp sup{ Σ mᵢ·log|xᵢ| − Φ(m/μ) : m in the μ-simplex }, computed by
/// mirror ascent with a duality-gap certificate.  Requires Φ to satisfy the
/// indicator laws (homogeneity, superadditivity band, L¹ domination); see
/// [`check_indicator`] for the sampled verifier.
pub fn norm_from_indicator(phi: &IndicatorFn, x: &MVec, opts: &NumOpts) -> Result<NormRecovery> {
    require_same_space(phi.space(), x.space())?;
    recover_norm_moduli(phi, &x.abs(), opts)
}

pub(crate) fn recover_norm_moduli(
    phi: &IndicatorFn,
    moduli: &[f64],
    opts: &NumOpts,
) -> Result<NormRecovery> {
    let n = moduli.len();
    let supp: Vec<usize> = (0..n).filter(|&i| moduli[i] > 0.0).collect();
    if supp.is_empty() {
        return Ok(NormRecovery {
            value: 0.0,
            maximizer: vec![0.0; n],
            iterations: 0,
            converged: true,
        });
    }
    let mu = phi.space().mu();
    let log_x: Vec<f64> = supp.iter().map(|&i| moduli[i].ln()).collect();
    let k = supp.len();

    let mut full_f = vec![0.0; n];
    let mut err: Option<CalcError> = None;
    let mut eval = |m: &[f64]| -> (f64, Vec<f64>) {
        for (j, &i) in supp.iter().enumerate() {
            full_f[i] = m[j] / mu[i];
        }
        let value = match phi.eval_slice(&full_f, opts) {
            Ok(v) => m.iter().zip(&log_x).map(|(&mj, &lx)| mj * lx).sum::<f64>() - v,
            Err(e) => {
                err = Some(e);
                return (f64::NEG_INFINITY, vec![0.0; m.len()]);
            }
        };
        let gphi = match phi.grad_m(&full_f, opts) {
            Ok(g) => g,
            Err(e) => {
                err = Some(e);
                return (f64::NEG_INFINITY, vec![0.0; m.len()]);
            }
        };
        let grad: Vec<f64> = supp
            .iter()
            .enumerate()
            .map(|(j, &i)| log_x[j] - gphi[i])
            .collect();
        (value, grad)
    };

    let m0 = vec![1.0 / k as f64; k];
    let cap = opts.max_iter.min(100_000);
    let (m, diag) = opt::mirror_ascent_simplex(&m0, &mut eval, opts.tol, cap);
    if let Some(e) = err {
        return Err(e);
    }
    if !diag.value.is_finite() {
        return Err(CalcError::NonConvergence {
            op: "indicator norm recovery",
            iterations: diag.iterations,
            residual: f64::NAN,
        });
    }
    let mut maximizer = vec![0.0; n];
    for (j, &i) in supp.iter().enumerate() {
        maximizer[i] = m[j];
    }
    Ok(NormRecovery {
        value: diag.value.exp(),
        maximizer,
        iterations: diag.iterations,
        converged: diag.converged,
    })
}

/// Sampled verification of the indicator laws for a candidate functional.
#[derive(Clone, Debug)]
pub struct IndicatorCheck {
    /// max |Φ(αf) − αΦ(f)| / (1 + |Φ(f)|) over samples and α ∈ {0.1, 1, 7}.
    pub homogeneity_defect: f64,
    /// min over sampled pairs of Δ_Φ(f,g) (should be ≥ −1e-10·scale).
    pub min_delta: f64,
    /// max over sampled pairs of Δ_Φ(f,g) − Δ_{Φ_{L¹}}(f,g) (should be ≤ tol).
    pub domination_defect: f64,
    pub samples: usize,
}

/// Checks homogeneity, nonnegative superadditivity defect, and domination by
/// the L¹ defect on seeded random pairs.
pub fn check_indicator(phi: &IndicatorFn, samples: usize, opts: &NumOpts) -> Result<IndicatorCheck> {
    let space = phi.space().clone();
    let l1 = IndicatorFn::closed_form_lp(space.clone(), PExp::Finite(1.0), vec![1.0; space.n()])?;
    let mut rng = opt::rng_for(opts.seed, 0xC4EC);
    let mut homog: f64 = 0.0;
    let mut min_delta = f64::INFINITY;
    let mut dom: f64 = f64::NEG_INFINITY;
    for _ in 0..samples {
        let f = sample::lognormal_vec(&space, 1.0, &mut rng);
        let g = sample::lognormal_vec(&space, 1.0, &mut rng);
        let vf = phi.eval(&f, opts)?;
        for alpha in [0.1, 7.0] {
            let va = phi.eval(&f.scale(Complex64::new(alpha, 0.0)), opts)?;
            homog = homog.max((va - alpha * vf).abs() / (1.0 + vf.abs()));
        }
        let d = delta_phi(phi, &f, &g, opts)?;
        let d1 = delta_phi(&l1, &f, &g, opts)?;
        min_delta = min_delta.min(d);
        dom = dom.max(d - d1);
    }
    Ok(IndicatorCheck {
        homogeneity_defect: homog,
        min_delta,
        domination_defect: dom,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::Couple;
    use proptest::prelude::*;
    use rand::Rng;

    /// Relative slack allowed when checking superadditivity (values may dip
    /// an epsilon below zero through cancellation in the closed forms).
    const DELTA_NONNEG_SLACK: f64 = 1e-10;

    fn counting(n: usize) -> Arc<MeasureSpace> {
        MeasureSpace::counting(n).unwrap()
    }

    fn phi_lp(s: &Arc<MeasureSpace>, p: f64) -> IndicatorFn {
        IndicatorFn::closed_form_lp(s.clone(), PExp::new(p).unwrap(), vec![1.0; s.n()]).unwrap()
    }

    #[test]
    fn l1_indicator_of_ones() {
        let s = counting(2);
        let phi = phi_lp(&s, 1.0);
        let f = MVec::from_real(s, vec![1.0, 1.0]).unwrap();
        let v = phi.eval(&f, &NumOpts::default()).unwrap();
        assert!((v + 2.0 * std::f64::consts::LN_2).abs() < 1e-12, "{v}");
    }

    #[test]
    fn sup_norm_indicator_vanishes() {
        let s = counting(3);
        let phi = phi_lp(&s, f64::INFINITY);
        let mut rng = opt::rng_for(31, 0);
        for _ in 0..10 {
            let f = sample::lognormal_vec(&s, 1.0, &mut rng);
            assert_eq!(phi.eval(&f, &NumOpts::default()).unwrap(), 0.0);
        }
    }

    #[test]
    fn l2_indicator_equals_midpoint_combination() {
        let s = counting(2);
        let f = MVec::from_real(s.clone(), vec![1.0, 1.0]).unwrap();
        let opts = NumOpts::default();
        let v2 = phi_lp(&s, 2.0).eval(&f, &opts).unwrap();
        assert!((v2 + std::f64::consts::LN_2).abs() < 1e-12);
        let aff = indicator_affine(&phi_lp(&s, 1.0), &phi_lp(&s, f64::INFINITY), 0.5).unwrap();
        let va = aff.eval(&f, &opts).unwrap();
        assert!((v2 - va).abs() < 1e-12);
    }

    #[test]
    fn numeric_kind_agrees_with_closed_form() {
        let s = MeasureSpace::new(vec![0.7, 1.2, 1.0]).unwrap();
        let mut rng = opt::rng_for(32, 0);
        let opts = NumOpts::default();
        for _ in 0..6 {
            let p = rng.gen_range(1.0..4.0);
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(0.4..2.0)).collect();
            let a = KotheSpace::weighted_lp(s.clone(), PExp::Finite(p), w.clone()).unwrap();
            let closed = IndicatorFn::closed_form_lp(s.clone(), PExp::Finite(p), w).unwrap();
            let numeric = IndicatorFn::numeric(a);
            let f = sample::lognormal_vec(&s, 1.0, &mut rng);
            let vc = closed.eval(&f, &opts).unwrap();
            let vn = numeric.eval(&f, &opts).unwrap();
            assert!((vc - vn).abs() < 1e-6 * (1.0 + vc.abs()), "closed {vc} numeric {vn}");
        }
    }

    #[test]
    fn extension_agrees_on_positive_and_cancels_on_signed() {
        let s = counting(2);
        let opts = NumOpts::default();
        let phi = phi_lp(&s, 1.0);
        let f = MVec::from_real(s.clone(), vec![0.4, 1.7]).unwrap();
        let ext = indicator_extend(&phi, &f, &opts).unwrap();
        let pos = phi.eval(&f, &opts).unwrap();
        assert!((ext.re - pos).abs() < 1e-8 && ext.im.abs() < 1e-12);

        let signed = MVec::from_real(s, vec![1.0, -1.0]).unwrap();
        let v = indicator_extend(&phi, &signed, &opts).unwrap();
        assert!(v.norm() < 1e-12, "{v}");
    }

    #[test]
    fn extension_is_homogeneous_in_positive_scaling() {
        let s = counting(3);
        let opts = NumOpts::default();
        let phi = phi_lp(&s, 2.0);
        let g = MVec::from_real(s, vec![0.3, 1.1, 2.2]).unwrap();
        let alpha = 3.7;
        let va = indicator_extend(&phi, &g.scale(Complex64::new(alpha, 0.0)), &opts).unwrap();
        let v = indicator_extend(&phi, &g, &opts).unwrap();
        assert!((va - alpha * v).norm() < 1e-9 * (1.0 + v.norm()));
    }

    #[test]
    fn defect_vanishes_on_equal_arguments() {
        let s = counting(4);
        let opts = NumOpts::default();
        let mut rng = opt::rng_for(33, 0);
        for p in [1.0, 2.3, f64::INFINITY] {
            let phi = phi_lp(&s, p);
            let f = sample::lognormal_vec(&s, 1.0, &mut rng);
            let d = delta_phi(&phi, &f, &f, &opts).unwrap();
            assert!(d.abs() < 1e-10, "p={p}: {d}");
        }
    }

    #[test]
    fn disjoint_atoms_witness_log2_for_l1() {
        let s = counting(2);
        let opts = NumOpts::default();
        let phi = phi_lp(&s, 1.0);
        let f = MVec::from_real(s.clone(), vec![1.0, 0.0]).unwrap();
        let g = MVec::from_real(s, vec![0.0, 1.0]).unwrap();
        let d = delta_phi(&phi, &f, &g, &opts).unwrap();
        assert!((d - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn delta_search_recovers_log2_for_l1() {
        let s = counting(8);
        let phi = phi_lp(&s, 1.0);
        let est = estimate_delta(&phi, 10_000, &NumOpts::default()).unwrap();
        assert!(est.value >= std::f64::consts::LN_2 - 1e-3, "{}", est.value);
        assert!(est.value <= std::f64::consts::LN_2 + 1e-9, "{}", est.value);
    }

    #[test]
    fn delta_search_on_sup_norm_is_zero() {
        let s = counting(4);
        let phi = phi_lp(&s, f64::INFINITY);
        let est = estimate_delta(&phi, 300, &NumOpts::default()).unwrap();
        assert!(est.value.abs() < 1e-12);
    }

    #[test]
    fn delta_search_on_l2_lands_in_band() {
        let s = counting(4);
        let phi = phi_lp(&s, 2.0);
        let est = estimate_delta(&phi, 2_000, &NumOpts::default()).unwrap();
        assert!(est.value > 0.0 && est.value <= std::f64::consts::LN_2 + 1e-9);
        // Closed form for the exponent-2 scale: log2 / 2.
        assert!((est.value - std::f64::consts::LN_2 / 2.0).abs() < 1e-3, "{}", est.value);
    }

    #[test]
    fn superadditivity_band_sampled() {
        let s = counting(3);
        let opts = NumOpts::default();
        let mut rng = opt::rng_for(34, 0);
        for _ in 0..1000 {
            let p = if rng.gen_bool(0.2) {
                f64::INFINITY
            } else {
                rng.gen_range(1.0..5.0)
            };
            let phi = phi_lp(&s, p);
            let delta_known = phi.known_delta().unwrap();
            let f = sample::lognormal_vec(&s, 1.0, &mut rng);
            let g = sample::lognormal_vec(&s, 1.0, &mut rng);
            let d = delta_phi(&phi, &f, &g, &NumOpts::default()).unwrap();
            let mass = f.integral().re + g.integral().re;
            assert!(d >= -DELTA_NONNEG_SLACK * mass.max(1.0));
            assert!(d <= (delta_known + 1e-6) * mass);
        }
        let _ = opts;
    }

    #[test]
    fn lozanovsky_l1_and_l2_closed_forms() {
        let s = counting(2);
        let opts = NumOpts::default();
        let f = MVec::from_real(s.clone(), vec![0.5, 0.5]).unwrap();

        let a1 = KotheSpace::lp(s.clone(), PExp::Finite(1.0)).unwrap();
        let loz = lozanovsky_factorize(&a1, &f, &opts).unwrap();
        assert!((loz.a.re()[0] - 0.5).abs() < 1e-12 && (loz.a.re()[1] - 0.5).abs() < 1e-12);
        assert!((loz.a_star.re()[0] - 1.0).abs() < 1e-12);

        let a2 = KotheSpace::lp(s.clone(), PExp::Finite(2.0)).unwrap();
        let loz2 = lozanovsky_factorize(&a2, &f, &opts).unwrap();
        let r = 0.5f64.sqrt();
        for i in 0..2 {
            assert!((loz2.a.re()[i] - r).abs() < 1e-12);
            assert!((loz2.a_star.re()[i] - r).abs() < 1e-12);
        }
    }

    #[test]
    fn lozanovsky_norms_and_product_identity() {
        let s = MeasureSpace::new(vec![1.0, 0.6, 1.4, 0.9]).unwrap();
        let mut rng = opt::rng_for(35, 0);
        let opts = NumOpts::default();
        for trial in 0..12 {
            let a = if trial % 4 == 3 {
                KotheSpace::weighted_lp(
                    s.clone(),
                    PExp::Inf,
                    (0..4).map(|_| rng.gen_range(0.4..2.0)).collect(),
                )
                .unwrap()
            } else {
                sample::random_weighted_lp(&s, 1.0, 5.0, 0.4, 2.0, &mut rng)
            };
            let f = sample::lognormal_vec(&s, 1.0, &mut rng);
            let loz = lozanovsky_factorize(&a, &f, &opts).unwrap();
            // f = a·a* pointwise.
            for i in 0..4 {
                let prod = loz.a.re()[i] * loz.a_star.re()[i];
                assert!((prod - f.re()[i]).abs() <= 1e-10 * f.re()[i].max(1.0));
            }
            let na = a.norm(&loz.a).unwrap();
            let nstar = a.dual_norm(&loz.a_star).unwrap();
            assert!((na - 1.0).abs() < 1e-6, "‖a‖ = {na}");
            assert!((nstar - loz.mass).abs() < 1e-6 * loz.mass.max(1.0), "‖a*‖ = {nstar}");
        }
    }

    #[test]
    fn indicator_splits_into_space_and_dual() {
        let s = counting(3);
        let mut rng = opt::rng_for(36, 0);
        let opts = NumOpts::default();
        let l1 = phi_lp(&s, 1.0);
        for _ in 0..10 {
            let a = sample::random_weighted_lp(&s, 1.1, 4.0, 0.4, 2.0, &mut rng);
            let (p, w) = a.as_weighted_lp().unwrap();
            let phi_a = IndicatorFn::closed_form_lp(s.clone(), p, w.to_vec()).unwrap();
            let dual = a.dual_space().unwrap();
            let (pd, wd) = dual.as_weighted_lp().unwrap();
            let phi_d = IndicatorFn::closed_form_lp(s.clone(), pd, wd.to_vec()).unwrap();
            let f = sample::lognormal_vec(&s, 1.0, &mut rng);
            let lhs = l1.eval(&f, &opts).unwrap();
            let rhs = phi_a.eval(&f, &opts).unwrap() + phi_d.eval(&f, &opts).unwrap();
            assert!((lhs - rhs).abs() < 1e-6 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn interpolated_indicator_matches_exponent_arithmetic() {
        let s = counting(3);
        let mut rng = opt::rng_for(37, 0);
        let opts = NumOpts::default();
        let w0: Vec<f64> = (0..3).map(|_| rng.gen_range(0.4..2.0)).collect();
        let w1: Vec<f64> = (0..3).map(|_| rng.gen_range(0.4..2.0)).collect();
        let a0 = KotheSpace::weighted_lp(s.clone(), PExp::Finite(1.4), w0.clone()).unwrap();
        let a1 = KotheSpace::weighted_lp(s.clone(), PExp::Finite(3.1), w1.clone()).unwrap();
        let t = 0.6;
        let at = Couple::new(a0, a1)
            .unwrap()
            .weighted_lp_interpolant(t)
            .unwrap();
        let (pt, wt) = at.as_weighted_lp().unwrap();
        let phi_t = IndicatorFn::closed_form_lp(s.clone(), pt, wt.to_vec()).unwrap();
        let phi0 = IndicatorFn::closed_form_lp(s.clone(), PExp::Finite(1.4), w0).unwrap();
        let phi1 = IndicatorFn::closed_form_lp(s.clone(), PExp::Finite(3.1), w1).unwrap();
        let aff = indicator_affine(&phi0, &phi1, t).unwrap();
        for _ in 0..100 {
            let f = sample::lognormal_vec(&s, 1.0, &mut rng);
            let lhs = aff.eval(&f, &opts).unwrap();
            let rhs = phi_t.eval(&f, &opts).unwrap();
            assert!((lhs - rhs).abs() < 1e-6 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn norm_recovery_from_l1_indicator() {
        let s = MeasureSpace::new(vec![1.0, 2.0, 0.5]).unwrap();
        let phi = IndicatorFn::closed_form_lp(s.clone(), PExp::Finite(1.0), vec![1.0; 3]).unwrap();
        let x = MVec::from_real(s.clone(), vec![0.3, 1.4, 2.0]).unwrap();
        let rec = norm_from_indicator(&phi, &x, &NumOpts::default()).unwrap();
        let exact = crate::measure::lp_norm(&x, PExp::Finite(1.0), &[1.0, 1.0, 1.0]).unwrap();
        assert!(rec.converged);
        assert!((rec.value - exact).abs() < 1e-6 * exact, "{} vs {exact}", rec.value);
    }

    #[test]
    fn norm_recovery_from_l2_indicator_is_five() {
        let s = counting(2);
        let phi = phi_lp(&s, 2.0);
        let x = MVec::from_real(s, vec![3.0, 4.0]).unwrap();
        let rec = norm_from_indicator(&phi, &x, &NumOpts::default()).unwrap();
        assert!((rec.value - 5.0).abs() < 1e-3 * 5.0, "{}", rec.value);
    }

    #[test]
    fn norm_recovery_round_trip_on_random_spaces() {
        let s = MeasureSpace::new(vec![0.8, 1.3, 1.0, 0.6, 1.1]).unwrap();
        let mut rng = opt::rng_for(38, 0);
        let opts = NumOpts::default();
        for _ in 0..8 {
            let a = sample::random_weighted_lp(&s, 1.0, 4.5, 0.4, 2.2, &mut rng);
            let (p, w) = a.as_weighted_lp().unwrap();
            let phi = IndicatorFn::closed_form_lp(s.clone(), p, w.to_vec()).unwrap();
            let x = sample::gaussian_complex_vec(&s, &mut rng);
            if x.is_zero() {
                continue;
            }
            let rec = norm_from_indicator(&phi, &x, &opts).unwrap();
            let exact = a.norm(&x).unwrap();
            assert!(
                (rec.value - exact).abs() <= 1e-3 * exact.max(1e-9),
                "{} vs {exact}",
                rec.value
            );
        }
    }

    #[test]
    fn recovery_maximizer_is_norming_density() {
        let s = counting(3);
        let phi = phi_lp(&s, 2.0);
        let a = KotheSpace::lp(s.clone(), PExp::Finite(2.0)).unwrap();
        let x = MVec::from_real(s, vec![1.0, 2.0, 0.5]).unwrap();
        let rec = norm_from_indicator(&phi, &x, &NumOpts::default()).unwrap();
        let dens = a.norming_density(&x, &NumOpts::default()).unwrap();
        for (r, d) in rec.maximizer.iter().zip(&dens) {
            assert!((r - d).abs() < 1e-5);
        }
    }

    #[test]
    fn induced_space_scaling_through_mass_term() {
        let s = counting(3);
        let phi = phi_lp(&s, 2.0);
        let a = KotheSpace::indicator_induced(phi);
        let b = a.scaled(std::f64::consts::E).unwrap();
        let x = MVec::from_real(s, vec![1.0, -2.0, 0.3]).unwrap();
        let na = a.norm(&x).unwrap();
        let nb = b.norm(&x).unwrap();
        assert!((nb - std::f64::consts::E * na).abs() < 1e-6 * nb);
    }

    #[test]
    fn check_indicator_passes_for_lp_scale() {
        let s = counting(3);
        let chk = check_indicator(&phi_lp(&s, 1.7), 200, &NumOpts::default()).unwrap();
        assert!(chk.homogeneity_defect < 1e-9);
        assert!(chk.min_delta >= -1e-10);
        assert!(chk.domination_defect <= 1e-9);
    }

    proptest! {
        #[test]
        fn closed_form_homogeneity_is_exact(
            fv in proptest::collection::vec(0.0..5.0f64, 2..6),
            alpha in 0.01..20.0f64,
            p in 1.0..6.0f64,
        ) {
            let s = MeasureSpace::counting(fv.len()).unwrap();
            let phi = IndicatorFn::closed_form_lp(s.clone(), PExp::Finite(p), vec![1.0; fv.len()]).unwrap();
            let f = MVec::from_real(s, fv).unwrap();
            let opts = NumOpts::default();
            let v = phi.eval(&f, &opts).unwrap();
            let va = phi.eval(&f.scale(Complex64::new(alpha, 0.0)), &opts).unwrap();
            prop_assert!((va - alpha * v).abs() <= 1e-9 * (1.0 + v.abs() * alpha));
        }

        #[test]
        fn l1_defect_is_nonnegative(
            fv in proptest::collection::vec(0.0..3.0f64, 3),
            gv in proptest::collection::vec(0.0..3.0f64, 3),
        ) {
            let s = MeasureSpace::counting(3).unwrap();
            let phi = IndicatorFn::closed_form_lp(s.clone(), PExp::Finite(1.0), vec![1.0; 3]).unwrap();
            let f = MVec::from_real(s.clone(), fv).unwrap();
            let g = MVec::from_real(s, gv).unwrap();
            let d = delta_phi(&phi, &f, &g, &NumOpts::default()).unwrap();
            prop_assert!(d >= -1e-10);
        }
    }
}
