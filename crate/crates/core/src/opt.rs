//! Small deterministic optimization toolkit shared by the norm and indicator
//! engines.
//!
//! Every routine here is pure given its inputs: no global RNG, no wall-clock
//! dependence, no parallel nondeterminism.  Callers that need randomness (for
//! restarts or sampling) derive it from an explicit seed via [`rng_for`], so a
//! fixed configuration always reproduces the same iterates bit for bit.
//!
//! The three workhorses:
//!
//! * [`polyak_subgradient`] — minimizes a convex (possibly nonsmooth)
//!   function given a value/subgradient oracle, using Polyak-type steps with
//!   an adaptive target level.  Used for interpolation factorizations with
//!   sup-norm endpoints and for generic norm oracles.
//! * [`ascent_backtracking`] — monotone gradient ascent for smooth concave
//!   maximization (unconstrained), with Armijo backtracking and step-size
//!   doubling.  Used for unit-ball maximizers (indicator evaluation).
//! * [`mirror_ascent_simplex`] — entropic (multiplicative) ascent over the
//!   probability simplex with a certified stopping rule: for concave
//!   objectives the simplex duality gap max_i gᵢ − ⟨m,g⟩ bounds the distance
//!   to the optimum value, so the reported value carries an accuracy
//!   certificate.  Used for norm recovery from indicator functionals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Budget and tolerance knobs shared by iterative routines.
#[derive(Clone, Copy, Debug)]
pub struct NumOpts {
    /// Target accuracy on objective values (log-scale for norms).
    pub tol: f64,
    /// Global iteration cap per optimization.
    pub max_iter: usize,
    /// Number of random restarts for nonsmooth/generic paths.
    pub restarts: usize,
    /// Seed from which all internal randomness is derived.
    pub seed: u64,
}

impl Default for NumOpts {
    fn default() -> Self {
        NumOpts {
            tol: 1e-8,
            max_iter: 100_000,
            restarts: 20,
            seed: 1,
        }
    }
}

impl NumOpts {
    /// Copy of `self` with a different seed (used to decorrelate nested
    /// optimizations deterministically).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// A deterministic RNG for a given (seed, stream) pair.  Distinct streams
/// yield independent sequences, so restarts and samples never share draws.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Outcome diagnostics attached to every optimization result.
#[derive(Clone, Copy, Debug)]
pub struct OptDiag {
    /// Objective value at the returned point.
    pub value: f64,
    /// Total oracle calls consumed.
    pub iterations: usize,
    /// Whether the stopping tolerance was certified before the budget ran out.
    pub converged: bool,
}

/// Minimizes a convex function via subgradient steps with an adaptive Polyak
/// target.
///
/// The classical Polyak step (f(s) − f*)/‖g‖² needs the optimal value f*; we
/// run with a working target `best − δ` and halve δ whenever no progress of
/// δ/4 is seen for a window of iterations.  The loop stops once δ < `tol`
/// (value accuracy ≈ tol) or a subgradient vanishes.
pub fn polyak_subgradient(
    s0: &[f64],
    mut eval: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, OptDiag) {
    let mut s = s0.to_vec();
    let (mut best, mut g) = eval(&s);
    let mut s_best = s.clone();
    let mut v = best;
    let mut delta = 1.0f64;
    let mut anchor = best; // best value when δ was last reset
    let mut stall = 0usize;
    let mut iterations = 1usize;
    let mut converged = false;
    const STALL_WINDOW: usize = 60;

    while iterations < max_iter {
        let gg: f64 = g.iter().map(|gi| gi * gi).sum();
        if gg <= 1e-28 {
            converged = true;
            break;
        }
        let step = (v - (best - delta)) / gg;
        for (si, gi) in s.iter_mut().zip(&g) {
            *si -= step * gi;
        }
        let (nv, ng) = eval(&s);
        iterations += 1;
        v = nv;
        g = ng;
        if v < best {
            best = v;
            s_best.copy_from_slice(&s);
        }
        if anchor - best >= delta / 4.0 {
            anchor = best;
            stall = 0;
        } else {
            stall += 1;
            if stall >= STALL_WINDOW {
                delta /= 2.0;
                anchor = best;
                stall = 0;
                if delta < tol {
                    converged = true;
                    break;
                }
            }
        }
    }
    (
        s_best,
        OptDiag {
            value: best,
            iterations,
            converged,
        },
    )
}

/// Maximizes a smooth concave function by monotone gradient ascent with
/// Armijo backtracking.  Returns once successive accepted improvements fall
/// below `tol·max(1,|f|)` with a small gradient, or the budget is exhausted.
pub fn ascent_backtracking(
    x0: &[f64],
    mut eval: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, OptDiag) {
    let mut x = x0.to_vec();
    let (mut fx, mut g) = eval(&x);
    let mut eta = 1.0f64;
    let mut iterations = 1usize;
    let mut converged = false;
    let mut flat_rounds = 0usize;

    while iterations < max_iter {
        let gsup = g.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if gsup <= tol {
            converged = true;
            break;
        }
        let gg: f64 = g.iter().map(|gi| gi * gi).sum();
        let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + eta * gi).collect();
        let (ft, gt) = eval(&trial);
        iterations += 1;
        if ft.is_finite() && ft >= fx + 1e-4 * eta * gg {
            let gain = ft - fx;
            x = trial;
            fx = ft;
            g = gt;
            eta = (eta * 2.0).min(1e8);
            if gain <= tol * fx.abs().max(1.0) {
                flat_rounds += 1;
                if flat_rounds >= 4 {
                    converged = true;
                    break;
                }
            } else {
                flat_rounds = 0;
            }
        } else {
            eta *= 0.5;
            if eta < 1e-18 {
                // Numerically flat: no measurable ascent direction remains.
                converged = true;
                break;
            }
        }
    }
    (
        x,
        OptDiag {
            value: fx,
            iterations,
            converged,
        },
    )
}

/// Maximizes a concave function over the probability simplex
/// {m : mᵢ ≥ 0, Σmᵢ = 1} by entropic mirror ascent.
///
/// `eval` returns (f(m), ∇f(m)).  For concave f the simplex duality gap
/// `max_i gᵢ − ⟨m,g⟩` upper-bounds f* − f(m); the iteration stops once the
/// gap is ≤ `tol`, so `converged == true` certifies the returned value to
/// that accuracy.  Entries are floored at 1e-300 to keep the multiplicative
/// updates able to revive coordinates.
pub fn mirror_ascent_simplex(
    m0: &[f64],
    mut eval: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, OptDiag) {
    const FLOOR: f64 = 1e-300;
    let normalize = |m: &mut [f64]| {
        let mut sum = 0.0;
        for mi in m.iter_mut() {
            if !mi.is_finite() || *mi < FLOOR {
                *mi = FLOOR;
            }
            sum += *mi;
        }
        for mi in m.iter_mut() {
            *mi /= sum;
        }
    };

    let mut m = m0.to_vec();
    normalize(&mut m);
    let (mut fm, mut g) = eval(&m);
    let mut eta = 1.0f64;
    let mut iterations = 1usize;
    let mut converged = false;

    while iterations < max_iter {
        // Duality gap for concave maximization over the simplex.
        let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gdot: f64 = m
            .iter()
            .zip(&g)
            .filter(|(mi, _)| **mi > FLOOR)
            .map(|(mi, gi)| mi * gi)
            .sum();
        if gmax.is_finite() && gmax - gdot <= tol {
            converged = true;
            break;
        }
        let trial: Vec<f64> = {
            let mut t: Vec<f64> = m
                .iter()
                .zip(&g)
                .map(|(mi, gi)| {
                    let e = (eta * (gi - gmax)).exp();
                    mi * e
                })
                .collect();
            normalize(&mut t);
            t
        };
        let (ft, gt) = eval(&trial);
        iterations += 1;
        if ft.is_finite() && ft >= fm {
            m = trial;
            fm = ft;
            g = gt;
            eta = (eta * 1.5).min(1e6);
        } else {
            eta *= 0.5;
            if eta < 1e-18 {
                break;
            }
        }
    }
    (
        m,
        OptDiag {
            value: fm,
            iterations,
            converged,
        },
    )
}

/// Minimizes a 1-D convex function on [lo, hi] by golden-section search.
pub fn golden_min(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let xm = 0.5 * (a + b);
    (xm, f(xm))
}
