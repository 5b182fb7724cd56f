//! Discretized-circle laboratory: Szegő projection and the log centralizers.
//!
//! The circle is sampled on the midpoint grid τ_k = exp(2πi(k+1/2)/N) with
//! arc-length masses μ_k = 2π/N; the offset keeps τ_k ≠ 1 so log(1−τ_k) is
//! finite at every node.  [`SzegoProjection`] realizes the orthogonal
//! projection onto the discrete Hardy space by zeroing negative-frequency
//! DFT bins (with the shared Nyquist bin halved).  Three concrete
//! centralizer-type maps act pointwise:
//!
//! * Ω₁ f = f·log(1−τ) — multiplication by an unbounded symbol;
//! * Ω₂ f = f·log(|f|/rms(f)), rms(f) = ‖f‖_{L²(μ)}/√(2π), so a function of
//!   constant modulus is sent to 0 and Ω₂(αf) = αΩ₂(f) for all α ≠ 0;
//! * Ω₃ f = f·log μ{|f| > |f(τ)|} — the superlevel-measure map with the
//!   strict inequality, value 0 where the superlevel set is empty, and tied
//!   moduli sharing one value.
//!
//! None of the three is bounded on L² of the grid (ratios ‖Ωf‖₂/‖f‖₂ grow
//! along refinement for adversarially concentrated f), yet the commutators
//! [Ωᵢ, P] stay bounded across the same refinement — the phenomenon probed
//! by [`commutator_experiment`], which emits a deterministic CSV table.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{CalcError, Result};
use crate::measure::{MVec, MeasureSpace, PExp};
use crate::opt::rng_for;
use crate::sample;

/// Midpoint grid on the circle with arc-length weights.
#[derive(Clone, Debug)]
pub struct CircleGrid {
    n: usize,
    nodes: Vec<Complex64>,
    space: Arc<MeasureSpace>,
}

impl CircleGrid {
    /// Builds the N-point midpoint grid; N must be a power of two (≥ 2).
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(CalcError::BadGridSize(n));
        }
        let nodes: Vec<Complex64> = (0..n)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
                Complex64::from_polar(1.0, theta)
            })
            .collect();
        let space = MeasureSpace::uniform(n, 2.0 * std::f64::consts::PI)?;
        Ok(CircleGrid { n, nodes, space })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    /// Node angle θ_k = 2π(k+1/2)/N.
    pub fn theta(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * (k as f64 + 0.5) / self.n as f64
    }

    /// ‖f‖_{L²(μ)} on the grid.
    pub fn l2_norm(&self, f: &MVec) -> Result<f64> {
        crate::measure::lp_norm(f, PExp::Finite(2.0), &vec![1.0; self.n])
    }
}

/// Orthogonal projection onto nonnegative frequencies on a [`CircleGrid`].
#[derive(Clone)]
pub struct SzegoProjection {
    grid: CircleGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SzegoProjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SzegoProjection")
            .field("n", &self.grid.n)
            .finish()
    }
}

impl SzegoProjection {
    pub fn new(grid: CircleGrid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n);
        let inv = planner.plan_fft_inverse(grid.n);
        SzegoProjection { grid, fwd, inv }
    }

    pub fn grid(&self) -> &CircleGrid {
        &self.grid
    }
}

/// Applies the Szegő projection: DFT, zero the negative-frequency bins,
/// halve the (shared) Nyquist bin, inverse DFT.  Under the standard layout
/// the bins 0‥N/2−1 carry frequencies 0‥N/2−1 and bins N/2+1‥N−1 carry the
/// negative frequencies; the midpoint sampling only attaches unimodular
/// phases per bin, which the filter leaves untouched.
pub fn project_hardy(p: &SzegoProjection, f: &MVec) -> Result<MVec> {
    crate::measure::require_same_space(p.grid.space(), f.space())?;
    let n = p.grid.n;
    let mut buf: Vec<Complex64> = f.vals().to_vec();
    p.fwd.process(&mut buf);
    let half = n / 2;
    buf[half] *= 0.5;
    for slot in buf.iter_mut().skip(half + 1) {
        *slot = Complex64::new(0.0, 0.0);
    }
    p.inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    for v in &mut buf {
        *v *= scale;
    }
    MVec::from_complex(p.grid.space().clone(), buf)
}

/// Ω₁ f = f·log(1−τ) (principal branch; finite on the midpoint grid).
pub fn omega1(grid: &CircleGrid, f: &MVec) -> Result<MVec> {
    crate::measure::require_same_space(grid.space(), f.space())?;
    let vals: Vec<Complex64> = f
        .vals()
        .iter()
        .zip(&grid.nodes)
        .map(|(fv, tau)| fv * (Complex64::new(1.0, 0.0) - tau).ln())
        .collect();
    MVec::from_complex(grid.space().clone(), vals)
}

/// Ω₂ f = f·log(|f|/rms(f)) with rms(f) = ‖f‖_{L²(μ)}/√(2π), so that
/// constant-modulus functions map to 0 and the scale cancels exactly:
/// Ω₂(αf) = αΩ₂(f) for α ≠ 0.  Entries with f(τ) = 0 contribute 0.
pub fn omega2(grid: &CircleGrid, f: &MVec) -> Result<MVec> {
    crate::measure::require_same_space(grid.space(), f.space())?;
    if f.is_zero() {
        return Err(CalcError::ZeroInput { op: "omega2" });
    }
    let rms = grid.l2_norm(f)? / (2.0 * std::f64::consts::PI).sqrt();
    let factors: Vec<f64> = f
        .abs()
        .iter()
        .map(|&a| if a == 0.0 { 0.0 } else { (a / rms).ln() })
        .collect();
    Ok(f.mul_real(&factors))
}

/// Ω₃ f = f·log μ{|f| > |f(τ)|}, with factor 0 where the strict superlevel
/// set has measure zero and tied moduli sharing one value.  Sort-based:
/// O(N log N).
pub fn omega3(grid: &CircleGrid, f: &MVec) -> Result<MVec> {
    crate::measure::require_same_space(grid.space(), f.space())?;
    let n = grid.n;
    let moduli = f.abs();
    let mu = grid.space().mu();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| moduli[j].partial_cmp(&moduli[i]).unwrap());
    // Walk in descending modulus; atoms tied at one value all see the mass
    // strictly above that value.
    let mut factors = vec![0.0f64; n];
    let mut mass_above = 0.0f64;
    let mut idx = 0usize;
    while idx < n {
        let level = moduli[order[idx]];
        let mut block_mass = 0.0;
        let mut j = idx;
        while j < n && moduli[order[j]] == level {
            block_mass += mu[order[j]];
            j += 1;
        }
        let factor = if level == 0.0 || mass_above == 0.0 {
            0.0
        } else {
            mass_above.ln()
        };
        for &i in &order[idx..j] {
            factors[i] = factor;
        }
        mass_above += block_mass;
        idx = j;
    }
    Ok(f.mul_real(&factors))
}

/// Which log centralizer a sweep exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CircleOmega {
    /// f·log(1−τ).
    LogOneMinusTau,
    /// f·log(|f|/rms f).
    LogModulusRatio,
    /// f·log of the strict superlevel measure.
    LogSuperlevel,
}

impl CircleOmega {
    pub fn index(self) -> u8 {
        match self {
            CircleOmega::LogOneMinusTau => 1,
            CircleOmega::LogModulusRatio => 2,
            CircleOmega::LogSuperlevel => 3,
        }
    }

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(CircleOmega::LogOneMinusTau),
            2 => Ok(CircleOmega::LogModulusRatio),
            3 => Ok(CircleOmega::LogSuperlevel),
            _ => Err(CalcError::BadParameter {
                name: "omega index",
                range: "{1, 2, 3}",
                value: i as f64,
            }),
        }
    }

    pub fn apply(self, grid: &CircleGrid, f: &MVec) -> Result<MVec> {
        match self {
            CircleOmega::LogOneMinusTau => omega1(grid, f),
            CircleOmega::LogModulusRatio => omega2(grid, f),
            CircleOmega::LogSuperlevel => omega3(grid, f),
        }
    }
}

/// Random trigonometric polynomial of degree ≤ N/4 with unit L²(μ) norm,
/// synthesized through the inverse FFT (coefficients are iid complex
/// Gaussians; the midpoint phases e^{iπm/N} are attached per frequency).
pub fn random_trig_poly(grid: &CircleGrid, rng: &mut ChaCha8Rng) -> MVec {
    let n = grid.n;
    let degree = (n / 4).max(1);
    let mut bins = vec![Complex64::new(0.0, 0.0); n];
    for m in -(degree as i64)..=(degree as i64) {
        let re = sample::std_normal(rng);
        let im = sample::std_normal(rng);
        let coeff = Complex64::new(re, im) / 2.0f64.sqrt();
        let phase = Complex64::from_polar(1.0, std::f64::consts::PI * m as f64 / n as f64);
        let bin = m.rem_euclid(n as i64) as usize;
        bins[bin] += coeff * phase;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(&mut bins);
    let f = MVec::from_complex(grid.space().clone(), bins).expect("grid-sized buffer");
    let norm = grid.l2_norm(&f).expect("grid weights");
    if norm == 0.0 {
        return f;
    }
    f.scale(Complex64::new(1.0 / norm, 0.0))
}

/// Unit-norm function concentrated on the single node nearest τ = 1.
pub fn concentrated_near_one(grid: &CircleGrid) -> MVec {
    let n = grid.n;
    let mut vals = vec![Complex64::new(0.0, 0.0); n];
    let mass = grid.space().mu()[0];
    vals[0] = Complex64::new(1.0 / mass.sqrt(), 0.0);
    MVec::from_complex(grid.space().clone(), vals).expect("grid-sized buffer")
}

/// One row of a commutator sweep.
#[derive(Clone, Copy, Debug)]
pub struct CircleRow {
    pub omega: u8,
    pub n: usize,
    pub trial: usize,
    pub ratio: f64,
    pub max_ratio: f64,
}

/// Deterministic sweep output with fixed-format CSV rendering.
#[derive(Clone, Debug, Default)]
pub struct CircleTable {
    pub rows: Vec<CircleRow>,
}

impl CircleTable {
    /// Renders `omega,N,trial,ratio,max_ratio` with 12-digit scientific
    /// formatting — byte-identical for identical inputs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,N,trial,ratio,max_ratio\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.12e},{:.12e}\n",
                r.omega, r.n, r.trial, r.ratio, r.max_ratio
            ));
        }
        out
    }

    /// The final (maximal) commutator ratio recorded for grid size `n`.
    pub fn max_for(&self, n: usize) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.max_ratio)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }
}

/// ‖[Ω, P]f‖₂ / ‖f‖₂ for one test function.
pub fn commutator_ratio(
    p: &SzegoProjection,
    which: CircleOmega,
    f: &MVec,
) -> Result<f64> {
    let grid = p.grid();
    let nf = grid.l2_norm(f)?;
    if nf == 0.0 {
        return Err(CalcError::ZeroInput {
            op: "commutator_ratio",
        });
    }
    let a = which.apply(grid, &project_hardy(p, f)?)?;
    let b = project_hardy(p, &which.apply(grid, f)?)?;
    Ok(grid.l2_norm(&a.sub(&b))? / nf)
}

/// Sweeps the commutator ratio over grid sizes and random band-limited
/// trials.  `max_ratio` is the running per-N maximum, so the last row of
/// each N block carries that N's estimate.  Seeding is split per (Ω, N), so
/// a table is reproducible bit-for-bit from (which, n_list, trials, seed).
pub fn commutator_experiment(
    which: CircleOmega,
    n_list: &[usize],
    trials: usize,
    seed: u64,
) -> Result<CircleTable> {
    if trials == 0 {
        return Err(CalcError::BadParameter {
            name: "trials",
            range: "[1, ∞)",
            value: 0.0,
        });
    }
    let mut table = CircleTable::default();
    for &n in n_list {
        let grid = CircleGrid::new(n)?;
        let proj = SzegoProjection::new(grid);
        let stream = ((which.index() as u64) << 32) | n as u64;
        let mut rng = rng_for(seed, stream);
        let mut running = 0.0f64;
        for trial in 0..trials {
            let f = random_trig_poly(proj.grid(), &mut rng);
            let ratio = commutator_ratio(&proj, which, &f)?;
            running = running.max(ratio);
            table.rows.push(CircleRow {
                omega: which.index(),
                n,
                trial,
                ratio,
                max_ratio: running,
            });
        }
    }
    Ok(table)
}

/// Raw operator ratios ‖Ωf‖₂/‖f‖₂ for the adversarially concentrated test
/// function, per grid size — the unboundedness control.
pub fn operator_growth(which: CircleOmega, n_list: &[usize]) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let grid = CircleGrid::new(n)?;
        let f = concentrated_near_one(&grid);
        let ratio = grid.l2_norm(&which.apply(&grid, &f)?)? / grid.l2_norm(&f)?;
        out.push((n, ratio));
    }
    Ok(out)
}
