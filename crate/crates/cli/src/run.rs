//! Command dispatch: one handler per subcommand, each mapping parsed
//! arguments to library calls and packing an [`Output`].
//!
//! All stochastic draws inside handlers come from `rng_for(seed, STREAM_*)`
//! with a fixed per-command stream constant, so identical invocations replay
//! identical samples regardless of command ordering elsewhere.

use anyhow::Result;
use num_complex::Complex64;
use serde_json::json;
use std::sync::Arc;
use std::time::Instant;

use omega_core::opt::rng_for;
use omega_core::sample::{gaussian_complex_vec, lognormal_vec, random_weighted_lp};
use omega_core::{
    calderon_norm, canonical_omega, check_axioms, default_shrink_schedule, derived_norm_upper,
    estimate_delta, indicator_of_space, kappa, lift, operator_growth, split_centralizer,
    twisted_quasinorm, wolff_glue, CalcError, Centralizer, CircleOmega, Couple, IndicatorFn,
    KotheSpace, MeasureSpace, NumOpts, PExp, TwistedElement,
};

use crate::report::{emit, Output};
use crate::{
    AxiomsArgs, CentralizerCmd, Cli, Command, CommutatorArgs, DeltaArgs, GlobalOpts, GrowthArgs,
    IndicatorCmd, InterpolateArgs, LinearityArgs, OmegaArgs, SplitArgs, TwistedArgs, WolffArgs,
};

const STREAM_LINEARITY: u64 = 0xC1_0001;
const STREAM_INTERPOLATE: u64 = 0xC1_0003;
const STREAM_OMEGA: u64 = 0xC1_0004;
const STREAM_TWISTED: u64 = 0xC1_0006;
const STREAM_WOLFF: u64 = 0xC1_0007;

/// A request that is well-formed syntax but semantically unusable
/// (unknown space name, malformed list, missing companion flag).
#[derive(Debug)]
pub struct Precondition(pub String);

impl std::fmt::Display for Precondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for Precondition {}

/// Process exit code for a failed run: 3 when an optimizer ran out of
/// budget, 2 for any precondition violation, 1 for unexpected I/O trouble.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(ce) = err.downcast_ref::<CalcError>() {
        return match ce {
            CalcError::NonConvergence { .. } => 3,
            _ => 2,
        };
    }
    if err.downcast_ref::<Precondition>().is_some() {
        return 2;
    }
    1
}

fn precondition(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Precondition(msg.into()))
}

fn opts_from(global: &GlobalOpts) -> NumOpts {
    NumOpts {
        tol: global.tol,
        max_iter: global.max_iter,
        seed: global.seed,
        ..NumOpts::default()
    }
}

fn parse_pexp(s: &str) -> Result<PExp> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") || t == "∞" {
        return Ok(PExp::Inf);
    }
    let p: f64 = t
        .parse()
        .map_err(|_| precondition(format!("exponent must be a number or \"inf\", got {t:?}")))?;
    Ok(PExp::new(p)?)
}

fn parse_n_list(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let n: usize = part
            .parse()
            .map_err(|_| precondition(format!("grid size must be a positive integer, got {part:?}")))?;
        out.push(n);
    }
    if out.is_empty() {
        return Err(precondition("grid size list is empty"));
    }
    Ok(out)
}

fn space_from(name: &str, p: Option<f64>, n: usize) -> Result<KotheSpace> {
    let mu = MeasureSpace::counting(n)?;
    let pexp = match name.to_ascii_lowercase().as_str() {
        "l1" => PExp::Finite(1.0),
        "l2" => PExp::Finite(2.0),
        "lp" => {
            let p = p.ok_or_else(|| precondition("--space lp requires --p"))?;
            PExp::new(p)?
        }
        other => {
            return Err(precondition(format!(
                "unknown space {other:?}; expected l1, l2, or lp"
            )))
        }
    };
    Ok(KotheSpace::lp(mu, pexp)?)
}

fn omega_from(name: &str, a: KotheSpace) -> Result<Centralizer> {
    match name.to_ascii_lowercase().as_str() {
        "logmod" => Ok(Centralizer::log_modulus(a)),
        "ranklog" => Ok(Centralizer::rank_log(a)),
        "zero" => Ok(Centralizer::zero(a)),
        other => Err(precondition(format!(
            "unknown centralizer {other:?}; expected logmod, ranklog, or zero"
        ))),
    }
}

fn lp_couple(p0: &str, p1: &str, n: usize) -> Result<(Arc<MeasureSpace>, Couple)> {
    let space = MeasureSpace::counting(n)?;
    let a0 = KotheSpace::lp(space.clone(), parse_pexp(p0)?)?;
    let a1 = KotheSpace::lp(space.clone(), parse_pexp(p1)?)?;
    let couple = Couple::new(a0, a1)?;
    Ok((space, couple))
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    let global = cli.global.clone();
    let opts = opts_from(&global);
    let out = match cli.command {
        Command::Indicator { sub } => match sub {
            IndicatorCmd::Linearity(a) => indicator_linearity(&a, &global, &opts)?,
            IndicatorCmd::Delta(a) => indicator_delta(&a, &opts)?,
        },
        Command::Interpolate(a) => interpolate(&a, &global, &opts)?,
        Command::Omega(a) => omega_diag(&a, &global, &opts)?,
        Command::Centralizer { sub } => match sub {
            CentralizerCmd::Axioms(a) => centralizer_axioms(&a, &opts)?,
            CentralizerCmd::Split(a) => centralizer_split(&a, &opts)?,
        },
        Command::Twisted(a) => twisted(&a, &global, &opts)?,
        Command::Circle { sub } => match sub {
            crate::CircleCmd::Commutator(a) => circle_commutator(&a, &global)?,
            crate::CircleCmd::Growth(a) => circle_growth(&a)?,
        },
        Command::Wolff(a) => wolff(&a, &global, &opts)?,
    };
    emit(&global, out, started)
}

/// Max defect of Φ_t(f) = (1−t)Φ₀(f) + tΦ₁(f) for the product-space
/// indicator over random positive test functions.
fn indicator_linearity(a: &LinearityArgs, global: &GlobalOpts, opts: &NumOpts) -> Result<Output> {
    let (space, couple) = lp_couple(&a.p0, &a.p1, a.n)?;
    let at = couple.interpolation_space(a.t)?;
    let phi0 = indicator_of_space(couple.a0());
    let phi1 = indicator_of_space(couple.a1());
    let phit = indicator_of_space(&at);
    let mut rng = rng_for(global.seed, STREAM_LINEARITY);
    let mut max_defect = 0.0f64;
    for _ in 0..a.samples {
        let f = lognormal_vec(&space, 1.0, &mut rng);
        let vt = phit.eval(&f, opts)?;
        let va = (1.0 - a.t) * phi0.eval(&f, opts)? + a.t * phi1.eval(&f, opts)?;
        let d = (vt - va).abs();
        if !d.is_finite() {
            return Err(CalcError::NonConvergence {
                op: "indicator affine defect",
                iterations: 0,
                residual: d,
            }
            .into());
        }
        max_defect = max_defect.max(d);
    }
    let pass = max_defect <= 1e-6;
    let mut out = Output::new(
        "indicator.linearity",
        a,
        json!({
            "samples": a.samples,
            "tolerance": opts.tol,
            "max_affine_defect": max_defect,
            "within_1e-6": pass,
        }),
    )?;
    out.line(format!(
        "indicator linearity: max defect of t-affine law over {} samples = {:.6e}",
        a.samples, max_defect
    ));
    out.line(format!("within 1e-6: {pass}"));
    Ok(out)
}

/// Superadditivity constant δ(Φ) by sampled pair search.
fn indicator_delta(a: &DeltaArgs, opts: &NumOpts) -> Result<Output> {
    let space = MeasureSpace::counting(a.n)?;
    let p = parse_pexp(&a.p)?;
    let phi = if a.numeric {
        IndicatorFn::numeric(KotheSpace::lp(space, p)?)
    } else {
        IndicatorFn::closed_form_lp(space.clone(), p, vec![1.0; space.n()])?
    };
    let reference = phi.known_delta();
    let est = estimate_delta(&phi, a.budget, opts)?;
    let mut out = Output::new(
        "indicator.delta",
        a,
        json!({
            "budget": a.budget,
            "evaluated": est.evaluated,
            "tolerance": opts.tol,
            "delta_hat": est.value,
            "closed_form_reference": reference,
            "evaluation": if a.numeric { "numeric" } else { "closed-form" },
        }),
    )?;
    out.line(format!(
        "delta estimate over {} evaluated pairs (budget {}): {:.9}",
        est.evaluated, a.budget, est.value
    ));
    if let Some(r) = reference {
        out.line(format!("closed-form reference: {r:.9}"));
    }
    Ok(out)
}

/// Interpolation-norm solver against the exponent-arithmetic closed form.
fn interpolate(a: &InterpolateArgs, global: &GlobalOpts, opts: &NumOpts) -> Result<Output> {
    let (space, couple) = lp_couple(&a.p0, &a.p1, a.n)?;
    let closed = couple.weighted_lp_interpolant(a.t);
    let mut rng = rng_for(global.seed, STREAM_INTERPOLATE);
    let mut max_rel = 0.0f64;
    let mut max_gap = 0.0f64;
    for _ in 0..a.samples {
        let x = gaussian_complex_vec(&space, &mut rng);
        let res = calderon_norm(&couple, a.t, &x, opts)?;
        if let Some(cs) = &closed {
            max_rel = max_rel.max(rel_gap(res.norm, cs.norm(&x)?));
        }
        let (e0, e1) = res.endpoint_norms;
        max_gap = max_gap.max(rel_gap(e0, res.norm).max(rel_gap(e1, res.norm)));
    }
    let rel_vs_closed: Option<f64> = closed.as_ref().map(|_| max_rel);
    let mut out = Output::new(
        "interpolate",
        a,
        json!({
            "samples": a.samples,
            "tolerance": opts.tol,
            "closed_form_available": closed.is_some(),
            "max_rel_error_vs_closed_form": rel_vs_closed,
            "max_endpoint_equalization_gap": max_gap,
        }),
    )?;
    if closed.is_some() {
        out.line(format!(
            "interpolation norm vs closed form over {} samples: max rel error {:.6e}",
            a.samples, max_rel
        ));
    }
    out.line(format!(
        "max endpoint equalization gap: {:.6e}",
        max_gap
    ));
    Ok(out)
}

/// Canonical-differential diagnostics: finite-difference convergence of the
/// optimal family derivative, and t-independence of the lift.
fn omega_diag(a: &OmegaArgs, global: &GlobalOpts, opts: &NumOpts) -> Result<Output> {
    let (space, couple) = lp_couple(&a.p0, &a.p1, a.n)?;
    let mut rng = rng_for(global.seed, STREAM_OMEGA);
    let hs = [1e-3, 1e-4];
    let mut fd_err = [0.0f64; 2];
    for _ in 0..a.samples {
        let x = gaussian_complex_vec(&space, &mut rng);
        let res = calderon_norm(&couple, a.t, &x, opts)?;
        let omx = canonical_omega(&couple, a.t, &x, opts)?;
        let denom = 1.0 + omx.sup_abs();
        for (k, &h) in hs.iter().enumerate() {
            let fp = res.factorization.family_eval(Complex64::new(a.t + h, 0.0));
            let fm = res.factorization.family_eval(Complex64::new(a.t - h, 0.0));
            let fd = fp.sub(&fm).scale(Complex64::new(0.5 / h, 0.0));
            fd_err[k] = fd_err[k].max(fd.sub(&omx).sup_abs() / denom);
        }
    }
    // The lift of the canonical differential is independent of the interior
    // parameter; compare two distinct parameters on positive test functions.
    let t2 = a.t / 2.0;
    let om_a = Centralizer::canonical(couple.clone(), a.t)?;
    let om_b = Centralizer::canonical(couple.clone(), t2)?;
    let mut lift_gap = 0.0f64;
    for _ in 0..a.samples {
        let f = lognormal_vec(&space, 1.0, &mut rng);
        let la = lift(&om_a, &f, opts)?;
        let lb = lift(&om_b, &f, opts)?;
        lift_gap = lift_gap.max(la.sub(&lb).sup_abs() / (1.0 + la.sup_abs()));
    }
    let decade_ratio = fd_err[1] / fd_err[0].max(1e-300);
    let mut out = Output::new(
        "omega",
        a,
        json!({
            "samples": a.samples,
            "tolerance": opts.tol,
            "fd_errors": hs.iter().zip(fd_err.iter())
                .map(|(h, e)| json!({"h": h, "max_rel_error": e}))
                .collect::<Vec<_>>(),
            "fd_decade_ratio": decade_ratio,
            "lift_parameters": [a.t, t2],
            "max_lift_gap": lift_gap,
        }),
    )?;
    out.line(format!(
        "finite-difference error of the family derivative: {:.3e} at h=1e-3, {:.3e} at h=1e-4 (ratio {:.3})",
        fd_err[0], fd_err[1], decade_ratio
    ));
    out.line(format!(
        "lift gap between t={} and t={}: {:.6e}",
        a.t, t2, lift_gap
    ));
    Ok(out)
}

/// Sampled centralizer-axiom constants.
fn centralizer_axioms(a: &AxiomsArgs, opts: &NumOpts) -> Result<Output> {
    let base = space_from(&a.space, a.p, a.n)?;
    let omega = omega_from(&a.omega, base)?;
    let rep = check_axioms(&omega, a.samples, opts)?;
    let mut out = Output::new(
        "centralizer.axioms",
        a,
        json!({
            "samples": rep.samples,
            "tolerance": opts.tol,
            "rho_hat": rep.rho_hat,
            "c_hat": rep.c_hat,
            "homogeneity_defect": rep.homogeneity_defect,
            "m_table": rep.m_table.iter()
                .map(|(eps, m)| json!({"eps": eps, "m": m}))
                .collect::<Vec<_>>(),
        }),
    )?;
    out.line(format!(
        "axiom constants over {} samples: rho_hat = {:.6}, c_hat = {:.6}, homogeneity defect = {:.3e}",
        rep.samples, rep.rho_hat, rep.c_hat, rep.homogeneity_defect
    ));
    for (eps, m) in &rep.m_table {
        out.line(format!("  M({eps:.2}) = {m:.6}"));
    }
    Ok(out)
}

/// Reconstruct a couple whose canonical differential matches a scaled copy
/// of the given centralizer, and report the defect/equivalence constants.
fn centralizer_split(a: &SplitArgs, opts: &NumOpts) -> Result<Output> {
    let base = space_from(&a.space, a.p, a.n)?;
    let omega = omega_from(&a.omega, base.clone())?;
    let schedule = default_shrink_schedule();
    let res = split_centralizer(&base, &omega, a.t, &schedule, opts)?;
    let mut out = Output::new(
        "centralizer.split",
        a,
        json!({
            "tolerance": opts.tol,
            "pairs_checked": res.pairs_checked,
            "scale": res.scale,
            "recombination_defect": res.recombination_defect,
            "interpolation_defect": res.interp_defect,
            "margins": [
                {"min_delta": res.margins0.min_delta, "domination_defect": res.margins0.domination_defect},
                {"min_delta": res.margins1.min_delta, "domination_defect": res.margins1.domination_defect},
            ],
            "equivalence": {
                "c1": res.equivalence.c1,
                "c2_hat": res.equivalence.c2_hat,
                "samples": res.equivalence.samples,
            },
        }),
    )?;
    out.line(format!(
        "split at scale {:.6}: recombination defect {:.3e}, interpolation defect {:.3e} ({} pairs checked)",
        res.scale, res.recombination_defect, res.interp_defect, res.pairs_checked
    ));
    out.line(format!(
        "equivalence constants vs recovered canonical differential: c1 = {:.6}, c2_hat = {:.3e} ({} samples)",
        res.equivalence.c1, res.equivalence.c2_hat, res.equivalence.samples
    ));
    Ok(out)
}

/// Quasinorm geometry of the twisted sum: empirical quasi-triangle constant
/// and the analytic-family upper bound against the quasinorm.
fn twisted(a: &TwistedArgs, global: &GlobalOpts, opts: &NumOpts) -> Result<Output> {
    let (space, couple) = lp_couple(&a.p0, &a.p1, a.n)?;
    let at = match couple.weighted_lp_interpolant(a.t) {
        Some(s) => s,
        None => couple.interpolation_space(a.t)?,
    };
    let omega = Centralizer::canonical(couple.clone(), a.t)?;
    let mut rng = rng_for(global.seed, STREAM_TWISTED);
    let mut k_hat = 0.0f64;
    let mut bound_min = f64::INFINITY;
    let mut bound_max = 0.0f64;
    for _ in 0..a.samples {
        let e1 = TwistedElement::new(
            gaussian_complex_vec(&space, &mut rng),
            gaussian_complex_vec(&space, &mut rng),
        )?;
        let e2 = TwistedElement::new(
            gaussian_complex_vec(&space, &mut rng),
            gaussian_complex_vec(&space, &mut rng),
        )?;
        let q1 = twisted_quasinorm(&at, &omega, &e1, opts)?;
        let q2 = twisted_quasinorm(&at, &omega, &e2, opts)?;
        let q12 = twisted_quasinorm(&at, &omega, &e1.add(&e2), opts)?;
        k_hat = k_hat.max(q12 / (q1 + q2).max(1e-300));
        let b = derived_norm_upper(&couple, a.t, &e1, opts)?;
        let r = b.value / q1.max(1e-300);
        bound_min = bound_min.min(r);
        bound_max = bound_max.max(r);
    }
    let mut out = Output::new(
        "twisted",
        a,
        json!({
            "samples": a.samples,
            "tolerance": opts.tol,
            "kappa": kappa(a.t),
            "quasi_triangle_max": k_hat,
            "family_bound_over_quasinorm": {"min": bound_min, "max": bound_max},
        }),
    )?;
    out.line(format!(
        "quasi-triangle constant over {} sampled pairs: {:.6} (strip gauge kappa(t) = {:.6})",
        a.samples,
        k_hat,
        kappa(a.t)
    ));
    out.line(format!(
        "analytic-family bound / quasinorm: min {:.6}, max {:.6}",
        bound_min, bound_max
    ));
    Ok(out)
}

/// Commutator-ratio sweep on dyadic circle grids; CSV is the artifact.
fn circle_commutator(a: &CommutatorArgs, global: &GlobalOpts) -> Result<Output> {
    let which = CircleOmega::from_index(a.omega)?;
    let n_list = parse_n_list(&a.n)?;
    let table = omega_core::commutator_experiment(which, &n_list, a.trials, global.seed)?;
    let per_n: Vec<_> = n_list
        .iter()
        .map(|&n| json!({"n": n, "max_ratio": table.max_for(n)}))
        .collect();
    let mut out = Output::new(
        "circle.commutator",
        a,
        json!({
            "trials": a.trials,
            "grid_sizes": n_list,
            "per_grid_max": per_n,
            "rows": table.rows.len(),
        }),
    )?;
    for &n in &n_list {
        if let Some(m) = table.max_for(n) {
            out.line(format!("N = {n}: max commutator ratio {m:.6}"));
        }
    }
    out.csv = Some(table.to_csv());
    Ok(out)
}

/// Raw operator ratio on the concentrated test function per grid size.
fn circle_growth(a: &GrowthArgs) -> Result<Output> {
    let which = CircleOmega::from_index(a.omega)?;
    let n_list = parse_n_list(&a.n)?;
    let rows = operator_growth(which, &n_list)?;
    let mut csv = String::from("omega,N,ratio\n");
    for &(n, r) in &rows {
        csv.push_str(&format!("{},{},{:.12e}\n", a.omega, n, r));
    }
    let factor = if rows.len() >= 2 {
        Some(rows[rows.len() - 1].1 / rows[0].1.max(1e-300))
    } else {
        None
    };
    let mut out = Output::new(
        "circle.growth",
        a,
        json!({
            "grid_sizes": n_list,
            "ratios": rows.iter().map(|(n, r)| json!({"n": n, "ratio": r})).collect::<Vec<_>>(),
            "growth_factor_last_over_first": factor,
        }),
    )?;
    for &(n, r) in &rows {
        out.line(format!("N = {n}: operator ratio {r:.6}"));
    }
    if let Some(f) = factor {
        out.line(format!("growth factor (last/first): {f:.6}"));
    }
    out.csv = Some(csv);
    Ok(out)
}

/// Two-segment gluing: recover inner endpoint indicators from the outer
/// pair and report the reconstruction residuals of the two premises.
fn wolff(a: &WolffArgs, global: &GlobalOpts, opts: &NumOpts) -> Result<Output> {
    let space = MeasureSpace::counting(a.n)?;
    let mut rng = rng_for(global.seed, STREAM_WOLFF);
    let a1 = random_weighted_lp(&space, 1.0, 8.0, 0.3, 3.0, &mut rng);
    let a4 = random_weighted_lp(&space, 1.0, 8.0, 0.3, 3.0, &mut rng);
    let phi1 = indicator_of_space(&a1);
    let phi4 = indicator_of_space(&a4);
    let g = wolff_glue(&phi1, &phi4, a.theta1, a.theta2, opts)?;
    let mut out = Output::new(
        "wolff",
        a,
        json!({
            "samples": g.samples,
            "tolerance": opts.tol,
            "alpha1": g.alpha1,
            "alpha2": g.alpha2,
            "premise_residuals": [g.premise_residuals.0, g.premise_residuals.1],
        }),
    )?;
    out.line(format!(
        "glued positions: alpha1 = {:.6}, alpha2 = {:.6}",
        g.alpha1, g.alpha2
    ));
    out.line(format!(
        "premise residuals over {} samples: {:.3e}, {:.3e}",
        g.samples, g.premise_residuals.0, g.premise_residuals.1
    ));
    Ok(out)
}
