//! End-to-end acceptance gates on the Jin-Xin model (a = 1, Burgers flux) at
//! eps in {0.05, 0.1, 0.2}. Each gate prints one PASS/FAIL line; the test
//! fails if any gate does.

use std::io::Write;

use relax_shock::chapman_enskog::{build_reduced, ns_profile, residual_rv, NsProfile, ProfileOptions, ReducedSystem};
use relax_shock::linearized::{apply_right_inverse, assemble, ce_right_inverse_fluid, viscosity_sweep};
use relax_shock::model::{broadwell_model, hugoniot_endstates, jin_xin_model, Flux, RelaxationModel};
use relax_shock::solver::{
    epsilon_sweep, equilibrium_closure_rv, fixed_point_map, fixed_point_solve, fixed_point_solve_from, nonlinear_residual,
    SolverOptions, SweepOptions, SweepSlopes, SweepTable,
};
use relax_shock::spaces::{linear_slope, weighted_norm, NormSpec};
use relax_shock::stability::{
    assemble_generator_banded, assemble_l, profile_derivative, spectrum_check, translation_count_check, SpectrumTolerances,
};
use relax_shock::structure::structure_report;
use relax_shock::{GridFunction, Result};

const EPSILONS: [f64; 3] = [0.05, 0.1, 0.2];

struct Setup {
    model: RelaxationModel,
    reduced: ReducedSystem,
}

impl Setup {
    fn new() -> Self {
        let model = jin_xin_model(1.0, Flux::burgers()).unwrap();
        let reduced = build_reduced(&model);
        Self { model, reduced }
    }

    fn profile(&self, eps: f64, opts: &ProfileOptions) -> Result<NsProfile> {
        let ends = hugoniot_endstates(&self.reduced, &self.model, eps)?;
        ns_profile(&self.reduced, &self.model, &ends, opts)
    }
}

type Outcome = std::result::Result<(bool, String), String>;
type Gate<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn slope(eps: &[f64], vals: &[f64]) -> f64 {
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    linear_slope(&x, &y)
}

fn slopes(table: &SweepTable) -> std::result::Result<&SweepSlopes, String> {
    if let Some(bad) = table.rows.iter().find_map(|r| r.as_ref().err()) {
        return Err(format!("sweep row failed: {bad}"));
    }
    table.slopes.as_ref().ok_or_else(|| "no slopes fitted".to_string())
}

/// Tail rate of the exact profile `-(eps/2) tanh(eps x / 4)`, from two far
/// points of `u - u+`.
fn analytic_tail_rate(eps: f64) -> f64 {
    let u = |x: f64| -0.5 * eps * (0.25 * eps * x).tanh();
    let tail = |x: f64| u(x) + 0.5 * eps;
    let (x1, x2) = (20.0 / eps, 25.0 / eps);
    (tail(x1).ln() - tail(x2).ln()) / (x2 - x1)
}

fn c1_residual(table: &SweepTable) -> Outcome {
    let s = slopes(table)?;
    Ok((s.rv >= 2.7, format!("slope sup|R_v| = {:.3} (>= 2.7)", s.rv)))
}

fn c2_corrector(table: &SweepTable) -> Outcome {
    let s = slopes(table)?;
    let pass = s.corrector_h2 >= 1.8 && s.corrector_sup >= 1.8;
    Ok((pass, format!("slope H2 = {:.3}, sup = {:.3} (>= 1.8)", s.corrector_h2, s.corrector_sup)))
}

fn c3_ns_profile(table: &SweepTable) -> Outcome {
    let s = slopes(table)?;
    let mut pass = (0..3).all(|k| s.ns_profile[k] >= k as f64 + 0.8);
    let mut worst: f64 = 0.0;
    for row in table.rows.iter().flatten() {
        let oracle = analytic_tail_rate(row.epsilon) / row.epsilon;
        let rel = (row.theta_fit - oracle).abs() / oracle;
        worst = worst.max(rel);
        pass &= rel <= 0.15;
    }
    Ok((
        pass,
        format!(
            "slopes k=0,1,2: {:.3}, {:.3}, {:.3}; tail rate error {:.2}% (<= 15%)",
            s.ns_profile[0],
            s.ns_profile[1],
            s.ns_profile[2],
            100.0 * worst
        ),
    ))
}

fn c4_kinetic(table: &SweepTable) -> Outcome {
    let s = slopes(table)?;
    let pass = s.kinetic[0] >= 1.8 && s.kinetic[1] >= 2.7;
    Ok((pass, format!("slope sup|v - v*| = {:.3} (>= 1.8), derivative {:.3} (>= 2.7)", s.kinetic[0], s.kinetic[1])))
}

fn c5_contraction(st: &Setup) -> Outcome {
    let p = st.profile(0.1, &ProfileOptions::default()).map_err(|e| e.to_string())?;
    let opts = SolverOptions::default();
    let sol = fixed_point_solve(&st.model, &st.reduced, &p, &opts).map_err(|e| e.to_string())?;
    let last = *sol.steps.last().unwrap();
    let max_ratio = sol.ratios.iter().skip(1).cloned().fold(0.0, f64::max);
    let zero = GridFunction::zeros(p.grid(), 2, 0.1);
    let t0 = fixed_point_map(&st.model, &st.reduced, &p, &opts, &zero).map_err(|e| e.to_string())?;
    let again = fixed_point_solve_from(&st.model, &st.reduced, &p, &opts, Some(&t0)).map_err(|e| e.to_string())?;
    let spec = NormSpec::new(2, 0.1, sol.delta);
    let gap = weighted_norm(&again.correction.sub(&sol.correction), spec).map_err(|e| e.to_string())?;
    let pass = sol.iterations <= 8 && last <= 1e-10 && max_ratio <= 0.5 && gap <= 10.0 * opts.tol;
    Ok((
        pass,
        format!(
            "{} iterations, last step {last:.2e}, max ratio from 2nd {max_ratio:.3}, restart gap {gap:.2e}",
            sol.iterations
        ),
    ))
}

fn c6_ground_truth(st: &Setup) -> Outcome {
    let run = |h: f64| -> Result<(f64, f64)> {
        let opts = ProfileOptions { h: Some(h), ..ProfileOptions::default() };
        let p = st.profile(0.1, &opts)?;
        let rv = residual_rv(&st.model, &st.reduced, &p)?.sup;
        let sol = fixed_point_solve(&st.model, &st.reduced, &p, &SolverOptions::default())?;
        Ok((nonlinear_residual(&st.model, &sol.u_bar)?, rv))
    };
    let h = ProfileOptions::default().step(0.1);
    let (coarse, rv) = run(h).map_err(|e| e.to_string())?;
    let (fine, _) = run(0.5 * h).map_err(|e| e.to_string())?;
    let factor = coarse / fine;
    let pass = (3.5..=4.5).contains(&factor) && coarse <= 1e-2 * rv;
    Ok((pass, format!("h-halving factor {factor:.3} (3.5..4.5); residual/sup|R_v| = {:.2e} (<= 1e-2)", coarse / rv)))
}

fn shape(p: &NsProfile, dim: usize) -> GridFunction {
    let eps = p.epsilon;
    GridFunction::from_fn(p.grid(), dim, eps, |x| {
        let y = eps * x;
        (0..dim).map(|k| (1.0 + k as f64 * y) * (-y * y).exp()).collect()
    })
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(0.0, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

fn c7_right_inverse(st: &Setup) -> Outcome {
    let mut full = Vec::new();
    let mut fluid = Vec::new();
    for &eps in &EPSILONS {
        let p = st.profile(eps, &ProfileOptions::default()).map_err(|e| e.to_string())?;
        let delta = p.default_delta();
        let spec = NormSpec::new(2, eps, delta);
        let op = assemble(&st.model, &st.reduced, &p, 0.0).map_err(|e| e.to_string())?;
        // the solver's own input has this form, (0, -R_v)
        let f = GridFunction::zeros(p.grid(), 1, eps);
        let g = shape(&p, 1);
        let out = apply_right_inverse(&op, &f, &g).map_err(|e| e.to_string())?;
        let input = weighted_norm(&f.concat(&g), spec).map_err(|e| e.to_string())?;
        full.push(eps * weighted_norm(&out.u, spec).map_err(|e| e.to_string())? / input);
        let h = shape(&p, 1);
        let fl = ce_right_inverse_fluid(&st.reduced, &p, &h).map_err(|e| e.to_string())?;
        fluid.push(eps * weighted_norm(&fl.u, spec).map_err(|e| e.to_string())? / weighted_norm(&h, spec).map_err(|e| e.to_string())?);
    }
    let (sf, sl) = (spread(&full), spread(&fluid));
    Ok((
        sf <= 3.0 && sl <= 3.0,
        format!("eps*|out|/|in| spread: full {sf:.3}, fluid {sl:.3} (<= 3); full {full:.3?}, fluid {fluid:.3?}"),
    ))
}

fn c8_viscosity(st: &Setup) -> Outcome {
    let p = st.profile(0.1, &ProfileOptions::default()).map_err(|e| e.to_string())?;
    let rv = residual_rv(&st.model, &st.reduced, &p).map_err(|e| e.to_string())?;
    let f = GridFunction::zeros(p.grid(), 1, 0.1);
    let g = rv.rv.scale(-1.0);
    let etas = [1e-2, 1e-3, 1e-4, 1e-5];
    let rep = viscosity_sweep(&st.model, &st.reduced, &p, &f, &g, &etas, p.default_delta()).map_err(|e| e.to_string())?;
    let monotone = rep.differences.windows(2).all(|w| w[1] < w[0]);
    let pass = monotone && rep.ratios.iter().all(|&q| q <= 0.6) && rep.norm_spread <= 0.2;
    Ok((
        pass,
        format!(
            "differences {}, ratios {:.3?} (<= 0.6), norm spread {:.2}%",
            rep.differences.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>().join(" > "),
            rep.ratios,
            100.0 * rep.norm_spread
        ),
    ))
}

/// Largest `min(k, 1 - k)` over compensators `K = [[0, k], [-k, 0]]`: the
/// smallest eigenvalue of `Re(KA - S dQ) = diag(k, 1 - k)` for Jin-Xin at `u = 0`.
fn kawashima_oracle() -> f64 {
    (0..=10_000).map(|i| i as f64 / 10_000.0).map(|k| k.min(1.0 - k)).fold(0.0, f64::max)
}

fn c9_structure(st: &Setup) -> Outcome {
    let eta = 1e-3;
    let mut margins = Vec::new();
    let mut pass = true;
    let mut theta = f64::NAN;
    let mut count = 0;
    for &eps in &EPSILONS {
        let rep = structure_report(&st.model, &st.reduced, eps, eta).map_err(|e| e.to_string())?;
        pass &= rep.all_pass;
        theta = rep.kawashima.as_ref().map_or(f64::NAN, |k| k.theta);
        let strip = rep.strip.ok_or("no strip report")?;
        count = strip.connection_count;
        margins.push(strip.margin);
    }
    let bw = broadwell_model().map_err(|e| e.to_string())?;
    let bw_red = build_reduced(&bw);
    let bw_pass = structure_report(&bw, &bw_red, 0.1, eta).map_err(|e| e.to_string())?.all_pass;
    let oracle = kawashima_oracle();
    let margin_slope = slope(&EPSILONS, &margins);
    pass &= bw_pass && theta >= 0.4 && (theta - oracle).abs() <= 0.02 && count == 4 && (0.8..=1.2).contains(&margin_slope);
    Ok((
        pass,
        format!(
            "theta = {theta:.4} (exact {oracle}), Broadwell all pass {bw_pass}, strip margin slope {margin_slope:.3}, count {count}"
        ),
    ))
}

fn c10_spectrum(st: &Setup) -> Outcome {
    let eps = 0.1;
    // wide enough that the doubled spectral domain is still inside the solve
    let opts = ProfileOptions { domain_scale: 50.0, ..ProfileOptions::default() };
    let p = st.profile(eps, &opts).map_err(|e| e.to_string())?;
    let sol = fixed_point_solve(&st.model, &st.reduced, &p, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let stride = (0.5 / p.grid().h).round() as usize;
    let tol = SpectrumTolerances::default();
    let x_base = 23.0 / eps;
    let base = sol.u_bar.subsample(stride, x_base).map_err(|e| e.to_string())?;
    let lmat = assemble_l(&st.model, &base).map_err(|e| e.to_string())?;
    let rep = spectrum_check(&lmat, &profile_derivative(&base).map_err(|e| e.to_string())?, tol).map_err(|e| e.to_string())?;
    let wide = sol.u_bar.subsample(stride, 2.0 * x_base).map_err(|e| e.to_string())?;
    let gen = assemble_generator_banded(&st.model, &wide).map_err(|e| e.to_string())?;
    let big = translation_count_check(&gen, &profile_derivative(&wide).map_err(|e| e.to_string())?, tol).map_err(|e| e.to_string())?;
    let (l0, l1) = (rep.translation.lambda[0].hypot(rep.translation.lambda[1]), big.translation.lambda[0].abs());
    let pass = rep.passed && rep.count_above_threshold == 1 && big.passed && l1 <= l0;
    Ok((
        pass,
        format!(
            "X = {x_base:.0}: size {}, count {}, |lambda0| {l0:.2e}, corr {:.4}, max other {:.2e}; X = {:.0}: count {}, |lambda0| {l1:.2e}, corr {:.4}",
            lmat.rows(),
            rep.count_above_threshold,
            rep.translation.correlation,
            rep.max_other_re,
            2.0 * x_base,
            big.count_above_threshold,
            big.translation.correlation
        ),
    ))
}

fn c11_negative_control(st: &Setup, table: &SweepTable) -> Outcome {
    let ce = slopes(table)?.rv;
    let mut eq = Vec::new();
    for &eps in &EPSILONS {
        let p = st.profile(eps, &ProfileOptions::default()).map_err(|e| e.to_string())?;
        eq.push(equilibrium_closure_rv(&st.model, &st.reduced, &p).map_err(|e| e.to_string())?);
    }
    let s = slope(&EPSILONS, &eq);
    Ok((s <= 2.3 && s < ce, format!("equilibrium closure slope {s:.3} (<= 2.3) vs Chapman-Enskog {ce:.3}")))
}

#[test]
fn acceptance() {
    let st = Setup::new();
    let table = epsilon_sweep(&st.model, &st.reduced, &EPSILONS, &SweepOptions::default());
    let gates: Vec<Gate> = vec![
        ("residual scaling", Box::new(|| c1_residual(&table))),
        ("corrector scaling", Box::new(|| c2_corrector(&table))),
        ("NS profile scaling", Box::new(|| c3_ns_profile(&table))),
        ("kinetic closeness", Box::new(|| c4_kinetic(&table))),
        ("contraction", Box::new(|| c5_contraction(&st))),
        ("ground truth", Box::new(|| c6_ground_truth(&st))),
        ("right-inverse rates", Box::new(|| c7_right_inverse(&st))),
        ("vanishing viscosity", Box::new(|| c8_viscosity(&st))),
        ("structure", Box::new(|| c9_structure(&st))),
        ("spectrum", Box::new(|| c10_spectrum(&st))),
        ("negative control", Box::new(|| c11_negative_control(&st, &table))),
    ];
    let mut failed = Vec::new();
    writeln!(std::io::stdout(), "\nacceptance gates").unwrap();
    for (i, (name, gate)) in gates.iter().enumerate() {
        let (pass, detail) = gate().unwrap_or_else(|e| (false, format!("error: {e}")));
        // written past the test harness capture so the lines show in every run
        let mut out = std::io::stdout().lock();
        writeln!(out, "[{}] {:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" }, i + 1).unwrap();
        out.flush().unwrap();
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
