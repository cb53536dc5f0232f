//! Dispatch of a problem document to the library.

use std::collections::BTreeMap;

use isomonodromy::frobenius::{
    approach_path, build_local_series, connection_data, generated_loop, verify_local_agreement, LocalOptions,
};
use isomonodromy::path::{
    choose_basepoint, default_loop_clearance, generator_loops, monodromy, GeneratorLoops, LoopPlan, PathPlan,
};
use isomonodromy::rational::{assemble_family, factor_at_pole, verify_trivial_monodromy, RationalFamily};
use isomonodromy::schlesinger::{
    integrate_flow, perturb_off_flow, verify_integrability, verify_isomonodromy, verify_isoprincipal_narrow,
    SchlesingerState, TPath,
};
use isomonodromy::tau::{tau_closed_form, tau_log_integrate, verify_closedness};
use isomonodromy::{eigenvalues, exp_two_pi_i, Cplx, FuchsianSystem, Matrix};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::report::{Cell, CheckResult, ReportDocument, Table};
use crate::schema::{matrix_to_doc, Check, Cx, Mode, ProblemDocument, SystemDoc, SCHEMA_VERSION};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Command-line overrides.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

fn cx(z: Cplx) -> Value {
    json!([z.re, z.im])
}

fn mat(m: &Matrix) -> Value {
    serde_json::to_value(matrix_to_doc(m)).expect("matrix serializes")
}

fn schema<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Schema(format!("{what}: {e}"))
}

struct Ctx<'a> {
    doc: &'a ProblemDocument,
    tol: f64,
    seed: u64,
    checks: Vec<CheckResult>,
    data: BTreeMap<String, Value>,
    traces: BTreeMap<String, Table>,
    checkpoints: Vec<Value>,
}

impl Ctx<'_> {
    fn wants(&self, c: Check) -> bool {
        self.doc.checks.contains(&c)
    }

    fn threshold(&self, c: Check) -> f64 {
        self.doc.threshold(c)
    }

    fn put(&mut self, key: &str, v: Value) {
        self.data.insert(key.to_owned(), v);
    }

    fn selected(&self, n: usize) -> Vec<usize> {
        self.doc.poles.clone().unwrap_or_else(|| (0..n).collect())
    }

    fn system(&self) -> Result<FuchsianSystem<f64>, CliError> {
        self.doc.system.as_ref().expect("validated").build()
    }

    fn basepoint(&self, system: &FuchsianSystem<f64>) -> Cplx {
        self.doc.basepoint.map(Cx::c).unwrap_or_else(|| choose_basepoint(system))
    }

    fn clearance(&self, system: &FuchsianSystem<f64>) -> f64 {
        self.doc.clearance.unwrap_or_else(|| default_loop_clearance(system))
    }

    fn generator_loops(&self, system: &FuchsianSystem<f64>) -> Result<GeneratorLoops<f64>, CliError> {
        generator_loops(system, self.basepoint(system), self.clearance(system)).map_err(schema("generator loops"))
    }

    fn t_path(&self, system: &FuchsianSystem<f64>) -> Result<TPath<f64>, CliError> {
        let v: Vec<Vec<Cplx>> =
            self.doc.t_path.as_ref().expect("validated").iter().map(|v| v.iter().map(|z| z.c()).collect()).collect();
        let start_gap: f64 = v[0].iter().zip(system.poles()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if start_gap > 1e-12 * system.length_scale() {
            return Err(CliError::Schema("t_path must start at the system's poles".into()));
        }
        TPath::from_vertices(v).map_err(schema("t_path"))
    }
}

/// Runs a validated document.
pub fn run(doc: &ProblemDocument, ov: Overrides) -> Result<ReportDocument, CliError> {
    doc.validate()?;
    let tol = ov.tol.or(doc.tolerances.integration).unwrap_or(DEFAULT_TOL);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CliError::Schema("tolerance must be positive".into()));
    }
    let seed = ov.seed.or(doc.seed).unwrap_or(0);
    let mut ctx = Ctx {
        doc,
        tol,
        seed,
        checks: Vec::new(),
        data: BTreeMap::new(),
        traces: BTreeMap::new(),
        checkpoints: Vec::new(),
    };
    match doc.mode {
        Mode::Monodromy => run_monodromy(&mut ctx)?,
        Mode::LocalSeries => run_local_series(&mut ctx)?,
        Mode::Schlesinger => run_schlesinger(&mut ctx)?,
        Mode::Tau => run_tau(&mut ctx)?,
        Mode::Isoprincipal => run_isoprincipal(&mut ctx)?,
        Mode::Rational => run_rational(&mut ctx)?,
    }
    if let Some(keep) = &doc.outputs {
        ctx.traces.retain(|k, _| keep.contains(k));
    }
    // report order follows the document
    let order = |c: &CheckResult| doc.checks.iter().position(|d| *d == c.name).unwrap_or(usize::MAX);
    ctx.checks.sort_by_key(order);
    Ok(ReportDocument {
        schema: SCHEMA_VERSION,
        mode: doc.mode,
        tol,
        seed,
        passed: ctx.checks.iter().all(|c| c.passed),
        checks: ctx.checks,
        data: Value::Object(ctx.data.into_iter().collect()),
        traces: ctx.traces,
        checkpoints: ctx.checkpoints,
    })
}

fn spectral_distance(m: &Matrix, q: &Matrix) -> Result<f64, CliError> {
    let predicted = eigenvalues(q)?.map(|z| (Cplx::new(0.0, std::f64::consts::TAU) * z).exp());
    Ok(eigenvalues(m)?.matching_distance(&predicted).unwrap_or(f64::INFINITY))
}

fn run_monodromy(ctx: &mut Ctx) -> Result<(), CliError> {
    let system = ctx.system()?;
    let tol = ctx.tol;
    if let Some(loops) = &ctx.doc.loops {
        if ctx.wants(Check::GeneratingRelation) || ctx.wants(Check::SpectralMapping) {
            return Err(CliError::Schema("generator checks need generator loops, not explicit loops".into()));
        }
        let plans = loops
            .iter()
            .map(|v| {
                let p = PathPlan::with_default_clearance(&system, v.iter().map(|z| z.c()).collect(), tol)
                    .map_err(schema("loop"))?;
                LoopPlan::new(p).map_err(schema("loop"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let ms = plans.par_iter().map(|l| monodromy(&system, l, tol)).collect::<Result<Vec<_>, _>>()?;
        let mut table = Table::new(&["j", "re", "im"]);
        let mut out = Vec::new();
        for (i, m) in ms.iter().enumerate() {
            let ev = eigenvalues(&m.m)?;
            for z in ev.values() {
                table.rows.push(vec![Cell::Int(i as i64), Cell::Real(z.re), Cell::Real(z.im)]);
            }
            out.push(json!({
                "loop": i,
                "winding": m.winding,
                "m": mat(&m.m),
                "eigenvalues": ev.values().iter().map(|z| cx(*z)).collect::<Vec<_>>(),
                "det_residual": m.det_residual,
                "error_estimate": m.error_estimate,
            }));
        }
        ctx.put("loops", Value::Array(out));
        ctx.traces.insert("monodromy_eigenvalues".into(), table);
        return Ok(());
    }
    let gl = ctx.generator_loops(&system)?;
    let ms = gl.loops.par_iter().map(|l| monodromy(&system, l, tol)).collect::<Result<Vec<_>, _>>()?;
    let all: Vec<Matrix> = ms.iter().map(|m| m.m.clone()).collect();
    let product = gl.ordered_product(&all);
    let relation = product.distance(&Matrix::identity(system.dim()));
    let mut table = Table::new(&["j", "re", "im"]);
    let mut out = Vec::new();
    let mut spectral = 0.0f64;
    for j in ctx.selected(system.n_poles()) {
        let ev = eigenvalues(&ms[j].m)?;
        for z in ev.values() {
            table.rows.push(vec![Cell::Int(j as i64), Cell::Real(z.re), Cell::Real(z.im)]);
        }
        let sd = spectral_distance(&ms[j].m, system.residue(j))?;
        spectral = spectral.max(sd);
        out.push(json!({
            "pole": j,
            "m": mat(&ms[j].m),
            "eigenvalues": ev.values().iter().map(|z| cx(*z)).collect::<Vec<_>>(),
            "spectral_distance": sd,
            "det_residual": ms[j].det_residual,
            "error_estimate": ms[j].error_estimate,
        }));
    }
    ctx.put("basepoint", cx(gl.basepoint));
    ctx.put("clearance", json!(gl.clearance));
    ctx.put("order", json!(gl.order));
    ctx.put("monodromies", Value::Array(out));
    ctx.put("product_residual", json!(relation));
    ctx.traces.insert("monodromy_eigenvalues".into(), table);
    if ctx.wants(Check::GeneratingRelation) {
        let mut c = CheckResult::below(Check::GeneratingRelation, relation, ctx.threshold(Check::GeneratingRelation));
        if !system.zero_sum_at_infinity() {
            c = c.with_note("system is not flagged regular at infinity");
        }
        ctx.checks.push(c);
    }
    if ctx.wants(Check::SpectralMapping) {
        ctx.checks.push(CheckResult::below(Check::SpectralMapping, spectral, ctx.threshold(Check::SpectralMapping)));
    }
    Ok(())
}

fn run_local_series(ctx: &mut Ctx) -> Result<(), CliError> {
    let system = ctx.system()?;
    let tol = ctx.tol;
    let x0 = ctx.basepoint(&system);
    let clearance = ctx.clearance(&system);
    let poles = ctx.selected(system.n_poles());
    let (need_agree, need_exp) = (ctx.wants(Check::LocalAgreement), ctx.wants(Check::ExponentMonodromy));
    let results = poles
        .par_iter()
        .map(|&j| -> Result<_, CliError> {
            let local = build_local_series(&system, j, &LocalOptions::new(tol))?;
            let agree = if need_agree { Some(verify_local_agreement(&system, &local, 4, tol * 1e-2)?) } else { None };
            let alpha = approach_path(&system, j, x0, clearance).map_err(schema("approach path"))?;
            let cd = connection_data(&system, &local, &alpha, None, tol * 1e-2)?;
            let exp = if need_exp {
                let m = monodromy(&system, &generated_loop(&system, j, &alpha)?, tol * 1e-2)?;
                Some((exp_two_pi_i(&cd.a)?.distance(&m.m), m.m))
            } else {
                None
            };
            Ok((j, local, agree, cd, exp))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    let mut norms = Table::new(&["j", "r", "norm", "bound"]);
    let (mut rec, mut agr, mut expm) = (0.0f64, 0.0f64, 0.0f64);
    for (j, local, agree, cd, exp) in &results {
        for (r, p) in local.psi.iter().enumerate() {
            norms.rows.push(vec![
                Cell::Int(*j as i64),
                Cell::Int(r as i64),
                Cell::Real(p.norm_fro()),
                Cell::Real(local.coefficient_bound(r)),
            ]);
        }
        rec = rec.max(local.max_residual);
        let mut entry = json!({
            "pole": j,
            "order": local.order(),
            "certified_order": local.certified_order,
            "empirical_order": local.empirical_order,
            "rho": local.rho,
            "c1": local.c1,
            "epsilon": local.epsilon,
            "c_sharp": local.c_sharp,
            "d": local.d,
            "d_explicit": local.d_explicit,
            "radius": local.radius,
            "max_residual": local.max_residual,
            "psi": local.psi.iter().map(mat).collect::<Vec<_>>(),
            "connection": mat(&cd.c),
            "exponent": mat(&cd.a),
            "probe": cx(cd.probe),
        });
        if let Some(a) = agree {
            agr = agr.max(a.max_residual);
            entry["local_agreement"] = json!(a.residuals);
        }
        if let Some((d, m)) = exp {
            expm = expm.max(*d);
            entry["monodromy"] = mat(m);
            entry["exponent_monodromy_residual"] = json!(d);
        }
        out.push(entry);
    }
    ctx.put("basepoint", cx(x0));
    ctx.put("poles", Value::Array(out));
    ctx.traces.insert("coefficient_norms".into(), norms);
    if ctx.wants(Check::Recursion) {
        ctx.checks.push(CheckResult::below(Check::Recursion, rec, ctx.threshold(Check::Recursion)));
    }
    if need_agree {
        ctx.checks.push(CheckResult::below(Check::LocalAgreement, agr, ctx.threshold(Check::LocalAgreement)));
    }
    if need_exp {
        ctx.checks.push(CheckResult::below(Check::ExponentMonodromy, expm, ctx.threshold(Check::ExponentMonodromy)));
    }
    Ok(())
}

fn state_json(s: &SchlesingerState<f64>) -> Value {
    json!({
        "t": s.t.iter().map(|z| cx(*z)).collect::<Vec<_>>(),
        "q": s.q.iter().map(mat).collect::<Vec<_>>(),
        "log_tau": cx(s.log_tau),
    })
}

fn tau_table(trace: impl Iterator<Item = (f64, Cplx)>) -> Table {
    let mut t = Table::new(&["s", "re_log_tau", "im_log_tau"]);
    t.rows = trace.map(|(s, z)| vec![Cell::Real(s), Cell::Real(z.re), Cell::Real(z.im)]).collect();
    t
}

fn run_schlesinger(ctx: &mut Ctx) -> Result<(), CliError> {
    let system = ctx.system()?;
    let path = ctx.t_path(&system)?;
    let state = SchlesingerState::from_system(&system);
    let flow = integrate_flow(&state, &path, ctx.tol)?;
    ctx.checkpoints = flow
        .checkpoints
        .iter()
        .map(|c| {
            json!({
                "s": c.s,
                "t": c.t.iter().map(|z| cx(*z)).collect::<Vec<_>>(),
                "q": c.q.iter().map(mat).collect::<Vec<_>>(),
                "log_tau": cx(c.log_tau),
            })
        })
        .collect();
    let scale = state.scale();
    ctx.put("end", state_json(&flow.state));
    ctx.put("end_system", serde_json::to_value(SystemDoc::from_system(&flow.state.system()?)).expect("serializes"));
    ctx.put("arclength", json!(flow.arclength));
    ctx.put("sum_drift", json!(flow.sum_drift));
    ctx.put("trace_drift", json!(flow.trace_drift));
    ctx.put("steps", json!({"accepted": flow.stats.accepted, "rejected": flow.stats.rejected}));
    ctx.traces.insert("tau_trace".into(), tau_table(flow.checkpoints.iter().map(|c| (c.s, c.log_tau))));
    if ctx.wants(Check::SumDrift) {
        ctx.checks.push(CheckResult::below(Check::SumDrift, flow.sum_drift / scale, ctx.threshold(Check::SumDrift)));
    }
    if ctx.wants(Check::TraceDrift) {
        ctx.checks.push(CheckResult::below(Check::TraceDrift, flow.trace_drift, ctx.threshold(Check::TraceDrift)));
    }
    if ctx.wants(Check::Integrability) {
        let mut worst = 0.0f64;
        for (i, s) in [&state, &flow.state].into_iter().enumerate() {
            let r = verify_integrability(s, 16, ctx.seed.wrapping_add(i as u64))?;
            worst = worst.max(r.ce3).max(r.seid).max(r.jacobi);
        }
        ctx.put("integrability_residual", json!(worst));
        ctx.checks.push(CheckResult::below(Check::Integrability, worst, ctx.threshold(Check::Integrability)));
    }
    if ctx.wants(Check::Isomonodromy) {
        let gl = ctx.generator_loops(&system)?;
        let th = ctx.threshold(Check::Isomonodromy);
        let rep = verify_isomonodromy(&state, &flow.state, &gl, th)?;
        ctx.put("isomonodromy_differences", json!(rep.differences));
        ctx.checks.push(CheckResult::below(Check::Isomonodromy, rep.max_difference, th));
    }
    Ok(())
}

/// `Σ_{λ<μ} tr(Q_λQ_μ)·Δ ln(t_λ − t_μ)` along the polyline with frozen residues.
fn polyline_closed_form(state: &SchlesingerState<f64>, path: &TPath<f64>) -> Result<Cplx, CliError> {
    let mut acc = Cplx::new(0.0, 0.0);
    for w in path.vertices().windows(2) {
        let s = SchlesingerState { t: w[0].clone(), ..state.clone() };
        acc += tau_closed_form(&s, &w[1])?;
    }
    Ok(acc)
}

fn run_tau(ctx: &mut Ctx) -> Result<(), CliError> {
    let system = ctx.system()?;
    let path = ctx.t_path(&system)?;
    let state = SchlesingerState::from_system(&system);
    if ctx.wants(Check::Closedness) && !path.is_closed() {
        return Err(CliError::Schema("closedness needs a closed t_path".into()));
    }
    let acc = tau_log_integrate(&state, &path, ctx.tol)?;
    ctx.put("delta_log_tau", cx(acc.delta_log_tau));
    ctx.put("error_estimate", json!(acc.error_estimate));
    ctx.put("end", state_json(&acc.end));
    ctx.traces.insert("tau_trace".into(), tau_table(acc.trace.iter().copied()));
    if ctx.wants(Check::TauClosedForm) {
        let cf = polyline_closed_form(&state, &path)?;
        ctx.put("closed_form", cx(cf));
        ctx.checks.push(
            CheckResult::below(Check::TauClosedForm, (acc.delta_log_tau - cf).norm(), ctx.threshold(Check::TauClosedForm))
                .with_note("closed form holds for constant residues"),
        );
    }
    if ctx.wants(Check::Closedness) {
        let rep = verify_closedness(&state, &path, ctx.tol)?;
        ctx.put("loop_integral", cx(rep.loop_integral));
        ctx.put("mixed_partial_residual", json!(rep.mixed_partial_residual));
        ctx.checks.push(CheckResult::below(Check::Closedness, rep.loop_integral.norm(), ctx.threshold(Check::Closedness)));
    }
    Ok(())
}

fn run_isoprincipal(ctx: &mut Ctx) -> Result<(), CliError> {
    let system = ctx.system()?;
    let path = ctx.t_path(&system)?;
    let state = SchlesingerState::from_system(&system);
    let flow = integrate_flow(&state, &path, ctx.tol)?;
    let x0 = ctx.basepoint(&system);
    let clearance = ctx.clearance(&system);
    ctx.put("basepoint", cx(x0));
    ctx.put("end", state_json(&flow.state));
    let th = ctx.threshold(Check::Isoprincipal);
    let rep = verify_isoprincipal_narrow(&state, &flow.state, x0, clearance, th)?;
    ctx.put("exponents_before", Value::Array(rep.before.iter().map(mat).collect()));
    ctx.put("exponents_after", Value::Array(rep.after.iter().map(mat).collect()));
    ctx.put("differences", json!(rep.differences));
    if ctx.wants(Check::Isoprincipal) {
        ctx.checks.push(CheckResult::below(Check::Isoprincipal, rep.max_difference, th));
    }
    if ctx.wants(Check::NegativeControl) {
        let off = perturb_off_flow(&flow.state, 0.1, ctx.seed);
        let th = ctx.threshold(Check::NegativeControl);
        let bad = verify_isoprincipal_narrow(&state, &off, x0, clearance, th)?;
        ctx.put("negative_control_differences", json!(bad.differences));
        ctx.checks.push(
            CheckResult::above(Check::NegativeControl, bad.max_difference, th)
                .with_note("off-flow perturbation must break the exponents"),
        );
    }
    Ok(())
}

fn family_json(f: &RationalFamily<f64>) -> Value {
    json!({
        "poles": f.poles().iter().map(|z| cx(*z)).collect::<Vec<_>>(),
        "residues": f.residues.iter().map(mat).collect::<Vec<_>>(),
        "ranks": f.ranks,
        "spectra_in_unit_set": f.spectra_in_unit_set,
        "generic": f.generic,
        "zero_sum": f.zero_sum,
        "residue_sum_norm": f.residue_sum.norm_fro(),
        "log_derivative_residual": f.log_derivative_residual,
        "system": f.system.as_ref().map(|s| serde_json::to_value(SystemDoc::from_system(s)).expect("serializes")),
    })
}

fn run_rational(ctx: &mut Ctx) -> Result<(), CliError> {
    let fam = ctx.doc.family.as_ref().expect("validated");
    let family = assemble_family(fam.factors()?, fam.left()?)?;
    ctx.put("family", family_json(&family));
    if ctx.wants(Check::Generic) {
        let r = if family.generic { 0.0 } else { 1.0 };
        ctx.checks.push(
            CheckResult::below(Check::Generic, r, ctx.threshold(Check::Generic))
                .with_note("residual 0 when every residue is rank one with spectrum in {0, 1} or {0, -1}"),
        );
    }
    if ctx.wants(Check::ZeroSum) {
        let r = family.residue_sum.norm_fro();
        ctx.checks.push(CheckResult::below(Check::ZeroSum, r, ctx.threshold(Check::ZeroSum)));
    }
    if ctx.wants(Check::Factorization) {
        let n = family.factors.len();
        let facs = (0..n).into_par_iter().map(|j| factor_at_pole(&family, j)).collect::<Result<Vec<_>, _>>()?;
        let worst = facs.iter().map(|f| f.residue_mismatch.max(f.negative_coefficients)).fold(0.0, f64::max);
        ctx.put(
            "factorizations",
            Value::Array(
                facs.iter()
                    .map(|f| {
                        json!({
                            "pole": f.pole,
                            "z_hat": mat(&f.z),
                            "det_h": cx(f.det_h),
                            "negative_coefficients": f.negative_coefficients,
                            "residue_mismatch": f.residue_mismatch,
                        })
                    })
                    .collect(),
            ),
        );
        ctx.checks.push(CheckResult::below(Check::Factorization, worst, ctx.threshold(Check::Factorization)));
    }
    if ctx.wants(Check::TrivialMonodromy) {
        let th = ctx.threshold(Check::TrivialMonodromy);
        let rep = verify_trivial_monodromy(&family, th)?;
        ctx.put("monodromy_deviations", json!(rep.deviations));
        let mut c = CheckResult::below(Check::TrivialMonodromy, rep.max_deviation, th);
        if family.system.is_none() {
            c = c.with_note("family has no Fuchsian system");
            c.passed = false;
        }
        ctx.checks.push(c);
    }
    Ok(())
}
