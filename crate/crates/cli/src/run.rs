//! Mode dispatch and report assembly.

use anyhow::{anyhow, bail, Context};
use serde::Serialize;
use serde_json::{json, Map, Value};

use plap_core::bvp::{embed_state, residual_sup, BvpProblem, BOUNDARY_CONVENTION};
use plap_core::certifier::{
    certify, periodicity_check, ps_lower_bound_check, rabinowitz_check, smallness_check,
    Certificate, SampleBox,
};
use plap_core::homoclinic::{j_home, translate, HomoclinicProblem, GRADIENT_CONVENTION};
use plap_core::lattice::{weighted_q_norm, LatticeFunction};
use plap_core::nonlinearity::invariant_warnings;
use plap_core::solvers::{distinctness_report, find_three, SearchOutcome, Status};
use plap_core::verify;

use crate::config::{load_config, Mode, RunConfig};
use crate::report::SCHEMA_VERSION;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

/// Sup-norm gap below which two critical points count as the same.
pub const DISTINCT_GAP: f64 = 1e-4;

/// Residual bound a reported critical point must meet.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Number of mountain-pass iterates checked against the coercivity inequality.
const PS_ITERATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Success,
    Partial,
}

impl Outcome {
    fn and(self, ok: bool) -> Self {
        if ok {
            self
        } else {
            Outcome::Partial
        }
    }
}

impl From<Status> for Outcome {
    fn from(s: Status) -> Self {
        match s {
            Status::Success => Outcome::Success,
            Status::Partial => Outcome::Partial,
        }
    }
}

/// The report document and the process exit code that goes with it.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Value,
    pub exit_code: i32,
}

#[derive(Default)]
struct Body {
    fields: Map<String, Value>,
    warnings: Vec<String>,
    discrepancies: Vec<Value>,
}

impl Body {
    fn set(&mut self, key: &str, v: impl Serialize) -> anyhow::Result<()> {
        self.fields.insert(key.into(), serde_json::to_value(v)?);
        Ok(())
    }
}

/// Runs `mode`. The returned report is always populated, errors included.
pub fn run(mode: Mode, config_text: Option<&str>, seed: Option<u64>) -> RunOutput {
    let mut body = Body::default();
    let mut echo = Value::Null;
    let result = prepare(mode, config_text, seed).and_then(|cfg| {
        echo = serde_json::to_value(&cfg)?;
        dispatch(mode, &cfg, &mut body)
    });
    let (status, error, exit_code) = match result {
        Ok(Outcome::Success) => ("success", Value::Null, EXIT_SUCCESS),
        Ok(Outcome::Partial) => ("partial", Value::Null, EXIT_PARTIAL),
        Err(e) => ("error", Value::String(format!("{e:#}")), EXIT_ERROR),
    };
    let effective_seed = echo
        .pointer("/solver/seed")
        .cloned()
        .unwrap_or_else(|| json!(seed.unwrap_or(0)));
    let mut report = body.fields;
    report.insert("schema_version".into(), json!(SCHEMA_VERSION));
    report.insert(
        "tool".into(),
        json!({"name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION")}),
    );
    report.insert("mode".into(), json!(mode.to_string()));
    report.insert("seed".into(), effective_seed);
    report.insert("config".into(), echo);
    report.insert("status".into(), json!(status));
    report.insert("error".into(), error);
    report.insert("warnings".into(), json!(body.warnings));
    report.insert("discrepancies".into(), Value::Array(body.discrepancies));
    report.insert(
        "conventions".into(),
        json!({
            "bvp_boundary": BOUNDARY_CONVENTION,
            "homoclinic_gradient": GRADIENT_CONVENTION,
            "float_format": "17 significant digits; non-finite values are null",
            "lattice_function": "values[i] is u(window_lo + i); u vanishes outside the window",
        }),
    );
    RunOutput {
        report: Value::Object(report),
        exit_code,
    }
}

fn prepare(mode: Mode, config_text: Option<&str>, seed: Option<u64>) -> anyhow::Result<RunConfig> {
    let mut cfg = match (mode, config_text) {
        (Mode::ReproduceExample2 | Mode::ReproduceExample1, text) => {
            let mut builtin = if mode == Mode::ReproduceExample2 {
                RunConfig::example2()
            } else {
                RunConfig::example1()
            };
            // A supplied config may only tune the solver.
            if let Some(text) = text {
                let user = load_config(text)?;
                if user.problem.is_some()
                    || user.homoclinic.is_some()
                    || user.c.is_some()
                    || user.d.is_some()
                {
                    bail!("{mode} uses built-in problem data; only `solver` may be configured");
                }
                builtin.solver = user.solver;
            }
            builtin
        }
        (_, Some(text)) => load_config(text)?,
        (m, None) if m.needs_config() => bail!("mode {m} requires --config"),
        (_, None) => RunConfig::empty(),
    };
    if let Some(s) = seed {
        cfg.solver.seed = s;
    }
    cfg.mode = Some(mode);
    cfg.validate(mode)?;
    Ok(cfg)
}

fn dispatch(mode: Mode, cfg: &RunConfig, body: &mut Body) -> anyhow::Result<Outcome> {
    match mode {
        Mode::Certify => run_certify(cfg, body),
        Mode::SolveBvp => run_solve_bvp(cfg, body),
        Mode::SolveHomoclinic | Mode::ReproduceExample1 => run_homoclinic(cfg, body),
        Mode::ReproduceExample2 => run_example2(cfg, body),
        Mode::Verify => run_verify(cfg, body),
    }
}

fn bvp(cfg: &RunConfig) -> anyhow::Result<BvpProblem> {
    let spec = cfg
        .problem
        .as_ref()
        .ok_or_else(|| anyhow!("missing field `problem`"))?;
    spec.build(cfg.lambda.unwrap_or(0.0))
}

fn certificate(cfg: &RunConfig, p: &BvpProblem, body: &mut Body) -> anyhow::Result<Certificate> {
    let (c, d) = (cfg.c.expect("validated"), cfg.d.expect("validated"));
    let cert = certify(p, c, d, cfg.growth_witness, cfg.sample_box).context("certify")?;
    if cfg.growth_witness.is_none() {
        body.warnings
            .push("no growth_witness given: (d2) is reported as not verified".into());
    }
    if !cert.certified() {
        body.warnings
            .push("certificate incomplete: see d1_holds, d2_holds, interval_nonempty".into());
    }
    body.set("certificate", &cert)?;
    Ok(cert)
}

fn bvp_warnings(p: &BvpProblem, body: &mut Body) {
    body.warnings.extend(invariant_warnings(
        p.nonlinearity().as_ref(),
        1..=p.t_len() as i64,
    ));
}

fn run_certify(cfg: &RunConfig, body: &mut Body) -> anyhow::Result<Outcome> {
    let p = bvp(cfg)?;
    bvp_warnings(&p, body);
    let cert = certificate(cfg, &p, body)?;
    Ok(Outcome::Success.and(cert.certified()))
}

/// Serializes a search outcome with independently re-evaluated residuals.
fn record_search(p: &BvpProblem, out: &SearchOutcome, body: &mut Body) -> anyhow::Result<bool> {
    let mut points = Vec::with_capacity(out.points.len());
    let mut all_ok = true;
    for cp in &out.points {
        let free: Vec<f64> = (1..=p.t_len() as i64)
            .map(|k| cp.u.get_or_zero(k))
            .collect();
        let check = residual_sup(&embed_state(&free, p)?, p);
        all_ok &= check <= RESIDUAL_TOL;
        let mut v = serde_json::to_value(cp)?;
        v["residual_recheck"] = json!(check);
        points.push(v);
    }
    let lattices: Vec<_> = out.points.iter().map(|cp| cp.u.clone()).collect();
    let dist = distinctness_report(&lattices, DISTINCT_GAP);
    all_ok &= dist.flagged.is_empty();
    body.set("critical_points", points)?;
    body.set("distinctness", &dist)?;
    body.set(
        "search",
        json!({"starts": out.starts, "converged_runs": out.converged_runs, "mountain_pass_runs": out.mountain_pass_runs}),
    )?;
    body.warnings.extend(out.warnings.iter().cloned());
    Ok(all_ok)
}

fn run_solve_bvp(cfg: &RunConfig, body: &mut Body) -> anyhow::Result<Outcome> {
    let p = bvp(cfg)?;
    bvp_warnings(&p, body);
    let lambda = cfg.lambda.expect("validated");
    let interval = match (cfg.c, cfg.d) {
        (Some(_), Some(_)) => {
            let cert = certificate(cfg, &p, body)?;
            cert.interval_nonempty
                .then_some((cert.lambda_lo, cert.lambda_hi))
        }
        _ => None,
    };
    let out = find_three(&p, lambda, cfg.d, interval, &cfg.solver)?;
    let ok = record_search(&p, &out, body)?;
    Ok(Outcome::from(out.status).and(ok))
}

/// Published Example 2 values, each compared with the computed one.
fn example2_reference(cert: &Certificate) -> Value {
    let e = 1f64.exp();
    let e14 = 14f64.exp();
    let rel = |got: f64, want: f64| ((got - want) / want).abs();
    let rows = [
        ("rho_q", cert.rho_q, 18225.0 / 36241.0),
        ("theta_c", cert.theta_c, 204.0 * e),
        ("lambda_d", cert.lambda_d, 51.0 / 686.0 * (e14 - e)),
        ("d1_margin", cert.d1.rhs, 616097.0 / 366735600.0 * (e14 - e)),
        ("lambda_hi", cert.lambda_hi, 36241.0 / (11153700.0 * e)),
        ("lambda_lo", cert.lambda_lo, 60368.0 / (153.0 * (e14 - e))),
    ];
    let mut m = Map::new();
    for (name, got, want) in rows {
        m.insert(
            name.into(),
            json!({"computed": got, "expected": want, "relative_error": rel(got, want)}),
        );
    }
    m.insert(
        "rho_q_exact".into(),
        json!({"computed": cert.rho_q_exact, "expected": "18225/36241"}),
    );
    Value::Object(m)
}

fn run_example2(cfg: &RunConfig, body: &mut Body) -> anyhow::Result<Outcome> {
    let p = bvp(cfg)?;
    bvp_warnings(&p, body);
    let cert = certificate(cfg, &p, body)?;
    body.set("reference", example2_reference(&cert))?;

    let e = 1f64.exp();
    let printed = 19208.0 / (51.0 * (14f64.exp() - e));
    // The printed endpoint corresponds to norm constant 84 in place of 4 + 2a + T V1 = 88.
    body.discrepancies.push(json!({
        "id": "example2-lambda-lo",
        "description": "lower lambda endpoint: the interval formula gives a different value from the printed one",
        "computed": cert.lambda_lo,
        "computed_exact": "60368/(153(e^14 - e))",
        "printed": printed,
        "printed_exact": "19208/(51(e^14 - e))",
        "ratio_printed_to_computed": printed / cert.lambda_lo,
        "used": "computed",
    }));

    let lambda = cfg.lambda.expect("built-in");
    let interval = cert
        .interval_nonempty
        .then_some((cert.lambda_lo, cert.lambda_hi));
    let out = find_three(&p, lambda, cfg.d, interval, &cfg.solver)?;
    let ok = record_search(&p, &out, body)?;
    Ok(Outcome::from(out.status).and(ok && cert.certified()))
}

fn run_homoclinic(cfg: &RunConfig, body: &mut Body) -> anyhow::Result<Outcome> {
    let spec = cfg.homoclinic.as_ref().expect("validated");
    let p = spec.build()?;
    let hyp = hypotheses(&p, cfg.solver.seed);
    let hyp_ok = hyp.iter().all(|(_, h)| *h);
    body.set(
        "hypotheses",
        hyp.iter().map(|(v, _)| v.clone()).collect::<Vec<_>>(),
    )?;
    if !hyp_ok {
        if spec.waive_checks {
            body.warnings.push(
                "sampled hypothesis checks failed; continuing because waive_checks is set".into(),
            );
        } else {
            bail!("sampled hypothesis checks failed (set homoclinic.waive_checks to proceed)");
        }
    }
    body.discrepancies.push(json!({
        "id": "homoclinic-gradient-exponent",
        "description": "the printed gradient uses phi_{p2} in the first-order term; the equation uses phi_{p1}",
        "used": "phi_{p1}",
    }));

    let out = plap_core::homoclinic::solve_homoclinic(
        &p,
        &spec.n_schedule,
        &cfg.solver,
        &spec.options(),
    )?;
    let reports: Vec<_> = out.levels.iter().map(|l| &l.report).collect();
    body.set("truncation_reports", &reports)?;
    body.set("successive_differences", &out.successive_differences)?;
    let points: Vec<_> = out
        .levels
        .iter()
        .map(|l| json!({"N": l.report.n, "point": l.point}))
        .collect();
    body.set("critical_points", points)?;
    for l in &out.levels {
        if let Some(f) = &l.report.failure {
            body.warnings.push(format!("N = {}: {f}", l.report.n));
        }
    }

    let mut ok = true;
    if let Some(last) = out.levels.iter().rev().find(|l| l.point.is_some()) {
        let checks = solution_checks(&p, last)?;
        ok &= checks["translation"]["holds"].as_bool().unwrap_or(false);
        ok &= checks["coercivity"]["holds"].as_bool().unwrap_or(false);
        body.set("solution_checks", checks)?;
    }
    if out.successive_differences.windows(2).any(|w| w[1] > w[0]) {
        body.warnings
            .push("successive differences between truncation levels do not decrease".into());
    }
    Ok(Outcome::from(out.status).and(ok))
}

fn hypotheses(p: &HomoclinicProblem, seed: u64) -> Vec<(Value, bool)> {
    let nl = p.nonlinearity().as_ref();
    let period = p.period();
    let ks = 0..=(period as i64 - 1);
    let mu = p.mu().value();
    let s = p.s_threshold();
    let raw = [
        (
            "rabinowitz",
            rabinowitz_check(nl, mu, s, SampleBox::around(10.0), ks.clone()),
        ),
        ("smallness", smallness_check(nl, p.q().value(), ks)),
        ("periodicity", {
            let v = p.v_table().to_vec();
            periodicity_check(
                nl,
                move |k| v[k.rem_euclid(v.len() as i64) as usize],
                period,
                1000,
                seed,
            )
        }),
    ];
    raw.into_iter()
        .map(|(name, c)| (json!({"name": name, "check": c}), c.holds))
        .collect()
}

/// Period-translation invariance and the coercivity inequality along the solver iterates.
fn solution_checks(
    p: &HomoclinicProblem,
    level: &plap_core::homoclinic::HomoclinicLevel,
) -> anyhow::Result<Value> {
    let cp = level.point.as_ref().expect("checked by caller");
    let n = level.report.n;
    let shift = p.period() as i64;
    // zero-extend by one period so the shift loses nothing
    let (lo, hi) = p.window(n + shift as usize);
    let wide = LatticeFunction::from_fn(lo, hi, |k| cp.u.get_or_zero(k))?;
    let moved = translate(&wide, shift, p)?;
    let w = |k: i64| p.v(k) / p.q().value();
    let (n0, n1) = (
        weighted_q_norm(&wide, p.q(), w)?,
        weighted_q_norm(&moved, p.q(), w)?,
    );
    let (j0, j1) = (j_home(&wide, p)?, j_home(&moved, p)?);
    let dj = (j0 - j1).abs();
    let dn = (n0 - n1).abs();

    let t = p.truncate(n);
    let mu = p.mu().value();
    let mut worst_slack = f64::INFINITY;
    let mut checked = 0usize;
    let mut holds = true;
    for u in level.trace.iter().take(PS_ITERATES) {
        let x = t.free_of(u)?;
        let c = ps_lower_bound_check(&t, &x, mu);
        holds &= c.holds;
        worst_slack = worst_slack.min(c.lhs - c.rhs);
        checked += 1;
    }
    Ok(json!({
        "translation": {
            "shift": shift,
            "energy_difference": dj,
            "norm_difference": dn,
            "holds": dj <= 1e-10 && dn <= 1e-10,
        },
        "coercivity": {
            "mu": mu,
            "iterates_checked": checked,
            "min_slack": worst_slack,
            "holds": holds && checked > 0,
        },
    }))
}

fn run_verify(cfg: &RunConfig, body: &mut Body) -> anyhow::Result<Outcome> {
    let rep = verify::run_all(cfg.solver.seed);
    let ok = rep.all_passed();
    body.set("verify", &rep)?;
    if ok {
        Ok(Outcome::Success)
    } else {
        bail!("property suite reported failures")
    }
}
