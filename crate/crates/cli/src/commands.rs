use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use restraint_core::lyapunov::{
    build_decrease_modulus, check_supersolution, verify_mrf_band, BandReport, DecreaseModulus, PetrovReport,
    SupersolutionReport,
};
use restraint_core::oracle::examples::spiral_mrf;
use restraint_core::oracle::{
    compare_bound, hjb_value_iteration, region_maxima, spiral_oracle, BoundReport, GridValueTable,
};
use restraint_core::synthesis::{
    audit_envelopes, audit_synthesis, build_sigma_envelopes, check_kl_axioms, synthesize, verify_kl, EnvelopeParams,
    KlAudit, KlAxioms, KlBound, SandwichAudit, Synthesis, SynthesisAudit,
};
use restraint_core::{Error, TrajectoryStatus};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::problem::{Problem, Resolved};

pub const SCHEMA_VERSION: u32 = 1;

/// Exit status of a finished command (errors map separately).
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
}

pub struct RunContext {
    pub config: RunConfig,
    pub resolved: Resolved,
    pub out: PathBuf,
    pub force: bool,
}

fn header(ctx: &RunContext, command: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("command".into(), json!(command));
    m.insert("seed".into(), json!(ctx.config.seed));
    m.insert(
        "config".into(),
        serde_json::to_value(&ctx.config).expect("config serializes"),
    );
    m
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct Certificate {
    band: BandReport,
    modulus: Option<DecreaseModulus>,
    supersolution: Option<SupersolutionReport>,
    petrov: Option<PetrovReport>,
    granted: bool,
}

fn certify(ctx: &RunContext, problem: &Problem) -> Result<Certificate> {
    let r = &ctx.resolved;
    let grid = r.verify_grid()?;
    let band = verify_mrf_band(&problem.system, &problem.target, &problem.mrf, &grid, &r.band)?;
    let (modulus, supersolution) = if band.certified() {
        let m = build_decrease_modulus(&band.m_hat_pairs(), &r.modulus)?;
        let s = check_supersolution(&problem.system, &problem.target, &problem.mrf, &m, &grid)?;
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    let granted = band.certified()
        && supersolution.as_ref().is_some_and(|s| s.passed())
        && problem.petrov.as_ref().is_none_or(|p| p.passed());
    Ok(Certificate {
        band,
        modulus,
        supersolution,
        petrov: problem.petrov.clone(),
        granted,
    })
}

pub fn verify(ctx: &RunContext) -> Result<Outcome> {
    let problem = Problem::build(&ctx.config, &ctx.resolved)?;
    let cert = certify(ctx, &problem)?;
    let mut report = header(ctx, "verify");
    report.insert("certificate".into(), serde_json::to_value(&cert)?);
    write_json(&ctx.out.join("verify.json"), &Value::Object(report))?;
    Ok(Outcome {
        passed: cert.granted,
        summary: format!(
            "verify {}: verdict {:?}, worst H {:.3e} over {} band points, certificate {}",
            ctx.resolved.key,
            cert.band.verdict,
            cert.band.worst_h,
            cert.band.points_in_band,
            if cert.granted { "granted" } else { "refused" }
        ),
    })
}

#[derive(Serialize)]
struct StartReport {
    start: Vec<f64>,
    status: Option<TrajectoryStatus>,
    error: Option<String>,
    /// State where the construction stopped, for failed runs.
    state: Option<Vec<f64>>,
    levels_completed: usize,
    cost: f64,
    cost_bound: f64,
    final_level: f64,
    final_distance: f64,
    trajectory_file: Option<String>,
    audit: Option<SynthesisAudit>,
    kl: Option<KlAudit>,
    passed: bool,
}

fn write_trajectory(path: &Path, out: &Synthesis, problem: &Problem) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let n = out.start.len();
    let mut head = vec!["t".to_string(), "s".to_string()];
    head.extend((1..=n).map(|i| format!("x{i}")));
    head.extend(["control_index", "U", "d", "cost"].map(String::from));
    w.write_record(&head)?;
    for node in &out.trajectory.nodes {
        let mut row = vec![format!("{:e}", node.t), format!("{:e}", node.s)];
        row.extend(node.x.iter().map(|v| format!("{v:e}")));
        row.push(node.control.map_or(String::new(), |a| a.to_string()));
        row.push(format!("{:e}", problem.mrf.value(&node.x)));
        row.push(format!("{:e}", problem.target.distance(&node.x)));
        row.push(format!("{:e}", node.cost));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn stop_state(err: &Error) -> Option<Vec<f64>> {
    match err {
        Error::FeedbackGap { x, .. } | Error::StepCollapse { x, .. } | Error::OutOfBand { x, .. } => Some(x.clone()),
        _ => None,
    }
}

pub fn synthesize_cmd(ctx: &RunContext) -> Result<Outcome> {
    let problem = Problem::build(&ctx.config, &ctx.resolved)?;
    let cert = certify(ctx, &problem)?;
    if !cert.granted && !ctx.force {
        bail!(CheckFailure(format!(
            "no certificate for {} (verdict {:?}); rerun with --force to synthesize anyway",
            ctx.resolved.key, cert.band.verdict
        )));
    }
    let modulus = match &cert.modulus {
        Some(m) => m.clone(),
        None => build_decrease_modulus(&cert.band.m_hat_pairs(), &ctx.resolved.modulus)?,
    };
    let sigma = cert.band.sigma;
    let cfg = &ctx.config.synthesis;
    let grid = ctx.resolved.verify_grid()?;
    let lipschitz = ctx
        .config
        .kl
        .lipschitz
        .unwrap_or_else(|| cert.band.constants.iter().map(|c| c.lipschitz).fold(0.0, f64::max));
    let env_params = EnvelopeParams {
        levels: ctx.config.kl.levels,
        min_ratio: ctx.config.kl.min_ratio,
        lipschitz: Some(lipschitz),
        ..Default::default()
    };
    let env = build_sigma_envelopes(&problem.mrf, &problem.target, &grid, sigma, &env_params)?;
    let sandwich: SandwichAudit = audit_envelopes(
        &env,
        &problem.mrf,
        &problem.target,
        &ctx.resolved.verify_lower,
        &ctx.resolved.verify_upper,
        sigma,
        ctx.config.kl.sandwich_samples,
        ctx.config.seed,
    );
    let kl = KlBound::new(&env, &modulus, cfg.epsilon)?;

    let mut starts = Vec::new();
    let mut r_max: f64 = 0.0;
    let mut numerical: Option<Error> = None;
    for (i, x) in ctx.resolved.starts.iter().enumerate() {
        r_max = r_max.max(problem.target.distance(x));
        match synthesize(&problem.system, &problem.target, &problem.mrf, &modulus, x, sigma, cfg) {
            Ok(out) => {
                let file = format!("trajectory_{i}.csv");
                write_trajectory(&ctx.out.join(&file), &out, &problem)?;
                let audit = audit_synthesis(&out, &problem.system, &problem.mrf, &modulus, cfg)?;
                let kl_audit = verify_kl(&out.trajectory, &kl, &problem.target, x, ctx.config.kl.tol);
                starts.push(StartReport {
                    start: x.clone(),
                    status: Some(out.status()),
                    error: None,
                    state: None,
                    levels_completed: out.levels_completed(),
                    cost: out.cost,
                    cost_bound: out.cost_bound,
                    final_level: out.final_level,
                    final_distance: out.final_distance,
                    trajectory_file: Some(file),
                    passed: audit.passed() && kl_audit.passed(),
                    audit: Some(audit),
                    kl: Some(kl_audit),
                });
            }
            Err(e) => {
                let (state, message) = (stop_state(&e), e.to_string());
                if matches!(e, Error::StepCollapse { .. }) && numerical.is_none() {
                    numerical = Some(e);
                }
                starts.push(StartReport {
                    start: x.clone(),
                    status: None,
                    error: Some(message),
                    state,
                    levels_completed: 0,
                    cost: f64::NAN,
                    cost_bound: f64::NAN,
                    final_level: f64::NAN,
                    final_distance: f64::NAN,
                    trajectory_file: None,
                    audit: None,
                    kl: None,
                    passed: false,
                });
            }
        }
    }
    let axioms: KlAxioms = check_kl_axioms(&kl, r_max.max(1e-3), 10.0, 50, 50, 1e12);
    let passed = cert.granted && starts.iter().all(|s| s.passed) && axioms.holds() && sandwich.failures == 0;

    let mut report = header(ctx, "synthesize");
    report.insert("certificate_granted".into(), json!(cert.granted));
    report.insert("forced".into(), json!(ctx.force && !cert.granted));
    report.insert("sigma".into(), json!(sigma));
    report.insert("modulus".into(), serde_json::to_value(&modulus)?);
    report.insert("kl_axioms".into(), serde_json::to_value(&axioms)?);
    report.insert("envelope_audit".into(), serde_json::to_value(&sandwich)?);
    report.insert("runs".into(), serde_json::to_value(&starts)?);
    report.insert("passed".into(), json!(passed));
    write_json(&ctx.out.join("synthesis.json"), &Value::Object(report))?;

    let lines: Vec<String> = starts
        .iter()
        .map(|s| match &s.error {
            None => format!(
                "  x = {:?}: {:?}, cost {:.6} <= bound {:.6}, checks {}",
                s.start,
                s.status.unwrap(),
                s.cost,
                s.cost_bound,
                if s.passed { "pass" } else { "FAIL" }
            ),
            Some(e) => format!("  x = {:?}: error: {e}", s.start),
        })
        .collect();
    let summary = format!("synthesize {}:\n{}", ctx.resolved.key, lines.join("\n"));
    if let Some(e) = numerical {
        eprintln!("{summary}");
        return Err(e.into());
    }
    Ok(Outcome { passed, summary })
}

fn write_table(path: &Path, table: &GridValueTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut head: Vec<String> = (1..=table.grid.dim()).map(|i| format!("x{i}")).collect();
    head.extend(["value", "kind"].map(String::from));
    w.write_record(&head)?;
    for (flat, v) in table.values.iter().enumerate() {
        let mut row: Vec<String> = table.grid.point(flat).iter().map(|c| format!("{c:e}")).collect();
        row.push(format!("{v:e}"));
        row.push(format!("{:?}", table.kinds[flat]).to_lowercase());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn oracle(ctx: &RunContext) -> Result<Outcome> {
    let r = &ctx.resolved;
    let problem = Problem::build(&ctx.config, r)?;
    let p0 = ctx.config.example.p0_bar;
    if !(p0 > 0.0) {
        bail!(Error::Config("the oracle comparison needs p0_bar > 0".into()));
    }
    let mut report = header(ctx, "oracle");
    let table = if r.key == "spiral" {
        let collar = r.collar.unwrap_or(0.2);
        let k = ctx.config.example.k.unwrap_or(1.0);
        let o = spiral_oracle(k, r.oracle_spacing, collar, &ctx.config.hjb)?;
        report.insert(
            "collar".into(),
            json!({"width": o.collar, "continuation_value": o.collar_value}),
        );
        let ring = |z: &[f64]| (3.0..4.0).contains(&(z[0] * z[0] + z[1] * z[1]).sqrt());
        let (count, v_max, u0_max) = region_maxima(&o.table, &spiral_mrf(0.0, 1.0), 1.0, ring);
        report.insert(
            "ring_r".into(),
            json!({"nodes": count, "max_value": v_max, "max_u0": u0_max}),
        );
        o.table
    } else {
        hjb_value_iteration(&problem.system, &problem.target, &r.oracle_grid()?, &ctx.config.hjb)?
    };
    let cmp: BoundReport = compare_bound(&table, &problem.mrf, p0, r.oracle_tol);
    write_table(&ctx.out.join("values.csv"), &table)?;
    report.insert(
        "table".into(),
        json!({
            "file": "values.csv",
            "counts": table.grid.counts(),
            "h": table.h,
            "sweeps": table.sweeps,
            "last_change": table.changes.last(),
            "monotone": table.monotone,
            "free_nodes": table.free_count(),
        }),
    );
    report.insert("comparison".into(), serde_json::to_value(&cmp)?);
    report.insert("passed".into(), json!(cmp.passed()));
    write_json(&ctx.out.join("oracle.json"), &Value::Object(report))?;
    Ok(Outcome {
        passed: cmp.passed(),
        summary: format!(
            "oracle {}: {} sweeps, {} nodes checked, {} violations of V <= U / p0_bar, worst margin {:.3e}",
            r.key,
            table.sweeps,
            cmp.checked,
            cmp.violations.len(),
            cmp.worst_margin
        ),
    })
}

/// Summarizes the reports found in the output directory.
pub fn report(out: &Path) -> Result<Outcome> {
    let mut found = Vec::new();
    let mut passed = true;
    for (name, key) in [
        ("verify.json", "/certificate/granted"),
        ("synthesis.json", "/passed"),
        ("oracle.json", "/passed"),
    ] {
        let path = out.join(name);
        if !path.exists() {
            continue;
        }
        let v: Value =
            serde_json::from_str(&fs::read_to_string(&path)?).with_context(|| format!("parsing {}", path.display()))?;
        if v.get("schema_version") != Some(&json!(SCHEMA_VERSION)) {
            bail!(Error::Config(format!(
                "{} has an unsupported schema version",
                path.display()
            )));
        }
        let ok = v.pointer(key).and_then(Value::as_bool).unwrap_or(false);
        passed &= ok;
        found.push(json!({"report": name, "passed": ok, "seed": v["seed"]}));
    }
    if found.is_empty() {
        bail!(Error::Config(format!("no reports in {}", out.display())));
    }
    let summary = found
        .iter()
        .map(|f| {
            format!(
                "  {}: {}",
                f["report"].as_str().unwrap(),
                if f["passed"] == json!(true) { "pass" } else { "FAIL" }
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    write_json(
        &out.join("summary.json"),
        &json!({"schema_version": SCHEMA_VERSION, "command": "report", "reports": found, "passed": passed}),
    )?;
    Ok(Outcome {
        passed,
        summary: format!("report {}:\n{summary}", out.display()),
    })
}

/// Marker for failed checks that abort a command.
#[derive(Debug)]
pub struct CheckFailure(pub String);

impl std::fmt::Display for CheckFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailure {}
