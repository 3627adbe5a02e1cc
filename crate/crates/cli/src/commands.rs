use std::path::Path;

use riskeig_core::control::cw_certificate;
use riskeig_core::evaluate::{exact_growth, monte_carlo_growth, simulate_trajectory};
use riskeig_core::reducible::{dp_residuals, DpStatus, ReducibleError, ReducibleOptions};
use riskeig_core::spectral::row_decompose;
use riskeig_core::variational::{
    build_optimal_occupation, dual_feasibility, dv_objective_matrix, dv_optimum,
    occupation_objective, DualCertificate, VariationalError,
};
use riskeig_core::{
    classify, instance_support_union, oracle_growth, policy_matrix, solve_irreducible,
    solve_reducible, spectral_radius, ControlError, ControlledEigenSolution, GrowthReport,
    MdpInstance, Policy, SolveOptions, SpectralError,
};
use serde_json::{json, Value};

use crate::args::{Command, GlobalArgs};
use crate::io::{action_labels, load_policy, load_vector, policy_json};
use crate::report::{num, nums, rows, Outcome};

/// Tolerance for certificate and DP-equation checks in reports.
pub const CHECK_TOL: f64 = 1e-9;

pub fn run(cmd: &Command, g: &GlobalArgs, inst: &MdpInstance) -> Result<Outcome, String> {
    match cmd {
        Command::Validate { .. } => Ok(validate(inst)),
        Command::Classify { .. } => Ok(classify_cmd(inst)),
        Command::Solve {
            force_reducible,
            horizon,
            ..
        } => solve(inst, g, *force_reducible, *horizon),
        Command::Bounds { vector, .. } => bounds(inst, vector),
        Command::Dv { policy, .. } => dv(inst, policy.as_deref()),
        Command::Occupation { .. } => occupation(inst, g),
        Command::Oracle { .. } => oracle(inst, g),
        Command::Eval {
            policy,
            horizons,
            mc_samples,
            mc_steps,
            ..
        } => eval(inst, g, policy.as_deref(), horizons, *mc_samples, *mc_steps),
        Command::Simulate {
            policy,
            steps,
            start,
            ..
        } => simulate(inst, g, policy.as_deref(), *steps, *start),
    }
}

fn solve_options(g: &GlobalArgs) -> SolveOptions {
    SolveOptions {
        tol: g.tol,
        max_iter: g.max_iter,
    }
}

fn policy_param(path: Option<&Path>) -> Value {
    path.map_or(json!("uniform"), |p| json!(p.display().to_string()))
}

fn policy_or_uniform(inst: &MdpInstance, path: Option<&Path>) -> Result<Policy, String> {
    match path {
        Some(p) => load_policy(inst, p),
        None => Ok(Policy::uniform(inst)),
    }
}

fn validate(inst: &MdpInstance) -> Outcome {
    let available: Vec<Value> = (0..inst.n_states())
        .map(|i| action_labels(inst, &inst.available_actions(i)))
        .collect();
    Outcome::new(json!({
        "states": inst.state_labels(),
        "actions": inst.action_labels(),
        "n_states": inst.n_states(),
        "n_actions": inst.n_actions(),
        "available_actions": available,
        "deterministic_policies": inst.policy_count(),
        "uncontrolled": inst.is_uncontrolled(),
        "support_irreducible": instance_support_union(inst).irreducible,
    }))
}

fn classify_cmd(inst: &MdpInstance) -> Outcome {
    let cls = instance_support_union(inst);
    let classes: Vec<Value> = cls
        .scc_list
        .iter()
        .enumerate()
        .map(|(k, members)| {
            json!({
                "states": members,
                "trivial": cls.is_trivial(k),
                "reaches": cls.reachable_sccs(k),
            })
        })
        .collect();
    Outcome::new(json!({
        "irreducible": cls.irreducible,
        "classes": classes,
        "component_of": cls.component_of,
        "condensation_edges": cls.condensation_edges,
    }))
}

fn irreducible_result(inst: &MdpInstance, sol: &ControlledEigenSolution) -> Value {
    json!({
        "mode": "irreducible",
        "rho": num(sol.rho),
        "log_rho": num(sol.log_rho),
        "psi": nums(&sol.psi),
        "policy": policy_json(inst, &sol.policy),
        "residual": num(sol.residual),
        "lower": num(sol.lower),
        "upper": num(sol.upper),
        "iterations": sol.iterations,
    })
}

fn growth_json(inst: &MdpInstance, growth: &GrowthReport) -> Value {
    let policies: Vec<Value> = growth
        .best_policy
        .iter()
        .map(|p| policy_json(inst, p))
        .collect();
    json!({
        "lambda_star": nums(&growth.lambda_star),
        "global": num(growth.global),
        "method": growth.method,
        "converged": growth.converged,
        "steps": growth.steps,
        "best_policy": policies,
    })
}

fn solve(
    inst: &MdpInstance,
    g: &GlobalArgs,
    force_reducible: bool,
    horizon: usize,
) -> Result<Outcome, String> {
    let mut warnings = Vec::new();
    if !force_reducible && instance_support_union(inst).irreducible {
        match solve_irreducible(inst, solve_options(g)) {
            Ok(sol) => return Ok(Outcome::new(irreducible_result(inst, &sol))),
            Err(e @ ControlError::ReducibleUnderGreedy { .. }) => {
                warnings.push(format!("{e}; switched to the reducible solver"));
            }
            Err(
                e @ ControlError::MaxIterExceeded {
                    lower,
                    upper,
                    iterations,
                },
            ) => {
                let mut out = Outcome::new(json!({
                    "mode": "irreducible",
                    "lower": num(lower),
                    "upper": num(upper),
                    "log_rho_bracket": [num(lower.ln()), num(upper.ln())],
                    "iterations": iterations,
                }));
                out.warnings.push(e.to_string());
                out.converged = false;
                return Ok(out);
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    let opts = ReducibleOptions {
        tol: g.tol,
        horizon,
        cap: g.cap,
    };
    let sol = match solve_reducible(inst, opts) {
        Ok(sol) => sol,
        Err(e @ ReducibleError::PolicyIterationStalled(_)) => {
            let mut out = Outcome::new(json!({ "mode": "reducible" }));
            out.warnings.push(e.to_string());
            out.converged = false;
            return Ok(out.param("horizon", json!(horizon)));
        }
        Err(e) => return Err(e.to_string()),
    };
    warnings.extend(sol.warnings.iter().cloned());
    let residuals = dp_residuals(inst, &sol.dp, CHECK_TOL);
    let status: Vec<DpStatus> = residuals.states.iter().map(|s| s.status).collect();
    let argmax: Vec<Value> = sol
        .dp
        .argmax_sets
        .iter()
        .map(|d| action_labels(inst, d))
        .collect();
    let mut out = Outcome::new(json!({
        "mode": "reducible",
        "approximate": sol.approximate,
        "growth": growth_json(inst, &sol.growth),
        "dp": {
            "lambda": nums(&sol.dp.lambda),
            "big_lambda": nums(&sol.dp.big_lambda),
            "phi": nums(&sol.dp.phi),
            "v": nums(&sol.dp.v),
            "argmax_sets": argmax,
            "status": status,
            "clean": residuals.clean,
        },
    }));
    out.warnings = warnings;
    out.converged = sol.growth.converged;
    Ok(out
        .param("horizon", json!(horizon))
        .param("check_tol", num(CHECK_TOL)))
}

fn bounds(inst: &MdpInstance, vector: &Path) -> Result<Outcome, String> {
    let f = load_vector(vector)?;
    let cw = cw_certificate(inst, &f).map_err(|e| e.to_string())?;
    Ok(Outcome::new(json!({
        "test_vector": nums(&cw.test_vector),
        "lower": num(cw.lower),
        "upper": num(cw.upper),
        "gap": num(cw.gap()),
        "log_lower": num(cw.lower.ln()),
        "log_upper": num(cw.upper.ln()),
    })))
}

fn not_converged(e: &VariationalError) -> bool {
    matches!(
        e,
        VariationalError::Spectral(SpectralError::MaxIterExceeded { .. })
    )
}

fn dv(inst: &MdpInstance, path: Option<&Path>) -> Result<Outcome, String> {
    let policy = policy_or_uniform(inst, path)?;
    let q = policy_matrix(inst, &policy);
    if !classify(&q).irreducible {
        return Err("the policy matrix is not irreducible".into());
    }
    let decomp = row_decompose(&q).map_err(|e| e.to_string())?;
    let cand = match dv_optimum(&q) {
        Ok(c) => c,
        Err(e) if not_converged(&e) => {
            let mut out = Outcome::new(Value::Null);
            out.warnings.push(e.to_string());
            out.converged = false;
            return Ok(out);
        }
        Err(e) => return Err(e.to_string()),
    };
    let objective = dv_objective_matrix(&decomp, &cand).map_err(|e| e.to_string())?;
    let log_lambda = spectral_radius(&q).ln();
    Ok(Outcome::new(json!({
        "pi": nums(&cand.pi),
        "p_tilde": rows(&cand.p_tilde.to_rows()),
        "objective": num(objective),
        "log_lambda": num(log_lambda),
        "gap": num(log_lambda - objective),
        "stationarity_residual": num(cand.stationarity_residual()),
        "policy": policy_json(inst, &policy),
    }))
    .param("policy", policy_param(path)))
}

fn occupation(inst: &MdpInstance, g: &GlobalArgs) -> Result<Outcome, String> {
    if !instance_support_union(inst).irreducible {
        return Err("occupation requires an irreducible support graph".into());
    }
    let sol = match solve_irreducible(inst, solve_options(g)) {
        Ok(sol) => sol,
        Err(e @ ControlError::MaxIterExceeded { .. }) => {
            let mut out = Outcome::new(Value::Null);
            out.warnings.push(e.to_string());
            out.converged = false;
            return Ok(out);
        }
        Err(e) => return Err(e.to_string()),
    };
    let eta = build_optimal_occupation(inst, &sol).map_err(|e| e.to_string())?;
    let objective = occupation_objective(inst, &eta).map_err(|e| e.to_string())?;
    let cert = DualCertificate::from_solution(&sol);
    let report = dual_feasibility(inst, &cert, CHECK_TOL);
    let label = |a: usize| inst.action_labels()[a].clone();
    let eta1: Vec<Value> = (0..inst.n_states())
        .map(|i| {
            inst.rows(i)
                .iter()
                .zip(&eta.eta1[i])
                .map(|(r, &p)| (label(r.action), num(p)))
                .collect::<serde_json::Map<_, _>>()
                .into()
        })
        .collect();
    let eta2: Vec<Value> = (0..inst.n_states())
        .map(|i| {
            inst.rows(i)
                .iter()
                .zip(&eta.eta2[i])
                .map(|(r, q)| (label(r.action), nums(q)))
                .collect::<serde_json::Map<_, _>>()
                .into()
        })
        .collect();
    let middle: Vec<Value> = report
        .middle
        .iter()
        .map(|m| {
            json!({
                "state": m.state,
                "action": label(m.action),
                "slack": num(m.slack),
                "tight": m.tight,
            })
        })
        .collect();
    let third: Vec<Value> = report
        .third
        .iter()
        .map(|t| t.map_or(Value::Null, num))
        .collect();
    let argmax: Vec<Value> = report.argmax.iter().map(|d| action_labels(inst, d)).collect();
    Ok(Outcome::new(json!({
        "log_rho": num(sol.log_rho),
        "objective": num(objective),
        "eta0": nums(&eta.eta0),
        "eta1": eta1,
        "eta2": eta2,
        "dual": {
            "lambda": nums(&cert.lambda),
            "v": nums(&cert.v),
            "breve_lambda": num(cert.breve_lambda),
            "first": nums(&report.first),
            "middle": middle,
            "third": third,
            "argmax": argmax,
            "min_slack": num(report.min_slack),
            "feasible": report.feasible,
        },
    }))
    .param("check_tol", num(CHECK_TOL)))
}

fn oracle(inst: &MdpInstance, g: &GlobalArgs) -> Result<Outcome, String> {
    let growth = oracle_growth(inst, g.cap).map_err(|e| e.to_string())?;
    Ok(Outcome::new(growth_json(inst, &growth)))
}

fn eval(
    inst: &MdpInstance,
    g: &GlobalArgs,
    path: Option<&Path>,
    horizons: &[usize],
    mc_samples: Option<usize>,
    mc_steps: Option<usize>,
) -> Result<Outcome, String> {
    let policy = policy_or_uniform(inst, path)?;
    let curve = exact_growth(inst, &policy, horizons).map_err(|e| e.to_string())?;
    let mut result = json!({
        "horizons": curve.horizons,
        "per_state_values": rows(&curve.per_state_values),
        "limit_estimate": nums(&curve.limit_estimate),
    });
    let mut out_params = vec![("policy", policy_param(path)), ("horizons", json!(horizons))];
    if let Some(samples) = mc_samples {
        let steps = mc_steps.unwrap_or(*horizons.last().unwrap_or(&1));
        let mc = monte_carlo_growth(inst, &policy, steps, samples, g.seed)
            .map_err(|e| e.to_string())?;
        result["monte_carlo"] = json!({
            "point_estimate": nums(&mc.point_estimate),
            "naive_std_error": nums(&mc.naive_std_error),
            "heavy_tail": mc.heavy_tail,
            "sample_count": mc.sample_count,
            "steps": mc.steps,
            "seed": mc.seed,
        });
        out_params.push(("mc_samples", json!(samples)));
        out_params.push(("mc_steps", json!(steps)));
    }
    let mut out = Outcome::new(result);
    for (k, v) in out_params {
        out = out.param(k, v);
    }
    Ok(out)
}

fn simulate(
    inst: &MdpInstance,
    g: &GlobalArgs,
    path: Option<&Path>,
    steps: usize,
    start: usize,
) -> Result<Outcome, String> {
    let policy = policy_or_uniform(inst, path)?;
    let traj =
        simulate_trajectory(inst, &policy, steps, g.seed, start).map_err(|e| e.to_string())?;
    Ok(Outcome::new(json!({
        "states": traj.states,
        "actions": action_labels(inst, &traj.actions),
        "rewards": nums(&traj.rewards),
        "total_reward": num(traj.total_reward),
    }))
    .param("policy", policy_param(path))
    .param("steps", json!(steps))
    .param("start", json!(start)))
}
