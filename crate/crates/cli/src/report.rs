//! The `run` command: solve one case and assemble its artifacts.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use phasealloc::analysis::{audit, unbalance_csv, Audit};
use phasealloc::formulation::{build_model, write_lp, write_solution, Assignment, CaseConfig, Solution};
use phasealloc::lin3distflow::{power_flow, Injections};
use phasealloc::oracle::{certify, search_space_bound, ENUMERATION_LIMIT};
use phasealloc::solver::{solve_mip, MipStatus};
use phasealloc::{magnitude_metric, reassignment, unbalance_metric, Network};
use serde::Serialize;

use crate::{exit, load_feeder, write_file, Failure, RunArgs};

/// Orientation of the balance rows reported alongside every run.
pub const FLOW_CONVENTION: &str = "flow(parent->bus) = demand(bus) + sum of flow(bus->child), per phase, positive downstream";

#[derive(Debug, Clone, Serialize)]
pub struct ConfigSummary {
    pub alpha: f64,
    pub capacity_multiplier: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub mip_gap: f64,
    pub time_limit: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub variables: usize,
    pub binaries: usize,
    pub constraints: usize,
    pub nonzeros: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnbalanceSummary {
    /// Sum of `|mean(v) - v_phi|` over squared voltages, pu^2.
    pub squared: f64,
    /// The same sum over voltage magnitudes, pu.
    pub magnitude: f64,
    pub base_squared: f64,
    pub base_magnitude: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSummary {
    pub best_objective: f64,
    pub ties: usize,
    pub evaluated: u64,
    pub feasible: u64,
    pub objective_matches: bool,
    pub incumbent_in_ties: bool,
}

/// Deterministic record of one run; timings live in `timing.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub feeder: String,
    pub case: String,
    pub config: ConfigSummary,
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub root_bound: Option<f64>,
    pub gap: Option<f64>,
    pub nodes_explored: usize,
    pub lp_iterations: usize,
    pub model: ModelSummary,
    pub phase_count: Option<usize>,
    pub base_phase_count: usize,
    pub unchanged_from_base: Option<bool>,
    pub changed_buses: Vec<String>,
    pub assignment: BTreeMap<String, String>,
    pub unbalance: Option<UnbalanceSummary>,
    pub audit: Option<Audit>,
    pub flow_convention: &'static str,
    pub oracle: Option<OracleSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub feeder: String,
    pub case: String,
    pub build_seconds: f64,
    pub solve_seconds: f64,
    pub oracle_seconds: Option<f64>,
    pub wall_seconds: f64,
}

/// Everything a run produces, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Summary,
    pub timing: Timing,
    pub solution: Option<Solution>,
    /// Artifact file names and contents, in write order.
    pub files: Vec<(String, String)>,
    pub code: i32,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn fixed(v: f64) -> String {
    format!("{:.9}", v + 0.0)
}

fn solution_csv(net: &Network, sol: &Solution) -> String {
    let base = net.data().base_kva;
    let mut w = String::new();
    w.push_str("bus,phase,assigned,p_kw,q_kvar,v_pu2,v_pu\n");
    let mut order: Vec<usize> = (0..net.bus_count()).collect();
    order.sort_by(|a, b| net.bus(*a).id.cmp(&net.bus(*b).id));
    for b in order {
        for ph in net.bus(b).phases.iter() {
            let k = ph.index();
            let v = sol.v[b][k];
            w.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                net.bus(b).id,
                ph.letter(),
                u8::from(sol.assignment.sets[b].contains(ph)),
                fixed(sol.p_inj[b][k] * base),
                fixed(sol.q_inj[b][k] * base),
                fixed(v),
                fixed(v.max(0.0).sqrt()),
            ));
        }
    }
    w
}


fn assignment_map(net: &Network, a: &Assignment) -> BTreeMap<String, String> {
    net.buses().iter().zip(&a.sets).map(|(b, s)| (b.id.clone(), s.to_string())).collect()
}

/// Solve `cfg` on `net` and assemble the artifacts.
pub fn run_case(net: &Network, case: &str, cfg: &CaseConfig, oracle: bool, export_lp: bool) -> Result<RunOutcome, Failure> {
    let wall = Instant::now();
    let model = build_model(net, cfg)?;
    let build_seconds = wall.elapsed().as_secs_f64();
    let census = model.census();
    let solve_start = Instant::now();
    let mip = solve_mip(&model, cfg);
    let solve_seconds = solve_start.elapsed().as_secs_f64();

    let base = Assignment::base(net);
    let base_state = power_flow(net, &Injections::spot_loads(net), net.source_v()).map_err(Failure::internal)?;
    let solution = match &mip.incumbent {
        Some(x) => Some(Solution::from_values(net, &model, x)?),
        None => None,
    };

    let mut files = Vec::new();
    if export_lp {
        files.push(("model.lp".to_string(), write_lp(&model)));
    }

    let mut oracle_seconds = None;
    let mut oracle_summary = None;
    if oracle {
        let t = Instant::now();
        match certify(net, cfg) {
            Ok(cert) => {
                let in_ties = solution.as_ref().is_some_and(|s| cert.contains(&s.assignment));
                oracle_summary = Some(OracleSummary {
                    best_objective: cert.best_objective,
                    ties: cert.best_assignments.len(),
                    evaluated: cert.evaluated,
                    feasible: cert.feasible,
                    objective_matches: (cert.best_objective - mip.objective).abs() <= 1e-6_f64.max(cfg.mip_gap * mip.objective.abs().max(1.0)),
                    incumbent_in_ties: in_ties,
                });
            }
            Err(phasealloc::oracle::OracleError::Infeasible) => {}
            Err(e) => return Err(Failure::input(e)),
        }
        oracle_seconds = Some(t.elapsed().as_secs_f64());
    }

    let mut summary = Summary {
        feeder: net.name().to_string(),
        case: case.to_string(),
        config: ConfigSummary {
            alpha: cfg.alpha,
            capacity_multiplier: cfg.capacity_multiplier,
            v_min: cfg.v_min,
            v_max: cfg.v_max,
            mip_gap: cfg.mip_gap,
            time_limit: cfg.time_limit,
        },
        status: mip.status.as_str().to_string(),
        objective: finite(mip.objective),
        bound: finite(mip.bound),
        root_bound: finite(mip.root_bound),
        gap: finite(mip.gap()),
        nodes_explored: mip.nodes_explored,
        lp_iterations: mip.lp_iterations,
        model: ModelSummary {
            variables: census.variables,
            binaries: census.binaries,
            constraints: census.constraints,
            nonzeros: census.nonzeros,
        },
        phase_count: None,
        base_phase_count: base.phase_count(),
        unchanged_from_base: None,
        changed_buses: Vec::new(),
        assignment: BTreeMap::new(),
        unbalance: None,
        audit: None,
        flow_convention: FLOW_CONVENTION,
        oracle: oracle_summary,
    };

    if let Some(sol) = &solution {
        let state = sol.phasor_state(net);
        let table = reassignment(net, sol);
        summary.phase_count = Some(sol.assignment.phase_count());
        summary.unchanged_from_base = Some(sol.assignment == base);
        summary.changed_buses = table.changed_buses().into_iter().map(String::from).collect();
        summary.assignment = assignment_map(net, &sol.assignment);
        summary.unbalance = Some(UnbalanceSummary {
            squared: unbalance_metric(&state).total_metric,
            magnitude: magnitude_metric(&state).total_metric,
            base_squared: unbalance_metric(&base_state).total_metric,
            base_magnitude: magnitude_metric(&base_state).total_metric,
        });
        summary.audit = Some(audit(net, sol));
        files.push(("solution.csv".into(), solution_csv(net, sol)));
        files.push(("unbalance.csv".into(), unbalance_csv(net, &state)));
        files.push(("reassignment.csv".into(), table.to_csv()));
        files.push(("reassignment.txt".into(), table.to_text()));
        if let Some(x) = &mip.incumbent {
            files.push(("values.txt".into(), write_solution(&model, x)));
        }
    }
    let json = serde_json::to_string_pretty(&summary).map_err(Failure::internal)? + "\n";
    files.push(("summary.json".into(), json));

    let timing = Timing {
        feeder: net.name().to_string(),
        case: case.to_string(),
        build_seconds,
        solve_seconds,
        oracle_seconds,
        wall_seconds: wall.elapsed().as_secs_f64(),
    };

    let mut code = match mip.status {
        MipStatus::Optimal => exit::OPTIMAL,
        MipStatus::Infeasible => exit::INFEASIBLE,
        MipStatus::GapLimit | MipStatus::TimeLimit => exit::LIMIT,
        MipStatus::Unbounded => exit::INTERNAL,
    };
    if let Some(o) = &summary.oracle {
        if code == exit::OPTIMAL && !(o.objective_matches && o.incumbent_in_ties) {
            code = exit::INTERNAL;
        }
    }
    if let Some(a) = &summary.audit {
        if !(a.conservation_ok() && a.consistency_ok()) {
            code = exit::INTERNAL;
        }
    }
    Ok(RunOutcome {
        summary,
        timing,
        solution,
        files,
        code,
    })
}

fn print_summary(o: &RunOutcome) {
    let s = &o.summary;
    println!("feeder {}  case {}  alpha {}", s.feeder, s.case, s.config.alpha);
    println!(
        "model: {} variables ({} binary), {} constraints",
        s.model.variables, s.model.binaries, s.model.constraints
    );
    println!("status {}  nodes {}  lp iterations {}", s.status, s.nodes_explored, s.lp_iterations);
    if let (Some(obj), Some(bound)) = (s.objective, s.bound) {
        println!("objective {obj:.9}  bound {bound:.9}");
    }
    if let Some(u) = &s.unbalance {
        println!(
            "unbalance (pu^2) {:.6}  base {:.6}   unbalance (pu) {:.6}  base {:.6}",
            u.squared, u.base_squared, u.magnitude, u.base_magnitude
        );
    }
    if let Some(same) = s.unchanged_from_base {
        if same {
            println!("phase configuration unchanged from the base case");
        } else {
            println!(
                "phases in use {} (base {}), changed buses: {}",
                s.phase_count.unwrap_or(0),
                s.base_phase_count,
                if s.changed_buses.is_empty() { "none".to_string() } else { s.changed_buses.join(" ") }
            );
        }
    }
    if let Some(o) = &s.oracle {
        println!(
            "oracle: optimum {:.9} over {} assignments, {} tied; match {}",
            o.best_objective,
            o.evaluated,
            o.ties,
            o.objective_matches && o.incumbent_in_ties
        );
    }
    println!("flow convention: {}", s.flow_convention);
    println!(
        "time: build {:.3} s, solve {:.3} s, wall {:.3} s",
        o.timing.build_seconds, o.timing.solve_seconds, o.timing.wall_seconds
    );
}

pub fn write_outcome(dir: &Path, o: &RunOutcome) -> Result<(), Failure> {
    for (name, contents) in &o.files {
        write_file(&dir.join(name), contents)?;
    }
    let timing = serde_json::to_string_pretty(&o.timing).map_err(Failure::internal)? + "\n";
    write_file(&dir.join("timing.json"), &timing)
}

pub(crate) fn run_command(args: &RunArgs) -> Result<i32, Failure> {
    let net = load_feeder(&args.case.feeder.feeder)?;
    let cfg = args.case.config(&net, args.alpha)?;
    if args.oracle {
        let count = search_space_bound(&net);
        if count > ENUMERATION_LIMIT {
            return Err(Failure::input(format!(
                "--oracle refused: {count} candidate combinations exceed the limit of {ENUMERATION_LIMIT}"
            )));
        }
    }
    let mut outcome = run_case(&net, &args.case.label(), &cfg, args.oracle, args.export_model.is_some())?;
    if let Some(path) = &args.export_model {
        let lp = outcome.files.remove(0);
        write_file(path, &lp.1)?;
    }
    write_outcome(&args.case.out, &outcome)?;
    print_summary(&outcome);
    if outcome.code == exit::INTERNAL {
        return Err(Failure::internal("solution failed its audit or disagreed with the oracle"));
    }
    Ok(outcome.code)
}
