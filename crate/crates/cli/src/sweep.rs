//! The `sweep` command: one solve per unbalance weight.

use phasealloc::formulation::CaseConfig;
use phasealloc::Network;
use serde::Serialize;

use crate::report::run_case;
use crate::{exit, load_feeder, write_file, Failure, SweepArgs};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub status: String,
    pub objective: Option<f64>,
    pub metric: Option<f64>,
    pub magnitude_metric: Option<f64>,
    pub phase_count: Option<usize>,
    pub changed_buses: usize,
}

/// Solve `base` once for every weight, in the order given.
pub fn sweep(net: &Network, case: &str, base: &CaseConfig, alphas: &[f64]) -> Result<(Vec<SweepRow>, i32), Failure> {
    let mut rows = Vec::with_capacity(alphas.len());
    let mut worst = exit::OPTIMAL;
    for &alpha in alphas {
        let cfg = CaseConfig { alpha, ..base.clone() };
        cfg.validate().map_err(Failure::input)?;
        let o = run_case(net, case, &cfg, false, false)?;
        worst = worst.max(o.code);
        let s = o.summary;
        rows.push(SweepRow {
            alpha,
            status: s.status,
            objective: s.objective,
            metric: s.unbalance.as_ref().map(|u| u.squared),
            magnitude_metric: s.unbalance.as_ref().map(|u| u.magnitude),
            phase_count: s.phase_count,
            changed_buses: s.changed_buses.len(),
        });
    }
    Ok((rows, worst))
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{:.9}", v + 0.0));
    let mut out = String::from("alpha,status,objective,metric,magnitude_metric,phase_count,changed_buses\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.alpha,
            r.status,
            opt(r.objective),
            opt(r.metric),
            opt(r.magnitude_metric),
            r.phase_count.map_or(String::new(), |c| c.to_string()),
            r.changed_buses
        ));
    }
    out
}

pub(crate) fn sweep_command(args: &SweepArgs) -> Result<i32, Failure> {
    if args.alphas.is_empty() {
        return Err(Failure::input("the weight list is empty"));
    }
    let net = load_feeder(&args.case.feeder.feeder)?;
    let cfg = args.case.config(&net, None)?;
    let (rows, code) = sweep(&net, &args.case.label(), &cfg, &args.alphas)?;
    let csv = to_csv(&rows);
    write_file(&args.case.out.join("sweep.csv"), &csv)?;
    print!("{csv}");
    Ok(code)
}
