//! Groups of checks behind each subcommand, plus the tables they emit.

use anyhow::Result;
use colombeau::wave::{self, SolveOptions};

use crate::config::Experiment;
use crate::criteria::{self, Context, Criterion};
use crate::report::{num, Check, Outcome, Table};

/// Runs a check, turning a numerical error into a failed check.
fn guarded(id: &str, f: Criterion, ctx: &Context) -> Outcome {
    match f(ctx) {
        Ok(o) => o,
        Err(e) => Outcome {
            checks: vec![Check::new(id, "error", f64::NEG_INFINITY, format!("{e:#}"))],
            ..Default::default()
        },
    }
}

fn run_ids(ctx: &Context, ids: &[&str]) -> Outcome {
    let mut out = Outcome::default();
    for (id, f) in criteria::ALL.iter().filter(|(id, _)| ids.contains(id)) {
        out.extend(guarded(id, *f, ctx));
    }
    out
}

/// Energy table of the configured metric family with mixed-mode data.
pub fn energy_table(ctx: &Context) -> Result<(Table, Vec<(String, f64)>)> {
    let w = &ctx.cfg.wave;
    let torus = criteria::wave_torus(ctx)?;
    let metric = criteria::family(ctx, w.metric, torus.clone())?;
    let data = criteria::mixed_data(&ctx.wave_grid, &torus);
    let opts = SolveOptions {
        t_final: w.t_final,
        cfl: w.cfl,
        snapshots: w.snapshots,
    };
    let run = wave::solve(&metric, &data, &opts)?;
    let report = wave::analyze(&metric, &run)?;
    let mut table = Table::new("energy", &["experiment", "eps", "k", "tau", "E", "sob_cov", "sob_part", "sup_u"]);
    for (i, row) in report.table.iter().enumerate() {
        for order in 0..=wave::MAX_ORDER {
            for (j, q) in row.iter().enumerate() {
                table.push(vec![
                    "wave".into(),
                    num(ctx.wave_grid.eps(i)),
                    order.to_string(),
                    num(report.times[j]),
                    num(q.energy(order)),
                    num(q.covariant_sq(order)),
                    num(q.partial_sq(order)),
                    num(q.sup_u),
                ]);
            }
        }
    }
    let derived = vec![
        ("wave.dx".to_string(), torus.dx()),
        ("wave.dt".to_string(), run.dt),
        ("wave.max_speed".to_string(), metric.max_speed()),
    ];
    Ok((table, derived))
}

fn sharp_example(ctx: &Context) -> Result<Outcome> {
    let n = ctx.cfg.sharp.chain_length;
    let result = criteria::check_chain(&ctx.grid, &criteria::example_chain(n))?;
    let table = criteria::chain_table("certificate", &result);
    let check = Check::new(
        "sharp-chain",
        "example chain certificate",
        if result.passed() { result.radius_margin.min(result.oracle_margin) } else { -1.0 },
        format!("{n} balls, models nested = {}", result.certificate.models_nested),
    );
    Ok(Outcome {
        checks: vec![check],
        tables: vec![table],
        ..Default::default()
    })
}

pub fn run(ctx: &Context, experiment: Experiment) -> Outcome {
    match experiment {
        Experiment::Algebra => run_ids(ctx, &["C1", "C2", "C3"]),
        Experiment::Causality => run_ids(ctx, &["C4", "C5", "C6"]),
        Experiment::Wave => {
            let mut out = Outcome::default();
            match energy_table(ctx) {
                Ok((table, derived)) => {
                    out.tables.push(table);
                    out.derived.extend(derived);
                }
                Err(e) => out.checks.push(Check::new("wave-main", "energy table", f64::NEG_INFINITY, format!("{e:#}"))),
            }
            out.extend(run_ids(ctx, &["C7", "C8", "C9", "C10"]));
            out
        }
        Experiment::Sharp => {
            let mut out = guarded("sharp-chain", sharp_example, ctx);
            out.extend(run_ids(ctx, &["C11"]));
            out
        }
        Experiment::Scaling => run_ids(ctx, &["C12"]),
    }
}
