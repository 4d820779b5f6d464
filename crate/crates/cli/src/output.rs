//! CSV writers. Reals are printed with 12 significant digits.

use std::io::{self, Write};

use ptree_learn::pairsdata::PairsSummary;
use ptree_learn::simharness::ExperimentResult;
use ptree_learn::Intervention;

/// 12 significant digits, positional notation for magnitudes in
/// `[1e-5, 1e12)`, scientific otherwise.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s)
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, e) = s.split_once('e').expect("scientific format");
        format!("{}e{e}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn intervention_cells(j: &Intervention) -> (String, String) {
    match j.target {
        Some(s) => (s.variable.to_string(), s.value.to_string()),
        None => (String::new(), String::new()),
    }
}

/// One row per strategy, restart and step. Step 0 is the state after the
/// observational records, so its intervention cells are empty.
pub fn write_episodes<W: Write>(out: W, results: &[ExperimentResult]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "strategy",
        "restart",
        "step",
        "posterior_true",
        "chosen_var",
        "chosen_val",
        "steps_to_certainty",
    ])?;
    for r in results {
        for (restart, e) in r.episodes.iter().enumerate() {
            for step in 0..e.posteriors.len() {
                let (var, val) = match step {
                    0 => (String::new(), String::new()),
                    _ => intervention_cells(&e.chosen[step - 1]),
                };
                w.write_record([
                    r.strategy.name().to_string(),
                    restart.to_string(),
                    step.to_string(),
                    fmt_real(e.posterior_true(step)),
                    var,
                    val,
                    e.steps_to_certainty.to_string(),
                ])?;
            }
        }
    }
    w.flush()
}

pub fn write_aggregate<W: Write>(out: W, results: &[ExperimentResult]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["strategy", "step", "mean_posterior_true", "stderr"])?;
    for r in results {
        for (step, (m, se)) in r.mean_curve.iter().zip(&r.stderr_curve).enumerate() {
            w.write_record([
                r.strategy.name().to_string(),
                step.to_string(),
                fmt_real(*m),
                fmt_real(*se),
            ])?;
        }
    }
    w.flush()
}

pub fn write_summary<W: Write>(out: W, results: &[ExperimentResult]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["strategy", "restarts", "mean_steps_to_certainty", "stderr"])?;
    for r in results {
        w.write_record([
            r.strategy.name().to_string(),
            r.episodes.len().to_string(),
            fmt_real(r.mean_steps),
            fmt_real(r.stderr_steps),
        ])?;
    }
    w.flush()
}

pub fn write_pairs_table<W: Write>(out: W, summary: &PairsSummary) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "N_obs",
        "strategy",
        "weighted_mean_interventions",
        "weighted_stderr",
    ])?;
    for row in &summary.rows {
        w.write_record([
            row.n_obs.to_string(),
            row.strategy.name().to_string(),
            fmt_real(row.weighted_mean),
            fmt_real(row.weighted_stderr),
        ])?;
    }
    w.flush()
}

pub fn write_pairs_detail<W: Write>(out: W, summary: &PairsSummary) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "pair",
        "weight",
        "degenerate_bins",
        "strategy",
        "mean_steps_to_certainty",
    ])?;
    for p in &summary.pairs {
        for (row, steps) in summary.rows.iter().zip(&p.mean_steps) {
            w.write_record([
                p.id.clone(),
                fmt_real(p.weight),
                p.degenerate.to_string(),
                row.strategy.name().to_string(),
                fmt_real(*steps),
            ])?;
        }
    }
    w.flush()
}
