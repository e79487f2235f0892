//! Analysis outputs regenerated from a registry.

use crate::registry::{DipoleRecord, Registry};
use anyhow::Result;
use log::debug;
use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use twomat::analysis::{
    curve_estimates, fit_asymptote, positivity_report, words_up_to, write_curve_table, Direction,
};
use twomat::search::assemble_curve;
use twomat::stats::Estimate;
use twomat::Word;

#[derive(Debug, Default)]
pub struct ReportSummary {
    pub curves: Vec<PathBuf>,
    pub fits: usize,
    pub positivity_rows: usize,
    pub digest: String,
}

fn curve_name(evaluator: &str, q: f64, size: usize, n: usize) -> String {
    let ev: String = evaluator
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' {
                c
            } else {
                '-'
            }
        })
        .collect();
    format!("curve_{ev}_q{q}_N{size}_n{n}.tsv")
}

/// Write `report/` inside the registry: one curve table per
/// `(evaluator, q, N, n)`, `fits.tsv` and `positivity.tsv`.
pub fn report(reg: &Registry) -> Result<ReportSummary> {
    let digest = reg.digest()?;
    let out_dir = reg.dir().join("report");
    fs::create_dir_all(&out_dir)?;
    let mut summary = ReportSummary {
        digest,
        ..ReportSummary::default()
    };

    let mut groups: BTreeMap<String, (String, f64, usize, usize, Vec<DipoleRecord>)> =
        BTreeMap::new();
    for d in reg.dipoles()? {
        let name = curve_name(&d.evaluator, d.q, d.size, d.n);
        groups
            .entry(name)
            .or_insert_with(|| (d.evaluator.clone(), d.q, d.size, d.n, Vec::new()))
            .4
            .push(d);
    }

    let mut fits = BufWriter::new(File::create(out_dir.join("fits.tsv"))?);
    writeln!(
        fits,
        "evaluator\tq\tN\tn\tdirection\tlambda\tsigma_lambda\tlambda_lo\tlambda_hi\ttheta_deg\tg0\th_cut\tpoints\tresidual"
    )?;
    for (name, (evaluator, q, size, n, dipoles)) in groups {
        let curve = assemble_curve(dipoles.into_iter().map(|d| d.dipole).collect());
        let path = out_dir.join(&name);
        write_curve_table(
            &curve_estimates(&curve),
            BufWriter::new(File::create(&path)?),
        )?;
        summary.curves.push(path);
        for (dir, label) in [(Direction::Plus, "plus"), (Direction::Minus, "minus")] {
            match fit_asymptote(&curve, dir, None) {
                Ok(f) => {
                    writeln!(
                        fits,
                        "{evaluator}\t{q}\t{size}\t{n}\t{label}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                        f.lambda,
                        f.lambda_stderr,
                        f.lambda_interval.0,
                        f.lambda_interval.1,
                        f.theta_deg,
                        f.g0,
                        f.h_cut,
                        f.points,
                        f.residual
                    )?;
                    summary.fits += 1;
                }
                Err(e) => debug!("{name} {label}: no fit ({e})"),
            }
        }
    }
    fits.flush()?;

    let runs: HashMap<(String, u64, u64, u64), (f64, f64)> = reg
        .runs()?
        .into_iter()
        .filter(|r| r.verdict)
        .map(|r| {
            (
                (r.task_hash, r.g.to_bits(), r.h.to_bits(), r.seed),
                (r.g, r.h),
            )
        })
        .collect();
    let mut moments: BTreeMap<(String, u64, u64, u64), HashMap<Word, Estimate>> = BTreeMap::new();
    for m in reg.moments()? {
        let Ok(w) = m.word.parse::<Word>() else {
            continue;
        };
        moments
            .entry((m.task_hash, m.g.to_bits(), m.h.to_bits(), m.seed))
            .or_default()
            .insert(
                w.canonical(),
                Estimate {
                    mean: m.mean,
                    stderr: m.stderr,
                    tau_int: 0.5,
                    samples: 0,
                },
            );
    }
    let mut pos = BufWriter::new(File::create(out_dir.join("positivity.tsv"))?);
    writeln!(
        pos,
        "task_hash\tg\th\tseed\tmin_eigenvalue\tnegative_minors\tinequalities_hold\tall_hold"
    )?;
    let basis = words_up_to(2);
    for (key, m) in &moments {
        let Some(&(g, h)) = runs.get(key) else {
            continue;
        };
        match positivity_report(m, &basis) {
            Ok(r) => {
                writeln!(
                    pos,
                    "{}\t{g}\t{h}\t{}\t{}\t{}\t{}\t{}",
                    key.0,
                    key.3,
                    r.min_eigenvalue,
                    r.negative_minors.len(),
                    r.inequalities.iter().all(|c| c.holds),
                    r.all_hold()
                )?;
                summary.positivity_rows += 1;
            }
            Err(e) => debug!("positivity at ({g}, {h}): {e}"),
        }
    }
    pos.flush()?;
    Ok(summary)
}
