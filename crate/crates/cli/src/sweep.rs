//! Declarative sweep plans and their scheduler.

use crate::registry::Registry;
use crate::task::{execute, Setup, Task, TaskOutput, TaskSpec};
use anyhow::{Context, Result};
use log::{info, warn};
use serde::Deserialize;
use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::mpsc;
use twomat::ChainConfig;

fn default_output() -> String {
    "sweep".to_string()
}

fn default_parallelism() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub q: f64,
    #[serde(rename = "N")]
    pub size: usize,
    pub n: usize,
    /// Pinned seed for every task; derived from each task hash if absent.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Registry directory, relative to the output root.
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub dummy: Option<String>,
    /// Overrides of the chain configuration.
    #[serde(default)]
    pub chain: toml::Table,
    #[serde(default)]
    pub tasks: Vec<Task>,
}

impl SweepPlan {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// One spec per distinct task, in plan order.
    pub fn specs(&self, base: &ChainConfig) -> Result<Vec<TaskSpec>> {
        let mut chain = crate::overlay(base, &self.chain)?;
        chain.n = self.n;
        chain.validate()?;
        let setup = Setup {
            q: self.q,
            size: self.size,
            chain,
            seed: self.seed,
            dummy: self.dummy.clone(),
        };
        let mut seen = HashSet::new();
        Ok(self
            .tasks
            .iter()
            .map(|t| TaskSpec::new(setup.clone(), t.clone()))
            .filter(|s| seen.insert(s.hash()))
            .collect())
    }
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct SweepSummary {
    pub tasks: usize,
    pub skipped: usize,
    pub committed: usize,
    pub failed: usize,
    pub computed: usize,
}

/// Run every uncommitted task, at most `parallelism` at once, committing
/// in plan order as results arrive. A task that errors or panics is logged
/// and left uncommitted; its siblings are unaffected.
pub fn run_sweep(reg: &Registry, specs: &[TaskSpec], parallelism: usize) -> Result<SweepSummary> {
    let done = reg.completed()?;
    let todo: Vec<&TaskSpec> = specs.iter().filter(|s| !done.contains(&s.hash())).collect();
    let mut summary = SweepSummary {
        tasks: specs.len(),
        skipped: specs.len() - todo.len(),
        ..SweepSummary::default()
    };
    if todo.is_empty() {
        return Ok(summary);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()?;
    let (tx, rx) = mpsc::channel::<(usize, Result<TaskOutput>)>();

    std::thread::scope(|scope| -> Result<()> {
        let todo = &todo;
        scope.spawn(move || {
            pool.install(|| {
                use rayon::prelude::*;
                todo.par_iter()
                    .enumerate()
                    .for_each_with(tx, |tx, (i, spec)| {
                        let r = catch_unwind(AssertUnwindSafe(|| execute(reg, spec, None)))
                            .unwrap_or_else(|p| {
                                Err(anyhow::anyhow!("task panicked: {}", panic_message(&p)))
                            });
                        let _ = tx.send((i, r));
                    });
            })
        });

        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (i, r) in rx {
            pending.insert(i, r);
            while let Some(r) = pending.remove(&next) {
                let spec = todo[next];
                next += 1;
                match r {
                    Ok(out) => {
                        reg.commit(&out.record, &out.dipoles)?;
                        summary.committed += 1;
                        summary.computed += out.computed;
                        info!(
                            "{} {} {}: {} {}",
                            &out.record.task_hash[..12],
                            out.record.kind,
                            out.record.status,
                            out.record.detail,
                            format_args!("({} new runs)", out.computed)
                        );
                    }
                    Err(e) => {
                        summary.failed += 1;
                        warn!("{} {} failed: {e:#}", &spec.hash()[..12], spec.task.name());
                    }
                }
            }
        }
        Ok(())
    })?;
    Ok(summary)
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".to_string())
}
