//! Tasks: content-addressed units of work that write to a registry.

use crate::registry::{
    sha256_hex, DipoleRecord, Journal, MomentRecord, Registry, RunRecord, TaskRecord,
};
use anyhow::{anyhow, Result};
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use twomat::search::{
    angular_search, evaluate_point, midpoint_search, radial_search, AngularSchedule, CacheKey,
    CouplingPoint, Dipole, Dummy, Evaluation, Evaluator, McEvaluator, RadialOptions, StepPolicy,
    Verdict, VerdictCache,
};
use twomat::{ChainConfig, RunOutcome, SearchError};

fn default_delta() -> f64 {
    0.0015
}

fn default_max_steps() -> usize {
    1000
}

fn default_alpha() -> f64 {
    2.0
}

fn default_refine() -> f64 {
    0.5
}

/// Angles are in degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    Point {
        g: f64,
        h: f64,
    },
    /// Bisect between two points of opposite verdict, in either order.
    Midpoint {
        from: [f64; 2],
        to: [f64; 2],
        #[serde(default = "default_delta")]
        delta: f64,
    },
    /// March inward along the ray at angle `phi` from radius `r0`.
    Radial {
        phi: f64,
        r0: f64,
        #[serde(default = "default_delta")]
        delta: f64,
        /// Use the adaptive step with this base instead of `delta`.
        #[serde(default)]
        adaptive_base: Option<f64>,
        #[serde(default = "default_max_steps")]
        max_steps: usize,
    },
    Angular {
        start: [f64; 2],
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_refine")]
        refine: f64,
        #[serde(default)]
        clockwise: bool,
        #[serde(default)]
        negated: bool,
    },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Point { .. } => "point",
            Task::Midpoint { .. } => "midpoint",
            Task::Radial { .. } => "radial",
            Task::Angular { negated: false, .. } => "angular",
            Task::Angular { negated: true, .. } => "angular-negated",
        }
    }
}

/// The model and chain a task runs against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub q: f64,
    pub size: usize,
    /// `chain.seed` is ignored unless `seed` pins it.
    pub chain: ChainConfig,
    pub seed: Option<u64>,
    /// Stand-in region instead of Monte Carlo, e.g. `disk:0.5`.
    pub dummy: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub setup: Setup,
    pub task: Task,
}

impl TaskSpec {
    pub fn new(setup: Setup, task: Task) -> Self {
        let mut s = Self { setup, task };
        if s.setup.seed.is_none() {
            s.setup.chain.seed = 0;
        }
        s
    }

    pub fn hash(&self) -> String {
        sha256_hex(
            serde_json::to_string(self)
                .expect("task spec serialises")
                .as_bytes(),
        )
    }

    /// Pinned seed, or the leading 8 bytes of the task hash.
    pub fn seed(&self) -> u64 {
        self.setup.seed.unwrap_or_else(|| {
            let h = self.hash();
            u64::from_str_radix(&h[..16], 16).expect("hex digest")
        })
    }

    pub fn chain(&self) -> ChainConfig {
        ChainConfig {
            seed: self.seed(),
            ..self.setup.chain.clone()
        }
    }

    pub fn evaluator_label(&self) -> String {
        self.setup.dummy.clone().unwrap_or_else(|| "mc".to_string())
    }
}

pub struct TaskOutput {
    pub record: TaskRecord,
    pub dipoles: Vec<DipoleRecord>,
    /// Monte Carlo runs executed by this invocation.
    pub computed: usize,
}

pub type RunHook = Arc<dyn Fn(&RunOutcome) + Send + Sync>;

struct Recorder {
    journal: Journal,
    hash: String,
    computed: AtomicUsize,
    failure: Mutex<Option<anyhow::Error>>,
    hook: Option<RunHook>,
}

/// Run one task, journalling every Monte Carlo run. Runs journalled by an
/// earlier interrupted attempt are reused instead of recomputed. Does not
/// commit.
pub fn execute(reg: &Registry, spec: &TaskSpec, hook: Option<RunHook>) -> Result<TaskOutput> {
    let hash = spec.hash();
    let chain = spec.chain();
    let s = &spec.setup;
    let recorder = Arc::new(Recorder {
        journal: reg.journal(&hash),
        hash: hash.clone(),
        computed: AtomicUsize::new(0),
        failure: Mutex::new(None),
        hook,
    });

    let evaluator: Box<dyn Evaluator> = match &s.dummy {
        Some(d) => Box::new(d.parse::<Dummy>()?),
        None => {
            let cache = Arc::new(VerdictCache::new());
            for r in recorder.journal.runs()? {
                cache.insert(
                    CacheKey::new(r.q, r.g, r.h, r.size, r.n, r.seed),
                    Evaluation {
                        converged: r.verdict,
                        abort_fraction: r.abort_fraction,
                    },
                );
            }
            let rec = recorder.clone();
            Box::new(
                McEvaluator::<f64>::new(s.q, s.size, chain.clone())
                    .with_cache(cache)
                    .with_observer(move |out, wall| {
                        rec.computed.fetch_add(1, Ordering::Relaxed);
                        if let Some(h) = &rec.hook {
                            h(out);
                        }
                        let run = RunRecord::from_outcome(&rec.hash, out, wall);
                        let moments = MomentRecord::from_outcome(&rec.hash, out);
                        if let Err(e) = rec.journal.append(&run, &moments) {
                            rec.failure.lock().expect("recorder lock").get_or_insert(e);
                        }
                    }),
            )
        }
    };

    let result = search(&spec.task, evaluator.as_ref());
    if let Some(e) = recorder.failure.lock().expect("recorder lock").take() {
        return Err(e);
    }
    let computed = recorder.computed.load(Ordering::Relaxed);
    let total = match &s.dummy {
        Some(_) => 0,
        None => recorder.journal.runs()?.len(),
    };
    let mut record = TaskRecord {
        task_hash: hash.clone(),
        kind: spec.task.name().to_string(),
        status: "ok".to_string(),
        runs: total,
        detail: String::new(),
    };
    let mut dipoles = Vec::new();
    match result {
        Ok(Found::Point(p)) => record.detail = format!("{:?}", p.verdict),
        Ok(Found::Dipole(d)) => {
            record.detail = format!("midpoint {} {}", d.midpoint.0, d.midpoint.1);
            dipoles.push(DipoleRecord {
                task_hash: hash,
                evaluator: spec.evaluator_label(),
                search: spec.task.name().to_string(),
                q: s.q,
                size: s.size,
                n: chain.n,
                seed: chain.seed,
                dipole: d,
            });
        }
        Err(SearchError::Evaluation(e)) => return Err(anyhow!("evaluation failed: {e}")),
        Err(e) => {
            record.status = "error".to_string();
            record.detail = e.to_string();
        }
    }
    Ok(TaskOutput {
        record,
        dipoles,
        computed,
    })
}

enum Found {
    Point(CouplingPoint),
    Dipole(Dipole),
}

fn search(task: &Task, e: &dyn Evaluator) -> Result<Found, SearchError> {
    match *task {
        Task::Point { g, h } => evaluate_point(e, g, h).map(Found::Point),
        Task::Midpoint { from, to, delta } => {
            let a = evaluate_point(e, from[0], from[1])?;
            let b = evaluate_point(e, to[0], to[1])?;
            let (green, red) = if a.verdict == Verdict::True {
                (a, b)
            } else {
                (b, a)
            };
            let mut d = midpoint_search(green, red, delta, e)?;
            d.evaluations += 2;
            Ok(Found::Dipole(d))
        }
        Task::Radial {
            phi,
            r0,
            delta,
            adaptive_base,
            max_steps,
        } => {
            let phi = phi.to_radians();
            let policy = match adaptive_base {
                Some(base) => StepPolicy::Adaptive { base },
                None => StepPolicy::Uniform { delta },
            };
            let start = CouplingPoint::untested(r0 * phi.cos(), r0 * phi.sin());
            radial_search(start, &RadialOptions { policy, max_steps }, e).map(Found::Dipole)
        }
        Task::Angular {
            start,
            alpha,
            refine,
            clockwise,
            negated,
        } => {
            let schedule = AngularSchedule {
                alpha: alpha.to_radians(),
                refine_to: refine.to_radians(),
                clockwise,
            };
            angular_search(
                CouplingPoint::untested(start[0], start[1]),
                &schedule,
                negated,
                e,
            )
            .map(Found::Dipole)
        }
    }
}

/// Execute and commit unless already committed. Returns `None` for a
/// task that was already complete.
pub fn run_and_commit(
    reg: &Registry,
    spec: &TaskSpec,
    hook: Option<RunHook>,
) -> Result<Option<TaskOutput>> {
    if reg.completed()?.contains(&spec.hash()) {
        return Ok(None);
    }
    let out = execute(reg, spec, hook)?;
    reg.commit(&out.record, &out.dipoles)?;
    Ok(Some(out))
}
