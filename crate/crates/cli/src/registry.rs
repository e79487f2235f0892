//! Append-only run registry: one directory of tab-separated tables.
//!
//! * `runs.tsv`: one row per evaluated `(q, g, h, N, n, seed)`.
//! * `moments.tsv`: post-τ word traces of those runs.
//! * `dipoles.tsv`: dipoles found by searches.
//! * `tasks.tsv`: commit markers; a task listed here is complete.
//!
//! Rows of a task in progress live in `journal/<hash>.*.tsv` and are moved
//! into the main tables when the task commits, so the tables only ever hold
//! whole tasks in commit order.

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;
use twomat::hmc::AbortReason;
use twomat::search::{Dipole, SeparationKind};
use twomat::RunOutcome;

pub const RUNS: &str = "runs.tsv";
pub const MOMENTS: &str = "moments.tsv";
pub const DIPOLES: &str = "dipoles.tsv";
pub const TASKS: &str = "tasks.tsv";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn row_checksum(fields: &[String]) -> String {
    sha256_hex(fields.join("\t").as_bytes())[..16].to_string()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn parse_opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if s == "-" {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|e| anyhow::anyhow!("bad field {s:?}: {e}"))
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse()
        .map_err(|e| anyhow::anyhow!("bad field {s:?}: {e}"))
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// A table row type.
pub trait Record: Sized {
    const HEADER: &'static [&'static str];
    /// Fields covered by the row checksum.
    fn fields(&self) -> Vec<String>;
    /// Trailing fields excluded from the checksum (timestamps).
    fn volatile(&self) -> Vec<String> {
        Vec::new()
    }
    fn from_fields(f: &[&str]) -> Result<Self>;

    fn to_line(&self) -> String {
        let mut f = self.fields();
        f.extend(self.volatile());
        let sum = row_checksum(&self.fields());
        f.push(sum);
        f.join("\t")
    }

    fn header_line() -> String {
        let mut h: Vec<&str> = Self::HEADER.to_vec();
        h.push("checksum");
        h.join("\t")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub task_hash: String,
    pub q: f64,
    pub g: f64,
    pub h: f64,
    pub size: usize,
    pub n: usize,
    pub seed: u64,
    pub verdict: bool,
    pub abort_iter: Option<usize>,
    pub abort_fraction: f64,
    /// `-`, `hermiticity` or `divergence:<observable>`.
    pub abort_reason: String,
    pub tau: Option<usize>,
    pub tau_fallback: bool,
    pub t2: Option<f64>,
    pub t4: Option<f64>,
    pub t22: Option<f64>,
    pub t1111: Option<f64>,
    pub t2_err: Option<f64>,
    pub t4_err: Option<f64>,
    pub t22_err: Option<f64>,
    pub t1111_err: Option<f64>,
    pub acceptance: f64,
    pub epsilon: f64,
    pub steps: usize,
    pub wall_time: f64,
}

impl RunRecord {
    pub fn from_outcome(task_hash: &str, out: &RunOutcome, wall: Duration) -> Self {
        let m = out.moments.as_ref();
        let reason = match &out.abort_reason {
            None => "-".to_string(),
            Some(AbortReason::HermiticityLost { .. }) => "hermiticity".to_string(),
            Some(AbortReason::Divergence { observable, .. }) => {
                format!("divergence:{}", clean(observable))
            }
        };
        Self {
            task_hash: task_hash.to_string(),
            q: out.params.q,
            g: out.params.g,
            h: out.params.h,
            size: out.params.size,
            n: out.config.n,
            seed: out.config.seed,
            verdict: out.converged,
            abort_iter: out.abort_iteration,
            abort_fraction: out.abort_fraction,
            abort_reason: reason,
            tau: out.tau.map(|t| t.tau),
            tau_fallback: out.tau.is_some_and(|t| t.fallback),
            t2: m.map(|m| m.t2.mean),
            t4: m.map(|m| m.t4.mean),
            t22: m.map(|m| m.t22.mean),
            t1111: m.map(|m| m.t1111.mean),
            t2_err: m.map(|m| m.t2.stderr),
            t4_err: m.map(|m| m.t4.stderr),
            t22_err: m.map(|m| m.t22.stderr),
            t1111_err: m.map(|m| m.t1111.stderr),
            acceptance: out.acceptance_rate,
            epsilon: out.config.epsilon,
            steps: out.config.steps_per_trajectory,
            wall_time: wall.as_secs_f64(),
        }
    }

    pub fn hermiticity_lost(&self) -> bool {
        self.abort_reason == "hermiticity"
    }
}

impl Record for RunRecord {
    const HEADER: &'static [&'static str] = &[
        "task_hash",
        "q",
        "g",
        "h",
        "N",
        "n",
        "seed",
        "verdict",
        "abort_iter",
        "abort_fraction",
        "abort_reason",
        "tau",
        "tau_fallback",
        "t2",
        "t4",
        "t22",
        "t1111",
        "sigma_t2",
        "sigma_t4",
        "sigma_t22",
        "sigma_t1111",
        "acceptance",
        "epsilon",
        "steps",
        "wall_time",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.task_hash.clone(),
            self.q.to_string(),
            self.g.to_string(),
            self.h.to_string(),
            self.size.to_string(),
            self.n.to_string(),
            self.seed.to_string(),
            if self.verdict { "True" } else { "False" }.to_string(),
            opt(self.abort_iter),
            self.abort_fraction.to_string(),
            self.abort_reason.clone(),
            opt(self.tau),
            self.tau_fallback.to_string(),
            opt(self.t2),
            opt(self.t4),
            opt(self.t22),
            opt(self.t1111),
            opt(self.t2_err),
            opt(self.t4_err),
            opt(self.t22_err),
            opt(self.t1111_err),
            self.acceptance.to_string(),
            self.epsilon.to_string(),
            self.steps.to_string(),
        ]
    }

    fn volatile(&self) -> Vec<String> {
        vec![format!("{:.6}", self.wall_time)]
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        let verdict = match f[7] {
            "True" => true,
            "False" => false,
            v => bail!("bad verdict {v:?}"),
        };
        Ok(Self {
            task_hash: f[0].to_string(),
            q: parse(f[1])?,
            g: parse(f[2])?,
            h: parse(f[3])?,
            size: parse(f[4])?,
            n: parse(f[5])?,
            seed: parse(f[6])?,
            verdict,
            abort_iter: parse_opt(f[8])?,
            abort_fraction: parse(f[9])?,
            abort_reason: f[10].to_string(),
            tau: parse_opt(f[11])?,
            tau_fallback: parse(f[12])?,
            t2: parse_opt(f[13])?,
            t4: parse_opt(f[14])?,
            t22: parse_opt(f[15])?,
            t1111: parse_opt(f[16])?,
            t2_err: parse_opt(f[17])?,
            t4_err: parse_opt(f[18])?,
            t22_err: parse_opt(f[19])?,
            t1111_err: parse_opt(f[20])?,
            acceptance: parse(f[21])?,
            epsilon: parse(f[22])?,
            steps: parse(f[23])?,
            wall_time: parse(f[24])?,
        })
    }
}

/// One post-τ word trace of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRecord {
    pub task_hash: String,
    pub g: f64,
    pub h: f64,
    pub seed: u64,
    pub word: String,
    pub mean: f64,
    pub stderr: f64,
}

impl MomentRecord {
    pub fn from_outcome(task_hash: &str, out: &RunOutcome) -> Vec<Self> {
        if !out.converged {
            return Vec::new();
        }
        out.word_means
            .iter()
            .map(|(w, e)| Self {
                task_hash: task_hash.to_string(),
                g: out.params.g,
                h: out.params.h,
                seed: out.config.seed,
                word: w.clone(),
                mean: e.mean,
                stderr: e.stderr,
            })
            .collect()
    }
}

impl Record for MomentRecord {
    const HEADER: &'static [&'static str] =
        &["task_hash", "g", "h", "seed", "word", "mean", "stderr"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.task_hash.clone(),
            self.g.to_string(),
            self.h.to_string(),
            self.seed.to_string(),
            self.word.clone(),
            self.mean.to_string(),
            self.stderr.to_string(),
        ]
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        Ok(Self {
            task_hash: f[0].to_string(),
            g: parse(f[1])?,
            h: parse(f[2])?,
            seed: parse(f[3])?,
            word: f[4].to_string(),
            mean: parse(f[5])?,
            stderr: parse(f[6])?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DipoleRecord {
    pub task_hash: String,
    /// `mc` or the dummy region, e.g. `disk:0.5`.
    pub evaluator: String,
    pub search: String,
    pub q: f64,
    pub size: usize,
    pub n: usize,
    pub seed: u64,
    pub dipole: Dipole,
}

impl Record for DipoleRecord {
    const HEADER: &'static [&'static str] = &[
        "task_hash",
        "evaluator",
        "search",
        "q",
        "N",
        "n",
        "seed",
        "kind",
        "green_g",
        "green_h",
        "red_g",
        "red_h",
        "red_abort_fraction",
        "mid_g",
        "mid_h",
        "separation",
        "max_alpha",
        "evaluations",
    ];

    fn fields(&self) -> Vec<String> {
        let d = &self.dipole;
        vec![
            self.task_hash.clone(),
            self.evaluator.clone(),
            self.search.clone(),
            self.q.to_string(),
            self.size.to_string(),
            self.n.to_string(),
            self.seed.to_string(),
            match d.kind {
                SeparationKind::Spatial => "spatial",
                SeparationKind::Angular => "angular",
            }
            .to_string(),
            d.green.g.to_string(),
            d.green.h.to_string(),
            d.red.g.to_string(),
            d.red.h.to_string(),
            d.red.abort_fraction.to_string(),
            d.midpoint.0.to_string(),
            d.midpoint.1.to_string(),
            d.separation.to_string(),
            opt(d.max_alpha),
            d.evaluations.to_string(),
        ]
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        use twomat::search::{CouplingPoint, Verdict};
        let kind = match f[7] {
            "spatial" => SeparationKind::Spatial,
            "angular" => SeparationKind::Angular,
            k => bail!("bad dipole kind {k:?}"),
        };
        let green = CouplingPoint {
            g: parse(f[8])?,
            h: parse(f[9])?,
            verdict: Verdict::True,
            abort_fraction: 0.0,
        };
        let red = CouplingPoint {
            g: parse(f[10])?,
            h: parse(f[11])?,
            verdict: Verdict::False,
            abort_fraction: parse(f[12])?,
        };
        Ok(Self {
            task_hash: f[0].to_string(),
            evaluator: f[1].to_string(),
            search: f[2].to_string(),
            q: parse(f[3])?,
            size: parse(f[4])?,
            n: parse(f[5])?,
            seed: parse(f[6])?,
            dipole: Dipole {
                green,
                red,
                midpoint: (parse(f[13])?, parse(f[14])?),
                kind,
                separation: parse(f[15])?,
                max_alpha: parse_opt(f[16])?,
                evaluations: parse(f[17])?,
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskRecord {
    pub task_hash: String,
    pub kind: String,
    /// `ok` or `error`; both are final.
    pub status: String,
    pub runs: usize,
    pub detail: String,
}

impl Record for TaskRecord {
    const HEADER: &'static [&'static str] = &["task_hash", "kind", "status", "runs", "detail"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.task_hash.clone(),
            self.kind.clone(),
            self.status.clone(),
            self.runs.to_string(),
            clean(&self.detail),
        ]
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        Ok(Self {
            task_hash: f[0].to_string(),
            kind: f[1].to_string(),
            status: f[2].to_string(),
            runs: parse(f[3])?,
            detail: f[4].to_string(),
        })
    }
}

/// Read a table, verifying the header and every row checksum.
pub fn read_table<R: Record>(path: &Path) -> Result<Vec<R>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let Some(header) = lines.next().transpose()? else {
        return Ok(Vec::new());
    };
    if header != R::header_line() {
        bail!("{}: unexpected header", path.display());
    }
    let mut out = Vec::new();
    let width = R::HEADER.len() + 1;
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != width {
            bail!(
                "{}:{}: expected {width} fields, found {}",
                path.display(),
                k + 2,
                f.len()
            );
        }
        let rec = R::from_fields(&f).with_context(|| format!("{}:{}", path.display(), k + 2))?;
        if row_checksum(&rec.fields()) != f[width - 1] {
            bail!("{}:{}: checksum mismatch", path.display(), k + 2);
        }
        out.push(rec);
    }
    Ok(out)
}

fn append_lines<R: Record>(path: &Path, rows: &[R]) -> Result<()> {
    let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut buf = String::new();
    if fresh {
        buf.push_str(&R::header_line());
        buf.push('\n');
    }
    for r in rows {
        buf.push_str(&r.to_line());
        buf.push('\n');
    }
    f.write_all(buf.as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Rows written while a task runs.
#[derive(Clone, Debug)]
pub struct Journal {
    runs: PathBuf,
    moments: PathBuf,
}

impl Journal {
    pub fn runs(&self) -> Result<Vec<RunRecord>> {
        read_table(&self.runs)
    }

    pub fn moments(&self) -> Result<Vec<MomentRecord>> {
        read_table(&self.moments)
    }

    pub fn append(&self, run: &RunRecord, moments: &[MomentRecord]) -> Result<()> {
        append_lines(&self.moments, moments)?;
        append_lines(&self.runs, std::slice::from_ref(run))
    }

    fn clear(&self) -> Result<()> {
        for p in [&self.runs, &self.moments] {
            if p.exists() {
                fs::remove_file(p)?;
            }
        }
        Ok(())
    }
}

pub struct Registry {
    dir: PathBuf,
}

impl Registry {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(dir.join("journal"))
            .with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, table: &str) -> PathBuf {
        self.dir.join(table)
    }

    pub fn journal(&self, task_hash: &str) -> Journal {
        let j = self.dir.join("journal");
        Journal {
            runs: j.join(format!("{task_hash}.runs.tsv")),
            moments: j.join(format!("{task_hash}.moments.tsv")),
        }
    }

    pub fn runs(&self) -> Result<Vec<RunRecord>> {
        read_table(&self.path(RUNS))
    }

    pub fn moments(&self) -> Result<Vec<MomentRecord>> {
        read_table(&self.path(MOMENTS))
    }

    pub fn dipoles(&self) -> Result<Vec<DipoleRecord>> {
        read_table(&self.path(DIPOLES))
    }

    pub fn tasks(&self) -> Result<Vec<TaskRecord>> {
        read_table(&self.path(TASKS))
    }

    pub fn completed(&self) -> Result<HashSet<String>> {
        Ok(self.tasks()?.into_iter().map(|t| t.task_hash).collect())
    }

    /// Move the task's journal into the tables, then write its marker.
    pub fn commit(&self, task: &TaskRecord, dipoles: &[DipoleRecord]) -> Result<()> {
        if self.completed()?.contains(&task.task_hash) {
            bail!("task {} is already committed", task.task_hash);
        }
        let j = self.journal(&task.task_hash);
        append_lines(&self.path(RUNS), &j.runs()?)?;
        append_lines(&self.path(MOMENTS), &j.moments()?)?;
        append_lines(&self.path(DIPOLES), dipoles)?;
        append_lines(&self.path(TASKS), std::slice::from_ref(task))?;
        j.clear()
    }

    /// Verify every table and return a digest of their contents, wall
    /// times excluded. Fails on a broken row or on a task committed twice.
    pub fn digest(&self) -> Result<String> {
        let tasks = self.tasks()?;
        let mut seen = HashMap::new();
        for t in &tasks {
            if seen.insert(t.task_hash.clone(), ()).is_some() {
                bail!("task {} committed twice", t.task_hash);
            }
        }
        let mut h = Sha256::new();
        let mut feed = |name: &str, rows: Vec<Vec<String>>| {
            h.update(name.as_bytes());
            for r in rows {
                h.update(r.join("\t").as_bytes());
                h.update(b"\n");
            }
        };
        feed(RUNS, self.runs()?.iter().map(Record::fields).collect());
        feed(
            MOMENTS,
            self.moments()?.iter().map(Record::fields).collect(),
        );
        feed(
            DIPOLES,
            self.dipoles()?.iter().map(Record::fields).collect(),
        );
        feed(TASKS, tasks.iter().map(Record::fields).collect());
        Ok(format!("{:x}", h.finalize()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use twomat::search::{CouplingPoint, Verdict};

    fn run(g: f64) -> RunRecord {
        RunRecord {
            task_hash: "abc".into(),
            q: 1.0,
            g,
            h: -0.25,
            size: 16,
            n: 100,
            seed: 7,
            verdict: false,
            abort_iter: Some(40),
            abort_fraction: 0.61,
            abort_reason: "divergence:t4".into(),
            tau: None,
            tau_fallback: false,
            t2: None,
            t4: Some(1.5),
            t22: None,
            t1111: None,
            t2_err: None,
            t4_err: Some(0.01),
            t22_err: None,
            t1111_err: None,
            acceptance: 0.9,
            epsilon: 2e-3,
            steps: 50,
            wall_time: 0.25,
        }
    }

    #[test]
    fn rows_round_trip() {
        let r = run(0.1);
        let line = r.to_line();
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(RunRecord::from_fields(&f).unwrap(), r);

        let green = CouplingPoint {
            g: 0.1,
            h: 0.0,
            verdict: Verdict::True,
            abort_fraction: 0.0,
        };
        let red = CouplingPoint {
            g: 0.2,
            h: 0.0,
            verdict: Verdict::False,
            abort_fraction: 0.3,
        };
        let d = DipoleRecord {
            task_hash: "x".into(),
            evaluator: "mc".into(),
            search: "radial".into(),
            q: 0.5,
            size: 8,
            n: 10,
            seed: 1,
            dipole: Dipole {
                green,
                red,
                midpoint: (0.15, 0.0),
                kind: SeparationKind::Spatial,
                separation: 0.1,
                max_alpha: None,
                evaluations: 3,
            },
        };
        let line = d.to_line();
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(DipoleRecord::from_fields(&f).unwrap(), d);
    }

    #[test]
    fn tampered_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let reg = Registry::open(dir.path()).unwrap();
        let j = reg.journal("abc");
        j.append(&run(0.1), &[]).unwrap();
        let task = TaskRecord {
            task_hash: "abc".into(),
            kind: "point".into(),
            status: "ok".into(),
            runs: 1,
            detail: String::new(),
        };
        reg.commit(&task, &[]).unwrap();
        assert!(reg.commit(&task, &[]).is_err());
        let before = reg.digest().unwrap();
        assert_eq!(reg.runs().unwrap().len(), 1);

        let text = fs::read_to_string(reg.path(RUNS)).unwrap();
        fs::write(reg.path(RUNS), text.replace("\t0.1\t", "\t0.2\t")).unwrap();
        assert!(reg.digest().is_err());
        fs::write(reg.path(RUNS), text.replace("0.250000", "9.000000")).unwrap();
        assert_eq!(reg.digest().unwrap(), before);
    }
}
