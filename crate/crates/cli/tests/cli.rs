use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

struct Env {
    root: tempfile::TempDir,
}

impl Env {
    fn new() -> Self {
        Self {
            root: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_twomat"))
            .args(args)
            .env("TWOMAT_OUTPUT_ROOT", self.root.path().join("out"))
            .current_dir(self.root.path())
            .output()
            .unwrap()
    }

    fn write(&self, rel: &str, text: &str) -> PathBuf {
        let p = self.path(rel);
        fs::write(&p, text).unwrap();
        p
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json_lines(o: &Output) -> Vec<Value> {
    stdout(o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Table contents with the wall-time column dropped.
fn without_wall_time(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    let wall = header.iter().position(|h| *h == "wall_time");
    std::iter::once(header.join("\t"))
        .chain(lines.map(|l| {
            let mut f: Vec<&str> = l.split('\t').collect();
            if let Some(w) = wall {
                f.remove(w);
            }
            f.join("\t")
        }))
        .collect()
}

#[test]
fn run_point_exit_codes() {
    let env = Env::new();
    let free = env.run(&[
        "run-point",
        "--g",
        "0",
        "--h",
        "0",
        "-N",
        "16",
        "-n",
        "2000",
        "--trace",
        "trace.tsv",
    ]);
    assert_eq!(
        free.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&free.stderr)
    );
    let rec = &json_lines(&free)[0];
    assert_eq!(rec["verdict"], true);
    let t2 = rec["t2"].as_f64().unwrap();
    assert!((t2 - 1.0).abs() < 0.05, "t2 = {t2}");
    let trace = fs::read_to_string(env.path("trace.tsv")).unwrap();
    assert!(trace.starts_with("iteration\taction\tt2"));
    assert_eq!(trace.lines().count(), 2001);

    let strong = env.run(&[
        "run-point",
        "--g",
        "0.25",
        "--h",
        "0",
        "-N",
        "16",
        "-n",
        "2000",
    ]);
    assert_eq!(strong.status.code(), Some(10));
    assert_eq!(json_lines(&strong)[0]["verdict"], false);

    assert_eq!(
        env.run(&["run-point", "--g", "zero", "--h", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(env.run(&["run-point", "--bogus"]).status.code(), Some(2));

    // Already in the registry: answered without a new row.
    let again = env.run(&[
        "run-point",
        "--g",
        "0.25",
        "--h",
        "0",
        "-N",
        "16",
        "-n",
        "2000",
    ]);
    assert_eq!(again.status.code(), Some(10));
    let runs = fs::read_to_string(env.path("out/adhoc/runs.tsv")).unwrap();
    assert_eq!(runs.lines().count(), 3);
}

#[test]
fn config_file_overrides_flags() {
    let env = Env::new();
    let cfg = env.write(
        "cfg.toml",
        "n = 300\nN = 4\n[chain]\nepsilon = 1e-3\nsteps_per_trajectory = 10\n",
    );
    let o = env.run(&[
        "--config",
        cfg.to_str().unwrap(),
        "run-point",
        "--g",
        "0",
        "--h",
        "0",
        "-N",
        "16",
        "-n",
        "5000",
        "--epsilon",
        "0.01",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rec = &json_lines(&o)[0];
    assert_eq!(rec["n"], 300);
    assert_eq!(rec["size"], 4);
    assert_eq!(rec["epsilon"], 1e-3);
    assert_eq!(rec["steps"], 10);

    let bad = env.write("bad.toml", "[chain]\nepislon = 1.0\n");
    let o = env.run(&[
        "--config",
        bad.to_str().unwrap(),
        "run-point",
        "--g",
        "0",
        "--h",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dummy_disk_is_found_on_every_ray() {
    let env = Env::new();
    let delta = 0.0015;
    for k in 0..8 {
        let phi = (45 * k + 10).to_string();
        let o = env.run(&[
            "search", "radial", "--dummy", "disk:0.5", "--phi", &phi, "--r0", "0.9",
        ]);
        assert_eq!(o.status.code(), Some(0));
        let d = &json_lines(&o)[0]["dipole"];
        let (g, h) = (
            d["midpoint"][0].as_f64().unwrap(),
            d["midpoint"][1].as_f64().unwrap(),
        );
        assert!((g.hypot(h) - 0.5).abs() <= delta, "phi {phi}: {g}, {h}");
    }
    let o = env.run(&[
        "search",
        "angular-negated",
        "--dummy",
        "ellipse:1,0.3",
        "--start",
        "0.5,0",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let d = &json_lines(&o)[0]["dipole"];
    assert_eq!(d["kind"], "angular");

    // Nothing to find: a full circle inside the region.
    let o = env.run(&[
        "search", "angular", "--dummy", "disk:0.5", "--start", "0.6,0",
    ]);
    assert_eq!(o.status.code(), Some(1));

    let rep = env.run(&["report"]);
    assert_eq!(rep.status.code(), Some(0));
    let curves: Vec<_> = stdout(&rep)
        .lines()
        .filter(|l| l.starts_with("curve "))
        .map(String::from)
        .collect();
    assert_eq!(curves.len(), 2);
    let table =
        fs::read_to_string(env.path("out/adhoc/report/curve_disk-0.5_q1_N16_n20000.tsv")).unwrap();
    assert!(table.starts_with("phi\tr_mean\tsigma_r\tdelta_disc\tm\n"));
    assert_eq!(table.lines().count(), 9);
}

#[test]
fn searches_resume_from_the_registry() {
    let env = Env::new();
    let args = [
        "search", "radial", "--phi", "0", "--r0", "0.5", "--delta", "0.05", "-N", "6", "-n", "300",
    ];
    let first = env.run(&args);
    assert_eq!(
        first.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let runs = fs::read_to_string(env.path("out/adhoc/runs.tsv")).unwrap();
    let second = env.run(&args);
    assert_eq!(stdout(&first), stdout(&second));
    assert_eq!(
        fs::read_to_string(env.path("out/adhoc/runs.tsv")).unwrap(),
        runs
    );
}

#[test]
fn empty_plan_is_a_no_op() {
    let env = Env::new();
    let plan = env.write("plan.toml", "q = 1.0\nN = 8\nn = 100\noutput = \"empty\"\n");
    let o = env.run(&["sweep", plan.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("tasks 0: 0 already complete, 0 committed, 0 failed; 0 new runs"));
    let bad = env.write("bad.toml", "q = 1.0\nN = 8\n");
    assert_eq!(
        env.run(&["sweep", bad.to_str().unwrap()]).status.code(),
        Some(1)
    );
}

fn digest(o: &Output) -> String {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix("registry "))
        .unwrap()
        .to_string()
}

#[test]
fn dummy_sweep_is_idempotent() {
    let env = Env::new();
    let mut plan = String::from("q = 1.0\nN = 16\nn = 1000\noutput = \"rays\"\nparallelism = 4\ndummy = \"ellipse:0.4,0.2\"\n");
    for k in 0..8 {
        plan.push_str(&format!(
            "[[tasks]]\nkind = \"radial\"\nphi = {}\nr0 = 0.6\n",
            45 * k
        ));
    }
    let plan = env.write("plan.toml", &plan);
    let first = env.run(&["sweep", plan.to_str().unwrap()]);
    assert_eq!(first.status.code(), Some(0));
    assert!(stdout(&first).contains("tasks 8: 0 already complete, 8 committed"));
    let dipoles = fs::read_to_string(env.path("out/rays/dipoles.tsv")).unwrap();
    assert_eq!(dipoles.lines().count(), 9);

    let second = env.run(&["sweep", plan.to_str().unwrap()]);
    assert!(
        stdout(&second).contains("tasks 8: 8 already complete, 0 committed, 0 failed; 0 new runs")
    );
    assert_eq!(digest(&first), digest(&second));
    assert_eq!(
        fs::read_to_string(env.path("out/rays/dipoles.tsv")).unwrap(),
        dipoles
    );
}

#[test]
fn interrupted_sweeps_resume_to_the_same_registry() {
    let env = Env::new();
    let body = "[[tasks]]\nkind = \"radial\"\nphi = 0\nr0 = 0.5\ndelta = 0.05\n\
                [[tasks]]\nkind = \"point\"\ng = 0.01\nh = 0.02\n\
                [[tasks]]\nkind = \"radial\"\nphi = 30\nr0 = 0.5\ndelta = 0.05\n";
    let head =
        |out: &str| format!("q = 0.5\nN = 6\nn = 300\noutput = \"{out}\"\nparallelism = 2\n");
    let whole = env.write("whole.toml", &(head("whole") + body));
    let o = env.run(&["sweep", whole.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let reference = digest(&o);

    // Interrupt during the first task: half of its runs reached the journal.
    let resumed = env.write("resumed.toml", &(head("resumed") + body));
    let tasks = fs::read_to_string(env.path("out/whole/tasks.tsv")).unwrap();
    let first_hash = tasks
        .lines()
        .nth(1)
        .unwrap()
        .split('\t')
        .next()
        .unwrap()
        .to_string();
    let runs = fs::read_to_string(env.path("out/whole/runs.tsv")).unwrap();
    let own: Vec<&str> = runs
        .lines()
        .skip(1)
        .filter(|l| l.starts_with(&first_hash))
        .collect();
    assert!(own.len() >= 4);
    let keep = own.len() / 2;
    let journal = env.path("out/resumed/journal");
    fs::create_dir_all(&journal).unwrap();
    let mut partial = runs.lines().next().unwrap().to_string() + "\n";
    for l in &own[..keep] {
        partial.push_str(l);
        partial.push('\n');
    }
    fs::write(journal.join(format!("{first_hash}.runs.tsv")), partial).unwrap();
    let kept_points: Vec<(String, String)> = own[..keep]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[2].to_string(), f[3].to_string())
        })
        .collect();
    let moments = fs::read_to_string(env.path("out/whole/moments.tsv")).unwrap();
    let mut mpartial = moments.lines().next().unwrap().to_string() + "\n";
    for l in moments.lines().skip(1) {
        let f: Vec<&str> = l.split('\t').collect();
        if f[0] == first_hash && kept_points.contains(&(f[1].to_string(), f[2].to_string())) {
            mpartial.push_str(l);
            mpartial.push('\n');
        }
    }
    fs::write(journal.join(format!("{first_hash}.moments.tsv")), mpartial).unwrap();

    let o = env.run(&["sweep", resumed.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(digest(&o), reference);
    let total_runs = runs.lines().count() - 1;
    assert!(
        stdout(&o).contains(&format!("{} new runs", total_runs - keep)),
        "{}",
        stdout(&o)
    );
    for t in ["runs.tsv", "moments.tsv", "dipoles.tsv", "tasks.tsv"] {
        assert_eq!(
            without_wall_time(&env.path(&format!("out/resumed/{t}"))),
            without_wall_time(&env.path(&format!("out/whole/{t}"))),
            "{t}"
        );
    }
    assert_eq!(fs::read_dir(&journal).unwrap().count(), 0);
}

#[test]
fn report_checks_positivity_of_convergent_runs() {
    let env = Env::new();
    let o = env.run(&[
        "run-point",
        "--g",
        "0",
        "--h",
        "0",
        "-N",
        "8",
        "-n",
        "1500",
        "--q",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rep = env.run(&["report"]);
    assert!(stdout(&rep).contains("positivity 1"), "{}", stdout(&rep));
    let table = fs::read_to_string(env.path("out/adhoc/report/positivity.tsv")).unwrap();
    let row: Vec<&str> = table.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[7], "true");
    assert!(row[4].parse::<f64>().unwrap() > 0.0);
    assert_eq!(
        env.run(&["report", "--registry", "missing"]).status.code(),
        Some(1)
    );
}

#[test]
fn flow_and_table_outputs() {
    let env = Env::new();
    let o = env.run(&["frg-flow", "--fixed-points"]);
    let text = stdout(&o);
    assert!(text.starts_with("h\tg\n"));
    assert!(text.contains("0.1005390992\t0.1005390992"));

    let o = env.run(&[
        "frg-flow", "--h0", "-0.1", "--g0", "0.1", "--sense", "ir", "--t-max", "2", "--out",
        "flow.tsv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let flow = fs::read_to_string(env.path("flow.tsv")).unwrap();
    assert!(flow.starts_with("t\th\tg\n"));
    assert_eq!(flow.lines().count(), 202);

    let table = stdout(&env.run(&["sde-table"]));
    assert_eq!(table.matches(" yields: ").count(), 11);
}

#[test]
fn midpoint_on_the_quartic_axis() {
    let env = Env::new();
    let o = env.run(&[
        "search", "midpoint", "--from", "0,0", "--to", "0.1,0", "-N", "16", "-n", "2000", "--seed",
        "1",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let d = &json_lines(&o)[0]["dipole"];
    let g = d["midpoint"][0].as_f64().unwrap();
    assert!((0.06..=0.11).contains(&g), "g = {g}");
}
