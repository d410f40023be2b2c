use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const GRID: &str = "[experiment]
signal = blocks, heavisine
design = sine, hole2
rule = large, small, hard
rsnr = 4, 7
runs = 4
seed = 21
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_warpshrink"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_with_threads(config: &Path, out: &Path, threads: &str, extra: &[&str]) -> Output {
    bin()
        .env("WARPSHRINK_THREADS", threads)
        .arg("run")
        .arg(config)
        .arg("-o")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn files_with_prefix(dir: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with(prefix))
        .collect();
    v.sort();
    v
}

#[test]
fn run_writes_report_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "grid.cfg", GRID);
    let out = tmp.path().join("out");
    let o = run_with_threads(&cfg, &out, "2", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let reports = files_with_prefix(&out, "report-");
    let manifests = files_with_prefix(&out, "manifest-");
    assert_eq!((reports.len(), manifests.len()), (1, 1));
    let text = fs::read_to_string(&reports[0]).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "signal,design,rule,rsnr,n,runs,mean_rmse,sd_rmse");
    assert_eq!(lines.len(), 1 + 24);
    assert!(lines[1].starts_with("blocks,hole2,E1,4,1024,4,"));
    let hash = reports[0].file_name().unwrap().to_str().unwrap()[7..23].to_string();
    assert!(manifests[0].to_str().unwrap().contains(&hash));
    assert!(fs::read_to_string(&manifests[0]).unwrap().contains("config_sha256"));
    assert!(files_with_prefix(&out, ".warpshrink-").is_empty());
}

#[test]
fn byte_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "grid.cfg", GRID);
    let read = |threads: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = run_with_threads(&cfg, &out, threads, &[]);
        assert!(o.status.success());
        fs::read(&files_with_prefix(&out, "report-")[0]).unwrap()
    };
    let one = read("1", "a");
    assert_eq!(one, read("4", "b"));
    assert_eq!(one, read("3", "c"));
}

#[test]
fn invalid_config_fails_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.cfg", "[experiment]\nsignal = blocks\ndesign = uniform\nrule = hard\nrsnr = -1\n");
    let out = tmp.path().join("out");
    let o = run_with_threads(&cfg, &out, "1", &[]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5: `rsnr`"));
    assert!(!out.exists());

    for sub in ["audit", "rate"] {
        let o = bin().arg(sub).arg(&cfg).output().unwrap();
        assert!(!o.status.success(), "{sub}");
    }
    let o = bin().arg("run").arg(tmp.path().join("missing.cfg")).arg("-o").arg(&out).output().unwrap();
    assert!(!o.status.success());
}

#[test]
fn unwritable_output_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "one.cfg", "[experiment]\nsignal = blocks\ndesign = uniform\nrule = hard\nruns = 1\n");
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run_with_threads(&cfg, &blocker.join("out"), "1", &[]);
    assert!(!o.status.success());
}

#[test]
fn overrides_and_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "one.cfg", "[experiment]\nsignal = doppler\ndesign = hole2\nrule = large\n");
    let out = tmp.path().join("out");
    let o = run_with_threads(&cfg, &out, "2", &["--runs", "2", "--seed", "5", "--traces"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(&files_with_prefix(&out, "report-")[0]).unwrap();
    assert!(report.lines().nth(1).unwrap().starts_with("doppler,hole2,E1,4,1024,2,"));
    let manifest = fs::read_to_string(&files_with_prefix(&out, "manifest-")[0]).unwrap();
    assert!(manifest.contains("override.runs = 2") && manifest.contains("override.seed = 5"));
    let traces = files_with_prefix(&out, "trace-");
    assert_eq!(traces.len(), 1);
    let text = fs::read_to_string(&traces[0]).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,truth,estimate");
    assert_eq!(lines.len(), 1 + 1024);
    assert!(lines[1].starts_with("0.000000000,"));
    assert!(lines[1024].starts_with("1.000000000,"));
}

#[test]
fn table_merges_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for (name, signal) in [("a.cfg", "blocks"), ("b.cfg", "bumps")] {
        let cfg = write_config(
            tmp.path(),
            name,
            &format!("[experiment]\nsignal = {signal}\ndesign = sine\nrule = large, hard\nruns = 2\n"),
        );
        assert!(run_with_threads(&cfg, &out, "2", &[]).status.success());
    }
    let o = bin().arg("table").arg(&out).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].contains("E1@4") && lines[0].contains("E3@4"));
    assert!(lines[1].starts_with("blocks") && lines[2].starts_with("bumps"));

    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert!(!bin().arg("table").arg(&empty).output().unwrap().status.success());
}

#[test]
fn audit_and_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.cfg", "[experiment]\nsignal = heavisine\ndesign = sine\nrule = large, hard\nn = 512\n");
    let o = bin().arg("audit").arg(&cfg).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().starts_with("heavisine,sine,E1,4,512,"));

    let zero = write_config(
        tmp.path(),
        "z.cfg",
        "[experiment]\nsignal = zero\ndesign = uniform\nrule = large\nsigma = 0\nruns = 2\nrate_n = 64, 128, 256\n",
    );
    let o = bin().arg("rate").arg(&zero).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("slope undefined"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("zero,")).count(), 3);
}
