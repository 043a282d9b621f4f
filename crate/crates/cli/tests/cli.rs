use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn biofuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biofuse"))
        .args(args)
        .env_remove("BIOFUSE_OUT")
        .output()
        .expect("spawn biofuse")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&biofuse(&["--help"])), 0);
    assert_eq!(code(&biofuse(&["--version"])), 0);
    assert_eq!(code(&biofuse(&["sweep", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&biofuse(&[])), 1);
    assert_eq!(code(&biofuse(&["frobnicate"])), 1);
    let smoke = config("smoke.toml");
    let out = biofuse(&["sweep", "everything", smoke.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("everything"));
    assert_eq!(code(&biofuse(&["run", "/nonexistent/config.toml"])), 1);
}

#[test]
fn malformed_config_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[dataset.source.synthetic]\n[train]\nbatch_size = 0\n").unwrap();
    let out = biofuse(&["run", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("batch_size"));
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing_data.toml");
    std::fs::write(
        &path,
        "seeds = [1]\n[dataset.source.ingested]\nroot = \"/nonexistent/biofuse-data\"\n",
    )
    .unwrap();
    let out = biofuse(&["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn smoke_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let smoke = config("smoke.toml");
    let out = biofuse(&["run", smoke.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["smoke-run.csv", "smoke-run.json", "smoke-dataset-seed1.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("ecg+face+finger"), "{stdout}");
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let smoke = config("smoke.toml");
    let out = Command::new(env!("CARGO_BIN_EXE_biofuse"))
        .args(["run", smoke.to_str().unwrap()])
        .env("BIOFUSE_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("smoke-run.csv").is_file());
}

#[test]
fn gradcheck_passes() {
    let out = biofuse(&["gradcheck", "--seed", "2"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().count() >= 19);
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn synth_writes_a_loadable_tree() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("tree");
    let out = biofuse(&[
        "synth",
        "--subjects",
        "4",
        "--samples",
        "5",
        "--image-size",
        "12",
        "--out",
        root.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pools = biofuse_core::dataset::load_sources(&root, 12, 12).unwrap();
    assert_eq!(pools.ecg.len(), 4);
    assert_eq!(pools.faces.len(), 4);
    assert_eq!(pools.fingers.len(), 4);
}
