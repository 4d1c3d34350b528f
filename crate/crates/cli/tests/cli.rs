use std::process::Command;

fn bianchi() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bianchi"));
    cmd.env_remove("BIANCHI_DB");
    cmd
}

#[test]
fn table_prints_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = bianchi()
        .args(["table", "--dmax", "11", "--db"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.contains("Z/2 ⊕ Z/3"));
}

#[test]
fn table_json_matches_across_jobs() {
    let run = |jobs: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = bianchi()
            .args(["table", "--dmax", "24", "--json", "--jobs", jobs, "--db"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    let one = run("1");
    assert_eq!(one, run("8"));
    let v: serde_json::Value = serde_json::from_slice(&one).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["rows"][0]["farrell_supplement"], "Z/2");
}

#[test]
fn invalid_m_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for (m, msg) in [
        ("1", "excluded case"),
        ("12", "not square-free"),
        ("-5", "positive"),
    ] {
        let out = bianchi()
            .args(["polyhedron", "--m", m, "--db"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(2), "m = {m}");
        assert!(String::from_utf8(out.stderr).unwrap().contains(msg));
    }
}

#[test]
fn db_path_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bianchi()
        .env("BIANCHI_DB", dir.path())
        .args(["homology", "--m", "19"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("m19").join("complex.json").is_file());
    assert!(dir.path().join("index.json").is_file());
}

#[test]
fn polyhedron_audit_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bianchi()
        .args([
            "polyhedron",
            "--m",
            "5",
            "--audit",
            "--prune-rule",
            "nonempty",
            "--db",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("hemispheres"));
}
