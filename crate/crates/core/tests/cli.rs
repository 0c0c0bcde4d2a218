use std::path::Path;
use std::process::{Command, Output};

fn prodcat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prodcat"))
        .current_dir(dir)
        .arg("-q")
        .args(args)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = prodcat(dir.path(), &["train", "--model", "m"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let out = prodcat(dir.path(), &["train", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let out = prodcat(dir.path(), &["predict", "--test", "t.csv", "--output", "p.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_files_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = prodcat(dir.path(), &["train", "--train", "nope.csv", "--model", "m"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error:"), "{}", stderr(&out));
}

#[test]
fn topdown_without_hierarchy_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(
        prodcat(p, &["synth", "--out", "d", "--shape", "2/4", "--docs-per-class", "5"])
            .status
            .success()
    );
    let out = prodcat(
        p,
        &["train", "--train", "d/train.csv", "--model", "m", "--mode", "topdown"],
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn empty_test_file_gives_header_only_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(
        prodcat(p, &["synth", "--out", "d", "--shape", "2/4", "--docs-per-class", "10"])
            .status
            .success()
    );
    assert!(prodcat(p, &["train", "--train", "d/train.csv", "--model", "m"])
        .status
        .success());
    std::fs::write(p.join("empty.csv"), "Identifiant_Produit;Description;Libelle;Marque\n").unwrap();
    let out = prodcat(
        p,
        &["predict", "--model", "m", "--test", "empty.csv", "--output", "p.csv"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(p.join("p.csv")).unwrap(), "id;label\n");
}

#[test]
fn ensemble_rejects_misaligned_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("a.csv"), "id;label\n1;x\n2;y\n").unwrap();
    std::fs::write(p.join("b.csv"), "id;label\n1;x\n").unwrap();
    let out = prodcat(p, &["ensemble", "a.csv", "b.csv", "--output", "v.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains('b'), "{}", stderr(&out));
}

#[test]
fn prepare_cleans_standard_input() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_prodcat"))
        .args(["-q", "prepare"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child
        .stdin
        .take()
        .unwrap()
        .write_all("Chaise <b>PLIANTE</b> 45cm\n".as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "chaise pliante 45 cm\n");
}

#[test]
fn training_file_as_test_file_reproduces_labels() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(prodcat(
        p,
        &[
            "synth",
            "--out",
            "d",
            "--shape",
            "2/4/8",
            "--docs-per-class",
            "20",
            "--doc-length",
            "30"
        ]
    )
    .status
    .success());
    assert!(prodcat(p, &["train", "--train", "d/train.csv", "--model", "m"])
        .status
        .success());
    let out = prodcat(
        p,
        &["predict", "--model", "m", "--test", "d/train.csv", "--output", "p.csv"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let predicted = std::fs::read_to_string(p.join("p.csv")).unwrap();
    let train = std::fs::read_to_string(p.join("d/train.csv")).unwrap();
    let expected: Vec<String> = train
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(';');
            format!("{};{}", f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    assert_eq!(predicted.lines().skip(1).collect::<Vec<_>>(), expected);
}

#[test]
fn single_file_ensemble_is_a_copy() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let content = "id;label\n7;x\n3;y\n";
    std::fs::write(p.join("a.csv"), content).unwrap();
    assert!(prodcat(p, &["ensemble", "a.csv", "--output", "v.csv"]).status.success());
    assert_eq!(std::fs::read_to_string(p.join("v.csv")).unwrap(), content);
}
