use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const FIG6: &str = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[3];\nh q[2];\ncx q[1],q[0];\ncx q[0],q[1];\nswap q[1],q[2];\nx q[1];\ncx q[1],q[2];\n";

fn ssr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssr")).current_dir(dir).args(args).output().expect("binary runs")
}

fn json(dir: &Path, file: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(file)).unwrap()).unwrap()
}

#[test]
fn optimize_writes_circuit_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("in.qasm"), FIG6).unwrap();
    let args = ["optimize", "--input", "in.qasm", "--ag", "path", "3", "--verify", "--report", "r.json", "--output", "out.qasm"];
    let out = ssr(d, &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(d, "r.json");
    assert_eq!(r["original_depth"], 7);
    assert_eq!(r["final_depth"], 4);
    let first = fs::read_to_string(d.join("out.qasm")).unwrap();
    assert!(first.starts_with("OPENQASM 2.0;"));
    // same seed, same bytes
    assert!(ssr(d, &args).status.success());
    assert_eq!(fs::read_to_string(d.join("out.qasm")).unwrap(), first);
    // the grid form of --ag is accepted too
    let out = ssr(d, &["optimize", "--input", "in.qasm", "--ag", "grid", "1x3", "--output", "g.qasm"]);
    assert!(out.status.success());
}

#[test]
fn input_errors_exit_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("bad.qasm"), "qreg q[2];\nfoo q[0],q[1];\n").unwrap();
    fs::write(d.join("far.qasm"), "OPENQASM 2.0;\nqreg q[3];\ncx q[0],q[2];\n").unwrap();
    for args in [
        vec!["optimize", "--input", "missing.qasm", "--ag", "path", "3", "--output", "o.qasm"],
        vec!["optimize", "--input", "bad.qasm", "--ag", "path", "3", "--output", "o.qasm"],
        vec!["optimize", "--input", "far.qasm", "--ag", "path", "3", "--output", "o.qasm"],
        vec!["optimize", "--input", "far.qasm", "--ag", "grid", "3", "--output", "o.qasm"],
        vec!["optimize", "--input", "far.qasm", "--ag", "path", "3"],
        vec!["frobnicate"],
    ] {
        let out = ssr(d, &args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(ssr(d, &["--help"]).status.code(), Some(0));
}

#[test]
fn synth_in_process_and_external() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("m.txt"), "100\n110\n111\n").unwrap();
    fs::write(d.join("b.txt"), "# layer qubit\n0 0\n1 2\n").unwrap();
    let out = ssr(d, &["synth", "--matrix", "m.txt", "--ag", "path", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("cx q[0],q[1];\ncx q[1],q[2];"), "{text}");

    let exe = env!("CARGO_BIN_EXE_ssr");
    let args = ["synth", "--matrix", "m.txt", "--ag", "path", "3", "--blocked", "b.txt", "--dimacs", "f.cnf"];
    let inproc = ssr(d, &args);
    assert!(inproc.status.success());
    let mut ext_args = args.to_vec();
    ext_args.extend(["--solver", exe, "--solver-arg", "solve-dimacs"]);
    let ext = ssr(d, &ext_args);
    assert!(ext.status.success(), "{}", String::from_utf8_lossy(&ext.stderr));
    assert!(String::from_utf8_lossy(&ext.stderr).contains("depth 3"));
    assert!(fs::read_to_string(d.join("f.cnf")).unwrap().starts_with("p cnf "));

    fs::write(d.join("sing.txt"), "11\n11\n").unwrap();
    assert_eq!(ssr(d, &["synth", "--matrix", "sing.txt", "--ag", "path", "2"]).status.code(), Some(1));
}

#[test]
fn train_then_optimize_with_model() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("in.qasm"), FIG6).unwrap();
    let out = ssr(d, &["train", "--ag", "path", "3", "--count", "60", "--iters", "30", "--save-dataset", "d.txt", "--out", "m.model"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(d.join("m.model")).unwrap().starts_with("ssr-depth-model 1\n"));
    let out = ssr(d, &["train", "--ag", "path", "3", "--dataset", "d.txt", "--iters", "5", "--out", "m2.model"]);
    assert!(out.status.success());
    let out = ssr(d, &["train", "--ag", "cycle", "3", "--dataset", "d.txt", "--out", "m3.model"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ssr(
        d,
        &["optimize", "--input", "in.qasm", "--ag", "path", "3", "--predictor", "mlp", "--model", "m.model", "--report", "r.json", "--output", "o.qasm"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(d, "r.json")["final_depth"], 4);
    fs::write(d.join("broken.model"), "ssr-depth-model 1\nag_key x\n").unwrap();
    let out = ssr(d, &["optimize", "--input", "in.qasm", "--ag", "path", "3", "--predictor", "mlp", "--model", "broken.model", "--output", "o.qasm"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_records_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::create_dir(d.join("suite")).unwrap();
    fs::write(d.join("suite/a.qasm"), FIG6).unwrap();
    fs::write(d.join("suite/b.qasm"), "garbage").unwrap();
    let out = ssr(d, &["bench", "--dir", "suite", "--ag", "path", "3", "--json", "t.json"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("a.qasm") && text.contains("b.qasm  error"), "{text}");
    let t = json(d, "t.json");
    assert_eq!(t["entries"].as_array().unwrap().len(), 2);
    let imp = t["mean_depth_improvement"].as_f64().unwrap();
    assert!((imp - 3.0 / 7.0).abs() < 1e-12);
    fs::create_dir(d.join("empty")).unwrap();
    let out = ssr(d, &["bench", "--dir", "empty", "--ag", "path", "3"]);
    assert!(out.status.success());
}
