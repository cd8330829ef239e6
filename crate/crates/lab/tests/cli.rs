use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], dir: &Path, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lab"));
    cmd.args(args).current_dir(dir).env_remove("LAB_MEM_BUDGET_BYTES");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("lab runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn only(dir: &Path, ext: &str) -> std::path::PathBuf {
    let found: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().map_or(false, |e| e == ext) && !p.to_string_lossy().contains("-caps-"))
        .collect();
    assert_eq!(found.len(), 1, "{found:?}");
    found[0].clone()
}

/// CSV rows with the runtime column blanked.
fn numeric_csv(path: &Path) -> Vec<Vec<String>> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let headers = rd.headers().unwrap().clone();
    let rt = headers.iter().position(|h| h == "runtime_s").unwrap();
    rd.records()
        .map(|r| {
            let mut v: Vec<String> = r.unwrap().iter().map(String::from).collect();
            v[rt].clear();
            v
        })
        .collect()
}

#[test]
fn caps_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "caps.json", r#"{"kind":"caps","n":2,"delta":[0.25]}"#);
    let out = dir.path().join("out");
    let o = lab(&["caps", "--config", &cfg, "--out", out.to_str().unwrap()], dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(only(&out, "json")).unwrap()).unwrap();
    assert_eq!(doc["exit_code"], 0);
    assert_eq!(doc["details"][0]["caps"], 26);
    let checks = doc["details"][0]["audit"]["checks"].as_array().unwrap();
    let pou = checks.iter().find(|c| c["name"] == "partition of unity").unwrap();
    assert_eq!(pou["pass"], true);
    assert_eq!(doc["config"]["kind"], "caps");
    assert_eq!(doc["config"]["trials"], 1);
    let header = std::fs::read_to_string(only(&out, "csv")).unwrap();
    assert!(header.starts_with("module,op,n,delta,R,q,r,seed,lhs,rhs,ratio,stderr,runtime_s,experiment,config_hash\n"));
}

#[test]
fn invalid_key_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"kind":"bush","n":2,"N":[8],"sampling":{"spacng":0.25}}"#);
    let o = lab(&["bush", "--config", &cfg, "--out", "o"], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sampling.spacng"));
    let o = lab(&["caps", "--config", &cfg, "--out", "o"], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(dir.path(), "kind.json", r#"{"kind":"bush","n":2,"N":[8]}"#);
    let o = lab(&["caps", "--config", &cfg, "--out", "o"], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`kind`"));
}

#[test]
fn bush_fit_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bush.json",
        r#"{"kind":"bush","n":2,"N":[8,16,32,64,128,256],"seed":3,"expect":{"p":0.5,"tolerance":0.3,"max_rms":0.1}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = lab(&["bush", "--config", &cfg, "--out", a.to_str().unwrap()], dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = lab(&["bush", "--config", &cfg, "--out", b.to_str().unwrap(), "--no-plots", "--threads", "3"], dir.path(), &[]);
    assert!(o.status.success());
    assert_eq!(numeric_csv(&only(&a, "csv")), numeric_csv(&only(&b, "csv")));
    assert_eq!(std::fs::read(only(&a, "json")).unwrap(), std::fs::read(only(&b, "json")).unwrap());
    let svg = std::fs::read_to_string(only(&a, "svg")).unwrap();
    assert!(svg.contains("<circle"));
    assert!(std::fs::read_dir(&b).unwrap().all(|e| e.unwrap().path().extension().unwrap() != "svg"));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(only(&a, "json")).unwrap()).unwrap();
    let p = doc["fit"]["p"].as_f64().unwrap();
    assert!((p - 0.5).abs() <= 0.3, "{p}");
    assert_eq!(numeric_csv(&only(&a, "csv")).len(), 6);

    let o = lab(&["bush", "--config", &cfg, "--out", a.to_str().unwrap(), "--seed", "4"], dir.path(), &[]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_dir(&a).unwrap().filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "csv").count(), 2);
}

#[test]
fn certification_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "fit.json",
        r#"{"kind":"fit","n":2,"points":[[16,2.0],[64,2.0],[256,2.0],[1024,2.0]],"expect":{"p":0.5,"tolerance":0.1}}"#,
    );
    let o = lab(&["fit", "--config", &cfg, "--out", "o"], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("uncertified"));
    let cfg = write_config(
        dir.path(),
        "ok.json",
        r#"{"kind":"fit","n":2,"points":[[16,2.0],[64,2.0],[256,2.0],[1024,2.0]],"expect":{"p":0.0,"tolerance":0.1}}"#,
    );
    let o = lab(&["fit", "--config", &cfg, "--out", "o"], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn budget_abort_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bush.json", r#"{"kind":"kakeya","n":2,"N":[8,16]}"#);
    let o = lab(&["kakeya", "--config", &cfg, "--out", "o"], dir.path(), &[("LAB_MEM_BUDGET_BYTES", "1000")]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(only(&dir.path().join("o"), "json")).unwrap()).unwrap();
    assert_eq!(doc["status"], "budget_abort");
    let cfg = write_config(dir.path(), "budget.json", r#"{"kind":"kakeya","n":2,"N":[8],"mem_budget":1000}"#);
    let o = lab(&["kakeya", "--config", &cfg, "--out", "p"], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
}
