use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn smle(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smle"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) {
    let o = smle(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn ids(v: &Value) -> Vec<u64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect()
}

fn gen(dir: &Path, family: &str, extra: &[&str]) -> String {
    let mut args = vec![
        "gen", "--n", "120", "--p", "60", "--family", family, "--seed", "4",
    ];
    args.extend_from_slice(extra);
    ok(dir, &args);
    dir.join("data.csv").to_string_lossy().into_owned()
}

#[test]
fn missing_n_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = smle(dir.path(), &["gen", "--p", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_writes_categorical_columns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = gen(
        d,
        "gaussian",
        &["--ctg-pos", "1,2,3", "--ctg-levels", "3,4,5"],
    );
    let text = fs::read_to_string(data).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("y,x1,x2,x3,x4"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    for cell in &row[1..4] {
        assert!(cell.chars().all(|c| c.is_ascii_uppercase()), "{cell}");
    }
    assert!(row[4].parse::<f64>().is_ok());
    let truth = json(&d.join("truth.json"));
    assert_eq!(truth["categorical"].as_array().unwrap().len(), 3);
    assert!(d.join("manifest.json").exists());
}

#[test]
fn keyset_and_k_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = gen(d, "gaussian", &[]);
    let s = d.join("s");
    ok(
        &s,
        &[
            "screen", "--data", &data, "--family", "gaussian", "--k", "15", "--keyset", "1,4,5",
        ],
    );
    let r = json(&s.join("screen_result.json"));
    let retained = ids(&r["retained"]);
    assert_eq!(retained.len(), 15);
    for f in [1, 4, 5] {
        assert!(retained.contains(&f));
    }

    let o = smle(
        &s,
        &[
            "screen", "--data", &data, "--family", "gaussian", "--k", "0",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[usage]"));
}

#[test]
fn trace_and_path_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = gen(d, "poisson", &["--effects", "0.5,0.5,0.5,0.5,0.5"]);
    ok(
        d,
        &["screen", "--data", &data, "--family", "poisson", "--k", "8"],
    );
    let trace = fs::read_to_string(d.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iter,loglik,step_delta,u_tries,support_changes"
    );
    let ll: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(ll.windows(2).all(|w| w[1] >= w[0]));

    let r = json(&d.join("screen_result.json"));
    let path = fs::read_to_string(d.join("path.csv")).unwrap();
    assert_eq!(path.lines().count(), ll.len() + 2);
    let header = path.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 1 + ids(&r["retained"]).len());
}

#[test]
fn family_mismatch_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = gen(d, "gaussian", &[]);
    let o = smle(d, &["screen", "--data", &data, "--family", "binomial"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[validation]"));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = smle(
        dir.path(),
        &[
            "screen",
            "--data",
            "/nonexistent.csv",
            "--family",
            "gaussian",
        ],
    );
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn select_scores_and_votes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = gen(d, "binomial", &[]);
    ok(
        d,
        &[
            "screen", "--data", &data, "--family", "binomial", "--k", "10",
        ],
    );
    let screen = d.join("screen_result.json").to_string_lossy().into_owned();

    ok(
        d,
        &[
            "select",
            "--data",
            &data,
            "--screen",
            &screen,
            "--criterion",
            "aic",
            "--k-min",
            "1",
            "--k-max",
            "10",
        ],
    );
    let r = json(&d.join("select_result.json"));
    assert_eq!(r["scores"].as_array().unwrap().len(), 10);

    ok(
        d,
        &[
            "select",
            "--data",
            &data,
            "--screen",
            &screen,
            "--vote",
            "--vote-threshold",
            "1.0",
        ],
    );
    let r = json(&d.join("select_result.json"));
    let freqs = r["votes"]["frequencies"].as_array().unwrap();
    let mut all: Vec<u64> = freqs
        .iter()
        .filter(|f| f["frequency"].as_f64().unwrap() == 1.0)
        .map(|f| f["feature"].as_u64().unwrap())
        .collect();
    all.sort_unstable();
    assert_eq!(ids(&r["selected"]), all);

    let o = smle(
        d,
        &[
            "select", "--data", &data, "--screen", &screen, "--k-max", "11",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn select_without_screen_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = gen(d, "gaussian", &[]);
    ok(
        d,
        &[
            "select", "--data", &data, "--family", "gaussian", "--k", "8",
        ],
    );
    let r = json(&d.join("select_result.json"));
    assert_eq!(ids(&r["candidates"]).len(), 8);
    let m = json(&d.join("manifest.json"));
    assert_eq!(m["args"]["opts"]["k"], 8);
}

#[test]
fn predictions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = gen(d, "gaussian", &[]);
    ok(
        d,
        &[
            "screen", "--data", &data, "--family", "gaussian", "--k", "6",
        ],
    );
    let res = d.join("screen_result.json").to_string_lossy().into_owned();
    let (a, b) = (d.join("a"), d.join("b"));
    ok(
        &a,
        &[
            "predict", "--data", &data, "--result", &res, "--type", "link",
        ],
    );
    ok(
        &b,
        &[
            "predict", "--data", &data, "--result", &res, "--type", "response",
        ],
    );
    let pa = fs::read(a.join("predictions.csv")).unwrap();
    assert_eq!(pa, fs::read(b.join("predictions.csv")).unwrap());
    assert_eq!(String::from_utf8(pa).unwrap().lines().count(), 121);

    let bin = d.join("bin");
    let data = gen(&bin, "binomial", &[]);
    ok(
        &bin,
        &[
            "screen", "--data", &data, "--family", "binomial", "--k", "6",
        ],
    );
    let res = bin
        .join("screen_result.json")
        .to_string_lossy()
        .into_owned();
    ok(&bin, &["predict", "--data", &data, "--result", &res]);
    let text = fs::read_to_string(bin.join("predictions.csv")).unwrap();
    for v in text.lines().skip(1) {
        let v: f64 = v.parse().unwrap();
        assert!(v > 0.0 && v < 1.0);
    }

    let bad = d.join("bad.csv");
    fs::write(&bad, "x1,x2\n1,2\n").unwrap();
    let o = smle(
        d,
        &[
            "predict",
            "--data",
            &data,
            "--result",
            &res,
            "--newdata",
            bad.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn predict_on_new_categorical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = gen(d, "gaussian", &["--ctg-pos", "1", "--ctg-levels", "3"]);
    ok(
        d,
        &[
            "screen", "--data", &data, "--family", "gaussian", "--k", "60",
        ],
    );
    let res = d.join("screen_result.json").to_string_lossy().into_owned();
    let text = fs::read_to_string(&data).unwrap();
    let newdata = d.join("new.csv");
    let head: Vec<&str> = text.lines().take(4).collect();
    fs::write(&newdata, head.join("\n") + "\n").unwrap();
    let out = d.join("p");
    ok(
        &out,
        &[
            "predict",
            "--data",
            &data,
            "--result",
            &res,
            "--newdata",
            newdata.to_str().unwrap(),
        ],
    );
    let full = d.join("full");
    ok(&full, &["predict", "--data", &data, "--result", &res]);
    let a = fs::read_to_string(out.join("predictions.csv")).unwrap();
    let b = fs::read_to_string(full.join("predictions.csv")).unwrap();
    let b_head: Vec<&str> = b.lines().take(4).collect();
    assert_eq!(a.lines().collect::<Vec<_>>(), b_head);
}

#[test]
fn eval_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cells = d.join("cells.json");
    fs::write(
        &cells,
        r#"[{"name":"tiny","gen":{"n":60,"p":40,"family":"gaussian","num_truecoef":2,
            "pos_truecoef":[1,2],"effect_truecoef":[2.0,2.0]},
            "methods":[{"name":"smle","screening":{"k":5}}],
            "replications":3,"master_seed":9}]"#,
    )
    .unwrap();
    let cells = cells.to_string_lossy().into_owned();
    let (a, b) = (d.join("a"), d.join("b"));
    ok(&a, &["eval", "--config", &cells]);
    ok(&b, &["eval", "--config", &cells]);
    let ra = fs::read(a.join("eval_report.csv")).unwrap();
    assert_eq!(ra, fs::read(b.join("eval_report.csv")).unwrap());
    let text = String::from_utf8(ra).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("cell,method,family,n,p,k,replications,failures,ssr,prr"));

    ok(&a, &["eval", "--reps", "1"]);
    let text = fs::read_to_string(a.join("eval_report.csv")).unwrap();
    for cell in ["linear", "poisson", "logistic"] {
        assert!(text
            .lines()
            .any(|l| l.starts_with(&format!("{cell},smle,"))));
    }

    fs::write(d.join("broken.json"), "{").unwrap();
    let o = smle(
        d,
        &["eval", "--config", d.join("broken.json").to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(2));
}
