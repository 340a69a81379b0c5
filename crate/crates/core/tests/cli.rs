use std::process::{Command, Output};

fn sudler(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sudler")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a schema-1 CSV, header dropped, comment lines skipped.
fn rows(text: &str) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema=1"));
    let body: String = lines.filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn limit_fn_grid_and_zero_row() {
    let o = sudler(&["limit-fn", "--period", "1,4", "--k", "2", "--eps", "-1:1:0.01"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().nth(1).unwrap() == "eps,value,T,tail_bound,flags");
    let r = rows(&text);
    assert_eq!(r.len(), 201);
    let zero = r.iter().find(|row| row[0].parse::<f64>().unwrap() == 0.0).unwrap();
    assert!(zero[1].parse::<f64>().unwrap() < 1.0);
}

#[test]
fn single_point_grid_matches_constants() {
    let g = rows(&stdout(&sudler(&["limit-fn", "--period", "2,5", "--k", "2", "--eps", "0:0:1"])));
    assert_eq!(g.len(), 1);
    let c = rows(&stdout(&sudler(&["constants", "--period", "2,5", "--q-max", "2000", "--precision-bits", "53"])));
    assert_eq!(c.len(), 2);
    let g0: f64 = g[0][1].parse().unwrap();
    let c2: f64 = c[1][1].parse().unwrap();
    assert!((g0 - c2).abs() < 2e-8);
    assert!(c2 < 1.0);
}

#[test]
fn vanishing_prefactor_is_flagged() {
    let s = sudler::cfrac::spectral(&sudler::cfrac::PeriodSpec::new(vec![1, 2], 2).unwrap()).unwrap();
    let eps = -s.ckek().to_f64();
    let arg = format!("{eps}:{eps}:1");
    let r = rows(&stdout(&sudler(&["limit-fn", "--period", "1,2", "--k", "2", "--eps", &arg])));
    assert_eq!(r[0][1].parse::<f64>().unwrap(), 0.0);
    assert_eq!(r[0][4], "zero");
}

#[test]
fn constants_golden_gap() {
    let o = sudler(&["constants", "--period", "1", "--precision-bits", "53"]);
    let text = stdout(&o);
    assert_eq!(text.lines().nth(1).unwrap(), "k,C_closed,C_empirical,gap,q_n_used");
    let r = rows(&text);
    assert_eq!(r.len(), 1);
    assert!(r[0][3].parse::<f64>().unwrap() < 1e-4);
}

#[test]
fn scan_examples() {
    let r = rows(&stdout(&sudler(&["scan", "--ell", "2", "--max-digit", "6"])));
    let verdict = |d: &str| r.iter().find(|row| row[0] == d).unwrap()[5].clone();
    assert_eq!(verdict("1,4"), "lt_1_numeric");
    assert_eq!(verdict("1,3"), "ge_1_numeric");

    let r = rows(&stdout(&sudler(&["scan", "--ell", "2", "--max-digit", "1"])));
    assert_eq!(r.len(), 1);
    assert_eq!(r[0][5], "ge_1_numeric");

    let text = stdout(&sudler(&["scan", "--ell", "1", "--max-digit", "7"]));
    assert!(text.trim_end().lines().last().unwrap().starts_with("# summary total=7"));
    for row in rows(&text) {
        let b: u32 = row[0].parse().unwrap();
        let below = row[5] != "ge_1_numeric";
        // C([0; 6 repeated]) is about 1.0814, so the switch happens at 7.
        assert_eq!(below, b >= 7, "{row:?}");
    }
}

#[test]
fn sudler_rows() {
    let r = rows(&stdout(&sudler(&["sudler", "--period", "1", "--N", "0:0"])));
    assert_eq!(r, vec![vec!["0".to_string(), "1.0000000000000000e0".into(), "0.0000000000000000e0".into()]]);
    let r = rows(&stdout(&sudler(&["sudler", "--period", "1", "--subseq", "--k", "1", "--m", "1:10"])));
    let ns: Vec<&str> = r.iter().map(|row| row[1].as_str()).collect();
    assert_eq!(ns, ["1", "2", "3", "5", "8", "13", "21", "34", "55", "89"]);
    let r = rows(&stdout(&sudler(&["sudler", "--period", "1,5", "--N", "1:2000", "--precision-bits", "53"])));
    assert_eq!(r.len(), 2000);
}

#[test]
fn verify_filter_and_validation() {
    let o = sudler(&["verify", "--suite", "qnrel"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let obj = v.as_object().unwrap();
    assert_eq!(obj.keys().collect::<Vec<_>>(), ["qnrel"]);
    assert_eq!(v["qnrel"]["pass"], true);

    let o = sudler(&["verify", "--period", "1,0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
}

#[test]
fn exit_codes() {
    assert_eq!(sudler(&["limit-fn", "--period", "1,2", "--k", "2", "--eps", "1:0:0.1"]).status.code(), Some(1));
    assert_eq!(sudler(&["limit-fn", "--period", "1,2"]).status.code(), Some(1));
    assert_eq!(sudler(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(sudler(&["--help"]).status.code(), Some(0));
    assert_eq!(sudler(&["sudler", "--period", "0,1", "--N", "1:2"]).status.code(), Some(1));
}

#[test]
fn output_is_byte_identical() {
    let args = ["limit-fn", "--period", "1,2", "--k", "1", "--eps", "-0.5:0.5:0.25", "--workers", "2"];
    assert_eq!(sudler(&args).stdout, sudler(&args).stdout);
    let args = ["scan", "--ell", "2", "--max-digit", "4", "--workers", "3", "--format", "json"];
    let a = sudler(&args).stdout;
    assert_eq!(a, sudler(&args).stdout);
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["rows"].as_array().unwrap().len(), 10);
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("sudler-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("s.csv");
    let o = sudler(&["sudler", "--period", "2", "--N", "1:3", "--out", path.to_str().unwrap()]);
    assert!(o.status.success() && o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(rows(&text).len(), 3);
    std::fs::remove_dir_all(&dir).unwrap();
}
