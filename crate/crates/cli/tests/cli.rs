use std::path::PathBuf;
use std::process::{Command, Output};

use dirac_core::{parse_expr, parse_system_file, render_expr, ConstrainedSystem};
use serde_json::Value;

fn preset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../presets")
        .join(name)
}

fn dirac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = dirac(args);
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let (code, stdout, stderr) = run(&full);
    let value = serde_json::from_str(&stdout).unwrap_or_else(|e| panic!("{e}\n{stdout}\n{stderr}"));
    (code, value)
}

fn p(name: &str) -> String {
    preset(name).display().to_string()
}

#[test]
fn derive_so2_text() {
    let (code, out, _) = run(&["derive", &p("so2.system")]);
    assert_eq!(code, 0);
    for line in [
        "  p = -1/2*g",
        "  s = 1/2*f",
        "  lambda_1 = -g",
        "  lambda_2 = f",
        "  H = f*s - g*p",
        "  H' = 1/2*f^2 + 1/2*g^2",
        "  pass el_equals_lie",
    ] {
        assert!(out.contains(line), "missing `{line}` in\n{out}");
    }
    assert_eq!(out.matches("second-class").count(), 2);
}

#[test]
fn derive_json_expressions_reparse() {
    let path = p("so2.system");
    let (code, v) = json(&["derive", &path]);
    assert_eq!(code, 0);
    let def = parse_system_file(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let sys = ConstrainedSystem::derive(&def.lagrangian, &def.chart).unwrap();
    let chart = &sys.chart;
    let mut exprs: Vec<&str> = vec![
        v["lagrangian"].as_str().unwrap(),
        v["base_hamiltonian"].as_str().unwrap(),
        v["total_hamiltonian"].as_str().unwrap(),
        v["hamiltonian"].as_str().unwrap(),
        v["weak_hamiltonian"].as_str().unwrap(),
    ];
    for m in v["momenta"].as_array().unwrap() {
        exprs.push(m["expr"].as_str().unwrap());
    }
    for c in v["constraints"].as_array().unwrap() {
        exprs.push(c["expr"].as_str().unwrap());
        exprs.push(c["solution"].as_str().unwrap());
    }
    for e in v["hamilton_equations"].as_array().unwrap() {
        exprs.push(e["rhs"].as_str().unwrap());
        exprs.push(e["weak"].as_str().unwrap());
    }
    for row in v["constraint_matrix"].as_array().unwrap() {
        exprs.extend(row.as_array().unwrap().iter().map(|x| x.as_str().unwrap()));
    }
    for text in exprs {
        let e = parse_expr(text, chart).unwrap_or_else(|err| panic!("`{text}`: {err}"));
        assert_eq!(render_expr(&e, chart), text);
    }
    assert_eq!(
        parse_expr(v["hamiltonian"].as_str().unwrap(), chart).unwrap(),
        sys.hamiltonian
    );
    assert_eq!(v["multipliers"][0]["value"], "-g");
    assert_eq!(v["verdicts"][1]["verdict"], "pass");
}

#[test]
fn derive_regular_has_no_constraints() {
    let (code, out, _) = run(&["derive", &p("regular.system")]);
    assert_eq!(code, 0);
    assert!(out.contains("no constraints"));
    let (_, v) = json(&["derive", &p("regular.system")]);
    assert_eq!(v["constraints"], Value::Array(vec![]));
    assert_eq!(v["hamiltonian"], "1/2*f^2 + 1/2*g^2 + 1/2*p_f^2 + 1/2*p_g^2");
}

#[test]
fn io_and_parse_errors_exit_2() {
    let (code, _, err) = run(&["derive", &p("missing.system")]);
    assert_eq!(code, 2);
    assert!(err.contains("missing.system") && err.contains("cannot read"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.system");
    std::fs::write(
        &bad,
        "[system]\nname = bad\nfields = f\n\n[lagrangian]\nL = f'^2 + * f\n",
    )
    .unwrap();
    let (code, _, err) = run(&["derive", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("bad.system:6:"), "{err}");

    let unsupported = dir.path().join("quartic.system");
    std::fs::write(&unsupported, "[system]\nname = q\nfields = f\n[lagrangian]\nL = f'^4\n").unwrap();
    let (code, _, err) = run(&["derive", unsupported.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("beyond supported class"), "{err}");

    assert_eq!(run(&[]).0, 2);
    assert_eq!(run(&["derive"]).0, 2);
}

#[test]
fn bracket_examples() {
    let so2 = p("so2.system");
    assert_eq!(run(&["bracket", &so2, "p + 1/2*g", "s - 1/2*f"]).1, "1\n");
    assert_eq!(run(&["bracket", &so2, "f", "g"]).1, "0\n");
    assert_eq!(run(&["bracket", &so2, "f", "f"]).1, "0\n");
    assert_eq!(run(&["bracket", &so2, "f", "p"]).1, "1\n");
    assert_eq!(run(&["bracket", &so2, "-s", "g"]).1, "1\n");
    let (code, out, _) = run(&["bracket", &so2, "p", "f*s - g*p", "--weak"]);
    assert_eq!(code, 0);
    assert_eq!(out, "-s\nweak: -1/2*f\n");
    let (code, v) = json(&["bracket", &so2, "f", "p"]);
    assert_eq!(code, 0);
    assert_eq!(v["bracket"], "1");
    assert!(v.get("weak").is_none());

    let (code, _, err) = run(&["bracket", &so2, "f +", "g"]);
    assert_eq!(code, 2);
    assert!(err.contains("first expression"), "{err}");
    assert_eq!(run(&["bracket", &so2, "f", "q"]).0, 2);
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn integrate_full_turn() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("so2.csv");
    let (code, v) = json(&[
        "integrate",
        &p("so2.system"),
        "--init",
        "1,0",
        "--alpha-max",
        "6.283185307179586",
        "--step",
        "0.001",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    for key in ["max_hamiltonian_drift", "max_radius2_drift", "max_constraint"] {
        assert!(v["monitors"][key].as_f64().unwrap() <= 1e-8, "{key}");
    }
    assert!(v["monitors"]["max_em_residual"].as_f64().unwrap() <= 1e-12);
    for s in v["state"].as_array().unwrap() {
        let d = s["initial"].as_f64().unwrap() - s["final"].as_f64().unwrap();
        assert!(d.abs() <= 1e-6);
    }

    let (header, rows) = csv_rows(&std::fs::read_to_string(&csv).unwrap());
    assert_eq!(header.join(","), "alpha,f,g,p,s,H,radius2,phi_1,phi_2,em_residual");
    assert_eq!(rows.len(), v["rows"].as_u64().unwrap() as usize);
    let (first, last) = (&rows[0], rows.last().unwrap());
    assert_eq!(last[0], std::f64::consts::TAU);
    assert_eq!(&first[1..5], &[1.0, 0.0, 0.0, 0.5]);
    assert!((1..5).all(|i| (first[i] - last[i]).abs() <= 1e-6));
}

#[test]
fn integrate_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("zero.csv");
    let so2 = p("so2.system");
    let (code, _, _) = run(&[
        "--quiet",
        "integrate",
        &so2,
        "--alpha-max",
        "0",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (_, rows) = csv_rows(&std::fs::read_to_string(&csv).unwrap());
    assert_eq!(rows.len(), 1);

    assert_eq!(run(&["integrate", &so2, "--step", "-1"]).0, 2);
    assert_eq!(run(&["integrate", &so2, "--step", "0"]).0, 2);
    assert_eq!(run(&["integrate", &so2, "--init", "1,2,3"]).0, 2);
    assert_eq!(run(&["integrate", &so2, "--init", "x"]).0, 2);
    assert_eq!(run(&["integrate", &p("firstclass.system"), "--init", "1,0"]).0, 2);
    assert_eq!(
        run(&["integrate", &p("chain.system"), "--init", "0,0", "--reduced"]).0,
        2
    );

    // Off the constraint surface the drift of phi_2 is reported, not hidden.
    let (code, v) = json(&["integrate", &so2, "--init", "1,0,0,0", "--alpha-max", "1"]);
    assert_eq!(code, 0);
    let phi2 = v["monitors"]["max_constraint_each"][1].as_f64().unwrap();
    assert!((phi2 - 0.5).abs() < 1e-9);
}

#[test]
fn integrate_reduced_matches_full() {
    let so2 = p("so2.system");
    let (_, full) = json(&["integrate", &so2, "--alpha-max", "1"]);
    let (code, reduced) = json(&["integrate", &so2, "--alpha-max", "1", "--reduced"]);
    assert_eq!(code, 0);
    assert_eq!(reduced["mode"], "reduced");
    for (a, b) in full["state"]
        .as_array()
        .unwrap()
        .iter()
        .zip(reduced["state"].as_array().unwrap())
    {
        assert!((a["final"].as_f64().unwrap() - b["final"].as_f64().unwrap()).abs() < 1e-10);
    }
}

#[test]
fn verify_presets() {
    let (code, out, _) = run(&["verify", &p("so2.system")]);
    assert_eq!(code, 0, "{out}");
    assert!(out.ends_with("all checks passed\n"));

    let (code, v) = json(&["verify", &p("firstclass.system")]);
    assert_eq!(code, 0);
    let check = |name: &str| {
        v["checks"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["name"] == name)
            .unwrap()
            .clone()
    };
    assert_eq!(check("el_equals_lie")["verdict"], "n/a");
    assert!(check("consistency")["detail"]
        .as_str()
        .unwrap()
        .contains("undetermined"));

    let (code, v) = json(&["verify", &p("broken.system")]);
    assert_eq!(code, 1);
    assert_eq!(v["passed"], false);
    let el = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "el_equals_lie")
        .unwrap();
    assert_eq!(el["verdict"], "fail");

    assert_eq!(run(&["verify", &p("regular.system")]).0, 0);
    assert_eq!(run(&["verify", &p("chain.system")]).0, 0);
}

#[test]
fn output_is_deterministic_and_quiet_is_silent() {
    for args in [
        vec!["derive", "so2.system"],
        vec!["--json", "derive", "chain.system"],
        vec!["--json", "verify", "so2.system"],
        vec!["integrate", "so2.system", "--alpha-max", "0.5"],
    ] {
        let args: Vec<String> = args
            .iter()
            .map(|a| if a.ends_with(".system") { p(a) } else { a.to_string() })
            .collect();
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(dirac(&args).stdout, dirac(&args).stdout, "{args:?}");
    }
    let (code, out, err) = run(&["--quiet", "verify", &p("so2.system")]);
    assert_eq!((code, out.as_str(), err.as_str()), (0, "", ""));
    let (code, out, _) = run(&["--quiet", "verify", &p("broken.system")]);
    assert_eq!((code, out.as_str()), (1, ""));
}
