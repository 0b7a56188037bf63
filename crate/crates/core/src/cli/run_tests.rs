use std::path::Path;

use super::run_with;
use crate::solver::solve_brute_force;
use crate::wcnf::{Var, WcnfFormula};

const TOY: &str = "x1,x2,y\n0,0,1\n0,1,0\n1,0,0\n1,1,1\n";

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Output {
    fn success(&self) -> bool {
        self.code == 0
    }
}

fn run_env(args: &[&str], solver_env: Option<String>) -> Output {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("satrules").chain(args.iter().copied());
    let code = run_with(argv, solver_env, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn run(args: &[&str]) -> Output {
    run_env(args, None)
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    o.stdout.clone()
}

fn stderr(o: &Output) -> String {
    o.stderr.clone()
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Dir {
        Dir(tempfile::tempdir().unwrap())
    }

    fn file(&self, name: &str, contents: &str) -> String {
        let p = self.0.path().join(name);
        std::fs::write(&p, contents).unwrap();
        p.to_string_lossy().into_owned()
    }

    fn path(&self, name: &str) -> String {
        self.0.path().join(name).to_string_lossy().into_owned()
    }
}

fn assert_error(o: &Output, code: i32, kind: &str) {
    assert_eq!(o.code, code, "stderr: {}", stderr(o));
    let err = stderr(o);
    let lines: Vec<&str> = err
        .lines()
        .filter(|l| l.starts_with("satrules: error["))
        .collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(
        lines[0].starts_with(&format!("satrules: error[{kind}]: ")),
        "{err}"
    );
}

fn train_toy(dir: &Dir, model: &str) -> Output {
    let csv = dir.file("toy.csv", TOY);
    let model = dir.path(model);
    run(&[
        "train",
        "--data",
        &csv,
        "--target",
        "y",
        "--mode",
        "cnf",
        "--k",
        "2",
        "--lambda",
        "0.1",
        "--batch-size",
        "4",
        "--model",
        &model,
    ])
}

#[test]
fn train_toy_then_inspect() {
    let dir = Dir::new();
    let o = train_toy(&dir, "toy.model");
    assert!(o.success(), "{}", stderr(&o));
    assert!(Path::new(&dir.path("toy.model.report.csv")).exists());
    let o = run(&["inspect", "--model", &dir.path("toy.model")]);
    assert!(o.success());
    let first = stdout(&o).lines().next().unwrap().to_string();
    let mut clauses: Vec<&str> = first.split(" AND ").collect();
    clauses.sort();
    assert_eq!(clauses, ["(x1 OR NOT x2)", "(x2 OR NOT x1)"]);
}

#[test]
fn same_seed_gives_identical_model_files() {
    let dir = Dir::new();
    let iris = data("iris.csv");
    let mut files = Vec::new();
    for name in ["a.model", "b.model"] {
        let model = dir.path(name);
        let o = run(&[
            "train",
            "--data",
            &iris,
            "--target",
            "species",
            "--positive",
            "versicolor",
            "--k",
            "2",
            "--seed",
            "7",
            "--shuffle",
            "3",
            "--model",
            &model,
        ]);
        assert!(o.success(), "{}", stderr(&o));
        files.push(std::fs::read(model).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn missing_target_is_a_usage_error() {
    let dir = Dir::new();
    let csv = dir.file("toy.csv", TOY);
    let o = run(&["train", "--data", &csv, "--model", &dir.path("m")]);
    assert_error(&o, 2, "usage");
    assert_error(&run(&["frobnicate"]), 2, "usage");
    assert_error(&run(&["train", "--k", "many"]), 2, "usage");
}

#[test]
fn predict_reproduces_training_accuracy() {
    let dir = Dir::new();
    let iris = data("iris.csv");
    let model = dir.path("iris.model");
    let o = run(&[
        "train",
        "--data",
        &iris,
        "--target",
        "species",
        "--mode",
        "decision-list",
        "--k",
        "3",
        "--model",
        &model,
    ]);
    assert!(o.success(), "{}", stderr(&o));
    let reported: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("training accuracy: "))
        .unwrap()
        .parse()
        .unwrap();

    let out = dir.path("pred.txt");
    let o = run(&[
        "predict", "--data", &iris, "--model", &model, "--output", &out,
    ]);
    assert!(o.success(), "{}", stderr(&o));
    let predicted: Vec<String> = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
    let mut rdr = csv::Reader::from_path(&iris).unwrap();
    let target = rdr
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == "species")
        .unwrap();
    let truth: Vec<String> = rdr
        .records()
        .map(|r| r.unwrap()[target].to_string())
        .collect();
    assert_eq!(predicted.len(), truth.len());
    let correct = predicted.iter().zip(&truth).filter(|(p, t)| p == t).count();
    let acc = correct as f64 / truth.len() as f64;
    assert!((acc - reported).abs() < 1e-4, "{acc} vs {reported}");

    let o = run(&["inspect", "--model", &model]);
    assert!(stdout(&o).starts_with("if "));
    assert!(stdout(&o).contains(" else "));
}

#[test]
fn predict_errors_name_the_problem() {
    let dir = Dir::new();
    train_toy(&dir, "toy.model");
    let model = dir.path("toy.model");

    let wrong = dir.file("wrong.csv", "x1,z\n0,1\n");
    let o = run(&["predict", "--data", &wrong, "--model", &model]);
    assert_error(&o, 1, "runtime");
    assert!(stderr(&o).contains("`x2`"));

    let bad = dir.file("bad.csv", "x1,x2\n0,1\n1,maybe\n");
    let o = run(&["predict", "--data", &bad, "--model", &model]);
    assert_error(&o, 1, "runtime");
    assert!(stderr(&o).contains("row 2"), "{}", stderr(&o));
}

#[test]
fn predict_clamps_values_outside_the_training_range() {
    let dir = Dir::new();
    let iris = data("iris.csv");
    let model = dir.path("iris.model");
    let o = run(&[
        "train",
        "--data",
        &iris,
        "--target",
        "species",
        "--positive",
        "versicolor",
        "--k",
        "1",
        "--model",
        &model,
    ]);
    assert!(o.success(), "{}", stderr(&o));
    let far = dir.file(
        "far.csv",
        "sepal_length,sepal_width,petal_length,petal_width\n100,-5,1000,99\n",
    );
    let o = run(&["predict", "--data", &far, "--model", &model]);
    assert!(o.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1);
}

/// Parses the varmap sidecar into `(clause, feature name)` for every `b` variable.
fn feature_vars(varmap: &str) -> Vec<(u32, usize, String)> {
    varmap
        .lines()
        .filter(|l| l.starts_with("b\t"))
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            let clause = f[1].split(' ').next().unwrap().parse().unwrap();
            let name = f[3].split(" uses ").nth(1).unwrap().to_string();
            (f[2].parse().unwrap(), clause, name)
        })
        .collect()
}

#[test]
fn encode_dump_decodes_to_the_toy_rule() {
    let dir = Dir::new();
    let csv = dir.file("toy.csv", TOY);
    let out = dir.path("toy.wcnf");
    let o = run(&[
        "encode", "--data", &csv, "--target", "y", "--k", "2", "--lambda", "0.1", "--output", &out,
    ]);
    assert!(o.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let f = WcnfFormula::parse_wdimacs(&text).unwrap();
    assert_eq!(f.to_wdimacs(), text);
    let r = solve_brute_force(&f).unwrap();
    assert_eq!(r.cost, 400_000);

    let varmap = std::fs::read_to_string(format!("{out}.varmap")).unwrap();
    let mut clauses = vec![Vec::new(); 2];
    for (v, i, name) in feature_vars(&varmap) {
        if r.assignment.value(Var::new(v)) {
            clauses[i].push(name);
        }
    }
    for c in &mut clauses {
        c.sort();
    }
    clauses.sort();
    assert_eq!(clauses, [["NOT x1", "x2"], ["NOT x2", "x1"]]);
}

#[test]
fn cv_prints_folds_and_medians() {
    let pima = data("pima.csv");
    let o = run(&[
        "cv",
        "--data",
        &pima,
        "--target",
        "class",
        "--folds",
        "10",
        "--ks",
        "1",
        "--lambdas",
        "1",
        "--batch-sizes",
        "200",
    ]);
    assert!(o.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().take_while(|l| !l.is_empty()).collect();
    assert!(rows[0].starts_with("fold,test_accuracy"));
    assert_eq!(rows.len(), 12);
    assert!(rows[11].starts_with("median,"));
    assert!(out.contains("accuracy"));
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = Dir::new();
    let csv = dir.file("toy.csv", TOY);
    let model = dir.path("m.model");
    let cfg = dir.file(
        "cfg.toml",
        &format!(
            "data = {csv:?}\ntarget = \"y\"\nk = 1\nlambda = 0.25\nbatch_size = 4\nmodel = {model:?}\n"
        ),
    );
    let o = run(&["train", "--config", &cfg, "--k", "2"]);
    assert!(o.success(), "{}", stderr(&o));
    let o = run(&["inspect", "--model", &model]);
    let out = stdout(&o);
    assert!(out.contains("\nk: 2\n"), "{out}");
    assert!(out.contains("\nlambda: 0.25\n"), "{out}");
    assert!(out.contains("\nrounds: 2\n"), "{out}");

    let broken = dir.file("broken.toml", "k = \"three\"\n");
    assert_error(&run(&["train", "--config", &broken]), 2, "usage");
}

#[test]
fn external_solver_needs_a_command() {
    let dir = Dir::new();
    let csv = dir.file("toy.csv", TOY);
    let o = run(&[
        "train",
        "--data",
        &csv,
        "--target",
        "y",
        "--solver",
        "external",
        "--model",
        &dir.path("m"),
    ]);
    assert_error(&o, 2, "usage");
}

#[cfg(unix)]
#[test]
fn solver_env_var_selects_the_external_backend() {
    let dir = Dir::new();
    let csv = dir.file("toy.csv", TOY);
    // A "solver" that gives up without an answer.
    let script = dir.file("solver.sh", "#!/bin/sh\necho 's UNKNOWN'\n");
    let args = [
        "train",
        "--data",
        &csv,
        "--target",
        "y",
        "--model",
        &dir.path("m"),
    ];
    let o = run_env(&args, Some(format!("sh {script}")));
    assert_error(&o, 1, "runtime");
    // An explicit built-in choice overrides the environment.
    let mut builtin = args.to_vec();
    builtin.extend(["--solver", "branch-and-bound"]);
    assert!(run_env(&builtin, Some(format!("sh {script}"))).success());
}
