use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use featint_cli::bench;
use featint_cli::pipeline::extract_suite;
use featint_core::featloc::{locate_all, LocateMode, DEFAULT_ROLE_SEPARATOR};
use featint_core::flc::{parse_unit, resolve_product, LowerOptions};
use featint_core::modelx::annotate_metadata_vars;
use featint_core::symex::{extract_feature_models, EngineConfig, PathStatus};
use tempfile::TempDir;

fn featint(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_featint"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// A directory holding the generated liftkit suite and its extraction.
fn extracted() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = featint(dir.path(), &["gen-bench", "-o", "bench", "--suite", "liftkit"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = featint(
        dir.path(),
        &[
            "extract",
            "bench/liftkit/liftkit.flc",
            "bench/liftkit/products.txt",
            "-o",
            "ex",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir
}

/// Data rows of a report, without the `#` preamble.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn exit_codes() {
    let dir = extracted();
    let d = dir.path();
    assert_eq!(code(&featint(d, &["--help"])), 0);
    assert_eq!(code(&featint(d, &["extract", "--bogus"])), 1);
    assert_eq!(
        code(&featint(d, &["--model", "knn", "train", "ex/paths.jsonl", "-o", "t"])),
        1
    );
    assert_eq!(
        code(&featint(d, &["--set", "nonsense", "mine", "ex/deps.jsonl", "-o", "m"])),
        1
    );
    assert_eq!(code(&featint(d, &["mine", "missing.jsonl", "-o", "m"])), 2);

    fs::write(d.join("empty.txt"), "").unwrap();
    assert_eq!(
        code(&featint(
            d,
            &["extract", "bench/liftkit/liftkit.flc", "empty.txt", "-o", "x"]
        )),
        2
    );
    fs::write(d.join("broken.flc"), "void main() {\n  x = ;\n}\n").unwrap();
    fs::write(d.join("one.txt"), "p: \n").unwrap();
    assert_eq!(code(&featint(d, &["extract", "broken.flc", "one.txt", "-o", "x"])), 2);

    let o = featint(
        d,
        &[
            "--timeout-secs",
            "0.000001",
            "extract",
            "bench/liftkit/liftkit.flc",
            "bench/liftkit/products.txt",
            "-o",
            "slow",
        ],
    );
    assert_eq!(code(&o), 3);
    assert!(d.join("slow/paths.jsonl").exists());

    assert_eq!(
        code(&featint(
            d,
            &["--source", "stack", "train", "ex/paths.jsonl", "-o", "tr"]
        )),
        0
    );
    let o = featint(
        d,
        &[
            "--source",
            "combined",
            "predict",
            "tr/model.json",
            "ex/paths.jsonl",
            "-o",
            "pr",
        ],
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("stack"));
    assert_eq!(
        code(&featint(d, &["predict", "tr/model.json", "ex/paths.jsonl", "-o", "pr"])),
        0
    );
}

#[test]
fn extract_counts_match_the_engine() {
    let dir = extracted();
    let d = dir.path();
    let suite = bench::liftkit(0);
    let unit = annotate_metadata_vars(&parse_unit(&suite.source, &suite.file_name).unwrap()).unwrap();
    let config = EngineConfig::default();
    let summary = rows(&d.join("ex/extract_summary.csv"));
    assert_eq!(summary.len(), suite.products.len());
    let mut records = 0;
    for (row, p) in summary.iter().zip(&suite.products) {
        assert_eq!(row[0], p.name);
        let ir = resolve_product(
            &unit,
            p,
            &LowerOptions {
                loop_bound: config.loop_bound,
            },
        )
        .unwrap();
        let r = extract_feature_models(&ir, &config).unwrap();
        let count = |s| r.with_status(s).count().to_string();
        assert_eq!(row[1], r.paths.len().to_string());
        assert_eq!(row[2], count(PathStatus::Normal));
        assert_eq!(row[3], count(PathStatus::Failure));
        assert_eq!(row[4], count(PathStatus::BoundExhausted));
        assert_eq!(
            (row[5].clone(), row[6].clone()),
            (r.ss.len().to_string(), r.sl.len().to_string())
        );
        records += r.fail_paths().count() + r.normal_paths().count();
    }
    let written = fs::read_to_string(d.join("ex/paths.jsonl")).unwrap().lines().count();
    assert_eq!(written, records);
}

#[test]
fn predict_flags_the_seeded_failures() {
    let dir = extracted();
    let d = dir.path();
    assert_eq!(code(&featint(d, &["train", "ex/paths.jsonl", "-o", "tr"])), 0);
    let o = featint(d, &["predict", "tr/model.json", "ex/paths.jsonl", "-o", "pr"]);
    assert_eq!(code(&o), 0);
    let suite = bench::liftkit(0);
    let mut per_spec: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for row in rows(&d.join("pr/predictions.csv")) {
        if row[2] == "failure" {
            let e = per_spec.entry(row[3].clone()).or_default();
            e.0 += 1;
            e.1 += (row[4] == "failure") as usize;
        }
    }
    for i in suite.interactions.iter().filter(|i| i.guarded) {
        let (total, flagged) = per_spec[&i.spec_id];
        assert!(total > 0 && flagged == total, "spec {}: {flagged}/{total}", i.spec_id);
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("paths flagged"));
}

#[test]
fn strict_thresholds_leave_an_empty_rule_report() {
    let dir = extracted();
    let d = dir.path();
    let o = featint(
        d,
        &[
            "--min-support",
            "1.0",
            "--min-confidence",
            "1.0",
            "mine",
            "ex/deps.jsonl",
            "-o",
            "mi",
        ],
    );
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(d.join("mi/rules.csv")).unwrap();
    assert!(text.starts_with("# featint "));
    assert!(text.contains("\"min-support\":1.0"));
    assert!(rows(&d.join("mi/rules.csv")).is_empty());
    assert_eq!(code(&featint(d, &["mine", "ex/deps.jsonl", "-o", "mi2"])), 0);
    assert!(!rows(&d.join("mi2/rules.csv")).is_empty());
}

#[test]
fn config_file_then_set_then_flags() {
    let dir = extracted();
    let d = dir.path();
    fs::write(
        d.join("run.conf"),
        "# tuned\nmin-support = 0.5\nmin-confidence = 0.9\nseed = 4\n",
    )
    .unwrap();
    let o = featint(
        d,
        &[
            "--config",
            "run.conf",
            "--set",
            "min-confidence=0.8",
            "--seed",
            "9",
            "mine",
            "ex/deps.jsonl",
            "-o",
            "mi",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.join("mi/rules.csv")).unwrap();
    assert!(text.contains("\"seed\":9"));
    assert!(text.contains("\"min-support\":0.5"));
    assert!(text.contains("\"min-confidence\":0.8"));
    fs::write(d.join("bad.conf"), "min-suport = 0.5\n").unwrap();
    assert_eq!(
        code(&featint(
            d,
            &["--config", "bad.conf", "mine", "ex/deps.jsonl", "-o", "mi"]
        )),
        2
    );
}

#[test]
fn name_and_directive_location_agree_on_generated_suites() {
    for name in bench::SUITE_NAMES {
        let suite = bench::by_name(name, 0).unwrap();
        let out = extract_suite(&suite, &EngineConfig::default()).unwrap();
        let key = |r: &featint_core::featloc::FeatureDepRecord| {
            (
                r.kind,
                r.source.to_string(),
                r.dest.to_string(),
                r.src_loc.clone(),
                r.dst_loc.clone(),
            )
        };
        let mut by_name: Vec<_> = locate_all(&out.deps, LocateMode::Name, DEFAULT_ROLE_SEPARATOR)
            .unwrap()
            .iter()
            .map(key)
            .collect();
        let mut by_directive: Vec<_> = locate_all(&out.deps, LocateMode::Directive, DEFAULT_ROLE_SEPARATOR)
            .unwrap()
            .iter()
            .map(key)
            .collect();
        by_name.sort();
        by_directive.sort();
        assert!(!by_name.is_empty());
        assert_eq!(by_name, by_directive, "{name}");
    }
}
