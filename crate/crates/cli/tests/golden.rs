//! Pins CSV schemas and values. Regenerate with `UPDATE_GOLDEN=1 cargo test -p endodemand-cli --test golden`.

use std::path::PathBuf;
use std::process::Command;

fn check(name: &str, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_endodemand"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let got = String::from_utf8(out.stdout).unwrap();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &got).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(got, want, "{name} drifted");
}

#[test]
fn closed_form_bernoulli() {
    check(
        "closed_form_bernoulli.csv",
        &[
            "closed-form",
            "--law",
            "bernoulli",
            "--p",
            "0.3",
            "--alpha",
            "1",
            "--s-grid",
            "0:3:13",
        ],
    );
}

#[test]
fn demand_poisson() {
    check(
        "demand_poisson.csv",
        &[
            "demand", "--law", "poisson", "--lambda", "2", "--alpha", "1", "--s-grid", "0:2:11",
        ],
    );
}

#[test]
fn demand_lognormal_sampled() {
    check(
        "demand_lognormal.csv",
        &[
            "demand",
            "--law",
            "lognormal",
            "--mu",
            "-0.125",
            "--sigma2",
            "0.25",
            "--eta",
            "1",
            "--wealth",
            "2",
            "--seed",
            "2024",
            "--samples",
            "5000",
            "--s-grid",
            "0:4:9",
        ],
    );
}

#[test]
fn cross_impact_normal_sampled() {
    check(
        "cross_impact_normal.csv",
        &[
            "cross-impact",
            "--law",
            "normal",
            "--mu",
            "1",
            "--sigma2",
            "0.04",
            "--alpha",
            "1",
            "--seed",
            "9",
            "--samples",
            "4000",
            "--s1-grid",
            "0,1",
            "--s2-grid",
            "0,1",
        ],
    );
}
